//! Generation config. Every CLI flag has a matching key in the flat
//! `key=value` config file (same spelling as the long flag, e.g.
//! `grid-res=76`); explicit CLI flags override file values.

use std::fmt;
use std::path::Path;

use super::PipelineError;
use crate::scene::SceneConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoder {
    Png,
    Jpeg,
}

impl Encoder {
    pub fn extension(&self) -> &'static str {
        match self {
            Encoder::Png => "png",
            Encoder::Jpeg => "jpg",
        }
    }
}

impl std::str::FromStr for Encoder {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "png" => Ok(Encoder::Png),
            "jpeg" | "jpg" => Ok(Encoder::Jpeg),
            other => Err(format!("unknown encoder {other:?} (expected png or jpeg)")),
        }
    }
}

impl fmt::Display for Encoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoder::Png => "png",
            Encoder::Jpeg => "jpeg",
        })
    }
}

#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub seed: u64,
    /// Particles per cloth side (76 -> 75^2 quads).
    pub grid_res: usize,
    pub substeps: usize,
    pub collision_iters: usize,
    pub constraint_iters: usize,
    /// Collision margin, meters.
    pub margin: f64,
    /// Warm-up frames before the first emitted frame.
    pub warmup: usize,
    /// Minimum gap between consecutive segment starts, frames.
    pub min_restart_gap: usize,
    pub detach_threshold: f64,
    pub encoder: Encoder,
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
    pub scene: SceneConfig,
    /// Total blanket mass, kg.
    pub total_mass: f64,
    pub damping: f64,
    pub stretch_stiffness: f64,
    pub bend_stiffness: f64,
    pub gravity: f64,
    pub pose_blendshapes: bool,
    pub ambient_floor: f64,
    pub supersample: bool,
    /// Render-only subdivision levels for the cloth mesh.
    pub subdivision_levels: usize,
    /// Write per-segment telemetry.tsv next to the frames.
    pub telemetry: bool,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            grid_res: 76,
            substeps: 15,
            collision_iters: 10,
            constraint_iters: 8,
            margin: 0.0005,
            warmup: 24,
            min_restart_gap: 48,
            detach_threshold: 0.30,
            encoder: Encoder::Png,
            jobs: 0,
            scene: SceneConfig::default(),
            total_mass: 0.3,
            damping: 0.02,
            stretch_stiffness: 1.0,
            bend_stiffness: 0.5,
            gravity: 9.81,
            pose_blendshapes: true,
            ambient_floor: 0.15,
            supersample: false,
            subdivision_levels: 1,
            telemetry: false,
        }
    }
}

fn bad_value(key: &str, value: &str, err: impl fmt::Display) -> PipelineError {
    PipelineError::Config(format!("key {key:?}: bad value {value:?}: {err}"))
}

impl GenerateConfig {
    /// Set a single `key=value` entry (flag-spelled keys).
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        macro_rules! parse {
            ($t:ty) => {
                value.parse::<$t>().map_err(|e| bad_value(key, value, e))?
            };
        }
        match key {
            "seed" => self.seed = parse!(u64),
            "grid-res" => self.grid_res = parse!(usize),
            "substeps" => self.substeps = parse!(usize),
            "collision-iters" => self.collision_iters = parse!(usize),
            "constraint-iters" => self.constraint_iters = parse!(usize),
            "margin" => self.margin = parse!(f64),
            "warmup" => self.warmup = parse!(usize),
            "min-restart-gap" => self.min_restart_gap = parse!(usize),
            "detach-threshold" => {
                self.detach_threshold = parse!(f64);
                self.scene.detach_threshold = self.detach_threshold;
            }
            "encoder" => self.encoder = parse!(Encoder),
            "jobs" => self.jobs = parse!(usize),
            "bed-gap" => self.scene.bed_gap = parse!(f64),
            "blanket-offset" => self.scene.blanket_offset = parse!(f64),
            "blanket-width" => self.scene.blanket_size.0 = parse!(f64),
            "blanket-length" => self.scene.blanket_size.1 = parse!(f64),
            "bed-width" => self.scene.bed_size.0 = parse!(f64),
            "bed-length" => self.scene.bed_size.1 = parse!(f64),
            "bed-thickness" => self.scene.bed_size.2 = parse!(f64),
            "sun-direction" => {
                let parts: Vec<&str> = value.split(',').collect();
                if parts.len() != 3 {
                    return Err(bad_value(key, value, "expected x,y,z"));
                }
                let mut d = [0.0; 3];
                for (i, p) in parts.iter().enumerate() {
                    d[i] = p.trim().parse::<f64>().map_err(|e| bad_value(key, value, e))?;
                }
                self.scene.sun_direction = Some(d);
            }
            "total-mass" => self.total_mass = parse!(f64),
            "damping" => self.damping = parse!(f64),
            "stretch-stiffness" => self.stretch_stiffness = parse!(f64),
            "bend-stiffness" => self.bend_stiffness = parse!(f64),
            "gravity" => self.gravity = parse!(f64),
            "pose-blendshapes" => self.pose_blendshapes = parse!(bool),
            "ambient-floor" => self.ambient_floor = parse!(f64),
            "supersample" => self.supersample = parse!(bool),
            "subdivision-levels" => self.subdivision_levels = parse!(usize),
            "telemetry" => self.telemetry = parse!(bool),
            other => {
                return Err(PipelineError::Config(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    /// Apply a flat `key=value` file (blank lines and `#` comments allowed).
    pub fn apply_file(&mut self, path: &Path) -> Result<(), PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(PipelineError::Config(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            self.set_key(key.trim(), value.trim())
                .map_err(|e| PipelineError::Config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.grid_res < 2 {
            return Err(PipelineError::Config(format!(
                "grid-res must be >= 2, got {}",
                self.grid_res
            )));
        }
        if self.substeps == 0 {
            return Err(PipelineError::Config("substeps must be >= 1".into()));
        }
        if !self.margin.is_finite() || self.margin <= 0.0 {
            return Err(PipelineError::Config(format!("margin must be > 0, got {}", self.margin)));
        }
        if self.min_restart_gap == 0 {
            return Err(PipelineError::Config("min-restart-gap must be >= 1".into()));
        }
        self.scene.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_pin_documented_values() {
        let c = GenerateConfig::default();
        assert_eq!(c.grid_res, 76);
        assert_eq!(c.substeps, 15);
        assert_eq!(c.collision_iters, 10);
        assert_eq!(c.margin, 0.0005);
        assert_eq!(c.warmup, 24);
        assert_eq!(c.min_restart_gap, 48);
        assert_eq!(c.detach_threshold, 0.30);
        assert_eq!(c.encoder, Encoder::Png);
        c.validate().unwrap();
    }

    #[test]
    fn config_file_mirrors_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.conf");
        std::fs::write(
            &path,
            "# comment\n\
             seed=99\n\
             grid-res=20\n\
             substeps = 5\n\
             detach-threshold=0.4\n\
             encoder=jpeg\n\
             sun-direction=0,0,1\n\
             supersample=true\n",
        )
        .unwrap();
        let mut c = GenerateConfig::default();
        c.apply_file(&path).unwrap();
        assert_eq!(c.seed, 99);
        assert_eq!(c.grid_res, 20);
        assert_eq!(c.substeps, 5);
        assert_eq!(c.detach_threshold, 0.4);
        assert_eq!(c.scene.detach_threshold, 0.4);
        assert_eq!(c.encoder, Encoder::Jpeg);
        assert_eq!(c.scene.sun_direction, Some([0.0, 0.0, 1.0]));
        assert!(c.supersample);
    }

    #[test]
    fn unknown_key_and_bad_value_are_reported_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.conf");
        std::fs::write(&path, "nope=1\n").unwrap();
        let err = GenerateConfig::default().apply_file(&path).unwrap_err().to_string();
        assert!(err.contains("nope") && err.contains(":1"), "{err}");

        std::fs::write(&path, "\nseed=abc\n").unwrap();
        let err = GenerateConfig::default().apply_file(&path).unwrap_err().to_string();
        assert!(err.contains(":2") && err.contains("seed"), "{err}");
    }
}
