//! Neutral motion-sequence container: `sequence.json` describing the capture
//! plus little-endian f32 arrays for poses, betas and per-frame camera
//! extrinsics, and the original frames as numbered images.
//!
//! Layout of a sequence directory:
//! - `sequence.json`  header (id, frame rate, split, dimensions, intrinsics)
//! - `poses.bin`      f32 `[frame][subject][J*3 axis-angles + 3 root]`
//! - `betas.bin`      f32 `[subject][B]`
//! - `extrinsics.bin` f32 `[frame][9 rotation row-major + 3 translation]`
//! - `frames/`        `%06d.png` (or `.jpg`) original video frames

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::body::{PoseParams, ShapeParams};
use crate::render::FrameImage;
use crate::scene::CameraModel;
use crate::{Mat3, Vec3};

/// Dataset partition of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Validation,
}

impl Split {
    pub fn dir_name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Validation => "validation",
        }
    }

    pub fn all() -> [Split; 3] {
        [Split::Train, Split::Test, Split::Validation]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

/// A fully ingested and validated motion sequence.
#[derive(Debug, Clone)]
pub struct SequenceInput {
    pub id: String,
    pub frame_rate: f64,
    pub split: Split,
    pub intrinsics: Intrinsics,
    /// Shape coefficients per subject.
    pub betas: Vec<ShapeParams>,
    /// `poses[frame][subject]`.
    pub poses: Vec<Vec<PoseParams>>,
    /// World-to-camera (rotation, translation) per frame.
    pub extrinsics: Vec<(Mat3, Vec3)>,
    /// Original frame image paths, one per frame (empty until ingested from
    /// disk).
    pub frame_files: Vec<PathBuf>,
}

impl SequenceInput {
    pub fn num_frames(&self) -> usize {
        self.poses.len()
    }

    pub fn num_subjects(&self) -> usize {
        self.betas.len()
    }

    pub fn joint_count(&self) -> usize {
        self.poses
            .first()
            .and_then(|f| f.first())
            .map(|p| p.joint_rotations.len())
            .unwrap_or(0)
    }

    /// Camera for a frame (shared intrinsics, per-frame extrinsics).
    pub fn camera(&self, frame: usize) -> Result<CameraModel, PipelineError> {
        let (rotation, translation) = self.extrinsics[frame];
        CameraModel::new(
            self.intrinsics.fx,
            self.intrinsics.fy,
            self.intrinsics.cx,
            self.intrinsics.cy,
            self.intrinsics.width,
            self.intrinsics.height,
            rotation,
            translation,
        )
        .map_err(|e| PipelineError::Ingest(format!("{}: frame {frame}: {e}", self.id)))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let ingest = |msg: String| PipelineError::Ingest(format!("{}: {msg}", self.id));
        if !self.frame_rate.is_finite() || self.frame_rate <= 0.0 {
            return Err(ingest(format!("frame_rate must be > 0, got {}", self.frame_rate)));
        }
        if self.num_subjects() == 0 {
            return Err(ingest("sequence needs at least one subject".into()));
        }
        if self.num_frames() == 0 {
            return Err(ingest("sequence has no frames".into()));
        }
        if self.extrinsics.len() != self.num_frames() {
            return Err(ingest(format!(
                "poses cover {} frames but extrinsics cover {}",
                self.num_frames(),
                self.extrinsics.len()
            )));
        }
        for (f, frame) in self.poses.iter().enumerate() {
            if frame.len() != self.num_subjects() {
                return Err(ingest(format!(
                    "frame {f} has {} subject poses, expected {}",
                    frame.len(),
                    self.num_subjects()
                )));
            }
        }
        if !self.frame_files.is_empty() && self.frame_files.len() != self.num_frames() {
            return Err(ingest(format!(
                "{} frame images for {} frames",
                self.frame_files.len(),
                self.num_frames()
            )));
        }
        Ok(())
    }

    /// Load the original frame image for a frame index.
    pub fn load_frame(&self, frame: usize) -> Result<FrameImage, PipelineError> {
        super::decode_frame(&self.frame_files[frame])
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SequenceHeader {
    format: String,
    version: u32,
    endianness: String,
    id: String,
    frame_rate: f64,
    split: Split,
    num_frames: usize,
    num_subjects: usize,
    joint_count: usize,
    beta_count: usize,
    intrinsics: Intrinsics,
}

const FORMAT_NAME: &str = "motion-sequence";

fn read_f32_file(path: &Path, expected: usize, what: &str) -> Result<Vec<f64>, PipelineError> {
    let bytes = fs::read(path).map_err(|e| PipelineError::Ingest(format!("{}: {e}", path.display())))?;
    if bytes.len() != expected * 4 {
        return Err(PipelineError::Ingest(format!(
            "{}: expected {expected} f32 values for {what} ({} bytes), found {} bytes",
            path.display(),
            expected * 4,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// Read and validate a sequence directory.
pub fn ingest_sequence(dir: &Path) -> Result<SequenceInput, PipelineError> {
    let header_path = dir.join("sequence.json");
    let text = fs::read_to_string(&header_path)
        .map_err(|e| PipelineError::Ingest(format!("{}: {e}", header_path.display())))?;
    let header: SequenceHeader = serde_json::from_str(&text)
        .map_err(|e| PipelineError::Ingest(format!("{}: {e}", header_path.display())))?;
    if header.format != FORMAT_NAME {
        return Err(PipelineError::Ingest(format!(
            "{}: unexpected format tag {:?}",
            header_path.display(),
            header.format
        )));
    }
    if header.endianness != "little" {
        return Err(PipelineError::Ingest(format!(
            "{}: unsupported endianness {:?}",
            header_path.display(),
            header.endianness
        )));
    }
    let (n, s, j, b) = (header.num_frames, header.num_subjects, header.joint_count, header.beta_count);
    let pose_stride = j * 3 + 3;

    let poses_flat = read_f32_file(&dir.join("poses.bin"), n * s * pose_stride, "poses")?;
    let betas_flat = read_f32_file(&dir.join("betas.bin"), s * b, "betas")?;
    let extr_flat = read_f32_file(&dir.join("extrinsics.bin"), n * 12, "extrinsics")?;

    let mut poses = Vec::with_capacity(n);
    for f in 0..n {
        let mut frame = Vec::with_capacity(s);
        for subj in 0..s {
            let base = (f * s + subj) * pose_stride;
            let chunk = &poses_flat[base..base + pose_stride];
            if chunk.iter().any(|x| !x.is_finite()) {
                return Err(PipelineError::Ingest(format!(
                    "poses.bin: non-finite value at frame {f}, subject {subj}"
                )));
            }
            let rotations = (0..j)
                .map(|k| Vec3::new(chunk[k * 3], chunk[k * 3 + 1], chunk[k * 3 + 2]))
                .collect();
            let root = Vec3::new(chunk[j * 3], chunk[j * 3 + 1], chunk[j * 3 + 2]);
            frame.push(
                PoseParams::new(rotations, root)
                    .map_err(|e| PipelineError::Ingest(format!("frame {f}, subject {subj}: {e}")))?,
            );
        }
        poses.push(frame);
    }

    let betas = (0..s)
        .map(|subj| {
            let chunk = betas_flat[subj * b..(subj + 1) * b].to_vec();
            ShapeParams::new(chunk)
                .map_err(|e| PipelineError::Ingest(format!("betas.bin: subject {subj}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut extrinsics = Vec::with_capacity(n);
    for f in 0..n {
        let c = &extr_flat[f * 12..(f + 1) * 12];
        if c.iter().any(|x| !x.is_finite()) {
            return Err(PipelineError::Ingest(format!(
                "extrinsics.bin: non-finite value at frame {f}"
            )));
        }
        let rotation = Mat3::new(c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7], c[8]);
        let translation = Vec3::new(c[9], c[10], c[11]);
        extrinsics.push((rotation, translation));
    }

    let frames_dir = dir.join("frames");
    let mut frame_files = Vec::with_capacity(n);
    for f in 0..n {
        let stem = frames_dir.join(format!("{f:06}"));
        let png = stem.with_extension("png");
        let jpg = stem.with_extension("jpg");
        if png.exists() {
            frame_files.push(png);
        } else if jpg.exists() {
            frame_files.push(jpg);
        } else {
            return Err(PipelineError::Ingest(format!(
                "frames: missing image for frame {f} ({} or .jpg)",
                png.display()
            )));
        }
    }

    let seq = SequenceInput {
        id: header.id,
        frame_rate: header.frame_rate,
        split: header.split,
        intrinsics: header.intrinsics,
        betas,
        poses,
        extrinsics,
        frame_files,
    };
    seq.validate()?;
    // Extrinsics must be valid rotations; CameraModel checks SO(3).
    for f in 0..seq.num_frames() {
        seq.camera(f)?;
    }
    Ok(seq)
}

/// Write a sequence directory (header, binaries, and the original frames as
/// PNG files).
pub fn write_sequence(
    dir: &Path,
    seq: &SequenceInput,
    frames: &[FrameImage],
) -> Result<(), PipelineError> {
    seq.validate()?;
    if frames.len() != seq.num_frames() {
        return Err(PipelineError::Ingest(format!(
            "{}: {} frame images for {} frames",
            seq.id,
            frames.len(),
            seq.num_frames()
        )));
    }
    fs::create_dir_all(dir.join("frames"))?;
    let header = SequenceHeader {
        format: FORMAT_NAME.to_string(),
        version: 1,
        endianness: "little".to_string(),
        id: seq.id.clone(),
        frame_rate: seq.frame_rate,
        split: seq.split,
        num_frames: seq.num_frames(),
        num_subjects: seq.num_subjects(),
        joint_count: seq.joint_count(),
        beta_count: seq.betas.first().map(|b| b.betas.len()).unwrap_or(0),
        intrinsics: seq.intrinsics,
    };
    fs::write(dir.join("sequence.json"), serde_json::to_string_pretty(&header)?)?;

    let mut pose_bytes = Vec::new();
    for frame in &seq.poses {
        for pose in frame {
            for aa in &pose.joint_rotations {
                for v in aa.iter() {
                    pose_bytes.extend_from_slice(&(*v as f32).to_le_bytes());
                }
            }
            for v in pose.root_translation.iter() {
                pose_bytes.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    fs::write(dir.join("poses.bin"), pose_bytes)?;

    let mut beta_bytes = Vec::new();
    for b in &seq.betas {
        for v in &b.betas {
            beta_bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    fs::write(dir.join("betas.bin"), beta_bytes)?;

    let mut extr_bytes = Vec::new();
    for (r, t) in &seq.extrinsics {
        for row in 0..3 {
            for col in 0..3 {
                extr_bytes.extend_from_slice(&(r[(row, col)] as f32).to_le_bytes());
            }
        }
        for v in t.iter() {
            extr_bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    fs::write(dir.join("extrinsics.bin"), extr_bytes)?;

    for (f, img) in frames.iter().enumerate() {
        let path = dir.join("frames").join(format!("{f:06}.png"));
        super::encode_png(img, &path)?;
    }
    Ok(())
}
