//! Pose-estimator predictions: `predictions.json` (entry index) plus
//! `joints.bin` (little-endian f32 `[entry][joint][3]`), matched against a
//! dataset manifest and scored with PA-MPJPE / MPJPE.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DatasetManifest, PipelineError};
use crate::metrics::{
    aggregate, mpjpe, pa_mpjpe, select_subset14, MetricSample, SampleFilter,
};
use crate::Vec3;

const FORMAT_NAME: &str = "joint-predictions";

#[derive(Debug, Clone)]
pub struct PredictionEntry {
    pub video: String,
    /// Absolute source-frame index.
    pub frame: usize,
    pub subject: usize,
    pub joints: Vec<Vec3>,
}

#[derive(Debug, Clone)]
pub struct PredictionSet {
    pub joint_count: usize,
    pub entries: Vec<PredictionEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictionHeader {
    format: String,
    version: u32,
    endianness: String,
    joint_count: usize,
    entries: Vec<PredictionKey>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictionKey {
    video: String,
    frame: usize,
    subject: usize,
}

fn resolve_dir(path: &Path) -> PathBuf {
    if path.is_file() {
        path.parent().unwrap_or(Path::new(".")).to_path_buf()
    } else {
        path.to_path_buf()
    }
}

/// Read a prediction container (pass either the directory or the
/// `predictions.json` path).
pub fn read_predictions(path: &Path) -> Result<PredictionSet, PipelineError> {
    let dir = resolve_dir(path);
    let header_path = dir.join("predictions.json");
    let text = fs::read_to_string(&header_path)
        .map_err(|e| PipelineError::Ingest(format!("{}: {e}", header_path.display())))?;
    let header: PredictionHeader = serde_json::from_str(&text)
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
    let joints_path = dir.join("joints.bin");
    let bytes = fs::read(&joints_path)
        .map_err(|e| PipelineError::Ingest(format!("{}: {e}", joints_path.display())))?;
    let expected = header.entries.len() * header.joint_count * 3 * 4;
    if bytes.len() != expected {
        return Err(PipelineError::Ingest(format!(
            "{}: expected {expected} bytes for {} entries x {} joints, found {}",
            joints_path.display(),
            header.entries.len(),
            header.joint_count,
            bytes.len()
        )));
    }
    let floats: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let stride = header.joint_count * 3;
    let entries = header
        .entries
        .into_iter()
        .enumerate()
        .map(|(i, key)| {
            let chunk = &floats[i * stride..(i + 1) * stride];
            if chunk.iter().any(|x| !x.is_finite()) {
                return Err(PipelineError::Ingest(format!(
                    "joints.bin: non-finite value in entry {i} (video {})",
                    key.video
                )));
            }
            Ok(PredictionEntry {
                video: key.video,
                frame: key.frame,
                subject: key.subject,
                joints: chunk.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PredictionSet { joint_count: header.joint_count, entries })
}

/// Write a prediction container.
pub fn write_predictions(dir: &Path, set: &PredictionSet) -> Result<(), PipelineError> {
    fs::create_dir_all(dir)?;
    let header = PredictionHeader {
        format: FORMAT_NAME.to_string(),
        version: 1,
        endianness: "little".to_string(),
        joint_count: set.joint_count,
        entries: set
            .entries
            .iter()
            .map(|e| PredictionKey { video: e.video.clone(), frame: e.frame, subject: e.subject })
            .collect(),
    };
    fs::write(dir.join("predictions.json"), serde_json::to_string_pretty(&header)?)?;
    let mut bytes = Vec::new();
    for e in &set.entries {
        if e.joints.len() != set.joint_count {
            return Err(PipelineError::Ingest(format!(
                "entry for video {} has {} joints, header says {}",
                e.video,
                e.joints.len(),
                set.joint_count
            )));
        }
        for j in &e.joints {
            for v in j.iter() {
                bytes.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    fs::write(dir.join("joints.bin"), bytes)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointSelection {
    All,
    Subset14,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub pa_mpjpe_mm: f64,
    pub mpjpe_mm: f64,
    pub samples: usize,
}

/// Score predictions against the manifest's ground-truth joints.
pub fn evaluate_predictions(
    set: &PredictionSet,
    manifest: &DatasetManifest,
    filter: SampleFilter,
    selection: JointSelection,
) -> Result<EvalReport, PipelineError> {
    let videos: HashMap<&str, &super::VideoEntry> =
        manifest.videos.iter().map(|v| (v.id.as_str(), v)).collect();
    let mut pa_samples = Vec::with_capacity(set.entries.len());
    let mut plain_samples = Vec::with_capacity(set.entries.len());
    for (i, entry) in set.entries.iter().enumerate() {
        let video = videos.get(entry.video.as_str()).ok_or_else(|| {
            PipelineError::Ingest(format!("entry {i}: video {:?} not in manifest", entry.video))
        })?;
        if entry.frame < video.segment.start_frame || entry.frame > video.segment.end_frame {
            return Err(PipelineError::Ingest(format!(
                "entry {i}: frame {} outside video {:?} range [{}, {}]",
                entry.frame, entry.video, video.segment.start_frame, video.segment.end_frame
            )));
        }
        let rel = entry.frame - video.segment.start_frame;
        let ann = video
            .subjects
            .iter()
            .find(|s| s.index == entry.subject)
            .ok_or_else(|| {
                PipelineError::Ingest(format!(
                    "entry {i}: subject {} not annotated in video {:?}",
                    entry.subject, entry.video
                ))
            })?;
        let gt: Vec<Vec3> =
            ann.joints3d[rel].iter().map(|j| Vec3::new(j[0], j[1], j[2])).collect();
        let (pred, gt) = match selection {
            JointSelection::All => (entry.joints.clone(), gt),
            JointSelection::Subset14 => (select_subset14(&entry.joints)?, select_subset14(&gt)?),
        };
        pa_samples.push(MetricSample { value_mm: pa_mpjpe(&pred, &gt)?, occluded: ann.occluded });
        plain_samples.push(MetricSample { value_mm: mpjpe(&pred, &gt)?, occluded: ann.occluded });
    }
    let retained = match filter {
        SampleFilter::All => pa_samples.len(),
        SampleFilter::OccludedOnly => pa_samples.iter().filter(|s| s.occluded).count(),
    };
    Ok(EvalReport {
        pa_mpjpe_mm: aggregate(&pa_samples, filter)?,
        mpjpe_mm: aggregate(&plain_samples, filter)?,
        samples: retained,
    })
}
