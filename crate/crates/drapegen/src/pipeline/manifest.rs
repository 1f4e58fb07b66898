//! Dataset manifest: one JSON file per split listing every generated video,
//! its segment record, frame files, and per-subject keypoint annotations.
//! `audit` verifies the manifest <-> file-tree bijection and the
//! split/original/generated/frame layout.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PipelineError, Split};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// How a segment ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentStatus {
    /// Reached the end of the source sequence.
    Completed,
    /// The blanket drifted past the detach threshold.
    Detached,
    /// The solver produced non-finite positions.
    SimError,
}

/// Bookkeeping for one generated segment (= one generated video).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentRecord {
    /// First emitted source-frame index.
    pub start_frame: usize,
    /// Last emitted source-frame index (inclusive).
    pub end_frame: usize,
    pub subject: usize,
    pub status: SegmentStatus,
    /// Blanket albedo for this video.
    pub color: [f64; 3],
    /// Derived RNG seed the color was drawn from.
    pub seed: u64,
}

/// Keypoint annotations for one subject across a video's frames.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubjectAnnotations {
    pub index: usize,
    /// True for exactly the subject the blanket occludes.
    pub occluded: bool,
    /// `[frame][joint]` world-space joints, meters (recentered frame:
    /// the occluded subject's root sits at the origin).
    pub joints3d: Vec<Vec<[f64; 3]>>,
    /// `[frame][joint]` pixel-space projections; `None` for joints behind
    /// the camera.
    pub joints2d: Vec<Vec<Option<[f64; 2]>>>,
}

/// One generated video.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoEntry {
    /// Generated video folder name, unique within the split.
    pub id: String,
    /// Source sequence id (the original video folder).
    pub source_sequence: String,
    pub subject: usize,
    pub segment: SegmentRecord,
    /// Frame files relative to the split directory.
    pub frames: Vec<String>,
    pub subjects: Vec<SubjectAnnotations>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub split: Split,
    pub videos: Vec<VideoEntry>,
}

/// Write the manifest for one split, rejecting duplicate video ids.
pub fn write_manifest(
    split_dir: &Path,
    split: Split,
    videos: Vec<VideoEntry>,
) -> Result<DatasetManifest, PipelineError> {
    let mut seen = BTreeSet::new();
    for v in &videos {
        if !seen.insert(v.id.clone()) {
            return Err(PipelineError::DuplicateVideo(v.id.clone()));
        }
    }
    let manifest = DatasetManifest { schema_version: MANIFEST_SCHEMA_VERSION, split, videos };
    fs::create_dir_all(split_dir)?;
    fs::write(split_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest, PipelineError> {
    let text = fs::read_to_string(path)
        .map_err(|e| PipelineError::Ingest(format!("{}: {e}", path.display())))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| PipelineError::Ingest(format!("{}: {e}", path.display())))?;
    if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(PipelineError::Ingest(format!(
            "{}: unsupported manifest schema version {}",
            path.display(),
            manifest.schema_version
        )));
    }
    Ok(manifest)
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub splits: usize,
    pub videos: usize,
    pub frames: usize,
}

fn collect_frame_files(split_dir: &Path) -> Result<BTreeSet<String>, PipelineError> {
    let mut files = BTreeSet::new();
    for orig in fs::read_dir(split_dir)? {
        let orig = orig?;
        let orig_path = orig.path();
        if !orig_path.is_dir() {
            let name = orig.file_name().to_string_lossy().into_owned();
            if name != MANIFEST_FILE {
                return Err(PipelineError::Audit(format!(
                    "unexpected file at split level: {}",
                    orig_path.display()
                )));
            }
            continue;
        }
        for gen in fs::read_dir(&orig_path)? {
            let gen = gen?;
            let gen_path = gen.path();
            if !gen_path.is_dir() {
                return Err(PipelineError::Audit(format!(
                    "unexpected file at original-video level: {}",
                    gen_path.display()
                )));
            }
            for frame in fs::read_dir(&gen_path)? {
                let frame = frame?;
                let frame_path = frame.path();
                if !frame_path.is_file() {
                    return Err(PipelineError::Audit(format!(
                        "unexpected directory at frame level: {}",
                        frame_path.display()
                    )));
                }
                let name = frame.file_name().to_string_lossy().into_owned();
                if name == "telemetry.tsv" {
                    continue; // debugging sidecar, not a dataset frame
                }
                let stem = name.split('.').next().unwrap_or("");
                if stem.len() != 6 || stem.chars().any(|c| !c.is_ascii_digit()) {
                    return Err(PipelineError::Audit(format!(
                        "frame file not named %06d.<ext>: {}",
                        frame_path.display()
                    )));
                }
                files.insert(format!(
                    "{}/{}/{}",
                    orig.file_name().to_string_lossy(),
                    gen.file_name().to_string_lossy(),
                    name
                ));
            }
        }
    }
    Ok(files)
}

/// Verify that `manifest.json` in every split directory is in bijection with
/// the frame files on disk and that the directory layout conforms to
/// `<split>/<original>/<generated>/<frame>`.
pub fn audit_output(outdir: &Path) -> Result<AuditReport, PipelineError> {
    let mut report = AuditReport::default();
    let mut any = false;
    for split in Split::all() {
        let split_dir = outdir.join(split.dir_name());
        if !split_dir.exists() {
            continue;
        }
        any = true;
        let manifest = read_manifest(&split_dir.join(MANIFEST_FILE))?;
        if manifest.split != split {
            return Err(PipelineError::Audit(format!(
                "{}: manifest says split {:?}",
                split_dir.display(),
                manifest.split
            )));
        }
        let mut listed = BTreeMap::new();
        for video in &manifest.videos {
            if video.frames.is_empty() {
                return Err(PipelineError::Audit(format!("video {} lists no frames", video.id)));
            }
            let expected_count = video.segment.end_frame - video.segment.start_frame + 1;
            if video.frames.len() != expected_count {
                return Err(PipelineError::Audit(format!(
                    "video {}: segment [{}, {}] but {} frame files listed",
                    video.id,
                    video.segment.start_frame,
                    video.segment.end_frame,
                    video.frames.len()
                )));
            }
            for (i, f) in video.frames.iter().enumerate() {
                let prefix = format!("{}/{}/", video.source_sequence, video.id);
                if !f.starts_with(&prefix) {
                    return Err(PipelineError::Audit(format!(
                        "video {}: frame path {f} does not live under {prefix}",
                        video.id
                    )));
                }
                let expected_idx = video.segment.start_frame + i;
                let stem = f.rsplit('/').next().unwrap_or("").split('.').next().unwrap_or("");
                if stem != format!("{expected_idx:06}") {
                    return Err(PipelineError::Audit(format!(
                        "video {}: frame {i} named {f}, expected index {expected_idx:06}",
                        video.id
                    )));
                }
                if listed.insert(f.clone(), video.id.clone()).is_some() {
                    return Err(PipelineError::Audit(format!(
                        "frame {f} listed by more than one video"
                    )));
                }
            }
        }
        let on_disk = collect_frame_files(&split_dir)?;
        for f in listed.keys() {
            if !on_disk.contains(f) {
                return Err(PipelineError::Audit(format!(
                    "{}: listed frame missing on disk: {f}",
                    split.dir_name()
                )));
            }
        }
        for f in &on_disk {
            if !listed.contains_key(f) {
                return Err(PipelineError::Audit(format!(
                    "{}: frame on disk not in manifest: {f}",
                    split.dir_name()
                )));
            }
        }
        report.splits += 1;
        report.videos += manifest.videos.len();
        report.frames += listed.len();
    }
    if !any {
        return Err(PipelineError::Audit(format!(
            "{}: no split directories found",
            outdir.display()
        )));
    }
    Ok(report)
}
