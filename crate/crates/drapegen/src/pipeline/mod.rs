//! End-to-end generation: ingest motion sequences, schedule segments with
//! warm-up / detach / restart logic, drive the simulation and renderer per
//! frame, and package frames plus a manifest into the
//! `<split>/<original>/<generated>/<frame>` layout.
//!
//! Scheduling is decoupled from the real simulator through [`SegmentDriver`],
//! so the restart policy can be exercised with scripted stubs.

mod config;
mod manifest;
mod predictions;
mod sequence;

pub use config::{Encoder, GenerateConfig};
pub use manifest::{
    audit_output, read_manifest, write_manifest, AuditReport, DatasetManifest, SegmentRecord,
    SegmentStatus, SubjectAnnotations, VideoEntry, MANIFEST_FILE, MANIFEST_SCHEMA_VERSION,
};
pub use predictions::{
    evaluate_predictions, read_predictions, write_predictions, EvalReport, JointSelection,
    PredictionEntry, PredictionSet,
};
pub use sequence::{ingest_sequence, write_sequence, Intrinsics, SequenceInput, Split};

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::body::{load_model_archive, BodyError, BodyTemplate, PoseParams, SkinnedMesh};
use crate::cloth::{
    build_cloth, is_detached, kinetic_energy, min_distance_to_body, step, telemetry_line,
    BedCollider, BodyCollider, ClothGrid, ColliderSet, SimError, SimParams,
};
use crate::metrics::MetricError;
use crate::render::{
    grid_triangles, rasterize_depth, render_blanket, sample_blanket_color, subdivide_grid,
    BlanketMaterial, FrameImage, RenderError, RenderOptions,
};
use crate::scene::{project, recenter_subject, Scene, SceneError};
use crate::Vec3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("ingest: {0}")]
    Ingest(String),
    #[error("config: {0}")]
    Config(String),
    #[error("audit: {0}")]
    Audit(String),
    #[error("duplicate video id {0:?}")]
    DuplicateVideo(String),
    #[error(transparent)]
    Body(#[from] BodyError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {source}")]
    IoAt { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
}

fn io_at(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::IoAt { path: path.to_path_buf(), source }
}

/// Outcome of building a segment's scene and running the warm-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeginOutcome {
    Ready,
    /// Warm-up failed (detach or solver failure); nothing was emitted.
    Aborted(SegmentStatus),
}

/// Outcome of simulating and rendering one source frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameOutcome {
    Emitted,
    Aborted(SegmentStatus),
}

/// A closed segment: emitted source frames `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentSpan {
    pub start: usize,
    pub end: usize,
    pub status: SegmentStatus,
}

/// Per-(sequence, subject) segment simulator driven by [`schedule_segments`].
pub trait SegmentDriver {
    /// Build the scene at `start_frame` and run the warm-up.
    fn begin(&mut self, start_frame: usize) -> Result<BeginOutcome, PipelineError>;
    /// Simulate, render and emit one source frame.
    fn advance(&mut self, frame: usize) -> Result<FrameOutcome, PipelineError>;
    /// Called once per non-empty segment after it closes.
    fn finish(&mut self, span: &SegmentSpan) -> Result<(), PipelineError>;
}

/// Run the segment loop over a sequence of `num_frames` frames.
///
/// Starting at frame s: warm up, then emit frames until the sequence ends
/// (status completed) or the simulation aborts at frame f, in which case the
/// segment closes at the last emitted frame and the next candidate start is
/// `max(f + 1, s + min_gap)`. Warm-up failures emit nothing and move the
/// start by `min_gap`. Every emitted frame belongs to exactly one segment.
pub fn schedule_segments<D: SegmentDriver>(
    driver: &mut D,
    num_frames: usize,
    min_gap: usize,
) -> Result<Vec<SegmentSpan>, PipelineError> {
    let min_gap = min_gap.max(1);
    let mut spans = Vec::new();
    let mut start = 0usize;
    while start < num_frames {
        if let BeginOutcome::Aborted(status) = driver.begin(start)? {
            log::info!("segment at frame {start} aborted during warm-up ({status:?})");
            start += min_gap;
            continue;
        }
        let mut last_emitted = None;
        let mut status = SegmentStatus::Completed;
        let mut next = num_frames;
        for frame in start..num_frames {
            match driver.advance(frame)? {
                FrameOutcome::Emitted => last_emitted = Some(frame),
                FrameOutcome::Aborted(st) => {
                    status = st;
                    next = (frame + 1).max(start + min_gap);
                    break;
                }
            }
        }
        if let Some(end) = last_emitted {
            let span = SegmentSpan { start, end, status };
            driver.finish(&span)?;
            spans.push(span);
        }
        if status == SegmentStatus::Completed {
            break;
        }
        start = next;
    }
    Ok(spans)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one segment, stable across worker counts and platforms.
pub fn derive_seed(base: u64, sequence_id: &str, subject: usize, start_frame: usize) -> u64 {
    let mut h = splitmix64(base);
    for &b in sequence_id.as_bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    h = splitmix64(h ^ subject as u64);
    splitmix64(h ^ start_frame as u64)
}

/// Encode a frame as lossless PNG.
pub fn encode_png(img: &FrameImage, path: &Path) -> Result<(), PipelineError> {
    use image::codecs::png::PngEncoder;
    use image::ImageEncoder;
    let file = fs::File::create(path).map_err(|e| io_at(path, e))?;
    PngEncoder::new(BufWriter::new(file))
        .write_image(
            &img.data,
            img.width as u32,
            img.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| PipelineError::Image { path: path.to_path_buf(), source: e })
}

/// Decode a frame image (PNG or JPEG) from disk.
pub fn decode_frame(path: &Path) -> Result<FrameImage, PipelineError> {
    let img = image::open(path)
        .map_err(|e| PipelineError::Image { path: path.to_path_buf(), source: e })?
        .to_rgb8();
    Ok(FrameImage {
        width: img.width() as usize,
        height: img.height() as usize,
        data: img.into_raw(),
    })
}

fn encode_jpeg(img: &FrameImage, path: &Path) -> Result<(), PipelineError> {
    use image::codecs::jpeg::JpegEncoder;
    use image::ImageEncoder;
    let file = fs::File::create(path).map_err(|e| io_at(path, e))?;
    JpegEncoder::new_with_quality(BufWriter::new(file), 90)
        .write_image(
            &img.data,
            img.width as u32,
            img.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| PipelineError::Image { path: path.to_path_buf(), source: e })
}

fn encode_frame(img: &FrameImage, path: &Path, encoder: Encoder) -> Result<(), PipelineError> {
    match encoder {
        Encoder::Png => encode_png(img, path),
        Encoder::Jpeg => encode_jpeg(img, path),
    }
}

struct ActiveSegment {
    video_id: String,
    seed: u64,
    material: BlanketMaterial,
    scene: Scene,
    params: SimParams,
    colliders: ColliderSet,
    cloth: ClothGrid,
    frames: Vec<String>,
    annotations: Vec<SubjectAnnotations>,
    telemetry: Vec<String>,
    dir_created: bool,
}

/// The real segment driver: poses the body, steps the cloth, renders,
/// composites, writes frames, and accumulates manifest entries for one
/// (sequence, subject) video family.
pub struct VideoRunner<'a> {
    seq: &'a SequenceInput,
    template: &'a BodyTemplate,
    subject: usize,
    config: &'a GenerateConfig,
    split_dir: PathBuf,
    current: Option<ActiveSegment>,
    entries: Vec<VideoEntry>,
}

impl<'a> VideoRunner<'a> {
    pub fn new(
        seq: &'a SequenceInput,
        template: &'a BodyTemplate,
        subject: usize,
        config: &'a GenerateConfig,
        output_root: &Path,
    ) -> Self {
        Self {
            seq,
            template,
            subject,
            config,
            split_dir: output_root.join(seq.split.dir_name()),
            current: None,
            entries: Vec::new(),
        }
    }

    pub fn into_entries(self) -> Vec<VideoEntry> {
        self.entries
    }

    /// Pose subject `u` at `frame` in the recentered world (the blanketed
    /// subject's root maps to the origin; other subjects keep their relative
    /// placement).
    fn pose_subject(&self, frame: usize, u: usize) -> Result<SkinnedMesh, PipelineError> {
        let blanket_root = self.seq.poses[frame][self.subject].root_translation;
        let src = &self.seq.poses[frame][u];
        let pose = PoseParams {
            joint_rotations: src.joint_rotations.clone(),
            root_translation: src.root_translation - blanket_root,
        };
        Ok(self
            .template
            .pose_mesh(&self.seq.betas[u], &pose, self.config.pose_blendshapes)?)
    }

    fn frame_camera(&self, frame: usize) -> Result<crate::scene::CameraModel, PipelineError> {
        let root = self.seq.poses[frame][self.subject].root_translation;
        Ok(recenter_subject(&root, &self.seq.camera(frame)?))
    }

    fn sim_params(&self, gravity_dir: Vec3) -> SimParams {
        SimParams {
            dt: 1.0 / self.seq.frame_rate,
            substeps: self.config.substeps,
            collision_iterations: self.config.collision_iters,
            constraint_iterations: self.config.constraint_iters,
            gravity_magnitude: self.config.gravity,
            gravity_dir,
            damping: self.config.damping,
            stretch_stiffness: self.config.stretch_stiffness,
            bend_stiffness: self.config.bend_stiffness,
        }
    }
}

impl SegmentDriver for VideoRunner<'_> {
    fn begin(&mut self, start_frame: usize) -> Result<BeginOutcome, PipelineError> {
        self.current = None;
        let seed = derive_seed(self.config.seed, &self.seq.id, self.subject, start_frame);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let material = sample_blanket_color(&mut rng);

        let camera = self.frame_camera(start_frame)?;
        let body = self.pose_subject(start_frame, self.subject)?;
        let scene = Scene::build(&body, &camera, &self.config.scene)?;
        let params = self.sim_params(scene.bed.a1);
        let colliders = ColliderSet {
            body: Some(BodyCollider::new(&body)),
            bed: Some(BedCollider::new(&scene.bed)),
            spheres: Vec::new(),
            margin: self.config.margin,
        };
        let mut cloth = build_cloth(
            &scene.placement,
            self.config.grid_res,
            self.config.scene.blanket_size,
            self.config.total_mass,
        )?;

        // Warm-up against the frozen first-frame body; abort on detach or
        // solver failure without emitting anything.
        for _ in 0..self.config.warmup {
            if step(&mut cloth, &colliders, &params).is_err() {
                return Ok(BeginOutcome::Aborted(SegmentStatus::SimError));
            }
            let dist = min_distance_to_body(&cloth, colliders.body.as_ref().unwrap());
            if is_detached(dist, self.config.detach_threshold) {
                return Ok(BeginOutcome::Aborted(SegmentStatus::Detached));
            }
        }

        let video_id = format!("{}_p{:02}_f{:06}", self.seq.id, self.subject, start_frame);
        let annotations = (0..self.seq.num_subjects())
            .map(|u| SubjectAnnotations {
                index: u,
                occluded: u == self.subject,
                joints3d: Vec::new(),
                joints2d: Vec::new(),
            })
            .collect();
        self.current = Some(ActiveSegment {
            video_id,
            seed,
            material,
            scene,
            params,
            colliders,
            cloth,
            frames: Vec::new(),
            annotations,
            telemetry: Vec::new(),
            dir_created: false,
        });
        Ok(BeginOutcome::Ready)
    }

    fn advance(&mut self, frame: usize) -> Result<FrameOutcome, PipelineError> {
        let camera = self.frame_camera(frame)?;
        let body = self.pose_subject(frame, self.subject)?;
        type AnnotationRow = (Vec<[f64; 3]>, Vec<Option<[f64; 2]>>);
        let annotation_rows: Vec<AnnotationRow> = (0..self.seq.num_subjects())
            .map(|u| -> Result<AnnotationRow, PipelineError> {
                let mesh =
                    if u == self.subject { body.clone() } else { self.pose_subject(frame, u)? };
                let joints3d = mesh.joints.iter().map(|j| [j.x, j.y, j.z]).collect();
                let joints2d = mesh
                    .joints
                    .iter()
                    .map(|j| project(&camera, j).map(|(px, py, _)| [px, py]))
                    .collect();
                Ok((joints3d, joints2d))
            })
            .collect::<Result<_, _>>()?;
        let original = self.seq.load_frame(frame)?;
        let seg = self.current.as_mut().expect("advance without begin");

        if let Some(collider) = seg.colliders.body.as_mut() {
            collider.update_vertices(&body.vertices);
        }
        if step(&mut seg.cloth, &seg.colliders, &seg.params).is_err() {
            return Ok(FrameOutcome::Aborted(SegmentStatus::SimError));
        }
        let dist = min_distance_to_body(&seg.cloth, seg.colliders.body.as_ref().unwrap());
        if self.config.telemetry {
            seg.telemetry.push(telemetry_line(frame, dist, kinetic_energy(&seg.cloth)));
        }
        if is_detached(dist, self.config.detach_threshold) {
            return Ok(FrameOutcome::Aborted(SegmentStatus::Detached));
        }

        let (cloth_verts, fine_res) = subdivide_grid(
            &seg.cloth.positions,
            self.config.grid_res,
            self.config.subdivision_levels,
        );
        let cloth_faces = grid_triangles(fine_res);
        let (bed_verts, bed_faces) = seg.scene.bed.to_mesh();
        let holdout = rasterize_depth(
            &[(&body.vertices, body.faces.as_slice()), (&bed_verts, &bed_faces)],
            &camera,
        );
        let options = RenderOptions {
            ambient_floor: self.config.ambient_floor,
            supersample: self.config.supersample,
        };
        let composited = render_blanket(
            &cloth_verts,
            &cloth_faces,
            &seg.material,
            &seg.scene.light,
            &camera,
            &holdout,
            &original,
            &options,
        )?;

        let video_dir = self.split_dir.join(&self.seq.id).join(&seg.video_id);
        if !seg.dir_created {
            fs::create_dir_all(&video_dir).map_err(|e| io_at(&video_dir, e))?;
            seg.dir_created = true;
        }
        let file_name = format!("{frame:06}.{}", self.config.encoder.extension());
        encode_frame(&composited, &video_dir.join(&file_name), self.config.encoder)?;
        seg.frames.push(format!("{}/{}/{file_name}", self.seq.id, seg.video_id));

        for (u, (joints3d, joints2d)) in annotation_rows.into_iter().enumerate() {
            seg.annotations[u].joints3d.push(joints3d);
            seg.annotations[u].joints2d.push(joints2d);
        }
        Ok(FrameOutcome::Emitted)
    }

    fn finish(&mut self, span: &SegmentSpan) -> Result<(), PipelineError> {
        let seg = self.current.take().expect("finish without begin");
        if self.config.telemetry && !seg.telemetry.is_empty() {
            let path = self
                .split_dir
                .join(&self.seq.id)
                .join(&seg.video_id)
                .join("telemetry.tsv");
            fs::write(&path, seg.telemetry.join("\n") + "\n").map_err(|e| io_at(&path, e))?;
        }
        self.entries.push(VideoEntry {
            id: seg.video_id,
            source_sequence: self.seq.id.clone(),
            subject: self.subject,
            segment: SegmentRecord {
                start_frame: span.start,
                end_frame: span.end,
                subject: self.subject,
                status: span.status,
                color: seg.material.albedo,
                seed: seg.seed,
            },
            frames: seg.frames,
            subjects: seg.annotations,
        });
        Ok(())
    }
}

/// Generate all segments for one (sequence, subject) video family.
pub fn run_video(
    seq: &SequenceInput,
    subject: usize,
    output_root: &Path,
    template: &BodyTemplate,
    config: &GenerateConfig,
) -> Result<Vec<VideoEntry>, PipelineError> {
    if subject >= seq.num_subjects() {
        return Err(PipelineError::Config(format!(
            "{}: subject {subject} out of range ({} subjects)",
            seq.id,
            seq.num_subjects()
        )));
    }
    let mut runner = VideoRunner::new(seq, template, subject, config, output_root);
    schedule_segments(&mut runner, seq.num_frames(), config.min_restart_gap)?;
    Ok(runner.into_entries())
}

#[derive(Debug, Default)]
pub struct GenerateSummary {
    pub sequences: usize,
    pub videos: usize,
    pub frames: usize,
    pub detached: usize,
    pub sim_errors: usize,
}

/// Run the whole pipeline over an input directory laid out as
/// `<input>/model/` (body-model archive) plus `<input>/sequences/<id>/`.
/// Jobs are (sequence, subject) pairs, parallel across workers; output is
/// independent of the worker count.
pub fn generate(
    input: &Path,
    output: &Path,
    config: &GenerateConfig,
) -> Result<GenerateSummary, PipelineError> {
    config.validate()?;
    let template = load_model_archive(&input.join("model"))?;

    let seq_root = input.join("sequences");
    let mut seq_dirs: Vec<PathBuf> = fs::read_dir(&seq_root)
        .map_err(|e| io_at(&seq_root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("sequence.json").is_file())
        .collect();
    seq_dirs.sort();
    if seq_dirs.is_empty() {
        return Err(PipelineError::Config(format!(
            "no sequence directories under {}",
            seq_root.display()
        )));
    }
    let sequences: Vec<SequenceInput> =
        seq_dirs.iter().map(|d| ingest_sequence(d)).collect::<Result<_, _>>()?;

    let jobs: Vec<(usize, usize)> = sequences
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.num_subjects()).map(move |u| (i, u)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<Vec<VideoEntry>, PipelineError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, u)| run_video(&sequences[i], u, output, &template, config))
            .collect()
    });

    let mut summary = GenerateSummary { sequences: sequences.len(), ..Default::default() };
    let mut by_split: Vec<(Split, Vec<VideoEntry>)> =
        Split::all().iter().map(|s| (*s, Vec::new())).collect();
    for (job, result) in jobs.iter().zip(results) {
        let entries = result?;
        let split = sequences[job.0].split;
        for entry in entries {
            summary.videos += 1;
            summary.frames += entry.frames.len();
            match entry.segment.status {
                SegmentStatus::Detached => summary.detached += 1,
                SegmentStatus::SimError => summary.sim_errors += 1,
                SegmentStatus::Completed => {}
            }
            by_split.iter_mut().find(|(s, _)| *s == split).unwrap().1.push(entry);
        }
    }

    for (split, entries) in by_split {
        let used = sequences.iter().any(|s| s.split == split);
        if used {
            write_manifest(&output.join(split.dir_name()), split, entries)?;
        }
    }
    Ok(summary)
}
