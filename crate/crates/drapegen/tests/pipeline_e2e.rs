//! End-to-end pipeline checks beyond the acceptance gate: multi-subject
//! families, annotation consistency, segment file naming, telemetry, both
//! encoders, real-driver detach handling, and the CLI binary.

mod common;

use std::process::Command;

use common::build_toy_input;
use drapegen::body::load_model_archive;
use drapegen::metrics::SampleFilter;
use drapegen::pipeline::{
    audit_output, decode_frame, evaluate_predictions, generate, ingest_sequence, read_manifest,
    read_predictions, schedule_segments, write_predictions, Encoder, GenerateConfig,
    JointSelection, PredictionEntry, PredictionSet, SegmentDriver, SegmentStatus, Split,
    VideoRunner, MANIFEST_FILE,
};
use drapegen::scene::{project, recenter_subject};
use drapegen::Vec3;

fn toy_config(seed: u64) -> GenerateConfig {
    GenerateConfig { seed, grid_res: 16, warmup: 6, ..GenerateConfig::default() }
}

#[test]
fn two_subject_sequence_yields_two_families_with_disjoint_occlusion() {
    let input = tempfile::tempdir().unwrap();
    build_toy_input(input.path(), "pair", 10, 2, Split::Train, 112, 84);
    let out = tempfile::tempdir().unwrap();
    let summary = generate(input.path(), out.path(), &toy_config(11)).unwrap();
    assert_eq!(summary.videos, 2, "one video family per subject");
    assert_eq!(summary.frames, 20);

    let manifest = read_manifest(&out.path().join("train").join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.videos.len(), 2);
    let subjects: Vec<usize> = manifest.videos.iter().map(|v| v.subject).collect();
    assert_eq!(subjects, vec![0, 1]);
    for video in &manifest.videos {
        for ann in &video.subjects {
            assert_eq!(ann.occluded, ann.index == video.subject);
            assert_eq!(ann.joints3d.len(), video.frames.len());
        }
    }
    // Distinct segments draw distinct colors.
    assert_ne!(manifest.videos[0].segment.color, manifest.videos[1].segment.color);
    audit_output(out.path()).unwrap();
}

#[test]
fn manifest_joints2d_match_independent_projection() {
    let input = tempfile::tempdir().unwrap();
    build_toy_input(input.path(), "proj", 6, 2, Split::Validation, 112, 84);
    let out = tempfile::tempdir().unwrap();
    generate(input.path(), out.path(), &toy_config(12)).unwrap();

    let seq = ingest_sequence(&input.path().join("sequences").join("proj")).unwrap();
    let manifest = read_manifest(&out.path().join("validation").join(MANIFEST_FILE)).unwrap();
    for video in &manifest.videos {
        for (rel, frame) in (video.segment.start_frame..=video.segment.end_frame).enumerate() {
            let root = seq.poses[frame][video.subject].root_translation;
            let camera = recenter_subject(&root, &seq.camera(frame).unwrap());
            for ann in &video.subjects {
                for (j3, j2) in ann.joints3d[rel].iter().zip(&ann.joints2d[rel]) {
                    let p = Vec3::new(j3[0], j3[1], j3[2]);
                    let (u, v, _) = project(&camera, &p).expect("toy joints are in front");
                    let got = j2.expect("toy joints project onto the image plane");
                    assert!((got[0] - u).abs() < 1e-5 && (got[1] - v).abs() < 1e-5);
                }
            }
        }
    }
}

#[test]
fn pixels_outside_blanket_footprint_stay_untouched() {
    let input = tempfile::tempdir().unwrap();
    build_toy_input(input.path(), "pix", 4, 1, Split::Train, 128, 96);
    let out = tempfile::tempdir().unwrap();
    generate(input.path(), out.path(), &toy_config(13)).unwrap();

    let seq = ingest_sequence(&input.path().join("sequences").join("pix")).unwrap();
    let manifest = read_manifest(&out.path().join("train").join(MANIFEST_FILE)).unwrap();
    let video = &manifest.videos[0];
    for (rel, frame_rel_path) in video.frames.iter().enumerate() {
        let frame = video.segment.start_frame + rel;
        let output = decode_frame(&out.path().join("train").join(frame_rel_path)).unwrap();
        let original = seq.load_frame(frame).unwrap();
        // The blanket projects well inside the toy image; the image corners
        // can never carry blanket pixels.
        for (x, y) in [(0usize, 0usize), (127, 0), (0, 95), (127, 95), (1, 1), (126, 94)] {
            assert_eq!(output.get(x, y), original.get(x, y), "corner ({x},{y}) frame {frame}");
        }
        // The blanket must actually show up somewhere.
        assert_ne!(output.data, original.data, "frame {frame} has no visible blanket");
    }
}

#[test]
fn segment_frames_are_numbered_from_absolute_start() {
    let input = tempfile::tempdir().unwrap();
    build_toy_input(input.path(), "abs", 14, 1, Split::Train, 96, 72);
    let out = tempfile::tempdir().unwrap();
    let cfg = toy_config(14);
    let seq = ingest_sequence(&input.path().join("sequences").join("abs")).unwrap();
    let template = load_model_archive(&input.path().join("model")).unwrap();

    // Drive a single segment by hand, starting mid-sequence at frame 10.
    let mut runner = VideoRunner::new(&seq, &template, 0, &cfg, out.path());
    assert!(matches!(
        runner.begin(10).unwrap(),
        drapegen::pipeline::BeginOutcome::Ready
    ));
    for frame in 10..13 {
        assert!(matches!(
            runner.advance(frame).unwrap(),
            drapegen::pipeline::FrameOutcome::Emitted
        ));
    }
    runner
        .finish(&drapegen::pipeline::SegmentSpan {
            start: 10,
            end: 12,
            status: SegmentStatus::Completed,
        })
        .unwrap();
    let entries = runner.into_entries();
    assert_eq!(entries.len(), 1);
    let names: Vec<&str> =
        entries[0].frames.iter().map(|f| f.rsplit('/').next().unwrap()).collect();
    assert_eq!(names, vec!["000010.png", "000011.png", "000012.png"]);
    for f in &entries[0].frames {
        assert!(out.path().join("train").join(f).is_file(), "{f} not written");
    }
}

#[test]
fn detach_threshold_below_offset_aborts_every_warmup() {
    let input = tempfile::tempdir().unwrap();
    build_toy_input(input.path(), "fall", 3, 1, Split::Train, 96, 72);
    let out = tempfile::tempdir().unwrap();
    let mut cfg = toy_config(15);
    // The blanket starts blanket_offset = 0.05 m from the body, already past
    // this threshold, so every warm-up detaches immediately.
    cfg.detach_threshold = 0.01;
    cfg.scene.detach_threshold = 0.01;
    let summary = generate(input.path(), out.path(), &cfg).unwrap();
    assert_eq!(summary.videos, 0);
    assert_eq!(summary.frames, 0);
    // Manifest exists and is empty; the audit still passes.
    let manifest = read_manifest(&out.path().join("train").join(MANIFEST_FILE)).unwrap();
    assert!(manifest.videos.is_empty());
    audit_output(out.path()).unwrap();
}

#[test]
fn telemetry_and_jpeg_encoder_paths() {
    let input = tempfile::tempdir().unwrap();
    build_toy_input(input.path(), "tel", 4, 1, Split::Test, 96, 72);
    let out = tempfile::tempdir().unwrap();
    let mut cfg = toy_config(16);
    cfg.telemetry = true;
    cfg.encoder = Encoder::Jpeg;
    let summary = generate(input.path(), out.path(), &cfg).unwrap();
    assert_eq!(summary.frames, 4);

    let manifest = read_manifest(&out.path().join("test").join(MANIFEST_FILE)).unwrap();
    let video = &manifest.videos[0];
    assert!(video.frames[0].ends_with(".jpg"));
    let video_dir = out
        .path()
        .join("test")
        .join(&video.source_sequence)
        .join(&video.id);
    let telemetry = std::fs::read_to_string(video_dir.join("telemetry.tsv")).unwrap();
    let lines: Vec<&str> = telemetry.lines().collect();
    assert_eq!(lines.len(), 4);
    for line in lines {
        assert_eq!(line.split('\t').count(), 3);
    }
    // The telemetry sidecar does not break the bijection audit.
    audit_output(out.path()).unwrap();
}

#[test]
fn evaluate_scores_manifest_ground_truth_at_zero() {
    let input = tempfile::tempdir().unwrap();
    build_toy_input(input.path(), "eval", 5, 2, Split::Test, 96, 72);
    let out = tempfile::tempdir().unwrap();
    generate(input.path(), out.path(), &toy_config(17)).unwrap();
    let manifest = read_manifest(&out.path().join("test").join(MANIFEST_FILE)).unwrap();

    // Predictions = exact ground truth for every (video, frame, subject).
    let mut entries = Vec::new();
    let mut joint_count = 0;
    for video in &manifest.videos {
        for ann in &video.subjects {
            for (rel, j3) in ann.joints3d.iter().enumerate() {
                joint_count = j3.len();
                entries.push(PredictionEntry {
                    video: video.id.clone(),
                    frame: video.segment.start_frame + rel,
                    subject: ann.index,
                    joints: j3.iter().map(|j| Vec3::new(j[0], j[1], j[2])).collect(),
                });
            }
        }
    }
    let set = PredictionSet { joint_count, entries };
    let pred_dir = tempfile::tempdir().unwrap();
    write_predictions(pred_dir.path(), &set).unwrap();
    let set = read_predictions(pred_dir.path()).unwrap();

    let all = evaluate_predictions(&set, &manifest, SampleFilter::All, JointSelection::All).unwrap();
    // Ground truth went through the f32 container: sub-micrometer residual.
    assert!(all.pa_mpjpe_mm < 1e-3, "{}", all.pa_mpjpe_mm);
    assert!(all.mpjpe_mm < 1e-3);
    let occluded =
        evaluate_predictions(&set, &manifest, SampleFilter::OccludedOnly, JointSelection::All)
            .unwrap();
    assert_eq!(occluded.samples, all.samples / 2, "occluded filter keeps one subject of two");
}

#[test]
fn cli_generate_audit_evaluate() {
    let bin = env!("CARGO_BIN_EXE_drapegen");
    let input = tempfile::tempdir().unwrap();
    build_toy_input(input.path(), "cli", 3, 1, Split::Train, 96, 72);
    let out = tempfile::tempdir().unwrap();

    let status = Command::new(bin)
        .args(["generate", "--input"])
        .arg(input.path())
        .arg("--output")
        .arg(out.path())
        .args(["--seed", "21", "--grid-res", "14", "--warmup", "4"])
        .status()
        .unwrap();
    assert!(status.success(), "generate exited with {status}");

    let output = Command::new(bin)
        .arg("audit")
        .arg("--output")
        .arg(out.path())
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).contains("audit ok"));

    // Evaluate exact ground-truth predictions through the CLI.
    let manifest_path = out.path().join("train").join(MANIFEST_FILE);
    let manifest = read_manifest(&manifest_path).unwrap();
    let mut entries = Vec::new();
    let mut joint_count = 0;
    for video in &manifest.videos {
        for ann in &video.subjects {
            for (rel, j3) in ann.joints3d.iter().enumerate() {
                joint_count = j3.len();
                entries.push(PredictionEntry {
                    video: video.id.clone(),
                    frame: video.segment.start_frame + rel,
                    subject: ann.index,
                    joints: j3.iter().map(|j| Vec3::new(j[0], j[1], j[2])).collect(),
                });
            }
        }
    }
    let pred_dir = tempfile::tempdir().unwrap();
    write_predictions(pred_dir.path(), &PredictionSet { joint_count, entries }).unwrap();
    let output = Command::new(bin)
        .arg("evaluate")
        .arg("--pred")
        .arg(pred_dir.path())
        .arg("--gt-manifest")
        .arg(&manifest_path)
        .args(["--filter", "occluded", "--joints", "all"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("PA-MPJPE: 0.00 mm"), "{stdout}");
    assert!(stdout.contains("MPJPE: 0.00 mm"), "{stdout}");

    // A failing audit must produce a non-zero exit code.
    let manifest_bytes = std::fs::read(&manifest_path).unwrap();
    let video_dir = out
        .path()
        .join("train")
        .join(&manifest.videos[0].source_sequence)
        .join(&manifest.videos[0].id);
    std::fs::write(video_dir.join("999999.png"), b"stray").unwrap();
    let status = Command::new(bin)
        .arg("audit")
        .arg("--output")
        .arg(out.path())
        .status()
        .unwrap();
    assert!(!status.success(), "audit must fail on a stray file");
    std::fs::write(&manifest_path, manifest_bytes).unwrap();
}

/// Real-driver scheduling smoke test: schedule over a short sequence via the
/// public entry point used by `generate`.
#[test]
fn real_driver_completes_single_segment() {
    let input = tempfile::tempdir().unwrap();
    build_toy_input(input.path(), "real", 5, 1, Split::Train, 96, 72);
    let seq = ingest_sequence(&input.path().join("sequences").join("real")).unwrap();
    let template = load_model_archive(&input.path().join("model")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let cfg = toy_config(18);
    let mut runner = VideoRunner::new(&seq, &template, 0, &cfg, out.path());
    let spans = schedule_segments(&mut runner, seq.num_frames(), cfg.min_restart_gap).unwrap();
    assert_eq!(spans.len(), 1);
    assert_eq!(spans[0].start, 0);
    assert_eq!(spans[0].end, 4);
    assert_eq!(spans[0].status, SegmentStatus::Completed);
}
