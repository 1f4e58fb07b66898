//! Shared helpers for the integration and acceptance suites.
#![allow(dead_code)] // each test binary uses a different subset

use std::collections::BTreeMap;
use std::path::Path;

use rand::rngs::StdRng;
use rand::Rng;

use drapegen::body::rodrigues;
use drapegen::pipeline::{write_sequence, Split};
use drapegen::scene::CameraModel;
use drapegen::synthetic::{capsule_body_template, toy_sequence};
use drapegen::Vec3;

pub fn rv(rng: &mut StdRng, s: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s))
}

pub fn random_camera(rng: &mut StdRng) -> CameraModel {
    CameraModel::new(
        rng.gen_range(400.0..1500.0),
        rng.gen_range(400.0..1500.0),
        rng.gen_range(200.0..600.0),
        rng.gen_range(150.0..400.0),
        800,
        600,
        rodrigues(&rv(rng, 3.0)),
        rv(rng, 2.0),
    )
    .unwrap()
}

/// Write a complete input directory (body-model archive + one toy sequence)
/// for the pipeline.
pub fn build_toy_input(
    root: &Path,
    id: &str,
    frames: usize,
    subjects: usize,
    split: Split,
    width: u32,
    height: u32,
) {
    let template = capsule_body_template();
    drapegen::body::save_model_archive(&root.join("model"), &template).unwrap();
    let (seq, images) = toy_sequence(id, frames, subjects, split, width, height);
    write_sequence(&root.join("sequences").join(id), &seq, &images).unwrap();
}

/// Every file under `dir` keyed by its relative path.
pub fn snapshot_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let entry = entry.unwrap();
            let path = entry.path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    walk(dir, dir, &mut out);
    out
}
