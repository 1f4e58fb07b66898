//! Body-model archive: a directory with `model.json` describing dimensions
//! plus raw little-endian binary arrays.
//!
//! Layout (all row-major):
//! - `rest_vertices.bin`   V*3 f32
//! - `skin_weights.bin`    V*J f32
//! - `joint_regressor.bin` J*V f32
//! - `shape_dirs.bin`      V*3*B f32
//! - `pose_dirs.bin`       V*3*9(J-1) f32, last axis is the row-major
//!   flattening of (R_j - I) for joints 1..J
//! - `faces.bin`           F*3 u32
//!
//! `model.json` records V, F, J, B, the parent array (root = -1) and an
//! endianness tag ("little" is the only accepted value).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BodyError, BodyTemplate};
use crate::Vec3;

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
    endianness: String,
    vertex_count: usize,
    face_count: usize,
    joint_count: usize,
    beta_count: usize,
    parents: Vec<i64>,
}

const FORMAT_NAME: &str = "body-model-archive";

fn read_f32_array(path: &Path, expected: usize) -> Result<Vec<f64>, BodyError> {
    let bytes = fs::read(path)?;
    if bytes.len() != expected * 4 {
        return Err(BodyError::Archive(format!(
            "{}: expected {} little-endian f32 values ({} bytes), found {} bytes",
            path.display(),
            expected,
            expected * 4,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn read_u32_array(path: &Path, expected: usize) -> Result<Vec<u32>, BodyError> {
    let bytes = fs::read(path)?;
    if bytes.len() != expected * 4 {
        return Err(BodyError::Archive(format!(
            "{}: expected {} little-endian u32 values ({} bytes), found {} bytes",
            path.display(),
            expected,
            expected * 4,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write_f32_array(path: &Path, data: impl Iterator<Item = f64>) -> std::io::Result<()> {
    let mut bytes = Vec::new();
    for x in data {
        bytes.extend_from_slice(&(x as f32).to_le_bytes());
    }
    fs::write(path, bytes)
}

/// Load a body template from an archive directory.
pub fn load_model_archive(dir: &Path) -> Result<BodyTemplate, BodyError> {
    let header_path = dir.join("model.json");
    let header: ModelHeader = serde_json::from_str(&fs::read_to_string(&header_path)?)
        .map_err(|e| BodyError::Archive(format!("{}: {e}", header_path.display())))?;
    if header.format != FORMAT_NAME {
        return Err(BodyError::Archive(format!(
            "unexpected format tag {:?} (want {FORMAT_NAME:?})",
            header.format
        )));
    }
    if header.endianness != "little" {
        return Err(BodyError::Archive(format!(
            "unsupported endianness {:?}; arrays must be little-endian",
            header.endianness
        )));
    }
    if header.parents.len() != header.joint_count {
        return Err(BodyError::Archive(format!(
            "parents has {} entries, joint_count is {}",
            header.parents.len(),
            header.joint_count
        )));
    }
    let (v, f, j, b) = (
        header.vertex_count,
        header.face_count,
        header.joint_count,
        header.beta_count,
    );

    let rest_flat = read_f32_array(&dir.join("rest_vertices.bin"), v * 3)?;
    let rest_vertices: Vec<Vec3> = rest_flat
        .chunks_exact(3)
        .map(|c| Vec3::new(c[0], c[1], c[2]))
        .collect();
    let skin_weights = read_f32_array(&dir.join("skin_weights.bin"), v * j)?;
    let joint_regressor = read_f32_array(&dir.join("joint_regressor.bin"), j * v)?;
    let shape_dirs = read_f32_array(&dir.join("shape_dirs.bin"), v * 3 * b)?;
    let pose_dirs = read_f32_array(&dir.join("pose_dirs.bin"), v * 3 * 9 * j.saturating_sub(1))?;
    let faces_flat = read_u32_array(&dir.join("faces.bin"), f * 3)?;
    let faces: Vec<[u32; 3]> = faces_flat
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();

    // Skin weights were quantized to f32; renormalize rows so the 1e-6
    // row-sum invariant holds after the f64 round trip.
    let mut skin_weights = skin_weights;
    for row in skin_weights.chunks_exact_mut(j) {
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            for w in row.iter_mut() {
                *w /= sum;
            }
        }
    }

    BodyTemplate::new(
        rest_vertices,
        faces,
        skin_weights,
        joint_regressor,
        shape_dirs,
        pose_dirs,
        header.parents,
    )
}

/// Write a body template as an archive directory (creating it if needed).
pub fn save_model_archive(dir: &Path, template: &BodyTemplate) -> Result<(), BodyError> {
    fs::create_dir_all(dir)?;
    let header = ModelHeader {
        format: FORMAT_NAME.to_string(),
        version: 1,
        endianness: "little".to_string(),
        vertex_count: template.vertex_count(),
        face_count: template.face_count(),
        joint_count: template.joint_count(),
        beta_count: template.beta_count(),
        parents: template.parents().to_vec(),
    };
    fs::write(
        dir.join("model.json"),
        serde_json::to_string_pretty(&header).expect("header serializes"),
    )?;
    write_f32_array(
        &dir.join("rest_vertices.bin"),
        template.rest_vertices().iter().flat_map(|p| [p.x, p.y, p.z]),
    )?;
    write_f32_array(&dir.join("skin_weights.bin"), template.skin_weights().iter().copied())?;
    write_f32_array(
        &dir.join("joint_regressor.bin"),
        template.joint_regressor().iter().copied(),
    )?;
    write_f32_array(&dir.join("shape_dirs.bin"), template.shape_dirs().iter().copied())?;
    write_f32_array(&dir.join("pose_dirs.bin"), template.pose_dirs().iter().copied())?;
    let mut face_bytes = Vec::new();
    for face in template.faces().iter() {
        for idx in face {
            face_bytes.extend_from_slice(&idx.to_le_bytes());
        }
    }
    fs::write(dir.join("faces.bin"), face_bytes)?;
    Ok(())
}
