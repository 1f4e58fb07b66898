//! Procedural meshes, toy body templates and toy sequences. These are the
//! inputs for the test suites and for quick demo runs without real capture
//! data.

use std::sync::Arc;

use crate::body::{BodyTemplate, PoseParams, ShapeParams, ROOT_PARENT};
use crate::pipeline::{Intrinsics, SequenceInput, Split};
use crate::render::FrameImage;
use crate::{Mat3, Vec3};

/// UV-sphere triangle mesh with `rings` latitude bands and `sectors`
/// longitude steps.
pub fn sphere_mesh(center: Vec3, radius: f64, rings: usize, sectors: usize) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    assert!(rings >= 2 && sectors >= 3);
    let mut vertices = Vec::new();
    vertices.push(center + Vec3::new(0.0, radius, 0.0)); // north pole
    for r in 1..rings {
        let phi = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..sectors {
            let theta = std::f64::consts::TAU * s as f64 / sectors as f64;
            vertices.push(
                center
                    + radius
                        * Vec3::new(phi.sin() * theta.cos(), phi.cos(), phi.sin() * theta.sin()),
            );
        }
    }
    vertices.push(center + Vec3::new(0.0, -radius, 0.0)); // south pole

    let mut faces = Vec::new();
    let ring = |r: usize, s: usize| (1 + (r - 1) * sectors + s % sectors) as u32;
    for s in 0..sectors {
        faces.push([0, ring(1, s + 1), ring(1, s)]);
    }
    for r in 1..rings - 1 {
        for s in 0..sectors {
            let (a, b, c, d) = (ring(r, s), ring(r, s + 1), ring(r + 1, s), ring(r + 1, s + 1));
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    let south = (vertices.len() - 1) as u32;
    for s in 0..sectors {
        faces.push([south, ring(rings - 1, s), ring(rings - 1, s + 1)]);
    }
    (vertices, faces)
}

/// Small three-joint body: an ellipsoid torso whose upper half follows
/// joint 1 and lower half joint 2. Shape basis: beta 0 inflates radially,
/// beta 1 stretches the long axis. Pose correctives are zero.
pub fn capsule_body_template() -> BodyTemplate {
    let (half_w, half_l, half_d) = (0.25, 0.45, 0.18);
    let (sphere, faces) = sphere_mesh(Vec3::zeros(), 1.0, 8, 12);
    let vertices: Vec<Vec3> = sphere
        .iter()
        .map(|p| Vec3::new(p.x * half_w, p.y * half_l, p.z * half_d))
        .collect();
    let v = vertices.len();
    let j = 3;

    // Joint 0 at the centroid, joint 1 in the upper cap, joint 2 lower cap.
    let mut regressor = vec![0.0; j * v];
    let upper: Vec<usize> = (0..v).filter(|&i| vertices[i].y > 0.5 * half_l).collect();
    let lower: Vec<usize> = (0..v).filter(|&i| vertices[i].y < -0.5 * half_l).collect();
    for w in regressor.iter_mut().take(v) {
        *w = 1.0 / v as f64;
    }
    for &i in &upper {
        regressor[v + i] = 1.0 / upper.len() as f64;
    }
    for &i in &lower {
        regressor[2 * v + i] = 1.0 / lower.len() as f64;
    }

    // Smooth blend from the centroid joint toward each cap.
    let mut weights = Vec::with_capacity(v * j);
    for p in &vertices {
        let w1 = ((p.y / half_l).clamp(0.0, 1.0)).powi(2);
        let w2 = ((-p.y / half_l).clamp(0.0, 1.0)).powi(2);
        weights.push(1.0 - w1 - w2);
        weights.push(w1);
        weights.push(w2);
    }

    let mut shape_dirs = vec![0.0; v * 3 * 2];
    for (i, p) in vertices.iter().enumerate() {
        let radial = if p.norm() > 1e-9 { p.normalize() * 0.05 } else { Vec3::zeros() };
        for axis in 0..3 {
            shape_dirs[(i * 3 + axis) * 2] = radial[axis];
        }
        shape_dirs[(i * 3 + 1) * 2 + 1] = 0.1 * p.y;
    }

    BodyTemplate::new(
        vertices,
        faces,
        weights,
        regressor,
        shape_dirs,
        vec![0.0; v * 3 * 9 * (j - 1)],
        vec![ROOT_PARENT, 0, 0],
    )
    .expect("capsule template is valid")
}

/// Deterministic gradient frame; the pattern depends on the frame index, so
/// consecutive originals differ.
pub fn gradient_frame(width: u32, height: u32, frame: usize) -> FrameImage {
    let mut img = FrameImage::new(width as usize, height as usize);
    for y in 0..height as usize {
        for x in 0..width as usize {
            let r = ((x * 255) / width.max(1) as usize) as u8;
            let g = ((y * 255) / height.max(1) as usize) as u8;
            let b = ((frame * 37) % 256) as u8;
            img.put(x, y, [r, g, b]);
        }
    }
    img
}

/// A small scripted motion sequence for the capsule body: the camera orbits
/// nothing (static, slightly translated per frame), the root drifts to
/// exercise the recentering path, and joint 1 swings sinusoidally.
/// Returns the sequence plus its original frames.
pub fn toy_sequence(
    id: &str,
    num_frames: usize,
    num_subjects: usize,
    split: Split,
    width: u32,
    height: u32,
) -> (SequenceInput, Vec<FrameImage>) {
    let template = capsule_body_template();
    let joint_count = template.joint_count();
    let beta_count = template.beta_count();

    // Camera 2.5 m in front of the origin, looking along +z toward it.
    let rotation = Mat3::identity();
    let base_translation = Vec3::new(0.0, 0.0, 2.5);

    let mut poses = Vec::with_capacity(num_frames);
    let mut extrinsics = Vec::with_capacity(num_frames);
    for f in 0..num_frames {
        let phase = f as f64 / num_frames.max(1) as f64;
        let mut per_subject = Vec::with_capacity(num_subjects);
        for s in 0..num_subjects {
            let side = s as f64 - 0.5 * (num_subjects.saturating_sub(1)) as f64;
            let swing = 0.5 * (std::f64::consts::TAU * phase).sin();
            let mut rotations = vec![Vec3::zeros(); joint_count];
            rotations[joint_count - 1] = Vec3::new(0.0, 0.0, swing);
            // Slow global drift, cancelled by recentering.
            let root = Vec3::new(0.8 * side + 0.05 * phase, 0.02 * phase, 0.03 * phase);
            per_subject.push(PoseParams::new(rotations, root).expect("finite pose"));
        }
        poses.push(per_subject);
        let wobble = Vec3::new(0.01 * (phase * 7.0).sin(), 0.0, 0.0);
        extrinsics.push((rotation, base_translation + wobble));
    }

    let betas = (0..num_subjects)
        .map(|s| {
            let mut b = vec![0.0; beta_count];
            if beta_count > 0 {
                b[0] = 0.3 * s as f64;
            }
            ShapeParams::new(b).expect("finite betas")
        })
        .collect();

    let seq = SequenceInput {
        id: id.to_string(),
        frame_rate: 30.0,
        split,
        intrinsics: Intrinsics {
            fx: 0.9 * width as f64,
            fy: 0.9 * width as f64,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        },
        betas,
        poses,
        extrinsics,
        frame_files: Vec::new(),
    };
    let frames = (0..num_frames).map(|f| gradient_frame(width, height, f)).collect();
    (seq, frames)
}

/// Triangle mesh of a box given its center and half extents (axis aligned).
pub fn box_mesh(center: Vec3, half: Vec3) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let mut vertices = Vec::with_capacity(8);
    for &sx in &[-1.0, 1.0] {
        for &sy in &[-1.0, 1.0] {
            for &sz in &[-1.0, 1.0] {
                vertices.push(center + Vec3::new(sx * half.x, sy * half.y, sz * half.z));
            }
        }
    }
    let faces = vec![
        [0, 1, 3], [0, 3, 2],
        [4, 7, 5], [4, 6, 7],
        [0, 5, 1], [0, 4, 5],
        [2, 3, 7], [2, 7, 6],
        [0, 2, 6], [0, 6, 4],
        [1, 5, 7], [1, 7, 3],
    ];
    (vertices, faces)
}

/// Posed capsule body wrapped as a `SkinnedMesh` at the rest pose.
pub fn capsule_body_mesh() -> crate::body::SkinnedMesh {
    let template = capsule_body_template();
    template
        .pose_mesh(
            &ShapeParams::zeros(template.beta_count()),
            &PoseParams::rest(template.joint_count()),
            true,
        )
        .expect("rest pose is valid")
}

/// Standalone triangle mesh wrapped into a `SkinnedMesh` (single joint at the
/// centroid) so it can be used wherever a posed body is expected.
pub fn mesh_as_body(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> crate::body::SkinnedMesh {
    let centroid = vertices.iter().sum::<Vec3>() / vertices.len().max(1) as f64;
    crate::body::SkinnedMesh { vertices, faces: Arc::new(faces), joints: vec![centroid] }
}
