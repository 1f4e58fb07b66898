//! Parametric articulated body model: shape blendshapes, pose blendshapes,
//! forward kinematics over a joint tree, and linear blend skinning.
//!
//! The model is size-generic: the canonical template has V=6890 vertices,
//! J=24 joints and B=10 shape coefficients, but toy templates with a handful
//! of vertices and 2-4 joints are first-class citizens (the test suites rely
//! on them). Model data is loaded from the archive format in [`archive`].

mod archive;

pub use archive::{load_model_archive, save_model_archive};

use std::sync::Arc;

use thiserror::Error;

use crate::{Mat3, Vec3};

/// Parent index marking the root joint in `BodyTemplate::parents`.
pub const ROOT_PARENT: i64 = -1;

#[derive(Debug, Error)]
pub enum BodyError {
    #[error("{0}")]
    InvalidTemplate(String),
    #[error("shape parameter count {got} does not match template beta count {expected}")]
    BetaCountMismatch { got: usize, expected: usize },
    #[error("pose has {got} joint rotations, template has {expected} joints")]
    JointCountMismatch { got: usize, expected: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("model archive: {0}")]
    Archive(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rest-pose template of the articulated body.
///
/// Large arrays are stored flat in row-major order; accessors document the
/// index layout. `shape_dirs` is indexed `[vertex][axis][beta]` and
/// `pose_dirs` is `[vertex][axis][9*(J-1)]`, where the last axis holds the
/// row-major flattening of `R_j - I` for joints 1..J.
#[derive(Debug, Clone)]
pub struct BodyTemplate {
    rest_vertices: Vec<Vec3>,
    faces: Arc<Vec<[u32; 3]>>,
    skin_weights: Vec<f64>,    // V x J
    joint_regressor: Vec<f64>, // J x V
    shape_dirs: Vec<f64>,      // V x 3 x B
    pose_dirs: Vec<f64>,       // V x 3 x 9(J-1)
    parents: Vec<i64>,         // J, parents[0] == ROOT_PARENT
    joint_count: usize,
    beta_count: usize,
}

impl BodyTemplate {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rest_vertices: Vec<Vec3>,
        faces: Vec<[u32; 3]>,
        skin_weights: Vec<f64>,
        joint_regressor: Vec<f64>,
        shape_dirs: Vec<f64>,
        pose_dirs: Vec<f64>,
        parents: Vec<i64>,
    ) -> Result<Self, BodyError> {
        let v = rest_vertices.len();
        let j = parents.len();
        let invalid = |msg: String| BodyError::InvalidTemplate(msg);
        if v == 0 {
            return Err(invalid("template has no vertices".into()));
        }
        if j == 0 {
            return Err(invalid("template has no joints".into()));
        }
        if skin_weights.len() != v * j {
            return Err(invalid(format!(
                "skin_weights has {} entries, expected V*J = {}",
                skin_weights.len(),
                v * j
            )));
        }
        if joint_regressor.len() != j * v {
            return Err(invalid(format!(
                "joint_regressor has {} entries, expected J*V = {}",
                joint_regressor.len(),
                j * v
            )));
        }
        if !shape_dirs.len().is_multiple_of(v * 3) {
            return Err(invalid(format!(
                "shape_dirs length {} is not a multiple of V*3 = {}",
                shape_dirs.len(),
                v * 3
            )));
        }
        let b = shape_dirs.len() / (v * 3);
        let pose_cols = 9 * j.saturating_sub(1);
        if pose_dirs.len() != v * 3 * pose_cols {
            return Err(invalid(format!(
                "pose_dirs has {} entries, expected V*3*9(J-1) = {}",
                pose_dirs.len(),
                v * 3 * pose_cols
            )));
        }
        if parents[0] != ROOT_PARENT {
            return Err(invalid(format!(
                "parents[0] must be the root sentinel {ROOT_PARENT}, got {}",
                parents[0]
            )));
        }
        for (idx, &p) in parents.iter().enumerate().skip(1) {
            if p < 0 || p as usize >= idx {
                return Err(invalid(format!(
                    "parents[{idx}] = {p} violates topological order (need 0 <= parent < {idx})"
                )));
            }
        }
        for (fi, face) in faces.iter().enumerate() {
            if face.iter().any(|&i| i as usize >= v) {
                return Err(invalid(format!(
                    "face {fi} references vertex out of range (V = {v})"
                )));
            }
        }
        for (row, w) in skin_weights.chunks_exact(j).enumerate() {
            if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                return Err(invalid(format!(
                    "skin_weights row {row} has a negative or non-finite weight"
                )));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(invalid(format!(
                    "skin_weights row {row} sums to {sum}, expected 1 within 1e-6"
                )));
            }
        }
        if rest_vertices.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(BodyError::NonFinite("template rest_vertices".into()));
        }
        for (name, data) in [
            ("joint_regressor", &joint_regressor),
            ("shape_dirs", &shape_dirs),
            ("pose_dirs", &pose_dirs),
        ] {
            if data.iter().any(|x| !x.is_finite()) {
                return Err(BodyError::NonFinite(format!("template {name}")));
            }
        }
        Ok(Self {
            rest_vertices,
            faces: Arc::new(faces),
            skin_weights,
            joint_regressor,
            shape_dirs,
            pose_dirs,
            parents,
            joint_count: j,
            beta_count: b,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.rest_vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn joint_count(&self) -> usize {
        self.joint_count
    }

    pub fn beta_count(&self) -> usize {
        self.beta_count
    }

    pub fn rest_vertices(&self) -> &[Vec3] {
        &self.rest_vertices
    }

    pub fn faces(&self) -> &Arc<Vec<[u32; 3]>> {
        &self.faces
    }

    pub fn parents(&self) -> &[i64] {
        &self.parents
    }

    pub fn skin_weights(&self) -> &[f64] {
        &self.skin_weights
    }

    pub fn joint_regressor(&self) -> &[f64] {
        &self.joint_regressor
    }

    pub fn shape_dirs(&self) -> &[f64] {
        &self.shape_dirs
    }

    pub fn pose_dirs(&self) -> &[f64] {
        &self.pose_dirs
    }

    /// Rest vertices displaced by the shape blendshapes:
    /// `rest + sum_b betas[b] * shape_dirs[:, :, b]`.
    pub fn shape_blend(&self, shape: &ShapeParams) -> Result<Vec<Vec3>, BodyError> {
        if shape.betas.len() != self.beta_count {
            return Err(BodyError::BetaCountMismatch {
                got: shape.betas.len(),
                expected: self.beta_count,
            });
        }
        let b = self.beta_count;
        let mut out = self.rest_vertices.clone();
        if b == 0 {
            return Ok(out);
        }
        for (vi, vert) in out.iter_mut().enumerate() {
            for axis in 0..3 {
                let base = (vi * 3 + axis) * b;
                let mut acc = 0.0;
                for (bi, &beta) in shape.betas.iter().enumerate() {
                    acc += beta * self.shape_dirs[base + bi];
                }
                vert[axis] += acc;
            }
        }
        Ok(out)
    }

    /// Joint locations regressed from a rest-shape vertex set:
    /// `joints = joint_regressor * rest_shape`.
    pub fn regress_joints(&self, rest_shape: &[Vec3]) -> Vec<Vec3> {
        assert_eq!(rest_shape.len(), self.vertex_count());
        let v = self.vertex_count();
        (0..self.joint_count)
            .map(|j| {
                let row = &self.joint_regressor[j * v..(j + 1) * v];
                let mut acc = Vec3::zeros();
                for (w, vert) in row.iter().zip(rest_shape) {
                    if *w != 0.0 {
                        acc += *w * vert;
                    }
                }
                acc
            })
            .collect()
    }

    /// Full forward model: shape blendshapes, optional pose blendshapes,
    /// forward kinematics over the joint tree, linear blend skinning, and
    /// the root translation. The returned mesh is in the same world frame as
    /// the pose's root translation, so it lines up with the ground-truth
    /// placement convention directly.
    pub fn pose_mesh(
        &self,
        shape: &ShapeParams,
        pose: &PoseParams,
        pose_blendshapes: bool,
    ) -> Result<SkinnedMesh, BodyError> {
        if pose.joint_rotations.len() != self.joint_count {
            return Err(BodyError::JointCountMismatch {
                got: pose.joint_rotations.len(),
                expected: self.joint_count,
            });
        }
        let v = self.vertex_count();
        let j = self.joint_count;

        let shaped = self.shape_blend(shape)?;
        let rest_joints = self.regress_joints(&shaped);
        let rotations: Vec<Mat3> = pose.joint_rotations.iter().map(rodrigues).collect();

        let mut posed = shaped;
        if pose_blendshapes && j > 1 {
            let cols = 9 * (j - 1);
            let mut feature = vec![0.0; cols];
            for (ji, rot) in rotations.iter().enumerate().skip(1) {
                let delta = rot - Mat3::identity();
                for r in 0..3 {
                    for c in 0..3 {
                        feature[(ji - 1) * 9 + r * 3 + c] = delta[(r, c)];
                    }
                }
            }
            for (vi, vert) in posed.iter_mut().enumerate() {
                for axis in 0..3 {
                    let base = (vi * 3 + axis) * cols;
                    let mut acc = 0.0;
                    for (k, &f) in feature.iter().enumerate() {
                        if f != 0.0 {
                            acc += f * self.pose_dirs[base + k];
                        }
                    }
                    vert[axis] += acc;
                }
            }
        }

        // Forward kinematics: global transform of joint j maps rest-frame
        // offsets from joint j into the posed world frame.
        let mut global_rot = vec![Mat3::identity(); j];
        let mut global_pos = vec![Vec3::zeros(); j];
        global_rot[0] = rotations[0];
        global_pos[0] = rest_joints[0];
        for ji in 1..j {
            let p = self.parents[ji] as usize;
            global_rot[ji] = global_rot[p] * rotations[ji];
            global_pos[ji] = global_pos[p] + global_rot[p] * (rest_joints[ji] - rest_joints[p]);
        }

        let mut vertices = Vec::with_capacity(v);
        for (vi, vert) in posed.iter().enumerate() {
            let weights = &self.skin_weights[vi * j..(vi + 1) * j];
            let mut acc = Vec3::zeros();
            for (ji, &w) in weights.iter().enumerate() {
                if w != 0.0 {
                    acc += w * (global_rot[ji] * (vert - rest_joints[ji]) + global_pos[ji]);
                }
            }
            vertices.push(acc + pose.root_translation);
        }
        let joints: Vec<Vec3> = global_pos
            .iter()
            .map(|p| p + pose.root_translation)
            .collect();

        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite() || !p.z.is_finite()) {
            return Err(BodyError::NonFinite("posed mesh vertices".into()));
        }
        let mesh = SkinnedMesh {
            vertices,
            faces: Arc::clone(&self.faces),
            joints,
        };
        let diag = mesh.bounding_box_diagonal();
        if diag >= 5.0 {
            log::warn!("posed mesh bounding-box diagonal {diag:.2} m exceeds the 5 m sanity bound");
        }
        Ok(mesh)
    }
}

/// Shape blendshape coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeParams {
    pub betas: Vec<f64>,
}

impl ShapeParams {
    pub fn new(betas: Vec<f64>) -> Result<Self, BodyError> {
        if betas.iter().any(|b| !b.is_finite()) {
            return Err(BodyError::NonFinite("shape betas".into()));
        }
        if let Some(big) = betas.iter().find(|b| b.abs() > 5.0) {
            log::warn!("shape coefficient {big} is outside [-5, 5]; out-of-distribution shape");
        }
        Ok(Self { betas })
    }

    pub fn zeros(count: usize) -> Self {
        Self { betas: vec![0.0; count] }
    }
}

/// Per-frame pose: one axis-angle rotation per joint plus a root translation.
///
/// Axis-angle magnitudes are wrapped into [0, 2*pi) on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseParams {
    pub joint_rotations: Vec<Vec3>,
    pub root_translation: Vec3,
}

impl PoseParams {
    pub fn new(joint_rotations: Vec<Vec3>, root_translation: Vec3) -> Result<Self, BodyError> {
        if joint_rotations
            .iter()
            .any(|r| !(r.x.is_finite() && r.y.is_finite() && r.z.is_finite()))
        {
            return Err(BodyError::NonFinite("joint rotations".into()));
        }
        if !(root_translation.x.is_finite()
            && root_translation.y.is_finite()
            && root_translation.z.is_finite())
        {
            return Err(BodyError::NonFinite("root translation".into()));
        }
        let tau = std::f64::consts::TAU;
        let joint_rotations = joint_rotations
            .into_iter()
            .map(|aa| {
                let angle = aa.norm();
                if angle < tau {
                    aa
                } else {
                    aa * (angle.rem_euclid(tau) / angle)
                }
            })
            .collect();
        Ok(Self { joint_rotations, root_translation })
    }

    pub fn rest(joint_count: usize) -> Self {
        Self {
            joint_rotations: vec![Vec3::zeros(); joint_count],
            root_translation: Vec3::zeros(),
        }
    }
}

/// Posed body mesh in the world frame, with its posed joints.
#[derive(Debug, Clone)]
pub struct SkinnedMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Arc<Vec<[u32; 3]>>,
    pub joints: Vec<Vec3>,
}

impl SkinnedMesh {
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    pub fn vertex_centroid(&self) -> Vec3 {
        let mut acc = Vec3::zeros();
        for v in &self.vertices {
            acc += v;
        }
        acc / self.vertices.len() as f64
    }
}

/// Rotation matrix for an axis-angle vector (direction = axis, norm = angle
/// in radians). The zero vector maps to the identity.
pub fn rodrigues(axis_angle: &Vec3) -> Mat3 {
    let angle = axis_angle.norm();
    if angle < 1e-12 {
        return Mat3::identity();
    }
    let axis = axis_angle / angle;
    let k = Mat3::new(
        0.0, -axis.z, axis.y,
        axis.z, 0.0, -axis.x,
        -axis.y, axis.x, 0.0,
    );
    Mat3::identity() + angle.sin() * k + (1.0 - angle.cos()) * (k * k)
}
