//! Per-video scene geometry: drift-cancelling camera repositioning, bed frame
//! construction from the camera-farthest body vertex, bed cuboid placement,
//! initial blanket placement, pinhole projection, and the sun light.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::body::SkinnedMesh;
use crate::{Mat3, Vec3};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("empty vertex set")]
    EmptyVertexSet,
    #[error("far vertex coincides with the camera center")]
    DegenerateFarVertex,
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
}

/// Pinhole camera: world -> camera is `x_cam = R x + t`; the camera looks
/// down +z in its own frame and image y grows downward.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl CameraModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        rotation: Mat3,
        translation: Vec3,
    ) -> Result<Self, SceneError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(SceneError::InvalidCamera(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        if !(cx > 0.0 && cx < width as f64 && cy > 0.0 && cy < height as f64) {
            return Err(SceneError::InvalidCamera(format!(
                "principal point ({cx}, {cy}) outside the {width}x{height} image"
            )));
        }
        let gram = rotation.transpose() * rotation - Mat3::identity();
        if gram.amax() > 1e-6 || (rotation.determinant() - 1.0).abs() > 1e-6 {
            return Err(SceneError::InvalidCamera(
                "rotation is not in SO(3) within 1e-6".into(),
            ));
        }
        if !translation.iter().all(|x| x.is_finite()) {
            return Err(SceneError::InvalidCamera("non-finite translation".into()));
        }
        Ok(Self { fx, fy, cx, cy, width, height, rotation, translation })
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// World direction of the image "up" axis (-v).
    pub fn image_up_world(&self) -> Vec3 {
        self.rotation.transpose() * Vec3::new(0.0, -1.0, 0.0)
    }

    /// World direction of the image "right" axis (+u).
    pub fn image_right_world(&self) -> Vec3 {
        self.rotation.transpose() * Vec3::new(1.0, 0.0, 0.0)
    }
}

/// Camera with extrinsics shifted so the subject can be posed at the origin.
///
/// For every world point p, the camera-frame coordinates of `p - root` under
/// the returned camera equal those of `p` under the input camera, so all body
/// projections are unchanged while the subject's low-frequency global drift
/// is cancelled.
pub fn recenter_subject(root_translation: &Vec3, camera: &CameraModel) -> CameraModel {
    let mut out = camera.clone();
    out.translation = camera.translation + camera.rotation * root_translation;
    out
}

/// Index and distance of the vertex farthest from the camera center.
/// Ties break toward the lowest index.
pub fn farthest_vertex(vertices: &[Vec3], camera: &CameraModel) -> Result<(usize, f64), SceneError> {
    if vertices.is_empty() {
        return Err(SceneError::EmptyVertexSet);
    }
    let center = camera.center();
    let mut best = (0usize, (vertices[0] - center).norm());
    for (i, v) in vertices.iter().enumerate().skip(1) {
        let d = (v - center).norm();
        if d > best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

/// Scene constants: bed and blanket sizing, gaps, light, detach threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Distance from the camera-farthest body vertex to the bed top plane.
    pub bed_gap: f64,
    /// Initial blanket offset from the camera-nearest body vertex, toward
    /// the camera.
    pub blanket_offset: f64,
    /// Blanket (width, length) in meters; length runs along the bed's
    /// camera-up axis.
    pub blanket_size: (f64, f64),
    /// Bed (width, length, thickness) in meters.
    pub bed_size: (f64, f64, f64),
    /// Sun direction; `None` follows the bed's away-from-camera axis so the
    /// visible blanket face is lit.
    pub sun_direction: Option<[f64; 3]>,
    /// Cloth-to-body distance above which the blanket counts as fallen off.
    pub detach_threshold: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            bed_gap: 0.02,
            blanket_offset: 0.05,
            blanket_size: (1.6, 2.2),
            bed_size: (2.0, 3.0, 0.3),
            sun_direction: None,
            detach_threshold: 0.30,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        let positive = [
            ("bed_gap", self.bed_gap),
            ("blanket_offset", self.blanket_offset),
            ("blanket_width", self.blanket_size.0),
            ("blanket_length", self.blanket_size.1),
            ("bed_width", self.bed_size.0),
            ("bed_length", self.bed_size.1),
            ("bed_thickness", self.bed_size.2),
            ("detach_threshold", self.detach_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SceneError::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        if let Some(d) = self.sun_direction {
            let n = Vec3::from(d).norm();
            if !n.is_finite() || (n - 1.0).abs() >= 1e-6 {
                return Err(SceneError::InvalidConfig(format!(
                    "sun_direction must be unit length, |d| = {n}"
                )));
            }
        }
        Ok(())
    }
}

/// Orthonormal bed coordinate frame anchored at the camera-farthest body
/// vertex: `a1` points away from the camera, `a2` is the camera-up direction
/// orthogonalized against `a1`, `a3 = a1 x a2`.
///
/// The bed top face is the plane through `origin + gap*a1` with normal `-a1`;
/// the cuboid extrudes along `+a1` by `thickness`. `lateral` holds the
/// (a2, a3) offsets of the cuboid center, set by [`BedFrame::centered_on`].
#[derive(Debug, Clone)]
pub struct BedFrame {
    pub origin: Vec3,
    pub a1: Vec3,
    pub a2: Vec3,
    pub a3: Vec3,
    /// (width along a3, length along a2).
    pub top_extent: (f64, f64),
    pub thickness: f64,
    pub gap: f64,
    pub lateral: (f64, f64),
}

impl BedFrame {
    /// Point on the top plane directly above the origin.
    pub fn top_plane_point(&self) -> Vec3 {
        self.origin + self.gap * self.a1
    }

    /// Center the cuboid extents on a world point (typically the body's
    /// projected centroid).
    pub fn centered_on(mut self, point: &Vec3) -> Self {
        let rel = point - self.origin;
        self.lateral = (rel.dot(&self.a2), rel.dot(&self.a3));
        self
    }

    /// Center of the cuboid volume in world coordinates.
    pub fn cuboid_center(&self) -> Vec3 {
        self.top_plane_point()
            + 0.5 * self.thickness * self.a1
            + self.lateral.0 * self.a2
            + self.lateral.1 * self.a3
    }

    /// Half extents along (a1, a2, a3).
    pub fn half_extents(&self) -> Vec3 {
        Vec3::new(
            0.5 * self.thickness,
            0.5 * self.top_extent.1,
            0.5 * self.top_extent.0,
        )
    }

    /// Triangle mesh of the cuboid (for holdout rasterization).
    pub fn to_mesh(&self) -> (Vec<Vec3>, Vec<[u32; 3]>) {
        let c = self.cuboid_center();
        let h = self.half_extents();
        let mut vertices = Vec::with_capacity(8);
        for &s1 in &[-1.0, 1.0] {
            for &s2 in &[-1.0, 1.0] {
                for &s3 in &[-1.0, 1.0] {
                    vertices.push(c + s1 * h.x * self.a1 + s2 * h.y * self.a2 + s3 * h.z * self.a3);
                }
            }
        }
        // Vertex index bits: (s1 << 2) | (s2 << 1) | s3 with -1 -> 0, 1 -> 1.
        let faces = vec![
            [0, 1, 3], [0, 3, 2], // -a1 (top, toward camera)
            [4, 7, 5], [4, 6, 7], // +a1
            [0, 5, 1], [0, 4, 5], // -a2
            [2, 3, 7], [2, 7, 6], // +a2
            [0, 2, 6], [0, 6, 4], // -a3
            [1, 5, 7], [1, 7, 3], // +a3
        ];
        (vertices, faces)
    }
}

/// Build the bed frame at the camera-farthest vertex. Falls back to the
/// camera-right direction for `a2` when the camera-up direction is parallel
/// to `a1` (logged).
pub fn build_bed_frame(
    far_vertex: &Vec3,
    camera: &CameraModel,
    config: &SceneConfig,
) -> Result<BedFrame, SceneError> {
    let center = camera.center();
    let away = far_vertex - center;
    if away.norm() < 1e-9 {
        return Err(SceneError::DegenerateFarVertex);
    }
    let a1 = away.normalize();
    let up = camera.image_up_world();
    let mut a2 = up - up.dot(&a1) * a1;
    if a2.norm() < 1e-9 {
        log::warn!("camera-up is parallel to the away-from-camera axis; using camera-right for a2");
        let right = camera.image_right_world();
        a2 = right - right.dot(&a1) * a1;
    }
    let a2 = a2.normalize();
    let a3 = a1.cross(&a2);
    Ok(BedFrame {
        origin: *far_vertex,
        a1,
        a2,
        a3,
        top_extent: (config.bed_size.0, config.bed_size.1),
        thickness: config.bed_size.2,
        gap: config.bed_gap,
        lateral: (0.0, 0.0),
    })
}

/// Origin and orientation for the initial cloth grid: the blanket plane has
/// normal `-a1` (toward the camera), spans `(a2, a3)`, sits `blanket_offset`
/// in front of the camera-nearest body vertex, and is centered over the
/// body's bounding-box center in the bed plane.
#[derive(Debug, Clone)]
pub struct BlanketPlacement {
    pub center: Vec3,
    /// Length axis (bed a2).
    pub axis_len: Vec3,
    /// Width axis (bed a3).
    pub axis_wid: Vec3,
    /// Plane normal, pointing toward the camera (-a1).
    pub normal: Vec3,
}

pub fn init_blanket_placement(
    bed: &BedFrame,
    body: &SkinnedMesh,
    config: &SceneConfig,
) -> BlanketPlacement {
    let nearest_u1 = body
        .vertices
        .iter()
        .map(|v| (v - bed.origin).dot(&bed.a1))
        .fold(f64::INFINITY, f64::min);
    let (lo, hi) = body.bounding_box();
    let bbox_center = 0.5 * (lo + hi);
    let rel = bbox_center - bed.origin;
    let u1 = nearest_u1 - config.blanket_offset;
    BlanketPlacement {
        center: bed.origin + u1 * bed.a1 + rel.dot(&bed.a2) * bed.a2 + rel.dot(&bed.a3) * bed.a3,
        axis_len: bed.a2,
        axis_wid: bed.a3,
        normal: -bed.a1,
    }
}

/// Directional light with parallel rays and no falloff. `direction` is the
/// direction the rays travel.
#[derive(Debug, Clone, PartialEq)]
pub struct SunLight {
    pub direction: Vec3,
    pub intensity: f64,
}

/// The configured sun, defaulting to the bed's away-from-camera axis so the
/// camera-facing side of the blanket is lit.
pub fn sun_light(config: &SceneConfig, bed: &BedFrame) -> SunLight {
    let direction = match config.sun_direction {
        Some(d) => Vec3::from(d).normalize(),
        None => bed.a1,
    };
    SunLight { direction, intensity: 1.0 }
}

/// Perspective projection: `(u, v, depth)` in pixels and meters, or `None`
/// for points at or behind the near limit (camera-frame z <= 1e-6).
pub fn project(camera: &CameraModel, point: &Vec3) -> Option<(f64, f64, f64)> {
    let pc = camera.to_camera(point);
    if pc.z <= 1e-6 {
        return None;
    }
    Some((
        camera.fx * pc.x / pc.z + camera.cx,
        camera.fy * pc.y / pc.z + camera.cy,
        pc.z,
    ))
}

/// Inverse of [`project`] for a pixel with known depth.
pub fn unproject(camera: &CameraModel, u: f64, v: f64, depth: f64) -> Vec3 {
    let pc = Vec3::new(
        (u - camera.cx) / camera.fx * depth,
        (v - camera.cy) / camera.fy * depth,
        depth,
    );
    camera.rotation.transpose() * (pc - camera.translation)
}

/// Fully assembled per-segment scene: recentered camera, bed frame centered
/// on the body, blanket placement, and the sun.
#[derive(Debug, Clone)]
pub struct Scene {
    pub camera: CameraModel,
    pub bed: BedFrame,
    pub placement: BlanketPlacement,
    pub light: SunLight,
}

impl Scene {
    /// Build the scene for a segment's first frame. `camera` must already be
    /// recentered and `body` posed with zero root translation.
    pub fn build(
        body: &SkinnedMesh,
        camera: &CameraModel,
        config: &SceneConfig,
    ) -> Result<Self, SceneError> {
        config.validate()?;
        let (far_idx, _) = farthest_vertex(&body.vertices, camera)?;
        let bed = build_bed_frame(&body.vertices[far_idx], camera, config)?
            .centered_on(&body.vertex_centroid());
        let placement = init_blanket_placement(&bed, body, config);
        let light = sun_light(config, &bed);
        Ok(Self { camera: camera.clone(), bed, placement, light })
    }
}
