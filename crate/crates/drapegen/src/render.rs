//! Deterministic rasterization of the blanket with Lambertian sun shading,
//! holdout depth masking against the body and bed, and opaque compositing
//! onto the original frame.
//!
//! There is no sampling anywhere: coverage is a pixel-center test, shading is
//! flat per triangle, and the whole pass is a pure function of the scene, so
//! identical inputs produce byte-identical frames.

use rand::Rng;
use thiserror::Error;

use crate::scene::{CameraModel, SunLight};
use crate::Vec3;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("frame is {frame_w}x{frame_h} but the camera image is {cam_w}x{cam_h}")]
    DimensionMismatch { frame_w: usize, frame_h: usize, cam_w: usize, cam_h: usize },
}

/// Per-pixel nearest depth in meters; +inf where nothing was rasterized.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![f32::INFINITY; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    fn put_min(&mut self, x: usize, y: usize, depth: f32) {
        let d = &mut self.data[y * self.width + x];
        if depth < *d {
            *d = depth;
        }
    }
}

/// 8-bit sRGB frame buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl FrameImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; width * height * 3] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Blanket surface: a flat albedo, shaded two-sided by default.
#[derive(Debug, Clone, PartialEq)]
pub struct BlanketMaterial {
    pub albedo: [f64; 3],
    pub two_sided: bool,
}

/// Albedo drawn independently and uniformly per channel on [0, 1).
pub fn sample_blanket_color<R: Rng>(rng: &mut R) -> BlanketMaterial {
    BlanketMaterial {
        albedo: [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()],
        two_sided: true,
    }
}

/// Shading knobs: the ambient floor keeps unlit folds from going pure black;
/// `supersample` renders at 2x2 and box-filters covered pixels.
#[derive(Debug, Clone)]
pub struct RenderOptions {
    pub ambient_floor: f64,
    pub supersample: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { ambient_floor: 0.15, supersample: false }
    }
}

/// Triangles crossing the near plane are clipped at this camera-space depth.
const ZNEAR: f64 = 1e-4;

fn srgb_encode(linear: f64) -> u8 {
    let c = linear.clamp(0.0, 1.0);
    let s = if c <= 0.003_130_8 { 12.92 * c } else { 1.055 * c.powf(1.0 / 2.4) - 0.055 };
    (s * 255.0).round() as u8
}

/// Clip a camera-space triangle against z = ZNEAR; returns 0-2 triangles.
fn clip_near(tri: [Vec3; 3]) -> Vec<[Vec3; 3]> {
    let inside: Vec<bool> = tri.iter().map(|p| p.z >= ZNEAR).collect();
    let n_in = inside.iter().filter(|&&b| b).count();
    if n_in == 3 {
        return vec![tri];
    }
    if n_in == 0 {
        return vec![];
    }
    // Sutherland-Hodgman against the single plane.
    let mut poly = Vec::with_capacity(4);
    for i in 0..3 {
        let j = (i + 1) % 3;
        let (p, q) = (tri[i], tri[j]);
        if inside[i] {
            poly.push(p);
        }
        if inside[i] != inside[j] {
            let t = (ZNEAR - p.z) / (q.z - p.z);
            poly.push(p + t * (q - p));
        }
    }
    match poly.len() {
        3 => vec![[poly[0], poly[1], poly[2]]],
        4 => vec![[poly[0], poly[1], poly[2]], [poly[0], poly[2], poly[3]]],
        _ => vec![],
    }
}

#[inline]
fn edge(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> f64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

/// Rasterize one camera-space triangle over pixel centers (top-left origin,
/// centers at +0.5), calling `frag(x, y, depth)` for covered pixels.
/// Perspective-correct depth via screen-linear 1/z.
fn rasterize_triangle<F: FnMut(usize, usize, f64)>(
    camera_px: (f64, f64, f64, f64, usize, usize),
    tri_cam: [Vec3; 3],
    frag: &mut F,
) {
    let (fx, fy, cx, cy, width, height) = camera_px;
    for t in clip_near(tri_cam) {
        let mut s = [(0.0f64, 0.0f64, 0.0f64); 3];
        for (i, p) in t.iter().enumerate() {
            s[i] = (fx * p.x / p.z + cx, fy * p.y / p.z + cy, 1.0 / p.z);
        }
        let mut area2 = edge(s[0].0, s[0].1, s[1].0, s[1].1, s[2].0, s[2].1);
        if area2 == 0.0 {
            continue;
        }
        if area2 < 0.0 {
            s.swap(1, 2);
            area2 = -area2;
        }
        let min_x = s.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
        let max_x = s.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
        let min_y = s.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        let max_y = s.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
        let x0 = ((min_x - 0.5).ceil().max(0.0)) as usize;
        let x1 = ((max_x - 0.5).floor()).min(width as f64 - 1.0);
        let y0 = ((min_y - 0.5).ceil().max(0.0)) as usize;
        let y1 = ((max_y - 0.5).floor()).min(height as f64 - 1.0);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        let (x1, y1) = (x1 as usize, y1 as usize);
        for y in y0..=y1 {
            let py = y as f64 + 0.5;
            for x in x0..=x1 {
                let px = x as f64 + 0.5;
                let e0 = edge(s[1].0, s[1].1, s[2].0, s[2].1, px, py);
                let e1 = edge(s[2].0, s[2].1, s[0].0, s[0].1, px, py);
                let e2 = edge(s[0].0, s[0].1, s[1].0, s[1].1, px, py);
                if e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0 {
                    let inv_z = (e0 * s[0].2 + e1 * s[1].2 + e2 * s[2].2) / area2;
                    frag(x, y, 1.0 / inv_z);
                }
            }
        }
    }
}

fn camera_px(camera: &CameraModel, scale: usize) -> (f64, f64, f64, f64, usize, usize) {
    let s = scale as f64;
    (
        camera.fx * s,
        camera.fy * s,
        camera.cx * s,
        camera.cy * s,
        camera.width as usize * scale,
        camera.height as usize * scale,
    )
}

/// Nearest depth per pixel over every triangle of the given meshes
/// (vertices, faces). Empty input yields an all-infinity map.
pub fn rasterize_depth(meshes: &[(&[Vec3], &[[u32; 3]])], camera: &CameraModel) -> DepthMap {
    rasterize_depth_scaled(meshes, camera, 1)
}

fn rasterize_depth_scaled(
    meshes: &[(&[Vec3], &[[u32; 3]])],
    camera: &CameraModel,
    scale: usize,
) -> DepthMap {
    let px = camera_px(camera, scale);
    let mut depth = DepthMap::new(px.4, px.5);
    for (vertices, faces) in meshes {
        for face in faces.iter() {
            let tri = [
                camera.to_camera(&vertices[face[0] as usize]),
                camera.to_camera(&vertices[face[1] as usize]),
                camera.to_camera(&vertices[face[2] as usize]),
            ];
            rasterize_triangle(px, tri, &mut |x, y, z| depth.put_min(x, y, z as f32));
        }
    }
    depth
}

/// Composite the shaded blanket over the original frame.
///
/// A pixel is written only when a blanket fragment is both the nearest
/// blanket fragment at that pixel and strictly nearer than the holdout depth
/// (body + bed); every other pixel stays byte-identical to the original.
#[allow(clippy::too_many_arguments)]
pub fn render_blanket(
    vertices: &[Vec3],
    faces: &[[u32; 3]],
    material: &BlanketMaterial,
    light: &SunLight,
    camera: &CameraModel,
    holdout: &DepthMap,
    original: &FrameImage,
    options: &RenderOptions,
) -> Result<FrameImage, RenderError> {
    let (w, h) = (camera.width as usize, camera.height as usize);
    if original.width != w || original.height != h {
        return Err(RenderError::DimensionMismatch {
            frame_w: original.width,
            frame_h: original.height,
            cam_w: w,
            cam_h: h,
        });
    }
    if holdout.width != w || holdout.height != h {
        return Err(RenderError::DimensionMismatch {
            frame_w: holdout.width,
            frame_h: holdout.height,
            cam_w: w,
            cam_h: h,
        });
    }

    let scale = if options.supersample { 2 } else { 1 };
    let px = camera_px(camera, scale);
    let blanket_depth = rasterize_depth_scaled(&[(vertices, faces)], camera, scale);
    let mut shaded: Vec<Option<[u8; 3]>> = vec![None; px.4 * px.5];

    let cam_center = camera.center();
    for face in faces {
        let a = vertices[face[0] as usize];
        let b = vertices[face[1] as usize];
        let c = vertices[face[2] as usize];
        let raw_normal = (b - a).cross(&(c - a));
        if raw_normal.norm() < 1e-18 {
            continue;
        }
        let mut normal = raw_normal.normalize();
        let centroid = (a + b + c) / 3.0;
        let toward_camera = normal.dot(&(cam_center - centroid)) >= 0.0;
        if !toward_camera {
            if !material.two_sided {
                continue;
            }
            normal = -normal;
        }
        let lambert = normal.dot(&-light.direction).max(0.0);
        let lit = light.intensity * lambert.max(options.ambient_floor);
        let rgb = [
            srgb_encode(material.albedo[0] * lit),
            srgb_encode(material.albedo[1] * lit),
            srgb_encode(material.albedo[2] * lit),
        ];

        let tri = [camera.to_camera(&a), camera.to_camera(&b), camera.to_camera(&c)];
        rasterize_triangle(px, tri, &mut |x, y, z| {
            let zf = z as f32;
            if zf == blanket_depth.get(x, y) {
                // Holdout test in original-resolution pixel space.
                let hx = x / scale;
                let hy = y / scale;
                if zf < holdout.get(hx, hy) {
                    shaded[y * px.4 + x] = Some(rgb);
                }
            }
        });
    }

    let mut out = original.clone();
    if scale == 1 {
        for y in 0..h {
            for x in 0..w {
                if let Some(rgb) = shaded[y * w + x] {
                    out.put(x, y, rgb);
                }
            }
        }
    } else {
        // Box-filter only pixels with at least one shaded subsample; the
        // rest stay byte-identical to the original.
        for y in 0..h {
            for x in 0..w {
                let mut any = false;
                let mut acc = [0u32; 3];
                for sy in 0..scale {
                    for sx in 0..scale {
                        let sub = shaded[(y * scale + sy) * px.4 + (x * scale + sx)];
                        let rgb = match sub {
                            Some(rgb) => {
                                any = true;
                                rgb
                            }
                            None => original.get(x, y),
                        };
                        for k in 0..3 {
                            acc[k] += rgb[k] as u32;
                        }
                    }
                }
                if any {
                    let n = (scale * scale) as u32;
                    out.put(
                        x,
                        y,
                        [
                            ((acc[0] + n / 2) / n) as u8,
                            ((acc[1] + n / 2) / n) as u8,
                            ((acc[2] + n / 2) / n) as u8,
                        ],
                    );
                }
            }
        }
    }
    Ok(out)
}

/// Triangulation of a `res` x `res` grid (two triangles per quad, fixed
/// diagonal).
pub fn grid_triangles(res: usize) -> Vec<[u32; 3]> {
    let mut faces = Vec::with_capacity(2 * (res - 1) * (res - 1));
    let idx = |r: usize, c: usize| (r * res + c) as u32;
    for r in 0..res - 1 {
        for c in 0..res - 1 {
            faces.push([idx(r, c), idx(r, c + 1), idx(r + 1, c + 1)]);
            faces.push([idx(r, c), idx(r + 1, c + 1), idx(r + 1, c)]);
        }
    }
    faces
}

/// Midpoint subdivision with vertex smoothing for rendering only: face
/// points are quad centroids, edge points are edge midpoints averaged with
/// the adjacent face points, original points are relaxed toward their
/// neighbor average (boundary points use the crease rule, corners stay).
/// Each level maps an n x n grid to (2n-1) x (2n-1).
pub fn subdivide_grid(positions: &[Vec3], res: usize, levels: usize) -> (Vec<Vec3>, usize) {
    assert_eq!(positions.len(), res * res);
    let mut pos = positions.to_vec();
    let mut n = res;
    for _ in 0..levels {
        let m = 2 * n - 1;
        let at = |r: usize, c: usize, p: &[Vec3]| p[r * n + c];
        let face = |r: usize, c: usize, p: &[Vec3]| {
            (at(r, c, p) + at(r, c + 1, p) + at(r + 1, c, p) + at(r + 1, c + 1, p)) / 4.0
        };
        let mut next = vec![Vec3::zeros(); m * m];
        for r in 0..n {
            for c in 0..n {
                // Original point, relaxed.
                let p = at(r, c, &pos);
                let interior = r > 0 && r < n - 1 && c > 0 && c < n - 1;
                let relaxed = if interior {
                    let avg = (at(r - 1, c, &pos)
                        + at(r + 1, c, &pos)
                        + at(r, c - 1, &pos)
                        + at(r, c + 1, &pos))
                        / 4.0;
                    0.5 * (p + avg)
                } else {
                    let corner = (r == 0 || r == n - 1) && (c == 0 || c == n - 1);
                    if corner {
                        p
                    } else if r == 0 || r == n - 1 {
                        0.25 * (2.0 * p + at(r, c - 1, &pos) + at(r, c + 1, &pos))
                    } else {
                        0.25 * (2.0 * p + at(r - 1, c, &pos) + at(r + 1, c, &pos))
                    }
                };
                next[(2 * r) * m + 2 * c] = relaxed;

                // Horizontal edge point to the right.
                if c + 1 < n {
                    let mid = 0.5 * (p + at(r, c + 1, &pos));
                    let mut adj = Vec::with_capacity(2);
                    if r > 0 {
                        adj.push(face(r - 1, c, &pos));
                    }
                    if r < n - 1 {
                        adj.push(face(r, c, &pos));
                    }
                    let ep = if adj.len() == 2 {
                        0.5 * (mid + 0.5 * (adj[0] + adj[1]))
                    } else {
                        mid
                    };
                    next[(2 * r) * m + 2 * c + 1] = ep;
                }
                // Vertical edge point below.
                if r + 1 < n {
                    let mid = 0.5 * (p + at(r + 1, c, &pos));
                    let mut adj = Vec::with_capacity(2);
                    if c > 0 {
                        adj.push(face(r, c - 1, &pos));
                    }
                    if c < n - 1 {
                        adj.push(face(r, c, &pos));
                    }
                    let ep = if adj.len() == 2 {
                        0.5 * (mid + 0.5 * (adj[0] + adj[1]))
                    } else {
                        mid
                    };
                    next[(2 * r + 1) * m + 2 * c] = ep;
                }
                // Face point.
                if r + 1 < n && c + 1 < n {
                    next[(2 * r + 1) * m + 2 * c + 1] = face(r, c, &pos);
                }
            }
        }
        pos = next;
        n = m;
    }
    (pos, n)
}
