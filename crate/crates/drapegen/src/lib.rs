//! Engine for augmenting motion-capture video with physically simulated
//! blanket occlusions.
//!
//! The crate poses a parametric body model per frame, drapes a particle-grid
//! cloth over it with position-based dynamics, rasterizes the cloth with
//! holdout depth masking against the body and bed, composites the result onto
//! the original frames, and packages everything as a split/video/frame dataset
//! with a keypoint manifest. A Procrustes-aligned joint-error metric for
//! evaluating pose estimators on the output lives in [`metrics`].
//!
//! All simulation and rendering is deterministic: the same inputs, config and
//! seed produce byte-identical frames and manifests regardless of worker
//! count.

pub mod body;
pub mod cloth;
pub mod metrics;
pub mod pipeline;
pub mod render;
pub mod scene;
pub mod synthetic;

/// 3-vector in meters (world or camera frame).
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3x3 matrix, used for rotations and frames.
pub type Mat3 = nalgebra::Matrix3<f64>;
