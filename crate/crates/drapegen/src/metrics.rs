//! Procrustes-aligned mean per-joint position error (PA-MPJPE), the
//! unaligned MPJPE baseline, and dataset-level aggregation with
//! occluded-only filtering.

use thiserror::Error;

use crate::{Mat3, Vec3};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("joint sets have different sizes: {pred} vs {gt}")]
    SizeMismatch { pred: usize, gt: usize },
    #[error("need at least 3 joints, got {0}")]
    TooFewJoints(usize),
    #[error("degenerate joint set (zero variance); alignment is undefined")]
    DegenerateInput,
    #[error("non-finite joint coordinate")]
    NonFinite,
    #[error("no samples retained by the filter")]
    EmptySelection,
}

/// Similarity transform `x -> scale * rotation * x + translation` with a
/// proper rotation.
#[derive(Debug, Clone)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl SimilarityTransform {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.scale * (self.rotation * p) + self.translation
    }
}

fn validate_pair(pred: &[Vec3], gt: &[Vec3]) -> Result<(), MetricError> {
    if pred.len() != gt.len() {
        return Err(MetricError::SizeMismatch { pred: pred.len(), gt: gt.len() });
    }
    if pred.iter().chain(gt).any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())) {
        return Err(MetricError::NonFinite);
    }
    Ok(())
}

/// Least-squares similarity transform aligning `pred` onto `gt`
/// (argmin over s, R, t of sum_j ||s R pred_j + t - gt_j||^2), computed via
/// the centered cross-covariance and an SVD with a determinant guard, so the
/// rotation is proper even for rank-deficient or reflective configurations.
pub fn procrustes_align(pred: &[Vec3], gt: &[Vec3]) -> Result<SimilarityTransform, MetricError> {
    validate_pair(pred, gt)?;
    let n = pred.len();
    if n < 3 {
        return Err(MetricError::TooFewJoints(n));
    }
    let mean_p: Vec3 = pred.iter().sum::<Vec3>() / n as f64;
    let mean_g: Vec3 = gt.iter().sum::<Vec3>() / n as f64;

    let mut var_p = 0.0;
    let mut var_g = 0.0;
    let mut cross = Mat3::zeros();
    for (p, g) in pred.iter().zip(gt) {
        let pc = p - mean_p;
        let gc = g - mean_g;
        var_p += pc.norm_squared();
        var_g += gc.norm_squared();
        cross += pc * gc.transpose();
    }
    if var_p < 1e-18 || var_g < 1e-18 {
        return Err(MetricError::DegenerateInput);
    }

    let svd = cross.svd(true, true);
    let u = svd.u.ok_or(MetricError::DegenerateInput)?;
    let v_t = svd.v_t.ok_or(MetricError::DegenerateInput)?;
    let v = v_t.transpose();
    let det = (v * u.transpose()).determinant();
    let guard = Vec3::new(1.0, 1.0, if det < 0.0 { -1.0 } else { 1.0 });
    let rotation = v * Mat3::from_diagonal(&guard) * u.transpose();
    let trace: f64 = svd
        .singular_values
        .iter()
        .zip(guard.iter())
        .map(|(s, g)| s * g)
        .sum();
    let scale = trace / var_p;
    let translation = mean_g - scale * (rotation * mean_p);
    Ok(SimilarityTransform { scale, rotation, translation })
}

/// Mean per-joint position error after Procrustes alignment, in millimeters.
pub fn pa_mpjpe(pred: &[Vec3], gt: &[Vec3]) -> Result<f64, MetricError> {
    let transform = procrustes_align(pred, gt)?;
    let sum: f64 = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| (transform.apply(p) - g).norm())
        .sum();
    Ok(1000.0 * sum / pred.len() as f64)
}

/// Unaligned mean per-joint position error, in millimeters.
pub fn mpjpe(pred: &[Vec3], gt: &[Vec3]) -> Result<f64, MetricError> {
    validate_pair(pred, gt)?;
    if pred.is_empty() {
        return Err(MetricError::TooFewJoints(0));
    }
    let sum: f64 = pred.iter().zip(gt).map(|(p, g)| (p - g).norm()).sum();
    Ok(1000.0 * sum / pred.len() as f64)
}

/// One per-(frame, subject) metric value with its occlusion flag.
#[derive(Debug, Clone, Copy)]
pub struct MetricSample {
    pub value_mm: f64,
    pub occluded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFilter {
    /// Keep only samples of subjects the blanket occludes.
    OccludedOnly,
    All,
}

/// Arithmetic mean over the retained samples.
pub fn aggregate(samples: &[MetricSample], filter: SampleFilter) -> Result<f64, MetricError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for s in samples {
        if filter == SampleFilter::All || s.occluded {
            sum += s.value_mm;
            count += 1;
        }
    }
    if count == 0 {
        return Err(MetricError::EmptySelection);
    }
    Ok(sum / count as f64)
}

/// The common 14-joint evaluation subset of the canonical 24-joint skeleton:
/// hips, knees, ankles, neck, head, shoulders, elbows, wrists.
pub const SUBSET_14: [usize; 14] = [1, 2, 4, 5, 7, 8, 12, 15, 16, 17, 18, 19, 20, 21];

/// Restrict a joint set to [`SUBSET_14`]; errors when the set is too small.
pub fn select_subset14(joints: &[Vec3]) -> Result<Vec<Vec3>, MetricError> {
    if joints.len() < 24 {
        return Err(MetricError::TooFewJoints(joints.len()));
    }
    Ok(SUBSET_14.iter().map(|&i| joints[i]).collect())
}
