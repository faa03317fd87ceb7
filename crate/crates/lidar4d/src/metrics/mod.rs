//! Scene-, object-, and temporal-level evaluation metrics.
//!
//! Distributional machinery (Fréchet distances over pluggable features,
//! kernel MMD, Jensen-Shannon divergence) plus the point-set metrics
//! (Chamfer distance, MMD-CD) and the temporal consistency measures
//! CTC and TTCE.

mod chamfer;
mod eval;
mod features;
mod frechet;
mod mmd;
mod temporal;

pub use chamfer::{chamfer, mmd_cd};
pub use eval::{
    crop_and_canonicalize, eval_object, eval_scene, eval_scene_baseline, EvalConfig, MetricReport,
    ObjectMetrics, ReportMetadata, SceneMetrics, SceneSample,
};
pub use features::{
    object_occupancy, BaselineFeatures, FeatureProvider, ObjectOccupancyFeatures,
    OBJECT_OCCUPANCY_BINS,
};
pub use frechet::{fit_gaussian, frechet, GaussianSummary};
pub use mmd::{jsd, jsd_normalized, mmd_gaussian, Bandwidth, MmdValue};
pub use temporal::{ctc, eval_temporal, ttce, TemporalMetrics, TtceError};

/// Sums in a fixed pairwise order, independent of how the values were
/// produced; keeps dataset-level reductions identical across thread counts.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}
