//! Chamfer distance and its point-set MMD variant.

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::metrics::pairwise_sum;
use crate::registration::KdTree;

/// Symmetric Chamfer distance in m²:
/// CD(A,B) = mean_a min_b ‖a−b‖² + mean_b min_a ‖b−a‖².
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud {
            context: "chamfer distance",
        });
    }
    Ok(directed_mean_sq(a, b)? + directed_mean_sq(b, a)?)
}

fn directed_mean_sq(from: &PointCloud, to: &PointCloud) -> Result<f64> {
    let tree = KdTree::build(to)?;
    let dists: Vec<f64> = from.points.iter().map(|p| tree.nearest_sq(p)).collect();
    Ok(pairwise_sum(&dists) / dists.len() as f64)
}

/// MMD-CD: mean over reference sets of the minimum Chamfer distance to any
/// generated set (coverage-style matching).
pub fn mmd_cd(gen_objects: &[PointCloud], ref_objects: &[PointCloud]) -> Result<f64> {
    if gen_objects.is_empty() || ref_objects.is_empty() {
        return Err(Error::InsufficientSamples {
            required: 1,
            actual: 0,
        });
    }
    let minima: Vec<f64> = ref_objects
        .iter()
        .map(|r| {
            let mut best = f64::INFINITY;
            for g in gen_objects {
                best = best.min(chamfer(r, g)?);
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&minima) / minima.len() as f64)
}
