//! Deterministic feature descriptors for the Fréchet and MMD machinery.
//!
//! Fréchet-style metrics are usually computed on learned features; the
//! provider trait keeps that pluggable while the shipped baseline is a
//! handcrafted 64-dimensional descriptor that needs no model weights.

use crate::geometry::PointCloud;
use crate::rangeview::{project, unproject, RangeImage, SensorSpec};

/// Maps clouds / range images to fixed-length feature vectors.
/// Implementations must be deterministic and always return `dim()` values.
pub trait FeatureProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn features_cloud(&self, cloud: &PointCloud) -> Vec<f64>;
    fn features_image(&self, img: &RangeImage) -> Vec<f64>;
}

/// Number of cells in the canonical-box occupancy grid (4×4×4).
pub const OBJECT_OCCUPANCY_BINS: usize = 64;

const LOG_RANGE_BINS: usize = 32;
/// Offset added to floor(log2 r); bin 8 covers ranges in [1, 2) m.
const LOG_RANGE_OFFSET: i64 = 8;
const HEIGHT_BINS: usize = 16;
const HEIGHT_MIN: f64 = -4.0;
const HEIGHT_MAX: f64 = 12.0;

/// Handcrafted 64-dim scene descriptor:
/// 32-bin base-2 log-range histogram ⊕ 16-bin height histogram ⊕
/// 8 BEV quadrant statistics ⊕ 8 scalar summaries.
#[derive(Debug, Clone)]
pub struct BaselineFeatures {
    pub spec: SensorSpec,
}

impl BaselineFeatures {
    pub fn new(spec: SensorSpec) -> Self {
        Self { spec }
    }

    fn descriptor(&self, cloud: &PointCloud, img: &RangeImage) -> Vec<f64> {
        let mut out = Vec::with_capacity(64);
        let n = cloud.len();

        // log2-spaced range histogram: doubling every range shifts the
        // occupied bins by exactly one slot
        let mut log_hist = [0.0f64; LOG_RANGE_BINS];
        for p in &cloud.points {
            let r = p.norm();
            if r > 0.0 {
                let bin = (r.log2().floor() as i64 + LOG_RANGE_OFFSET)
                    .clamp(0, LOG_RANGE_BINS as i64 - 1) as usize;
                log_hist[bin] += 1.0;
            }
        }
        if n > 0 {
            for v in &mut log_hist {
                *v /= n as f64;
            }
        }
        out.extend_from_slice(&log_hist);

        let mut height_hist = [0.0f64; HEIGHT_BINS];
        for p in &cloud.points {
            let f = (p.z - HEIGHT_MIN) / (HEIGHT_MAX - HEIGHT_MIN);
            let bin = ((f * HEIGHT_BINS as f64).floor() as i64).clamp(0, HEIGHT_BINS as i64 - 1)
                as usize;
            height_hist[bin] += 1.0;
        }
        if n > 0 {
            for v in &mut height_hist {
                *v /= n as f64;
            }
        }
        out.extend_from_slice(&height_hist);

        // quadrant occupancy fraction and mean planar radius (x≥0,y≥0),
        // (x<0,y≥0), (x<0,y<0), (x≥0,y<0)
        let mut quad_count = [0.0f64; 4];
        let mut quad_radius = [0.0f64; 4];
        for p in &cloud.points {
            let q = match (p.x >= 0.0, p.y >= 0.0) {
                (true, true) => 0,
                (false, true) => 1,
                (false, false) => 2,
                (true, false) => 3,
            };
            quad_count[q] += 1.0;
            quad_radius[q] += (p.x * p.x + p.y * p.y).sqrt();
        }
        for q in 0..4 {
            let frac = if n > 0 { quad_count[q] / n as f64 } else { 0.0 };
            let mean_r = if quad_count[q] > 0.0 {
                quad_radius[q] / quad_count[q] / self.spec.range_max
            } else {
                0.0
            };
            out.push(frac);
            out.push(mean_r);
        }

        // scalar summaries
        let (mean_range, std_range) = mean_std(cloud.points.iter().map(|p| p.norm()));
        let (mean_int, std_int) = mean_std(cloud.intensity.iter().copied());
        let (mean_z, std_z) = mean_std(cloud.points.iter().map(|p| p.z));
        let finite_frac = img.finite_count() as f64 / (img.spec.rows * img.spec.cols) as f64;
        out.push((1.0 + n as f64).ln() / (1e6f64).ln());
        out.push(mean_range / self.spec.range_max);
        out.push(std_range / self.spec.range_max);
        out.push(finite_frac);
        out.push(mean_int);
        out.push(std_int);
        out.push((mean_z - HEIGHT_MIN) / (HEIGHT_MAX - HEIGHT_MIN) * (n > 0) as u8 as f64);
        out.push(std_z / (HEIGHT_MAX - HEIGHT_MIN));
        out
    }
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.collect();
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl FeatureProvider for BaselineFeatures {
    fn name(&self) -> &str {
        "baseline-64"
    }

    fn dim(&self) -> usize {
        64
    }

    fn features_cloud(&self, cloud: &PointCloud) -> Vec<f64> {
        let img = project(cloud, &self.spec);
        self.descriptor(cloud, &img)
    }

    fn features_image(&self, img: &RangeImage) -> Vec<f64> {
        let cloud = unproject(img);
        self.descriptor(&cloud, img)
    }
}

/// Normalized 4×4×4 occupancy histogram of a canonicalized object cloud
/// (points in the unit box [−0.5, 0.5]³).
pub fn object_occupancy(canonical: &PointCloud) -> Vec<f64> {
    let mut hist = vec![0.0f64; OBJECT_OCCUPANCY_BINS];
    let mut total = 0.0;
    for p in &canonical.points {
        let bin_of = |v: f64| (((v + 0.5) * 4.0).floor() as i64).clamp(0, 3) as usize;
        let idx = bin_of(p.x) * 16 + bin_of(p.y) * 4 + bin_of(p.z);
        hist[idx] += 1.0;
        total += 1.0;
    }
    if total > 0.0 {
        for v in &mut hist {
            *v /= total;
        }
    }
    hist
}

/// Feature provider over canonicalized object clouds: the occupancy grid
/// itself is the descriptor.
#[derive(Debug, Clone, Default)]
pub struct ObjectOccupancyFeatures;

impl FeatureProvider for ObjectOccupancyFeatures {
    fn name(&self) -> &str {
        "object-occupancy-4x4x4"
    }

    fn dim(&self) -> usize {
        OBJECT_OCCUPANCY_BINS
    }

    fn features_cloud(&self, cloud: &PointCloud) -> Vec<f64> {
        object_occupancy(cloud)
    }

    fn features_image(&self, _img: &RangeImage) -> Vec<f64> {
        unimplemented!("object features are defined on canonicalized clouds")
    }
}

#[allow(dead_code)]
fn _assert_object_provider_object_safe(p: &dyn FeatureProvider) -> usize {
    p.dim()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rangeview::RangeImage;
    use nalgebra::Vector3;

    fn provider() -> BaselineFeatures {
        BaselineFeatures::new(SensorSpec::default_32beam())
    }

    #[test]
    fn empty_cloud_gives_zeros() {
        let p = provider();
        let f = p.features_cloud(&PointCloud::default());
        assert_eq!(f.len(), 64);
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_for_identical_inputs() {
        let p = provider();
        let cloud = PointCloud::from_points(vec![
            Vector3::new(10.0, 2.0, -1.0),
            Vector3::new(-5.0, 8.0, 0.5),
            Vector3::new(30.0, -20.0, 1.5),
        ]);
        assert_eq!(p.features_cloud(&cloud), p.features_cloud(&cloud.clone()));
    }

    #[test]
    fn doubling_ranges_shifts_log_histogram_one_bin() {
        let p = provider();
        let cloud = PointCloud::from_points(vec![
            Vector3::new(10.0, 2.0, -1.0),
            Vector3::new(-5.0, 8.0, 0.5),
            Vector3::new(30.0, -20.0, 1.5),
        ]);
        let doubled = PointCloud::from_points(cloud.points.iter().map(|q| q * 2.0).collect());
        let f1 = p.features_cloud(&cloud);
        let f2 = p.features_cloud(&doubled);
        for bin in 0..LOG_RANGE_BINS - 1 {
            assert_eq!(f1[bin], f2[bin + 1], "bin {bin}");
        }
    }

    #[test]
    fn image_and_cloud_routes_agree_on_cell_centered_points() {
        let p = provider();
        let mut img = RangeImage::empty(p.spec.clone());
        for (row, col, r) in [(3usize, 50usize, 12.0), (17, 900, 45.0)] {
            let idx = img.idx(row, col);
            img.range[idx] = r;
            img.intensity[idx] = 0.4;
        }
        let via_image = p.features_image(&img);
        let via_cloud = p.features_cloud(&unproject(&img));
        for (a, b) in via_image.iter().zip(&via_cloud) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn occupancy_is_normalized() {
        let cloud = PointCloud::from_points(vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(0.4, 0.4, 0.4),
            Vector3::new(-0.4, -0.4, -0.4),
        ]);
        let h = object_occupancy(&cloud);
        assert_eq!(h.len(), OBJECT_OCCUPANCY_BINS);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
