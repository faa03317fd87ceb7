//! Kernel MMD and Jensen-Shannon divergence.

use crate::error::{Error, Result};
use crate::metrics::pairwise_sum;
use crate::rangeview::BevHistogram;

/// Gaussian kernel bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Bandwidth {
    /// Fixed σ in feature-space units.
    Fixed(f64),
    /// Median of pairwise distances over the pooled sample.
    MedianHeuristic,
}

/// An MMD² estimate; the unbiased estimator can dip below zero, so the
/// reported value is clamped and the raw value kept for metadata.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MmdValue {
    pub value: f64,
    pub raw: f64,
    pub bandwidth: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Unbiased MMD² estimator with the Gaussian kernel
/// k(a,b) = exp(−‖a−b‖²/2σ²).
pub fn mmd_gaussian(xs: &[Vec<f64>], ys: &[Vec<f64>], bandwidth: Bandwidth) -> Result<MmdValue> {
    let m = xs.len();
    let n = ys.len();
    if m < 2 || n < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            actual: m.min(n),
        });
    }
    let dim = xs[0].len();
    for v in xs.iter().chain(ys) {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: v.len(),
            });
        }
    }

    let sigma = match bandwidth {
        Bandwidth::Fixed(s) => s,
        Bandwidth::MedianHeuristic => {
            let pooled: Vec<&[f64]> = xs.iter().chain(ys).map(Vec::as_slice).collect();
            let mut dists = Vec::with_capacity(pooled.len() * (pooled.len() - 1) / 2);
            for i in 0..pooled.len() {
                for j in (i + 1)..pooled.len() {
                    dists.push(sq_dist(pooled[i], pooled[j]).sqrt());
                }
            }
            let med = median(dists);
            // degenerate pooled sample (all points identical)
            if med > 0.0 {
                med
            } else {
                1.0
            }
        }
    };
    if !(sigma > 0.0) {
        return Err(Error::InvalidValue(format!("bandwidth must be positive, got {sigma}")));
    }
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let kernel = |a: &[f64], b: &[f64]| (-gamma * sq_dist(a, b)).exp();

    let mut xx = Vec::with_capacity(m * (m - 1));
    for i in 0..m {
        for j in 0..m {
            if i != j {
                xx.push(kernel(&xs[i], &xs[j]));
            }
        }
    }
    let mut yy = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                yy.push(kernel(&ys[i], &ys[j]));
            }
        }
    }
    let mut xy = Vec::with_capacity(m * n);
    for x in xs {
        for y in ys {
            xy.push(kernel(x, y));
        }
    }
    let raw = pairwise_sum(&xx) / (m * (m - 1)) as f64
        + pairwise_sum(&yy) / (n * (n - 1)) as f64
        - 2.0 * pairwise_sum(&xy) / (m * n) as f64;
    Ok(MmdValue {
        value: raw.max(0.0),
        raw,
        bandwidth: sigma,
    })
}

/// Jensen-Shannon divergence (base 2, range [0,1]) between normalized
/// distributions; 0·log 0 = 0.
pub fn jsd_normalized(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut terms = Vec::with_capacity(p.len());
    for (&a, &b) in p.iter().zip(q) {
        let m = (a + b) / 2.0;
        let mut t = 0.0;
        if a > 0.0 {
            t += 0.5 * a * (a / m).log2();
        }
        if b > 0.0 {
            t += 0.5 * b * (b / m).log2();
        }
        terms.push(t);
    }
    // rounding can push the sum a hair outside [0,1]
    Ok(pairwise_sum(&terms).clamp(0.0, 1.0))
}

/// JSD between two BEV occupancy histograms over identical grids.
pub fn jsd(p: &BevHistogram, q: &BevHistogram) -> Result<f64> {
    if p.grid != q.grid {
        return Err(Error::DimensionMismatch {
            left: p.counts.len(),
            right: q.counts.len(),
        });
    }
    jsd_normalized(&p.normalized()?, &q.normalized()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointCloud;
    use crate::rangeview::{bev_histogram, BevGrid};
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian_samples(seed: u64, n: usize, dim: usize, shift: f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = || {
            // Box-Muller
            let u1: f64 = rng.random_range(1e-12..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        (0..n)
            .map(|_| (0..dim).map(|_| normal() + shift).collect())
            .collect()
    }

    /// Plain double-loop estimator used as the oracle.
    fn mmd_brute(xs: &[Vec<f64>], ys: &[Vec<f64>], sigma: f64) -> f64 {
        let k = |a: &[f64], b: &[f64]| (-sq_dist(a, b) / (2.0 * sigma * sigma)).exp();
        let m = xs.len() as f64;
        let n = ys.len() as f64;
        let mut xx = 0.0;
        for i in 0..xs.len() {
            for j in 0..xs.len() {
                if i != j {
                    xx += k(&xs[i], &xs[j]);
                }
            }
        }
        let mut yy = 0.0;
        for i in 0..ys.len() {
            for j in 0..ys.len() {
                if i != j {
                    yy += k(&ys[i], &ys[j]);
                }
            }
        }
        let mut xy = 0.0;
        for x in xs {
            for y in ys {
                xy += k(x, y);
            }
        }
        xx / (m * (m - 1.0)) + yy / (n * (n - 1.0)) - 2.0 * xy / (m * n)
    }

    #[test]
    fn permuted_sample_is_clamped_to_zero() {
        let xs = gaussian_samples(1, 50, 4, 0.0);
        let mut ys = xs.clone();
        ys.reverse();
        let out = mmd_gaussian(&xs, &ys, Bandwidth::MedianHeuristic).unwrap();
        assert!(out.raw <= 1e-12);
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn separated_gaussians_score_high() {
        let xs = gaussian_samples(2, 500, 4, 0.0);
        let ys = gaussian_samples(3, 500, 4, 5.0);
        let out = mmd_gaussian(&xs, &ys, Bandwidth::MedianHeuristic).unwrap();
        assert!(out.value > 0.5, "got {}", out.value);
    }

    #[test]
    fn matches_brute_force_oracle() {
        let xs = gaussian_samples(4, 60, 3, 0.0);
        let ys = gaussian_samples(5, 40, 3, 1.0);
        let sigma = 2.0;
        let fast = mmd_gaussian(&xs, &ys, Bandwidth::Fixed(sigma)).unwrap();
        let brute = mmd_brute(&xs, &ys, sigma);
        assert!((fast.raw - brute).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let xs = gaussian_samples(6, 1, 2, 0.0);
        let ys = gaussian_samples(7, 10, 2, 0.0);
        assert!(matches!(
            mmd_gaussian(&xs, &ys, Bandwidth::MedianHeuristic),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    fn hist(points: &[[f64; 2]]) -> BevHistogram {
        let grid = BevGrid {
            x_min: -10.0,
            x_max: 10.0,
            y_min: -10.0,
            y_max: 10.0,
            bins_x: 10,
            bins_y: 10,
        };
        let cloud = PointCloud::from_points(
            points.iter().map(|p| Vector3::new(p[0], p[1], 0.0)).collect(),
        );
        bev_histogram(&cloud, &grid)
    }

    #[test]
    fn jsd_cases() {
        let p = hist(&[[0.0, 0.0], [1.0, 1.0], [-3.0, 2.0]]);
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);

        // disjoint supports -> maximum divergence 1.0
        let a = hist(&[[-5.0, -5.0]]);
        let b = hist(&[[5.0, 5.0]]);
        assert_eq!(jsd(&a, &b).unwrap(), 1.0);

        let q = hist(&[[0.0, 0.0], [4.0, -2.0]]);
        let pq = jsd(&p, &q).unwrap();
        let qp = jsd(&q, &p).unwrap();
        assert!((pq - qp).abs() < 1e-15);
        assert!(pq > 0.0 && pq < 1.0);

        let empty = hist(&[]);
        assert!(matches!(jsd(&p, &empty), Err(Error::ZeroMass)));
    }
}
