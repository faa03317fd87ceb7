//! Gaussian moment fitting and the Fréchet distance between fits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Diagonal floor applied to fitted covariances.
pub const COV_FLOOR: f64 = 1e-10;

/// Sample mean and covariance of a feature distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianSummary {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and covariance (n−1 denominator); the covariance is
/// symmetrized and its diagonal floored at [`COV_FLOOR`].
pub fn fit_gaussian(features: &[Vec<f64>]) -> Result<GaussianSummary> {
    let n = features.len();
    if n < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            actual: n,
        });
    }
    let dim = features[0].len();
    for f in features {
        if f.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: f.len(),
            });
        }
    }
    let mut mean = DVector::zeros(dim);
    for f in features {
        mean += DVector::from_column_slice(f);
    }
    mean /= n as f64;

    let mut cov = DMatrix::zeros(dim, dim);
    for f in features {
        let d = DVector::from_column_slice(f) - &mean;
        cov += &d * d.transpose();
    }
    cov /= (n - 1) as f64;
    cov = (&cov + cov.transpose()) / 2.0;
    for i in 0..dim {
        if cov[(i, i)] < COV_FLOOR {
            cov[(i, i)] = COV_FLOOR;
        }
    }
    Ok(GaussianSummary { mean, cov })
}

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// from rounding are clamped at zero.
fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) / 2.0;
    let eig = sym.symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussian fits:
/// ‖μa−μb‖² + Tr(Σa + Σb − 2(Σa^{1/2} Σb Σa^{1/2})^{1/2}).
pub fn frechet(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let sqrt_a = sqrt_psd(&a.cov);
    let inner = &sqrt_a * &b.cov * &sqrt_a;
    let cross = sqrt_psd(&inner);
    let trace_term = a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
    Ok((mean_term + trace_term).max(0.0))
}
