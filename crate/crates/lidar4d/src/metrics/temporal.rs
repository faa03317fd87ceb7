//! Temporal consistency metrics over frame sequences.
//!
//! CTC: mean Chamfer distance between frames a fixed interval apart.
//! TTCE: transform error of ICP-estimated inter-frame motion against the
//! ground-truth ego poses.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RigidTransform};
use crate::metrics::chamfer::chamfer;
use crate::metrics::pairwise_sum;
use crate::registration::{icp, IcpParams};

/// Mean translation / rotation error of registered inter-frame transforms.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TtceError {
    pub translation_m: f64,
    pub rotation_deg: f64,
}

/// Mean Chamfer distance (m²) between frame_t and frame_{t+k}.
pub fn ctc(frames: &[PointCloud], interval: usize) -> Result<f64> {
    if interval == 0 {
        return Ok(0.0);
    }
    if frames.len() < interval + 1 {
        return Err(Error::IntervalTooLarge {
            interval,
            frames: frames.len(),
        });
    }
    let pairs: Vec<f64> = (0..frames.len() - interval)
        .into_par_iter()
        .map(|t| chamfer(&frames[t], &frames[t + interval]))
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&pairs) / pairs.len() as f64)
}

/// Registers frame_{t+k} onto frame_t with ICP and compares the estimate
/// against the pose-derived ground truth T_gt = inv(ego_t)·ego_{t+k}.
/// Errors are measured on Δ = inv(T_gt)·T_pred and averaged over t.
pub fn ttce(
    frames: &[PointCloud],
    gt_ego: &[RigidTransform],
    interval: usize,
    params: &IcpParams,
) -> Result<TtceError> {
    if frames.len() != gt_ego.len() {
        return Err(Error::DimensionMismatch {
            left: frames.len(),
            right: gt_ego.len(),
        });
    }
    if interval == 0 {
        return Ok(TtceError {
            translation_m: 0.0,
            rotation_deg: 0.0,
        });
    }
    if frames.len() < interval + 1 {
        return Err(Error::IntervalTooLarge {
            interval,
            frames: frames.len(),
        });
    }
    let errors: Vec<(f64, f64)> = (0..frames.len() - interval)
        .into_par_iter()
        .map(|t| {
            let reg = icp(&frames[t + interval], &frames[t], params).map_err(|e| {
                Error::RegistrationAtFrame {
                    frame: t,
                    source: Box::new(e),
                }
            })?;
            let t_gt = gt_ego[t].invert().compose(&gt_ego[t + interval]);
            let delta = t_gt.invert().compose(&reg.transform);
            Ok((delta.translation.norm(), delta.rotation_angle().to_degrees()))
        })
        .collect::<Result<_>>()?;
    let trans: Vec<f64> = errors.iter().map(|e| e.0).collect();
    let rot: Vec<f64> = errors.iter().map(|e| e.1).collect();
    Ok(TtceError {
        translation_m: pairwise_sum(&trans) / trans.len() as f64,
        rotation_deg: pairwise_sum(&rot) / rot.len() as f64,
    })
}

/// Per-interval temporal metrics for one sequence.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TemporalMetrics {
    pub ttce: BTreeMap<usize, TtceError>,
    pub ctc: BTreeMap<usize, f64>,
}

/// TTCE at intervals {3, 4} and CTC at {1, 2, 3, 4} unless overridden.
pub fn eval_temporal(
    frames: &[PointCloud],
    gt_ego: &[RigidTransform],
    ttce_intervals: Option<&[usize]>,
    ctc_intervals: Option<&[usize]>,
    params: &IcpParams,
) -> Result<TemporalMetrics> {
    let ttce_intervals = ttce_intervals.unwrap_or(&[3, 4]);
    let ctc_intervals = ctc_intervals.unwrap_or(&[1, 2, 3, 4]);
    let mut out = TemporalMetrics {
        ttce: BTreeMap::new(),
        ctc: BTreeMap::new(),
    };
    for &k in ttce_intervals {
        out.ttce.insert(k, ttce(frames, gt_ego, k, params)?);
    }
    for &k in ctc_intervals {
        out.ctc.insert(k, ctc(frames, k)?);
    }
    Ok(out)
}
