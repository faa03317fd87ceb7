//! Scene- and object-level evaluation pipelines and the combined report.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox3D, PointCloud};
use crate::metrics::chamfer::mmd_cd;
use crate::metrics::features::{object_occupancy, BaselineFeatures, FeatureProvider};
use crate::metrics::frechet::{fit_gaussian, frechet};
use crate::metrics::mmd::{jsd_normalized, mmd_gaussian, Bandwidth, MmdValue};
use crate::metrics::pairwise_sum;
use crate::metrics::temporal::TemporalMetrics;
use crate::rangeview::{bev_histogram, BevGrid, RangeImage, SensorSpec};

/// One evaluation item: a point cloud and its range-image rendering.
#[derive(Debug, Clone)]
pub struct SceneSample {
    pub cloud: PointCloud,
    pub image: RangeImage,
}

impl SceneSample {
    pub fn from_cloud(cloud: PointCloud, spec: &SensorSpec) -> Self {
        let image = crate::rangeview::project(&cloud, spec);
        Self { cloud, image }
    }
}

/// Knobs for the scene / object evaluation pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Grid for the aggregated BEV JSD.
    pub jsd_grid: BevGrid,
    /// Side length of the coarse per-sample BEV histogram fed to MMD.
    pub mmd_bev_bins: usize,
    /// Bins of the per-sample range histogram (over [0, range_max]).
    pub range_hist_bins: usize,
    /// Bins of the per-sample radial point histogram (over [0, range_max]).
    pub radial_bins: usize,
    pub bandwidth: Bandwidth,
    /// TTCE intervals; `None` keeps the defaults {3, 4}.
    pub ttce_intervals: Option<Vec<usize>>,
    /// CTC intervals; `None` keeps the defaults {1, 2, 3, 4}.
    pub ctc_intervals: Option<Vec<usize>>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            jsd_grid: BevGrid::default(),
            mmd_bev_bins: 32,
            range_hist_bins: 64,
            radial_bins: 64,
            bandwidth: Bandwidth::MedianHeuristic,
            ttce_intervals: None,
            ctc_intervals: None,
        }
    }
}

/// Distributional realism of whole scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    /// Fréchet distance over range-image features.
    pub frd: f64,
    /// Fréchet distance over point-cloud features.
    pub fpd: f64,
    /// JSD between dataset-aggregated BEV occupancy histograms.
    pub jsd_bev: f64,
    pub mmd_bev: MmdValue,
    pub mmd_range: MmdValue,
    pub mmd_points: MmdValue,
}

/// Shape fidelity of box-cropped, canonicalized objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMetrics {
    /// Fréchet distance over occupancy features.
    pub fpd: f64,
    /// MMD-CD over raw object point sets.
    pub p_mmd: f64,
    /// JSD between aggregated occupancy histograms.
    pub jsd: f64,
    /// Kernel MMD over per-object occupancy vectors.
    pub mmd: MmdValue,
}

/// Provenance recorded alongside the numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub version: String,
    pub config: EvalConfig,
    pub feature_provider: String,
    pub gen_samples: usize,
    pub ref_samples: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub input_digests: Vec<String>,
}

/// Combined output of the evaluation pipelines; levels that were not run
/// stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scene: Option<SceneMetrics>,
    pub object: Option<ObjectMetrics>,
    pub temporal: Option<TemporalMetrics>,
    pub metadata: ReportMetadata,
}

fn normalized_or_zeros(counts: &[f64]) -> Vec<f64> {
    let total = pairwise_sum(counts);
    if total > 0.0 {
        counts.iter().map(|c| c / total).collect()
    } else {
        counts.to_vec()
    }
}

fn coarse_bev(cloud: &PointCloud, base: &BevGrid, bins: usize) -> Vec<f64> {
    let grid = BevGrid {
        bins_x: bins,
        bins_y: bins,
        ..base.clone()
    };
    let hist = bev_histogram(cloud, &grid);
    normalized_or_zeros(&hist.counts.iter().map(|&c| c as f64).collect::<Vec<_>>())
}

fn range_hist(img: &RangeImage, bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0f64; bins];
    let max = img.spec.range_max;
    for &r in &img.range {
        if r.is_finite() {
            let bin = ((r / max * bins as f64).floor() as i64).clamp(0, bins as i64 - 1) as usize;
            counts[bin] += 1.0;
        }
    }
    normalized_or_zeros(&counts)
}

fn radial_hist(cloud: &PointCloud, max: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0f64; bins];
    for p in &cloud.points {
        let r = p.norm();
        let bin = ((r / max * bins as f64).floor() as i64).clamp(0, bins as i64 - 1) as usize;
        counts[bin] += 1.0;
    }
    normalized_or_zeros(&counts)
}

/// Scene-level comparison of a generated set against a reference set.
pub fn eval_scene(
    gen: &[SceneSample],
    reference: &[SceneSample],
    config: &EvalConfig,
    provider: &dyn FeatureProvider,
) -> Result<SceneMetrics> {
    if gen.len() < 2 || reference.len() < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            actual: gen.len().min(reference.len()),
        });
    }

    let collect = |samples: &[SceneSample]| -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let mut img_feats = Vec::with_capacity(samples.len());
        let mut cloud_feats = Vec::with_capacity(samples.len());
        for s in samples {
            img_feats.push(provider.features_image(&s.image));
            cloud_feats.push(provider.features_cloud(&s.cloud));
        }
        Ok((img_feats, cloud_feats))
    };
    let (gen_img, gen_cloud) = collect(gen)?;
    let (ref_img, ref_cloud) = collect(reference)?;

    let frd = frechet(&fit_gaussian(&gen_img)?, &fit_gaussian(&ref_img)?)?;
    let fpd = frechet(&fit_gaussian(&gen_cloud)?, &fit_gaussian(&ref_cloud)?)?;

    let aggregate = |samples: &[SceneSample]| {
        let mut hist = crate::rangeview::BevHistogram::zero(config.jsd_grid.clone());
        for s in samples {
            hist.merge(&bev_histogram(&s.cloud, &config.jsd_grid));
        }
        hist
    };
    let jsd_bev = crate::metrics::mmd::jsd(&aggregate(gen), &aggregate(reference))?;

    let bev_vecs = |samples: &[SceneSample]| -> Vec<Vec<f64>> {
        samples
            .iter()
            .map(|s| coarse_bev(&s.cloud, &config.jsd_grid, config.mmd_bev_bins))
            .collect()
    };
    let mmd_bev = mmd_gaussian(&bev_vecs(gen), &bev_vecs(reference), config.bandwidth)?;

    let range_vecs = |samples: &[SceneSample]| -> Vec<Vec<f64>> {
        samples
            .iter()
            .map(|s| range_hist(&s.image, config.range_hist_bins))
            .collect()
    };
    let mmd_range = mmd_gaussian(&range_vecs(gen), &range_vecs(reference), config.bandwidth)?;

    let radial_vecs = |samples: &[SceneSample]| -> Vec<Vec<f64>> {
        samples
            .iter()
            .map(|s| radial_hist(&s.cloud, s.image.spec.range_max, config.radial_bins))
            .collect()
    };
    let mmd_points = mmd_gaussian(&radial_vecs(gen), &radial_vecs(reference), config.bandwidth)?;

    Ok(SceneMetrics {
        frd,
        fpd,
        jsd_bev,
        mmd_bev,
        mmd_range,
        mmd_points,
    })
}

/// Crops the points inside `bbox`, moves them into the box frame, and
/// divides by the box dimensions so the result lives in the unit box
/// [−0.5, 0.5]³ regardless of the object's world pose or size.
pub fn crop_and_canonicalize(cloud: &PointCloud, bbox: &BoundingBox3D) -> PointCloud {
    let inv = bbox.pose().invert();
    let mut points = Vec::new();
    let mut intensity = Vec::new();
    for (i, p) in cloud.points.iter().enumerate() {
        if bbox.contains(p) {
            let local = inv.apply_point(p);
            points.push(Vector3::new(
                local.x / bbox.dims.x,
                local.y / bbox.dims.y,
                local.z / bbox.dims.z,
            ));
            intensity.push(cloud.intensity[i]);
        }
    }
    PointCloud::new(points, intensity).expect("cropping preserves validity")
}

/// Object-level comparison over canonicalized point sets.
pub fn eval_object(
    gen: &[PointCloud],
    reference: &[PointCloud],
    config: &EvalConfig,
) -> Result<ObjectMetrics> {
    if gen.len() < 2 || reference.len() < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            actual: gen.len().min(reference.len()),
        });
    }
    for (i, o) in gen.iter().chain(reference).enumerate() {
        if o.is_empty() {
            return Err(Error::DatasetItem {
                index: i,
                source: Box::new(Error::EmptyCloud {
                    context: "object evaluation",
                }),
            });
        }
    }

    let occupancies = |objects: &[PointCloud]| -> Vec<Vec<f64>> {
        objects.iter().map(object_occupancy).collect()
    };
    let gen_occ = occupancies(gen);
    let ref_occ = occupancies(reference);

    let fpd = frechet(&fit_gaussian(&gen_occ)?, &fit_gaussian(&ref_occ)?)?;
    let p_mmd = mmd_cd(gen, reference)?;

    let aggregate = |occ: &[Vec<f64>]| -> Vec<f64> {
        let dim = occ[0].len();
        let mut sum = vec![0.0f64; dim];
        for v in occ {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
        }
        normalized_or_zeros(&sum)
    };
    let jsd = jsd_normalized(&aggregate(&gen_occ), &aggregate(&ref_occ))?;
    let mmd = mmd_gaussian(&gen_occ, &ref_occ, config.bandwidth)?;

    Ok(ObjectMetrics {
        fpd,
        p_mmd,
        jsd,
        mmd,
    })
}

impl MetricReport {
    pub fn new(config: &EvalConfig, provider_name: &str, gen: usize, reference: usize) -> Self {
        Self {
            scene: None,
            object: None,
            temporal: None,
            metadata: ReportMetadata {
                version: crate::VERSION.to_string(),
                config: config.clone(),
                feature_provider: provider_name.to_string(),
                gen_samples: gen,
                ref_samples: reference,
                input_digests: Vec::new(),
            },
        }
    }
}

/// Convenience scene pipeline with the shipped baseline features.
pub fn eval_scene_baseline(
    gen: &[SceneSample],
    reference: &[SceneSample],
    config: &EvalConfig,
    spec: &SensorSpec,
) -> Result<SceneMetrics> {
    eval_scene(gen, reference, config, &BaselineFeatures::new(spec.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidTransform;
    use crate::layout::ObjectLabel;
    use crate::sim::{label_dims, sample_shape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scene_cloud(seed: u64, n: usize, spread: f64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::from_points(
            (0..n)
                .map(|_| {
                    Vector3::new(
                        rng.random_range(-spread..spread),
                        rng.random_range(-spread..spread),
                        rng.random_range(-1.5..2.0),
                    )
                })
                .collect(),
        )
    }

    fn samples(seed: u64, count: usize, spread: f64) -> Vec<SceneSample> {
        let spec = SensorSpec::default_32beam();
        (0..count)
            .map(|i| SceneSample::from_cloud(scene_cloud(seed + i as u64, 800, spread), &spec))
            .collect()
    }

    #[test]
    fn self_comparison_is_near_zero() {
        let a = samples(1, 4, 40.0);
        let spec = SensorSpec::default_32beam();
        let m = eval_scene_baseline(&a, &a, &EvalConfig::default(), &spec).unwrap();
        assert!(m.frd <= 1e-9, "frd {}", m.frd);
        assert!(m.fpd <= 1e-9, "fpd {}", m.fpd);
        assert_eq!(m.jsd_bev, 0.0);
        assert_eq!(m.mmd_bev.value, 0.0);
        assert_eq!(m.mmd_range.value, 0.0);
        assert_eq!(m.mmd_points.value, 0.0);
    }

    #[test]
    fn mismatched_distributions_score_higher() {
        let spec = SensorSpec::default_32beam();
        let near = samples(10, 5, 15.0);
        let near_b = samples(40, 5, 15.0);
        let far = samples(20, 5, 45.0);
        let cfg = EvalConfig::default();
        let matched = eval_scene_baseline(&near, &near_b, &cfg, &spec).unwrap();
        let contrast = eval_scene_baseline(&near, &far, &cfg, &spec).unwrap();
        assert!(contrast.frd > matched.frd);
        assert!(contrast.fpd > matched.fpd);
        assert!(contrast.jsd_bev > matched.jsd_bev);
        assert!(contrast.mmd_bev.value > matched.mmd_bev.value);
    }

    #[test]
    fn too_few_samples_error() {
        let a = samples(1, 1, 20.0);
        let b = samples(2, 3, 20.0);
        let spec = SensorSpec::default_32beam();
        assert!(matches!(
            eval_scene_baseline(&a, &b, &EvalConfig::default(), &spec),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    fn object_cloud(label: ObjectLabel, seed: u64) -> (PointCloud, Vector3<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = label_dims(&mut rng, label);
        let points = sample_shape(&mut rng, &dims, 256);
        (PointCloud::from_points(points), dims)
    }

    fn canonical(label: ObjectLabel, seed: u64) -> PointCloud {
        let (cloud, dims) = object_cloud(label, seed);
        let bbox = BoundingBox3D::new(Vector3::zeros(), dims, 0.0).unwrap();
        crop_and_canonicalize(&cloud, &bbox)
    }

    #[test]
    fn object_self_comparison_is_near_zero() {
        let objs: Vec<PointCloud> = (0..4).map(|i| canonical(ObjectLabel::Car, i)).collect();
        let m = eval_object(&objs, &objs, &EvalConfig::default()).unwrap();
        assert!(m.fpd <= 1e-9);
        assert_eq!(m.p_mmd, 0.0);
        assert_eq!(m.jsd, 0.0);
        assert_eq!(m.mmd.value, 0.0);
    }

    #[test]
    fn category_contrast_scores_higher_than_within_category() {
        let cars: Vec<PointCloud> = (0..4).map(|i| canonical(ObjectLabel::Car, i)).collect();
        let cars_b: Vec<PointCloud> = (10..14).map(|i| canonical(ObjectLabel::Car, i)).collect();
        let peds: Vec<PointCloud> = (20..24)
            .map(|i| canonical(ObjectLabel::Pedestrian, i))
            .collect();
        let cfg = EvalConfig::default();
        let within = eval_object(&cars, &cars_b, &cfg).unwrap();
        let across = eval_object(&cars, &peds, &cfg).unwrap();
        assert!(across.p_mmd > 0.0);
        assert!(across.p_mmd > within.p_mmd);
        assert!(across.fpd > within.fpd);
    }

    #[test]
    fn canonicalization_is_pose_invariant() {
        let (local, dims) = object_cloud(ObjectLabel::Car, 7);
        let base_box = BoundingBox3D::new(Vector3::zeros(), dims, 0.0).unwrap();
        let base = crop_and_canonicalize(&local, &base_box);

        let pose = RigidTransform::from_yaw_translation(0.83, Vector3::new(12.0, -4.0, 0.6));
        let moved = PointCloud::from_points(
            local.points.iter().map(|p| pose.apply_point(p)).collect(),
        );
        let moved_box = BoundingBox3D::new(pose.translation, dims, 0.83).unwrap();
        let canon = crop_and_canonicalize(&moved, &moved_box);

        assert_eq!(base.len(), canon.len());
        for (a, b) in base.points.iter().zip(&canon.points) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn empty_object_reports_index() {
        let objs = vec![canonical(ObjectLabel::Car, 1), PointCloud::default()];
        let refs: Vec<PointCloud> = (0..2).map(|i| canonical(ObjectLabel::Car, i + 5)).collect();
        match eval_object(&objs, &refs, &EvalConfig::default()) {
            Err(Error::DatasetItem { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected DatasetItem error, got {other:?}"),
        }
    }

    #[test]
    fn report_serializes_round_trip() {
        let cfg = EvalConfig::default();
        let mut report = MetricReport::new(&cfg, "baseline-64", 4, 4);
        let a = samples(1, 3, 30.0);
        let spec = SensorSpec::default_32beam();
        report.scene = Some(eval_scene_baseline(&a, &a, &cfg, &spec).unwrap());
        let json = serde_json::to_string(&report).unwrap();
        let back: MetricReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
