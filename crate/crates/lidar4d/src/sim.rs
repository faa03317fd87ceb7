//! Procedural world generator and spinning-beam raycaster.
//!
//! Worlds are a ground plane plus cuboid actors backed by layout tuples.
//! All intersections are analytic (ray-plane, ray-OBB slab test), so ranges
//! are exact and every output is bit-reproducible for identical inputs.

use nalgebra::{Vector2, Vector3};
use rand_chacha::ChaCha8Rng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox3D, PointCloud, RigidTransform};
use crate::layout::{
    validate_layout, LayoutTuple, ObjectLabel, SceneLayout, TrajectoryStep, ValidityRules,
};
use crate::rangeview::{RangeImage, SensorSpec, NO_RETURN};

/// Default sensor height above the ground plane used by generated ego poses.
pub const SENSOR_HEIGHT_M: f64 = 1.8;

const GROUND_INTENSITY: f64 = 0.25;

fn label_intensity(label: ObjectLabel) -> f64 {
    match label {
        ObjectLabel::Car => 0.75,
        ObjectLabel::Pedestrian => 0.55,
        ObjectLabel::Truck => 0.85,
        ObjectLabel::Bus => 0.9,
        ObjectLabel::Cyclist => 0.65,
    }
}

/// Ground plane plus cuboid actors driven by a layout.
#[derive(Debug, Clone)]
pub struct World {
    pub ground_z: f64,
    pub layout: SceneLayout,
    /// Simulation half-extent in x and y; encloses all actor paths.
    pub extent: f64,
}

/// Builds a world from a layout; invalid layouts are rejected with the
/// same findings `validate_layout` reports.
pub fn make_world(layout: SceneLayout, ground_z: f64, rules: &ValidityRules) -> Result<World> {
    let report = validate_layout(&layout, rules);
    if !report.is_valid() {
        return Err(Error::InvalidLayout(report.violations));
    }
    Ok(World {
        ground_z,
        layout,
        extent: rules.extent,
    })
}

/// One simulated frame: the range image, its labeled ego-frame cloud, and
/// the ego pose the scan was taken from.
#[derive(Debug, Clone)]
pub struct SimFrame {
    pub image: RangeImage,
    pub cloud: PointCloud,
    pub ego_pose: RigidTransform,
}

struct Hit {
    range: f64,
    /// 0 = ground, k > 0 = object k−1.
    id: u32,
}

fn ray_plane(origin: &Vector3<f64>, dir: &Vector3<f64>, plane_z: f64) -> Option<f64> {
    if dir.z.abs() < 1e-15 {
        return None;
    }
    let t = (plane_z - origin.z) / dir.z;
    (t > 0.0).then_some(t)
}

/// Slab test in the box's local frame.
fn ray_obb(origin: &Vector3<f64>, dir: &Vector3<f64>, bbox: &BoundingBox3D) -> Option<f64> {
    let inv = bbox.pose().invert();
    let o = inv.apply_point(origin);
    let d = inv.rotation * dir;
    let half = bbox.dims / 2.0;
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for axis in 0..3 {
        if d[axis].abs() < 1e-15 {
            if o[axis].abs() > half[axis] {
                return None;
            }
            continue;
        }
        let t1 = (-half[axis] - o[axis]) / d[axis];
        let t2 = (half[axis] - o[axis]) / d[axis];
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        t_near = t_near.max(lo);
        t_far = t_far.min(hi);
        if t_near > t_far {
            return None;
        }
    }
    if t_far < 0.0 {
        return None;
    }
    Some(if t_near > 0.0 { t_near } else { t_far })
}

fn cast(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    ground_z: f64,
    boxes: &[BoundingBox3D],
    spec: &SensorSpec,
) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    let mut consider = |range: f64, id: u32| {
        if range < spec.range_min || range > spec.range_max {
            return;
        }
        if best.as_ref().is_none_or(|h| range < h.range) {
            best = Some(Hit { range, id });
        }
    };
    if let Some(t) = ray_plane(origin, dir, ground_z) {
        consider(t, 0);
    }
    for (k, bbox) in boxes.iter().enumerate() {
        if let Some(t) = ray_obb(origin, dir, bbox) {
            consider(t, (k + 1) as u32);
        }
    }
    best
}

/// Raycasts a single scan with actors advanced to step `t`.
pub fn raycast(
    world: &World,
    ego_pose: &RigidTransform,
    spec: &SensorSpec,
    t: usize,
) -> Result<RangeImage> {
    Ok(raycast_frame(world, ego_pose, spec, t)?.image)
}

/// As [`raycast`], also returning the labeled ego-frame point cloud.
pub fn raycast_frame(
    world: &World,
    ego_pose: &RigidTransform,
    spec: &SensorSpec,
    t: usize,
) -> Result<SimFrame> {
    spec.validate()?;
    let boxes: Vec<BoundingBox3D> = world
        .layout
        .objects
        .iter()
        .map(|o| o.box_at_step(t))
        .collect::<Result<_>>()?;
    let origin = ego_pose.translation;

    // parallel over rows; each row writes a disjoint slice, so the result
    // is identical for any thread count
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<u32>)> = (0..spec.rows)
        .into_par_iter()
        .map(|row| {
            let mut ranges = vec![NO_RETURN; spec.cols];
            let mut intensity = vec![0.0; spec.cols];
            let mut ids = vec![0u32; spec.cols];
            for col in 0..spec.cols {
                let dir = ego_pose.rotation * spec.ray_direction(row, col);
                if let Some(hit) = cast(&origin, &dir, world.ground_z, &boxes, spec) {
                    ranges[col] = hit.range;
                    intensity[col] = if hit.id == 0 {
                        GROUND_INTENSITY
                    } else {
                        label_intensity(world.layout.objects[(hit.id - 1) as usize].label)
                    };
                    ids[col] = hit.id;
                }
            }
            (ranges, intensity, ids)
        })
        .collect();

    let mut image = RangeImage::empty(spec.clone());
    let mut points = Vec::new();
    let mut cloud_intensity = Vec::new();
    let mut cloud_ids = Vec::new();
    for (row, (ranges, intensity, ids)) in rows.into_iter().enumerate() {
        for col in 0..spec.cols {
            let idx = row * spec.cols + col;
            image.range[idx] = ranges[col];
            image.intensity[idx] = intensity[col];
            if ranges[col].is_finite() {
                points.push(spec.ray_direction(row, col) * ranges[col]);
                cloud_intensity.push(intensity[col]);
                cloud_ids.push(ids[col]);
            }
        }
    }
    Ok(SimFrame {
        image,
        cloud: PointCloud {
            points,
            intensity: cloud_intensity,
            object_id: Some(cloud_ids),
        },
        ego_pose: *ego_pose,
    })
}

/// Simulates `horizon + 1` frames along an ego trajectory, advancing actors
/// by their layout trajectories.
pub fn simulate_sequence(
    world: &World,
    ego_trajectory: &[RigidTransform],
    spec: &SensorSpec,
    horizon: usize,
) -> Result<Vec<SimFrame>> {
    if ego_trajectory.len() != horizon + 1 {
        return Err(Error::InvalidValue(format!(
            "ego trajectory length {} != horizon + 1 = {}",
            ego_trajectory.len(),
            horizon + 1
        )));
    }
    (0..=horizon)
        .map(|t| raycast_frame(world, &ego_trajectory[t], spec, t))
        .collect()
}

/// Parameters for [`random_layout`].
#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub horizon: usize,
    pub dt: f64,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Canonical shape points sampled per object.
    pub shape_points: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            horizon: 8,
            dt: 0.5,
            min_objects: 1,
            max_objects: 12,
            shape_points: 512,
        }
    }
}

/// Plausible box dimensions (l, w, h) for a label.
pub fn label_dims(rng: &mut ChaCha8Rng, label: ObjectLabel) -> Vector3<f64> {
    let r = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| rng.random_range(lo..hi);
    match label {
        ObjectLabel::Car => Vector3::new(r(rng, 4.2, 4.9), r(rng, 1.7, 2.0), r(rng, 1.4, 1.7)),
        ObjectLabel::Pedestrian => {
            Vector3::new(r(rng, 0.5, 0.8), r(rng, 0.5, 0.8), r(rng, 1.5, 1.9))
        }
        ObjectLabel::Truck => Vector3::new(r(rng, 6.0, 9.0), r(rng, 2.2, 2.6), r(rng, 2.5, 3.4)),
        ObjectLabel::Bus => Vector3::new(r(rng, 9.5, 12.0), r(rng, 2.7, 3.0), r(rng, 3.0, 3.4)),
        ObjectLabel::Cyclist => Vector3::new(r(rng, 1.6, 2.0), r(rng, 0.5, 0.8), r(rng, 1.4, 1.8)),
    }
}

/// Deterministic shape points on the cuboid surface, box local frame.
pub fn sample_shape(rng: &mut ChaCha8Rng, dims: &Vector3<f64>, count: usize) -> Vec<Vector3<f64>> {
    let half = dims / 2.0;
    let areas = [
        dims.y * dims.z, // ±x faces
        dims.x * dims.z, // ±y faces
        dims.x * dims.y, // ±z faces
    ];
    let total: f64 = areas.iter().map(|a| 2.0 * a).sum();
    (0..count)
        .map(|_| {
            let mut pick = rng.random_range(0.0..total);
            let mut face = 0;
            for (i, a) in areas.iter().enumerate() {
                if pick < 2.0 * a {
                    face = i;
                    break;
                }
                pick -= 2.0 * a;
            }
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let u = rng.random_range(-1.0..1.0);
            let v = rng.random_range(-1.0..1.0);
            match face {
                0 => Vector3::new(sign * half.x, u * half.y, v * half.z),
                1 => Vector3::new(u * half.x, sign * half.y, v * half.z),
                _ => Vector3::new(u * half.x, v * half.y, sign * half.z),
            }
        })
        .collect()
}

fn random_trajectory(
    rng: &mut ChaCha8Rng,
    label: ObjectLabel,
    rules: &ValidityRules,
    config: &GeneratorConfig,
) -> Vec<TrajectoryStep> {
    // roughly a third of the agents stand still
    if rng.random_bool(0.35) {
        return vec![TrajectoryStep::zero(); config.horizon];
    }
    let speed = rng.random_range(0.0..0.8 * rules.speed_max(label));
    let turn = rng.random_range(-0.5..0.5) * rules.yawrate_max * config.dt;
    (0..config.horizon)
        .map(|_| TrajectoryStep {
            dx: speed * config.dt,
            dy: 0.0,
            dyaw: turn,
        })
        .collect()
}

/// Generates a layout deterministically from `seed`; the result always
/// passes [`validate_layout`] under `rules`.
pub fn random_layout(seed: u64, rules: &ValidityRules, config: &GeneratorConfig) -> SceneLayout {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(config.min_objects..=config.max_objects);

    // gentle ego motion: constant speed along +x at sensor height
    let ego_speed = rng.random_range(0.0..6.0);
    let ego_trajectory: Vec<RigidTransform> = (0..=config.horizon)
        .map(|t| {
            RigidTransform::from_translation(Vector3::new(
                ego_speed * config.dt * t as f64,
                0.0,
                SENSOR_HEIGHT_M,
            ))
        })
        .collect();

    let mut objects: Vec<LayoutTuple> = Vec::new();
    for i in 0..count {
        let label = ObjectLabel::ALL[i % ObjectLabel::ALL.len()];
        let dims = label_dims(&mut rng, label);
        // rejection-sample a placement whose whole path stays in bounds
        // and clear of the other actors
        'placement: for attempt in 0..64 {
            let radius = rng.random_range(6.0..0.6 * rules.extent);
            let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let center = Vector3::new(radius * angle.cos(), radius * angle.sin(), dims.z / 2.0);
            let trajectory = if attempt < 48 {
                random_trajectory(&mut rng, label, rules, config)
            } else {
                vec![TrajectoryStep::zero(); config.horizon]
            };
            let candidate = LayoutTuple {
                label,
                bbox: BoundingBox3D {
                    center,
                    dims,
                    yaw,
                },
                trajectory,
                shape: Vec::new(),
            };
            let margin = 0.55 * dims.xy().norm();
            for t in 0..=config.horizon {
                let b = candidate.box_at_step(t).unwrap();
                if b.center.x.abs() > rules.extent - margin
                    || b.center.y.abs() > rules.extent - margin
                {
                    continue 'placement;
                }
                for other in &objects {
                    let ob = other.box_at_step(t).unwrap();
                    let clearance = margin + 0.55 * other.bbox.dims.xy().norm() + 0.5;
                    if Vector2::new(b.center.x - ob.center.x, b.center.y - ob.center.y).norm()
                        < clearance
                    {
                        continue 'placement;
                    }
                }
            }
            let shape = sample_shape(&mut rng, &dims, config.shape_points);
            objects.push(LayoutTuple {
                shape,
                ..candidate
            });
            break;
        }
    }

    let layout = SceneLayout::new(objects, ego_trajectory, config.horizon, config.dt)
        .expect("generated layout is structurally sound");
    debug_assert!(validate_layout(&layout, rules).is_valid());
    layout
}
