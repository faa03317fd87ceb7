//! Motion-prior warping: extends a labeled frame into future frames.
//!
//! Background points move with the ego pose, foreground points with their
//! object's box trajectory. Per-step warps telescope exactly, so the direct
//! frame-0 anchor warp equals any chain of step warps before visibility
//! culling; the anchor is what keeps long sequences drift-free.

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox3D, PointCloud, RigidTransform};
use crate::layout::SceneLayout;
use crate::rangeview::{project_indexed, unproject, RangeImage, SensorSpec};

/// A labeled frame: ego-frame cloud with object ids, its world ego pose,
/// and the step index it belongs to.
#[derive(Debug, Clone)]
pub struct FrameState {
    pub cloud: PointCloud,
    pub ego_pose: RigidTransform,
    pub step: usize,
}

/// Re-expresses the background points (object_id = 0) in the ego frame at
/// `ego_next`: p' = inv(ego_next)·ego_pose·p. Foreground is excluded.
pub fn warp_background(frame: &FrameState, ego_next: &RigidTransform) -> PointCloud {
    let relative = ego_next.invert().compose(&frame.ego_pose);
    let background = frame.cloud.filter(|i| frame.cloud.id_at(i) == 0);
    relative.apply(&background)
}

/// Maps world-frame points rigidly from `box_t`'s frame to `box_next`'s
/// frame. Pairwise distances are preserved exactly.
pub fn warp_object(
    points: &PointCloud,
    box_t: &BoundingBox3D,
    box_next: &BoundingBox3D,
) -> PointCloud {
    let transform = box_next.pose().compose(&box_t.pose().invert());
    transform.apply(points)
}

/// Warps every point of `frame` from its step to `t_next`, staying in the
/// `t_next` ego frame, without any visibility culling. Ids are preserved.
pub fn warp_step(frame: &FrameState, layout: &SceneLayout, t_next: usize) -> Result<PointCloud> {
    if t_next > layout.horizon {
        return Err(Error::StepOutOfRange {
            step: t_next,
            horizon: layout.horizon,
        });
    }
    let ego_next = layout.ego_pose(t_next);
    let into_next = ego_next.invert();

    // per-object world-frame step transforms
    let object_motion: Vec<RigidTransform> = layout
        .objects
        .iter()
        .map(|o| {
            let from = o.box_at_step(frame.step)?.pose();
            let to = o.box_at_step(t_next)?.pose();
            Ok(to.compose(&from.invert()))
        })
        .collect::<Result<_>>()?;

    let points = (0..frame.cloud.len())
        .map(|i| {
            let world = frame.ego_pose.apply_point(&frame.cloud.points[i]);
            let id = frame.cloud.id_at(i);
            let moved = if id == 0 {
                world
            } else {
                object_motion[(id - 1) as usize].apply_point(&world)
            };
            into_next.apply_point(&moved)
        })
        .collect();
    Ok(PointCloud {
        points,
        intensity: frame.cloud.intensity.clone(),
        object_id: frame.cloud.object_id.clone(),
    })
}

/// Output of [`synthesize_next`]: the visible warped frame and its image.
pub struct SynthesizedFrame {
    pub frame: FrameState,
    pub image: RangeImage,
}

/// Advances a frame one step: warps background by ego motion and each
/// object by its box step, resolves visibility with the range-view
/// z-buffer, and returns the visible points (unprojected, with ids).
pub fn synthesize_next(
    frame: &FrameState,
    layout: &SceneLayout,
    t_next: usize,
    spec: &SensorSpec,
) -> Result<SynthesizedFrame> {
    if frame.step + 1 != t_next {
        return Err(Error::InvalidValue(format!(
            "synthesize_next expects t_next = step + 1, got step {} and t_next {}",
            frame.step, t_next
        )));
    }
    let warped = warp_step(frame, layout, t_next)?;
    let proj = project_indexed(&warped, spec);
    let cloud = unproject(&proj.image);
    let ids = proj
        .winner
        .iter()
        .filter_map(|w| w.map(|i| warped.id_at(i)))
        .collect();
    let cloud = PointCloud {
        object_id: Some(ids),
        ..cloud
    };
    Ok(SynthesizedFrame {
        frame: FrameState {
            cloud,
            ego_pose: *layout.ego_pose(t_next),
            step: t_next,
        },
        image: proj.image,
    })
}

/// Warps frame 0 directly to step `t` (no per-step chaining, no culling).
pub fn anchor_warp(frame0: &FrameState, layout: &SceneLayout, t: usize) -> Result<PointCloud> {
    if frame0.step != 0 {
        return Err(Error::InvalidValue(format!(
            "anchor_warp requires a step-0 frame, got step {}",
            frame0.step
        )));
    }
    warp_step(frame0, layout, t)
}

/// Projects the union of prior clouds with the z-buffer. On range ties
/// within the z-buffer tolerance the earlier prior in `priors` wins, so
/// callers put the most recent geometry first.
pub fn fuse(priors: &[&PointCloud], spec: &SensorSpec) -> RangeImage {
    let union = PointCloud::concat(priors);
    project_indexed(&union, spec).image
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{LayoutTuple, ObjectLabel, TrajectoryStep};
    use crate::rangeview::project;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    fn frame_at(points: Vec<Vector3<f64>>, ids: Vec<u32>, ego_pose: RigidTransform) -> FrameState {
        let n = points.len();
        FrameState {
            cloud: PointCloud {
                points,
                intensity: vec![0.5; n],
                object_id: Some(ids),
            },
            ego_pose,
            step: 0,
        }
    }

    #[test]
    fn warp_background_identity() {
        let ego = RigidTransform::from_yaw_translation(0.3, Vector3::new(2.0, 1.0, 1.8));
        let frame = frame_at(vec![Vector3::new(5.0, 0.0, 0.0)], vec![0], ego);
        let out = warp_background(&frame, &ego);
        assert_abs_diff_eq!(out.points[0], frame.cloud.points[0], epsilon = 1e-12);
    }

    #[test]
    fn warp_background_forward_step() {
        // ego advances 1 m along its x axis; a static point at (5,0,0)
        // appears at (4,0,0) in the new frame
        let ego = RigidTransform::identity();
        let next = RigidTransform::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let frame = frame_at(vec![Vector3::new(5.0, 0.0, 0.0)], vec![0], ego);
        let out = warp_background(&frame, &next);
        assert_abs_diff_eq!(out.points[0], Vector3::new(4.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn warp_background_yaw_step() {
        // ego turns +90°; a point ahead at (1,0,0) moves to (0,-1,0)
        let frame = frame_at(
            vec![Vector3::new(1.0, 0.0, 0.0)],
            vec![0],
            RigidTransform::identity(),
        );
        let next = RigidTransform::from_yaw(std::f64::consts::FRAC_PI_2);
        let out = warp_background(&frame, &next);
        assert_abs_diff_eq!(out.points[0], Vector3::new(0.0, -1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn warp_background_drops_foreground() {
        let frame = frame_at(
            vec![Vector3::new(1.0, 0.0, 0.0), Vector3::new(2.0, 0.0, 0.0)],
            vec![0, 1],
            RigidTransform::identity(),
        );
        let out = warp_background(&frame, &RigidTransform::identity());
        assert_eq!(out.len(), 1);
    }

    fn bbox(center: Vector3<f64>, yaw: f64) -> BoundingBox3D {
        BoundingBox3D::new(center, Vector3::new(4.0, 2.0, 1.6), yaw).unwrap()
    }

    #[test]
    fn warp_object_cases() {
        let b = bbox(Vector3::new(10.0, 0.0, 0.8), 0.0);
        let cloud = PointCloud::from_points(vec![b.center, b.center + Vector3::new(1.0, 0.0, 0.0)]);

        let same = warp_object(&cloud, &b, &b);
        assert_abs_diff_eq!(same.points[0], cloud.points[0], epsilon = 1e-12);

        let moved = bbox(Vector3::new(12.0, 0.0, 0.8), 0.0);
        let out = warp_object(&cloud, &b, &moved);
        assert_abs_diff_eq!(out.points[0], moved.center, epsilon = 1e-12);

        let turned = bbox(b.center, std::f64::consts::FRAC_PI_2);
        let out = warp_object(&cloud, &b, &turned);
        assert_abs_diff_eq!(
            out.points[1],
            b.center + Vector3::new(0.0, 1.0, 0.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn warp_object_is_rigid() {
        let b = bbox(Vector3::new(5.0, -3.0, 0.8), 0.4);
        let next = bbox(Vector3::new(7.0, -2.0, 0.8), 1.1);
        let cloud = PointCloud::from_points(vec![
            Vector3::new(4.0, -3.0, 0.5),
            Vector3::new(6.0, -2.5, 1.0),
            Vector3::new(5.5, -3.5, 0.2),
        ]);
        let out = warp_object(&cloud, &b, &next);
        for i in 0..cloud.len() {
            for j in 0..cloud.len() {
                let before = (cloud.points[i] - cloud.points[j]).norm();
                let after = (out.points[i] - out.points[j]).norm();
                assert_abs_diff_eq!(before, after, epsilon = 1e-9);
            }
        }
    }

    fn moving_box_layout(horizon: usize) -> SceneLayout {
        let object = LayoutTuple {
            label: ObjectLabel::Car,
            bbox: bbox(Vector3::new(10.0, 0.0, 0.8), 0.0),
            trajectory: vec![
                TrajectoryStep {
                    dx: 2.0,
                    dy: 0.0,
                    dyaw: 0.1,
                };
                horizon
            ],
            shape: vec![],
        };
        let ego = (0..=horizon)
            .map(|t| RigidTransform::from_translation(Vector3::new(0.5 * t as f64, 0.0, 1.8)))
            .collect();
        SceneLayout::new(vec![object], ego, horizon, 0.5).unwrap()
    }

    #[test]
    fn chained_step_warp_equals_anchor_warp() {
        let layout = moving_box_layout(6);
        let frame0 = FrameState {
            cloud: PointCloud {
                points: vec![
                    Vector3::new(9.0, 0.5, -0.5),
                    Vector3::new(11.0, -0.5, 0.2),
                    Vector3::new(-3.0, 4.0, -1.8),
                ],
                intensity: vec![0.5; 3],
                object_id: Some(vec![1, 1, 0]),
            },
            ego_pose: *layout.ego_pose(0),
            step: 0,
        };
        let mut chained = frame0.clone();
        for t in 1..=6 {
            chained = FrameState {
                cloud: warp_step(&chained, &layout, t).unwrap(),
                ego_pose: *layout.ego_pose(t),
                step: t,
            };
        }
        let direct = anchor_warp(&frame0, &layout, 6).unwrap();
        for i in 0..direct.len() {
            assert_abs_diff_eq!(chained.cloud.points[i], direct.points[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn anchor_warp_identity_at_zero() {
        let layout = moving_box_layout(3);
        let frame0 = FrameState {
            cloud: PointCloud::from_points(vec![Vector3::new(3.0, 1.0, -1.0)]),
            ego_pose: *layout.ego_pose(0),
            step: 0,
        };
        let out = anchor_warp(&frame0, &layout, 0).unwrap();
        assert_abs_diff_eq!(out.points[0], frame0.cloud.points[0], epsilon = 1e-15);
    }

    #[test]
    fn fuse_cases() {
        let spec = SensorSpec {
            rows: 2,
            cols: 8,
            elev_max: 10.0f64.to_radians(),
            elev_min: -30.0f64.to_radians(),
            range_min: 0.5,
            range_max: 120.0,
            row_elevations: None,
        };
        let near = PointCloud::from_points(vec![Vector3::new(5.0, 0.0, 0.0)]);
        let far = PointCloud::from_points(vec![Vector3::new(9.0, 0.0, 0.0)]);

        let single = fuse(&[&near], &spec);
        assert_eq!(single, project(&near, &spec));

        // duplicating a prior changes nothing
        let twice = fuse(&[&near, &near], &spec);
        assert_eq!(twice, single);

        // the closer point wins regardless of order
        let a = fuse(&[&near, &far], &spec);
        let b = fuse(&[&far, &near], &spec);
        assert_eq!(a, b);
        assert_eq!(a.finite_count(), 1);
        assert!(a.range.iter().any(|r| (r - 5.0).abs() < 1e-12));
    }

    #[test]
    fn synthesize_static_world_preserves_cloud() {
        // no ego motion, no objects: output equals input up to re-binning
        let spec = SensorSpec::default_32beam();
        let ego = vec![RigidTransform::from_translation(Vector3::new(0.0, 0.0, 1.8)); 3];
        let layout = SceneLayout::new(vec![], ego, 2, 0.5).unwrap();
        // points already on cell rays so re-binning is lossless
        let mut img = crate::rangeview::RangeImage::empty(spec.clone());
        for (row, col, r) in [(5usize, 100usize, 20.0), (20, 700, 7.5)] {
            let idx = img.idx(row, col);
            img.range[idx] = r;
            img.intensity[idx] = 0.5;
        }
        let base = unproject(&img);
        let n = base.len();
        let frame = FrameState {
            cloud: PointCloud {
                object_id: Some(vec![0; n]),
                ..base
            },
            ego_pose: *layout.ego_pose(0),
            step: 0,
        };
        let out = synthesize_next(&frame, &layout, 1, &spec).unwrap();
        assert!(out.image.approx_eq(&img, 1e-9));
        assert_eq!(out.frame.cloud.len(), n);
    }
}
