//! Recover the ego motion between two scans with ICP.
//!
//!     cargo run --example register_scans

use lidar4d::geometry::RigidTransform;
use lidar4d::layout::ValidityRules;
use lidar4d::rangeview::SensorSpec;
use lidar4d::registration::{icp, IcpParams};
use lidar4d::sim::{make_world, random_layout, raycast_frame, GeneratorConfig};
use lidar4d::warp::{warp_step, FrameState};
use nalgebra::Vector3;

fn main() {
    let rules = ValidityRules::default();
    let layout = random_layout(13, &rules, &GeneratorConfig::default());
    let spec = SensorSpec::default_32beam();
    let world = make_world(layout, 0.0, &rules).unwrap();

    // scan at step 0, then warp it one step forward so the two clouds
    // correspond point for point
    let ego0 = *world.layout.ego_pose(0);
    let scan0 = raycast_frame(&world, &ego0, &spec, 0).unwrap();
    let frame0 = FrameState {
        cloud: scan0.cloud.clone(),
        ego_pose: ego0,
        step: 0,
    };
    let next = warp_step(&frame0, &world.layout, 1).unwrap();

    let ego1 = *world.layout.ego_pose(1);
    let gt: RigidTransform = ego0.invert().compose(&ego1);
    println!(
        "ground truth: |t| = {:.3} m, yaw = {:.3} deg",
        gt.translation.norm(),
        gt.yaw().to_degrees()
    );

    let result = icp(&next, &scan0.cloud, &IcpParams::default()).unwrap();
    let delta = gt.invert().compose(&result.transform);
    println!(
        "icp: {} iterations, rms {:.2e} m, converged = {}",
        result.iterations, result.rms_residual, result.converged
    );
    println!(
        "error: {:.2e} m translation, {:.2e} deg rotation",
        delta.translation.norm(),
        delta.rotation_angle().to_degrees()
    );

    // residuals shrink monotonically
    println!("\niter   before     after");
    for (i, (before, after)) in result.residual_history.iter().enumerate() {
        println!("{i:4}  {before:9.2e}  {after:9.2e}");
    }

    // and a deliberately wrong initial guess still converges
    let rough = IcpParams {
        initial: RigidTransform::from_yaw_translation(0.02, Vector3::new(0.5, -0.3, 0.0)),
        ..IcpParams::default()
    };
    let recovered = icp(&next, &scan0.cloud, &rough).unwrap();
    let delta = gt.invert().compose(&recovered.transform);
    println!(
        "\nwith a perturbed initial guess: {:.2e} m / {:.2e} deg error",
        delta.translation.norm(),
        delta.rotation_angle().to_degrees()
    );
}
