//! Extend a single scan into a sequence with motion-prior warping.
//!
//!     cargo run --example warp_sequence

use lidar4d::layout::ValidityRules;
use lidar4d::metrics::chamfer;
use lidar4d::rangeview::SensorSpec;
use lidar4d::sim::{make_world, random_layout, raycast_frame, GeneratorConfig};
use lidar4d::warp::{anchor_warp, warp_step, FrameState};

fn main() {
    let rules = ValidityRules::default();
    let layout = random_layout(5, &rules, &GeneratorConfig::default());
    let spec = SensorSpec::default_32beam();
    let world = make_world(layout, 0.0, &rules).unwrap();

    let ego0 = *world.layout.ego_pose(0);
    let scan0 = raycast_frame(&world, &ego0, &spec, 0).unwrap();
    let frame0 = FrameState {
        cloud: scan0.cloud,
        ego_pose: ego0,
        step: 0,
    };

    println!("step  chain=anchor   warp-vs-sim CD");
    let mut state = frame0.clone();
    for t in 1..=world.layout.horizon {
        // chained one-step warps and the direct 0 -> t warp must agree
        let chained = warp_step(&state, &world.layout, t).unwrap();
        let direct = anchor_warp(&frame0, &world.layout, t).unwrap();
        let max_dev = chained
            .points
            .iter()
            .zip(&direct.points)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);

        // how far the prior drifts from a real scan at t (occlusion changes
        // the sampling, so this is small but not zero)
        let ego_t = *world.layout.ego_pose(t);
        let scan_t = raycast_frame(&world, &ego_t, &spec, t).unwrap();
        let cd = chamfer(&chained, &scan_t.cloud).unwrap();
        println!("{t:4}  {max_dev:12.2e}  {cd:13.4} m^2");

        state = FrameState {
            cloud: chained,
            ego_pose: ego_t,
            step: t,
        };
    }
}
