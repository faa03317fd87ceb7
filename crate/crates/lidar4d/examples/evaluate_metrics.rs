//! Run the scene / object / temporal metric suite on simulated data.
//!
//!     cargo run --release --example evaluate_metrics

use lidar4d::geometry::PointCloud;
use lidar4d::layout::ValidityRules;
use lidar4d::metrics::{
    crop_and_canonicalize, eval_object, eval_scene_baseline, eval_temporal, EvalConfig,
    SceneSample,
};
use lidar4d::rangeview::SensorSpec;
use lidar4d::registration::IcpParams;
use lidar4d::sim::{make_world, random_layout, simulate_sequence, GeneratorConfig};

fn simulate(seed: u64, spec: &SensorSpec) -> (Vec<lidar4d::sim::SimFrame>, lidar4d::sim::World) {
    let rules = ValidityRules::default();
    let layout = random_layout(seed, &rules, &GeneratorConfig::default());
    let world = make_world(layout, 0.0, &rules).unwrap();
    let frames =
        simulate_sequence(&world, &world.layout.ego_trajectory.clone(), spec, world.layout.horizon)
            .unwrap();
    (frames, world)
}

fn main() {
    let spec = SensorSpec::default_32beam();
    let config = EvalConfig::default();

    // two sets of worlds from disjoint seeds play generated vs reference
    let gen_worlds: Vec<_> = (0..4).map(|s| simulate(s, &spec)).collect();
    let ref_worlds: Vec<_> = (100..104).map(|s| simulate(s, &spec)).collect();

    let samples = |worlds: &[(Vec<lidar4d::sim::SimFrame>, lidar4d::sim::World)]| {
        worlds
            .iter()
            .flat_map(|(frames, _)| {
                frames.iter().map(|f| SceneSample {
                    cloud: f.cloud.clone(),
                    image: f.image.clone(),
                })
            })
            .collect::<Vec<_>>()
    };
    let scene = eval_scene_baseline(&samples(&gen_worlds), &samples(&ref_worlds), &config, &spec)
        .unwrap();
    println!("scene:");
    println!("  frd        {:.6}", scene.frd);
    println!("  fpd        {:.6}", scene.fpd);
    println!("  jsd_bev    {:.6}", scene.jsd_bev);
    println!("  mmd_bev    {:.6e} (sigma {:.3})", scene.mmd_bev.value, scene.mmd_bev.bandwidth);
    println!("  mmd_range  {:.6e}", scene.mmd_range.value);
    println!("  mmd_points {:.6e}", scene.mmd_points.value);

    // objects: crop every simulated box observation into the unit box
    let objects = |worlds: &[(Vec<lidar4d::sim::SimFrame>, lidar4d::sim::World)]| {
        let mut out: Vec<PointCloud> = Vec::new();
        for (frames, world) in worlds {
            for (t, frame) in frames.iter().enumerate() {
                let world_cloud = frame.ego_pose.apply(&frame.cloud);
                for obj in &world.layout.objects {
                    let bbox = obj.box_at_step(t).unwrap();
                    let canonical = crop_and_canonicalize(&world_cloud, &bbox);
                    if canonical.len() >= 10 {
                        out.push(canonical);
                    }
                }
            }
        }
        out
    };
    let object = eval_object(&objects(&gen_worlds), &objects(&ref_worlds), &config).unwrap();
    println!("object:");
    println!("  fpd   {:.6}", object.fpd);
    println!("  p_mmd {:.6}", object.p_mmd);
    println!("  jsd   {:.6}", object.jsd);
    println!("  mmd   {:.6e}", object.mmd.value);

    // temporal metrics on the first generated sequence
    let (frames, world) = &gen_worlds[0];
    let clouds: Vec<PointCloud> = frames.iter().map(|f| f.cloud.clone()).collect();
    let temporal = eval_temporal(
        &clouds,
        &world.layout.ego_trajectory,
        None,
        None,
        &IcpParams::default(),
    )
    .unwrap();
    println!("temporal:");
    for (k, e) in &temporal.ttce {
        println!("  ttce[{k}] {:.4} m / {:.4} deg", e.translation_m, e.rotation_deg);
    }
    for (k, v) in &temporal.ctc {
        println!("  ctc[{k}]  {v:.4} m^2");
    }
}
