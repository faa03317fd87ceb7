//! Generate a random street scene and raycast it into a LiDAR sequence.
//!
//!     cargo run --example simulate_world [seed]

use lidar4d::layout::ValidityRules;
use lidar4d::rangeview::SensorSpec;
use lidar4d::sim::{make_world, random_layout, simulate_sequence, GeneratorConfig};

fn main() {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(42u64);

    let rules = ValidityRules::default();
    let layout = random_layout(seed, &rules, &GeneratorConfig::default());
    println!("seed {seed}: {} objects, horizon {}", layout.objects.len(), layout.horizon);
    for (i, obj) in layout.objects.iter().enumerate() {
        println!(
            "  obj{i}: {:10} at ({:6.1}, {:6.1}), path {:5.1} m",
            obj.label.as_str(),
            obj.bbox.center.x,
            obj.bbox.center.y,
            obj.path_length()
        );
    }

    let spec = SensorSpec::default_32beam();
    let world = make_world(layout, 0.0, &rules).expect("generated layouts are valid");
    let frames = simulate_sequence(&world, &world.layout.ego_trajectory.clone(), &spec, world.layout.horizon)
        .expect("simulation");

    println!("\nframe  returns  fill");
    for (t, frame) in frames.iter().enumerate() {
        let fill = frame.image.finite_count() as f64 / (spec.rows * spec.cols) as f64;
        println!("{t:5}  {:7}  {:4.1}%", frame.cloud.len(), 100.0 * fill);
    }

    // foreground share from the simulator's own labels
    let fg = frames[0]
        .cloud
        .object_id
        .as_ref()
        .map(|ids| ids.iter().filter(|&&id| id > 0).count())
        .unwrap_or(0);
    println!("\nframe 0 foreground points: {fg} of {}", frames[0].cloud.len());
}
