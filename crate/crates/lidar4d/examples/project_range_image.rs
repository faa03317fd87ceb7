//! Range-view projection round trip and BEV rasterization.
//!
//!     cargo run --example project_range_image

use lidar4d::layout::ValidityRules;
use lidar4d::rangeview::{bev_histogram, project, unproject, BevGrid, SensorSpec};
use lidar4d::sim::{make_world, random_layout, raycast_frame, GeneratorConfig};

fn main() {
    let rules = ValidityRules::default();
    let layout = random_layout(3, &rules, &GeneratorConfig::default());
    let spec = SensorSpec::default_32beam();
    let world = make_world(layout, 0.0, &rules).unwrap();
    let ego = *world.layout.ego_pose(0);
    let frame = raycast_frame(&world, &ego, &spec, 0).unwrap();

    println!(
        "image {}x{}, {} returns",
        spec.rows,
        spec.cols,
        frame.image.finite_count()
    );

    // cloud -> image -> cloud -> image is a fixed point
    let cloud = unproject(&frame.image);
    let image2 = project(&cloud, &spec);
    let max_dev = frame
        .image
        .range
        .iter()
        .zip(&image2.range)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("round-trip range deviation: {max_dev:.2e} m");

    // a coarse ASCII BEV of the same frame
    let grid = BevGrid {
        bins_x: 40,
        bins_y: 40,
        ..BevGrid::default()
    };
    let hist = bev_histogram(&cloud, &grid);
    println!("\nBEV occupancy ({} points binned):", hist.total());
    for by in (0..grid.bins_y).rev() {
        let row: String = (0..grid.bins_x)
            .map(|bx| match hist.count_at(bx, by) {
                0 => ' ',
                1..=9 => '.',
                10..=99 => 'o',
                _ => '#',
            })
            .collect();
        println!("|{row}|");
    }
}
