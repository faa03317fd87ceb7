//! Ego-centric relation graphs derived from layout geometry.
//!
//!     cargo run --example scene_graph

use lidar4d::layout::ValidityRules;
use lidar4d::sim::{random_layout, GeneratorConfig};

fn main() {
    let layout = random_layout(11, &ValidityRules::default(), &GeneratorConfig::default());

    println!("nodes:");
    for node in &layout.graph.nodes {
        println!("  {:6} {:10} {:?}", node.name, node.label, node.motion);
    }

    println!("edges:");
    for edge in &layout.graph.edges {
        println!("  {} -[{:?}]-> {}", edge.from, edge.relation, edge.to);
    }

    // the graph is pure function of the geometry: re-derivation is stable
    let rederived = lidar4d::layout::derive_graph(&layout);
    assert_eq!(rederived, layout.graph);
    println!("\nre-derived graph matches the stored one");
}
