//! Validated layout edits: insert, drag, delete.
//!
//!     cargo run --example edit_layout

use lidar4d::error::Error;
use lidar4d::layout::{edit_delete, edit_insert, edit_translate, ValidityRules};
use lidar4d::sim::{random_layout, GeneratorConfig};

fn main() {
    let rules = ValidityRules::default();
    let layout = random_layout(7, &rules, &GeneratorConfig::default());
    println!("start: {} objects", layout.objects.len());

    // drag object 0 a little; the graph is re-derived automatically
    let dragged = edit_translate(&layout, 0, 1.0, -0.5, 0.1, &rules).unwrap();
    println!(
        "dragged obj0 to ({:.1}, {:.1})",
        dragged.objects[0].bbox.center.x, dragged.objects[0].bbox.center.y
    );

    // inserting a copy of object 0 on top of itself must be rejected
    let clone = layout.objects[0].clone();
    match edit_insert(&layout, clone, &rules) {
        Err(Error::InvalidLayout(violations)) => {
            println!("overlapping insert rejected:");
            for v in &violations {
                println!("  - {v}");
            }
        }
        other => panic!("expected a rejection, got {other:?}"),
    }

    // insert far away instead, then delete it again
    let mut far = layout.objects[0].clone();
    far.bbox.center.x = -40.0;
    far.bbox.center.y = -40.0;
    let bigger = edit_insert(&layout, far, &rules).unwrap();
    let restored = edit_delete(&bigger, bigger.objects.len() - 1).unwrap();
    assert_eq!(restored, layout);
    println!("insert + delete restored the original layout");
}
