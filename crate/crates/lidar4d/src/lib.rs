//! Object-centric 4D LiDAR scene tooling.
//!
//! The crate covers the deterministic geometry core of a 4D LiDAR pipeline:
//!
//! - [`geometry`]: SE(3) transforms, yaw-oriented 3D boxes, point clouds.
//! - [`rangeview`]: spherical range-image projection and BEV rasterization.
//! - [`layout`]: scene layouts with per-object boxes, trajectories, shapes,
//!   an ego-centric relation graph, validity checking and editing.
//! - [`warp`]: motion-prior warping of a frame into future frames
//!   (per-step, anchored to frame 0, and fused).
//! - [`sim`]: a procedural world generator and analytic raycaster used as
//!   ground truth throughout the test suite.
//! - [`registration`]: exact k-d tree, Kabsch rigid solve, point-to-point ICP.
//! - [`metrics`]: scene-, object- and temporal-level evaluation metrics
//!   (Fréchet distances over pluggable features, JSD, MMD, Chamfer, CTC, TTCE).
//! - [`io`]: binary cloud files, layout/pose/manifest JSON, range-image dumps.
//! - [`cli`]: the `simulate` / `warp` / `edit` / `eval` command surface.
//!
//! See the crate examples for one runnable program per capability.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod layout;
pub mod metrics;
pub mod rangeview;
pub mod registration;
pub mod sim;
pub mod warp;

pub use error::Error;
pub use geometry::{BoundingBox3D, PointCloud, RigidTransform};
pub use layout::{LayoutTuple, SceneGraph, SceneLayout, ValidityRules};
pub use rangeview::{BevGrid, BevHistogram, RangeImage, SensorSpec};

/// Library version embedded into reports for provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
