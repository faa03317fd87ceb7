//! Object-centric 4D scene layouts.
//!
//! A layout holds one tuple per object (box, planar trajectory offsets,
//! canonical shape points), the ego trajectory, and an ego-centric relation
//! graph. Layouts are immutable; edits return new values with the graph
//! re-derived, which keeps graph and geometry consistent by construction.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox3D, PointCloud, RigidTransform};

/// Planar distance under which an object counts as `near` the ego.
pub const NEAR_THRESHOLD_M: f64 = 10.0;

/// Total planar path length above which an agent counts as `moving`.
pub const MOVING_THRESHOLD_M: f64 = 0.5;

/// Semantic object category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectLabel {
    Car,
    Pedestrian,
    Truck,
    Bus,
    Cyclist,
}

impl ObjectLabel {
    pub const ALL: [ObjectLabel; 5] = [
        ObjectLabel::Car,
        ObjectLabel::Pedestrian,
        ObjectLabel::Truck,
        ObjectLabel::Bus,
        ObjectLabel::Cyclist,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectLabel::Car => "car",
            ObjectLabel::Pedestrian => "pedestrian",
            ObjectLabel::Truck => "truck",
            ObjectLabel::Bus => "bus",
            ObjectLabel::Cyclist => "cyclist",
        }
    }
}

/// One planar trajectory step: offsets in the object's evolving local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub dx: f64,
    pub dy: f64,
    pub dyaw: f64,
}

impl TrajectoryStep {
    pub fn zero() -> Self {
        Self {
            dx: 0.0,
            dy: 0.0,
            dyaw: 0.0,
        }
    }

    pub fn planar_norm(&self) -> f64 {
        (self.dx * self.dx + self.dy * self.dy).sqrt()
    }
}

/// Per-object layout entry: box, trajectory, canonical shape points.
///
/// Shape points live in the box's local frame in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutTuple {
    pub label: ObjectLabel,
    pub bbox: BoundingBox3D,
    pub trajectory: Vec<TrajectoryStep>,
    pub shape: Vec<Vector3<f64>>,
}

impl LayoutTuple {
    /// Box advanced to step `t`: offsets 1..=t applied in the evolving yaw
    /// frame (each step moves in the current heading, then turns), dims
    /// unchanged. A constant forward offset with constant turn traces an arc.
    pub fn box_at_step(&self, t: usize) -> Result<BoundingBox3D> {
        if t > self.trajectory.len() {
            return Err(Error::StepOutOfRange {
                step: t,
                horizon: self.trajectory.len(),
            });
        }
        let mut center = Vector2::new(self.bbox.center.x, self.bbox.center.y);
        let mut yaw = self.bbox.yaw;
        for step in &self.trajectory[..t] {
            let (s, c) = yaw.sin_cos();
            center.x += c * step.dx - s * step.dy;
            center.y += s * step.dx + c * step.dy;
            yaw += step.dyaw;
        }
        Ok(BoundingBox3D {
            center: Vector3::new(center.x, center.y, self.bbox.center.z),
            dims: self.bbox.dims,
            yaw,
        })
    }

    /// Sum of per-step planar displacements.
    pub fn path_length(&self) -> f64 {
        self.trajectory.iter().map(|s| s.planar_norm()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionState {
    Static,
    Moving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Front,
    Behind,
    Left,
    Right,
    Near,
    Far,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub name: String,
    pub label: String,
    pub motion: MotionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub relation: Relation,
}

/// Ego-centric relation graph: one ego node plus one node per object,
/// edges carrying spatial relations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl SceneGraph {
    pub fn validate(&self) -> Result<()> {
        let ego_count = self.nodes.iter().filter(|n| n.name == "ego").count();
        if ego_count != 1 {
            return Err(Error::InvalidValue(format!(
                "scene graph must have exactly one ego node, found {ego_count}"
            )));
        }
        for e in &self.edges {
            if e.from == e.to {
                return Err(Error::InvalidValue(format!(
                    "self-edge on node {}",
                    e.from
                )));
            }
            for name in [&e.from, &e.to] {
                if !self.nodes.iter().any(|n| &n.name == name) {
                    return Err(Error::InvalidValue(format!(
                        "edge references unknown node {name}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Name of the graph node for object index `k`.
pub fn object_node_name(k: usize) -> String {
    format!("obj{k}")
}

/// A full 4D scene: objects, ego trajectory, relation graph, horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneLayout {
    pub objects: Vec<LayoutTuple>,
    /// World-frame ego poses, one per step 0..=horizon.
    pub ego_trajectory: Vec<RigidTransform>,
    pub graph: SceneGraph,
    pub horizon: usize,
    pub dt: f64,
}

impl SceneLayout {
    /// Builds a layout and derives its graph from the geometry.
    pub fn new(
        objects: Vec<LayoutTuple>,
        ego_trajectory: Vec<RigidTransform>,
        horizon: usize,
        dt: f64,
    ) -> Result<Self> {
        if ego_trajectory.len() != horizon + 1 {
            return Err(Error::InvalidValue(format!(
                "ego trajectory length {} != horizon + 1 = {}",
                ego_trajectory.len(),
                horizon + 1
            )));
        }
        if dt <= 0.0 {
            return Err(Error::InvalidValue("dt must be positive".into()));
        }
        for (i, o) in objects.iter().enumerate() {
            if o.trajectory.len() != horizon {
                return Err(Error::InvalidValue(format!(
                    "object {i} trajectory length {} != horizon {}",
                    o.trajectory.len(),
                    horizon
                )));
            }
        }
        let mut layout = Self {
            objects,
            ego_trajectory,
            graph: SceneGraph::default(),
            horizon,
            dt,
        };
        layout.graph = derive_graph(&layout);
        Ok(layout)
    }

    pub fn ego_pose(&self, t: usize) -> &RigidTransform {
        &self.ego_trajectory[t]
    }
}

/// Derives the ego-centric relation graph from frame-0 geometry.
///
/// Relations are computed in the frame-0 ego frame: front/behind by the
/// sign of x, left/right by the sign of y, near below
/// [`NEAR_THRESHOLD_M`] planar distance. An agent is `moving` when its
/// planar path exceeds [`MOVING_THRESHOLD_M`].
pub fn derive_graph(layout: &SceneLayout) -> SceneGraph {
    let ego_motion: f64 = layout
        .ego_trajectory
        .windows(2)
        .map(|w| {
            let d = w[1].translation - w[0].translation;
            Vector2::new(d.x, d.y).norm()
        })
        .sum();
    let mut graph = SceneGraph {
        nodes: vec![GraphNode {
            name: "ego".into(),
            label: "ego".into(),
            motion: if ego_motion > MOVING_THRESHOLD_M {
                MotionState::Moving
            } else {
                MotionState::Static
            },
        }],
        edges: Vec::new(),
    };
    let ego_inv = layout.ego_trajectory[0].invert();
    for (k, obj) in layout.objects.iter().enumerate() {
        let name = object_node_name(k);
        graph.nodes.push(GraphNode {
            name: name.clone(),
            label: obj.label.as_str().into(),
            motion: if obj.path_length() > MOVING_THRESHOLD_M {
                MotionState::Moving
            } else {
                MotionState::Static
            },
        });
        let local = ego_inv.apply_point(&obj.bbox.center);
        let mut push = |relation| {
            graph.edges.push(GraphEdge {
                from: name.clone(),
                to: "ego".into(),
                relation,
            })
        };
        push(if local.x >= 0.0 {
            Relation::Front
        } else {
            Relation::Behind
        });
        push(if local.y >= 0.0 {
            Relation::Left
        } else {
            Relation::Right
        });
        push(if Vector2::new(local.x, local.y).norm() <= NEAR_THRESHOLD_M {
            Relation::Near
        } else {
            Relation::Far
        });
    }
    graph
}

/// A single validity or consistency finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OutOfExtent {
        object: usize,
        step: usize,
    },
    Overlap {
        a: usize,
        b: usize,
        iou: f64,
    },
    Speed {
        object: usize,
        step: usize,
        speed: f64,
        max: f64,
    },
    YawRate {
        object: usize,
        step: usize,
        rate: f64,
        max: f64,
    },
    ShapeOutOfBox {
        object: usize,
        point: usize,
    },
    EdgeMismatch {
        from: String,
        to: String,
        claimed: Relation,
        observed: Vec<Relation>,
    },
    UnknownNode {
        name: String,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::OutOfExtent { object, step } => {
                write!(f, "object {object} leaves the scene extent at step {step}")
            }
            Violation::Overlap { a, b, iou } => {
                write!(f, "objects {a} and {b} overlap (horizontal IoU {iou:.3})")
            }
            Violation::Speed {
                object,
                step,
                speed,
                max,
            } => write!(
                f,
                "object {object} step {step}: speed {speed:.2} m/s exceeds {max:.2} m/s"
            ),
            Violation::YawRate {
                object,
                step,
                rate,
                max,
            } => write!(
                f,
                "object {object} step {step}: yaw rate {rate:.2} rad/s exceeds {max:.2} rad/s"
            ),
            Violation::ShapeOutOfBox { object, point } => {
                write!(f, "object {object} shape point {point} outside its box")
            }
            Violation::EdgeMismatch {
                from,
                to,
                claimed,
                observed,
            } => write!(
                f,
                "edge {from}->{to} claims {claimed:?}, geometry gives {observed:?}"
            ),
            Violation::UnknownNode { name } => write!(f, "edge references unknown node {name}"),
        }
    }
}

/// Physical-plausibility gates for layouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityRules {
    /// Scene extent: object centers must stay within ±extent in x and y
    /// at every trajectory step.
    pub extent: f64,
    /// Maximum allowed pairwise horizontal IoU between boxes at step 0.
    pub overlap_max: f64,
    pub speed_max_vehicle: f64,
    pub speed_max_pedestrian: f64,
    pub speed_max_cyclist: f64,
    /// Maximum |Δyaw|/dt in rad/s.
    pub yawrate_max: f64,
    /// Fractional slack on shape points relative to the box half-dims.
    pub shape_tolerance: f64,
}

impl Default for ValidityRules {
    fn default() -> Self {
        Self {
            extent: 60.0,
            overlap_max: 0.05,
            speed_max_vehicle: 25.0,
            speed_max_pedestrian: 3.0,
            speed_max_cyclist: 10.0,
            yawrate_max: 1.6,
            shape_tolerance: 0.05,
        }
    }
}

impl ValidityRules {
    pub fn speed_max(&self, label: ObjectLabel) -> f64 {
        match label {
            ObjectLabel::Car | ObjectLabel::Truck | ObjectLabel::Bus => self.speed_max_vehicle,
            ObjectLabel::Pedestrian => self.speed_max_pedestrian,
            ObjectLabel::Cyclist => self.speed_max_cyclist,
        }
    }
}

/// Per-layout validity findings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks extent, pairwise overlap, speed and yaw-rate caps, and shape
/// point bounds for every object.
pub fn validate_layout(layout: &SceneLayout, rules: &ValidityRules) -> ValidityReport {
    let mut report = ValidityReport::default();
    for (i, obj) in layout.objects.iter().enumerate() {
        for t in 0..=layout.horizon {
            let b = obj.box_at_step(t).expect("step within horizon");
            if b.center.x.abs() > rules.extent || b.center.y.abs() > rules.extent {
                report.violations.push(Violation::OutOfExtent {
                    object: i,
                    step: t,
                });
            }
        }
        let max_speed = rules.speed_max(obj.label);
        for (t, step) in obj.trajectory.iter().enumerate() {
            let speed = step.planar_norm() / layout.dt;
            if speed > max_speed {
                report.violations.push(Violation::Speed {
                    object: i,
                    step: t + 1,
                    speed,
                    max: max_speed,
                });
            }
            let rate = step.dyaw.abs() / layout.dt;
            if rate > rules.yawrate_max {
                report.violations.push(Violation::YawRate {
                    object: i,
                    step: t + 1,
                    rate,
                    max: rules.yawrate_max,
                });
            }
        }
        let half = obj.bbox.dims * (0.5 * (1.0 + rules.shape_tolerance));
        for (p_idx, p) in obj.shape.iter().enumerate() {
            if p.x.abs() > half.x || p.y.abs() > half.y || p.z.abs() > half.z {
                report.violations.push(Violation::ShapeOutOfBox {
                    object: i,
                    point: p_idx,
                });
            }
        }
    }
    for i in 0..layout.objects.len() {
        for j in (i + 1)..layout.objects.len() {
            let iou = horizontal_iou(&layout.objects[i].bbox, &layout.objects[j].bbox);
            if iou > rules.overlap_max {
                report.violations.push(Violation::Overlap { a: i, b: j, iou });
            }
        }
    }
    report
}

/// Checks that every edge claimed by `graph` is among the geometrically
/// derived relations. A sparse graph (fewer edges) is consistent.
pub fn check_graph_consistency(graph: &SceneGraph, layout: &SceneLayout) -> Vec<Violation> {
    let derived = derive_graph(layout);
    let mut violations = Vec::new();
    for edge in &graph.edges {
        for name in [&edge.from, &edge.to] {
            if !derived.nodes.iter().any(|n| &n.name == name) {
                violations.push(Violation::UnknownNode { name: name.clone() });
            }
        }
        if !derived.edges.contains(edge) {
            let observed = derived
                .edges
                .iter()
                .filter(|e| e.from == edge.from && e.to == edge.to)
                .map(|e| e.relation)
                .collect();
            violations.push(Violation::EdgeMismatch {
                from: edge.from.clone(),
                to: edge.to.clone(),
                claimed: edge.relation,
                observed,
            });
        }
    }
    violations
}

fn validated_edit(
    layout: &SceneLayout,
    objects: Vec<LayoutTuple>,
    rules: &ValidityRules,
) -> Result<SceneLayout> {
    let edited = SceneLayout::new(
        objects,
        layout.ego_trajectory.clone(),
        layout.horizon,
        layout.dt,
    )?;
    let report = validate_layout(&edited, rules);
    if !report.is_valid() {
        return Err(Error::InvalidLayout(report.violations));
    }
    Ok(edited)
}

/// Appends an object; the result must pass validation or the edit is
/// rejected with the violations.
pub fn edit_insert(
    layout: &SceneLayout,
    tuple: LayoutTuple,
    rules: &ValidityRules,
) -> Result<SceneLayout> {
    let mut objects = layout.objects.clone();
    objects.push(tuple);
    validated_edit(layout, objects, rules)
}

pub fn edit_delete(layout: &SceneLayout, index: usize) -> Result<SceneLayout> {
    if index >= layout.objects.len() {
        return Err(Error::ObjectIndex {
            index,
            count: layout.objects.len(),
        });
    }
    let mut objects = layout.objects.clone();
    objects.remove(index);
    // removal cannot introduce violations; only the graph is re-derived
    SceneLayout::new(
        objects,
        layout.ego_trajectory.clone(),
        layout.horizon,
        layout.dt,
    )
}

/// Drags an object: shifts its box center by (Δx, Δy) in the world frame
/// and turns it by Δyaw.
pub fn edit_translate(
    layout: &SceneLayout,
    index: usize,
    dx: f64,
    dy: f64,
    dyaw: f64,
    rules: &ValidityRules,
) -> Result<SceneLayout> {
    if index >= layout.objects.len() {
        return Err(Error::ObjectIndex {
            index,
            count: layout.objects.len(),
        });
    }
    let mut objects = layout.objects.clone();
    objects[index].bbox.center.x += dx;
    objects[index].bbox.center.y += dy;
    objects[index].bbox.yaw += dyaw;
    validated_edit(layout, objects, rules)
}

pub fn edit_retraject(
    layout: &SceneLayout,
    index: usize,
    trajectory: Vec<TrajectoryStep>,
    rules: &ValidityRules,
) -> Result<SceneLayout> {
    if index >= layout.objects.len() {
        return Err(Error::ObjectIndex {
            index,
            count: layout.objects.len(),
        });
    }
    let mut objects = layout.objects.clone();
    objects[index].trajectory = trajectory;
    validated_edit(layout, objects, rules)
}

/// Labels each point with the 1-based index of the object whose step-`t`
/// box contains it (smallest box volume wins nested boxes), 0 otherwise.
pub fn foreground_mask(cloud: &PointCloud, layout: &SceneLayout, step: usize) -> Result<PointCloud> {
    if step > layout.horizon {
        return Err(Error::StepOutOfRange {
            step,
            horizon: layout.horizon,
        });
    }
    let boxes: Vec<BoundingBox3D> = layout
        .objects
        .iter()
        .map(|o| o.box_at_step(step).expect("step within horizon"))
        .collect();
    let ids = cloud
        .points
        .iter()
        .map(|p| {
            boxes
                .iter()
                .enumerate()
                .filter(|(_, b)| b.contains(p))
                .min_by(|(_, a), (_, b)| a.volume().total_cmp(&b.volume()))
                .map_or(0, |(k, _)| (k + 1) as u32)
        })
        .collect();
    Ok(PointCloud {
        points: cloud.points.clone(),
        intensity: cloud.intensity.clone(),
        object_id: Some(ids),
    })
}

/// Horizontal (top-down) IoU of two yaw-oriented boxes.
pub fn horizontal_iou(a: &BoundingBox3D, b: &BoundingBox3D) -> f64 {
    let pa = footprint(a);
    let pb = footprint(b);
    let inter = convex_clip_area(&pa, &pb);
    let area_a = a.dims.x * a.dims.y;
    let area_b = b.dims.x * b.dims.y;
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

fn footprint(b: &BoundingBox3D) -> Vec<Vector2<f64>> {
    let (s, c) = b.yaw.sin_cos();
    let hx = b.dims.x / 2.0;
    let hy = b.dims.y / 2.0;
    // counter-clockwise
    [(hx, hy), (-hx, hy), (-hx, -hy), (hx, -hy)]
        .iter()
        .map(|&(x, y)| {
            Vector2::new(
                b.center.x + c * x - s * y,
                b.center.y + s * x + c * y,
            )
        })
        .collect()
}

/// Area of the intersection of two convex CCW polygons
/// (Sutherland–Hodgman clipping + shoelace).
fn convex_clip_area(subject: &[Vector2<f64>], clip: &[Vector2<f64>]) -> f64 {
    let mut poly: Vec<Vector2<f64>> = subject.to_vec();
    for i in 0..clip.len() {
        if poly.is_empty() {
            return 0.0;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let inside = |p: &Vector2<f64>| (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= 0.0;
        let mut next = Vec::with_capacity(poly.len() + 1);
        for j in 0..poly.len() {
            let cur = poly[j];
            let prev = poly[(j + poly.len() - 1) % poly.len()];
            let cur_in = inside(&cur);
            let prev_in = inside(&prev);
            if cur_in {
                if !prev_in {
                    next.push(line_intersect(prev, cur, a, b));
                }
                next.push(cur);
            } else if prev_in {
                next.push(line_intersect(prev, cur, a, b));
            }
        }
        poly = next;
    }
    shoelace(&poly)
}

fn line_intersect(
    p1: Vector2<f64>,
    p2: Vector2<f64>,
    a: Vector2<f64>,
    b: Vector2<f64>,
) -> Vector2<f64> {
    let d1 = p2 - p1;
    let d2 = b - a;
    let denom = d1.x * d2.y - d1.y * d2.x;
    let t = ((a.x - p1.x) * d2.y - (a.y - p1.y) * d2.x) / denom;
    p1 + d1 * t
}

fn shoelace(poly: &[Vector2<f64>]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut area = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        area += p.x * q.y - q.x * p.y;
    }
    area.abs() / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn car(center: Vector3<f64>, yaw: f64, horizon: usize) -> LayoutTuple {
        LayoutTuple {
            label: ObjectLabel::Car,
            bbox: BoundingBox3D::new(center, Vector3::new(4.5, 1.9, 1.6), yaw).unwrap(),
            trajectory: vec![TrajectoryStep::zero(); horizon],
            shape: Vec::new(),
        }
    }

    fn static_ego(horizon: usize) -> Vec<RigidTransform> {
        vec![RigidTransform::identity(); horizon + 1]
    }

    fn simple_layout(objects: Vec<LayoutTuple>, horizon: usize) -> SceneLayout {
        SceneLayout::new(objects, static_ego(horizon), horizon, 0.5).unwrap()
    }

    fn edges_of<'a>(g: &'a SceneGraph, from: &str) -> Vec<Relation> {
        g.edges
            .iter()
            .filter(|e| e.from == from)
            .map(|e| e.relation)
            .collect()
    }

    #[test]
    fn derive_graph_front_near() {
        let layout = simple_layout(vec![car(Vector3::new(10.0, 0.0, 0.8), 0.0, 4)], 4);
        let rels = edges_of(&layout.graph, "obj0");
        assert!(rels.contains(&Relation::Front));
        assert!(rels.contains(&Relation::Near));
    }

    #[test]
    fn derive_graph_behind_left_far() {
        let layout = simple_layout(vec![car(Vector3::new(-20.0, 3.0, 0.8), 0.0, 4)], 4);
        let rels = edges_of(&layout.graph, "obj0");
        assert_eq!(rels, vec![Relation::Behind, Relation::Left, Relation::Far]);
    }

    #[test]
    fn derive_graph_empty_layout() {
        let layout = simple_layout(vec![], 4);
        assert_eq!(layout.graph.nodes.len(), 1);
        assert_eq!(layout.graph.nodes[0].name, "ego");
        assert!(layout.graph.edges.is_empty());
    }

    #[test]
    fn graph_is_ego_frame_invariant() {
        let objects = vec![
            car(Vector3::new(10.0, 2.0, 0.8), 0.3, 4),
            car(Vector3::new(-15.0, -6.0, 0.8), 1.0, 4),
        ];
        let base = simple_layout(objects.clone(), 4);

        let world = RigidTransform::from_yaw_translation(0.9, Vector3::new(100.0, -40.0, 0.0));
        let moved: Vec<LayoutTuple> = objects
            .iter()
            .map(|o| {
                let mut o = o.clone();
                o.bbox.center = world.apply_point(&o.bbox.center);
                o.bbox.yaw += world.yaw();
                o
            })
            .collect();
        let ego: Vec<RigidTransform> = (0..5).map(|_| world).collect();
        let shifted = SceneLayout::new(moved, ego, 4, 0.5).unwrap();
        assert_eq!(base.graph.edges, shifted.graph.edges);
    }

    #[test]
    fn consistency_cases() {
        let layout = simple_layout(vec![car(Vector3::new(10.0, 0.0, 0.8), 0.0, 4)], 4);
        assert!(check_graph_consistency(&layout.graph, &layout).is_empty());

        let empty = SceneGraph {
            nodes: layout.graph.nodes.clone(),
            edges: Vec::new(),
        };
        assert!(check_graph_consistency(&empty, &layout).is_empty());

        let mut wrong = layout.graph.clone();
        wrong.edges[0].relation = Relation::Behind; // object is at x = +10
        let violations = check_graph_consistency(&wrong, &layout);
        assert_eq!(violations.len(), 1);
        assert!(matches!(violations[0], Violation::EdgeMismatch { .. }));
    }

    #[test]
    fn validate_overlap() {
        let layout = simple_layout(
            vec![
                car(Vector3::new(5.0, 0.0, 0.8), 0.0, 2),
                car(Vector3::new(5.0, 0.0, 0.8), 0.0, 2),
            ],
            2,
        );
        let report = validate_layout(&layout, &ValidityRules::default());
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Overlap { iou, .. } if (*iou - 1.0).abs() < 1e-9)));
    }

    #[test]
    fn validate_speed_cap() {
        let mut fast = car(Vector3::new(5.0, 0.0, 0.8), 0.0, 2);
        fast.trajectory[0] = TrajectoryStep {
            dx: 20.0,
            dy: 0.0,
            dyaw: 0.0,
        };
        let layout = simple_layout(vec![fast], 2);
        let report = validate_layout(&layout, &ValidityRules::default());
        assert!(report.violations.iter().any(
            |v| matches!(v, Violation::Speed { speed, max, .. } if *speed == 40.0 && *max == 25.0)
        ));
    }

    #[test]
    fn box_at_step_cases() {
        let mut obj = car(Vector3::new(1.0, 2.0, 0.8), 0.0, 3);
        assert_eq!(obj.box_at_step(0).unwrap(), obj.bbox);

        obj.trajectory = vec![
            TrajectoryStep {
                dx: 1.0,
                dy: 0.0,
                dyaw: 0.0,
            };
            3
        ];
        let b = obj.box_at_step(3).unwrap();
        assert_abs_diff_eq!(b.center, Vector3::new(4.0, 2.0, 0.8), epsilon = 1e-12);

        assert!(obj.box_at_step(4).is_err());
    }

    #[test]
    fn square_path_returns_to_start() {
        let mut obj = car(Vector3::new(3.0, -2.0, 0.8), 0.0, 4);
        obj.trajectory = vec![
            TrajectoryStep {
                dx: 1.0,
                dy: 0.0,
                dyaw: std::f64::consts::FRAC_PI_2,
            };
            4
        ];
        let b = obj.box_at_step(4).unwrap();
        assert_abs_diff_eq!(b.center, obj.bbox.center, epsilon = 1e-12);
        assert_abs_diff_eq!(b.yaw, obj.bbox.yaw + 2.0 * std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn box_at_step_composes() {
        let mut obj = car(Vector3::new(0.0, 0.0, 0.8), 0.2, 6);
        obj.trajectory = (0..6)
            .map(|i| TrajectoryStep {
                dx: 0.5 + 0.1 * i as f64,
                dy: 0.05,
                dyaw: 0.1,
            })
            .collect();
        let direct = obj.box_at_step(6).unwrap();
        // restart from step 2 and apply the remaining offsets
        let mid = obj.box_at_step(2).unwrap();
        let tail = LayoutTuple {
            bbox: mid,
            trajectory: obj.trajectory[2..].to_vec(),
            ..obj.clone()
        };
        let chained = tail.box_at_step(4).unwrap();
        assert_abs_diff_eq!(chained.center, direct.center, epsilon = 1e-12);
        assert_abs_diff_eq!(chained.yaw, direct.yaw, epsilon = 1e-12);
    }

    #[test]
    fn edit_insert_delete_roundtrip() {
        let rules = ValidityRules::default();
        let layout = simple_layout(vec![car(Vector3::new(10.0, 0.0, 0.8), 0.0, 4)], 4);
        let extra = car(Vector3::new(-12.0, 5.0, 0.8), 0.4, 4);
        let inserted = edit_insert(&layout, extra, &rules).unwrap();
        assert_eq!(inserted.objects.len(), 2);
        assert_eq!(inserted.graph.nodes.len(), 3);
        let removed = edit_delete(&inserted, 1).unwrap();
        assert_eq!(removed.objects, layout.objects);
    }

    #[test]
    fn edit_translate_cases() {
        let rules = ValidityRules::default();
        let layout = simple_layout(
            vec![
                car(Vector3::new(10.0, 0.0, 0.8), 0.0, 4),
                car(Vector3::new(-12.0, 5.0, 0.8), 0.0, 4),
            ],
            4,
        );
        let same = edit_translate(&layout, 0, 0.0, 0.0, 0.0, &rules).unwrap();
        assert_eq!(same, layout);

        // dragging box 0 onto box 1 must be rejected with an overlap finding
        let err = edit_translate(&layout, 0, -22.0, 5.0, 0.0, &rules).unwrap_err();
        match err {
            Error::InvalidLayout(violations) => {
                assert!(violations
                    .iter()
                    .any(|v| matches!(v, Violation::Overlap { .. })));
            }
            other => panic!("expected InvalidLayout, got {other:?}"),
        }

        // inverse drags cancel
        let there = edit_translate(&layout, 0, 3.0, -1.0, 0.2, &rules).unwrap();
        let back = edit_translate(&there, 0, -3.0, 1.0, -0.2, &rules).unwrap();
        assert_abs_diff_eq!(
            back.objects[0].bbox.center,
            layout.objects[0].bbox.center,
            epsilon = 1e-12
        );
    }

    #[test]
    fn foreground_mask_cases() {
        let layout = simple_layout(
            vec![
                car(Vector3::new(10.0, 0.0, 0.8), 0.0, 4),
                // nested smaller box inside the first
                LayoutTuple {
                    label: ObjectLabel::Pedestrian,
                    bbox: BoundingBox3D::new(
                        Vector3::new(10.0, 0.0, 0.8),
                        Vector3::new(0.8, 0.8, 1.6),
                        0.0,
                    )
                    .unwrap(),
                    trajectory: vec![TrajectoryStep::zero(); 4],
                    shape: Vec::new(),
                },
            ],
            4,
        );
        let cloud = PointCloud::from_points(vec![
            Vector3::new(10.0, 0.0, 0.8),  // inside both -> smaller wins (id 2)
            Vector3::new(11.5, 0.5, 0.8),  // inside car only -> id 1
            Vector3::new(100.0, 0.0, 0.0), // far away -> background
        ]);
        let masked = foreground_mask(&cloud, &layout, 0).unwrap();
        assert_eq!(masked.object_id.as_ref().unwrap(), &vec![2, 1, 0]);
    }

    #[test]
    fn iou_known_values() {
        let a = BoundingBox3D::new(Vector3::zeros(), Vector3::new(2.0, 2.0, 1.0), 0.0).unwrap();
        let b = BoundingBox3D::new(Vector3::new(1.0, 0.0, 0.0), Vector3::new(2.0, 2.0, 1.0), 0.0)
            .unwrap();
        // overlap 1x2 = 2, union 4 + 4 - 2 = 6
        assert_abs_diff_eq!(horizontal_iou(&a, &b), 2.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(horizontal_iou(&a, &a), 1.0, epsilon = 1e-12);

        let far = BoundingBox3D::new(Vector3::new(50.0, 0.0, 0.0), Vector3::new(2.0, 2.0, 1.0), 0.7)
            .unwrap();
        assert_eq!(horizontal_iou(&a, &far), 0.0);
    }
}
