//! Rigid point-cloud registration: exact k-d tree nearest neighbors,
//! closed-form Kabsch solve, and point-to-point ICP.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RigidTransform};

/// Exact 3D nearest-neighbor index. Queries return the same answers as a
/// brute-force scan.
pub struct KdTree {
    points: Vec<Vector3<f64>>,
    nodes: Vec<Node>,
    root: usize,
}

struct Node {
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

const NO_NODE: usize = usize::MAX;

impl KdTree {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud {
                context: "k-d tree target",
            });
        }
        let points = cloud.points.clone();
        let mut indices: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_node(&points, &mut indices, 0, &mut nodes);
        Ok(Self {
            points,
            nodes,
            root,
        })
    }

    fn build_node(
        points: &[Vector3<f64>],
        indices: &mut [usize],
        depth: usize,
        nodes: &mut Vec<Node>,
    ) -> usize {
        if indices.is_empty() {
            return NO_NODE;
        }
        let axis = depth % 3;
        let mid = indices.len() / 2;
        indices.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let point = indices[mid];
        let slot = nodes.len();
        nodes.push(Node {
            point,
            axis,
            left: None,
            right: None,
        });
        let (lo, rest) = indices.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = Self::build_node(points, lo, depth + 1, nodes);
        let right = Self::build_node(points, hi, depth + 1, nodes);
        nodes[slot].left = (left != NO_NODE).then_some(left);
        nodes[slot].right = (right != NO_NODE).then_some(right);
        slot
    }

    /// Index and distance of the nearest point to `query`.
    pub fn nearest(&self, query: &Vector3<f64>) -> (usize, f64) {
        let mut best = (self.nodes[self.root].point, f64::INFINITY);
        self.search(self.root, query, &mut best);
        (best.0, best.1.sqrt())
    }

    /// Squared distance to the nearest point (skips the final sqrt).
    pub fn nearest_sq(&self, query: &Vector3<f64>) -> f64 {
        let mut best = (self.nodes[self.root].point, f64::INFINITY);
        self.search(self.root, query, &mut best);
        best.1
    }

    fn search(&self, node: usize, query: &Vector3<f64>, best: &mut (usize, f64)) {
        let n = &self.nodes[node];
        let p = &self.points[n.point];
        let d2 = (p - query).norm_squared();
        // ties resolve to the lowest index, matching a brute-force scan
        if d2 < best.1 || (d2 == best.1 && n.point < best.0) {
            *best = (n.point, d2);
        }
        let delta = query[n.axis] - p[n.axis];
        let (first, second) = if delta <= 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if let Some(child) = first {
            self.search(child, query, best);
        }
        if let Some(child) = second {
            if delta * delta <= best.1 {
                self.search(child, query, best);
            }
        }
    }
}

/// Builds the spatial index for a registration target.
pub fn nearest_neighbor_index(target: &PointCloud) -> Result<KdTree> {
    KdTree::build(target)
}

/// Least-squares rigid transform mapping `src` onto `dst` (paired points),
/// solved by SVD of the cross-covariance with determinant correction.
pub fn kabsch(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::DimensionMismatch {
            left: src.len(),
            right: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(Error::InsufficientSamples {
            required: 3,
            actual: src.len(),
        });
    }
    let n = src.len() as f64;
    let c_src: Vector3<f64> = src.iter().sum::<Vector3<f64>>() / n;
    let c_dst: Vector3<f64> = dst.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - c_src) * (d - c_dst).transpose();
    }
    let svd = h.svd(true, true);
    let sv = svd.singular_values;
    // collinear (or coincident) sources leave a rotation axis unconstrained
    if sv[1] <= 1e-12 * sv[0].max(1e-300) {
        return Err(Error::Degenerate {
            context: "kabsch: source points are collinear",
        });
    }
    let u = svd.u.expect("svd with u");
    let vt = svd.v_t.expect("svd with v_t");
    let d = (vt.transpose() * u.transpose()).determinant();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d.signum()));
    let rotation = vt.transpose() * correction * u.transpose();
    let translation = c_dst - rotation * c_src;
    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// ICP configuration.
#[derive(Debug, Clone)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Convergence threshold on the change in mean residual (meters).
    pub convergence_eps: f64,
    /// Correspondence gate (meters).
    pub max_correspondence_dist: f64,
    pub initial: RigidTransform,
    /// Optional voxel-grid downsampling applied to both clouds before
    /// registration.
    pub voxel_size: Option<f64>,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            convergence_eps: 1e-6,
            max_correspondence_dist: 2.0,
            initial: RigidTransform::identity(),
            voxel_size: None,
        }
    }
}

/// Registration output. `transform` maps the source into the target frame.
#[derive(Debug, Clone)]
pub struct RegistrationResult {
    pub transform: RigidTransform,
    pub rms_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// RMS correspondence residual (before, after) of each rigid update, on
    /// the same correspondence set. `after <= before` always holds because
    /// the update is the least-squares optimum for that set.
    pub residual_history: Vec<(f64, f64)>,
}

/// Voxel-grid downsampling: one centroid per occupied voxel, deterministic
/// output order.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64) -> PointCloud {
    let mut cells: std::collections::BTreeMap<(i64, i64, i64), (Vector3<f64>, f64, usize)> =
        std::collections::BTreeMap::new();
    for i in 0..cloud.len() {
        let p = cloud.points[i];
        let key = (
            (p.x / voxel_size).floor() as i64,
            (p.y / voxel_size).floor() as i64,
            (p.z / voxel_size).floor() as i64,
        );
        let entry = cells.entry(key).or_insert((Vector3::zeros(), 0.0, 0));
        entry.0 += p;
        entry.1 += cloud.intensity[i];
        entry.2 += 1;
    }
    let mut points = Vec::with_capacity(cells.len());
    let mut intensity = Vec::with_capacity(cells.len());
    for (sum, int_sum, count) in cells.into_values() {
        points.push(sum / count as f64);
        intensity.push(int_sum / count as f64);
    }
    PointCloud {
        points,
        intensity,
        object_id: None,
    }
}

/// Point-to-point ICP: alternate gated nearest-neighbor correspondence and
/// the Kabsch solve until the mean residual stops changing.
pub fn icp(source: &PointCloud, target: &PointCloud, params: &IcpParams) -> Result<RegistrationResult> {
    if source.is_empty() {
        return Err(Error::EmptyCloud {
            context: "icp source",
        });
    }
    if target.is_empty() {
        return Err(Error::EmptyCloud {
            context: "icp target",
        });
    }
    let (source_pts, target_cloud);
    let (src, tgt): (&PointCloud, &PointCloud) = match params.voxel_size {
        Some(size) => {
            source_pts = voxel_downsample(source, size);
            target_cloud = voxel_downsample(target, size);
            (&source_pts, &target_cloud)
        }
        None => (source, target),
    };

    let index = KdTree::build(tgt)?;
    let mut transform = params.initial;
    let mut moved: Vec<Vector3<f64>> = src.points.iter().map(|p| transform.apply_point(p)).collect();
    let mut history = Vec::new();
    let mut prev_mean = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut rms = f64::NAN;

    for _ in 0..params.max_iterations {
        iterations += 1;
        let mut pairs_src = Vec::new();
        let mut pairs_dst = Vec::new();
        let mut before_sum = 0.0;
        let mut before_sq = 0.0;
        for p in &moved {
            let (j, dist) = index.nearest(p);
            if dist <= params.max_correspondence_dist {
                pairs_src.push(*p);
                pairs_dst.push(tgt.points[j]);
                before_sum += dist;
                before_sq += dist * dist;
            }
        }
        if pairs_src.is_empty() {
            return Err(Error::NoCorrespondences {
                max_dist: params.max_correspondence_dist,
            });
        }
        let n_pairs = pairs_src.len() as f64;
        let before_mean = before_sum / n_pairs;
        let before_rms = (before_sq / n_pairs).sqrt();
        let update = kabsch(&pairs_src, &pairs_dst)?;

        let mut after_sum = 0.0;
        let mut after_sq = 0.0;
        for (s, d) in pairs_src.iter().zip(&pairs_dst) {
            let r = (update.apply_point(s) - d).norm();
            after_sum += r;
            after_sq += r * r;
        }
        let after_mean = after_sum / n_pairs;
        rms = (after_sq / n_pairs).sqrt();
        history.push((before_rms, rms));

        transform = update.compose(&transform);
        for p in &mut moved {
            *p = update.apply_point(p);
        }
        // converged when neither the rigid update nor the re-matching is
        // still changing the mean residual
        if (before_mean - after_mean).abs() < params.convergence_eps
            || (prev_mean - after_mean).abs() < params.convergence_eps
        {
            converged = true;
            break;
        }
        prev_mean = after_mean;
    }

    Ok(RegistrationResult {
        transform,
        rms_residual: rms,
        iterations,
        converged,
        residual_history: history,
    })
}
