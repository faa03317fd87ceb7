//! SE(3) transforms, yaw-oriented 3D boxes, and point clouds.
//!
//! All types are immutable after construction and all operations are pure,
//! so values can be shared freely across threads.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Slack used for boundary-inclusive box containment.
pub const CONTAINMENT_EPS: f64 = 1e-9;

/// A rigid transform in SE(3): rotation followed by translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation about +z by `yaw` radians, zero translation.
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        Self {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_yaw_translation(yaw: f64, translation: Vector3<f64>) -> Self {
        Self {
            translation,
            ..Self::from_yaw(yaw)
        }
    }

    /// Builds from a (w, x, y, z) quaternion and a translation.
    ///
    /// The quaternion is renormalized; callers at the I/O boundary are
    /// expected to have checked its norm first.
    pub fn from_quaternion(wxyz: [f64; 4], translation: Vector3<f64>) -> Self {
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            wxyz[0], wxyz[1], wxyz[2], wxyz[3],
        ));
        Self {
            rotation: q.to_rotation_matrix().into_inner(),
            translation,
        }
    }

    /// Returns the rotation as a (w, x, y, z) quaternion with w >= 0.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = UnitQuaternion::from_matrix(&self.rotation);
        let q = if q.w < 0.0 { -q.into_inner() } else { q.into_inner() };
        [q.w, q.i, q.j, q.k]
    }

    /// Frobenius norm of R·Rᵀ − I; zero for a perfectly orthonormal rotation.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation * self.rotation.transpose() - Matrix3::identity()).norm()
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.orthonormality_error() <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
            && self.translation.iter().all(|v| v.is_finite())
    }

    /// `compose(a, b)` applies `b` first, then `a`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn invert(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Maps every position by R·p + t; intensity and object ids are kept.
    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            points: cloud.points.iter().map(|p| self.apply_point(p)).collect(),
            intensity: cloud.intensity.clone(),
            object_id: cloud.object_id.clone(),
        }
    }

    /// Yaw angle of the rotation's heading (atan2 of the first column).
    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    /// Geodesic rotation angle in radians.
    pub fn rotation_angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }
}

/// A yaw-oriented 3D box (no roll or pitch), nuScenes convention.
///
/// `dims` is (length, width, height): extent along the box's local x, y, z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox3D {
    pub center: Vector3<f64>,
    pub dims: Vector3<f64>,
    pub yaw: f64,
}

impl BoundingBox3D {
    pub fn new(center: Vector3<f64>, dims: Vector3<f64>, yaw: f64) -> Result<Self> {
        if !(dims.x > 0.0 && dims.y > 0.0 && dims.z > 0.0) {
            return Err(Error::InvalidValue(format!(
                "box dims must be strictly positive, got {:?}",
                dims
            )));
        }
        Ok(Self { center, dims, yaw })
    }

    /// World-from-box transform (rotation by yaw, translation to center).
    pub fn pose(&self) -> RigidTransform {
        RigidTransform::from_yaw_translation(self.yaw, self.center)
    }

    pub fn volume(&self) -> f64 {
        self.dims.x * self.dims.y * self.dims.z
    }

    /// Expresses `p` in the box's local frame.
    pub fn to_local(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.pose().invert().apply_point(p)
    }

    /// Boundary-inclusive containment with a small slack so corner points
    /// test deterministically.
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        let local = self.to_local(p);
        let half = self.dims / 2.0;
        local.x.abs() <= half.x + CONTAINMENT_EPS
            && local.y.abs() <= half.y + CONTAINMENT_EPS
            && local.z.abs() <= half.z + CONTAINMENT_EPS
    }

    /// The 8 corners in a fixed order: index bit 0 selects +x/−x, bit 1
    /// selects +y/−y, bit 2 selects +z/−z (bit set means the negative side).
    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let half = self.dims / 2.0;
        let pose = self.pose();
        std::array::from_fn(|i| {
            let sx = if i & 1 == 0 { half.x } else { -half.x };
            let sy = if i & 2 == 0 { half.y } else { -half.y };
            let sz = if i & 4 == 0 { half.z } else { -half.z };
            pose.apply_point(&Vector3::new(sx, sy, sz))
        })
    }

    /// Axis-aligned bounds of the oriented box, as (min, max).
    pub fn aabb(&self) -> (Vector3<f64>, Vector3<f64>) {
        let corners = self.corners();
        let mut lo = corners[0];
        let mut hi = corners[0];
        for c in &corners[1..] {
            lo = lo.inf(c);
            hi = hi.sup(c);
        }
        (lo, hi)
    }
}

/// An unordered set of 3D points with intensity and optional object labels.
///
/// `object_id` uses 0 for background; k > 0 refers to layout object k−1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub intensity: Vec<f64>,
    pub object_id: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, intensity: Vec<f64>) -> Result<Self> {
        let cloud = Self {
            points,
            intensity,
            object_id: None,
        };
        cloud.check()?;
        Ok(cloud)
    }

    pub fn with_ids(
        points: Vec<Vector3<f64>>,
        intensity: Vec<f64>,
        object_id: Vec<u32>,
    ) -> Result<Self> {
        if object_id.len() != points.len() {
            return Err(Error::InvalidValue(format!(
                "object_id length {} != point count {}",
                object_id.len(),
                points.len()
            )));
        }
        let cloud = Self {
            points,
            intensity,
            object_id: Some(object_id),
        };
        cloud.check()?;
        Ok(cloud)
    }

    /// Positions only, unit intensity.
    pub fn from_points(points: Vec<Vector3<f64>>) -> Self {
        let n = points.len();
        Self {
            points,
            intensity: vec![1.0; n],
            object_id: None,
        }
    }

    fn check(&self) -> Result<()> {
        if self.intensity.len() != self.points.len() {
            return Err(Error::InvalidValue(format!(
                "intensity length {} != point count {}",
                self.intensity.len(),
                self.points.len()
            )));
        }
        for (i, p) in self.points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::InvalidValue(format!("non-finite point at index {i}")));
            }
        }
        for (i, &v) in self.intensity.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidValue(format!(
                    "intensity {v} out of [0,1] at index {i}"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Id of the point at `i`; 0 (background) when no labels are attached.
    pub fn id_at(&self, i: usize) -> u32 {
        self.object_id.as_ref().map_or(0, |ids| ids[i])
    }

    /// Keeps the points for which `keep` returns true.
    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> PointCloud {
        let mut points = Vec::new();
        let mut intensity = Vec::new();
        let mut ids = self.object_id.as_ref().map(|_| Vec::new());
        for i in 0..self.len() {
            if keep(i) {
                points.push(self.points[i]);
                intensity.push(self.intensity[i]);
                if let Some(out) = ids.as_mut() {
                    out.push(self.id_at(i));
                }
            }
        }
        PointCloud {
            points,
            intensity,
            object_id: ids,
        }
    }

    /// Concatenates clouds; ids are kept when every input carries them.
    pub fn concat(clouds: &[&PointCloud]) -> PointCloud {
        let all_ids = clouds.iter().all(|c| c.object_id.is_some());
        let mut out = PointCloud {
            points: Vec::new(),
            intensity: Vec::new(),
            object_id: all_ids.then(Vec::new),
        };
        for c in clouds {
            out.points.extend_from_slice(&c.points);
            out.intensity.extend_from_slice(&c.intensity);
            if let Some(ids) = out.object_id.as_mut() {
                ids.extend_from_slice(c.object_id.as_ref().unwrap());
            }
        }
        out
    }
}
