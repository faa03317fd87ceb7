//! File formats: binary point clouds, layout and pose JSON, range-image
//! dumps, dataset manifests, and metric reports.
//!
//! Everything is little-endian; quaternions are stored (w, x, y, z). JSON
//! writers go through serde_json, whose float formatting is exact under
//! round trip.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox3D, PointCloud, RigidTransform};
use crate::layout::{LayoutTuple, ObjectLabel, SceneGraph, SceneLayout, TrajectoryStep};
use crate::metrics::MetricReport;
use crate::rangeview::{RangeImage, SensorSpec};

/// Version written into (and required from) layout files.
pub const LAYOUT_SCHEMA_VERSION: u32 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------------------
// binary point clouds

/// Record layout of a binary cloud file (float32 fields per point).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldLayout {
    /// x, y, z, intensity, ring (ring ignored on read, zeroed on write).
    #[default]
    XyzIntensityRing,
    /// x, y, z, intensity.
    XyzIntensity,
}

impl FieldLayout {
    pub fn stride_floats(&self) -> usize {
        match self {
            FieldLayout::XyzIntensityRing => 5,
            FieldLayout::XyzIntensity => 4,
        }
    }

    pub fn stride_bytes(&self) -> usize {
        self.stride_floats() * 4
    }
}

/// Reads a little-endian float32 record file. Intensities are rescaled
/// into [0,1] by the file maximum when any value exceeds 1.
pub fn read_cloud_bin(path: &Path, layout: FieldLayout) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let stride = layout.stride_bytes();
    if bytes.len() % stride != 0 {
        return Err(Error::MalformedSize {
            path: path.to_path_buf(),
            size: bytes.len() as u64,
            stride,
        });
    }
    let floats: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let n = floats.len() / layout.stride_floats();
    let mut points = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    for rec in floats.chunks_exact(layout.stride_floats()) {
        points.push(Vector3::new(rec[0] as f64, rec[1] as f64, rec[2] as f64));
        intensity.push(rec[3] as f64);
    }
    let max = intensity.iter().fold(0.0f64, |a, &b| a.max(b));
    if max > 1.0 {
        for v in &mut intensity {
            *v /= max;
        }
    }
    PointCloud::new(points, intensity)
}

/// Inverse of [`read_cloud_bin`] for the same descriptor.
pub fn write_cloud_bin(cloud: &PointCloud, path: &Path, layout: FieldLayout) -> Result<()> {
    let mut bytes = Vec::with_capacity(cloud.len() * layout.stride_bytes());
    for i in 0..cloud.len() {
        let p = cloud.points[i];
        for v in [p.x, p.y, p.z, cloud.intensity[i]] {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        if layout == FieldLayout::XyzIntensityRing {
            bytes.extend_from_slice(&0f32.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(io_err(path))
}

// ---------------------------------------------------------------------------
// JSON plumbing

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        pointer: format!("/{}", e.path().to_string().replace('.', "/")),
        message: e.inner().to_string(),
    })?;
    de.end().map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        pointer: "/".into(),
        message: format!("trailing content: {e}"),
    })?;
    Ok(value)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

// ---------------------------------------------------------------------------
// layouts

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BoxJson {
    center: [f64; 3],
    dims: [f64; 3],
    yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ObjectJson {
    label: ObjectLabel,
    #[serde(rename = "box")]
    bbox: BoxJson,
    trajectory: Vec<[f64; 3]>,
    shape: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EgoStepJson {
    t: f64,
    translation: [f64; 3],
    quaternion: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayoutJson {
    schema_version: u32,
    objects: Vec<ObjectJson>,
    ego_trajectory: Vec<EgoStepJson>,
    graph: SceneGraph,
    horizon: usize,
    dt: f64,
    /// Unknown fields ride along untouched for forward compatibility.
    #[serde(flatten)]
    extra: serde_json::Map<String, serde_json::Value>,
}

/// A layout plus any unknown top-level fields found next to it.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutDocument {
    pub layout: SceneLayout,
    pub extra: serde_json::Map<String, serde_json::Value>,
}

fn transform_from_wxyz(
    translation: [f64; 3],
    q: [f64; 4],
    index: usize,
) -> Result<RigidTransform> {
    let norm = (q.iter().map(|v| v * v).sum::<f64>()).sqrt();
    if !(0.99..=1.01).contains(&norm) {
        return Err(Error::BadQuaternion { norm, index });
    }
    let q = [q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm];
    Ok(RigidTransform::from_quaternion(
        q,
        Vector3::new(translation[0], translation[1], translation[2]),
    ))
}

/// Reads a layout together with unknown extra fields.
pub fn read_layout_document(path: &Path) -> Result<LayoutDocument> {
    let raw: LayoutJson = read_json(path)?;
    if raw.schema_version != LAYOUT_SCHEMA_VERSION {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            pointer: "/schema_version".into(),
            message: format!(
                "unsupported schema_version {} (expected {LAYOUT_SCHEMA_VERSION})",
                raw.schema_version
            ),
        });
    }
    let objects: Vec<LayoutTuple> = raw
        .objects
        .into_iter()
        .map(tuple_from_json)
        .collect::<Result<_>>()?;
    let mut ego = Vec::with_capacity(raw.ego_trajectory.len());
    let mut last_t = f64::NEG_INFINITY;
    for (i, step) in raw.ego_trajectory.iter().enumerate() {
        if step.t <= last_t {
            return Err(Error::NonMonotonicTime { index: i });
        }
        last_t = step.t;
        ego.push(transform_from_wxyz(step.translation, step.quaternion, i)?);
    }
    let layout = SceneLayout::new(objects, ego, raw.horizon, raw.dt)?;
    // the stored graph must agree with the derived one
    let violations = crate::layout::check_graph_consistency(&raw.graph, &layout);
    if !violations.is_empty() {
        return Err(Error::InvalidLayout(violations));
    }
    Ok(LayoutDocument {
        layout,
        extra: raw.extra,
    })
}

pub fn read_layout(path: &Path) -> Result<SceneLayout> {
    Ok(read_layout_document(path)?.layout)
}

/// Parses one object entry in the layout JSON shape
/// (`{label, box{center,dims,yaw}, trajectory, shape}`) from a free-standing
/// value, e.g. command-line arguments.
pub fn layout_tuple_from_value(value: serde_json::Value) -> Result<LayoutTuple> {
    let o: ObjectJson = serde_json::from_value(value).map_err(|e| Error::Schema {
        path: PathBuf::from("<args>"),
        pointer: "/".into(),
        message: e.to_string(),
    })?;
    tuple_from_json(o)
}

fn tuple_from_json(o: ObjectJson) -> Result<LayoutTuple> {
    Ok(LayoutTuple {
        label: o.label,
        bbox: BoundingBox3D::new(
            Vector3::from(o.bbox.center),
            Vector3::from(o.bbox.dims),
            o.bbox.yaw,
        )?,
        trajectory: o
            .trajectory
            .into_iter()
            .map(|[dx, dy, dyaw]| TrajectoryStep { dx, dy, dyaw })
            .collect(),
        shape: o.shape.into_iter().map(Vector3::from).collect(),
    })
}

fn layout_to_json(doc: &LayoutDocument) -> LayoutJson {
    let layout = &doc.layout;
    LayoutJson {
        schema_version: LAYOUT_SCHEMA_VERSION,
        objects: layout
            .objects
            .iter()
            .map(|o| ObjectJson {
                label: o.label,
                bbox: BoxJson {
                    center: o.bbox.center.into(),
                    dims: o.bbox.dims.into(),
                    yaw: o.bbox.yaw,
                },
                trajectory: o.trajectory.iter().map(|s| [s.dx, s.dy, s.dyaw]).collect(),
                shape: o.shape.iter().map(|p| [p.x, p.y, p.z]).collect(),
            })
            .collect(),
        ego_trajectory: layout
            .ego_trajectory
            .iter()
            .enumerate()
            .map(|(i, pose)| EgoStepJson {
                t: i as f64 * layout.dt,
                translation: pose.translation.into(),
                quaternion: pose.quaternion_wxyz(),
            })
            .collect(),
        graph: layout.graph.clone(),
        horizon: layout.horizon,
        dt: layout.dt,
        extra: doc.extra.clone(),
    }
}

pub fn write_layout_document(doc: &LayoutDocument, path: &Path) -> Result<()> {
    write_json(path, &layout_to_json(doc))
}

pub fn write_layout(layout: &SceneLayout, path: &Path) -> Result<()> {
    write_layout_document(
        &LayoutDocument {
            layout: layout.clone(),
            extra: serde_json::Map::new(),
        },
        path,
    )
}

// ---------------------------------------------------------------------------
// pose files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PoseRecordJson {
    t: f64,
    translation: [f64; 3],
    quaternion: [f64; 4],
}

/// Reads `[{t, translation [x,y,z], quaternion [w,x,y,z]}, ...]`.
/// Quaternions with norm in [0.99, 1.01] are renormalized; anything
/// further off is rejected. Timestamps must be strictly increasing.
pub fn read_pose_records(path: &Path) -> Result<Vec<(f64, RigidTransform)>> {
    let records: Vec<PoseRecordJson> = read_json(path)?;
    let mut out = Vec::with_capacity(records.len());
    let mut last_t = f64::NEG_INFINITY;
    for (i, rec) in records.iter().enumerate() {
        if rec.t <= last_t {
            return Err(Error::NonMonotonicTime { index: i });
        }
        last_t = rec.t;
        out.push((rec.t, transform_from_wxyz(rec.translation, rec.quaternion, i)?));
    }
    Ok(out)
}

pub fn read_poses(path: &Path) -> Result<Vec<RigidTransform>> {
    Ok(read_pose_records(path)?.into_iter().map(|(_, p)| p).collect())
}

pub fn write_pose_records(records: &[(f64, RigidTransform)], path: &Path) -> Result<()> {
    let json: Vec<PoseRecordJson> = records
        .iter()
        .map(|(t, pose)| PoseRecordJson {
            t: *t,
            translation: pose.translation.into(),
            quaternion: pose.quaternion_wxyz(),
        })
        .collect();
    write_json(path, &json)
}

// ---------------------------------------------------------------------------
// range-image dumps

/// Writes `rows, cols` as little-endian u32 followed by row-major float32
/// ranges. Cells with no return are stored as 0.
pub fn write_range_image(img: &RangeImage, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + img.range.len() * 4);
    bytes.extend_from_slice(&(img.spec.rows as u32).to_le_bytes());
    bytes.extend_from_slice(&(img.spec.cols as u32).to_le_bytes());
    for &r in &img.range {
        let stored = if r.is_finite() { r as f32 } else { 0.0 };
        bytes.extend_from_slice(&stored.to_le_bytes());
    }
    fs::write(path, bytes).map_err(io_err(path))
}

/// Reads a range dump back under `spec`; zeros become no-return cells.
/// Intensities are not stored in dumps and come back as zeros.
pub fn read_range_image(path: &Path, spec: &SensorSpec) -> Result<RangeImage> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < 8 || (bytes.len() - 8) % 4 != 0 {
        return Err(Error::MalformedSize {
            path: path.to_path_buf(),
            size: bytes.len() as u64,
            stride: 4,
        });
    }
    let rows = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if rows != spec.rows || cols != spec.cols || bytes.len() - 8 != rows * cols * 4 {
        return Err(Error::InvalidValue(format!(
            "range dump {}x{} with {} payload bytes does not match spec {}x{}",
            rows,
            cols,
            bytes.len() - 8,
            spec.rows,
            spec.cols
        )));
    }
    let mut img = RangeImage::empty(spec.clone());
    for (i, chunk) in bytes[8..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        img.range[i] = if v == 0.0 { crate::rangeview::NO_RETURN } else { v };
    }
    Ok(img)
}

// ---------------------------------------------------------------------------
// dataset manifests

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub cloud_path: PathBuf,
    pub pose: PoseJson,
    pub timestamp: f64,
}

/// Pose embedded in manifests: translation plus (w, x, y, z) quaternion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseJson {
    pub translation: [f64; 3],
    pub quaternion: [f64; 4],
}

impl PoseJson {
    pub fn from_transform(pose: &RigidTransform) -> Self {
        Self {
            translation: pose.translation.into(),
            quaternion: pose.quaternion_wxyz(),
        }
    }

    pub fn to_transform(&self, index: usize) -> Result<RigidTransform> {
        transform_from_wxyz(self.translation, self.quaternion, index)
    }
}

/// Index of a frame sequence on disk: per-frame cloud files with poses and
/// timestamps, the sensor spec, and optionally the generating layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub frames: Vec<ManifestFrame>,
    pub spec: SensorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout_path: Option<PathBuf>,
    #[serde(default)]
    pub field_layout: FieldLayout,
}

/// Loads a manifest; relative paths are resolved against the manifest's
/// directory and must exist, and timestamps must be strictly increasing.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let mut manifest: DatasetManifest = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &PathBuf| -> PathBuf {
        if p.is_absolute() {
            p.clone()
        } else {
            base.join(p)
        }
    };
    let mut last_t = f64::NEG_INFINITY;
    for (i, frame) in manifest.frames.iter_mut().enumerate() {
        if frame.timestamp <= last_t {
            return Err(Error::NonMonotonicTime { index: i });
        }
        last_t = frame.timestamp;
        frame.cloud_path = resolve(&frame.cloud_path);
        if !frame.cloud_path.exists() {
            return Err(Error::Io {
                path: frame.cloud_path.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "missing cloud file"),
            });
        }
    }
    if let Some(lp) = &manifest.layout_path {
        let resolved = resolve(lp);
        if !resolved.exists() {
            return Err(Error::Io {
                path: resolved,
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "missing layout file"),
            });
        }
        manifest.layout_path = Some(resolved);
    }
    Ok(manifest)
}

pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    write_json(path, manifest)
}

/// Reads every cloud referenced by a manifest, in order.
pub fn load_manifest_clouds(manifest: &DatasetManifest) -> Result<Vec<PointCloud>> {
    manifest
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            read_cloud_bin(&f.cloud_path, manifest.field_layout).map_err(|e| Error::DatasetItem {
                index: i,
                source: Box::new(e),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// reports

pub fn write_report_json(report: &MetricReport, path: &Path) -> Result<()> {
    write_json(path, report)
}

/// Flat `metric,value` CSV summary of a report.
pub fn write_report_csv(report: &MetricReport, path: &Path) -> Result<()> {
    let mut rows: Vec<(String, f64)> = Vec::new();
    if let Some(s) = &report.scene {
        rows.push(("scene.frd".into(), s.frd));
        rows.push(("scene.fpd".into(), s.fpd));
        rows.push(("scene.jsd_bev".into(), s.jsd_bev));
        rows.push(("scene.mmd_bev".into(), s.mmd_bev.value));
        rows.push(("scene.mmd_range".into(), s.mmd_range.value));
        rows.push(("scene.mmd_points".into(), s.mmd_points.value));
    }
    if let Some(o) = &report.object {
        rows.push(("object.fpd".into(), o.fpd));
        rows.push(("object.p_mmd".into(), o.p_mmd));
        rows.push(("object.jsd".into(), o.jsd));
        rows.push(("object.mmd".into(), o.mmd.value));
    }
    if let Some(t) = &report.temporal {
        for (k, e) in &t.ttce {
            rows.push((format!("temporal.ttce{k}.translation_m"), e.translation_m));
            rows.push((format!("temporal.ttce{k}.rotation_deg"), e.rotation_deg));
        }
        for (k, v) in &t.ctc {
            rows.push((format!("temporal.ctc{k}"), *v));
        }
    }
    let mut text = String::from("metric,value\n");
    for (name, value) in rows {
        text.push_str(&format!("{name},{value}\n"));
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Hex SHA-256 of a file, for report provenance.
pub fn file_digest(path: &Path) -> Result<String> {
    use sha2::Digest;
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(sha2::Sha256::digest(&bytes)))
}
