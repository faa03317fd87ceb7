//! Command-line surface: simulate, warp, edit, eval.
//!
//! Exit codes are a stable contract: 0 success, 1 runtime or data error,
//! 2 configuration or usage error, 3 layout validity rejection. Human
//! summaries go to stdout, machine formats only to files named by `--out`,
//! log lines to stderr.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::geometry::{PointCloud, RigidTransform};
use crate::io::{
    self, DatasetManifest, FieldLayout, ManifestFrame, PoseJson,
};
use crate::layout::{self, foreground_mask, SceneLayout, TrajectoryStep, ValidityRules, Violation};
use crate::metrics::{
    crop_and_canonicalize, eval_object, eval_scene_baseline, eval_temporal, EvalConfig,
    MetricReport, SceneSample,
};
use crate::rangeview::SensorSpec;
use crate::registration::IcpParams;
use crate::sim::{make_world, random_layout, raycast_frame, GeneratorConfig};
use crate::warp::{anchor_warp, fuse, warp_step, FrameState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lidar4d", version, about = "4D LiDAR scene toolkit")]
pub struct Cli {
    /// Worker threads (default: all cores; env LIDAR4D_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Raycast a layout into a frame sequence on disk.
    Simulate(SimulateArgs),
    /// Warp a recorded sequence into motion-prior frames.
    Warp(WarpArgs),
    /// Apply a layout edit, writing the result only if it stays valid.
    Edit(EditArgs),
    /// Compare a generated dataset against a reference and write a report.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Layout JSON to simulate (mutually exclusive with --seed).
    #[arg(long, conflicts_with = "seed")]
    pub layout: Option<PathBuf>,
    /// Generate a random valid layout from this seed instead.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pose JSON overriding the layout's ego trajectory.
    #[arg(long)]
    pub ego: Option<PathBuf>,
    /// Frames to emit (default: the full horizon).
    #[arg(long)]
    pub frames: Option<usize>,
    /// Sensor spec JSON (default: 32-beam preset).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WarpMode {
    /// Chain frame-to-frame warps from frame 0.
    Step,
    /// Warp frame 0 directly to each target step.
    Anchor,
    /// Fuse every earlier recorded frame into each target step.
    Fused,
}

#[derive(Debug, Args)]
pub struct WarpArgs {
    /// Manifest of the recorded sequence.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Layout JSON (default: the manifest's layout_path).
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: WarpMode,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EditOp {
    Insert,
    Delete,
    Translate,
    Retraject,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    /// Layout JSON to edit.
    #[arg(long)]
    pub layout: PathBuf,
    #[arg(long, value_enum)]
    pub op: EditOp,
    /// Operation parameters as inline JSON.
    #[arg(long)]
    pub args: String,
    /// Output layout path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalLevel {
    Scene,
    Object,
    Temporal,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub level: EvalLevel,
    /// Manifest of the generated dataset.
    #[arg(long)]
    pub gen: PathBuf,
    /// Manifest of the reference dataset.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Evaluation config JSON (default: built-in defaults).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report JSON path; a CSV summary lands next to it.
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    /// Layout validity rejection: the edit result violated the rules.
    Invalid(Vec<Violation>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Invalid(_) => EXIT_INVALID,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
            CliError::Invalid(violations) => {
                writeln!(f, "layout rejected:")?;
                for v in violations {
                    writeln!(f, "  - {v}")?;
                }
                Ok(())
            }
        }
    }
}

fn cfg<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn run_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn log(msg: &str) {
    if std::env::var("LIDAR4D_LOG").as_deref() != Ok("quiet") {
        eprintln!("[lidar4d] {msg}");
    }
}

fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("LIDAR4D_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        // ignore failure: the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Runs a parsed invocation and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    init_threads(cli.threads);
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Warp(args) => cmd_warp(&args),
        Command::Edit(args) => cmd_edit(&args),
        Command::Eval(args) => cmd_eval(&args),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn load_spec(path: Option<&Path>) -> Result<SensorSpec, CliError> {
    match path {
        None => Ok(SensorSpec::default_32beam()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(cfg)?;
            let spec: SensorSpec = serde_json::from_str(&text).map_err(cfg)?;
            spec.validate().map_err(cfg)?;
            Ok(spec)
        }
    }
}

fn frame_file(t: usize) -> String {
    format!("frame_{t:04}.bin")
}

fn write_sequence(
    out: &Path,
    clouds: &[PointCloud],
    poses: &[RigidTransform],
    dt: f64,
    spec: &SensorSpec,
    layout: Option<&SceneLayout>,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(run_err)?;
    let mut frames = Vec::with_capacity(clouds.len());
    for (t, cloud) in clouds.iter().enumerate() {
        let name = frame_file(t);
        io::write_cloud_bin(cloud, &out.join(&name), FieldLayout::default()).map_err(run_err)?;
        frames.push(ManifestFrame {
            cloud_path: PathBuf::from(name),
            pose: PoseJson::from_transform(&poses[t]),
            timestamp: t as f64 * dt,
        });
    }
    let layout_path = if let Some(l) = layout {
        io::write_layout(l, &out.join("layout.json")).map_err(run_err)?;
        Some(PathBuf::from("layout.json"))
    } else {
        None
    };
    let pose_records: Vec<(f64, RigidTransform)> = poses
        .iter()
        .enumerate()
        .map(|(t, p)| (t as f64 * dt, *p))
        .collect();
    io::write_pose_records(&pose_records, &out.join("poses.json")).map_err(run_err)?;
    let manifest = DatasetManifest {
        frames,
        spec: spec.clone(),
        layout_path,
        field_layout: FieldLayout::default(),
    };
    io::write_manifest(&manifest, &out.join("manifest.json")).map_err(run_err)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut layout = match (&args.layout, args.seed) {
        (Some(path), None) => io::read_layout(path).map_err(cfg)?,
        (None, Some(seed)) => {
            log(&format!("generating layout from seed {seed}"));
            random_layout(seed, &ValidityRules::default(), &GeneratorConfig::default())
        }
        _ => {
            return Err(CliError::Config(
                "exactly one of --layout and --seed is required".into(),
            ))
        }
    };
    if let Some(ego_path) = &args.ego {
        let poses = io::read_poses(ego_path).map_err(cfg)?;
        if poses.len() != layout.horizon + 1 {
            return Err(CliError::Config(format!(
                "--ego supplies {} poses but the layout horizon needs {}",
                poses.len(),
                layout.horizon + 1
            )));
        }
        layout =
            SceneLayout::new(layout.objects, poses, layout.horizon, layout.dt).map_err(cfg)?;
    }
    let spec = load_spec(args.spec.as_deref())?;
    let frames = args.frames.unwrap_or(layout.horizon + 1);
    if frames == 0 || frames > layout.horizon + 1 {
        return Err(CliError::Config(format!(
            "--frames must be in 1..={}, got {frames}",
            layout.horizon + 1
        )));
    }

    let dt = layout.dt;
    let world = make_world(layout, 0.0, &ValidityRules::default()).map_err(cfg)?;
    let mut clouds = Vec::with_capacity(frames);
    let mut poses = Vec::with_capacity(frames);
    for t in 0..frames {
        let ego = *world.layout.ego_pose(t);
        let frame = raycast_frame(&world, &ego, &spec, t).map_err(run_err)?;
        clouds.push(frame.cloud);
        poses.push(ego);
    }
    write_sequence(&args.out, &clouds, &poses, dt, &spec, Some(&world.layout))?;
    let points: usize = clouds.iter().map(PointCloud::len).sum();
    println!(
        "simulated {frames} frames ({} objects, {points} points) -> {}",
        world.layout.objects.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_warp(args: &WarpArgs) -> Result<(), CliError> {
    let manifest = io::read_manifest(&args.manifest).map_err(cfg)?;
    if manifest.frames.is_empty() {
        return Err(CliError::Config("manifest has no frames".into()));
    }
    let layout_path = args
        .layout
        .clone()
        .or_else(|| manifest.layout_path.clone())
        .ok_or_else(|| {
            CliError::Config("no layout: pass --layout or set layout_path in the manifest".into())
        })?;
    let layout = io::read_layout(&layout_path).map_err(cfg)?;
    let spec = &manifest.spec;

    // recorded clouds carry no object ids; recover them from the layout
    let load_frame = |idx: usize| -> Result<FrameState, CliError> {
        let f = &manifest.frames[idx];
        let cloud =
            io::read_cloud_bin(&f.cloud_path, manifest.field_layout).map_err(run_err)?;
        let labeled = foreground_mask(&cloud, &layout, idx).map_err(run_err)?;
        Ok(FrameState {
            cloud: labeled,
            ego_pose: f.pose.to_transform(idx).map_err(run_err)?,
            step: idx,
        })
    };

    let frame0 = load_frame(0)?;
    let horizon = layout.horizon;
    let mut clouds = vec![frame0.cloud.clone()];
    let mut poses = vec![frame0.ego_pose];
    match args.mode {
        WarpMode::Step => {
            let mut state = frame0;
            for t in 1..=horizon {
                let cloud = warp_step(&state, &layout, t).map_err(run_err)?;
                state = FrameState {
                    cloud: cloud.clone(),
                    ego_pose: *layout.ego_pose(t),
                    step: t,
                };
                clouds.push(cloud);
                poses.push(state.ego_pose);
            }
        }
        WarpMode::Anchor => {
            for t in 1..=horizon {
                clouds.push(anchor_warp(&frame0, &layout, t).map_err(run_err)?);
                poses.push(*layout.ego_pose(t));
            }
        }
        WarpMode::Fused => {
            let sources: Vec<FrameState> = (0..manifest.frames.len().min(horizon + 1))
                .map(load_frame)
                .collect::<Result<_, _>>()?;
            for t in 1..=horizon {
                // most recent source first so its geometry wins ties
                let warped: Vec<PointCloud> = sources
                    .iter()
                    .filter(|s| s.step < t)
                    .rev()
                    .map(|s| warp_step(s, &layout, t).map_err(run_err))
                    .collect::<Result<_, _>>()?;
                let refs: Vec<&PointCloud> = warped.iter().collect();
                let image = fuse(&refs, spec);
                clouds.push(crate::rangeview::unproject(&image));
                poses.push(*layout.ego_pose(t));
            }
        }
    }
    write_sequence(&args.out, &clouds, &poses, layout.dt, spec, Some(&layout))?;
    println!(
        "warped {} frames ({:?} mode) -> {}",
        clouds.len(),
        args.mode,
        args.out.display()
    );
    Ok(())
}

fn cmd_edit(args: &EditArgs) -> Result<(), CliError> {
    let layout = io::read_layout(&args.layout).map_err(cfg)?;
    let op_args: serde_json::Value = serde_json::from_str(&args.args).map_err(cfg)?;
    let rules = ValidityRules::default();

    let index = || -> Result<usize, CliError> {
        op_args
            .get("index")
            .and_then(|v| v.as_u64())
            .map(|v| v as usize)
            .ok_or_else(|| CliError::Config("--args needs an integer `index`".into()))
    };
    let number = |key: &str, default: Option<f64>| -> Result<f64, CliError> {
        match op_args.get(key) {
            Some(v) => v
                .as_f64()
                .ok_or_else(|| CliError::Config(format!("--args field `{key}` must be a number"))),
            None => default
                .ok_or_else(|| CliError::Config(format!("--args needs a number `{key}`"))),
        }
    };

    let edited = match args.op {
        EditOp::Insert => {
            let tuple = io::layout_tuple_from_value(op_args.clone()).map_err(cfg)?;
            layout::edit_insert(&layout, tuple, &rules)
        }
        EditOp::Delete => layout::edit_delete(&layout, index()?),
        EditOp::Translate => layout::edit_translate(
            &layout,
            index()?,
            number("dx", Some(0.0))?,
            number("dy", Some(0.0))?,
            number("dyaw", Some(0.0))?,
            &rules,
        ),
        EditOp::Retraject => {
            let steps: Vec<[f64; 3]> = op_args
                .get("trajectory")
                .cloned()
                .ok_or_else(|| CliError::Config("--args needs a `trajectory` array".into()))
                .and_then(|v| serde_json::from_value(v).map_err(cfg))?;
            let trajectory = steps
                .into_iter()
                .map(|[dx, dy, dyaw]| TrajectoryStep { dx, dy, dyaw })
                .collect();
            layout::edit_retraject(&layout, index()?, trajectory, &rules)
        }
    };
    let edited = match edited {
        Ok(l) => l,
        Err(Error::InvalidLayout(violations)) => return Err(CliError::Invalid(violations)),
        Err(e) => return Err(run_err(e)),
    };
    io::write_layout(&edited, &args.out).map_err(run_err)?;
    println!(
        "edit {:?} ok: {} objects -> {}",
        args.op,
        edited.objects.len(),
        args.out.display()
    );
    Ok(())
}

fn load_samples(manifest: &DatasetManifest) -> Result<Vec<SceneSample>, CliError> {
    let clouds = io::load_manifest_clouds(manifest).map_err(run_err)?;
    Ok(clouds
        .into_iter()
        .map(|c| SceneSample::from_cloud(c, &manifest.spec))
        .collect())
}

/// Box-cropped, canonicalized object observations across a sequence.
fn collect_objects(
    manifest: &DatasetManifest,
    samples: &[SceneSample],
) -> Result<Vec<PointCloud>, CliError> {
    let layout_path = manifest.layout_path.as_ref().ok_or_else(|| {
        CliError::Config("object-level eval needs manifests with layout_path set".into())
    })?;
    let layout = io::read_layout(layout_path).map_err(cfg)?;
    let mut objects = Vec::new();
    for (t, sample) in samples.iter().enumerate() {
        if t > layout.horizon {
            break;
        }
        // boxes live in world frame; views are ego frame
        let ego = manifest.frames[t].pose.to_transform(t).map_err(run_err)?;
        let world_cloud = ego.apply(&sample.cloud);
        for obj in &layout.objects {
            let bbox = obj.box_at_step(t).map_err(run_err)?;
            let canonical = crop_and_canonicalize(&world_cloud, &bbox);
            if !canonical.is_empty() {
                objects.push(canonical);
            }
        }
    }
    Ok(objects)
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let config: EvalConfig = match &args.config {
        None => EvalConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(cfg)?;
            serde_json::from_str(&text).map_err(cfg)?
        }
    };
    let gen_manifest = io::read_manifest(&args.gen).map_err(cfg)?;
    let ref_manifest = io::read_manifest(&args.reference).map_err(cfg)?;
    if gen_manifest.spec != ref_manifest.spec {
        return Err(CliError::Config(
            "generated and reference manifests use different sensor specs".into(),
        ));
    }
    let spec = gen_manifest.spec.clone();
    let gen_samples = load_samples(&gen_manifest)?;
    let ref_samples = load_samples(&ref_manifest)?;

    let mut report = MetricReport::new(
        &config,
        "baseline-64",
        gen_samples.len(),
        ref_samples.len(),
    );
    for path in [&args.gen, &args.reference] {
        report
            .metadata
            .input_digests
            .push(io::file_digest(path).map_err(run_err)?);
    }

    let want = |level: EvalLevel| args.level == level || args.level == EvalLevel::All;
    if want(EvalLevel::Scene) {
        log("scene-level metrics");
        report.scene =
            Some(eval_scene_baseline(&gen_samples, &ref_samples, &config, &spec).map_err(run_err)?);
    }
    if want(EvalLevel::Object) {
        log("object-level metrics");
        let gen_objects = collect_objects(&gen_manifest, &gen_samples)?;
        let ref_objects = collect_objects(&ref_manifest, &ref_samples)?;
        report.object =
            Some(eval_object(&gen_objects, &ref_objects, &config).map_err(run_err)?);
    }
    if want(EvalLevel::Temporal) {
        log("temporal metrics");
        let frames: Vec<PointCloud> = gen_samples.iter().map(|s| s.cloud.clone()).collect();
        let poses: Vec<RigidTransform> = gen_manifest
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| f.pose.to_transform(i).map_err(run_err))
            .collect::<Result<_, _>>()?;
        let temporal = eval_temporal(
            &frames,
            &poses,
            config.ttce_intervals.as_deref(),
            config.ctc_intervals.as_deref(),
            &IcpParams::default(),
        );
        report.temporal = Some(match temporal {
            Ok(t) => t,
            // too-short sequence for the requested interval is a config problem
            Err(e @ Error::IntervalTooLarge { .. }) => return Err(cfg(e)),
            Err(e) => return Err(run_err(e)),
        });
    }

    io::write_report_json(&report, &args.out).map_err(run_err)?;
    io::write_report_csv(&report, &args.out.with_extension("csv")).map_err(run_err)?;

    if let Some(s) = &report.scene {
        println!("scene: frd={:.6} fpd={:.6} jsd_bev={:.6}", s.frd, s.fpd, s.jsd_bev);
        println!(
            "scene: mmd_bev={:.6e} mmd_range={:.6e} mmd_points={:.6e}",
            s.mmd_bev.value, s.mmd_range.value, s.mmd_points.value
        );
    }
    if let Some(o) = &report.object {
        println!(
            "object: fpd={:.6} p_mmd={:.6} jsd={:.6} mmd={:.6e}",
            o.fpd, o.p_mmd, o.jsd, o.mmd.value
        );
    }
    if let Some(t) = &report.temporal {
        for (k, e) in &t.ttce {
            println!(
                "temporal: ttce[{k}] = {:.4} m / {:.4} deg",
                e.translation_m, e.rotation_deg
            );
        }
        for (k, v) in &t.ctc {
            println!("temporal: ctc[{k}] = {v:.6} m^2");
        }
    }
    println!("report -> {}", args.out.display());
    Ok(())
}
