//! Batch command-line driver: grid generation, soft labels, evaluation,
//! depth rendering, and correlation benchmarks.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use posekit::bopio::{self, ResultRow};
use posekit::correlation::{corr_volume, corr_volume_reference, FeatureVolume};
use posekit::metrics::{self, EvalRecord, RecallReport};
use posekit::render::rasterize;
use posekit::symlabels::{self, Mesh, SymmetrySet};
use posekit::{
    hard_label, object_diameter, rotation_soft_labels, so3_prototypes, CameraIntrinsics, Pose,
    Rotation,
};

#[derive(Parser)]
#[command(
    name = "posekit",
    about = "Deterministic 6-DoF pose toolkit: rotation grids, soft labels, BOP evaluation, depth rendering, correlation benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the uniform SO(3) rotation grid as text
    Gridgen(GridgenArgs),
    /// Emit rotation soft labels for every ground-truth instance
    Labels(LabelsArgs),
    /// Score a results file against ground truth and report recalls
    Eval(EvalArgs),
    /// Rasterize a mesh under a pose into a 16-bit depth PNG
    Render(RenderArgs),
    /// Benchmark the correlation kernel implementations
    Corrbench(CorrbenchArgs),
}

#[derive(Args)]
struct GridgenArgs {
    /// HEALPix resolution parameter (grid has 12*n^2*floor(sqrt(12*pi*n^2)) buckets)
    #[arg(long = "n-side")]
    n_side: u32,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LabelsArgs {
    /// scene_gt.json with annotated poses
    #[arg(long)]
    gt: PathBuf,
    /// Object mesh (PLY or OBJ, millimeters)
    #[arg(long)]
    mesh: PathBuf,
    /// Symmetry spec JSON
    #[arg(long)]
    symm: PathBuf,
    /// Rotation grid resolution
    #[arg(long = "n-side")]
    n_side: u32,
    /// Label bandwidth as a fraction of the object diameter
    #[arg(long = "sigma-frac", default_value_t = symlabels::DEFAULT_SIGMA_FRACTION)]
    sigma_frac: f64,
    /// Output JSON file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Results CSV (scene_id,im_id,obj_id,score,R,t,time)
    #[arg(long)]
    results: PathBuf,
    /// scene_gt.json
    #[arg(long)]
    gt: PathBuf,
    /// scene_camera.json
    #[arg(long)]
    camera: PathBuf,
    /// Directory with obj_XXXXXX.ply meshes and optional models_info.json
    #[arg(long)]
    models: PathBuf,
    /// Comma-separated metric list: vsd,mssd,mspd,add,adds,auc
    #[arg(long, default_value = "vsd,mssd,mspd")]
    metrics: String,
    /// Output prefix; writes <prefix>.json and <prefix>.csv
    #[arg(long, default_value = "report")]
    out: PathBuf,
    /// Worker threads (defaults to POSEKIT_JOBS, then logical cores)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct RenderArgs {
    /// Object mesh (PLY or OBJ, millimeters)
    #[arg(long)]
    mesh: PathBuf,
    /// Pose as "qw qx qy qz tx ty tz" (translation in millimeters)
    #[arg(long)]
    pose: String,
    /// Intrinsics as "fx fy cx cy" in pixels
    #[arg(long)]
    cam: String,
    /// Output size as WxH
    #[arg(long)]
    size: String,
    /// Output PNG path (16-bit grayscale, 0.1 mm per unit)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorrbenchArgs {
    /// Volume shape as dxHxW, e.g. 64x64x64
    #[arg(long)]
    shape: String,
    /// Odd correlation window
    #[arg(long)]
    window: usize,
    /// Implementation: naive, optimized, or all
    #[arg(long = "impl", default_value = "all")]
    implementation: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help / --version are successes, everything else is usage
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gridgen(args) => run_gridgen(args),
        Command::Labels(args) => run_labels(args),
        Command::Eval(args) => run_eval(args),
        Command::Render(args) => run_render(args),
        Command::Corrbench(args) => run_corrbench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Usage(String),
    Data(String),
}

impl From<posekit::Error> for CliError {
    fn from(e: posekit::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn run_gridgen(args: GridgenArgs) -> Result<(), CliError> {
    if args.n_side < 1 {
        return Err(CliError::Usage("--n-side must be at least 1".into()));
    }
    let grid = so3_prototypes(args.n_side)?;
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path)?;
            grid.write_text(std::io::BufWriter::new(file))?;
        }
        None => {
            let stdout = std::io::stdout();
            grid.write_text(stdout.lock())?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct LabelFile {
    n_side: u32,
    k: usize,
    sigma_frac: f64,
    sigma_mm: f64,
    diameter_mm: f64,
    instances: Vec<LabelInstance>,
}

#[derive(Serialize)]
struct LabelInstance {
    im_id: u32,
    obj_id: u32,
    hard_label: usize,
    values: Vec<f64>,
}

fn run_labels(args: LabelsArgs) -> Result<(), CliError> {
    if args.sigma_frac.is_nan() || args.sigma_frac <= 0.0 {
        return Err(CliError::Usage(format!(
            "--sigma-frac must be > 0, got {}",
            args.sigma_frac
        )));
    }
    if args.n_side < 1 {
        return Err(CliError::Usage("--n-side must be at least 1".into()));
    }
    let grid = so3_prototypes(args.n_side)?;
    let mesh = bopio::load_mesh(&args.mesh)?;
    let sym = bopio::load_symmetries(&args.symm, bopio::DEFAULT_SYMMETRY_STEPS)?;
    let poses = bopio::read_scene_gt_poses(&args.gt)?;
    let diameter = object_diameter(&mesh)?;
    let sigma = args.sigma_frac * diameter;
    let mut instances = Vec::with_capacity(poses.len());
    for (im_id, obj_id, pose) in poses {
        let labels = rotation_soft_labels(&pose, &grid, &mesh, &sym, sigma)?;
        instances.push(LabelInstance {
            im_id,
            obj_id,
            hard_label: hard_label(labels.values())?,
            values: labels.values().to_vec(),
        });
    }
    let out = LabelFile {
        n_side: args.n_side,
        k: grid.len(),
        sigma_frac: args.sigma_frac,
        sigma_mm: sigma,
        diameter_mm: diameter,
        instances,
    };
    let json = serde_json::to_string_pretty(&out).expect("label file serializes");
    fs::write(&args.out, json)?;
    Ok(())
}

#[derive(Serialize)]
struct ClassicMetrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    add_mean_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adds_mean_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    auc_add: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    auc_adds: Option<f64>,
}

#[derive(Serialize)]
struct EvalReport {
    #[serde(flatten)]
    recall: RecallReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    classic: Option<ClassicMetrics>,
}

/// The AUC integration limit: 0.1 m, following the YCB-V convention.
const AUC_MAX_MM: f64 = 100.0;

fn run_eval(args: EvalArgs) -> Result<(), CliError> {
    let known = ["vsd", "mssd", "mspd", "add", "adds", "auc"];
    let selected: Vec<&str> = args.metrics.split(',').map(str::trim).collect();
    for m in &selected {
        if !known.contains(m) {
            return Err(CliError::Usage(format!(
                "unknown metric {m:?}; expected a comma-separated subset of {known:?}"
            )));
        }
    }
    let jobs = args
        .jobs
        .or_else(|| {
            std::env::var("POSEKIT_JOBS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0); // 0 lets rayon pick the core count
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .ok(); // a second configuration attempt in-process is harmless

    let rows = bopio::read_results(&args.results)?;
    if rows.is_empty() {
        return Err(CliError::Data("results file has no rows".into()));
    }
    let gt = bopio::read_scene_gt(&args.gt, &args.camera)?;
    let records = assemble_records(&rows, &gt, &args.models)?;

    let recall = metrics::average_recall(&records)?;
    let classic = classic_metrics(&records, &selected);
    let report = EvalReport { recall, classic };

    let json_path = args.out.with_extension("json");
    let csv_path = args.out.with_extension("csv");
    fs::write(
        &json_path,
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    let mut csv = report.recall.to_csv();
    if let Some(classic) = &report.classic {
        for (key, value) in [
            ("add_mean_mm", classic.add_mean_mm),
            ("adds_mean_mm", classic.adds_mean_mm),
            ("auc_add", classic.auc_add),
            ("auc_adds", classic.auc_adds),
        ] {
            if let Some(v) = value {
                csv.push_str(&format!("classic,{key},{v}\n"));
            }
        }
    }
    fs::write(&csv_path, csv)?;
    println!(
        "AR {:.4} (VSD {:.4}, MSSD {:.4}, MSPD {:.4}) over {} records -> {}, {}",
        report.recall.ar,
        report.recall.ar_vsd,
        report.recall.ar_mssd,
        report.recall.ar_mspd,
        records.len(),
        json_path.display(),
        csv_path.display()
    );
    Ok(())
}

/// Match result rows to ground-truth instances by (im_id, obj_id) in file
/// order and attach meshes and symmetries from the models directory.
fn assemble_records(
    rows: &[ResultRow],
    gt: &[bopio::GtInstance],
    models_dir: &Path,
) -> Result<Vec<EvalRecord>, CliError> {
    let mut meshes: BTreeMap<u32, Arc<Mesh>> = BTreeMap::new();
    let info_path = models_dir.join("models_info.json");
    let mut symmetries: BTreeMap<u32, Arc<SymmetrySet>> = if info_path.exists() {
        bopio::load_models_info(&info_path, bopio::DEFAULT_SYMMETRY_STEPS)?
            .into_iter()
            .map(|(k, v)| (k, Arc::new(v)))
            .collect()
    } else {
        BTreeMap::new()
    };

    let mut pool: BTreeMap<(u32, u32), VecDeque<&bopio::GtInstance>> = BTreeMap::new();
    for instance in gt {
        pool.entry((instance.im_id, instance.obj_id))
            .or_default()
            .push_back(instance);
    }

    let mut records = Vec::with_capacity(rows.len());
    for row in rows {
        let mesh = match meshes.get(&row.obj_id) {
            Some(m) => Arc::clone(m),
            None => {
                let path = models_dir.join(format!("obj_{:06}.ply", row.obj_id));
                if !path.exists() {
                    return Err(posekit::Error::MissingAsset(format!(
                        "no mesh for object {} at {}",
                        row.obj_id,
                        path.display()
                    ))
                    .into());
                }
                let mesh = Arc::new(bopio::load_mesh(&path)?);
                meshes.insert(row.obj_id, Arc::clone(&mesh));
                mesh
            }
        };
        let sym = symmetries
            .entry(row.obj_id)
            .or_insert_with(|| Arc::new(SymmetrySet::identity()));
        let instance = pool
            .get_mut(&(row.im_id, row.obj_id))
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| {
                posekit::Error::MissingAsset(format!(
                    "no unmatched ground truth for image {} object {}",
                    row.im_id, row.obj_id
                ))
            })?;
        records.push(EvalRecord {
            scene_id: row.scene_id,
            im_id: row.im_id,
            obj_id: row.obj_id,
            est: row.pose,
            score: row.score,
            gt: instance.pose,
            mesh,
            sym: Arc::clone(sym),
            cam: instance.cam,
        });
    }
    Ok(records)
}

fn classic_metrics(records: &[EvalRecord], selected: &[&str]) -> Option<ClassicMetrics> {
    let want_add = selected.contains(&"add");
    let want_adds = selected.contains(&"adds");
    let want_auc = selected.contains(&"auc");
    if !(want_add || want_adds || want_auc) {
        return None;
    }
    let add_errors: Vec<f64> = records
        .iter()
        .map(|r| metrics::add(&r.est, &r.gt, &r.mesh))
        .collect();
    let adds_errors: Vec<f64> = records
        .iter()
        .map(|r| metrics::add_s(&r.est, &r.gt, &r.mesh))
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Some(ClassicMetrics {
        add_mean_mm: (want_add || want_auc).then(|| mean(&add_errors)),
        adds_mean_mm: (want_adds || want_auc).then(|| mean(&adds_errors)),
        auc_add: want_auc.then(|| metrics::auc(&add_errors, AUC_MAX_MM).unwrap()),
        auc_adds: want_auc.then(|| metrics::auc(&adds_errors, AUC_MAX_MM).unwrap()),
    })
}

fn parse_floats(what: &str, s: &str, n: usize) -> Result<Vec<f64>, CliError> {
    let values: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad {what} {s:?}: {e}")))?;
    if values.len() != n {
        return Err(CliError::Usage(format!(
            "{what} needs {n} numbers, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage(format!("{what} has non-finite entries")));
    }
    Ok(values)
}

fn run_render(args: RenderArgs) -> Result<(), CliError> {
    let pose_v = parse_floats("--pose", &args.pose, 7)?;
    let cam_v = parse_floats("--cam", &args.cam, 4)?;
    let (w, h) = args
        .size
        .split_once('x')
        .and_then(|(a, b)| Some((a.parse::<u32>().ok()?, b.parse::<u32>().ok()?)))
        .ok_or_else(|| CliError::Usage(format!("--size must be WxH, got {:?}", args.size)))?;
    if w == 0 || h == 0 {
        return Err(CliError::Usage("--size must be at least 1x1".into()));
    }
    let norm = pose_v[..4].iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-3 {
        return Err(CliError::Data(format!(
            "pose quaternion norm {norm:.6} is not unit"
        )));
    }
    let rotation = Rotation::from_quaternion(pose_v[0], pose_v[1], pose_v[2], pose_v[3])?;
    let pose = Pose::new(rotation, Vector3::new(pose_v[4], pose_v[5], pose_v[6]));
    let cam = CameraIntrinsics::new(cam_v[0], cam_v[1], cam_v[2], cam_v[3], w, h)?;
    let mesh = bopio::load_mesh(&args.mesh)?;
    let (depth, _) = rasterize(&mesh, &pose, &cam, w as usize, h as usize);
    bopio::write_depth_png(&args.out, &depth)?;
    Ok(())
}

fn run_corrbench(args: CorrbenchArgs) -> Result<(), CliError> {
    let dims: Vec<usize> = args
        .shape
        .split('x')
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad --shape {:?}: {e}", args.shape)))?;
    let [d, h, w] = dims[..] else {
        return Err(CliError::Usage(format!(
            "--shape must be dxHxW, got {:?}",
            args.shape
        )));
    };
    if d == 0 || h == 0 || w == 0 {
        return Err(CliError::Usage(
            "--shape dimensions must be positive".into(),
        ));
    }
    if args.window == 0 || args.window.is_multiple_of(2) || args.window > 2 * h.min(w) - 1 {
        return Err(CliError::Usage(format!(
            "--window must be odd, positive and at most {}, got {}",
            2 * h.min(w) - 1,
            args.window
        )));
    }
    let implementations: Vec<&str> = match args.implementation.as_str() {
        "all" => vec!["naive", "optimized"],
        "naive" => vec!["naive"],
        "optimized" => vec!["optimized"],
        other => {
            return Err(CliError::Usage(format!(
                "--impl must be naive, optimized or all, got {other:?}"
            )))
        }
    };

    let mut rng = StdRng::seed_from_u64(42);
    let mut random_volume = || -> Result<FeatureVolume, CliError> {
        let data = (0..d * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Ok(FeatureVolume::from_vec(d, h, w, data)?)
    };
    let f_s = random_volume()?;
    let f_r = random_volume()?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "d,H,W,window,impl,ns_per_output_element,checksum")?;
    for name in implementations {
        let start = Instant::now();
        let result = match name {
            "naive" => corr_volume_reference(&f_s, &f_r, args.window)?,
            _ => corr_volume(&f_s, &f_r, args.window)?,
        };
        let elapsed = start.elapsed();
        let elements = (result.channels() * h * w) as f64;
        let checksum: f64 = result.as_features().data().iter().sum();
        writeln!(
            out,
            "{d},{h},{w},{},{name},{:.2},{checksum:.9e}",
            args.window,
            elapsed.as_nanos() as f64 / elements
        )?;
    }
    Ok(())
}
