//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::field::build_smoothed_field;
use crate::geometry::{project_cloud, PointCloud};
use crate::io::config::RunConfig;
use crate::io::report::{trace_csv, view_trace_csv, write_text, ReportDocument, ReportMetrics};
use crate::io::{
    load_scene, read_cloud_ply, read_silhouette, write_cloud_ply, write_grid_pgm, write_overlay,
    write_scene,
};
use crate::metrics::{chamfer_distance, normalize_cloud, unit_bounds, volumetric_iou, voxelize};
use crate::optim::{fit, normalized_chamfer, run_ablation, AblationMode};
use crate::synth::{synthesize_scene, SceneSpec, ShapeKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Voxel resolution used for the IoU recorded in fit reports.
const REPORT_IOU_RESOLUTION: usize = 32;

#[derive(Debug, Parser)]
#[command(name = "silfit", version, about = "Fit point clouds to multi-view silhouettes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene directory.
    Synth(SynthArgs),
    /// Fit a point cloud to a scene.
    Fit(FitArgs),
    /// Compare two point clouds.
    Eval(EvalArgs),
    /// Run the ablation table on a scene.
    Ablate(AblateArgs),
    /// Write the smoothed field of a mask as an image.
    InspectField(InspectArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// sphere, box, torus, composite_chair or composite_plane
    #[arg(long)]
    shape: String,
    #[arg(long, default_value_t = 4)]
    views: usize,
    /// Square image size in pixels.
    #[arg(long, default_value_t = 64)]
    res: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of ground-truth surface samples.
    #[arg(long, default_value_t = 2000)]
    gt_points: usize,
    #[arg(long, default_value_t = 2.5)]
    radius: f64,
    #[arg(long, default_value_t = 20.0)]
    elevation: f64,
    /// Focal length as a multiple of the image size.
    #[arg(long, default_value_t = 1.75)]
    focal_scale: f64,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write per-view loss terms for every iteration.
    #[arg(long)]
    trace: bool,
    /// Overrides the config's ablation mode.
    #[arg(long)]
    ablation: Option<String>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Report Chamfer distance multiplied by 100.
    #[arg(long)]
    x100: bool,
    /// Compare the clouds as given instead of normalizing both.
    #[arg(long)]
    raw: bool,
    /// Also report volumetric IoU.
    #[arg(long)]
    iou: bool,
    #[arg(long, default_value_t = 32)]
    res: usize,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, default_value_t = 32)]
    pad: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Fit(a) => fit_command(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::InspectField(a) => inspect(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::NonFinite { .. } => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let shape: ShapeKind = a.shape.parse()?;
    let spec = SceneSpec {
        shape,
        views: a.views,
        resolution: a.res,
        radius: a.radius,
        elevation_deg: a.elevation,
        focal_scale: a.focal_scale,
        gt_points: a.gt_points,
        seed: a.seed,
    };
    let scene = synthesize_scene(&spec)?;
    let manifest = write_scene(&scene, &a.out)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Normalized Chamfer distance and IoU of a prediction against ground truth.
pub fn compare(pred: &PointCloud, gt: &PointCloud, resolution: usize) -> Result<(f64, f64)> {
    let cd = normalized_chamfer(pred, gt)?;
    let occupancy = |c: &PointCloud| -> Result<_> {
        let points = normalize_cloud(c).map(|n| n.points).unwrap_or_else(|_| c.points.clone());
        voxelize(&points, resolution, unit_bounds())
    };
    let iou = volumetric_iou(&occupancy(pred)?, &occupancy(gt)?)?;
    Ok((cd, iou))
}

fn fit_command(a: FitArgs) -> Result<()> {
    let config = RunConfig::read(&a.config)?;
    let scene = load_scene(&a.scene)?;
    let mut fit_config = config.resolve(scene.cameras.len())?;
    if let Some(mode) = &a.ablation {
        fit_config.ablation_mode = mode.parse::<AblationMode>()?;
    }
    let views = scene.views(fit_config.pad)?;
    let report = fit(&fit_config, &views)?;

    let metrics = match &scene.gt_cloud {
        Some(gt) => {
            let (chamfer_final, iou) = compare(&report.final_cloud, gt, REPORT_IOU_RESOLUTION)?;
            Some(ReportMetrics {
                chamfer_initial: normalized_chamfer(&report.initial_cloud, gt)?,
                chamfer_final,
                iou,
            })
        }
        None => None,
    };

    create_dir(&a.out)?;
    let doc = ReportDocument::new(&report, &config.text, metrics);
    write_text(&doc.to_json(), a.out.join("report.json"))?;
    write_text(&trace_csv(&report), a.out.join("trace.csv"))?;
    write_cloud_ply(&report.final_cloud, a.out.join("final_cloud.ply"))?;
    if a.trace {
        write_text(&view_trace_csv(&report), a.out.join("view_trace.csv"))?;
    }
    for (i, view) in views.iter().enumerate() {
        let projections = project_cloud(view.pose(), &report.final_cloud);
        write_overlay(view.silhouette(), &projections, a.out.join(format!("overlay_{i:03}.ppm")))?;
    }

    println!("final_loss = {}", report.final_loss);
    println!("final_coverage = {}", report.final_coverage);
    if let Some(m) = metrics {
        println!("chamfer_initial = {}", m.chamfer_initial);
        println!("chamfer_final = {}", m.chamfer_final);
        println!("iou = {}", m.iou);
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let pred = read_cloud_ply(&a.pred)?;
    let gt = read_cloud_ply(&a.gt)?;
    let (mut cd, iou) = if a.raw {
        let grid = |c: &PointCloud| voxelize(&c.points, a.res, unit_bounds());
        (chamfer_distance(&pred, &gt)?, volumetric_iou(&grid(&pred)?, &grid(&gt)?)?)
    } else {
        compare(&pred, &gt, a.res)?
    };
    if a.x100 {
        cd *= 100.0;
    }
    println!("chamfer = {cd}");
    if a.iou {
        println!("iou = {iou}");
    }
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let config = RunConfig::read(&a.config)?;
    let scene = load_scene(&a.scene)?;
    let gt = scene
        .gt_cloud
        .as_ref()
        .ok_or_else(|| Error::BadParams("ablation needs a scene with a ground-truth cloud".into()))?;
    let base = config.resolve(scene.cameras.len())?;
    let views = scene.views(base.pad)?;
    let seeds: Vec<u64> = (0..config.ablation_seeds as u64).map(|s| base.seed + s).collect();
    let table = run_ablation(&base, &views, gt, &seeds)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let csv = table.to_csv();
    write_text(&csv, &a.out)?;
    print!("{csv}");
    Ok(())
}

fn inspect(a: InspectArgs) -> Result<()> {
    let sil = read_silhouette(&a.mask)?;
    let field = build_smoothed_field(&sil, a.pad)?;
    write_grid_pgm(&field.values, &a.out)?;
    let (w, h) = field.padded_size();
    println!("wrote {}x{} field to {}", w, h, a.out.display());
    Ok(())
}
