//! `fusedet` — fuse, search, evaluate and preprocess object-detection data.
//!
//! Subcommands mirror the library pipeline: `eval` scores one detection
//! file, `fuse` (alias `combo`) runs weighted boxes fusion over several,
//! `search` exhaustively tries model subsets × integer weights, `preprocess`
//! runs the X-ray image pipeline, `curve` exports precision-recall curves,
//! and `json2csv`/`csv2json` convert between the detection file formats.
//!
//! Every command is deterministic given its flags, inputs and seed. Exit
//! code 0 means all requested outputs were fully written; on failure the
//! command removes whatever partial outputs it had created.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use fusedet_core::{
    augment, clahe, csv_to_json, evaluate, fuse_dataset, invert_if_light, json_to_csv,
    load_annotations, load_detections, load_gray_png, pr_curve, pr_curve_csv, pr_curve_svg,
    render_metric_table, render_search_table, rescale, run_views, save_annotations,
    save_detections, save_gray_png, save_rgb_png, search, write_metric_report, write_search_report,
    AnnotationSet, AugmentParams, ClaheParams, DetectionSet, FusionConfig, ImageSize, ModelRun,
    ReportFormat, SearchCriterion, SearchOptions,
};

#[derive(Parser)]
#[command(
    name = "fusedet",
    version,
    about = "Detection fusion, ensemble search and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a detection file against ground truth.
    Eval(EvalArgs),
    /// Fuse detection files with weighted boxes fusion and score the result.
    Fuse(FuseArgs),
    /// Alias of `fuse`: second-level fusion over already-fused files.
    Combo(FuseArgs),
    /// Exhaustively search model subsets and weight tuples for the best ensemble.
    Search(SearchArgs),
    /// Run the X-ray preprocessing pipeline over an image directory.
    Preprocess(PreprocessArgs),
    /// Export the precision-recall curve of a detection file.
    Curve(CurveArgs),
    /// Convert a detection JSON file to CSV.
    Json2csv(ConvertArgs),
    /// Convert a detection CSV file back to JSON.
    Csv2json(ConvertArgs),
}

/// One detection input: `model=path` or `model=path:weight`.
///
/// The weight is parsed from the right, so paths containing `:` still work
/// as long as their final segment is not a bare number. An omitted weight
/// defaults to 1.
#[derive(Debug, Clone)]
struct DetSpec {
    model_id: String,
    path: PathBuf,
    weight: f64,
    weight_given: bool,
}

impl FromStr for DetSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (model, rest) = s
            .split_once('=')
            .ok_or_else(|| format!("expected model=path[:weight], got {s:?}"))?;
        if model.is_empty() || rest.is_empty() {
            return Err(format!("expected model=path[:weight], got {s:?}"));
        }
        let (path, weight, weight_given) = match rest.rsplit_once(':') {
            Some((path, w)) if !path.is_empty() => match w.parse::<f64>() {
                Ok(weight) => (path, weight, true),
                Err(_) => (rest, 1.0, false),
            },
            _ => (rest, 1.0, false),
        };
        if weight_given && !(weight.is_finite() && weight > 0.0) {
            return Err(format!("weight in {s:?} must be a positive number"));
        }
        Ok(DetSpec {
            model_id: model.to_string(),
            path: PathBuf::from(path),
            weight,
            weight_given,
        })
    }
}

/// Fusion parameters shared by `fuse` and `search`.
#[derive(Args)]
struct FusionArgs {
    /// IoU above which a box joins an existing cluster during fusion.
    #[arg(long = "iou-thr", default_value_t = 0.5)]
    iou_thr: f64,
    /// Minimum confidence a detection needs to enter fusion.
    #[arg(long = "skip-box-thr", default_value_t = 0.3)]
    skip_box_thr: f64,
    /// Maximum fused boxes kept per image.
    #[arg(long = "limit-boxes", default_value_t = 6000)]
    limit_boxes: usize,
}

impl FusionArgs {
    fn config(&self) -> FusionConfig {
        FusionConfig {
            iou_threshold: self.iou_thr,
            skip_box_threshold: self.skip_box_thr,
            box_limit: self.limit_boxes,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth annotation file (COCO-convention JSON).
    #[arg(long)]
    annotations: PathBuf,
    /// Detection file (JSON array of records).
    #[arg(long)]
    detections: PathBuf,
    /// Model id recorded on the loaded detections; defaults to the file stem.
    #[arg(long = "model-id")]
    model_id: Option<String>,
    /// IoU threshold for true-positive matching.
    #[arg(long = "iou-thr", default_value_t = 0.5)]
    iou_thr: f64,
    /// IoU tolerance for the LRP metric family.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Also write the report to this path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report file format: `table` or `json`.
    #[arg(long, default_value = "table")]
    format: ReportFormat,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    annotations: PathBuf,
    /// Detection input as model=path or model=path:weight; repeatable.
    #[arg(long = "det", required = true)]
    dets: Vec<DetSpec>,
    /// Where the fused detection file is written.
    #[arg(long)]
    output: PathBuf,
    /// Model id stamped on the fused detections.
    #[arg(long = "ensemble-id", default_value = "ensemble")]
    ensemble_id: String,
    #[command(flatten)]
    fusion: FusionArgs,
    /// IoU threshold for true-positive matching in the report.
    #[arg(long = "match-iou", default_value_t = 0.5)]
    match_iou: f64,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Also write the metric report to this path.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "table")]
    format: ReportFormat,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    annotations: PathBuf,
    /// Pool member as model=path (weights are searched, not given); repeatable.
    #[arg(long = "det", required = true)]
    dets: Vec<DetSpec>,
    /// What to optimize: `ap50`, `ar` or `olrp`.
    #[arg(long, default_value = "ap50")]
    criterion: SearchCriterion,
    #[command(flatten)]
    fusion: FusionArgs,
    #[arg(long = "match-iou", default_value_t = 0.5)]
    match_iou: f64,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Skip weight tuples that are integer multiples of an earlier tuple.
    #[arg(long = "dedupe-scaling")]
    dedupe_scaling: bool,
    /// Weight grid upper bound; defaults to the pool size.
    #[arg(long = "max-weight")]
    max_weight: Option<u32>,
    /// Leaderboard depth in the report.
    #[arg(long, default_value_t = 20)]
    leaderboard: usize,
    /// Worker threads; 0 uses all cores, 1 is fully sequential.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Also write the search report to this path.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "table")]
    format: ReportFormat,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Directory holding the input PNG images.
    #[arg(long)]
    input: PathBuf,
    /// Annotation file naming the images (and any boxes) to process.
    #[arg(long)]
    annotations: PathBuf,
    /// Directory the processed images and annotation file are written to.
    #[arg(long)]
    output: PathBuf,
    /// CLAHE tile count along x.
    #[arg(long = "tiles-x", default_value_t = 11)]
    tiles_x: u32,
    /// CLAHE tile count along y.
    #[arg(long = "tiles-y", default_value_t = 11)]
    tiles_y: u32,
    /// CLAHE relative clip limit.
    #[arg(long = "clip-limit", default_value_t = 7.0)]
    clip_limit: f64,
    /// Apply seeded flip + brightness/contrast augmentation after rescaling.
    #[arg(long)]
    augment: bool,
    /// Base RNG seed; image k in annotation order uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Horizontal flip probability when augmenting.
    #[arg(long = "flip-prob", default_value_t = 0.5)]
    flip_prob: f64,
    /// Brightness shift is drawn from ±this value.
    #[arg(long = "brightness-delta", default_value_t = 25.5)]
    brightness_delta: f64,
    /// Lower bound of the contrast factor draw.
    #[arg(long = "contrast-lo", default_value_t = 0.8)]
    contrast_lo: f64,
    /// Upper bound of the contrast factor draw.
    #[arg(long = "contrast-hi", default_value_t = 1.2)]
    contrast_hi: f64,
    /// Write 3-channel PNGs (gray replicated) instead of single-channel.
    #[arg(long)]
    rgb: bool,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    detections: PathBuf,
    #[arg(long = "model-id")]
    model_id: Option<String>,
    #[arg(long = "iou-thr", default_value_t = 0.5)]
    iou_thr: f64,
    /// Curve CSV output path.
    #[arg(long)]
    output: PathBuf,
    /// Also render the curve as an SVG plot at this path.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

/// Removes the files it tracks unless disarmed, so failed commands do not
/// leave partial outputs behind.
struct OutputGuard {
    created: Vec<PathBuf>,
    armed: bool,
}

impl OutputGuard {
    fn new() -> Self {
        OutputGuard {
            created: Vec::new(),
            armed: true,
        }
    }

    /// Register a path that is about to be written.
    fn track(&mut self, path: &Path) {
        self.created.push(path.to_path_buf());
    }

    fn disarm(&mut self) {
        self.armed = false;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.armed {
            for path in &self.created {
                let _ = fs::remove_file(path);
            }
        }
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "detections".to_string())
}

fn load_pool(specs: &[DetSpec], annotations: &AnnotationSet) -> Result<Vec<DetectionSet>> {
    specs
        .iter()
        .map(|spec| {
            load_detections(&spec.path, annotations, spec.model_id.clone())
                .with_context(|| format!("loading detections for {}", spec.model_id))
        })
        .collect()
}

fn cmd_eval(args: &EvalArgs, guard: &mut OutputGuard) -> Result<()> {
    let annotations = load_annotations(&args.annotations)?;
    let model_id = args
        .model_id
        .clone()
        .unwrap_or_else(|| file_stem(&args.detections));
    let set = load_detections(&args.detections, &annotations, model_id)?;
    let report = evaluate(
        &set.detections,
        &annotations.ground_truths,
        args.iou_thr,
        args.tau,
    )?;
    print!("{}", render_metric_table(&report));
    if let Some(path) = &args.output {
        guard.track(path);
        write_metric_report(&report, path, args.format)?;
    }
    Ok(())
}

fn cmd_fuse(args: &FuseArgs, guard: &mut OutputGuard) -> Result<()> {
    let annotations = load_annotations(&args.annotations)?;
    let runs: Vec<ModelRun> = load_pool(&args.dets, &annotations)?
        .into_iter()
        .zip(&args.dets)
        .map(|(set, spec)| ModelRun {
            model_id: set.model_id,
            weight: spec.weight,
            detections: set.detections,
        })
        .collect();
    let views = run_views(&runs);
    let fused = fuse_dataset(&views, &args.fusion.config(), &args.ensemble_id)?;
    let report = evaluate(&fused, &annotations.ground_truths, args.match_iou, args.tau)?;

    let fused_set = DetectionSet {
        model_id: args.ensemble_id.clone(),
        detections: fused,
    };
    guard.track(&args.output);
    save_detections(&fused_set, &annotations, &args.output)?;
    print!("{}", render_metric_table(&report));
    if let Some(path) = &args.report {
        guard.track(path);
        write_metric_report(&report, path, args.format)?;
    }
    Ok(())
}

fn cmd_search(args: &SearchArgs, guard: &mut OutputGuard) -> Result<()> {
    if let Some(spec) = args.dets.iter().find(|s| s.weight_given) {
        bail!(
            "search assigns weights itself; pass --det {}={} without a weight",
            spec.model_id,
            spec.path.display()
        );
    }
    let annotations = load_annotations(&args.annotations)?;
    let pool = load_pool(&args.dets, &annotations)?;
    let options = SearchOptions {
        fusion: args.fusion.config(),
        match_iou: args.match_iou,
        tau: args.tau,
        dedupe_scaling: args.dedupe_scaling,
        max_weight: args.max_weight,
        leaderboard_size: args.leaderboard,
        workers: args.workers,
    };
    let result = search(&pool, &annotations.ground_truths, args.criterion, &options)?;
    print!("{}", render_search_table(&result));
    if let Some(path) = &args.output {
        guard.track(path);
        write_search_report(&result, path, args.format)?;
    }
    Ok(())
}

fn cmd_preprocess(args: &PreprocessArgs, guard: &mut OutputGuard) -> Result<()> {
    let annotations = load_annotations(&args.annotations)?;
    let clahe_params = ClaheParams {
        tiles_x: args.tiles_x,
        tiles_y: args.tiles_y,
        clip_limit: args.clip_limit,
    };
    let base_params = AugmentParams {
        flip_probability: args.flip_prob,
        brightness_delta: (-args.brightness_delta.abs(), args.brightness_delta.abs()),
        contrast_factor: (args.contrast_lo, args.contrast_hi),
        seed: args.seed,
    };

    fs::create_dir_all(&args.output)
        .with_context(|| format!("creating {}", args.output.display()))?;
    let annotation_out = args.output.join("annotations.json");
    for info in &annotations.images {
        guard.track(&args.output.join(&info.file_name));
    }
    guard.track(&annotation_out);

    // Per-image seeds make the parallel loop order-independent.
    let flipped: Vec<(String, bool)> = annotations
        .images
        .par_iter()
        .enumerate()
        .map(|(index, info)| -> Result<(String, bool)> {
            let input_path = args.input.join(&info.file_name);
            let output_path = args.output.join(&info.file_name);
            if let Some(parent) = output_path.parent() {
                fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            let image = load_gray_png(&input_path)?;
            let image = invert_if_light(&image);
            let image = clahe(&image, &clahe_params)
                .with_context(|| format!("CLAHE on {}", input_path.display()))?;
            let (mut image, _) = rescale(&image, &[])?;
            let mut was_flipped = false;
            if args.augment {
                let params = base_params.for_image_index(index as u64);
                let (augmented, _, ops) = augment(&image, &[], &params)?;
                image = augmented;
                was_flipped = ops.flipped;
            }
            if args.rgb {
                save_rgb_png(&image, &output_path)?;
            } else {
                save_gray_png(&image, &output_path)?;
            }
            Ok((info.id.clone(), was_flipped))
        })
        .collect::<Result<_>>()?;

    let flipped_ids: BTreeSet<&str> = flipped
        .iter()
        .filter(|(_, f)| *f)
        .map(|(id, _)| id.as_str())
        .collect();
    let mut out_annotations = annotations.clone();
    let processed_size = ImageSize::new(fusedet_core::RESCALE_SIZE, fusedet_core::RESCALE_SIZE)?;
    for info in &mut out_annotations.images {
        info.size = processed_size;
    }
    for gt in &mut out_annotations.ground_truths {
        if flipped_ids.contains(gt.image_id.as_str()) {
            gt.bbox = gt.bbox.flip_horizontal();
        }
    }
    save_annotations(&out_annotations, &annotation_out)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "processed {} images", annotations.images.len());
    let _ = writeln!(summary, "flipped {} images", flipped_ids.len());
    let _ = writeln!(summary, "annotations {}", annotation_out.display());
    print!("{summary}");
    Ok(())
}

fn cmd_curve(args: &CurveArgs, guard: &mut OutputGuard) -> Result<()> {
    let annotations = load_annotations(&args.annotations)?;
    let model_id = args
        .model_id
        .clone()
        .unwrap_or_else(|| file_stem(&args.detections));
    let set = load_detections(&args.detections, &annotations, model_id)?;
    let curve = pr_curve(&set.detections, &annotations.ground_truths, args.iou_thr)?;
    guard.track(&args.output);
    pr_curve_csv(&curve, &args.output)?;
    if let Some(path) = &args.svg {
        guard.track(path);
        pr_curve_svg(&curve, path)?;
    }
    println!("wrote {} curve points", curve.points.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut guard = OutputGuard::new();
    match &cli.command {
        Command::Eval(args) => cmd_eval(args, &mut guard)?,
        Command::Fuse(args) | Command::Combo(args) => cmd_fuse(args, &mut guard)?,
        Command::Search(args) => cmd_search(args, &mut guard)?,
        Command::Preprocess(args) => cmd_preprocess(args, &mut guard)?,
        Command::Curve(args) => cmd_curve(args, &mut guard)?,
        Command::Json2csv(args) => {
            guard.track(&args.output);
            let count = json_to_csv(&args.input, &args.output)?;
            println!("wrote {count} records to {}", args.output.display());
        }
        Command::Csv2json(args) => {
            guard.track(&args.output);
            let count = csv_to_json(&args.input, &args.output)?;
            println!("wrote {count} records to {}", args.output.display());
        }
    }
    guard.disarm();
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
