//! `vpgrid` command-line surface: dataset generation, training, detection,
//! baselines, evaluation, and report formatting.
//!
//! Exit codes: 0 success, 1 domain/runtime error, 2 usage error. Diagnostics
//! go to stderr, data to stdout.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::classical::{center_baseline, hough_detect, BaselineMode, HoughParams};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, evaluate_existence, format_report_table, read_report, render_overlay,
    write_report, EvalReport, OverlayStyle,
};
use crate::geometry::{CellIndex, GridSpec, RankedPrediction};
use crate::nn::{
    load_model, predict_existence, predict_localization, prepare_augmented_samples,
    reference_architecture, save_model, train_samples, Network, Task, TrainConfig,
};
use crate::raster::{read_pgm, write_pgm, ImageRaster};
use crate::scenegen::{
    build_dataset, load_entry_image, read_manifest, DatasetManifest, RngSeed, SceneParams,
    Split,
};

#[derive(Parser)]
#[command(
    name = "vpgrid",
    about = "Vanishing point detection on an n x n grid map",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with ground-truth vanishing points
    Gen(GenArgs),
    /// Train the CNN for existence or localization
    Train(TrainArgs),
    /// Run one detector over an image or a manifest split
    Detect(DetectArgs),
    /// Print the center-prior baseline prediction for a dataset
    Baseline(BaselineArgs),
    /// Evaluate methods over a manifest and emit a report
    Eval(EvalArgs),
    /// Format a saved report as an aligned table / tab-separated file
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output directory for images and manifest
    #[arg(long)]
    out: PathBuf,
    /// Number of positive scenes
    #[arg(long, default_value_t = 100)]
    pos: u32,
    /// Number of negative scenes
    #[arg(long, default_value_t = 100)]
    neg: u32,
    /// Square image side in pixels
    #[arg(long, default_value_t = 64)]
    size: u32,
    /// Comma-separated grid sides, e.g. 8 or 10,20,30
    #[arg(long, default_value = "8")]
    grid: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of each class that goes to the train split
    #[arg(long, default_value_t = 0.88)]
    train_frac: f64,
    /// Converging lines per positive scene
    #[arg(long, default_value_t = 6)]
    converging: u32,
    /// Distractor lines per scene
    #[arg(long, default_value_t = 4)]
    distractors: u32,
    /// VP prior std-dev in pixels (default 10% of size)
    #[arg(long)]
    vp_sigma: Option<f64>,
    /// Additive Gaussian pixel noise std-dev
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0.9)]
    line_intensity: f64,
    #[arg(long, default_value_t = 0.1)]
    background: f64,
    #[arg(long, default_value_t = 1.0)]
    thickness: f64,
}

#[derive(Args)]
struct TrainArgs {
    /// existence | localization
    #[arg(long)]
    task: String,
    #[arg(long)]
    manifest: PathBuf,
    /// Grid side n (localization head has n*n classes)
    #[arg(long, default_value_t = 8)]
    grid: u32,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Augmented copies per training sample (jitter, noise, blur, crop)
    #[arg(long, default_value_t = 0)]
    augment: u32,
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    /// cnn | hough | center
    #[arg(long)]
    method: String,
    /// Trained model file (cnn only)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Single image to detect on
    #[arg(long, conflicts_with = "manifest")]
    image: Option<PathBuf>,
    /// Manifest whose split to detect on
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Split of the manifest to use
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, default_value_t = 8)]
    grid: u32,
    #[arg(long, default_value_t = 5)]
    topk: usize,
    /// Write prediction overlay images here
    #[arg(long)]
    overlay_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    /// top1 | top5
    #[arg(long)]
    mode: String,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 8)]
    grid: u32,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated methods: cnn,hough,center
    #[arg(long, default_value = "hough,center")]
    methods: String,
    /// Localization model for the cnn method
    #[arg(long)]
    model: Option<PathBuf>,
    /// Existence model; adds existence accuracy to the report
    #[arg(long)]
    existence_model: Option<PathBuf>,
    /// Comma-separated grid sides to evaluate
    #[arg(long, default_value = "8")]
    grids: String,
    /// Write the tab-separated report here
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Saved report file to format
    #[arg(long)]
    report: PathBuf,
    /// Write a tab-separated copy here
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses and runs a full argv (including the program name); returns the
/// process exit code.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Detect(args) => cmd_detect(&args),
        Command::Baseline(args) => cmd_baseline(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Report(args) => cmd_report(&args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn parse_u32_list(s: &str, what: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::domain(format!("bad {what} '{t}'")))
        })
        .collect()
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let params = SceneParams {
        width: args.size,
        height: args.size,
        n_converging: args.converging,
        n_distractor: args.distractors,
        vp_prior_sigma: args.vp_sigma.unwrap_or(0.1 * args.size as f64),
        noise_sigma: args.noise,
        line_intensity: args.line_intensity,
        background_intensity: args.background,
        line_thickness: args.thickness,
    };
    let grids = parse_u32_list(&args.grid, "grid side")?
        .into_iter()
        .map(|n| GridSpec::new(args.size, args.size, n))
        .collect::<Result<Vec<_>>>()?;
    let manifest = build_dataset(
        args.pos,
        args.neg,
        args.train_frac,
        &params,
        &grids,
        RngSeed(args.seed),
        &args.out,
    )?;
    println!(
        "wrote {} images ({} train / {} test) and manifest to {}",
        manifest.entries.len(),
        manifest.split(Split::Train).count(),
        manifest.split(Split::Test).count(),
        args.out.display()
    );
    Ok(())
}

/// Picks the manifest grid with side `n`, or derives one from the image
/// dimensions of the first entry.
fn resolve_grid(manifest_path: &Path, manifest: &DatasetManifest, n: u32) -> Result<GridSpec> {
    if let Some(g) = manifest.grids.iter().find(|g| g.n() == n) {
        return Ok(*g);
    }
    let entry = manifest
        .entries
        .first()
        .ok_or_else(|| Error::domain("empty manifest"))?;
    let img = load_entry_image(manifest_path, entry)?;
    GridSpec::new(img.width(), img.height(), n)
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let task: Task = args.task.parse()?;
    let manifest = read_manifest(&args.manifest)?;
    let grid = resolve_grid(&args.manifest, &manifest, args.grid)?;
    let head = match task {
        Task::Existence => 2,
        Task::Localization => grid.class_count() as usize,
    };
    let samples = prepare_augmented_samples(
        &args.manifest,
        &manifest,
        task,
        grid,
        Split::Train,
        args.augment,
        args.seed,
    )?;
    let (_, h, w) = (1, grid.height() as usize, grid.width() as usize);
    let net = Network::build(1, h, w, &reference_architecture(head), args.seed)?;
    let cfg = TrainConfig {
        learning_rate: args.lr,
        momentum: args.momentum,
        batch_size: args.batch,
        epochs: args.epochs,
        seed: args.seed,
        shuffle: true,
    };
    eprintln!(
        "training {} on {} samples ({} parameters)",
        args.task,
        samples.len(),
        net.parameter_count()
    );
    let (net, curve) = train_samples(net, &samples, &cfg)?;
    for (epoch, loss) in curve.iter().enumerate() {
        eprintln!("epoch {:>3}  loss {:.6}", epoch + 1, loss);
    }
    save_model(&net, &args.model_out)?;
    println!(
        "trained {} epochs, final loss {:.6}, model saved to {}",
        curve.len(),
        curve.last().unwrap(),
        args.model_out.display()
    );
    Ok(())
}

enum Detector {
    Cnn(Network),
    Hough(HoughParams),
    Center(RankedPrediction),
}

impl Detector {
    fn predict(
        &self,
        img: &ImageRaster,
        grid: GridSpec,
        top_k: usize,
    ) -> Result<RankedPrediction> {
        match self {
            Detector::Cnn(net) => predict_localization(net, img, grid, top_k),
            Detector::Hough(params) => hough_detect(img, grid, params, top_k),
            Detector::Center(pred) => Ok(pred.truncated(top_k)),
        }
    }
}

/// Linearized VP cell labels of a manifest split's positive entries.
fn split_labels(
    manifest: &DatasetManifest,
    grid: GridSpec,
    split: Split,
) -> Result<Vec<CellIndex>> {
    manifest
        .split(split)
        .filter_map(|e| e.vp)
        .map(|vp| grid.pixel_to_cell(vp))
        .collect()
}

fn build_detector(
    method: &str,
    model: Option<&PathBuf>,
    manifest: Option<(&Path, &DatasetManifest)>,
    grid: GridSpec,
    mode: BaselineMode,
) -> Result<Detector> {
    match method {
        "cnn" => {
            let path = model
                .ok_or_else(|| Error::domain("method cnn requires --model"))?;
            Ok(Detector::Cnn(load_model(path)?))
        }
        "hough" => Ok(Detector::Hough(HoughParams::default())),
        "center" => {
            let (_, manifest) = manifest.ok_or_else(|| {
                Error::domain("method center requires --manifest for train labels")
            })?;
            let labels = split_labels(manifest, grid, Split::Train)?;
            Ok(Detector::Center(center_baseline(&labels, grid, mode)?))
        }
        other => Err(Error::domain(format!("unknown method '{other}'"))),
    }
}

fn cmd_detect(args: &DetectArgs) -> Result<()> {
    let manifest = match &args.manifest {
        Some(path) => Some((path.clone(), read_manifest(path)?)),
        None => None,
    };
    // single image or manifest split
    let mut images: Vec<(String, ImageRaster)> = Vec::new();
    if let Some(image) = &args.image {
        images.push((image.display().to_string(), read_pgm(image)?));
    } else if let Some((path, manifest)) = &manifest {
        let split: Split = args.split.parse()?;
        for entry in manifest.split(split) {
            images.push((entry.path.clone(), load_entry_image(path, entry)?));
        }
    } else {
        return Err(Error::domain("detect needs --image or --manifest"));
    }
    if images.is_empty() {
        return Err(Error::domain("no images to detect on"));
    }
    let first = &images[0].1;
    let grid = GridSpec::new(first.width(), first.height(), args.grid)?;
    let detector = build_detector(
        &args.method,
        args.model.as_ref(),
        manifest.as_ref().map(|(p, m)| (p.as_path(), m)),
        grid,
        BaselineMode::Top5,
    )?;
    if let Some(dir) = &args.overlay_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    println!("image\trank\trow\tcol\tscore");
    for (name, img) in &images {
        let pred = detector.predict(img, grid, args.topk)?;
        for (rank, (cell, score)) in pred.entries().iter().enumerate() {
            println!("{name}\t{}\t{}\t{}\t{score:.6}", rank + 1, cell.row, cell.col);
        }
        if let Some(dir) = &args.overlay_dir {
            let overlay = render_overlay(img, &pred, &OverlayStyle::for_grid(grid))?;
            let base = Path::new(name)
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_else(|| "image.pgm".to_string());
            write_pgm(&overlay, &dir.join(format!("overlay_{base}")))?;
        }
    }
    Ok(())
}

fn cmd_baseline(args: &BaselineArgs) -> Result<()> {
    let mode = match args.mode.as_str() {
        "top1" => BaselineMode::Top1,
        "top5" => BaselineMode::Top5,
        other => return Err(Error::domain(format!("unknown mode '{other}'"))),
    };
    let manifest = read_manifest(&args.manifest)?;
    let grid = resolve_grid(&args.manifest, &manifest, args.grid)?;
    let labels = split_labels(&manifest, grid, Split::Train)?;
    let pred = center_baseline(&labels, grid, mode)?;
    println!("rank\trow\tcol\tscore");
    for (rank, (cell, score)) in pred.entries().iter().enumerate() {
        println!("{}\t{}\t{}\t{score:.6}", rank + 1, cell.row, cell.col);
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let manifest = read_manifest(&args.manifest)?;
    let methods: Vec<&str> = args.methods.split(',').map(str::trim).collect();
    let grid_sides = parse_u32_list(&args.grids, "grid side")?;
    let mut report = EvalReport::new();
    for n in &grid_sides {
        let grid = resolve_grid(&args.manifest, &manifest, *n)?;
        let truths = split_labels(&manifest, grid, Split::Test)?;
        if truths.is_empty() {
            return Err(Error::domain("no positive test entries to evaluate"));
        }
        let test_images: Vec<ImageRaster> = manifest
            .split(Split::Test)
            .filter(|e| e.vp.is_some())
            .map(|e| load_entry_image(&args.manifest, e))
            .collect::<Result<_>>()?;
        for method in &methods {
            let detector = match build_detector(
                method,
                args.model.as_ref(),
                Some((args.manifest.as_path(), &manifest)),
                grid,
                BaselineMode::Top5,
            ) {
                Ok(d) => d,
                Err(e) => {
                    return Err(e);
                }
            };
            if let Detector::Cnn(net) = &detector {
                if net.head_classes() != grid.class_count() as usize {
                    eprintln!(
                        "skipping cnn on grid n={n}: model head {} != p {}",
                        net.head_classes(),
                        grid.class_count()
                    );
                    continue;
                }
            }
            let predictions: Vec<RankedPrediction> = test_images
                .iter()
                .map(|img| detector.predict(img, grid, 5))
                .collect::<Result<_>>()?;
            report
                .rows
                .push(evaluate(method, &predictions, &truths, grid)?);
        }
    }
    if let Some(model_path) = &args.existence_model {
        let net = load_model(model_path)?;
        let mut probabilities = Vec::new();
        let mut truths = Vec::new();
        for entry in manifest.split(Split::Test) {
            let img = load_entry_image(&args.manifest, entry)?;
            probabilities.push(predict_existence(&net, &img)?);
            truths.push(entry.has_vp());
        }
        report.existence_accuracy = Some(evaluate_existence(&probabilities, &truths, 0.5)?);
    }
    print!("{}", format_report_table(&report));
    if let Some(path) = &args.report {
        write_report(&report, path)?;
        eprintln!("report written to {}", path.display());
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let report = read_report(&args.report)?;
    print!("{}", format_report_table(&report));
    if let Some(out) = &args.out {
        write_report(&report, out)?;
    }
    Ok(())
}
