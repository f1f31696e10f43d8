//! `illumdet` command-line tool.
//!
//! One subcommand per toolkit capability: scene generation, detector
//! simulation, splitting, subset selection, late fusion, evaluation,
//! study reports, and PR-curve plots. Every command is a pure function
//! of (input files, flags, seed); outputs are written atomically via a
//! temp file + rename, and reruns are byte-identical.
//!
//! Exit codes: 0 success, 2 I/O error, 3 input parse error,
//! 4 validation error. Failures print a single line to stderr.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use illumdet::dataset::{
    apply_detections, load_detections, load_manifest, load_split, save_detections, save_manifest,
    save_split, select_images, split_objectwise, DatasetError, DatasetManifest, ExposureScope,
    SelectionSpec, SplitAssignment, SplitName, Strategy,
};
use illumdet::fusion::{fuse_region, FusionParams};
use illumdet::metrics::{default_threshold_grid, pr_curve};
use illumdet::model::Modality;
use illumdet::plot::{write_pr_csv, write_pr_svg, Curve, PlotError};
use illumdet::sim::{
    default_config_text, generate_dataset, load_visibility, parse_config, save_visibility,
    simulate_detections, SimConfig, SimError,
};
use illumdet::study::{
    evaluate_images, run_study, Aggregation, DetectionsSource, StudyConfig, StudyError,
};

#[derive(Parser)]
#[command(
    name = "illumdet",
    version,
    about = "Multi-illumination surface-defect detection toolkit",
    propagate_version = true
)]
struct Cli {
    /// Worker-thread bound for parallel sections; results do not
    /// depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default simulator configuration file.
    DefaultConfig(DefaultConfigArgs),
    /// Generate a synthetic dataset manifest plus its defect-visibility
    /// sidecar.
    Generate(GenerateArgs),
    /// Simulate detector output for every image of a manifest.
    SimulateDetections(SimulateArgs),
    /// Assign objects to train/val/test, object-wise.
    Split(SplitArgs),
    /// List the image ids a selection strategy picks from one split.
    Select(SelectArgs),
    /// Pool each region's detections, apply NMS, and write the fused
    /// detections for all 12 images.
    Fuse(FuseArgs),
    /// Score detections against annotations: P/R/F1 at the cutoff and
    /// AP over all confidences.
    Evaluate(EvaluateArgs),
    /// Run one of the four study protocols and write its report.
    Study(StudyArgs),
    /// Sample precision-recall curves to CSV and SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct DefaultConfigArgs {
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Simulator configuration file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_manifest: PathBuf,
    #[arg(long)]
    out_visibility: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Visibility sidecar produced by `generate`.
    #[arg(long)]
    visibility: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Comma-separated train,val,test fractions summing to 1.
    #[arg(long, default_value = "0.7,0.15,0.15")]
    ratios: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    split: PathBuf,
    /// Which split to select from.
    #[arg(long, value_parser = parse_subset)]
    subset: SplitName,
    /// single_modality:<C|UD|LR|UDLR>, random_modalities,
    /// random_modalities:per_region_exposure, quarter_regions, or full.
    #[arg(long)]
    strategy: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    detections: PathBuf,
    /// NMS IoU threshold.
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    detections: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    cutoff: f64,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    /// Restrict evaluation to one split of this assignment file.
    #[arg(long, requires = "subset")]
    split: Option<PathBuf>,
    #[arg(long, value_parser = parse_subset, requires = "split")]
    subset: Option<SplitName>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    /// Study protocol, 1-4.
    #[arg(long)]
    id: u8,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    split: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 0.7)]
    cutoff: f64,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Draw one exposure per region instead of per image in the
    /// random-modalities strategy.
    #[arg(long)]
    per_region_exposure: bool,
    /// per_image or per_region scoring of the fusion study.
    #[arg(long, default_value = "per_image", value_parser = parse_aggregation)]
    aggregation: Aggregation,
    /// Text report path; stdout when omitted.
    #[arg(long)]
    out_text: Option<PathBuf>,
    /// Optional CSV report path.
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Curve source as label=detections-file; repeat to overlay.
    #[arg(long = "curve", required = true)]
    curves: Vec<String>,
    /// Comma-separated ascending confidence thresholds;
    /// 0.1..0.9 when omitted.
    #[arg(long)]
    grid: Option<String>,
    /// Matching IoU threshold for scoring.
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_svg: Option<PathBuf>,
}

/// Failure with its exit code: 2 I/O, 3 parse, 4 validation.
#[derive(Debug)]
enum CliError {
    Io(String),
    Parse(String),
    Validation(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Validation(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Parse(m) | CliError::Validation(m) => m,
        }
    }
}

/// Errors raised while reading an input file: I/O keeps code 2,
/// everything else means the file's content is bad (code 3).
fn input_err(path: &Path) -> impl Fn(DatasetError) -> CliError + '_ {
    move |e| match e {
        DatasetError::Io(e) => CliError::Io(format!("{}: {e}", path.display())),
        other => CliError::Parse(format!("{}: {other}", path.display())),
    }
}

fn sim_input_err(path: &Path) -> impl Fn(SimError) -> CliError + '_ {
    move |e| match e {
        SimError::Io(e) => CliError::Io(format!("{}: {e}", path.display())),
        SimError::Format { .. } => CliError::Parse(format!("{}: {e}", path.display())),
        other => CliError::Validation(format!("{}: {other}", path.display())),
    }
}

/// Errors raised while operating on already-parsed data (code 4,
/// except for I/O).
fn op_err(e: DatasetError) -> CliError {
    match e {
        DatasetError::Io(e) => CliError::Io(e.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn sim_op_err(e: SimError) -> CliError {
    match e {
        SimError::Io(e) => CliError::Io(e.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn study_err(e: StudyError) -> CliError {
    match e {
        StudyError::Dataset(DatasetError::Io(e)) => CliError::Io(e.to_string()),
        StudyError::Sim(SimError::Io(e)) => CliError::Io(e.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn plot_err(e: PlotError) -> CliError {
    match e {
        PlotError::Io(e) => CliError::Io(e.to_string()),
        PlotError::Empty => CliError::Validation(e.to_string()),
    }
}

fn parse_subset(s: &str) -> Result<SplitName, String> {
    SplitName::parse(s).ok_or_else(|| format!("unknown split `{s}`, expected train/val/test"))
}

fn parse_aggregation(s: &str) -> Result<Aggregation, String> {
    match s {
        "per_image" => Ok(Aggregation::PerImage),
        "per_region" => Ok(Aggregation::PerRegion),
        other => Err(format!(
            "unknown aggregation `{other}`, expected per_image or per_region"
        )),
    }
}

fn parse_strategy(s: &str) -> Result<Strategy, CliError> {
    let err = || {
        CliError::Validation(format!(
            "unknown strategy `{s}`; expected single_modality:<C|UD|LR|UDLR>, \
             random_modalities[:per_region_exposure], quarter_regions, or full"
        ))
    };
    match s {
        "random_modalities" => Ok(Strategy::RandomModalities(ExposureScope::PerImage)),
        "random_modalities:per_region_exposure" => {
            Ok(Strategy::RandomModalities(ExposureScope::PerRegion))
        }
        "quarter_regions" => Ok(Strategy::QuarterRegions),
        "full" => Ok(Strategy::Full),
        other => {
            let modality = other.strip_prefix("single_modality:").ok_or_else(err)?;
            Ok(Strategy::SingleModality(
                Modality::parse(modality).map_err(|_| err())?,
            ))
        }
    }
}

fn parse_ratios(s: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Validation(format!("bad ratios `{s}`")))?;
    if parts.len() != 3 {
        return Err(CliError::Validation(format!(
            "ratios need 3 comma-separated values, got `{s}`"
        )));
    }
    Ok([parts[0], parts[1], parts[2]])
}

fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let grid: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Validation(format!("bad threshold grid `{s}`")))?;
    let ascending = grid.windows(2).all(|w| w[0] < w[1]);
    if grid.is_empty() || !ascending || grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(CliError::Validation(format!(
            "threshold grid must be ascending values in [0, 1], got `{s}`"
        )));
    }
    Ok(grid)
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes via a temp file in the target directory and renames it into
/// place, so interrupted runs never leave partial output.
fn write_atomic(
    path: &Path,
    write: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let io = |e: io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir),
        None => tempfile::NamedTempFile::new_in("."),
    }
    .map_err(io)?;
    write(tmp.as_file_mut())?;
    tmp.as_file_mut().flush().map_err(io)?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Writes to the path when given, stdout otherwise.
fn write_out(
    path: &Option<PathBuf>,
    write: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    match path {
        Some(path) => write_atomic(path, write),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush().map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn load_sim_config(path: &Option<PathBuf>) -> Result<SimConfig, CliError> {
    match path {
        None => Ok(SimConfig::default()),
        Some(path) => {
            let mut text = String::new();
            open(path)?
                .read_to_string(&mut text)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            parse_config(&text).map_err(sim_input_err(path))
        }
    }
}

fn load_manifest_file(path: &Path) -> Result<DatasetManifest, CliError> {
    load_manifest(open(path)?).map_err(input_err(path))
}

fn load_split_file(path: &Path) -> Result<SplitAssignment, CliError> {
    load_split(open(path)?).map_err(input_err(path))
}

fn load_applied(
    manifest_path: &Path,
    detections_path: &Path,
) -> Result<DatasetManifest, CliError> {
    let manifest = load_manifest_file(manifest_path)?;
    let entries = load_detections(open(detections_path)?).map_err(input_err(detections_path))?;
    apply_detections(&manifest, &entries).map_err(op_err)
}

fn cmd_default_config(args: &DefaultConfigArgs) -> Result<(), CliError> {
    write_out(&args.out, |out| {
        out.write_all(default_config_text().as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))
    })
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let config = load_sim_config(&args.config)?;
    let generated = generate_dataset(&config.scene, args.seed).map_err(sim_op_err)?;
    write_atomic(&args.out_manifest, |out| {
        save_manifest(&generated.manifest, out).map_err(op_err)
    })?;
    write_atomic(&args.out_visibility, |out| {
        save_visibility(&generated.visibility, out).map_err(sim_op_err)
    })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = load_sim_config(&args.config)?;
    let manifest = load_manifest_file(&args.manifest)?;
    let visibility =
        load_visibility(open(&args.visibility)?).map_err(sim_input_err(&args.visibility))?;
    let simulated = simulate_detections(
        &manifest,
        &visibility,
        &config.scene,
        &config.detector,
        args.seed,
    )
    .map_err(sim_op_err)?;
    write_atomic(&args.out, |out| {
        save_detections(&simulated, out).map_err(op_err)
    })
}

fn cmd_split(args: &SplitArgs) -> Result<(), CliError> {
    let manifest = load_manifest_file(&args.manifest)?;
    let ratios = parse_ratios(&args.ratios)?;
    let split = split_objectwise(&manifest, ratios, args.seed).map_err(op_err)?;
    write_atomic(&args.out, |out| save_split(&split, out).map_err(op_err))
}

fn cmd_select(args: &SelectArgs) -> Result<(), CliError> {
    let manifest = load_manifest_file(&args.manifest)?;
    let split = load_split_file(&args.split)?;
    let spec = SelectionSpec {
        strategy: parse_strategy(&args.strategy)?,
        seed: args.seed,
    };
    let images = select_images(&manifest, &split, args.subset, &spec).map_err(op_err)?;
    write_out(&args.out, |out| {
        for img in &images {
            writeln!(out, "{}", img.image_id).map_err(|e| CliError::Io(e.to_string()))?;
        }
        Ok(())
    })
}

fn cmd_fuse(args: &FuseArgs) -> Result<(), CliError> {
    let manifest = load_applied(&args.manifest, &args.detections)?;
    let params = FusionParams::new(args.theta).map_err(|e| CliError::Validation(e.to_string()))?;
    let fused = manifest
        .map_regions(|stack| Ok(fuse_region(stack, &params)))
        .map_err(op_err)?;
    write_atomic(&args.out, |out| save_detections(&fused, out).map_err(op_err))
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let manifest = load_applied(&args.manifest, &args.detections)?;
    let images: Vec<_> = match (&args.split, args.subset) {
        (Some(split_path), Some(subset)) => {
            let split = load_split_file(split_path)?;
            let spec = SelectionSpec {
                strategy: Strategy::Full,
                seed: 0,
            };
            select_images(&manifest, &split, subset, &spec).map_err(op_err)?
        }
        _ => manifest.images().collect(),
    };
    let eval = evaluate_images(&images, args.cutoff, args.iou).map_err(study_err)?;
    let row = eval.metric_row();
    write_out(&args.out, |out| {
        let io = |e: io::Error| CliError::Io(e.to_string());
        writeln!(out, "images {}", images.len()).map_err(io)?;
        writeln!(out, "ground_truths {}", eval.gt_count).map_err(io)?;
        writeln!(out, "true_positives {}", eval.counts.true_positives).map_err(io)?;
        writeln!(out, "false_positives {}", eval.counts.false_positives).map_err(io)?;
        writeln!(out, "false_negatives {}", eval.counts.false_negatives).map_err(io)?;
        writeln!(out, "precision {}", row.precision).map_err(io)?;
        writeln!(out, "recall {}", row.recall).map_err(io)?;
        writeln!(out, "f1 {}", row.f1).map_err(io)?;
        writeln!(out, "ap {}", row.ap).map_err(io)?;
        Ok(())
    })
}

fn cmd_study(args: &StudyArgs) -> Result<(), CliError> {
    let manifest = load_applied(&args.manifest, &args.detections)?;
    let split = load_split_file(&args.split)?;
    let fusion = FusionParams::new(args.theta).map_err(|e| CliError::Validation(e.to_string()))?;
    let config = StudyConfig {
        study_id: args.id,
        cutoff: args.cutoff,
        iou_threshold: args.iou,
        fusion,
        trials: args.trials,
        seed: args.seed,
        exposure_scope: if args.per_region_exposure {
            ExposureScope::PerRegion
        } else {
            ExposureScope::PerImage
        },
        aggregation: args.aggregation,
    };
    let report =
        run_study(&manifest, &split, &DetectionsSource::Provided, &config).map_err(study_err)?;
    write_out(&args.out_text, |out| {
        out.write_all(report.to_text().as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))
    })?;
    if let Some(csv_path) = &args.out_csv {
        write_atomic(csv_path, |out| {
            out.write_all(report.to_csv().as_bytes())
                .map_err(|e| CliError::Io(e.to_string()))
        })?;
    }
    Ok(())
}

fn cmd_plot(args: &PlotArgs) -> Result<(), CliError> {
    if args.out_csv.is_none() && args.out_svg.is_none() {
        return Err(CliError::Validation(
            "plot needs --out-csv and/or --out-svg".into(),
        ));
    }
    let manifest = load_manifest_file(&args.manifest)?;
    let grid = match &args.grid {
        Some(s) => parse_grid(s)?,
        None => default_threshold_grid(),
    };
    let mut curves = Vec::new();
    for spec in &args.curves {
        let (label, path) = spec.split_once('=').ok_or_else(|| {
            CliError::Validation(format!("bad --curve `{spec}`, expected label=path"))
        })?;
        let path = Path::new(path);
        let entries = load_detections(open(path)?).map_err(input_err(path))?;
        let applied = apply_detections(&manifest, &entries).map_err(op_err)?;
        let images: Vec<_> = applied.images().collect();
        let eval = evaluate_images(&images, 0.0, args.iou).map_err(study_err)?;
        curves.push(Curve {
            label: label.to_string(),
            points: pr_curve(&eval.scored, eval.gt_count, &grid),
        });
    }
    if let Some(csv_path) = &args.out_csv {
        write_atomic(csv_path, |out| write_pr_csv(&curves, out).map_err(plot_err))?;
    }
    if let Some(svg_path) = &args.out_svg {
        write_atomic(svg_path, |out| write_pr_svg(&curves, out).map_err(plot_err))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Validation("--threads must be >= 1".into()));
        }
        // ignore the error from re-initialization in tests
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match &cli.command {
        Command::DefaultConfig(args) => cmd_default_config(args),
        Command::Generate(args) => cmd_generate(args),
        Command::SimulateDetections(args) => cmd_simulate(args),
        Command::Split(args) => cmd_split(args),
        Command::Select(args) => cmd_select(args),
        Command::Fuse(args) => cmd_fuse(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Study(args) => cmd_study(args),
        Command::Plot(args) => cmd_plot(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}
