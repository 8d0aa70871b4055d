//! `blobtrack` — batch multi-object tracking over frame sequences.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blobtrack::config::PipelineConfig;
use blobtrack::error::Error;
use blobtrack::evaluation::{score, EvalReport};
use blobtrack::frame_io::{load_box_records, save_box_records, write_frame_png};
use blobtrack::pipeline;
use blobtrack::synth::{render, SceneScript};

#[derive(Parser)]
#[command(
    name = "blobtrack",
    version,
    about = "Track moving objects across fixed-camera frame sequences",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: segment, clean, extract features, track.
    Run(RunArgs),
    /// Score a track CSV against ground truth.
    Evaluate(EvaluateArgs),
    /// Render a synthetic scene script into frames plus ground truth.
    Generate(GenerateArgs),
    /// Write per-frame motion masks without tracking.
    Segment(SegmentArgs),
    /// Write the per-blob feature table without tracking.
    Features(FeaturesArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Single override, e.g. --set tracker.k_miss=2 (repeatable; applied
    /// after the config file).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn build(&self) -> Result<PipelineConfig, Error> {
        let mut config = PipelineConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            config.apply_text(&text)?;
        }
        for spec in &self.set {
            config.apply_set(spec)?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct RunArgs {
    /// Directory of sequence frames (sorted by file name).
    #[arg(long, value_name = "DIR", required_unless_present = "print_config")]
    input: Option<PathBuf>,
    /// Output directory for tracks.csv and other artifacts.
    #[arg(long, value_name = "DIR", required_unless_present = "print_config")]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// Also write per-frame cleaned masks (masks/).
    #[arg(long)]
    emit_masks: bool,
    /// Also write the per-blob feature table (features.csv).
    #[arg(long)]
    emit_features: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Tracker output CSV (frame_index,id,x,y,w,h).
    #[arg(long, value_name = "FILE")]
    tracks: PathBuf,
    /// Ground-truth CSV in the same format.
    #[arg(long, value_name = "FILE")]
    gt: PathBuf,
    /// Overlap required to count a box as observing an object; in (0, 1].
    #[arg(long, value_name = "F", default_value_t = 0.5)]
    iou_threshold: f64,
    /// Dataset name for the report row (defaults to the tracks file stem).
    #[arg(long, value_name = "NAME")]
    dataset: Option<String>,
    /// Scene name for the report row.
    #[arg(long, value_name = "NAME", default_value = "-")]
    scene: String,
    /// Also write the report as CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Scene script of `key = value` lines.
    #[arg(long, value_name = "FILE")]
    script: PathBuf,
    /// Noise seed; the same script and seed render identical bytes.
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    /// Output directory; receives frame_NNNNNN.png files and gt.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct SegmentArgs {
    /// Directory of sequence frames.
    #[arg(long, value_name = "DIR")]
    input: PathBuf,
    /// Output directory for mask_NNNNNN.png files.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Write raw segmentation output instead of cleaned masks.
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Directory of sequence frames.
    #[arg(long, value_name = "DIR")]
    input: PathBuf,
    /// Output CSV path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Generate(args) => generate(args),
        Command::Segment(args) => segment(args),
        Command::Features(args) => features(args),
    }
}

fn run(args: RunArgs) -> Result<(), Error> {
    let mut config = args.config.build()?;
    config.output.masks |= args.emit_masks;
    config.output.features |= args.emit_features;
    if args.print_config {
        print!("{}", config.to_config_string());
        return Ok(());
    }
    // Present unless --print-config, enforced by clap.
    let input = args.input.expect("clap requires --input");
    let out = args.out.expect("clap requires --out");
    let summary = pipeline::run(&input, &out, &config)?;
    println!(
        "Processed {} frames; {} track rows ({} identities) -> {}",
        summary.frames,
        summary.track_rows,
        summary.tracks_created,
        summary.tracks_csv.display()
    );
    print!("{}", summary.timing.render());
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<(), Error> {
    if !(args.iou_threshold > 0.0 && args.iou_threshold <= 1.0) {
        return Err(Error::Usage(format!(
            "--iou-threshold must lie in (0, 1], got {}",
            args.iou_threshold
        )));
    }
    let tracks = load_box_records(&args.tracks)?;
    let gt = load_box_records(&args.gt)?;
    let sequence_score = score(&tracks.records, &gt, args.iou_threshold);
    let dataset = args.dataset.unwrap_or_else(|| {
        args.tracks
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "tracks".to_string())
    });
    let report = EvalReport::from_scores(vec![(dataset, args.scene, sequence_score)]);
    print!("{}", report.to_text());
    println!(
        "correspondences: {} established, {} correct, {} actual",
        sequence_score.established, sequence_score.correct, sequence_score.actual
    );
    if let Some(path) = &args.csv {
        blobtrack::frame_io::write_text_file(path, &report.to_csv())?;
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&args.script).map_err(|source| Error::Io {
        path: args.script.clone(),
        source,
    })?;
    let script = SceneScript::parse(&text)?;
    let (frames, gt) = render(&script, args.seed)?;
    fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    for frame in &frames {
        let name = format!("frame_{:06}.png", frame.index());
        write_frame_png(frame, &args.out.join(name))?;
    }
    save_box_records(&gt.records, &args.out.join("gt.csv"))?;
    println!(
        "Rendered {} frames, {} ground-truth records -> {}",
        frames.len(),
        gt.records.len(),
        args.out.display()
    );
    Ok(())
}

fn segment(args: SegmentArgs) -> Result<(), Error> {
    let config = args.config.build()?;
    let count = pipeline::segment(&args.input, &args.out, &config, args.raw)?;
    println!("Wrote {} masks -> {}", count, args.out.display());
    Ok(())
}

fn features(args: FeaturesArgs) -> Result<(), Error> {
    let config = args.config.build()?;
    let rows = pipeline::feature_report(&args.input, &args.out, &config)?;
    println!("Wrote {} feature rows -> {}", rows, args.out.display());
    Ok(())
}
