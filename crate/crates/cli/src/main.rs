use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use foodsynth::coco::{read_dataset, read_results, write_annotations};
use foodsynth::eval::{evaluate, EvalConfig, IouType};
use foodsynth::generate::generate_dataset;
use foodsynth::protocol::{dataset_stats, split_dataset, SplitSpec, SplitUnit};
use foodsynth::randomizer::{DifficultySetting, GenConfig};

/// Exit code for invalid input data (bad files, bad values).
const DATA_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "foodsynth", version, about = "Synthetic meal-tray datasets and COCO-style evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Difficulty {
    Easy,
    Medium,
    Hard,
    Mixed,
}

impl From<Difficulty> for DifficultySetting {
    fn from(d: Difficulty) -> Self {
        match d {
            Difficulty::Easy => DifficultySetting::Easy,
            Difficulty::Medium => DifficultySetting::Medium,
            Difficulty::Hard => DifficultySetting::Hard,
            Difficulty::Mixed => DifficultySetting::Mixed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Unit {
    PerInstance,
    PerImage,
}

#[derive(Clone, Copy, ValueEnum)]
enum IouArg {
    Mask,
    Bbox,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Render a dataset of random scenes.
    Generate {
        /// JSON generation config; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        difficulty: Option<Difficulty>,
        #[arg(long)]
        width: Option<u32>,
        #[arg(long)]
        height: Option<u32>,
    },
    /// Split a dataset into train.json and test.json.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        train_frac: f64,
        #[arg(long, value_enum, default_value = "per-instance")]
        unit: Unit,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to the directory of the input file.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Score a results file against ground truth.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_enum, default_value = "mask")]
        iou_type: IouArg,
        /// IoU used for non-maximum suppression.
        #[arg(long, value_enum, default_value = "bbox")]
        nms_iou_type: IouArg,
        /// Write the JSON report here (a list when both IoU types are evaluated).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print dataset statistics as JSON.
    Stats {
        #[arg(long)]
        input: PathBuf,
    },
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn run_generate(
    config: Option<&Path>,
    count: usize,
    seed: u64,
    out: &Path,
    difficulty: Option<Difficulty>,
    size: (Option<u32>, Option<u32>),
) -> CliResult {
    let mut cfg = match config {
        Some(p) => GenConfig::from_json_file(p)?,
        None => GenConfig::default(),
    };
    if let Some(d) = difficulty {
        cfg.difficulty = d.into();
    }
    if let Some(w) = size.0 {
        cfg.image_size[0] = w;
    }
    if let Some(h) = size.1 {
        cfg.image_size[1] = h;
    }
    let (path, summary) = generate_dataset(&cfg, count, seed, out, |done, total| {
        eprint!("\rrendered {done}/{total}");
        if done == total {
            eprintln!();
        }
    })?;
    eprintln!("wrote {}", path.display());
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn run_split(input: &Path, train_fraction: f64, unit: Unit, seed: u64, out_dir: Option<&Path>) -> CliResult {
    let dataset = read_dataset(input)?;
    let unit = match unit {
        Unit::PerInstance => SplitUnit::PerInstance,
        Unit::PerImage => SplitUnit::PerImage,
    };
    let split = split_dataset(&dataset, &SplitSpec { train_fraction, unit, seed })?;
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| {
        input.parent().map(Path::to_path_buf).unwrap_or_default()
    });
    std::fs::create_dir_all(&dir)?;
    for (name, part) in [("train.json", &split.train), ("test.json", &split.test)] {
        write_annotations(part, dir.join(name))?;
        println!("{name}: {} images, {} instances", part.images.len(), part.annotations.len());
    }
    Ok(())
}

fn iou_types(arg: IouArg) -> Vec<IouType> {
    match arg {
        IouArg::Mask => vec![IouType::Mask],
        IouArg::Bbox => vec![IouType::Bbox],
        IouArg::Both => vec![IouType::Mask, IouType::Bbox],
    }
}

fn run_evaluate(gt: &Path, pred: &Path, iou: IouArg, nms_iou: IouArg, report: Option<&Path>) -> CliResult {
    let nms_iou_type = match nms_iou {
        IouArg::Mask => IouType::Mask,
        IouArg::Bbox => IouType::Bbox,
        IouArg::Both => return Err("--nms-iou-type must be mask or bbox".into()),
    };
    let dataset = read_dataset(gt)?;
    let dets = read_results(pred)?;
    let mut summaries = Vec::new();
    for iou_type in iou_types(iou) {
        let config = EvalConfig { iou_type, nms_iou_type, ..EvalConfig::default() };
        let r = evaluate(&dataset, &dets, &config)?;
        print!("{}", r.table());
        summaries.push(r.summary_json());
    }
    if let Some(path) = report {
        let value = if summaries.len() == 1 { summaries.remove(0) } else { summaries.into() };
        std::fs::write(path, serde_json::to_string_pretty(&value)? + "\n")?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Generate { config, count, seed, out, difficulty, width, height } => {
            run_generate(config.as_deref(), count, seed, &out, difficulty, (width, height))
        }
        Command::Split { input, train_frac, unit, seed, out_dir } => {
            run_split(&input, train_frac, unit, seed, out_dir.as_deref())
        }
        Command::Evaluate { gt, pred, iou_type, nms_iou_type, report } => {
            run_evaluate(&gt, &pred, iou_type, nms_iou_type, report.as_deref())
        }
        Command::Stats { input } => {
            let stats = dataset_stats(&read_dataset(&input)?);
            println!("{}", serde_json::to_string_pretty(&stats)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(DATA_ERROR)
        }
    }
}
