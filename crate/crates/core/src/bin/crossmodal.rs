use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crossmodal_core::classify::TrainedModel;
use crossmodal_core::cloudkit::equalize;
use crossmodal_core::descriptors::DescriptorKind;
use crossmodal_core::pipeline::io::{load_cloud, save_cloud, write_atomic};
use crossmodal_core::pipeline::{
    cmr_train_files, default_grid, describe_cloud, generate_dataset, recognize, render_tables, run_benchmark,
    tlcmr_train_files, AdaptMethod, BenchmarkGrid, ClassifierConfig, DatasetManifest, FsReader, GenerationParams,
    PipelineConfig, PipelineError, RESULTS_FILE,
};
use crossmodal_core::synthlab::class_name;

#[derive(Parser)]
#[command(name = "crossmodal", version, about = "Visuo-tactile cross-modal object recognition")]
struct Cli {
    /// Seed for every stochastic step (overrides config files).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pipeline config (TOML); defaults to $CROSSMODAL_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Flags mirroring the pipeline config; each overrides the loaded value.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    descriptor: Option<DescriptorKind>,
    /// `1nn`, `3nn`, `svm_linear`, `svm_rbf`, ...
    #[arg(long)]
    classifier: Option<ClassifierConfig>,
    /// Skip equalization.
    #[arg(long)]
    no_preprocessing: bool,
    #[arg(long)]
    esf_samples: Option<usize>,
    /// `none`, `pca` or `gfk`.
    #[arg(long)]
    adaptation: Option<AdaptMethod>,
    /// Subspace dimension for pca/gfk.
    #[arg(long)]
    dim: Option<usize>,
    /// Disable per-domain standardization before adaptation.
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its manifest.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 15)]
        classes: usize,
        #[arg(long, default_value_t = 40)]
        visual_per_class: usize,
        #[arg(long, default_value_t = 5)]
        tactile_per_class: usize,
    },
    /// Equalize one cloud file.
    Equalize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Print (or write) the descriptor of one cloud file.
    Describe {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train on the visual clouds of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train on visual clouds adapted to the unlabeled tactile clouds.
    AdaptTrain {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Classify one cloud file with a trained model.
    Recognize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the benchmark grid and write CSV reports.
    Benchmark {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Benchmark grid (TOML); defaults to the standard grid around the config.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Print the result tables of a benchmark output directory.
    Report {
        #[arg(long)]
        results: PathBuf,
    },
}

fn config(cli: &Cli, overrides: Option<&Overrides>) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = PipelineConfig::resolve(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(o) = overrides {
        if let Some(d) = o.descriptor {
            cfg.descriptor = d;
        }
        if let Some(c) = o.classifier {
            cfg.classifier = c;
        }
        if o.no_preprocessing {
            cfg.preprocessing = false;
        }
        if let Some(n) = o.esf_samples {
            cfg.esf_samples = n;
        }
        if let Some(a) = o.adaptation {
            cfg.adaptation.method = a;
        }
        if let Some(d) = o.dim {
            cfg.adaptation.dim = d;
        }
        if o.no_standardize {
            cfg.adaptation.standardize = false;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn save_model(path: &Path, model: &TrainedModel) -> Result<(), PipelineError> {
    let json = model.to_json().map_err(|e| PipelineError::Config(e.to_string()))?;
    write_atomic(path, json.as_bytes())
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    match &cli.command {
        Command::Generate {
            out,
            classes,
            visual_per_class,
            tactile_per_class,
        } => {
            let params = GenerationParams {
                seed: cli.seed.unwrap_or(GenerationParams::default().seed),
                classes: *classes,
                visual_per_class: *visual_per_class,
                tactile_per_class: *tactile_per_class,
                first_pose_count: visual_per_class / 2,
                ..GenerationParams::default()
            };
            let m = generate_dataset(out, &params)?;
            let n: usize = m.classes.iter().map(|c| c.visual.len() + c.tactile.len()).sum();
            println!("wrote {n} clouds and {}", out.join("manifest.toml").display());
        }
        Command::Equalize { input, output } => {
            let cfg = config(cli, None)?;
            let cloud = load_cloud(input)?;
            let eq = equalize(&cloud, &cfg.equalization)?;
            save_cloud(output, &eq)?;
            println!("{} -> {} points", cloud.len(), eq.len());
        }
        Command::Describe {
            input,
            output,
            overrides,
        } => {
            let cfg = config(cli, Some(overrides))?;
            let d = describe_cloud(&load_cloud(input)?, &cfg)?;
            let line = d.values().iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ") + "\n";
            match output {
                Some(p) => write_atomic(p, line.as_bytes())?,
                None => print!("{line}"),
            }
        }
        Command::Train {
            manifest,
            model,
            overrides,
        } => {
            let cfg = config(cli, Some(overrides))?;
            let m = cmr_train_files(&DatasetManifest::load(manifest)?, &FsReader, &cfg)?;
            save_model(model, &m)?;
            println!("model ({}) written to {}", m.classifier.describe(), model.display());
        }
        Command::AdaptTrain {
            manifest,
            model,
            overrides,
        } => {
            let mut cfg = config(cli, Some(overrides))?;
            if cfg.adaptation.method == AdaptMethod::None {
                cfg.adaptation.method = AdaptMethod::Gfk;
            }
            let m = tlcmr_train_files(&DatasetManifest::load(manifest)?, &FsReader, &cfg)?;
            save_model(model, &m)?;
            println!("model ({}, {}) written to {}", m.classifier.describe(), cfg.adaptation.method, model.display());
        }
        Command::Recognize { model, input } => {
            let text = std::fs::read_to_string(model).map_err(|e| PipelineError::Io {
                path: model.display().to_string(),
                msg: e.to_string(),
            })?;
            let m = TrainedModel::from_json(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
            let label = recognize(&m, &load_cloud(input)?)?;
            match class_name(label.0) {
                Some(name) => println!("{label} {name}"),
                None => println!("{label}"),
            }
        }
        Command::Benchmark { manifest, out, grid } => {
            let cfg = config(cli, None)?;
            let grid = match grid {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| PipelineError::Io {
                        path: p.display().to_string(),
                        msg: e.to_string(),
                    })?;
                    BenchmarkGrid::from_toml(&text)?
                }
                None => default_grid(&cfg),
            };
            let report = run_benchmark(&DatasetManifest::load(manifest)?, &FsReader, &grid)?;
            report.write(out)?;
            print!("{}", render_tables(&report.results_csv())?);
            if !report.failures.is_empty() {
                eprintln!("{} run(s) failed; see failures.txt", report.failures.len());
            }
        }
        Command::Report { results } => {
            let file = if results.is_dir() { results.join(RESULTS_FILE) } else { results.clone() };
            let text = std::fs::read_to_string(&file).map_err(|e| PipelineError::Io {
                path: file.display().to_string(),
                msg: e.to_string(),
            })?;
            print!("{}", render_tables(&text)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
