use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pog_core::forest::InputVariant;
use pog_core::pipeline::{
    cmd_classify, cmd_evaluate, cmd_generate, cmd_plan, cmd_templates, cmd_train_rf,
    cmd_train_sda, PipelineConfig, PogSource,
};
use pog_core::situation::TEMPLATE_SIZE;
use pog_core::Error;

/// Occupancy prediction pipeline: scene simulation, SDA compression, per-cell random
/// forests, situation classification and trajectory selection.
#[derive(Parser)]
#[command(name = "pog", version)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Settings applied on top of the JSON config (or the desk defaults).
#[derive(Args)]
struct Overrides {
    /// Pipeline config in JSON; only `seed` is required inside it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of scenes.
    #[arg(long, global = true)]
    count: Option<usize>,
    #[arg(long, global = true)]
    train_count: Option<usize>,
    /// Grid cells per side over the 40 m area.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// SDA training iterations (mini-batch updates) per layer.
    #[arg(long, global = true)]
    iterations: Option<usize>,
    /// Comma-separated SDA layer sizes.
    #[arg(long, global = true, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    #[arg(long, global = true)]
    trees: Option<usize>,
    #[arg(long, global = true)]
    min_leaf: Option<usize>,
    /// IDM warp radius.
    #[arg(long, global = true)]
    delta: Option<usize>,
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Planner candidate count.
    #[arg(long, global = true)]
    candidates: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolved configuration as JSON.
    Config,
    /// Sample scenes and write AOGs, ground-truth POGs and a manifest.
    Generate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the SDA stack on the training split.
    TrainSda {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one forest bank per prediction instant.
    TrainRf {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "raw")]
        variant: InputVariant,
        /// SDA model, required for the reduced variant.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the trained banks on the test split.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        banks: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Road class, constellations and relevance for one scenario file.
    Classify {
        scenario: PathBuf,
        #[arg(long)]
        templates: PathBuf,
        /// Print the JSON report instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Score EGO candidates on a scenario and pick the safe one.
    Plan {
        scenario: PathBuf,
        /// Use the model-based POGs instead of trained banks.
        #[arg(long, conflicts_with = "banks")]
        oracle: bool,
        #[arg(long, required_unless_present = "oracle")]
        banks: Option<PathBuf>,
        #[arg(long, default_value = "raw")]
        variant: InputVariant,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Directory for POG images with the selected footprint.
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Write the synthetic road-geometry template library.
    Templates {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = TEMPLATE_SIZE)]
        size: usize,
    },
}

fn config(o: &Overrides) -> Result<PipelineConfig, Error> {
    let mut cfg = match &o.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::new(o.seed.unwrap_or(1)),
    };
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(n) = o.count {
        cfg.dataset.count = n;
    }
    if let Some(n) = o.train_count {
        cfg.dataset.train_count = n;
    }
    if let Some(n) = o.grid {
        cfg.dataset.grid = pog_core::grid::GridSpec::square(n);
    }
    if let Some(n) = o.iterations {
        cfg.sda.train.max_iterations = n;
    }
    if let Some(l) = &o.layers {
        cfg.sda.layers = l.clone();
    }
    if let Some(n) = o.trees {
        cfg.forest.trees = n;
    }
    if let Some(n) = o.min_leaf {
        cfg.forest.min_samples_leaf = n;
    }
    if let Some(n) = o.delta {
        cfg.situation.delta = n;
    }
    if let Some(n) = o.k {
        cfg.situation.k = n;
    }
    if let Some(n) = o.candidates {
        cfg.planner.candidates = n;
    }
    let cfg = cfg.resolved();
    cfg.validate()?;
    Ok(cfg)
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report types serialize")
}

fn run(cli: Cli) -> Result<(), Error> {
    let cfg = config(&cli.overrides)?;
    match cli.command {
        Command::Config => println!("{}", json(&cfg)),
        Command::Generate { out } => {
            let m = cmd_generate(&cfg, &out)?;
            println!(
                "{} scenes ({} train, {} test), participants {:?} -> {}",
                m.scenes.len(),
                m.train_count,
                m.test_count,
                m.participant_histogram,
                out.display()
            );
        }
        Command::TrainSda { dataset, out } => {
            let m = cmd_train_sda(&cfg, &dataset, &out)?;
            println!(
                "layers {:?}, final losses {:?}, train reconstruction error {:.4}",
                cfg.sda.layers, m.final_loss, m.train_error
            );
        }
        Command::TrainRf {
            dataset,
            variant,
            model,
            out,
        } => {
            let (m, elapsed) = cmd_train_rf(&cfg, &dataset, model.as_deref(), variant, &out)?;
            let forests: Vec<usize> = m.banks.iter().map(|b| b.forests).collect();
            println!(
                "{variant}: input {} values, forests per instant {forests:?}, {:.2} s",
                m.input_len,
                elapsed.as_secs_f64()
            );
        }
        Command::Evaluate {
            dataset,
            banks,
            model,
            out,
        } => {
            let r = cmd_evaluate(&cfg, &dataset, &banks, model.as_deref(), &out)?;
            let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
            println!("variant   low     mid     high    all");
            for v in &r.variants {
                let o = &v.overall;
                println!("{:<9} {} {} {} {:.4}", v.variant, f(o.mean_low), f(o.mean_mid), f(o.mean_high), o.mean);
            }
            if let Some(rec) = &r.reconstruction {
                println!("reconstruction error {:.4} (mean |value| {:.4})", rec.mean_error, rec.mean_abs_value);
            }
        }
        Command::Classify {
            scenario,
            templates,
            json: as_json,
        } => {
            let r = cmd_classify(&cfg, &scenario, &templates)?;
            if as_json {
                println!("{}", json(&r));
            } else {
                print!("{}", r.to_text());
            }
        }
        Command::Plan {
            scenario,
            oracle,
            banks,
            variant,
            model,
            overlay,
            json: as_json,
        } => {
            let source = match (oracle, banks) {
                (true, _) => PogSource::Oracle,
                (false, Some(dir)) => PogSource::Banks { dir, variant, model },
                (false, None) => unreachable!("clap requires --banks without --oracle"),
            };
            let r = cmd_plan(&cfg, &scenario, &source, overlay.as_deref())?;
            if as_json {
                println!("{}", json(&r));
            } else {
                print!("{}", r.to_text());
            }
        }
        Command::Templates { out, size } => {
            let lib = cmd_templates(&out, size)?;
            println!("{} templates of {size}x{size} -> {}", lib.len(), Path::new(&out).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
