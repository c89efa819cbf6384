use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use litenet::config::{load_config_file, DataSource, PipelineConfig};
use litenet::evaluation::{acf, execution_bench, latency_bench, sweep_experiment, SweepAxis};
use litenet::litenet::{load_model, save_model};
use litenet::market_data::{make_windows, write_bar_csv, BarSeries};
use litenet::mutual_info::run_selection;
use litenet::pipeline::{build_features, load_series, run_pipeline, split_chronological};

const CONFIG_ENV: &str = "LITENET_CONFIG";

#[derive(Parser, Debug)]
#[command(name = "litenet", version, about = "Feature selection, training and benchmarking for LiteNet")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Pipeline config file. Falls back to $LITENET_CONFIG, then built-in defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct DataArg {
    /// Bar CSV. Defaults to the config's data source.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic bar series.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Cluster features and print the selection report for the training split.
    Select {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Train a model, write the artifact and print held-out metrics.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Print one prediction per window of the data.
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Time inference for a trained model.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Timed repetitions; defaults to `[bench] reps`.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        reps: Option<u64>,
        #[arg(long)]
        warmup: Option<u64>,
        #[arg(long, value_enum, default_value_t = Kind::Latency)]
        kind: Kind,
        /// Appends a key=value record of the report.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Autocorrelation of bar returns.
    Acf {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value_t = 20)]
        max_lag: usize,
        /// Writes `lag,acf` rows.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Rerun the pipeline across window sizes or MI thresholds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        #[arg(long, value_delimiter = ',', conflicts_with = "thresholds", required_unless_present = "thresholds")]
        windows: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// Network forward pass on prepared inputs.
    Latency,
    /// Feature extraction from bars through denormalized prediction.
    Execution,
}

#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    match e.downcast_ref::<litenet::Error>() {
        Some(litenet::Error::Degenerate(_)) => 3,
        _ => 2,
    }
}

fn config(common: &Common, data: Option<&DataArg>) -> Result<PipelineConfig> {
    let path =
        common.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
    let mut cfg = match path {
        Some(p) => load_config_file(&p).with_context(|| format!("config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(p) = data.and_then(|d| d.data.clone()) {
        cfg.data = DataSource::Csv(p);
    }
    Ok(cfg)
}

fn series(cfg: &PipelineConfig) -> Result<BarSeries> {
    load_series(cfg).with_context(|| match &cfg.data {
        DataSource::Csv(p) => format!("reading {}", p.display()),
        DataSource::Synthetic => "generating synthetic bars".to_string(),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, contents),
        None => {
            io::stdout().write_all(contents.as_bytes())?;
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<String> {
    match command {
        Command::Synth { common, out } => {
            let cfg = config(&common, None)?;
            let bars = litenet::market_data::generate_synthetic(&cfg.synth)?;
            let file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut w = BufWriter::new(file);
            write_bar_csv(&bars, &mut w)?;
            w.flush()?;
            Ok(format!("wrote {} bars to {}", bars.len(), out.display()))
        }
        Command::Select { common, data, out } => {
            let cfg = config(&common, Some(&data))?;
            cfg.validate()?;
            let fm = build_features(&series(&cfg)?, &cfg)?;
            let split = split_chronological(&fm, cfg.features.window, cfg.features.horizon)?;
            let report = run_selection(&split.train, &cfg.selection, 0)?;
            emit(out.as_deref(), &report.to_table())?;
            Ok(format!("selected {}", report.selected_names().join(",")))
        }
        Command::Train { common, data, out } => {
            let cfg = config(&common, Some(&data))?;
            let fm = build_features(&series(&cfg)?, &cfg)?;
            let run = run_pipeline(&fm, &cfg)?;
            save_model(&run.model, &out).with_context(|| format!("writing {}", out.display()))?;
            print!("{}", run.metrics.to_table());
            Ok(format!("wrote model to {}", out.display()))
        }
        Command::Predict { common, data, model, out } => {
            let cfg = config(&common, Some(&data))?;
            let model = load_model(&model).with_context(|| format!("reading {}", model.display()))?;
            let fm = model.features.build(&series(&cfg)?)?;
            let windows = make_windows(fm, model.window())?;
            let preds = model.predict_windows(&windows)?;
            let mut text = String::with_capacity(preds.len() * 24);
            for p in &preds {
                text.push_str(&p.to_string());
                text.push('\n');
            }
            emit(out.as_deref(), &text)?;
            Ok(format!("{} predictions", preds.len()))
        }
        Command::Bench { common, data, model, reps, warmup, kind, out } => {
            let cfg = config(&common, Some(&data))?;
            let reps = match reps {
                Some(r) => r as usize,
                None => cfg.bench.reps,
            };
            if reps == 0 {
                return Err(Usage("reps must be at least 1".into()).into());
            }
            let warmup = warmup.map_or(cfg.bench.warmup, |w| w as usize);
            let model = load_model(&model).with_context(|| format!("reading {}", model.display()))?;
            let bars = series(&cfg)?;
            let report = match kind {
                Kind::Latency => {
                    let windows = make_windows(model.features.build(&bars)?, model.window())?;
                    latency_bench(&model, &windows, reps, warmup)?
                }
                Kind::Execution => execution_bench(&model, &bars, reps, warmup)?,
            };
            print!("{}", report.to_table());
            if let Some(p) = out {
                let mut f = fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&p)
                    .with_context(|| format!("opening {}", p.display()))?;
                f.write_all(report.to_record().as_bytes())?;
            }
            Ok(format!("checksum {:016x}", report.checksum))
        }
        Command::Acf { common, data, max_lag, out } => {
            let cfg = config(&common, Some(&data))?;
            let report = acf(&series(&cfg)?.returns(), max_lag)?;
            print!("{}", report.to_table());
            if let Some(p) = out {
                write_file(&p, &report.to_csv())?;
            }
            Ok(format!("acf over {} returns", report.n))
        }
        Command::Sweep { common, data, windows, thresholds, out } => {
            let cfg = config(&common, Some(&data))?;
            let axis = if windows.is_empty() { SweepAxis::Threshold(thresholds) } else { SweepAxis::Window(windows) };
            let fm = build_features(&series(&cfg)?, &cfg)?;
            let table = sweep_experiment(&fm, &axis, &cfg)?;
            print!("{}", table.to_table());
            if let Some(p) = out {
                write_file(&p, &table.to_csv())?;
            }
            Ok(format!("{} sweep rows", table.rows.len()))
        }
    }
}
