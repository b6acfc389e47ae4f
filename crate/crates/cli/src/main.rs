use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use falselabel::anneal::{trace_to_csv, AnnealTraceRow, InitMode};
use falselabel::dataset::Dataset;
use falselabel::diversity::{decompose, DecompositionReport};
use falselabel::ensemble::{build_false_label_ensemble_traced, EnsembleModel, FalseLabelConfig};
use falselabel::error::Error;
use falselabel::harness::{run_experiment, ExperimentConfig, ReportStatus};
use falselabel::hmrf::{EnergyWeights, ReferenceMode, VoteMode};
use falselabel::synth::generate_synthetic;

const USAGE: u8 = 1;
const DATA: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "falselabel", version, about = "Classifier ensembles from annealed false labellings")]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run an experiment described by a JSON config and write its reports.
    Run {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build one false-label ensemble and write its annealing trace as CSV.
    Trace {
        /// Dataset CSV.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "label")]
        label_column: String,
        /// Ensemble size L (odd, at least 3).
        #[arg(long, default_value_t = 5)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trace CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON file with `energy`, `schedule` and `init_mode` settings.
        #[arg(long)]
        settings: Option<PathBuf>,
        /// all_negative, copy_orig or random.
        #[arg(long, value_parser = parse_enum::<InitMode>)]
        init: Option<InitMode>,
        /// true_labels or orig_predictions.
        #[arg(long, value_parser = parse_enum::<ReferenceMode>)]
        reference_mode: Option<ReferenceMode>,
        /// target or paper_literal.
        #[arg(long, value_parser = parse_enum::<VoteMode>)]
        vote_mode: Option<VoteMode>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        window_radius: Option<usize>,
        /// Four comma-separated weights: ind,votes,bad,smooth.
        #[arg(long, value_parser = parse_weights)]
        weights: Option<EnergyWeights>,
        #[arg(long)]
        t_initial: Option<f64>,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        quotient: Option<f64>,
        #[arg(long)]
        flips_per_step: Option<usize>,
        /// Also save the trained ensemble as JSON.
        #[arg(long)]
        save_ensemble: Option<PathBuf>,
    },
    /// Write a two-cluster Gaussian dataset as CSV.
    Synth {
        /// Distance between the class centres.
        #[arg(long)]
        sep: f64,
        #[arg(long)]
        dims: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the diversity decomposition of a saved ensemble on a dataset.
    Decompose {
        /// Ensemble JSON written by `run` or `trace`.
        #[arg(long)]
        ensemble: PathBuf,
        /// Dataset CSV.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "label")]
        label_column: String,
    },
    /// Print the version.
    Version,
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_weights(s: &str) -> Result<EnergyWeights, String> {
    let w: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match w[..] {
        [ind, votes, bad, smooth] => Ok(EnergyWeights::new(ind, votes, bad, smooth)),
        _ => Err(format!("expected 4 weights, got {}", w.len())),
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) | Error::InvalidSchedule(_) | Error::InvalidEnsembleSize(_) => USAGE,
            _ => DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    if !path.is_file() {
        return Err(Failure::usage(format!("config file {} not found", path.display())));
    }
    ExperimentConfig::load(path).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> CliResult {
    let mut cfg = load_config(config)?;
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    let report = run_experiment(&cfg)?;
    println!("wrote {} runs to {}", report.records.len(), cfg.output_dir.display());
    if let ReportStatus::Ok(t) = &report.diff {
        if let Some(best) = t.recommended() {
            println!("recommended ensemble size: {best}");
        }
    }
    if let ReportStatus::Ok(f) = &report.friedman {
        println!("friedman statistic {:.4}, p = {:.4e}", f.statistic, f.p_value);
    }
    Ok(())
}

fn read_settings(path: &Path) -> Result<FalseLabelConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("settings file {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("settings file {}: {e}", path.display())))
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e).into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_synth(sep: f64, dims: usize, count: usize, seed: u64, out: &Path) -> CliResult {
    let d = generate_synthetic(sep, dims, count, seed).map_err(|e| Failure::usage(e.to_string()))?;
    d.write_csv(out)?;
    eprintln!("wrote {count} rows with {dims} features to {}", out.display());
    Ok(())
}

fn cmd_decompose(ensemble: &Path, data: &Path, label_column: &str) -> CliResult {
    let model = EnsembleModel::load(ensemble)?;
    let d = Dataset::load_csv(data, label_column)?;
    let report = decompose(&model.vote_profiles(&d)?)?;
    println!("{}", DecompositionReport::CSV_HEADER);
    println!("{}", report.to_csv_row());
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Trace {
            data,
            label_column,
            size,
            seed,
            out,
            settings,
            init,
            reference_mode,
            vote_mode,
            beta,
            window_radius,
            weights,
            t_initial,
            t_min,
            quotient,
            flips_per_step,
            save_ensemble,
        } => {
            let mut config = match &settings {
                Some(p) => read_settings(p)?,
                None => FalseLabelConfig::default(),
            };
            if let Some(v) = init {
                config.init_mode = v;
            }
            let e = &mut config.energy;
            e.reference_mode = reference_mode.unwrap_or(e.reference_mode);
            e.vote_mode = vote_mode.unwrap_or(e.vote_mode);
            e.beta = beta.unwrap_or(e.beta);
            e.window_radius = window_radius.unwrap_or(e.window_radius);
            e.weights = weights.unwrap_or(e.weights);
            let s = &mut config.schedule;
            s.t_initial = t_initial.unwrap_or(s.t_initial);
            s.t_min = t_min.unwrap_or(s.t_min);
            s.quotient = quotient.unwrap_or(s.quotient);
            s.flips_per_step = flips_per_step.unwrap_or(s.flips_per_step);
            config.energy.validate()?;
            config.schedule.validate()?;
            if size < 3 || size.is_multiple_of(2) {
                return Err(Error::InvalidEnsembleSize(size).into());
            }

            let d = Dataset::load_csv(&data, &label_column)?;
            let mut rows: Vec<AnnealTraceRow> = Vec::new();
            let mut hook = |r: &AnnealTraceRow| rows.push(r.clone());
            let build = build_false_label_ensemble_traced(&d, size, &config, seed, Some(&mut hook))?;
            write_output(out.as_deref(), &trace_to_csv(&rows))?;
            if let Some(last) = rows.last() {
                eprintln!(
                    "{} iterations, best energy {:.4}, accuracy {:.4}, mean |correlation| {:.4}",
                    build.anneal.iterations, build.anneal.best_energy, last.ensemble_accuracy, last.mean_abs_correlation
                );
            }
            if let Some(p) = save_ensemble {
                EnsembleModel::FalseLabel(build.ensemble).save(p)?;
            }
            Ok(())
        }
        Command::Synth {
            sep,
            dims,
            count,
            seed,
            out,
        } => cmd_synth(sep, dims, count, seed, &out),
        Command::Decompose {
            ensemble,
            data,
            label_column,
        } => cmd_decompose(&ensemble, &data, &label_column),
        Command::Version => {
            println!("falselabel {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
