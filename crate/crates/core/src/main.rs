use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use metasparse::bench::{self, ExperimentSpec, Method};
use metasparse::error::{Error, Result};
use metasparse::meta::{fit_novel_task, DEFAULT_C};
use metasparse::realdata::{self, PlantedConfig, RealSpec};
use metasparse::synth::{generate_with_novel_samples, GenConfig};
use metasparse::{io, SolverOptions};

#[derive(Parser)]
#[command(name = "metasparse", version, about = "Pooled sparse support recovery across few-sample regression tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TuneMethod {
    Meta,
    Group,
    Dirty,
}

impl From<TuneMethod> for Method {
    fn from(m: TuneMethod) -> Method {
        match m {
            TuneMethod::Meta => Method::Meta,
            TuneMethod::Group => Method::GroupLasso,
            TuneMethod::Dirty => Method::DirtyModel,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Phase curve of one method over a sweep.
    Phase {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Meta method, group lasso and dirty model on shared draws.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generates a dataset directory from a generator configuration.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Samples in the novel task (default: l).
        #[arg(long)]
        l_novel: Option<usize>,
    },
    /// Fits the novel task of a dataset restricted to a given support.
    Novel {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        support: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Multiplier of the novel-task penalty rate.
        #[arg(long, default_value_t = DEFAULT_C)]
        c: f64,
        /// Keep the restricted-lasso weights instead of refitting.
        #[arg(long)]
        no_refit: bool,
    },
    /// Support estimation and novel-task error on an expression table.
    Realdata {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "EGR2")]
        response: String,
        #[arg(long, default_value_t = 5)]
        l: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 30)]
        evals: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Z-score covariates with pooled training statistics.
        #[arg(long)]
        standardize: bool,
    },
    /// Support-stage hyperparameter search for one method.
    Tune {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_enum)]
        method: TuneMethod,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "EGR2")]
        response: String,
        #[arg(long, default_value_t = 5)]
        l: usize,
        #[arg(long, default_value_t = 30)]
        evals: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        standardize: bool,
    },
    /// Writes the planted-model expression table.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = PlantedConfig::default().seed)]
        seed: u64,
    },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_json(value: &serde_json::Value, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("json value serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Phase { config, out } => {
            let spec = ExperimentSpec::from_json(&read_text(&config)?)?;
            let records = bench::run_phase(&spec)?;
            bench::write_csv(&records, &out)?;
            info!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Compare { config, out } => {
            let spec = ExperimentSpec::from_json(&read_text(&config)?)?;
            let records = bench::run_compare(&spec)?;
            bench::write_csv(&records, &out)?;
            info!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Synth { config, out, l_novel } => {
            let cfg = GenConfig::from_json(&read_text(&config)?)?;
            let w_star = cfg.true_weights()?;
            let (data, truth) = generate_with_novel_samples(&cfg, &w_star, l_novel.unwrap_or(cfg.l))?;
            io::write_dataset(&data, Some(&truth), Some(&cfg), &out)?;
        }
        Command::Novel { dataset, support, out, c, no_refit } => {
            let data = io::read_dataset(&dataset)?;
            let support = io::read_support_csv(&support, data.p)?;
            let mut report = fit_novel_task(&data.novel_task, &support, c, !no_refit, &SolverOptions::default())?;
            if let Some(truth) = io::read_truth(&dataset)? {
                report = report.with_truth(&truth);
            }
            let value = serde_json::to_value(&report).expect("report serializes");
            write_json(&value, &out)?;
        }
        Command::Realdata { csv, response, l, out, reps, evals, seed, standardize } => {
            let table = realdata::load_expression_csv(&csv, &response)?;
            let spec = RealSpec {
                response_name: response,
                l,
                train_tasks: table.timepoint_count().saturating_sub(1).max(1),
                search_evals: evals,
                outer_reps: reps,
                master_seed: seed,
                standardize,
                ..RealSpec::default()
            };
            let records = realdata::run_realdata(&table, &spec, bench::workers_from_env())?;
            realdata::write_real_csv(&records, &out)?;
        }
        Command::Tune { csv, method, out, response, l, evals, seed, standardize } => {
            let table = realdata::load_expression_csv(&csv, &response)?;
            let spec = RealSpec {
                response_name: response,
                l,
                train_tasks: table.timepoint_count().saturating_sub(1).max(1),
                search_evals: evals,
                master_seed: seed,
                standardize,
                ..RealSpec::default()
            };
            let report = realdata::tune_method(&table, &spec, method.into())?;
            let mut value = serde_json::to_value(&report).expect("report serializes");
            value["search_range"] = json!([spec.search_range.0, spec.search_range.1]);
            write_json(&value, &out)?;
        }
        Command::Fixture { out, seed } => {
            let table = realdata::planted_table(&PlantedConfig { seed, ..PlantedConfig::default() })?;
            realdata::write_expression_csv(&table, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } | Error::Parse { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
