//! Command-line front end: load scenario files, run the model, export
//! CSV/JSON tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use beliefrank::attribution::{
    Coefficients, FactorSelection, GridResolution, DEFAULT_BOOTSTRAP_LEVEL,
    DEFAULT_BOOTSTRAP_RESAMPLES, DEFAULT_EPSILON,
};
use beliefrank::pipeline::{
    analyze, fit_to_human, load_inputs, rank, simulate, write_factors_csv, write_factors_json,
    write_fit_csv, write_fit_json, write_oracle_csv, write_oracle_json, write_rank_csv,
    write_rank_json, write_simulate_csv, write_simulate_json, FitSettings, ScenarioAnalysis,
};
use beliefrank::scenario::{load_human_rankings, load_scenario, Scenario};
use beliefrank::{oracle, Error};

#[derive(Parser)]
#[command(
    name = "beliefrank",
    version,
    about = "Rank belief statements about an agent in a keys-and-doors gridworld"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay the trajectory and print the observer-visible state per step
    Simulate {
        /// Scenario file
        scenario: PathBuf,
        #[command(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Compute each statement's accuracy, informativity, and causal factors
    Factors {
        /// Scenario file
        scenario: PathBuf,
        /// Listener whose belief change the `info` column measures
        #[arg(long, value_enum, default_value_t = Listener::SeesEnv)]
        listener: Listener,
        #[command(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Score and rank the statements under chosen factors and coefficients
    Rank {
        /// Scenario file
        scenario: PathBuf,
        /// Comma-separated factor subset: any of `acc`, `info`, `info*`,
        /// `causal`
        #[arg(long)]
        factors: String,
        /// Coefficient override, repeatable: `acc=1.5`, `info=0.6`,
        /// `cnecc=2`, `csuff=0.5` (unset coefficients stay 1)
        #[arg(long = "alpha", value_name = "NAME=VALUE")]
        alpha: Vec<String>,
        /// Floor inside logarithms
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[command(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Fit coefficients to human rankings by grid search
    Fit {
        /// Manifest listing scenario files (or a single scenario file)
        manifest: PathBuf,
        /// Human rankings CSV with columns `scenario_id, participant_id,
        /// statement_id, rank`
        human: PathBuf,
        /// Comma-separated factor subset to fit
        #[arg(long)]
        factors: String,
        /// Grid-search resolution
        #[arg(long, value_enum, default_value_t = Grid::Fine)]
        grid: Grid,
        /// Floor inside logarithms
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        /// Bootstrap seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Bootstrap resample count
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_RESAMPLES)]
        resamples: usize,
        /// Bootstrap confidence level
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_LEVEL)]
        level: f64,
        #[command(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Cross-check the pipeline against brute-force recomputation
    Oracle {
        /// Scenario file (or a manifest of scenarios)
        scenario: PathBuf,
        /// Refuse hypothesis spaces larger than this
        #[arg(long, default_value_t = oracle::DEFAULT_MAX_ATOMS)]
        max_atoms: usize,
        #[command(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        output: OutputOpts,
    },
}

/// Overrides for model parameters the scenario file also sets.
#[derive(Args)]
struct ModelOpts {
    /// Softness of the agent's action choices (0 = indifferent)
    #[arg(long)]
    beta: Option<f64>,
    /// Planning cost charged when the chest is unreachable
    #[arg(long)]
    unreachable_penalty: Option<f64>,
    /// Degree-of-belief threshold for `believes`
    #[arg(long)]
    theta_believes: Option<f64>,
    /// Degree-of-belief threshold for `knows`
    #[arg(long)]
    theta_knows: Option<f64>,
    /// Degree-of-belief threshold for `certain`
    #[arg(long)]
    theta_certain: Option<f64>,
}

#[derive(Args)]
struct OutputOpts {
    /// Write to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Listener {
    /// Watched the whole trajectory and its observations
    SeesEnv,
    /// Knows the map but saw nothing the agent did
    Ignorant,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Grid {
    Coarse,
    Fine,
}

impl From<Grid> for GridResolution {
    fn from(g: Grid) -> Self {
        match g {
            Grid::Coarse => GridResolution::Coarse,
            Grid::Fine => GridResolution::Fine,
        }
    }
}

fn apply_model_opts(sc: &mut Scenario, opts: &ModelOpts) -> Result<(), Error> {
    if let Some(beta) = opts.beta {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "--beta must be finite and nonnegative, got {beta}"
            )));
        }
        sc.params.beta = beta;
    }
    if let Some(penalty) = opts.unreachable_penalty {
        if !penalty.is_finite() || penalty <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "--unreachable-penalty must be finite and positive, got {penalty}"
            )));
        }
        sc.params.unreachable_penalty = penalty;
    }
    if let Some(t) = opts.theta_believes {
        sc.thresholds.believes = t;
    }
    if let Some(t) = opts.theta_knows {
        sc.thresholds.knows = t;
    }
    if let Some(t) = opts.theta_certain {
        sc.thresholds.certain = t;
    }
    sc.thresholds.validate()
}

/// Parses repeatable `name=value` coefficient overrides.
fn parse_alphas(pairs: &[String], epsilon: f64) -> Result<Coefficients, Error> {
    let mut coeffs = Coefficients {
        epsilon,
        ..Coefficients::default()
    };
    for pair in pairs {
        let (name, value) = pair.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("--alpha expects NAME=VALUE, got `{pair}`"))
        })?;
        let value: f64 = value.trim().parse().map_err(|_| {
            Error::InvalidArgument(format!("--alpha {name}: `{value}` is not a number"))
        })?;
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "--alpha {name} must be finite and nonnegative, got {value}"
            )));
        }
        match name.trim() {
            "acc" => coeffs.accuracy = value,
            "info" => coeffs.informativity = value,
            "cnecc" => coeffs.necessity = value,
            "csuff" => coeffs.sufficiency = value,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown coefficient `{other}` (expected acc, info, cnecc, or csuff)"
                )))
            }
        }
    }
    Ok(coeffs)
}

/// Runs `write` against `--out` or stdout.
fn emit(
    output: &OutputOpts,
    write: impl FnOnce(&mut dyn Write) -> Result<(), Error>,
) -> Result<(), Error> {
    match &output.out {
        Some(path) => {
            let mut file = BufWriter::new(File::create(path)?);
            write(&mut file)?;
            file.flush().map_err(Error::from)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)
        }
    }
}

fn load_one(path: &PathBuf, model: &ModelOpts) -> Result<Scenario, Error> {
    let mut sc = load_scenario(path)?;
    apply_model_opts(&mut sc, model)?;
    Ok(sc)
}

fn load_many(path: &PathBuf, model: &ModelOpts) -> Result<Vec<Scenario>, Error> {
    let mut scenarios = load_inputs(path)?;
    for sc in &mut scenarios {
        apply_model_opts(sc, model)?;
    }
    Ok(scenarios)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate {
            scenario,
            model,
            output,
        } => {
            let sc = load_one(&scenario, &model)?;
            let steps = simulate(&sc)?;
            emit(&output, |w| match output.format {
                Format::Csv => write_simulate_csv(w, &sc.id, &steps),
                Format::Json => write_simulate_json(w, &sc.id, &steps),
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Factors {
            scenario,
            listener,
            model,
            output,
        } => {
            let sc = load_one(&scenario, &model)?;
            let mut analysis = analyze(&sc)?;
            if listener == Listener::Ignorant {
                for s in &mut analysis.statements {
                    s.factors.informativity = s.factors.informativity_ignorant;
                }
            }
            let analyses = [analysis];
            emit(&output, |w| match output.format {
                Format::Csv => write_factors_csv(w, &analyses),
                Format::Json => write_factors_json(w, &analyses),
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Rank {
            scenario,
            factors,
            alpha,
            epsilon,
            model,
            output,
        } => {
            let sc = load_one(&scenario, &model)?;
            let selection = FactorSelection::parse(&factors)?;
            let coeffs = parse_alphas(&alpha, epsilon)?;
            let analysis = analyze(&sc)?;
            let report = rank(&analysis, &coeffs, &selection);
            let analyses = [analysis];
            let reports = [report];
            emit(&output, |w| match output.format {
                Format::Csv => write_rank_csv(w, &analyses, &reports),
                Format::Json => write_rank_json(w, &analyses, &reports),
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit {
            manifest,
            human,
            factors,
            grid,
            epsilon,
            seed,
            resamples,
            level,
            model,
            output,
        } => {
            let scenarios = load_many(&manifest, &model)?;
            let selection = FactorSelection::parse(&factors)?;
            let rankings = load_human_rankings(&human)?;
            let analyses: Vec<ScenarioAnalysis> = scenarios
                .iter()
                .map(|sc| {
                    analyze(sc).map_err(|e| Error::Scenario(format!("{}: {e}", sc.id)))
                })
                .collect::<Result<_, _>>()?;
            let settings = FitSettings {
                grid: grid.into(),
                epsilon,
                bootstrap_resamples: resamples,
                bootstrap_level: level,
                seed,
            };
            let report = fit_to_human(&analyses, &rankings, &selection, &settings)?;
            emit(&output, |w| match output.format {
                Format::Csv => write_fit_csv(w, &report),
                Format::Json => write_fit_json(w, &report),
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle {
            scenario,
            max_atoms,
            model,
            output,
        } => {
            let scenarios = load_many(&scenario, &model)?;
            let mut reports = Vec::with_capacity(scenarios.len());
            for sc in &scenarios {
                let report = oracle::compare(sc, max_atoms)
                    .map_err(|e| Error::Scenario(format!("{}: {e}", sc.id)))?;
                reports.push(report);
            }
            emit(&output, |w| match output.format {
                Format::Csv => write_oracle_csv(w, &reports, oracle::TOLERANCE),
                Format::Json => write_oracle_json(w, &reports, oracle::TOLERANCE),
            })?;
            let failing: Vec<&oracle::ComparisonReport> = reports
                .iter()
                .filter(|r| !r.passes(oracle::TOLERANCE))
                .collect();
            if failing.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                for report in failing {
                    eprintln!(
                        "oracle check failed for `{}`: max deviation {:.3e} exceeds {:.0e}",
                        report.scenario_id,
                        report.max_deviation,
                        oracle::TOLERANCE
                    );
                }
                Ok(ExitCode::FAILURE)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
