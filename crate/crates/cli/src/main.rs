//! Command-line front end: simulations, sweeps, estimation from MPC files and analytic values.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mpcrange::association::AssocParams;
use mpcrange::distance::{analytic_rmse, RmseCase};
use mpcrange::harness::{
    rss_beat_threshold, run_estimator, toa_beat_criterion, ClockOffsets, Estimate, EstimatorContext, Sweep, SweepVar,
};
use mpcrange::io::{parse_config, read_mpc_file, report_to_csv_string};
use mpcrange::position::approx_position_rmse;
use mpcrange::{EstimatorKind, ExperimentConfig};

#[derive(Parser)]
#[command(name = "mpcrange", version, about = "Multipath-based ranging and positioning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment point and write an RMSE report.
    Simulate(RunArgs),
    /// Run an experiment over a parameter grid and write an RMSE report.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Swept variable, overriding the config (e.g. distance_m, k_per_observer, n_alien).
        #[arg(long)]
        var: Option<String>,
        /// Comma-separated grid values for `--var`.
        #[arg(long, value_delimiter = ',', requires = "var")]
        values: Vec<f64>,
    },
    /// Estimate distance or relative position from an MPC file.
    Estimate(EstimateArgs),
    /// Closed-form values.
    Analytic {
        #[command(subcommand)]
        which: Analytic,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated estimator names.
    #[arg(long, value_delimiter = ',')]
    estimators: Vec<String>,
    /// Output CSV path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// MPC CSV file.
    #[arg(long)]
    mpcs: PathBuf,
    /// Comma-separated estimator names; all applicable estimators when omitted.
    #[arg(long, value_delimiter = ',')]
    estimators: Vec<String>,
    /// Known clock offsets of node A, one per observer (ns).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, requires = "eps_b")]
    eps_a: Vec<f64>,
    /// Known clock offsets of node B, one per observer (ns).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, requires = "eps_a")]
    eps_b: Vec<f64>,
    /// Treat every observer as having its own inter-node clock offset.
    #[arg(long)]
    fully_async: bool,
    /// Association delay weight (1/ns); inverse A-side delay spread when omitted.
    #[arg(long)]
    lambda: Option<f64>,
    /// Output CSV path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Analytic {
    /// RMSE of the closed-form distance estimators and the approximate position RMSE.
    Rmse {
        #[arg(long)]
        d: f64,
        #[arg(long)]
        k: usize,
        /// Delay standard deviation for the position approximation (ns).
        #[arg(long)]
        sigma_ns: Option<f64>,
    },
    /// Smallest MPC count beating RSS ranging.
    Rss {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        sigma_sh_db: f64,
    },
    /// Whether K MPCs beat two-way TOA ranging.
    Toa {
        #[arg(long)]
        k: u64,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<mpcrange::Error> for Failure {
    fn from(e: mpcrange::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

fn parse_estimators(names: &[String]) -> Result<Vec<EstimatorKind>, Failure> {
    names
        .iter()
        .map(|n| n.parse::<EstimatorKind>().map_err(Failure::from))
        .collect()
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(run: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &run.config {
        Some(p) => parse_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if let Some(t) = run.trials {
        cfg.trials = t;
    }
    if !run.estimators.is_empty() {
        cfg.estimators = parse_estimators(&run.estimators)?;
    }
    Ok(cfg)
}

fn execute(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(), Failure> {
    cfg.validate()?;
    let report = mpcrange::run_experiment(cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
    for r in &report.rows {
        if r.failures > 0 {
            eprintln!(
                "{} at {} = {}: {} of {} trials failed",
                r.estimator, report.sweep_var, r.sweep_value, r.failures, r.trials
            );
        }
    }
    emit(&report_to_csv_string(&report), out)
}

fn sweep_var(name: &str) -> Result<SweepVar, Failure> {
    [
        SweepVar::DistanceM,
        SweepVar::KPerObserver,
        SweepVar::DirectionErrorDeg,
        SweepVar::NAlien,
        SweepVar::TxPowerScaleDb,
        SweepVar::PLos,
    ]
    .into_iter()
    .find(|v| v.name() == name)
    .ok_or_else(|| Failure::Validation(format!("unknown sweep variable `{name}`")))
}

fn estimate(args: &EstimateArgs) -> Result<(), Failure> {
    let obs = read_mpc_file(&args.mpcs)?;
    let clock = if args.eps_a.is_empty() {
        None
    } else {
        Some(ClockOffsets {
            eps_a_ns: args.eps_a.clone(),
            eps_b_ns: args.eps_b.clone(),
        })
    };
    let kinds = if args.estimators.is_empty() {
        EstimatorKind::ALL
            .into_iter()
            .filter(|k| clock.is_some() || !k.needs_clock_offsets())
            .collect()
    } else {
        parse_estimators(&args.estimators)?
    };
    let ctx = EstimatorContext {
        clock,
        assoc: AssocParams {
            lambda_per_ns: args.lambda,
            ..AssocParams::default()
        },
        fully_async: args.fully_async,
    };
    let mut text = String::from("estimator,d_hat_m,dx,dy,dz,eps_hat_ns\n");
    let mut failed = Vec::new();
    for kind in kinds {
        match run_estimator(kind, &obs, &ctx) {
            Ok(est) => {
                let (vec, eps) = match est {
                    Estimate::Distance { eps_hat_ns, .. } => (None, eps_hat_ns),
                    Estimate::Position { d_hat, eps_hat_ns } => (Some(d_hat), eps_hat_ns),
                };
                let comps = vec.map_or(",,".to_string(), |v| format!("{},{},{}", v.x, v.y, v.z));
                let eps = eps.map_or(String::new(), |e| e.to_string());
                let _ = writeln!(text, "{kind},{},{comps},{eps}", est.distance_m());
            }
            Err(e) => {
                eprintln!("{kind}: {e}");
                failed.push(kind);
            }
        }
    }
    emit(&text, args.out.as_deref())?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("{} estimator(s) failed", failed.len())))
    }
}

fn analytic(which: &Analytic) -> Result<(), Failure> {
    match *which {
        Analytic::Rmse { d, k, sigma_ns } => {
            println!("quantity,value");
            println!("mvue_rmse_m,{}", analytic_rmse(d, k, RmseCase::AsyncDist)?);
            println!("eps_rmse_ns,{}", analytic_rmse(d, k, RmseCase::EpsOffset)?);
            println!("mvue_sync_rmse_m,{}", analytic_rmse(d, k, RmseCase::SyncDist)?);
            if let Some(s) = sigma_ns {
                println!("position_rmse_m,{}", approx_position_rmse(s, k)?);
            }
        }
        Analytic::Rss { alpha, sigma_sh_db } => println!("{}", rss_beat_threshold(alpha, sigma_sh_db)?),
        Analytic::Toa { k } => println!("{}", toa_beat_criterion(k)),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(run) => {
            let cfg = load_config(&run)?;
            if cfg.sweep.is_some() {
                return Err(Failure::Validation("config defines a sweep; use the `sweep` command".into()));
            }
            execute(&cfg, run.out.as_deref())
        }
        Command::Sweep { run, var, values } => {
            let mut cfg = load_config(&run)?;
            if let Some(name) = var {
                cfg.sweep = Some(Sweep {
                    variable: sweep_var(&name)?,
                    values,
                });
            }
            if cfg.sweep.is_none() {
                return Err(Failure::Validation("no sweep given in config or via --var".into()));
            }
            execute(&cfg, run.out.as_deref())
        }
        Command::Estimate(args) => estimate(&args),
        Command::Analytic { which } => analytic(&which),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
