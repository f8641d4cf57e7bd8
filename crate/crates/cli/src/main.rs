//! `nicholson`: criteria reports, simulations and reproducible scenarios for
//! Nicholson-type delay equations.
//!
//! Exit codes: 0 when every requested check is certified or
//! simulation-consistent, 1 on a failed check or a numerical failure, 2 on
//! usage or configuration errors.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use nicholson_core::criteria::CriteriaOptions;
use nicholson_core::dde::DEFAULT_STEP;
use nicholson_core::experiments::{
    crosscheck_change_of_variables, find_periodic_solution, reproduce_example, simulate,
    straddle_check, verify_attractivity, verify_convergence, verify_periodic_attractor,
    verify_permanence, ExperimentConfig, LabeledHistory, PeriodicOptions, RunSettings,
    ScenarioSection, Status, DEFAULT_TAIL_FRACTION, SCENARIOS,
};
use nicholson_core::interval_map::{DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use nicholson_core::{evaluate, load_model, MapSpec, NicholsonModel};

#[derive(Parser)]
#[command(name = "nicholson", version, about = "Permanence and attractivity checks for Nicholson delay equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Integrator step.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    /// Horizon; defaults to t0 + max(100 tau, 200).
    #[arg(long)]
    t_end: Option<f64>,
    /// Fraction of the run used as the tail window.
    #[arg(long, default_value_t = DEFAULT_TAIL_FRACTION)]
    tail: f64,
    /// Tracking tolerance for attractivity checks.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every criterion and print the report as JSON.
    Check {
        model: PathBuf,
        /// Period for the periodic conditions.
        #[arg(long)]
        omega: Option<f64>,
        /// Bounds `m*,M*` of a known solution, enabling (A4).
        #[arg(long, value_delimiter = ',', num_args = 2)]
        solution_bounds: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate one history and write the trajectory as CSV.
    Simulate {
        model: PathBuf,
        /// History as an expression in t on [-tau, 0], or a number.
        #[arg(long, default_value = "1")]
        history: String,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        #[arg(long)]
        t_end: Option<f64>,
        /// CSV path; stdout when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write every n-th node.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Criteria plus permanence, attractivity, convergence and straddle
    /// simulations.
    Verify {
        model: PathBuf,
        /// History pairs `a:b`, repeatable.
        #[arg(long = "pairs", value_delimiter = ',')]
        pairs: Vec<String>,
        /// Histories for the permanence and convergence runs.
        #[arg(long = "history", value_delimiter = ',')]
        histories: Vec<String>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute a periodic solution by period-map iteration and check that it
    /// attracts the given histories.
    Periodic {
        model: PathBuf,
        #[arg(long)]
        omega: f64,
        #[arg(long, default_value_t = 129)]
        nodes: usize,
        #[arg(long, default_value_t = 2000)]
        max_iter: usize,
        /// Period-map stopping tolerance.
        #[arg(long, default_value_t = 1e-10)]
        map_tol: f64,
        #[arg(long = "history", value_delimiter = ',')]
        histories: Vec<String>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write one period of the solution as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Analyse the interval map for (K, a+, zeta+).
    Map {
        #[arg(long = "K")]
        k: f64,
        #[arg(long)]
        a_plus: f64,
        #[arg(long)]
        zeta_plus: f64,
        /// Iterate from log-spaced seeds.
        #[arg(long)]
        sweep: bool,
        #[arg(long, default_value_t = 64)]
        seeds: usize,
        /// Skip the map condition; the map must still be defined.
        #[arg(long)]
        diagnostic: bool,
        /// Iterate from one seed and write the orbit prefix as CSV.
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce a named scenario, or `all`.
    Repro {
        name: String,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Errors that map to exit code 2.
#[derive(Debug)]
struct UsageError(anyhow::Error);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: impl Into<anyhow::Error>) -> anyhow::Error {
    anyhow::Error::new(UsageError(e.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(status) if status.is_ok() => ExitCode::SUCCESS,
        Ok(status) => {
            eprintln!("status: {status}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn read_model(path: &Path) -> Result<NicholsonModel> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)?;
    load_model(&text)
        .with_context(|| format!("loading {}", path.display()))
        .map_err(usage)
}

fn parse_history(source: &str) -> Result<LabeledHistory> {
    let source = source.trim();
    if let Ok(v) = source.parse::<f64>() {
        return Ok(LabeledHistory::constant(v));
    }
    LabeledHistory::parse(source)
        .map_err(|e| usage(anyhow!("history `{source}`: {e}")))
}

fn parse_pair(source: &str) -> Result<(LabeledHistory, LabeledHistory)> {
    let (a, b) = source
        .split_once(':')
        .ok_or_else(|| usage(anyhow!("pair `{source}` must look like a:b")))?;
    Ok((parse_history(a)?, parse_history(b)?))
}

fn histories_or(sources: &[String], defaults: &[f64]) -> Result<Vec<LabeledHistory>> {
    if sources.is_empty() {
        Ok(defaults.iter().map(|&v| LabeledHistory::constant(v)).collect())
    } else {
        sources.iter().map(|s| parse_history(s)).collect()
    }
}

fn settings(model: &NicholsonModel, run: &RunArgs) -> Result<RunSettings> {
    let s = RunSettings::for_model(model, run.t_end, run.step, run.tail);
    s.validate().map_err(usage)?;
    Ok(s)
}

fn emit(json: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, format!("{json}\n")).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "{json}")?;
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<Status> {
    match command {
        Command::Check {
            model,
            omega,
            solution_bounds,
            out,
        } => {
            let model = read_model(&model)?;
            let opts = CriteriaOptions {
                omega,
                solution_bounds: solution_bounds.map(|v| (v[0], v[1])),
            };
            let report = evaluate(&model, &opts)?;
            emit(&report.to_json(), out.as_deref())?;
            Ok(Status::NotApplicable)
        }
        Command::Simulate {
            model,
            history,
            step,
            t_end,
            csv,
            stride,
        } => {
            let model = read_model(&model)?;
            let history = parse_history(&history)?;
            let s = RunSettings::for_model(&model, t_end, step, DEFAULT_TAIL_FRACTION);
            s.validate().map_err(usage)?;
            let traj = simulate(&model, &history, &s)?;
            match csv {
                Some(path) => traj.write_csv(BufWriter::new(fs::File::create(&path)?), stride)?,
                None => traj.write_csv(BufWriter::new(io::stdout().lock()), stride)?,
            }
            Ok(Status::NotApplicable)
        }
        Command::Verify {
            model,
            pairs,
            histories,
            run,
            out,
        } => {
            let model = read_model(&model)?;
            let s = settings(&model, &run)?;
            let tol = run.tol.unwrap_or(1e-4);
            let histories = histories_or(&histories, &[0.1, 1.0, 5.0])?;
            let pairs = if pairs.is_empty() {
                vec![("0.5:2".to_string()), ("0.2:4".to_string())]
            } else {
                pairs
            };
            let pairs = pairs.iter().map(|p| parse_pair(p)).collect::<Result<Vec<_>>>()?;
            let report = evaluate(&model, &CriteriaOptions::default())?;
            let mut section = ScenarioSection::new("verify", None);
            section.permanence = Some(verify_permanence(&model, &report, &histories, &s)?);
            section.attractivity = Some(verify_attractivity(&model, Some(&report), &pairs, &s, tol)?);
            if let Some(eq) = report.K.filter(|_| report.passes("K1")) {
                section.convergence =
                    Some(verify_convergence(&model, Some(&report), eq.K, &histories, &s, tol)?);
            }
            let traj = simulate(&model, &histories[0], &s)?;
            section.straddle = Some(straddle_check(&report, &traj, &s));
            section.criteria = Some(report);
            let status = section.status();
            emit(&serde_json::to_string_pretty(&section)?, out.as_deref())?;
            Ok(status)
        }
        Command::Periodic {
            model,
            omega,
            nodes,
            max_iter,
            map_tol,
            histories,
            run,
            out,
            csv,
        } => {
            let model = read_model(&model)?;
            let s = settings(&model, &run)?;
            let opts = PeriodicOptions {
                n_history_nodes: nodes,
                max_iter,
                tol: map_tol,
                step: run.step,
                initial: None,
            };
            let report = evaluate(&model, &CriteriaOptions { omega: Some(omega), ..Default::default() })?;
            let sol = find_periodic_solution(&model, omega, &opts)?;
            let histories = histories_or(&histories, &[0.3, 1.0, 4.0])?;
            let mut section = ScenarioSection::new("periodic", None);
            section.periodic = Some(sol.summary());
            section.periodic_attractor = Some(verify_periodic_attractor(
                &model,
                &sol,
                Some(&report),
                &histories,
                &s,
                run.tol.unwrap_or(1e-4),
            )?);
            let span = model.t0() + 20.0 * model.tau_bound().max(0.05);
            let xstar = Arc::new(sol.extend(&model, span, run.step)?);
            section.crosscheck = Some(crosscheck_change_of_variables(
                &model,
                xstar,
                &LabeledHistory::constant(2.0),
                run.step,
            )?);
            section.criteria = Some(report);
            if let Some(path) = csv {
                sol.period.write_csv(BufWriter::new(fs::File::create(&path)?), 1)?;
            }
            let status = section.status();
            emit(&serde_json::to_string_pretty(&section)?, out.as_deref())?;
            Ok(status)
        }
        Command::Map {
            k,
            a_plus,
            zeta_plus,
            sweep,
            seeds,
            diagnostic,
            x0,
            csv,
            out,
        } => {
            let theta0 = (-zeta_plus).exp();
            let spec = if diagnostic {
                MapSpec::diagnostic(k, a_plus, theta0)
            } else {
                MapSpec::from_zeta(k, a_plus, zeta_plus)
            };
            let spec = spec.map_err(usage)?;
            let mut doc = serde_json::json!({
                "spec": spec,
                "margin": spec.margin(),
                "derivative_at_K": spec.derivative_at_k(),
            });
            let mut status = Status::NotApplicable;
            if sweep {
                let report = spec.global_attractor_sweep(seeds, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE);
                status = if report.pass {
                    Status::Certified
                } else if diagnostic {
                    Status::NotApplicable
                } else {
                    Status::NotCertified
                };
                doc["sweep"] = serde_json::to_value(&report)?;
            }
            if let Some(x0) = x0 {
                let orbit = spec.iterate(x0, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE)?;
                if let Some(path) = &csv {
                    orbit.write_csv(BufWriter::new(fs::File::create(path)?))?;
                }
                doc["orbit"] = serde_json::json!({
                    "x0": orbit.x0,
                    "iterations": orbit.iterations,
                    "last": orbit.last,
                    "verdict": orbit.verdict,
                });
            }
            emit(&serde_json::to_string_pretty(&doc)?, out.as_deref())?;
            Ok(status)
        }
        Command::Repro { name, run, out_dir } => {
            let names: Vec<&str> = if name == "all" {
                SCENARIOS.to_vec()
            } else if SCENARIOS.contains(&name.as_str()) {
                vec![name.as_str()]
            } else {
                return Err(usage(anyhow!(
                    "unknown scenario `{name}`; expected one of {} or all",
                    SCENARIOS.join(", ")
                )));
            };
            let cfg = ExperimentConfig {
                step: run.step,
                t_end: run.t_end,
                tail_fraction: run.tail,
                tol: run.tol,
                out_dir,
            };
            let mut status = Status::NotApplicable;
            let mut reports = Vec::new();
            for name in names {
                let report = reproduce_example(name, &cfg)?;
                eprintln!("{name}: {}", report.status);
                status = status.combine(report.status);
                reports.push(report);
            }
            if cfg.out_dir.is_none() {
                let json = if reports.len() == 1 {
                    reports[0].to_json()
                } else {
                    serde_json::to_string_pretty(&reports)?
                };
                emit(&json, None)?;
            }
            Ok(status)
        }
    }
}
