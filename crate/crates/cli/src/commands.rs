//! Subcommand dispatch.

use std::path::{Path, PathBuf};

use evi_plast::adjoint::fd_check;
use evi_plast::evolution::{convergence_study, solve_state, ControlTrajectory};
use evi_plast::optimize::{continuation_run, minimize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{load_scenario, ConfigError, OutputFormat};
use crate::export;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Forward,
    #[value(name = "lambda_study")]
    LambdaStudy,
    Gradcheck,
    Optimize,
    Continuation,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub format: Option<OutputFormat>,
    pub verbose: bool,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid scenario: {0}")]
    Validation(evi_plast::Error),
    #[error("solver failure: {0}")]
    Solver(evi_plast::Error),
    #[error("output error: {0}")]
    Output(anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Validation(_) => 2,
            Self::Solver(_) | Self::Output(_) => 1,
        }
    }
}

fn solver(e: evi_plast::Error) -> RunError {
    RunError::Solver(e)
}

fn output(e: anyhow::Error) -> RunError {
    RunError::Output(e)
}

/// Outcome summary printed by the binary.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub lines: Vec<String>,
}

pub fn run(cmd: Command, opts: &RunOptions) -> Result<Report, RunError> {
    let mut cfg = load_scenario(&opts.config)?;
    if let Some(f) = opts.format {
        cfg.output.format = f;
    }
    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let scenario = Scenario::build(cfg).map_err(RunError::Validation)?;
    std::fs::create_dir_all(&out).map_err(|e| output(e.into()))?;
    match cmd {
        Command::Forward => forward(&scenario, &out, opts),
        Command::LambdaStudy => lambda_study(&scenario, &out),
        Command::Gradcheck => gradcheck(&scenario, &out, opts),
        Command::Optimize => optimize(&scenario, &out, opts),
        Command::Continuation => continuation(&scenario, &out, opts),
    }
}

fn snapshot_nodes(scenario: &Scenario) -> Vec<usize> {
    let s = &scenario.config.output.snapshots;
    if s.is_empty() {
        vec![0, scenario.grid.steps]
    } else {
        s.clone()
    }
}

fn export_trajectory(
    scenario: &Scenario,
    traj: &evi_plast::Trajectory,
    out: &Path,
    prefix: &str,
) -> Result<Vec<export::NodeSummary>, RunError> {
    let rows = export::time_series(traj, &scenario.target, &scenario.ops);
    let format = scenario.config.output.format;
    if format.csv() {
        export::write_time_series(&out.join(format!("{prefix}timeseries.csv")), &rows).map_err(output)?;
    }
    if format.vtk() {
        for k in snapshot_nodes(scenario) {
            let path = out.join(format!("{prefix}snapshot_{k:04}.vtk"));
            export::write_vtk(&path, &traj.states[k], traj.grid.time(k), &scenario.ops).map_err(output)?;
        }
    }
    Ok(rows)
}

fn forward(scenario: &Scenario, out: &Path, opts: &RunOptions) -> Result<Report, RunError> {
    let traj = solve_state(
        &scenario.load,
        &scenario.initial,
        scenario.params,
        scenario.regularization,
        scenario.scheme,
        &scenario.ops,
        &scenario.settings,
    )
    .map_err(solver)?;
    if opts.verbose {
        for (k, its) in traj.newton_iterations.iter().enumerate().skip(1) {
            eprintln!("step {k}: {its} Newton iterations");
        }
    }
    let rows = export_trajectory(scenario, &traj, out, "")?;
    let last = rows.last().copied().expect("trajectory has at least one node");
    let objective = evi_plast::adjoint::tracking_objective(&traj, &scenario.target, &scenario.ops);
    Ok(Report {
        lines: vec![
            format!("forward: {} steps, final energy {}", scenario.grid.steps, export::fmt(last.energy)),
            format!("tracking objective {}", export::fmt(objective)),
        ],
    })
}

fn lambda_study(scenario: &Scenario, out: &Path) -> Result<Report, RunError> {
    let lambdas = &scenario.config.regularization.study_lambdas;
    let table = convergence_study(&scenario.load, &scenario.initial, scenario.params, lambdas, &scenario.ops, &scenario.settings)
        .map_err(|e| match e {
            evi_plast::Error::InvalidParameter(_) => RunError::Validation(e),
            e => solver(e),
        })?;
    if scenario.config.output.format.csv() {
        export::write_convergence(&out.join("lambda_study.csv"), &table).map_err(output)?;
    }
    let mut lines: Vec<String> = table
        .distances
        .iter()
        .enumerate()
        .map(|(i, d)| format!("lambda {} -> {}: distance {}", table.lambdas[i], table.lambdas[i + 1], export::fmt(*d)))
        .collect();
    lines.push(format!("strictly decreasing: {}", table.strictly_decreasing()));
    Ok(Report { lines })
}

/// Random directions with entries uniform in `[−a, a]`, projected onto the control space.
pub fn random_directions(scenario: &Scenario, seed: u64) -> Vec<ControlTrajectory<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = scenario.config.gradcheck.amplitude;
    let n = scenario.ops.n_u();
    (0..scenario.config.gradcheck.directions)
        .map(|_| {
            let g = ControlTrajectory::from_fn(scenario.grid, |_, _| (0..n).map(|_| a * rng.gen_range(-1.0..1.0)).collect());
            scenario.metric.project(&g)
        })
        .collect()
}

fn gradcheck(scenario: &Scenario, out: &Path, opts: &RunOptions) -> Result<Report, RunError> {
    let dirs = random_directions(scenario, opts.seed);
    let report = fd_check(&scenario.problem, &scenario.load, &dirs, scenario.config.gradcheck.eps).map_err(solver)?;
    if opts.verbose {
        for (i, e) in report.entries.iter().enumerate() {
            eprintln!("direction {i}: fd {:e} adjoint {:e} rel {:e}", e.finite_difference, e.adjoint, e.relative_error);
        }
    }
    if scenario.config.output.format.csv() {
        export::write_gradcheck(&out.join("gradcheck.csv"), &report).map_err(output)?;
    }
    Ok(Report {
        lines: vec![format!("gradcheck: {} directions, max relative error {:e}", report.entries.len(), report.max_relative_error())],
    })
}

fn optimize(scenario: &Scenario, out: &Path, opts: &RunOptions) -> Result<Report, RunError> {
    let config = scenario.optimizer_config();
    let result = minimize(&scenario.load, &scenario.problem, &config).map_err(solver)?;
    if opts.verbose {
        for (i, h) in result.history.iter().enumerate() {
            eprintln!("iteration {i}: value {:e} grad {:e} step {:e}", h.value, h.grad_norm, h.step);
        }
    }
    let format = scenario.config.output.format;
    if format.csv() {
        export::write_history(&out.join("history.csv"), &result.history).map_err(output)?;
        export::write_control(&out.join("control.csv"), &result.control).map_err(output)?;
    }
    let traj = scenario.problem.state(&result.control).map_err(solver)?;
    export_trajectory(scenario, &traj, out, "optimal_")?;
    Ok(Report {
        lines: vec![format!(
            "optimize: {} iterations, value {}, gradient norm {:e}, {}",
            result.history.len() - 1,
            export::fmt(result.value),
            result.grad_norm,
            export::termination_name(result.termination)
        )],
    })
}

fn continuation(scenario: &Scenario, out: &Path, opts: &RunOptions) -> Result<Report, RunError> {
    let schedule = scenario.schedule().map_err(RunError::Validation)?;
    let config = scenario.optimizer_config();
    let stages = continuation_run(&scenario.load, &scenario.problem, &schedule, &config).map_err(solver)?;
    if opts.verbose {
        for s in &stages {
            eprintln!("stage lambda {} s {}: value {:e}", s.lambda, s.smoothing, s.result.value);
        }
    }
    if scenario.config.output.format.csv() {
        export::write_stages(&out.join("continuation.csv"), &stages).map_err(output)?;
        if let Some(last) = stages.last() {
            export::write_control(&out.join("control.csv"), &last.result.control).map_err(output)?;
        }
    }
    let lines = stages
        .iter()
        .map(|s| {
            format!(
                "stage lambda {} s {}: value {}, {} iterations, control change {:e}",
                s.lambda,
                s.smoothing,
                export::fmt(s.result.value),
                s.result.history.len() - 1,
                s.control_change
            )
        })
        .collect();
    Ok(Report { lines })
}
