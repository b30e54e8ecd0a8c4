//! Experiment configuration and the `solve`, `sweep`, `verify`, `simulate`
//! and `trace` subcommands.
//!
//! A config is a TOML file:
//!
//! ```toml
//! jobs = 4
//! policies = ["optimal", "rs", "greedy"]
//!
//! [params]
//! p = 0.4
//! q = 0.7
//! beta = 0.2
//! p_s = 0.5
//! e_max = 10
//! delta_max = 10
//! p_alpha = 0.5
//!
//! [sweep]
//! p = [0.1, 0.3, 0.5]
//! beta = [0.2, 0.4]
//!
//! [sim]
//! horizon = 1000000
//! seed = 1
//! burn_in = 10000
//!
//! [solver]
//! epsilon = 1e-9
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Every section and key is optional. Sweep axes that are absent take the
//! single value from `[params]`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evaluate::{brute_force_optimal, exact_metrics, BRUTE_FORCE_MAX_STATES};
use crate::model::{validate_kernel, Action, State, SystemParams};
use crate::policies::{ActionTable, Policy, PolicyKind};
use crate::simulate::{simulate, trace, SimConfig};
use crate::solver::{
    bellman_residual, delta_v_profile, relative_value_iteration, threshold_report, RviOptions,
    Solution,
};

pub const POLICY_GRID_FILE: &str = "policy_grid.csv";
pub const SOLVE_SUMMARY_FILE: &str = "solve_summary.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const VERIFY_REPORT_FILE: &str = "verify_report.json";
pub const SIMULATE_FILE: &str = "simulate.csv";
pub const TRACE_FILE: &str = "trace.csv";

/// Oracle tolerance for RVI against exact evaluation and brute force.
pub const ORACLE_TOL: f64 = 1e-6;
/// Tolerance for the energy identities and dominance checks.
pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub p: Option<Vec<f64>>,
    pub q: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub p_s: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = RviOptions::default();
        Self {
            epsilon: d.epsilon,
            max_iters: d.max_iters,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> RviOptions {
        RviOptions {
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            ..RviOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    pub sweep: SweepAxes,
    pub policies: Vec<PolicyKind>,
    pub sim: SimConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    /// Worker threads for sweeps; 0 uses every available core.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            sweep: SweepAxes::default(),
            policies: vec![PolicyKind::Optimal, PolicyKind::Rs, PolicyKind::Greedy],
            sim: SimConfig::default(),
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
            jobs: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        for (name, axis) in [
            ("p", &self.sweep.p),
            ("q", &self.sweep.q),
            ("beta", &self.sweep.beta),
            ("p_s", &self.sweep.p_s),
        ] {
            if let Some(values) = axis {
                ensure!(!values.is_empty(), "sweep axis `{name}` is empty");
            }
        }
        ensure!(!self.policies.is_empty(), "no policies selected");
        for point in self.grid() {
            point.validate()?;
        }
        Ok(())
    }

    /// Parameter combinations in config order (`p` outermost, `p_s` innermost).
    pub fn grid(&self) -> Vec<SystemParams> {
        let base = self.params;
        let axis = |a: &Option<Vec<f64>>, default: f64| a.clone().unwrap_or_else(|| vec![default]);
        let mut out = Vec::new();
        for &p in &axis(&self.sweep.p, base.p) {
            for &q in &axis(&self.sweep.q, base.q) {
                for &beta in &axis(&self.sweep.beta, base.beta) {
                    for &p_s in &axis(&self.sweep.p_s, base.p_s) {
                        out.push(SystemParams {
                            p,
                            q,
                            beta,
                            p_s,
                            ..base
                        });
                    }
                }
            }
        }
        out
    }

    fn pool(&self) -> anyhow::Result<rayon::ThreadPool> {
        Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()?)
    }
}

/// Flags shared by every subcommand; each overrides the matching config key.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (`output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Simulation seed (`sim.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulation horizon in slots (`sim.horizon`); 0 disables simulation rows.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Sweep worker threads (`jobs`).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// RVI span tolerance (`solver.epsilon`).
    #[arg(long)]
    pub epsilon: Option<f64>,
}

impl CommonArgs {
    pub fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(dir) = &self.out {
            cfg.output.dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.sim.seed = seed;
        }
        if let Some(h) = self.horizon {
            cfg.sim.horizon = h;
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if let Some(eps) = self.epsilon {
            cfg.solver.epsilon = eps;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "via-eh",
    version,
    about = "VIA-optimal transmission for energy-harvesting sensors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal policy and write the policy grid.
    Solve(CommonArgs),
    /// Evaluate (and optionally simulate) every policy over the sweep grid.
    Sweep(CommonArgs),
    /// Run every structural and oracle check over the sweep grid.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Additionally check the threshold structure of this policy grid.
        #[arg(long)]
        policy_grid: Option<PathBuf>,
    },
    /// Simulate each configured policy at the base parameters.
    Simulate(CommonArgs),
    /// Write a per-slot trace of one policy at the base parameters.
    Trace {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "greedy")]
        policy: PolicyKind,
    },
}

/// Dispatches a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = args.resolve()?;
            Ok(match run_solve(&cfg) {
                Ok(_) => 0,
                Err(err) => {
                    eprintln!("error: {err:#}");
                    2
                }
            })
        }
        Command::Sweep(args) => {
            run_sweep(&args.resolve()?)?;
            Ok(0)
        }
        Command::Verify {
            common,
            policy_grid,
        } => {
            let report = run_verify(&common.resolve()?, policy_grid.as_deref())?;
            for check in report.checks.iter().filter(|c| !c.pass) {
                eprintln!("FAIL {} {}", check.name, check.detail);
            }
            Ok(if report.overall_pass { 0 } else { 1 })
        }
        Command::Simulate(args) => {
            run_simulate(&args.resolve()?)?;
            Ok(0)
        }
        Command::Trace { common, policy } => {
            run_trace(&common.resolve()?, policy)?;
            Ok(0)
        }
    }
}

fn out_path(cfg: &ExperimentConfig, file: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(&cfg.output.dir)
        .with_context(|| format!("creating {}", cfg.output.dir.display()))?;
    Ok(cfg.output.dir.join(file))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Serialize, Deserialize)]
struct GridRow {
    e: usize,
    x: u8,
    delta: usize,
    action: u8,
}

pub fn write_policy_grid(path: &Path, table: &ActionTable) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for (s, a) in table.iter() {
        w.serialize(GridRow {
            e: s.e,
            x: s.x,
            delta: s.delta,
            action: a.as_u8(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `e,x,delta,action` grid; every state must appear exactly once.
pub fn read_policy_grid(path: &Path, params: &SystemParams) -> anyhow::Result<ActionTable> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    ensure!(
        r.headers()?.iter().eq(["e", "x", "delta", "action"]),
        "policy grid header must be `e,x,delta,action`"
    );
    let mut seen = vec![false; params.num_states()];
    let mut table = ActionTable::from_fn(params, |_| Action::Idle);
    for row in r.deserialize() {
        let row: GridRow = row?;
        let s = State::new(row.e, row.x, row.delta);
        ensure!(params.contains(s), "state {s} outside the state space");
        let i = params.index(s);
        ensure!(!seen[i], "state {s} listed twice");
        seen[i] = true;
        let a = Action::from_u8(row.action)
            .with_context(|| format!("bad action {} at {s}", row.action))?;
        table.set(s, a);
    }
    ensure!(
        seen.iter().all(|&b| b),
        "policy grid does not cover every state"
    );
    Ok(table)
}

#[derive(Debug, Serialize)]
pub struct SolveSummary {
    pub params: SystemParams,
    pub converged: bool,
    pub theta_star: Option<f64>,
    /// Exact average VIA of the extracted policy; the authoritative figure.
    pub theta_exact: Option<f64>,
    pub iterations: usize,
    pub span_residual: f64,
}

pub fn run_solve(cfg: &ExperimentConfig) -> anyhow::Result<Solution> {
    let params = cfg.params;
    let summary_path = out_path(cfg, SOLVE_SUMMARY_FILE)?;
    let solution = match relative_value_iteration(&params, &cfg.solver.options()) {
        Ok(sol) => sol,
        Err(crate::Error::NotConverged {
            iterations,
            residual,
        }) => {
            write_json(
                &summary_path,
                &SolveSummary {
                    params,
                    converged: false,
                    theta_star: None,
                    theta_exact: None,
                    iterations,
                    span_residual: residual,
                },
            )?;
            bail!("solver did not converge after {iterations} iterations (span residual {residual:e})");
        }
        Err(err) => return Err(err.into()),
    };
    let exact = exact_metrics(&Policy::OptimalTable(solution.policy.clone()), &params)?;
    write_policy_grid(&out_path(cfg, POLICY_GRID_FILE)?, &solution.policy)?;
    write_json(
        &summary_path,
        &SolveSummary {
            params,
            converged: true,
            theta_star: Some(solution.theta_star),
            theta_exact: Some(exact.avg_via),
            iterations: solution.iterations,
            span_residual: solution.span_residual,
        },
    )?;
    Ok(solution)
}

/// One line of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub p: f64,
    pub q: f64,
    pub beta: f64,
    pub p_s: f64,
    pub policy: PolicyKind,
    /// `exact` or `sim`.
    pub method: String,
    pub avg_via: Option<f64>,
    pub avg_energy: Option<f64>,
    pub std_err: Option<f64>,
    pub error: String,
}

fn policy_for(
    kind: PolicyKind,
    params: &SystemParams,
    optimal: &Option<ActionTable>,
) -> Option<Policy> {
    match kind {
        PolicyKind::Optimal => optimal.clone().map(Policy::OptimalTable),
        PolicyKind::Rs => Some(Policy::RandomizedStationary(params.p_alpha)),
        PolicyKind::Greedy => Some(Policy::Greedy),
    }
}

fn sweep_point(cfg: &ExperimentConfig, params: &SystemParams) -> Vec<MetricsRow> {
    let opts = cfg.solver.options();
    let (optimal, solve_err) = if cfg.policies.contains(&PolicyKind::Optimal) {
        match relative_value_iteration(params, &opts) {
            Ok(sol) => (Some(sol.policy), String::new()),
            Err(e) => (None, e.to_string()),
        }
    } else {
        (None, String::new())
    };
    let mut rows = Vec::new();
    for &kind in &cfg.policies {
        let blank = |method: &str, error: String| MetricsRow {
            p: params.p,
            q: params.q,
            beta: params.beta,
            p_s: params.p_s,
            policy: kind,
            method: method.to_string(),
            avg_via: None,
            avg_energy: None,
            std_err: None,
            error,
        };
        let Some(policy) = policy_for(kind, params, &optimal) else {
            rows.push(blank("exact", solve_err.clone()));
            if cfg.sim.horizon > 0 {
                rows.push(blank("sim", solve_err.clone()));
            }
            continue;
        };
        rows.push(match exact_metrics(&policy, params) {
            Ok(m) => MetricsRow {
                avg_via: Some(m.avg_via),
                avg_energy: Some(m.avg_energy),
                ..blank("exact", String::new())
            },
            Err(e) => blank("exact", e.to_string()),
        });
        if cfg.sim.horizon > 0 {
            rows.push(match simulate(&policy, params, &cfg.sim) {
                Ok(s) => MetricsRow {
                    avg_via: Some(s.avg_via),
                    avg_energy: Some(s.avg_energy),
                    std_err: Some(s.via_std_error),
                    ..blank("sim", String::new())
                },
                Err(e) => blank("sim", e.to_string()),
            });
        }
    }
    rows
}

/// Computes every sweep row, in deterministic config order.
pub fn sweep_rows(cfg: &ExperimentConfig) -> anyhow::Result<Vec<MetricsRow>> {
    let grid = cfg.grid();
    let per_point: Vec<Vec<MetricsRow>> = cfg
        .pool()?
        .install(|| grid.par_iter().map(|pt| sweep_point(cfg, pt)).collect());
    Ok(per_point.into_iter().flatten().collect())
}

pub fn run_sweep(cfg: &ExperimentConfig) -> anyhow::Result<Vec<MetricsRow>> {
    let rows = sweep_rows(cfg)?;
    let path = out_path(cfg, METRICS_FILE)?;
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct GridPoint {
    pub p: f64,
    pub q: f64,
    pub beta: f64,
    pub p_s: f64,
}

impl From<&SystemParams> for GridPoint {
    fn from(pr: &SystemParams) -> Self {
        Self {
            p: pr.p,
            q: pr.q,
            beta: pr.beta,
            p_s: pr.p_s,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub point: Option<GridPoint>,
    pub pass: bool,
    /// Measured quantity compared against the check's tolerance.
    pub residual: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub overall_pass: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

fn check(
    name: &str,
    params: Option<&SystemParams>,
    pass: bool,
    residual: Option<f64>,
    detail: String,
) -> Check {
    Check {
        name: name.to_string(),
        point: params.map(GridPoint::from),
        pass,
        residual,
        detail,
    }
}

fn verify_point(cfg: &ExperimentConfig, params: &SystemParams) -> anyhow::Result<Vec<Check>> {
    let pt = Some(params);
    let mut checks = Vec::new();

    let kernel = validate_kernel(params);
    checks.push(check(
        "kernel_valid",
        pt,
        kernel.is_valid(),
        Some(kernel.max_row_sum_error),
        format!(
            "{} violations over {} rows",
            kernel.violations.len(),
            kernel.rows_checked
        ),
    ));

    let opts = cfg.solver.options();
    let sol = match relative_value_iteration(params, &opts) {
        Ok(sol) => sol,
        Err(e) => {
            checks.push(check("rvi_converged", pt, false, None, e.to_string()));
            return Ok(checks);
        }
    };
    let residual = bellman_residual(sol.theta_star, &sol.v, params);
    checks.push(check(
        "bellman_residual",
        pt,
        residual < 10.0 * opts.epsilon,
        Some(residual),
        format!("{} iterations", sol.iterations),
    ));

    let optimal = Policy::OptimalTable(sol.policy.clone());
    let exact_opt = exact_metrics(&optimal, params)?;
    let gap = (sol.theta_star - exact_opt.avg_via).abs();
    checks.push(check(
        "self_consistency",
        pt,
        gap < ORACLE_TOL,
        Some(gap),
        format!(
            "theta_star {} vs exact {}",
            sol.theta_star, exact_opt.avg_via
        ),
    ));

    let report = threshold_report(&sol.policy, params);
    checks.push(check(
        "threshold_structure",
        pt,
        report.is_threshold(),
        Some(report.violations.len() as f64),
        format!("{:?}", report.violations.iter().take(8).collect::<Vec<_>>()),
    ));

    let profile = delta_v_profile(&sol.v, params);
    let worst = profile.flags.iter().map(|f| f.increase).fold(0.0, f64::max);
    checks.push(check(
        "delta_v_monotone",
        pt,
        profile.is_monotone(),
        Some(worst),
        format!("{} flags", profile.flags.len()),
    ));

    let rs = exact_metrics(&Policy::RandomizedStationary(params.p_alpha), params)?;
    let greedy = exact_metrics(&Policy::Greedy, params)?;
    let dominance = exact_opt.avg_via - rs.avg_via.min(greedy.avg_via);
    checks.push(check(
        "baseline_dominance",
        pt,
        dominance <= IDENTITY_TOL,
        Some(dominance),
        format!(
            "optimal {} rs {} greedy {}",
            exact_opt.avg_via, rs.avg_via, greedy.avg_via
        ),
    ));
    if params.e_max >= 1 {
        let err = (greedy.avg_energy - params.beta).abs();
        checks.push(check(
            "greedy_energy",
            pt,
            err < IDENTITY_TOL,
            Some(err),
            String::new(),
        ));
    }
    let excess = rs.avg_energy - params.p_alpha.min(params.beta);
    checks.push(check(
        "rs_energy",
        pt,
        excess <= IDENTITY_TOL,
        Some(excess),
        String::new(),
    ));

    if params.num_states() <= BRUTE_FORCE_MAX_STATES {
        let (theta, _) = brute_force_optimal(params)?;
        let gap = (theta - sol.theta_star).abs();
        checks.push(check(
            "oracle_agreement",
            pt,
            gap < ORACLE_TOL,
            Some(gap),
            String::new(),
        ));
    }

    if cfg.sim.horizon > 0 {
        for &kind in &cfg.policies {
            let (policy, exact) = match kind {
                PolicyKind::Optimal => (optimal.clone(), exact_opt),
                PolicyKind::Rs => (Policy::RandomizedStationary(params.p_alpha), rs),
                PolicyKind::Greedy => (Policy::Greedy, greedy),
            };
            let stats = simulate(&policy, params, &cfg.sim)?;
            let gap = (stats.avg_via - exact.avg_via).abs();
            let tol = sim_tolerance(exact.avg_via, stats.via_std_error);
            checks.push(check(
                &format!("sim_vs_exact_{}", kind.name()),
                pt,
                gap <= tol,
                Some(gap),
                format!(
                    "sim {} exact {} tolerance {}",
                    stats.avg_via, exact.avg_via, tol
                ),
            ));
        }
    }
    Ok(checks)
}

/// `max(1% relative, 3 standard errors)`.
pub fn sim_tolerance(exact: f64, std_err: f64) -> f64 {
    (0.01 * exact.abs()).max(3.0 * std_err)
}

pub fn verify_rows(
    cfg: &ExperimentConfig,
    policy_grid: Option<&Path>,
) -> anyhow::Result<VerifyReport> {
    let grid = cfg.grid();
    let per_point: Vec<anyhow::Result<Vec<Check>>> = cfg
        .pool()?
        .install(|| grid.par_iter().map(|pt| verify_point(cfg, pt)).collect());
    let mut checks = Vec::new();
    for point in per_point {
        checks.extend(point?);
    }
    if let Some(path) = policy_grid {
        let table = read_policy_grid(path, &cfg.params)?;
        let report = threshold_report(&table, &cfg.params);
        let states: Vec<String> = report
            .violations
            .iter()
            .map(|v| format!("{:?} at {}", v.rule, v.state))
            .collect();
        checks.push(check(
            "policy_grid_threshold",
            Some(&cfg.params),
            report.is_threshold(),
            Some(report.violations.len() as f64),
            states.join("; "),
        ));
    }
    Ok(VerifyReport {
        overall_pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

pub fn run_verify(
    cfg: &ExperimentConfig,
    policy_grid: Option<&Path>,
) -> anyhow::Result<VerifyReport> {
    let report = verify_rows(cfg, policy_grid)?;
    write_json(&out_path(cfg, VERIFY_REPORT_FILE)?, &report)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
struct SimRow {
    policy: PolicyKind,
    avg_via: f64,
    avg_energy: f64,
    via_std_error: f64,
    energy_std_error: f64,
    slot_count: u64,
    seed: u64,
}

fn base_policy(cfg: &ExperimentConfig, kind: PolicyKind) -> anyhow::Result<Policy> {
    Ok(match kind {
        PolicyKind::Optimal => Policy::OptimalTable(
            relative_value_iteration(&cfg.params, &cfg.solver.options())?.policy,
        ),
        PolicyKind::Rs => Policy::RandomizedStationary(cfg.params.p_alpha),
        PolicyKind::Greedy => Policy::Greedy,
    })
}

pub fn run_simulate(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let path = out_path(cfg, SIMULATE_FILE)?;
    let mut w = csv::Writer::from_path(&path)?;
    for &kind in &cfg.policies {
        let stats = simulate(&base_policy(cfg, kind)?, &cfg.params, &cfg.sim)?;
        w.serialize(SimRow {
            policy: kind,
            avg_via: stats.avg_via,
            avg_energy: stats.avg_energy,
            via_std_error: stats.via_std_error,
            energy_std_error: stats.energy_std_error,
            slot_count: stats.slot_count,
            seed: stats.seed,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn run_trace(cfg: &ExperimentConfig, kind: PolicyKind) -> anyhow::Result<()> {
    let sim = SimConfig {
        record_trace: true,
        ..cfg.sim
    };
    let rows = trace(&base_policy(cfg, kind)?, &cfg.params, &sim)?;
    let path = out_path(cfg, TRACE_FILE)?;
    let mut w = csv::Writer::from_path(&path)?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
