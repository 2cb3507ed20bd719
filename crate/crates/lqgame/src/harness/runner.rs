//! Executes an [`Experiment`] and produces a JSON summary plus a CSV trace.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::equiv::verify_equivalence;
use crate::error::LqError;
use crate::exact_opt::{double_loop, gda_variant, RunStatus, RunTrace};
use crate::lq_core::{grde, inner_riccati, objective, CompactGame, GainSchedule, Player};
use crate::zo_est::{zo_double_loop, zo_inner, zo_outer, Streams, ZoConfig};

use super::config::*;

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitKind {
    Success,
    /// Unexpected solver failure (singular matrix, I/O, …).
    Failure,
    ConfigError,
    Infeasible,
    /// Convergence was required but the run diverged or ran out of iterations.
    NotConverged,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Success => 0,
            ExitKind::Failure => 1,
            ExitKind::ConfigError => 2,
            ExitKind::Infeasible => 3,
            ExitKind::NotConverged => 4,
        }
    }

    fn of_error(e: &LqError) -> Self {
        match e {
            LqError::InfeasibleGain { .. }
            | LqError::RiskFeasibility { .. }
            | LqError::AttenuationFeasibility { .. }
            | LqError::AssumptionViolated { .. } => ExitKind::Infeasible,
            LqError::Dimension(_) | LqError::InvalidSystem(_) | LqError::InvalidParameter(_) => ExitKind::ConfigError,
            _ => ExitKind::Failure,
        }
    }
}

/// A run that could not produce a summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunError {
    pub exit: ExitKind,
    /// Machine-readable reason, e.g. `infeasible_gain`.
    pub reason: String,
    pub message: String,
}

impl RunError {
    fn new(exit: ExitKind, reason: &str, message: impl Into<String>) -> Self {
        Self { exit, reason: reason.into(), message: message.into() }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.reason, self.message)
    }
}

impl std::error::Error for RunError {}

impl From<LqError> for RunError {
    fn from(e: LqError) -> Self {
        let reason = match &e {
            LqError::Dimension(_) => "dimension",
            LqError::InvalidSystem(_) => "invalid_system",
            LqError::InvalidParameter(_) => "invalid_parameter",
            LqError::InfeasibleGain { .. } => "infeasible_gain",
            LqError::SingularLambda { .. } => "singular_lambda",
            LqError::SingularMatrix(_) => "singular_matrix",
            LqError::RiskFeasibility { .. } => "risk_feasibility",
            LqError::AttenuationFeasibility { .. } => "attenuation_feasibility",
            LqError::AssumptionViolated { .. } => "assumption_violated",
        };
        Self::new(ExitKind::of_error(&e), reason, e.to_string())
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        Self::new(ExitKind::ConfigError, "config", e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub metric: String,
    pub expected: f64,
    pub tol: f64,
    pub relative: bool,
    pub value: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment: String,
    pub scheme: String,
    pub task: String,
    pub seed: u64,
    pub status: String,
    pub converged: bool,
    pub diverged: bool,
    /// Every iterate stayed in 𝒦 (or the formulation's feasibility conditions held).
    pub feasible: bool,
    /// No implicit-regularisation violations in the trace (iterative tasks).
    pub ir_ok: Option<bool>,
    /// Non-finite values are written as `null`.
    pub metrics: BTreeMap<String, Option<f64>>,
    pub checks: Vec<CheckResult>,
    pub checks_pass: bool,
    pub exit_code: i32,
}

impl RunSummary {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied().flatten()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace_csv: String,
}

impl RunOutput {
    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summary serialises");
        s.push('\n');
        s
    }

    /// Writes `summary.json` and `trace.csv` into `dir` (created if needed).
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.json"), self.summary_json())?;
        fs::write(dir.join("trace.csv"), &self.trace_csv)
    }
}

/// Raw result of one dispatch, before checks are evaluated.
struct Raw {
    status: String,
    converged: bool,
    diverged: bool,
    feasible: bool,
    ir_ok: Option<bool>,
    metrics: BTreeMap<String, f64>,
    trace_csv: String,
}

impl Raw {
    fn from_trace(status: RunStatus, trace: &RunTrace, ir: bool) -> Self {
        let recs = trace.records();
        let mut metrics = BTreeMap::new();
        if let (Some(first), Some(last)) = (recs.first(), recs.last()) {
            metrics.insert("initial_objective".into(), first.objective);
            metrics.insert("final_objective".into(), last.objective);
            metrics.insert("final_grad_norm".into(), last.grad_norm);
            metrics.insert("initial_lambda_min_h".into(), first.lambda_min_h);
            metrics.insert("final_lambda_min_h".into(), last.lambda_min_h);
            metrics.insert("min_lambda_min_h".into(), recs.iter().map(|r| r.lambda_min_h).fold(f64::INFINITY, f64::min));
            metrics.insert("iterations".into(), last.iter as f64);
        }
        if ir {
            metrics.insert("ir_violations".into(), trace.ir_violations() as f64);
        }
        Raw {
            status: status.label().into(),
            converged: status.converged(),
            diverged: matches!(status, RunStatus::Diverged { .. }),
            feasible: !matches!(status, RunStatus::Infeasible { .. }),
            ir_ok: ir.then(|| trace.ir_violations() == 0),
            metrics,
            trace_csv: trace.to_csv_string(),
        }
    }
}

fn certificate(game: &CompactGame, k: &GainSchedule) -> Result<f64, RunError> {
    Ok(inner_riccati(game, k)?.lambda_min_h)
}

fn scheme_of<'a, T>(schemes: &'a BTreeMap<String, T>, name: &str) -> Result<&'a T, RunError> {
    schemes.get(name).ok_or_else(|| RunError::new(ExitKind::ConfigError, "config", format!("unknown scheme `{name}`")))
}

fn seeded(zo: &ZoConfig, patch: &ZoPatch, seed: u64) -> ZoConfig {
    let mut c = patch.apply(zo);
    c.seed = seed;
    c
}

fn landscape(game: &CompactGame, probes: &[Probe]) -> Result<Raw, RunError> {
    let ctl = |g: &GainSpec| load_gain(Some(g), Player::Controller, game, "k");
    let dst = |g: &GainSpec| load_gain(Some(g), Player::Disturbance, game, "l");
    let outer = |k: &GainSchedule| -> Result<_, RunError> { Ok(inner_riccati(game, k)?) };
    let mut metrics = BTreeMap::new();
    let mut csv = String::from("probe,value\n");
    for p in probes {
        let value = match &p.measure {
            Measure::InnerMidpointGap { k, l1, l2 } => {
                let (k, l1, l2) = (ctl(k)?, dst(l1)?, dst(l2)?);
                (objective(game, &k, &l1) + objective(game, &k, &l2)) / 2.0 - objective(game, &k, &l1.midpoint(&l2))
            }
            Measure::OuterMidpointGapFixedL { l, k1, k2 } => {
                let l = match l {
                    Some(l) => dst(l)?,
                    None => game.zero_l(),
                };
                let (k1, k2) = (ctl(k1)?, ctl(k2)?);
                (objective(game, &k1, &l) + objective(game, &k2, &l)) / 2.0 - objective(game, &k1.midpoint(&k2), &l)
            }
            Measure::OuterMidpointGap { k1, k2 } => {
                let (k1, k2) = (ctl(k1)?, ctl(k2)?);
                let mid = k1.midpoint(&k2);
                (outer(&k1)?.objective + outer(&k2)?.objective) / 2.0 - outer(&mid)?.objective
            }
            Measure::OuterValue { k } => outer(&ctl(k)?)?.objective,
            Measure::LambdaMinH { k } => outer(&ctl(k)?)?.lambda_min_h,
            Measure::LambdaMinHMidpoint { k1, k2 } => outer(&ctl(k1)?.midpoint(&ctl(k2)?))?.lambda_min_h,
        };
        writeln!(csv, "{},{}", p.name, value).expect("string write");
        metrics.insert(p.name.clone(), value);
    }
    Ok(Raw {
        status: "evaluated".into(),
        converged: true,
        diverged: false,
        feasible: true,
        ir_ok: None,
        metrics,
        trace_csv: csv,
    })
}

fn dispatch(exp: &Experiment, sys: &LoadedSystem) -> Result<Raw, RunError> {
    let game = CompactGame::new(&sys.game);
    let scheme = exp.scheme.as_str();
    match &exp.task {
        Task::DoubleLoop { k0, l0, settings, schemes } => {
            let s = scheme_of(schemes, scheme)?;
            let k0 = load_gain(Some(k0), Player::Controller, &game, "task.k0")?;
            let l0 = load_gain(l0.as_ref(), Player::Disturbance, &game, "task.l0")?;
            let cert = certificate(&game, &k0)?;
            let out = double_loop(&game, &k0, &l0, rules(s)?, &loop_config(settings, s))?;
            let mut raw = Raw::from_trace(out.status, &out.trace, true);
            raw.metrics.insert("k0_lambda_min_h".into(), cert);
            if let Ok(nash) = grde(&sys.game) {
                raw.metrics.insert("distance_to_nash_k".into(), out.k.sub(&nash.k_star).norm());
                raw.metrics.insert("distance_to_nash_l".into(), out.l.sub(&nash.l_star).norm());
            }
            Ok(raw)
        }
        Task::Gda { k0, l0, settings, schemes } => {
            let s = scheme_of(schemes, scheme)?;
            let k0 = load_gain(Some(k0), Player::Controller, &game, "task.k0")?;
            let l0 = load_gain(l0.as_ref(), Player::Disturbance, &game, "task.l0")?;
            let cert = certificate(&game, &k0).unwrap_or(f64::NAN);
            let (update, cfg) = gda_config(settings, s, "task")?;
            let out = gda_variant(update, &game, &k0, &l0, &cfg)?;
            let mut raw = Raw::from_trace(RunStatus::MaxIterations, &out.trace, false);
            raw.status = if out.blew_up { "blew_up" } else if out.diverged { "diverged" } else { "max_iterations" }.into();
            raw.diverged = out.diverged;
            // A descent–ascent run "converges" only in the sense of not blowing up.
            raw.converged = !out.diverged;
            raw.metrics.insert("k0_lambda_min_h".into(), cert);
            raw.metrics.insert("growth".into(), out.growth);
            raw.metrics.insert("iterations".into(), out.iterations as f64);
            Ok(raw)
        }
        Task::ZoInner { k, l0, zo, schemes } => {
            let s = scheme_of(schemes, scheme)?;
            let k = load_gain(Some(k), Player::Controller, &game, "task.k")?;
            let l0 = load_gain(l0.as_ref(), Player::Disturbance, &game, "task.l0")?;
            let cert = certificate(&game, &k)?;
            let cfg = seeded(zo, &s.patch, exp.seed);
            let out = zo_inner(&game, &k, &l0, zo_rule(s)?, &cfg, &Streams::new(exp.seed))?;
            let mut raw = Raw::from_trace(out.status, &out.trace, false);
            raw.metrics.insert("k0_lambda_min_h".into(), cert);
            Ok(raw)
        }
        Task::ZoDoubleLoop { k0, l0, zo, schemes } => {
            let s = scheme_of(schemes, scheme)?;
            let k0 = load_gain(Some(k0), Player::Controller, &game, "task.k0")?;
            let l0 = load_gain(l0.as_ref(), Player::Disturbance, &game, "task.l0")?;
            let cert = certificate(&game, &k0)?;
            let out = zo_double_loop(&game, &k0, &l0, zo_rule(s)?, &seeded(zo, &s.patch, exp.seed))?;
            let mut raw = Raw::from_trace(out.status, &out.trace, true);
            raw.metrics.insert("k0_lambda_min_h".into(), cert);
            Ok(raw)
        }
        Task::ZoOuter { k0, zo, schemes } => {
            let s = scheme_of(schemes, scheme)?;
            let k0 = load_gain(Some(k0), Player::Controller, &game, "task.k0")?;
            let cert = certificate(&game, &k0)?;
            let out = zo_outer(&game, &k0, &seeded(zo, &s.patch, exp.seed), &s.oracle.to_oracle())?;
            let mut raw = Raw::from_trace(out.status, &out.trace, true);
            raw.metrics.insert("k0_lambda_min_h".into(), cert);
            raw.metrics.insert("infeasible_samples".into(), out.infeasible_samples as f64);
            Ok(raw)
        }
        Task::Landscape { probes } => landscape(&game, probes),
        Task::Equivalence { tol } => {
            let formulation = sys.formulation.as_ref().ok_or_else(|| {
                RunError::new(ExitKind::ConfigError, "config", "equivalence needs an leqg or da system")
            })?;
            let rep = verify_equivalence(formulation, *tol)?;
            let mut metrics = BTreeMap::new();
            let max_disc = rep.gain_discrepancy.iter().copied().fold(0.0, f64::max);
            metrics.insert("max_gain_discrepancy".into(), max_disc);
            metrics.insert("min_margin".into(), rep.rde.min_margin());
            if let Some(g) = rep.gradient_norm {
                metrics.insert("gradient_norm".into(), g);
            }
            if let Some(g) = rep.trace_gradient_norm {
                metrics.insert("trace_gradient_norm".into(), g);
            }
            let mut csv = String::from("step,margin,gain_discrepancy\n");
            for (t, m) in rep.rde.margins.iter().enumerate() {
                let d = rep.gain_discrepancy.get(t).map(|d| d.to_string()).unwrap_or_default();
                writeln!(csv, "{t},{m},{d}").expect("string write");
            }
            Ok(Raw {
                status: if rep.stationary { "stationary" } else { "not_stationary" }.into(),
                converged: rep.stationary,
                diverged: false,
                feasible: rep.formulation_feasible,
                ir_ok: None,
                metrics,
                trace_csv: csv,
            })
        }
    }
}

/// Runs a validated experiment.
pub fn run_experiment(exp: &Experiment) -> Result<RunOutput, RunError> {
    let sys = exp.validate()?;
    let raw = dispatch(exp, &sys)?;
    let checks: Vec<CheckResult> = exp
        .checks
        .iter()
        .map(|c| {
            let value = raw.metrics.get(&c.metric).copied();
            CheckResult {
                metric: c.metric.clone(),
                expected: c.expected,
                tol: c.tol,
                relative: c.relative,
                value: value.filter(|v| v.is_finite()),
                pass: value.is_some_and(|v| c.passes(v)),
            }
        })
        .collect();
    let exit = if !raw.feasible {
        ExitKind::Infeasible
    } else if exp.require_convergence && (raw.diverged || !raw.converged) {
        ExitKind::NotConverged
    } else {
        ExitKind::Success
    };
    let summary = RunSummary {
        experiment: exp.name.clone(),
        scheme: exp.scheme.clone(),
        task: exp.task.kind().into(),
        seed: exp.seed,
        status: raw.status,
        converged: raw.converged,
        diverged: raw.diverged,
        feasible: raw.feasible,
        ir_ok: raw.ir_ok,
        metrics: raw.metrics.into_iter().map(|(k, v)| (k, v.is_finite().then_some(v))).collect(),
        checks_pass: checks.iter().all(|c| c.pass),
        checks,
        exit_code: exit.code(),
    };
    Ok(RunOutput { summary, trace_csv: raw.trace_csv })
}

/// Parses, validates and runs a config document.
pub fn run_config(text: &str) -> Result<RunOutput, RunError> {
    run_experiment(&parse_config(text)?)
}
