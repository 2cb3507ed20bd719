//! JSON experiment configs.
//!
//! Matrices are row-major `[[row], …]`; a per-step quantity is either one
//! matrix (repeated over the horizon) or a list with one matrix per step.
//! A config names either a registered preset or an inline experiment:
//!
//! ```json
//! { "preset": "sec51_case1", "scheme": "gn-gn", "seed": 3 }
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::equiv::{DaSystem, Formulation, LeqgSystem};
use crate::error::LqError;
use crate::exact_opt::{GdaConfig, GdaScheme, InnerStop, LoopConfig, UpdateRule};
use crate::linalg::Mat;
use crate::lq_core::{CompactGame, GainSchedule, NoiseKind, NoiseModel, Player, TimeVaryingSystem};
use crate::zo_est::{InnerOracle, ZoConfig};

/// A parse or validation failure, located by JSON position and field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted field path such as `experiment.system.a[2]`; empty if unknown.
    pub path: String,
    /// 1-based position in the document (0 when not applicable).
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ConfigError {
    pub fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), line: 0, column: 0, message: message.into() }
    }

    fn from_serde(err: serde_path_to_error::Error<serde_json::Error>) -> Self {
        let path = err.path().to_string();
        let inner = err.into_inner();
        let (line, column) = (inner.line(), inner.column());
        let mut message = inner.to_string();
        let suffix = format!(" at line {line} column {column}");
        if message.ends_with(&suffix) {
            message.truncate(message.len() - suffix.len());
        }
        Self { path: if path == "." { String::new() } else { path }, line, column, message }
    }

    fn solver(path: &str, err: LqError) -> Self {
        Self::at(path, err.to_string())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {} column {}: ", self.line, self.column)?;
        }
        if !self.path.is_empty() {
            write!(f, "field `{}`: ", self.path)?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> ConfigResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(de).map_err(ConfigError::from_serde)?;
    Ok(value)
}

/// Row-major dense matrix.
pub type MatrixSpec = Vec<Vec<f64>>;

pub fn matrix_from_spec(rows: &MatrixSpec, path: &str) -> ConfigResult<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(ConfigError::at(path, "matrix must be non-empty"));
    }
    if let Some(i) = rows.iter().position(|row| row.len() != c) {
        return Err(ConfigError::at(path, format!("row {i} has {} entries, expected {c}", rows[i].len())));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(ConfigError::at(path, "matrix entries must be finite"));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn matrix_to_spec(m: &Mat) -> MatrixSpec {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// One matrix for every step, or one per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerStep {
    Constant(MatrixSpec),
    Steps(Vec<MatrixSpec>),
}

impl PerStep {
    pub fn resolve(&self, count: usize, path: &str) -> ConfigResult<Vec<Mat>> {
        match self {
            PerStep::Constant(m) => {
                let m = matrix_from_spec(m, path)?;
                if count.saturating_mul(m.len()) > MAX_COMPACT_DIM * MAX_COMPACT_DIM {
                    return Err(ConfigError::at(path, "per-step data too large"));
                }
                Ok(vec![m; count])
            }
            PerStep::Steps(ms) => {
                if ms.len() != count {
                    return Err(ConfigError::at(path, format!("expected {count} matrices, got {}", ms.len())));
                }
                ms.iter().enumerate().map(|(i, m)| matrix_from_spec(m, &format!("{path}[{i}]"))).collect()
            }
        }
    }

    /// Collapses equal matrices into the constant form.
    pub fn from_mats(ms: &[Mat]) -> Self {
        if ms.windows(2).all(|w| w[0] == w[1]) {
            PerStep::Constant(matrix_to_spec(&ms[0]))
        } else {
            PerStep::Steps(ms.iter().map(matrix_to_spec).collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Sphere,
    TruncatedGaussian { clip: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub horizon: usize,
    pub a: PerStep,
    pub b: PerStep,
    pub d: PerStep,
    /// `Q_0, …, Q_N`.
    pub q: PerStep,
    pub ru: PerStep,
    pub rw: PerStep,
    /// Covariance of `x₀` and of each `ξ_t`.
    pub sigma0: MatrixSpec,
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeqgSpec {
    pub horizon: usize,
    pub a: PerStep,
    pub b: PerStep,
    /// `Q_0, …, Q_N`.
    pub q: PerStep,
    pub r: PerStep,
    pub w: MatrixSpec,
    pub x0: MatrixSpec,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DaSpec {
    pub horizon: usize,
    pub a: PerStep,
    pub b: PerStep,
    pub d: PerStep,
    pub c: PerStep,
    pub e: PerStep,
    pub q_n: MatrixSpec,
    pub gamma: f64,
}

/// Problem data, discriminated by `formulation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formulation", rename_all = "snake_case")]
pub enum SystemSpec {
    Game(GameSpec),
    Leqg(LeqgSpec),
    Da(DaSpec),
}

/// A validated system: the game and, for the other formulations, the
/// original problem it was mapped from.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSystem {
    pub game: TimeVaryingSystem,
    pub formulation: Option<Formulation>,
}

/// Longest accepted horizon; guards allocation on untrusted input.
pub const MAX_HORIZON: usize = 10_000;
/// Largest accepted compact dimension `(N + 1)·m`.
pub const MAX_COMPACT_DIM: usize = 2048;

fn check_compact(sys: &TimeVaryingSystem, path: &str) -> ConfigResult<()> {
    let dim = (sys.horizon() + 1) * sys.state_dim();
    if dim > MAX_COMPACT_DIM {
        return Err(ConfigError::at(path, format!("compact dimension {dim} exceeds {MAX_COMPACT_DIM}")));
    }
    Ok(())
}

fn check_horizon(n: usize, path: &str) -> ConfigResult<()> {
    if n == 0 || n > MAX_HORIZON {
        return Err(ConfigError::at(format!("{path}.horizon"), format!("horizon must be in 1..={MAX_HORIZON}")));
    }
    Ok(())
}

impl SystemSpec {
    pub fn load(&self, path: &str) -> ConfigResult<LoadedSystem> {
        let f = |name: &str| format!("{path}.{name}");
        match self {
            SystemSpec::Game(g) => {
                let n = g.horizon;
                check_horizon(n, path)?;
                let sigma = matrix_from_spec(&g.sigma0, &f("sigma0"))?;
                let kind = match g.noise {
                    NoiseSpec::Sphere => NoiseKind::Sphere,
                    NoiseSpec::TruncatedGaussian { clip } => NoiseKind::TruncatedGaussian { clip },
                };
                let noise = NoiseModel::new(sigma, kind).map_err(|e| ConfigError::solver(&f("sigma0"), e))?;
                let game = TimeVaryingSystem::new(
                    g.a.resolve(n, &f("a"))?,
                    g.b.resolve(n, &f("b"))?,
                    g.d.resolve(n, &f("d"))?,
                    g.q.resolve(n + 1, &f("q"))?,
                    g.ru.resolve(n, &f("ru"))?,
                    g.rw.resolve(n, &f("rw"))?,
                    noise,
                )
                .map_err(|e| ConfigError::solver(path, e))?;
                check_compact(&game, path)?;
                Ok(LoadedSystem { game, formulation: None })
            }
            SystemSpec::Leqg(s) => {
                let n = s.horizon;
                check_horizon(n, path)?;
                let sys = LeqgSystem::new(
                    s.a.resolve(n, &f("a"))?,
                    s.b.resolve(n, &f("b"))?,
                    s.q.resolve(n + 1, &f("q"))?,
                    s.r.resolve(n, &f("r"))?,
                    matrix_from_spec(&s.w, &f("w"))?,
                    matrix_from_spec(&s.x0, &f("x0"))?,
                    s.beta,
                )
                .map_err(|e| ConfigError::solver(path, e))?;
                let game = sys.to_game();
                check_compact(&game, path)?;
                Ok(LoadedSystem { game, formulation: Some(Formulation::Leqg(sys)) })
            }
            SystemSpec::Da(s) => {
                let n = s.horizon;
                check_horizon(n, path)?;
                let sys = DaSystem::new(
                    s.a.resolve(n, &f("a"))?,
                    s.b.resolve(n, &f("b"))?,
                    s.d.resolve(n, &f("d"))?,
                    s.c.resolve(n, &f("c"))?,
                    s.e.resolve(n, &f("e"))?,
                    matrix_from_spec(&s.q_n, &f("q_n"))?,
                    s.gamma,
                )
                .map_err(|e| ConfigError::solver(path, e))?;
                let game = sys.to_game();
                check_compact(&game, path)?;
                Ok(LoadedSystem { game, formulation: Some(Formulation::Da(sys)) })
            }
        }
    }

    pub fn from_game(sys: &TimeVaryingSystem) -> Self {
        let noise = match sys.noise().kind() {
            NoiseKind::Sphere => NoiseSpec::Sphere,
            NoiseKind::TruncatedGaussian { clip } => NoiseSpec::TruncatedGaussian { clip },
        };
        SystemSpec::Game(GameSpec {
            horizon: sys.horizon(),
            a: PerStep::from_mats(sys.a()),
            b: PerStep::from_mats(sys.b()),
            d: PerStep::from_mats(sys.d()),
            q: PerStep::from_mats(sys.q()),
            ru: PerStep::from_mats(sys.ru()),
            rw: PerStep::from_mats(sys.rw()),
            sigma0: matrix_to_spec(sys.noise().sigma0_step()),
            noise,
        })
    }

    pub fn from_da(sys: &DaSystem) -> Self {
        SystemSpec::Da(DaSpec {
            horizon: sys.horizon(),
            a: PerStep::from_mats(sys.a()),
            b: PerStep::from_mats(sys.b()),
            d: PerStep::from_mats(sys.d()),
            c: PerStep::from_mats(sys.c()),
            e: PerStep::from_mats(sys.e()),
            q_n: matrix_to_spec(sys.q_n()),
            gamma: sys.gamma(),
        })
    }
}

/// Gain blocks; dimensions are checked against the game at load time.
pub type GainSpec = PerStep;

pub fn load_gain(spec: Option<&GainSpec>, player: Player, game: &CompactGame, path: &str) -> ConfigResult<GainSchedule> {
    let rows = match player {
        Player::Controller => game.control_dim(),
        Player::Disturbance => game.disturbance_dim(),
    };
    let (m, n) = (game.state_dim(), game.horizon());
    let Some(spec) = spec else {
        return Ok(GainSchedule::zeros(player, rows, m, n));
    };
    let blocks = spec.resolve(n, path)?;
    if let Some((t, b)) = blocks.iter().enumerate().find(|(_, b)| b.nrows() != rows || b.ncols() != m) {
        return Err(ConfigError::at(
            path,
            format!("block {t} is {}x{}, expected {rows}x{m}", b.nrows(), b.ncols()),
        ));
    }
    GainSchedule::new(player, blocks).map_err(|e| ConfigError::solver(path, e))
}

/// Parses a standalone gain schedule (`PerStep` JSON) for `horizon` steps.
pub fn parse_gain_schedule(text: &str, player: Player, horizon: usize) -> ConfigResult<GainSchedule> {
    let spec: GainSpec = parse_json(text)?;
    if horizon == 0 || horizon > MAX_HORIZON {
        return Err(ConfigError::at("", format!("horizon must be in 1..={MAX_HORIZON}")));
    }
    GainSchedule::new(player, spec.resolve(horizon, "")?).map_err(|e| ConfigError::solver("", e))
}

/// Parses and validates a standalone system spec.
pub fn parse_system(text: &str) -> ConfigResult<LoadedSystem> {
    let spec: SystemSpec = parse_json(text)?;
    spec.load("")
}

fn rule_from_str(s: &str, path: &str) -> ConfigResult<UpdateRule> {
    match s {
        "pg" => Ok(UpdateRule::Pg),
        "npg" => Ok(UpdateRule::Npg),
        "gn" => Ok(UpdateRule::Gn),
        other => Err(ConfigError::at(path, format!("unknown update rule `{other}` (pg, npg, gn)"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStopSpec {
    Gap,
    GradNorm,
}

/// Double-loop settings shared by every scheme of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSpec {
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub max_inner: usize,
    pub monitor_ir: bool,
    pub exact_inner: bool,
    pub inner_stop: InnerStopSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleLoopScheme {
    pub inner: String,
    pub outer: String,
    pub eta: f64,
    pub alpha: f64,
    pub max_outer: usize,
    /// Stop once `‖F(K, L)‖_F` falls below this.
    pub outer_grad_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdaSpec {
    pub cap: f64,
    pub growth_threshold: f64,
    pub record_stride: usize,
    pub stop_on_divergence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdaSchemeSpec {
    /// `angda`, `tau-ngda` or `dmsa`.
    pub update: String,
    pub eta: f64,
    pub alpha: f64,
    pub ascent_steps: usize,
    pub iters: usize,
}

/// Per-scheme overrides of a zeroth-order config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoPatch {
    pub m1: Option<usize>,
    pub m2: Option<usize>,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
    pub inner_iters: Option<usize>,
    pub outer_iters: Option<usize>,
}

impl ZoPatch {
    pub fn apply(&self, base: &ZoConfig) -> ZoConfig {
        let mut c = base.clone();
        c.m1 = self.m1.unwrap_or(c.m1);
        c.m2 = self.m2.unwrap_or(c.m2);
        c.r1 = self.r1.unwrap_or(c.r1);
        c.r2 = self.r2.unwrap_or(c.r2);
        c.eta = self.eta.unwrap_or(c.eta);
        c.alpha = self.alpha.unwrap_or(c.alpha);
        c.inner_iters = self.inner_iters.unwrap_or(c.inner_iters);
        c.outer_iters = self.outer_iters.unwrap_or(c.outer_iters);
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoInnerScheme {
    /// `pg` or `npg`.
    pub rule: String,
    #[serde(default)]
    pub patch: ZoPatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    Exact,
    Npg { eta: f64, tol: f64, max_iters: usize },
    ZoPg,
    ZoNpg,
}

impl OracleSpec {
    pub fn to_oracle(self) -> InnerOracle {
        match self {
            OracleSpec::Exact => InnerOracle::Exact,
            OracleSpec::Npg { eta, tol, max_iters } => InnerOracle::Npg { eta, tol, max_iters },
            OracleSpec::ZoPg => InnerOracle::Zo { rule: UpdateRule::Pg },
            OracleSpec::ZoNpg => InnerOracle::Zo { rule: UpdateRule::Npg },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoOuterScheme {
    pub oracle: OracleSpec,
    #[serde(default)]
    pub patch: ZoPatch,
}

/// A scalar landscape quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Measure {
    /// `(G(K,L₁) + G(K,L₂))/2 − G(K,(L₁+L₂)/2)`.
    InnerMidpointGap { k: GainSpec, l1: GainSpec, l2: GainSpec },
    /// `(G(K₁,L) + G(K₂,L))/2 − G((K₁+K₂)/2,L)`.
    OuterMidpointGapFixedL { l: Option<GainSpec>, k1: GainSpec, k2: GainSpec },
    /// The same with `L = L(K)` at each point.
    OuterMidpointGap { k1: GainSpec, k2: GainSpec },
    /// `G(K, L(K))`.
    OuterValue { k: GainSpec },
    /// `λ_min(H_{K,L(K)})`.
    LambdaMinH { k: GainSpec },
    /// `λ_min(H)` at the midpoint of two gains.
    LambdaMinHMidpoint { k1: GainSpec, k2: GainSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub name: String,
    pub measure: Measure,
}

/// What to run on the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    DoubleLoop {
        k0: GainSpec,
        l0: Option<GainSpec>,
        settings: LoopSpec,
        schemes: BTreeMap<String, DoubleLoopScheme>,
    },
    Gda {
        k0: GainSpec,
        l0: Option<GainSpec>,
        settings: GdaSpec,
        schemes: BTreeMap<String, GdaSchemeSpec>,
    },
    ZoInner {
        k: GainSpec,
        l0: Option<GainSpec>,
        zo: ZoConfig,
        schemes: BTreeMap<String, ZoInnerScheme>,
    },
    ZoDoubleLoop {
        k0: GainSpec,
        l0: Option<GainSpec>,
        zo: ZoConfig,
        schemes: BTreeMap<String, ZoInnerScheme>,
    },
    ZoOuter {
        k0: GainSpec,
        zo: ZoConfig,
        schemes: BTreeMap<String, ZoOuterScheme>,
    },
    Landscape {
        probes: Vec<Probe>,
    },
    Equivalence {
        tol: f64,
    },
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::DoubleLoop { .. } => "double_loop",
            Task::Gda { .. } => "gda",
            Task::ZoInner { .. } => "zo_inner",
            Task::ZoDoubleLoop { .. } => "zo_double_loop",
            Task::ZoOuter { .. } => "zo_outer",
            Task::Landscape { .. } => "landscape",
            Task::Equivalence { .. } => "equivalence",
        }
    }

    /// Scheme names accepted by this task, in order.
    pub fn scheme_names(&self) -> Vec<String> {
        match self {
            Task::DoubleLoop { schemes, .. } => schemes.keys().cloned().collect(),
            Task::Gda { schemes, .. } => schemes.keys().cloned().collect(),
            Task::ZoInner { schemes, .. } | Task::ZoDoubleLoop { schemes, .. } => schemes.keys().cloned().collect(),
            Task::ZoOuter { schemes, .. } => schemes.keys().cloned().collect(),
            Task::Landscape { .. } | Task::Equivalence { .. } => vec![self.kind().to_string()],
        }
    }

    /// Metric names the runner reports for this task.
    pub fn metric_names(&self) -> Vec<String> {
        let iterative = [
            "k0_lambda_min_h",
            "initial_objective",
            "final_objective",
            "final_grad_norm",
            "initial_lambda_min_h",
            "final_lambda_min_h",
            "min_lambda_min_h",
            "iterations",
        ];
        let mut out: Vec<String> = match self {
            Task::Landscape { probes } => probes.iter().map(|p| p.name.clone()).collect(),
            Task::Equivalence { .. } => {
                ["max_gain_discrepancy", "gradient_norm", "trace_gradient_norm", "min_margin"].map(String::from).to_vec()
            }
            _ => iterative.map(String::from).to_vec(),
        };
        match self {
            Task::DoubleLoop { .. } => {
                out.extend(["distance_to_nash_k", "distance_to_nash_l", "ir_violations"].map(String::from))
            }
            Task::ZoDoubleLoop { .. } => out.push("ir_violations".into()),
            Task::Gda { .. } => out.push("growth".into()),
            Task::ZoOuter { .. } => out.extend(["infeasible_samples", "ir_violations"].map(String::from)),
            _ => {}
        }
        out
    }
}

/// Expected value of a reported metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub metric: String,
    pub expected: f64,
    pub tol: f64,
    /// Compare `|value/expected − 1|` instead of `|value − expected|`.
    #[serde(default)]
    pub relative: bool,
}

impl Check {
    pub fn passes(&self, value: f64) -> bool {
        let err = if self.relative { (value / self.expected - 1.0).abs() } else { (value - self.expected).abs() };
        err <= self.tol
    }
}

/// A complete, self-contained experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub description: String,
    pub system: SystemSpec,
    pub task: Task,
    /// Default scheme (a key of the task's `schemes`, or the task kind).
    pub scheme: String,
    /// Seeds all sampling; replaces `zo.seed`.
    pub seed: u64,
    /// A non-converged run exits with status 4 when set.
    pub require_convergence: bool,
    #[serde(default)]
    pub checks: Vec<Check>,
}

impl Experiment {
    /// Validates everything that can be checked without running.
    pub fn validate(&self) -> ConfigResult<LoadedSystem> {
        let sys = self.system.load("system")?;
        let names = self.task.scheme_names();
        if !names.contains(&self.scheme) {
            return Err(ConfigError::at("scheme", format!("unknown scheme `{}` (available: {})", self.scheme, names.join(", "))));
        }
        let metrics = self.task.metric_names();
        for (i, c) in self.checks.iter().enumerate() {
            if !metrics.contains(&c.metric) {
                return Err(ConfigError::at(format!("checks[{i}].metric"), format!("unknown metric `{}`", c.metric)));
            }
            if !(c.tol.is_finite() && c.tol >= 0.0 && c.expected.is_finite()) {
                return Err(ConfigError::at(format!("checks[{i}]"), "expected and tol must be finite, tol ≥ 0"));
            }
        }
        let game = CompactGame::new(&sys.game);
        let pos = |x: f64, path: &str| -> ConfigResult<()> {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::at(path, format!("must be positive and finite, got {x}")))
            }
        };
        match &self.task {
            Task::DoubleLoop { k0, l0, settings, schemes } => {
                load_gain(Some(k0), Player::Controller, &game, "task.k0")?;
                load_gain(l0.as_ref(), Player::Disturbance, &game, "task.l0")?;
                for (name, s) in schemes {
                    let path = format!("task.schemes.{name}");
                    rule_from_str(&s.inner, &format!("{path}.inner"))?;
                    rule_from_str(&s.outer, &format!("{path}.outer"))?;
                    loop_config(settings, s).validate().map_err(|e| ConfigError::solver(&path, e))?;
                }
            }
            Task::Gda { k0, l0, settings, schemes } => {
                load_gain(Some(k0), Player::Controller, &game, "task.k0")?;
                load_gain(l0.as_ref(), Player::Disturbance, &game, "task.l0")?;
                for (name, s) in schemes {
                    let path = format!("task.schemes.{name}");
                    let (_, cfg) = gda_config(settings, s, &path)?;
                    cfg.validate().map_err(|e| ConfigError::solver(&path, e))?;
                }
            }
            Task::ZoInner { k: k0, l0, zo, schemes } | Task::ZoDoubleLoop { k0, l0, zo, schemes } => {
                load_gain(Some(k0), Player::Controller, &game, "task.k")?;
                load_gain(l0.as_ref(), Player::Disturbance, &game, "task.l0")?;
                for (name, s) in schemes {
                    let path = format!("task.schemes.{name}");
                    match rule_from_str(&s.rule, &format!("{path}.rule"))? {
                        UpdateRule::Gn => return Err(ConfigError::at(format!("{path}.rule"), "zeroth-order inner loops use pg or npg")),
                        _ => s.patch.apply(zo).validate().map_err(|e| ConfigError::solver(&path, e))?,
                    }
                }
            }
            Task::ZoOuter { k0, zo, schemes } => {
                load_gain(Some(k0), Player::Controller, &game, "task.k0")?;
                for (name, s) in schemes {
                    let path = format!("task.schemes.{name}");
                    s.patch.apply(zo).validate().map_err(|e| ConfigError::solver(&path, e))?;
                    if let OracleSpec::Npg { eta, tol, .. } = s.oracle {
                        pos(eta, &format!("{path}.oracle.npg.eta"))?;
                        pos(tol, &format!("{path}.oracle.npg.tol"))?;
                    }
                }
            }
            Task::Landscape { probes } => {
                for (i, p) in probes.iter().enumerate() {
                    let path = format!("task.probes[{i}]");
                    let c = |g: &GainSpec, f: &str| load_gain(Some(g), Player::Controller, &game, &format!("{path}.{f}")).map(drop);
                    let d = |g: &GainSpec, f: &str| load_gain(Some(g), Player::Disturbance, &game, &format!("{path}.{f}")).map(drop);
                    match &p.measure {
                        Measure::InnerMidpointGap { k, l1, l2 } => {
                            c(k, "k")?;
                            d(l1, "l1")?;
                            d(l2, "l2")?;
                        }
                        Measure::OuterMidpointGapFixedL { l, k1, k2 } => {
                            if let Some(l) = l {
                                d(l, "l")?;
                            }
                            c(k1, "k1")?;
                            c(k2, "k2")?;
                        }
                        Measure::OuterMidpointGap { k1, k2 } | Measure::LambdaMinHMidpoint { k1, k2 } => {
                            c(k1, "k1")?;
                            c(k2, "k2")?;
                        }
                        Measure::OuterValue { k } | Measure::LambdaMinH { k } => c(k, "k")?,
                    }
                }
            }
            Task::Equivalence { tol } => {
                pos(*tol, "task.tol")?;
                if sys.formulation.is_none() {
                    return Err(ConfigError::at("system.formulation", "equivalence needs an leqg or da system"));
                }
            }
        }
        Ok(sys)
    }
}

pub fn loop_config(s: &LoopSpec, scheme: &DoubleLoopScheme) -> LoopConfig {
    LoopConfig {
        eta: scheme.eta,
        alpha: scheme.alpha,
        inner_tol: s.inner_tol,
        outer_tol: s.outer_tol,
        max_inner: s.max_inner,
        max_outer: scheme.max_outer,
        monitor_ir: s.monitor_ir,
        exact_inner: s.exact_inner,
        inner_stop: match s.inner_stop {
            InnerStopSpec::Gap => InnerStop::Gap,
            InnerStopSpec::GradNorm => InnerStop::GradNorm,
        },
        outer_grad_tol: scheme.outer_grad_tol,
    }
}

pub fn rules(scheme: &DoubleLoopScheme) -> ConfigResult<(UpdateRule, UpdateRule)> {
    Ok((rule_from_str(&scheme.inner, "inner")?, rule_from_str(&scheme.outer, "outer")?))
}

pub fn zo_rule(scheme: &ZoInnerScheme) -> ConfigResult<UpdateRule> {
    rule_from_str(&scheme.rule, "rule")
}

pub fn gda_config(s: &GdaSpec, scheme: &GdaSchemeSpec, path: &str) -> ConfigResult<(GdaScheme, GdaConfig)> {
    let update = scheme.update.parse::<GdaScheme>().map_err(|e| ConfigError::solver(&format!("{path}.update"), e))?;
    let mut c = GdaConfig::new(scheme.eta, scheme.alpha, scheme.ascent_steps, scheme.iters);
    c.cap = s.cap;
    c.growth_threshold = s.growth_threshold;
    c.record_stride = s.record_stride;
    c.stop_on_divergence = s.stop_on_divergence;
    Ok((update, c))
}

/// Top-level config document: a preset reference or an inline experiment,
/// with optional scheme/seed overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub require_convergence: Option<bool>,
}

impl ExperimentConfig {
    pub fn from_preset(name: &str) -> Self {
        Self { preset: Some(name.into()), experiment: None, scheme: None, seed: None, require_convergence: None }
    }

    /// The experiment with overrides applied, validated.
    pub fn resolve(&self) -> ConfigResult<Experiment> {
        let mut exp = match (&self.preset, &self.experiment) {
            (Some(name), None) => super::presets::preset(name)
                .ok_or_else(|| ConfigError::at("preset", format!("unknown preset `{name}`")))?,
            (None, Some(e)) => e.clone(),
            (Some(_), Some(_)) => return Err(ConfigError::at("", "give either `preset` or `experiment`, not both")),
            (None, None) => return Err(ConfigError::at("", "one of `preset` or `experiment` is required")),
        };
        if let Some(s) = &self.scheme {
            exp.scheme = s.clone();
        }
        if let Some(s) = self.seed {
            exp.seed = s;
        }
        if let Some(r) = self.require_convergence {
            exp.require_convergence = r;
        }
        exp.validate()?;
        Ok(exp)
    }
}

/// Parses a config document and resolves it to a validated experiment.
pub fn parse_config(text: &str) -> ConfigResult<Experiment> {
    let cfg: ExperimentConfig = parse_json(text)?;
    cfg.resolve()
}

/// Parses a document without resolving presets or validating.
pub fn parse_config_document(text: &str) -> ConfigResult<ExperimentConfig> {
    parse_json(text)
}
