//! Registered experiments. Every hyperparameter is spelled out; nothing is
//! left to a default.

use std::collections::BTreeMap;

use crate::linalg::Mat;
use crate::zo_est::ZoConfig;

use super::config::*;
use super::fixtures::*;

/// Names and one-line descriptions, in stable order.
pub const PRESETS: &[(&str, &str)] = &[
    ("sec51_case1", "Exact double loop on the 3-state benchmark (N = 5, Rʷ = 5I, Σ₀ = I) from the well-conditioned K₀"),
    ("sec51_case2", "Exact double loop on the benchmark from a K₀ close to the boundary of the feasible set"),
    ("sec52_zo_inner", "Zeroth-order inner loop with exact NPG outer steps (Σ₀ = 0.1I)"),
    ("sec53_zo_outer", "Zeroth-order outer NPG loop (Σ₀ = 0.05I, r₂ = 0.08)"),
    ("sec54_divergence", "Single-loop descent–ascent schemes blowing up from a fixed (K₀, L₀)"),
    ("sec55_time_varying", "Exact NPG double loop on the time-varying system A_t = A + (−1)ᵗtA/10 (likewise B_t, D_t), Rʷ = 10I"),
    ("lemma_nonconvex", "Inner nonconcavity and outer nonconvexity midpoint gaps on the benchmark"),
    ("lemma_outer_landscape", "Outer objective G(K, L(K)) is nonconvex on 𝒦 (Rʷ = 7.22543I)"),
    ("scalar_noncoercive", "Scalar N = 2 game: G(K, L(K)) stays finite as K approaches the boundary of 𝒦"),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

fn gain(m: Mat) -> GainSpec {
    PerStep::Constant(matrix_to_spec(&m))
}

fn experiment(name: &str, system: SystemSpec, task: Task, scheme: &str, checks: Vec<Check>) -> Experiment {
    let description = PRESETS.iter().find(|(n, _)| *n == name).map(|(_, d)| d.to_string()).unwrap_or_default();
    Experiment {
        name: name.into(),
        description,
        system,
        task,
        scheme: scheme.into(),
        seed: 0,
        require_convergence: false,
        checks,
    }
}

fn abs(metric: &str, expected: f64, tol: f64) -> Check {
    Check { metric: metric.into(), expected, tol, relative: false }
}

fn rel(metric: &str, expected: f64, tol: f64) -> Check {
    Check { metric: metric.into(), expected, tol, relative: true }
}

fn dl(inner: &str, outer: &str, eta: f64, alpha: f64, max_outer: usize, outer_grad_tol: Option<f64>) -> DoubleLoopScheme {
    DoubleLoopScheme { inner: inner.into(), outer: outer.into(), eta, alpha, max_outer, outer_grad_tol }
}

fn loop_settings() -> LoopSpec {
    LoopSpec {
        inner_tol: 1e-3,
        // The averaged-gradient stop is disabled; schemes stop on ‖F‖.
        outer_tol: 1e-300,
        max_inner: 100_000,
        // Record implicit-regularisation violations without stopping: with an
        // inexact inner loop, tiny ones appear near the fixed point.
        monitor_ir: false,
        exact_inner: false,
        inner_stop: InnerStopSpec::Gap,
    }
}

fn sec51(name: &str, k0: Mat, schemes: BTreeMap<String, DoubleLoopScheme>, certificate: f64) -> Experiment {
    experiment(
        name,
        SystemSpec::from_game(&base_game(5.0, 1.0)),
        Task::DoubleLoop { k0: gain(k0), l0: None, settings: loop_settings(), schemes },
        "npg-npg",
        vec![abs("k0_lambda_min_h", certificate, 5e-4)],
    )
}

fn map<T>(items: impl IntoIterator<Item = (&'static str, T)>) -> BTreeMap<String, T> {
    items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn sec52() -> Experiment {
    let zo = ZoConfig {
        m1: 1_000_000,
        m2: 1,
        r1: 1.0,
        r2: 1.0,
        eta: 8e-3,
        alpha: 4.5756e-4,
        inner_iters: 200,
        outer_iters: 20,
        eps1: 0.8,
        eps2: 0.5,
        seed: 0,
        validation: true,
    };
    let scaled = ZoPatch { m1: Some(10_000), ..ZoPatch::default() };
    let schemes = map([
        ("zo-pg", ZoInnerScheme { rule: "pg".into(), patch: ZoPatch::default() }),
        ("zo-npg", ZoInnerScheme { rule: "npg".into(), patch: ZoPatch { eta: Some(5e-2), ..ZoPatch::default() } }),
        ("zo-pg-scaled", ZoInnerScheme { rule: "pg".into(), patch: scaled }),
    ]);
    experiment(
        "sec52_zo_inner",
        SystemSpec::from_game(&base_game(5.0, 0.1)),
        Task::ZoDoubleLoop { k0: gain(k0_zo_inner()), l0: None, zo, schemes },
        "zo-pg-scaled",
        vec![abs("k0_lambda_min_h", 1.8673, 5e-4)],
    )
}

fn sec53() -> Experiment {
    let zo = ZoConfig {
        m1: 1,
        m2: 500_000,
        r1: 1.0,
        r2: 0.08,
        eta: 0.1,
        alpha: 4.67e-5,
        inner_iters: 1,
        outer_iters: 20,
        eps1: 1e-4,
        eps2: 0.8,
        seed: 0,
        validation: true,
    };
    let npg = OracleSpec::Npg { eta: 0.1, tol: 1e-4, max_iters: 10_000 };
    let scaled = ZoPatch { m2: Some(10_000), ..ZoPatch::default() };
    let schemes = map([
        ("exact", ZoOuterScheme { oracle: OracleSpec::Exact, patch: ZoPatch::default() }),
        ("npg", ZoOuterScheme { oracle: npg, patch: ZoPatch::default() }),
        ("exact-scaled", ZoOuterScheme { oracle: OracleSpec::Exact, patch: scaled }),
    ]);
    experiment(
        "sec53_zo_outer",
        SystemSpec::from_game(&base_game(5.0, 0.05)),
        Task::ZoOuter { k0: gain(k0_zo_outer()), zo, schemes },
        "exact-scaled",
        vec![abs("k0_lambda_min_h", 3.2325, 5e-4)],
    )
}

fn sec54() -> Experiment {
    let alpha = 1.7319e-11;
    let gda = |update: &str, eta: f64, alpha: f64, ascent_steps: usize, iters: usize| GdaSchemeSpec {
        update: update.into(),
        eta,
        alpha,
        ascent_steps,
        iters,
    };
    let schemes = map([
        ("angda", gda("angda", alpha, alpha, 1, 3_000_000)),
        ("tau-ngda", gda("tau-ngda", 1e3 * alpha, alpha, 1, 200_000)),
        ("dmsa", gda("dmsa", 1.7319e-9, 1.7319e-9, 10, 100_000)),
    ]);
    let settings = GdaSpec { cap: 1e12, growth_threshold: 10.0, record_stride: 1000, stop_on_divergence: true };
    experiment(
        "sec54_divergence",
        SystemSpec::from_game(&base_game(5.0, 1.0)),
        Task::Gda { k0: gain(k0_divergence()), l0: Some(gain(l0_divergence())), settings, schemes },
        "angda",
        vec![],
    )
}

fn sec55() -> Experiment {
    let schemes = map([("npg-npg", dl("npg", "npg", 0.0097, 3.0372e-5, 200_000, Some(1e-7)))]);
    experiment(
        "sec55_time_varying",
        SystemSpec::from_game(&time_varying_game()),
        Task::DoubleLoop { k0: gain(k0_time_varying()), l0: None, settings: loop_settings(), schemes },
        "npg-npg",
        vec![],
    )
}

fn probe(name: &str, measure: Measure) -> Probe {
    Probe { name: name.into(), measure }
}

fn lemma_nonconvex() -> Experiment {
    let probes = vec![
        probe(
            "gap_L",
            Measure::InnerMidpointGap { k: gain(k0_case1()), l1: gain(nonconcave_l1()), l2: gain(nonconcave_l2()) },
        ),
        probe("gap_K", Measure::OuterMidpointGapFixedL { l: None, k1: gain(nonconvex_k1()), k2: gain(nonconvex_k2()) }),
    ];
    experiment(
        "lemma_nonconvex",
        SystemSpec::from_game(&base_game(5.0, 1.0)),
        Task::Landscape { probes },
        "landscape",
        vec![abs("gap_L", 6.7437, 5e-3), rel("gap_K", -1.2277e5, 1e-3)],
    )
}

fn lemma_outer_landscape() -> Experiment {
    let probes = vec![
        probe("gap_outer", Measure::OuterMidpointGap { k1: gain(outer_k1()), k2: gain(outer_k2()) }),
        probe("lambda_min_h_k1", Measure::LambdaMinH { k: gain(outer_k1()) }),
        probe("lambda_min_h_k2", Measure::LambdaMinH { k: gain(outer_k2()) }),
        probe("lambda_min_h_k3", Measure::LambdaMinHMidpoint { k1: gain(outer_k1()), k2: gain(outer_k2()) }),
    ];
    experiment(
        "lemma_outer_landscape",
        SystemSpec::from_game(&outer_landscape_game()),
        Task::Landscape { probes },
        "landscape",
        vec![
            abs("gap_outer", -0.0224, 5e-4),
            abs("lambda_min_h_k1", 4.3496e-6, 1e-6),
            abs("lambda_min_h_k2", 0.1844, 5e-4),
            abs("lambda_min_h_k3", 0.0926, 5e-4),
        ],
    )
}

fn scalar_noncoercive() -> Experiment {
    let k = PerStep::Constant(vec![vec![2.0 - 1e-6]]);
    let probes = vec![
        probe("outer_value", Measure::OuterValue { k: k.clone() }),
        probe("lambda_min_h", Measure::LambdaMinH { k }),
    ];
    // λ_min(H) → 0 is checked as |λ_min(H)| ≤ 1e−4.
    experiment(
        "scalar_noncoercive",
        SystemSpec::from_game(&scalar_noncoercive_game()),
        Task::Landscape { probes },
        "landscape",
        vec![abs("outer_value", 11.0, 1e-3), abs("lambda_min_h", 0.0, 1e-4)],
    )
}

/// The registered experiment of that name.
pub fn preset(name: &str) -> Option<Experiment> {
    Some(match name {
        "sec51_case1" => sec51(
            name,
            k0_case1(),
            map([
                ("pg-npg", dl("pg", "npg", 1e-4, 3e-6, 20_000, Some(0.1))),
                ("npg-npg", dl("npg", "npg", 0.0635, 3e-6, 300_000, Some(0.1))),
                ("gn-gn", dl("gn", "gn", 0.5, 5e-4, 20_000, Some(1e-5))),
            ]),
            0.5041,
        ),
        "sec51_case2" => sec51(
            name,
            k0_case2(),
            map([
                ("npg-npg", dl("npg", "npg", 0.0635, 2.48e-7, 300_000, Some(0.1))),
                ("gn-gn", dl("gn", "gn", 0.5, 2.5e-4, 40_000, Some(1e-5))),
            ]),
            0.0199,
        ),
        "sec52_zo_inner" => sec52(),
        "sec53_zo_outer" => sec53(),
        "sec54_divergence" => sec54(),
        "sec55_time_varying" => sec55(),
        "lemma_nonconvex" => lemma_nonconvex(),
        "lemma_outer_landscape" => lemma_outer_landscape(),
        "scalar_noncoercive" => scalar_noncoercive(),
        _ => return None,
    })
}
