//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Failures are reported, not asserted: the binary always exits 0 so that the
//! full report is produced. Runtime budgets are part of each criterion.

use std::time::{Duration, Instant};

use lqgame::equiv::*;
use lqgame::exact_opt::*;
use lqgame::harness::config::{loop_config, ExperimentConfig, Experiment, Task};
use lqgame::harness::fixtures::*;
use lqgame::harness::presets::preset;
use lqgame::harness::random::*;
use lqgame::harness::runner::{run_experiment, RunOutput};
use lqgame::linalg::sym_sqrt;
use lqgame::lq_core::*;
use lqgame::zo_est::*;

const SMALL: RandomShape = RandomShape { horizon: 3, m: 2, d: 1, n: 1 };
const FORMULATION_SHAPE: RandomShape = RandomShape { horizon: 3, m: 2, d: 1, n: 2 };

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

struct Report {
    passed: usize,
    total: usize,
    /// Traces captured on the first pass, replayed by the determinism criterion.
    traces: Vec<(String, String)>,
}

impl Report {
    fn criterion(&mut self, id: usize, title: &str, budget: Duration, f: impl FnOnce(&mut Vec<(String, String)>) -> Verdict) {
        let start = Instant::now();
        let v = f(&mut self.traces);
        let elapsed = start.elapsed();
        let in_budget = elapsed <= budget;
        let pass = v.pass && in_budget;
        self.total += 1;
        self.passed += usize::from(pass);
        let timing = if in_budget {
            format!("{:.1}s", elapsed.as_secs_f64())
        } else {
            format!("{:.1}s, over the {}s budget", elapsed.as_secs_f64(), budget.as_secs())
        };
        println!("{} criterion {id:>2}: {title} — {} ({timing})", if pass { "PASS" } else { "FAIL" }, v.detail);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn run_preset(name: &str, scheme: Option<&str>) -> RunOutput {
    let mut cfg = ExperimentConfig::from_preset(name);
    cfg.scheme = scheme.map(String::from);
    run_experiment(&cfg.resolve().expect("preset resolves")).expect("preset runs")
}

fn metric(out: &RunOutput, name: &str) -> f64 {
    out.summary.metric(name).unwrap_or(f64::NAN)
}

fn preset_game_and_k0(name: &str) -> (CompactGame, GainSchedule) {
    let exp = preset(name).unwrap();
    let sys = exp.system.load("system").unwrap();
    let game = CompactGame::new(&sys.game);
    let spec = match &exp.task {
        Task::DoubleLoop { k0, .. } | Task::ZoDoubleLoop { k0, .. } | Task::ZoOuter { k0, .. } | Task::Gda { k0, .. } => k0,
        Task::ZoInner { k, .. } => k,
        _ => panic!("{name} has no initial gain"),
    };
    let k0 = lqgame::harness::config::load_gain(Some(spec), Player::Controller, &game, "k0").unwrap();
    (game, k0)
}

fn landscape(traces: &mut Vec<(String, String)>) -> Verdict {
    let mut lines = Vec::new();
    let mut pass = true;
    for name in ["lemma_nonconvex", "lemma_outer_landscape"] {
        let out = run_preset(name, None);
        pass &= out.summary.checks_pass;
        for c in &out.summary.checks {
            lines.push(format!("{} = {:.6e}", c.metric, c.value.unwrap_or(f64::NAN)));
        }
        traces.push((name.into(), out.trace_csv));
    }
    verdict(pass, lines.join(", "))
}

fn certificates() -> Verdict {
    let cases = [("sec51_case1", 0.5041), ("sec51_case2", 0.0199), ("sec52_zo_inner", 1.8673), ("sec53_zo_outer", 3.2325)];
    let mut pass = true;
    let mut lines = Vec::new();
    for (name, expected) in cases {
        let (game, k0) = preset_game_and_k0(name);
        let lam = inner_riccati(&game, &k0).map(|s| s.lambda_min_h).unwrap_or(f64::NAN);
        pass &= (lam - expected).abs() <= 5e-4;
        lines.push(format!("{name} λ_min(H) = {lam:.5}"));
    }
    verdict(pass, lines.join(", "))
}

fn scalar(traces: &mut Vec<(String, String)>) -> Verdict {
    let out = run_preset("scalar_noncoercive", None);
    let (v, lam) = (metric(&out, "outer_value"), metric(&out, "lambda_min_h"));
    let pass = (v - 11.0).abs() <= 1e-3 && lam <= 1e-4 && lam >= 0.0;
    traces.push(("scalar_noncoercive".into(), out.trace_csv));
    verdict(pass, format!("G(K^ε, L(K^ε)) = {v:.6} at ε = 1e-6, λ_min(H) = {lam:.2e}"))
}

fn exact_npg_config(eta: f64, alpha: f64) -> LoopConfig {
    LoopConfig {
        eta,
        alpha,
        inner_tol: 1e-3,
        outer_tol: 1e-300,
        max_inner: 10_000,
        max_outer: 200_000,
        monitor_ir: true,
        exact_inner: true,
        inner_stop: InnerStop::Gap,
        outer_grad_tol: Some(1e-9),
    }
}

fn nash_consistency() -> Verdict {
    let mut systems: Vec<(String, TimeVaryingSystem, GainSchedule)> = vec![
        ("benchmark".into(), base_game(5.0, 1.0), k_sched(k0_case1())),
        ("time-varying".into(), time_varying_game(), k_sched(k0_time_varying())),
    ];
    let mut seed = 0;
    while systems.len() < 22 {
        let sys = random_system(seed, SMALL);
        if grde(&sys).is_ok_and(|n| n.assumption_ok) {
            let k0 = random_feasible_k(&CompactGame::new(&sys), seed, 0.3);
            systems.push((format!("random seed {seed}"), sys, k0));
        }
        seed += 1;
    }
    let (mut worst_stat, mut worst_dist) = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for (label, sys, k0) in &systems {
        let game = CompactGame::new(sys);
        let nash = grde(sys).unwrap();
        let gr = gradients(&game, &nash.k_star, &nash.l_star);
        let stat = gr.f.norm() + gr.e.norm();
        worst_stat = worst_stat.max(stat);
        let bounds = stepsize_bounds(&game, k0, &game.zero_l(), 0).unwrap();
        let cfg = exact_npg_config(bounds.inner.npg, bounds.outer(UpdateRule::Npg).unwrap());
        let out = double_loop(&game, k0, &game.zero_l(), (UpdateRule::Npg, UpdateRule::Npg), &cfg).unwrap();
        let dist = out.k.sub(&nash.k_star).norm();
        worst_dist = worst_dist.max(dist);
        if stat > 1e-8 || dist > 1e-4 || !out.status.converged() {
            failures.push(format!("{label}: ‖F‖+‖E‖ = {stat:.1e}, ‖K−K*‖ = {dist:.1e}, {}", out.status.label()));
        }
    }
    let detail = format!(
        "{} systems, max ‖F‖+‖E‖ at Nash = {worst_stat:.1e}, max ‖K − K*‖_F after NPG-NPG = {worst_dist:.1e}{}",
        systems.len(),
        if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
    );
    verdict(failures.is_empty(), detail)
}

/// Counts violations of `λ_min(H)` non-decrease (slack 1e−10) and of
/// `λ_max(P_{k+1} − P_k) ≤ 1e−8` along an exact outer run.
fn ir_violations(game: &CompactGame, k0: &GainSchedule, rule: UpdateRule, alpha: f64, iters: usize) -> (usize, usize) {
    let mut k = k0.clone();
    let mut sol = inner_riccati(game, &k).unwrap();
    let mut bad = 0;
    for it in 0..iters {
        k = outer_update(rule, game, &k, alpha).unwrap();
        let next = match inner_riccati(game, &k) {
            Ok(s) => s,
            Err(_) => return (bad + iters - it, it),
        };
        if next.lambda_min_h < sol.lambda_min_h - 1e-10 || next.p.sub(&sol.p).max_eig() > 1e-8 {
            bad += 1;
        }
        sol = next;
    }
    (bad, iters)
}

fn implicit_regularisation() -> Verdict {
    let mut runs = 0;
    let mut steps = 0;
    let mut bad = 0;
    let mut notes = Vec::new();
    // Every double-loop preset scheme with an NPG or GN outer step, at its own
    // stepsize, with exact inner solutions.
    for name in ["sec51_case1", "sec51_case2", "sec55_time_varying"] {
        let exp: Experiment = preset(name).unwrap();
        let (game, k0) = preset_game_and_k0(name);
        let Task::DoubleLoop { settings, schemes, .. } = &exp.task else { unreachable!() };
        for (scheme, s) in schemes {
            let cfg = loop_config(settings, s);
            let rule = lqgame::harness::config::rules(s).unwrap().1;
            let (b, n) = ir_violations(&game, &k0, rule, cfg.alpha, 20_000);
            runs += 1;
            steps += n;
            bad += b;
            if b > 0 {
                notes.push(format!("{name}/{scheme}: {b}"));
            }
        }
    }
    for seed in 0..50 {
        let game = CompactGame::new(&random_system(1000 + seed, SMALL));
        let k0 = random_feasible_k(&game, seed, 0.4);
        let bounds = stepsize_bounds(&game, &k0, &game.zero_l(), seed).unwrap();
        for rule in [UpdateRule::Npg, UpdateRule::Gn] {
            let (b, n) = ir_violations(&game, &k0, rule, bounds.outer(rule).unwrap(), 200);
            runs += 1;
            steps += n;
            bad += b;
            if b > 0 {
                notes.push(format!("random {seed}/{rule}: {b}"));
            }
        }
    }
    verdict(bad == 0, format!("{runs} runs, {steps} outer steps, {bad} violations {}", notes.join(" ")))
}

fn divergence(traces: &mut Vec<(String, String)>) -> Verdict {
    let mut pass = true;
    let mut lines = Vec::new();
    for scheme in ["angda", "tau-ngda", "dmsa"] {
        let out = run_preset("sec54_divergence", Some(scheme));
        let growth = metric(&out, "growth");
        pass &= out.summary.diverged && growth >= 10.0;
        lines.push(format!("{scheme}: growth {growth:.2}× after {} iterations", metric(&out, "iterations")));
        if scheme != "angda" {
            traces.push((format!("sec54_divergence/{scheme}"), out.trace_csv));
        }
    }
    verdict(pass, lines.join(", "))
}

fn fd_gradient(k: &GainSchedule, f: impl Fn(&GainSchedule) -> f64) -> GainSchedule {
    let h = 1e-6;
    let flat = k.to_flat();
    let g: Vec<f64> = (0..flat.len())
        .map(|i| {
            let (mut p, mut m) = (flat.clone(), flat.clone());
            p[i] += h;
            m[i] -= h;
            (f(&k.from_flat_like(&p)) - f(&k.from_flat_like(&m))) / (2.0 * h)
        })
        .collect();
    k.from_flat_like(&g)
}

fn rel_err(fd: &GainSchedule, exact: &GainSchedule) -> f64 {
    fd.sub(exact).norm() / exact.norm().max(1e-12)
}

fn gradient_oracles() -> Verdict {
    let (mut gk, mut gl, mut lq, mut d1, mut d2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for seed in 0..10 {
        let game = CompactGame::new(&random_system(seed, SMALL));
        let k = random_feasible_k(&game, seed, 0.3);
        let l = random_l(&game, seed, 0.5);
        let gr = gradients(&game, &k, &l);
        gk = gk.max(rel_err(&fd_gradient(&k, |k| objective(&game, k, &l)), &gr.grad_k));
        gl = gl.max(rel_err(&fd_gradient(&l, |l| objective(&game, &k, l)), &gr.grad_l));

        let sys = random_leqg(seed, FORMULATION_SHAPE);
        let k = random_leqg_gain(&sys, seed, 0.3);
        let g = leqg_gradient(&sys, &k).unwrap();
        lq = lq.max(rel_err(&fd_gradient(&k, |k| leqg_value(&sys, k).unwrap()), &g));

        let sys = random_da(seed, FORMULATION_SHAPE);
        let k = random_da_gain(&sys, seed, 0.3);
        let (g1, g2) = da_gradients(&sys, &k).unwrap();
        d1 = d1.max(rel_err(&fd_gradient(&k, |k| da_values(&sys, k).unwrap().0), &g1));
        d2 = d2.max(rel_err(&fd_gradient(&k, |k| da_values(&sys, k).unwrap().1), &g2));
    }
    let worst = gk.max(gl).max(lq).max(d1).max(d2);
    verdict(
        worst <= 1e-5,
        format!("max relative error over 10 seeds: ∇_K {gk:.1e}, ∇_L {gl:.1e}, LEQG {lq:.1e}, DA log-det {d1:.1e}, DA trace {d2:.1e}"),
    )
}

/// LQG cost `Tr(P₀X₀) + Σ_{t≥1} Tr(P_tW)` along the plain Lyapunov recursion.
fn lqg_value(sys: &LeqgSystem, k: &GainSchedule) -> f64 {
    let n = sys.horizon();
    let mut p = sys.q()[n].clone();
    let mut total = (&p * sys.w()).trace();
    for t in (0..n).rev() {
        let kt = k.block(t);
        let acl = &sys.a()[t] - &sys.b()[t] * kt;
        p = &sys.q()[t] + kt.transpose() * &sys.r()[t] * kt + acl.transpose() * &p * &acl;
        if t > 0 {
            total += (&p * sys.w()).trace();
        }
    }
    total + (&p * sys.x0()).trace()
}

fn equivalence() -> Verdict {
    let (mut worst_leqg, mut worst_da, mut worst_lqg) = (0.0f64, 0.0f64, 0.0f64);
    let mut pass = true;
    for seed in 0..10 {
        let leqg = random_leqg(seed, FORMULATION_SHAPE);
        let rep = verify_equivalence(&Formulation::Leqg(leqg.clone()), 1e-7).unwrap();
        worst_leqg = worst_leqg.max(rep.gradient_norm.unwrap_or(f64::INFINITY));
        pass &= rep.stationary;

        let da = random_da(seed, FORMULATION_SHAPE);
        let rep = verify_equivalence(&Formulation::Da(da), 1e-7).unwrap();
        worst_da = worst_da.max(rep.gradient_norm.unwrap_or(f64::INFINITY)).max(rep.trace_gradient_norm.unwrap_or(f64::INFINITY));
        pass &= rep.stationary;

        let sys = leqg.with_beta(1e-8).unwrap();
        let k = random_leqg_gain(&sys, seed, 0.3);
        let (v, lqg) = (leqg_value(&sys, &k).unwrap(), lqg_value(&sys, &k));
        worst_lqg = worst_lqg.max((v - lqg).abs() / lqg);
    }
    // The benchmark game read as LEQG: D = W^{1/2}, β⁻¹ = 5, initial state ~ W.
    let game = base_game(5.0, 1.0);
    let w = &d() * d().transpose();
    let leqg = LeqgSystem::new(game.a().to_vec(), game.b().to_vec(), game.q().to_vec(), game.ru().to_vec(), w.clone(), w, 0.2).unwrap();
    assert!((sym_sqrt(leqg.w()) - d()).amax() < 1e-12);
    let bench = verify_equivalence(&Formulation::Leqg(leqg), 1e-7).unwrap();
    worst_leqg = worst_leqg.max(bench.gradient_norm.unwrap_or(f64::INFINITY));
    pass &= bench.stationary;
    // Read as attenuation with γ² = 5, the initial condition γ²I − P₀ ≻ 0 fails
    // at K*, so only the trace bound is defined there.
    let da = verify_equivalence(&Formulation::Da(DaSystem::from_game(&game).unwrap()), 1e-7).unwrap();
    let trace_norm = da.trace_gradient_norm.unwrap_or(f64::INFINITY);
    pass &= trace_norm <= 1e-7 && worst_lqg <= 1e-5;
    verdict(
        pass,
        format!(
            "max ‖∇‖ at K*: LEQG {worst_leqg:.1e} (10 random + benchmark), DA {worst_da:.1e} (10 random); benchmark as DA: \
             initial condition {} (margin {:.3}), trace-bound ‖∇‖ = {trace_norm:.1e}; β = 1e-8 vs LQG rel. err. {worst_lqg:.1e}",
            if da.formulation_feasible { "holds" } else { "fails" },
            da.rde.margins[0],
        ),
    )
}

fn zo_config(m: usize, r: f64) -> ZoConfig {
    ZoConfig {
        m1: m,
        m2: m,
        r1: r,
        r2: r,
        eta: 1e-3,
        alpha: 1e-4,
        inner_iters: 1,
        outer_iters: 1,
        eps1: 1e-3,
        eps2: 1e-3,
        seed: 0,
        validation: true,
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    cov / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>()
}

fn flat_csv(g: &GainSchedule) -> String {
    g.to_flat().iter().map(|x| format!("{:016x}", x.to_bits())).collect::<Vec<_>>().join(",")
}

fn estimators(traces: &mut Vec<(String, String)>) -> Verdict {
    let game = CompactGame::new(&random_system(0, SMALL));
    let (k, l) = estimator_probe_point(&game, 0);
    let inner = estimate_inner(&game, &k, &l, &zo_config(100_000, 0.05), &Streams::new(0)).unwrap();
    let ev = evaluate(&game, &k, &l);
    let cos_l = inner.grad.cosine(&ev.grads.grad_l);
    let sigma_err = inner.sigma.sub(&ev.sigma).frob_norm() / ev.sigma.frob_norm();

    let (outer, _) = estimate_outer(&game, &k, &zo_config(100_000, 0.05), &InnerOracle::Exact, &Streams::new(0)).unwrap();
    let l_star = inner_riccati(&game, &k).unwrap().l_star;
    let cos_k = outer.grad.cosine(&gradients(&game, &k, &l_star).grad_k);
    traces.push(("estimators".into(), format!("{}\n{}\n", flat_csv(&inner.grad), flat_csv(&outer.grad))));

    let game1 = CompactGame::new(&random_system(1, SMALL));
    let (k1, l1) = estimator_probe_point(&game1, 1);
    let exact = correlation_matrix(&game1, &k1, &l1);
    let (mut xs, mut ys) = (vec![], vec![]);
    for m in [1_000usize, 4_000, 16_000, 64_000] {
        let reps = 8;
        let ms: f64 = (0..reps)
            .map(|rep| {
                let est = estimate_inner(&game1, &k1, &l1, &zo_config(m, 0.05), &Streams::new(100 + rep)).unwrap();
                est.sigma.sub(&exact).frob_norm().powi(2)
            })
            .sum::<f64>()
            / reps as f64;
        xs.push((m as f64).ln());
        ys.push(0.5 * ms.ln());
    }
    let b = slope(&xs, &ys);
    let pass = cos_l >= 0.9 && cos_k >= 0.9 && sigma_err <= 0.05 && (b + 0.5).abs() <= 0.1;
    verdict(
        pass,
        format!("cos(∇̂_L, ∇_L) = {cos_l:.3}, cos(∇̂_K, ∇_K) = {cos_k:.3}, ‖Σ̂ − Σ‖/‖Σ‖ = {sigma_err:.3}, error-vs-M slope {b:.3}"),
    )
}

fn zo_end_to_end(traces: &mut Vec<(String, String)>) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, scheme) in [("sec52_zo_inner", "zo-pg-scaled"), ("sec53_zo_outer", "exact-scaled")] {
        let out = run_preset(name, Some(scheme));
        let s = &out.summary;
        let (g0, g1, lam) = (metric(&out, "initial_objective"), metric(&out, "final_objective"), metric(&out, "min_lambda_min_h"));
        let ok = s.feasible && lam > 0.0 && g1 < g0;
        pass &= ok;
        parts.push(format!(
            "{name}/{scheme} {}: {}, G {g0:.3} → {g1:.3}, min λ_min(H) {lam:.3} over {} iterations",
            if ok { "ok" } else { "FAILED" },
            s.status,
            metric(&out, "iterations"),
        ));
        traces.push((format!("{name}/{scheme}"), out.trace_csv));
    }
    verdict(pass, parts.join("; "))
}

fn determinism(traces: &mut Vec<(String, String)>) -> Verdict {
    let mut replay: Vec<(String, String)> = Vec::new();
    let mut sink = Vec::new();
    landscape(&mut sink);
    scalar(&mut sink);
    for scheme in ["tau-ngda", "dmsa"] {
        sink.push((format!("sec54_divergence/{scheme}"), run_preset("sec54_divergence", Some(scheme)).trace_csv));
    }
    estimators(&mut sink);
    zo_end_to_end(&mut sink);
    replay.extend(sink);
    let mismatched: Vec<&str> = traces
        .iter()
        .filter(|(label, csv)| replay.iter().find(|(l, _)| l == label).is_none_or(|(_, c)| c != csv))
        .map(|(l, _)| l.as_str())
        .collect();
    let detail = format!("{} traces re-run with the same seeds, {} differ {}", traces.len(), mismatched.len(), mismatched.join(" "));
    verdict(mismatched.is_empty() && !traces.is_empty(), detail)
}

fn main() {
    let mut r = Report { passed: 0, total: 0, traces: Vec::new() };
    r.criterion(1, "landscape fixtures", secs(1), landscape);
    r.criterion(2, "feasibility certificates", secs(1), |_| certificates());
    r.criterion(3, "scalar noncoercivity", secs(1), scalar);
    r.criterion(4, "Nash consistency", secs(60), |_| nash_consistency());
    r.criterion(5, "implicit regularisation", secs(60), |_| implicit_regularisation());
    r.criterion(6, "divergence of descent–ascent", secs(30), divergence);
    r.criterion(7, "gradient oracles vs finite differences", secs(30), |_| gradient_oracles());
    r.criterion(8, "risk-sensitive / attenuation equivalence", secs(10), |_| equivalence());
    r.criterion(9, "zeroth-order estimators", secs(300), estimators);
    r.criterion(10, "zeroth-order end-to-end (scaled budgets)", secs(300), zo_end_to_end);
    let mut traces = std::mem::take(&mut r.traces);
    r.criterion(11, "determinism", secs(600), |_| determinism(&mut traces));
    println!("{}/{} criteria passed", r.passed, r.total);
}
