use lqgame::equiv::Formulation;
use lqgame::harness::config::*;
use lqgame::harness::fixtures::{base_game, time_varying_game};
use lqgame::harness::presets::{preset, preset_names, PRESETS};
use lqgame::harness::runner::{run_config, run_experiment, ExitKind};
use lqgame::linalg::Mat;
use lqgame::lq_core::Player;

fn run_preset(name: &str, scheme: Option<&str>) -> lqgame::harness::runner::RunOutput {
    let mut cfg = ExperimentConfig::from_preset(name);
    cfg.scheme = scheme.map(String::from);
    run_experiment(&cfg.resolve().unwrap()).unwrap()
}

#[test]
fn every_preset_round_trips_through_json() {
    assert_eq!(preset_names().count(), 9);
    for name in preset_names() {
        let exp = preset(name).unwrap();
        exp.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        let doc = ExperimentConfig { experiment: Some(exp.clone()), ..ExperimentConfig::from_preset(name) };
        let doc = ExperimentConfig { preset: None, ..doc };
        let text = serde_json::to_string_pretty(&doc).unwrap();
        assert_eq!(parse_config(&text).unwrap(), exp, "{name}");
    }
}

#[test]
fn preset_systems_match_the_fixtures_exactly() {
    let sys = preset("sec51_case1").unwrap().system.load("system").unwrap();
    assert_eq!(sys.game, base_game(5.0, 1.0));
    let sys = preset("sec55_time_varying").unwrap().system.load("system").unwrap();
    assert_eq!(sys.game, time_varying_game());
}

#[test]
fn preset_listing_is_stable_and_cites_the_time_varying_rule() {
    let names: Vec<_> = preset_names().collect();
    assert_eq!(names[0], "sec51_case1");
    assert_eq!(names, preset_names().collect::<Vec<_>>());
    let (_, d) = PRESETS.iter().find(|(n, _)| *n == "sec55_time_varying").unwrap();
    assert!(d.contains("A_t = A + (−1)ᵗtA/10"));
    for (n, d) in PRESETS {
        assert_eq!(preset(n).unwrap().description, *d);
    }
}

#[test]
fn landscape_presets_reproduce_reference_values() {
    for name in ["lemma_nonconvex", "lemma_outer_landscape", "scalar_noncoercive"] {
        let out = run_preset(name, None);
        assert!(out.summary.checks_pass, "{name}: {:?}", out.summary.checks);
        assert_eq!(out.summary.exit_code, 0);
    }
    let s = run_preset("lemma_nonconvex", None).summary;
    assert!((s.metric("gap_L").unwrap() - 6.7437).abs() < 5e-3);
    assert!(out_csv_has_rows(&run_preset("lemma_nonconvex", None).trace_csv, 2));
}

fn out_csv_has_rows(csv: &str, n: usize) -> bool {
    let mut lines = csv.lines();
    lines.next() == Some("probe,value") && lines.count() == n
}

#[test]
fn divergence_preset_sets_flags_and_exit_codes() {
    let out = run_preset("sec54_divergence", Some("tau-ngda"));
    assert!(out.summary.diverged);
    assert!(out.summary.metric("growth").unwrap() >= 10.0);
    assert_eq!(out.summary.exit_code, 0);

    let doc = r#"{"preset": "sec54_divergence", "scheme": "tau-ngda", "require_convergence": true}"#;
    assert_eq!(run_config(doc).unwrap().summary.exit_code, ExitKind::NotConverged.code());
}

#[test]
fn infeasible_runs_exit_with_status_three() {
    // The scaled zeroth-order outer run leaves 𝒦 at this seed.
    let out = run_preset("sec53_zo_outer", Some("exact-scaled"));
    assert!(!out.summary.feasible);
    assert_eq!(out.summary.exit_code, 3);
    assert!((out.summary.metric("k0_lambda_min_h").unwrap() - 3.2325).abs() < 5e-4);

    // K = 0 has no best response on the benchmark.
    let mut exp = preset("lemma_outer_landscape").unwrap();
    exp.task = Task::Landscape {
        probes: vec![Probe { name: "v".into(), measure: Measure::OuterValue { k: PerStep::Constant(vec![vec![0.0; 3]; 3]) } }],
    };
    exp.checks.clear();
    let err = run_experiment(&exp).unwrap_err();
    assert_eq!((err.exit, err.reason.as_str()), (ExitKind::Infeasible, "infeasible_gain"));
}

#[test]
fn same_seed_gives_identical_outputs() {
    let a = run_preset("sec52_zo_inner", None);
    let b = run_preset("sec52_zo_inner", None);
    assert_eq!(a.trace_csv, b.trace_csv);
    assert_eq!(a.summary_json(), b.summary_json());
    let doc = r#"{"preset": "sec52_zo_inner", "seed": 5}"#;
    assert_ne!(run_config(doc).unwrap().trace_csv, a.trace_csv);
}

#[test]
fn parse_errors_carry_position_and_field_path() {
    let err = parse_config("{\n  \"preset\": \"sec51_case1\",\n  \"seed\": -1\n}").unwrap_err();
    assert_eq!((err.path.as_str(), err.line), ("seed", 3));
    assert!(!err.message.contains("at line"), "{}", err.message);

    let mut exp = preset("lemma_nonconvex").unwrap();
    let SystemSpec::Game(g) = &mut exp.system else { unreachable!() };
    g.a = PerStep::Steps(vec![vec![vec![1.0]]; 2]);
    let text = serde_json::to_string(&ExperimentConfig { preset: None, experiment: Some(exp), scheme: None, seed: None, require_convergence: None })
        .unwrap();
    let err = parse_config(&text).unwrap_err();
    assert_eq!(err.path, "system.a");

    let err = parse_config(r#"{"preset": "sec51_case1", "bogus": 1}"#).unwrap_err();
    assert!(err.message.contains("bogus"), "{err}");
    let err = parse_config(r#"{"preset": "nope"}"#).unwrap_err();
    assert_eq!(err.path, "preset");
    let err = parse_config(r#"{"preset": "sec51_case1", "scheme": "gd-gd"}"#).unwrap_err();
    assert_eq!(err.path, "scheme");
    assert!(parse_config("{}").is_err());
    assert!(parse_config("[").is_err());
}

#[test]
fn malformed_systems_and_gains_are_rejected() {
    assert!(parse_system(r#"{"formulation": "game"}"#).is_err());
    let ragged = PerStep::Constant(vec![vec![1.0, 2.0], vec![3.0]]);
    assert!(ragged.resolve(1, "x").is_err());
    assert!(PerStep::Constant(vec![]).resolve(1, "x").is_err());
    assert!(parse_gain_schedule("[[1.0, 2.0]]", Player::Controller, 3).unwrap().horizon() == 3);
    assert!(parse_gain_schedule("[[[1.0]], [[1.0, 2.0]]]", Player::Controller, 2).is_err());
    assert!(parse_gain_schedule("[[1e999]]", Player::Controller, 1).is_err());
    assert!(parse_gain_schedule("[[1.0]]", Player::Controller, 0).is_err());

    // A gain of the wrong shape for the game.
    let mut exp = preset("sec51_case1").unwrap();
    if let Task::DoubleLoop { k0, .. } = &mut exp.task {
        *k0 = PerStep::Constant(vec![vec![0.0; 2]; 3]);
    }
    let err = exp.validate().unwrap_err();
    assert_eq!(err.path, "task.k0");
}

#[test]
fn per_step_collapses_constant_sequences() {
    let m = Mat::identity(2, 2);
    assert!(matches!(PerStep::from_mats(&[m.clone(), m.clone()]), PerStep::Constant(_)));
    assert!(matches!(PerStep::from_mats(&[m.clone(), m * 2.0]), PerStep::Steps(_)));
}

#[test]
fn equivalence_task_runs_inline_leqg_config() {
    let i = || vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let spec = SystemSpec::Leqg(LeqgSpec {
        horizon: 3,
        a: PerStep::Constant(vec![vec![0.9, 0.2], vec![0.0, 0.8]]),
        b: PerStep::Constant(vec![vec![0.0], vec![1.0]]),
        q: PerStep::Constant(i()),
        r: PerStep::Constant(vec![vec![1.0]]),
        w: i(),
        x0: i(),
        beta: 0.05,
    });
    let loaded = spec.load("system").unwrap();
    assert!(matches!(loaded.formulation, Some(Formulation::Leqg(_))));
    let exp = Experiment {
        name: "leqg".into(),
        description: String::new(),
        system: spec,
        task: Task::Equivalence { tol: 1e-7 },
        scheme: "equivalence".into(),
        seed: 0,
        require_convergence: true,
        checks: vec![Check { metric: "gradient_norm".into(), expected: 0.0, tol: 1e-7, relative: false }],
    };
    let out = run_experiment(&exp).unwrap();
    assert!(out.summary.converged && out.summary.feasible && out.summary.checks_pass, "{:?}", out.summary);
    assert_eq!(out.summary.exit_code, 0);
    assert!(out.trace_csv.starts_with("step,margin,gain_discrepancy\n"));

    let game = Experiment { system: SystemSpec::from_game(&base_game(5.0, 1.0)), ..exp };
    assert_eq!(game.validate().unwrap_err().path, "system.formulation");
}

#[test]
fn fuzz_corpus_seeds_are_accepted() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let read = |target: &str| -> Vec<(String, Vec<u8>)> {
        let mut v: Vec<_> = std::fs::read_dir(root.join(target))
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.display().to_string(), std::fs::read(&p).unwrap())
            })
            .collect();
        v.sort();
        assert!(!v.is_empty(), "{target}");
        v
    };
    for (name, bytes) in read("parse_config") {
        parse_config(std::str::from_utf8(&bytes).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, bytes) in read("parse_system") {
        parse_system(std::str::from_utf8(&bytes).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, bytes) in read("parse_gain_schedule") {
        let horizon = usize::from(bytes[0] & 7) + 1;
        let player = if bytes[0] & 8 == 0 { Player::Controller } else { Player::Disturbance };
        parse_gain_schedule(std::str::from_utf8(&bytes[1..]).unwrap(), player, horizon)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

mod mutations {
    use super::*;
    use proptest::prelude::*;

    const SEED: &str = r#"{"formulation":"leqg","horizon":3,"a":[[0.9,0.2],[0.0,0.8]],"b":[[0.0],[1.0]],"q":[[1.0,0.0],[0.0,1.0]],"r":[[1.0]],"w":[[1.0,0.0],[0.0,1.0]],"x0":[[1.0,0.0],[0.0,1.0]],"beta":0.05}"#;

    fn mutate(base: &str, edits: &[(usize, u8)]) -> String {
        let mut bytes = base.as_bytes().to_vec();
        for &(i, b) in edits {
            let i = i % bytes.len();
            bytes[i] = b"0123456789.-e,[]{}\": abz"[usize::from(b) % 24];
        }
        String::from_utf8_lossy(&bytes).into_owned()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn parsers_never_panic(edits in prop::collection::vec((any::<usize>(), any::<u8>()), 1..6)) {
            let text = mutate(SEED, &edits);
            let _ = parse_system(&text);
            let _ = parse_gain_schedule(&text, Player::Controller, 2);
            let doc = format!(r#"{{"experiment":{{"name":"x","description":"","system":{text},"task":{{"kind":"equivalence","tol":1e-7}},"scheme":"equivalence","seed":0,"require_convergence":false}}}}"#);
            if let Ok(exp) = parse_config(&doc) {
                let _ = run_experiment(&exp);
            }
        }
    }
}
