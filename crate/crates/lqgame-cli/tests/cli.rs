use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lqgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lqgame")).args(args).output().expect("binary runs")
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn list_presets_is_stable() {
    let a = lqgame(&["list-presets"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, lqgame(&["list-presets"]).stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 9);
    let line = text.lines().find(|l| l.starts_with("sec55_time_varying")).unwrap();
    assert!(line.contains("A_t = A + (−1)ᵗtA/10"));
}

#[test]
fn landscape_preset_reports_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let out = lqgame(&["run", "--preset", "lemma_nonconvex", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    assert!((s["metrics"]["gap_L"].as_f64().unwrap() - 6.7437).abs() < 5e-3);
    assert!((s["metrics"]["gap_K"].as_f64().unwrap() / -1.2277e5 - 1.0).abs() < 1e-3);
    assert_eq!(s["checks_pass"], true);
    assert!(dir.path().join("trace.csv").exists());
}

#[test]
fn double_loop_preset_converges_with_monotone_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = lqgame(&["run", "--preset", "sec51_case1", "--scheme", "npg-npg", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let s = summary(dir.path());
    assert_eq!(s["converged"], true);
    assert_eq!(s["ir_ok"], true);
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(csv.starts_with("iter,objective,grad_norm,lambda_min_H,ir_ok\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn alternating_descent_ascent_diverges() {
    let dir = tempfile::tempdir().unwrap();
    let out = lqgame(&["run", "--preset", "sec54_divergence", "--scheme", "angda", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(summary(dir.path())["diverged"], true);
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"preset\": \"sec51_case1\",\n  \"seed\": \"x\"\n}").unwrap();
    let out = lqgame(&["run", "--config", bad.to_str().unwrap(), "--out", d]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("line 3"), "{err}");

    assert_eq!(lqgame(&["run", "--preset", "nope", "--out", d]).status.code(), Some(2));
    assert_eq!(lqgame(&["run", "--preset", "sec51_case1", "--scheme", "gd", "--out", d]).status.code(), Some(2));
    assert_eq!(lqgame(&["run", "--out", d]).status.code(), Some(2));

    let out = lqgame(&["run", "--preset", "sec53_zo_outer", "--scheme", "exact-scaled", "--out", d]);
    assert_eq!(out.status.code(), Some(3));

    let strict = dir.path().join("strict.json");
    fs::write(&strict, r#"{"preset": "sec54_divergence", "scheme": "tau-ngda", "require_convergence": true}"#).unwrap();
    assert_eq!(lqgame(&["run", "--config", strict.to_str().unwrap(), "--out", d]).status.code(), Some(4));
}

#[test]
fn validate_config_checks_without_running() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dir.path().join("ok.json");
    fs::write(&ok, r#"{"preset": "sec55_time_varying"}"#).unwrap();
    let out = lqgame(&["validate-config", "--config", ok.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("ok: sec55_time_varying"));
    assert!(!dir.path().join("summary.json").exists());
    assert_eq!(lqgame(&["validate-config", "--preset", "lemma_nonconvex", "--scheme", "x"]).status.code(), Some(2));
}

#[test]
fn sweeps_are_reproducible_and_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfgs: Vec<_> = [r#"{"preset": "scalar_noncoercive"}"#, r#"{"preset": "sec52_zo_inner", "seed": 3}"#]
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let p = dir.path().join(format!("c{i}.json"));
            fs::write(&p, text).unwrap();
            p.to_str().unwrap().to_string()
        })
        .collect();
    let run = |out: &str, jobs: &str| {
        let o = dir.path().join(out);
        let mut args = vec!["run", "--jobs", jobs, "--out", o.to_str().unwrap()];
        for c in &cfgs {
            args.extend(["--config", c.as_str()]);
        }
        assert!(lqgame(&args).status.success());
        o
    };
    let (a, b) = (run("a", "1"), run("b", "2"));
    for sub in ["00-scalar_noncoercive-landscape", "01-sec52_zo_inner-zo-pg-scaled"] {
        for file in ["summary.json", "trace.csv"] {
            let x = fs::read(a.join(sub).join(file)).unwrap();
            assert_eq!(x, fs::read(b.join(sub).join(file)).unwrap(), "{sub}/{file}");
        }
    }
    assert_eq!(summary(&a.join("01-sec52_zo_inner-zo-pg-scaled"))["seed"], 3);
}
