use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lqgame::harness::config::{parse_config_document, Experiment, ExperimentConfig};
use lqgame::harness::presets::PRESETS;
use lqgame::harness::runner::{run_experiment, ExitKind, RunError, RunOutput};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "lqgame", version, about = "Run zero-sum LQ game policy-gradient experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment, or a sweep of configs.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory for summary.json and trace.csv.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads for a sweep over several configs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// List the registered presets.
    ListPresets,
    /// Check configs without running them.
    ValidateConfig {
        #[command(flatten)]
        source: Source,
    },
}

#[derive(Args)]
struct Source {
    /// Registered preset name.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// JSON config file (repeatable).
    #[arg(long)]
    config: Vec<PathBuf>,
    /// Scheme to run, overriding the config's default.
    #[arg(long)]
    scheme: Option<String>,
    /// Seed, overriding the config's.
    #[arg(long)]
    seed: Option<u64>,
}

impl Source {
    fn documents(&self) -> Result<Vec<(String, ExperimentConfig)>, RunError> {
        let mut docs = Vec::new();
        if let Some(name) = &self.preset {
            docs.push((name.clone(), ExperimentConfig::from_preset(name)));
        }
        for path in &self.config {
            let label = path.display().to_string();
            let text = fs::read_to_string(path).map_err(|e| config_error(format!("{label}: {e}")))?;
            let doc = parse_config_document(&text).map_err(|e| config_error(format!("{label}: {e}")))?;
            docs.push((label, doc));
        }
        if docs.is_empty() {
            return Err(config_error("give --preset or at least one --config".into()));
        }
        for (_, doc) in &mut docs {
            if self.scheme.is_some() {
                doc.scheme.clone_from(&self.scheme);
            }
            if self.seed.is_some() {
                doc.seed = self.seed;
            }
        }
        Ok(docs)
    }

    fn experiments(&self) -> Result<Vec<Experiment>, RunError> {
        self.documents()?
            .into_iter()
            .map(|(label, doc)| doc.resolve().map_err(|e| config_error(format!("{label}: {e}"))))
            .collect()
    }
}

fn config_error(message: String) -> RunError {
    RunError { exit: ExitKind::ConfigError, reason: "config".into(), message }
}

fn report(err: &RunError) -> ExitCode {
    let json = serde_json::json!({ "error": err.reason, "exit_code": err.exit.code(), "message": err.message });
    eprintln!("{json}");
    ExitCode::from(err.exit.code() as u8)
}

fn run_one(exp: &Experiment, dir: &Path) -> Result<RunOutput, RunError> {
    let out = run_experiment(exp)?;
    out.write_to(dir).map_err(|e| RunError {
        exit: ExitKind::Failure,
        reason: "io".into(),
        message: format!("{}: {e}", dir.display()),
    })?;
    Ok(out)
}

fn run(source: &Source, out: &Path, jobs: usize) -> ExitCode {
    let exps = match source.experiments() {
        Ok(e) => e,
        Err(e) => return report(&e),
    };
    let dirs: Vec<PathBuf> = if exps.len() == 1 {
        vec![out.to_path_buf()]
    } else {
        exps.iter().enumerate().map(|(i, e)| out.join(format!("{i:02}-{}-{}", e.name, e.scheme))).collect()
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => return report(&RunError { exit: ExitKind::Failure, reason: "threads".into(), message: e.to_string() }),
    };
    let results: Vec<_> = pool.install(|| exps.par_iter().zip(&dirs).map(|(e, d)| run_one(e, d)).collect());
    let mut code = 0;
    for (res, dir) in results.iter().zip(&dirs) {
        match res {
            Ok(o) => {
                let s = &o.summary;
                println!(
                    "{} [{}] status={} converged={} diverged={} checks_pass={} -> {}",
                    s.experiment,
                    s.scheme,
                    s.status,
                    s.converged,
                    s.diverged,
                    s.checks_pass,
                    dir.display()
                );
                code = code.max(s.exit_code);
            }
            Err(e) => {
                report(e);
                code = code.max(e.exit.code());
            }
        }
    }
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { source, out, jobs } => run(&source, &out, jobs),
        Command::ListPresets => {
            for (name, description) in PRESETS {
                println!("{name:<22} {description}");
            }
            ExitCode::SUCCESS
        }
        Command::ValidateConfig { source } => match source.experiments() {
            Ok(exps) => {
                for e in exps {
                    println!("ok: {} (task {}, scheme {})", e.name, e.task.kind(), e.scheme);
                }
                ExitCode::SUCCESS
            }
            Err(e) => report(&e),
        },
    }
}
