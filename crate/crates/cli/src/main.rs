use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dwn_core::envs::{dst_pareto_oracle, DstLayout};
use dwn_core::harness::{
    self, evaluate_pareto, load_episodes, parse_override, pretrain_then_transfer, run_experiment,
    ExperimentConfig, SeedSummary,
};
use dwn_core::{Error, Result};

#[derive(Parser)]
#[command(name = "dwn", version, about = "Deep W-Networks experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train agents for every configured seed and write a run directory.
    Run(RunArgs),
    /// Score deep sea run directories against the exact Pareto front.
    Pareto {
        /// Run directories containing episodes.csv.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Deep sea layout file (bundled layout by default).
        #[arg(long)]
        layout: Option<PathBuf>,
    },
    /// Pretrain one DQN per objective, then continue training inside a DWN agent.
    Pretrain(RunArgs),
    /// Run the training-free invariant suites.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file; mountain car defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value` applied after the config file; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (default: $DWN_OUTPUT_ROOT/<env>-<agent>).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::mountain_car(),
        };
        let overrides = self
            .overrides
            .iter()
            .map(|o| parse_override(o))
            .collect::<Result<Vec<_>>>()?;
        let cfg = base.with_overrides(&overrides)?;
        let out = self.out.clone().unwrap_or_else(|| {
            let agent: String = cfg
                .agent
                .to_string()
                .chars()
                .filter(|c| c.is_ascii_alphanumeric() || *c == '_')
                .collect();
            harness::output_root().join(format!("{}-{agent}", cfg.env))
        });
        Ok((cfg, out))
    }
}

fn print_summaries(out: &Path, summaries: &[SeedSummary]) -> Result<()> {
    println!("{}", out.display());
    for s in summaries {
        println!("{}", serde_json::to_string(s)?);
    }
    let failed = summaries.iter().filter(|s| s.failure.is_some()).count();
    if failed > 0 {
        return Err(Error::Internal(format!(
            "{failed} seed(s) failed; see {}",
            out.join("FAILED").display()
        )));
    }
    Ok(())
}

fn pareto(runs: &[PathBuf], layout: Option<&Path>) -> Result<()> {
    let layout = match layout {
        Some(p) => DstLayout::load(p)?,
        None => DstLayout::standard(),
    };
    let front = dst_pareto_oracle(&layout);
    for dir in runs {
        let path = dir.join("episodes.csv");
        if !path.exists() {
            return Err(Error::Config(format!("{} has no episodes.csv", dir.display())));
        }
        let by_seed = load_episodes(&path)?;
        if by_seed.is_empty() {
            return Err(Error::Config(format!("{} holds no episodes", path.display())));
        }
        for (seed, records) in by_seed {
            let eval = evaluate_pareto(&records, &front)?;
            let line = serde_json::json!({
                "run": dir.display().to_string(),
                "seed": seed,
                "evaluation": eval,
            });
            println!("{line}");
        }
    }
    Ok(())
}

fn selftest() -> bool {
    let mut ok = true;
    for r in harness::selftest::run_all() {
        println!("{} {}: {}", if r.passed { "ok  " } else { "FAIL" }, r.name, r.detail);
        ok &= r.passed;
    }
    ok
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => args
            .resolve()
            .and_then(|(cfg, out)| run_experiment(&cfg, &out).and_then(|s| print_summaries(&out, &s))),
        Command::Pretrain(args) => args.resolve().and_then(|(cfg, out)| {
            pretrain_then_transfer(&cfg, &out).and_then(|s| print_summaries(&out, &s))
        }),
        Command::Pareto { runs, layout } => pareto(&runs, layout.as_deref()),
        Command::Selftest => {
            return if selftest() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
