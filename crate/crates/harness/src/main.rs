use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use grounded_harness::acceptance::{self, Criterion};
use grounded_harness::scenario::Scenario;
use grounded_harness::{run_category, Category, HarnessConfig};

#[derive(Parser)]
#[command(name = "harness", about = "Evaluation protocols for the grounded instruction agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol category and print or save its report.
    Run {
        #[arg(long)]
        category: Category,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        runs: u32,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run every category and property suite and judge the acceptance criteria.
    Acceptance {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        runs: u32,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the full JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Replay scenario files and check their expectations.
    Scenario {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Print the transcript of each run.
        #[arg(long)]
        transcript: bool,
    },
    /// Serve the session API for the instructor interface.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<HarnessConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(HarnessConfig::from_json(&text)?)
        }
        None => Ok(HarnessConfig::default()),
    }
}

fn write_json<T: serde::Serialize>(value: &T, path: Option<&Path>) -> anyhow::Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, json).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn verdict(criteria: &[Criterion]) -> ExitCode {
    if criteria.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { category, seed, runs, config, report } => {
            let cfg = load_config(config.as_ref())?;
            let r = run_category(category, &cfg, seed, runs)?;
            write_json(&r, report.as_deref())?;
            let mut criteria = acceptance::judge(&r);
            criteria.push(acceptance::reactivity(std::slice::from_ref(&r)));
            for c in &criteria {
                eprintln!("{c}");
            }
            Ok(verdict(&criteria))
        }
        Command::Acceptance { seed, runs, config, report } => {
            let cfg = load_config(config.as_ref())?;
            let r = acceptance::run(&cfg, seed, runs)?;
            for c in &r.criteria {
                println!("{c}");
            }
            let passed = r.criteria.iter().filter(|c| c.passed).count();
            println!("{passed}/{} criteria passed", r.criteria.len());
            if let Some(p) = report {
                write_json(&r, Some(&p))?;
            }
            Ok(verdict(&r.criteria))
        }
        Command::Scenario { files, transcript } => {
            let mut ok = true;
            for f in &files {
                let s = Scenario::load(f).with_context(|| format!("loading {}", f.display()))?;
                let run = s.run()?;
                match &run.divergence {
                    None => println!("PASS  {} ({} steps)", f.display(), run.steps_run),
                    Some(d) => {
                        ok = false;
                        let at = d.step.map_or("final state".to_string(), |i| format!("step {i}"));
                        println!("FAIL  {} at {at}: {}", f.display(), d.message);
                    }
                }
                if transcript {
                    for line in &run.transcript {
                        println!("  {}", serde_json::to_string(line)?);
                    }
                }
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Serve { addr } => {
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("listening on http://{addr}");
            rt.block_on(grounded_server::serve(addr))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
