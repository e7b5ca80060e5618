use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qswitch::experiment::{self, Overrides, RunConfig};
use qswitch::{FidelityMode, Policy};

#[derive(Parser)]
#[command(
    name = "qswitch",
    version,
    about = "Optimal swap/distill policies for a two-client quantum switch"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the MDP and write the policy artifact.
    Solve(RunArgs),
    /// Solve (or load a policy) and simulate it.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Use a policy artifact instead of solving.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Solve and simulate every (threshold, mode) cell; write a CSV table.
    Sweep(RunArgs),
    /// Summarise a policy artifact.
    InspectPolicy { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Quantized,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "f-th")]
    f_th: Option<f64>,
    #[arg(long)]
    no_distill: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let overrides = Overrides {
            f_th: self.f_th,
            no_distill: self.no_distill,
            seed: self.seed,
            steps: self.steps,
            mode: self.mode.map(|m| match m {
                ModeArg::Exact => FidelityMode::Exact,
                ModeArg::Quantized => FidelityMode::Quantized,
            }),
            out: self.out.clone(),
            trace: self.trace.clone(),
        };
        experiment::parse_config(self.config.as_deref(), &overrides).context("config")
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("output: writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(args) => {
            let config = args.load()?;
            let artifact = experiment::run_solve(&config).context("solve")?;
            log::info!(
                "solved {} states in {} rounds (residual {:e})",
                artifact.solution.policy.len(),
                artifact.solution.iterations,
                artifact.solution.residual
            );
            emit(config.output.out.as_deref(), &artifact.text)
        }
        Command::Simulate { run, policy } => {
            let config = run.load()?;
            let policy = policy
                .map(|p| -> Result<Policy> {
                    let text =
                        std::fs::read_to_string(&p).with_context(|| format!("policy: reading {}", p.display()))?;
                    Policy::parse(&text).context("policy")
                })
                .transpose()?;
            let report = experiment::run_simulate(&config, policy).context("simulate")?;
            let summary = serde_json::json!({
                "f_th": config.model.f_th,
                "allow_distill": config.model.allow_distill,
                "seed": config.simulation.seed,
                "steps": report.steps,
                "success_count": report.success_count,
                "throughput": report.throughput,
                "avg_fidelity": report.avg_fidelity,
                "jitter": report.jitter,
            });
            emit(config.output.out.as_deref(), &format!("{summary:#}\n"))
        }
        Command::Sweep(args) => {
            let config = args.load()?;
            let table = experiment::run_sweep(&config);
            emit(config.output.out.as_deref(), &table)
        }
        Command::InspectPolicy { path } => {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("inspect-policy: reading {}", path.display()))?;
            let summary = experiment::inspect_policy(&text).context("inspect-policy")?;
            print!("{summary}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
