//! `dqa` — command-line pipeline for the Decision-QA benchmark engine.
//!
//! Subcommands mirror the pipeline stages: `gen` writes a dataset,
//! `annotate` adds gold answers in place, `run` produces one transcript per
//! instance, `eval` scores transcripts into a report. Exit codes: 0 on
//! success, 1 on data errors, 2 on usage or configuration errors.

use clap::{Parser, Subcommand, ValueEnum};
use dqa_core::agent::Strategy;
use dqa_core::genesis::ScalePreset;
use dqa_core::pipeline::{self, BackendSpec, GenArgs, PipelineError, RunArgs, ScenarioSel};
use dqa_core::query::Dialect;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dqa", version, about = "Decision-QA benchmark pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Locating,
    Building,
    Both,
}

impl From<ScenarioArg> for ScenarioSel {
    fn from(value: ScenarioArg) -> Self {
        match value {
            ScenarioArg::Locating => ScenarioSel::Locating,
            ScenarioArg::Building => ScenarioSel::Building,
            ScenarioArg::Both => ScenarioSel::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Small,
    PaperLike,
}

impl From<ScaleArg> for ScalePreset {
    fn from(value: ScaleArg) -> Self {
        match value {
            ScaleArg::Small => ScalePreset::Small,
            ScaleArg::PaperLike => ScalePreset::PaperLike,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentArg {
    Single,
    Iter,
    Plan,
    PlanNorp,
}

impl From<AgentArg> for Strategy {
    fn from(value: AgentArg) -> Self {
        match value {
            AgentArg::Single => Strategy::Single,
            AgentArg::Iter => Strategy::Iter,
            AgentArg::Plan => Strategy::Plan,
            AgentArg::PlanNorp => Strategy::PlanNoReplan,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DialectArg {
    Table,
    Graph,
}

impl From<DialectArg> for Dialect {
    fn from(value: DialectArg) -> Self {
        match value {
            DialectArg::Table => Dialect::Table,
            DialectArg::Graph => Dialect::Graph,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate unannotated instances plus a manifest.
    Gen {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        /// Instances per selected scenario.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        count: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "small")]
        scale: ScaleArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Annotate gold answers in place; ties and degenerate instances move
    /// to rejected/.
    Annotate {
        #[arg(long = "in")]
        input: PathBuf,
        /// Parallel workers across instances.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run one agent configuration over a dataset, one transcript per
    /// instance. Existing transcripts are skipped (resumable).
    Run {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        agent: AgentArg,
        #[arg(long, value_enum)]
        dialect: DialectArg,
        /// Backend: scripted:FILE or http (configured via DQA_LM_ENDPOINT,
        /// DQA_LM_MODEL, DQA_LM_API_KEY).
        #[arg(long)]
        backend: String,
        #[arg(long)]
        out: PathBuf,
        /// LM-call budget per run.
        #[arg(long, default_value_t = 30)]
        max_steps: u32,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Score transcripts against a dataset into report.md + report.json.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        transcripts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Gen {
            scenario,
            count,
            seed,
            scale,
            out,
        } => {
            let manifest = pipeline::generate(&GenArgs {
                scenario: scenario.into(),
                count,
                seed,
                scale: scale.into(),
                out: out.clone(),
            })?;
            for (scenario, n) in &manifest.counts {
                println!("{scenario}: {n} instances");
            }
            println!(
                "wrote {} files to {}",
                manifest.instances.len(),
                out.display()
            );
        }
        Command::Annotate { input, jobs } => {
            let summary = pipeline::annotate(&input, jobs)?;
            println!(
                "annotated {}, rejected {}, already annotated {}",
                summary.annotated, summary.rejected, summary.skipped
            );
        }
        Command::Run {
            input,
            agent,
            dialect,
            backend,
            out,
            max_steps,
            jobs,
        } => {
            let summary = pipeline::run_agents(&RunArgs {
                dataset: input,
                out: out.clone(),
                strategy: agent.into(),
                dialect: dialect.into(),
                backend: BackendSpec::parse(&backend)?,
                max_steps,
                jobs,
            })?;
            println!(
                "wrote {} transcripts to {} ({} already present)",
                summary.written,
                out.display(),
                summary.skipped
            );
        }
        Command::Eval {
            dataset,
            transcripts,
            out,
        } => {
            let report = pipeline::evaluate(&dataset, &transcripts, &out)?;
            for (key, cell) in &report.accuracy {
                println!(
                    "{key}: {}/{} correct ({:.1}%)",
                    cell.correct,
                    cell.n,
                    100.0 * cell.accuracy
                );
            }
            println!("report written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
