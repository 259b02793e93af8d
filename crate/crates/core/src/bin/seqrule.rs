use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seqrule::env::enumerate_space;
use seqrule::harness::{self, ConfigFile, HarnessError};

#[derive(Parser)]
#[command(name = "seqrule", version, about = "Sequence-memory rule discovery on delayed match-to-sample")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded sweep over cell counts and write CSV, SVG and traces.
    Run(RunArgs),
    /// Print the task-space enumeration.
    Enumerate,
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with the same keys as these flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated cell counts.
    #[arg(long)]
    cells: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Activity decay factor per step.
    #[arg(long)]
    decay: Option<f64>,
    /// Reinforcement value added per evaluation.
    #[arg(long)]
    delta: Option<f64>,
    /// Idle steps between episodes.
    #[arg(long)]
    gap_steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Which candidates vote on the predicted answer.
    #[arg(long, value_enum)]
    answer_voters: Option<harness::VotersKey>,
    /// Value each episode's own stored chain by its outcome.
    #[arg(long)]
    self_reinforce: Option<bool>,
    /// Also write trace.txt with every step of every trial.
    #[arg(long)]
    trace: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl RunArgs {
    fn flags(&self) -> ConfigFile {
        ConfigFile {
            cells: self.cells.clone().map(harness::CellList::Text),
            trials: self.trials,
            episodes: self.episodes,
            seed: self.seed,
            decay: self.decay,
            delta: self.delta,
            gap_steps: self.gap_steps,
            answer_voters: self.answer_voters,
            self_reinforce: self.self_reinforce,
            out: self.out.clone(),
            trace: self.trace.then_some(true),
            workers: self.workers,
        }
    }
}

fn run(args: &RunArgs) -> Result<(), HarnessError> {
    let base = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let config = base.merge(args.flags()).resolve()?;
    let exp = harness::run_sweep(&config, config.trace)?;
    let rates = harness::block_rates(&exp.log);
    let files = harness::emit(&exp.log, &rates, &config, config.trace.then_some(exp.traces.as_slice()))?;

    // stdout may be a closed pipe; the files are already written
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{:>6} {:>9} {:>6} {:>6} {:>6}", "cells", "block_end", "+", "-", "0");
    for r in &rates.rows {
        let _ = writeln!(
            out,
            "{:>6} {:>9} {:>6.2} {:>6.2} {:>6.2}{}",
            r.cells,
            r.block_end,
            r.pos,
            r.neg,
            r.zero,
            if r.partial { "  (partial block)" } else { "" }
        );
    }
    for p in files.paths {
        let _ = writeln!(out, "wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Enumerate => {
            let s = enumerate_space();
            println!("configurations={}", s.configurations);
            println!("attention_branches_per_episode={}", s.attention_branches);
            println!("total={}", s.total);
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
