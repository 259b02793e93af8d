//! Seeded experiment runner: trials, sweeps over cell counts, block rates.

mod config;
mod output;
mod plot;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::agent::{Agent, AgentError, AgentParams, AnswerVoters, EpisodeOutcome, Outcome, Policy, StepTrace};
use crate::env::{self, BlockStream, EnvError, EpisodeConfig};

pub use config::{parse_cell_list, CellList, ConfigFile, ExperimentConfig, VotersKey};
pub use output::{emit, EmittedFiles};
pub use plot::{learning_curve_svg, trailing_mean_curves};

/// Episodes per rate-aggregation block.
pub const BLOCK_LEN: usize = 40;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialParams {
    pub cells: usize,
    pub episodes: usize,
    pub seed: u64,
    pub decay: f64,
    pub delta: f64,
    pub gap_steps: usize,
    pub policy: Policy,
    pub answer_voters: AnswerVoters,
    pub self_reinforce: bool,
}

impl TrialParams {
    pub fn new(cells: usize, episodes: usize, seed: u64) -> Self {
        Self {
            cells,
            episodes,
            seed,
            decay: 0.9,
            delta: 1.0,
            gap_steps: 0,
            policy: Policy::Learned,
            answer_voters: AnswerVoters::NonNegative,
            self_reinforce: true,
        }
    }
}

/// One episode's environment configuration and the agent's per-step trace.
#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    pub config: EpisodeConfig,
    pub steps: Vec<StepTrace>,
}

#[derive(Debug, Clone)]
pub struct TrialRun {
    pub outcomes: Vec<EpisodeOutcome>,
    pub trace: Vec<EpisodeTrace>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one trial. Depends only on (base seed, cells, trial index), so
/// adding cell counts or trials never changes existing trials.
pub fn trial_seed(base: u64, cells: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ cells as u64) ^ trial as u64)
}

pub fn run_trial(params: &TrialParams) -> Result<Vec<EpisodeOutcome>, HarnessError> {
    Ok(run_trial_inner(params, false)?.outcomes)
}

pub fn run_trial_traced(params: &TrialParams) -> Result<TrialRun, HarnessError> {
    run_trial_inner(params, true)
}

fn run_trial_inner(params: &TrialParams, traced: bool) -> Result<TrialRun, HarnessError> {
    let agent_params = AgentParams {
        cells: params.cells,
        decay: params.decay,
        delta: params.delta,
        policy: params.policy,
        answer_voters: params.answer_voters,
        self_reinforce: params.self_reinforce,
    };
    let mut agent_rng = ChaCha8Rng::seed_from_u64(params.seed);
    agent_rng.set_stream(0);
    let mut env_rng = ChaCha8Rng::seed_from_u64(params.seed);
    env_rng.set_stream(1);

    let mut agent = Agent::new(agent_params, agent_rng)?;
    if traced {
        agent.enable_trace();
    }
    let mut outcomes = Vec::with_capacity(params.episodes);
    let mut trace = Vec::new();
    for (i, cfg) in BlockStream::new(env_rng).take(params.episodes).enumerate() {
        if i > 0 {
            for _ in 0..params.gap_steps {
                agent.idle_tick();
            }
        }
        agent.begin_episode();
        for phase in 0..env::PHASES - 1 {
            agent.step(&env::observe(&cfg, phase)?)?;
        }
        agent.predict_answer();
        outcomes.push(agent.finish_episode(env::actual_answer(&cfg))?);
        if traced {
            trace.push(EpisodeTrace {
                config: cfg,
                steps: agent.take_trace(),
            });
        }
    }
    Ok(TrialRun { outcomes, trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutcomeRow {
    pub cells: usize,
    pub trial: usize,
    /// 1-based.
    pub episode: usize,
    pub result: Outcome,
}

/// Outcomes in canonical (cells, trial, episode) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeLog {
    pub cell_counts: Vec<usize>,
    pub trials: usize,
    pub episodes: usize,
    pub rows: Vec<OutcomeRow>,
}

impl OutcomeLog {
    /// Results of one trial, in episode order.
    pub fn trial(&self, cells: usize, trial: usize) -> Option<&[OutcomeRow]> {
        let ci = self.cell_counts.iter().position(|&c| c == cells)?;
        let start = (ci * self.trials + trial) * self.episodes;
        self.rows.get(start..start + self.episodes)
    }
}

/// Result of one sweep, with optional traces kept per (cells, trial).
#[derive(Debug, Clone)]
pub struct Experiment {
    pub log: OutcomeLog,
    pub traces: Vec<(usize, usize, Vec<EpisodeTrace>)>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<OutcomeLog, HarnessError> {
    Ok(run_sweep(config, false)?.log)
}

/// Runs every (cells, trial) pair, in parallel when `config.workers` allows.
/// Results are merged in canonical order, so the log does not depend on the
/// worker count.
pub fn run_sweep(config: &ExperimentConfig, traced: bool) -> Result<Experiment, HarnessError> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = config
        .cell_counts
        .iter()
        .flat_map(|&c| (0..config.trials).map(move |t| (c, t)))
        .collect();
    let run = |&(cells, trial): &(usize, usize)| -> Result<TrialRun, HarnessError> {
        let params = TrialParams {
            cells,
            episodes: config.episodes,
            seed: trial_seed(config.seed, cells, trial),
            decay: config.decay,
            delta: config.delta,
            gap_steps: config.gap_steps,
            policy: Policy::Learned,
            answer_voters: config.answer_voters,
            self_reinforce: config.self_reinforce,
        };
        run_trial_inner(&params, traced)
    };
    let results: Vec<TrialRun> = match config.workers {
        Some(1) => jobs.iter().map(run).collect::<Result<_, _>>()?,
        workers => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.unwrap_or(0))
                .build()
                .map_err(|e| HarnessError::Pool(e.to_string()))?;
            pool.install(|| jobs.par_iter().map(run).collect::<Result<_, _>>())?
        }
    };

    let mut rows = Vec::with_capacity(jobs.len() * config.episodes);
    let mut traces = Vec::new();
    for (&(cells, trial), run) in jobs.iter().zip(results) {
        rows.extend(run.outcomes.iter().enumerate().map(|(e, o)| OutcomeRow {
            cells,
            trial,
            episode: e + 1,
            result: o.result,
        }));
        if traced {
            traces.push((cells, trial, run.trace));
        }
    }
    Ok(Experiment {
        log: OutcomeLog {
            cell_counts: config.cell_counts.clone(),
            trials: config.trials,
            episodes: config.episodes,
            rows,
        },
        traces,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRate {
    pub cells: usize,
    /// Last episode (1-based) of the block.
    pub block_end: usize,
    pub pos: f64,
    pub neg: f64,
    pub zero: f64,
    /// Set for a trailing block shorter than [`BLOCK_LEN`].
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockRates {
    pub rows: Vec<BlockRate>,
}

impl BlockRates {
    pub fn get(&self, cells: usize, block_end: usize) -> Option<&BlockRate> {
        self.rows
            .iter()
            .find(|r| r.cells == cells && r.block_end == block_end)
    }

    pub fn for_cells(&self, cells: usize) -> impl Iterator<Item = &BlockRate> {
        self.rows.iter().filter(move |r| r.cells == cells)
    }
}

/// Outcome fractions per 40-episode block, pooled over trials. A trailing
/// short block is reported with `partial` set.
pub fn block_rates(log: &OutcomeLog) -> BlockRates {
    let mut rows = Vec::new();
    for &cells in &log.cell_counts {
        let mut start = 0;
        while start < log.episodes {
            let end = (start + BLOCK_LEN).min(log.episodes);
            let (mut pos, mut neg, mut zero) = (0usize, 0usize, 0usize);
            for trial in 0..log.trials {
                let Some(rows) = log.trial(cells, trial) else {
                    continue;
                };
                for r in &rows[start..end] {
                    match r.result {
                        Outcome::Positive => pos += 1,
                        Outcome::Negative => neg += 1,
                        Outcome::Zero => zero += 1,
                    }
                }
            }
            let n = (pos + neg + zero).max(1) as f64;
            rows.push(BlockRate {
                cells,
                block_end: end,
                pos: pos as f64 / n,
                neg: neg as f64 / n,
                zero: zero as f64 / n,
                partial: end - start < BLOCK_LEN,
            });
            start = end;
        }
    }
    BlockRates { rows }
}
