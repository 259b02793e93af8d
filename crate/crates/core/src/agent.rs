//! The perception, attention and memory loop.
//!
//! Every step the agent attends one salient channel, writes the resulting
//! record into a freshly allocated cell chained after the previous one, and
//! moves its recalled candidates forward. At the answer step it predicts from
//! positive candidates and then reinforces every surviving candidate by
//! reverse replay.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{EnvError, Observation};
use crate::hypothesis::{self, Candidate, HypothesisClass, VoteTally};
use crate::memory::{ActionToken, AttributeToken, CellId, Channel, MemoryError, MemoryStore, StepRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("observation {0} has no salient channel")]
    NothingSalient(Observation),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// How attention is chosen at steps with more than one salient channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Policy {
    /// Votes of positive candidates, uniform when there are none.
    #[default]
    Learned,
    /// Always the channel named by the episode's cue. Predicts from every
    /// surviving candidate.
    Cued,
    /// Always the channel the cue does not name. Predicts from every
    /// surviving candidate.
    Dummy,
}

/// Which candidates vote on the predicted answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnswerVoters {
    Positive,
    /// Positive and neutral candidates; negative ones never vote.
    #[default]
    NonNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Positive,
    Negative,
    Zero,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Positive => "positive",
            Outcome::Negative => "negative",
            Outcome::Zero => "zero",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeOutcome {
    pub result: Outcome,
    pub predicted: Option<AttributeToken>,
    pub actual: AttributeToken,
}

impl EpisodeOutcome {
    pub fn new(predicted: Option<AttributeToken>, actual: AttributeToken) -> Self {
        let result = match predicted {
            None => Outcome::Zero,
            Some(p) if p == actual => Outcome::Positive,
            Some(_) => Outcome::Negative,
        };
        Self {
            result,
            predicted,
            actual,
        }
    }
}

/// Per-step trace entry.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub step: usize,
    pub obs: Observation,
    pub salient: Vec<Channel>,
    pub positive: usize,
    pub negative: usize,
    pub neutral: usize,
    pub action: ActionToken,
    pub prediction: Option<AttributeToken>,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentParams {
    pub cells: usize,
    pub decay: f64,
    pub delta: f64,
    pub policy: Policy,
    pub answer_voters: AnswerVoters,
    /// Reinforce the episode's own stored chain with its outcome: `+delta`
    /// when the prediction was right, `-delta` when wrong, nothing for Zero.
    pub self_reinforce: bool,
}

impl AgentParams {
    pub fn new(cells: usize) -> Self {
        Self {
            cells,
            decay: 0.9,
            delta: 1.0,
            policy: Policy::Learned,
            answer_voters: AnswerVoters::NonNegative,
            self_reinforce: true,
        }
    }
}

/// Channels with a nonzero slice, in channel order.
pub fn salient_channels(obs: &Observation) -> Vec<Channel> {
    Channel::ALL.into_iter().filter(|&c| obs.is_active(c)).collect()
}

/// Attention choice. A single salient channel is attended without drawing
/// from `rng`. Otherwise positive candidates vote for their next action
/// (restricted to salient channels) and one action is drawn in proportion to
/// the votes; with no votes the choice is uniform.
pub fn select_attention<R: Rng + ?Sized>(
    salient: &[Channel],
    cands: &[Candidate],
    store: &MemoryStore,
    rng: &mut R,
) -> ActionToken {
    assert!(!salient.is_empty(), "select_attention needs a salient channel");
    if salient.len() == 1 {
        return ActionToken::attend(salient[0]);
    }
    let mut tally: VoteTally<ActionToken> = hypothesis::tally_next(cands, store, HypothesisClass::Positive);
    tally.retain(|a| salient.contains(&a.attend));
    if tally.is_empty() {
        uniform_choice(salient, rng)
    } else {
        tally.draw(rng).expect("non-empty tally")
    }
}

fn uniform_choice<R: Rng + ?Sized>(salient: &[Channel], rng: &mut R) -> ActionToken {
    ActionToken::attend(salient[rng.gen_range(0..salient.len())])
}

pub struct Agent {
    store: MemoryStore,
    cands: Vec<Candidate>,
    prev_cell: Option<CellId>,
    step_index: usize,
    rng: ChaCha8Rng,
    delta: f64,
    policy: Policy,
    answer_voters: AnswerVoters,
    self_reinforce: bool,
    cue: Option<AttributeToken>,
    prediction: Option<AttributeToken>,
    trace: Option<Vec<StepTrace>>,
}

impl Agent {
    pub fn new(params: AgentParams, rng: ChaCha8Rng) -> Result<Self, AgentError> {
        Ok(Self {
            store: MemoryStore::new(params.cells, params.decay)?,
            cands: Vec::new(),
            prev_cell: None,
            step_index: 0,
            rng,
            delta: params.delta,
            policy: params.policy,
            answer_voters: params.answer_voters,
            self_reinforce: params.self_reinforce,
            cue: None,
            prediction: None,
            trace: None,
        })
    }

    pub fn store(&self) -> &MemoryStore {
        &self.store
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.cands
    }

    pub fn prev_cell(&self) -> Option<CellId> {
        self.prev_cell
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    /// Drains the trace collected since the last call.
    pub fn take_trace(&mut self) -> Vec<StepTrace> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn begin_episode(&mut self) {
        self.cands.clear();
        self.prev_cell = None;
        self.step_index = 0;
        self.cue = None;
        self.prediction = None;
    }

    /// A step with nothing to attend: activities decay and nothing is stored.
    pub fn idle_tick(&mut self) {
        self.store.decay_tick();
    }

    fn class_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for c in &self.cands {
            match hypothesis::classify(c, &self.store) {
                HypothesisClass::Positive => counts.0 += 1,
                HypothesisClass::Negative => counts.1 += 1,
                HypothesisClass::Neutral => counts.2 += 1,
            }
        }
        counts
    }

    fn choose(&mut self, salient: &[Channel]) -> ActionToken {
        if salient.len() == 1 {
            return ActionToken::attend(salient[0]);
        }
        let cued = match self.cue.map(|t| t.value()) {
            Some(0) => Some(Channel::A1),
            Some(_) => Some(Channel::A2),
            None => None,
        };
        let scripted = match (self.policy, cued) {
            (Policy::Learned, _) | (_, None) => None,
            (Policy::Cued, Some(c)) => Some(c),
            (Policy::Dummy, Some(Channel::A1)) => Some(Channel::A2),
            (Policy::Dummy, Some(_)) => Some(Channel::A1),
        };
        match scripted {
            Some(c) if salient.contains(&c) => ActionToken::attend(c),
            _ => select_attention(salient, &self.cands, &self.store, &mut self.rng),
        }
    }

    pub fn step(&mut self, obs: &Observation) -> Result<ActionToken, AgentError> {
        let salient = salient_channels(obs);
        if salient.is_empty() {
            return Err(AgentError::NothingSalient(*obs));
        }
        let counts = self.trace.is_some().then(|| self.class_counts());
        let action = self.choose(&salient);
        let token = obs
            .token(action.attend)?
            .expect("attended channel is salient");
        let record = StepRecord::attended(token);

        let cell = self.store.allocate_after(self.prev_cell);
        if self.prev_cell.is_some_and(|p| self.store.record(p).is_none()) {
            self.prev_cell = None;
        }
        self.cands.retain(|c| c.cursor != cell);
        self.store.bind_step(self.prev_cell, cell, record)?;
        self.prev_cell = Some(cell);

        if self.step_index == 0 {
            self.cue = Some(token);
            self.cands = hypothesis::seed(token, &mut self.store);
            self.cands.retain(|c| c.cursor != cell);
        } else {
            self.cands = hypothesis::advance(&self.cands, &record, &mut self.store);
        }
        self.store.decay_tick();

        if let (Some(trace), Some((positive, negative, neutral))) = (self.trace.as_mut(), counts) {
            trace.push(StepTrace {
                step: self.step_index,
                obs: *obs,
                salient,
                positive,
                negative,
                neutral,
                action,
                prediction: None,
                outcome: None,
            });
        }
        self.step_index += 1;
        Ok(action)
    }

    /// Draws the answer from the next-step votes of the candidates allowed by
    /// [`AnswerVoters`] (every candidate for the scripted policies). `None`
    /// means no hypothesis is available.
    pub fn predict_answer(&mut self) -> Option<AttributeToken> {
        let mut tally: VoteTally<AttributeToken> = match self.policy {
            Policy::Learned => match self.answer_voters {
                AnswerVoters::Positive => {
                    hypothesis::tally_next(&self.cands, &self.store, HypothesisClass::Positive)
                }
                AnswerVoters::NonNegative => {
                    let mut t = hypothesis::tally_next(&self.cands, &self.store, HypothesisClass::Positive);
                    t.merge(&hypothesis::tally_next(&self.cands, &self.store, HypothesisClass::Neutral));
                    t
                }
            },
            Policy::Cued | Policy::Dummy => hypothesis::tally_next_any(&self.cands, &self.store),
        };
        tally.retain(|t| t.channel() == Channel::Ans);
        self.prediction = tally.draw(&mut self.rng);
        self.prediction
    }

    /// Reinforces surviving candidates against `actual`, then stores the
    /// actual answer as the episode's last step. With `self_reinforce` the new
    /// chain is then valued by the episode's outcome.
    pub fn finish_episode(&mut self, actual: AttributeToken) -> Result<EpisodeOutcome, AgentError> {
        hypothesis::evaluate(&self.cands, actual, self.delta, &mut self.store)?;
        self.step(&Observation::only(actual))?;
        let outcome = EpisodeOutcome::new(self.prediction, actual);
        if self.self_reinforce {
            let sign = match outcome.result {
                Outcome::Positive => 1.0,
                Outcome::Negative => -1.0,
                Outcome::Zero => 0.0,
            };
            if let (Some(last), true) = (self.prev_cell, sign != 0.0) {
                self.store.reverse_replay_assign(last, sign * self.delta)?;
            }
        }
        if let Some(last) = self.trace.as_mut().and_then(|t| t.last_mut()) {
            last.prediction = outcome.predicted;
            last.outcome = Some(outcome.result);
        }
        Ok(outcome)
    }
}
