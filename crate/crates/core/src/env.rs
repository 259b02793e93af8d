//! Delayed match-to-sample environment.
//!
//! An episode has four one-step phases: start cue, sample, target, answer.
//! Observations are eight binary digits in four 2-bit slices
//! (cue, attribute 1, attribute 2, answer). The cue names the attribute to
//! compare; the other attribute shows a dummy value that stays fixed for the
//! episode.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::memory::{AttributeToken, Channel};

pub const PHASES: usize = 4;
pub const N_CONFIGS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("phase {0} is outside 0..4")]
    BadPhase(usize),
    #[error("cued channel must be A1 or A2, got {0}")]
    BadCue(Channel),
    #[error("slice {channel} is not zero or one-hot: {bits:?}")]
    NotOneHot { channel: Channel, bits: [u8; 2] },
}

/// Eight binary digits, slices in [`Channel`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Observation {
    pub bits: [u8; 8],
}

impl Observation {
    pub fn new(bits: [u8; 8]) -> Self {
        Self { bits }
    }

    pub fn slice(&self, channel: Channel) -> [u8; 2] {
        let i = channel.index() * 2;
        [self.bits[i], self.bits[i + 1]]
    }

    pub fn is_active(&self, channel: Channel) -> bool {
        self.slice(channel) != [0, 0]
    }

    /// The token shown on `channel`, `None` for a zero slice.
    pub fn token(&self, channel: Channel) -> Result<Option<AttributeToken>, EnvError> {
        match self.slice(channel) {
            [0, 0] => Ok(None),
            [1, 0] => Ok(AttributeToken::new(channel, 0)),
            [0, 1] => Ok(AttributeToken::new(channel, 1)),
            bits => Err(EnvError::NotOneHot { channel, bits }),
        }
    }

    fn set(&mut self, tok: AttributeToken) {
        let i = tok.channel().index() * 2 + tok.value() as usize;
        self.bits[i] = 1;
    }

    /// Observation showing only `tok`.
    pub fn only(tok: AttributeToken) -> Self {
        let mut o = Self::default();
        o.set(tok);
        o
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EpisodeConfig {
    cued: Channel,
    pub dummy: u8,
    pub sample: u8,
    pub target: u8,
}

impl EpisodeConfig {
    pub fn new(cued: Channel, dummy: u8, sample: u8, target: u8) -> Result<Self, EnvError> {
        if !matches!(cued, Channel::A1 | Channel::A2) {
            return Err(EnvError::BadCue(cued));
        }
        Ok(Self {
            cued,
            dummy: dummy & 1,
            sample: sample & 1,
            target: target & 1,
        })
    }

    pub fn cued(&self) -> Channel {
        self.cued
    }

    pub fn dummy_channel(&self) -> Channel {
        match self.cued {
            Channel::A1 => Channel::A2,
            _ => Channel::A1,
        }
    }

    /// Cue token: value 0 cues attribute 1, value 1 cues attribute 2.
    pub fn cue_token(&self) -> AttributeToken {
        let v = if self.cued == Channel::A1 { 0 } else { 1 };
        AttributeToken::new(Channel::Cue, v).unwrap()
    }
}

/// All 16 configurations in a fixed canonical order.
pub fn all_configs() -> Vec<EpisodeConfig> {
    let mut out = Vec::with_capacity(N_CONFIGS);
    for cued in [Channel::A1, Channel::A2] {
        for dummy in 0..2 {
            for sample in 0..2 {
                for target in 0..2 {
                    out.push(EpisodeConfig::new(cued, dummy, sample, target).unwrap());
                }
            }
        }
    }
    out
}

/// A uniformly random permutation of all configurations.
pub fn new_block<R: Rng + ?Sized>(rng: &mut R) -> Vec<EpisodeConfig> {
    let mut block = all_configs();
    block.shuffle(rng);
    block
}

pub fn observe(config: &EpisodeConfig, phase: usize) -> Result<Observation, EnvError> {
    let mut obs = Observation::default();
    match phase {
        0 => obs.set(config.cue_token()),
        1 | 2 => {
            let v = if phase == 1 { config.sample } else { config.target };
            obs.set(AttributeToken::new(config.cued, v).unwrap());
            obs.set(AttributeToken::new(config.dummy_channel(), config.dummy).unwrap());
        }
        3 => obs.set(actual_answer(config)),
        p => return Err(EnvError::BadPhase(p)),
    }
    Ok(obs)
}

/// (ANS,0) when sample and target match, (ANS,1) otherwise.
pub fn actual_answer(config: &EpisodeConfig) -> AttributeToken {
    let v = if config.sample == config.target { 0 } else { 1 };
    AttributeToken::new(Channel::Ans, v).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceCounts {
    pub configurations: usize,
    pub attention_branches: usize,
    pub total: usize,
}

/// Counts the task space by enumeration: configurations, and for each the
/// attention paths through the two choice phases.
pub fn enumerate_space() -> SpaceCounts {
    let configs = all_configs();
    let mut branches_per_config = Vec::new();
    let mut total = 0;
    for cfg in &configs {
        let sample = salient(&observe(cfg, 1).unwrap());
        let target = salient(&observe(cfg, 2).unwrap());
        let branches = sample
            .iter()
            .flat_map(|a| target.iter().map(move |b| (a, b)))
            .count();
        branches_per_config.push(branches);
        total += branches;
    }
    let attention_branches = branches_per_config.iter().copied().max().unwrap_or(0);
    debug_assert!(branches_per_config.iter().all(|&b| b == attention_branches));
    SpaceCounts {
        configurations: configs.len(),
        attention_branches,
        total,
    }
}

fn salient(obs: &Observation) -> Vec<Channel> {
    Channel::ALL.into_iter().filter(|&c| obs.is_active(c)).collect()
}

/// Endless stream of configurations, one shuffled block of 16 at a time.
#[derive(Debug, Clone)]
pub struct BlockStream<R> {
    rng: R,
    block: Vec<EpisodeConfig>,
}

impl<R: Rng> BlockStream<R> {
    pub fn new(rng: R) -> Self {
        Self {
            rng,
            block: Vec::new(),
        }
    }
}

impl<R: Rng> Iterator for BlockStream<R> {
    type Item = EpisodeConfig;

    fn next(&mut self) -> Option<EpisodeConfig> {
        if self.block.is_empty() {
            self.block = new_block(&mut self.rng);
            self.block.reverse();
        }
        self.block.pop()
    }
}

/// `trial,episode,phase,bits,cued,dummy,sample,target`
pub fn trace_line(trial: usize, episode: usize, phase: usize, config: &EpisodeConfig) -> Result<String, EnvError> {
    let obs = observe(config, phase)?;
    Ok(format!(
        "{trial},{episode},{phase},{obs},{},{},{},{}",
        config.cued, config.dummy, config.sample, config.target
    ))
}
