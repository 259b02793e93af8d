use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::HarnessError;
use crate::agent::AnswerVoters;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub cell_counts: Vec<usize>,
    pub trials: usize,
    pub episodes: usize,
    pub seed: u64,
    pub decay: f64,
    pub delta: f64,
    pub gap_steps: usize,
    pub answer_voters: AnswerVoters,
    pub self_reinforce: bool,
    pub out_dir: PathBuf,
    pub trace: bool,
    /// `None` uses every available core.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            cell_counts: vec![100, 200, 300, 400, 500],
            trials: 10,
            episodes: 200,
            seed: 42,
            decay: 0.9,
            delta: 1.0,
            gap_steps: 0,
            answer_voters: AnswerVoters::NonNegative,
            self_reinforce: true,
            out_dir: PathBuf::from("out"),
            trace: false,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.cell_counts.is_empty() || self.cell_counts.contains(&0) {
            return bad("cell counts must be a non-empty list of positive integers");
        }
        if self.trials == 0 || self.episodes == 0 {
            return bad("trials and episodes must be positive");
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return bad("decay must lie in (0, 1)");
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return bad("delta must be positive");
        }
        if self.workers == Some(0) {
            return bad("workers must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum CellList {
    List(Vec<usize>),
    Text(String),
}

impl CellList {
    pub fn parse(&self) -> Result<Vec<usize>, HarnessError> {
        match self {
            CellList::List(v) => Ok(v.clone()),
            CellList::Text(s) => parse_cell_list(s),
        }
    }
}

pub fn parse_cell_list(s: &str) -> Result<Vec<usize>, HarnessError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| HarnessError::Config(format!("bad cell count {p:?}")))
        })
        .collect()
}

/// Spelling of [`AnswerVoters`] in config files and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VotersKey {
    Positive,
    NonNegative,
}

impl From<VotersKey> for AnswerVoters {
    fn from(k: VotersKey) -> Self {
        match k {
            VotersKey::Positive => AnswerVoters::Positive,
            VotersKey::NonNegative => AnswerVoters::NonNegative,
        }
    }
}

/// Partial configuration with the same keys as the `run` flags, read from a
/// TOML key-value file or assembled from the command line.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigFile {
    pub cells: Option<CellList>,
    pub trials: Option<usize>,
    pub episodes: Option<usize>,
    pub seed: Option<u64>,
    pub decay: Option<f64>,
    pub delta: Option<f64>,
    pub gap_steps: Option<usize>,
    pub answer_voters: Option<VotersKey>,
    pub self_reinforce: Option<bool>,
    pub out: Option<PathBuf>,
    pub trace: Option<bool>,
    pub workers: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Fields set in `over` win.
    pub fn merge(self, over: ConfigFile) -> ConfigFile {
        ConfigFile {
            cells: over.cells.or(self.cells),
            trials: over.trials.or(self.trials),
            episodes: over.episodes.or(self.episodes),
            seed: over.seed.or(self.seed),
            decay: over.decay.or(self.decay),
            delta: over.delta.or(self.delta),
            gap_steps: over.gap_steps.or(self.gap_steps),
            answer_voters: over.answer_voters.or(self.answer_voters),
            self_reinforce: over.self_reinforce.or(self.self_reinforce),
            out: over.out.or(self.out),
            trace: over.trace.or(self.trace),
            workers: over.workers.or(self.workers),
        }
    }

    pub fn resolve(self) -> Result<ExperimentConfig, HarnessError> {
        let d = ExperimentConfig::default();
        let cfg = ExperimentConfig {
            cell_counts: match self.cells {
                Some(c) => c.parse()?,
                None => d.cell_counts,
            },
            trials: self.trials.unwrap_or(d.trials),
            episodes: self.episodes.unwrap_or(d.episodes),
            seed: self.seed.unwrap_or(d.seed),
            decay: self.decay.unwrap_or(d.decay),
            delta: self.delta.unwrap_or(d.delta),
            gap_steps: self.gap_steps.unwrap_or(d.gap_steps),
            answer_voters: self.answer_voters.map(Into::into).unwrap_or(d.answer_voters),
            self_reinforce: self.self_reinforce.unwrap_or(d.self_reinforce),
            out_dir: self.out.unwrap_or(d.out_dir),
            trace: self.trace.unwrap_or(d.trace),
            workers: self.workers.or(d.workers),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
