//! Recalled candidate sequences, tracked in parallel against the current
//! episode.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::memory::{
    ActionToken, AttributeToken, CellId, Channel, Direction, MemoryError, MemoryStore, StepRecord,
};

/// A recalled past sequence and how far it has matched the current episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub cursor: CellId,
    pub matched_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HypothesisClass {
    Positive,
    Negative,
    Neutral,
}

impl HypothesisClass {
    pub fn from_sum(sum: f64) -> Self {
        if sum > 0.0 {
            HypothesisClass::Positive
        } else if sum < 0.0 {
            HypothesisClass::Negative
        } else {
            HypothesisClass::Neutral
        }
    }
}

/// Things a candidate can vote for at its next step.
pub trait Votable: Copy + Ord {
    fn from_record(rec: &StepRecord) -> Self;
}

impl Votable for ActionToken {
    fn from_record(rec: &StepRecord) -> Self {
        rec.action()
    }
}

impl Votable for AttributeToken {
    fn from_record(rec: &StepRecord) -> Self {
        rec.token()
    }
}

/// Vote counts, kept ordered so draws are reproducible for a given stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteTally<T: Ord> {
    counts: BTreeMap<T, u32>,
}

impl<T: Votable> Default for VoteTally<T> {
    fn default() -> Self {
        Self {
            counts: BTreeMap::new(),
        }
    }
}

impl<T: Votable> VoteTally<T> {
    pub fn add(&mut self, item: T) {
        *self.counts.entry(item).or_insert(0) += 1;
    }

    pub fn count(&self, item: &T) -> u32 {
        self.counts.get(item).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u32 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, u32)> + '_ {
        self.counts.iter().map(|(k, v)| (*k, *v))
    }

    pub fn merge(&mut self, other: &VoteTally<T>) {
        for (k, n) in other.iter() {
            *self.counts.entry(k).or_insert(0) += n;
        }
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&T) -> bool) {
        self.counts.retain(|k, _| keep(k));
    }

    /// Draws an item with probability proportional to its count. A tally with
    /// a single distinct item returns it without touching `rng`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<T> {
        match self.counts.len() {
            0 => None,
            1 => self.counts.keys().next().copied(),
            _ => {
                let items: Vec<T> = self.counts.keys().copied().collect();
                let dist = WeightedIndex::new(self.counts.values().copied())
                    .expect("tally counts are positive");
                Some(items[dist.sample(rng)])
            }
        }
    }
}

impl<T: Votable> FromIterator<T> for VoteTally<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut t = Self::default();
        for x in iter {
            t.add(x);
        }
        t
    }
}

/// One candidate per sequence-initial cell recording `first_token`. Every
/// matched cell is refreshed.
pub fn seed(first_token: AttributeToken, store: &mut MemoryStore) -> Vec<Candidate> {
    let cells = store.seed_states(first_token);
    cells
        .into_iter()
        .map(|cursor| {
            store.refresh(cursor).expect("seed cells are bound");
            Candidate {
                cursor,
                matched_len: 1,
            }
        })
        .collect()
}

/// Keeps candidates whose next stored record equals `observed`, moving their
/// cursor forward and refreshing the matched cell.
pub fn advance(cands: &[Candidate], observed: &StepRecord, store: &mut MemoryStore) -> Vec<Candidate> {
    let mut kept = Vec::with_capacity(cands.len());
    for c in cands {
        let Some(next) = store.neighbor(c.cursor, Direction::Forward) else {
            continue;
        };
        if store.record(next).as_ref() == Some(observed) {
            store.refresh(next).expect("neighbor is bound");
            kept.push(Candidate {
                cursor: next,
                matched_len: c.matched_len + 1,
            });
        }
    }
    kept
}

/// Sign of the summed value over the candidate's whole chain.
pub fn classify(cand: &Candidate, store: &MemoryStore) -> HypothesisClass {
    match store.chain_value(cand.cursor) {
        Ok(sum) => HypothesisClass::from_sum(sum),
        Err(_) => HypothesisClass::Neutral,
    }
}

/// Tallies what candidates of class `filter` record at their next step.
pub fn tally_next<T: Votable>(
    cands: &[Candidate],
    store: &MemoryStore,
    filter: HypothesisClass,
) -> VoteTally<T> {
    cands
        .iter()
        .filter(|c| classify(c, store) == filter)
        .filter_map(|c| store.neighbor(c.cursor, Direction::Forward))
        .filter_map(|n| store.record(n))
        .map(|r| T::from_record(&r))
        .collect()
}

/// Same as [`tally_next`] but over every candidate regardless of class.
pub fn tally_next_any<T: Votable>(cands: &[Candidate], store: &MemoryStore) -> VoteTally<T> {
    cands
        .iter()
        .filter_map(|c| store.neighbor(c.cursor, Direction::Forward))
        .filter_map(|n| store.record(n))
        .map(|r| T::from_record(&r))
        .collect()
}

/// End-of-episode reinforcement. Each candidate whose next record is an answer
/// gets its chain replayed backwards with `+delta` if that answer equals
/// `actual_final`, `-delta` otherwise. Returns how many chains were rewarded
/// and punished.
pub fn evaluate(
    cands: &[Candidate],
    actual_final: AttributeToken,
    delta: f64,
    store: &mut MemoryStore,
) -> Result<(usize, usize), MemoryError> {
    let (mut up, mut down) = (0, 0);
    for c in cands {
        let Some(next) = store.neighbor(c.cursor, Direction::Forward) else {
            continue;
        };
        let Some(rec) = store.record(next) else {
            continue;
        };
        if rec.token().channel() != Channel::Ans {
            continue;
        }
        if rec.token() == actual_final {
            store.reverse_replay_assign(next, delta)?;
            up += 1;
        } else {
            store.reverse_replay_assign(next, -delta)?;
            down += 1;
        }
    }
    Ok((up, down))
}
