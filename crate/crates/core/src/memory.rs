//! One-shot sequence memory.
//!
//! Each stored step occupies one latent cell. Cells are linked into chains by a
//! transition relation with at most one successor and one predecessor per cell,
//! so two sequences that look identical in attribute space still live on
//! separate chains. Cells carry an activity level that decays every tick and is
//! restored to 1.0 when the cell is allocated or matched; allocation recycles
//! the least active cell.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

/// The four 2-bit slices of an observation, in bit order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Cue,
    A1,
    A2,
    Ans,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Cue, Channel::A1, Channel::A2, Channel::Ans];

    /// Slice position, 0..4.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Channel> {
        Channel::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Cue => "CUE",
            Channel::A1 => "A1",
            Channel::A2 => "A2",
            Channel::Ans => "ANS",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One attended attribute: a channel and the position of the 1 in its slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttributeToken {
    channel: Channel,
    value: u8,
}

impl AttributeToken {
    /// Returns `None` unless `value` is 0 or 1.
    pub fn new(channel: Channel, value: u8) -> Option<Self> {
        (value <= 1).then_some(Self { channel, value })
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn value(&self) -> u8 {
        self.value
    }
}

impl fmt::Display for AttributeToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.channel, self.value)
    }
}

/// Attention is the only action: it names the channel to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionToken {
    pub attend: Channel,
}

impl ActionToken {
    pub fn attend(channel: Channel) -> Self {
        Self { attend: channel }
    }
}

impl fmt::Display for ActionToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Attend({})", self.attend)
    }
}

/// One element of a stored sequence. Attending a channel yields that
/// channel's token, so the action is implied by the token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepRecord {
    token: AttributeToken,
    action: ActionToken,
}

impl StepRecord {
    pub fn attended(token: AttributeToken) -> Self {
        Self {
            token,
            action: ActionToken::attend(token.channel),
        }
    }

    pub fn token(&self) -> AttributeToken {
        self.token
    }

    pub fn action(&self) -> ActionToken {
        self.action
    }
}

impl fmt::Display for StepRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.token, self.action)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(pub usize);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemoryError {
    #[error("memory store needs at least one cell")]
    NoCells,
    #[error("decay factor must lie in (0, 1), got {0}")]
    BadDecay(String),
    #[error("cell {0} is out of range")]
    OutOfRange(CellId),
    #[error("cell {0} already holds a record")]
    AlreadyBound(CellId),
    #[error("cell {0} holds no record")]
    Unbound(CellId),
    #[error("cell {0} already has a successor")]
    SuccessorTaken(CellId),
    #[error("transition chain revisits cell {0}")]
    Cycle(CellId),
}

/// Fixed-capacity associative sequence store.
#[derive(Debug, Clone)]
pub struct MemoryStore {
    decay: f64,
    activity: Vec<f64>,
    value: Vec<f64>,
    next: Vec<Option<CellId>>,
    prev: Vec<Option<CellId>>,
    records: Vec<Option<StepRecord>>,
    token_index: BTreeMap<AttributeToken, BTreeSet<CellId>>,
}

impl MemoryStore {
    pub fn new(n_cells: usize, decay: f64) -> Result<Self, MemoryError> {
        if n_cells == 0 {
            return Err(MemoryError::NoCells);
        }
        if !(decay > 0.0 && decay < 1.0) {
            return Err(MemoryError::BadDecay(decay.to_string()));
        }
        Ok(Self {
            decay,
            activity: vec![0.0; n_cells],
            value: vec![0.0; n_cells],
            next: vec![None; n_cells],
            prev: vec![None; n_cells],
            records: vec![None; n_cells],
            token_index: BTreeMap::new(),
        })
    }

    pub fn n_cells(&self) -> usize {
        self.activity.len()
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    fn check(&self, cell: CellId) -> Result<usize, MemoryError> {
        if cell.0 < self.n_cells() {
            Ok(cell.0)
        } else {
            Err(MemoryError::OutOfRange(cell))
        }
    }

    fn check_bound(&self, cell: CellId) -> Result<usize, MemoryError> {
        let i = self.check(cell)?;
        if self.records[i].is_none() {
            return Err(MemoryError::Unbound(cell));
        }
        Ok(i)
    }

    pub fn activity(&self, cell: CellId) -> f64 {
        self.activity[cell.0]
    }

    pub fn value(&self, cell: CellId) -> f64 {
        self.value[cell.0]
    }

    pub fn record(&self, cell: CellId) -> Option<StepRecord> {
        self.records.get(cell.0).copied().flatten()
    }

    pub fn bound_cells(&self) -> impl Iterator<Item = CellId> + '_ {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_some())
            .map(|(i, _)| CellId(i))
    }

    /// Cells currently indexed under `token`.
    pub fn cells_for(&self, token: AttributeToken) -> impl Iterator<Item = CellId> + '_ {
        self.token_index.get(&token).into_iter().flatten().copied()
    }

    /// Recycles the least active cell (lowest index on ties), scrubs it and
    /// marks it fully active.
    ///
    /// The rest of the victim's chain can no longer be replayed to its end, so
    /// those cells are released too: scrubbed and left at zero activity.
    pub fn allocate_state(&mut self) -> CellId {
        self.allocate_after(None)
    }

    /// Like [`allocate_state`](Self::allocate_state), but the chain ending at
    /// `prev` is never released wholesale. If the coldest cell lies on that
    /// chain only that cell is cut loose, and `prev` itself is taken only when
    /// it is the sole cell. Callers should check `prev` is still bound.
    pub fn allocate_after(&mut self, prev: Option<CellId>) -> CellId {
        let skip = prev.filter(|_| self.activity.len() > 1).map(|p| p.0);
        let mut best: Option<usize> = None;
        for (i, &a) in self.activity.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            if best.is_none_or(|b| a < self.activity[b]) {
                best = Some(i);
            }
        }
        let best = best.unwrap_or(0);
        let cell = CellId(best);
        let own = match prev {
            Some(p) if self.records.get(p.0).is_some_and(|r| r.is_some()) => {
                self.chain(p).unwrap_or_default()
            }
            _ => Vec::new(),
        };
        if self.records[best].is_some() && !own.contains(&cell) {
            let chain = self.chain(cell).unwrap_or_else(|_| vec![cell]);
            for c in chain {
                self.scrub(c);
                self.activity[c.0] = 0.0;
            }
        } else {
            self.scrub(cell);
        }
        self.activity[best] = 1.0;
        cell
    }

    fn scrub(&mut self, cell: CellId) {
        let i = cell.0;
        if let Some(rec) = self.records[i].take() {
            if let Some(set) = self.token_index.get_mut(&rec.token) {
                set.remove(&cell);
                if set.is_empty() {
                    self.token_index.remove(&rec.token);
                }
            }
        }
        if let Some(n) = self.next[i].take() {
            self.prev[n.0] = None;
        }
        if let Some(p) = self.prev[i].take() {
            self.next[p.0] = None;
        }
        self.value[i] = 0.0;
    }

    /// Binds `rec` to a freshly allocated `cell`, linking it after `prev`.
    pub fn bind_step(
        &mut self,
        prev: Option<CellId>,
        cell: CellId,
        rec: StepRecord,
    ) -> Result<(), MemoryError> {
        let i = self.check(cell)?;
        if self.records[i].is_some() {
            return Err(MemoryError::AlreadyBound(cell));
        }
        if let Some(p) = prev {
            let pi = self.check_bound(p)?;
            if self.next[pi].is_some() {
                return Err(MemoryError::SuccessorTaken(p));
            }
            if p == cell {
                return Err(MemoryError::Cycle(cell));
            }
            self.next[pi] = Some(cell);
            self.prev[i] = Some(p);
        }
        self.records[i] = Some(rec);
        self.token_index.entry(rec.token).or_default().insert(cell);
        Ok(())
    }

    pub fn decay_tick(&mut self) {
        for a in &mut self.activity {
            *a *= self.decay;
        }
    }

    pub fn refresh(&mut self, cell: CellId) -> Result<(), MemoryError> {
        let i = self.check_bound(cell)?;
        self.activity[i] = 1.0;
        Ok(())
    }

    /// Sequence-initial cells whose record carries `token`.
    pub fn seed_states(&self, token: AttributeToken) -> Vec<CellId> {
        self.cells_for(token)
            .filter(|c| self.prev[c.0].is_none())
            .collect()
    }

    pub fn neighbor(&self, cell: CellId, direction: Direction) -> Option<CellId> {
        let i = cell.0;
        if i >= self.n_cells() {
            return None;
        }
        match direction {
            Direction::Forward => self.next[i],
            Direction::Backward => self.prev[i],
        }
    }

    /// Walks from `last` back to the start of its chain adding `delta` to every
    /// visited cell. Returns the cells in visit order.
    pub fn reverse_replay_assign(
        &mut self,
        last: CellId,
        delta: f64,
    ) -> Result<Vec<CellId>, MemoryError> {
        let visited = self.walk(last, Direction::Backward)?;
        for c in &visited {
            self.value[c.0] += delta;
        }
        Ok(visited)
    }

    /// Cells reached from `start` (inclusive) following `direction` to the
    /// chain boundary.
    pub fn walk(&self, start: CellId, direction: Direction) -> Result<Vec<CellId>, MemoryError> {
        self.check_bound(start)?;
        let mut seen = vec![false; self.n_cells()];
        let mut out = Vec::new();
        let mut cur = Some(start);
        while let Some(c) = cur {
            if seen[c.0] {
                return Err(MemoryError::Cycle(c));
            }
            seen[c.0] = true;
            out.push(c);
            cur = self.neighbor(c, direction);
        }
        Ok(out)
    }

    /// The whole chain containing `cell`, in sequence order.
    pub fn chain(&self, cell: CellId) -> Result<Vec<CellId>, MemoryError> {
        let mut back = self.walk(cell, Direction::Backward)?;
        back.reverse();
        let fwd = self.walk(cell, Direction::Forward)?;
        back.extend_from_slice(&fwd[1..]);
        Ok(back)
    }

    pub fn chain_value(&self, cell: CellId) -> Result<f64, MemoryError> {
        Ok(self.chain(cell)?.iter().map(|c| self.value[c.0]).sum())
    }

    /// Line-oriented dump: one line per chain, starting from each initial cell.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "cells={} decay={}", self.n_cells(), self.decay);
        for c in self.bound_cells().filter(|c| self.prev[c.0].is_none()) {
            let Ok(chain) = self.walk(c, Direction::Forward) else {
                let _ = writeln!(out, "{c}: <cycle>");
                continue;
            };
            let parts: Vec<String> = chain
                .iter()
                .map(|&k| {
                    format!(
                        "{k}[{} a={:.3} v={:+}]",
                        self.records[k.0].map(|r| r.to_string()).unwrap_or_default(),
                        self.activity[k.0],
                        self.value[k.0]
                    )
                })
                .collect();
            let _ = writeln!(out, "{}", parts.join(" -> "));
        }
        out
    }

    /// Checks every structural invariant of the store.
    pub fn check_invariants(&self) -> Result<(), String> {
        for i in 0..self.n_cells() {
            let c = CellId(i);
            if !(0.0..=1.0).contains(&self.activity[i]) {
                return Err(format!("{c}: activity {} outside [0,1]", self.activity[i]));
            }
            if let Some(n) = self.next[i] {
                if self.prev[n.0] != Some(c) {
                    return Err(format!("{c}: successor {n} does not point back"));
                }
            }
            if let Some(p) = self.prev[i] {
                if self.next[p.0] != Some(c) {
                    return Err(format!("{c}: predecessor {p} does not point forward"));
                }
            }
            match self.records[i] {
                Some(rec) => {
                    if !self.token_index.get(&rec.token).is_some_and(|s| s.contains(&c)) {
                        return Err(format!("{c}: missing from token index"));
                    }
                }
                None => {
                    if self.value[i] != 0.0 || self.next[i].is_some() || self.prev[i].is_some() {
                        return Err(format!("{c}: unbound cell carries state"));
                    }
                }
            }
        }
        for (tok, cells) in &self.token_index {
            for c in cells {
                if self.records[c.0].map(|r| r.token) != Some(*tok) {
                    return Err(format!("{c}: indexed under {tok} but record differs"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(ch: Channel, v: u8) -> AttributeToken {
        AttributeToken::new(ch, v).unwrap()
    }

    fn rec(ch: Channel, v: u8) -> StepRecord {
        StepRecord::attended(tok(ch, v))
    }

    fn store_chain(m: &mut MemoryStore, recs: &[StepRecord]) -> Vec<CellId> {
        let mut prev = None;
        let mut cells = Vec::new();
        for r in recs {
            let c = m.allocate_state();
            m.bind_step(prev, c, *r).unwrap();
            prev = Some(c);
            cells.push(c);
        }
        cells
    }

    fn episode(cue: u8, ch: Channel, s: u8, t: u8, ans: u8) -> [StepRecord; 4] {
        [rec(Channel::Cue, cue), rec(ch, s), rec(ch, t), rec(Channel::Ans, ans)]
    }

    #[test]
    fn token_value_range() {
        assert!(AttributeToken::new(Channel::A1, 2).is_none());
        assert_ne!(tok(Channel::A1, 0), tok(Channel::A2, 0));
        assert_eq!(rec(Channel::A2, 1).action().attend, Channel::A2);
    }

    #[test]
    fn allocate_fresh_store_picks_cell_zero() {
        let mut m = MemoryStore::new(3, 0.9).unwrap();
        assert_eq!(m.allocate_state(), CellId(0));
        assert_eq!(m.activity(CellId(0)), 1.0);
    }

    #[test]
    fn allocate_picks_argmin() {
        let mut m = MemoryStore::new(3, 0.9).unwrap();
        m.activity = vec![0.9, 0.1, 0.5];
        assert_eq!(m.allocate_state(), CellId(1));
        assert_eq!(m.activity, vec![0.9, 1.0, 0.5]);
    }

    #[test]
    fn recycling_scrubs_bindings() {
        let mut m = MemoryStore::new(3, 0.9).unwrap();
        let cells = store_chain(&mut m, &[rec(Channel::Cue, 0), rec(Channel::A1, 0), rec(Channel::A1, 1)]);
        assert_eq!(cells, vec![CellId(0), CellId(1), CellId(2)]);
        assert!(m.cells_for(tok(Channel::A1, 0)).any(|c| c == CellId(1)));
        assert_eq!(m.neighbor(CellId(2), Direction::Backward), Some(CellId(1)));
        m.value[1] = 3.0;
        m.activity = vec![0.9, 0.1, 0.5];
        assert_eq!(m.allocate_state(), CellId(1));
        assert_eq!(m.cells_for(tok(Channel::A1, 0)).count(), 0);
        assert_eq!(m.neighbor(CellId(2), Direction::Backward), None);
        assert_eq!(m.neighbor(CellId(0), Direction::Forward), None);
        assert_eq!(m.value(CellId(1)), 0.0);
        assert!(m.record(CellId(1)).is_none());
        m.check_invariants().unwrap();
    }

    #[test]
    fn chain_links() {
        let mut m = MemoryStore::new(8, 0.9).unwrap();
        let c = store_chain(&mut m, &episode(0, Channel::A1, 0, 1, 1));
        assert_eq!(m.neighbor(c[0], Direction::Forward), Some(c[1]));
        assert_eq!(m.neighbor(c[3], Direction::Backward), Some(c[2]));
        assert_eq!(m.neighbor(c[0], Direction::Backward), None);
        assert_eq!(m.neighbor(c[1], Direction::Forward), Some(c[2]));
        assert_eq!(m.neighbor(c[3], Direction::Forward), None);
    }

    #[test]
    fn episodes_do_not_link_across_boundary() {
        let mut m = MemoryStore::new(8, 0.9).unwrap();
        let a = store_chain(&mut m, &episode(0, Channel::A1, 0, 1, 1));
        let b = store_chain(&mut m, &episode(1, Channel::A2, 1, 1, 0));
        assert_eq!(m.neighbor(a[3], Direction::Forward), None);
        assert_eq!(m.neighbor(b[0], Direction::Backward), None);
    }

    #[test]
    fn bind_contract_violations() {
        let mut m = MemoryStore::new(4, 0.9).unwrap();
        let c0 = m.allocate_state();
        m.bind_step(None, c0, rec(Channel::Cue, 0)).unwrap();
        assert_eq!(
            m.bind_step(None, c0, rec(Channel::Cue, 1)),
            Err(MemoryError::AlreadyBound(c0))
        );
        let c1 = m.allocate_state();
        m.bind_step(Some(c0), c1, rec(Channel::A1, 0)).unwrap();
        let c2 = m.allocate_state();
        assert_eq!(
            m.bind_step(Some(c0), c2, rec(Channel::A1, 1)),
            Err(MemoryError::SuccessorTaken(c0))
        );
        assert_eq!(
            m.bind_step(Some(CellId(3)), c2, rec(Channel::A1, 1)),
            Err(MemoryError::Unbound(CellId(3)))
        );
        assert_eq!(m.refresh(CellId(3)), Err(MemoryError::Unbound(CellId(3))));
    }

    #[test]
    fn constructor_rejects_bad_parameters() {
        assert_eq!(MemoryStore::new(0, 0.9).unwrap_err(), MemoryError::NoCells);
        assert!(MemoryStore::new(4, 1.0).is_err());
        assert!(MemoryStore::new(4, 0.0).is_err());
    }

    #[test]
    fn decay_arithmetic() {
        let mut m = MemoryStore::new(2, 0.9).unwrap();
        m.allocate_state();
        m.decay_tick();
        assert_eq!(m.activity(CellId(0)), 0.9);
        assert_eq!(m.activity(CellId(1)), 0.0);
        for _ in 1..25 {
            m.decay_tick();
        }
        assert!((m.activity(CellId(0)) - 0.9f64.powi(25)).abs() < 1e-12);
    }

    #[test]
    fn refresh_restores_full_activity() {
        let mut m = MemoryStore::new(4, 0.9).unwrap();
        let c = m.allocate_state();
        m.bind_step(None, c, rec(Channel::Cue, 0)).unwrap();
        m.activity[c.0] = 0.3;
        m.refresh(c).unwrap();
        assert_eq!(m.activity(c), 1.0);
        for _ in 0..3 {
            assert_ne!(m.allocate_state(), c);
        }
    }

    #[test]
    fn seed_states_only_initial_cells() {
        let mut m = MemoryStore::new(16, 0.9).unwrap();
        assert!(m.seed_states(tok(Channel::Cue, 0)).is_empty());
        let a = store_chain(&mut m, &episode(0, Channel::A1, 0, 0, 0));
        let _b = store_chain(&mut m, &episode(1, Channel::A1, 0, 0, 0));
        let c = store_chain(&mut m, &episode(0, Channel::A2, 1, 0, 1));
        assert_eq!(m.seed_states(tok(Channel::Cue, 0)), vec![a[0], c[0]]);

        // a mid-sequence cell carrying a cue token is not a seed
        let d0 = m.allocate_state();
        m.bind_step(None, d0, rec(Channel::A1, 1)).unwrap();
        let d1 = m.allocate_state();
        m.bind_step(Some(d0), d1, rec(Channel::Cue, 1)).unwrap();
        assert!(!m.seed_states(tok(Channel::Cue, 1)).contains(&d1));
    }

    #[test]
    fn reverse_replay_walks_chain_backward() {
        let mut m = MemoryStore::new(8, 0.9).unwrap();
        let c = store_chain(&mut m, &episode(0, Channel::A1, 0, 1, 1));
        let visited = m.reverse_replay_assign(c[3], 1.0).unwrap();
        assert_eq!(visited, vec![c[3], c[2], c[1], c[0]]);
        assert!(c.iter().all(|&k| m.value(k) == 1.0));
        m.reverse_replay_assign(c[3], -1.0).unwrap();
        assert!(c.iter().all(|&k| m.value(k) == 0.0));
        m.reverse_replay_assign(c[3], 1.0).unwrap();
        m.reverse_replay_assign(c[3], 1.0).unwrap();
        // oracle: 4 cells x (+1 + 1)
        let expected: f64 = c.iter().map(|_| 1.0 + 1.0).sum();
        assert_eq!(m.chain_value(c[1]).unwrap(), expected);
        assert_eq!(expected, 8.0);
    }

    #[test]
    fn reverse_replay_detects_cycles() {
        let mut m = MemoryStore::new(4, 0.9).unwrap();
        let c = store_chain(&mut m, &[rec(Channel::Cue, 0), rec(Channel::A1, 0)]);
        // corrupt the relation by hand
        m.prev[c[0].0] = Some(c[1]);
        m.next[c[1].0] = Some(c[0]);
        assert!(matches!(
            m.reverse_replay_assign(c[1], 1.0),
            Err(MemoryError::Cycle(_))
        ));
    }

    #[test]
    fn matched_sequence_survives_turnover() {
        // N=12 holds three 4-step sequences. Keep one alive by refreshing it
        // every episode while storing 30 others.
        let mut m = MemoryStore::new(12, 0.9).unwrap();
        let kept = store_chain(&mut m, &episode(0, Channel::A1, 0, 0, 0));
        for _ in 0..4 {
            m.decay_tick();
        }
        let dropped = store_chain(&mut m, &episode(1, Channel::A2, 1, 1, 0));
        for _ in 0..4 {
            m.decay_tick();
        }
        for i in 0..30u8 {
            for &c in &kept {
                m.refresh(c).unwrap();
            }
            let e = episode(1, Channel::A1, i % 2, (i / 2) % 2, 1);
            store_chain(&mut m, &e);
            for _ in 0..4 {
                m.decay_tick();
            }
        }
        let recalled: Vec<_> = m
            .walk(kept[0], Direction::Forward)
            .unwrap()
            .iter()
            .map(|&c| m.record(c).unwrap())
            .collect();
        assert_eq!(recalled, episode(0, Channel::A1, 0, 0, 0).to_vec());
        let survivor = dropped
            .iter()
            .zip(episode(1, Channel::A2, 1, 1, 0))
            .all(|(&c, r)| m.record(c) == Some(r));
        assert!(!survivor);
        m.check_invariants().unwrap();
    }

    #[test]
    fn dump_lists_chains() {
        let mut m = MemoryStore::new(8, 0.9).unwrap();
        store_chain(&mut m, &episode(0, Channel::A1, 0, 1, 1));
        let d = m.dump();
        assert_eq!(d.lines().count(), 2);
        assert!(d.contains("c0[(CUE,0)/Attend(CUE)"));
    }
}
