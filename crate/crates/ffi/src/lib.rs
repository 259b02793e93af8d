//! C ABI over `seqrule`.
//!
//! Every function returns a [`SeqruleStatus`]; results come back through out
//! pointers. Stores and agents are opaque handles owned by the caller and
//! released with the matching `_free`. A failed call leaves a message that
//! [`seqrule_last_error`] returns until the next call on the same thread.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seqrule::agent::{AgentError, AgentParams, AnswerVoters, Outcome, Policy};
use seqrule::env::{enumerate_space, Observation};
use seqrule::harness::{self, ConfigFile, HarnessError, TrialParams};
use seqrule::memory::{AttributeToken, CellId, Channel, Direction, MemoryError, MemoryStore, StepRecord};

/// Marks "no cell" wherever a cell index is passed or returned. Exported to
/// C as `SIZE_MAX`.
pub const SEQRULE_NO_CELL: usize = usize::MAX;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqruleStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A store or agent precondition was broken (unbound cell, taken
    /// successor, cycle, out-of-range index).
    ContractViolation = 3,
    MalformedObservation = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqrulePolicy {
    Learned = 0,
    Cued = 1,
    Dummy = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqruleAnswerVoters {
    Positive = 0,
    NonNegative = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqruleOutcome {
    Negative = -1,
    Zero = 0,
    Positive = 1,
}

/// Channel 0..4 is CUE, A1, A2, ANS; value is 0 or 1.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeqruleToken {
    pub channel: u8,
    pub value: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeqruleAgentParams {
    pub cells: usize,
    pub decay: f64,
    pub delta: f64,
    /// A [`SeqrulePolicy`] value.
    pub policy: u32,
    /// A [`SeqruleAnswerVoters`] value.
    pub answer_voters: u32,
    pub self_reinforce: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeqruleTrialParams {
    pub agent: SeqruleAgentParams,
    pub episodes: usize,
    pub seed: u64,
    pub gap_steps: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeqruleSpaceCounts {
    pub configurations: usize,
    pub attention_branches: usize,
    pub total: usize,
}

pub struct SeqruleStore(MemoryStore);

pub struct SeqruleAgent(seqrule::Agent);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(SeqruleStatus, String);

impl Fail {
    fn null(what: &str) -> Self {
        Fail(SeqruleStatus::NullPointer, format!("{what} is null"))
    }
    fn arg(msg: impl Into<String>) -> Self {
        Fail(SeqruleStatus::InvalidArgument, msg.into())
    }
}

impl From<MemoryError> for Fail {
    fn from(e: MemoryError) -> Self {
        let status = match e {
            MemoryError::NoCells | MemoryError::BadDecay(_) => SeqruleStatus::InvalidArgument,
            _ => SeqruleStatus::ContractViolation,
        };
        Fail(status, e.to_string())
    }
}

impl From<AgentError> for Fail {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Memory(m) => m.into(),
            other => Fail(SeqruleStatus::MalformedObservation, other.to_string()),
        }
    }
}

impl From<HarnessError> for Fail {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Agent(a) => a.into(),
            HarnessError::Io { .. } => Fail(SeqruleStatus::Io, e.to_string()),
            other => Fail(SeqruleStatus::InvalidArgument, other.to_string()),
        }
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SeqruleStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SeqruleStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            SeqruleStatus::Panic
        }
    }
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail::null(what))
}

unsafe fn obj_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail::null(what))
}

fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::null(what));
    }
    unsafe { out.write(v) };
    Ok(())
}

fn token_in(t: SeqruleToken) -> Result<AttributeToken, Fail> {
    Channel::from_index(t.channel as usize)
        .and_then(|c| AttributeToken::new(c, t.value))
        .ok_or_else(|| Fail::arg(format!("bad token (channel {}, value {})", t.channel, t.value)))
}

fn token_out(t: AttributeToken) -> SeqruleToken {
    SeqruleToken {
        channel: t.channel().index() as u8,
        value: t.value(),
    }
}

fn cell_in(c: usize) -> Option<CellId> {
    (c != SEQRULE_NO_CELL).then_some(CellId(c))
}

fn checked_cell(store: &MemoryStore, c: usize) -> Result<CellId, Fail> {
    if c < store.n_cells() {
        Ok(CellId(c))
    } else {
        Err(MemoryError::OutOfRange(CellId(c)).into())
    }
}

fn outcome_out(o: Outcome) -> SeqruleOutcome {
    match o {
        Outcome::Positive => SeqruleOutcome::Positive,
        Outcome::Negative => SeqruleOutcome::Negative,
        Outcome::Zero => SeqruleOutcome::Zero,
    }
}

fn agent_params_in(p: &SeqruleAgentParams) -> Result<AgentParams, Fail> {
    let policy = match p.policy {
        x if x == SeqrulePolicy::Learned as u32 => Policy::Learned,
        x if x == SeqrulePolicy::Cued as u32 => Policy::Cued,
        x if x == SeqrulePolicy::Dummy as u32 => Policy::Dummy,
        x => return Err(Fail::arg(format!("unknown policy {x}"))),
    };
    let answer_voters = match p.answer_voters {
        x if x == SeqruleAnswerVoters::Positive as u32 => AnswerVoters::Positive,
        x if x == SeqruleAnswerVoters::NonNegative as u32 => AnswerVoters::NonNegative,
        x => return Err(Fail::arg(format!("unknown answer voters {x}"))),
    };
    if !(p.decay > 0.0 && p.decay < 1.0) {
        return Err(Fail::arg("decay must lie in (0, 1)"));
    }
    if !(p.delta.is_finite() && p.delta > 0.0) {
        return Err(Fail::arg("delta must be positive"));
    }
    if p.cells == 0 {
        return Err(Fail::arg("cells must be positive"));
    }
    Ok(AgentParams {
        cells: p.cells,
        decay: p.decay,
        delta: p.delta,
        policy,
        answer_voters,
        self_reinforce: p.self_reinforce,
    })
}

/// Message for the last failed call on this thread, or "" after a success.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn seqrule_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

// ---- memory store ----

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn seqrule_store_new(n_cells: usize, decay: f64, out: *mut *mut SeqruleStore) -> SeqruleStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::null("out"));
        }
        let s = MemoryStore::new(n_cells, decay)?;
        put(out, Box::into_raw(Box::new(SeqruleStore(s))), "out")
    })
}

/// # Safety
/// `store` must come from `seqrule_store_new` and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn seqrule_store_free(store: *mut SeqruleStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Recycles the least active cell. Pass the episode's previous cell as
/// `prev` (or `SEQRULE_NO_CELL`) so its own chain is not released.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_store_allocate(store: *mut SeqruleStore, prev: usize, out_cell: *mut usize) -> SeqruleStatus {
    guard(|| {
        let s = &mut obj_mut(store, "store")?.0;
        let prev = match cell_in(prev) {
            Some(_) => Some(checked_cell(s, prev)?),
            None => None,
        };
        if out_cell.is_null() {
            return Err(Fail::null("out_cell"));
        }
        let c = s.allocate_after(prev);
        put(out_cell, c.0, "out_cell")
    })
}

/// Binds an attended token to a freshly allocated `cell`, after `prev`.
///
/// # Safety
/// `store` must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_store_bind(store: *mut SeqruleStore, prev: usize, cell: usize, token: SeqruleToken) -> SeqruleStatus {
    guard(|| {
        let s = &mut obj_mut(store, "store")?.0;
        let tok = token_in(token)?;
        s.bind_step(cell_in(prev), CellId(cell), StepRecord::attended(tok))?;
        Ok(())
    })
}

/// # Safety
/// `store` must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_store_decay_tick(store: *mut SeqruleStore) -> SeqruleStatus {
    guard(|| {
        obj_mut(store, "store")?.0.decay_tick();
        Ok(())
    })
}

/// # Safety
/// `store` must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_store_refresh(store: *mut SeqruleStore, cell: usize) -> SeqruleStatus {
    guard(|| {
        obj_mut(store, "store")?.0.refresh(CellId(cell))?;
        Ok(())
    })
}

/// Writes up to `cap` sequence-initial cells holding `token` into `out`
/// (which may be null when `cap` is 0) and the full count into `out_len`.
///
/// # Safety
/// `out` must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn seqrule_store_seed_states(
    store: *const SeqruleStore,
    token: SeqruleToken,
    out: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> SeqruleStatus {
    guard(|| {
        let s = &obj(store, "store")?.0;
        let tok = token_in(token)?;
        if out.is_null() && cap > 0 {
            return Err(Fail::null("out"));
        }
        let cells = s.seed_states(tok);
        for (i, c) in cells.iter().take(cap).enumerate() {
            out.add(i).write(c.0);
        }
        put(out_len, cells.len(), "out_len")
    })
}

/// Successor (`forward`) or predecessor of `cell`, or `SEQRULE_NO_CELL`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_store_neighbor(store: *const SeqruleStore, cell: usize, forward: bool, out_cell: *mut usize) -> SeqruleStatus {
    guard(|| {
        let s = &obj(store, "store")?.0;
        let c = checked_cell(s, cell)?;
        let dir = if forward { Direction::Forward } else { Direction::Backward };
        let n = s.neighbor(c, dir).map_or(SEQRULE_NO_CELL, |n| n.0);
        put(out_cell, n, "out_cell")
    })
}

/// Adds `delta` to `cell` and every predecessor. `out_visited` (nullable)
/// receives the number of cells touched.
///
/// # Safety
/// `store` must be valid; `out_visited` null or valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_store_reverse_replay_assign(
    store: *mut SeqruleStore,
    cell: usize,
    delta: f64,
    out_visited: *mut usize,
) -> SeqruleStatus {
    guard(|| {
        let s = &mut obj_mut(store, "store")?.0;
        let visited = s.reverse_replay_assign(CellId(cell), delta)?;
        if !out_visited.is_null() {
            out_visited.write(visited.len());
        }
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_store_value(store: *const SeqruleStore, cell: usize, out: *mut f64) -> SeqruleStatus {
    guard(|| {
        let s = &obj(store, "store")?.0;
        let c = checked_cell(s, cell)?;
        put(out, s.value(c), "out")
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_store_activity(store: *const SeqruleStore, cell: usize, out: *mut f64) -> SeqruleStatus {
    guard(|| {
        let s = &obj(store, "store")?.0;
        let c = checked_cell(s, cell)?;
        put(out, s.activity(c), "out")
    })
}

/// `ContractViolation` with a description if the transition relation or
/// token index is inconsistent.
///
/// # Safety
/// `store` must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_store_check(store: *const SeqruleStore) -> SeqruleStatus {
    guard(|| {
        obj(store, "store")?
            .0
            .check_invariants()
            .map_err(|m| Fail(SeqruleStatus::ContractViolation, m))
    })
}

// ---- agent ----

/// Learned policy, decay 0.9, delta 1.0, non-negative answer voters,
/// self-reinforcement on.
#[no_mangle]
pub extern "C" fn seqrule_agent_params_default(cells: usize) -> SeqruleAgentParams {
    SeqruleAgentParams {
        cells,
        decay: 0.9,
        delta: 1.0,
        policy: SeqrulePolicy::Learned as u32,
        answer_voters: SeqruleAnswerVoters::NonNegative as u32,
        self_reinforce: true,
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_agent_new(params: *const SeqruleAgentParams, seed: u64, out: *mut *mut SeqruleAgent) -> SeqruleStatus {
    guard(|| {
        let p = obj(params, "params")?;
        if out.is_null() {
            return Err(Fail::null("out"));
        }
        let a = seqrule::Agent::new(agent_params_in(p)?, ChaCha8Rng::seed_from_u64(seed))?;
        put(out, Box::into_raw(Box::new(SeqruleAgent(a))), "out")
    })
}

/// # Safety
/// `agent` must come from `seqrule_agent_new` and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn seqrule_agent_free(agent: *mut SeqruleAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// # Safety
/// `agent` must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_agent_begin_episode(agent: *mut SeqruleAgent) -> SeqruleStatus {
    guard(|| {
        obj_mut(agent, "agent")?.0.begin_episode();
        Ok(())
    })
}

/// Feeds one 8-bit observation (one byte per bit, each 0 or 1) and writes
/// the attended channel.
///
/// # Safety
/// `bits` must point at 8 bytes; `out_channel` must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_agent_step(agent: *mut SeqruleAgent, bits: *const u8, out_channel: *mut u8) -> SeqruleStatus {
    guard(|| {
        let a = &mut obj_mut(agent, "agent")?.0;
        if bits.is_null() {
            return Err(Fail::null("bits"));
        }
        if out_channel.is_null() {
            return Err(Fail::null("out_channel"));
        }
        let mut raw = [0u8; 8];
        raw.copy_from_slice(std::slice::from_raw_parts(bits, 8));
        if raw.iter().any(|&b| b > 1) {
            return Err(Fail(SeqruleStatus::MalformedObservation, format!("bits must be 0 or 1, got {raw:?}")));
        }
        let action = a.step(&Observation::new(raw))?;
        put(out_channel, action.attend.index() as u8, "out_channel")
    })
}

/// Writes the predicted answer and sets `out_has` to false when the agent
/// abstains.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_agent_predict_answer(agent: *mut SeqruleAgent, out: *mut SeqruleToken, out_has: *mut bool) -> SeqruleStatus {
    guard(|| {
        let a = &mut obj_mut(agent, "agent")?.0;
        if out.is_null() || out_has.is_null() {
            return Err(Fail::null("out"));
        }
        match a.predict_answer() {
            Some(t) => {
                out.write(token_out(t));
                out_has.write(true);
            }
            None => out_has.write(false),
        }
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_agent_finish_episode(agent: *mut SeqruleAgent, actual: SeqruleToken, out: *mut SeqruleOutcome) -> SeqruleStatus {
    guard(|| {
        let a = &mut obj_mut(agent, "agent")?.0;
        let tok = token_in(actual)?;
        if tok.channel() != Channel::Ans {
            return Err(Fail::arg("the actual answer must be on the ANS channel"));
        }
        if out.is_null() {
            return Err(Fail::null("out"));
        }
        let o = a.finish_episode(tok)?;
        put(out, outcome_out(o.result), "out")
    })
}

// ---- harness ----

/// Runs one seeded trial and writes one outcome per episode into `out`,
/// which must hold `cap >= params->episodes` elements.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_run_trial(params: *const SeqruleTrialParams, out: *mut SeqruleOutcome, cap: usize) -> SeqruleStatus {
    guard(|| {
        let p = obj(params, "params")?;
        if out.is_null() {
            return Err(Fail::null("out"));
        }
        if cap < p.episodes {
            return Err(Fail::arg(format!("buffer holds {cap} outcomes, need {}", p.episodes)));
        }
        let a = agent_params_in(&p.agent)?;
        let tp = TrialParams {
            cells: a.cells,
            episodes: p.episodes,
            seed: p.seed,
            decay: a.decay,
            delta: a.delta,
            gap_steps: p.gap_steps,
            policy: a.policy,
            answer_voters: a.answer_voters,
            self_reinforce: a.self_reinforce,
        };
        let outcomes = harness::run_trial(&tp)?;
        for (i, o) in outcomes.iter().enumerate() {
            out.add(i).write(outcome_out(o.result));
        }
        Ok(())
    })
}

/// Loads a TOML run configuration (same keys as the command-line `run`),
/// runs the sweep and writes its output files. A non-null `out_dir`
/// overrides the file's `out`.
///
/// # Safety
/// `config_path` must be a NUL-terminated path; `out_dir` null or one.
#[no_mangle]
pub unsafe extern "C" fn seqrule_run_config(config_path: *const c_char, out_dir: *const c_char) -> SeqruleStatus {
    guard(|| {
        if config_path.is_null() {
            return Err(Fail::null("config_path"));
        }
        let path = CStr::from_ptr(config_path)
            .to_str()
            .map_err(|_| Fail::arg("config_path is not UTF-8"))?;
        let mut file = ConfigFile::load(std::path::Path::new(path))?;
        if !out_dir.is_null() {
            let dir = CStr::from_ptr(out_dir).to_str().map_err(|_| Fail::arg("out_dir is not UTF-8"))?;
            file.out = Some(PathBuf::from(dir));
        }
        let config = file.resolve()?;
        let exp = harness::run_sweep(&config, config.trace)?;
        let rates = harness::block_rates(&exp.log);
        harness::emit(&exp.log, &rates, &config, config.trace.then_some(exp.traces.as_slice()))?;
        Ok(())
    })
}

/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqrule_enumerate(out: *mut SeqruleSpaceCounts) -> SeqruleStatus {
    guard(|| {
        let s = enumerate_space();
        put(
            out,
            SeqruleSpaceCounts {
                configurations: s.configurations,
                attention_branches: s.attention_branches,
                total: s.total,
            },
            "out",
        )
    })
}
