//! Rule discovery with one-shot sequence memory, evaluated on a delayed
//! match-to-sample task.
//!
//! - [`memory`]: cells, transitions, decay and recycling, reverse replay.
//! - [`hypothesis`]: recalled candidates, classification, voting, reinforcement.
//! - [`agent`]: the per-step attention and memory loop.
//! - [`env`]: the task environment.
//! - [`harness`]: seeded sweeps, block rates, CSV/SVG output.

pub mod agent;
pub mod env;
pub mod harness;
pub mod hypothesis;
pub mod memory;

pub use agent::{Agent, AnswerVoters, AgentError, AgentParams, EpisodeOutcome, Outcome, Policy};
pub use env::{EpisodeConfig, Observation};
pub use memory::{ActionToken, AttributeToken, CellId, Channel, MemoryStore, StepRecord};
