//! Two-sided matching markets in which neither side knows its own
//! preferences, and agents learn through repeated proposals.
//!
//! The crate is layered bottom-up:
//!
//! - [`market`]: markets, matchings, blocking pairs and the classical
//!   oracles (deferred acceptance, brute-force enumeration, blocking-pair
//!   paths, best-response dynamics).
//! - [`agents`]: the proposer and acceptor trial-and-error state machines,
//!   including the exploiting acceptor variant.
//! - [`engine`]: the three-phase repeated game, trajectories and empirical
//!   statistics.
//! - [`chain`]: exact perturbed Markov chains on tiny markets, stationary
//!   distributions, resistance graphs and minimum in-tree prediction of the
//!   stochastically stable matchings.

pub mod agents;
pub mod chain;
pub mod engine;
pub mod market;
pub mod poly;

pub use agents::{AcceptorState, ExploitParams, Mood, ProposerState};
pub use engine::{AcceptorPolicy, PolicyCombo, RecordPolicy, Trajectory};
pub use market::{AgentId, BlockingPair, Market, MarketError, Matching, Side, Utility};
