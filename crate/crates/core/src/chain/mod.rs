mod arborescence;
mod exact;
mod resistance;
mod stationary;

use thiserror::Error;

use crate::engine::EngineError;
use crate::market::MarketError;

pub use arborescence::{min_in_tree, Arc, InTree};
pub use exact::{reachable_chain, reachable_chain_capped, successors, ExactChain, DEFAULT_STATE_CAP};
pub use resistance::{
    acceptor_brd_check, build_resistance_graph, build_resistance_graph_with, edge_pair, min_in_tree_roots,
    settled_profile, EdgeKind, GraphOptions, Prediction, ResistanceEdge, ResistanceGraph, TIE_TOLERANCE,
};
pub use stationary::{
    gth, is_irreducible, matching_mass, recurrent_class, quiet_matchings, residual, stationary_distribution, stationary_exact, write_mass_csv, MassReport, MassRow,
    SolveMethod, Stationary, DENSE_LIMIT, EXACT_LIMIT,
};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("chain is not irreducible")]
    NotErgodic,
    #[error("some node cannot reach any candidate root")]
    Unreachable,
    #[error("reachable state space exceeds the cap of {cap} states")]
    StateCapExceeded { cap: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Market(#[from] MarketError),
}
