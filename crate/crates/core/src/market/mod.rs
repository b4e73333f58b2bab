//! Ground-truth matching theory.
//!
//! A [`Market`] holds `n` proposers and `m` acceptors with injective utility
//! tables; a [`Matching`] pairs some of them up. Everything in this module is
//! a pure function of its inputs and serves as the oracle the learning
//! dynamics are checked against.

mod dynamics;
mod enumerate;
mod io;
mod utility;

use std::fmt;

use rand::rngs::SmallRng;
use rand::{seq::index, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dynamics::{
    best_response_dynamics, blocking_path_to_stability, deferred_acceptance, near_stable,
    resolve_blocking_pair,
};
pub use enumerate::{enumerate_matchings, enumerate_stable, matching_count, ENUMERATION_CAP};
pub use io::{MarketFile, MatchingIndices};
pub use utility::Utility;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MarketError {
    #[error("{agent} assigns utility {value} to two different partners")]
    DuplicateUtility { agent: AgentId, value: Utility },
    #[error("{agent} has utility {value} outside [0, 1)")]
    OutOfRange { agent: AgentId, value: Utility },
    #[error("{agent} has nonzero utility {value} for staying unmatched")]
    NonzeroUnmatched { agent: AgentId, value: Utility },
    #[error("utility tables do not match the declared shape: {0}")]
    Shape(String),
    #[error("matching is {got_n}x{got_m} but the market is {n}x{m}")]
    DimensionMismatch {
        n: usize,
        m: usize,
        got_n: usize,
        got_m: usize,
    },
    #[error("{n}x{m} exceeds the brute-force cap of {cap}x{cap}")]
    TooLarge { n: usize, m: usize, cap: usize },
    #[error("({}, {}) is not a blocking pair", AgentId::proposer(.0.proposer), AgentId::acceptor(.0.acceptor))]
    NotBlocking(BlockingPair),
    #[error("{0} is unmatched")]
    Unmatched(AgentId),
    #[error("matching is not stable")]
    NotStable,
    #[error("invalid matching: {0}")]
    InvalidMatching(String),
    #[error("{0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Proposer,
    Acceptor,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Proposer => Side::Acceptor,
            Side::Acceptor => Side::Proposer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId {
    pub side: Side,
    pub index: usize,
}

impl AgentId {
    pub const fn proposer(index: usize) -> Self {
        AgentId {
            side: Side::Proposer,
            index,
        }
    }

    pub const fn acceptor(index: usize) -> Self {
        AgentId {
            side: Side::Acceptor,
            index,
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.side {
            Side::Proposer => write!(f, "P{}", self.index + 1),
            Side::Acceptor => write!(f, "A{}", self.index + 1),
        }
    }
}

/// Unvalidated utility tables. Row `i` of `proposer` lists proposer `i`'s
/// utility for each acceptor; `acceptor` is the transposed counterpart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawUtilities {
    pub proposer: Vec<Vec<Utility>>,
    pub acceptor: Vec<Vec<Utility>>,
    /// Utility of staying unmatched per proposer; empty means all zero.
    pub proposer_unmatched: Vec<Utility>,
    /// Utility of staying unmatched per acceptor; empty means all zero.
    pub acceptor_unmatched: Vec<Utility>,
}

/// A validated market `(P, A, U)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Market {
    n: usize,
    m: usize,
    proposer_utils: Vec<Utility>,
    acceptor_utils: Vec<Utility>,
}

/// Checks shape, range and injectivity and produces a [`Market`].
pub fn validate_market(raw: &RawUtilities) -> Result<Market, MarketError> {
    let n = raw.proposer.len();
    let m = raw.acceptor.len();
    if n == 0 || m == 0 {
        return Err(MarketError::Shape("both sides need at least one agent".into()));
    }
    for (i, row) in raw.proposer.iter().enumerate() {
        if row.len() != m {
            return Err(MarketError::Shape(format!(
                "proposer row {i} has {} entries, expected {m}",
                row.len()
            )));
        }
    }
    for (j, row) in raw.acceptor.iter().enumerate() {
        if row.len() != n {
            return Err(MarketError::Shape(format!(
                "acceptor row {j} has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    check_unmatched(&raw.proposer_unmatched, n, AgentId::proposer)?;
    check_unmatched(&raw.acceptor_unmatched, m, AgentId::acceptor)?;
    for (i, row) in raw.proposer.iter().enumerate() {
        check_row(AgentId::proposer(i), row)?;
    }
    for (j, row) in raw.acceptor.iter().enumerate() {
        check_row(AgentId::acceptor(j), row)?;
    }
    Ok(Market {
        n,
        m,
        proposer_utils: raw.proposer.iter().flatten().copied().collect(),
        acceptor_utils: raw.acceptor.iter().flatten().copied().collect(),
    })
}

fn check_unmatched(
    values: &[Utility],
    count: usize,
    id: fn(usize) -> AgentId,
) -> Result<(), MarketError> {
    if values.is_empty() {
        return Ok(());
    }
    if values.len() != count {
        return Err(MarketError::Shape(format!(
            "{} unmatched utilities for {count} agents",
            values.len()
        )));
    }
    match values.iter().position(|u| !u.is_zero()) {
        Some(k) => Err(MarketError::NonzeroUnmatched {
            agent: id(k),
            value: values[k],
        }),
        None => Ok(()),
    }
}

fn check_row(agent: AgentId, row: &[Utility]) -> Result<(), MarketError> {
    let one = Utility::new(1, 1);
    for &value in row {
        if value < Utility::ZERO || value >= one {
            return Err(MarketError::OutOfRange { agent, value });
        }
        // Zero is reserved for the unmatched outcome.
        if value.is_zero() {
            return Err(MarketError::DuplicateUtility { agent, value });
        }
    }
    let mut sorted = row.to_vec();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(MarketError::DuplicateUtility { agent, value: w[0] });
    }
    Ok(())
}

impl Market {
    pub fn new(proposer: Vec<Vec<Utility>>, acceptor: Vec<Vec<Utility>>) -> Result<Self, MarketError> {
        validate_market(&RawUtilities {
            proposer,
            acceptor,
            proposer_unmatched: Vec::new(),
            acceptor_unmatched: Vec::new(),
        })
    }

    /// Builds a market from strict rankings (best first). The partner ranked
    /// `r` among `k` gets utility `(k - r) / (k + 1)`.
    pub fn from_rankings(
        proposer_ranks: &[Vec<usize>],
        acceptor_ranks: &[Vec<usize>],
    ) -> Result<Self, MarketError> {
        fn tables(ranks: &[Vec<usize>], width: usize) -> Result<Vec<Vec<Utility>>, MarketError> {
            ranks
                .iter()
                .map(|order| {
                    if order.len() != width {
                        return Err(MarketError::Shape(format!(
                            "ranking {order:?} does not list all {width} partners"
                        )));
                    }
                    let mut row = vec![Utility::ZERO; width];
                    for (r, &partner) in order.iter().enumerate() {
                        if partner >= width || !row[partner].is_zero() {
                            return Err(MarketError::Shape(format!(
                                "ranking {order:?} is not a permutation"
                            )));
                        }
                        row[partner] = Utility::new((width - r) as i64, width as i64 + 1);
                    }
                    Ok(row)
                })
                .collect()
        }
        let n = proposer_ranks.len();
        let m = acceptor_ranks.len();
        Market::new(tables(proposer_ranks, m)?, tables(acceptor_ranks, n)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `U_{P_i}(A_j)`, or 0 for `None`.
    pub fn proposer_utility(&self, i: usize, acceptor: Option<usize>) -> Utility {
        acceptor.map_or(Utility::ZERO, |j| self.proposer_utils[i * self.m + j])
    }

    /// `U_{A_j}(P_i)`, or 0 for `None`.
    pub fn acceptor_utility(&self, j: usize, proposer: Option<usize>) -> Utility {
        proposer.map_or(Utility::ZERO, |i| self.acceptor_utils[j * self.n + i])
    }

    pub fn utility(&self, agent: AgentId, partner: Option<usize>) -> Utility {
        match agent.side {
            Side::Proposer => self.proposer_utility(agent.index, partner),
            Side::Acceptor => self.acceptor_utility(agent.index, partner),
        }
    }

    pub fn proposer_row(&self, i: usize) -> &[Utility] {
        &self.proposer_utils[i * self.m..(i + 1) * self.m]
    }

    pub fn acceptor_row(&self, j: usize) -> &[Utility] {
        &self.acceptor_utils[j * self.n..(j + 1) * self.n]
    }

    /// Acceptors ordered from most to least preferred by proposer `i`.
    pub fn proposer_ranking(&self, i: usize) -> Vec<usize> {
        let row = self.proposer_row(i);
        let mut order: Vec<usize> = (0..self.m).collect();
        order.sort_by(|&a, &b| row[b].cmp(&row[a]));
        order
    }

    /// Proposers ordered from most to least preferred by acceptor `j`.
    pub fn acceptor_ranking(&self, j: usize) -> Vec<usize> {
        let row = self.acceptor_row(j);
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| row[b].cmp(&row[a]));
        order
    }

    pub fn raw(&self) -> RawUtilities {
        RawUtilities {
            proposer: (0..self.n).map(|i| self.proposer_row(i).to_vec()).collect(),
            acceptor: (0..self.m).map(|j| self.acceptor_row(j).to_vec()).collect(),
            proposer_unmatched: Vec::new(),
            acceptor_unmatched: Vec::new(),
        }
    }

    fn check_dims(&self, mu: &Matching) -> Result<(), MarketError> {
        if mu.n() != self.n || mu.m() != self.m {
            return Err(MarketError::DimensionMismatch {
                n: self.n,
                m: self.m,
                got_n: mu.n(),
                got_m: mu.m(),
            });
        }
        Ok(())
    }

    /// Whether `(i, j)` blocks `mu`; assumes dimensions already checked.
    pub(crate) fn blocks(&self, mu: &Matching, i: usize, j: usize) -> bool {
        self.proposer_utility(i, Some(j)) > self.proposer_utility(i, mu.proposer_partner(i))
            && self.acceptor_utility(j, Some(i)) > self.acceptor_utility(j, mu.acceptor_partner(j))
    }
}

/// Draws a market whose utilities are distinct multiples of `1/10000` in
/// `(0, 1)` for every agent. Deterministic in `seed`.
pub fn random_market(n: usize, m: usize, seed: u64) -> Market {
    assert!(n >= 1 && m >= 1, "random_market needs n, m >= 1");
    const GRID: usize = 10_000;
    assert!(n < GRID && m < GRID);
    let mut rng = SmallRng::seed_from_u64(seed);
    let mut row = |width: usize| -> Vec<Utility> {
        index::sample(&mut rng, GRID - 1, width)
            .into_iter()
            .map(|k| Utility::new(k as i64 + 1, GRID as i64))
            .collect()
    };
    let proposer = (0..n).map(|_| row(m)).collect();
    let acceptor = (0..m).map(|_| row(n)).collect();
    Market::new(proposer, acceptor).expect("sampled utilities are distinct and in range")
}

/// A partner assignment over `P ∪ A`; unmatched is `None`.
///
/// Both directions are stored and kept symmetric by every constructor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Matching {
    proposer_partner: Vec<Option<usize>>,
    acceptor_partner: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(n: usize, m: usize) -> Self {
        Matching {
            proposer_partner: vec![None; n],
            acceptor_partner: vec![None; m],
        }
    }

    /// Builds a matching from each proposer's partner.
    pub fn from_proposer_partners(partners: &[Option<usize>], m: usize) -> Result<Self, MarketError> {
        let mut mu = Matching::empty(partners.len(), m);
        for (i, &p) in partners.iter().enumerate() {
            if let Some(j) = p {
                if j >= m {
                    return Err(MarketError::InvalidMatching(format!("acceptor index {j} >= {m}")));
                }
                if let Some(other) = mu.acceptor_partner[j] {
                    return Err(MarketError::InvalidMatching(format!(
                        "acceptor {j} assigned to proposers {other} and {i}"
                    )));
                }
                mu.pair(i, j);
            }
        }
        Ok(mu)
    }

    /// Builds a matching from `(proposer, acceptor)` pairs.
    pub fn from_pairs(n: usize, m: usize, pairs: &[(usize, usize)]) -> Result<Self, MarketError> {
        let mut partners = vec![None; n];
        for &(i, j) in pairs {
            if i >= n || partners[i].is_some() {
                return Err(MarketError::InvalidMatching(format!("bad proposer {i} in {pairs:?}")));
            }
            partners[i] = Some(j);
        }
        Matching::from_proposer_partners(&partners, m)
    }

    pub fn n(&self) -> usize {
        self.proposer_partner.len()
    }

    pub fn m(&self) -> usize {
        self.acceptor_partner.len()
    }

    pub fn proposer_partner(&self, i: usize) -> Option<usize> {
        self.proposer_partner[i]
    }

    pub fn acceptor_partner(&self, j: usize) -> Option<usize> {
        self.acceptor_partner[j]
    }

    pub fn partner(&self, agent: AgentId) -> Option<usize> {
        match agent.side {
            Side::Proposer => self.proposer_partner(agent.index),
            Side::Acceptor => self.acceptor_partner(agent.index),
        }
    }

    pub fn proposer_partners(&self) -> &[Option<usize>] {
        &self.proposer_partner
    }

    pub fn acceptor_partners(&self) -> &[Option<usize>] {
        &self.acceptor_partner
    }

    /// Matched pairs in proposer order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.proposer_partner
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|j| (i, j)))
    }

    /// Matches `i` with `j`, leaving their previous partners unmatched.
    pub(crate) fn pair(&mut self, i: usize, j: usize) {
        if let Some(old) = self.proposer_partner[i] {
            self.acceptor_partner[old] = None;
        }
        if let Some(old) = self.acceptor_partner[j] {
            self.proposer_partner[old] = None;
        }
        self.proposer_partner[i] = Some(j);
        self.acceptor_partner[j] = Some(i);
    }

    pub(crate) fn unpair(&mut self, agent: AgentId) {
        let (i, j) = match agent.side {
            Side::Proposer => (Some(agent.index), self.proposer_partner[agent.index]),
            Side::Acceptor => (self.acceptor_partner[agent.index], Some(agent.index)),
        };
        if let Some(i) = i {
            self.proposer_partner[i] = None;
        }
        if let Some(j) = j {
            self.acceptor_partner[j] = None;
        }
    }

    /// Checks the symmetry invariant.
    pub fn is_consistent(&self) -> bool {
        self.proposer_partner.iter().enumerate().all(|(i, p)| match p {
            Some(j) => *j < self.m() && self.acceptor_partner[*j] == Some(i),
            None => true,
        }) && self.acceptor_partner.iter().enumerate().all(|(j, a)| match a {
            Some(i) => *i < self.n() && self.proposer_partner[*i] == Some(j),
            None => true,
        })
    }
}

impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        let mut first = true;
        for (i, j) in self.pairs() {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "(P{}, A{})", i + 1, j + 1)?;
        }
        f.write_str("}")
    }
}

/// A proposer/acceptor pair that would both rather be together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockingPair {
    pub proposer: usize,
    pub acceptor: usize,
}

impl BlockingPair {
    pub fn new(proposer: usize, acceptor: usize) -> Self {
        BlockingPair { proposer, acceptor }
    }
}

/// Every blocking pair of `mu`, ordered by proposer then acceptor.
pub fn blocking_pairs(market: &Market, mu: &Matching) -> Result<Vec<BlockingPair>, MarketError> {
    market.check_dims(mu)?;
    let mut out = Vec::new();
    for i in 0..market.n {
        for j in 0..market.m {
            if market.blocks(mu, i, j) {
                out.push(BlockingPair::new(i, j));
            }
        }
    }
    Ok(out)
}

/// Whether `mu` has no blocking pair.
///
/// Walks each acceptor's list of proposers it would trade up to and asks
/// whether any of them reciprocates; kept separate from [`blocking_pairs`]
/// so the two can check each other.
pub fn is_stable(market: &Market, mu: &Matching) -> Result<bool, MarketError> {
    market.check_dims(mu)?;
    for j in 0..market.m {
        let current = market.acceptor_utility(j, mu.acceptor_partner(j));
        let tempted = market
            .acceptor_row(j)
            .iter()
            .enumerate()
            .filter(|(_, &u)| u > current)
            .map(|(i, _)| i);
        for i in tempted {
            let theirs = market.proposer_utility(i, mu.proposer_partner(i));
            if market.proposer_utility(i, Some(j)) > theirs {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
