//! Resistance graphs over matchings and the minimum in-tree prediction of
//! the stochastically stable matchings.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_rational::Rational64;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::agents::{AcceptorState, Mood, ProposerSet, ProposerState};
use crate::engine::{run_from, AcceptorPolicy, PolicyCombo, Profile, RecordPolicy, Scripted};
use crate::market::{
    best_response_dynamics, blocking_pairs, enumerate_matchings, is_stable, near_stable, resolve_blocking_pair,
    AgentId, BlockingPair, Market, MarketError, Matching, Side, Utility, ENUMERATION_CAP,
};

use super::arborescence::{min_in_tree, Arc, InTree};
use super::ChainError;

/// Ties between in-tree weights are resolved with this absolute tolerance.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EdgeKind {
    /// A proposer experiments onto an acceptor that prefers it.
    BlockingPair { proposer: usize, acceptor: usize },
    /// A matched proposer withdraws from a stable matching.
    StableExit { proposer: usize },
    /// Two experiments leave a stable matching (optional edges).
    DoubleExperiment,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResistanceEdge {
    pub from: usize,
    pub to: usize,
    pub weight: Rational64,
    #[serde(flatten)]
    pub kind: EdgeKind,
}

#[derive(Debug, Clone)]
pub struct ResistanceGraph {
    pub nodes: Vec<Matching>,
    pub stable: Vec<bool>,
    pub edges: Vec<ResistanceEdge>,
    index: HashMap<Matching, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GraphOptions {
    /// Add weight-2 exits out of stable matchings found by walking the
    /// learning dynamics after two scripted experiments.
    pub double_experiment_exits: bool,
}

impl ResistanceGraph {
    pub fn node(&self, mu: &Matching) -> Option<usize> {
        self.index.get(mu).copied()
    }

    pub fn out_edges(&self, v: usize) -> impl Iterator<Item = &ResistanceEdge> {
        self.edges.iter().filter(move |e| e.from == v)
    }

    fn arcs(&self) -> Vec<Arc> {
        self.edges
            .iter()
            .map(|e| Arc {
                from: e.from,
                to: e.to,
                weight: e.weight.to_f64().unwrap_or(f64::INFINITY),
            })
            .collect()
    }

    /// The minimum in-tree rooted at `root`, if every node can reach it.
    pub fn min_in_tree(&self, root: usize) -> Option<InTree> {
        min_in_tree(self.nodes.len(), &self.arcs(), root)
    }

    /// Graphviz text: stable nodes boxed, weights as edge labels.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph resistance {\n");
        for (k, mu) in self.nodes.iter().enumerate() {
            let shape = if self.stable[k] { "box" } else { "ellipse" };
            let _ = writeln!(s, "  n{k} [label=\"{mu}\", shape={shape}];");
        }
        for e in &self.edges {
            let _ = writeln!(s, "  n{} -> n{} [label=\"{}\"];", e.from, e.to, e.weight);
        }
        s.push_str("}\n");
        s
    }
}

/// Builds the resistance graph with the default options.
pub fn build_resistance_graph(market: &Market, combo: &PolicyCombo) -> Result<ResistanceGraph, ChainError> {
    build_resistance_graph_with(market, combo, GraphOptions::default())
}

pub fn build_resistance_graph_with(
    market: &Market,
    combo: &PolicyCombo,
    options: GraphOptions,
) -> Result<ResistanceGraph, ChainError> {
    combo.validate()?;
    let (n, m) = (market.n(), market.m());
    if n > ENUMERATION_CAP || m > ENUMERATION_CAP {
        return Err(MarketError::TooLarge { n, m, cap: ENUMERATION_CAP }.into());
    }
    let nodes = enumerate_matchings(n, m);
    let index: HashMap<Matching, usize> = nodes.iter().cloned().enumerate().map(|(k, mu)| (mu, k)).collect();
    let one = Rational64::from_integer(1);
    let two = Rational64::from_integer(2);
    let mut stable = Vec::with_capacity(nodes.len());
    let mut edges = Vec::new();
    for (k, mu) in nodes.iter().enumerate() {
        let pairs = blocking_pairs(market, mu)?;
        stable.push(pairs.is_empty());
        for bp in pairs {
            let next = resolve_blocking_pair(market, mu, bp)?;
            let weight = match (combo.acceptor_policy, &combo.exploit) {
                (AcceptorPolicy::AtlStar, Some(params)) => {
                    let u = market.acceptor_utility(bp.acceptor, Some(bp.proposer));
                    let exponent = if mu.acceptor_partner(bp.acceptor).is_some() {
                        params.g.eval(u)
                    } else {
                        params.f.eval(u)
                    };
                    one + exponent
                }
                _ => one,
            };
            edges.push(ResistanceEdge {
                from: k,
                to: index[&next],
                weight,
                kind: EdgeKind::BlockingPair { proposer: bp.proposer, acceptor: bp.acceptor },
            });
        }
        if stable[k] {
            for i in 0..n {
                if mu.proposer_partner(i).is_some() {
                    let next = near_stable(market, mu, AgentId::proposer(i))?;
                    edges.push(ResistanceEdge {
                        from: k,
                        to: index[&next],
                        weight: two,
                        kind: EdgeKind::StableExit { proposer: i },
                    });
                }
            }
            if options.double_experiment_exits {
                let mut seen = std::collections::BTreeSet::new();
                for next in double_experiment_targets(market, combo, mu)? {
                    if next != *mu && seen.insert(next.clone()) {
                        edges.push(ResistanceEdge {
                            from: k,
                            to: index[&next],
                            weight: two,
                            kind: EdgeKind::DoubleExperiment,
                        });
                    }
                }
            }
        }
    }
    Ok(ResistanceGraph { nodes, stable, edges, index })
}

/// The all-settled profile whose quiet play realizes `mu`: matched agents
/// content at their partner, unmatched agents discontent.
pub fn settled_profile(market: &Market, mu: &Matching) -> Profile {
    let (n, m) = (market.n(), market.m());
    let mut profile = Profile::initial(n, m);
    for (i, j) in mu.pairs() {
        profile.proposers[i] = ProposerState {
            mood: Mood::Content,
            baseline_action: Some(j),
            baseline_utility: market.proposer_utility(i, Some(j)),
            trial_action: None,
            trial_utility: Utility::ZERO,
        };
        profile.acceptors[j] = AcceptorState {
            mood: Mood::Content,
            baseline_action: Some(i),
            baseline_utility: market.acceptor_utility(j, Some(i)),
            baseline_proposals: ProposerSet::singleton(i),
            trial_action: None,
            trial_utility: Utility::ZERO,
        };
    }
    profile
}

/// Where the experiment-free dynamics settle after `script` perturbs the
/// settled profile of `mu`. `None` if no fixed point is reached within the
/// step budget.
fn settle_after(market: &Market, combo: &PolicyCombo, mu: &Matching, mut script: Scripted) -> Option<Matching> {
    const BUDGET: u64 = 64;
    let start = settled_profile(market, mu);
    let traj = run_from(market, combo, start, BUDGET, &mut script, RecordPolicy::Full).ok()?;
    // Fixed point: two consecutive post-perturbation records with equal states.
    let recs = &traj.records;
    (3..recs.len())
        .find(|&k| recs[k].states_after == recs[k - 1].states_after)
        .map(|k| recs[k].matching.clone())
}

/// Matchings reached by two simultaneous experiments, or by two successive
/// experiments onto the same acceptor, from the settled profile of `mu`.
/// Acceptors facing several new proposers take the lowest-indexed one.
fn double_experiment_targets(market: &Market, combo: &PolicyCombo, mu: &Matching) -> Result<Vec<Matching>, ChainError> {
    let (n, m) = (market.n(), market.m());
    let eps = combo.epsilon;
    let mut out = Vec::new();
    for i in 0..n {
        for k in 0..n {
            if k == i {
                continue;
            }
            for j in 0..m {
                // Successive experiments onto `j`.
                let mut s = Scripted::new();
                s.experiment(1, i, j, eps).experiment(2, k, j, eps);
                out.extend(settle_after(market, combo, mu, s));
                if k < i {
                    continue;
                }
                for l in 0..m {
                    let mut s = Scripted::new();
                    s.experiment(1, i, j, eps).experiment(1, k, l, eps);
                    out.extend(settle_after(market, combo, mu, s));
                }
            }
        }
    }
    Ok(out)
}

/// The predicted stochastically stable matchings with supporting numbers.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub roots: Vec<Matching>,
    /// Minimum in-tree weight over all roots.
    pub weight: f64,
    /// Exact in-tree weight for every root that survived the lower-bound
    /// prune.
    pub candidates: Vec<(Matching, Option<f64>)>,
}

/// Roots of the minimum-weight in-trees.
///
/// A global minimum is found with one arborescence computation through a
/// virtual sink. Every tree rooted at `r` pays at least the cheapest
/// out-edge of each node other than `r`, which bounds most roots away from
/// the minimum without computing their trees; the remaining candidates get
/// an exact computation each.
pub fn min_in_tree_roots(graph: &ResistanceGraph) -> Result<Prediction, ChainError> {
    let n = graph.nodes.len();
    let arcs = graph.arcs();
    let mut min_out = vec![f64::INFINITY; n];
    for a in &arcs {
        min_out[a.from] = min_out[a.from].min(a.weight);
    }
    let sinks = (0..n).filter(|&v| min_out[v].is_infinite()).count();
    if sinks > 1 {
        return Err(ChainError::Unreachable);
    }
    let finite_sum: f64 = min_out.iter().filter(|w| w.is_finite()).sum();
    let lower = |r: usize| if min_out[r].is_finite() { finite_sum - min_out[r] } else { finite_sum };

    let total: f64 = arcs.iter().map(|a| a.weight).sum();
    let big = total + 1.0;
    let mut with_sink = arcs.clone();
    with_sink.extend((0..n).map(|v| Arc { from: v, to: n, weight: big }));
    let global = min_in_tree(n + 1, &with_sink, n).ok_or(ChainError::Unreachable)?;
    let sink_edges = global.parent_edge.iter().flatten().filter(|&&k| k >= arcs.len()).count();
    if sink_edges != 1 {
        return Err(ChainError::Unreachable);
    }
    let best = global.total_weight - big;

    let mut candidates = Vec::new();
    let mut roots = Vec::new();
    for r in 0..n {
        if lower(r) > best + TIE_TOLERANCE {
            continue;
        }
        let w = min_in_tree(n, &arcs, r).map(|t| t.total_weight);
        if let Some(w) = w {
            if (w - best).abs() <= TIE_TOLERANCE {
                roots.push(graph.nodes[r].clone());
            }
        }
        candidates.push((graph.nodes[r].clone(), w));
    }
    roots.sort();
    Ok(Prediction { roots, weight: best, candidates })
}

/// From every near-stable matching of `mu_star` obtained by unmatching one
/// acceptor, acceptor best-response dynamics returns to `mu_star`.
pub fn acceptor_brd_check(market: &Market, mu_star: &Matching) -> Result<bool, ChainError> {
    if !is_stable(market, mu_star)? {
        return Err(MarketError::NotStable.into());
    }
    for j in 0..market.m() {
        if mu_star.acceptor_partner(j).is_none() {
            continue;
        }
        let start = near_stable(market, mu_star, AgentId::acceptor(j))?;
        let path = best_response_dynamics(market, &start, Side::Acceptor)?;
        if path.last() != Some(mu_star) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Convenience: which proposer-acceptor pair an edge resolves, if any.
pub fn edge_pair(edge: &ResistanceEdge) -> Option<BlockingPair> {
    match edge.kind {
        EdgeKind::BlockingPair { proposer, acceptor } => Some(BlockingPair::new(proposer, acceptor)),
        _ => None,
    }
}
