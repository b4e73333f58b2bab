//! Classical algorithms over a fixed market: deferred acceptance, single
//! blocking-pair resolution, paths to stability and best-response dynamics.

use rand::rngs::SmallRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use super::{is_stable, AgentId, BlockingPair, Market, MarketError, Matching, Side};

/// Gale–Shapley deferred acceptance with `proposing_side` moving first.
///
/// With `Side::Acceptor` this yields the acceptor-optimal stable matching.
pub fn deferred_acceptance(market: &Market, proposing_side: Side) -> Matching {
    let (k_prop, k_recv) = match proposing_side {
        Side::Proposer => (market.n(), market.m()),
        Side::Acceptor => (market.m(), market.n()),
    };
    let recv_id = |y: usize| AgentId {
        side: proposing_side.other(),
        index: y,
    };
    let rankings: Vec<Vec<usize>> = (0..k_prop)
        .map(|x| match proposing_side {
            Side::Proposer => market.proposer_ranking(x),
            Side::Acceptor => market.acceptor_ranking(x),
        })
        .collect();
    let mut next = vec![0usize; k_prop];
    let mut held: Vec<Option<usize>> = vec![None; k_recv];
    let mut free: Vec<usize> = (0..k_prop).rev().collect();
    while let Some(x) = free.pop() {
        let Some(&y) = rankings[x].get(next[x]) else {
            continue;
        };
        next[x] += 1;
        match held[y] {
            None => held[y] = Some(x),
            Some(z) => {
                let recv = recv_id(y);
                if market.utility(recv, Some(x)) > market.utility(recv, Some(z)) {
                    held[y] = Some(x);
                    free.push(z);
                } else {
                    free.push(x);
                }
            }
        }
    }
    let mut mu = Matching::empty(market.n(), market.m());
    for (y, x) in held.iter().enumerate() {
        if let Some(x) = *x {
            match proposing_side {
                Side::Proposer => mu.pair(x, y),
                Side::Acceptor => mu.pair(y, x),
            }
        }
    }
    mu
}

/// Matches the pair in `bp` to each other; their former partners become
/// unmatched.
pub fn resolve_blocking_pair(
    market: &Market,
    mu: &Matching,
    bp: BlockingPair,
) -> Result<Matching, MarketError> {
    market.check_dims(mu)?;
    if bp.proposer >= market.n() || bp.acceptor >= market.m() || !market.blocks(mu, bp.proposer, bp.acceptor) {
        return Err(MarketError::NotBlocking(bp));
    }
    let mut next = mu.clone();
    next.pair(bp.proposer, bp.acceptor);
    Ok(next)
}

/// `mu` with `agent` and its partner both made single.
pub fn near_stable(market: &Market, mu: &Matching, agent: AgentId) -> Result<Matching, MarketError> {
    if !is_stable(market, mu)? {
        return Err(MarketError::NotStable);
    }
    let bound = match agent.side {
        Side::Proposer => market.n(),
        Side::Acceptor => market.m(),
    };
    if agent.index >= bound || mu.partner(agent).is_none() {
        return Err(MarketError::Unmatched(agent));
    }
    let mut next = mu.clone();
    next.unpair(agent);
    Ok(next)
}

fn pair_of(agent: AgentId, partner: usize) -> BlockingPair {
    match agent.side {
        Side::Proposer => BlockingPair::new(agent.index, partner),
        Side::Acceptor => BlockingPair::new(partner, agent.index),
    }
}

/// The partner `agent` likes best among those it blocks with, restricted to
/// candidates accepted by `allowed`.
fn best_blocking_partner(
    market: &Market,
    mu: &Matching,
    agent: AgentId,
    allowed: impl Fn(usize) -> bool,
) -> Option<usize> {
    let width = match agent.side {
        Side::Proposer => market.m(),
        Side::Acceptor => market.n(),
    };
    (0..width)
        .filter(|&y| allowed(y))
        .filter(|&y| {
            let bp = pair_of(agent, y);
            market.blocks(mu, bp.proposer, bp.acceptor)
        })
        .max_by_key(|&y| market.utility(agent, Some(y)))
}

struct Activation {
    proposers: Vec<bool>,
    acceptors: Vec<bool>,
}

impl Activation {
    fn is_active(&self, agent: AgentId) -> bool {
        match agent.side {
            Side::Proposer => self.proposers[agent.index],
            Side::Acceptor => self.acceptors[agent.index],
        }
    }

    fn activate(&mut self, agent: AgentId) {
        match agent.side {
            Side::Proposer => self.proposers[agent.index] = true,
            Side::Acceptor => self.acceptors[agent.index] = true,
        }
    }

    fn side(&self, side: Side) -> &[bool] {
        match side {
            Side::Proposer => &self.proposers,
            Side::Acceptor => &self.acceptors,
        }
    }
}

/// A finite sequence of single blocking-pair resolutions from `mu` to a
/// stable matching, built by incremental agent activation.
///
/// Agents are activated one at a time (or as a matched pair) in an order
/// shuffled by `rng_seed`. The active set is kept closed under the current
/// matching and free of internal blocking pairs. A newly active agent takes
/// its best blocking partner inside the active set; whoever that displaces
/// does the same, and so on. Along such a chain only one side is ever
/// displaced and the other side only trades up, so every chain is finite,
/// and once everybody is active the matching is stable.
pub fn blocking_path_to_stability(
    market: &Market,
    mu: &Matching,
    rng_seed: u64,
) -> Result<Vec<(BlockingPair, Matching)>, MarketError> {
    market.check_dims(mu)?;
    let mut order: Vec<AgentId> = (0..market.n())
        .map(AgentId::proposer)
        .chain((0..market.m()).map(AgentId::acceptor))
        .collect();
    order.shuffle(&mut SmallRng::seed_from_u64(rng_seed));

    let mut active = Activation {
        proposers: vec![false; market.n()],
        acceptors: vec![false; market.m()],
    };
    let mut current = mu.clone();
    let mut path = Vec::new();

    let resolve = |current: &mut Matching, agent: AgentId, partner: usize, path: &mut Vec<(BlockingPair, Matching)>| {
        let bp = pair_of(agent, partner);
        *current = resolve_blocking_pair(market, current, bp).expect("chose a blocking partner");
        path.push((bp, current.clone()));
    };

    let mut queue = order.into_iter().peekable();
    while let Some(&q) = queue.peek() {
        if active.is_active(q) {
            queue.next();
            continue;
        }
        let other = q.side.other();
        let start = match current.partner(q) {
            None => {
                active.activate(q);
                Some(q)
            }
            Some(p) => {
                let p = AgentId {
                    side: other,
                    index: p,
                };
                debug_assert!(!active.is_active(p), "active set must be closed under the matching");
                let best_q = best_blocking_partner(market, &current, q, |y| active.side(other)[y]);
                let best_p = best_q
                    .is_none()
                    .then(|| best_blocking_partner(market, &current, p, |x| active.side(q.side)[x]))
                    .flatten();
                match (best_q, best_p) {
                    (Some(y), _) => {
                        let displaced = current.partner(AgentId { side: other, index: y });
                        resolve(&mut current, q, y, &mut path);
                        active.activate(q);
                        displaced.map(|x| AgentId { side: q.side, index: x })
                    }
                    (None, Some(x)) => {
                        let displaced = current.partner(AgentId { side: q.side, index: x });
                        // `q` is left single and enters on the next pass.
                        resolve(&mut current, p, x, &mut path);
                        active.activate(p);
                        displaced.map(|y| AgentId { side: other, index: y })
                    }
                    (None, None) => {
                        active.activate(q);
                        active.activate(p);
                        None
                    }
                }
            }
        };

        let mut chain = start;
        while let Some(x) = chain {
            let side = x.side.other();
            let Some(y) = best_blocking_partner(market, &current, x, |y| active.side(side)[y]) else {
                break;
            };
            let displaced = current.partner(AgentId { side, index: y });
            resolve(&mut current, x, y, &mut path);
            chain = displaced.map(|z| AgentId {
                side: x.side,
                index: z,
            });
        }
    }
    debug_assert!(is_stable(market, &current).unwrap_or(false));
    Ok(path)
}

/// Two-phase best-response dynamics for `side`.
///
/// Phase 1 lets the lowest-index matched agent of `side` that blocks move
/// to its most preferred blocking partner, until no matched agent of `side`
/// blocks. Phase 2 does the same for unmatched agents. Returns the whole
/// sequence, starting with `mu`.
pub fn best_response_dynamics(
    market: &Market,
    mu: &Matching,
    side: Side,
) -> Result<Vec<Matching>, MarketError> {
    market.check_dims(mu)?;
    let count = match side {
        Side::Proposer => market.n(),
        Side::Acceptor => market.m(),
    };
    let mut seq = vec![mu.clone()];
    let mut current = mu.clone();
    'outer: loop {
        for want_matched in [true, false] {
            for x in 0..count {
                let agent = AgentId { side, index: x };
                if current.partner(agent).is_some() != want_matched {
                    continue;
                }
                if let Some(y) = best_blocking_partner(market, &current, agent, |_| true) {
                    current = resolve_blocking_pair(market, &current, pair_of(agent, y))?;
                    seq.push(current.clone());
                    continue 'outer;
                }
            }
        }
        break;
    }
    Ok(seq)
}
