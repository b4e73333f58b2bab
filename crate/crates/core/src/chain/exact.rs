//! Breadth-first construction of the exact perturbed chain.

use std::collections::HashMap;

use crate::agents::{
    atl_action_distribution, atl_star_update_distribution, atl_update, ptl_action_distribution, ptl_update, Action,
    ProposerSet,
};
use crate::engine::{AcceptorPolicy, PolicyCombo, Profile};
use crate::market::Market;
use crate::poly::EpsPoly;

use super::ChainError;

pub const DEFAULT_STATE_CAP: usize = 200_000;

/// The reachable state space and the symbolic one-step transition law.
///
/// Transition probabilities are polynomials in the experimentation rate,
/// so one construction serves every rate below the golden-ratio bound
/// (where the support of the chain does not change).
#[derive(Debug, Clone)]
pub struct ExactChain {
    pub combo: PolicyCombo,
    pub n: usize,
    pub m: usize,
    pub states: Vec<Profile>,
    /// `rows[x]` lists `(y, P(x -> y))` with `y` ascending.
    pub rows: Vec<Vec<(usize, EpsPoly)>>,
}

impl ExactChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn transition_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Row sums computed exactly; every one should be the constant `1`.
    pub fn rows_sum_to_one(&self) -> bool {
        self.rows.iter().all(|row| {
            let mut total = EpsPoly::zero();
            for (_, p) in row {
                total.add_assign_ref(p);
            }
            total.is_one()
        })
    }

    /// Numerical transition rows at rate `epsilon`.
    pub fn numeric_rows(&self, epsilon: f64) -> Vec<Vec<(usize, f64)>> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(y, p)| (*y, p.eval(epsilon))).collect())
            .collect()
    }

    pub fn index_of(&self, profile: &Profile) -> Option<usize> {
        self.states.iter().position(|s| s == profile)
    }
}

/// All one-step successors of `x` with their probabilities (merged).
pub fn successors(market: &Market, combo: &PolicyCombo, x: &Profile) -> Vec<(Profile, EpsPoly)> {
    let (n, m) = (market.n(), market.m());
    let proposer_branches: Vec<Vec<(Action, EpsPoly)>> =
        x.proposers.iter().map(|s| ptl_action_distribution(s, m)).collect();
    let mut out: HashMap<Profile, EpsPoly> = HashMap::new();

    for_each_product(&proposer_branches, |choice, p_prop| {
        let actions: Vec<Action> = choice.iter().map(|b| b.0).collect();
        let mut sets = vec![ProposerSet::EMPTY; m];
        for (i, a) in actions.iter().enumerate() {
            if let Some(j) = a {
                sets[*j].insert(i);
            }
        }
        let acceptor_branches: Vec<Vec<(Action, EpsPoly)>> = x
            .acceptors
            .iter()
            .zip(&sets)
            .map(|(s, set)| atl_action_distribution(s, *set))
            .collect();
        for_each_product(&acceptor_branches, |acc_choice, p_acc| {
            let acc_actions: Vec<Action> = acc_choice.iter().map(|b| b.0).collect();
            let proposers = (0..n)
                .map(|i| {
                    let a = actions[i];
                    let partner = a.filter(|&j| acc_actions[j] == Some(i));
                    ptl_update(&x.proposers[i], a, market.proposer_utility(i, partner))
                })
                .collect::<Vec<_>>();
            let update_branches: Vec<Vec<_>> = (0..m)
                .map(|j| {
                    let a = acc_actions[j];
                    let u = market.acceptor_utility(j, a);
                    match (combo.acceptor_policy, &combo.exploit) {
                        (AcceptorPolicy::AtlStar, Some(params)) => {
                            atl_star_update_distribution(&x.acceptors[j], a, u, sets[j], params)
                        }
                        _ => vec![(atl_update(&x.acceptors[j], a, u, sets[j]), EpsPoly::one())],
                    }
                })
                .collect();
            let p_joint = p_prop.mul_ref(&p_acc);
            for_each_product(&update_branches, |upd, p_upd| {
                let next = Profile {
                    proposers: proposers.clone(),
                    acceptors: upd.iter().map(|b| b.0).collect(),
                };
                let p = p_joint.mul_ref(&p_upd);
                out.entry(next).or_default().add_assign_ref(&p);
            });
        });
    });
    let mut v: Vec<_> = out.into_iter().filter(|(_, p)| !p.is_zero()).collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v
}

/// Calls `f` with every element of the cartesian product of `lists`
/// and the product of the attached probabilities.
fn for_each_product<T>(lists: &[Vec<(T, EpsPoly)>], mut f: impl FnMut(&[&(T, EpsPoly)], EpsPoly)) {
    fn go<'a, T>(
        lists: &'a [Vec<(T, EpsPoly)>],
        k: usize,
        chosen: &mut Vec<&'a (T, EpsPoly)>,
        p: EpsPoly,
        f: &mut dyn FnMut(&[&'a (T, EpsPoly)], EpsPoly),
    ) {
        if k == lists.len() {
            f(chosen, p);
            return;
        }
        for item in &lists[k] {
            let q = if item.1.is_one() { p.clone() } else { p.mul_ref(&item.1) };
            chosen.push(item);
            go(lists, k + 1, chosen, q, f);
            chosen.pop();
        }
    }
    let mut chosen = Vec::with_capacity(lists.len());
    go(lists, 0, &mut chosen, EpsPoly::one(), &mut f);
}

/// Breadth-first closure from the all-discontent profile.
pub fn reachable_chain(market: &Market, combo: &PolicyCombo) -> Result<ExactChain, ChainError> {
    reachable_chain_capped(market, combo, DEFAULT_STATE_CAP)
}

pub fn reachable_chain_capped(market: &Market, combo: &PolicyCombo, cap: usize) -> Result<ExactChain, ChainError> {
    combo.validate()?;
    if market.n() > ProposerSet::CAPACITY {
        return Err(ChainError::StateCapExceeded { cap });
    }
    let start = Profile::initial(market.n(), market.m());
    let mut index: HashMap<Profile, usize> = HashMap::new();
    let mut states = vec![start.clone()];
    index.insert(start, 0);
    let mut rows = Vec::new();
    let mut k = 0;
    while k < states.len() {
        let succ = successors(market, combo, &states[k]);
        let mut row = Vec::with_capacity(succ.len());
        for (y, p) in succ {
            let id = match index.get(&y) {
                Some(&id) => id,
                None => {
                    if states.len() >= cap {
                        return Err(ChainError::StateCapExceeded { cap });
                    }
                    let id = states.len();
                    index.insert(y.clone(), id);
                    states.push(y);
                    id
                }
            };
            row.push((id, p));
        }
        row.sort_by_key(|e| e.0);
        rows.push(row);
        k += 1;
    }
    Ok(ExactChain {
        combo: *combo,
        n: market.n(),
        m: market.m(),
        states,
        rows,
    })
}

#[derive(serde::Serialize)]
struct ChainJson<'a> {
    n: usize,
    m: usize,
    combo: &'a PolicyCombo,
    epsilon: Option<f64>,
    states: &'a [Profile],
    /// `[from, to, symbolic probability, resistance, numeric probability]`.
    transitions: Vec<(usize, usize, String, f64, Option<f64>)>,
}

impl ExactChain {
    /// State table plus sparse transition triples; numeric probabilities are
    /// included when `epsilon` is given.
    pub fn to_json(&self, epsilon: Option<f64>) -> String {
        use num_traits::ToPrimitive;
        let transitions = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(x, row)| {
                row.iter().map(move |(y, p)| {
                    let r = p.leading_exponent().and_then(|e| e.to_f64()).unwrap_or(f64::INFINITY);
                    (x, *y, p.to_string(), r, epsilon.map(|e| p.eval(e)))
                })
            })
            .collect();
        serde_json::to_string(&ChainJson {
            n: self.n,
            m: self.m,
            combo: &self.combo,
            epsilon,
            states: &self.states,
            transitions,
        })
        .expect("chain serializes")
    }
}
