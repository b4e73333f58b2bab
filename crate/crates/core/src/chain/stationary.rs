//! Stationary distributions of the exact chain and their projection onto
//! matchings.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::agents::{atl_action_distribution, Action, Mood, ProposerSet};
use crate::engine::Profile;
use crate::market::{deferred_acceptance, is_stable, Market, Matching, Side};

use super::{ChainError, ExactChain};

/// Dense direct solves are used up to this many states; beyond it the
/// solver falls back to power iteration.
pub const DENSE_LIMIT: usize = 6_000;
/// Exact rational solves are attempted when the closed class has at most
/// this many states.
pub const EXACT_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Exact rational Gaussian elimination.
    Exact,
    /// Grassmann–Taksar–Heyman state reduction in double precision.
    Gth,
    PowerIteration,
}

#[derive(Debug, Clone)]
pub struct Stationary {
    pub epsilon: f64,
    pub pi: Vec<f64>,
    /// `max_y |(pi T)_y - pi_y|`.
    pub residual: f64,
    pub method: SolveMethod,
    /// Present when the exact solve was used.
    pub exact: Option<Vec<BigRational>>,
}

/// Strongly connected components of the transition support (Kosaraju),
/// as a component id per state.
fn components(chain: &ExactChain) -> (Vec<usize>, usize) {
    let n = chain.len();
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (x, row) in chain.rows.iter().enumerate() {
        for (y, _) in row {
            reverse[*y].push(x);
        }
    }
    // First pass: finishing order on the forward graph.
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some(&mut (x, ref mut k)) = stack.last_mut() {
            if let Some(&(y, _)) = chain.rows[x].get(*k) {
                *k += 1;
                if !seen[y] {
                    seen[y] = true;
                    stack.push((y, 0));
                }
            } else {
                order.push(x);
                stack.pop();
            }
        }
    }
    // Second pass on the reverse graph in reverse finishing order.
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = count;
        let mut stack = vec![s];
        while let Some(y) = stack.pop() {
            for &x in &reverse[y] {
                if comp[x] == usize::MAX {
                    comp[x] = count;
                    stack.push(x);
                }
            }
        }
        count += 1;
    }
    (comp, count)
}

/// The states of the unique closed communicating class, ascending.
///
/// Chains started from the all-discontent profile may keep a few transient
/// states (the start itself can be unreachable once agents settle), so the
/// stationary distribution lives on the closed class. Several closed
/// classes mean the stationary distribution is not unique.
pub fn recurrent_class(chain: &ExactChain) -> Result<Vec<usize>, ChainError> {
    let (comp, count) = components(chain);
    let mut closed = vec![true; count];
    for (x, row) in chain.rows.iter().enumerate() {
        for (y, _) in row {
            if comp[*y] != comp[x] {
                closed[comp[x]] = false;
            }
        }
    }
    let closed_ids: Vec<usize> = (0..count).filter(|&c| closed[c]).collect();
    if closed_ids.len() != 1 {
        return Err(ChainError::NotErgodic);
    }
    Ok((0..chain.len()).filter(|&x| comp[x] == closed_ids[0]).collect())
}

/// True when every state communicates with every other.
pub fn is_irreducible(chain: &ExactChain) -> bool {
    components(chain).1 == 1
}

/// Transition rows restricted to `class` and renumbered.
fn restrict<T: Clone>(rows: &[Vec<(usize, T)>], class: &[usize], total: usize) -> Vec<Vec<(usize, T)>> {
    let mut local = vec![usize::MAX; total];
    for (k, &x) in class.iter().enumerate() {
        local[x] = k;
    }
    class
        .iter()
        .map(|&x| rows[x].iter().map(|(y, p)| (local[*y], p.clone())).collect())
        .collect()
}

fn expand<T: Clone>(values: Vec<T>, class: &[usize], total: usize, zero: T) -> Vec<T> {
    let mut out = vec![zero; total];
    for (v, &x) in values.into_iter().zip(class) {
        out[x] = v;
    }
    out
}

pub fn residual(rows: &[Vec<(usize, f64)>], pi: &[f64]) -> f64 {
    let mut next = vec![0.0; pi.len()];
    for (x, row) in rows.iter().enumerate() {
        for &(y, p) in row {
            next[y] += pi[x] * p;
        }
    }
    next.iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Stationary distribution at rate `epsilon`, with the fastest method
/// appropriate to the chain's size.
pub fn stationary_distribution(chain: &ExactChain, epsilon: f64) -> Result<Stationary, ChainError> {
    let class = recurrent_class(chain)?;
    let rows = chain.numeric_rows(epsilon);
    let local = restrict(&rows, &class, chain.len());
    let (pi, method) = if class.len() <= DENSE_LIMIT {
        (gth(&local)?, SolveMethod::Gth)
    } else {
        (power_iteration(&local, 1e-14, 5_000_000), SolveMethod::PowerIteration)
    };
    let pi = expand(pi, &class, chain.len(), 0.0);
    let residual = residual(&rows, &pi);
    Ok(Stationary {
        epsilon,
        pi,
        residual,
        method,
        exact: None,
    })
}

/// Exact stationary distribution at a rational rate. Only available when
/// every transition probability has integer exponents and the chain has
/// at most [`EXACT_LIMIT`] states.
pub fn stationary_exact(chain: &ExactChain, epsilon: &BigRational) -> Result<Option<Stationary>, ChainError> {
    let class = recurrent_class(chain)?;
    if class.len() > EXACT_LIMIT {
        return Ok(None);
    }
    let local = restrict(&chain.rows, &class, chain.len());
    let mut dense = vec![vec![BigRational::zero(); class.len()]; class.len()];
    for (x, row) in local.iter().enumerate() {
        for (y, p) in row {
            match p.eval_exact(epsilon) {
                Some(v) => dense[x][*y] = v,
                None => return Ok(None),
            }
        }
    }
    let pi = exact_solve(dense.clone());
    // Exact fixed-point check.
    let n = pi.len();
    for y in 0..n {
        let mut s = BigRational::zero();
        for x in 0..n {
            s += &pi[x] * &dense[x][y];
        }
        assert_eq!(s, pi[y], "exact solve must be a fixed point");
    }
    let pi = expand(pi, &class, chain.len(), BigRational::zero());
    let eps = epsilon.to_f64().unwrap_or(f64::NAN);
    let float: Vec<f64> = pi.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    let rows = chain.numeric_rows(eps);
    Ok(Some(Stationary {
        epsilon: eps,
        residual: residual(&rows, &float),
        pi: float,
        method: SolveMethod::Exact,
        exact: Some(pi),
    }))
}

/// Solves `pi (T - I) = 0`, `sum pi = 1` by Gaussian elimination on the
/// transposed system with the last equation replaced by normalization.
fn exact_solve(t: Vec<Vec<BigRational>>) -> Vec<BigRational> {
    let n = t.len();
    let one = BigRational::from_integer(BigInt::from(1));
    // a[y][x] = T[x][y] - [x == y]; row n-1 becomes all ones.
    let mut a: Vec<Vec<BigRational>> = (0..n)
        .map(|y| {
            (0..n)
                .map(|x| {
                    let mut v = t[x][y].clone();
                    if x == y {
                        v -= &one;
                    }
                    v
                })
                .collect()
        })
        .collect();
    let mut b = vec![BigRational::zero(); n];
    a[n - 1] = vec![one.clone(); n];
    b[n - 1] = one;
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero()).expect("irreducible chain gives a regular system");
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].clone();
        for k in col..n {
            a[col][k] = &a[col][k] / &inv;
        }
        b[col] = &b[col] / &inv;
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for k in col..n {
                    let d = &f * &a[col][k];
                    a[r][k] -= d;
                }
                let d = &f * &b[col];
                b[r] -= d;
            }
        }
    }
    b
}

/// Grassmann–Taksar–Heyman elimination. Subtraction-free, so it keeps full
/// relative accuracy even when probabilities span many orders of
/// magnitude, as they do here for small rates.
pub fn gth(rows: &[Vec<(usize, f64)>]) -> Result<Vec<f64>, ChainError> {
    let n = rows.len();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let mut p = vec![0.0f64; n * n];
    for (x, row) in rows.iter().enumerate() {
        for &(y, v) in row {
            p[x * n + y] += v;
        }
    }
    for k in (1..n).rev() {
        let s: f64 = p[k * n..k * n + k].iter().sum();
        if s <= 0.0 {
            return Err(ChainError::NotErgodic);
        }
        for i in 0..k {
            p[i * n + k] /= s;
        }
        let (head, tail) = p.split_at_mut(k * n);
        let row_k = &tail[..k];
        for i in 0..k {
            let f = head[i * n + k];
            if f != 0.0 {
                let row_i = &mut head[i * n..i * n + k];
                for (a, b) in row_i.iter_mut().zip(row_k) {
                    *a += f * b;
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * p[i * n + k]).sum();
    }
    let total: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|v| v / total).collect())
}

fn power_iteration(rows: &[Vec<(usize, f64)>], tol: f64, max_iter: usize) -> Vec<f64> {
    let n = rows.len();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let mut next = vec![0.0; n];
        for (x, row) in rows.iter().enumerate() {
            for &(y, p) in row {
                next[y] += pi[x] * p;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let delta = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = next;
        if delta < tol {
            break;
        }
    }
    pi
}

/// The matchings realized from `x` in one round without experimentation,
/// with their probabilities. Only acceptors' uniform choices among new
/// proposers can make this random. For a state in which every agent is
/// content at a common baseline, this is the baseline matching.
pub fn quiet_matchings(market: &Market, x: &Profile) -> Vec<(Matching, f64)> {
    let (n, m) = (market.n(), market.m());
    let mut sets = vec![ProposerSet::EMPTY; m];
    for (i, s) in x.proposers.iter().enumerate() {
        let a = match s.mood {
            Mood::Hopeful => s.trial_action,
            _ => s.baseline_action,
        };
        if let Some(j) = a {
            sets[j].insert(i);
        }
    }
    let branches: Vec<Vec<(Action, f64)>> = x
        .acceptors
        .iter()
        .zip(&sets)
        .map(|(s, set)| {
            atl_action_distribution(s, *set)
                .into_iter()
                .map(|(a, p)| (a, p.eval(1.0)))
                .collect()
        })
        .collect();
    let mut out: BTreeMap<Matching, f64> = BTreeMap::new();
    let mut pick = vec![0usize; m];
    loop {
        let mut mu = Matching::empty(n, m);
        let mut p = 1.0;
        for j in 0..m {
            let (a, q) = branches[j][pick[j]];
            p *= q;
            if let Some(i) = a {
                mu.pair(i, j);
            }
        }
        *out.entry(mu).or_default() += p;
        // Advance the mixed-radix counter.
        let mut j = 0;
        while j < m {
            pick[j] += 1;
            if pick[j] < branches[j].len() {
                break;
            }
            pick[j] = 0;
            j += 1;
        }
        if j == m {
            break;
        }
    }
    out.into_iter().collect()
}

#[derive(Debug, Clone)]
pub struct MassReport {
    pub by_matching: BTreeMap<Matching, f64>,
    pub stable_mass: f64,
    pub acceptor_optimal_mass: f64,
}

impl MassReport {
    /// Largest mass on any matching other than `mu`.
    pub fn max_other(&self, mu: &Matching) -> f64 {
        self.by_matching
            .iter()
            .filter(|(k, _)| *k != mu)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    }
}

/// Projects stationary mass onto matchings through [`quiet_matchings`].
pub fn matching_mass(chain: &ExactChain, pi: &[f64], market: &Market) -> Result<MassReport, ChainError> {
    let mut by_matching: BTreeMap<Matching, f64> = BTreeMap::new();
    for (x, &p) in chain.states.iter().zip(pi) {
        if p == 0.0 {
            continue;
        }
        for (mu, q) in quiet_matchings(market, x) {
            *by_matching.entry(mu).or_default() += p * q;
        }
    }
    let optimal = deferred_acceptance(market, Side::Acceptor);
    let mut stable_mass = 0.0;
    for (mu, p) in &by_matching {
        if is_stable(market, mu)? {
            stable_mass += p;
        }
    }
    Ok(MassReport {
        acceptor_optimal_mass: by_matching.get(&optimal).copied().unwrap_or(0.0),
        stable_mass,
        by_matching,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MassRow {
    pub epsilon: f64,
    pub stable_mass: f64,
    pub acceptor_optimal_mass: f64,
    pub residual: f64,
}

/// `epsilon, stable_mass, acceptor_optimal_mass, residual` as CSV.
pub fn write_mass_csv<W: std::io::Write>(rows: &[MassRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
