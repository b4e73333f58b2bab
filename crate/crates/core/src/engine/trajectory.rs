use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{EngineError, PolicyCombo, Profile, StepRecord};
use crate::market::{deferred_acceptance, is_stable, Market, MarketFile, Matching, Side, Utility};

/// Hex SHA-256 of the market's compact JSON form.
pub fn market_fingerprint(market: &Market) -> String {
    let json = serde_json::to_vec(&MarketFile::from(market)).expect("market serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryHeader {
    pub market_fingerprint: String,
    pub n: usize,
    pub m: usize,
    pub combo: PolicyCombo,
    pub seed: Option<u64>,
    pub horizon: u64,
}

/// A run: optional full records plus the realized matching of every step.
///
/// Matchings are interned; `timeline()[t - 1]` is the id of the matching
/// realized in round `t`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub header: TrajectoryHeader,
    pub records: Vec<StepRecord>,
    pub final_states: Profile,
    matchings: Vec<Matching>,
    ids: HashMap<Matching, u32>,
    timeline: Vec<u32>,
    counts: Vec<u64>,
}

impl Trajectory {
    pub(super) fn new(market: &Market, combo: PolicyCombo, seed: Option<u64>, horizon: u64) -> Self {
        Trajectory {
            header: TrajectoryHeader {
                market_fingerprint: market_fingerprint(market),
                n: market.n(),
                m: market.m(),
                combo,
                seed,
                horizon,
            },
            records: Vec::new(),
            final_states: Profile::initial(market.n(), market.m()),
            matchings: Vec::new(),
            ids: HashMap::new(),
            timeline: Vec::with_capacity(horizon.min(1 << 26) as usize),
            counts: Vec::new(),
        }
    }

    pub(super) fn push(&mut self, mu: &Matching) {
        let id = match self.timeline.last() {
            Some(&last) if self.matchings[last as usize] == *mu => last,
            _ => match self.ids.get(mu) {
                Some(&id) => id,
                None => {
                    let id = self.matchings.len() as u32;
                    self.matchings.push(mu.clone());
                    self.ids.insert(mu.clone(), id);
                    self.counts.push(0);
                    id
                }
            },
        };
        self.counts[id as usize] += 1;
        self.timeline.push(id);
    }

    pub fn len(&self) -> usize {
        self.timeline.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timeline.is_empty()
    }

    pub fn timeline(&self) -> &[u32] {
        &self.timeline
    }

    /// Distinct matchings in order of first appearance.
    pub fn interned(&self) -> &[Matching] {
        &self.matchings
    }

    /// The matching realized at zero-based step index `k`.
    pub fn matching_at(&self, k: usize) -> &Matching {
        &self.matchings[self.timeline[k] as usize]
    }

    /// Visit counts over the whole run, ordered by matching.
    pub fn summary(&self) -> Vec<(Matching, u64)> {
        let mut rows: Vec<_> = self.matchings.iter().cloned().zip(self.counts.iter().copied()).collect();
        rows.sort();
        rows
    }

    /// One JSON header line, then one line per stored record.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), EngineError> {
        serde_json::to_writer(&mut out, &self.header).map_err(std::io::Error::from)?;
        writeln!(out)?;
        for rec in &self.records {
            serde_json::to_writer(&mut out, &StepJson::from(rec)).map_err(std::io::Error::from)?;
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn summary_rows(&self, market: &Market) -> Result<Vec<SummaryRow>, EngineError> {
        let optimal = deferred_acceptance(market, Side::Acceptor);
        let total = self.len().max(1) as f64;
        self.summary()
            .into_iter()
            .map(|(mu, count)| {
                Ok(SummaryRow {
                    stable: is_stable(market, &mu)?,
                    acceptor_optimal: mu == optimal,
                    matching: mu.to_string(),
                    count,
                    frequency: count as f64 / total,
                })
            })
            .collect()
    }

    pub fn write_summary_csv<W: Write>(&self, market: &Market, out: W) -> Result<(), EngineError> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.summary_rows(market)? {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub matching: String,
    pub count: u64,
    pub frequency: f64,
    pub stable: bool,
    pub acceptor_optimal: bool,
}

#[derive(Serialize)]
struct StepJson<'a> {
    t: u64,
    proposer_actions: Vec<i64>,
    proposal_sets: Vec<Vec<usize>>,
    acceptor_actions: Vec<i64>,
    matching: &'a Matching,
    proposer_utilities: &'a [Utility],
    acceptor_utilities: &'a [Utility],
    states_after: &'a Profile,
}

impl<'a> From<&'a StepRecord> for StepJson<'a> {
    fn from(r: &'a StepRecord) -> Self {
        let idx = |a: &Option<usize>| a.map_or(-1, |k| k as i64);
        StepJson {
            t: r.t,
            proposer_actions: r.proposer_actions.iter().map(idx).collect(),
            proposal_sets: r.proposal_sets.iter().map(|s| s.iter().collect()).collect(),
            acceptor_actions: r.acceptor_actions.iter().map(idx).collect(),
            matching: &r.matching,
            proposer_utilities: &r.proposer_utilities,
            acceptor_utilities: &r.acceptor_utilities,
            states_after: &r.states_after,
        }
    }
}

/// Normalized visit frequencies after discarding the first
/// `burn_in_fraction` of the steps.
pub fn empirical_distribution(
    traj: &Trajectory,
    burn_in_fraction: f64,
) -> Result<BTreeMap<Matching, f64>, EngineError> {
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(EngineError::BadBurnIn(burn_in_fraction));
    }
    let start = (burn_in_fraction * traj.len() as f64).floor() as usize;
    let window = &traj.timeline[start.min(traj.len())..];
    if window.is_empty() {
        return Err(EngineError::EmptyWindow);
    }
    let mut counts = vec![0u64; traj.matchings.len()];
    for &id in window {
        counts[id as usize] += 1;
    }
    let total = window.len() as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(id, c)| (traj.matchings[id].clone(), c as f64 / total))
        .collect())
}

/// Post-burn-in mass on stable matchings.
pub fn stable_mass(traj: &Trajectory, market: &Market, burn_in_fraction: f64) -> Result<f64, EngineError> {
    let dist = empirical_distribution(traj, burn_in_fraction)?;
    let mut mass = 0.0;
    for (mu, p) in dist {
        if is_stable(market, &mu)? {
            mass += p;
        }
    }
    Ok(mass)
}

/// Post-burn-in mass on the acceptor-optimal stable matching.
pub fn acceptor_optimal_mass(traj: &Trajectory, market: &Market, burn_in_fraction: f64) -> Result<f64, EngineError> {
    let optimal = deferred_acceptance(market, Side::Acceptor);
    let dist = empirical_distribution(traj, burn_in_fraction)?;
    Ok(dist.get(&optimal).copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, PolicyCombo, RecordPolicy};
    use crate::market::tests::{m2, one_by_one};

    fn constant(market: &Market, mu: &Matching, steps: usize) -> Trajectory {
        let mut t = Trajectory::new(market, PolicyCombo::atl(0.1).unwrap(), None, steps as u64);
        for _ in 0..steps {
            t.push(mu);
        }
        t
    }

    #[test]
    fn constant_trajectories() {
        let market = m2();
        let diag = Matching::from_pairs(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let unstable = Matching::from_pairs(2, 2, &[(0, 0)]).unwrap();
        let t = constant(&market, &diag, 10);
        let dist = empirical_distribution(&t, 0.5).unwrap();
        assert_eq!(dist.len(), 1);
        assert_eq!(dist[&diag], 1.0);
        assert_eq!(stable_mass(&t, &market, 0.0).unwrap(), 1.0);
        assert_eq!(stable_mass(&constant(&market, &unstable, 4), &market, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn burn_in_window() {
        let market = one_by_one();
        let a = Matching::empty(1, 1);
        let b = Matching::from_pairs(1, 1, &[(0, 0)]).unwrap();
        let mut t = constant(&market, &a, 3);
        t.push(&b);
        let whole = empirical_distribution(&t, 0.0).unwrap();
        assert_eq!(whole[&a], 0.75);
        let tail = empirical_distribution(&t, 0.75).unwrap();
        assert_eq!(tail[&b], 1.0);
        assert!(matches!(empirical_distribution(&t, 1.0), Err(EngineError::BadBurnIn(_))));
        let empty = Trajectory::new(&market, PolicyCombo::atl(0.1).unwrap(), None, 0);
        assert!(matches!(empirical_distribution(&empty, 0.0), Err(EngineError::EmptyWindow)));
    }

    #[test]
    fn summary_counts_sum_to_steps() {
        let market = m2();
        let t = run(&market, &PolicyCombo::atl(0.2).unwrap(), 1000, 1, RecordPolicy::SummaryOnly).unwrap();
        assert_eq!(t.summary().iter().map(|r| r.1).sum::<u64>(), 1000);
        let rows = t.summary_rows(&market).unwrap();
        let freq: f64 = rows.iter().map(|r| r.frequency).sum();
        assert!((freq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jsonl_has_header_and_records() {
        let market = m2();
        let t = run(&market, &PolicyCombo::atl(0.2).unwrap(), 10, 1, RecordPolicy::Thin(5)).unwrap();
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let header: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(header["seed"], 1);
        assert_eq!(header["market_fingerprint"].as_str().unwrap().len(), 64);
        let rec: serde_json::Value = serde_json::from_str(lines[2]).unwrap();
        assert_eq!(rec["t"], 6);
        assert!(rec["states_after"]["acceptors"][0]["baseline_proposals"].is_array());
    }

    #[test]
    fn fingerprint_distinguishes_markets() {
        assert_ne!(market_fingerprint(&m2()), market_fingerprint(&one_by_one()));
        assert_eq!(market_fingerprint(&m2()), market_fingerprint(&m2()));
    }
}
