//! The repeated three-phase game.
//!
//! Each round: proposers choose a proposal from their own state; each
//! acceptor sees only the set of proposals it received and picks one (or
//! none); reciprocated pairs match, utilities are paid and every agent
//! updates its own state from its own action and payoff.

mod random;
mod trajectory;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    atl_act, atl_star_update, atl_update, check_epsilon, ptl_act, ptl_update, AcceptorState, Action, AgentError,
    ExploitParams, ProposerSet, ProposerState,
};
use crate::market::{AgentId, Market, MarketError, Matching, Utility};

pub use random::{replication_seed, RandomSource, Scripted, ScriptedDraws, Seeded, Site, QUIET_UNIT};
pub use trajectory::{
    acceptor_optimal_mass, empirical_distribution, market_fingerprint, stable_mass, SummaryRow, Trajectory,
    TrajectoryHeader,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("invalid policy combination: {0}")]
    Combo(String),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("burn-in fraction {0} must lie in [0, 1)")]
    BadBurnIn(f64),
    #[error("no steps remain after burn-in")]
    EmptyWindow,
    #[error("state profile has {got_n} proposers and {got_m} acceptors, market is {n}x{m}")]
    ProfileShape { n: usize, m: usize, got_n: usize, got_m: usize },
    #[error("market has {0} proposers; proposal sets hold at most 64")]
    TooManyProposers(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum ProposerPolicy {
    #[default]
    #[serde(rename = "PTL")]
    Ptl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AcceptorPolicy {
    #[serde(rename = "ATL")]
    Atl,
    #[serde(rename = "ATLstar")]
    AtlStar,
}

/// Which learning rules the two sides follow, and at what rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyCombo {
    #[serde(default)]
    pub proposer_policy: ProposerPolicy,
    pub acceptor_policy: AcceptorPolicy,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exploit: Option<ExploitParams>,
}

impl PolicyCombo {
    pub fn atl(epsilon: f64) -> Result<Self, EngineError> {
        let combo = PolicyCombo {
            proposer_policy: ProposerPolicy::Ptl,
            acceptor_policy: AcceptorPolicy::Atl,
            epsilon,
            exploit: None,
        };
        combo.validate()?;
        Ok(combo)
    }

    /// Exploiting acceptors; the combo's rate is the one in `params`.
    pub fn atl_star(params: ExploitParams) -> Result<Self, EngineError> {
        let combo = PolicyCombo {
            proposer_policy: ProposerPolicy::Ptl,
            acceptor_policy: AcceptorPolicy::AtlStar,
            epsilon: params.epsilon,
            exploit: Some(params),
        };
        combo.validate()?;
        Ok(combo)
    }

    /// Exploiting acceptors with the default exponent maps.
    pub fn atl_star_default(epsilon: f64) -> Result<Self, EngineError> {
        Self::atl_star(ExploitParams::with_defaults(epsilon)?)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        check_epsilon(self.epsilon)?;
        match (self.acceptor_policy, &self.exploit) {
            (AcceptorPolicy::Atl, None) => Ok(()),
            (AcceptorPolicy::Atl, Some(_)) => Err(EngineError::Combo("exploit parameters given without ATLstar".into())),
            (AcceptorPolicy::AtlStar, None) => Err(EngineError::Combo("ATLstar requires exploit parameters".into())),
            (AcceptorPolicy::AtlStar, Some(p)) => {
                // Re-run the parameter checks: deserialized values bypass the constructor.
                ExploitParams::new(p.f, p.g, p.epsilon)?;
                if p.epsilon != self.epsilon {
                    return Err(EngineError::Combo(format!(
                        "exploit epsilon {} differs from combo epsilon {}",
                        p.epsilon, self.epsilon
                    )));
                }
                Ok(())
            }
        }
    }
}

/// The joint state of every agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Profile {
    pub proposers: Vec<ProposerState>,
    pub acceptors: Vec<AcceptorState>,
}

impl Profile {
    pub fn initial(n: usize, m: usize) -> Self {
        Profile {
            proposers: vec![ProposerState::initial(); n],
            acceptors: vec![AcceptorState::initial(); m],
        }
    }

    fn check_shape(&self, market: &Market) -> Result<(), EngineError> {
        if self.proposers.len() != market.n() || self.acceptors.len() != market.m() {
            return Err(EngineError::ProfileShape {
                n: market.n(),
                m: market.m(),
                got_n: self.proposers.len(),
                got_m: self.acceptors.len(),
            });
        }
        if market.n() > ProposerSet::CAPACITY {
            return Err(EngineError::TooManyProposers(market.n()));
        }
        Ok(())
    }
}

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub t: u64,
    pub proposer_actions: Vec<Action>,
    pub proposal_sets: Vec<ProposerSet>,
    pub acceptor_actions: Vec<Action>,
    pub matching: Matching,
    pub proposer_utilities: Vec<Utility>,
    pub acceptor_utilities: Vec<Utility>,
    pub states_after: Profile,
}

/// Intermediate buffers of a round, reused across rounds by [`run`].
#[derive(Debug, Clone, Default)]
struct Round {
    proposer_actions: Vec<Action>,
    proposal_sets: Vec<ProposerSet>,
    acceptor_actions: Vec<Action>,
}

fn play_round(
    market: &Market,
    states: &mut Profile,
    combo: &PolicyCombo,
    t: u64,
    rng: &mut dyn RandomSource,
    round: &mut Round,
) -> Result<(), EngineError> {
    let (n, m) = (market.n(), market.m());
    round.proposer_actions.clear();
    round.proposal_sets.clear();
    round.proposal_sets.resize(m, ProposerSet::EMPTY);
    round.acceptor_actions.clear();

    // Phase 1.
    for (i, s) in states.proposers.iter().enumerate() {
        let a = ptl_act(s, combo.epsilon, m, rng.stream(AgentId::proposer(i), t, Site::Act))?;
        if let Some(j) = a {
            round.proposal_sets[j].insert(i);
        }
        round.proposer_actions.push(a);
    }
    // Phase 2: each acceptor sees only its own proposal set.
    for (j, s) in states.acceptors.iter().enumerate() {
        let a = atl_act(s, round.proposal_sets[j], rng.stream(AgentId::acceptor(j), t, Site::Act));
        round.acceptor_actions.push(a);
    }
    // Phase 3. An acceptor only ever picks among its proposers, so its
    // choice is reciprocated by construction.
    for i in 0..n {
        let a = round.proposer_actions[i];
        let partner = a.filter(|&j| round.acceptor_actions[j] == Some(i));
        let u = market.proposer_utility(i, partner);
        states.proposers[i] = ptl_update(&states.proposers[i], a, u);
    }
    for j in 0..m {
        let a = round.acceptor_actions[j];
        let u = market.acceptor_utility(j, a);
        let s = &states.acceptors[j];
        let proposals = round.proposal_sets[j];
        states.acceptors[j] = match (combo.acceptor_policy, &combo.exploit) {
            (AcceptorPolicy::AtlStar, Some(params)) => atl_star_update(
                s,
                a,
                u,
                proposals,
                params,
                rng.stream(AgentId::acceptor(j), t, Site::Update),
            ),
            _ => atl_update(s, a, u, proposals),
        };
    }
    Ok(())
}

fn realized_matching(n: usize, acceptor_actions: &[Action]) -> Matching {
    let mut mu = Matching::empty(n, acceptor_actions.len());
    for (j, a) in acceptor_actions.iter().enumerate() {
        if let Some(i) = *a {
            mu.pair(i, j);
        }
    }
    mu
}

/// Plays round `t` and returns its record; `states` is advanced in place.
pub fn step(
    market: &Market,
    states: &mut Profile,
    combo: &PolicyCombo,
    t: u64,
    rng: &mut dyn RandomSource,
) -> Result<StepRecord, EngineError> {
    combo.validate()?;
    states.check_shape(market)?;
    let mut round = Round::default();
    play_round(market, states, combo, t, rng, &mut round)?;
    Ok(record_round(market, states, t, round))
}

fn record_round(market: &Market, states: &Profile, t: u64, round: Round) -> StepRecord {
    let matching = realized_matching(market.n(), &round.acceptor_actions);
    StepRecord {
        t,
        proposer_utilities: (0..market.n())
            .map(|i| market.proposer_utility(i, matching.proposer_partner(i)))
            .collect(),
        acceptor_utilities: (0..market.m())
            .map(|j| market.acceptor_utility(j, matching.acceptor_partner(j)))
            .collect(),
        proposer_actions: round.proposer_actions,
        proposal_sets: round.proposal_sets,
        acceptor_actions: round.acceptor_actions,
        matching,
        states_after: states.clone(),
    }
}

/// How much of a run is stored as full step records. Matching counts are
/// kept for every step regardless.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RecordPolicy {
    Full,
    /// Every `k`-th step, starting with the first.
    Thin(u64),
    #[default]
    SummaryOnly,
}

impl RecordPolicy {
    fn keeps(self, t: u64) -> bool {
        match self {
            RecordPolicy::Full => true,
            RecordPolicy::Thin(k) => k > 0 && (t - 1).is_multiple_of(k),
            RecordPolicy::SummaryOnly => false,
        }
    }
}

/// `horizon` rounds from the all-discontent profile with seeded randomness.
pub fn run(
    market: &Market,
    combo: &PolicyCombo,
    horizon: u64,
    seed: u64,
    record: RecordPolicy,
) -> Result<Trajectory, EngineError> {
    let mut rng = Seeded::new(seed);
    let mut traj = run_from(
        market,
        combo,
        Profile::initial(market.n(), market.m()),
        horizon,
        &mut rng,
        record,
    )?;
    traj.header.seed = Some(seed);
    Ok(traj)
}

/// `horizon` rounds from an arbitrary profile with any randomness source.
pub fn run_from(
    market: &Market,
    combo: &PolicyCombo,
    mut states: Profile,
    horizon: u64,
    rng: &mut dyn RandomSource,
    record: RecordPolicy,
) -> Result<Trajectory, EngineError> {
    if horizon == 0 {
        return Err(EngineError::ZeroHorizon);
    }
    combo.validate()?;
    states.check_shape(market)?;
    let mut traj = Trajectory::new(market, *combo, None, horizon);
    let mut round = Round::default();
    let mut current = Matching::empty(market.n(), market.m());
    for t in 1..=horizon {
        play_round(market, &mut states, combo, t, rng, &mut round)?;
        if record.keeps(t) {
            let rec = record_round(market, &states, t, round.clone());
            traj.push(&rec.matching);
            traj.records.push(rec);
        } else {
            refill(&mut current, &round.acceptor_actions);
            traj.push(&current);
        }
    }
    traj.final_states = states;
    Ok(traj)
}

fn refill(mu: &mut Matching, acceptor_actions: &[Action]) {
    for j in 0..acceptor_actions.len() {
        mu.unpair(AgentId::acceptor(j));
    }
    for (j, a) in acceptor_actions.iter().enumerate() {
        if let Some(i) = *a {
            mu.pair(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Mood;
    use crate::market::tests::m2;

    fn u(x: &str) -> Utility {
        x.parse().unwrap()
    }

    #[test]
    fn combo_validation() {
        assert!(PolicyCombo::atl(0.01).is_ok());
        assert!(PolicyCombo::atl(0.9).is_err());
        assert!(PolicyCombo::atl_star_default(0.05).is_ok());
        let mut c = PolicyCombo::atl(0.01).unwrap();
        c.acceptor_policy = AcceptorPolicy::AtlStar;
        assert!(c.validate().is_err());
        let mut d = PolicyCombo::atl_star_default(0.05).unwrap();
        d.epsilon = 0.01;
        assert!(d.validate().is_err());
    }

    #[test]
    fn all_discontent_with_no_proposals_stays_put() {
        let market = m2();
        let combo = PolicyCombo::atl(0.1).unwrap();
        let mut states = Profile::initial(2, 2);
        // Quiet draws: discontent proposers replay their empty baseline.
        let rec = step(&market, &mut states, &combo, 1, &mut Scripted::new()).unwrap();
        assert_eq!(rec.matching, Matching::empty(2, 2));
        assert_eq!(states, Profile::initial(2, 2));
        assert!(rec.proposal_sets.iter().all(|s| s.is_empty()));
    }

    #[test]
    fn hopeful_proposers_reach_watchful_acceptors() {
        let market = m2();
        let combo = PolicyCombo::atl(0.1).unwrap();
        let mut states = Profile::initial(2, 2);
        for i in 0..2 {
            let j = 1 - i;
            states.proposers[i] = ProposerState {
                mood: Mood::Hopeful,
                baseline_action: None,
                baseline_utility: Utility::ZERO,
                trial_action: Some(j),
                trial_utility: market.proposer_utility(i, Some(j)),
            };
            states.acceptors[j] = AcceptorState {
                mood: Mood::Watchful,
                baseline_action: Some(i),
                baseline_utility: market.acceptor_utility(j, Some(i)),
                baseline_proposals: ProposerSet::singleton(i),
                trial_action: None,
                trial_utility: Utility::ZERO,
            };
        }
        let rec = step(&market, &mut states, &combo, 1, &mut Scripted::new()).unwrap();
        assert_eq!(rec.matching, Matching::from_pairs(2, 2, &[(0, 1), (1, 0)]).unwrap());
        assert!(states.proposers.iter().all(|s| s.mood == Mood::Content));
        assert!(states.acceptors.iter().all(|s| s.mood == Mood::Content));
    }

    #[test]
    fn content_acceptor_picks_the_new_proposer() {
        let market = m2();
        let combo = PolicyCombo::atl(0.1).unwrap();
        let mut states = Profile::initial(2, 2);
        states.proposers[0] = ProposerState {
            mood: Mood::Content,
            baseline_action: Some(0),
            baseline_utility: market.proposer_utility(0, Some(0)),
            trial_action: None,
            trial_utility: Utility::ZERO,
        };
        states.acceptors[0] = AcceptorState {
            mood: Mood::Content,
            baseline_action: Some(0),
            baseline_utility: market.acceptor_utility(0, Some(0)),
            baseline_proposals: ProposerSet::singleton(0),
            trial_action: None,
            trial_utility: Utility::ZERO,
        };
        let mut script = Scripted::new();
        script.experiment(1, 1, 0, 0.1);
        let rec = step(&market, &mut states, &combo, 1, &mut script).unwrap();
        assert_eq!(rec.proposal_sets[0], ProposerSet::from_iter([0, 1]));
        assert_eq!(rec.acceptor_actions[0], Some(1));
        assert_eq!(rec.proposer_utilities[0], Utility::ZERO);
        assert_eq!(rec.acceptor_utilities[0], u("2/3"));
    }

    #[test]
    fn runs_are_deterministic_per_seed() {
        let market = m2();
        let combo = PolicyCombo::atl(0.1).unwrap();
        let a = run(&market, &combo, 500, 3, RecordPolicy::Thin(7)).unwrap();
        let b = run(&market, &combo, 500, 3, RecordPolicy::Thin(7)).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.timeline(), b.timeline());
        assert_eq!(a.records.len(), 72);
        assert!(run(&market, &combo, 0, 3, RecordPolicy::Full).is_err());
    }

    #[test]
    fn thin_and_full_runs_agree_on_matchings() {
        let market = m2();
        let combo = PolicyCombo::atl_star_default(0.1).unwrap();
        let full = run(&market, &combo, 300, 9, RecordPolicy::Full).unwrap();
        let summary = run(&market, &combo, 300, 9, RecordPolicy::SummaryOnly).unwrap();
        assert_eq!(full.summary(), summary.summary());
        for (k, rec) in full.records.iter().enumerate() {
            assert_eq!(full.matching_at(k), &rec.matching);
        }
    }
}
