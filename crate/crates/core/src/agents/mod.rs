//! The learning policies as explicit finite-state machines.
//!
//! Proposers run trial-and-error learning ([`ptl_act`], [`ptl_update`]).
//! Acceptors run either the plain acceptor rule ([`atl_act`], [`atl_update`])
//! or the exploiting variant whose update ([`atl_star_update`]) only turns
//! hopeful with a utility-dependent probability.
//!
//! Every transition is a pure function of the agent's own state, its own
//! observation and an explicit [`Draws`] source. Each random rule also has a
//! `*_distribution` twin listing every outcome with its probability as an
//! [`EpsPoly`]; the exact chain builder enumerates through those.

mod acceptor;
mod proposer;
mod sets;

use std::fmt;

use num_rational::Rational64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{Side, Utility};
use crate::poly::EpsPoly;

pub use acceptor::{
    atl_act, atl_action_distribution, atl_star_update, atl_star_update_distribution, atl_update,
};
pub use proposer::{ptl_act, ptl_action_distribution, ptl_update};
pub use sets::ProposerSet;

/// `None` is the unmatched action `∅`.
pub type Action = Option<usize>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("experimentation rate {0} must satisfy 0 < eps and eps + eps^2 <= 1")]
    BadEpsilon(f64),
    #[error("invalid exploit parameters: {0}")]
    BadExploit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mood {
    #[serde(rename = "C")]
    Content,
    #[serde(rename = "H")]
    Hopeful,
    #[serde(rename = "W")]
    Watchful,
    #[serde(rename = "D")]
    Discontent,
}

impl Mood {
    pub fn code(self) -> char {
        match self {
            Mood::Content => 'C',
            Mood::Hopeful => 'H',
            Mood::Watchful => 'W',
            Mood::Discontent => 'D',
        }
    }
}

impl fmt::Display for Mood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Source of the uniform draws an agent consumes.
pub trait Draws {
    /// Uniform on `[0, 1)`.
    fn unit(&mut self) -> f64;
    /// Uniform on `0..n`, `n >= 1`.
    fn below(&mut self, n: usize) -> usize;
}

/// [`Draws`] backed by any `rand` generator.
#[derive(Debug, Clone)]
pub struct RngDraws<R>(pub R);

impl<R: Rng> Draws for RngDraws<R> {
    fn unit(&mut self) -> f64 {
        self.0.gen::<f64>()
    }

    fn below(&mut self, n: usize) -> usize {
        self.0.gen_range(0..n)
    }
}

/// Proposer state `(m, a̲, u̲, ā, ū)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProposerState {
    pub mood: Mood,
    pub baseline_action: Action,
    pub baseline_utility: Utility,
    pub trial_action: Action,
    pub trial_utility: Utility,
}

impl ProposerState {
    /// Discontent with everything cleared.
    pub const fn initial() -> Self {
        ProposerState {
            mood: Mood::Discontent,
            baseline_action: None,
            baseline_utility: Utility::ZERO,
            trial_action: None,
            trial_utility: Utility::ZERO,
        }
    }

    pub(crate) fn settled(mood: Mood, action: Action, utility: Utility) -> Self {
        ProposerState {
            mood,
            baseline_action: action,
            baseline_utility: utility,
            trial_action: None,
            trial_utility: Utility::ZERO,
        }
    }

    /// Shape invariants that hold in every reachable state.
    pub fn check(&self) -> Result<(), String> {
        let cleared_trial = self.trial_action.is_none() && self.trial_utility.is_zero();
        match self.mood {
            Mood::Discontent if self.baseline_action.is_some() || !self.baseline_utility.is_zero() => {
                Err(format!("discontent proposer keeps a baseline: {self:?}"))
            }
            Mood::Content if self.baseline_action.is_none() || self.baseline_utility.is_zero() => {
                Err(format!("content proposer without a baseline: {self:?}"))
            }
            Mood::Hopeful if self.trial_utility <= self.baseline_utility => {
                Err(format!("hopeful proposer without an improving trial: {self:?}"))
            }
            Mood::Content | Mood::Watchful | Mood::Discontent if !cleared_trial => {
                Err(format!("trial fields set outside the hopeful mood: {self:?}"))
            }
            _ => Ok(()),
        }
    }
}

/// Acceptor state `(m, a̲, u̲, S̲, ā, ū)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AcceptorState {
    pub mood: Mood,
    pub baseline_action: Action,
    pub baseline_utility: Utility,
    pub baseline_proposals: ProposerSet,
    pub trial_action: Action,
    pub trial_utility: Utility,
}

impl AcceptorState {
    /// Discontent with everything cleared.
    pub const fn initial() -> Self {
        AcceptorState {
            mood: Mood::Discontent,
            baseline_action: None,
            baseline_utility: Utility::ZERO,
            baseline_proposals: ProposerSet::EMPTY,
            trial_action: None,
            trial_utility: Utility::ZERO,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        let cleared_trial = self.trial_action.is_none() && self.trial_utility.is_zero();
        match self.mood {
            Mood::Discontent if self.baseline_action.is_some() || !self.baseline_utility.is_zero() => {
                Err(format!("discontent acceptor keeps a baseline: {self:?}"))
            }
            Mood::Hopeful if self.trial_utility <= self.baseline_utility => {
                Err(format!("hopeful acceptor without an improving trial: {self:?}"))
            }
            Mood::Content | Mood::Watchful | Mood::Discontent if !cleared_trial => {
                Err(format!("trial fields set outside the hopeful mood: {self:?}"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentState {
    Proposer(ProposerState),
    Acceptor(AcceptorState),
}

/// The starting state for an agent on `side`: discontent, all fields cleared.
pub fn initial_state(side: Side) -> AgentState {
    match side {
        Side::Proposer => AgentState::Proposer(ProposerState::initial()),
        Side::Acceptor => AgentState::Acceptor(AcceptorState::initial()),
    }
}

/// A strictly decreasing affine exponent map `u -> intercept - slope * u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffineExponent {
    pub intercept: Rational64,
    pub slope: Rational64,
}

impl AffineExponent {
    pub const fn new(intercept: Rational64, slope: Rational64) -> Self {
        AffineExponent { intercept, slope }
    }

    pub fn eval(&self, u: Utility) -> Rational64 {
        self.intercept - self.slope * u.ratio()
    }

    /// Checks strict decrease and that the image of `[0, 1)` lies in
    /// `(lo, hi)`.
    fn check_range(&self, name: &str, lo: Rational64, hi: Rational64) -> Result<(), AgentError> {
        if self.slope <= Rational64::from_integer(0) {
            return Err(AgentError::BadExploit(format!("{name} must be strictly decreasing")));
        }
        // The image of [0, 1) is (intercept - slope, intercept].
        if self.intercept >= hi || self.intercept - self.slope < lo {
            return Err(AgentError::BadExploit(format!(
                "{name} maps [0, 1) to ({}, {}], outside ({lo}, {hi})",
                self.intercept - self.slope,
                self.intercept
            )));
        }
        Ok(())
    }
}

/// Parameters of the exploiting acceptor rule.
///
/// A content acceptor offered a better proposer turns hopeful with
/// probability `eps^G(u)`; a discontent one with `eps^F(u)`. `F` maps into
/// `(1/2, 1)` and `G` into `(0, 1/2)`, both strictly decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExploitParams {
    pub f: AffineExponent,
    pub g: AffineExponent,
    pub epsilon: f64,
}

impl ExploitParams {
    pub fn new(f: AffineExponent, g: AffineExponent, epsilon: f64) -> Result<Self, AgentError> {
        let half = Rational64::new(1, 2);
        f.check_range("F", half, Rational64::from_integer(1))?;
        g.check_range("G", Rational64::from_integer(0), half)?;
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(AgentError::BadExploit(format!("epsilon {epsilon} outside (0, 1]")));
        }
        Ok(ExploitParams { f, g, epsilon })
    }

    /// `F(u) = 0.75 - 0.2 u`.
    pub const DEFAULT_F: AffineExponent = AffineExponent::new(Rational64::new_raw(3, 4), Rational64::new_raw(1, 5));
    /// `G(u) = 0.45 - 0.2 u`.
    pub const DEFAULT_G: AffineExponent =
        AffineExponent::new(Rational64::new_raw(9, 20), Rational64::new_raw(1, 5));

    pub fn with_defaults(epsilon: f64) -> Result<Self, AgentError> {
        ExploitParams::new(Self::DEFAULT_F, Self::DEFAULT_G, epsilon)
    }

    /// `eps^G(u)` as a polynomial term.
    pub fn content_acceptance(&self, u: Utility) -> EpsPoly {
        EpsPoly::power(self.g.eval(u))
    }

    /// `eps^F(u)` as a polynomial term.
    pub fn discontent_acceptance(&self, u: Utility) -> EpsPoly {
        EpsPoly::power(self.f.eval(u))
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<(), AgentError> {
    if epsilon > 0.0 && epsilon + epsilon * epsilon <= 1.0 {
        Ok(())
    } else {
        Err(AgentError::BadEpsilon(epsilon))
    }
}

/// Serializable view used in trajectory dumps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRecord {
    pub mood: Mood,
    pub baseline_action: i64,
    pub baseline_utility: Utility,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_proposals: Option<Vec<usize>>,
    pub trial_action: i64,
    pub trial_utility: Utility,
}

fn action_index(a: Action) -> i64 {
    a.map_or(-1, |k| k as i64)
}

impl From<&ProposerState> for StateRecord {
    fn from(s: &ProposerState) -> Self {
        StateRecord {
            mood: s.mood,
            baseline_action: action_index(s.baseline_action),
            baseline_utility: s.baseline_utility,
            baseline_proposals: None,
            trial_action: action_index(s.trial_action),
            trial_utility: s.trial_utility,
        }
    }
}

impl From<&AcceptorState> for StateRecord {
    fn from(s: &AcceptorState) -> Self {
        StateRecord {
            mood: s.mood,
            baseline_action: action_index(s.baseline_action),
            baseline_utility: s.baseline_utility,
            baseline_proposals: Some(s.baseline_proposals.iter().collect()),
            trial_action: action_index(s.trial_action),
            trial_utility: s.trial_utility,
        }
    }
}

impl Serialize for ProposerState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        StateRecord::from(self).serialize(serializer)
    }
}

impl Serialize for AcceptorState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        StateRecord::from(self).serialize(serializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_states_are_cleared_discontent() {
        assert_eq!(initial_state(Side::Proposer), initial_state(Side::Proposer));
        let AgentState::Proposer(p) = initial_state(Side::Proposer) else {
            panic!()
        };
        assert_eq!(p.mood, Mood::Discontent);
        assert_eq!((p.baseline_action, p.trial_action), (None, None));
        assert!(p.check().is_ok());
        let AgentState::Acceptor(a) = initial_state(Side::Acceptor) else {
            panic!()
        };
        assert!(a.baseline_proposals.is_empty());
        assert!(a.check().is_ok());
    }

    #[test]
    fn default_exploit_functions_respect_ranges() {
        let params = ExploitParams::with_defaults(0.01).unwrap();
        let lo_f = params.f.eval(Utility::new(9999, 10000));
        let hi_g = params.g.eval(Utility::ZERO);
        assert!(lo_f > Rational64::new(1, 2));
        assert!(hi_g < Rational64::new(1, 2));
        assert!(lo_f > hi_g);
    }

    #[test]
    fn exploit_validation() {
        let flat = AffineExponent::new(Rational64::new(3, 4), Rational64::from_integer(0));
        assert!(ExploitParams::new(flat, ExploitParams::DEFAULT_G, 0.1).is_err());
        // Swapping F and G violates both ranges.
        assert!(ExploitParams::new(ExploitParams::DEFAULT_G, ExploitParams::DEFAULT_F, 0.1).is_err());
        assert!(ExploitParams::with_defaults(0.0).is_err());
        assert!(ExploitParams::with_defaults(1.0).is_ok());
    }

    #[test]
    fn epsilon_guard() {
        assert!(check_epsilon(0.01).is_ok());
        assert!(check_epsilon(0.618).is_ok());
        assert!(check_epsilon(0.7).is_err());
        assert!(check_epsilon(0.0).is_err());
        assert!(check_epsilon(f64::NAN).is_err());
    }

    #[test]
    fn state_json_uses_codes_and_indices() {
        let mut s = AcceptorState::initial();
        s.baseline_proposals = ProposerSet::from_iter([2, 0]);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(
            json,
            r#"{"mood":"D","baseline_action":-1,"baseline_utility":"0","baseline_proposals":[0,2],"trial_action":-1,"trial_utility":"0"}"#
        );
    }
}
