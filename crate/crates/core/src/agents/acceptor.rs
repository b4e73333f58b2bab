use super::{AcceptorState, Action, Draws, ExploitParams, Mood, ProposerSet};
use crate::market::Utility;
use crate::poly::EpsPoly;

/// Picks which proposal (if any) to accept this round.
///
/// Content branch precedence: a new proposer is tried first, then the
/// baseline partner, then nobody. The guards in the original table overlap
/// when the baseline is present alongside a new proposer; trying the new
/// proposer is the reading under which blocking pairs get resolved.
pub fn atl_act(state: &AcceptorState, proposals: ProposerSet, draws: &mut dyn Draws) -> Action {
    let fresh = proposals.difference(state.baseline_proposals);
    let pick_fresh = |draws: &mut dyn Draws| {
        let k = if fresh.len() == 1 { 0 } else { draws.below(fresh.len()) };
        fresh.nth(k)
    };
    match state.mood {
        Mood::Content => {
            if !fresh.is_empty() {
                pick_fresh(draws)
            } else {
                present(state.baseline_action, proposals)
            }
        }
        Mood::Hopeful => present(state.trial_action, proposals).or(present(state.baseline_action, proposals)),
        Mood::Watchful => present(state.baseline_action, proposals),
        Mood::Discontent => {
            if fresh.is_empty() {
                None
            } else {
                pick_fresh(draws)
            }
        }
    }
}

fn present(a: Action, proposals: ProposerSet) -> Action {
    a.filter(|&i| proposals.contains(i))
}

/// All possible acceptances with their (ε-free) probabilities.
pub fn atl_action_distribution(state: &AcceptorState, proposals: ProposerSet) -> Vec<(Action, EpsPoly)> {
    let fresh = proposals.difference(state.baseline_proposals);
    let uniform = || {
        let k = fresh.len() as i64;
        fresh
            .iter()
            .map(|i| (Some(i), EpsPoly::ratio(1, k)))
            .collect::<Vec<_>>()
    };
    let certain = |a: Action| vec![(a, EpsPoly::one())];
    match state.mood {
        Mood::Content if !fresh.is_empty() => uniform(),
        Mood::Content | Mood::Watchful => certain(present(state.baseline_action, proposals)),
        Mood::Hopeful => certain(present(state.trial_action, proposals).or(present(state.baseline_action, proposals))),
        Mood::Discontent if fresh.is_empty() => certain(None),
        Mood::Discontent => uniform(),
    }
}

fn with_mood(mood: Mood, action: Action, utility: Utility, proposals: ProposerSet) -> AcceptorState {
    AcceptorState {
        mood,
        baseline_action: action,
        baseline_utility: utility,
        baseline_proposals: proposals,
        trial_action: None,
        trial_utility: Utility::ZERO,
    }
}

fn hopeful(state: &AcceptorState, action: Action, utility: Utility, proposals: ProposerSet) -> AcceptorState {
    AcceptorState {
        mood: Mood::Hopeful,
        baseline_action: state.baseline_action,
        baseline_utility: state.baseline_utility,
        baseline_proposals: proposals,
        trial_action: action,
        trial_utility: utility,
    }
}

/// The acceptor update table.
pub fn atl_update(state: &AcceptorState, action: Action, utility: Utility, proposals: ProposerSet) -> AcceptorState {
    match atl_update_branches(state, action, utility, proposals) {
        Row::Fixed(s) => s,
        Row::Tempted { hopeful, .. } => hopeful,
    }
}

/// Outcome of a row of the update table. `Tempted` rows are the two where
/// a better acceptance makes the acceptor hopeful; the exploiting rule
/// randomizes exactly those.
enum Row {
    Fixed(AcceptorState),
    Tempted { hopeful: AcceptorState, stay: AcceptorState, discontent: bool, utility: Utility },
}

fn atl_update_branches(state: &AcceptorState, action: Action, utility: Utility, proposals: ProposerSet) -> Row {
    let base = state.baseline_utility;
    match state.mood {
        Mood::Content => match utility.cmp(&base) {
            std::cmp::Ordering::Less => Row::Fixed(with_mood(Mood::Watchful, state.baseline_action, base, proposals)),
            std::cmp::Ordering::Equal => Row::Fixed(with_mood(Mood::Content, state.baseline_action, base, proposals)),
            std::cmp::Ordering::Greater => Row::Tempted {
                hopeful: hopeful(state, action, utility, proposals),
                stay: with_mood(Mood::Content, state.baseline_action, base, proposals),
                discontent: false,
                utility,
            },
        },
        Mood::Hopeful => {
            if utility == state.trial_utility {
                Row::Fixed(with_mood(Mood::Content, state.trial_action, state.trial_utility, proposals))
            } else if base.is_zero() {
                // The baseline of a hopeful acceptor with zero baseline utility
                // is always `∅`, so this is the cleared discontent shape.
                Row::Fixed(with_mood(Mood::Discontent, None, Utility::ZERO, proposals))
            } else {
                Row::Fixed(with_mood(Mood::Content, state.baseline_action, base, proposals))
            }
        }
        Mood::Watchful => {
            if utility < base {
                Row::Fixed(AcceptorState::initial())
            } else {
                Row::Fixed(with_mood(Mood::Content, state.baseline_action, base, proposals))
            }
        }
        Mood::Discontent => {
            if utility > base {
                Row::Tempted {
                    hopeful: hopeful(&AcceptorState::initial(), action, utility, proposals),
                    stay: with_mood(Mood::Discontent, None, Utility::ZERO, proposals),
                    discontent: true,
                    utility,
                }
            } else {
                Row::Fixed(with_mood(Mood::Discontent, None, Utility::ZERO, proposals))
            }
        }
    }
}

/// The exploiting update: identical to [`atl_update`] except that the two
/// hopeful-making rows fire only with probability `eps^G(u)` (content) or
/// `eps^F(u)` (discontent).
pub fn atl_star_update(
    state: &AcceptorState,
    action: Action,
    utility: Utility,
    proposals: ProposerSet,
    params: &ExploitParams,
    draws: &mut dyn Draws,
) -> AcceptorState {
    match atl_update_branches(state, action, utility, proposals) {
        Row::Fixed(s) => s,
        Row::Tempted { hopeful, stay, discontent, utility } => {
            let exponent = if discontent { params.f.eval(utility) } else { params.g.eval(utility) };
            let p = params.epsilon.powf(num_traits::ToPrimitive::to_f64(&exponent).unwrap_or(1.0));
            if draws.unit() < p {
                hopeful
            } else {
                stay
            }
        }
    }
}

/// Every outcome of [`atl_star_update`] with its probability as a
/// polynomial in the experimentation rate. For the deterministic rows this
/// is a single certain branch.
pub fn atl_star_update_distribution(
    state: &AcceptorState,
    action: Action,
    utility: Utility,
    proposals: ProposerSet,
    params: &ExploitParams,
) -> Vec<(AcceptorState, EpsPoly)> {
    match atl_update_branches(state, action, utility, proposals) {
        Row::Fixed(s) => vec![(s, EpsPoly::one())],
        Row::Tempted { hopeful, stay, discontent, utility } => {
            let p = if discontent { params.discontent_acceptance(utility) } else { params.content_acceptance(utility) };
            let q = EpsPoly::one() + p.neg();
            vec![(hopeful, p), (stay, q)]
        }
    }
}
