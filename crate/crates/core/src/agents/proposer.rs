use num_rational::Rational64;

use super::{check_epsilon, Action, AgentError, Draws, Mood, ProposerState};
use crate::market::Utility;
use crate::poly::EpsPoly;

/// Chooses the proposal for this round.
///
/// Content and discontent proposers stay home with probability `eps^2`,
/// propose to a uniformly random acceptor (baseline included) with
/// probability `eps`, and otherwise replay their baseline. Hopeful
/// proposers replay the trial, watchful ones the baseline.
pub fn ptl_act(
    state: &ProposerState,
    epsilon: f64,
    m: usize,
    draws: &mut dyn Draws,
) -> Result<Action, AgentError> {
    check_epsilon(epsilon)?;
    Ok(match state.mood {
        Mood::Hopeful => state.trial_action,
        Mood::Watchful => state.baseline_action,
        Mood::Content | Mood::Discontent => {
            let x = draws.unit();
            let eps2 = epsilon * epsilon;
            if x < eps2 {
                None
            } else if x < eps2 + epsilon && m > 0 {
                Some(draws.below(m))
            } else {
                state.baseline_action
            }
        }
    })
}

/// Every possible proposal with its probability, merged by action and
/// ordered with `∅` first.
pub fn ptl_action_distribution(state: &ProposerState, m: usize) -> Vec<(Action, EpsPoly)> {
    match state.mood {
        Mood::Hopeful => vec![(state.trial_action, EpsPoly::one())],
        Mood::Watchful => vec![(state.baseline_action, EpsPoly::one())],
        Mood::Content | Mood::Discontent => {
            let two = Rational64::from_integer(2);
            let one = Rational64::from_integer(1);
            let mut out: Vec<(Action, EpsPoly)> = Vec::with_capacity(m + 1);
            out.push((None, EpsPoly::power(two)));
            for j in 0..m {
                out.push((Some(j), EpsPoly::ratio(1, m as i64) * EpsPoly::power(one)));
            }
            // 1 - eps - eps^2 goes to the baseline.
            let stay = EpsPoly::one() + EpsPoly::power(one).neg() + EpsPoly::power(two).neg();
            let slot = match state.baseline_action {
                None => 0,
                Some(j) => j + 1,
            };
            if m == 0 {
                // No acceptors: every branch is `∅`.
                return vec![(None, EpsPoly::one())];
            }
            out[slot].1.add_assign_ref(&stay);
            out
        }
    }
}

/// Applies the proposer update table to the realized action and utility.
pub fn ptl_update(state: &ProposerState, action: Action, utility: Utility) -> ProposerState {
    let base = state.baseline_utility;
    match state.mood {
        Mood::Content => {
            if action == state.baseline_action {
                match utility.cmp(&base) {
                    std::cmp::Ordering::Less => ProposerState::settled(Mood::Watchful, state.baseline_action, base),
                    std::cmp::Ordering::Equal => ProposerState::settled(Mood::Content, state.baseline_action, base),
                    std::cmp::Ordering::Greater => hopeful(state, action, utility),
                }
            } else if utility <= base {
                ProposerState::settled(Mood::Content, state.baseline_action, base)
            } else {
                hopeful(state, action, utility)
            }
        }
        Mood::Hopeful => {
            if utility == state.trial_utility {
                ProposerState::settled(Mood::Content, state.trial_action, state.trial_utility)
            } else if base.is_zero() {
                ProposerState::initial()
            } else {
                ProposerState::settled(Mood::Content, state.baseline_action, base)
            }
        }
        Mood::Watchful => {
            if utility < base {
                ProposerState::initial()
            } else {
                ProposerState::settled(Mood::Content, state.baseline_action, base)
            }
        }
        Mood::Discontent => {
            if utility > base {
                hopeful(state, action, utility)
            } else {
                ProposerState::initial()
            }
        }
    }
}

fn hopeful(state: &ProposerState, action: Action, utility: Utility) -> ProposerState {
    ProposerState {
        mood: Mood::Hopeful,
        baseline_action: state.baseline_action,
        baseline_utility: state.baseline_utility,
        trial_action: action,
        trial_utility: utility,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::RngDraws;
    use rand::rngs::SmallRng;
    use rand::SeedableRng;

    fn u(x: &str) -> Utility {
        x.parse().unwrap()
    }

    fn content(a: usize, x: &str) -> ProposerState {
        ProposerState::settled(Mood::Content, Some(a), u(x))
    }

    struct Fixed(f64, usize);

    impl Draws for Fixed {
        fn unit(&mut self) -> f64 {
            self.0
        }
        fn below(&mut self, _n: usize) -> usize {
            self.1
        }
    }

    #[test]
    fn deterministic_moods_replay_their_action() {
        let mut h = content(0, "0.2");
        h.mood = Mood::Hopeful;
        h.trial_action = Some(2);
        h.trial_utility = u("0.5");
        let mut d = Fixed(0.0, 1);
        assert_eq!(ptl_act(&h, 0.5, 3, &mut d).unwrap(), Some(2));
        let w = ProposerState::settled(Mood::Watchful, Some(0), u("0.3"));
        assert_eq!(ptl_act(&w, 0.5, 3, &mut d).unwrap(), Some(0));
    }

    #[test]
    fn content_branches_by_draw() {
        let s = content(0, "0.6");
        assert_eq!(ptl_act(&s, 0.1, 3, &mut Fixed(0.005, 2)).unwrap(), None);
        assert_eq!(ptl_act(&s, 0.1, 3, &mut Fixed(0.05, 2)).unwrap(), Some(2));
        assert_eq!(ptl_act(&s, 0.1, 3, &mut Fixed(0.5, 2)).unwrap(), Some(0));
        assert!(ptl_act(&s, 0.9, 3, &mut Fixed(0.5, 2)).is_err());
    }

    #[test]
    fn distribution_sums_to_one_with_eps_over_m_for_others() {
        let s = content(1, "0.6");
        let dist = ptl_action_distribution(&s, 4);
        let mut total = EpsPoly::zero();
        for (a, p) in &dist {
            total.add_assign_ref(p);
            if *a != Some(1) && a.is_some() {
                assert_eq!(*p, EpsPoly::ratio(1, 4) * EpsPoly::power(Rational64::from_integer(1)));
            }
        }
        assert!(total.is_one());
        let d = ptl_action_distribution(&ProposerState::initial(), 2);
        assert_eq!(d[0].1.leading_exponent(), Some(Rational64::from_integer(0)));
    }

    #[test]
    fn empirical_frequencies_match_within_four_sigma() {
        let eps = 0.2;
        let m = 4;
        let s = content(1, "0.6");
        let n = 100_000;
        let mut counts = vec![0usize; m + 1];
        let mut draws = RngDraws(SmallRng::seed_from_u64(11));
        for _ in 0..n {
            match ptl_act(&s, eps, m, &mut draws).unwrap() {
                None => counts[0] += 1,
                Some(j) => counts[j + 1] += 1,
            }
        }
        for (a, p) in ptl_action_distribution(&s, m) {
            let p = p.eval(eps);
            let k = counts[a.map_or(0, |j| j + 1)] as f64;
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((k - n as f64 * p).abs() <= 4.0 * sigma, "{a:?}: {k} vs {}", n as f64 * p);
        }
    }

    #[test]
    fn update_table_examples() {
        let s = content(0, "0.6");
        assert_eq!(ptl_update(&s, Some(0), u("0.6")), s);
        let w = ptl_update(&s, Some(0), Utility::ZERO);
        assert_eq!(w, ProposerState::settled(Mood::Watchful, Some(0), u("0.6")));
        let h = ptl_update(&ProposerState::initial(), Some(1), u("0.4"));
        assert_eq!(
            h,
            ProposerState {
                mood: Mood::Hopeful,
                baseline_action: None,
                baseline_utility: Utility::ZERO,
                trial_action: Some(1),
                trial_utility: u("0.4"),
            }
        );
    }

    #[test]
    fn update_table_remaining_rows() {
        let s = content(0, "0.6");
        // Different action, no better: stays content.
        assert_eq!(ptl_update(&s, Some(2), u("0.3")), s);
        assert_eq!(ptl_update(&s, None, Utility::ZERO), s);
        // Different action, better: trial recorded.
        let h = ptl_update(&s, Some(2), u("0.8"));
        assert_eq!((h.mood, h.trial_action, h.trial_utility), (Mood::Hopeful, Some(2), u("0.8")));
        assert_eq!(h.baseline_action, Some(0));
        // Hopeful confirms, falls back to baseline, or resets.
        assert_eq!(ptl_update(&h, Some(2), u("0.8")), content(2, "0.8"));
        assert_eq!(ptl_update(&h, Some(2), Utility::ZERO), s);
        let fresh = ptl_update(&ProposerState::initial(), Some(1), u("0.4"));
        assert_eq!(ptl_update(&fresh, Some(1), Utility::ZERO), ProposerState::initial());
        // Watchful.
        let w = ProposerState::settled(Mood::Watchful, Some(0), u("0.6"));
        assert_eq!(ptl_update(&w, Some(0), Utility::ZERO), ProposerState::initial());
        assert_eq!(ptl_update(&w, Some(0), u("0.6")), s);
        // Discontent rejected.
        assert_eq!(ptl_update(&ProposerState::initial(), Some(1), Utility::ZERO), ProposerState::initial());
    }
}
