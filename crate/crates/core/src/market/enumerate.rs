use super::{is_stable, Market, MarketError, Matching};

/// Largest side length [`enumerate_stable`] will brute-force.
pub const ENUMERATION_CAP: usize = 7;

/// Number of (possibly partial) matchings of an `n x m` market:
/// `sum_k C(n,k) C(m,k) k!`.
pub fn matching_count(n: usize, m: usize) -> u128 {
    let mut total = 0u128;
    let mut term = 1u128; // C(n,k) C(m,k) k! at k = 0
    for k in 0..=n.min(m) {
        total += term;
        term = term * (n - k) as u128 * (m - k) as u128 / (k as u128 + 1);
    }
    total
}

/// Every matching of an `n x m` market, including partial ones.
pub fn enumerate_matchings(n: usize, m: usize) -> Vec<Matching> {
    fn rec(i: usize, partners: &mut Vec<Option<usize>>, used: &mut Vec<bool>, m: usize, out: &mut Vec<Matching>) {
        if i == partners.len() {
            out.push(Matching::from_proposer_partners(partners, m).expect("partners are distinct"));
            return;
        }
        partners[i] = None;
        rec(i + 1, partners, used, m, out);
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                partners[i] = Some(j);
                rec(i + 1, partners, used, m, out);
                used[j] = false;
            }
        }
        partners[i] = None;
    }
    let mut out = Vec::with_capacity(matching_count(n, m) as usize);
    rec(0, &mut vec![None; n], &mut vec![false; m], m, &mut out);
    out
}

/// All stable matchings, found by checking every matching.
pub fn enumerate_stable(market: &Market) -> Result<Vec<Matching>, MarketError> {
    if market.n() > ENUMERATION_CAP || market.m() > ENUMERATION_CAP {
        return Err(MarketError::TooLarge {
            n: market.n(),
            m: market.m(),
            cap: ENUMERATION_CAP,
        });
    }
    let mut out = Vec::new();
    for mu in enumerate_matchings(market.n(), market.m()) {
        if is_stable(market, &mu)? {
            out.push(mu);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::random_market;
    use crate::market::tests::{m2, one_by_one};
    use std::collections::HashSet;

    #[test]
    fn counts_match_enumeration() {
        for n in 0..5 {
            for m in 0..5 {
                let all = enumerate_matchings(n, m);
                assert_eq!(all.len() as u128, matching_count(n, m));
                let distinct: HashSet<_> = all.iter().collect();
                assert_eq!(distinct.len(), all.len());
            }
        }
        assert_eq!(matching_count(2, 2), 7);
        assert_eq!(matching_count(7, 7), 130_922);
    }

    #[test]
    fn stable_sets_of_small_markets() {
        assert_eq!(
            enumerate_stable(&one_by_one()).unwrap(),
            vec![Matching::from_pairs(1, 1, &[(0, 0)]).unwrap()]
        );
        let stable: HashSet<_> = enumerate_stable(&m2()).unwrap().into_iter().collect();
        let expected: HashSet<_> = [
            Matching::from_pairs(2, 2, &[(0, 0), (1, 1)]).unwrap(),
            Matching::from_pairs(2, 2, &[(0, 1), (1, 0)]).unwrap(),
        ]
        .into_iter()
        .collect();
        assert_eq!(stable, expected);
    }

    #[test]
    fn cap_is_enforced() {
        let err = enumerate_stable(&random_market(8, 2, 0)).unwrap_err();
        assert!(matches!(err, MarketError::TooLarge { cap: 7, .. }));
    }
}
