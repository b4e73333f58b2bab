//! JSON forms of markets and matchings.

use serde::{Deserialize, Serialize};

use super::{validate_market, Market, MarketError, Matching, RawUtilities, Utility};

/// On-disk market: `proposer_utils` is `n x m`, `acceptor_utils` is `m x n`,
/// utilities are decimal strings and the unmatched utility is implicitly 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketFile {
    pub n: usize,
    pub m: usize,
    pub proposer_utils: Vec<Vec<Utility>>,
    pub acceptor_utils: Vec<Vec<Utility>>,
}

impl MarketFile {
    pub fn into_market(self) -> Result<Market, MarketError> {
        if self.proposer_utils.len() != self.n || self.acceptor_utils.len() != self.m {
            return Err(MarketError::Shape(format!(
                "declared {}x{} but tables have {} and {} rows",
                self.n,
                self.m,
                self.proposer_utils.len(),
                self.acceptor_utils.len()
            )));
        }
        validate_market(&RawUtilities {
            proposer: self.proposer_utils,
            acceptor: self.acceptor_utils,
            proposer_unmatched: Vec::new(),
            acceptor_unmatched: Vec::new(),
        })
    }

    pub fn parse(text: &str) -> Result<Market, MarketError> {
        let file: MarketFile = serde_json::from_str(text).map_err(|e| MarketError::Parse(e.to_string()))?;
        file.into_market()
    }
}

impl From<&Market> for MarketFile {
    fn from(market: &Market) -> Self {
        let raw = market.raw();
        MarketFile {
            n: market.n(),
            m: market.m(),
            proposer_utils: raw.proposer,
            acceptor_utils: raw.acceptor,
        }
    }
}

impl Market {
    /// Pretty-printed JSON in the [`MarketFile`] layout.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MarketFile::from(self)).expect("market serializes")
    }
}

/// A matching as each proposer's acceptor index, `-1` for unmatched.
pub type MatchingIndices = Vec<i64>;

impl Matching {
    pub fn to_indices(&self) -> MatchingIndices {
        self.proposer_partners()
            .iter()
            .map(|p| p.map_or(-1, |j| j as i64))
            .collect()
    }

    pub fn from_indices(indices: &[i64], m: usize) -> Result<Matching, MarketError> {
        let partners = indices
            .iter()
            .map(|&k| match k {
                -1 => Ok(None),
                k if k >= 0 => Ok(Some(k as usize)),
                k => Err(MarketError::InvalidMatching(format!("index {k}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Matching::from_proposer_partners(&partners, m)
    }
}

impl Serialize for Matching {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_indices().serialize(serializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::random_market;

    #[test]
    fn market_json_round_trip() {
        let market = random_market(3, 2, 4);
        let text = market.to_json();
        assert_eq!(MarketFile::parse(&text).unwrap(), market);
        assert!(text.contains('"'), "utilities are written as strings");
    }

    #[test]
    fn accepts_numbers_and_strings() {
        let text = r#"{"n":1,"m":2,"proposer_utils":[[0.5,"0.25"]],"acceptor_utils":[["1/3"],[0.75]]}"#;
        let market = MarketFile::parse(text).unwrap();
        assert_eq!(market.acceptor_utility(0, Some(0)), Utility::new(1, 3));
        assert_eq!(market.proposer_utility(0, Some(0)), Utility::new(1, 2));
    }

    #[test]
    fn rejects_bad_files() {
        let dup = r#"{"n":1,"m":2,"proposer_utils":[["0.5","0.5"]],"acceptor_utils":[["0.1"],["0.2"]]}"#;
        assert!(matches!(MarketFile::parse(dup), Err(MarketError::DuplicateUtility { .. })));
        let shape = r#"{"n":2,"m":1,"proposer_utils":[["0.5"]],"acceptor_utils":[["0.1","0.2"]]}"#;
        assert!(matches!(MarketFile::parse(shape), Err(MarketError::Shape(_))));
        assert!(matches!(MarketFile::parse("{"), Err(MarketError::Parse(_))));
    }

    #[test]
    fn matching_indices() {
        let mu = Matching::from_pairs(3, 2, &[(0, 1), (2, 0)]).unwrap();
        assert_eq!(mu.to_indices(), vec![1, -1, 0]);
        assert_eq!(Matching::from_indices(&[1, -1, 0], 2).unwrap(), mu);
        assert!(Matching::from_indices(&[-2], 2).is_err());
        assert_eq!(serde_json::to_string(&mu).unwrap(), "[1,-1,0]");
    }
}
