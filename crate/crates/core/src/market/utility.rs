use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::MarketError;

/// An exact cardinal utility.
///
/// Utilities are compared for strict preference and for exact equality by
/// the learning rules, so they are kept as reduced rationals. Decimal text
/// such as `"0.35"` parses exactly; floats are accepted at the boundary via
/// their shortest decimal representation.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Utility(Rational64);

impl Utility {
    pub const ZERO: Utility = Utility(Rational64::new_raw(0, 1));

    pub fn new(numer: i64, denom: i64) -> Self {
        Utility(Rational64::new(numer, denom))
    }

    pub fn from_ratio(r: Rational64) -> Self {
        Utility(r)
    }

    pub fn ratio(self) -> Rational64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Converts a finite float through its shortest round-trip decimal form.
    pub fn from_f64(x: f64) -> Result<Self, MarketError> {
        if !x.is_finite() {
            return Err(MarketError::Parse(format!("non-finite utility {x}")));
        }
        format!("{x}").parse()
    }
}

impl Default for Utility {
    fn default() -> Self {
        Utility::ZERO
    }
}

impl fmt::Debug for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Prints an exact decimal when the denominator has no prime factors other
/// than 2 and 5, otherwise `p/q`.
impl fmt::Display for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let numer = *self.0.numer();
        let denom = *self.0.denom();
        let mut d = denom;
        let (mut twos, mut fives) = (0u32, 0u32);
        while d % 2 == 0 {
            d /= 2;
            twos += 1;
        }
        while d % 5 == 0 {
            d /= 5;
            fives += 1;
        }
        if d != 1 {
            return write!(f, "{numer}/{denom}");
        }
        let digits = twos.max(fives);
        if digits == 0 {
            return write!(f, "{numer}");
        }
        let scale = 10i128.pow(digits);
        let scaled = numer as i128 * (scale / denom as i128);
        let sign = if scaled < 0 { "-" } else { "" };
        let abs = scaled.unsigned_abs();
        let int = abs / scale as u128;
        let frac = abs % scale as u128;
        write!(f, "{sign}{int}.{frac:0width$}", width = digits as usize)
    }
}

impl FromStr for Utility {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || MarketError::Parse(format!("cannot parse utility {s:?}"));
        if let Some((p, q)) = s.split_once('/') {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            return Ok(Utility::new(p, q));
        }
        let (mantissa, exponent) = match s.find(['e', 'E']) {
            Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| bad())?),
            None => (s, 0),
        };
        let (neg, body) = match mantissa.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{int_part}{frac_part}");
        let mut numer: i64 = digits.trim_start_matches('0').parse().unwrap_or(0);
        if digits.trim_start_matches('0').len() > 18 {
            return Err(bad());
        }
        let scale = exponent - frac_part.len() as i32;
        let mut denom: i64 = 1;
        if scale >= 0 {
            numer = numer
                .checked_mul(10i64.checked_pow(scale as u32).ok_or_else(bad)?)
                .ok_or_else(bad)?;
        } else {
            denom = 10i64.checked_pow((-scale) as u32).ok_or_else(bad)?;
        }
        if neg {
            numer = -numer;
        }
        Ok(Utility::new(numer, denom))
    }
}

impl Serialize for Utility {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Utility {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct UtilityVisitor;

        impl<'de> Visitor<'de> for UtilityVisitor {
            type Value = Utility;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a decimal string, a p/q string or a number")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Utility, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Utility, E> {
                Utility::from_f64(v).map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Utility, E> {
                Ok(Utility::new(v as i64, 1))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Utility, E> {
                Ok(Utility::new(v, 1))
            }
        }

        deserializer.deserialize_any(UtilityVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        let u: Utility = "0.35".parse().unwrap();
        assert_eq!(u, Utility::new(7, 20));
        assert_eq!("7/20".parse::<Utility>().unwrap(), u);
        assert_eq!("3.5e-1".parse::<Utility>().unwrap(), u);
        assert_eq!(".5".parse::<Utility>().unwrap(), Utility::new(1, 2));
        assert!("abc".parse::<Utility>().is_err());
        assert!("1/0".parse::<Utility>().is_err());
    }

    #[test]
    fn displays_exact_decimals_or_fractions() {
        assert_eq!(Utility::new(7, 20).to_string(), "0.35");
        assert_eq!(Utility::new(1, 3).to_string(), "1/3");
        assert_eq!(Utility::ZERO.to_string(), "0");
        assert_eq!(Utility::new(1, 8).to_string(), "0.125");
    }

    #[test]
    fn floats_convert_through_shortest_decimal() {
        assert_eq!(Utility::from_f64(0.1).unwrap(), Utility::new(1, 10));
        assert!(Utility::from_f64(f64::NAN).is_err());
    }

    #[test]
    fn display_round_trips() {
        for (p, q) in [(1, 2), (3, 7), (9999, 10000), (1, 1024)] {
            let u = Utility::new(p, q);
            assert_eq!(u.to_string().parse::<Utility>().unwrap(), u);
        }
    }
}
