//! Transition probabilities as generalized polynomials in the
//! experimentation rate: finite sums `sum_k c_k * eps^(e_k)` with exact
//! rational coefficients and exact rational exponents.
//!
//! Keeping probabilities symbolic makes row sums checkable exactly and makes
//! the resistance of a transition (its leading exponent) a direct read-off.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul};

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Clone, PartialEq, Eq, Default)]
pub struct EpsPoly {
    terms: BTreeMap<Rational64, BigRational>,
}

impl EpsPoly {
    pub fn zero() -> Self {
        EpsPoly::default()
    }

    pub fn one() -> Self {
        EpsPoly::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        EpsPoly::monomial(c, Rational64::zero())
    }

    /// `c * eps^exponent`.
    pub fn monomial(c: BigRational, exponent: Rational64) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(exponent, c);
        }
        EpsPoly { terms }
    }

    /// `eps^exponent`.
    pub fn power(exponent: Rational64) -> Self {
        EpsPoly::monomial(BigRational::one(), exponent)
    }

    /// `p/q` as a constant.
    pub fn ratio(p: i64, q: i64) -> Self {
        EpsPoly::constant(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(&Rational64::zero())
                .is_some_and(|c| c.is_one())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Rational64, &BigRational)> {
        self.terms.iter()
    }

    /// Smallest exponent with a nonzero coefficient: the resistance.
    pub fn leading_exponent(&self) -> Option<Rational64> {
        self.terms.keys().next().copied()
    }

    pub fn leading_coefficient(&self) -> Option<&BigRational> {
        self.terms.values().next()
    }

    /// Value at `eps = 1`, exactly.
    pub fn at_one(&self) -> BigRational {
        self.terms.values().fold(BigRational::zero(), |acc, c| acc + c)
    }

    pub fn eval(&self, eps: f64) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                let c = c.to_f64().unwrap_or(f64::NAN);
                let p = if e.is_integer() {
                    eps.powi(e.to_integer() as i32)
                } else {
                    eps.powf(e.to_f64().unwrap_or(f64::NAN))
                };
                c * p
            })
            .sum()
    }

    /// Exact value at a rational `eps`, available when every exponent is a
    /// nonnegative integer.
    pub fn eval_exact(&self, eps: &BigRational) -> Option<BigRational> {
        let mut acc = BigRational::zero();
        for (e, c) in &self.terms {
            if !e.is_integer() || e.is_negative() {
                return None;
            }
            let k = e.to_integer() as i32;
            acc += c * num_traits::pow::Pow::pow(eps, k);
        }
        Some(acc)
    }

    pub fn has_integer_exponents(&self) -> bool {
        self.terms.keys().all(|e| e.is_integer())
    }

    fn add_term(&mut self, e: Rational64, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(e).or_insert_with(BigRational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn add_assign_ref(&mut self, other: &EpsPoly) {
        for (e, c) in &other.terms {
            self.add_term(*e, c.clone());
        }
    }

    pub fn neg(&self) -> EpsPoly {
        EpsPoly {
            terms: self.terms.iter().map(|(e, c)| (*e, -c.clone())).collect(),
        }
    }

    pub fn mul_ref(&self, other: &EpsPoly) -> EpsPoly {
        let mut out = EpsPoly::zero();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                out.add_term(e1 + e2, c1 * c2);
            }
        }
        out
    }
}

impl Add for EpsPoly {
    type Output = EpsPoly;

    fn add(mut self, rhs: EpsPoly) -> EpsPoly {
        self.add_assign_ref(&rhs);
        self
    }
}

impl Mul for EpsPoly {
    type Output = EpsPoly;

    fn mul(self, rhs: EpsPoly) -> EpsPoly {
        self.mul_ref(&rhs)
    }
}

impl fmt::Debug for EpsPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for EpsPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (e, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            if e.is_zero() {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c}*eps^{e}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> Rational64 {
        Rational64::new(p, q)
    }

    #[test]
    fn one_minus_eps_minus_eps_squared() {
        let p = EpsPoly::one() + EpsPoly::power(r(1, 1)).neg() + EpsPoly::power(r(2, 1)).neg();
        assert_eq!(p.leading_exponent(), Some(r(0, 1)));
        assert!((p.eval(0.1) - 0.89).abs() < 1e-15);
        let exact = p
            .eval_exact(&BigRational::new(1.into(), 10.into()))
            .unwrap();
        assert_eq!(exact, BigRational::new(89.into(), 100.into()));
    }

    #[test]
    fn cancellation_removes_terms() {
        let p = EpsPoly::power(r(1, 2)) + EpsPoly::power(r(1, 2)).neg();
        assert!(p.is_zero());
        let q = (EpsPoly::one() + EpsPoly::power(r(9, 20)).neg()) + EpsPoly::power(r(9, 20));
        assert!(q.is_one());
    }

    #[test]
    fn products_add_exponents() {
        let p = EpsPoly::ratio(1, 2) * EpsPoly::power(r(1, 1)) * EpsPoly::power(r(2, 5));
        assert_eq!(p.leading_exponent(), Some(r(7, 5)));
        assert_eq!(p.at_one(), BigRational::new(1.into(), 2.into()));
        assert!(p.eval_exact(&BigRational::one()).is_none());
        assert!((p.eval(0.01) - 0.5 * 0.01f64.powf(1.4)).abs() < 1e-18);
    }
}
