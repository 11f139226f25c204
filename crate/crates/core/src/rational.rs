//! Exact rational arithmetic helpers and the `Probability` newtype.
//!
//! Every quantity the library reports is an exact `BigRational`; floating
//! point only ever appears as an optional display format.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::str::FromStr;

pub type Rat = BigRational;

/// An exact probability, invariant `0 <= p <= 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Probability(Rat);

impl Probability {
    pub fn new(r: Rat) -> Result<Self, RatError> {
        if r.is_negative() || r > Rat::one() {
            return Err(RatError::OutOfUnitRange(format_rat(&r)));
        }
        Ok(Probability(r))
    }

    /// Wraps a rational that is known to lie in `[0, 1]` by construction.
    pub fn from_unit(r: Rat) -> Self {
        debug_assert!(!r.is_negative() && r <= Rat::one(), "probability out of range");
        Probability(r)
    }

    pub fn zero() -> Self {
        Probability(Rat::zero())
    }

    pub fn one() -> Self {
        Probability(Rat::one())
    }

    pub fn as_rat(&self) -> &Rat {
        &self.0
    }

    pub fn into_rat(self) -> Rat {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_rat(&self.0))
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum RatError {
    #[error("malformed rational `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
    #[error("value {0} outside [0, 1]")]
    OutOfUnitRange(String),
}

/// Parses `a/b`, a finite decimal (`0.345`, `-1.5`) or an integer, exactly.
pub fn parse_rat(text: &str) -> Result<Rat, RatError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(RatError::Malformed(text.to_string()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = BigInt::from_str(num.trim()).map_err(|_| RatError::Malformed(text.to_string()))?;
        let d = BigInt::from_str(den.trim()).map_err(|_| RatError::Malformed(text.to_string()))?;
        if d.is_zero() {
            return Err(RatError::ZeroDenominator(text.to_string()));
        }
        return Ok(Rat::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(RatError::Malformed(text.to_string()));
        }
        let negative = int_part.starts_with('-');
        let int_digits = int_part.strip_prefix(['-', '+']).unwrap_or(int_part);
        if !int_digits.bytes().all(|b| b.is_ascii_digit()) || int_digits.is_empty() {
            return Err(RatError::Malformed(text.to_string()));
        }
        let joined = format!("{int_digits}{frac_part}");
        let n = BigInt::from_str(&joined).map_err(|_| RatError::Malformed(text.to_string()))?;
        let d = BigInt::from(10u32).pow(frac_part.len() as u32);
        let r = Rat::new(n, d);
        return Ok(if negative { -r } else { r });
    }
    let n = BigInt::from_str(s).map_err(|_| RatError::Malformed(text.to_string()))?;
    Ok(Rat::from_integer(n))
}

/// Canonical rendering: lowest terms, `a/b` for non-integers, plain integer otherwise.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rat("1/2").unwrap(), Rat::new(1.into(), 2.into()));
        assert_eq!(parse_rat("0.345").unwrap(), Rat::new(69.into(), 200.into()));
        assert_eq!(parse_rat("-1.5").unwrap(), Rat::new((-3).into(), 2.into()));
        assert_eq!(parse_rat("3").unwrap(), Rat::from_integer(3.into()));
        assert_eq!(parse_rat(" 2/4 ").unwrap(), Rat::new(1.into(), 2.into()));
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_rat("").is_err());
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("1.").is_err());
        assert!(parse_rat("a/b").is_err());
        assert!(parse_rat("0.3.4").is_err());
    }

    #[test]
    fn canonical_format() {
        assert_eq!(format_rat(&parse_rat("0.5").unwrap()), "1/2");
        assert_eq!(format_rat(&parse_rat("4/2").unwrap()), "2");
        assert_eq!(format_rat(&parse_rat("0.345").unwrap()), "69/200");
    }

    #[test]
    fn probability_range() {
        assert!(Probability::new(parse_rat("1/2").unwrap()).is_ok());
        assert!(Probability::new(parse_rat("3/2").unwrap()).is_err());
        assert!(Probability::new(parse_rat("-1/2").unwrap()).is_err());
    }
}
