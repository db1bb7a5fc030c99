//! Exact rationals and the bounded-precision helpers built on them.
//!
//! Arithmetic is always exact over [`BigRational`]; precision is only lost at
//! explicit calls to [`truncate_to_bits`]. [`BitRational`] is the normalized
//! value type exchanged at module boundaries and in text I/O.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar used by every matrix and polynomial in the crate.
pub type Q = BigRational;

/// A reduced rational with positive denominator.
///
/// A value is called `b`-bit when `|numerator| < denominator <= 2^b`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitRational(Q);

impl BitRational {
    pub fn new(value: Q) -> Self {
        // BigRational is kept reduced with a positive denominator.
        BitRational(value)
    }

    pub fn value(&self) -> &Q {
        &self.0
    }

    pub fn into_inner(self) -> Q {
        self.0
    }

    pub fn numerator(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denominator(&self) -> &BigInt {
        self.0.denom()
    }

    /// Smallest `B` with `denominator <= 2^B`.
    pub fn bit_bound(&self) -> u64 {
        let den = self.0.denom();
        let bits = den.bits();
        // 2^(bits-1) <= den < 2^bits; exact powers of two need one bit less.
        if (den - BigInt::one()).bits() < bits {
            bits - 1
        } else {
            bits
        }
    }

    /// `|numerator| < denominator <= 2^b`.
    pub fn is_b_bit(&self, b: u64) -> bool {
        self.0.numer().abs() < *self.0.denom() && self.bit_bound() <= b
    }
}

impl From<Q> for BitRational {
    fn from(value: Q) -> Self {
        BitRational(value)
    }
}

impl fmt::Display for BitRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", fmt_q(&self.0))
    }
}

impl FromStr for BitRational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_q(s).map(BitRational)
    }
}

/// Builds `num/den` in lowest terms with the sign carried by the numerator.
pub fn make_rational(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<BitRational> {
    let den = den.into();
    if den.is_zero() {
        return Err(Error::ZeroDenominator);
    }
    Ok(BitRational(Q::new(num.into(), den)))
}

/// Shorthand for small literals; panics on a zero denominator.
pub fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn pow2(bits: u64) -> BigInt {
    BigInt::one() << bits
}

/// `2^-bits` as a rational.
pub fn inv_pow2(bits: u64) -> Q {
    Q::new(BigInt::one(), pow2(bits))
}

/// Nearest multiple of `2^-bits`, exact ties rounded toward zero.
pub fn truncate_q(r: &Q, bits: u64) -> Q {
    let scale = pow2(bits);
    let num = r.numer().abs() * &scale;
    let den = r.denom();
    let (mut quot, rem) = num.div_rem(den);
    if (rem << 1u32) > *den {
        quot += 1;
    }
    if r.is_negative() {
        quot = -quot;
    }
    Q::new(quot, scale)
}

pub fn truncate_to_bits(r: &Q, bits: u64) -> BitRational {
    BitRational(truncate_q(r, bits))
}

/// `|r - approx| <= 2^-bits`.
pub fn is_b_approx(approx: &Q, r: &Q, bits: u64) -> bool {
    (r - approx).abs() <= inv_pow2(bits)
}

/// Lowest-terms `p/q` text, e.g. `-3/8` or `0/1`.
pub fn fmt_q(r: &Q) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_q(s: &str) -> Result<Q> {
    let bad = || Error::Contract(format!("malformed rational `{s}`"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n = BigInt::from_str(n).map_err(|_| bad())?;
    let d = BigInt::from_str(d).map_err(|_| bad())?;
    if d.is_zero() {
        return Err(Error::ZeroDenominator);
    }
    Ok(Q::new(n, d))
}

/// Remaining precision of a maintained approximation.
///
/// Every lossy batch application spends one bit; a refresh resets the ledger.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrecisionBudget {
    pub initial_bits: u64,
    pub bits_spent: u64,
    pub guard_bits: u64,
}

/// Fixed slack in the coefficient error bound: one truncation bit plus one
/// bit for the first gadget application.
pub const ERROR_SLACK_BITS: u64 = 2;

impl PrecisionBudget {
    pub fn new(initial_bits: u64, guard_bits: u64) -> Self {
        PrecisionBudget { initial_bits, bits_spent: 0, guard_bits }
    }

    pub fn remaining(&self) -> u64 {
        self.initial_bits.saturating_sub(self.bits_spent)
    }

    pub fn can_spend(&self, bits: u64) -> bool {
        self.remaining() >= bits && self.remaining() - bits > self.guard_bits
    }

    pub fn spend(&mut self, bits: u64) -> Result<()> {
        if !self.can_spend(bits) {
            return Err(Error::StalePrecision(format!(
                "{} bits remaining, guard is {}",
                self.remaining(),
                self.guard_bits
            )));
        }
        self.bits_spent += bits;
        Ok(())
    }

    pub fn refresh(&mut self) {
        self.bits_spent = 0;
    }

    /// Certified per-coefficient error `2^-(remaining - slack)`.
    pub fn error_bound(&self) -> Q {
        let exp = self.remaining() as i64 - ERROR_SLACK_BITS as i64;
        if exp >= 0 {
            inv_pow2(exp as u64)
        } else {
            Q::from_integer(pow2((-exp) as u64))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn make_rational_normalizes() {
        assert_eq!(make_rational(1, 2).unwrap().to_string(), "1/2");
        assert_eq!(make_rational(2, 4).unwrap().to_string(), "1/2");
        assert_eq!(make_rational(-3, 9).unwrap().to_string(), "-1/3");
        assert_eq!(make_rational(3, -9).unwrap().to_string(), "-1/3");
        assert_eq!(make_rational(0, 5).unwrap().to_string(), "0/1");
        assert_eq!(make_rational(1, 0), Err(Error::ZeroDenominator));
    }

    /// Brute force: scan every multiple of 2^-bits near r.
    fn nearest_multiple_oracle(r: &Q, bits: u64) -> Q {
        let step = inv_pow2(bits);
        let base = (r / &step).floor();
        let mut best: Option<Q> = None;
        for k in -2..=2 {
            let cand = (&base + qi(k)) * &step;
            let dist = (&cand - r).abs();
            best = match best {
                None => Some(cand),
                Some(b) => {
                    let bd = (&b - r).abs();
                    if dist < bd || (dist == bd && cand.abs() < b.abs()) {
                        Some(cand)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        best.unwrap()
    }

    #[test]
    fn truncate_examples() {
        assert_eq!(truncate_q(&q(1, 2), 3), q(1, 2));
        assert_eq!(nearest_multiple_oracle(&q(3, 7), 3), q(3, 8));
        assert_eq!(truncate_q(&q(3, 7), 3), q(3, 8));
        assert_eq!(truncate_q(&q(1, 16), 3), qi(0));
        assert_eq!(truncate_q(&q(-1, 16), 3), qi(0));
        assert_eq!(truncate_q(&q(3, 16), 3), q(1, 8));
        assert_eq!(truncate_q(&q(-3, 7), 3), q(-3, 8));
    }

    #[test]
    fn approx_examples() {
        assert!(is_b_approx(&q(3, 8), &q(3, 7), 3));
        assert!(is_b_approx(&q(5, 11), &q(5, 11), 0));
        assert!(!is_b_approx(&qi(0), &q(1, 2), 3));
    }

    #[test]
    fn bit_bound_and_parse() {
        let r: BitRational = "-3/8".parse().unwrap();
        assert_eq!(r.bit_bound(), 3);
        assert!(r.is_b_bit(3));
        assert!(!r.is_b_bit(2));
        let r: BitRational = "3/7".parse().unwrap();
        assert_eq!(r.bit_bound(), 3);
        let one: BitRational = "1".parse().unwrap();
        assert!(!one.is_b_bit(8));
        assert_eq!(one.to_string(), "1/1");
        assert!("1/0".parse::<BitRational>().is_err());
        assert!("x/2".parse::<BitRational>().is_err());
    }

    #[test]
    fn budget_ledger() {
        let mut b = PrecisionBudget::new(10, 2);
        for _ in 0..7 {
            b.spend(1).unwrap();
        }
        assert_eq!(b.remaining(), 3);
        assert!(matches!(b.spend(1), Err(Error::StalePrecision(_))));
        assert_eq!(b.error_bound(), inv_pow2(1));
        b.refresh();
        assert_eq!(b.remaining(), 10);
    }

    proptest! {
        #[test]
        fn truncation_error_is_half_ulp(n in -10_000i64..10_000, d in 1i64..5_000, bits in 1u64..24) {
            let r = q(n, d);
            let t = truncate_q(&r, bits);
            prop_assert!((&t - &r).abs() <= inv_pow2(bits + 1));
            prop_assert_eq!(&t, &nearest_multiple_oracle(&r, bits));
            prop_assert_eq!(truncate_q(&t, bits), t.clone());
            prop_assert!(is_b_approx(&t, &r, bits));
        }
    }
}
