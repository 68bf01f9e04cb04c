//! Exact rational scalars and prices extended with infinity.
//!
//! All core evaluation runs on arbitrary-precision rationals so that every
//! certificate in the toolkit is an exact equality or inequality. Floating
//! point only appears in Monte-Carlo estimators and the alpha sampler.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul};
use std::str::FromStr;

pub type Rational = BigRational;

/// Shorthand for an integer-valued rational.
pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Shorthand for the fraction n/d.
pub fn frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// 2^exp as a rational, with negative exponents allowed.
pub fn pow2(exp: i32) -> Rational {
    if exp >= 0 {
        Rational::from_integer(BigInt::one() << exp as usize)
    } else {
        Rational::new(BigInt::one(), BigInt::one() << (-exp) as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {input:?}: {reason}")]
pub struct ParseRationalError {
    pub input: String,
    pub reason: String,
}

/// Parses "7", "-3/4" or "9/16". Denominators must be nonzero.
pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let err = |reason: &str| ParseRationalError {
        input: s.to_string(),
        reason: reason.to_string(),
    };
    let s = s.trim();
    match s.split_once('/') {
        None => {
            let n = BigInt::from_str(s).map_err(|_| err("not an integer"))?;
            Ok(Rational::from_integer(n))
        }
        Some((num, den)) => {
            let n = BigInt::from_str(num.trim()).map_err(|_| err("bad numerator"))?;
            let d = BigInt::from_str(den.trim()).map_err(|_| err("bad denominator"))?;
            if d.is_zero() {
                return Err(err("zero denominator"));
            }
            Ok(Rational::new(n, d))
        }
    }
}

/// Renders a rational as "n" or "n/d" in lowest terms.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    let n = r.numer();
    let d = r.denom();
    // Good enough for display purposes; exact math never round-trips here.
    let nf = n.to_string().parse::<f64>().unwrap_or(f64::NAN);
    let df = d.to_string().parse::<f64>().unwrap_or(f64::NAN);
    nf / df
}

/// A price that may be infinite (withheld item).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Price {
    Finite(Rational),
    Infinite,
}

impl Price {
    pub fn zero() -> Self {
        Price::Finite(Rational::zero())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Price::Finite(_))
    }

    pub fn as_finite(&self) -> Option<&Rational> {
        match self {
            Price::Finite(r) => Some(r),
            Price::Infinite => None,
        }
    }

    /// Finite value or panic; callers must check `is_finite` first.
    pub fn unwrap_finite(&self) -> &Rational {
        self.as_finite().expect("price is infinite")
    }

    pub fn min_with(&mut self, other: Price) {
        if other < *self {
            *self = other;
        }
    }
}

impl PartialOrd for Price {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Price {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Price::Infinite, Price::Infinite) => Ordering::Equal,
            (Price::Infinite, Price::Finite(_)) => Ordering::Greater,
            (Price::Finite(_), Price::Infinite) => Ordering::Less,
            (Price::Finite(a), Price::Finite(b)) => a.cmp(b),
        }
    }
}

impl From<Rational> for Price {
    fn from(r: Rational) -> Self {
        Price::Finite(r)
    }
}

impl Add<&Price> for &Price {
    type Output = Price;
    fn add(self, rhs: &Price) -> Price {
        match (self, rhs) {
            (Price::Finite(a), Price::Finite(b)) => Price::Finite(a + b),
            _ => Price::Infinite,
        }
    }
}

impl AddAssign<Price> for Price {
    fn add_assign(&mut self, rhs: Price) {
        *self = &*self + &rhs;
    }
}

/// Scales a price by a non-negative rational, with the convention 0 * inf = 0.
impl Mul<&Rational> for &Price {
    type Output = Price;
    fn mul(self, rhs: &Rational) -> Price {
        debug_assert!(!rhs.is_negative());
        match self {
            Price::Finite(a) => Price::Finite(a * rhs),
            Price::Infinite => {
                if rhs.is_zero() {
                    Price::zero()
                } else {
                    Price::Infinite
                }
            }
        }
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Price::Finite(r) => write!(f, "{}", format_rational(r)),
            Price::Infinite => write!(f, "inf"),
        }
    }
}

/// Parses a price: rational literal or "inf".
pub fn parse_price(s: &str) -> Result<Price, ParseRationalError> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("inf") || t == "∞" {
        Ok(Price::Infinite)
    } else {
        parse_rational(t).map(Price::Finite)
    }
}

/// Exact dot product of a price vector with non-negative rational weights
/// (0 * inf = 0).
pub fn price_dot(prices: &[Price], weights: &[Rational]) -> Price {
    debug_assert_eq!(prices.len(), weights.len());
    let mut acc = Price::zero();
    for (p, w) in prices.iter().zip(weights) {
        acc += p * w;
    }
    acc
}

/// Decides the order of a rational r against ln(n) for an integer n >= 2,
/// using interval refinements of the atanh series. ln(n) is irrational for
/// integer n >= 2, so the comparison always separates.
pub fn cmp_rational_vs_ln(r: &Rational, n: u64) -> Ordering {
    assert!(n >= 2, "ln comparison needs n >= 2");
    if r.is_negative() || r.is_zero() {
        return Ordering::Less;
    }
    // ln(n) = 2 * atanh(z) with z = (n-1)/(n+1); partial sums are lower
    // bounds, and the geometric tail bound gives an upper bound.
    let z = Rational::new(BigInt::from(n - 1), BigInt::from(n + 1));
    let z2 = &z * &z;
    let mut term = z.clone(); // z^(2k+1)
    let mut lower = Rational::zero();
    for k in 0u32.. {
        lower += &term / rat(2 * k as i64 + 1);
        term *= &z2;
        // tail <= term / ((2k+3) * (1 - z^2))
        let tail = &term / (rat(2 * k as i64 + 3) * (Rational::one() - &z2));
        let lo = &lower * rat(2);
        let hi = (&lower + &tail) * rat(2);
        if *r < lo {
            return Ordering::Less;
        }
        if *r > hi {
            return Ordering::Greater;
        }
        if k > 20_000 {
            // Unreachable: equality of a rational with ln(n) is impossible.
            panic!("ln comparison failed to separate after 20000 terms");
        }
    }
    unreachable!()
}
