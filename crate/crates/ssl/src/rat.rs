//! Exact rational scalars and the small amount of integer geometry the
//! admissibility predicates need (floors, nearest integers, parity).
//!
//! Every predicate downstream of this module is a finite set of exact
//! (in)equalities, so all comparisons here are performed on
//! arbitrary-precision rationals; floats only appear through explicit
//! conversion for the numerical layer.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

use crate::error::{Result, SslError};

/// Exact rational scalar used throughout the combinatorial layer.
pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parse a rational from a `"p/q"` or `"p"` string.
pub fn parse_rat(s: &str) -> Result<Rat> {
    s.trim()
        .parse::<Rat>()
        .map_err(|e| SslError::Format(format!("cannot parse rational {s:?}: {e}")))
}

/// Render as `"p/q"` (or `"p"` when the denominator is 1).
pub fn format_rat(r: &Rat) -> String {
    r.to_string()
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

pub fn is_integer(r: &Rat) -> bool {
    r.is_integer()
}

/// `true` when `r` is a positive integer (an element of ℕ = {1, 2, ...}).
pub fn is_positive_integer(r: &Rat) -> bool {
    r.is_integer() && r.is_positive()
}

/// Largest integer ≤ r.
pub fn floor_int(r: &Rat) -> BigInt {
    r.floor().to_integer()
}

/// Smallest integer ≥ r.
pub fn ceil_int(r: &Rat) -> BigInt {
    r.ceil().to_integer()
}

/// Nearest integer with halves rounded up: ⌊r + 1/2⌋.
pub fn round_half_up(r: &Rat) -> BigInt {
    floor_int(&(r + rat(1, 2)))
}

/// Second-nearest integer: the integer on the other side of `r` from
/// [`round_half_up`]. For an exact integer the convention is `r + 1`.
pub fn second_nearest(r: &Rat) -> BigInt {
    let n = round_half_up(r);
    let nr = Rat::from_integer(n.clone());
    if *r >= nr {
        n + BigInt::one()
    } else {
        n - BigInt::one()
    }
}

/// |r − n| for an integer n.
pub fn dist_to_int(r: &Rat, n: &BigInt) -> Rat {
    (r - Rat::from_integer(n.clone())).abs()
}

pub fn is_odd(n: &BigInt) -> bool {
    use num_integer::Integer;
    n.is_odd()
}

pub fn big_to_i64(n: &BigInt) -> i64 {
    n.to_i64().expect("integer out of i64 range")
}
