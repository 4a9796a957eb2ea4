//! Exact rational helpers shared by the ultrametric code paths.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"a/b"`, `"a"`, or a finite decimal such as `"-0.125"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let int_part: BigInt = match int.trim_start_matches(['-', '+']) {
            "" => BigInt::zero(),
            t => t.parse().map_err(|_| bad())?,
        };
        if !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let frac_part: BigInt = if frac.is_empty() {
            BigInt::zero()
        } else {
            frac.parse().map_err(|_| bad())?
        };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let mag = Q::new(int_part * &scale + frac_part, scale);
        return Ok(if neg { -mag } else { mag });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Q::from_integer(n))
}

pub fn format_rational(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Best rational approximation of `x` with denominator at most `max_den`
/// (continued-fraction convergents and semiconvergents).
pub fn snap_to_rational(x: f64, max_den: u64) -> Result<Q> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("cannot snap non-finite value {x}")));
    }
    let neg = x < 0.0;
    let mut v = x.abs();
    let (mut p0, mut q0, mut p1, mut q1) = (0u128, 1u128, 1u128, 0u128);
    let max_den = max_den as u128;
    for _ in 0..64 {
        let a = v.floor();
        if a > 1e30 {
            break;
        }
        let a_int = a as u128;
        let p2 = a_int * p1 + p0;
        let q2 = a_int * q1 + q0;
        if q2 > max_den {
            // largest semiconvergent that still fits
            let k = (max_den - q0) / q1;
            let ps = k * p1 + p0;
            let qs = k * q1 + q0;
            let cand = ps as f64 / qs as f64;
            let conv = p1 as f64 / q1 as f64;
            if (cand - x.abs()).abs() < (conv - x.abs()).abs() {
                p1 = ps;
                q1 = qs;
            }
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let frac = v - a;
        if frac < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    let r = Q::new(BigInt::from(p1), BigInt::from(q1));
    Ok(if neg { -r } else { r })
}

/// p-adic valuation of a nonzero integer.
pub fn int_valuation(n: &BigInt, p: u64) -> i64 {
    debug_assert!(!n.is_zero());
    let p = BigInt::from(p);
    let mut n = n.abs();
    let mut v = 0;
    loop {
        let (quo, rem) = n.div_rem(&p);
        if !rem.is_zero() {
            return v;
        }
        n = quo;
        v += 1;
    }
}

/// p-adic valuation of a nonzero rational.
pub fn valuation(x: &Q, p: u64) -> i64 {
    int_valuation(x.numer(), p) - int_valuation(x.denom(), p)
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut k = 2u64;
    while k * k <= p {
        if p.is_multiple_of(k) {
            return false;
        }
        k += 1;
    }
    true
}

/// Natural logarithm of |n| for arbitrarily large integers; `-inf` for zero.
pub fn ln_abs_bigint(n: &BigInt) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = n.bits();
    if bits < 1000 {
        return n.abs().to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 60;
    let top = (n.abs() >> shift).to_f64().unwrap_or(1.0);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ln_abs_rational(x: &Q) -> f64 {
    ln_abs_bigint(x.numer()) - ln_abs_bigint(x.denom())
}

pub fn to_f64(x: &Q) -> f64 {
    match x.to_f64() {
        Some(v) if v.is_finite() => v,
        _ => {
            let sign = if x.numer().sign() == Sign::Minus { -1.0 } else { 1.0 };
            sign * ln_abs_rational(x).exp()
        }
    }
}

/// Representative of `x` modulo `p^m` in the ring Z_(p)[1/p]: returns the unique
/// rational `y = a / p^s` with `0 <= a < p^(m+s)` and `v_p(x - y) >= m`.
pub fn padic_truncate(x: &Q, p: u64, m: i64) -> Q {
    if x.is_zero() {
        return Q::zero();
    }
    let pb = BigInt::from(p);
    let s = (-valuation(x, p)).max(0);
    // x * p^s lies in Z_(p)
    let scaled = x * Q::from_integer(pb.pow(s as u32));
    let e = m + s;
    if e <= 0 {
        return Q::zero();
    }
    let modulus = pb.pow(e as u32);
    let num = scaled.numer().mod_floor(&modulus);
    let den = scaled.denom().mod_floor(&modulus);
    let inv = mod_inverse(&den, &modulus).expect("denominator is a p-adic unit");
    let a = (num * inv).mod_floor(&modulus);
    Q::new(a, pb.pow(s as u32))
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let g = a.extended_gcd(m);
    if !g.gcd.is_one() {
        return None;
    }
    Some(g.x.mod_floor(m))
}

/// Smallest integer `>= x`.
pub fn ceil_i64(x: &Q) -> i64 {
    x.ceil().to_integer().to_i64().expect("exponent fits in i64")
}

pub fn q_max(a: &Q, b: &Q) -> Q {
    if a >= b {
        a.clone()
    } else {
        b.clone()
    }
}

pub fn q_pow_i(base: &Q, exp: i64) -> Q {
    if exp >= 0 {
        num_traits::pow(base.clone(), exp as usize)
    } else {
        num_traits::pow(base.recip(), (-exp) as usize)
    }
}

pub fn is_positive(x: &Q) -> bool {
    x.is_positive()
}
