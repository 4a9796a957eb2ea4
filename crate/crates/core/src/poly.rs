//! Dense univariate polynomials, coefficients stored from degree 0 upward.

use std::fmt;

use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::arith::{format_rational, Q};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Poly<C> {
    coeffs: Vec<C>,
}

pub type QPoly = Poly<Q>;
pub type CPoly = Poly<Complex64>;

impl<C> Poly<C>
where
    C: Clone + Zero + One + PartialEq,
{
    pub fn new(mut coeffs: Vec<C>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: C) -> Self {
        Poly::new(vec![c])
    }

    /// The coordinate `T`.
    pub fn x() -> Self {
        Poly::new(vec![C::zero(), C::one()])
    }

    /// `T - a`.
    pub fn linear_root(a: C) -> Self
    where
        C: std::ops::Neg<Output = C>,
    {
        Poly::new(vec![-a, C::one()])
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeff(&self, i: usize) -> C {
        self.coeffs.get(i).cloned().unwrap_or_else(C::zero)
    }

    pub fn eval(&self, x: &C) -> C {
        let mut acc = C::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x.clone() + c.clone();
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self
    where
        C: std::ops::Sub<Output = C>,
    {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|i| self.coeff(i) - other.coeff(i)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![C::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Poly::new(out)
    }

    pub fn scale(&self, s: &C) -> Self {
        Poly::new(self.coeffs.iter().map(|c| c.clone() * s.clone()).collect())
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Poly::constant(C::one());
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Coefficients of `P(a + T)` (Taylor shift by repeated synthetic division).
    pub fn recenter(&self, a: &C) -> Self {
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n.saturating_sub(1)).rev() {
                let t = c[j + 1].clone() * a.clone();
                c[j] = c[j].clone() + t;
            }
        }
        Poly::new(c)
    }

    /// `T^deg P(1/T)` for a chosen formal degree `deg >= degree(P)`.
    pub fn reversed(&self, deg: usize) -> Self {
        let mut c = vec![C::zero(); deg + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            c[deg - i] = a.clone();
        }
        Poly::new(c)
    }

    pub fn derivative(&self) -> Self {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| (0..i).fold(C::zero(), |acc, _| acc + c.clone()))
                .collect(),
        )
    }
}

impl QPoly {
    pub fn from_ints(c: &[i64]) -> Self {
        Poly::new(c.iter().map(|&v| crate::arith::q(v)).collect())
    }

    pub fn to_complex(&self) -> CPoly {
        Poly::new(self.coeffs.iter().map(|c| Complex64::new(crate::arith::to_f64(c), 0.0)).collect())
    }
}

impl fmt::Display for QPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => format_rational(c),
                1 => format!("({})T", format_rational(c)),
                _ => format!("({})T^{i}", format_rational(c)),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::q;

    #[test]
    fn recenter_matches_evaluation() {
        let p = QPoly::from_ints(&[9, 3, 1]);
        let shifted = p.recenter(&q(2));
        // P(2 + T) = 19 + 7T + T^2
        assert_eq!(shifted, QPoly::from_ints(&[19, 7, 1]));
        for t in -3..4 {
            assert_eq!(shifted.eval(&q(t)), p.eval(&(q(2) + q(t))));
        }
    }

    #[test]
    fn arithmetic() {
        let a = QPoly::from_ints(&[1, 1]);
        let b = QPoly::from_ints(&[-1, 1]);
        assert_eq!(a.mul(&b), QPoly::from_ints(&[-1, 0, 1]));
        assert_eq!(a.sub(&a), QPoly::zero());
        assert_eq!(a.pow(2), QPoly::from_ints(&[1, 2, 1]));
        assert_eq!(QPoly::from_ints(&[1, 2]).reversed(2), QPoly::from_ints(&[0, 2, 1]));
        assert_eq!(QPoly::from_ints(&[5, 0, 3]).derivative(), QPoly::from_ints(&[0, 6]));
    }
}
