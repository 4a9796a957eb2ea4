//! Homogeneous lifts `F = (F0, F1)` of degree-d endomorphisms of P¹.
//!
//! Coefficient vectors are indexed by the exponent of `T0`: entry `i` multiplies
//! `T0^i T1^(d-i)`, so `F0(T, 1)` has the same coefficient list as a polynomial in `T`.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{format_rational, parse_rational, Q};
use crate::berkovich::{canonicalize, ulog, BerkPoint, Scalar};
use crate::error::{domain, Error, Result};
use crate::graph::solve_dense;
use crate::par::{map_collect, Execution};
use crate::poly::{CPoly, QPoly};
use crate::valued_fields::Place;

#[derive(Debug, Clone, PartialEq)]
enum Coefficients {
    Rational([Vec<Q>; 2]),
    Complex([Vec<Complex64>; 2]),
}

/// Resultant value, exact for rational lifts.
#[derive(Debug, Clone, PartialEq)]
pub enum Resultant {
    Rational(Q),
    Complex(Complex64),
}

impl Resultant {
    pub fn is_zero(&self) -> bool {
        match self {
            Resultant::Rational(q) => q.is_zero(),
            Resultant::Complex(z) => z.norm() == 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousLift {
    d: usize,
    coeffs: Coefficients,
    complex: [Vec<Complex64>; 2],
    resultant: Resultant,
}

fn to_cx(v: &[Q]) -> Vec<Complex64> {
    v.iter().map(|c| Complex64::new(crate::arith::to_f64(c), 0.0)).collect()
}

impl HomogeneousLift {
    pub fn from_rational(f0: Vec<Q>, f1: Vec<Q>) -> Result<Self> {
        let d = check_shape(f0.len(), f1.len())?;
        let res = sylvester_resultant_q(&f0, &f1);
        if res.is_zero() {
            return domain("F0 and F1 share a projective root (resultant vanishes)");
        }
        let complex = [to_cx(&f0), to_cx(&f1)];
        Ok(HomogeneousLift { d, coeffs: Coefficients::Rational([f0, f1]), complex, resultant: Resultant::Rational(res) })
    }

    pub fn from_complex(f0: Vec<Complex64>, f1: Vec<Complex64>) -> Result<Self> {
        let d = check_shape(f0.len(), f1.len())?;
        let res = sylvester_resultant_c(&f0, &f1);
        let scale = f0.iter().chain(&f1).map(|c| c.norm()).fold(0.0, f64::max).powi(2 * d as i32);
        if res.norm() <= 1e-12 * scale {
            return domain("F0 and F1 share a projective root (resultant vanishes)");
        }
        let complex = [f0.clone(), f1.clone()];
        Ok(HomogeneousLift { d, coeffs: Coefficients::Complex([f0, f1]), complex, resultant: Resultant::Complex(res) })
    }

    /// Lift of the polynomial map `T ↦ P(T)`: `(T1^d P(T0/T1), T1^d)`.
    pub fn polynomial(p: &QPoly) -> Result<Self> {
        let d = p.degree().unwrap_or(0);
        if d < 2 {
            return domain("polynomial maps must have degree at least 2");
        }
        let f0 = (0..=d).map(|i| p.coeff(i)).collect();
        let mut f1 = vec![Q::zero(); d + 1];
        f1[0] = Q::one();
        HomogeneousLift::from_rational(f0, f1)
    }

    /// Lift of `T ↦ P(T)/Q(T)` with `d = max(deg P, deg Q)`.
    pub fn rational(num: &QPoly, den: &QPoly) -> Result<Self> {
        let d = num.degree().unwrap_or(0).max(den.degree().unwrap_or(0));
        let f0 = (0..=d).map(|i| num.coeff(i)).collect();
        let f1 = (0..=d).map(|i| den.coeff(i)).collect();
        HomogeneousLift::from_rational(f0, f1)
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn resultant(&self) -> &Resultant {
        &self.resultant
    }

    pub fn is_rational(&self) -> bool {
        matches!(self.coeffs, Coefficients::Rational(_))
    }

    pub fn rational_coeffs(&self) -> Option<&[Vec<Q>; 2]> {
        match &self.coeffs {
            Coefficients::Rational(c) => Some(c),
            Coefficients::Complex(_) => None,
        }
    }

    pub fn complex_coeffs(&self) -> &[Vec<Complex64>; 2] {
        &self.complex
    }

    /// `F0(T,1)` and `F1(T,1)`.
    pub fn dehomogenized(&self) -> Option<(QPoly, QPoly)> {
        self.rational_coeffs().map(|[a, b]| (QPoly::new(a.clone()), QPoly::new(b.clone())))
    }

    pub fn dehomogenized_complex(&self) -> (CPoly, CPoly) {
        (CPoly::new(self.complex[0].clone()), CPoly::new(self.complex[1].clone()))
    }

    /// `φ(T) = P(T)` with `F1 = c·T1^d`, when the map is polynomial in the T-chart.
    pub fn as_polynomial(&self) -> Option<QPoly> {
        let [f0, f1] = self.rational_coeffs()?;
        if f1.iter().skip(1).any(|c| !c.is_zero()) || f1[0].is_zero() {
            return None;
        }
        Some(QPoly::new(f0.clone()).scale(&f1[0].recip()))
    }

    pub fn eval_rational(&self, w: &[Q; 2]) -> Option<[Q; 2]> {
        let [f0, f1] = self.rational_coeffs()?;
        Some([eval_form(f0, w), eval_form(f1, w)])
    }

    pub fn eval_complex(&self, w: &[Complex64; 2]) -> [Complex64; 2] {
        [eval_form(&self.complex[0], w), eval_form(&self.complex[1], w)]
    }

    /// The map `S ↦ 1/φ(1/S)` in the chart at infinity.
    pub fn conjugate_by_inversion(&self) -> Result<Self> {
        let rev = |v: &[Q]| v.iter().rev().cloned().collect::<Vec<_>>();
        let revc = |v: &[Complex64]| v.iter().rev().cloned().collect::<Vec<_>>();
        match &self.coeffs {
            Coefficients::Rational([f0, f1]) => HomogeneousLift::from_rational(rev(f1), rev(f0)),
            Coefficients::Complex([f0, f1]) => HomogeneousLift::from_complex(revc(f1), revc(f0)),
        }
    }

    /// Polynomials `A, B, A', B'` of degree `d-1` with `A F0 + B F1 = T1^(2d-1)` and
    /// `A' F0 + B' F1 = T0^(2d-1)`, as coefficient vectors indexed like the lift.
    pub fn macaulay_cofactors(&self) -> Option<[Vec<Q>; 4]> {
        let [f0, f1] = self.rational_coeffs()?;
        let d = self.d;
        let n = 2 * d;
        // unknowns: a_0..a_{d-1}, b_0..b_{d-1}; equations: coefficient of T0^k, k < 2d
        let mut m = vec![vec![Q::zero(); n]; n];
        for j in 0..d {
            for (i, c) in f0.iter().enumerate() {
                m[i + j][j] = c.clone();
            }
            for (i, c) in f1.iter().enumerate() {
                m[i + j][d + j] = c.clone();
            }
        }
        let solve = |k: usize| {
            let mut rhs = vec![Q::zero(); n];
            rhs[k] = Q::one();
            solve_dense(m.clone(), rhs).ok()
        };
        let low = solve(0)?;
        let high = solve(n - 1)?;
        Some([low[..d].to_vec(), low[d..].to_vec(), high[..d].to_vec(), high[d..].to_vec()])
    }

    pub fn to_json(&self) -> MapJson {
        let entries = |i: usize| -> Vec<(CoeffJson, String)> {
            (0..=self.d)
                .filter_map(|k| {
                    let exp = format!("{},{}", k, self.d - k);
                    match &self.coeffs {
                        Coefficients::Rational(c) if !c[i][k].is_zero() => Some((CoeffJson::Text(format_rational(&c[i][k])), exp)),
                        Coefficients::Complex(c) if c[i][k] != Complex64::zero() => {
                            Some((CoeffJson::Complex { re: c[i][k].re, im: c[i][k].im }, exp))
                        }
                        _ => None,
                    }
                })
                .collect()
        };
        MapJson { d: self.d, f0: entries(0), f1: entries(1) }
    }

    pub fn from_json(json: &MapJson) -> Result<Self> {
        let d = json.d;
        if d < 2 {
            return domain("map degree must be at least 2");
        }
        let any_complex = json.f0.iter().chain(&json.f1).any(|(c, _)| matches!(c, CoeffJson::Complex { .. }));
        let mut rat = [vec![Q::zero(); d + 1], vec![Q::zero(); d + 1]];
        let mut cx = [vec![Complex64::zero(); d + 1], vec![Complex64::zero(); d + 1]];
        for (slot, terms) in [&json.f0, &json.f1].into_iter().enumerate() {
            for (c, exp) in terms {
                let k = parse_exponent(exp, d)?;
                match c {
                    CoeffJson::Complex { re, im } => cx[slot][k] += Complex64::new(*re, *im),
                    _ => {
                        let q = c.to_rational()?;
                        cx[slot][k] += Complex64::new(crate::arith::to_f64(&q), 0.0);
                        rat[slot][k] += q;
                    }
                }
            }
        }
        if any_complex {
            let [a, b] = cx;
            HomogeneousLift::from_complex(a, b)
        } else {
            let [a, b] = rat;
            HomogeneousLift::from_rational(a, b)
        }
    }
}

impl fmt::Display for HomogeneousLift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", serde_json::to_string(&self.to_json()).map_err(|_| fmt::Error)?)
    }
}

fn check_shape(a: usize, b: usize) -> Result<usize> {
    if a != b || a < 3 {
        return domain(format!("homogeneous forms need d+1 >= 3 coefficients each, got {a} and {b}"));
    }
    Ok(a - 1)
}

fn eval_form<C: Clone + num_traits::Num>(coeffs: &[C], w: &[C; 2]) -> C {
    let d = coeffs.len() - 1;
    let mut p0 = vec![C::one(); d + 1];
    let mut p1 = vec![C::one(); d + 1];
    for i in 1..=d {
        p0[i] = p0[i - 1].clone() * w[0].clone();
        p1[i] = p1[i - 1].clone() * w[1].clone();
    }
    coeffs
        .iter()
        .enumerate()
        .fold(C::zero(), |s, (i, c)| s + c.clone() * p0[i].clone() * p1[d - i].clone())
}

fn parse_exponent(s: &str, d: usize) -> Result<usize> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let parsed: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
    match parsed.as_deref() {
        Some([i, j]) if i + j == d => Ok(*i),
        _ => Err(Error::Parse(format!("exponent '{s}' is not 'i,j' with i+j={d}"))),
    }
}

/// Sylvester determinant of two coefficient vectors (low to high) of formal
/// degrees `a.len()-1` and `b.len()-1`.
fn sylvester_matrix<C: Clone + Zero>(a: &[C], b: &[C]) -> Vec<Vec<C>> {
    let (m, n) = (a.len() - 1, b.len() - 1);
    let size = m + n;
    let mut rows = vec![vec![C::zero(); size]; size];
    for r in 0..n {
        for (i, c) in a.iter().rev().enumerate() {
            rows[r][r + i] = c.clone();
        }
    }
    for r in 0..m {
        for (i, c) in b.iter().rev().enumerate() {
            rows[n + r][r + i] = c.clone();
        }
    }
    rows
}

fn determinant_q(mut m: Vec<Vec<Q>>) -> Q {
    let n = m.len();
    let mut det = Q::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return Q::zero();
        };
        if p != col {
            m.swap(p, col);
            det = -det;
        }
        let piv = m[col][col].clone();
        det *= piv.clone();
        for r in (col + 1)..n {
            if m[r][col].is_zero() {
                continue;
            }
            let f = &m[r][col] / &piv;
            for c in col..n {
                let t = &f * &m[col][c];
                m[r][c] -= t;
            }
        }
    }
    det
}

fn sylvester_resultant_q(a: &[Q], b: &[Q]) -> Q {
    determinant_q(sylvester_matrix(a, b))
}

fn sylvester_resultant_c(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let rows = sylvester_matrix(a, b);
    let n = rows.len();
    DMatrix::from_fn(n, n, |r, c| rows[r][c]).determinant()
}

/// Resultant of two polynomials at their actual degrees.
pub fn resultant_polys(f: &QPoly, g: &QPoly) -> Q {
    if f.is_zero() || g.is_zero() {
        return Q::zero();
    }
    if f.degree() == Some(0) && g.degree() == Some(0) {
        return Q::one();
    }
    sylvester_resultant_q(f.coeffs(), g.coeffs())
}

/// `φ(x)` for classical points, and for disk points when φ is a polynomial.
pub fn apply_point(place: &Place, f: &HomogeneousLift, x: &BerkPoint) -> Result<BerkPoint> {
    match x {
        BerkPoint::Infinity => {
            let d = f.d;
            match &f.coeffs {
                Coefficients::Rational([a, b]) if b[d].is_zero() => Ok(BerkPoint::Infinity),
                Coefficients::Rational([a, b]) => Ok(BerkPoint::rational(&a[d] / &b[d])),
                Coefficients::Complex([a, b]) if b[d] == Complex64::zero() => Ok(BerkPoint::Infinity),
                Coefficients::Complex([a, b]) => Ok(BerkPoint::Classical(Scalar::Cx(a[d] / b[d]))),
            }
        }
        BerkPoint::Classical(Scalar::Rat(z)) if f.is_rational() => {
            let [w0, w1] = f.eval_rational(&[z.clone(), Q::one()]).expect("rational lift");
            Ok(if w1.is_zero() { BerkPoint::Infinity } else { BerkPoint::rational(w0 / w1) })
        }
        BerkPoint::Classical(s) => {
            if !place.is_archimedean() {
                return domain("complex data only lives over archimedean places");
            }
            let [w0, w1] = f.eval_complex(&[s.to_complex(), Complex64::one()]);
            Ok(if w1 == Complex64::zero() { BerkPoint::Infinity } else { BerkPoint::Classical(Scalar::Cx(w0 / w1)) })
        }
        BerkPoint::Disk { center, logr } => {
            if place.is_archimedean() {
                return domain("disk points do not exist over archimedean places");
            }
            let p = f
                .as_polynomial()
                .ok_or_else(|| Error::Unsupported("disk transport needs a polynomial map (F1 = c·T1^d)".into()))?;
            let shifted = p.recenter(center);
            let mut best: Option<Q> = None;
            for (i, c) in shifted.coeffs().iter().enumerate().skip(1) {
                if let Some(l) = ulog(place, c)? {
                    let v = l + logr * Q::from_integer(i.into());
                    if best.as_ref().is_none_or(|b| v > *b) {
                        best = Some(v);
                    }
                }
            }
            let logr = best.ok_or_else(|| Error::Numeric("map is constant on the disk".into()))?;
            canonicalize(place, &BerkPoint::Disk { center: shifted.coeff(0), logr })
        }
    }
}

/// A point of P¹(C).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CxPoint {
    Finite(Complex64),
    Infinity,
}

impl CxPoint {
    pub fn finite(re: f64, im: f64) -> Self {
        CxPoint::Finite(Complex64::new(re, im))
    }

    pub fn to_berk(self) -> BerkPoint {
        match self {
            CxPoint::Finite(z) => BerkPoint::Classical(Scalar::Cx(z)),
            CxPoint::Infinity => BerkPoint::Infinity,
        }
    }

    fn sort_key(&self) -> (f64, f64) {
        match self {
            CxPoint::Finite(z) => (z.re, z.im),
            CxPoint::Infinity => (f64::INFINITY, f64::INFINITY),
        }
    }

    pub fn cmp_key(&self, other: &Self) -> std::cmp::Ordering {
        let (a, b) = (self.sort_key(), other.sort_key());
        a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
    }
}

impl fmt::Display for CxPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CxPoint::Finite(z) => write!(f, "{}{:+}i", z.re, z.im),
            CxPoint::Infinity => write!(f, "inf"),
        }
    }
}

/// Preimages with multiplicity; multiplicities sum to `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreimageSet {
    pub points: Vec<(CxPoint, usize)>,
    /// Distinct roots closer than the separation threshold: multiplicities may be unreliable.
    pub flagged: bool,
}

impl PreimageSet {
    pub fn total_multiplicity(&self) -> usize {
        self.points.iter().map(|(_, m)| m).sum()
    }
}

const CLUSTER_RADIUS: f64 = 1e-7;
const SEPARATION_WARNING: f64 = 1e-4;

/// Roots of a complex polynomial from the eigenvalues of its companion matrix,
/// with one guarded Newton step each.
pub fn complex_roots(p: &CPoly) -> Result<Vec<Complex64>> {
    let Some(k) = p.degree() else {
        return domain("the zero polynomial has no isolated roots");
    };
    if k == 0 {
        return Ok(Vec::new());
    }
    let lead = p.coeff(k);
    let mut roots = if k == 1 {
        vec![-p.coeff(0) / lead]
    } else {
        let m = DMatrix::from_fn(k, k, |r, c| {
            if c == k - 1 {
                -p.coeff(r) / lead
            } else if r == c + 1 {
                Complex64::one()
            } else {
                Complex64::zero()
            }
        });
        let eig = m
            .schur()
            .eigenvalues()
            .ok_or_else(|| Error::Numeric("companion eigenvalue computation failed".into()))?;
        eig.iter().copied().collect::<Vec<_>>()
    };
    let dp = p.derivative();
    for r in roots.iter_mut() {
        let fr = p.eval(r);
        let dr = dp.eval(r);
        if dr.norm() > 0.0 {
            let cand = *r - fr / dr;
            if cand.is_finite() && p.eval(&cand).norm() < fr.norm() {
                *r = cand;
            }
        }
    }
    if roots.iter().any(|r| !r.is_finite()) {
        return Err(Error::Numeric("non-finite root".into()));
    }
    Ok(roots)
}

fn cluster(roots: Vec<Complex64>) -> (Vec<(Complex64, usize)>, bool) {
    let mut groups: Vec<(Complex64, Vec<Complex64>)> = Vec::new();
    for r in roots {
        match groups.iter_mut().find(|(c, _)| (*c - r).norm() <= CLUSTER_RADIUS * (1.0 + c.norm())) {
            Some((c, members)) => {
                members.push(r);
                *c = members.iter().sum::<Complex64>() / members.len() as f64;
            }
            None => groups.push((r, vec![r])),
        }
    }
    let mut flagged = false;
    for i in 0..groups.len() {
        for j in (i + 1)..groups.len() {
            if (groups[i].0 - groups[j].0).norm() <= SEPARATION_WARNING * (1.0 + groups[i].0.norm()) {
                flagged = true;
            }
        }
    }
    (groups.into_iter().map(|(c, m)| (c, m.len())).collect(), flagged)
}

/// Solutions of `φ(z) = a` in P¹(C), counted with multiplicity.
pub fn preimages_arch(f: &HomogeneousLift, a: CxPoint) -> Result<PreimageSet> {
    let (f0, f1) = f.dehomogenized_complex();
    let h = match a {
        CxPoint::Finite(a) => f0.sub(&f1.scale(&a)),
        CxPoint::Infinity => f1,
    };
    let k = h.degree().ok_or_else(|| Error::Numeric("preimage equation vanishes identically".into()))?;
    let (mut groups, flagged) = cluster(complex_roots(&h)?);
    groups.sort_by(|a, b| CxPoint::Finite(a.0).cmp_key(&CxPoint::Finite(b.0)));
    let mut points: Vec<(CxPoint, usize)> = groups.into_iter().map(|(z, m)| (CxPoint::Finite(z), m)).collect();
    if f.d > k {
        points.push((CxPoint::Infinity, f.d - k));
    }
    Ok(PreimageSet { points, flagged })
}

/// `φ(z)` on P¹(C).
pub fn apply_cx(f: &HomogeneousLift, z: CxPoint) -> CxPoint {
    let w = match z {
        CxPoint::Finite(z) => f.eval_complex(&[z, Complex64::one()]),
        CxPoint::Infinity => f.eval_complex(&[Complex64::one(), Complex64::zero()]),
    };
    if w[1] == Complex64::zero() {
        CxPoint::Infinity
    } else {
        CxPoint::Finite(w[0] / w[1])
    }
}

/// `(φ_* f)(x') = Σ_{φ(x) = x'} deg_x(φ) f(x)`.
pub fn pushforward_values(f: &HomogeneousLift, func: impl Fn(CxPoint) -> f64, target: CxPoint) -> Result<f64> {
    let pre = preimages_arch(f, target)?;
    Ok(pre.points.iter().map(|(x, m)| *m as f64 * func(*x)).sum())
}

/// Pushforward at many targets.
pub fn pushforward_batch<F>(exec: Execution, f: &HomogeneousLift, func: F, targets: &[CxPoint]) -> Result<Vec<f64>>
where
    F: Fn(CxPoint) -> f64 + Sync + Send,
{
    map_collect(exec, targets, |t| pushforward_values(f, &func, *t)).into_iter().collect()
}

// ---------------------------------------------------------------------------
// JSON: {"d":2,"F0":[["1","2,0"],["c","0,2"]],"F1":[...]}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffJson {
    Text(String),
    Number(f64),
    Complex { re: f64, im: f64 },
}

impl CoeffJson {
    fn to_rational(&self) -> Result<Q> {
        match self {
            CoeffJson::Text(s) => parse_rational(s),
            CoeffJson::Number(x) => parse_rational(&x.to_string()),
            CoeffJson::Complex { .. } => Err(Error::Parse("complex coefficient in a rational map".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapJson {
    pub d: usize,
    #[serde(rename = "F0")]
    pub f0: Vec<(CoeffJson, String)>,
    #[serde(rename = "F1")]
    pub f1: Vec<(CoeffJson, String)>,
}

pub fn parse_map(json: &str) -> Result<HomogeneousLift> {
    let m: MapJson = serde_json::from_str(json)?;
    HomogeneousLift::from_json(&m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{q, qf};
    use crate::berkovich::{flow_point, same_point};
    use crate::valued_fields::flow_place;
    use proptest::prelude::*;

    fn z2() -> HomogeneousLift {
        HomogeneousLift::polynomial(&QPoly::from_ints(&[0, 0, 1])).unwrap()
    }

    fn near(a: CxPoint, re: f64, im: f64) -> bool {
        matches!(a, CxPoint::Finite(z) if (z.re - re).abs() < 1e-9 && (z.im - im).abs() < 1e-9)
    }

    #[test]
    fn resultant_examples() {
        assert_eq!(resultant_polys(&QPoly::from_ints(&[0, 0, 1]), &QPoly::from_ints(&[1])), q(1));
        assert_eq!(resultant_polys(&QPoly::from_ints(&[-1, 0, 1]), &QPoly::from_ints(&[0, 2])), q(-4));
        assert_eq!(resultant_polys(&QPoly::from_ints(&[0, 0, 1]), &QPoly::from_ints(&[0, 1])), q(0));
        assert_eq!(z2().resultant(), &Resultant::Rational(q(1)));
        assert!(HomogeneousLift::from_rational(vec![q(0), q(0), q(1)], vec![q(0), q(1), q(0)]).is_err());
        // common root at infinity
        assert!(HomogeneousLift::from_rational(vec![q(1), q(1), q(0)], vec![q(1), q(0), q(0)]).is_err());
    }

    #[test]
    fn complex_resultant_matches_rational() {
        let f = HomogeneousLift::polynomial(&QPoly::from_ints(&[3, 1, 2])).unwrap();
        let [a, b] = f.complex_coeffs().clone();
        let g = HomogeneousLift::from_complex(a, b).unwrap();
        let (Resultant::Rational(r), Resultant::Complex(c)) = (f.resultant(), g.resultant()) else { panic!() };
        assert!((crate::arith::to_f64(r) - c.re).abs() < 1e-9 && c.im.abs() < 1e-9);
    }

    #[test]
    fn disk_images() {
        let p = Place::padic(3, q(1)).unwrap();
        assert_eq!(apply_point(&p, &z2(), &BerkPoint::gauss()).unwrap(), BerkPoint::gauss());
        assert_eq!(apply_point(&p, &z2(), &BerkPoint::disk(q(0), qf(-1, 2))).unwrap(), BerkPoint::disk(q(0), q(-1)));
        let good = HomogeneousLift::polynomial(&QPoly::from_ints(&[3, 0, 1])).unwrap();
        let img = apply_point(&p, &good, &BerkPoint::gauss()).unwrap();
        assert!(same_point(&p, &img, &BerkPoint::gauss()).unwrap());
        let nonpoly = HomogeneousLift::rational(&QPoly::from_ints(&[1, 0, 1]), &QPoly::from_ints(&[0, 1])).unwrap();
        assert!(matches!(apply_point(&p, &nonpoly, &BerkPoint::gauss()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn classical_images() {
        let p = Place::complex();
        let f = HomogeneousLift::rational(&QPoly::from_ints(&[1, 0, 1]), &QPoly::from_ints(&[0, 1])).unwrap();
        assert_eq!(apply_point(&p, &f, &BerkPoint::rational(q(0))).unwrap(), BerkPoint::Infinity);
        assert_eq!(apply_point(&p, &f, &BerkPoint::rational(q(2))).unwrap(), BerkPoint::rational(qf(5, 2)));
        assert_eq!(apply_point(&p, &f, &BerkPoint::Infinity).unwrap(), BerkPoint::Infinity);
        assert_eq!(apply_cx(&f, CxPoint::finite(0.0, 0.0)), CxPoint::Infinity);
    }

    #[test]
    fn preimage_examples() {
        let pre = preimages_arch(&z2(), CxPoint::finite(4.0, 0.0)).unwrap();
        assert_eq!(pre.points.len(), 2);
        assert!(near(pre.points[0].0, -2.0, 0.0) && near(pre.points[1].0, 2.0, 0.0));
        let pre = preimages_arch(&z2(), CxPoint::finite(0.0, 0.0)).unwrap();
        assert_eq!(pre.points.len(), 1);
        assert_eq!(pre.points[0].1, 2);
        assert!(near(pre.points[0].0, 0.0, 0.0));
        let f = HomogeneousLift::polynomial(&QPoly::from_ints(&[-1, 0, 1])).unwrap();
        let pre = preimages_arch(&f, CxPoint::finite(-1.0, 0.0)).unwrap();
        assert_eq!(pre.points.len(), 1);
        assert_eq!(pre.points[0].1, 2);
        let pre = preimages_arch(&z2(), CxPoint::Infinity).unwrap();
        assert_eq!(pre.points, vec![(CxPoint::Infinity, 2)]);
    }

    #[test]
    fn pushforward_examples() {
        let t = CxPoint::finite(4.0, 0.0);
        assert!((pushforward_values(&z2(), |_| 1.0, t).unwrap() - 2.0).abs() < 1e-12);
        let re = |x: CxPoint| if let CxPoint::Finite(z) = x { z.re } else { 0.0 };
        assert!(pushforward_values(&z2(), re, t).unwrap().abs() < 1e-9);
        let abs = |x: CxPoint| if let CxPoint::Finite(z) = x { z.norm() } else { 0.0 };
        assert!((pushforward_values(&z2(), abs, t).unwrap() - 4.0).abs() < 1e-9);
        let batch = pushforward_batch(Execution::Parallel, &z2(), |_| 1.0, &[t, CxPoint::finite(0.0, 1.0)]).unwrap();
        assert_eq!(batch, vec![2.0, 2.0]);
    }

    #[test]
    fn macaulay_identities() {
        let f = HomogeneousLift::rational(&QPoly::from_ints(&[2, -1, 3]), &QPoly::from_ints(&[1, 1, 0])).unwrap();
        let [a, b, a2, b2] = f.macaulay_cofactors().unwrap();
        let [f0, f1] = f.rational_coeffs().unwrap();
        let combine = |a: &[Q], b: &[Q]| QPoly::new(a.to_vec()).mul(&QPoly::new(f0.clone())).add(&QPoly::new(b.to_vec()).mul(&QPoly::new(f1.clone())));
        assert_eq!(combine(&a, &b), QPoly::from_ints(&[1]));
        assert_eq!(combine(&a2, &b2), QPoly::from_ints(&[0, 0, 0, 1]));
    }

    #[test]
    fn map_json() {
        let m = parse_map(r#"{"d":2,"F0":[["1","2,0"],["3","0,2"]],"F1":[["1","0,2"]]}"#).unwrap();
        assert_eq!(m.as_polynomial().unwrap(), QPoly::from_ints(&[3, 0, 1]));
        let back = HomogeneousLift::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let c = parse_map(r#"{"d":2,"F0":[[{"re":1,"im":0},"2,0"],[{"re":0,"im":1},"0,2"]],"F1":[["1","0,2"]]}"#).unwrap();
        assert!(!c.is_rational());
        assert!(parse_map(r#"{"d":2,"F0":[["1","3,0"]],"F1":[["1","0,2"]]}"#).is_err());
        assert!(parse_map(r#"{"d":2,"F0":[["c","2,0"]],"F1":[["1","0,2"]]}"#).is_err());
    }

    fn small_poly() -> impl Strategy<Value = QPoly> {
        (prop::collection::vec((-9i64..9, 1i64..5), 2..4), 1i64..4).prop_map(|(mut c, lead)| {
            c.push((lead, 1));
            QPoly::new(c.into_iter().map(|(n, d)| qf(n, d)).collect())
        })
    }

    proptest! {
        #[test]
        fn preimage_multiplicities_sum_to_degree(p in small_poly(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let f = HomogeneousLift::polynomial(&p).unwrap();
            let pre = preimages_arch(&f, CxPoint::finite(re, im)).unwrap();
            prop_assert_eq!(pre.total_multiplicity(), f.degree());
            for (x, _) in &pre.points {
                if let CxPoint::Finite(z) = apply_cx(&f, *x) {
                    prop_assert!((z - Complex64::new(re, im)).norm() < 1e-6 * (1.0 + z.norm()));
                }
            }
        }

        #[test]
        fn disk_image_commutes_with_flow(p in small_poly(), c in -20i64..20, r in -3i64..3, n in 1i64..4) {
            let place = Place::padic(2, q(1)).unwrap();
            let f = HomogeneousLift::polynomial(&p).unwrap();
            let x = BerkPoint::disk(q(c), q(r));
            let e = qf(1, n);
            let lhs = apply_point(&flow_place(&place, &e).unwrap(), &f, &flow_point(&x, &e).unwrap()).unwrap();
            let rhs = flow_point(&apply_point(&place, &f, &x).unwrap(), &e).unwrap();
            prop_assert!(same_point(&flow_place(&place, &e).unwrap(), &lhs, &rhs).unwrap());
        }
    }
}
