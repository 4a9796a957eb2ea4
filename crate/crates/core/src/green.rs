//! Escape-rate potentials.
//!
//! For a lift `F` of degree `d` and a lifted point `ẑ` let
//! `g(ẑ) = log‖F(ẑ)‖ - d log‖ẑ‖` with the max norm. The iterated metrics give
//! `λ_n(x) = -Σ_{k<n} d^-(k+1) g(φ^k x)`, which converges to `λ_φ` with
//! `|λ_φ - λ_n| <= G / (d^n (d-1))` whenever `|g| <= G`.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};

use crate::arith::{to_f64, Q};
use crate::berkovich::{canonicalize, constant_on_disk, disk_contains, eval_log_abs, ulog, BerkPoint, Scalar};
use crate::error::{domain, Error, Result};
use crate::maps::{apply_point, HomogeneousLift};
use crate::par::{kahan_sum, map_collect, Execution};
use crate::poly::QPoly;
use crate::valued_fields::{abs_log, LogMag, Place};

/// `-log‖T0‖_st = max(-log|T|, 0)`.
pub fn standard_potential(place: &Place, x: &BerkPoint) -> Result<LogMag> {
    let t = eval_log_abs(place, x, &QPoly::x())?;
    let zero = LogMag::zero_in(place.log_unit());
    Ok(t.neg().max(&zero))
}

/// A certified bound `|g| <= value`.
#[derive(Debug, Clone, PartialEq)]
pub struct GBound {
    pub value: LogMag,
    /// Sampled rather than proven.
    pub heuristic: bool,
}

impl GBound {
    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }
}

fn abs_mag(x: &LogMag) -> LogMag {
    x.max(&x.neg())
}

/// Bound on `|g|` from the coefficient size above and the Macaulay cofactors below.
pub fn g_bound(place: &Place, f: &HomogeneousLift) -> Result<GBound> {
    match (f.rational_coeffs(), place.is_archimedean()) {
        (Some([f0, f1]), true) => {
            let eps = place.eps_f64();
            let sum = |v: &[Q]| v.iter().map(|c| to_f64(&c.abs())).sum::<f64>();
            // |F_j(z)| <= Σ_i |c_ji| ‖z‖^d
            let upper = sum(f0).max(sum(f1)).ln();
            let cof = f.macaulay_cofactors().ok_or_else(|| Error::Numeric("Macaulay system is singular".into()))?;
            let k = (sum(&cof[0]) + sum(&cof[1])).max(sum(&cof[2]) + sum(&cof[3]));
            let lower = -k.ln();
            Ok(GBound { value: LogMag::Float(eps * upper.abs().max(lower.abs())), heuristic: false })
        }
        (Some([f0, f1]), false) => {
            let max_log = |v: &mut dyn Iterator<Item = &Q>| -> Result<LogMag> {
                let mut best = LogMag::NegInf;
                for c in v {
                    let l = abs_log(place, c);
                    if l == LogMag::PosInf {
                        return domain(format!("coefficient {c} is not integral enough for {place}"));
                    }
                    best = best.max(&l);
                }
                Ok(best)
            };
            let upper = max_log(&mut f0.iter().chain(f1))?;
            let cof = f.macaulay_cofactors().ok_or_else(|| Error::Numeric("Macaulay system is singular".into()))?;
            let lower = max_log(&mut cof.iter().flatten())?.neg();
            if !upper.is_finite() || !lower.is_finite() {
                return Err(Error::Numeric(format!("lift has bad reduction of infinite depth at {place}")));
            }
            Ok(GBound { value: abs_mag(&upper).max(&abs_mag(&lower)), heuristic: false })
        }
        (None, true) => Ok(GBound { value: LogMag::Float(2.0 * sampled_g_sup(place, f)), heuristic: true }),
        (None, false) => domain("complex coefficients only make sense over archimedean places"),
    }
}

const SPHERE_SAMPLES: usize = 2048;

/// `sup |g|` over points `[z:1]` and `[1:w]` with `|z|, |w| <= 1`.
fn sampled_g_sup(place: &Place, f: &HomogeneousLift) -> f64 {
    let eps = place.eps_f64();
    let per_chart = SPHERE_SAMPLES / 2;
    let rings = 16;
    let angles = per_chart / rings;
    let mut sup: f64 = 0.0;
    for chart in 0..2 {
        for r in 0..rings {
            let rad = (r + 1) as f64 / rings as f64;
            for a in 0..angles {
                let th = std::f64::consts::TAU * a as f64 / angles as f64;
                let z = Complex64::from_polar(rad, th);
                let w = if chart == 0 { [z, Complex64::one()] } else { [Complex64::one(), z] };
                sup = sup.max(g_complex(f, &w).abs());
            }
        }
        let w = if chart == 0 { [Complex64::zero(), Complex64::one()] } else { [Complex64::one(), Complex64::zero()] };
        sup = sup.max(g_complex(f, &w).abs());
    }
    eps * sup
}

/// A point of P¹(C) as `[u : 1]` (`at_infinity = false`) or `[1 : u]`, with `|u| <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ChartPoint {
    at_infinity: bool,
    u: Complex64,
}

impl ChartPoint {
    fn from_lift(w: &[Complex64; 2]) -> Result<Self> {
        if w[0].norm() > w[1].norm() {
            Ok(ChartPoint { at_infinity: true, u: w[1] / w[0] })
        } else if w[1].norm() > 0.0 {
            Ok(ChartPoint { at_infinity: false, u: w[0] / w[1] })
        } else {
            domain("the zero vector is not a lift of a point")
        }
    }

    /// Constant term and remainder of a form evaluated in this chart.
    fn split(&self, coeffs: &[Complex64]) -> (Complex64, Complex64) {
        let ordered: Vec<Complex64> = if self.at_infinity { coeffs.iter().rev().copied().collect() } else { coeffs.to_vec() };
        // Σ_{k>=1} ordered[k] u^k by Horner
        let rest = ordered[1..].iter().rev().fold(Complex64::zero(), |acc, c| acc * self.u + c) * self.u;
        (ordered[0], rest)
    }
}

/// `log|c + r|`, accurate when `|r| << |c|`.
fn log_abs_sum(c: Complex64, r: Complex64) -> f64 {
    if c == Complex64::zero() {
        return r.norm().ln();
    }
    let q = r / c;
    c.norm().ln() + 0.5 * (2.0 * q.re + q.norm_sqr()).ln_1p()
}

/// `g` at ε = 1 together with the image point.
fn g_step(f: &HomogeneousLift, x: &ChartPoint) -> Result<(f64, ChartPoint)> {
    let [f0, f1] = f.complex_coeffs();
    let (c0, r0) = x.split(f0);
    let (c1, r1) = x.split(f1);
    let g = log_abs_sum(c0, r0).max(log_abs_sum(c1, r1));
    if !g.is_finite() {
        return Err(Error::Numeric("lifted orbit left the representable range".into()));
    }
    Ok((g, ChartPoint::from_lift(&[c0 + r0, c1 + r1])?))
}

/// `g` for a complex lift at ε = 1.
fn g_complex(f: &HomogeneousLift, w: &[Complex64; 2]) -> f64 {
    match ChartPoint::from_lift(w).and_then(|x| g_step(f, &x)) {
        Ok((g, _)) => g,
        Err(_) => f64::NAN,
    }
}

fn complex_lift(x: &BerkPoint) -> Result<[Complex64; 2]> {
    match x {
        BerkPoint::Infinity => Ok([Complex64::one(), Complex64::zero()]),
        BerkPoint::Classical(s) => Ok([s.to_complex(), Complex64::one()]),
        BerkPoint::Disk { .. } => domain("disk points do not exist over archimedean places"),
    }
}

fn rational_lift(x: &BerkPoint) -> Option<[Q; 2]> {
    match x {
        BerkPoint::Infinity => Some([Q::one(), Q::zero()]),
        BerkPoint::Classical(Scalar::Rat(z)) => Some([z.clone(), Q::one()]),
        _ => None,
    }
}

fn ultra_norm(place: &Place, w: &[Q; 2]) -> LogMag {
    abs_log(place, &w[0]).max(&abs_log(place, &w[1]))
}

/// One-step deviation `g(x̂)`; homogeneous of degree 0 so it is a function of `x`.
pub fn deviation_g(place: &Place, f: &HomogeneousLift, x: &BerkPoint) -> Result<LogMag> {
    let d = Q::from_integer(BigInt::from(f.degree()));
    let g = if place.is_archimedean() {
        LogMag::Float(place.eps_f64() * g_complex(f, &complex_lift(x)?))
    } else if let Some(w) = rational_lift(x) {
        let fw = f.eval_rational(&w).ok_or_else(|| Error::Domain("complex lift at an ultrametric place".into()))?;
        ultra_norm(place, &fw).sub(&ultra_norm(place, &w).scale(&d))
    } else {
        let (f0, f1) = f.dehomogenized().ok_or_else(|| Error::Domain("complex lift at an ultrametric place".into()))?;
        let zero = LogMag::zero_in(place.log_unit());
        let fx = eval_log_abs(place, x, &f0)?.max(&eval_log_abs(place, x, &f1)?);
        fx.sub(&eval_log_abs(place, x, &QPoly::x())?.max(&zero).scale(&d))
    };
    if !g.is_finite() {
        return Err(Error::Numeric(format!("deviation is infinite at {x}: F0 and F1 share a root in this fiber")));
    }
    Ok(g)
}

/// Orbit state with the exact lift kept small by dividing through by a coordinate.
#[derive(Debug, Clone, PartialEq)]
enum Orbit {
    Exact(BerkPoint),
    Complex(ChartPoint),
}

const HEIGHT_LIMIT_BITS: u64 = 1 << 14;

fn height_bits(x: &BerkPoint) -> u64 {
    match x {
        BerkPoint::Classical(Scalar::Rat(z)) => z.numer().bits() + z.denom().bits(),
        BerkPoint::Disk { center, logr } => center.numer().bits() + center.denom().bits() + logr.numer().bits() + logr.denom().bits(),
        _ => 0,
    }
}

struct Stepper<'a> {
    place: &'a Place,
    f: &'a HomogeneousLift,
    d: Q,
}

impl<'a> Stepper<'a> {
    fn new(place: &'a Place, f: &'a HomogeneousLift) -> Self {
        Stepper { place, f, d: Q::from_integer(BigInt::from(f.degree())) }
    }

    fn start(&self, x: &BerkPoint) -> Result<Orbit> {
        if self.place.is_archimedean() {
            Ok(Orbit::Complex(ChartPoint::from_lift(&complex_lift(x)?)?))
        } else {
            Ok(Orbit::Exact(canonicalize(self.place, x)?))
        }
    }

    /// Returns `g` at the current state and advances it.
    fn step(&self, s: &Orbit) -> Result<(LogMag, Orbit)> {
        match s {
            Orbit::Complex(w) => {
                let (g, next) = g_step(self.f, w)?;
                Ok((LogMag::Float(self.place.eps_f64() * g), Orbit::Complex(next)))
            }
            Orbit::Exact(x) => {
                if height_bits(x) > HEIGHT_LIMIT_BITS {
                    return Err(Error::Numeric(format!("orbit height exceeded {HEIGHT_LIMIT_BITS} bits")));
                }
                let g = deviation_g(self.place, self.f, x)?;
                Ok((g, Orbit::Exact(apply_point(self.place, self.f, x)?)))
            }
        }
    }
}

/// `λ_n(x)`, exact in ultrametric fibers.
pub fn lambda_n(place: &Place, f: &HomogeneousLift, x: &BerkPoint, n: usize) -> Result<LogMag> {
    let st = Stepper::new(place, f);
    let mut s = st.start(x)?;
    let mut terms = Vec::with_capacity(n);
    let mut weight = Q::one();
    for _ in 0..n {
        let (g, next) = st.step(&s)?;
        weight /= &st.d;
        terms.push(g.scale(&weight));
        s = next;
    }
    Ok(sum_terms(place, terms).neg())
}

fn sum_terms(place: &Place, terms: Vec<LogMag>) -> LogMag {
    if place.is_archimedean() {
        LogMag::Float(kahan_sum(terms.iter().map(LogMag::to_f64)))
    } else {
        terms.iter().fold(LogMag::zero_in(place.log_unit()), |a, t| a.add(t))
    }
}

/// Result of [`lambda_limit`].
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaEstimate {
    pub value: LogMag,
    pub n_used: usize,
    pub certified_error: f64,
    pub heuristic: bool,
}

/// Iterations needed for `G / (d^n (d-1)) <= tol`.
pub fn iterations_for(gmax: f64, d: usize, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return domain("tolerance must be positive");
    }
    if gmax <= 0.0 {
        return Ok(0);
    }
    let mut n = 0;
    let mut err = gmax / (d as f64 - 1.0);
    while err > tol {
        err /= d as f64;
        n += 1;
        if n > 10_000 {
            return Err(Error::Numeric("tolerance unreachable".into()));
        }
    }
    Ok(n)
}

pub fn error_bound(gmax: f64, d: usize, n: usize) -> f64 {
    if gmax <= 0.0 {
        return 0.0;
    }
    gmax / ((d as f64).powi(n as i32) * (d as f64 - 1.0))
}

/// Precomputed data for repeated potential evaluations of one map on one fiber.
#[derive(Debug, Clone)]
pub struct PotentialContext {
    pub place: Place,
    pub map: HomogeneousLift,
    pub bound: GBound,
}

impl PotentialContext {
    pub fn new(place: &Place, map: &HomogeneousLift) -> Result<Self> {
        Ok(PotentialContext { place: place.clone(), map: map.clone(), bound: g_bound(place, map)? })
    }

    /// `λ_φ(x)` within `tol`. Ultrametric orbits that close up (cycle, or escape
    /// along the leading term of a polynomial) are summed exactly.
    pub fn lambda_limit(&self, x: &BerkPoint, tol: f64) -> Result<LambdaEstimate> {
        let d = self.map.degree();
        let gmax = self.bound.to_f64();
        let n = iterations_for(gmax, d, tol)?;
        let zero = LogMag::zero_in(self.place.log_unit());
        if gmax == 0.0 && !self.bound.heuristic {
            return Ok(LambdaEstimate { value: zero, n_used: 0, certified_error: 0.0, heuristic: false });
        }
        if self.place.is_ultrametric() {
            if let Some((value, steps)) = self.lambda_closed_form(x, n.max(64))? {
                return Ok(LambdaEstimate { value, n_used: steps, certified_error: 0.0, heuristic: false });
            }
        }
        let value = lambda_n(&self.place, &self.map, x, n)?;
        Ok(LambdaEstimate { value, n_used: n, certified_error: error_bound(gmax, d, n), heuristic: self.bound.heuristic })
    }

    pub fn lambda_batch(&self, exec: Execution, points: &[BerkPoint], tol: f64) -> Result<Vec<LambdaEstimate>> {
        map_collect(exec, points, |x| self.lambda_limit(x, tol)).into_iter().collect()
    }

    /// Exact `λ_φ(x)` when the orbit of `x` becomes periodic or escapes within `max_steps`.
    pub fn lambda_closed_form(&self, x: &BerkPoint, max_steps: usize) -> Result<Option<(LogMag, usize)>> {
        if self.place.is_archimedean() {
            return Ok(None);
        }
        let st = Stepper::new(&self.place, &self.map);
        let escape = self.escape_data()?;
        let mut seen: Vec<BerkPoint> = Vec::new();
        let mut gs: Vec<LogMag> = Vec::new();
        let Orbit::Exact(mut cur) = st.start(x)? else { unreachable!() };
        let dq = st.d.clone();
        let weight = |k: usize| -> Q { num_traits::pow(dq.recip(), k + 1) };
        for k in 0..=max_steps {
            if let Some(j) = seen.iter().position(|y| *y == cur) {
                let period = k - j;
                let head = (0..j).fold(LogMag::zero_in(self.place.log_unit()), |a, i| a.add(&gs[i].scale(&weight(i))));
                let cyc = (j..k).fold(LogMag::zero_in(self.place.log_unit()), |a, i| a.add(&gs[i].scale(&weight(i))));
                let factor = Q::one() / (Q::one() - num_traits::pow(dq.recip(), period));
                return Ok(Some((head.add(&cyc.scale(&factor)).neg(), k)));
            }
            if let Some((threshold, alpha)) = &escape {
                let t = eval_log_abs(&self.place, &cur, &QPoly::x())?;
                if t.total_cmp(threshold).is_gt() {
                    let head = (0..k).fold(LogMag::zero_in(self.place.log_unit()), |a, i| a.add(&gs[i].scale(&weight(i))));
                    let tail = alpha.scale(&(num_traits::pow(dq.recip(), k) / (&dq - Q::one())));
                    return Ok(Some((head.add(&tail).neg(), k)));
                }
            }
            if let Some(gamma) = self.trapped_value(&cur)? {
                let head = (0..k).fold(LogMag::zero_in(self.place.log_unit()), |a, i| a.add(&gs[i].scale(&weight(i))));
                let tail = gamma.scale(&(num_traits::pow(dq.recip(), k) / (&dq - Q::one())));
                return Ok(Some((head.add(&tail).neg(), k)));
            }
            if k == max_steps {
                break;
            }
            match st.step(&Orbit::Exact(cur.clone())) {
                Ok((g, Orbit::Exact(next))) => {
                    seen.push(cur);
                    gs.push(g);
                    cur = next;
                }
                Ok(_) => unreachable!(),
                Err(Error::Numeric(_)) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        Ok(None)
    }

    /// The value of `g` on a disk that φ maps into itself and on which `g` is constant.
    fn trapped_value(&self, x: &BerkPoint) -> Result<Option<LogMag>> {
        if !x.is_disk() || self.map.as_polynomial().is_none() {
            return Ok(None);
        }
        let image = match apply_point(&self.place, &self.map, x) {
            Ok(y) => y,
            Err(Error::Numeric(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if !disk_contains(&self.place, x, &image)? {
            return Ok(None);
        }
        let (f0, f1) = self.map.dehomogenized().expect("polynomial map");
        let zero = LogMag::zero_in(self.place.log_unit());
        let dominant_constant = |a: &QPoly, b: &QPoly| -> Result<bool> {
            let (va, vb) = (eval_log_abs(&self.place, x, a)?, eval_log_abs(&self.place, x, b)?);
            Ok(constant_on_disk(&self.place, x, a)? && va.total_cmp(&vb).is_ge())
        };
        let values_constant = dominant_constant(&f0, &f1)? || dominant_constant(&f1, &f0)?;
        let t = eval_log_abs(&self.place, x, &QPoly::x())?;
        let norm_constant = t.total_cmp(&zero).is_le() || constant_on_disk(&self.place, x, &QPoly::x())?;
        if values_constant && norm_constant {
            Ok(Some(deviation_g(&self.place, &self.map, x)?))
        } else {
            Ok(None)
        }
    }

    /// For polynomial maps: `log|T|` beyond which the leading term dominates forever,
    /// and the constant value of `g` there.
    fn escape_data(&self) -> Result<Option<(LogMag, LogMag)>> {
        let Some([f0, f1]) = self.map.rational_coeffs() else { return Ok(None) };
        if f1.iter().skip(1).any(|c| !c.is_zero()) {
            return Ok(None);
        }
        let d = self.map.degree();
        let unit = self.place.log_unit();
        let lc = ulog(&self.place, &f1[0])?.expect("nonzero F1 constant");
        let la = ulog(&self.place, &f0[d])?.expect("leading coefficient of a degree-d polynomial");
        let la = la - &lc;
        let mut threshold = Q::zero();
        let dm1 = Q::from_integer(BigInt::from(d - 1));
        threshold = threshold.max(-&la / &dm1);
        for (i, c) in f0.iter().enumerate().take(d) {
            if let Some(l) = ulog(&self.place, c)? {
                let l = l - &lc;
                threshold = threshold.max((l - &la) / Q::from_integer(BigInt::from(d - i)));
            }
        }
        Ok(Some((LogMag::exact(threshold, unit), LogMag::exact(la + lc, unit))))
    }
}

pub fn lambda_limit(place: &Place, f: &HomogeneousLift, x: &BerkPoint, tol: f64) -> Result<LambdaEstimate> {
    PotentialContext::new(place, f)?.lambda_limit(x, tol)
}

/// `d_K(u, v) = max_K |u - v|` over paired samples.
pub fn ecart_dk(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.is_empty() || u.len() != v.len() {
        return domain("écart needs two nonempty samples of equal length");
    }
    Ok(u.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// `d_K` between two functions on a finite sample of points.
pub fn ecart_dk_fn<T>(u: impl Fn(&T) -> f64, v: impl Fn(&T) -> f64, k: &[T]) -> Result<f64> {
    if k.is_empty() {
        return domain("sample K is empty");
    }
    Ok(k.iter().map(|x| (u(x) - v(x)).abs()).fold(0.0, f64::max))
}

/// `d_K(λ_{n+1}, λ_n)` for `n = 0..levels` on a sample. The increment
/// `λ_{n+1} - λ_n = -d^-(n+1) g(φ^n x)` is evaluated directly.
pub fn successive_ecarts(exec: Execution, place: &Place, f: &HomogeneousLift, k: &[BerkPoint], levels: usize) -> Result<Vec<f64>> {
    let d = f.degree() as f64;
    let table: Vec<Vec<f64>> = map_collect(exec, k, |x| -> Result<Vec<f64>> {
        let st = Stepper::new(place, f);
        let mut s = st.start(x)?;
        let mut row = Vec::with_capacity(levels);
        for n in 0..levels {
            let (g, next) = st.step(&s)?;
            row.push(g.to_f64().abs() / d.powi(n as i32 + 1));
            s = next;
        }
        Ok(row)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok((0..levels).map(|n| table.iter().map(|row| row[n]).fold(0.0, f64::max)).collect())
}

#[cfg(test)]
mod tests {
    fn cnorm(w: &[Complex64; 2]) -> f64 {
        w[0].norm().max(w[1].norm())
    }

    use super::*;
    use crate::arith::{q, qf};
    use crate::berkovich::flow_point;
    use crate::valued_fields::{flow_place, LogUnit};
    use proptest::prelude::*;

    fn lift(f0: &[i64], f1: &[i64]) -> HomogeneousLift {
        HomogeneousLift::from_rational(f0.iter().map(|&c| q(c)).collect(), f1.iter().map(|&c| q(c)).collect()).unwrap()
    }

    fn z2() -> HomogeneousLift {
        lift(&[0, 0, 1], &[1, 0, 0])
    }

    fn z2_plus_1() -> HomogeneousLift {
        lift(&[1, 0, 1], &[1, 0, 0])
    }

    fn c() -> Place {
        Place::complex()
    }

    fn brute_force(f: &HomogeneousLift, z: Complex64, n: usize) -> f64 {
        // d^-n log‖F^n(ẑ)‖ - log‖ẑ‖ with renormalization
        let mut w = [z, Complex64::one()];
        let mut acc = 0.0;
        let mut scale = 1.0;
        for _ in 0..n {
            w = f.eval_complex(&w);
            let m = cnorm(&w);
            scale /= f.degree() as f64;
            acc += scale * m.ln();
            w = [w[0] / m, w[1] / m];
        }
        acc - cnorm(&[z, Complex64::one()]).ln()
    }

    #[test]
    fn standard_potential_examples() {
        assert_eq!(standard_potential(&c(), &BerkPoint::rational(q(2))).unwrap().to_f64(), 0.0);
        let v = standard_potential(&c(), &BerkPoint::rational(qf(1, 2))).unwrap().to_f64();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        let p = Place::padic(5, q(1)).unwrap();
        assert_eq!(standard_potential(&p, &BerkPoint::gauss()).unwrap(), LogMag::zero_in(LogUnit::LogPrime(5)));
    }

    #[test]
    fn deviation_examples() {
        for x in [BerkPoint::rational(q(3)), BerkPoint::complex(0.2, -1.5), BerkPoint::Infinity] {
            assert!(deviation_g(&c(), &z2(), &x).unwrap().to_f64().abs() < 1e-15);
        }
        assert_eq!(deviation_g(&c(), &z2_plus_1(), &BerkPoint::rational(q(0))).unwrap().to_f64(), 0.0);
        let g = deviation_g(&c(), &z2_plus_1(), &BerkPoint::rational(q(1))).unwrap().to_f64();
        assert!((g - 2f64.ln()).abs() < 1e-15);
        let p = Place::padic(3, q(1)).unwrap();
        assert_eq!(deviation_g(&p, &z2(), &BerkPoint::disk(q(1), q(-2))).unwrap(), LogMag::zero_in(LogUnit::LogPrime(3)));
    }

    #[test]
    fn lambda_n_examples() {
        assert_eq!(lambda_n(&c(), &z2(), &BerkPoint::rational(q(7)), 5).unwrap().to_f64(), 0.0);
        let l = lambda_n(&c(), &z2_plus_1(), &BerkPoint::rational(q(1)), 1).unwrap().to_f64();
        assert!((l + 0.5 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(lambda_n(&c(), &z2_plus_1(), &BerkPoint::rational(q(1)), 0).unwrap().to_f64(), 0.0);
    }

    #[test]
    fn lambda_limit_examples() {
        let r = lambda_limit(&c(), &z2(), &BerkPoint::rational(q(3)), 1e-9).unwrap();
        assert_eq!((r.value.to_f64(), r.n_used, r.certified_error), (0.0, 0, 0.0));
        let p = Place::padic(3, q(1)).unwrap();
        let good = lift(&[3, 0, 1], &[1, 0, 0]);
        let r = lambda_limit(&p, &good, &BerkPoint::gauss(), 1e-9).unwrap();
        assert_eq!(r.value, LogMag::zero_in(LogUnit::LogPrime(3)));
        assert_eq!(r.certified_error, 0.0);
        let r = lambda_limit(&c(), &z2_plus_1(), &BerkPoint::rational(q(1)), 1e-6).unwrap();
        assert!(r.certified_error <= 1e-6);
        // the escape-rate oracle d^-n log‖F^n(ẑ)‖ - log‖ẑ‖ equals -λ_n
        let oracle = brute_force(&z2_plus_1(), Complex64::one(), 25);
        assert!((r.value.to_f64() + oracle).abs() < 1e-6, "{} vs {oracle}", r.value);
    }

    #[test]
    fn certified_bound_dominates_samples() {
        let f = lift(&[2, -3, 1], &[1, 1, 4]);
        let bound = g_bound(&c(), &f).unwrap();
        assert!(!bound.heuristic);
        for k in 0..400 {
            let z = Complex64::from_polar(0.01 * k as f64, k as f64);
            let g = deviation_g(&c(), &f, &BerkPoint::Classical(Scalar::Cx(z))).unwrap().to_f64();
            assert!(g.abs() <= bound.to_f64() + 1e-12);
        }
    }

    #[test]
    fn heuristic_bound_for_complex_lifts() {
        let [a, b] = z2_plus_1().complex_coeffs().clone();
        let f = HomogeneousLift::from_complex(a, b).unwrap();
        let bound = g_bound(&c(), &f).unwrap();
        assert!(bound.heuristic);
        assert!(bound.to_f64() >= 2f64.ln());
        let r = lambda_limit(&c(), &f, &BerkPoint::rational(q(1)), 1e-6).unwrap();
        assert!(r.heuristic);
    }

    #[test]
    fn bad_reduction_closed_form() {
        // T^2/p at p = 3: λ = max(ρ, 0) - max(ρ + 1, 0) in units of log 3
        let p = Place::padic(3, q(1)).unwrap();
        let f = HomogeneousLift::from_rational(vec![q(0), q(0), qf(1, 3)], vec![q(1), q(0), q(0)]).unwrap();
        let ctx = PotentialContext::new(&p, &f).unwrap();
        for (rho, expect) in [(q(-2), q(0)), (q(-1), q(0)), (qf(-1, 2), qf(-1, 2)), (q(0), q(-1)), (q(2), q(-1))] {
            let r = ctx.lambda_limit(&BerkPoint::disk(q(0), rho.clone()), 1e-12).unwrap();
            assert_eq!(r.value, LogMag::exact(expect, LogUnit::LogPrime(3)), "rho = {rho}");
            assert_eq!(r.certified_error, 0.0);
        }
        // closed forms agree with the truncated sums
        for rho in [q(-3), qf(-2, 3), q(1)] {
            let x = BerkPoint::disk(q(0), rho);
            let exact = ctx.lambda_limit(&x, 1e-12).unwrap().value.to_f64();
            assert!((lambda_n(&p, &f, &x, 40).unwrap().to_f64() - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn contraction_of_ecarts() {
        let k: Vec<BerkPoint> = (0..64).map(|i| {
            let z = Complex64::from_polar(2.0, std::f64::consts::TAU * i as f64 / 64.0);
            BerkPoint::Classical(Scalar::Cx(z))
        }).collect();
        let e = successive_ecarts(Execution::Sequential, &c(), &z2_plus_1(), &k, 12).unwrap();
        for w in e.windows(2) {
            assert!(w[1] <= 0.5 * w[0] * (1.0 + 1e-9), "{e:?}");
        }
        assert!(e[3] > 0.0);
        for w in e.windows(2).filter(|w| w[0] > 0.0) {
            assert!(w[1] < 0.5 * w[0]);
        }
        assert_eq!(ecart_dk(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ecart_dk(&[1.5, 2.5], &[1.0, 2.0]).unwrap(), 0.5);
        assert!(ecart_dk(&[], &[]).is_err());
        assert!((ecart_dk_fn(|x: &f64| x + 3.0, |x: &f64| *x, &[1.0, 2.0]).unwrap() - 3.0).abs() < 1e-15);
    }

    fn small_disk() -> impl Strategy<Value = BerkPoint> {
        (-30i64..30, 1i64..4, -4i64..4, 1i64..3).prop_map(|(a, b, n, m)| BerkPoint::disk(qf(a, b), qf(n, m)))
    }

    fn ultra_poly() -> impl Strategy<Value = HomogeneousLift> {
        (prop::collection::vec((-9i64..9, 1i64..10), 2), 1i64..10, 1i64..10).prop_map(|(c, ln, ld)| {
            let mut f0: Vec<Q> = c.into_iter().map(|(n, d)| qf(n, d)).collect();
            f0.push(qf(ln, ld));
            HomogeneousLift::from_rational(f0, vec![q(1), q(0), q(0)]).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn closed_form_within_certificate(f in ultra_poly(), x in small_disk()) {
            let p = Place::padic(3, q(1)).unwrap();
            let ctx = PotentialContext::new(&p, &f).unwrap();
            if let Some((exact, _)) = ctx.lambda_closed_form(&x, 64).unwrap() {
                let n = 12;
                let approx = lambda_n(&p, &f, &x, n).unwrap().to_f64();
                prop_assert!((approx - exact.to_f64()).abs() <= error_bound(ctx.bound.to_f64(), 2, n) + 1e-12);
            }
        }

    }

    proptest! {
        #[test]
        fn one_step_identity_exact(f in ultra_poly(), x in small_disk(), n in 0usize..6) {
            let p = Place::padic(3, q(1)).unwrap();
            let d = Q::from_integer(BigInt::from(2));
            let lhs = lambda_n(&p, &f, &x, n + 1).unwrap();
            let fx = apply_point(&p, &f, &x).unwrap();
            let rhs = lambda_n(&p, &f, &fx, n).unwrap().scale(&d.recip())
                .sub(&deviation_g(&p, &f, &x).unwrap().scale(&d.recip()));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn one_step_identity_arch(re in -2.0f64..2.0, im in -2.0f64..2.0, n in 0usize..8) {
            let f = z2_plus_1();
            let x = BerkPoint::complex(re, im);
            let lhs = lambda_n(&c(), &f, &x, n + 1).unwrap().to_f64();
            let fx = apply_point(&c(), &f, &x).unwrap();
            let rhs = 0.5 * lambda_n(&c(), &f, &fx, n).unwrap().to_f64() - 0.5 * deviation_g(&c(), &f, &x).unwrap().to_f64();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn log_flottance(f in ultra_poly(), x in small_disk(), n in 0usize..5, k in 1i64..4) {
            let p = Place::padic(2, q(1)).unwrap();
            let e = qf(1, k);
            let lhs = lambda_n(&flow_place(&p, &e).unwrap(), &f, &flow_point(&x, &e).unwrap(), n).unwrap();
            prop_assert_eq!(lhs, lambda_n(&p, &f, &x, n).unwrap().scale(&e));
        }

        #[test]
        fn scale_invariant_lift(re in -2.0f64..2.0, im in -2.0f64..2.0) {
            let f = z2_plus_1();
            let z = Complex64::new(re, im);
            let s = Complex64::new(3.0, -1.0);
            let a = g_complex(&f, &[z, Complex64::one()]);
            let b = g_complex(&f, &[z * s, s]);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
