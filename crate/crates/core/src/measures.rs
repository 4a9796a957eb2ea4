//! Finitely described Radon measures: atoms plus normalized Haar measures on circles.
//!
//! Haar components only occur over archimedean fibers and are given by a center
//! and a Euclidean radius. Over ultrametric fibers the circle measure `χ_{z,r}` is
//! the Dirac mass at `η_{z,r}`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::arith::{format_rational, to_f64, Q};
use crate::berkovich::{canonicalize, flow_point, same_point, BerkPoint, Scalar};
use crate::error::{domain, Error, Result};
use crate::graph::{graph_laplacian, GraphMeasure, MassBound, MetricGraph, PLFunction};
use crate::green::PotentialContext;
use crate::maps::{apply_point, preimages_arch, CxPoint, HomogeneousLift};
use crate::par::{kahan_sum, map_collect, Execution};
use crate::valued_fields::{check_flow_exponent, LogMag, Place};

#[derive(Debug, Clone, PartialEq)]
pub struct HaarComponent {
    pub center: Complex64,
    pub radius: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Measure {
    pub atoms: Vec<(BerkPoint, f64)>,
    pub haar: Vec<HaarComponent>,
}

impl Measure {
    pub fn dirac(x: BerkPoint) -> Self {
        Measure { atoms: vec![(x, 1.0)], haar: Vec::new() }
    }

    pub fn haar(center: Complex64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return domain(format!("circle radius must be positive, got {radius}"));
        }
        Ok(Measure { atoms: Vec::new(), haar: vec![HaarComponent { center, radius, weight: 1.0 }] })
    }

    pub fn total_mass(&self) -> f64 {
        kahan_sum(self.atoms.iter().map(|(_, w)| *w).chain(self.haar.iter().map(|h| h.weight)))
    }

    pub fn scale(&self, s: f64) -> Self {
        Measure {
            atoms: self.atoms.iter().map(|(x, w)| (x.clone(), w * s)).collect(),
            haar: self.haar.iter().map(|h| HaarComponent { weight: h.weight * s, ..h.clone() }).collect(),
        }
    }

    pub fn add(&self, other: &Measure) -> Self {
        let mut out = self.clone();
        out.atoms.extend(other.atoms.iter().cloned());
        out.haar.extend(other.haar.iter().cloned());
        out
    }

    pub fn sub(&self, other: &Measure) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn is_atomic(&self) -> bool {
        self.haar.is_empty()
    }
}

/// Trapezoid rule on a circle, doubling from `quad_n` points until successive
/// estimates agree to `1e-9` or `max_n` is reached.
pub fn circle_mean(exec: Execution, center: Complex64, radius: f64, f: &(dyn Fn(Complex64) -> Result<f64> + Sync), quad_n: usize, max_n: usize) -> Result<f64> {
    let mut n = quad_n.max(4);
    let eval = |n: usize, offset: usize, stride: usize| -> Result<Vec<f64>> {
        let idx: Vec<usize> = (offset..n).step_by(stride).collect();
        map_collect(exec, &idx, |&k| f(center + Complex64::from_polar(radius, TAU * k as f64 / n as f64)))
            .into_iter()
            .collect()
    };
    let mut sum = kahan_sum(eval(n, 0, 1)?);
    let mut est = sum / n as f64;
    while n < max_n {
        // new nodes are the odd indices of the refined grid
        let fresh = eval(2 * n, 1, 2)?;
        sum += kahan_sum(fresh);
        n *= 2;
        let next = sum / n as f64;
        let done = (next - est).abs() < 1e-9;
        est = next;
        if done {
            break;
        }
    }
    if !est.is_finite() {
        return Err(Error::Numeric(format!("integrand is not finite on the circle |z - {center}| = {radius}")));
    }
    Ok(est)
}

pub const DEFAULT_MAX_QUADRATURE: usize = 1 << 16;

/// `∫ f dμ`.
pub fn integrate(exec: Execution, mu: &Measure, f: &(dyn Fn(&BerkPoint) -> Result<f64> + Sync), quad_n: usize) -> Result<f64> {
    let atom_vals: Vec<Result<f64>> = map_collect(exec, &mu.atoms, |(x, w)| {
        let v = f(x)?;
        if !v.is_finite() {
            return Err(Error::Numeric(format!("integrand is infinite at the atom {x}")));
        }
        Ok(v * w)
    });
    let mut terms = atom_vals.into_iter().collect::<Result<Vec<f64>>>()?;
    for h in &mu.haar {
        let g = |z: Complex64| f(&BerkPoint::Classical(Scalar::Cx(z)));
        terms.push(h.weight * circle_mean(exec, h.center, h.radius, &g, quad_n, DEFAULT_MAX_QUADRATURE)?);
    }
    Ok(kahan_sum(terms))
}

/// A map of points used for pushforwards.
pub trait PointMap: Sync {
    fn apply(&self, x: &BerkPoint) -> Result<BerkPoint>;

    /// Image of a normalized circle measure when it is again one.
    fn push_circle(&self, _center: Complex64, _radius: f64) -> Option<(Complex64, f64)> {
        None
    }
}

/// `z ↦ ωz`.
pub struct Rotation(pub Complex64);

impl PointMap for Rotation {
    fn apply(&self, x: &BerkPoint) -> Result<BerkPoint> {
        Ok(match x {
            BerkPoint::Classical(s) => BerkPoint::Classical(Scalar::Cx(self.0 * s.to_complex())),
            BerkPoint::Infinity => BerkPoint::Infinity,
            BerkPoint::Disk { .. } => return domain("rotations act on complex points"),
        })
    }

    fn push_circle(&self, center: Complex64, radius: f64) -> Option<(Complex64, f64)> {
        Some((self.0 * center, radius * self.0.norm()))
    }
}

/// `z ↦ z^d`.
pub struct PowerMap(pub u32);

impl PointMap for PowerMap {
    fn apply(&self, x: &BerkPoint) -> Result<BerkPoint> {
        Ok(match x {
            BerkPoint::Classical(s) => BerkPoint::Classical(Scalar::Cx(s.to_complex().powu(self.0))),
            BerkPoint::Infinity => BerkPoint::Infinity,
            BerkPoint::Disk { .. } => return domain("use a lift map on disk points"),
        })
    }

    fn push_circle(&self, center: Complex64, radius: f64) -> Option<(Complex64, f64)> {
        (center == Complex64::zero()).then(|| (center, radius.powi(self.0 as i32)))
    }
}

/// The endomorphism given by a lift, on one fiber.
pub struct LiftMap<'a> {
    pub place: &'a Place,
    pub map: &'a HomogeneousLift,
}

impl PointMap for LiftMap<'_> {
    fn apply(&self, x: &BerkPoint) -> Result<BerkPoint> {
        apply_point(self.place, self.map, x)
    }
}

/// The flow `x ↦ x^ε`, which fixes classical points and so every circle of C.
pub struct FlowMap(pub Q);

impl PointMap for FlowMap {
    fn apply(&self, x: &BerkPoint) -> Result<BerkPoint> {
        flow_point(x, &self.0)
    }

    fn push_circle(&self, center: Complex64, radius: f64) -> Option<(Complex64, f64)> {
        Some((center, radius))
    }
}

/// Image measure. Circles the map does not transport are replaced by `circle_samples`
/// equally weighted atoms.
pub fn pushforward_measure(map: &dyn PointMap, mu: &Measure, circle_samples: usize) -> Result<Measure> {
    let mut out = Measure::default();
    for (x, w) in &mu.atoms {
        out.atoms.push((map.apply(x)?, *w));
    }
    for h in &mu.haar {
        match map.push_circle(h.center, h.radius) {
            Some((c, r)) => out.haar.push(HaarComponent { center: c, radius: r, weight: h.weight }),
            None => {
                let n = circle_samples.max(1);
                for k in 0..n {
                    let z = h.center + Complex64::from_polar(h.radius, TAU * k as f64 / n as f64);
                    out.atoms.push((map.apply(&BerkPoint::Classical(Scalar::Cx(z)))?, h.weight / n as f64));
                }
            }
        }
    }
    Ok(out)
}

fn to_cx_point(x: &BerkPoint) -> Result<CxPoint> {
    match x {
        BerkPoint::Classical(s) => Ok(CxPoint::Finite(s.to_complex())),
        BerkPoint::Infinity => Ok(CxPoint::Infinity),
        BerkPoint::Disk { .. } => domain("pullbacks are only available for atoms at classical points"),
    }
}

/// `φ^*μ` for atomic μ at classical points of an archimedean fiber.
pub fn pullback_measure(exec: Execution, place: &Place, f: &HomogeneousLift, mu: &Measure) -> Result<Measure> {
    if !place.is_archimedean() {
        return domain("pullbacks are computed over archimedean fibers only");
    }
    if !mu.is_atomic() {
        return domain("pullback needs a purely atomic measure");
    }
    let parts: Vec<Result<Vec<(BerkPoint, f64)>>> = map_collect(exec, &mu.atoms, |(x, w)| {
        let pre = preimages_arch(f, to_cx_point(x)?)?;
        Ok(pre.points.iter().map(|(z, m)| (z.to_berk(), w * *m as f64)).collect())
    });
    let mut atoms = Vec::new();
    for p in parts {
        atoms.extend(p?);
    }
    Ok(Measure { atoms, haar: Vec::new() })
}

/// `d^-n (φ^*)^n δ_seed` over C.
#[derive(Debug, Clone)]
pub struct ArchEquilibrium {
    pub atoms: Vec<(CxPoint, f64)>,
    pub levels: usize,
    pub warning: Option<String>,
}

impl ArchEquilibrium {
    pub fn measure(&self) -> Measure {
        Measure { atoms: self.atoms.iter().map(|(z, w)| (z.to_berk(), *w)).collect(), haar: Vec::new() }
    }

    pub fn integrate(&self, exec: Execution, f: &(dyn Fn(CxPoint) -> f64 + Sync)) -> f64 {
        kahan_sum(map_collect(exec, &self.atoms, |(z, w)| w * f(*z)))
    }
}

const MERGE_RADIUS: f64 = 1e-9;

fn merge_atoms(mut atoms: Vec<(CxPoint, f64)>) -> Vec<(CxPoint, f64)> {
    atoms.sort_by(|a, b| a.0.cmp_key(&b.0));
    let mut out: Vec<(CxPoint, f64)> = Vec::with_capacity(atoms.len());
    for (z, w) in atoms {
        if let Some(last) = out.last_mut() {
            let same = match (last.0, z) {
                (CxPoint::Infinity, CxPoint::Infinity) => true,
                (CxPoint::Finite(a), CxPoint::Finite(b)) => (a - b).norm() <= MERGE_RADIUS * (1.0 + a.norm()),
                _ => false,
            };
            if same {
                last.1 += w;
                continue;
            }
        }
        out.push((z, w));
    }
    out
}

/// Iterated normalized pullbacks of a Dirac mass, computed level by level.
pub fn equilibrium_arch(exec: Execution, place: &Place, f: &HomogeneousLift, seed: CxPoint, n: usize) -> Result<ArchEquilibrium> {
    if !place.is_archimedean() {
        return domain("equilibrium_arch needs an archimedean place");
    }
    let d = f.degree() as f64;
    let mut atoms = vec![(seed, 1.0)];
    let mut small_levels = 0;
    let mut warning = None;
    for level in 1..=n {
        let parts: Vec<Result<Vec<(CxPoint, f64)>>> = map_collect(exec, &atoms, |(z, w)| {
            let pre = preimages_arch(f, *z)?;
            Ok(pre.points.into_iter().map(|(x, m)| (x, w * m as f64 / d)).collect())
        });
        let mut next = Vec::with_capacity(atoms.len() * f.degree());
        for p in parts {
            next.extend(p?);
        }
        atoms = merge_atoms(next);
        small_levels = if atoms.len() <= 2 { small_levels + 1 } else { 0 };
        if small_levels >= 3 && warning.is_none() {
            warning = Some(format!(
                "seed {seed} looks exceptional: preimages stay on {} point(s) from level {}",
                atoms.len(),
                level - 2
            ));
        }
    }
    Ok(ArchEquilibrium { atoms, levels: n, warning })
}

/// Equilibrium measures for many maps or seeds at once.
pub fn equilibrium_arch_batch(exec: Execution, place: &Place, jobs: &[(HomogeneousLift, CxPoint)], n: usize) -> Result<Vec<ArchEquilibrium>> {
    map_collect(exec, jobs, |(f, seed)| equilibrium_arch(Execution::Sequential, place, f, *seed, n))
        .into_iter()
        .collect()
}

/// `μ_φ = χ_{0,1} - Δ(λ_φ|Γ)` on a skeleton through the Gauss point.
#[derive(Debug, Clone)]
pub struct SkeletonEquilibrium {
    pub skeleton: MetricGraph<Q>,
    /// λ_φ in place units at every vertex.
    pub lambda: PLFunction<Q>,
    pub measure: GraphMeasure<Q>,
    pub total_mass: Q,
    pub min_weight: Option<Q>,
    /// All vertex values of λ_φ are exact limits, not truncations.
    pub exact: bool,
    /// Vertices inserted by refinement.
    pub inserted: Vec<usize>,
}

impl SkeletonEquilibrium {
    pub fn to_measure(&self) -> Measure {
        Measure {
            atoms: self
                .measure
                .support()
                .into_iter()
                .map(|(v, w)| (self.skeleton.label(v).cloned().unwrap_or(BerkPoint::Infinity), to_f64(&w)))
                .collect(),
            haar: Vec::new(),
        }
    }

    pub fn has_negative_atoms(&self) -> bool {
        self.min_weight.as_ref().is_some_and(|w| *w < Q::zero())
    }
}

fn lambda_at(ctx: &PotentialContext, x: &BerkPoint, tol: f64) -> Result<(Q, bool)> {
    let est = ctx.lambda_limit(x, tol).map_err(|e| Error::Numeric(format!("λ unavailable at vertex {x}: {e}")))?;
    match est.value {
        LogMag::Exact { coeff, .. } => Ok((coeff, est.certified_error == 0.0)),
        other => Err(Error::Numeric(format!("λ at {x} is not exact: {other}"))),
    }
}

/// Point of the edge between two nested disks at log-radius `rho`.
fn point_on_edge(place: &Place, a: &BerkPoint, b: &BerkPoint, rho: &Q) -> Result<BerkPoint> {
    let child = if a.log_radius() < b.log_radius() { a } else { b };
    let BerkPoint::Disk { center, .. } = child else {
        return domain("skeleton vertices must be disk points");
    };
    canonicalize(place, &BerkPoint::disk(center.clone(), rho.clone()))
}

/// Equilibrium measure on a skeleton. With `refine_depth > 0`, every edge whose
/// midpoint value of λ_φ differs from the affine interpolation is split, recursively.
pub fn equilibrium_nonarch(exec: Execution, place: &Place, f: &HomogeneousLift, skeleton: &MetricGraph<Q>, tol: f64, refine_depth: usize) -> Result<SkeletonEquilibrium> {
    if place.is_archimedean() {
        return domain("equilibrium_nonarch needs an ultrametric place");
    }
    let gauss = (0..skeleton.num_vertices())
        .find(|&v| skeleton.label(v).is_some_and(|x| same_point(place, x, &BerkPoint::gauss()).unwrap_or(false)))
        .ok_or_else(|| Error::Domain("skeleton does not contain the Gauss point".into()))?;
    let ctx = PotentialContext::new(place, f)?;
    let labels: Vec<BerkPoint> = (0..skeleton.num_vertices())
        .map(|v| skeleton.label(v).cloned().ok_or_else(|| Error::Domain(format!("vertex {v} is unlabelled"))))
        .collect::<Result<_>>()?;
    let vals: Vec<(Q, bool)> = map_collect(exec, &labels, |x| lambda_at(&ctx, x, tol)).into_iter().collect::<Result<_>>()?;
    let mut exact = vals.iter().all(|(_, e)| *e);
    let mut u = PLFunction::new(skeleton.clone(), vals.into_iter().map(|(v, _)| v).collect())?;
    let mut inserted = Vec::new();
    for _ in 0..refine_depth {
        let mut changed = false;
        let count = u.graph().edges().len();
        let mut e = 0;
        while e < count {
            let edge = u.graph().edges()[e].clone();
            let half = &edge.length / Q::from_integer(2.into());
            let (la, lb) = (u.graph().label(edge.a).cloned(), u.graph().label(edge.b).cloned());
            let (Some(a), Some(b)) = (la, lb) else {
                e += 1;
                continue;
            };
            let (ra, rb) = (a.log_radius().cloned().unwrap_or_default(), b.log_radius().cloned().unwrap_or_default());
            let mid_rho = (&ra + &rb) / Q::from_integer(2.into());
            let mid = point_on_edge(place, &a, &b, &mid_rho)?;
            let (val, ex) = lambda_at(&ctx, &mid, tol)?;
            if val != u.value_on_edge(e, &half) {
                let (next, m) = u.subdivide(e, half, Some(mid))?;
                let mut values = next.values().to_vec();
                values[m] = val;
                u = PLFunction::new(next.graph().clone(), values)?;
                exact &= ex;
                inserted.push(m);
                changed = true;
            }
            e += 1;
        }
        if !changed {
            break;
        }
    }
    let lap = graph_laplacian(&u);
    let mut atoms: BTreeMap<usize, Q> = BTreeMap::new();
    atoms.insert(gauss, Q::one());
    for (v, w) in lap.atoms {
        let e = atoms.entry(v).or_insert_with(Q::zero);
        *e -= w;
    }
    let measure = GraphMeasure { atoms: atoms.into_iter().collect() };
    let total_mass = measure.total_mass();
    let min_weight = measure.min_weight();
    Ok(SkeletonEquilibrium { skeleton: u.graph().clone(), lambda: u, measure, total_mass, min_weight, exact, inserted })
}

/// `χ_{z,r}` over an archimedean fiber: Haar measure on the circle of place radius `r`,
/// i.e. Euclidean radius `r^(1/ε)`.
pub fn chi_arch(place: &Place, center: Complex64, radius: f64) -> Result<Measure> {
    if !place.is_archimedean() {
        return domain("chi_arch needs an archimedean place");
    }
    if !(radius > 0.0) {
        return domain("radius must be positive");
    }
    Measure::haar(center, radius.powf(1.0 / place.eps_f64()))
}

/// `χ_{z,r}` over an ultrametric fiber: the Dirac mass at `η_{z,r}`.
pub fn chi_ultra(place: &Place, center: Q, logr: Q) -> Result<Measure> {
    if place.is_archimedean() {
        return domain("chi_ultra needs an ultrametric place");
    }
    Ok(Measure::dirac(canonicalize(place, &BerkPoint::disk(center, logr))?))
}

/// `χ_{0,1}` on any fiber.
pub fn chi_gauss(place: &Place) -> Result<Measure> {
    if place.is_archimedean() {
        chi_arch(place, Complex64::zero(), 1.0)
    } else {
        chi_ultra(place, Q::zero(), Q::zero())
    }
}

/// `(Φ_ε)_* μ`.
pub fn flow_measure(mu: &Measure, eps: &Q) -> Result<Measure> {
    check_flow_exponent(eps)?;
    pushforward_measure(&FlowMap(eps.clone()), mu, 0)
}

/// How equilibrium measures are approximated in [`energy_pairing`].
#[derive(Debug, Clone)]
pub enum PairingSample {
    /// Normalized preimages of `seed` at level `n`.
    Preimages { seed: CxPoint, n: usize, tol: f64 },
    /// Laplacians on a skeleton through the Gauss point.
    Skeleton { skeleton: MetricGraph<Q>, tol: f64, refine_depth: usize },
}

/// `∫ (λ_φ - λ_ψ) d(μ_φ - μ_ψ)`, which is nonnegative and vanishes iff `μ_φ = μ_ψ`.
pub fn energy_pairing(exec: Execution, place: &Place, f: &HomogeneousLift, g: &HomogeneousLift, sample: &PairingSample) -> Result<f64> {
    let cf = PotentialContext::new(place, f)?;
    let cg = PotentialContext::new(place, g)?;
    let (mu_f, mu_g, tol) = match sample {
        PairingSample::Preimages { seed, n, tol } => (
            equilibrium_arch(exec, place, f, *seed, *n)?.measure(),
            equilibrium_arch(exec, place, g, *seed, *n)?.measure(),
            *tol,
        ),
        PairingSample::Skeleton { skeleton, tol, refine_depth } => (
            equilibrium_nonarch(exec, place, f, skeleton, *tol, *refine_depth)?.to_measure(),
            equilibrium_nonarch(exec, place, g, skeleton, *tol, *refine_depth)?.to_measure(),
            *tol,
        ),
    };
    let h = |x: &BerkPoint| -> Result<f64> {
        Ok(cf.lambda_limit(x, tol)?.value.to_f64() - cg.lambda_limit(x, tol)?.value.to_f64())
    };
    let diff = mu_f.sub(&mu_g);
    integrate(exec, &diff, &h, 64)
}

/// Laplacian mass of a subharmonic `u` in the disk `|z - c| <= r` measured as the
/// outward log-radius derivative of circle means, against `2 sup_{D(R)} |u| / log(R/r)`.
pub fn disk_mass_arch(exec: Execution, u: &(dyn Fn(Complex64) -> f64 + Sync), center: Complex64, r: f64, big_r: f64) -> Result<MassBound<f64>> {
    if !(0.0 < r && r < big_r) {
        return domain("need 0 < r < R");
    }
    let g = |z: Complex64| -> Result<f64> { Ok(u(z)) };
    let h = 1e-6;
    let mean = |s: f64| circle_mean(exec, center, s.exp(), &g, 256, DEFAULT_MAX_QUADRATURE);
    let s = r.ln();
    let mass = (mean(s + h)? - mean(s)?) / h;
    let rings = 64;
    let angles = 256;
    let idx: Vec<usize> = (0..=rings).collect();
    let sup = map_collect(exec, &idx, |&k| {
        let rad = big_r * k as f64 / rings as f64;
        (0..angles)
            .map(|a| u(center + Complex64::from_polar(rad, TAU * a as f64 / angles as f64)).abs())
            .fold(0.0, f64::max)
    })
    .into_iter()
    .fold(0.0, f64::max);
    let bound = 2.0 * sup / (big_r / r).ln();
    Ok(MassBound { mass, bound, region_boundary: Vec::new(), outgoing_edges: 0, subharmonic: true })
}

fn point_label(x: &BerkPoint) -> (String, String) {
    match x {
        BerkPoint::Disk { center, logr } => (format_rational(center), format_rational(logr)),
        other => (other.to_string(), String::new()),
    }
}

/// CSV with columns `kind, point_or_center, logr_or_radius, weight`.
pub fn write_measure_csv<W: std::io::Write>(mu: &Measure, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "point_or_center", "logr_or_radius", "weight"])?;
    for (x, wt) in &mu.atoms {
        let (p, r) = point_label(x);
        w.write_record(["atom".to_string(), p, r, wt.to_string()])?;
    }
    for h in &mu.haar {
        let mut c = String::new();
        let _ = write!(c, "{}{:+}i", h.center.re, h.center.im);
        w.write_record(["haar".to_string(), c, h.radius.to_string(), h.weight.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{q, qf};
    use crate::berkovich::build_skeleton;
    use crate::poly::QPoly;
    use proptest::prelude::*;

    fn z_squared() -> HomogeneousLift {
        HomogeneousLift::polynomial(&QPoly::new(vec![q(0), q(0), q(1)])).unwrap()
    }

    fn log_plus(z: Complex64) -> f64 {
        z.norm().ln().max(0.0)
    }

    #[test]
    fn haar_integral_of_log_plus_shift() {
        let mu = Measure::haar(Complex64::zero(), 1.0).unwrap();
        let f = |x: &BerkPoint| -> Result<f64> { Ok(log_plus(x_cx(x) - 2.0)) };
        let v = integrate(Execution::Sequential, &mu, &f, 64).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-9, "{v}");
    }

    fn x_cx(x: &BerkPoint) -> Complex64 {
        match x {
            BerkPoint::Classical(s) => s.to_complex(),
            _ => panic!("expected classical point"),
        }
    }

    #[test]
    fn atoms_at_poles_are_rejected() {
        let mu = Measure::dirac(BerkPoint::rational(q(0)));
        let f = |x: &BerkPoint| -> Result<f64> { Ok(x_cx(x).norm().ln()) };
        assert!(matches!(integrate(Execution::Sequential, &mu, &f, 8), Err(Error::Numeric(_))));
    }

    #[test]
    fn equilibrium_of_squaring_is_balanced() {
        let place = Place::complex();
        let eq = equilibrium_arch(Execution::Parallel, &place, &z_squared(), CxPoint::finite(2.0, 0.0), 8).unwrap();
        assert_eq!(eq.atoms.len(), 256);
        assert!((eq.measure().total_mass() - 1.0).abs() < 1e-12);
        assert!(eq.warning.is_none());
        let seq = equilibrium_arch(Execution::Sequential, &place, &z_squared(), CxPoint::finite(2.0, 0.0), 8).unwrap();
        assert_eq!(eq.atoms, seq.atoms);
    }

    #[test]
    fn exceptional_seed_warns() {
        let eq = equilibrium_arch(Execution::Sequential, &Place::complex(), &z_squared(), CxPoint::finite(0.0, 0.0), 5).unwrap();
        assert_eq!(eq.atoms.len(), 1);
        assert!(eq.warning.is_some());
    }

    #[test]
    fn pullback_preserves_mass_times_degree() {
        let place = Place::complex();
        let f = HomogeneousLift::rational(
            &QPoly::new(vec![q(1), q(0), q(0), q(1)]),
            &QPoly::new(vec![q(2), q(1)]),
        )
        .unwrap();
        let mu = Measure {
            atoms: vec![(BerkPoint::complex(0.5, 1.0), 0.25), (BerkPoint::Infinity, 0.75)],
            haar: Vec::new(),
        };
        let pulled = pullback_measure(Execution::Sequential, &place, &f, &mu).unwrap();
        assert!((pulled.total_mass() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn power_map_pushes_circles() {
        let mu = Measure::haar(Complex64::zero(), 1.5).unwrap();
        let pushed = pushforward_measure(&PowerMap(2), &mu, 16).unwrap();
        assert_eq!(pushed.haar[0].radius, 2.25);
        let shifted = Measure::haar(Complex64::new(1.0, 0.0), 1.0).unwrap();
        let pushed = pushforward_measure(&PowerMap(2), &shifted, 16).unwrap();
        assert_eq!(pushed.atoms.len(), 16);
        assert!((pushed.total_mass() - 1.0).abs() < 1e-12);
    }

    fn segment(place: &Place, lo: i64, hi: i64, den: i64) -> MetricGraph<Q> {
        let pts: Vec<BerkPoint> = (lo..=hi).map(|k| BerkPoint::disk(q(0), qf(k, den))).collect();
        build_skeleton(place, &pts).unwrap()
    }

    #[test]
    fn nonarch_equilibrium_of_shifted_square() {
        // T^2 + p has good reduction at p.
        let place = Place::padic(3, q(1)).unwrap();
        let f = HomogeneousLift::polynomial(&QPoly::new(vec![q(3), q(0), q(1)])).unwrap();
        let eq = equilibrium_nonarch(Execution::Sequential, &place, &f, &segment(&place, -4, 4, 2), 1e-12, 0).unwrap();
        assert!(eq.exact);
        assert_eq!(eq.total_mass, q(1));
        let support = eq.measure.support();
        assert_eq!(support.len(), 1);
        assert!(same_point(&place, eq.skeleton.label(support[0].0).unwrap(), &BerkPoint::gauss()).unwrap());
        assert!(eq.lambda.values().iter().all(|v| v.is_zero()));
    }

    #[test]
    fn bad_reduction_moves_the_mass() {
        // T^2 / p: the measure sits at η_{0,1/p}.
        let place = Place::padic(3, q(1)).unwrap();
        let f = HomogeneousLift::polynomial(&QPoly::new(vec![q(0), q(0), qf(1, 3)])).unwrap();
        let sk = segment(&place, -2, 2, 1);
        let eq = equilibrium_nonarch(Execution::Sequential, &place, &f, &sk, 1e-12, 0).unwrap();
        let support = eq.measure.support();
        assert_eq!(support.len(), 1);
        assert_eq!(support[0].1, q(1));
        assert_eq!(eq.skeleton.label(support[0].0).unwrap().log_radius(), Some(&q(-1)));
    }

    #[test]
    fn refinement_finds_hidden_kinks() {
        let place = Place::padic(3, q(1)).unwrap();
        let f = HomogeneousLift::polynomial(&QPoly::new(vec![q(0), q(0), qf(1, 3)])).unwrap();
        let sk = build_skeleton(&place, &[BerkPoint::disk(q(0), q(-2)), BerkPoint::disk(q(0), q(2))]).unwrap();
        let coarse = equilibrium_nonarch(Execution::Sequential, &place, &f, &sk, 1e-12, 0);
        // no Gauss vertex yet
        assert!(coarse.is_err());
        let sk = segment(&place, -1, 1, 1);
        let sk = sk.clone();
        let fine = equilibrium_nonarch(Execution::Sequential, &place, &f, &sk, 1e-12, 3).unwrap();
        assert_eq!(fine.total_mass, q(1));
        assert!(!fine.has_negative_atoms());
    }

    #[test]
    fn chi_flow_identities() {
        let eps = qf(2, 5);
        let p = Place::padic(5, q(1)).unwrap();
        let mu = chi_ultra(&p, q(1), qf(-3, 2)).unwrap();
        let flowed = crate::valued_fields::flow_place(&p, &eps).unwrap();
        assert_eq!(flow_measure(&mu, &eps).unwrap(), chi_ultra(&flowed, q(1), qf(-3, 5)).unwrap());
        let a = Place::archimedean(q(1)).unwrap();
        let mu = chi_arch(&a, Complex64::new(1.0, 2.0), 3.0).unwrap();
        let flowed = crate::valued_fields::flow_place(&a, &eps).unwrap();
        let target = chi_arch(&flowed, Complex64::new(1.0, 2.0), 3f64.powf(0.4)).unwrap();
        let got = flow_measure(&mu, &eps).unwrap();
        assert!((got.haar[0].radius - target.haar[0].radius).abs() < 1e-12);
    }

    #[test]
    fn pairing_vanishes_on_identical_maps() {
        let place = Place::complex();
        let sample = PairingSample::Preimages { seed: CxPoint::finite(2.0, 0.0), n: 6, tol: 1e-9 };
        let v = energy_pairing(Execution::Parallel, &place, &z_squared(), &z_squared(), &sample).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn disk_mass_of_log_plus() {
        let m = disk_mass_arch(Execution::Parallel, &log_plus, Complex64::zero(), 1.5, 2.0).unwrap();
        assert!((m.mass - 1.0).abs() < 1e-4, "{}", m.mass);
        assert!((m.bound - 2.0 * 2f64.ln() / (4.0f64 / 3.0).ln()).abs() < 1e-9);
        assert!(m.holds());
    }

    #[test]
    fn csv_layout() {
        let mu = Measure {
            atoms: vec![(BerkPoint::disk(q(1), qf(-1, 2)), 0.5), (BerkPoint::rational(qf(2, 3)), 0.25)],
            haar: vec![HaarComponent { center: Complex64::new(0.0, 1.0), radius: 2.0, weight: 0.25 }],
        };
        let mut buf = Vec::new();
        write_measure_csv(&mu, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "kind,point_or_center,logr_or_radius,weight");
        assert_eq!(lines[1], "atom,1,-1/2,0.5");
        assert_eq!(lines[3], "haar,0+1i,2,0.25");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn pullback_mass_scales(re in -3.0f64..3.0, im in -3.0f64..3.0, c in -4i64..4) {
            let f = HomogeneousLift::polynomial(&QPoly::new(vec![qf(c, 2), q(1), q(0), q(1)])).unwrap();
            let mu = Measure::dirac(BerkPoint::complex(re, im));
            let pulled = pullback_measure(Execution::Sequential, &Place::complex(), &f, &mu).unwrap();
            prop_assert!((pulled.total_mass() - 3.0).abs() < 1e-12);
        }
    }
}
