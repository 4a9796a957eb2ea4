//! Affable test functions: differences `u⁺ - u⁻` of pieces
//! `max(q₀, t₁, …, t_m)` with `t = c + Σ qₖ log|gₖ|`, `qₖ >= 0`, given in both
//! standard charts `T` (used on `|T| <= 1`) and `S = 1/T` (used on `|T| > 1`).
//!
//! Constants `q₀` and `c` are measured in the log unit of the place, so they
//! scale with ε under the flow exactly as `log|g|` does.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use num_complex::Complex64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{format_rational, parse_rational, snap_to_rational, Q};
use crate::berkovich::{build_skeleton, canonicalize, eval_log_abs, inverse_point, ulog, BerkPoint, Scalar};
use crate::error::{domain, Error, Result};
use crate::graph::{MetricGraph, PLFunction};
use crate::par::{map_collect, Execution};
use crate::poly::QPoly;
use crate::valued_fields::{LogMag, Place};

/// `shift + Σ q·log|g|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub shift: Q,
    pub factors: Vec<(Q, QPoly)>,
}

impl Term {
    pub fn log(q: Q, g: QPoly) -> Self {
        Term { shift: Q::zero(), factors: vec![(q, g)] }
    }

    fn add(&self, other: &Term) -> Term {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Term { shift: &self.shift + &other.shift, factors }
    }

    fn shifted(&self, c: &Q) -> Term {
        Term { shift: &self.shift + c, factors: self.factors.clone() }
    }

    fn scale(&self, s: &Q) -> Term {
        Term { shift: &self.shift * s, factors: self.factors.iter().map(|(q, g)| (q * s, g.clone())).collect() }
    }

    fn eval(&self, place: &Place, x: &BerkPoint) -> Result<LogMag> {
        let mut acc = LogMag::exact(self.shift.clone(), place.log_unit());
        for (q, g) in &self.factors {
            if q.is_zero() {
                continue;
            }
            acc = acc.add(&eval_log_abs(place, x, g)?.scale(q));
        }
        Ok(acc)
    }
}

/// `max(q₀, t₁, …)`; `q0 = None` stands for `-∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub q0: Option<Q>,
    pub terms: Vec<Term>,
}

impl Piece {
    pub fn constant(c: Q) -> Self {
        Piece { q0: Some(c), terms: Vec::new() }
    }

    pub fn zero() -> Self {
        Piece::constant(Q::zero())
    }

    fn validate(&self) -> Result<()> {
        for t in &self.terms {
            if t.factors.iter().any(|(q, _)| q.is_negative()) {
                return domain("log coefficients of an affable piece must be nonnegative");
            }
            if t.factors.iter().any(|(_, g)| g.is_zero()) {
                return domain("log|0| is not allowed in an affable piece");
            }
        }
        if self.q0.is_none() && self.terms.is_empty() {
            return domain("an affable piece needs q0 or at least one term");
        }
        Ok(())
    }

    /// `max(a) + max(b) = max over pairs`.
    fn add(&self, other: &Piece) -> Piece {
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                terms.push(a.add(b));
            }
            if let Some(c) = &other.q0 {
                terms.push(a.shifted(c));
            }
        }
        if let Some(c) = &self.q0 {
            for b in &other.terms {
                terms.push(b.shifted(c));
            }
        }
        let q0 = match (&self.q0, &other.q0) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        Piece { q0, terms }
    }

    fn max(&self, other: &Piece) -> Piece {
        let q0 = match (&self.q0, &other.q0) {
            (Some(a), Some(b)) => Some(a.max(b).clone()),
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Piece { q0, terms }
    }

    fn scale(&self, s: &Q) -> Piece {
        debug_assert!(!s.is_negative());
        Piece { q0: self.q0.as_ref().map(|c| c * s), terms: self.terms.iter().map(|t| t.scale(s)).collect() }
    }

    /// Value of every branch, `q₀` first when present.
    fn branches(&self, place: &Place, x: &BerkPoint) -> Result<Vec<LogMag>> {
        let mut out = Vec::with_capacity(self.terms.len() + 1);
        if let Some(c) = &self.q0 {
            out.push(LogMag::exact(c.clone(), place.log_unit()));
        }
        for t in &self.terms {
            out.push(t.eval(place, x)?);
        }
        Ok(out)
    }

    fn eval(&self, place: &Place, x: &BerkPoint) -> Result<LogMag> {
        Ok(self.branches(place, x)?.into_iter().fold(LogMag::NegInf, |a, b| a.max(&b)))
    }

    fn polys(&self) -> impl Iterator<Item = &QPoly> {
        self.terms.iter().flat_map(|t| t.factors.iter().map(|(_, g)| g))
    }
}

/// `plus - minus` in one chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartFn {
    pub plus: Piece,
    pub minus: Piece,
}

impl ChartFn {
    fn eval(&self, place: &Place, x: &BerkPoint) -> Result<LogMag> {
        let (a, b) = (self.plus.eval(place, x)?, self.minus.eval(place, x)?);
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::Numeric(format!("affable function is not finite at {x} (pieces {a} and {b})")));
        }
        Ok(a.sub(&b))
    }

    fn polys(&self) -> impl Iterator<Item = &QPoly> {
        self.plus.polys().chain(self.minus.polys())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffableFn {
    pub id: String,
    pub chart0: ChartFn,
    pub chart_inf: ChartFn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Zero,
    Inf,
}

/// Chart used at `x`: `T` on `|T| <= 1`, `S = 1/T` elsewhere.
pub fn chart_of(place: &Place, x: &BerkPoint) -> Result<Chart> {
    let t = eval_log_abs(place, x, &QPoly::x())?;
    Ok(if t.total_cmp(&LogMag::zero_in(place.log_unit())).is_le() { Chart::Zero } else { Chart::Inf })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineOp {
    Add,
    Max,
    Min,
}

impl AffableFn {
    pub fn new(id: impl Into<String>, chart0: ChartFn, chart_inf: ChartFn) -> Result<Self> {
        for piece in [&chart0.plus, &chart0.minus, &chart_inf.plus, &chart_inf.minus] {
            piece.validate()?;
        }
        Ok(AffableFn { id: id.into(), chart0, chart_inf })
    }

    pub fn constant(id: impl Into<String>, c: Q) -> Self {
        let chart = ChartFn { plus: Piece::constant(c), minus: Piece::zero() };
        AffableFn { id: id.into(), chart0: chart.clone(), chart_inf: chart }
    }

    /// `max(q0, log|T - a|) - max(q0, log|T|)`, a bounded function written in both charts.
    pub fn shifted_log_plus(id: impl Into<String>, a: Q, q0: Q) -> Self {
        let s = QPoly::x();
        let chart0 = ChartFn {
            plus: Piece { q0: Some(q0.clone()), terms: vec![Term::log(Q::from_integer(1.into()), QPoly::linear_root(a.clone()))] },
            minus: Piece { q0: Some(q0.clone()), terms: vec![Term::log(Q::from_integer(1.into()), s.clone())] },
        };
        // in S = 1/T: T - a = (1 - aS)/S
        let one_minus_as = QPoly::new(vec![Q::from_integer(1.into()), -a]);
        let ls = Term { shift: q0.clone(), factors: vec![(Q::from_integer(1.into()), s)] };
        let chart_inf = ChartFn {
            plus: Piece { q0: None, terms: vec![ls.clone(), Term::log(Q::from_integer(1.into()), one_minus_as)] },
            minus: Piece { q0: Some(Q::zero()), terms: vec![ls] },
        };
        AffableFn { id: id.into(), chart0, chart_inf }
    }

    pub fn chart(&self, c: Chart) -> &ChartFn {
        match c {
            Chart::Zero => &self.chart0,
            Chart::Inf => &self.chart_inf,
        }
    }

    fn map_charts(&self, id: String, f: impl Fn(&ChartFn) -> ChartFn) -> AffableFn {
        AffableFn { id, chart0: f(&self.chart0), chart_inf: f(&self.chart_inf) }
    }

    /// Multiplication by a rational; negative factors swap the pieces.
    pub fn scale(&self, s: &Q) -> AffableFn {
        let id = format!("{}*{}", format_rational(s), self.id);
        self.map_charts(id, |c| {
            if s.is_negative() {
                let t = -s;
                ChartFn { plus: c.minus.scale(&t), minus: c.plus.scale(&t) }
            } else {
                ChartFn { plus: c.plus.scale(s), minus: c.minus.scale(s) }
            }
        })
    }

    pub fn combine(&self, op: CombineOp, other: &AffableFn) -> AffableFn {
        let pair = |a: &ChartFn, b: &ChartFn| -> ChartFn {
            match op {
                CombineOp::Add => ChartFn { plus: a.plus.add(&b.plus), minus: a.minus.add(&b.minus) },
                // max(u, v) = max(u⁺ + v⁻, v⁺ + u⁻) - (u⁻ + v⁻)
                CombineOp::Max => ChartFn {
                    plus: a.plus.add(&b.minus).max(&b.plus.add(&a.minus)),
                    minus: a.minus.add(&b.minus),
                },
                // min(u, v) = (u⁺ + v⁺) - max(u⁺ + v⁻, v⁺ + u⁻)
                CombineOp::Min => ChartFn {
                    plus: a.plus.add(&b.plus),
                    minus: a.plus.add(&b.minus).max(&b.plus.add(&a.minus)),
                },
            }
        };
        let name = match op {
            CombineOp::Add => "add",
            CombineOp::Max => "max",
            CombineOp::Min => "min",
        };
        AffableFn {
            id: format!("{name}({},{})", self.id, other.id),
            chart0: pair(&self.chart0, &other.chart0),
            chart_inf: pair(&self.chart_inf, &other.chart_inf),
        }
    }

    /// Scales every constant by `eps`; evaluating the result on the flowed fiber at the
    /// flowed point gives `eps` times the original value.
    pub fn rescale_constants(&self, eps: &Q) -> AffableFn {
        let fix = |p: &Piece| Piece {
            q0: p.q0.as_ref().map(|c| c * eps),
            terms: p.terms.iter().map(|t| Term { shift: &t.shift * eps, factors: t.factors.clone() }).collect(),
        };
        self.map_charts(self.id.clone(), |c| ChartFn { plus: fix(&c.plus), minus: fix(&c.minus) })
    }

    pub fn eval_in_chart(&self, place: &Place, chart: Chart, x: &BerkPoint) -> Result<LogMag> {
        match chart {
            Chart::Zero => self.chart0.eval(place, x),
            Chart::Inf => self.chart_inf.eval(place, &inverse_point(place, x)?),
        }
    }

    fn branch_values(&self, place: &Place, chart: Chart, x: &BerkPoint) -> Result<(Vec<LogMag>, Vec<LogMag>)> {
        let c = self.chart(chart);
        let y = match chart {
            Chart::Zero => x.clone(),
            Chart::Inf => inverse_point(place, x)?,
        };
        Ok((c.plus.branches(place, &y)?, c.minus.branches(place, &y)?))
    }
}

/// `f(x)`, exact over ultrametric fibers.
pub fn affable_eval(place: &Place, f: &AffableFn, x: &BerkPoint) -> Result<LogMag> {
    let x = canonicalize(place, x)?;
    f.eval_in_chart(place, chart_of(place, &x)?, &x)
}

pub fn affable_eval_f64(place: &Place, f: &AffableFn, x: &BerkPoint) -> Result<f64> {
    Ok(affable_eval(place, f, x)?.to_f64())
}

pub fn affable_combine(op: CombineOp, f: &AffableFn, g: &AffableFn) -> AffableFn {
    f.combine(op, g)
}

/// Points of `|T| = 1` on which both charts are compared.
pub fn overlap_probes(place: &Place) -> Vec<BerkPoint> {
    if place.is_archimedean() {
        let radii = [0.6, 0.9, 1.2, 1.9];
        return radii
            .iter()
            .flat_map(|&r| (0..4).map(move |k| Complex64::from_polar(r, TAU * (k as f64 + 0.3) / 4.0)))
            .map(|z| BerkPoint::Classical(Scalar::Cx(z)))
            .collect();
    }
    let mut out = vec![BerkPoint::gauss()];
    let units: Vec<Q> = (1..40i64)
        .flat_map(|n| [Q::from_integer(n.into()), Q::from_integer((-n).into()), Q::new(1.into(), (n + 1).into())])
        .filter(|c| matches!(ulog(place, c), Ok(Some(v)) if v.is_zero()))
        .collect();
    let radii = [Q::new((-1).into(), 2.into()), Q::from_integer((-1).into()), Q::from_integer((-3).into())];
    for (i, c) in units.iter().enumerate() {
        if out.len() >= 16 {
            break;
        }
        let x = if i % 4 == 3 {
            BerkPoint::rational(c.clone())
        } else {
            BerkPoint::disk(c.clone(), radii[i % 4 % 3].clone())
        };
        if let Ok(x) = canonicalize(place, &x) {
            if !out.contains(&x) {
                out.push(x);
            }
        }
    }
    out
}

/// Largest chart disagreement on the overlap probes (`0` when exact).
pub fn chart_mismatch(place: &Place, f: &AffableFn) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in overlap_probes(place) {
        let a = f.eval_in_chart(place, Chart::Zero, &x);
        let b = f.eval_in_chart(place, Chart::Inf, &x);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                if a.is_exact() && b.is_exact() && a.approx_eq(&b, 0.0) {
                    continue;
                }
                worst = worst.max((a.to_f64() - b.to_f64()).abs());
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok(worst)
}

/// Checks the gluing condition: exact agreement over ultrametric fibers, `1e-9` otherwise.
pub fn check_charts(place: &Place, f: &AffableFn) -> Result<()> {
    let m = chart_mismatch(place, f)?;
    let ok = if place.is_archimedean() { m <= 1e-9 } else { m == 0.0 };
    if ok {
        Ok(())
    } else {
        domain(format!("charts of {} disagree on |T| = 1 by {m}", f.id))
    }
}

fn log_place_units(place: &Place, natural: f64) -> Result<Q> {
    let unit = place.log_unit().value();
    let x = natural / unit;
    // round down so the sampled disk stays inside D̄(4)
    let s = snap_to_rational(x, 64)?;
    Ok(if crate::arith::to_f64(&s) > x { s - Q::new(1.into(), 64.into()) } else { s })
}

/// `Σ_charts (2/log 2)(‖f⁺‖ + ‖f⁻‖)` with sup norms over `D̄(4)` in each chart,
/// bounding the total variation of the Laplacian of `f` on a fiber.
pub fn mass_bound(exec: Execution, place: &Place, f: &AffableFn) -> Result<f64> {
    let net = sup_net(place)?;
    let mut total = 0.0;
    for chart in [&f.chart0, &f.chart_inf] {
        let sups = map_collect(exec, &net, |x| -> Result<(f64, f64)> {
            let a = chart.plus.eval(place, x)?.to_f64().abs();
            let b = chart.minus.eval(place, x)?.to_f64().abs();
            Ok((if a.is_finite() { a } else { 0.0 }, if b.is_finite() { b } else { 0.0 }))
        });
        let (mut sp, mut sm) = (0.0f64, 0.0f64);
        for s in sups {
            let (a, b) = s?;
            sp = sp.max(a);
            sm = sm.max(b);
        }
        total += 2.0 / 2f64.ln() * (sp + sm);
    }
    Ok(total)
}

/// A 256-point net of the closed disk of radius 4 (archimedean), or skeleton vertices
/// of a subtree of the Berkovich disk of radius 4 (ultrametric).
fn sup_net(place: &Place) -> Result<Vec<BerkPoint>> {
    if place.is_archimedean() {
        let r4 = 4f64.powf(1.0 / place.eps_f64());
        return Ok((1..=16)
            .flat_map(|i| (0..16).map(move |k| Complex64::from_polar(r4 * i as f64 / 16.0, TAU * (k as f64 + 0.5 * (i % 2) as f64) / 16.0)))
            .map(|z| BerkPoint::Classical(Scalar::Cx(z)))
            .collect());
    }
    let top = log_place_units(place, 4f64.ln())?;
    let mut leaves = vec![BerkPoint::disk(Q::zero(), top.clone())];
    for c in -4i64..=4 {
        for depth in [1i64, 4] {
            let x = BerkPoint::disk(Q::from_integer(c.into()), &top - Q::from_integer(depth.into()));
            if let Ok(x) = canonicalize(place, &x) {
                leaves.push(x);
            }
        }
    }
    let sk = build_skeleton(place, &leaves)?;
    Ok(sk.labels().iter().flatten().cloned().collect())
}

/// Restriction to a skeleton with vertices added at every kink found on an edge.
#[derive(Debug, Clone)]
pub struct Restriction {
    pub function: PLFunction<Q>,
    pub inserted: Vec<usize>,
}

fn exact_coeff(place: &Place, v: &LogMag, at: &BerkPoint) -> Result<Q> {
    match v {
        LogMag::Exact { coeff, unit } if *unit == place.log_unit() || coeff.is_zero() => Ok(coeff.clone()),
        other => Err(Error::Numeric(format!("value {other} at {at} is not exact"))),
    }
}

fn disk_parts(x: &BerkPoint) -> Option<(&Q, &Q)> {
    match x {
        BerkPoint::Disk { center, logr } => Some((center, logr)),
        _ => None,
    }
}

/// Log-radii where two monomials of `g`, expanded at `center`, tie.
fn monomial_ties(place: &Place, g: &QPoly, center: &Q) -> Result<Vec<Q>> {
    let coeffs: Vec<(usize, Q)> = g
        .recenter(center)
        .coeffs()
        .iter()
        .enumerate()
        .filter_map(|(i, a)| ulog(place, a).transpose().map(|v| v.map(|v| (i, v))))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (a, (j, lj)) in coeffs.iter().enumerate() {
        for (k, lk) in &coeffs[a + 1..] {
            out.push((lj - lk) / Q::from_integer(((*k - *j) as i64).into()));
        }
    }
    Ok(out)
}

/// Candidate breakpoints of `f` along `η_{c,ρ}`, `lo < ρ < hi`, from chart changes
/// and monomial ties of the chart polynomials.
fn structural_breaks(place: &Place, f: &AffableFn, c: &Q, lo: &Q, hi: &Q) -> Result<BTreeSet<Q>> {
    let mut cand = BTreeSet::new();
    cand.insert(Q::zero());
    let lc = ulog(place, c)?;
    if let Some(l) = &lc {
        cand.insert(l.clone());
    }
    for g in f.chart0.polys() {
        cand.extend(monomial_ties(place, g, c)?);
    }
    for g in f.chart_inf.polys() {
        // S-coordinate of η_{c,ρ} is η_{1/c, ρ - 2 log|c|} while |c| > r, else η_{0,-ρ}
        if let Some(l) = &lc {
            for s in monomial_ties(place, g, &c.recip())? {
                cand.insert(s + l * Q::from_integer(2.into()));
            }
        }
        for s in monomial_ties(place, g, &Q::zero())? {
            cand.insert(-s);
        }
    }
    Ok(cand.into_iter().filter(|r| r > lo && r < hi).collect())
}

fn crossing(a: &Q, b: &Q, da: &Q, db: &Q) -> Option<Q> {
    // da, db: difference of two affine branches at the ends of [a, b]
    if (da.is_positive() && db.is_negative()) || (da.is_negative() && db.is_positive()) {
        Some(a + (b - a) * da / (da - db))
    } else {
        None
    }
}

/// Exact values of `f` at the vertices of a skeleton, refined so that `f` is affine on
/// every edge.
pub fn restrict_to_skeleton(place: &Place, f: &AffableFn, skeleton: &MetricGraph<Q>) -> Result<Restriction> {
    if place.is_archimedean() {
        return domain("restriction to skeleta needs an ultrametric place");
    }
    let value = |x: &BerkPoint| -> Result<Q> { exact_coeff(place, &affable_eval(place, f, x)?, x) };
    let mut values = Vec::with_capacity(skeleton.num_vertices());
    for v in 0..skeleton.num_vertices() {
        let x = skeleton.label(v).ok_or_else(|| Error::Domain(format!("vertex {v} is unlabelled")))?;
        values.push(value(x)?);
    }
    let mut u = PLFunction::new(skeleton.clone(), values)?;
    let mut inserted = Vec::new();
    let edge_count = skeleton.edges().len();
    for e in 0..edge_count {
        let edge = skeleton.edges()[e].clone();
        let (Some(xa), Some(xb)) = (skeleton.label(edge.a), skeleton.label(edge.b)) else {
            continue;
        };
        let (Some((ca, ra)), Some((cb, rb))) = (disk_parts(xa), disk_parts(xb)) else {
            continue;
        };
        let (center, lo, hi, a_is_child) = if ra <= rb { (ca, ra, rb, true) } else { (cb, rb, ra, false) };
        let at = |rho: &Q| canonicalize(place, &BerkPoint::disk(center.clone(), rho.clone()));
        let mut pts: Vec<Q> = std::iter::once(lo.clone())
            .chain(structural_breaks(place, f, center, lo, hi)?)
            .chain(std::iter::once(hi.clone()))
            .collect();
        // between structural breaks every branch is affine; add branch crossings
        let mut extra = Vec::new();
        for w in pts.windows(2) {
            let mid = (&w[0] + &w[1]) / Q::from_integer(2.into());
            let chart = chart_of(place, &at(&mid)?)?;
            let (pa, ma) = f.branch_values(place, chart, &at(&w[0])?)?;
            let (pb, mb) = f.branch_values(place, chart, &at(&w[1])?)?;
            for (va, vb) in [(pa, pb), (ma, mb)] {
                let ea: Vec<Q> = va.iter().map(|v| exact_coeff(place, v, xa)).collect::<Result<_>>()?;
                let eb: Vec<Q> = vb.iter().map(|v| exact_coeff(place, v, xb)).collect::<Result<_>>()?;
                for i in 0..ea.len() {
                    for j in i + 1..ea.len() {
                        if let Some(r) = crossing(&w[0], &w[1], &(&ea[i] - &ea[j]), &(&eb[i] - &eb[j])) {
                            extra.push(r);
                        }
                    }
                }
            }
        }
        pts.extend(extra);
        pts.sort();
        pts.dedup();
        let vals: Vec<Q> = pts.iter().map(|r| value(&at(r)?)).collect::<Result<_>>()?;
        let mut kinks = Vec::new();
        for i in 1..pts.len() - 1 {
            let left = (&vals[i] - &vals[i - 1]) / (&pts[i] - &pts[i - 1]);
            let right = (&vals[i + 1] - &vals[i]) / (&pts[i + 1] - &pts[i]);
            if left != right {
                kinks.push((pts[i].clone(), vals[i].clone()));
            }
        }
        // split from the far end so the remaining piece keeps index e and endpoint a
        kinks.sort_by(|x, y| y.0.cmp(&x.0));
        if !a_is_child {
            kinks.reverse();
        }
        for (rho, val) in kinks {
            let t = if a_is_child { &rho - lo } else { hi - &rho };
            let (next, m) = u.subdivide(e, t, Some(at(&rho)?))?;
            let mut vs = next.values().to_vec();
            vs[m] = val;
            u = PLFunction::new(next.graph().clone(), vs)?;
            inserted.push(m);
        }
    }
    Ok(Restriction { function: u, inserted })
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FactorJson {
    q: String,
    g: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TermJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shift: Option<String>,
    factors: Vec<FactorJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PieceJson {
    q0: String,
    #[serde(default)]
    terms: Vec<TermJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChartJson {
    plus: PieceJson,
    minus: PieceJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffableJson {
    id: String,
    chart0: ChartJson,
    chart_inf: ChartJson,
}

fn poly_to_json(g: &QPoly) -> Vec<String> {
    g.coeffs().iter().map(format_rational).collect()
}

fn piece_to_json(p: &Piece) -> PieceJson {
    PieceJson {
        q0: p.q0.as_ref().map(format_rational).unwrap_or_else(|| "-inf".into()),
        terms: p
            .terms
            .iter()
            .map(|t| TermJson {
                shift: (!t.shift.is_zero()).then(|| format_rational(&t.shift)),
                factors: t.factors.iter().map(|(q, g)| FactorJson { q: format_rational(q), g: poly_to_json(g) }).collect(),
            })
            .collect(),
    }
}

fn piece_from_json(p: &PieceJson) -> Result<Piece> {
    let q0 = match p.q0.trim() {
        "-inf" => None,
        s => Some(parse_rational(s)?),
    };
    let terms = p
        .terms
        .iter()
        .map(|t| -> Result<Term> {
            let shift = t.shift.as_deref().map(parse_rational).transpose()?.unwrap_or_else(Q::zero);
            let factors = t
                .factors
                .iter()
                .map(|f| -> Result<(Q, QPoly)> {
                    let g = f.g.iter().map(|c| parse_rational(c)).collect::<Result<Vec<Q>>>()?;
                    Ok((parse_rational(&f.q)?, QPoly::new(g)))
                })
                .collect::<Result<_>>()?;
            Ok(Term { shift, factors })
        })
        .collect::<Result<_>>()?;
    Ok(Piece { q0, terms })
}

impl AffableFn {
    pub fn to_json(&self) -> AffableJson {
        let chart = |c: &ChartFn| ChartJson { plus: piece_to_json(&c.plus), minus: piece_to_json(&c.minus) };
        AffableJson { id: self.id.clone(), chart0: chart(&self.chart0), chart_inf: chart(&self.chart_inf) }
    }

    pub fn from_json(j: &AffableJson) -> Result<Self> {
        let chart = |c: &ChartJson| -> Result<ChartFn> { Ok(ChartFn { plus: piece_from_json(&c.plus)?, minus: piece_from_json(&c.minus)? }) };
        AffableFn::new(j.id.clone(), chart(&j.chart0)?, chart(&j.chart_inf)?)
    }
}

/// Parses a single function or a list of functions.
pub fn parse_affable_list(json: &str) -> Result<Vec<AffableFn>> {
    let value: serde_json::Value = serde_json::from_str(json)?;
    let items: Vec<AffableJson> = if value.is_array() { serde_json::from_value(value)? } else { vec![serde_json::from_value(value)?] };
    items.iter().map(AffableFn::from_json).collect()
}

pub const BATTERY_JSON: &str = include_str!("../data/affable_battery.json");

/// The shipped eight-function test battery.
pub fn standard_battery() -> Vec<AffableFn> {
    parse_affable_list(BATTERY_JSON).expect("shipped battery parses")
}
