//! Points of the Berkovich projective line over a single fiber.
//!
//! Disk points `η_{z,r}` carry an exact log-radius `ρ = log r` expressed in the
//! log unit of the place (multiples of `log p` for p-adic places, plain numbers
//! for trivially valued fibers). Type-4 points are not represented.

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::arith::{ceil_i64, format_rational, padic_truncate, parse_rational, snap_to_rational, valuation, Q};
use crate::error::{domain, Error, Result};
use crate::graph::{Edge, MetricGraph};
use crate::poly::{CPoly, QPoly};
use crate::valued_fields::{abs_log, check_flow_exponent, LogMag, Place};

/// Affine coordinate of a classical point.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Rat(Q),
    Cx(Complex64),
}

impl Scalar {
    pub fn to_complex(&self) -> Complex64 {
        match self {
            Scalar::Rat(q) => Complex64::new(crate::arith::to_f64(q), 0.0),
            Scalar::Cx(z) => *z,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BerkPoint {
    /// The point `[z : 1]`.
    Classical(Scalar),
    /// `η_{center, r}` with `logr = log r` in place units.
    Disk { center: Q, logr: Q },
    /// The point `[1 : 0]`.
    Infinity,
}

impl BerkPoint {
    pub fn gauss() -> Self {
        BerkPoint::Disk { center: Q::zero(), logr: Q::zero() }
    }

    pub fn disk(center: Q, logr: Q) -> Self {
        BerkPoint::Disk { center, logr }
    }

    pub fn rational(q: Q) -> Self {
        BerkPoint::Classical(Scalar::Rat(q))
    }

    pub fn complex(re: f64, im: f64) -> Self {
        BerkPoint::Classical(Scalar::Cx(Complex64::new(re, im)))
    }

    pub fn is_disk(&self) -> bool {
        matches!(self, BerkPoint::Disk { .. })
    }

    pub fn log_radius(&self) -> Option<&Q> {
        match self {
            BerkPoint::Disk { logr, .. } => Some(logr),
            _ => None,
        }
    }
}

impl fmt::Display for BerkPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BerkPoint::Classical(Scalar::Rat(q)) => write!(f, "{}", format_rational(q)),
            BerkPoint::Classical(Scalar::Cx(z)) => write!(f, "{}{:+}i", z.re, z.im),
            BerkPoint::Disk { center, logr } => write!(f, "eta({},{})", format_rational(center), format_rational(logr)),
            BerkPoint::Infinity => write!(f, "inf"),
        }
    }
}

/// Exact log-absolute value in place units; `None` is `-inf`.
pub(crate) fn ulog(place: &Place, x: &Q) -> Result<Option<Q>> {
    match abs_log(place, x) {
        LogMag::NegInf => Ok(None),
        LogMag::Exact { coeff, .. } => Ok(Some(coeff)),
        LogMag::PosInf => domain(format!("{} has infinite absolute value at {place}", format_rational(x))),
        LogMag::Float(_) => domain(format!("no exact absolute values at {place}")),
    }
}

fn require_ultrametric(place: &Place) -> Result<()> {
    if place.is_archimedean() {
        return domain(format!("disk points do not exist over the archimedean place {place}"));
    }
    Ok(())
}

fn opt_max(a: Option<Q>, b: Option<Q>) -> Option<Q> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if a >= b { a } else { b }),
        (a, None) => a,
        (None, b) => b,
    }
}

fn radius_mag(place: &Place, logr: &Q) -> LogMag {
    LogMag::exact(logr.clone(), place.log_unit())
}

/// `log |P(x)|` for a polynomial in the affine coordinate `T`.
pub fn eval_log_abs(place: &Place, point: &BerkPoint, p: &QPoly) -> Result<LogMag> {
    if p.is_zero() {
        return Ok(LogMag::NegInf);
    }
    match point {
        BerkPoint::Infinity => Ok(if p.degree() == Some(0) { abs_log(place, &p.coeff(0)) } else { LogMag::PosInf }),
        BerkPoint::Classical(Scalar::Rat(z)) => Ok(abs_log(place, &p.eval(z))),
        BerkPoint::Classical(Scalar::Cx(z)) => {
            if !place.is_archimedean() {
                return domain("complex points only live over archimedean places");
            }
            place.abs_log_complex(p.to_complex().eval(z))
        }
        BerkPoint::Disk { center, logr } => {
            require_ultrametric(place)?;
            let shifted = p.recenter(center);
            let r = radius_mag(place, logr);
            let mut best = LogMag::NegInf;
            for (i, a) in shifted.coeffs().iter().enumerate() {
                let term = abs_log(place, a).add(&r.scale(&Q::from_integer(i.into())));
                best = best.max(&term);
            }
            Ok(best)
        }
    }
}

/// Archimedean evaluation of a complex polynomial.
pub fn eval_log_abs_complex(place: &Place, point: &BerkPoint, p: &CPoly) -> Result<LogMag> {
    if !place.is_archimedean() {
        return domain("complex coefficients only make sense over archimedean places");
    }
    match point {
        BerkPoint::Disk { .. } => domain("disk points do not exist over archimedean places"),
        BerkPoint::Infinity => Ok(match p.degree() {
            None => LogMag::NegInf,
            Some(0) => place.abs_log_complex(p.coeff(0))?,
            Some(_) => LogMag::PosInf,
        }),
        BerkPoint::Classical(s) => place.abs_log_complex(p.eval(&s.to_complex())),
    }
}

/// Whether `|P|` takes the same value at every point of the closed disk `x`.
pub fn constant_on_disk(place: &Place, x: &BerkPoint, p: &QPoly) -> Result<bool> {
    let BerkPoint::Disk { center, logr } = x else {
        return domain("expected a disk point");
    };
    let shifted = p.recenter(center);
    let Some(a0) = ulog(place, &shifted.coeff(0))? else {
        return Ok(shifted.is_zero());
    };
    for (i, a) in shifted.coeffs().iter().enumerate().skip(1) {
        if let Some(l) = ulog(place, a)? {
            if l + logr * Q::from_integer(i.into()) >= a0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `x ↦ x^ε`: log-radii scale by ε, classical points are fixed. Pair with
/// [`crate::valued_fields::flow_place`] on the base.
pub fn flow_point(point: &BerkPoint, eps: &Q) -> Result<BerkPoint> {
    check_flow_exponent(eps)?;
    Ok(match point {
        BerkPoint::Disk { center, logr } => BerkPoint::Disk { center: center.clone(), logr: logr * eps },
        other => other.clone(),
    })
}

const MAX_TRUNCATION_DEPTH: i64 = 4096;

/// Unique representative of a point: disk centers are reduced to the simplest
/// rational in the disk.
pub fn canonicalize(place: &Place, point: &BerkPoint) -> Result<BerkPoint> {
    let BerkPoint::Disk { center, logr } = point else {
        if let BerkPoint::Classical(Scalar::Cx(_)) = point {
            if !place.is_archimedean() {
                return domain("complex points only live over archimedean places");
            }
        }
        return Ok(point.clone());
    };
    require_ultrametric(place)?;
    let center = match place {
        Place::Padic { p, eps } => {
            let depth = -logr / eps;
            if center.is_zero() {
                Q::zero()
            } else if depth > Q::from_integer(MAX_TRUNCATION_DEPTH.into()) {
                return Err(Error::Numeric(format!("disk of log-radius {} is too small to represent", format_rational(logr))));
            } else {
                padic_truncate(center, *p, ceil_i64(&depth))
            }
        }
        Place::Trivial | Place::TAdic { .. } => {
            if logr.is_negative() {
                center.clone()
            } else {
                Q::zero()
            }
        }
        Place::ResidueTrivial { p } => {
            if valuation(center, *p) < 0 {
                return domain("disk centers must be p-integral at a residue-trivial place");
            }
            if logr.is_negative() {
                padic_truncate(center, *p, 1)
            } else {
                Q::zero()
            }
        }
        Place::Archimedean { .. } => unreachable!(),
    };
    Ok(BerkPoint::Disk { center, logr: logr.clone() })
}

pub fn same_point(place: &Place, a: &BerkPoint, b: &BerkPoint) -> Result<bool> {
    Ok(canonicalize(place, a)? == canonicalize(place, b)?)
}

/// Whether the closed disk of `outer` contains `inner` (a disk or rational point).
pub fn disk_contains(place: &Place, outer: &BerkPoint, inner: &BerkPoint) -> Result<bool> {
    let BerkPoint::Disk { center: co, logr: ro } = outer else {
        return domain("outer point must be a disk");
    };
    require_ultrametric(place)?;
    let (ci, ri) = match inner {
        BerkPoint::Disk { center, logr } => (center, Some(logr)),
        BerkPoint::Classical(Scalar::Rat(z)) => (z, None),
        BerkPoint::Infinity => return Ok(false),
        BerkPoint::Classical(Scalar::Cx(_)) => return domain("complex points only live over archimedean places"),
    };
    if ri.is_some_and(|r| r > ro) {
        return Ok(false);
    }
    Ok(ulog(place, &(ci - co))?.is_none_or(|d| d <= *ro))
}

/// Smallest point dominating both `a` and `b` for the partial order with `∞` on top.
pub fn join(place: &Place, a: &BerkPoint, b: &BerkPoint) -> Result<BerkPoint> {
    require_ultrametric(place)?;
    let parts = |x: &BerkPoint| -> Result<Option<(Q, Option<Q>)>> {
        Ok(match x {
            BerkPoint::Infinity => None,
            BerkPoint::Disk { center, logr } => Some((center.clone(), Some(logr.clone()))),
            BerkPoint::Classical(Scalar::Rat(z)) => Some((z.clone(), None)),
            BerkPoint::Classical(Scalar::Cx(_)) => return domain("complex points only live over archimedean places"),
        })
    };
    let (Some((ca, ra)), Some((cb, rb))) = (parts(a)?, parts(b)?) else {
        return Ok(BerkPoint::Infinity);
    };
    let diff = match abs_log(place, &(&ca - &cb)) {
        LogMag::PosInf => return Ok(BerkPoint::Infinity),
        _ => ulog(place, &(&ca - &cb))?,
    };
    match opt_max(opt_max(ra, rb), diff) {
        None => Ok(a.clone()),
        Some(r) => canonicalize(place, &BerkPoint::Disk { center: ca, logr: r }),
    }
}

/// Length of the path between two disk points.
pub fn hyperbolic_distance(place: &Place, a: &BerkPoint, b: &BerkPoint) -> Result<Q> {
    let (Some(ra), Some(rb)) = (a.log_radius(), b.log_radius()) else {
        return domain("hyperbolic distance needs two disk points");
    };
    let j = join(place, a, b)?;
    let rj = j.log_radius().ok_or_else(|| Error::Domain("points do not meet below infinity".into()))?;
    Ok((rj - ra) + (rj - rb))
}

/// Convex hull of finitely many disk points, with the leaves as boundary.
/// Vertices are the inputs (deduplicated, in order) followed by pairwise joins.
pub fn build_skeleton(place: &Place, points: &[BerkPoint]) -> Result<MetricGraph<Q>> {
    require_ultrametric(place)?;
    if points.is_empty() {
        return domain("skeleton needs at least one point");
    }
    let mut verts: Vec<BerkPoint> = Vec::new();
    let push = |verts: &mut Vec<BerkPoint>, x: BerkPoint| {
        if !verts.contains(&x) {
            verts.push(x);
        }
    };
    for x in points {
        if !x.is_disk() {
            return domain(format!("skeleton vertices must be disk points, got {x}"));
        }
        push(&mut verts, canonicalize(place, x)?);
    }
    let n = verts.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = join(place, &verts[i], &verts[j])?;
            push(&mut verts, m);
        }
    }
    let mut edges = Vec::new();
    for (i, v) in verts.iter().enumerate() {
        let rv = v.log_radius().expect("disk vertex");
        let mut parent: Option<usize> = None;
        for (j, w) in verts.iter().enumerate() {
            if i == j || !disk_contains(place, w, v)? {
                continue;
            }
            let rw = w.log_radius().expect("disk vertex");
            if parent.is_none_or(|k| rw < verts[k].log_radius().expect("disk vertex")) {
                parent = Some(j);
            }
        }
        if let Some(k) = parent {
            edges.push(Edge { a: k, b: i, length: verts[k].log_radius().expect("disk vertex") - rv });
        }
    }
    let labels = verts.into_iter().map(Some).collect();
    let g = MetricGraph::new(labels, edges, Vec::new())?;
    let leaves = g.leaves();
    g.with_boundary(leaves)
}

/// Where a retracted point sits on the skeleton.
#[derive(Debug, Clone, PartialEq)]
pub enum Location {
    Vertex(usize),
    /// Interior point of an edge at distance `offset` from its endpoint `a`.
    Edge { edge: usize, offset: Q },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retraction {
    pub point: BerkPoint,
    pub location: Location,
}

fn labelled_disks(skeleton: &MetricGraph<Q>) -> Result<Vec<&BerkPoint>> {
    (0..skeleton.num_vertices())
        .map(|v| match skeleton.label(v) {
            Some(x @ BerkPoint::Disk { .. }) => Ok(x),
            _ => domain(format!("skeleton vertex {v} is not labelled by a disk point")),
        })
        .collect()
}

/// Nearest point of a skeleton tree.
pub fn retract(place: &Place, point: &BerkPoint, skeleton: &MetricGraph<Q>) -> Result<Retraction> {
    require_ultrametric(place)?;
    let verts = labelled_disks(skeleton)?;
    let radius = |x: &BerkPoint| x.log_radius().cloned().expect("disk point");
    let root = (0..verts.len()).max_by(|&a, &b| radius(verts[a]).cmp(&radius(verts[b]))).expect("nonempty skeleton");
    let tau = match point {
        BerkPoint::Infinity => verts[root].clone(),
        _ => {
            let mut best: Option<BerkPoint> = None;
            for v in &verts {
                let j = join(place, point, v)?;
                let better = match (&best, j.log_radius()) {
                    (_, None) => false,
                    (None, Some(_)) => true,
                    (Some(b), Some(r)) => *r < radius(b),
                };
                if better {
                    best = Some(j);
                }
            }
            match best {
                Some(j) if radius(&j) <= radius(verts[root]) => j,
                _ => verts[root].clone(),
            }
        }
    };
    let tau = canonicalize(place, &tau)?;
    for (i, v) in verts.iter().enumerate() {
        if canonicalize(place, v)? == tau {
            return Ok(Retraction { point: tau, location: Location::Vertex(i) });
        }
    }
    let rt = radius(&tau);
    for (k, e) in skeleton.edges().iter().enumerate() {
        let (va, vb) = (verts[e.a], verts[e.b]);
        let (child, parent) = match radius(va).cmp(&radius(vb)) {
            Ordering::Less => (va, vb),
            _ => (vb, va),
        };
        if disk_contains(place, &tau, child)? && disk_contains(place, parent, &tau)? {
            let offset = if std::ptr::eq(child, va) { &rt - radius(va) } else { radius(va) - &rt };
            return Ok(Retraction { point: tau, location: Location::Edge { edge: k, offset } });
        }
    }
    Err(Error::Numeric(format!("retraction {tau} not found on the skeleton")))
}

/// The chart change `S = 1/T`.
pub fn inverse_point(place: &Place, point: &BerkPoint) -> Result<BerkPoint> {
    Ok(match point {
        BerkPoint::Infinity => BerkPoint::rational(Q::zero()),
        BerkPoint::Classical(Scalar::Rat(z)) if z.is_zero() => BerkPoint::Infinity,
        BerkPoint::Classical(Scalar::Rat(z)) => BerkPoint::rational(z.recip()),
        BerkPoint::Classical(Scalar::Cx(z)) if *z == Complex64::zero() => BerkPoint::Infinity,
        BerkPoint::Classical(Scalar::Cx(z)) => BerkPoint::Classical(Scalar::Cx(z.inv())),
        BerkPoint::Disk { center, logr } => {
            require_ultrametric(place)?;
            match ulog(place, center)? {
                Some(lc) if lc > *logr => BerkPoint::Disk { center: center.recip(), logr: logr - lc * Q::from_integer(2.into()) },
                _ => BerkPoint::Disk { center: Q::zero(), logr: -logr },
            }
        }
    })
}

// ---------------------------------------------------------------------------
// JSON: {"t":"cls","re":..,"im":..} | {"t":"disk","center":"a/b","logr":"c/d"} | {"t":"inf"}

#[derive(Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "lowercase")]
enum PointRepr {
    Cls {
        re: serde_json::Value,
        #[serde(default)]
        im: Option<f64>,
    },
    Disk {
        center: serde_json::Value,
        logr: serde_json::Value,
    },
    Inf,
}

fn rational_from_json(v: &serde_json::Value) -> Result<Q> {
    match v {
        serde_json::Value::String(s) => parse_rational(s),
        serde_json::Value::Number(n) => {
            let text = n.to_string();
            parse_rational(&text).or_else(|_| snap_to_rational(n.as_f64().unwrap_or(f64::NAN), 1_000_000))
        }
        other => Err(Error::Parse(format!("expected a rational, got {other}"))),
    }
}

impl Serialize for BerkPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let text = |q: &Q| serde_json::Value::String(format_rational(q));
        let repr = match self {
            BerkPoint::Classical(Scalar::Rat(q)) => PointRepr::Cls { re: text(q), im: Some(0.0) },
            BerkPoint::Classical(Scalar::Cx(z)) => PointRepr::Cls { re: serde_json::json!(z.re), im: Some(z.im) },
            BerkPoint::Disk { center, logr } => PointRepr::Disk { center: text(center), logr: text(logr) },
            BerkPoint::Infinity => PointRepr::Inf,
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for BerkPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let point = match PointRepr::deserialize(d)? {
            PointRepr::Inf => Ok(BerkPoint::Infinity),
            PointRepr::Disk { center, logr } => rational_from_json(&center)
                .and_then(|c| Ok(BerkPoint::Disk { center: c, logr: rational_from_json(&logr)? })),
            PointRepr::Cls { re: serde_json::Value::String(s), im } if im.unwrap_or(0.0) == 0.0 => {
                parse_rational(&s).map(BerkPoint::rational)
            }
            PointRepr::Cls { re, im } => match re.as_f64() {
                Some(x) => Ok(BerkPoint::complex(x, im.unwrap_or(0.0))),
                None => Err(Error::Parse(format!("bad real part {re}"))),
            },
        };
        point.map_err(D::Error::custom)
    }
}

pub fn parse_point(json: &str) -> Result<BerkPoint> {
    Ok(serde_json::from_str(json)?)
}
