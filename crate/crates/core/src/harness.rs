//! Sweeps over grids of places, contraction reports, and tabular output.

use std::path::PathBuf;

use num_complex::Complex64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::affable::{affable_eval, affable_eval_f64, parse_affable_list, standard_battery, AffableFn};
use crate::arith::{parse_rational, snap_to_rational, to_f64, Q};
use crate::berkovich::{build_skeleton, canonicalize, BerkPoint, Scalar};
use crate::error::{domain, Error, Result};
use crate::graph::{GraphJson, MetricGraph};
use crate::green::{error_bound, g_bound, successive_ecarts, PotentialContext};
use crate::maps::{CxPoint, HomogeneousLift, MapJson};
use crate::measures::{circle_mean, equilibrium_arch, equilibrium_nonarch, ArchEquilibrium};
use crate::par::{map_collect, Execution};
use crate::valued_fields::Place;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Base {
    /// `|.|_∞^ε`, `ε ∈ (0, 1]`, ending at the trivial absolute value.
    #[default]
    Hybrid,
    /// One branch of the spectrum of Z: archimedean, or p-adic when `p` is given.
    Mz {
        #[serde(default)]
        p: Option<u64>,
    },
}

impl Base {
    /// `ε ∈ {1, 1/2, …, 2^-10}` followed by the trivial endpoint.
    pub fn default_grid(&self) -> Vec<Place> {
        let eps = (0..=10).map(|k| Q::new(1.into(), (1i64 << k).into()));
        let mut grid: Vec<Place> = match self {
            Base::Hybrid | Base::Mz { p: None } => eps.map(|e| Place::Archimedean { eps: e }).collect(),
            Base::Mz { p: Some(p) } => eps.map(|e| Place::Padic { p: *p, eps: e }).collect(),
        };
        grid.push(Place::Trivial);
        grid
    }
}

/// Radius of `χ_{c,ρ}` as a function of the place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadiusSpec {
    /// The same radius at every place.
    Const(String),
    /// `b^ε`.
    Pow(String),
}

impl Default for RadiusSpec {
    fn default() -> Self {
        RadiusSpec::Const("1".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionSource {
    /// `"battery"` or a path to a JSON file.
    Named(String),
    Inline(serde_json::Value),
}

impl Default for FunctionSource {
    fn default() -> Self {
        FunctionSource::Named("battery".into())
    }
}

fn default_quad() -> usize {
    256
}

fn default_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub base: Base,
    #[serde(default)]
    pub grid: Option<Vec<Place>>,
    #[serde(default)]
    pub map: Option<MapJson>,
    #[serde(default)]
    pub functions: FunctionSource,
    /// Keep only these function ids.
    #[serde(default)]
    pub select: Option<Vec<String>>,
    #[serde(default)]
    pub center: Option<String>,
    #[serde(default)]
    pub radius: RadiusSpec,
    #[serde(default = "default_quad")]
    pub quad_n: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Preimage levels for archimedean equilibrium rows.
    #[serde(default)]
    pub levels: Option<usize>,
    #[serde(default)]
    pub seed_point: Option<[f64; 2]>,
    #[serde(default)]
    pub skeleton: Option<GraphJson>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config parses")
    }
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Vec<Place> {
        self.grid.clone().unwrap_or_else(|| self.base.default_grid())
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid();
        if grid.is_empty() {
            return domain("grid is empty");
        }
        let endpoint = |p: &Place| matches!(p, Place::Trivial | Place::ResidueTrivial { .. });
        if let Some(i) = grid.iter().position(endpoint) {
            if i + 1 != grid.len() {
                return domain("the trivial endpoint must be the last place of the grid");
            }
        }
        if self.quad_n < 4 {
            return domain("quad_n must be at least 4");
        }
        if !(self.tol > 0.0) {
            return domain("tol must be positive");
        }
        Ok(())
    }

    pub fn functions(&self) -> Result<Vec<AffableFn>> {
        let all = match &self.functions {
            FunctionSource::Named(s) if s == "battery" => standard_battery(),
            FunctionSource::Named(path) => parse_affable_list(&std::fs::read_to_string(path)?)?,
            FunctionSource::Inline(v) => parse_affable_list(&v.to_string())?,
        };
        let picked: Vec<AffableFn> = match &self.select {
            Some(ids) => all.into_iter().filter(|f| ids.contains(&f.id)).collect(),
            None => all,
        };
        if picked.is_empty() {
            return domain("no test functions selected");
        }
        Ok(picked)
    }

    pub fn center(&self) -> Result<Q> {
        self.center.as_deref().map(parse_rational).transpose().map(|c| c.unwrap_or_else(Q::zero))
    }

    pub fn lift(&self) -> Result<HomogeneousLift> {
        let m = self.map.as_ref().ok_or_else(|| Error::Domain("config has no map".into()))?;
        HomogeneousLift::from_json(m)
    }

    pub fn seed(&self) -> CxPoint {
        let [re, im] = self.seed_point.unwrap_or([2.0, 0.0]);
        CxPoint::finite(re, im)
    }

    pub fn skeleton_for(&self, place: &Place) -> Result<MetricGraph<Q>> {
        match &self.skeleton {
            Some(g) => MetricGraph::from_json(g),
            None => default_skeleton(place),
        }
    }
}

/// `η_{0,r}` for `log r ∈ {-2, -3/2, …, 2}` in place units.
pub fn default_skeleton(place: &Place) -> Result<MetricGraph<Q>> {
    let pts: Vec<BerkPoint> = (-4..=4).map(|k| BerkPoint::disk(Q::zero(), Q::new(k.into(), 2.into()))).collect();
    build_skeleton(place, &pts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub place_kind: String,
    pub place_param: String,
    pub fn_id: String,
    pub value: f64,
    pub cert_err: f64,
    pub n_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SweepRow {
    fn new(place: &Place, f: &AffableFn, r: Result<(f64, f64, usize)>) -> Self {
        let (value, cert_err, n_used, note) = match r {
            Ok((v, e, n)) => (v, e, n, None),
            Err(err) => (f64::NAN, f64::NAN, 0, Some(err.to_string())),
        };
        SweepRow {
            place_kind: place.kind_str().into(),
            place_param: place.param_string(),
            fn_id: f.id.clone(),
            value,
            cert_err,
            n_used,
            note,
        }
    }
}

/// Successive differences of one function's row values in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub fn_id: String,
    pub diffs: Vec<f64>,
    /// Largest difference over the second half of the grid.
    pub tail_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub modulus: Vec<ModulusReport>,
}

impl SweepTable {
    fn from_rows(rows: Vec<SweepRow>, fns: &[AffableFn]) -> Self {
        let modulus = fns
            .iter()
            .map(|f| {
                let vals: Vec<f64> = rows.iter().filter(|r| r.fn_id == f.id).map(|r| r.value).collect();
                let diffs: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
                let tail_max = diffs[diffs.len() / 2..].iter().cloned().fold(0.0, f64::max);
                ModulusReport { fn_id: f.id.clone(), diffs, tail_max }
            })
            .collect();
        SweepTable { rows, modulus }
    }

    pub fn row(&self, place: &Place, fn_id: &str) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.fn_id == fn_id && r.place_kind == place.kind_str() && r.place_param == place.param_string())
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["place_kind", "place_param", "fn_id", "value", "cert_err", "n_used"])?;
        for r in &self.rows {
            w.write_record([&r.place_kind, &r.place_param, &r.fn_id, &r.value.to_string(), &r.cert_err.to_string(), &r.n_used.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn place_eps(place: &Place) -> Option<f64> {
    match place {
        Place::Archimedean { eps } | Place::Padic { eps, .. } | Place::TAdic { eps, .. } => Some(to_f64(eps)),
        Place::Trivial => Some(0.0),
        Place::ResidueTrivial { .. } => None,
    }
}

fn chi_radius(spec: &RadiusSpec, place: &Place) -> Result<f64> {
    let (base, is_pow) = match spec {
        RadiusSpec::Const(s) => (to_f64(&parse_rational(s)?), false),
        RadiusSpec::Pow(s) => (to_f64(&parse_rational(s)?), true),
    };
    if !(base > 0.0) {
        return domain("radius must be positive");
    }
    if !is_pow {
        return Ok(base);
    }
    let eps = place_eps(place).ok_or_else(|| Error::Domain(format!("b^ε is undefined at {place}")))?;
    Ok(base.powf(eps))
}

fn integrate_circle(exec: Execution, place: &Place, f: &AffableFn, center: Complex64, radius: f64, quad_n: usize) -> Result<(f64, f64, usize)> {
    let g = |z: Complex64| affable_eval_f64(place, f, &BerkPoint::Classical(Scalar::Cx(z)));
    let coarse = circle_mean(exec, center, radius, &g, quad_n, quad_n)?;
    let fine = circle_mean(exec, center, radius, &g, 2 * quad_n, 2 * quad_n)?;
    Ok((fine, (fine - coarse).abs(), 2 * quad_n))
}

fn chi_row(exec: Execution, cfg: &SweepConfig, place: &Place, f: &AffableFn, center: &Q) -> Result<(f64, f64, usize)> {
    let r = chi_radius(&cfg.radius, place)?;
    if place.is_archimedean() {
        let big_r = r.powf(1.0 / place.eps_f64());
        return integrate_circle(exec, place, f, Complex64::new(to_f64(center), 0.0), big_r, cfg.quad_n);
    }
    let logr = if r == 1.0 { Q::zero() } else { snap_to_rational(r.ln() / place.log_unit().value(), 1_000_000)? };
    let x = canonicalize(place, &BerkPoint::disk(center.clone(), logr))?;
    Ok((affable_eval(place, f, &x)?.to_f64(), 0.0, 1))
}

/// Integrals of the test functions against `χ_{c,ρ}` along the grid.
pub fn sweep_chi(exec: Execution, cfg: &SweepConfig) -> Result<SweepTable> {
    cfg.validate()?;
    let fns = cfg.functions()?;
    let center = cfg.center()?;
    let grid = cfg.grid();
    let rows: Vec<Vec<SweepRow>> = map_collect(exec, &grid, |place| {
        fns.iter().map(|f| SweepRow::new(place, f, chi_row(Execution::Sequential, cfg, place, f, &center))).collect()
    });
    Ok(SweepTable::from_rows(rows.into_iter().flatten().collect(), &fns))
}

/// Preimage levels used for archimedean equilibrium rows at tolerance `tol`.
pub fn levels_for(cfg: &SweepConfig, d: usize) -> usize {
    cfg.levels.unwrap_or_else(|| {
        // the atom count d^n is the cost; cap at about 2^16 atoms
        let cap = (16.0 / (d as f64).log2()).floor().max(1.0) as usize;
        let want = (-cfg.tol.log2()).ceil().max(1.0) as usize;
        want.min(cap)
    })
}

fn atom_integral(place: &Place, f: &AffableFn, eq: &ArchEquilibrium) -> Result<f64> {
    let mut acc = 0.0;
    for (z, w) in &eq.atoms {
        acc += w * affable_eval_f64(place, f, &z.to_berk())?;
    }
    Ok(acc)
}

/// Integrals of the test functions against the equilibrium measure of one map along the grid.
/// Over C the preimage measure does not depend on ε, so it is computed once.
pub fn sweep_equilibrium(exec: Execution, cfg: &SweepConfig) -> Result<SweepTable> {
    cfg.validate()?;
    let fns = cfg.functions()?;
    let f = cfg.lift()?;
    let grid = cfg.grid();
    let n = levels_for(cfg, f.degree());
    let complex = Place::complex();
    let arch = if grid.iter().any(Place::is_archimedean) {
        let fine = equilibrium_arch(exec, &complex, &f, cfg.seed(), n)?;
        let coarse = equilibrium_arch(exec, &complex, &f, cfg.seed(), n.saturating_sub(1))?;
        Some((fine, coarse))
    } else {
        None
    };
    let row = |place: &Place, func: &AffableFn| -> Result<(f64, f64, usize)> {
        if place.is_archimedean() {
            let (fine, coarse) = arch.as_ref().expect("archimedean measure computed");
            let v = atom_integral(place, func, fine)?;
            let w = atom_integral(place, func, coarse)?;
            return Ok((v, (v - w).abs(), n));
        }
        let skeleton = cfg.skeleton_for(place)?;
        let eq = equilibrium_nonarch(Execution::Sequential, place, &f, &skeleton, cfg.tol, 2)?;
        let mut acc = 0.0;
        for (v, w) in eq.measure.support() {
            let x = eq.skeleton.label(v).ok_or_else(|| Error::Domain(format!("vertex {v} is unlabelled")))?;
            acc += to_f64(&w) * affable_eval(place, func, x)?.to_f64();
        }
        let err = if eq.exact { 0.0 } else { cfg.tol };
        Ok((acc, err, eq.skeleton.num_vertices()))
    };
    let rows: Vec<Vec<SweepRow>> = map_collect(exec, &grid, |place| {
        fns.iter().map(|func| SweepRow::new(place, func, row(place, func))).collect()
    });
    Ok(SweepTable::from_rows(rows.into_iter().flatten().collect(), &fns))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub n: usize,
    /// `d_K(λ_{n+1}, λ_n)`.
    pub ecart: f64,
    /// `d_K(λ_{n+1}, λ_n) / d_K(λ_n, λ_{n-1})`; `None` when the denominator vanishes.
    pub ratio: Option<f64>,
    pub exact_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub rows: Vec<ContractionRow>,
    pub gmax: f64,
    pub heuristic_bound: bool,
    pub degree: usize,
}

impl ContractionReport {
    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().filter_map(|r| r.ratio).fold(0.0, f64::max)
    }

    /// `G / (d^n (d-1))`.
    pub fn certified_error(&self, n: usize) -> f64 {
        error_bound(self.gmax, self.degree, n)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "ecart", "ratio", "exact_zero", "certified_error"])?;
        for r in &self.rows {
            let ratio = r.ratio.map(|x| x.to_string()).unwrap_or_default();
            w.write_record([r.n.to_string(), r.ecart.to_string(), ratio, r.exact_zero.to_string(), self.certified_error(r.n).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ratios of successive écarts `d_K(λ_{n+1}, λ_n)` for `n < levels`.
pub fn report_contraction(exec: Execution, place: &Place, f: &HomogeneousLift, sample: &[BerkPoint], levels: usize) -> Result<ContractionReport> {
    if levels < 3 {
        return domain("contraction reports need at least 3 levels");
    }
    let ecarts = successive_ecarts(exec, place, f, sample, levels)?;
    let rows = (0..levels)
        .map(|n| {
            let ratio = if n == 0 || ecarts[n - 1] == 0.0 { None } else { Some(ecarts[n] / ecarts[n - 1]) };
            ContractionRow { n, ecart: ecarts[n], ratio, exact_zero: n > 0 && ecarts[n - 1] == 0.0 }
        })
        .collect();
    let bound = g_bound(place, f)?;
    Ok(ContractionReport { rows, gmax: bound.to_f64(), heuristic_bound: bound.heuristic, degree: f.degree() })
}

/// `m` equally spaced points on a circle of C.
pub fn circle_sample(center: Complex64, radius: f64, m: usize) -> Vec<BerkPoint> {
    (0..m)
        .map(|k| BerkPoint::Classical(Scalar::Cx(center + Complex64::from_polar(radius, std::f64::consts::TAU * k as f64 / m as f64))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenRow {
    pub point_id: String,
    pub lambda: String,
    pub n_used: usize,
    pub certified_error: f64,
}

/// `λ_φ` at each labelled point; exact values are printed exactly.
pub fn green_table(exec: Execution, place: &Place, f: &HomogeneousLift, points: &[(String, BerkPoint)], tol: f64) -> Result<Vec<GreenRow>> {
    let ctx = PotentialContext::new(place, f)?;
    map_collect(exec, points, |(id, x)| -> Result<GreenRow> {
        let est = ctx.lambda_limit(x, tol)?;
        let lambda = if est.value.is_exact() { est.value.to_string() } else { (est.value.to_f64() + 0.0).to_string() };
        Ok(GreenRow { point_id: id.clone(), lambda, n_used: est.n_used, certified_error: est.certified_error })
    })
    .into_iter()
    .collect()
}

pub fn write_green_csv<W: std::io::Write>(rows: &[GreenRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["point_id", "lambda", "n_used", "certified_error"])?;
    for r in rows {
        w.write_record([r.point_id.clone(), r.lambda.clone(), r.n_used.to_string(), r.certified_error.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
