//! Potential theory on finite metric graphs.
//!
//! A [`PLFunction`] is given by its values at the vertices and is affine on every
//! edge. Its Laplacian is the atomic measure `sum_x lambda_x(u) delta_x` where
//! `lambda_x(u)` is the sum of the outgoing slopes at `x`. With this sign
//! convention subharmonic functions have nonnegative Laplacian at interior vertices.
//!
//! Everything is generic over [`GraphScalar`], so the same code runs in exact
//! rational arithmetic (skeleta of ultrametric fibers) and in `f64`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Debug;

use num_traits::{Num, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::arith::{format_rational, parse_rational, Q};
use crate::berkovich::BerkPoint;
use crate::error::{domain, Error, Result};

pub trait GraphScalar: Clone + Num + Signed + PartialOrd + Debug + Send + Sync + ToPrimitive {
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl GraphScalar for f64 {}
impl GraphScalar for Q {
    fn to_f64_lossy(&self) -> f64 {
        crate::arith::to_f64(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge<S> {
    pub a: usize,
    pub b: usize,
    pub length: S,
}

impl<S> Edge<S> {
    pub fn other(&self, v: usize) -> usize {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}

/// Finite connected metric graph with an optional Berkovich label per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph<S> {
    labels: Vec<Option<BerkPoint>>,
    edges: Vec<Edge<S>>,
    boundary: Vec<usize>,
    adjacency: Vec<Vec<usize>>,
}

impl<S: GraphScalar> MetricGraph<S> {
    pub fn new(labels: Vec<Option<BerkPoint>>, edges: Vec<Edge<S>>, boundary: Vec<usize>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return domain("a metric graph needs at least one vertex");
        }
        let mut adjacency = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            if e.a >= n || e.b >= n {
                return domain(format!("edge {i} references a missing vertex"));
            }
            if e.a == e.b {
                return domain(format!("edge {i} is a loop"));
            }
            if e.length <= S::zero() {
                return domain(format!("edge {i} has non-positive length {:?}", e.length));
            }
            adjacency[e.a].push(i);
            adjacency[e.b].push(i);
        }
        let mut boundary = boundary;
        boundary.sort_unstable();
        boundary.dedup();
        if let Some(&b) = boundary.iter().find(|&&b| b >= n) {
            return domain(format!("boundary vertex {b} does not exist"));
        }
        let g = MetricGraph { labels, edges, boundary, adjacency };
        if !g.is_connected() {
            return domain("metric graph is not connected");
        }
        Ok(g)
    }

    /// Unlabeled graph whose boundary is the set of leaves.
    pub fn from_edges(n: usize, edges: Vec<(usize, usize, S)>) -> Result<Self> {
        let edges: Vec<Edge<S>> = edges.into_iter().map(|(a, b, length)| Edge { a, b, length }).collect();
        let mut g = MetricGraph::new(vec![None; n], edges, Vec::new())?;
        g.boundary = g.leaves();
        Ok(g)
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn edges(&self) -> &[Edge<S>] {
        &self.edges
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary.binary_search(&v).is_ok()
    }

    pub fn label(&self, v: usize) -> Option<&BerkPoint> {
        self.labels[v].as_ref()
    }

    pub fn labels(&self) -> &[Option<BerkPoint>] {
        &self.labels
    }

    pub fn incident(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Vertices of degree at most one (a lone vertex counts as a leaf).
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| self.degree(v) <= 1).collect()
    }

    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.num_vertices()
    }

    pub fn with_boundary(mut self, boundary: Vec<usize>) -> Result<Self> {
        let labels = std::mem::take(&mut self.labels);
        MetricGraph::new(labels, self.edges, boundary)
    }

    fn is_connected(&self) -> bool {
        let n = self.num_vertices();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &e in &self.adjacency[v] {
                let w = self.edges[e].other(v);
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Splits `edge` at distance `t` from its endpoint `a`. Returns the new graph
    /// and the index of the inserted vertex.
    pub fn subdivide(&self, edge: usize, t: S, label: Option<BerkPoint>) -> Result<(Self, usize)> {
        let e = self.edges.get(edge).ok_or_else(|| Error::Domain(format!("no edge {edge}")))?;
        if t <= S::zero() || t >= e.length {
            return domain("subdivision point must lie strictly inside the edge");
        }
        let mut labels = self.labels.clone();
        labels.push(label);
        let m = labels.len() - 1;
        let mut edges = self.edges.clone();
        let rest = e.length.clone() - t.clone();
        edges[edge] = Edge { a: e.a, b: m, length: t };
        edges.push(Edge { a: m, b: e.b, length: rest });
        Ok((MetricGraph::new(labels, edges, self.boundary.clone())?, m))
    }

    pub fn map_lengths<T: GraphScalar>(&self, f: impl Fn(&S) -> T) -> MetricGraph<T> {
        MetricGraph {
            labels: self.labels.clone(),
            edges: self.edges.iter().map(|e| Edge { a: e.a, b: e.b, length: f(&e.length) }).collect(),
            boundary: self.boundary.clone(),
            adjacency: self.adjacency.clone(),
        }
    }

    /// Shortest-path distances from `src` (Dijkstra on the dense graph).
    pub fn distances_from(&self, src: usize) -> Vec<Option<S>> {
        let n = self.num_vertices();
        let mut dist: Vec<Option<S>> = vec![None; n];
        let mut done = vec![false; n];
        dist[src] = Some(S::zero());
        for _ in 0..n {
            let mut best: Option<usize> = None;
            for v in 0..n {
                if done[v] {
                    continue;
                }
                if let Some(d) = &dist[v] {
                    if best.is_none_or(|b| dist[b].as_ref().is_some_and(|db| d < db)) {
                        best = Some(v);
                    }
                }
            }
            let Some(v) = best else { break };
            done[v] = true;
            let dv = dist[v].clone().expect("settled vertex has a distance");
            for &e in &self.adjacency[v] {
                let w = self.edges[e].other(v);
                let cand = dv.clone() + self.edges[e].length.clone();
                if dist[w].as_ref().is_none_or(|dw| cand < *dw) {
                    dist[w] = Some(cand);
                }
            }
        }
        dist
    }
}

/// Continuous function, affine on each edge, given by vertex values.
#[derive(Debug, Clone, PartialEq)]
pub struct PLFunction<S> {
    graph: MetricGraph<S>,
    values: Vec<S>,
}

impl<S: GraphScalar> PLFunction<S> {
    pub fn new(graph: MetricGraph<S>, values: Vec<S>) -> Result<Self> {
        if values.len() != graph.num_vertices() {
            return domain(format!("{} values for {} vertices", values.len(), graph.num_vertices()));
        }
        Ok(PLFunction { graph, values })
    }

    pub fn from_fn(graph: MetricGraph<S>, f: impl Fn(usize) -> S) -> Self {
        let values = (0..graph.num_vertices()).map(f).collect();
        PLFunction { graph, values }
    }

    pub fn graph(&self) -> &MetricGraph<S> {
        &self.graph
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn value(&self, v: usize) -> &S {
        &self.values[v]
    }

    /// Slope of the edge leaving `from`.
    pub fn outgoing_slope(&self, edge: usize, from: usize) -> S {
        let e = &self.graph.edges[edge];
        let to = e.other(from);
        (self.values[to].clone() - self.values[from].clone()) / e.length.clone()
    }

    /// `lambda_x(u)`: sum of outgoing slopes at `v`.
    pub fn outgoing_slope_sum(&self, v: usize) -> S {
        self.graph
            .incident(v)
            .iter()
            .fold(S::zero(), |acc, &e| acc + self.outgoing_slope(e, v))
    }

    /// Value at distance `t` from endpoint `a` of `edge`.
    pub fn value_on_edge(&self, edge: usize, t: &S) -> S {
        let e = &self.graph.edges[edge];
        let (ua, ub) = (&self.values[e.a], &self.values[e.b]);
        ua.clone() + (ub.clone() - ua.clone()) * t.clone() / e.length.clone()
    }

    pub fn subdivide(&self, edge: usize, t: S, label: Option<BerkPoint>) -> Result<(Self, usize)> {
        let val = self.value_on_edge(edge, &t);
        let (graph, m) = self.graph.subdivide(edge, t, label)?;
        let mut values = self.values.clone();
        values.push(val);
        Ok((PLFunction { graph, values }, m))
    }

    pub fn map_values<T: GraphScalar>(&self, f: impl Fn(&S) -> T, g: impl Fn(&S) -> T) -> PLFunction<T> {
        PLFunction { graph: self.graph.map_lengths(g), values: self.values.iter().map(f).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.graph != other.graph {
            return domain("PL functions live on different graphs");
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a.clone() + b.clone()).collect();
        Ok(PLFunction { graph: self.graph.clone(), values })
    }

    pub fn scale(&self, s: &S) -> Self {
        PLFunction { graph: self.graph.clone(), values: self.values.iter().map(|v| v.clone() * s.clone()).collect() }
    }
}

/// Finitely supported measure on the vertices of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMeasure<S> {
    pub atoms: Vec<(usize, S)>,
}

impl<S: GraphScalar> GraphMeasure<S> {
    pub fn total_mass(&self) -> S {
        self.atoms.iter().fold(S::zero(), |acc, (_, w)| acc + w.clone())
    }

    pub fn weight_at(&self, v: usize) -> S {
        self.atoms.iter().filter(|(x, _)| *x == v).fold(S::zero(), |acc, (_, w)| acc + w.clone())
    }

    /// `∫ u dμ`.
    pub fn integrate(&self, u: &PLFunction<S>) -> S {
        self.atoms.iter().fold(S::zero(), |acc, (v, w)| acc + u.value(*v).clone() * w.clone())
    }

    /// Atoms with nonzero weight, merged per vertex and sorted by vertex.
    pub fn support(&self) -> Vec<(usize, S)> {
        let mut merged: BTreeMap<usize, S> = BTreeMap::new();
        for (v, w) in &self.atoms {
            let e = merged.entry(*v).or_insert_with(S::zero);
            *e = e.clone() + w.clone();
        }
        merged.into_iter().filter(|(_, w)| !w.is_zero()).collect()
    }

    pub fn min_weight(&self) -> Option<S> {
        self.support().into_iter().map(|(_, w)| w).reduce(|a, b| if b < a { b } else { a })
    }
}

/// `Δu = sum_x lambda_x(u) delta_x`, one atom per vertex.
pub fn graph_laplacian<S: GraphScalar>(u: &PLFunction<S>) -> GraphMeasure<S> {
    GraphMeasure { atoms: (0..u.graph.num_vertices()).map(|v| (v, u.outgoing_slope_sum(v))).collect() }
}

/// Whether `Δu >= 0` at every listed vertex.
pub fn is_subharmonic_at<S: GraphScalar>(u: &PLFunction<S>, vertices: &[usize]) -> bool {
    vertices.iter().all(|&v| u.outgoing_slope_sum(v) >= S::zero())
}

pub fn interior_vertices<S: GraphScalar>(g: &MetricGraph<S>) -> Vec<usize> {
    (0..g.num_vertices()).filter(|&v| !g.is_boundary(v)).collect()
}

/// Harmonic extension of boundary data: the unique PL function with the given
/// boundary values and `lambda_x = 0` at every non-boundary vertex.
pub fn dirichlet_extend<S: GraphScalar>(graph: &MetricGraph<S>, boundary_values: &BTreeMap<usize, S>) -> Result<PLFunction<S>> {
    if graph.boundary().is_empty() {
        return domain("Dirichlet problem needs a nonempty boundary");
    }
    for &b in graph.boundary() {
        if !boundary_values.contains_key(&b) {
            return domain(format!("missing boundary value for vertex {b}"));
        }
    }
    if let Some(v) = boundary_values.keys().find(|v| !graph.is_boundary(**v)) {
        return domain(format!("vertex {v} is not a boundary vertex"));
    }
    let interior = interior_vertices(graph);
    let mut index = vec![usize::MAX; graph.num_vertices()];
    for (i, &v) in interior.iter().enumerate() {
        index[v] = i;
    }
    let n = interior.len();
    let mut a = vec![vec![S::zero(); n]; n];
    let mut rhs = vec![S::zero(); n];
    for (i, &v) in interior.iter().enumerate() {
        for &e in graph.incident(v) {
            let edge = &graph.edges()[e];
            let w = S::one() / edge.length.clone();
            let other = edge.other(v);
            a[i][i] = a[i][i].clone() + w.clone();
            if graph.is_boundary(other) {
                rhs[i] = rhs[i].clone() + w * boundary_values[&other].clone();
            } else {
                let j = index[other];
                a[i][j] = a[i][j].clone() - w;
            }
        }
    }
    let sol = solve_dense(a, rhs)?;
    let mut values = vec![S::zero(); graph.num_vertices()];
    for (v, val) in boundary_values {
        values[*v] = val.clone();
    }
    for (i, &v) in interior.iter().enumerate() {
        values[v] = sol[i].clone();
    }
    PLFunction::new(graph.clone(), values)
}

/// Gaussian elimination with largest-magnitude pivoting.
pub fn solve_dense<S: GraphScalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Result<Vec<S>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| !a[r][col].is_zero())
            .max_by(|&r, &s| a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .ok_or_else(|| Error::Numeric("singular linear system".into()))?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col].clone();
        for r in (col + 1)..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone() / p.clone();
            for c in col..n {
                let t = f.clone() * a[col][c].clone();
                a[r][c] = a[r][c].clone() - t;
            }
            let t = f * b[col].clone();
            b[r] = b[r].clone() - t;
        }
    }
    let mut x = vec![S::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for c in (r + 1)..n {
            acc = acc - a[r][c].clone() * x[c].clone();
        }
        x[r] = acc / a[r][r].clone();
    }
    Ok(x)
}

/// Result of [`mass_in`].
#[derive(Debug, Clone, PartialEq)]
pub struct MassBound<S> {
    /// Positive part of `Δu` summed over the interior of the region.
    pub mass: S,
    pub bound: S,
    pub region_boundary: Vec<usize>,
    /// Number of edges leaving the region.
    pub outgoing_edges: usize,
    pub subharmonic: bool,
}

impl<S: GraphScalar> MassBound<S> {
    pub fn holds(&self) -> bool {
        self.mass <= self.bound
    }
}

/// Laplacian mass inside a region against `(N/ℓ)(sup_{Y_ℓ} u - inf_Y u)`, where `N`
/// counts edges leaving the region and `Y_ℓ` extends the region by `ℓ` along them.
pub fn mass_in<S: GraphScalar>(u: &PLFunction<S>, region: &[usize], ell: &S) -> Result<MassBound<S>> {
    let g = u.graph();
    if *ell <= S::zero() {
        return domain("ℓ must be positive");
    }
    if region.is_empty() {
        return domain("region is empty");
    }
    let mut inside = vec![false; g.num_vertices()];
    for &v in region {
        if v >= g.num_vertices() {
            return domain(format!("region vertex {v} does not exist"));
        }
        inside[v] = true;
    }
    let mut region_boundary = Vec::new();
    let mut outgoing = Vec::new();
    for v in (0..g.num_vertices()).filter(|&v| inside[v]) {
        let mut leaves = false;
        for &e in g.incident(v) {
            if !inside[g.edges()[e].other(v)] {
                outgoing.push((v, e));
                leaves = true;
            }
        }
        if leaves {
            region_boundary.push(v);
        }
    }
    for &(_, e) in &outgoing {
        if g.edges()[e].length < *ell {
            return domain(format!("ℓ exceeds the length of outgoing edge {e}"));
        }
    }
    let interior: Vec<usize> = (0..g.num_vertices()).filter(|&v| inside[v] && !region_boundary.contains(&v)).collect();
    let subharmonic = is_subharmonic_at(u, &interior);
    let mass = interior.iter().fold(S::zero(), |acc, &v| {
        let l = u.outgoing_slope_sum(v);
        if l > S::zero() {
            acc + l
        } else {
            acc
        }
    });
    let region_vals = (0..g.num_vertices()).filter(|&v| inside[v]).map(|v| u.value(v).clone());
    let inf = region_vals.clone().reduce(|a, b| if b < a { b } else { a }).expect("region nonempty");
    let mut sup = region_vals.reduce(|a, b| if b > a { b } else { a }).expect("region nonempty");
    for &(v, e) in &outgoing {
        let val = u.value(v).clone() + u.outgoing_slope(e, v) * ell.clone();
        if val > sup {
            sup = val;
        }
    }
    let n_out = S::from_usize(outgoing.len());
    let bound = n_out * (sup - inf) / ell.clone();
    Ok(MassBound { mass, bound, region_boundary, outgoing_edges: outgoing.len(), subharmonic })
}

trait FromUsize {
    fn from_usize(n: usize) -> Self;
}

impl<S: GraphScalar> FromUsize for S {
    fn from_usize(n: usize) -> Self {
        (0..n).fold(S::zero(), |acc, _| acc + S::one())
    }
}

// ---------------------------------------------------------------------------
// JSON: {"vertices":[...],"edges":[[i,j,"len"]],"boundary":[...]}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphJson {
    pub vertices: Vec<Option<BerkPoint>>,
    pub edges: Vec<(usize, usize, serde_json::Value)>,
    #[serde(default)]
    pub boundary: Option<Vec<usize>>,
}

fn json_rational(v: &serde_json::Value) -> Result<Q> {
    match v {
        serde_json::Value::String(s) => parse_rational(s),
        serde_json::Value::Number(n) => parse_rational(&n.to_string()),
        other => Err(Error::Parse(format!("expected a length, got {other}"))),
    }
}

impl MetricGraph<Q> {
    pub fn from_json(json: &GraphJson) -> Result<Self> {
        let edges = json
            .edges
            .iter()
            .map(|(a, b, l)| Ok(Edge { a: *a, b: *b, length: json_rational(l)? }))
            .collect::<Result<Vec<_>>>()?;
        let g = MetricGraph::new(json.vertices.clone(), edges, json.boundary.clone().unwrap_or_default())?;
        if json.boundary.is_none() {
            let leaves = g.leaves();
            return g.with_boundary(leaves);
        }
        Ok(g)
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            vertices: self.labels.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| (e.a, e.b, serde_json::Value::String(format_rational(&e.length))))
                .collect(),
            boundary: Some(self.boundary.clone()),
        }
    }
}

/// Measure CSV with columns `vertex_id, weight`.
pub fn write_measure_csv<S: GraphScalar + std::fmt::Display, W: std::io::Write>(m: &GraphMeasure<S>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["vertex_id", "weight"])?;
    for (v, wt) in &m.atoms {
        w.write_record([v.to_string(), wt.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
