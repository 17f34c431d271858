//! Path-form multicommodity flows.
//!
//! A [`PathFlow`] is a list of weighted vertex sequences tagged with the
//! pair they serve. Marginals count the weight of a path once at each of
//! its two endpoints.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{CapGraph, Mode, Vertex, VertexSet};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowPath<T> {
    pub pair: usize,
    pub path: Vec<Vertex>,
    pub weight: T,
}

impl<T: Scalar> FlowPath<T> {
    pub fn source(&self) -> Vertex {
        self.path[0]
    }

    pub fn sink(&self) -> Vertex {
        *self.path.last().expect("nonempty path")
    }

    pub fn is_inside(&self, s: &VertexSet) -> bool {
        self.path.iter().all(|v| s.contains(v))
    }

    pub fn touches(&self, s: &VertexSet) -> bool {
        self.path.iter().any(|v| s.contains(v))
    }
}

/// Location of a capacity violation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Edge(Vertex, Vertex),
    Vertex(Vertex),
    MissingEdge(Vertex, Vertex),
    MissingVertex(Vertex),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Edge(u, v) => write!(f, "edge {u}-{v} over capacity"),
            Violation::Vertex(v) => write!(f, "vertex {v} over capacity"),
            Violation::MissingEdge(u, v) => write!(f, "path uses missing edge {u}-{v}"),
            Violation::MissingVertex(v) => write!(f, "path uses missing vertex {v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathFlow<T> {
    entries: Vec<FlowPath<T>>,
}

impl<T: Scalar> Default for PathFlow<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> PathFlow<T> {
    pub fn new() -> Self {
        PathFlow { entries: Vec::new() }
    }

    /// Keeps entries with positive weight.
    pub fn from_entries(entries: Vec<FlowPath<T>>) -> Self {
        let mut f = Self::new();
        for e in entries {
            f.push(e.pair, e.path, e.weight);
        }
        f
    }

    pub fn push(&mut self, pair: usize, path: Vec<Vertex>, weight: T) {
        assert!(!path.is_empty(), "flow path must be nonempty");
        if weight > T::zero() {
            self.entries.push(FlowPath { pair, path, weight });
        }
    }

    pub fn entries(&self) -> &[FlowPath<T>] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<FlowPath<T>> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `|f|`, the total weight.
    pub fn value(&self) -> T {
        self.entries.iter().fold(T::zero(), |a, e| a + e.weight.clone())
    }

    /// Marginals `x(v)`.
    pub fn marginals(&self) -> BTreeMap<Vertex, T> {
        let mut x: BTreeMap<Vertex, T> = BTreeMap::new();
        for e in &self.entries {
            for v in [e.source(), e.sink()] {
                let slot = x.entry(v).or_insert_with(T::zero);
                *slot = slot.clone() + e.weight.clone();
            }
        }
        x
    }

    pub fn marginal_sum(&self, s: &VertexSet) -> T {
        self.marginals()
            .into_iter()
            .filter(|(v, _)| s.contains(v))
            .fold(T::zero(), |a, (_, w)| a + w)
    }

    /// Returns `|f|` after checking it against half the marginal sum.
    pub fn flow_value(&self) -> Result<T> {
        let v = self.value();
        let half = self
            .marginals()
            .into_values()
            .fold(T::zero(), |a, w| a + w)
            / T::from_ratio(2, 1);
        if !v.eq_tol(&half) {
            return Err(Error::Numerical(format!("flow value {v} differs from half marginal sum {half}")));
        }
        Ok(v)
    }

    /// Amount leaving each first vertex; used for flows towards a sink set.
    pub fn source_amounts(&self) -> BTreeMap<Vertex, T> {
        let mut m: BTreeMap<Vertex, T> = BTreeMap::new();
        for e in &self.entries {
            let slot = m.entry(e.source()).or_insert_with(T::zero);
            *slot = slot.clone() + e.weight.clone();
        }
        m
    }

    /// Amount arriving at each last vertex.
    pub fn sink_amounts(&self) -> BTreeMap<Vertex, T> {
        let mut m: BTreeMap<Vertex, T> = BTreeMap::new();
        for e in &self.entries {
            let slot = m.entry(e.sink()).or_insert_with(T::zero);
            *slot = slot.clone() + e.weight.clone();
        }
        m
    }

    pub fn pair_values(&self) -> BTreeMap<usize, T> {
        let mut m: BTreeMap<usize, T> = BTreeMap::new();
        for e in &self.entries {
            let slot = m.entry(e.pair).or_insert_with(T::zero);
            *slot = slot.clone() + e.weight.clone();
        }
        m
    }

    pub fn scale(&self, c: &T) -> Self {
        Self::from_entries(
            self.entries
                .iter()
                .map(|e| FlowPath {
                    pair: e.pair,
                    path: e.path.clone(),
                    weight: e.weight.clone() * c.clone(),
                })
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.entries.extend(other.entries.iter().cloned());
        out
    }

    /// Merges entries with the same pair and path, ordered by `(pair, path)`.
    pub fn canonical(&self) -> Self {
        let mut m: BTreeMap<(usize, Vec<Vertex>), T> = BTreeMap::new();
        for e in &self.entries {
            let slot = m.entry((e.pair, e.path.clone())).or_insert_with(T::zero);
            *slot = slot.clone() + e.weight.clone();
        }
        Self::from_entries(
            m.into_iter()
                .map(|((pair, path), weight)| FlowPath { pair, path, weight })
                .collect(),
        )
    }

    /// `self - sub`; `sub` must be a subflow.
    pub fn subtract(&self, sub: &Self) -> Result<Self> {
        let mut m: BTreeMap<(usize, Vec<Vertex>), T> = BTreeMap::new();
        for e in &self.canonical().entries {
            m.insert((e.pair, e.path.clone()), e.weight.clone());
        }
        for e in &sub.canonical().entries {
            let key = (e.pair, e.path.clone());
            let Some(w) = m.get_mut(&key) else {
                return Err(Error::Contract(format!("path {:?} of pair {} not in flow", e.path, e.pair)));
            };
            let rest = w.clone() - e.weight.clone();
            if rest < T::zero() && !rest.eq_tol(&T::zero()) {
                return Err(Error::Contract(format!("path {:?} of pair {} over-subtracted", e.path, e.pair)));
            }
            *w = if rest < T::zero() { T::zero() } else { rest };
        }
        let entries = m
            .into_iter()
            .filter(|(_, w)| w.is_pos())
            .map(|((pair, path), weight)| FlowPath { pair, path, weight })
            .collect();
        Ok(Self::from_entries(entries))
    }

    pub fn filter<F: Fn(&FlowPath<T>) -> bool>(&self, keep: F) -> Self {
        PathFlow {
            entries: self.entries.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }

    /// Paths lying entirely inside `s`.
    pub fn restrict_to_vertices(&self, s: &VertexSet) -> Self {
        self.filter(|e| e.is_inside(s))
    }

    pub fn restrict_to_subgraph(&self, g: &CapGraph) -> Self {
        self.filter(|e| {
            e.path.iter().all(|&v| g.contains(v))
                && e.path.windows(2).all(|w| g.edge_cap(w[0], w[1]).is_some())
        })
    }

    pub fn restrict_to_pairs(&self, pairs: &BTreeSet<usize>) -> Self {
        self.filter(|e| pairs.contains(&e.pair))
    }

    /// Per-edge load keyed by `(min, max)`.
    pub fn edge_loads(&self) -> BTreeMap<(Vertex, Vertex), T> {
        let mut m: BTreeMap<(Vertex, Vertex), T> = BTreeMap::new();
        for e in &self.entries {
            for w in e.path.windows(2) {
                let key = (w[0].min(w[1]), w[0].max(w[1]));
                let slot = m.entry(key).or_insert_with(T::zero);
                *slot = slot.clone() + e.weight.clone();
            }
        }
        m
    }

    /// Per-vertex load; a path counts once at every vertex it visits.
    pub fn vertex_loads(&self) -> BTreeMap<Vertex, T> {
        let mut m: BTreeMap<Vertex, T> = BTreeMap::new();
        for e in &self.entries {
            let seen: BTreeSet<Vertex> = e.path.iter().copied().collect();
            for v in seen {
                let slot = m.entry(v).or_insert_with(T::zero);
                *slot = slot.clone() + e.weight.clone();
            }
        }
        m
    }

    pub fn support(&self) -> VertexSet {
        self.entries.iter().flat_map(|e| e.path.iter().copied()).collect()
    }

    /// Checks that every path lives in `g` and loads respect capacities.
    pub fn check_feasible(&self, g: &CapGraph, mode: Mode) -> std::result::Result<(), Violation> {
        for e in &self.entries {
            for &v in &e.path {
                if !g.contains(v) {
                    return Err(Violation::MissingVertex(v));
                }
            }
            for w in e.path.windows(2) {
                if g.edge_cap(w[0], w[1]).is_none() {
                    return Err(Violation::MissingEdge(w[0], w[1]));
                }
            }
        }
        match mode {
            Mode::Edp => {
                for ((u, v), load) in self.edge_loads() {
                    let cap = T::from_u64(g.edge_cap(u, v).unwrap_or(0)).expect("capacity fits");
                    if !load.le_tol(&cap) {
                        return Err(Violation::Edge(u, v));
                    }
                }
            }
            Mode::Ndp => {
                for (v, load) in self.vertex_loads() {
                    let cap = T::from_u64(g.node_cap(v).unwrap_or(0)).expect("capacity fits");
                    if !load.le_tol(&cap) {
                        return Err(Violation::Vertex(v));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self, g: &CapGraph, mode: Mode) -> bool {
        self.check_feasible(g, mode).is_ok()
    }

    pub fn map_scalar<U: Scalar>(&self) -> PathFlow<U> {
        PathFlow::from_entries(
            self.entries
                .iter()
                .map(|e| FlowPath {
                    pair: e.pair,
                    path: e.path.clone(),
                    weight: U::from_rational(&e.weight.to_rational()),
                })
                .collect(),
        )
    }
}

/// Removes repeated vertices from a walk, keeping the first-to-last span.
pub fn shortcut(walk: &[Vertex]) -> Vec<Vertex> {
    let mut out: Vec<Vertex> = Vec::with_capacity(walk.len());
    let mut pos: BTreeMap<Vertex, usize> = BTreeMap::new();
    for &v in walk {
        if let Some(&i) = pos.get(&v) {
            for w in out.drain(i + 1..) {
                pos.remove(&w);
            }
        } else {
            pos.insert(v, out.len());
            out.push(v);
        }
    }
    out
}
