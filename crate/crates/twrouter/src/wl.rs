//! Well-linked decomposition of edge-capacitated instances.
//!
//! The output is a family of vertex-disjoint induced subgraphs `G_i`, each
//! with a weight function `π_i` on its terminals and a certificate flow that
//! sends `π_i(v)` from every terminal `v` to a single vertex `z_i`. Routing
//! `u → z → v` along the certificate at half scale shows that the terminals
//! are `π_i`-flow-well-linked.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::decomp::{preprocess, RootedDecomposition};
use crate::error::{Error, Result};
use crate::flow::{shortcut, PathFlow};
use crate::flowkit::{is_safe, levels, prefix_truncate_to, truncate_at, Levels, Safety};
use crate::graph::{CapGraph, Instance, Mode, Vertex, VertexSet};
use crate::router::{input_levels, split_at_unsafe, guarantee_bound, topmost_bad};
use crate::scalar::{qi, Rational, Scalar};

/// Constant of the weight guarantee `Σπ ≥ |f|(1 - 1/r)^(ℓ₁+ℓ₂) / (12 r³)`.
pub const WL_CONSTANT: u64 = 12;

#[derive(Clone, Debug, Serialize)]
pub struct WlComponent {
    pub vertices: VertexSet,
    #[serde(skip)]
    pub graph: CapGraph,
    pub z: Vertex,
    #[serde(serialize_with = "ser_weights")]
    pub pi: BTreeMap<Vertex, Rational>,
    /// Pairs with both terminals in the component.
    pub pairs: Vec<usize>,
    #[serde(skip)]
    pub certificate: PathFlow<Rational>,
}

fn ser_weights<S: serde::Serializer>(m: &BTreeMap<Vertex, Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(Some(m.len()))?;
    for (v, w) in m {
        map.serialize_entry(v, &w.to_string())?;
    }
    map.end()
}

impl WlComponent {
    /// `π(X)`.
    pub fn weight(&self) -> Rational {
        crate::scalar::sum(self.pi.values().cloned())
    }

    pub fn terminals(&self) -> VertexSet {
        self.pi.keys().copied().collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WlDecomposition {
    pub components: Vec<WlComponent>,
    pub r: usize,
    pub l1: usize,
    pub l2: usize,
    #[serde(serialize_with = "ser_q")]
    pub flow: Rational,
    #[serde(serialize_with = "ser_q")]
    pub total_weight: Rational,
    #[serde(serialize_with = "ser_q")]
    pub bound: Rational,
}

fn ser_q<S: serde::Serializer>(v: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl WlDecomposition {
    pub fn bound_holds(&self) -> bool {
        self.total_weight >= self.bound
    }

    pub fn pairwise_disjoint(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.components.iter().flat_map(|c| c.vertices.iter()).all(|&v| seen.insert(v))
    }
}

/// A flow whose paths all end at `z` and otherwise avoid the adhesion.
#[derive(Clone, Debug, PartialEq)]
pub struct NiceFlow {
    pub z: Vertex,
    pub h: PathFlow<Rational>,
    /// `|f_t| / (3 c |S|)`.
    pub guaranteed: Rational,
}

impl NiceFlow {
    pub fn weights(&self) -> BTreeMap<Vertex, Rational> {
        self.h.source_amounts()
    }
}

/// Builds a nice flow from `f_t` (paths inside the region) and `g`, which
/// routes at least `x(v)/c` from every terminal `v` of `f_t` to `s`.
///
/// `z` is the vertex of `s` receiving the most flow from `g` after
/// truncation at `s` (ties: smallest id). For each pair the side that
/// reaches `z` with less flow is topped up along its `f_t` paths followed by
/// the partner's paths to `z`; the sum has congestion three and is scaled
/// by `1/3`.
pub fn nice_flow(
    f_t: &PathFlow<Rational>,
    g: &PathFlow<Rational>,
    c: &Rational,
    s: &VertexSet,
) -> Result<Option<NiceFlow>> {
    let f_t = f_t.filter(|e| e.weight.is_pos());
    if f_t.is_empty() {
        return Ok(None);
    }
    if s.is_empty() {
        return Err(Error::Input("empty target set".into()));
    }
    let x = f_t.marginals();
    let ends: VertexSet = x.keys().copied().collect();
    let g = truncate_at(&g.filter(|e| ends.contains(&e.source()) && e.weight.is_pos()), s);
    if let Some(e) = g.entries().iter().find(|e| !s.contains(&e.sink())) {
        return Err(Error::Contract(format!("path from {} does not reach the target set", e.source())));
    }
    let delivered = g.source_amounts();
    for (v, xv) in &x {
        let got = delivered.get(v).cloned().unwrap_or_else(Rational::zero);
        if got < xv.clone() / c.clone() {
            return Err(Error::Contract(format!("terminal {v} delivers {got} < x/c = {}", xv.clone() / c.clone())));
        }
    }
    let into = g.sink_amounts();
    let z = *into
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(v, _)| v)
        .ok_or_else(|| Error::Contract("no flow reaches the target set".into()))?;
    let g1 = g.filter(|e| e.sink() == z);
    let y = g1.source_amounts();
    let mut sum = g1.clone();
    for (pair, _) in f_t.pair_values() {
        let paths: Vec<_> = f_t.entries().iter().filter(|e| e.pair == pair).collect();
        let (a, b) = (paths[0].source(), paths[0].sink());
        let ya = y.get(&a).cloned().unwrap_or_else(Rational::zero);
        let yb = y.get(&b).cloned().unwrap_or_else(Rational::zero);
        let (short, long, gap) = match ya.cmp(&yb) {
            std::cmp::Ordering::Less => (a, b, yb.clone() - ya.clone()),
            std::cmp::Ordering::Greater => (b, a, ya.clone() - yb.clone()),
            std::cmp::Ordering::Equal => continue,
        };
        let xs = x[&short].clone();
        let ylong = y[&long].clone();
        for fp in &paths {
            let mut walk = fp.path.clone();
            if walk[0] != short {
                walk.reverse();
            }
            for gp in g1.entries().iter().filter(|e| e.source() == long) {
                let w = gap.clone() * fp.weight.clone() / xs.clone() * gp.weight.clone() / ylong.clone();
                let mut full = walk.clone();
                full.extend_from_slice(&gp.path[1..]);
                sum.push(pair, shortcut(&full), w);
            }
        }
    }
    let h = sum.scale(&(Rational::one() / qi(3))).canonical();
    let guaranteed = f_t.value() / (qi(3) * c.clone() * qi(s.len() as u64));
    if h.value() < guaranteed {
        return Err(Error::Contract(format!("nice flow {} below |f|/(3c|S|) = {guaranteed}", h.value())));
    }
    Ok(Some(NiceFlow { z, h, guaranteed }))
}

/// A failed certificate check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertificateViolation {
    BadPath { pair: usize, reason: String },
    WrongEnd { source: Vertex, end: Vertex },
    Overloaded { u: Vertex, v: Vertex, load: String, cap: u64 },
    Marginal { vertex: Vertex, flow: String, pi: String },
    Unbalanced { pair: usize },
}

impl fmt::Display for CertificateViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CertificateViolation::BadPath { pair, reason } => write!(f, "path of pair {pair}: {reason}"),
            CertificateViolation::WrongEnd { source, end } => write!(f, "path from {source} ends at {end}, not z"),
            CertificateViolation::Overloaded { u, v, load, cap } => write!(f, "edge {u}-{v} carries {load} > {cap}"),
            CertificateViolation::Marginal { vertex, flow, pi } => write!(f, "vertex {vertex} sends {flow} but pi = {pi}"),
            CertificateViolation::Unbalanced { pair } => write!(f, "pair {pair} has unequal weights"),
        }
    }
}

/// Structural check of a component's certificate.
pub fn verify_wl_certificate(
    c: &WlComponent,
    pairs: &crate::graph::TerminalPairs,
) -> std::result::Result<(), CertificateViolation> {
    let g = &c.graph;
    for e in c.certificate.entries() {
        let bad = |reason: &str| CertificateViolation::BadPath {
            pair: e.pair,
            reason: reason.into(),
        };
        if e.path.iter().any(|v| !c.vertices.contains(v) || !g.contains(*v)) {
            return Err(bad("leaves the component"));
        }
        if e.path.iter().collect::<BTreeSet<_>>().len() != e.path.len() {
            return Err(bad("not simple"));
        }
        if e.path.windows(2).any(|w| g.edge_cap(w[0], w[1]).is_none()) {
            return Err(bad("uses a missing edge"));
        }
        if e.sink() != c.z {
            return Err(CertificateViolation::WrongEnd {
                source: e.source(),
                end: e.sink(),
            });
        }
    }
    for ((u, v), load) in c.certificate.edge_loads() {
        let cap = g.edge_cap(u, v).unwrap_or(0);
        if !load.le_tol(&qi(cap)) {
            return Err(CertificateViolation::Overloaded {
                u,
                v,
                load: load.to_string(),
                cap,
            });
        }
    }
    let sent = c.certificate.source_amounts();
    let keys: BTreeSet<Vertex> = sent.keys().chain(c.pi.keys()).copied().collect();
    for v in keys {
        let a = sent.get(&v).cloned().unwrap_or_else(Rational::zero);
        let b = c.pi.get(&v).cloned().unwrap_or_else(Rational::zero);
        if !(a.le_tol(&b) && b.le_tol(&a)) {
            return Err(CertificateViolation::Marginal {
                vertex: v,
                flow: a.to_string(),
                pi: b.to_string(),
            });
        }
    }
    for &p in &c.pairs {
        let (s, t) = pairs.get(p);
        let ps = c.pi.get(&s).cloned().unwrap_or_else(Rational::zero);
        let pt = c.pi.get(&t).cloned().unwrap_or_else(Rational::zero);
        if !(ps.le_tol(&pt) && pt.le_tol(&ps)) {
            return Err(CertificateViolation::Unbalanced { pair: p });
        }
    }
    Ok(())
}

fn component(inst: &Instance, vertices: VertexSet, z: Vertex, h: PathFlow<Rational>) -> Result<WlComponent> {
    let graph = inst.graph.induced_subgraph(&vertices)?;
    let pi = h.source_amounts().into_iter().filter(|(_, w)| w.is_pos()).collect();
    let pairs = inst
        .pairs
        .iter()
        .filter(|(_, (s, t))| vertices.contains(s) && vertices.contains(t))
        .map(|(i, _)| i)
        .collect();
    Ok(WlComponent {
        vertices,
        graph,
        z,
        pi,
        pairs,
        certificate: h,
    })
}

struct Wl {
    r: usize,
    depth_limit: usize,
}

impl Wl {
    fn run(&self, inst: &Instance, d: &RootedDecomposition, f: &PathFlow<Rational>, depth: usize) -> Result<Vec<WlComponent>> {
        if depth > self.depth_limit {
            return Err(Error::Contract(format!("recursion deeper than {}", self.depth_limit)));
        }
        let mut out = Vec::new();
        if f.is_empty() {
            return Ok(out);
        }
        for piece in preprocess(inst, d, f) {
            if piece.flow.is_empty() {
                continue;
            }
            out.extend(self.piece(&piece.instance, &piece.decomposition, &piece.flow, depth)?);
        }
        Ok(out)
    }

    fn piece(&self, inst: &Instance, d: &RootedDecomposition, f: &PathFlow<Rational>, depth: usize) -> Result<Vec<WlComponent>> {
        let lv = levels(inst, d, f, self.r);
        if lv.l2 == 0 {
            let s = d.bag(d.root()).clone();
            let all = inst.graph.vertex_set();
            let g = prefix_truncate_to(f, &all, &s)?;
            return Ok(match nice_flow(f, &g, &Rational::one(), &s)? {
                Some(nf) => vec![component(inst, all, nf.z, nf.h)?],
                None => Vec::new(),
            });
        }
        if lv.l1 == lv.l2 {
            let sp = split_at_unsafe(inst, d, f, self.r, lv.l1)?;
            let mut out = self.run(&sp.inner.0, &sp.inner.1, &sp.inner.2, depth + 1)?;
            out.extend(self.run(&sp.outer.0, &sp.outer.1, &sp.outer.2, depth + 1)?);
            return Ok(out);
        }
        self.unequal(inst, d, f, lv, depth)
    }

    fn unequal(
        &self,
        inst: &Instance,
        d: &RootedDecomposition,
        f: &PathFlow<Rational>,
        lv: Levels,
        depth: usize,
    ) -> Result<Vec<WlComponent>> {
        let tops = topmost_bad(d, f, lv.l2);
        let inside: Vec<PathFlow<Rational>> = tops.iter().map(|&t| f.restrict_to_vertices(&d.alpha(t))).collect();
        let total = crate::scalar::sum(inside.iter().map(|fi| fi.value()));
        if total > f.value() / qi(self.r as u64) {
            let c = qi(4 * self.r as u64);
            let mut groups: BTreeMap<Vertex, (VertexSet, PathFlow<Rational>)> = BTreeMap::new();
            for (&t, fi) in tops.iter().zip(&inside) {
                if fi.is_empty() {
                    continue;
                }
                let g = match is_safe(inst, d, t, f, self.r) {
                    Safety::Safe(g) => g,
                    Safety::Unsafe { .. } => {
                        return Err(Error::Contract(format!("topmost bad node {} is unsafe", d.label(t))))
                    }
                };
                if let Some(nf) = nice_flow(fi, &g, &c, d.sigma(t))? {
                    let entry = groups.entry(nf.z).or_insert_with(|| ([nf.z].into(), PathFlow::new()));
                    entry.0.extend(d.alpha(t));
                    entry.1 = entry.1.add(&nf.h);
                }
            }
            return groups.into_iter().map(|(z, (vs, h))| component(inst, vs, z, h)).collect();
        }
        let mut dropped = PathFlow::new();
        for fi in &inside {
            dropped = dropped.add(fi);
        }
        self.run(inst, d, &f.subtract(&dropped)?, depth + 1)
    }
}

/// Well-linked decomposition of an edge-capacitated instance with a feasible
/// flow `f` whose pairs form a matching.
pub fn wl_decompose(inst: &Instance, d: &RootedDecomposition, f: &PathFlow<Rational>, r: usize) -> Result<WlDecomposition> {
    if inst.mode != Mode::Edp {
        return Err(Error::Input("well-linked decomposition needs edge capacities".into()));
    }
    let width = d.validate(&inst.graph)?;
    if r <= width {
        return Err(Error::WidthExceeded {
            node: 0,
            size: width + 1,
            bound: r,
        });
    }
    if !inst.pairs.is_matching() {
        return Err(Error::Input("terminal pairs do not form a matching".into()));
    }
    f.check_feasible(&inst.graph, inst.mode)
        .map_err(|v| Error::Input(format!("flow is infeasible: {v}")))?;
    let wl = Wl {
        r,
        depth_limit: 4 * (inst.graph.num_vertices() + 2 * r) + 64,
    };
    let components = wl.run(inst, d, f, 0)?;
    let lv = input_levels(inst, d, f, r);
    let flow = f.value();
    let total_weight = crate::scalar::sum(components.iter().map(|c| c.weight()));
    let out = WlDecomposition {
        bound: guarantee_bound(&flow, r, lv.l1 + lv.l2, WL_CONSTANT),
        components,
        r,
        l1: lv.l1,
        l2: lv.l2,
        flow,
        total_weight,
    };
    for c in &out.components {
        verify_wl_certificate(c, &inst.pairs).map_err(|v| Error::Contract(format!("certificate: {v}")))?;
    }
    if !out.pairwise_disjoint() {
        return Err(Error::Contract("components overlap".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    fn path_instance(n: usize) -> (Instance, RootedDecomposition) {
        let mut g = CapGraph::new(n);
        for v in 0..n - 1 {
            g.add_edge(v, v + 1, 1).unwrap();
        }
        let inst = Instance::new(g, vec![(0, n - 1)], Mode::Edp).unwrap();
        let d = RootedDecomposition::path((0..n - 1).map(|i| [i, i + 1].into()).collect()).unwrap();
        (inst, d)
    }

    #[test]
    fn single_pair_on_path() {
        let (inst, d) = path_instance(4);
        let mut f = PathFlow::new();
        f.push(0, vec![0, 1, 2, 3], Rational::one());
        let out = wl_decompose(&inst, &d, &f, 2).unwrap();
        assert_eq!(out.components.len(), 1);
        let c = &out.components[0];
        assert_eq!(c.pi[&0], c.pi[&3]);
        assert!(c.pi[&0] >= q(1, 6));
        assert!(out.bound_holds());
    }

    #[test]
    fn empty_flow_gives_nothing() {
        let (inst, d) = path_instance(3);
        let out = wl_decompose(&inst, &d, &PathFlow::new(), 2).unwrap();
        assert!(out.components.is_empty());
    }

    #[test]
    fn nice_flow_scaling_case() {
        let mut f = PathFlow::new();
        f.push(0, vec![0, 2, 1], Rational::one());
        let mut g = PathFlow::new();
        g.push(0, vec![0, 2], Rational::one());
        g.push(0, vec![1, 2], Rational::one());
        let nf = nice_flow(&f, &g, &Rational::one(), &[2].into()).unwrap().unwrap();
        assert_eq!(nf.z, 2);
        assert_eq!(nf.h, g.scale(&q(1, 3)).canonical());
    }

    #[test]
    fn certificate_rejects_overload_and_wrong_marginal() {
        let (inst, _) = path_instance(3);
        let mut h = PathFlow::new();
        h.push(0, vec![0, 1], Rational::one());
        h.push(0, vec![2, 1], Rational::one());
        let mut c = component(&inst, [0, 1, 2].into(), 1, h.clone()).unwrap();
        assert!(verify_wl_certificate(&c, &inst.pairs).is_ok());
        c.pi.insert(0, q(1, 2));
        assert!(matches!(
            verify_wl_certificate(&c, &inst.pairs),
            Err(CertificateViolation::Marginal { vertex: 0, .. })
        ));
        let mut over = h;
        over.push(0, vec![0, 1], Rational::one());
        let c = component(&inst, [0, 1, 2].into(), 1, over).unwrap();
        assert!(matches!(
            verify_wl_certificate(&c, &inst.pairs),
            Err(CertificateViolation::Overloaded { u: 0, v: 1, .. })
        ));
    }
}
