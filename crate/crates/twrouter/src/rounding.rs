//! Rounding a fractional solution that is linked to a small vertex set.
//!
//! Input: a feasible path flow `f`, a set `S` and a second feasible flow `g`
//! delivering `x(v)/α` from every terminal `v` to `S`. Output: an integral
//! routing of `Ω(|f| / (α|S|))` pairs.
//!
//! Everything runs on a node-capacitated graph `H` in which every terminal
//! sits on its own degree-one leaf of capacity one. Edge-capacitated
//! instances are subdivided first: every edge becomes a node carrying the
//! edge capacity, original vertices get capacity `2m` for `m` pairs, which
//! no flow in this module can exceed. Stages:
//!
//! 1. symmetrize `g` so both terminals of a pair send the same amount to
//!    every vertex of `S`;
//! 2. keep only the flow into the best vertex `u ∈ S`;
//! 3. round the two single-sink flows (sources `s`, sources `t`) to
//!    integral amounts with max-flow augmentations;
//! 4. cluster the surviving terminals into trees of the support of the
//!    half-integral flow and select at most one pair per tree;
//! 5. route local pairs inside their tree, or round a flow from the
//!    selected terminals to `u` and join the paths at `u`.
//!
//! Every stage inequality is evaluated exactly and recorded in a
//! [`StageReport`]; a failure is an error.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use log::debug;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{shortcut, PathFlow};
use crate::graph::{CapGraph, Instance, Mode, Vertex, VertexSet};
use crate::maxflow::{node_capacitated_reduce, node_in, node_out, FlowNetwork};
use crate::routing::Routing;
use crate::scalar::{q, qi, Rational, Scalar};

/// Minimum number of linked terminals per cluster tree.
pub const CLUSTER_SIZE: usize = 3;

pub struct RoundingInput<'a> {
    pub instance: &'a Instance,
    pub f: &'a PathFlow<Rational>,
    pub g: &'a PathFlow<Rational>,
    pub s: &'a VertexSet,
    pub alpha: Rational,
    /// Route further pairs greedily after the rounding.
    pub augment: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Empty,
    Local,
    Distant,
}

/// One audited inequality `lhs ≥ rhs` (or `lhs = rhs` when `exact`).
#[derive(Clone, Debug, Serialize)]
pub struct StageCheck {
    pub name: &'static str,
    #[serde(serialize_with = "ser_q")]
    pub lhs: Rational,
    #[serde(serialize_with = "ser_q")]
    pub rhs: Rational,
    pub exact: bool,
    pub holds: bool,
}

fn ser_q<S: serde::Serializer>(v: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Clone, Debug, Serialize)]
pub struct StageReport {
    #[serde(serialize_with = "ser_q")]
    pub flow: Rational,
    #[serde(serialize_with = "ser_q")]
    pub alpha: Rational,
    pub s_size: usize,
    pub best_vertex: Option<Vertex>,
    #[serde(serialize_with = "ser_q")]
    pub f1: Rational,
    #[serde(serialize_with = "ser_q")]
    pub f2: Rational,
    #[serde(serialize_with = "ser_q")]
    pub g2: Rational,
    /// `|h_s°| + |h_t°|`.
    #[serde(serialize_with = "ser_q")]
    pub rounded: Rational,
    pub rounding_steps: usize,
    pub m_prime: usize,
    pub m_second: usize,
    pub trees: usize,
    pub max_degree: usize,
    /// `2h + Δ` for the observed forest degree `Δ`.
    pub d_formula: usize,
    /// Largest number of linked terminals in one tree.
    pub d_real: usize,
    pub branch: Branch,
    pub distant: usize,
    #[serde(serialize_with = "ser_q")]
    pub g4: Rational,
    #[serde(serialize_with = "ser_q")]
    pub g5: Rational,
    /// Pairs routed by the pipeline itself.
    pub routed: usize,
    /// Pairs added afterwards along residual shortest paths.
    pub augmented: usize,
    pub checks: Vec<StageCheck>,
}

impl StageReport {
    fn new(flow: Rational, alpha: Rational, s_size: usize) -> Self {
        StageReport {
            flow,
            alpha,
            s_size,
            best_vertex: None,
            f1: Rational::zero(),
            f2: Rational::zero(),
            g2: Rational::zero(),
            rounded: Rational::zero(),
            rounding_steps: 0,
            m_prime: 0,
            m_second: 0,
            trees: 0,
            max_degree: 0,
            d_formula: 0,
            d_real: 0,
            branch: Branch::Empty,
            distant: 0,
            g4: Rational::zero(),
            g5: Rational::zero(),
            routed: 0,
            augmented: 0,
            checks: Vec::new(),
        }
    }

    fn check_ge(&mut self, name: &'static str, lhs: Rational, rhs: Rational) -> Result<()> {
        let holds = lhs >= rhs;
        self.push(name, lhs, rhs, false, holds)
    }

    fn check_eq(&mut self, name: &'static str, lhs: Rational, rhs: Rational) -> Result<()> {
        let holds = lhs == rhs;
        self.push(name, lhs, rhs, true, holds)
    }

    fn push(&mut self, name: &'static str, lhs: Rational, rhs: Rational, exact: bool, holds: bool) -> Result<()> {
        debug!("rounding check {name}: {lhs} vs {rhs} -> {holds}");
        let msg = format!("stage check {name} failed: {lhs} vs {rhs}");
        self.checks.push(StageCheck {
            name,
            lhs,
            rhs,
            exact,
            holds,
        });
        if holds {
            Ok(())
        } else {
            Err(Error::Contract(msg))
        }
    }

    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    /// Audited `C` with `routed ≥ C·|f|/(α|S|)`: `1/(120·d)` for the realized `d`.
    pub fn constant(&self) -> Rational {
        Rational::one() / qi(120 * self.d_real.max(1) as u64)
    }

    /// `C·|f|/(α|S|)`.
    pub fn guaranteed(&self) -> Rational {
        if self.s_size == 0 || self.flow.is_zero() {
            return Rational::zero();
        }
        self.constant() * self.flow.clone() / (self.alpha.clone() * qi(self.s_size as u64))
    }
}

/// The node-capacitated graph `H` with terminal leaves.
#[derive(Clone, Debug)]
pub struct Reduced {
    pub graph: CapGraph,
    /// Original vertex of each `H` vertex; `None` for leaves and subdivision nodes.
    pub origin: Vec<Option<Vertex>>,
    /// `(pair, leaf of s, leaf of t)` for every pair with positive flow.
    pub terminals: Vec<(usize, Vertex, Vertex)>,
    leaf_of: BTreeMap<Vertex, Vertex>,
    edge_node: BTreeMap<(Vertex, Vertex), Vertex>,
}

impl Reduced {
    pub fn build(inst: &Instance, pairs: &[usize]) -> Result<Reduced> {
        let g = &inst.graph;
        let m = pairs.len().max(1) as u64;
        let (mut graph, mut edge_node) = match inst.mode {
            Mode::Ndp => (g.clone(), BTreeMap::new()),
            Mode::Edp => {
                let mut h = CapGraph::with_node_caps(g.id_bound(), 2 * m);
                let absent: VertexSet = (0..g.id_bound()).filter(|&v| !g.contains(v)).collect();
                h = h.remove_vertices(&absent);
                (h, BTreeMap::new())
            }
        };
        let mut origin: Vec<Option<Vertex>> = (0..g.id_bound()).map(Some).collect();
        if inst.mode == Mode::Edp {
            for (u, v, c) in g.edges() {
                let e = graph.add_vertex(Some(c));
                origin.push(None);
                graph.add_edge(u, e, 1)?;
                graph.add_edge(e, v, 1)?;
                edge_node.insert((u, v), e);
            }
        }
        let mut leaf_of = BTreeMap::new();
        let mut terminals = Vec::with_capacity(pairs.len());
        for &p in pairs {
            let (s, t) = inst.pairs.get(p);
            let mut leaf = |v: Vertex, graph: &mut CapGraph| -> Result<Vertex> {
                if leaf_of.contains_key(&v) {
                    return Err(Error::Input(format!("terminal {v} belongs to two pairs with flow")));
                }
                let l = graph.add_vertex(Some(1));
                origin.push(None);
                graph.add_edge(l, v, 1)?;
                leaf_of.insert(v, l);
                Ok(l)
            };
            let ls = leaf(s, &mut graph)?;
            let lt = leaf(t, &mut graph)?;
            terminals.push((p, ls, lt));
        }
        Ok(Reduced {
            graph,
            origin,
            terminals,
            leaf_of,
            edge_node,
        })
    }

    fn lift(&self, path: &[Vertex], start_leaf: bool, end_leaf: bool) -> Result<Vec<Vertex>> {
        let mut out = Vec::with_capacity(2 * path.len() + 2);
        if start_leaf {
            out.push(self.leaf(path[0])?);
        }
        for (i, &v) in path.iter().enumerate() {
            out.push(v);
            if let Some(&w) = path.get(i + 1) {
                if let Some(&e) = self.edge_node.get(&(v.min(w), v.max(w))) {
                    out.push(e);
                }
            }
        }
        if end_leaf {
            out.push(self.leaf(*path.last().expect("nonempty"))?);
        }
        Ok(out)
    }

    fn leaf(&self, v: Vertex) -> Result<Vertex> {
        self.leaf_of
            .get(&v)
            .copied()
            .ok_or_else(|| Error::Contract(format!("vertex {v} is not a terminal with flow")))
    }

    /// Original vertices of an `H` path.
    pub fn project(&self, path: &[Vertex]) -> Vec<Vertex> {
        let mapped: Vec<Vertex> = path.iter().filter_map(|&v| self.origin.get(v).copied().flatten()).collect();
        shortcut(&mapped)
    }
}

fn rq(v: usize) -> Rational {
    qi(v as u64)
}

fn audit_h(flow: &PathFlow<Rational>, h: &CapGraph, what: &str) -> Result<()> {
    flow.check_feasible(h, Mode::Ndp)
        .map_err(|v| Error::Contract(format!("{what} is infeasible: {v}")))
}

/// Paths grouped by first vertex.
fn by_source(flow: &PathFlow<Rational>) -> BTreeMap<Vertex, Vec<(Vec<Vertex>, Rational)>> {
    let mut m: BTreeMap<Vertex, Vec<(Vec<Vertex>, Rational)>> = BTreeMap::new();
    for e in flow.entries() {
        m.entry(e.source()).or_default().push((e.path.clone(), e.weight.clone()));
    }
    m
}

/// `f` lifted to `H` with every path oriented from the `s` leaf.
fn lift_f(red: &Reduced, inst: &Instance, f: &PathFlow<Rational>) -> Result<PathFlow<Rational>> {
    let mut out = PathFlow::new();
    for e in f.entries() {
        let (s, _) = inst.pairs.get(e.pair);
        let mut path = e.path.clone();
        if path[0] != s {
            path.reverse();
        }
        out.push(e.pair, red.lift(&path, true, true)?, e.weight.clone());
    }
    Ok(out)
}

/// Keeps the `g` paths that start at a terminal with flow and end in `S`,
/// scaled so each terminal sends exactly `x(v)/α`; lifted to `H`.
fn trim_g(
    red: &Reduced,
    inst: &Instance,
    f: &PathFlow<Rational>,
    g: &PathFlow<Rational>,
    s: &VertexSet,
    alpha: &Rational,
) -> Result<PathFlow<Rational>> {
    let x = f.marginals();
    let grouped = by_source(&g.filter(|e| s.contains(&e.sink())));
    let owner = inst.pairs.owner();
    let mut out = PathFlow::new();
    for (&v, xv) in &x {
        let need = xv.clone() / alpha.clone();
        let paths = grouped.get(&v).map(Vec::as_slice).unwrap_or(&[]);
        let delivered: Rational = paths.iter().fold(Rational::zero(), |a, (_, w)| a + w.clone());
        if delivered < need {
            return Err(Error::Contract(format!(
                "second flow delivers {delivered} from terminal {v}, needs {need}"
            )));
        }
        let factor = need / delivered;
        let pair = owner.get(&v).copied().unwrap_or(usize::MAX);
        for (path, w) in paths {
            out.push(pair, red.lift(path, true, false)?, w.clone() * factor.clone());
        }
    }
    Ok(out)
}

/// Stage 1: `f₁ = f/3` and a `g₁` in which both terminals of each pair send
/// the same amount to every vertex of `S`.
pub fn symmetrize(
    terminals: &[(usize, Vertex, Vertex)],
    f: &PathFlow<Rational>,
    g: &PathFlow<Rational>,
) -> (PathFlow<Rational>, PathFlow<Rational>) {
    let third = q(1, 3);
    let f1 = f.scale(&third);
    let g_src = by_source(g);
    let x = f.pair_values();
    let mut g1 = PathFlow::new();
    for &(p, ls, lt) in terminals {
        let Some(tq) = g_src.get(&lt) else { continue };
        let Some(xi) = x.get(&p) else { continue };
        for (qp, wq) in tq {
            g1.push(p, qp.clone(), wq.clone() * third.clone());
        }
        for e in f.entries().iter().filter(|e| e.pair == p) {
            debug_assert_eq!(e.path[0], ls);
            for (qp, wq) in tq {
                let mut walk = e.path.clone();
                walk.extend_from_slice(&qp[1..]);
                let w = e.weight.clone() * wq.clone() / (xi.clone() * qi(3));
                g1.push(p, shortcut(&walk), w);
            }
        }
    }
    (f1, g1)
}

/// Stage 2: the vertex `u ∈ S` receiving the most `g₁` flow (smallest id
/// on ties), `g₂ = g₁` restricted to paths ending at `u`, and `f₂` with each
/// pair scaled to `α` times what its `s` sends to `u`.
pub fn restrict_to_best_vertex(
    terminals: &[(usize, Vertex, Vertex)],
    f1: &PathFlow<Rational>,
    g1: &PathFlow<Rational>,
    s: &VertexSet,
    alpha: &Rational,
) -> Option<(PathFlow<Rational>, PathFlow<Rational>, Vertex)> {
    let inflow = g1.sink_amounts();
    let mut best: Option<(Vertex, Rational)> = None;
    for &v in s {
        let a = inflow.get(&v).cloned().unwrap_or_else(Rational::zero);
        if best.as_ref().is_none_or(|(_, b)| a > *b) {
            best = Some((v, a));
        }
    }
    let (u, amount) = best?;
    if !amount.is_pos() {
        return None;
    }
    let g2 = g1.filter(|e| e.sink() == u);
    let sent = g2.source_amounts();
    let x1 = f1.pair_values();
    let mut f2 = PathFlow::new();
    for &(p, ls, _) in terminals {
        let (Some(a), Some(xi)) = (sent.get(&ls), x1.get(&p)) else { continue };
        let factor = alpha.clone() * a.clone() / xi.clone();
        for e in f1.entries().iter().filter(|e| e.pair == p) {
            f2.push(p, e.path.clone(), e.weight.clone() * factor.clone());
        }
    }
    Some((f2, g2, u))
}

/// One side of the half-integral rounding: single-sink flow into `u`.
#[derive(Clone, Debug, Default)]
pub struct SideFlow {
    pub paths: BTreeMap<Vertex, Vec<(Vec<Vertex>, Rational)>>,
}

impl SideFlow {
    fn from_flow(flow: &PathFlow<Rational>, sources: &BTreeSet<Vertex>) -> Self {
        let mut paths = by_source(flow);
        paths.retain(|v, _| sources.contains(v));
        SideFlow { paths }
    }

    pub fn amount(&self, v: Vertex) -> Rational {
        self.paths
            .get(&v)
            .map(|ps| ps.iter().fold(Rational::zero(), |a, (_, w)| a + w.clone()))
            .unwrap_or_else(Rational::zero)
    }

    pub fn value(&self) -> Rational {
        self.paths.keys().fold(Rational::zero(), |a, &v| a + self.amount(v))
    }

    fn limit(&mut self, v: Vertex, to: &Rational) {
        let have = self.amount(v);
        if have <= *to {
            return;
        }
        if to.is_zero() {
            self.paths.remove(&v);
            return;
        }
        let factor = to.clone() / have;
        if let Some(ps) = self.paths.get_mut(&v) {
            for (_, w) in ps.iter_mut() {
                *w = w.clone() * factor.clone();
            }
        }
    }

    pub fn to_flow(&self, owner: &BTreeMap<Vertex, usize>) -> PathFlow<Rational> {
        let mut f = PathFlow::new();
        for (v, ps) in &self.paths {
            for (p, w) in ps {
                f.push(owner[v], p.clone(), w.clone());
            }
        }
        f
    }
}

/// Rounds the amount of `v0` up to an integer while keeping every integral
/// source fixed and not decreasing the total: integral targets are
/// saturated first, the remaining fractional sources are added afterwards
/// and the augmentation continues from that flow.
pub fn round_source(h: &CapGraph, side: &SideFlow, v0: Vertex, u: Vertex) -> Result<SideFlow> {
    let (mut net, _) = node_capacitated_reduce::<Rational>(h, 1);
    let src = net.num_nodes() - 1;
    let sink = node_out(u);
    let mut fixed = Rational::zero();
    let mut later: Vec<(Vertex, Rational)> = Vec::new();
    for &v in side.paths.keys() {
        let z = side.amount(v);
        if v == v0 {
            let c = z.ceil_int();
            fixed += c.clone();
            net.add_arc(src, node_in(v), c);
        } else if z.is_integral() {
            if z.is_pos() {
                fixed += z.clone();
                net.add_arc(src, node_in(v), z);
            }
        } else {
            later.push((v, z));
        }
    }
    let before = side.value();
    let first = net.max_flow(src, sink);
    if first != fixed {
        return Err(Error::Contract(format!(
            "integral sources cannot be saturated: {first} of {fixed}"
        )));
    }
    for (v, z) in later {
        net.add_arc(src, node_in(v), z);
    }
    let total = net.max_flow(src, sink);
    if total < before {
        return Err(Error::Contract(format!("rounding lost flow: {total} < {before}")));
    }
    Ok(SideFlow {
        paths: decompose_single_sink(&net, src, sink),
    })
}

fn decompose_single_sink(
    net: &FlowNetwork<Rational>,
    src: usize,
    sink: usize,
) -> BTreeMap<Vertex, Vec<(Vec<Vertex>, Rational)>> {
    let mut out: BTreeMap<Vertex, Vec<(Vec<Vertex>, Rational)>> = BTreeMap::new();
    for (nodes, w) in net.decompose(src, sink) {
        let mut path: Vec<Vertex> = Vec::with_capacity(nodes.len() / 2);
        for &n in &nodes[1..] {
            let v = n / 2;
            if path.last() != Some(&v) {
                path.push(v);
            }
        }
        let path = shortcut(&path);
        out.entry(path[0]).or_default().push((path, w));
    }
    out
}

/// Stage 3: integral single-sink flows `h_s°`, `h_t°` with equal amounts per
/// pair, returned with the number of rounding steps.
pub fn half_integral_round(
    h: &CapGraph,
    terminals: &[(usize, Vertex, Vertex)],
    g2: &PathFlow<Rational>,
    u: Vertex,
) -> Result<(SideFlow, SideFlow, usize)> {
    let s_leaves: BTreeSet<Vertex> = terminals.iter().map(|t| t.1).collect();
    let t_leaves: BTreeSet<Vertex> = terminals.iter().map(|t| t.2).collect();
    let mut hs = SideFlow::from_flow(g2, &s_leaves);
    let mut ht = SideFlow::from_flow(g2, &t_leaves);
    let mut steps = 0;
    while let Some(&(p, ls, lt)) = terminals.iter().find(|&&(_, ls, _)| !hs.amount(ls).is_integral()) {
        steps += 1;
        if steps > terminals.len() + 1 {
            return Err(Error::Contract("half-integral rounding does not terminate".into()));
        }
        hs = round_source(h, &hs, ls, u)?;
        ht = round_source(h, &ht, lt, u)?;
        for &(_, a, b) in terminals {
            let m = Rational::min_of(hs.amount(a), ht.amount(b));
            hs.limit(a, &m);
            ht.limit(b, &m);
        }
        if !hs.amount(ls).is_integral() || hs.amount(ls).is_zero() {
            return Err(Error::Contract(format!("pair {p} was not rounded up")));
        }
    }
    Ok((hs, ht, steps))
}

/// Trees of the support of `g₃` and the selected pairs.
#[derive(Clone, Debug, Default)]
pub struct Clustering {
    /// Spanning tree of the support rooted at `u`.
    pub parent: BTreeMap<Vertex, Vertex>,
    pub clusters: Vec<VertexSet>,
    /// Linked terminals per cluster, ascending.
    pub members: Vec<Vec<Vertex>>,
    pub cluster_of: BTreeMap<Vertex, usize>,
    pub max_degree: usize,
    pub d_real: usize,
    /// `(pair, s leaf, t leaf)` selected, at most one per cluster.
    pub selected: Vec<(usize, Vertex, Vertex)>,
}

impl Clustering {
    pub fn is_local(&self, s: Vertex, t: Vertex) -> bool {
        self.cluster_of.get(&s) == self.cluster_of.get(&t)
    }

    /// The unique spanning-tree path between two vertices.
    pub fn tree_path(&self, a: Vertex, b: Vertex) -> Vec<Vertex> {
        let mut up_a = vec![a];
        while let Some(&p) = self.parent.get(up_a.last().expect("nonempty")) {
            up_a.push(p);
        }
        let pos: BTreeMap<Vertex, usize> = up_a.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut up_b = vec![b];
        while !pos.contains_key(up_b.last().expect("nonempty")) {
            let p = self.parent[up_b.last().expect("nonempty")];
            up_b.push(p);
        }
        let meet = pos[up_b.last().expect("nonempty")];
        let mut path: Vec<Vertex> = up_a[..=meet].to_vec();
        up_b.pop();
        path.extend(up_b.into_iter().rev());
        path
    }
}

/// Stage 4: splits a BFS spanning tree of the support of `g₃` bottom-up
/// into vertex-disjoint subtrees with at least [`CLUSTER_SIZE`] linked
/// terminals each, then greedily selects pairs by id so that no tree is
/// touched by two selected pairs.
pub fn cluster_and_select(
    g3: &PathFlow<Rational>,
    linked: &[(usize, Vertex, Vertex)],
    u: Vertex,
) -> Clustering {
    if linked.is_empty() {
        return Clustering::default();
    }
    let mut adj: BTreeMap<Vertex, BTreeSet<Vertex>> = BTreeMap::new();
    for e in g3.entries() {
        for w in e.path.windows(2) {
            adj.entry(w[0]).or_default().insert(w[1]);
            adj.entry(w[1]).or_default().insert(w[0]);
        }
    }
    let mut parent: BTreeMap<Vertex, Vertex> = BTreeMap::new();
    let mut children: BTreeMap<Vertex, Vec<Vertex>> = BTreeMap::new();
    let mut order = vec![u];
    let mut seen: BTreeSet<Vertex> = BTreeSet::from([u]);
    let mut queue = VecDeque::from([u]);
    while let Some(v) = queue.pop_front() {
        for &w in adj.get(&v).into_iter().flatten() {
            if seen.insert(w) {
                parent.insert(w, v);
                children.entry(v).or_default().push(w);
                order.push(w);
                queue.push_back(w);
            }
        }
    }
    let max_degree = order
        .iter()
        .map(|v| children.get(v).map_or(0, Vec::len) + usize::from(parent.contains_key(v)))
        .max()
        .unwrap_or(0);
    let terminal: BTreeSet<Vertex> = linked.iter().flat_map(|&(_, a, b)| [a, b]).collect();
    let mut count: BTreeMap<Vertex, usize> = BTreeMap::new();
    let mut assigned: BTreeMap<Vertex, usize> = BTreeMap::new();
    let mut clusters: Vec<VertexSet> = Vec::new();
    let mut tops: Vec<Vertex> = Vec::new();
    let collect = |top: Vertex, assigned: &BTreeMap<Vertex, usize>| -> VertexSet {
        let mut out = VertexSet::new();
        let mut stack = vec![top];
        while let Some(v) = stack.pop() {
            out.insert(v);
            for &c in children.get(&v).into_iter().flatten() {
                if !assigned.contains_key(&c) {
                    stack.push(c);
                }
            }
        }
        out
    };
    for &v in order.iter().rev() {
        let mut c = usize::from(terminal.contains(&v));
        for ch in children.get(&v).into_iter().flatten() {
            if !assigned.contains_key(ch) {
                c += count[ch];
            }
        }
        count.insert(v, c);
        if c >= CLUSTER_SIZE && v != u {
            let members = collect(v, &assigned);
            let id = clusters.len();
            for &m in &members {
                assigned.insert(m, id);
            }
            clusters.push(members);
            tops.push(v);
        }
    }
    let leftover = collect(u, &assigned);
    if leftover.iter().any(|v| terminal.contains(v)) {
        let host = tops
            .iter()
            .enumerate()
            .filter(|(_, t)| parent.get(t).is_some_and(|p| leftover.contains(p)))
            .map(|(i, _)| i)
            .next();
        match host {
            Some(i) => {
                for &m in &leftover {
                    assigned.insert(m, i);
                }
                clusters[i].extend(leftover);
            }
            None => {
                for &m in &leftover {
                    assigned.insert(m, clusters.len());
                }
                clusters.push(leftover);
            }
        }
    }
    let members: Vec<Vec<Vertex>> = clusters
        .iter()
        .map(|c| c.iter().copied().filter(|v| terminal.contains(v)).collect())
        .collect();
    let d_real = members.iter().map(Vec::len).max().unwrap_or(0);
    let mut used = vec![false; clusters.len()];
    let mut selected = Vec::new();
    for &(p, a, b) in linked {
        let (ca, cb) = (assigned[&a], assigned[&b]);
        if used[ca] || used[cb] {
            continue;
        }
        used[ca] = true;
        used[cb] = true;
        selected.push((p, a, b));
    }
    Clustering {
        parent,
        clusters,
        members,
        cluster_of: assigned,
        max_degree,
        d_real,
        selected,
    }
}

/// Stage 5, distant branch: `g₄` sends 3/5 from every terminal of a
/// distant pair, split evenly over three linked terminals of its tree and
/// continued along `(2/5)·g₃`.
pub fn build_g4(
    clustering: &Clustering,
    distant: &[(usize, Vertex, Vertex)],
    g3_paths: &BTreeMap<Vertex, Vec<(Vec<Vertex>, Rational)>>,
) -> PathFlow<Rational> {
    let fifth = q(1, 5);
    let mut g4 = PathFlow::new();
    for &(p, a, b) in distant {
        for w in [a, b] {
            let c = clustering.cluster_of[&w];
            for &y in clustering.members[c].iter().take(CLUSTER_SIZE) {
                let lead = clustering.tree_path(w, y);
                let ys = &g3_paths[&y];
                let total = ys.iter().fold(Rational::zero(), |acc, (_, wq)| acc + wq.clone());
                for (qp, wq) in ys {
                    let mut walk = lead.clone();
                    walk.extend_from_slice(&qp[1..]);
                    g4.push(p, shortcut(&walk), fifth.clone() * wq.clone() / total.clone());
                }
            }
        }
    }
    g4
}

/// Integral max-flow from the distant terminals to `u`, joined into
/// `s`-`u`-`t` walks for pairs whose both terminals reach `u`.
pub fn final_integral_round(
    h: &CapGraph,
    distant: &[(usize, Vertex, Vertex)],
    u: Vertex,
) -> (Rational, Vec<(usize, Vec<Vertex>)>) {
    let (mut net, _) = node_capacitated_reduce::<Rational>(h, 1);
    let src = net.num_nodes() - 1;
    for &(_, a, b) in distant {
        net.add_arc(src, node_in(a), Rational::one());
        net.add_arc(src, node_in(b), Rational::one());
    }
    let sink = node_out(u);
    let value = net.max_flow(src, sink);
    let paths = decompose_single_sink(&net, src, sink);
    let mut joined = Vec::new();
    for &(p, a, b) in distant {
        let (Some(pa), Some(pb)) = (paths.get(&a), paths.get(&b)) else { continue };
        let mut walk = pa[0].0.clone();
        walk.extend(pb[0].0.iter().rev().skip(1));
        joined.push((p, shortcut(&walk)));
    }
    (value, joined)
}

/// Full pipeline; the routing is audited against the input instance.
pub fn route_via_small_cut(input: &RoundingInput) -> Result<(Routing, StageReport)> {
    let inst = input.instance;
    let alpha = input.alpha.clone();
    if alpha < Rational::one() {
        return Err(Error::Input(format!("alpha {alpha} below one")));
    }
    let s_set: VertexSet = input.s.iter().copied().filter(|&v| inst.graph.contains(v)).collect();
    let f = input.f.filter(|e| e.weight.is_pos());
    let flow = f.value();
    let mut report = StageReport::new(flow.clone(), alpha.clone(), s_set.len());
    f.check_feasible(&inst.graph, inst.mode)
        .map_err(|v| Error::Contract(format!("input flow infeasible: {v}")))?;
    input
        .g
        .check_feasible(&inst.graph, inst.mode)
        .map_err(|v| Error::Contract(format!("second flow infeasible: {v}")))?;
    if flow.is_zero() {
        return Ok((Routing::new(), report));
    }
    if s_set.is_empty() {
        return Err(Error::Contract("empty target set with positive flow".into()));
    }
    let pairs: Vec<usize> = f.pair_values().into_keys().collect();
    let red = Reduced::build(inst, &pairs)?;
    let h = &red.graph;
    let fh = lift_f(&red, inst, &f)?;
    let gh = trim_g(&red, inst, &f, input.g, &s_set, &alpha)?;
    audit_h(&fh, h, "lifted flow")?;
    audit_h(&gh, h, "trimmed second flow")?;

    let (f1, g1) = symmetrize(&red.terminals, &fh, &gh);
    audit_h(&g1, h, "symmetrized flow")?;
    report.f1 = f1.value();
    report.check_eq("f1 = f/3", report.f1.clone(), flow.clone() / qi(3))?;

    let Some((f2, g2, u)) = restrict_to_best_vertex(&red.terminals, &f1, &g1, &s_set, &alpha) else {
        return Err(Error::Contract("no flow reaches the target set".into()));
    };
    report.best_vertex = Some(u);
    report.f2 = f2.value();
    report.g2 = g2.value();
    report.check_ge("|f2| >= |f1|/|S|", report.f2.clone(), report.f1.clone() / rq(s_set.len()))?;

    let (hs, ht, steps) = half_integral_round(h, &red.terminals, &g2, u)?;
    report.rounding_steps = steps;
    report.rounded = hs.value() + ht.value();
    report.check_ge("|hs|+|ht| >= |g2|/2", report.rounded.clone(), report.g2.clone() / qi(2))?;

    let linked: Vec<(usize, Vertex, Vertex)> = red
        .terminals
        .iter()
        .copied()
        .filter(|&(_, a, b)| hs.amount(a).is_one() && ht.amount(b).is_one())
        .collect();
    report.m_prime = linked.len();
    let owner: BTreeMap<Vertex, usize> = red.terminals.iter().flat_map(|&(p, a, b)| [(a, p), (b, p)]).collect();
    let g3 = hs.to_flow(&owner).add(&ht.to_flow(&owner)).scale(&q(1, 2));
    audit_h(&g3, h, "half-integral flow")?;

    let clustering = cluster_and_select(&g3, &linked, u);
    report.trees = clustering.clusters.len();
    report.max_degree = clustering.max_degree;
    report.d_formula = 2 * CLUSTER_SIZE + clustering.max_degree;
    report.d_real = clustering.d_real;
    report.m_second = clustering.selected.len();
    let d2 = rq(clustering.d_real.max(1) * clustering.d_real.max(1));
    report.check_ge("|M''| >= |M'|/d^2", rq(report.m_second), rq(report.m_prime) / d2)?;

    let (local, distant): (Vec<_>, Vec<_>) = clustering
        .selected
        .iter()
        .copied()
        .partition(|&(_, a, b)| clustering.is_local(a, b));
    let mut h_routes: Vec<(usize, Vec<Vertex>)> = Vec::new();
    if 2 * local.len() >= clustering.selected.len() {
        report.branch = Branch::Local;
        for &(p, a, b) in &local {
            h_routes.push((p, clustering.tree_path(a, b)));
        }
        report.check_ge("local >= |M''|/2", rq(h_routes.len()), rq(report.m_second) / qi(2))?;
    } else {
        report.branch = Branch::Distant;
        report.distant = distant.len();
        let mut g3_paths = by_source(&g3);
        g3_paths.retain(|v, _| owner.contains_key(v));
        let g4 = build_g4(&clustering, &distant, &g3_paths);
        audit_h(&g4, h, "tree-extended flow")?;
        report.g4 = g4.value();
        report.check_eq("|g4| = (6/5)|D|", report.g4.clone(), q(6, 5) * rq(distant.len()))?;
        let (g5, joined) = final_integral_round(h, &distant, u);
        report.g5 = g5.clone();
        report.check_ge("|g5| >= |g4|", g5, report.g4.clone())?;
        h_routes = joined;
        report.check_ge("distant >= |D|/5", rq(h_routes.len()), rq(distant.len()) / qi(5))?;
        report.check_ge("distant >= |M''|/10", rq(h_routes.len()), rq(report.m_second) / qi(10))?;
    }
    let mut routing = Routing::new();
    for (p, path) in h_routes {
        routing.insert(p, red.project(&path));
    }
    routing.audit(inst)?;
    report.routed = routing.len();
    report.check_ge("routed >= C|f|/(alpha|S|)", rq(report.routed), report.guaranteed())?;
    report.check_ge("routed >= 1", rq(report.routed), Rational::one())?;
    if input.augment {
        report.augmented = routing.augment_greedily(inst, &pairs);
        routing.audit(inst)?;
    }
    debug!(
        "rounding: |f|={} alpha={} |S|={} u={} M'={} M''={} d={} branch={:?} routed={}",
        flow, alpha, report.s_size, u, report.m_prime, report.m_second, report.d_real, report.branch, report.routed
    );
    Ok((routing, report))
}
