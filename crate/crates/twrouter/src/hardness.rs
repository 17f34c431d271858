//! Reduction from Multicolored Clique to node-disjoint paths on graphs of
//! bounded treedepth.
//!
//! For each class `i` and each `v ∈ V^i` the gadget `W^i` has a path `X^i_v`
//! on the vertices `x^i_{v,j}`, `j ≠ i`. Every `v ≠ u^i` gets a terminal pair
//! `(s^i_v, t^i_v)` attached to both ends of `X^i_v` and of `X^i_{u^i}`. A
//! hub `p_{ij}` is adjacent to every `x^i_{·,j}` and `x^j_{·,i}`, and every
//! edge `vu` of `G` between classes `i < j` adds the pair
//! `(x^i_{v,j}, x^j_{u,i})`. A multicolored clique exists exactly when
//! `ℓ = k(n-1) + C(k,2)` pairs can be routed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CapGraph, Instance, Mode, Vertex, VertexSet};
use crate::oracle::{exact_max_routing, OracleConfig};
use crate::routing::Routing;

/// A Multicolored Clique instance with equal class sizes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MccInstance {
    pub num_vertices: usize,
    pub classes: Vec<Vec<usize>>,
    pub edges: Vec<(usize, usize)>,
}

impl MccInstance {
    /// Pads classes with isolated dummy vertices to a common size of at least two.
    pub fn new(num_vertices: usize, classes: Vec<Vec<usize>>, edges: Vec<(usize, usize)>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::Input("need at least two classes".into()));
        }
        let mut seen = BTreeSet::new();
        for &v in classes.iter().flatten() {
            if v >= num_vertices || !seen.insert(v) {
                return Err(Error::Input(format!("vertex {v} is out of range or in two classes")));
            }
        }
        if seen.len() != num_vertices {
            return Err(Error::Input("classes do not cover all vertices".into()));
        }
        for &(u, v) in &edges {
            if u >= num_vertices || v >= num_vertices || u == v {
                return Err(Error::Input(format!("bad edge {u}-{v}")));
            }
        }
        let size = classes.iter().map(Vec::len).max().unwrap_or(0).max(2);
        let mut n = num_vertices;
        let mut classes = classes;
        for class in &mut classes {
            class.sort_unstable();
            while class.len() < size {
                class.push(n);
                n += 1;
            }
        }
        Ok(MccInstance {
            num_vertices: n,
            classes,
            edges,
        })
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    /// Common class size.
    pub fn n(&self) -> usize {
        self.classes[0].len()
    }

    pub fn class_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_vertices];
        for (i, class) in self.classes.iter().enumerate() {
            for &v in class {
                out[v] = i;
            }
        }
        out
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.iter().any(|&(a, b)| (a, b) == (u, v) || (a, b) == (v, u))
    }

    /// Brute force over all choices of one vertex per class.
    pub fn find_clique(&self) -> Option<Vec<usize>> {
        let mut pick = Vec::with_capacity(self.k());
        fn rec(m: &MccInstance, pick: &mut Vec<usize>) -> bool {
            if pick.len() == m.k() {
                return true;
            }
            for &v in &m.classes[pick.len()] {
                if pick.iter().all(|&u| m.has_edge(u, v)) {
                    pick.push(v);
                    if rec(m, pick) {
                        return true;
                    }
                    pick.pop();
                }
            }
            false
        }
        rec(self, &mut pick).then_some(pick)
    }
}

/// Role of a vertex of the gadget graph. Classes and positions are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "lowercase")]
pub enum Role {
    /// `x^i_{v,j}`.
    X { class: usize, v: usize, j: usize },
    S { class: usize, v: usize },
    T { class: usize, v: usize },
    /// `p_{ij}`, `i < j`.
    Hub { i: usize, j: usize },
}

#[derive(Clone, Debug)]
pub struct GadgetOutput {
    pub instance: Instance,
    pub roles: Vec<Role>,
    /// Number of pairs to route.
    pub ell: usize,
    /// `u^i`, the smallest vertex of each class.
    pub anchors: Vec<usize>,
    /// Indices of the `(s, t)` pairs; the remaining pairs encode edges of `G`.
    pub st_pairs: Vec<usize>,
    pub x_pairs: Vec<usize>,
    /// The hubs `p_{ij}`.
    pub cut_set: VertexSet,
    x: BTreeMap<(usize, usize, usize), Vertex>,
    hubs: BTreeMap<(usize, usize), Vertex>,
    st: BTreeMap<(usize, usize), usize>,
    edge_pair: BTreeMap<(usize, usize), usize>,
}

impl GadgetOutput {
    pub fn x(&self, class: usize, v: usize, j: usize) -> Vertex {
        self.x[&(class, v, j)]
    }

    pub fn hub(&self, i: usize, j: usize) -> Vertex {
        self.hubs[&(i.min(j), i.max(j))]
    }

    /// Vertices of `X^i_v` in path order.
    pub fn x_path(&self, k: usize, class: usize, v: usize) -> Vec<Vertex> {
        (0..k).filter(|&j| j != class).map(|j| self.x(class, v, j)).collect()
    }

    /// `k(n(k-1) + 2(n-1)) + C(k,2)`.
    pub fn expected_vertices(k: usize, n: usize) -> usize {
        k * (n * (k - 1) + 2 * (n - 1)) + k * (k - 1) / 2
    }

    /// `k(n-1) + C(k,2)`.
    pub fn expected_ell(k: usize, n: usize) -> usize {
        k * (n - 1) + k * (k - 1) / 2
    }
}

pub fn build_gadget(mcc: &MccInstance) -> Result<GadgetOutput> {
    let k = mcc.k();
    let n = mcc.n();
    if k < 2 || n < 2 || mcc.classes.iter().any(|c| c.len() != n) {
        return Err(Error::Input("classes must have a common size of at least two, with k >= 2".into()));
    }
    let class_of = mcc.class_of();
    let mut roles = Vec::new();
    let add = |role: Role, roles: &mut Vec<Role>| {
        roles.push(role);
        roles.len() - 1
    };
    let mut x = BTreeMap::new();
    let mut ends = BTreeMap::new();
    let anchors: Vec<usize> = mcc.classes.iter().map(|c| c[0]).collect();
    let mut st_terminals = Vec::new();
    for (i, class) in mcc.classes.iter().enumerate() {
        for &v in class {
            for j in (0..k).filter(|&j| j != i) {
                x.insert((i, v, j), add(Role::X { class: i, v, j }, &mut roles));
            }
            let first = if i == 0 { 1 } else { 0 };
            let last = if i == k - 1 { k - 2 } else { k - 1 };
            ends.insert((i, v), (first, last));
        }
        for &v in class.iter().filter(|&&v| v != anchors[i]) {
            let s = add(Role::S { class: i, v }, &mut roles);
            let t = add(Role::T { class: i, v }, &mut roles);
            st_terminals.push((i, v, s, t));
        }
    }
    let mut hubs = BTreeMap::new();
    for i in 0..k {
        for j in i + 1..k {
            hubs.insert((i, j), add(Role::Hub { i, j }, &mut roles));
        }
    }
    let mut g = CapGraph::with_node_caps(roles.len(), 1);
    for (i, class) in mcc.classes.iter().enumerate() {
        for &v in class {
            let path: Vec<Vertex> = (0..k).filter(|&j| j != i).map(|j| x[&(i, v, j)]).collect();
            for w in path.windows(2) {
                g.add_edge(w[0], w[1], 1)?;
            }
        }
    }
    let mut pairs = Vec::new();
    let mut st = BTreeMap::new();
    for &(i, v, s, t) in &st_terminals {
        let (first, last) = ends[&(i, v)];
        for w in [v, anchors[i]] {
            g.add_edge(s, x[&(i, w, first)], 1)?;
            g.add_edge(t, x[&(i, w, last)], 1)?;
        }
        st.insert((i, v), pairs.len());
        pairs.push((s, t));
    }
    for (&(i, j), &p) in &hubs {
        for &v in &mcc.classes[i] {
            g.add_edge(p, x[&(i, v, j)], 1)?;
        }
        for &u in &mcc.classes[j] {
            g.add_edge(p, x[&(j, u, i)], 1)?;
        }
    }
    let mut edge_pair = BTreeMap::new();
    for &(a, b) in &mcc.edges {
        let (ca, cb) = (class_of[a], class_of[b]);
        if ca == cb {
            continue;
        }
        let (v, u, i, j) = if ca < cb { (a, b, ca, cb) } else { (b, a, cb, ca) };
        if edge_pair.contains_key(&(v, u)) {
            continue;
        }
        edge_pair.insert((v, u), pairs.len());
        pairs.push((x[&(i, v, j)], x[&(j, u, i)]));
    }
    let st_pairs: Vec<usize> = (0..st.len()).collect();
    let x_pairs: Vec<usize> = (st.len()..pairs.len()).collect();
    let instance = Instance::new(g, pairs, Mode::Ndp)?;
    let out = GadgetOutput {
        cut_set: hubs.values().copied().collect(),
        instance,
        roles,
        ell: GadgetOutput::expected_ell(k, n),
        anchors,
        st_pairs,
        x_pairs,
        x,
        hubs,
        st,
        edge_pair,
    };
    if out.instance.graph.num_vertices() != GadgetOutput::expected_vertices(k, n) {
        return Err(Error::Contract("gadget size differs from the closed form".into()));
    }
    Ok(out)
}

/// The `ℓ` disjoint paths induced by a multicolored clique (one vertex per class).
pub fn clique_to_routing(out: &GadgetOutput, mcc: &MccInstance, clique: &[usize]) -> Result<Routing> {
    let k = mcc.k();
    if clique.len() != k {
        return Err(Error::Input(format!("expected {k} clique vertices")));
    }
    for (i, &v) in clique.iter().enumerate() {
        if !mcc.classes[i].contains(&v) {
            return Err(Error::Input(format!("vertex {v} is not in class {i}")));
        }
    }
    let mut routing = Routing::new();
    for (&(i, v), &p) in &out.st {
        let via = if v == clique[i] { out.anchors[i] } else { v };
        let (s, t) = out.instance.pairs.get(p);
        let mut path = vec![s];
        path.extend(out.x_path(k, i, via));
        path.push(t);
        routing.insert(p, path);
    }
    for i in 0..k {
        for j in i + 1..k {
            let (v, u) = (clique[i], clique[j]);
            let p = *out
                .edge_pair
                .get(&(v, u))
                .ok_or_else(|| Error::Input(format!("{v}-{u} is not an edge, so the input is not a clique")))?;
            routing.insert(p, vec![out.x(i, v, j), out.hub(i, j), out.x(j, u, i)]);
        }
    }
    routing.audit(&out.instance)?;
    if routing.len() != out.ell {
        return Err(Error::Contract(format!("{} paths instead of {}", routing.len(), out.ell)));
    }
    Ok(routing)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Equivalence {
    pub routes_ell: bool,
    pub clique: Option<Vec<usize>>,
}

impl Equivalence {
    pub fn holds(&self) -> bool {
        self.routes_ell == self.clique.is_some()
    }
}

/// Compares the oracle on the gadget with brute-force clique search.
pub fn verify_equivalence(mcc: &MccInstance, max_vertices: usize, max_ell: usize) -> Result<Equivalence> {
    let out = build_gadget(mcc)?;
    let n = out.instance.graph.num_vertices();
    if n > max_vertices || out.ell > max_ell {
        return Err(Error::GuardExceeded(format!(
            "gadget has {n} vertices and needs {} paths (limits {max_vertices}, {max_ell})",
            out.ell
        )));
    }
    let cfg = OracleConfig {
        max_vertices,
        max_pairs: out.instance.k(),
        target: Some(out.ell),
        ..OracleConfig::default()
    };
    let res = exact_max_routing(&out.instance, &cfg)?;
    Ok(Equivalence {
        routes_ell: res.opt >= out.ell,
        clique: mcc.find_clique(),
    })
}

/// Elimination forest as a parent map with its depth.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationForest {
    pub parent: BTreeMap<Vertex, Option<Vertex>>,
    pub depth: usize,
}

impl EliminationForest {
    fn depth_of(&self, v: Vertex) -> usize {
        let mut d = 1;
        let mut cur = v;
        while let Some(Some(p)) = self.parent.get(&cur) {
            cur = *p;
            d += 1;
        }
        d
    }

    fn is_ancestor(&self, a: Vertex, v: Vertex) -> bool {
        let mut cur = Some(v);
        while let Some(c) = cur {
            if c == a {
                return true;
            }
            cur = self.parent.get(&c).copied().flatten();
        }
        false
    }

    /// Every edge joins an ancestor-descendant pair.
    pub fn covers(&self, g: &CapGraph) -> bool {
        g.vertices().all(|v| self.parent.contains_key(&v))
            && g.edges().all(|(u, v, _)| self.is_ancestor(u, v) || self.is_ancestor(v, u))
    }
}

/// Evaluates the recursive treedepth definition along the forest: every
/// connected part must have a unique topmost vertex, whose removal recurses.
/// Returns the depth certified this way.
pub fn recursive_depth(g: &CapGraph, forest: &EliminationForest) -> Result<usize> {
    let mut best = 0;
    for comp in g.components() {
        let top: Vec<Vertex> = comp
            .iter()
            .copied()
            .filter(|&v| comp.iter().all(|&w| forest.is_ancestor(v, w)))
            .collect();
        let root = *top
            .first()
            .ok_or_else(|| Error::Contract("component without a common ancestor".into()))?;
        let rest: VertexSet = comp.iter().copied().filter(|&v| v != root).collect();
        let sub = g.induced_subgraph(&rest)?;
        best = best.max(1 + recursive_depth(&sub, forest)?);
    }
    Ok(best)
}

fn chain(order: &[Vertex], parent: &mut BTreeMap<Vertex, Option<Vertex>>, above: Option<Vertex>) -> Option<Vertex> {
    let mut prev = above;
    for &v in order {
        parent.insert(v, prev);
        prev = Some(v);
    }
    prev
}

fn bisect(path: &[Vertex], above: Option<Vertex>, parent: &mut BTreeMap<Vertex, Option<Vertex>>) {
    if path.is_empty() {
        return;
    }
    let mid = path.len() / 2;
    parent.insert(path[mid], above);
    bisect(&path[..mid], Some(path[mid]), parent);
    bisect(&path[mid + 1..], Some(path[mid]), parent);
}

/// Orders a path component of `g` from one end; `None` if it is not a path.
fn as_path(g: &CapGraph, comp: &VertexSet) -> Option<Vec<Vertex>> {
    let sub = g.induced_subgraph(comp).ok()?;
    if sub.num_edges() + 1 != comp.len() || sub.vertices().any(|v| sub.degree(v) > 2) {
        return None;
    }
    let start = sub.vertices().find(|&v| sub.degree(v) <= 1)?;
    let mut order = vec![start];
    let mut prev = None;
    while let Some(next) = sub
        .neighbors(*order.last().expect("nonempty"))
        .map(|(w, _)| w)
        .find(|&w| Some(w) != prev)
    {
        prev = order.last().copied();
        order.push(next);
    }
    Some(order)
}

/// Witness for `td(H) ≤ C(k,2) + k + 3`: the hubs as a chain, then in each
/// gadget the two ends of `X^i_{u^i}`, then every remaining path split at
/// its midpoint recursively.
pub fn treedepth_witness(out: &GadgetOutput, k: usize) -> Result<(usize, EliminationForest)> {
    let g = &out.instance.graph;
    let mut parent = BTreeMap::new();
    let hubs: Vec<Vertex> = out.cut_set.iter().copied().collect();
    let below_hubs = chain(&hubs, &mut parent, None);
    let rest: VertexSet = g.vertices().filter(|v| !out.cut_set.contains(v)).collect();
    let h = g.induced_subgraph(&rest)?;
    for gadget in h.components() {
        let class = match out.roles[*gadget.iter().next().expect("nonempty")] {
            Role::X { class, .. } | Role::S { class, .. } | Role::T { class, .. } => class,
            Role::Hub { .. } => return Err(Error::Contract("hub left after deletion".into())),
        };
        let xu = out.x_path(k, class, out.anchors[class]);
        let mut ends = vec![xu[0]];
        if xu.len() > 1 {
            ends.push(*xu.last().expect("nonempty"));
        }
        let below = chain(&ends, &mut parent, below_hubs);
        let left: VertexSet = gadget.iter().copied().filter(|v| !ends.contains(v)).collect();
        let sub = h.induced_subgraph(&left)?;
        for piece in sub.components() {
            let order = as_path(&sub, &piece)
                .ok_or_else(|| Error::Contract("gadget remainder is not a union of paths".into()))?;
            if order.len() > k + 1 {
                return Err(Error::Contract(format!("remainder path has {} > k+1 vertices", order.len())));
            }
            bisect(&order, below, &mut parent);
        }
    }
    let mut forest = EliminationForest { parent, depth: 0 };
    forest.depth = g.vertices().map(|v| forest.depth_of(v)).max().unwrap_or(0);
    if !forest.covers(g) {
        return Err(Error::Contract("witness misses an edge".into()));
    }
    let bound = k * (k - 1) / 2 + k + 3;
    if forest.depth > bound {
        return Err(Error::Contract(format!("witness depth {} exceeds {bound}", forest.depth)));
    }
    Ok((forest.depth, forest))
}

/// Random instance with `k` classes of size `n`; each cross-class edge is
/// present with probability `density`.
pub fn random_mcc(k: usize, n: usize, seed: u64, density: f64) -> Result<MccInstance> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let classes: Vec<Vec<usize>> = (0..k).map(|i| (i * n..(i + 1) * n).collect()).collect();
    let mut edges = Vec::new();
    for u in 0..k * n {
        for v in u + 1..k * n {
            if u / n != v / n && rng.gen_bool(density.clamp(0.0, 1.0)) {
                edges.push((u, v));
            }
        }
    }
    MccInstance::new(k * n, classes, edges)
}

/// Multicolored triangle family on classes `{0,1}, {2,3}, {4,5}`: the
/// triangle edges `0-2`, `0-4`, `2-4` are toggled by the low three bits of
/// `mask`, and the distractors `1-3`, `3-5`, `0-5` never close a triangle.
pub fn triangle_pattern(mask: u8) -> MccInstance {
    let mut edges = vec![(1, 3), (3, 5), (0, 5)];
    for (bit, e) in [(0, 2), (0, 4), (2, 4)].into_iter().enumerate() {
        if mask & (1 << bit) != 0 {
            edges.push(e);
        }
    }
    MccInstance::new(6, vec![vec![0, 1], vec![2, 3], vec![4, 5]], edges).expect("valid pattern")
}
