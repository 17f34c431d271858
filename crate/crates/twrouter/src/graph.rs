//! Capacitated undirected graphs, terminal pairs and problem instances.
//!
//! Vertex ids are dense `usize` values. Subgraphs keep the ids of their
//! parent graph and only mark the dropped vertices as absent, so flows and
//! decompositions can be restricted without relabelling.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vertex = usize;
pub type VertexSet = BTreeSet<Vertex>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Edge-capacitated routing.
    Edp,
    /// Node-capacitated routing.
    Ndp,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CapGraph {
    present: Vec<bool>,
    adj: Vec<BTreeMap<Vertex, u64>>,
    node_caps: Option<Vec<u64>>,
}

impl CapGraph {
    pub fn new(n: usize) -> Self {
        CapGraph {
            present: vec![true; n],
            adj: vec![BTreeMap::new(); n],
            node_caps: None,
        }
    }

    pub fn with_node_caps(n: usize, cap: u64) -> Self {
        let mut g = Self::new(n);
        g.node_caps = Some(vec![cap; n]);
        g
    }

    pub fn id_bound(&self) -> usize {
        self.present.len()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.present.get(v).copied().unwrap_or(false)
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.present
            .iter()
            .enumerate()
            .filter(|(_, &p)| p)
            .map(|(v, _)| v)
    }

    pub fn vertex_set(&self) -> VertexSet {
        self.vertices().collect()
    }

    pub fn num_vertices(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    pub fn has_node_caps(&self) -> bool {
        self.node_caps.is_some()
    }

    /// Appends a fresh vertex and returns its id.
    pub fn add_vertex(&mut self, cap: Option<u64>) -> Vertex {
        let v = self.present.len();
        self.present.push(true);
        self.adj.push(BTreeMap::new());
        if let Some(caps) = self.node_caps.as_mut() {
            caps.push(cap.unwrap_or(1).max(1));
        }
        v
    }

    /// Adds `cap` to the edge `uv`, creating it if needed.
    pub fn add_edge(&mut self, u: Vertex, v: Vertex, cap: u64) -> Result<()> {
        if !self.contains(u) {
            return Err(Error::UnknownVertex(u));
        }
        if !self.contains(v) {
            return Err(Error::UnknownVertex(v));
        }
        if u == v {
            return Err(Error::Input(format!("self-loop at vertex {u}")));
        }
        if cap == 0 {
            return Err(Error::Input(format!("edge {u}-{v} has capacity 0")));
        }
        *self.adj[u].entry(v).or_insert(0) += cap;
        *self.adj[v].entry(u).or_insert(0) += cap;
        Ok(())
    }

    pub fn edge_cap(&self, u: Vertex, v: Vertex) -> Option<u64> {
        if !self.contains(u) || !self.contains(v) {
            return None;
        }
        self.adj[u].get(&v).copied()
    }

    pub fn node_cap(&self, v: Vertex) -> Option<u64> {
        self.node_caps.as_ref().and_then(|c| c.get(v).copied())
    }

    pub fn set_node_cap(&mut self, v: Vertex, cap: u64) -> Result<()> {
        if !self.contains(v) {
            return Err(Error::UnknownVertex(v));
        }
        if cap == 0 {
            return Err(Error::Input(format!("vertex {v} has capacity 0")));
        }
        let n = self.present.len();
        let caps = self.node_caps.get_or_insert_with(|| vec![1; n]);
        caps[v] = cap;
        Ok(())
    }

    /// Makes node capacities explicit, filling missing ones with `cap`.
    pub fn ensure_node_caps(&mut self, cap: u64) {
        if self.node_caps.is_none() {
            self.node_caps = Some(vec![cap; self.present.len()]);
        }
    }

    pub fn drop_node_caps(&mut self) {
        self.node_caps = None;
    }

    pub fn neighbors(&self, v: Vertex) -> impl Iterator<Item = (Vertex, u64)> + '_ {
        self.adj[v].iter().map(|(&w, &c)| (w, c))
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adj[v].len()
    }

    /// Edges as `(u, v, cap)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex, u64)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, nb)| {
            nb.range(u + 1..).map(move |(&v, &c)| (u, v, c))
        })
    }

    pub fn total_edge_cap(&self) -> u64 {
        self.edges().map(|(_, _, c)| c).sum()
    }

    /// `G[S]`: vertex set `S`, all edges with both ends in `S`.
    pub fn induced_subgraph(&self, s: &VertexSet) -> Result<CapGraph> {
        if let Some(&v) = s.iter().find(|&&v| !self.contains(v)) {
            return Err(Error::UnknownVertex(v));
        }
        let mut g = self.clone();
        for v in 0..g.present.len() {
            if g.present[v] && !s.contains(&v) {
                g.present[v] = false;
            }
        }
        for v in 0..g.adj.len() {
            if !g.present[v] {
                g.adj[v].clear();
            } else {
                g.adj[v].retain(|w, _| s.contains(w));
            }
        }
        Ok(g)
    }

    /// `G - S`.
    pub fn remove_vertices(&self, s: &VertexSet) -> CapGraph {
        let keep: VertexSet = self.vertices().filter(|v| !s.contains(v)).collect();
        self.induced_subgraph(&keep).expect("subset of own vertices")
    }

    /// `G[γ] - E(G[σ])`, the graph `G(t)` of a decomposition node.
    pub fn cone_graph(&self, gamma: &VertexSet, sigma: &VertexSet) -> CapGraph {
        let mut g = self.induced_subgraph(gamma).expect("cone within graph");
        for &a in sigma {
            if !g.contains(a) {
                continue;
            }
            let inside: Vec<Vertex> = g.adj[a].keys().copied().filter(|b| sigma.contains(b)).collect();
            for b in inside {
                g.adj[a].remove(&b);
                g.adj[b].remove(&a);
            }
        }
        g
    }

    pub fn clamp_caps(&mut self, bound: u64) {
        let bound = bound.max(1);
        for nb in self.adj.iter_mut() {
            for c in nb.values_mut() {
                *c = (*c).min(bound);
            }
        }
        if let Some(caps) = self.node_caps.as_mut() {
            for c in caps.iter_mut() {
                *c = (*c).min(bound);
            }
        }
    }

    pub fn components(&self) -> Vec<VertexSet> {
        let mut seen = vec![false; self.present.len()];
        let mut out = Vec::new();
        for s in self.vertices() {
            if seen[s] {
                continue;
            }
            let mut comp = VertexSet::new();
            let mut queue = VecDeque::from([s]);
            seen[s] = true;
            while let Some(v) = queue.pop_front() {
                comp.insert(v);
                for (w, _) in self.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// True iff `A ∪ B = V(G)` and no edge joins `A \ B` with `B \ A`.
    pub fn is_separation(&self, a: &VertexSet, b: &VertexSet) -> bool {
        if self.vertices().any(|v| !a.contains(&v) && !b.contains(&v)) {
            return false;
        }
        for &v in a.difference(b) {
            if !self.contains(v) {
                continue;
            }
            if self.neighbors(v).any(|(w, _)| b.contains(&w) && !a.contains(&w)) {
                return false;
            }
        }
        true
    }

    /// Total capacity of the edges leaving `u`.
    pub fn boundary_cap(&self, u: &VertexSet) -> u64 {
        u.iter()
            .filter(|&&v| self.contains(v))
            .flat_map(|&v| self.neighbors(v))
            .filter(|(w, _)| !u.contains(w))
            .map(|(_, c)| c)
            .sum()
    }

    /// Open neighbourhood `N(U)`.
    pub fn neighborhood(&self, u: &VertexSet) -> VertexSet {
        u.iter()
            .filter(|&&v| self.contains(v))
            .flat_map(|&v| self.neighbors(v).map(|(w, _)| w))
            .filter(|w| !u.contains(w))
            .collect()
    }

    pub fn node_cap_sum(&self, s: &VertexSet) -> u64 {
        s.iter().filter_map(|&v| self.node_cap(v)).sum()
    }

    /// BFS shortest path between two vertices avoiding `blocked`.
    pub fn shortest_path(&self, from: Vertex, to: Vertex, blocked: &VertexSet) -> Option<Vec<Vertex>> {
        if !self.contains(from) || !self.contains(to) {
            return None;
        }
        let mut prev = vec![usize::MAX; self.present.len()];
        let mut queue = VecDeque::from([from]);
        prev[from] = from;
        while let Some(v) = queue.pop_front() {
            if v == to {
                let mut path = vec![to];
                let mut c = to;
                while c != from {
                    c = prev[c];
                    path.push(c);
                }
                path.reverse();
                return Some(path);
            }
            for (w, _) in self.neighbors(v) {
                if prev[w] == usize::MAX && (!blocked.contains(&w) || w == to) {
                    prev[w] = v;
                    queue.push_back(w);
                }
            }
        }
        None
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalPairs(pub Vec<(Vertex, Vertex)>);

impl TerminalPairs {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> (Vertex, Vertex) {
        self.0[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, (Vertex, Vertex))> + '_ {
        self.0.iter().copied().enumerate()
    }

    /// Every terminal occurs in exactly one pair and `s != t`.
    pub fn is_matching(&self) -> bool {
        let mut seen = VertexSet::new();
        self.0
            .iter()
            .all(|&(s, t)| s != t && seen.insert(s) && seen.insert(t))
    }

    pub fn terminals(&self) -> VertexSet {
        self.0.iter().flat_map(|&(s, t)| [s, t]).collect()
    }

    /// Map from terminal to pair index; only meaningful for matchings.
    pub fn owner(&self) -> BTreeMap<Vertex, usize> {
        let mut m = BTreeMap::new();
        for (i, (s, t)) in self.iter() {
            m.entry(s).or_insert(i);
            m.entry(t).or_insert(i);
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub graph: CapGraph,
    pub pairs: TerminalPairs,
    pub mode: Mode,
}

impl Instance {
    pub fn new(graph: CapGraph, pairs: Vec<(Vertex, Vertex)>, mode: Mode) -> Result<Self> {
        for &(s, t) in &pairs {
            for v in [s, t] {
                if !graph.contains(v) {
                    return Err(Error::UnknownVertex(v));
                }
            }
            if s == t {
                return Err(Error::Input(format!("pair ({s}, {t}) has equal endpoints")));
            }
        }
        if mode == Mode::Ndp && !graph.has_node_caps() {
            return Err(Error::Input("node-capacitated instance without node capacities".into()));
        }
        Ok(Instance {
            graph,
            pairs: TerminalPairs(pairs),
            mode,
        })
    }

    pub fn k(&self) -> usize {
        self.pairs.len()
    }

    /// Pairs whose terminals are both present in the graph.
    pub fn active_pairs(&self) -> Vec<usize> {
        self.pairs
            .iter()
            .filter(|(_, (s, t))| self.graph.contains(*s) && self.graph.contains(*t))
            .map(|(i, _)| i)
            .collect()
    }

    /// Same pairs and mode on a different graph over the same id space.
    pub fn with_graph(&self, graph: CapGraph) -> Instance {
        Instance {
            graph,
            pairs: self.pairs.clone(),
            mode: self.mode,
        }
    }
}

/// An instance whose pairs form a matching, with the map back to the input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Normalized {
    pub instance: Instance,
    /// `origin[v]` is the input vertex that `v` stands for.
    pub origin: Vec<Vertex>,
    /// Leaf copies created, as `(leaf, host)`.
    pub leaves: Vec<(Vertex, Vertex)>,
}

/// Replaces repeated terminals by fresh leaves and clamps capacities to `k`.
pub fn normalize_terminals(instance: &Instance) -> Normalized {
    let mut graph = instance.graph.clone();
    graph.clamp_caps(instance.k() as u64);
    let mut origin: Vec<Vertex> = (0..graph.id_bound()).collect();
    let mut leaves = Vec::new();
    let mut used = VertexSet::new();
    let mut pairs = Vec::with_capacity(instance.k());
    for (_, (s, t)) in instance.pairs.iter() {
        let mut pick = |v: Vertex, graph: &mut CapGraph| -> Vertex {
            if used.insert(v) {
                return v;
            }
            let leaf = graph.add_vertex(Some(1));
            graph.add_edge(leaf, v, 1).expect("fresh leaf");
            origin.push(origin[v]);
            leaves.push((leaf, v));
            used.insert(leaf);
            leaf
        };
        let s2 = pick(s, &mut graph);
        let t2 = pick(t, &mut graph);
        pairs.push((s2, t2));
    }
    Normalized {
        instance: Instance {
            graph,
            pairs: TerminalPairs(pairs),
            mode: instance.mode,
        },
        origin,
        leaves,
    }
}
