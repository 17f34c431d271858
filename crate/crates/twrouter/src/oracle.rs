//! Exhaustive search for maximum disjoint paths on tiny instances.

use crate::error::{Error, Result};
use crate::graph::{Instance, Mode, Vertex};
use crate::routing::Routing;

#[derive(Clone, Debug)]
pub struct OracleConfig {
    pub max_vertices: usize,
    pub max_pairs: usize,
    /// Search nodes (partial paths) before giving up.
    pub node_budget: u64,
    /// Stop as soon as this many pairs are routed.
    pub target: Option<usize>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_vertices: 30,
            max_pairs: 8,
            node_budget: 20_000_000,
            target: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub opt: usize,
    pub routing: Routing,
    pub nodes: u64,
}

struct Search<'a> {
    inst: &'a Instance,
    adj: Vec<Vec<(Vertex, usize)>>,
    edge_left: Vec<u64>,
    vertex_left: Vec<u64>,
    order: Vec<usize>,
    current: Vec<(usize, Vec<Vertex>)>,
    best: Vec<(usize, Vec<Vertex>)>,
    nodes: u64,
    budget: u64,
    stop_at: usize,
    exhausted: bool,
}

impl Search<'_> {
    fn done(&self) -> bool {
        self.exhausted || self.best.len() >= self.stop_at
    }

    fn search(&mut self, i: usize) {
        if self.done() || self.current.len() + (self.order.len() - i) <= self.best.len() {
            return;
        }
        if i == self.order.len() {
            self.best = self.current.clone();
            return;
        }
        let p = self.order[i];
        let (s, t) = self.inst.pairs.get(p);
        if self.vertex_left[s] > 0 && self.vertex_left[t] > 0 {
            let mut path = vec![s];
            let mut on_path = vec![false; self.adj.len()];
            on_path[s] = true;
            self.take_vertex(s);
            self.extend(i, t, &mut path, &mut on_path);
            self.give_vertex(s);
        }
        self.search(i + 1);
    }

    fn extend(&mut self, i: usize, t: Vertex, path: &mut Vec<Vertex>, on_path: &mut Vec<bool>) {
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
        }
        if self.done() {
            return;
        }
        let v = *path.last().expect("nonempty");
        if v == t {
            self.current.push((self.order[i], path.clone()));
            self.search(i + 1);
            self.current.pop();
            return;
        }
        for k in 0..self.adj[v].len() {
            let (w, e) = self.adj[v][k];
            if on_path[w] || self.edge_left[e] == 0 || self.vertex_left[w] == 0 {
                continue;
            }
            self.edge_left[e] -= 1;
            self.take_vertex(w);
            on_path[w] = true;
            path.push(w);
            self.extend(i, t, path, on_path);
            path.pop();
            on_path[w] = false;
            self.give_vertex(w);
            self.edge_left[e] += 1;
            if self.done() {
                return;
            }
        }
    }

    fn take_vertex(&mut self, v: Vertex) {
        if self.inst.mode == Mode::Ndp {
            self.vertex_left[v] -= 1;
        }
    }

    fn give_vertex(&mut self, v: Vertex) {
        if self.inst.mode == Mode::Ndp {
            self.vertex_left[v] += 1;
        }
    }
}

/// Maximum number of pairs routable simultaneously, with a witness.
///
/// Pairs are tried in index order, each either routed along a simple path
/// (neighbors in increasing id order) or skipped; a branch is cut when it
/// cannot beat the best routing found so far.
pub fn exact_max_routing(inst: &Instance, cfg: &OracleConfig) -> Result<OracleResult> {
    let g = &inst.graph;
    if g.num_vertices() > cfg.max_vertices || inst.k() > cfg.max_pairs {
        return Err(Error::GuardExceeded(format!(
            "{} vertices and {} pairs exceed the oracle limits {} and {}",
            g.num_vertices(),
            inst.k(),
            cfg.max_vertices,
            cfg.max_pairs
        )));
    }
    let n = g.id_bound();
    let mut adj = vec![Vec::new(); n];
    let mut edge_left = Vec::new();
    for (u, v, cap) in g.edges() {
        let e = edge_left.len();
        edge_left.push(if inst.mode == Mode::Edp { cap } else { u64::MAX });
        adj[u].push((v, e));
        adj[v].push((u, e));
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    let vertex_left = (0..n)
        .map(|v| match inst.mode {
            Mode::Edp => u64::MAX,
            Mode::Ndp => g.node_cap(v).unwrap_or(if g.contains(v) { 1 } else { 0 }),
        })
        .collect();
    let order = (0..inst.k())
        .filter(|&p| {
            let (s, t) = inst.pairs.get(p);
            s != t && g.contains(s) && g.contains(t) && g.shortest_path(s, t, &Default::default()).is_some()
        })
        .collect();
    let mut search = Search {
        inst,
        adj,
        edge_left,
        vertex_left,
        order,
        current: Vec::new(),
        best: Vec::new(),
        nodes: 0,
        budget: cfg.node_budget,
        stop_at: cfg.target.unwrap_or(usize::MAX),
        exhausted: false,
    };
    search.search(0);
    if search.exhausted {
        return Err(Error::GuardExceeded(format!("oracle search exceeded {} nodes", cfg.node_budget)));
    }
    let mut routing = Routing::new();
    for (p, path) in search.best {
        routing.insert(p, path);
    }
    routing.audit(inst)?;
    Ok(OracleResult {
        opt: routing.len(),
        routing,
        nodes: search.nodes,
    })
}

pub fn exact_maxedp(inst: &Instance) -> Result<(usize, Routing)> {
    if inst.mode != Mode::Edp {
        return Err(Error::Input("instance is node-capacitated".into()));
    }
    exact_max_routing(inst, &OracleConfig::default()).map(|r| (r.opt, r.routing))
}

pub fn exact_maxndp(inst: &Instance) -> Result<(usize, Routing)> {
    if inst.mode != Mode::Ndp {
        return Err(Error::Input("instance is edge-capacitated".into()));
    }
    exact_max_routing(inst, &OracleConfig::default()).map(|r| (r.opt, r.routing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CapGraph;

    fn star(center: u64) -> Instance {
        let mut g = CapGraph::with_node_caps(5, 1);
        g.set_node_cap(0, center).unwrap();
        for v in 1..5 {
            g.add_edge(0, v, 1).unwrap();
        }
        Instance::new(g, vec![(1, 2), (3, 4)], Mode::Ndp).unwrap()
    }

    #[test]
    fn stars() {
        assert_eq!(exact_maxndp(&star(1)).unwrap().0, 1);
        assert_eq!(exact_maxndp(&star(2)).unwrap().0, 2);
    }

    #[test]
    fn paths() {
        let mut g = CapGraph::new(4);
        g.add_edge(0, 1, 1).unwrap();
        g.add_edge(2, 3, 1).unwrap();
        let inst = Instance::new(g, vec![(0, 1), (2, 3)], Mode::Edp).unwrap();
        assert_eq!(exact_maxedp(&inst).unwrap().0, 2);
        let mut g = CapGraph::new(3);
        g.add_edge(0, 1, 1).unwrap();
        g.add_edge(1, 2, 1).unwrap();
        let inst = Instance::new(g, vec![(0, 2)], Mode::Edp).unwrap();
        let (opt, r) = exact_maxedp(&inst).unwrap();
        assert_eq!(opt, 1);
        assert_eq!(r.paths[&0], vec![0, 1, 2]);
    }

    #[test]
    fn guard_and_target() {
        let inst = crate::gen::gen_grid_gap(2);
        let cfg = OracleConfig {
            max_vertices: 3,
            ..OracleConfig::default()
        };
        assert!(matches!(exact_max_routing(&inst, &cfg), Err(Error::GuardExceeded(_))));
        let cfg = OracleConfig {
            target: Some(1),
            ..OracleConfig::default()
        };
        assert_eq!(exact_max_routing(&inst, &cfg).unwrap().opt, 1);
    }
}
