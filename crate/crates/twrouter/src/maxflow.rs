//! Single-commodity maximum flow and minimum cut.
//!
//! Arcs are stored in pairs `(2i, 2i+1)` with antisymmetric flow, so an
//! undirected edge is one pair with capacity on both directions. The solver
//! is shortest augmenting path with capacity scaling, followed by a plain
//! shortest-augmenting-path phase that finishes fractional capacities.
//! Solving again after adding arcs continues from the current flow.

use std::collections::VecDeque;

use crate::graph::{CapGraph, Vertex};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct FlowNetwork<T> {
    adj: Vec<Vec<usize>>,
    head: Vec<usize>,
    cap: Vec<T>,
    flow: Vec<T>,
    infinite: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutCertificate<T> {
    /// `side[v]` is true for nodes reachable from the source in the residual network.
    pub side: Vec<bool>,
    pub capacity: T,
    /// Arcs leaving the source side.
    pub saturated: Vec<usize>,
}

impl<T: Scalar> FlowNetwork<T> {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); nodes],
            head: Vec::new(),
            cap: Vec::new(),
            flow: Vec::new(),
            infinite: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.head.len() / 2
    }

    pub fn add_node(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.adj.len() - 1
    }

    fn push_pair(&mut self, u: usize, v: usize, fwd: T, back: T, inf: bool) -> usize {
        let id = self.head.len();
        self.head.push(v);
        self.cap.push(fwd);
        self.flow.push(T::zero());
        self.infinite.push(inf);
        self.head.push(u);
        self.cap.push(back);
        self.flow.push(T::zero());
        self.infinite.push(false);
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
        id
    }

    /// Directed arc; returns its id.
    pub fn add_arc(&mut self, u: usize, v: usize, cap: T) -> usize {
        self.push_pair(u, v, cap, T::zero(), false)
    }

    /// Directed arc that is never part of a finite cut.
    pub fn add_infinite_arc(&mut self, u: usize, v: usize) -> usize {
        self.push_pair(u, v, T::zero(), T::zero(), true)
    }

    /// Undirected edge usable in both directions up to `cap`.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: T) -> usize {
        self.push_pair(u, v, cap.clone(), cap, false)
    }

    pub fn arc_head(&self, e: usize) -> usize {
        self.head[e]
    }

    pub fn arc_tail(&self, e: usize) -> usize {
        self.head[e ^ 1]
    }

    pub fn arc_flow(&self, e: usize) -> T {
        self.flow[e].clone()
    }

    pub fn arc_capacity(&self, e: usize) -> Option<T> {
        if self.infinite[e] {
            None
        } else {
            Some(self.cap[e].clone())
        }
    }

    pub fn set_capacity(&mut self, e: usize, cap: T) {
        self.cap[e] = cap;
    }

    fn infinity(&self) -> T {
        let finite = (0..self.cap.len())
            .filter(|&e| !self.infinite[e])
            .fold(T::zero(), |a, e| a + self.cap[e].clone());
        finite + T::one()
    }

    fn refresh_infinite(&mut self) {
        let inf = self.infinity();
        for e in 0..self.cap.len() {
            if self.infinite[e] {
                self.cap[e] = inf.clone();
            }
        }
    }

    fn residual(&self, e: usize) -> T {
        self.cap[e].clone() - self.flow[e].clone()
    }

    fn augmenting_path(&self, s: usize, t: usize, delta: &T) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.adj.len()];
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.adj[v] {
                let w = self.head[e];
                if seen[w] {
                    continue;
                }
                let r = self.residual(e);
                let ok = if delta.is_zero() { r.is_pos() } else { r >= *delta };
                if ok {
                    seen[w] = true;
                    prev[w] = e;
                    if w == t {
                        let mut path = Vec::new();
                        let mut c = t;
                        while c != s {
                            let a = prev[c];
                            path.push(a);
                            c = self.head[a ^ 1];
                        }
                        path.reverse();
                        return Some(path);
                    }
                    queue.push_back(w);
                }
            }
        }
        None
    }

    fn augment(&mut self, path: &[usize]) -> T {
        let mut b = self.residual(path[0]);
        for &e in &path[1..] {
            b = T::min_of(b, self.residual(e));
        }
        for &e in path {
            self.flow[e] = self.flow[e].clone() + b.clone();
            self.flow[e ^ 1] = self.flow[e ^ 1].clone() - b.clone();
        }
        b
    }

    /// Net flow out of `s`.
    pub fn value(&self, s: usize) -> T {
        self.adj[s]
            .iter()
            .fold(T::zero(), |a, &e| a + self.flow[e].clone())
    }

    /// Augments to a maximum `s`-`t` flow and returns its value.
    pub fn max_flow(&mut self, s: usize, t: usize) -> T {
        if s == t {
            return T::zero();
        }
        self.refresh_infinite();
        let top = (0..self.cap.len())
            .filter(|&e| !self.infinite[e])
            .map(|e| self.cap[e].clone())
            .fold(T::zero(), T::max_of);
        let two = T::from_ratio(2, 1);
        let mut delta = T::one();
        while delta.clone() * two.clone() <= top {
            delta = delta * two.clone();
        }
        if top >= T::one() {
            loop {
                while let Some(p) = self.augmenting_path(s, t, &delta) {
                    self.augment(&p);
                }
                if delta == T::one() {
                    break;
                }
                delta = delta / two.clone();
            }
        }
        let zero = T::zero();
        while let Some(p) = self.augmenting_path(s, t, &zero) {
            self.augment(&p);
        }
        self.value(s)
    }

    /// Source side of the minimum cut closest to the source.
    pub fn cut(&self, s: usize) -> CutCertificate<T> {
        let mut side = vec![false; self.adj.len()];
        side[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.adj[v] {
                let w = self.head[e];
                if !side[w] && self.residual(e).is_pos() {
                    side[w] = true;
                    queue.push_back(w);
                }
            }
        }
        let mut capacity = T::zero();
        let mut saturated = Vec::new();
        for (e, &w) in self.head.iter().enumerate() {
            let u = self.head[e ^ 1];
            if side[u] && !side[w] && self.cap[e] > T::zero() {
                capacity = capacity + self.cap[e].clone();
                saturated.push(e);
            }
        }
        CutCertificate {
            side,
            capacity,
            saturated,
        }
    }

    /// Decomposes the current `s`-`t` flow into paths of nodes.
    ///
    /// Cycles met while walking are cancelled. The walk always follows the
    /// positive arc with the smallest head.
    pub fn decompose(&self, s: usize, t: usize) -> Vec<(Vec<usize>, T)> {
        let mut pos: Vec<T> = self
            .flow
            .iter()
            .map(|f| if f.is_pos() { f.clone() } else { T::zero() })
            .collect();
        let mut out_arcs: Vec<Vec<usize>> = self.adj.clone();
        for arcs in out_arcs.iter_mut() {
            arcs.sort_by_key(|&e| (self.head[e], e));
        }
        let next = |pos: &Vec<T>, v: usize| -> Option<usize> {
            out_arcs[v].iter().copied().find(|&e| pos[e].is_pos())
        };
        let mut paths = Vec::new();
        let mut on_walk = vec![usize::MAX; self.adj.len()];
        loop {
            let mut nodes = vec![s];
            let mut arcs: Vec<usize> = Vec::new();
            on_walk[s] = 0;
            let mut done = false;
            loop {
                let v = *nodes.last().expect("walk");
                if v == t {
                    break;
                }
                let Some(e) = next(&pos, v) else {
                    if v == s {
                        done = true;
                    } else {
                        // Conservation is violated only by float noise;
                        // drop the dangling remainder.
                        let a = arcs.pop().expect("arc into v");
                        pos[a] = T::zero();
                        on_walk[v] = usize::MAX;
                        nodes.pop();
                    }
                    if done {
                        break;
                    }
                    continue;
                };
                let w = self.head[e];
                if on_walk[w] != usize::MAX {
                    let i = on_walk[w];
                    let mut cycle: Vec<usize> = arcs[i..].to_vec();
                    cycle.push(e);
                    let m = cycle.iter().map(|&a| pos[a].clone()).fold(pos[e].clone(), T::min_of);
                    for &a in &cycle {
                        pos[a] = pos[a].clone() - m.clone();
                    }
                    for &x in &nodes[i + 1..] {
                        on_walk[x] = usize::MAX;
                    }
                    nodes.truncate(i + 1);
                    arcs.truncate(i);
                } else {
                    on_walk[w] = nodes.len();
                    nodes.push(w);
                    arcs.push(e);
                }
            }
            for &x in &nodes {
                on_walk[x] = usize::MAX;
            }
            if done {
                break;
            }
            let m = arcs.iter().map(|&a| pos[a].clone()).fold(pos[arcs[0]].clone(), T::min_of);
            for &a in &arcs {
                pos[a] = pos[a].clone() - m.clone();
            }
            paths.push((nodes, m));
        }
        paths
    }
}

/// Network with one node per vertex id and an undirected arc pair per edge.
pub fn edge_network<T: Scalar>(g: &CapGraph, extra_nodes: usize) -> FlowNetwork<T> {
    let mut net = FlowNetwork::new(g.id_bound() + extra_nodes);
    for (u, v, c) in g.edges() {
        net.add_edge(u, v, T::from_u64(c).expect("capacity"));
    }
    net
}

pub fn node_in(v: Vertex) -> usize {
    2 * v
}

pub fn node_out(v: Vertex) -> usize {
    2 * v + 1
}

/// Vertex-split network: `v_in -> v_out` carries `cap(v)`, every edge
/// becomes infinite arcs `u_out -> v_in` and `v_out -> u_in`.
///
/// Returns the network and the id of each vertex's internal arc.
pub fn node_capacitated_reduce<T: Scalar>(g: &CapGraph, extra_nodes: usize) -> (FlowNetwork<T>, Vec<Option<usize>>) {
    let mut net = FlowNetwork::new(2 * g.id_bound() + extra_nodes);
    let mut internal = vec![None; g.id_bound()];
    for v in g.vertices() {
        let cap = g.node_cap(v).unwrap_or(1);
        internal[v] = Some(net.add_arc(node_in(v), node_out(v), T::from_u64(cap).expect("capacity")));
    }
    for (u, v, _) in g.edges() {
        net.add_infinite_arc(node_out(u), node_in(v));
        net.add_infinite_arc(node_out(v), node_in(u));
    }
    (net, internal)
}

/// Maximum flow together with its minimum cut.
pub fn max_flow_min_cut<T: Scalar>(net: &mut FlowNetwork<T>, s: usize, t: usize) -> (T, CutCertificate<T>) {
    let v = net.max_flow(s, t);
    let cut = net.cut(s);
    (v, cut)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, Rational};

    #[test]
    fn single_arc() {
        let mut net: FlowNetwork<Rational> = FlowNetwork::new(2);
        net.add_arc(0, 1, q(3, 1));
        let (v, cut) = max_flow_min_cut(&mut net, 0, 1);
        assert_eq!(v, q(3, 1));
        assert_eq!(cut.side, vec![true, false]);
        assert_eq!(cut.capacity, v);
    }

    #[test]
    fn two_disjoint_paths() {
        let mut net: FlowNetwork<f64> = FlowNetwork::new(4);
        net.add_arc(0, 1, 1.0);
        net.add_arc(1, 3, 1.0);
        net.add_arc(0, 2, 1.0);
        net.add_arc(2, 3, 1.0);
        assert_eq!(net.max_flow(0, 3), 2.0);
        assert_eq!(net.decompose(0, 3).len(), 2);
    }

    #[test]
    fn diamond_bottleneck() {
        let mut net: FlowNetwork<Rational> = FlowNetwork::new(4);
        net.add_arc(0, 1, q(5, 1));
        net.add_arc(0, 2, q(5, 1));
        net.add_arc(1, 2, q(1, 1));
        net.add_arc(2, 3, q(1, 1));
        net.add_arc(1, 3, q(0, 1));
        let (v, cut) = max_flow_min_cut(&mut net, 0, 3);
        assert_eq!(v, q(1, 1));
        assert_eq!(cut.capacity, q(1, 1));
    }

    #[test]
    fn undirected_and_infinite() {
        let mut g = CapGraph::with_node_caps(3, 1);
        g.add_edge(0, 1, 1).unwrap();
        g.add_edge(1, 2, 1).unwrap();
        let (mut net, internal) = node_capacitated_reduce::<Rational>(&g, 0);
        assert_eq!(internal.iter().flatten().count(), 3);
        assert_eq!(net.num_arcs(), 3 + 4);
        assert_eq!(net.max_flow(node_in(0), node_out(2)), q(1, 1));
    }

    #[test]
    fn warm_restart() {
        let mut net: FlowNetwork<Rational> = FlowNetwork::new(3);
        net.add_arc(0, 1, q(1, 2));
        net.add_arc(1, 2, q(2, 1));
        assert_eq!(net.max_flow(0, 2), q(1, 2));
        net.add_arc(0, 1, q(1, 1));
        assert_eq!(net.max_flow(0, 2), q(3, 2));
    }
}
