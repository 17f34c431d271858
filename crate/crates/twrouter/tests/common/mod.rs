#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_traits::{One, Zero};
use twrouter::decomp::RootedDecomposition;
use twrouter::flow::PathFlow;
use twrouter::graph::{CapGraph, Instance, Mode, Vertex, VertexSet};
use twrouter::routing::Routing;
use twrouter::Rational;

/// Adhesion and cone of node `t`, recomputed from the bags and parent pointers.
pub fn sigma_gamma(d: &RootedDecomposition, t: usize) -> (VertexSet, VertexSet) {
    let sigma = match d.parents()[t] {
        Some(p) => d.bags()[t].intersection(&d.bags()[p]).copied().collect(),
        None => VertexSet::new(),
    };
    let mut gamma = VertexSet::new();
    for s in 0..d.bags().len() {
        let mut c = Some(s);
        while let Some(x) = c {
            if x == t {
                gamma.extend(d.bags()[s].iter().copied());
                break;
            }
            c = d.parents()[x];
        }
    }
    (sigma, gamma)
}

/// `x(v)`: flow value summed over path ends at `v`.
pub fn marginals(f: &PathFlow<Rational>) -> BTreeMap<Vertex, Rational> {
    let mut x = BTreeMap::new();
    for e in f.entries() {
        for v in [e.path[0], *e.path.last().unwrap()] {
            let w = x.entry(v).or_insert_with(Rational::zero);
            *w = w.clone() + e.weight.clone();
        }
    }
    x
}

/// Every support path that touches `γ(t)` also meets `σ(t)`.
pub fn good(d: &RootedDecomposition, f: &PathFlow<Rational>, t: usize) -> bool {
    let (sigma, gamma) = sigma_gamma(d, t);
    f.entries()
        .iter()
        .filter(|e| e.weight > Rational::zero())
        .all(|e| !e.path.iter().any(|v| gamma.contains(v)) || e.path.iter().any(|v| sigma.contains(v)))
}

/// Dense Edmonds-Karp over exact rationals; `None` is an unbounded arc.
struct Dense {
    cap: Vec<Vec<Option<Rational>>>,
}

impl Dense {
    fn new(n: usize) -> Self {
        Dense {
            cap: vec![vec![Some(Rational::zero()); n]; n],
        }
    }

    fn add(&mut self, a: usize, b: usize, c: Option<Rational>) {
        self.cap[a][b] = match (&self.cap[a][b], c) {
            (Some(x), Some(c)) => Some(x.clone() + c),
            _ => None,
        };
    }

    fn positive(c: &Option<Rational>) -> bool {
        c.as_ref().is_none_or(|x| *x > Rational::zero())
    }

    fn max_flow(&mut self, s: usize, t: usize) -> Rational {
        let n = self.cap.len();
        let mut total = Rational::zero();
        loop {
            let mut prev = vec![usize::MAX; n];
            prev[s] = s;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for (v, c) in self.cap[u].iter().enumerate() {
                    if prev[v] == usize::MAX && Self::positive(c) {
                        prev[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if prev[t] == usize::MAX {
                return total;
            }
            let mut bottleneck: Option<Rational> = None;
            let mut v = t;
            while v != s {
                let u = prev[v];
                if let Some(c) = &self.cap[u][v] {
                    if bottleneck.as_ref().is_none_or(|b| c < b) {
                        bottleneck = Some(c.clone());
                    }
                }
                v = u;
            }
            let b = bottleneck.expect("a source-sink path with finite capacity");
            let mut v = t;
            while v != s {
                let u = prev[v];
                if let Some(c) = &mut self.cap[u][v] {
                    *c = c.clone() - b.clone();
                }
                if let Some(c) = &mut self.cap[v][u] {
                    *c = c.clone() + b.clone();
                }
                v = u;
            }
            total += b;
        }
    }
}

/// A flow delivering `x(z)/4r` from every `z ∈ γ(t)` to `σ(t)` fits in `G(t)`.
pub fn safe(inst: &Instance, d: &RootedDecomposition, f: &PathFlow<Rational>, t: usize, r: usize) -> bool {
    let (sigma, gamma) = sigma_gamma(d, t);
    let g = &inst.graph;
    let ids: Vec<Vertex> = gamma.iter().copied().filter(|&v| g.contains(v)).collect();
    let idx: BTreeMap<Vertex, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let m = ids.len();
    let ndp = inst.mode == Mode::Ndp;
    let (entry, exit) = if ndp { (0, m) } else { (0, 0) };
    let nodes = if ndp { 2 * m + 2 } else { m + 2 };
    let (src, snk) = (nodes - 2, nodes - 1);
    let mut net = Dense::new(nodes);
    for (i, &v) in ids.iter().enumerate() {
        if ndp {
            let c = g.node_cap(v).unwrap_or(1);
            net.add(entry + i, exit + i, Some(Rational::from_integer(c.into())));
        }
        for (w, c) in g.neighbors(v) {
            if let Some(&j) = idx.get(&w) {
                if sigma.contains(&v) && sigma.contains(&w) {
                    continue;
                }
                net.add(exit + i, entry + j, Some(Rational::from_integer(c.into())));
            }
        }
    }
    let x = marginals(f);
    let scale = Rational::from_integer((4 * r as u64).into());
    let mut required = Rational::zero();
    for (&v, &i) in &idx {
        if let Some(xv) = x.get(&v) {
            if *xv > Rational::zero() {
                let c = xv.clone() / scale.clone();
                required += c.clone();
                net.add(src, entry + i, Some(c));
            }
        }
        if sigma.contains(&v) {
            net.add(exit + i, snk, None);
        }
    }
    if required.is_zero() {
        return true;
    }
    net.max_flow(src, snk) >= required
}

/// `(ℓ₁, ℓ₂)`: largest adhesion over bad nodes, and over bad unsafe nodes.
pub fn levels(inst: &Instance, d: &RootedDecomposition, f: &PathFlow<Rational>, r: usize) -> (usize, usize) {
    let (mut l1, mut l2) = (0, 0);
    for t in 0..d.bags().len() {
        if good(d, f, t) {
            continue;
        }
        let s = sigma_gamma(d, t).0.len();
        l2 = l2.max(s);
        if s > l1 && !safe(inst, d, f, t, r) {
            l1 = s;
        }
    }
    (l1, l2)
}

/// `|f| (1 - 1/r)^l / (c r³)`.
pub fn bound(flow: &Rational, r: usize, l: usize, c: u64) -> Rational {
    let r = r as i64;
    let base = Rational::new((r - 1).into(), r.into());
    let mut decay = Rational::one();
    for _ in 0..l {
        decay *= base.clone();
    }
    flow.clone() * decay / Rational::from_integer((c as i64 * r * r * r).into())
}

pub fn flow_value(f: &PathFlow<Rational>) -> Rational {
    f.entries().iter().fold(Rational::zero(), |a, e| a + e.weight.clone())
}

/// Every path is simple and joins its pair along existing edges; edge loads
/// (edge-capacitated) or vertex loads (node-capacitated) fit the capacities.
pub fn routing_ok(inst: &Instance, routing: &Routing) -> bool {
    let g = &inst.graph;
    let mut edge_load: BTreeMap<(Vertex, Vertex), u64> = BTreeMap::new();
    let mut vertex_load: BTreeMap<Vertex, u64> = BTreeMap::new();
    for (&p, path) in &routing.paths {
        if p >= inst.pairs.0.len() {
            return false;
        }
        let (s, t) = inst.pairs.0[p];
        let ends = (path[0], *path.last().unwrap());
        if ends != (s, t) && ends != (t, s) {
            return false;
        }
        if path.iter().collect::<BTreeSet<_>>().len() != path.len() {
            return false;
        }
        for w in path.windows(2) {
            if g.edge_cap(w[0], w[1]).is_none() {
                return false;
            }
            *edge_load.entry((w[0].min(w[1]), w[0].max(w[1]))).or_default() += 1;
        }
        for &v in path {
            *vertex_load.entry(v).or_default() += 1;
        }
    }
    match inst.mode {
        Mode::Edp => edge_load.iter().all(|(&(u, v), &l)| l <= g.edge_cap(u, v).unwrap()),
        Mode::Ndp => vertex_load.iter().all(|(&v, &l)| l <= g.node_cap(v).unwrap_or(1)),
    }
}

/// Brute force over all subsets of pairs and all simple paths; tiny inputs only.
pub fn brute_force_opt(inst: &Instance) -> usize {
    let g = &inst.graph;
    let mut options: Vec<Vec<Vec<Vertex>>> = Vec::new();
    for &(s, t) in &inst.pairs.0 {
        let mut found = Vec::new();
        if s != t && g.contains(s) && g.contains(t) {
            let mut path = vec![s];
            simple_paths(g, t, &mut path, &mut found);
        }
        options.push(found);
    }
    fn go(inst: &Instance, options: &[Vec<Vec<Vertex>>], i: usize, chosen: &mut Routing) -> usize {
        if i == options.len() {
            return chosen.len();
        }
        let mut best = go(inst, options, i + 1, chosen);
        for p in &options[i] {
            chosen.paths.insert(i, p.clone());
            if routing_ok(inst, chosen) {
                best = best.max(go(inst, options, i + 1, chosen));
            }
            chosen.paths.remove(&i);
        }
        best
    }
    go(inst, &options, 0, &mut Routing::new())
}

fn simple_paths(g: &CapGraph, t: Vertex, path: &mut Vec<Vertex>, out: &mut Vec<Vec<Vertex>>) {
    let v = *path.last().unwrap();
    if v == t {
        out.push(path.clone());
        return;
    }
    let next: Vec<Vertex> = g.neighbors(v).map(|(w, _)| w).collect();
    for w in next {
        if !path.contains(&w) {
            path.push(w);
            simple_paths(g, t, path, out);
            path.pop();
        }
    }
}

/// A unit-capacity tail path glued to a band of width two and capacity
/// `cap`, with all pairs inside the band.
pub fn bottleneck(tail: usize, blob: usize, cap: u64, mode: Mode) -> (Instance, RootedDecomposition) {
    let n = tail + blob;
    let mut g = match mode {
        Mode::Ndp => CapGraph::with_node_caps(n, 1),
        Mode::Edp => CapGraph::new(n),
    };
    for i in 0..tail {
        g.add_edge(i, i + 1, 1).unwrap();
    }
    for i in tail..n {
        for j in i + 1..n.min(i + 3) {
            g.add_edge(i, j, cap).unwrap();
        }
        if mode == Mode::Ndp {
            g.set_node_cap(i, cap).unwrap();
        }
    }
    let pairs: Vec<(Vertex, Vertex)> = (0..blob / 2).map(|i| (tail + i, tail + blob / 2 + i)).collect();
    let inst = Instance::new(g, pairs, mode).unwrap();
    let mut bags: Vec<VertexSet> = (0..tail).map(|i| [i, i + 1].into_iter().collect()).collect();
    for i in tail..n - 2 {
        bags.push((i..i + 3).collect());
    }
    (inst, RootedDecomposition::path(bags).unwrap())
}
