//! Integral routings and their feasibility audit.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::PathFlow;
use crate::graph::{Instance, Mode, Normalized, Vertex};
use crate::scalar::Rational;

/// One simple path per routed pair.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Routing {
    pub paths: BTreeMap<usize, Vec<Vertex>>,
}

/// Recomputed loads of an audited routing.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Certificate {
    pub edge_loads: BTreeMap<(Vertex, Vertex), u64>,
    pub vertex_loads: BTreeMap<Vertex, u64>,
}

impl Routing {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn insert(&mut self, pair: usize, path: Vec<Vertex>) {
        self.paths.insert(pair, path);
    }

    pub fn pairs(&self) -> BTreeSet<usize> {
        self.paths.keys().copied().collect()
    }

    /// Union of routings over disjoint pair sets.
    pub fn merge(&mut self, other: Routing) -> Result<()> {
        for (p, path) in other.paths {
            if self.paths.insert(p, path).is_some() {
                return Err(Error::Infeasible(format!("pair {p} routed twice")));
            }
        }
        Ok(())
    }

    /// Independent check: simple paths along existing edges joining each
    /// pair's terminals, loads within capacities.
    pub fn audit(&self, inst: &Instance) -> Result<Certificate> {
        let g = &inst.graph;
        let mut cert = Certificate::default();
        for (&p, path) in &self.paths {
            if p >= inst.k() {
                return Err(Error::Infeasible(format!("unknown pair {p}")));
            }
            let (s, t) = inst.pairs.get(p);
            let (a, b) = match (path.first(), path.last()) {
                (Some(&a), Some(&b)) => (a, b),
                _ => return Err(Error::Infeasible(format!("pair {p} has an empty path"))),
            };
            if !((a == s && b == t) || (a == t && b == s)) {
                return Err(Error::Infeasible(format!("path of pair {p} joins {a} and {b}, not {s} and {t}")));
            }
            let distinct: BTreeSet<Vertex> = path.iter().copied().collect();
            if distinct.len() != path.len() {
                return Err(Error::Infeasible(format!("path of pair {p} repeats a vertex")));
            }
            for &v in path {
                if !g.contains(v) {
                    return Err(Error::Infeasible(format!("path of pair {p} uses missing vertex {v}")));
                }
                *cert.vertex_loads.entry(v).or_insert(0) += 1;
            }
            for w in path.windows(2) {
                if g.edge_cap(w[0], w[1]).is_none() {
                    return Err(Error::Infeasible(format!("path of pair {p} uses missing edge {}-{}", w[0], w[1])));
                }
                let key = (w[0].min(w[1]), w[0].max(w[1]));
                *cert.edge_loads.entry(key).or_insert(0) += 1;
            }
        }
        match inst.mode {
            Mode::Edp => {
                for (&(u, v), &load) in &cert.edge_loads {
                    let cap = g.edge_cap(u, v).unwrap_or(0);
                    if load > cap {
                        return Err(Error::Infeasible(format!("edge {u}-{v} carries {load} > {cap}")));
                    }
                }
            }
            Mode::Ndp => {
                for (&v, &load) in &cert.vertex_loads {
                    let cap = g.node_cap(v).unwrap_or(1);
                    if load > cap {
                        return Err(Error::Infeasible(format!("vertex {v} carries {load} > {cap}")));
                    }
                }
            }
        }
        Ok(cert)
    }

    /// Adds pairs from `candidates` (in order) along shortest paths of the
    /// residual graph; never removes a routed pair. Returns the number added.
    pub fn augment_greedily(&mut self, inst: &Instance, candidates: &[usize]) -> usize {
        let g = &inst.graph;
        let mut edge_load: BTreeMap<(Vertex, Vertex), u64> = BTreeMap::new();
        let mut vertex_load: BTreeMap<Vertex, u64> = BTreeMap::new();
        let charge = |path: &[Vertex], el: &mut BTreeMap<(Vertex, Vertex), u64>, vl: &mut BTreeMap<Vertex, u64>| {
            for &v in path {
                *vl.entry(v).or_insert(0) += 1;
            }
            for w in path.windows(2) {
                *el.entry((w[0].min(w[1]), w[0].max(w[1]))).or_insert(0) += 1;
            }
        };
        for path in self.paths.values() {
            charge(path, &mut edge_load, &mut vertex_load);
        }
        let mut added = 0;
        for &p in candidates {
            if self.paths.contains_key(&p) || p >= inst.k() {
                continue;
            }
            let (s, t) = inst.pairs.get(p);
            if !g.contains(s) || !g.contains(t) {
                continue;
            }
            let vertex_ok = |v: Vertex| match inst.mode {
                Mode::Edp => true,
                Mode::Ndp => vertex_load.get(&v).copied().unwrap_or(0) < g.node_cap(v).unwrap_or(1),
            };
            if !vertex_ok(s) || !vertex_ok(t) {
                continue;
            }
            let mut prev: BTreeMap<Vertex, Vertex> = BTreeMap::new();
            let mut queue = std::collections::VecDeque::from([s]);
            let mut seen: BTreeSet<Vertex> = BTreeSet::from([s]);
            while let Some(v) = queue.pop_front() {
                if v == t {
                    break;
                }
                for (w, cap) in g.neighbors(v) {
                    if seen.contains(&w) || !vertex_ok(w) {
                        continue;
                    }
                    if inst.mode == Mode::Edp && edge_load.get(&(v.min(w), v.max(w))).copied().unwrap_or(0) >= cap {
                        continue;
                    }
                    seen.insert(w);
                    prev.insert(w, v);
                    queue.push_back(w);
                }
            }
            if !seen.contains(&t) {
                continue;
            }
            let mut path = vec![t];
            while let Some(&v) = prev.get(path.last().expect("nonempty")) {
                path.push(v);
            }
            path.reverse();
            charge(&path, &mut edge_load, &mut vertex_load);
            self.paths.insert(p, path);
            added += 1;
        }
        added
    }

    pub fn to_flow(&self) -> PathFlow<Rational> {
        let mut f = PathFlow::new();
        for (&p, path) in &self.paths {
            f.push(p, path.clone(), Rational::from_integer(1.into()));
        }
        f
    }

    /// Maps a routing of a normalized instance back to the original vertices.
    pub fn denormalize(&self, norm: &Normalized) -> Routing {
        let mut out = Routing::new();
        for (&p, path) in &self.paths {
            let mapped: Vec<Vertex> = path.iter().map(|&v| norm.origin[v]).collect();
            out.insert(p, crate::flow::shortcut(&mapped));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_terminals, CapGraph};

    fn path3() -> Instance {
        let mut g = CapGraph::new(3);
        g.add_edge(0, 1, 1).unwrap();
        g.add_edge(1, 2, 1).unwrap();
        Instance::new(g, vec![(0, 2), (0, 1)], Mode::Edp).unwrap()
    }

    #[test]
    fn audit_catches_overload() {
        let inst = path3();
        let mut r = Routing::new();
        r.insert(0, vec![0, 1, 2]);
        assert!(r.audit(&inst).is_ok());
        r.insert(1, vec![0, 1]);
        assert!(r.audit(&inst).is_err());
    }

    #[test]
    fn audit_rejects_wrong_ends_and_gaps() {
        let inst = path3();
        let mut r = Routing::new();
        r.insert(0, vec![0, 2]);
        assert!(r.audit(&inst).is_err());
        let mut r = Routing::new();
        r.insert(1, vec![1, 0]);
        assert!(r.audit(&inst).is_ok());
    }

    #[test]
    fn greedy_augmentation_respects_capacity() {
        let inst = path3();
        let mut r = Routing::new();
        assert_eq!(r.augment_greedily(&inst, &[0, 1]), 1);
        assert_eq!(r.paths[&0], vec![0, 1, 2]);
        r.audit(&inst).unwrap();
        let mut g = CapGraph::with_node_caps(5, 1);
        g.set_node_cap(0, 2).unwrap();
        for v in 1..5 {
            g.add_edge(0, v, 1).unwrap();
        }
        let star = Instance::new(g, vec![(1, 2), (3, 4)], Mode::Ndp).unwrap();
        let mut r = Routing::new();
        assert_eq!(r.augment_greedily(&star, &[0, 1]), 2);
        r.audit(&star).unwrap();
    }

    #[test]
    fn denormalize_drops_leaves() {
        let inst = path3();
        let norm = normalize_terminals(&inst);
        let leaf = norm.leaves[0].0;
        let mut r = Routing::new();
        r.insert(1, vec![leaf, 0, 1]);
        r.audit(&norm.instance).unwrap();
        let back = r.denormalize(&norm);
        assert_eq!(back.paths[&1], vec![0, 1]);
        back.audit(&inst).unwrap();
    }
}
