//! Rooted tree and path decompositions.
//!
//! Nodes are stored densely; `label` keeps the id a node had in its source
//! (a `.td` file or the decomposition it was derived from) and is what tie
//! rules refer to.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::flow::PathFlow;
use crate::graph::{CapGraph, Instance, Vertex, VertexSet};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootedDecomposition {
    bags: Vec<VertexSet>,
    parent: Vec<Option<usize>>,
    labels: Vec<usize>,
    is_path: bool,
    root: usize,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    sigma: Vec<VertexSet>,
    gamma: Vec<VertexSet>,
}

impl RootedDecomposition {
    /// Builds a decomposition from bags and a parent array.
    ///
    /// The parent array must describe a single rooted tree. `is_path` is
    /// derived: it holds when no node has two children.
    pub fn new(bags: Vec<VertexSet>, parent: Vec<Option<usize>>) -> Result<Self> {
        let labels = (1..=bags.len()).collect();
        Self::with_labels(bags, parent, labels)
    }

    pub fn with_labels(
        bags: Vec<VertexSet>,
        parent: Vec<Option<usize>>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let n = bags.len();
        if n == 0 {
            return Err(Error::BadDecomposition("no nodes".into()));
        }
        if parent.len() != n || labels.len() != n {
            return Err(Error::BadDecomposition("length mismatch".into()));
        }
        let roots: Vec<usize> = (0..n).filter(|&t| parent[t].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::BadDecomposition(format!("{} roots", roots.len())));
        }
        let root = roots[0];
        let mut children = vec![Vec::new(); n];
        for (t, &pt) in parent.iter().enumerate() {
            if let Some(p) = pt {
                if p >= n || p == t {
                    return Err(Error::BadDecomposition(format!("bad parent of node {t}")));
                }
                children[p].push(t);
            }
        }
        for c in children.iter_mut() {
            c.sort_by_key(|&t| labels[t]);
        }
        let mut depth = vec![usize::MAX; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        depth[root] = 0;
        while let Some(t) = queue.pop_front() {
            order.push(t);
            for &c in &children[t] {
                depth[c] = depth[t] + 1;
                queue.push_back(c);
            }
        }
        if order.len() != n {
            return Err(Error::BadDecomposition("parent relation has a cycle".into()));
        }
        let sigma: Vec<VertexSet> = (0..n)
            .map(|t| match parent[t] {
                Some(p) => bags[t].intersection(&bags[p]).copied().collect(),
                None => VertexSet::new(),
            })
            .collect();
        let mut gamma: Vec<VertexSet> = bags.clone();
        for &t in order.iter().rev() {
            if let Some(p) = parent[t] {
                let g = gamma[t].clone();
                gamma[p].extend(g);
            }
        }
        let is_path = children.iter().all(|c| c.len() <= 1);
        Ok(RootedDecomposition {
            bags,
            parent,
            labels,
            is_path,
            root,
            children,
            depth,
            sigma,
            gamma,
        })
    }

    /// A path decomposition whose bags are given in order from the root.
    pub fn path(bags: Vec<VertexSet>) -> Result<Self> {
        let parent = (0..bags.len()).map(|i| i.checked_sub(1)).collect();
        Self::new(bags, parent)
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn nodes(&self) -> std::ops::Range<usize> {
        0..self.bags.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn is_path(&self) -> bool {
        self.is_path
    }

    pub fn bag(&self, t: usize) -> &VertexSet {
        &self.bags[t]
    }

    pub fn bags(&self) -> &[VertexSet] {
        &self.bags
    }

    pub fn parent(&self, t: usize) -> Option<usize> {
        self.parent[t]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn children(&self, t: usize) -> &[usize] {
        &self.children[t]
    }

    pub fn label(&self, t: usize) -> usize {
        self.labels[t]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn depth(&self, t: usize) -> usize {
        self.depth[t]
    }

    /// Parent adhesion `σ(t)`; empty at the root.
    pub fn sigma(&self, t: usize) -> &VertexSet {
        &self.sigma[t]
    }

    /// Cone `γ(t)`: union of the bags in the subtree of `t`.
    pub fn gamma(&self, t: usize) -> &VertexSet {
        &self.gamma[t]
    }

    /// `α(t) = γ(t) \ σ(t)`.
    pub fn alpha(&self, t: usize) -> VertexSet {
        self.gamma[t].difference(&self.sigma[t]).copied().collect()
    }

    /// `G(t)`.
    pub fn cone_graph(&self, g: &CapGraph, t: usize) -> CapGraph {
        let gamma: VertexSet = self.gamma[t].iter().copied().filter(|&v| g.contains(v)).collect();
        g.cone_graph(&gamma, &self.sigma[t])
    }

    /// True iff `s` lies in the subtree of `t` (inclusive).
    pub fn is_descendant(&self, s: usize, t: usize) -> bool {
        let mut c = Some(s);
        while let Some(x) = c {
            if x == t {
                return true;
            }
            c = self.parent[x];
        }
        false
    }

    pub fn max_bag_size(&self) -> usize {
        self.bags.iter().map(|b| b.len()).max().unwrap_or(0)
    }

    pub fn width(&self) -> usize {
        self.max_bag_size().saturating_sub(1)
    }

    /// Nodes in root-first DFS order, children by label.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(t) = stack.pop() {
            out.push(t);
            for &c in self.children[t].iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    /// Checks both decomposition properties against `g` and returns the width.
    pub fn validate(&self, g: &CapGraph) -> Result<usize> {
        let mut occ: BTreeMap<Vertex, Vec<usize>> = BTreeMap::new();
        for t in self.nodes() {
            for &v in &self.bags[t] {
                if !g.contains(v) {
                    return Err(Error::BadDecomposition(format!(
                        "bag of node {} holds vertex {v} outside the graph",
                        self.labels[t]
                    )));
                }
                occ.entry(v).or_default().push(t);
            }
        }
        for v in g.vertices() {
            let Some(nodes) = occ.get(&v) else {
                return Err(Error::MissingVertex(v));
            };
            // Occurrence set is connected iff exactly one of its nodes has
            // a parent outside the set.
            let tops = nodes
                .iter()
                .filter(|&&t| match self.parent[t] {
                    Some(p) => !self.bags[p].contains(&v),
                    None => true,
                })
                .count();
            if tops != 1 {
                return Err(Error::DisconnectedOccurrence(v));
            }
        }
        for (u, v, _) in g.edges() {
            let covered = occ[&u].iter().any(|&t| self.bags[t].contains(&v));
            if !covered {
                return Err(Error::UncoveredEdge(u, v));
            }
        }
        Ok(self.width())
    }

    /// Like [`validate`](Self::validate), additionally requiring bags of at most `r` vertices.
    pub fn validate_width(&self, g: &CapGraph, r: usize) -> Result<usize> {
        let w = self.validate(g)?;
        if let Some(t) = self.nodes().find(|&t| self.bags[t].len() > r) {
            return Err(Error::WidthExceeded {
                node: self.labels[t],
                size: self.bags[t].len(),
                bound: r,
            });
        }
        Ok(w)
    }

    /// Torso of `t`: `G[β(t)]` plus a clique on every incident adhesion.
    pub fn torso(&self, g: &CapGraph, t: usize) -> CapGraph {
        let mut h = g.induced_subgraph(&self.bags[t]).expect("bag within graph");
        let mut adhesions = vec![self.sigma[t].clone()];
        for &c in &self.children[t] {
            adhesions.push(self.sigma[c].clone());
        }
        for a in adhesions {
            let vs: Vec<Vertex> = a.into_iter().collect();
            for i in 0..vs.len() {
                for j in i + 1..vs.len() {
                    if h.edge_cap(vs[i], vs[j]).is_none() {
                        h.add_edge(vs[i], vs[j], 1).expect("bag vertices");
                    }
                }
            }
        }
        h
    }

    /// Intersects every bag with `keep`, then removes empty bags.
    ///
    /// Children of a removed node are re-attached to the nearest kept
    /// ancestor. If several subtrees lose their common ancestor, the later
    /// tops hang below the first one; their adhesion is empty.
    pub fn restrict(&self, keep: &VertexSet) -> RootedDecomposition {
        let bags: Vec<VertexSet> = self
            .bags
            .iter()
            .map(|b| b.intersection(keep).copied().collect())
            .collect();
        let kept: Vec<usize> = self.preorder().into_iter().filter(|&t| !bags[t].is_empty()).collect();
        if kept.is_empty() {
            return RootedDecomposition::with_labels(
                vec![VertexSet::new()],
                vec![None],
                vec![self.labels[self.root]],
            )
            .expect("single node");
        }
        let index: BTreeMap<usize, usize> = kept.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        let mut parent = Vec::with_capacity(kept.len());
        for &t in &kept {
            let mut p = self.parent[t];
            while let Some(x) = p {
                if index.contains_key(&x) {
                    break;
                }
                p = self.parent[x];
            }
            parent.push(p.map(|x| index[&x]));
        }
        // kept is in preorder, so the first top is the topmost nonempty node.
        for slot in parent.iter_mut().skip(1) {
            if slot.is_none() {
                *slot = Some(0);
            }
        }
        RootedDecomposition::with_labels(
            kept.iter().map(|&t| bags[t].clone()).collect(),
            parent,
            kept.iter().map(|&t| self.labels[t]).collect(),
        )
        .expect("restriction of a tree is a tree")
    }

    /// Covers a new degree-one vertex `leaf` adjacent to `host`.
    ///
    /// Trees get a child bag `{host, leaf}` below the deepest node holding
    /// `host`. Paths get a copy of that node's bag plus `leaf` spliced in
    /// right below it, which may grow the width by one.
    pub fn attach_leaf(&self, leaf: Vertex, host: Vertex) -> Result<RootedDecomposition> {
        let at = self
            .preorder()
            .into_iter()
            .filter(|&t| self.bags[t].contains(&host))
            .max_by_key(|&t| (self.depth[t], std::cmp::Reverse(self.labels[t])))
            .ok_or(Error::MissingVertex(host))?;
        let mut bags = self.bags.clone();
        let mut parent = self.parent.clone();
        let mut labels = self.labels.clone();
        let new = bags.len();
        if self.is_path {
            let mut bag = self.bags[at].clone();
            bag.insert(leaf);
            bags.push(bag);
            for c in &self.children[at] {
                parent[*c] = Some(new);
            }
        } else {
            bags.push([leaf, host].into_iter().collect());
        }
        parent.push(Some(at));
        labels.push(self.labels.iter().max().copied().unwrap_or(0) + 1);
        RootedDecomposition::with_labels(bags, parent, labels)
    }

    /// Rebuilds node labels as `1..=len` in preorder.
    pub fn relabeled(&self) -> RootedDecomposition {
        let order = self.preorder();
        let index: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        RootedDecomposition::new(
            order.iter().map(|&t| self.bags[t].clone()).collect(),
            order.iter().map(|&t| self.parent[t].map(|p| index[&p])).collect(),
        )
        .expect("relabeling preserves the tree")
    }
}

/// One connected piece produced by [`preprocess`].
#[derive(Clone, Debug)]
pub struct Piece<T: Scalar> {
    pub instance: Instance,
    pub decomposition: RootedDecomposition,
    pub flow: PathFlow<T>,
}

/// Splits into connected components, drops empty bags and restricts the flow.
pub fn preprocess<T: Scalar>(
    instance: &Instance,
    d: &RootedDecomposition,
    f: &PathFlow<T>,
) -> Vec<Piece<T>> {
    let mut out = Vec::new();
    for comp in instance.graph.components() {
        let graph = instance.graph.induced_subgraph(&comp).expect("component");
        let decomposition = d.restrict(&comp);
        let flow = f.restrict_to_vertices(&comp);
        out.push(Piece {
            instance: instance.with_graph(graph),
            decomposition,
            flow,
        });
    }
    out
}

fn fill_in(adj: &[BTreeSet<Vertex>], v: Vertex, alive: &[bool]) -> usize {
    let nb: Vec<Vertex> = adj[v].iter().copied().filter(|&w| alive[w]).collect();
    let mut missing = 0;
    for i in 0..nb.len() {
        for j in i + 1..nb.len() {
            if !adj[nb[i]].contains(&nb[j]) {
                missing += 1;
            }
        }
    }
    missing
}

/// Min-fill elimination order; ties go to the smallest vertex id.
pub fn min_fill_order(g: &CapGraph) -> Vec<Vertex> {
    let n = g.id_bound();
    let mut adj: Vec<BTreeSet<Vertex>> = (0..n)
        .map(|v| {
            if g.contains(v) {
                g.neighbors(v).map(|(w, _)| w).collect()
            } else {
                BTreeSet::new()
            }
        })
        .collect();
    let mut alive: Vec<bool> = (0..n).map(|v| g.contains(v)).collect();
    let mut order = Vec::with_capacity(g.num_vertices());
    for _ in 0..g.num_vertices() {
        let v = g
            .vertices()
            .filter(|&v| alive[v])
            .min_by_key(|&v| (fill_in(&adj, v, &alive), v))
            .expect("vertices remain");
        let nb: Vec<Vertex> = adj[v].iter().copied().filter(|&w| alive[w]).collect();
        for i in 0..nb.len() {
            for j in i + 1..nb.len() {
                adj[nb[i]].insert(nb[j]);
                adj[nb[j]].insert(nb[i]);
            }
        }
        alive[v] = false;
        order.push(v);
    }
    order
}

fn tree_from_order(g: &CapGraph, order: &[Vertex]) -> RootedDecomposition {
    let n = g.id_bound();
    if order.is_empty() {
        return RootedDecomposition::new(vec![VertexSet::new()], vec![None]).expect("single node");
    }
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut adj: Vec<BTreeSet<Vertex>> = (0..n)
        .map(|v| {
            if g.contains(v) {
                g.neighbors(v).map(|(w, _)| w).collect()
            } else {
                BTreeSet::new()
            }
        })
        .collect();
    let mut bags = Vec::with_capacity(order.len());
    for &v in order {
        let later: Vec<Vertex> = adj[v].iter().copied().filter(|&w| pos[w] > pos[v]).collect();
        for i in 0..later.len() {
            for j in i + 1..later.len() {
                adj[later[i]].insert(later[j]);
                adj[later[j]].insert(later[i]);
            }
        }
        let mut bag: VertexSet = later.iter().copied().collect();
        bag.insert(v);
        bags.push(bag);
    }
    // Bag i hangs below the bag of its earliest later neighbour; bags
    // without one are component roots and hang below the last bag.
    let last = order.len() - 1;
    let parent: Vec<Option<usize>> = (0..order.len())
        .map(|i| {
            if i == last {
                return None;
            }
            let up = bags[i]
                .iter()
                .filter(|&&w| w != order[i])
                .map(|&w| pos[w])
                .min();
            Some(up.unwrap_or(last))
        })
        .collect();
    // Root the tree at the last eliminated vertex; reverse so that labels
    // grow away from the root.
    let rev: Vec<usize> = (0..order.len()).rev().collect();
    let index: Vec<usize> = {
        let mut idx = vec![0; order.len()];
        for (new, &old) in rev.iter().enumerate() {
            idx[old] = new;
        }
        idx
    };
    RootedDecomposition::new(
        rev.iter().map(|&i| bags[i].clone()).collect(),
        rev.iter().map(|&i| parent[i].map(|p| index[p])).collect(),
    )
    .expect("elimination tree")
}

fn path_from_order(g: &CapGraph, order: &[Vertex]) -> RootedDecomposition {
    let n = g.id_bound();
    if order.is_empty() {
        return RootedDecomposition::path(vec![VertexSet::new()]).expect("single node");
    }
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let last_nb: Vec<usize> = (0..n)
        .map(|v| {
            if !g.contains(v) {
                return 0;
            }
            g.neighbors(v).map(|(w, _)| pos[w]).max().unwrap_or(0).max(pos[v])
        })
        .collect();
    let mut bags = Vec::with_capacity(order.len());
    for (i, &v) in order.iter().enumerate() {
        let mut bag: VertexSet = order[..i].iter().copied().filter(|&u| last_nb[u] >= i).collect();
        bag.insert(v);
        bags.push(bag);
    }
    RootedDecomposition::path(bags).expect("path")
}

fn bfs_order(g: &CapGraph, start: Vertex) -> Vec<Vertex> {
    let mut seen = vec![false; g.id_bound()];
    let mut out = Vec::with_capacity(g.num_vertices());
    let starts = std::iter::once(start).chain(g.vertices());
    for s in starts {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            out.push(v);
            for (w, _) in g.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    out
}

/// Heuristic decomposition: min-fill for trees, best vertex-separation
/// ordering (BFS orders and the reversed min-fill order) for paths.
pub fn heuristic_decomposition(g: &CapGraph, want_path: bool) -> RootedDecomposition {
    let mf = min_fill_order(g);
    let d = if want_path {
        let mut rev = mf.clone();
        rev.reverse();
        let mut best = path_from_order(g, &rev);
        for s in g.vertices() {
            let cand = path_from_order(g, &bfs_order(g, s));
            if cand.max_bag_size() < best.max_bag_size() {
                best = cand;
            }
        }
        best
    } else {
        tree_from_order(g, &mf)
    };
    debug_assert!(d.validate(g).is_ok());
    d.validate(g).expect("heuristic decomposition is valid");
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[Vertex]) -> VertexSet {
        v.iter().copied().collect()
    }

    fn path3() -> CapGraph {
        let mut g = CapGraph::new(3);
        g.add_edge(0, 1, 1).unwrap();
        g.add_edge(1, 2, 1).unwrap();
        g
    }

    fn cycle(n: usize) -> CapGraph {
        let mut g = CapGraph::new(n);
        for i in 0..n {
            g.add_edge(i, (i + 1) % n, 1).unwrap();
        }
        g
    }

    #[test]
    fn validate_examples() {
        let g = path3();
        let d = RootedDecomposition::path(vec![set(&[0, 1]), set(&[1, 2])]).unwrap();
        assert_eq!(d.validate(&g), Ok(1));
        let bad = RootedDecomposition::path(vec![set(&[0, 1]), set(&[2])]).unwrap();
        assert_eq!(bad.validate(&g), Err(Error::UncoveredEdge(1, 2)));
        let mut k3 = path3();
        k3.add_edge(0, 2, 1).unwrap();
        let one = RootedDecomposition::path(vec![set(&[0, 1, 2])]).unwrap();
        assert_eq!(one.validate(&k3), Ok(2));
    }

    #[test]
    fn disconnected_occurrence_is_reported() {
        let g = path3();
        let d = RootedDecomposition::path(vec![set(&[0, 1]), set(&[1, 2]), set(&[0])]).unwrap();
        assert_eq!(d.validate(&g), Err(Error::DisconnectedOccurrence(0)));
    }

    #[test]
    fn adhesion_maps() {
        let d = RootedDecomposition::path(vec![set(&[0, 1]), set(&[1, 2])]).unwrap();
        assert_eq!(d.sigma(1), &set(&[1]));
        assert_eq!(d.gamma(1), &set(&[1, 2]));
        assert_eq!(d.alpha(1), set(&[2]));
        assert!(d.sigma(0).is_empty());
        assert_eq!(d.gamma(0), &set(&[0, 1, 2]));
        assert_eq!(d.alpha(0), set(&[0, 1, 2]));
        let dup = RootedDecomposition::path(vec![set(&[0, 1]), set(&[0, 1])]).unwrap();
        assert!(dup.alpha(1).is_empty());
    }

    #[test]
    fn torso_completes_adhesions() {
        let mut g = CapGraph::new(3);
        g.add_edge(0, 2, 1).unwrap();
        g.add_edge(1, 2, 1).unwrap();
        let d = RootedDecomposition::path(vec![set(&[0, 1, 2]), set(&[0, 1])]).unwrap();
        let t = d.torso(&g, 0);
        assert_eq!(t.edge_cap(0, 1), Some(1));
        let leaf = RootedDecomposition::path(vec![set(&[0, 2]), set(&[2, 1])]).unwrap();
        let t = leaf.torso(&g, 1);
        assert_eq!(t.num_edges(), 1);
    }

    #[test]
    fn restrict_drops_empty_bags_and_reroots() {
        let d = RootedDecomposition::path(vec![set(&[5]), set(&[0, 1]), set(&[9]), set(&[1, 2])]).unwrap();
        let r = d.restrict(&set(&[0, 1, 2]));
        assert_eq!(r.len(), 2);
        assert_eq!(r.bag(r.root()), &set(&[0, 1]));
        assert_eq!(r.label(r.root()), 2);
        assert_eq!(r.sigma(1), &set(&[1]));
    }

    #[test]
    fn heuristic_widths() {
        let mut tree = CapGraph::new(6);
        for (u, v) in [(0, 1), (0, 2), (2, 3), (2, 4), (4, 5)] {
            tree.add_edge(u, v, 1).unwrap();
        }
        assert_eq!(heuristic_decomposition(&tree, false).width(), 1);
        assert_eq!(heuristic_decomposition(&cycle(4), false).width(), 2);
        assert_eq!(heuristic_decomposition(&CapGraph::new(1), false).width(), 0);
        let p = heuristic_decomposition(&cycle(5), true);
        assert!(p.is_path());
        assert_eq!(p.width(), 2);
    }

    #[test]
    fn separation_property_on_cycle() {
        let g = cycle(6);
        let d = heuristic_decomposition(&g, false);
        let all = g.vertex_set();
        for t in d.nodes() {
            let rest: VertexSet = all.difference(&d.alpha(t)).copied().collect();
            assert!(g.is_separation(d.gamma(t), &rest));
        }
    }
}
