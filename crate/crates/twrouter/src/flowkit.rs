//! Good and safe nodes, prefix truncation and violating-set extraction.

use std::collections::BTreeMap;

use crate::decomp::RootedDecomposition;
use crate::error::{Error, Result};
use crate::flow::PathFlow;
use crate::graph::{Instance, Mode, Vertex, VertexSet};
use crate::maxflow::{edge_network, node_capacitated_reduce, node_in, node_out, FlowNetwork};
use crate::scalar::Scalar;

/// True iff no support path of `f` lies entirely inside `G[α(t)]`.
pub fn is_good<T: Scalar>(t: usize, f: &PathFlow<T>, d: &RootedDecomposition) -> bool {
    let alpha = d.alpha(t);
    !f.entries().iter().any(|e| e.is_inside(&alpha))
}

/// Cuts every path at its first vertex in `stop`, keeping the part from the source.
pub fn truncate_at<T: Scalar>(g: &PathFlow<T>, stop: &VertexSet) -> PathFlow<T> {
    let mut out = PathFlow::new();
    for e in g.entries() {
        let end = e.path.iter().position(|v| stop.contains(v)).unwrap_or(e.path.len() - 1);
        out.push(e.pair, e.path[..=end].to_vec(), e.weight.clone());
    }
    out
}

/// For every path end `z ∈ γ(t)`, the shortest prefix from `z` ending in `σ(t)`.
pub fn prefix_truncate<T: Scalar>(f: &PathFlow<T>, t: usize, d: &RootedDecomposition) -> Result<PathFlow<T>> {
    prefix_truncate_to(f, d.gamma(t), d.sigma(t))
}

/// Prefix truncation towards an arbitrary stop set, for ends in `from`.
pub fn prefix_truncate_to<T: Scalar>(f: &PathFlow<T>, from: &VertexSet, stop: &VertexSet) -> Result<PathFlow<T>> {
    let mut out = PathFlow::new();
    for e in f.entries() {
        let fwd: Vec<Vertex> = e.path.clone();
        let mut back = e.path.clone();
        back.reverse();
        for p in [fwd, back] {
            if !from.contains(&p[0]) {
                continue;
            }
            let Some(i) = p.iter().position(|v| stop.contains(v)) else {
                return Err(Error::Contract(format!(
                    "flow path {:?} of pair {} avoids the adhesion",
                    e.path, e.pair
                )));
            };
            out.push(e.pair, p[..=i].to_vec(), e.weight.clone());
        }
    }
    Ok(out)
}

/// The auxiliary single-commodity network of a node.
struct Aux<T> {
    net: FlowNetwork<T>,
    source: usize,
    sink: usize,
    required: T,
    mode: Mode,
}

fn aux_network<T: Scalar>(
    inst: &Instance,
    d: &RootedDecomposition,
    t: usize,
    x: &BTreeMap<Vertex, T>,
    r: usize,
) -> Aux<T> {
    let gt = d.cone_graph(&inst.graph, t);
    let scale = T::from_u64(4 * r as u64).expect("r fits");
    type Port = fn(Vertex) -> usize;
    let (mut net, entry, exit): (FlowNetwork<T>, Port, Port) = match inst.mode {
        Mode::Edp => (edge_network(&gt, 2), |v| v, |v| v),
        Mode::Ndp => (node_capacitated_reduce(&gt, 2).0, node_in, node_out),
    };
    let base = net.num_nodes() - 2;
    let (source, sink) = (base, base + 1);
    let mut required = T::zero();
    for &z in d.gamma(t) {
        if !gt.contains(z) {
            continue;
        }
        if let Some(xz) = x.get(&z) {
            if xz.is_pos() {
                let c = xz.clone() / scale.clone();
                required = required + c.clone();
                net.add_arc(source, entry(z), c);
            }
        }
    }
    for &a in d.sigma(t) {
        if gt.contains(a) {
            net.add_infinite_arc(exit(a), sink);
        }
    }
    Aux {
        net,
        source,
        sink,
        required,
        mode: inst.mode,
    }
}

fn endpoint_pairs<T: Scalar>(f: &PathFlow<T>) -> BTreeMap<Vertex, usize> {
    let mut m = BTreeMap::new();
    for e in f.entries() {
        m.entry(e.source()).or_insert(e.pair);
        m.entry(e.sink()).or_insert(e.pair);
    }
    m
}

fn witness_from<T: Scalar>(aux: &Aux<T>, owners: &BTreeMap<Vertex, usize>) -> PathFlow<T> {
    let mut g = PathFlow::new();
    for (nodes, w) in aux.net.decompose(aux.source, aux.sink) {
        let inner = &nodes[1..nodes.len() - 1];
        let mut path: Vec<Vertex> = Vec::with_capacity(inner.len());
        for &n in inner {
            let v = match aux.mode {
                Mode::Edp => n,
                Mode::Ndp => n / 2,
            };
            if path.last() != Some(&v) {
                path.push(v);
            }
        }
        let pair = owners.get(&path[0]).copied().unwrap_or(usize::MAX);
        g.push(pair, path, w);
    }
    g
}

#[derive(Clone, Debug)]
pub enum Safety<T> {
    /// Witness flow delivering `x(z)/4r` from every `z ∈ γ(t)` to `σ(t)` inside `G(t)`.
    Safe(PathFlow<T>),
    /// Maximum flow value and the amount that was required.
    Unsafe { achieved: T, required: T },
}

impl<T> Safety<T> {
    pub fn is_safe(&self) -> bool {
        matches!(self, Safety::Safe(_))
    }
}

pub fn is_safe<T: Scalar>(
    inst: &Instance,
    d: &RootedDecomposition,
    t: usize,
    f: &PathFlow<T>,
    r: usize,
) -> Safety<T> {
    let x = f.marginals();
    let scale = T::from_u64(4 * r as u64).expect("r fits");
    if is_good(t, f, d) {
        let g = prefix_truncate(f, t, d).expect("good node truncates");
        return Safety::Safe(g.scale(&(T::one() / scale)));
    }
    let mut aux = aux_network(inst, d, t, &x, r);
    if !aux.required.is_pos() {
        return Safety::Safe(PathFlow::new());
    }
    let achieved = aux.net.max_flow(aux.source, aux.sink);
    if achieved.ge_tol(&aux.required) {
        Safety::Safe(witness_from(&aux, &endpoint_pairs(f)))
    } else {
        Safety::Unsafe {
            achieved,
            required: aux.required,
        }
    }
}

/// Flow-only variant of [`is_safe`] without building a witness.
pub fn is_safe_bool<T: Scalar>(inst: &Instance, d: &RootedDecomposition, t: usize, f: &PathFlow<T>, r: usize) -> bool {
    if is_good(t, f, d) {
        return true;
    }
    let x = f.marginals();
    let mut aux = aux_network(inst, d, t, &x, r);
    if !aux.required.is_pos() {
        return true;
    }
    aux.net.max_flow(aux.source, aux.sink).ge_tol(&aux.required)
}

/// Set `U` cut off by a minimum cut at an unsafe node.
#[derive(Clone, Debug, PartialEq)]
pub struct ViolatingSet<T> {
    pub node: usize,
    pub u: VertexSet,
    /// Node-capacitated mode: the vertices whose capacity arc is cut.
    pub boundary: VertexSet,
    /// `cap(δ(U))` or `cap(N(U))`.
    pub cut_capacity: T,
    /// The marginal mass that the cut capacity is compared against, already divided by `4r`.
    pub threshold: T,
}

pub fn extract_violating_set<T: Scalar>(
    inst: &Instance,
    d: &RootedDecomposition,
    t: usize,
    f: &PathFlow<T>,
    r: usize,
) -> Result<ViolatingSet<T>> {
    let x = f.marginals();
    let mut aux = aux_network(inst, d, t, &x, r);
    let achieved = aux.net.max_flow(aux.source, aux.sink);
    if achieved.ge_tol(&aux.required) {
        return Err(Error::Contract(format!("node {} is safe", d.label(t))));
    }
    let cut = aux.net.cut(aux.source);
    let g = &inst.graph;
    let (u, boundary) = match inst.mode {
        Mode::Edp => (
            g.vertices().filter(|&v| v < cut.side.len() && cut.side[v]).collect::<VertexSet>(),
            VertexSet::new(),
        ),
        Mode::Ndp => {
            let u = g
                .vertices()
                .filter(|&v| cut.side[node_in(v)] && cut.side[node_out(v)])
                .collect::<VertexSet>();
            let n = g
                .vertices()
                .filter(|&v| cut.side[node_in(v)] && !cut.side[node_out(v)])
                .collect::<VertexSet>();
            (u, n)
        }
    };
    let vs = measure(inst, r, &x, t, u, boundary);
    verify_violating_set(inst, d, &vs)?;
    Ok(vs)
}

fn measure<T: Scalar>(
    inst: &Instance,
    r: usize,
    x: &BTreeMap<Vertex, T>,
    node: usize,
    u: VertexSet,
    boundary: VertexSet,
) -> ViolatingSet<T> {
    let scale = T::from_u64(4 * r as u64).expect("r fits");
    let mass = |s: &VertexSet| {
        s.iter()
            .filter_map(|v| x.get(v))
            .fold(T::zero(), |a, w| a + w.clone())
    };
    let (cut_capacity, threshold) = match inst.mode {
        Mode::Edp => (
            T::from_u64(inst.graph.boundary_cap(&u)).expect("fits"),
            mass(&u) / scale,
        ),
        Mode::Ndp => {
            let closed: VertexSet = u.union(&boundary).copied().collect();
            (
                T::from_u64(inst.graph.node_cap_sum(&boundary)).expect("fits"),
                mass(&closed) / scale,
            )
        }
    };
    ViolatingSet {
        node,
        u,
        boundary,
        cut_capacity,
        threshold,
    }
}

/// Re-checks both properties of a violating set by direct scan.
pub fn verify_violating_set<T: Scalar>(inst: &Instance, d: &RootedDecomposition, vs: &ViolatingSet<T>) -> Result<()> {
    let t = vs.node;
    if vs.u.is_empty() {
        return Err(Error::Contract("violating set is empty".into()));
    }
    let alpha = d.alpha(t);
    if !vs.u.is_subset(&alpha) {
        return Err(Error::Contract("violating set leaves the cone".into()));
    }
    if inst.mode == Mode::Ndp && inst.graph.neighborhood(&vs.u) != vs.boundary {
        return Err(Error::Contract("node cut differs from the neighbourhood of U".into()));
    }
    if vs.cut_capacity >= vs.threshold {
        return Err(Error::Contract(format!(
            "cut capacity {} is not below {}",
            vs.cut_capacity, vs.threshold
        )));
    }
    if inst.graph.is_connected() {
        for s in d.nodes() {
            if d.parent(s).is_none() || d.sigma(s).is_empty() {
                continue;
            }
            if d.sigma(s).is_subset(&vs.u) && !d.gamma(s).is_subset(&vs.u) {
                return Err(Error::Contract(format!(
                    "adhesion of node {} inside U but its cone is not",
                    d.label(s)
                )));
            }
        }
    }
    Ok(())
}

/// `ℓ₁` and `ℓ₂` of a flow.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Levels {
    pub l1: usize,
    pub l2: usize,
}

pub fn levels<T: Scalar>(inst: &Instance, d: &RootedDecomposition, f: &PathFlow<T>, r: usize) -> Levels {
    let mut bad: Vec<usize> = d.nodes().filter(|&t| !is_good(t, f, d)).collect();
    let l2 = bad.iter().map(|&t| d.sigma(t).len()).max().unwrap_or(0);
    bad.sort_by_key(|&t| std::cmp::Reverse(d.sigma(t).len()));
    let l1 = bad
        .iter()
        .find(|&&t| !is_safe_bool(inst, d, t, f, r))
        .map(|&t| d.sigma(t).len())
        .unwrap_or(0);
    Levels { l1, l2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CapGraph;
    use crate::scalar::{q, Rational};

    fn set(v: &[Vertex]) -> VertexSet {
        v.iter().copied().collect()
    }

    fn path_instance() -> (Instance, RootedDecomposition) {
        let mut g = CapGraph::new(4);
        for i in 0..3 {
            g.add_edge(i, i + 1, 1).unwrap();
        }
        let inst = Instance::new(g, vec![(0, 3)], Mode::Edp).unwrap();
        let d = RootedDecomposition::path(vec![set(&[0, 1]), set(&[1, 2]), set(&[2, 3])]).unwrap();
        (inst, d)
    }

    #[test]
    fn root_is_bad_and_unsafe() {
        let (inst, d) = path_instance();
        let mut f = PathFlow::new();
        f.push(0, vec![0, 1, 2, 3], q(1, 1));
        assert!(!is_good(0, &f, &d));
        assert!(!is_safe(&inst, &d, 0, &f, 2).is_safe());
        assert!(is_good(1, &f, &d));
        let empty: PathFlow<Rational> = PathFlow::new();
        assert!(d.nodes().all(|t| is_good(t, &empty, &d)));
    }

    #[test]
    fn good_node_witness_is_truncation() {
        let (inst, d) = path_instance();
        let mut f = PathFlow::new();
        f.push(0, vec![0, 1, 2, 3], q(1, 1));
        let Safety::Safe(g) = is_safe(&inst, &d, 2, &f, 2) else {
            panic!("good node must be safe");
        };
        assert_eq!(g.entries()[0].path, vec![3, 2]);
        assert_eq!(g.value(), q(1, 8));
    }

    #[test]
    fn truncation_cases() {
        let (_, d) = path_instance();
        let mut f = PathFlow::new();
        f.push(0, vec![1, 0], q(1, 1));
        let g = prefix_truncate(&f, 1, &d).unwrap();
        assert_eq!(g.entries()[0].path, vec![1]);
        let empty: PathFlow<Rational> = PathFlow::new();
        assert!(prefix_truncate(&empty, 1, &d).unwrap().is_empty());
        let mut avoid = PathFlow::new();
        avoid.push(0, vec![2, 3], q(1, 1));
        assert!(prefix_truncate(&avoid, 1, &d).is_err());
    }

    #[test]
    fn isolated_vertex_is_unsafe() {
        let mut g = CapGraph::new(3);
        g.add_edge(0, 1, 1).unwrap();
        let inst = Instance::new(g, vec![], Mode::Edp).unwrap();
        let d = RootedDecomposition::path(vec![set(&[0, 1]), set(&[1, 2])]).unwrap();
        let mut f = PathFlow::new();
        f.push(0, vec![2], q(1, 1));
        assert!(!is_safe(&inst, &d, 1, &f, 2).is_safe());
        let vs = extract_violating_set(&inst, &d, 1, &f, 2).unwrap();
        assert_eq!(vs.u, set(&[2]));
        assert_eq!(vs.cut_capacity, q(0, 1));
    }
}
