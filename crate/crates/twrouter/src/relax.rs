//! The multicommodity flow relaxation in compact arc form.

use std::collections::BTreeMap;

use log::debug;

use crate::error::{Error, Result};
use crate::flow::PathFlow;
use crate::graph::{Instance, Mode, Vertex};
use crate::scalar::{qi, snap, Rational, Scalar};
use crate::simplex::{LinearProgram, RowKind};

/// Problems with at most this many variables are solved in exact arithmetic.
pub const DEFAULT_EXACT_LIMIT: usize = 2000;

/// Denominator used when snapping floating-point path weights.
pub const SNAP_DENOMINATOR: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution<T> {
    /// Per pair, the flow on each directed arc `(u, v)`.
    pub arc_flows: Vec<BTreeMap<(Vertex, Vertex), T>>,
    /// Per pair, the routed fraction `x_i`.
    pub x: Vec<T>,
    pub objective: T,
    pub pairs: Vec<(Vertex, Vertex)>,
}

struct Formulation<T> {
    lp: LinearProgram<T>,
    vars: Vec<(usize, Vertex, Vertex)>,
}

/// Number of arc variables the formulation of `inst` would use.
pub fn variable_count(inst: &Instance) -> usize {
    let comps = component_index(inst);
    let mut count = 0;
    for (_, (s, t)) in inst.pairs.iter() {
        if !inst.graph.contains(s) || !inst.graph.contains(t) || comps[s] != comps[t] {
            continue;
        }
        for (u, v, _) in inst.graph.edges() {
            if comps[u] != comps[s] {
                continue;
            }
            for (a, b) in [(u, v), (v, u)] {
                if b != s && a != t {
                    count += 1;
                }
            }
        }
    }
    count
}

fn component_index(inst: &Instance) -> Vec<usize> {
    let mut idx = vec![usize::MAX; inst.graph.id_bound()];
    for (c, comp) in inst.graph.components().into_iter().enumerate() {
        for v in comp {
            idx[v] = c;
        }
    }
    idx
}

fn formulate<T: Scalar>(inst: &Instance) -> Formulation<T> {
    let g = &inst.graph;
    let comps = component_index(inst);
    let mut vars: Vec<(usize, Vertex, Vertex)> = Vec::new();
    let mut by_pair: Vec<Vec<usize>> = vec![Vec::new(); inst.k()];
    for (i, (s, t)) in inst.pairs.iter() {
        if !g.contains(s) || !g.contains(t) || comps[s] != comps[t] {
            continue;
        }
        for (u, v, _) in g.edges() {
            if comps[u] != comps[s] {
                continue;
            }
            for (a, b) in [(u, v), (v, u)] {
                if b != s && a != t {
                    by_pair[i].push(vars.len());
                    vars.push((i, a, b));
                }
            }
        }
    }
    let mut lp = LinearProgram::new(vars.len());
    let one = T::one();
    for (i, (s, t)) in inst.pairs.iter() {
        if by_pair[i].is_empty() {
            continue;
        }
        let mut balance: BTreeMap<Vertex, Vec<(usize, T)>> = BTreeMap::new();
        let mut out_s = Vec::new();
        for &j in &by_pair[i] {
            let (_, a, b) = vars[j];
            balance.entry(b).or_default().push((j, one.clone()));
            balance.entry(a).or_default().push((j, -one.clone()));
            if a == s {
                out_s.push((j, one.clone()));
            }
        }
        for (v, coeffs) in balance {
            if v != s && v != t {
                lp.add_row(coeffs, RowKind::Eq, T::zero());
            }
        }
        lp.objective.extend(out_s.iter().cloned());
        lp.add_row(out_s, RowKind::Le, one.clone());
    }
    match inst.mode {
        Mode::Edp => {
            let mut per_edge: BTreeMap<(Vertex, Vertex), Vec<(usize, T)>> = BTreeMap::new();
            for (j, &(_, a, b)) in vars.iter().enumerate() {
                per_edge.entry((a.min(b), a.max(b))).or_default().push((j, one.clone()));
            }
            for ((u, v), coeffs) in per_edge {
                let cap = g.edge_cap(u, v).expect("edge");
                lp.add_row(coeffs, RowKind::Le, T::from_u64(cap).expect("fits"));
            }
        }
        Mode::Ndp => {
            let mut per_vertex: BTreeMap<Vertex, Vec<(usize, T)>> = BTreeMap::new();
            for (j, &(i, a, b)) in vars.iter().enumerate() {
                per_vertex.entry(b).or_default().push((j, one.clone()));
                if a == inst.pairs.get(i).0 {
                    per_vertex.entry(a).or_default().push((j, one.clone()));
                }
            }
            for (v, coeffs) in per_vertex {
                let cap = g.node_cap(v).unwrap_or(1);
                lp.add_row(coeffs, RowKind::Le, T::from_u64(cap).expect("fits"));
            }
        }
    }
    Formulation { lp, vars }
}

/// Solves the relaxation in scalar type `T`.
pub fn solve_relaxation<T: Scalar>(inst: &Instance) -> Result<LpSolution<T>> {
    let form = formulate::<T>(inst);
    let res = form.lp.solve()?;
    debug!(
        "relaxation: {} variables, {} rows, {} pivots, objective {}",
        form.vars.len(),
        form.lp.rows.len(),
        res.pivots,
        res.objective
    );
    let mut arc_flows = vec![BTreeMap::new(); inst.k()];
    for (j, &(i, a, b)) in form.vars.iter().enumerate() {
        if res.x[j].is_pos() {
            arc_flows[i].insert((a, b), res.x[j].clone());
        }
    }
    let mut x = vec![T::zero(); inst.k()];
    for (i, (s, _)) in inst.pairs.iter() {
        x[i] = arc_flows[i]
            .iter()
            .filter(|((a, _), _)| *a == s)
            .fold(T::zero(), |acc, (_, w)| acc + w.clone());
    }
    Ok(LpSolution {
        arc_flows,
        x,
        objective: res.objective,
        pairs: inst.pairs.0.clone(),
    })
}

/// Splits an arc flow from `s` to `t` into weighted paths.
///
/// Walks always take the positive arc with the smallest head; cycles met
/// on the walk are cancelled.
pub fn decompose_arc_flow<T: Scalar>(
    arcs: &BTreeMap<(Vertex, Vertex), T>,
    s: Vertex,
    t: Vertex,
) -> Vec<(Vec<Vertex>, T)> {
    let mut pos: BTreeMap<(Vertex, Vertex), T> = arcs
        .iter()
        .filter(|(_, w)| w.is_pos())
        .map(|(k, w)| (*k, w.clone()))
        .collect();
    let next = |pos: &BTreeMap<(Vertex, Vertex), T>, v: Vertex| -> Option<Vertex> {
        pos.range((v, 0)..=(v, usize::MAX))
            .find(|(_, w)| w.is_pos())
            .map(|((_, b), _)| *b)
    };
    let mut out = Vec::new();
    loop {
        let mut walk = vec![s];
        let mut at: BTreeMap<Vertex, usize> = BTreeMap::from([(s, 0)]);
        let mut finished = false;
        while *walk.last().expect("walk") != t {
            let v = *walk.last().expect("walk");
            let Some(w) = next(&pos, v) else {
                if walk.len() == 1 {
                    finished = true;
                    break;
                }
                let u = walk[walk.len() - 2];
                pos.remove(&(u, v));
                at.remove(&v);
                walk.pop();
                continue;
            };
            if let Some(&i) = at.get(&w) {
                let mut cyc: Vec<(Vertex, Vertex)> = walk[i..].windows(2).map(|p| (p[0], p[1])).collect();
                cyc.push((v, w));
                let m = cyc.iter().map(|k| pos[k].clone()).fold(pos[&(v, w)].clone(), T::min_of);
                for k in &cyc {
                    let nv = pos[k].clone() - m.clone();
                    pos.insert(*k, nv);
                }
                for x in walk.drain(i + 1..) {
                    at.remove(&x);
                }
            } else {
                at.insert(w, walk.len());
                walk.push(w);
            }
        }
        if finished {
            break;
        }
        let edges: Vec<(Vertex, Vertex)> = walk.windows(2).map(|p| (p[0], p[1])).collect();
        let m = edges.iter().map(|k| pos[k].clone()).fold(pos[&edges[0]].clone(), T::min_of);
        for k in &edges {
            let nv = pos[k].clone() - m.clone();
            pos.insert(*k, nv);
        }
        out.push((walk, m));
    }
    out
}

pub fn decompose_to_paths<T: Scalar>(sol: &LpSolution<T>) -> PathFlow<T> {
    let mut f = PathFlow::new();
    for (i, &(s, t)) in sol.pairs.iter().enumerate() {
        for (path, w) in decompose_arc_flow(&sol.arc_flows[i], s, t) {
            f.push(i, path, w);
        }
    }
    f
}

/// Relaxation optimum together with an exactly feasible rational path flow.
#[derive(Clone, Debug)]
pub struct Fractional {
    pub objective: f64,
    pub flow: PathFlow<Rational>,
    pub exact: bool,
    pub variables: usize,
}

/// Solves exactly up to `exact_limit` variables, otherwise in `f64` and
/// snaps the path weights to multiples of `1/SNAP_DENOMINATOR`, scaling the
/// result down until it is exactly feasible.
pub fn fractional_solution(inst: &Instance, exact_limit: usize) -> Result<Fractional> {
    let variables = variable_count(inst);
    if variables <= exact_limit {
        let sol = solve_relaxation::<Rational>(inst)?;
        let flow = decompose_to_paths(&sol);
        return Ok(Fractional {
            objective: sol.objective.approx(),
            flow,
            exact: true,
            variables,
        });
    }
    let sol = solve_relaxation::<f64>(inst)?;
    let approx = decompose_to_paths(&sol);
    let mut snapped = PathFlow::new();
    for e in approx.entries() {
        snapped.push(e.pair, e.path.clone(), snap(e.weight, SNAP_DENOMINATOR));
    }
    let flow = scale_into_capacity(inst, &snapped)?;
    Ok(Fractional {
        objective: sol.objective,
        flow,
        exact: false,
        variables,
    })
}

/// Scales `f` by the largest factor in `[0, 1]` that makes it feasible.
pub fn scale_into_capacity(inst: &Instance, f: &PathFlow<Rational>) -> Result<PathFlow<Rational>> {
    let one = Rational::from_ratio(1, 1);
    let mut factor = one.clone();
    let mut tighten = |load: &Rational, cap: u64| {
        if load.is_pos() {
            let r = qi(cap) / load.clone();
            if r < factor {
                factor = r;
            }
        }
    };
    match inst.mode {
        Mode::Edp => {
            for ((u, v), load) in f.edge_loads() {
                let cap = inst
                    .graph
                    .edge_cap(u, v)
                    .ok_or_else(|| Error::Numerical(format!("path uses missing edge {u}-{v}")))?;
                tighten(&load, cap);
            }
        }
        Mode::Ndp => {
            for (v, load) in f.vertex_loads() {
                tighten(&load, inst.graph.node_cap(v).unwrap_or(1));
            }
        }
    }
    for (_, x) in f.pair_values() {
        tighten(&x, 1);
    }
    let out = if factor < one { f.scale(&factor) } else { f.clone() };
    out.check_feasible(&inst.graph, inst.mode)
        .map_err(|v| Error::Numerical(format!("snapped flow infeasible: {v}")))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CapGraph;
    use crate::scalar::q;

    fn path_graph(n: usize) -> CapGraph {
        let mut g = CapGraph::new(n);
        for i in 0..n - 1 {
            g.add_edge(i, i + 1, 1).unwrap();
        }
        g
    }

    #[test]
    fn single_pair_on_path() {
        let inst = Instance::new(path_graph(4), vec![(0, 3)], Mode::Edp).unwrap();
        let sol = solve_relaxation::<Rational>(&inst).unwrap();
        assert_eq!(sol.objective, q(1, 1));
        let f = decompose_to_paths(&sol);
        assert_eq!(f.len(), 1);
        assert_eq!(f.entries()[0].path, vec![0, 1, 2, 3]);
    }

    #[test]
    fn parallel_routes_split() {
        let mut arcs = BTreeMap::new();
        for k in [(0, 1), (1, 3), (0, 2), (2, 3)] {
            arcs.insert(k, q(1, 2));
        }
        let paths = decompose_arc_flow(&arcs, 0, 3);
        assert_eq!(paths, vec![(vec![0, 1, 3], q(1, 2)), (vec![0, 2, 3], q(1, 2))]);
    }

    #[test]
    fn cycle_is_cancelled() {
        let mut arcs = BTreeMap::new();
        arcs.insert((0, 1), q(1, 1));
        arcs.insert((1, 2), q(3, 2));
        arcs.insert((2, 1), q(1, 2));
        arcs.insert((2, 3), q(1, 1));
        let paths = decompose_arc_flow(&arcs, 0, 3);
        assert_eq!(paths, vec![(vec![0, 1, 2, 3], q(1, 1))]);
    }

    #[test]
    fn ndp_star() {
        let mut g = CapGraph::with_node_caps(5, 1);
        for leaf in 1..5 {
            g.add_edge(0, leaf, 1).unwrap();
        }
        let inst = Instance::new(g.clone(), vec![(1, 2), (3, 4)], Mode::Ndp).unwrap();
        assert_eq!(solve_relaxation::<Rational>(&inst).unwrap().objective, q(1, 1));
        g.set_node_cap(0, 2).unwrap();
        let inst = Instance::new(g, vec![(1, 2), (3, 4)], Mode::Ndp).unwrap();
        assert_eq!(solve_relaxation::<Rational>(&inst).unwrap().objective, q(2, 1));
    }

    #[test]
    fn float_path_is_snapped_and_feasible() {
        let inst = Instance::new(path_graph(3), vec![(0, 2), (0, 1)], Mode::Edp).unwrap();
        let fr = fractional_solution(&inst, 0).unwrap();
        assert!(!fr.exact);
        assert!((fr.objective - 1.0).abs() < 1e-9);
        assert!(fr.flow.is_feasible(&inst.graph, Mode::Edp));
    }
}
