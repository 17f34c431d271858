//! Seeded instance generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomp::RootedDecomposition;
use crate::graph::{CapGraph, Instance, Mode, Vertex, VertexSet};

/// Staircase gap instance with `k` pairs.
///
/// Pair `j` has a canonical path `s_j, (a_ij, b_ij)_{i<j}, c_j, (a_jl, b_jl)_{l>j}, t_j`;
/// the edge `a_ij b_ij` is shared by the canonical paths of pairs `i` and
/// `j`. The graph is planar with maximum degree three and all terminals are
/// leaves on the outer face in the order `s_1..s_k t_1..t_k`, so any two
/// pairs cross. Half a unit on every canonical path is feasible.
pub fn gen_grid_gap(k: usize) -> Instance {
    let paths = grid_gap_paths(k);
    let k = paths.len();
    let mut g = CapGraph::new(3 * k + k * (k - 1));
    for walk in &paths {
        for w in walk.windows(2) {
            if g.edge_cap(w[0], w[1]).is_none() {
                g.add_edge(w[0], w[1], 1).expect("distinct vertices");
            }
        }
    }
    let pairs = paths.iter().map(|p| (p[0], p[p.len() - 1])).collect();
    Instance::new(g, pairs, Mode::Edp).expect("valid grid instance")
}

/// Canonical half-unit paths of [`gen_grid_gap`].
pub fn grid_gap_paths(k: usize) -> Vec<Vec<Vertex>> {
    let k = k.max(1);
    let mut crossing = vec![vec![(0, 0); k]; k];
    let mut next = 3 * k;
    for (i, row) in crossing.iter_mut().enumerate() {
        for cell in row.iter_mut().skip(i + 1) {
            *cell = (next, next + 1);
            next += 2;
        }
    }
    (0..k)
        .map(|j| {
            let mut walk = vec![j];
            for row in crossing.iter().take(j) {
                walk.extend([row[j].0, row[j].1]);
            }
            walk.push(2 * k + j);
            for &(a, b) in &crossing[j][j + 1..] {
                walk.extend([a, b]);
            }
            walk.push(k + j);
            walk
        })
        .collect()
}

fn random_matching(rng: &mut ChaCha8Rng, vertices: &[Vertex], k: usize) -> Vec<(Vertex, Vertex)> {
    let mut vs = vertices.to_vec();
    vs.shuffle(rng);
    vs.chunks_exact(2).take(k).map(|c| (c[0], c[1])).collect()
}

/// Random partial `r`-tree with its natural decomposition (bags of size at most `r + 1`).
///
/// Vertices are inserted one at a time, each joined to an `r`-subset of a
/// random existing bag. Every edge except those of a spanning tree of the
/// construction is then kept with probability `keep`.
pub fn gen_partial_ktree(
    n: usize,
    r: usize,
    k_pairs: usize,
    seed: u64,
) -> (Instance, RootedDecomposition) {
    gen_partial_ktree_with(n, r, k_pairs, seed, 0.7, 3)
}

pub fn gen_partial_ktree_with(
    n: usize,
    r: usize,
    k_pairs: usize,
    seed: u64,
    keep: f64,
    max_cap: u64,
) -> (Instance, RootedDecomposition) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n.max(1);
    let r = r.max(1);
    let first = n.min(r + 1);
    let mut bags: Vec<VertexSet> = vec![(0..first).collect()];
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut edges: Vec<(Vertex, Vertex, bool)> = Vec::new();
    for u in 0..first {
        for v in u + 1..first {
            edges.push((u, v, v == u + 1));
        }
    }
    for v in first..n {
        let b = rng.gen_range(0..bags.len());
        let mut members: Vec<Vertex> = bags[b].iter().copied().collect();
        members.shuffle(&mut rng);
        members.truncate(r);
        members.sort_unstable();
        let anchor = members[rng.gen_range(0..members.len())];
        for &u in &members {
            edges.push((u, v, u == anchor));
        }
        let mut bag: VertexSet = members.into_iter().collect();
        bag.insert(v);
        bags.push(bag);
        parent.push(Some(b));
    }
    let mut g = CapGraph::new(n);
    for (u, v, spanning) in edges {
        if spanning || rng.gen_bool(keep) {
            g.add_edge(u, v, rng.gen_range(1..=max_cap.max(1))).expect("simple edge");
        }
    }
    let vertices: Vec<Vertex> = (0..n).collect();
    let pairs = random_matching(&mut rng, &vertices, k_pairs);
    let inst = Instance::new(g, pairs, Mode::Edp).expect("valid instance");
    let d = RootedDecomposition::new(bags, parent).expect("construction tree");
    debug_assert!(d.validate(&inst.graph).is_ok());
    (inst, d)
}

/// Random band graph with a path decomposition of width `w`, node-capacitated.
///
/// Vertex `i` may be adjacent to `j` only when `|i - j| <= w`; consecutive
/// vertices are always adjacent. Bags are the windows `{i, .., i + w}`.
pub fn gen_band_ndp(n: usize, w: usize, k_pairs: usize, seed: u64, max_cap: u64) -> (Instance, RootedDecomposition) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n.max(2);
    let w = w.clamp(1, n - 1);
    let mut g = CapGraph::with_node_caps(n, 1);
    for v in 0..n {
        g.set_node_cap(v, rng.gen_range(1..=max_cap.max(1))).expect("vertex");
    }
    for i in 0..n {
        for j in i + 1..n.min(i + w + 1) {
            if j == i + 1 || rng.gen_bool(0.5) {
                g.add_edge(i, j, 1).expect("simple edge");
            }
        }
    }
    let bags: Vec<VertexSet> = (0..n - w).map(|i| (i..=i + w).collect()).collect();
    let d = RootedDecomposition::path(bags).expect("path");
    let vertices: Vec<Vertex> = (0..n).collect();
    let pairs = random_matching(&mut rng, &vertices, k_pairs);
    let inst = Instance::new(g, pairs, Mode::Ndp).expect("valid instance");
    debug_assert!(d.validate(&inst.graph).is_ok());
    (inst, d)
}

/// Caterpillar: a spine path with `legs` pendant vertices per spine vertex,
/// node-capacitated, with the natural width-1 path decomposition.
pub fn gen_caterpillar_ndp(spine: usize, legs: usize, k_pairs: usize, seed: u64) -> (Instance, RootedDecomposition) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spine = spine.max(1);
    let n = spine * (legs + 1);
    let mut g = CapGraph::with_node_caps(n, 1);
    for i in 0..spine {
        g.set_node_cap(i, rng.gen_range(1..=2)).expect("vertex");
    }
    for i in 0..spine.saturating_sub(1) {
        g.add_edge(i, i + 1, 1).expect("spine edge");
    }
    let mut bags: Vec<VertexSet> = Vec::new();
    for i in 0..spine {
        for l in 0..legs {
            let leaf = spine + i * legs + l;
            g.add_edge(i, leaf, 1).expect("leg");
            bags.push([i, leaf].into_iter().collect());
        }
        if i + 1 < spine {
            bags.push([i, i + 1].into_iter().collect());
        } else if legs == 0 {
            bags.push([i].into_iter().collect());
        }
    }
    let leaves: Vec<Vertex> = (spine..n).collect();
    let pool = if leaves.len() >= 2 { leaves } else { (0..n).collect() };
    let pairs = random_matching(&mut rng, &pool, k_pairs);
    let inst = Instance::new(g, pairs, Mode::Ndp).expect("valid instance");
    let d = RootedDecomposition::path(bags).expect("path");
    debug_assert!(d.validate(&inst.graph).is_ok());
    (inst, d)
}
