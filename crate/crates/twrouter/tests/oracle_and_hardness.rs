mod common;

use proptest::prelude::*;
use twrouter::gen::gen_grid_gap;
use twrouter::graph::{CapGraph, Instance, Mode};
use twrouter::hardness::{
    build_gadget, clique_to_routing, random_mcc, recursive_depth, treedepth_witness, triangle_pattern,
    verify_equivalence, GadgetOutput, MccInstance, Role,
};
use twrouter::oracle::{exact_max_routing, OracleConfig};
use twrouter::Error;

fn tiny(n: usize, edges: &[(usize, usize, u64)], pairs: &[(usize, usize)], ndp: bool) -> Option<Instance> {
    let mut g = if ndp { CapGraph::with_node_caps(n, 1) } else { CapGraph::new(n) };
    for &(u, v, c) in edges {
        let (u, v) = (u % n, v % n);
        if u != v && g.edge_cap(u, v).is_none() {
            g.add_edge(u, v, c).ok()?;
        }
    }
    if ndp {
        for (i, v) in (0..n).enumerate() {
            g.set_node_cap(v, 1 + (i % 2) as u64).ok()?;
        }
    }
    let pairs: Vec<(usize, usize)> = pairs.iter().map(|&(s, t)| (s % n, t % n)).filter(|&(s, t)| s != t).collect();
    Instance::new(g, pairs, if ndp { Mode::Ndp } else { Mode::Edp }).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_matches_brute_force(
        n in 3usize..7,
        edges in prop::collection::vec((0usize..7, 0usize..7, 1u64..3), 2..12),
        pairs in prop::collection::vec((0usize..7, 0usize..7), 1..4),
        ndp: bool,
    ) {
        let Some(inst) = tiny(n, &edges, &pairs, ndp) else { return Ok(()); };
        let res = exact_max_routing(&inst, &OracleConfig::default()).unwrap();
        prop_assert!(common::routing_ok(&inst, &res.routing));
        prop_assert_eq!(res.opt, common::brute_force_opt(&inst));
    }
}

#[test]
fn grid_gap_has_integral_optimum_one() {
    for k in 1..=4 {
        let inst = gen_grid_gap(k);
        assert_eq!(exact_max_routing(&inst, &OracleConfig::default()).unwrap().opt, 1);
    }
    assert_eq!(common::brute_force_opt(&gen_grid_gap(2)), 1);
}

#[test]
fn oracle_guards() {
    let inst = gen_grid_gap(4);
    let cfg = OracleConfig {
        max_pairs: 3,
        ..OracleConfig::default()
    };
    assert!(matches!(exact_max_routing(&inst, &cfg), Err(Error::GuardExceeded(_))));
    let cfg = OracleConfig {
        node_budget: 2,
        ..OracleConfig::default()
    };
    assert!(matches!(exact_max_routing(&inst, &cfg), Err(Error::GuardExceeded(_))));
}

fn role_counts(out: &GadgetOutput) -> (usize, usize, usize, usize) {
    let mut c = (0, 0, 0, 0);
    for r in &out.roles {
        match r {
            Role::X { .. } => c.0 += 1,
            Role::S { .. } => c.1 += 1,
            Role::T { .. } => c.2 += 1,
            Role::Hub { .. } => c.3 += 1,
        }
    }
    c
}

#[test]
fn triangle_gadget_sizes() {
    let out = build_gadget(&triangle_pattern(7)).unwrap();
    assert_eq!(out.instance.graph.num_vertices(), 21);
    assert_eq!(out.ell, 6);
    assert_eq!(role_counts(&out), (12, 3, 3, 3));
    assert_eq!(out.cut_set.len(), 3);
    let g = &out.instance.graph;
    let rest: twrouter::graph::VertexSet = g.vertices().filter(|v| !out.cut_set.contains(v)).collect();
    assert_eq!(g.induced_subgraph(&rest).unwrap().components().len(), 3);
}

#[test]
fn triangle_patterns_are_equivalent() {
    for mask in 0..8u8 {
        let mcc = triangle_pattern(mask);
        let eq = verify_equivalence(&mcc, 40, 8).unwrap();
        assert!(eq.holds(), "mask {mask}");
        assert_eq!(eq.routes_ell, mask == 7);
        let out = build_gadget(&mcc).unwrap();
        match &eq.clique {
            Some(c) => {
                let routing = clique_to_routing(&out, &mcc, c).unwrap();
                assert_eq!(routing.len(), out.ell);
                assert!(common::routing_ok(&out.instance, &routing));
            }
            None => assert!(clique_to_routing(&out, &mcc, &[0, 2, 4]).is_err()),
        }
        let (depth, forest) = treedepth_witness(&out, 3).unwrap();
        assert!(depth <= 9);
        assert!(forest.covers(&out.instance.graph));
        assert!(recursive_depth(&out.instance.graph, &forest).unwrap() <= depth);
    }
}

#[test]
fn random_instances_are_equivalent() {
    for seed in 0..6 {
        let mcc = random_mcc(3, 2, seed, 0.6).unwrap();
        assert!(verify_equivalence(&mcc, 40, 8).unwrap().holds(), "seed {seed}");
    }
}

#[test]
fn closed_forms() {
    for (k, n) in [(2, 2), (3, 2), (3, 3), (4, 2)] {
        let classes: Vec<Vec<usize>> = (0..k).map(|i| (i * n..(i + 1) * n).collect()).collect();
        let out = build_gadget(&MccInstance::new(k * n, classes, vec![]).unwrap()).unwrap();
        assert_eq!(out.instance.graph.num_vertices(), k * (n * (k - 1) + 2 * (n - 1)) + k * (k - 1) / 2);
        assert_eq!(out.ell, k * (n - 1) + k * (k - 1) / 2);
        let (depth, _) = treedepth_witness(&out, k).unwrap();
        assert!(depth <= k * (k - 1) / 2 + k + 3);
    }
}
