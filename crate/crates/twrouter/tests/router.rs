mod common;

use proptest::prelude::*;
use twrouter::decomp::RootedDecomposition;
use twrouter::gen::{gen_band_ndp, gen_caterpillar_ndp, gen_grid_gap, gen_partial_ktree};
use twrouter::graph::{CapGraph, Instance, Mode};
use twrouter::oracle::{exact_max_routing, OracleConfig};
use twrouter::router::{prepare, route_flow, solve, split_at_unsafe, RouterConfig, EDP_CONSTANT};
use twrouter::{Error, Rational};

fn core_only() -> RouterConfig {
    RouterConfig {
        augment: false,
        ..RouterConfig::default()
    }
}

#[test]
fn bottleneck_takes_the_equal_split() {
    let (inst, d) = common::bottleneck(5, 14, 8, Mode::Edp);
    let (routing, rep) = solve(&inst, &d, &core_only()).unwrap();
    assert_eq!(rep.lp_objective, 7.0);
    assert_eq!((rep.r, rep.l1, rep.l2), (3, 1, 1));
    let s = &rep.stats;
    assert_eq!((s.calls, s.base_cases, s.unequal_steps, s.equal_steps), (3, 1, 0, 1));
    assert_eq!(routing.len(), 1);
    assert!(rep.bound_holds());
    assert_eq!(rep.bound, common::bound(&rep.flow, 3, 2, EDP_CONSTANT));

    let (full, rep) = solve(&inst, &d, &RouterConfig::default()).unwrap();
    let opt = exact_max_routing(&inst, &OracleConfig::default()).unwrap().opt;
    assert_eq!((rep.routed_core, full.len(), opt), (1, 7, 7));
}

#[test]
fn split_loses_little_flow() {
    let (inst, d) = common::bottleneck(5, 14, 8, Mode::Edp);
    let p = prepare(&inst, &d, None, usize::MAX).unwrap();
    let (inst, d, f) = (&p.norm.instance, &p.decomposition, &p.fractional.flow);
    let split = split_at_unsafe(inst, d, f, p.r, 1).unwrap();
    let (inner, outer) = (&split.inner, &split.outer);
    assert!(inner.0.graph.vertex_set().is_disjoint(&outer.0.graph.vertex_set()));
    let kept = common::flow_value(&inner.2) + common::flow_value(&outer.2);
    assert_eq!(kept + split.lost.clone(), common::flow_value(f));
    assert!(split.lost <= common::flow_value(&inner.2) / Rational::from_integer((p.r as i64).into()));
    assert!(split_at_unsafe(inst, d, f, p.r, 2).is_err());
}

#[test]
fn star_routes_both_pairs() {
    let mut g = CapGraph::with_node_caps(5, 1);
    g.set_node_cap(0, 2).unwrap();
    for v in 1..5 {
        g.add_edge(0, v, 1).unwrap();
    }
    let inst = Instance::new(g, vec![(1, 2), (3, 4)], Mode::Ndp).unwrap();
    let bags = (1..5).map(|v| [0, v].into_iter().collect()).collect();
    let d = RootedDecomposition::path(bags).unwrap();
    let (routing, rep) = solve(&inst, &d, &RouterConfig::default()).unwrap();
    assert_eq!(routing.len(), 2);
    assert!(common::routing_ok(&inst, &routing));
    assert!(rep.bound_holds());
}

#[test]
fn grid_gap_routes_one_pair() {
    for k in 2..=4 {
        let inst = gen_grid_gap(k);
        let d = twrouter::decomp::heuristic_decomposition(&inst.graph, false);
        let (routing, _) = solve(&inst, &d, &RouterConfig::default()).unwrap();
        assert_eq!(routing.len(), 1);
    }
}

#[test]
fn route_flow_rejects_bad_inputs() {
    let (inst, d) = gen_partial_ktree(10, 2, 3, 1);
    let p = prepare(&inst, &d, None, usize::MAX).unwrap();
    let (ni, nd, f) = (&p.norm.instance, &p.decomposition, &p.fractional.flow);
    assert!(matches!(route_flow(ni, nd, f, 2), Err(Error::WidthExceeded { .. })));
    let heavy = f.scale(&Rational::from_integer(100.into()));
    assert!(!heavy.is_feasible(&ni.graph, Mode::Edp));
    assert!(route_flow(ni, nd, &heavy, p.r).is_err());
    let (routing, stats) = route_flow(ni, nd, f, p.r).unwrap();
    assert!(common::routing_ok(ni, &routing));
    assert!(stats.calls >= 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn edp_bound_and_audit(seed in 0u64..10_000, n in 6usize..24, w in 1usize..4, k in 1usize..6) {
        let (inst, d) = gen_partial_ktree(n, w, k, seed);
        let (routing, rep) = solve(&inst, &d, &core_only()).unwrap();
        prop_assert!(common::routing_ok(&inst, &routing));
        prop_assert_eq!(routing.len(), rep.routed_core);
        let p = prepare(&inst, &d, None, usize::MAX).unwrap();
        let (l1, l2) = common::levels(&p.norm.instance, &p.decomposition, &p.fractional.flow, p.r);
        let bound = common::bound(&common::flow_value(&p.fractional.flow), p.r, l1 + l2, EDP_CONSTANT);
        prop_assert!(Rational::from_integer((routing.len() as i64).into()) >= bound);
    }

    #[test]
    fn ndp_bound_and_audit(seed in 0u64..10_000, n in 6usize..24, w in 1usize..4, k in 1usize..6, caterpillar: bool) {
        let (inst, d) = if caterpillar {
            gen_caterpillar_ndp(n / 2, 1 + seed as usize % 3, k, seed)
        } else {
            gen_band_ndp(n, w, k, seed, 3)
        };
        let (routing, rep) = solve(&inst, &d, &RouterConfig::default()).unwrap();
        prop_assert!(common::routing_ok(&inst, &routing));
        prop_assert!(rep.routed_core <= routing.len());
        prop_assert!(rep.bound_holds());
        prop_assert_eq!(rep.impl_bound, common::bound(&rep.flow, rep.r, rep.l1 + rep.l2, rep.c_impl));
    }
}
