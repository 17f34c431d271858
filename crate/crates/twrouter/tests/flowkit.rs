mod common;

use proptest::prelude::*;
use twrouter::decomp::RootedDecomposition;
use twrouter::flowkit::{extract_violating_set, is_good, is_safe, is_safe_bool, levels, prefix_truncate};
use twrouter::gen::{gen_band_ndp, gen_partial_ktree};
use twrouter::graph::{Instance, Mode};
use twrouter::router::{input_levels, prepare};
use twrouter::ExactFlow;

fn prepared(seed: u64, ndp: bool) -> (Instance, RootedDecomposition, ExactFlow, usize) {
    let (inst, d) = if ndp {
        gen_band_ndp(8 + seed as usize % 10, 1 + seed as usize % 3, 4, seed, 2)
    } else {
        gen_partial_ktree(8 + seed as usize % 12, 1 + seed as usize % 3, 4, seed)
    };
    let p = prepare(&inst, &d, None, usize::MAX).unwrap();
    (p.norm.instance, p.decomposition, p.fractional.flow, p.r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn good_and_safe_match_the_definitions(seed in 0u64..1000, ndp: bool) {
        let (inst, d, f, r) = prepared(seed, ndp);
        for t in d.nodes() {
            prop_assert_eq!(is_good(t, &f, &d), common::good(&d, &f, t));
            let safe = common::safe(&inst, &d, &f, t, r);
            prop_assert_eq!(is_safe_bool(&inst, &d, t, &f, r), safe);
            prop_assert_eq!(is_safe(&inst, &d, t, &f, r).is_safe(), safe);
        }
        let lv = levels(&inst, &d, &f, r);
        prop_assert_eq!((lv.l1, lv.l2), common::levels(&inst, &d, &f, r));
        prop_assert!(lv.l1 <= lv.l2);
        let lv = input_levels(&inst, &d, &f, r);
        prop_assert_eq!((lv.l1, lv.l2), common::levels(&inst, &d, &f, r));
    }

    #[test]
    fn deleting_paths_keeps_good_and_safe(seed in 0u64..1000, ndp: bool, mask in any::<u64>()) {
        let (inst, d, f, r) = prepared(seed, ndp);
        let sub = ExactFlow::from_entries(
            f.entries().iter().enumerate().filter(|(i, _)| mask >> (i % 64) & 1 == 1).map(|(_, e)| e.clone()).collect(),
        );
        for t in d.nodes() {
            if is_good(t, &f, &d) {
                prop_assert!(is_good(t, &sub, &d));
            }
            if is_safe_bool(&inst, &d, t, &f, r) {
                prop_assert!(is_safe_bool(&inst, &d, t, &sub, r));
            }
        }
    }

    #[test]
    fn safe_witness_is_feasible_in_the_cone(seed in 0u64..1000, ndp: bool) {
        let (inst, d, f, r) = prepared(seed, ndp);
        for t in d.nodes() {
            if let twrouter::flowkit::Safety::Safe(w) = is_safe(&inst, &d, t, &f, r) {
                let (sigma, _) = common::sigma_gamma(&d, t);
                prop_assert!(w.is_feasible(&d.cone_graph(&inst.graph, t), inst.mode));
                for e in w.entries() {
                    prop_assert!(sigma.contains(e.path.last().unwrap()));
                }
            }
        }
    }

    #[test]
    fn good_nodes_truncate(seed in 0u64..1000) {
        let (_, d, f, _) = prepared(seed, false);
        for t in d.nodes().filter(|&t| is_good(t, &f, &d)) {
            let (sigma, gamma) = common::sigma_gamma(&d, t);
            let g = prefix_truncate(&f, t, &d).unwrap();
            for e in g.entries() {
                prop_assert!(gamma.contains(&e.path[0]));
                prop_assert!(sigma.contains(e.path.last().unwrap()));
                prop_assert_eq!(e.path.iter().filter(|v| sigma.contains(v)).count(), 1);
            }
        }
    }
}

#[test]
fn violating_sets_on_the_bottleneck_family() {
    let mut checked = 0;
    for (tail, blob, cap, mode) in [(3, 10, 6, Mode::Edp), (5, 14, 8, Mode::Edp), (3, 10, 3, Mode::Ndp), (6, 16, 4, Mode::Ndp)] {
        let (inst, d) = common::bottleneck(tail, blob, cap, mode);
        let p = prepare(&inst, &d, None, usize::MAX).unwrap();
        let (inst, d, f, r) = (&p.norm.instance, &p.decomposition, &p.fractional.flow, p.r);
        for t in d.nodes() {
            let vs = extract_violating_set(inst, d, t, f, r);
            if common::safe(inst, d, f, t, r) {
                assert!(vs.is_err());
                continue;
            }
            let vs = vs.unwrap();
            assert!(vs.cut_capacity < vs.threshold);
            let (sigma, gamma) = common::sigma_gamma(d, t);
            assert!(vs.u.iter().all(|v| gamma.contains(v) && !sigma.contains(v)));
            checked += 1;
        }
    }
    assert!(checked >= 4, "only {checked} unsafe nodes");
}
