use proptest::prelude::*;
use twrouter::gen::{gen_band_ndp, gen_partial_ktree};
use twrouter::io::{
    emit_td, flow_from_json, flow_to_json, instance_to_dimacs, instance_to_json, parse_dimacs, parse_instance,
    parse_instance_json, parse_td, TdFile,
};
use twrouter::router::prepare;

const SAMPLE_TD: &str = "c sample\ns td 3 2 4\nb 1 1 2\nb 2 2 3\nb 3 3 4\n1 2\n2 3\n";

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn instances_round_trip(seed in 0u64..1000, n in 2usize..20, ndp: bool) {
        let inst = if ndp { gen_band_ndp(n, 2, 3, seed, 3).0 } else { gen_partial_ktree(n, 2, 3, seed).0 };
        prop_assert_eq!(&parse_instance_json(&instance_to_json(&inst)).unwrap(), &inst);
        prop_assert_eq!(&parse_instance(&instance_to_json(&inst)).unwrap(), &inst);
        prop_assert_eq!(&parse_dimacs(&instance_to_dimacs(&inst), Some(inst.mode)).unwrap(), &inst);
        prop_assert_eq!(&parse_instance(&instance_to_dimacs(&inst)).unwrap().graph, &inst.graph);
    }

    #[test]
    fn decompositions_round_trip(seed in 0u64..1000, n in 2usize..20) {
        let (inst, d) = gen_partial_ktree(n, 2, 2, seed);
        let text = emit_td(&d, inst.graph.num_vertices());
        let back = parse_td(&text).unwrap();
        prop_assert_eq!(back.validate(&inst.graph).unwrap(), d.width());
        prop_assert_eq!(emit_td(&back, inst.graph.num_vertices()), text);
    }

    #[test]
    fn flows_round_trip(seed in 0u64..200) {
        let (inst, d) = gen_partial_ktree(10, 2, 3, seed);
        let f = prepare(&inst, &d, None, usize::MAX).unwrap().fractional.flow;
        prop_assert_eq!(flow_from_json(&flow_to_json(&f)).unwrap(), f);
    }
}

#[test]
fn td_file_is_reproduced_verbatim() {
    let td = TdFile::parse(SAMPLE_TD).unwrap();
    assert_eq!(td.bags, vec![vec![1, 2], vec![2, 3], vec![3, 4]]);
    assert_eq!(td.emit(), SAMPLE_TD.trim_start_matches("c sample\n"));
    let d = td.to_decomposition().unwrap();
    assert_eq!(d.root(), 0);
    assert_eq!(d.bag(1).iter().copied().collect::<Vec<_>>(), vec![1, 2]);
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(TdFile::parse("s td 2 2 3\nb 1 1 2\n").is_err());
    assert!(TdFile::parse("s td 1 2 3\nb 1 1 5\n").is_err());
    assert!(parse_dimacs("p 2 1 1\ne 1 3 1\nd 1 2\n", None).is_err());
    assert!(parse_dimacs("p 2 2 1\ne 1 2 1\nd 1 2\n", None).is_err());
    assert!(parse_instance_json("{\"vertices\": 2}").is_err());
    assert!(parse_dimacs("p 2 1 1\ne 1 2 1\nd 1 2\n", None).is_ok());
}
