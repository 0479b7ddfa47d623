use mlfmm::*;
use proptest::prelude::*;

fn spec() -> impl Strategy<Value = GridSpec> {
    (1usize..=3, 2usize..=6, -1.0f64..1.0).prop_flat_map(|(d, k, lo)| {
        prop::collection::vec(1usize..=5, d).prop_map(move |extents| {
            let h = 1.0 / k as f64;
            let hi = extents.iter().map(|&n| lo + n as f64 * h).collect();
            GridSpec::new(BoxDomain::new(vec![lo; extents.len()], hi).unwrap(), h).unwrap()
        })
    })
}

fn region(d: usize) -> impl Strategy<Value = Region> {
    let ball = (prop::collection::vec(-1.0f64..2.0, d), 0.0f64..1.0).prop_map(|(c, r)| Region::ball(c, r));
    let cuboid = (prop::collection::vec(-1.0f64..2.0, d), prop::collection::vec(0.0f64..1.0, d))
        .prop_map(|(lo, w)| Region::cuboid(lo.clone(), lo.iter().zip(&w).map(|(a, b)| a + b).collect()));
    prop_oneof![ball, cuboid]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn nearest_node_inverts_node_to_point(g in spec()) {
        for flat in 0..g.len() {
            let idx = g.multi_index(flat).unwrap();
            let p = g.node_to_point(&idx).unwrap();
            prop_assert_eq!(g.point_to_nearest_node(&p), idx.clone());
            prop_assert_eq!(g.flat_index(&idx).unwrap(), flat);
        }
    }

    #[test]
    fn union_membership_is_set_union((g, a, b) in spec().prop_flat_map(|g| { let d = g.dim(); (Just(g), region(d), region(d)) })) {
        let mut both = g.nodes_in_region(&a);
        both.extend(g.nodes_in_region(&b));
        both.sort_unstable();
        both.dedup();
        let mut union = g.nodes_in_region(&Region::Union(vec![a, b]));
        union.sort_unstable();
        prop_assert_eq!(union, both);
    }

    #[test]
    fn region_queries_match_enumeration((g, r) in spec().prop_flat_map(|g| { let d = g.dim(); (Just(g), region(d)) })) {
        let mut got = g.nodes_in_region(&r);
        got.sort_unstable();
        let want: Vec<usize> = (0..g.len()).filter(|&n| r.contains(&g.flat_to_point(n).unwrap())).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn restriction_only_removes_neighbours(g in spec(), a in any::<u64>(), b in any::<u64>()) {
        let keep = |mask: u64, i: usize| i == 0 || (mask >> (i % 64)) & 1 == 1;
        let larger: Vec<usize> = (0..g.len()).filter(|&i| keep(a | b, i)).collect();
        let smaller: Vec<usize> = (0..g.len()).filter(|&i| keep(a, i)).collect();
        let big = RestrictedGrid::from_members(g.clone(), larger).unwrap();
        let small = RestrictedGrid::from_members(g, smaller).unwrap();
        for node in small.members() {
            let s = small.axis_neighbors(node).unwrap();
            let l = big.axis_neighbors(node).unwrap();
            for (sa, la) in s.iter().zip(&l) {
                prop_assert!(sa.minus.is_none() || sa.minus == la.minus);
                prop_assert!(sa.plus.is_none() || sa.plus == la.plus);
            }
        }
    }
}
