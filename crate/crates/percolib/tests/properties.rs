//! Property tests for the sampler invariants: every configuration on every
//! graph must satisfy the ordering and consistency laws relating cluster
//! indices, BFS reachability, intrinsic distances and radii.

use proptest::prelude::*;

use percolib::graph::{build_grid, build_tree, Graph};
use percolib::perc::{
    clusters, cluster_stats, con_rad, intrinsic_distance, sample_config,
};

fn arb_graph() -> impl Strategy<Value = Graph> {
    prop_oneof![
        (3u32..=4, 2u32..=4).prop_map(|(k, d)| build_tree(k, d).unwrap()),
        (2u32..=5, 2u32..=5).prop_map(|(w, h)| build_grid(w, h).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn union_find_matches_bfs_and_radii_are_ordered(
        g in arb_graph(),
        p in 0.0f64..=1.0,
        seed in 0u64..1000,
        stream in 0u64..8,
    ) {
        let cfg = sample_config(&g, p, seed, stream).unwrap();
        let mut idx = clusters(&g, &cfg);
        let v0 = 0u32;
        let stats = cluster_stats(&g, &cfg, v0);
        prop_assert!(stats.rad_ext <= stats.rad_int);
        let ambient = g.distances_from(v0);
        let mut volume = 0u64;
        for u in 0..g.vertex_count() {
            let d_int = intrinsic_distance(&g, &cfg, v0, u);
            prop_assert_eq!(idx.same_cluster(v0, u), d_int.is_some());
            if let Some(d) = d_int {
                volume += 1;
                prop_assert!(d >= ambient[u as usize]);
                prop_assert!(d <= stats.rad_int);
            }
        }
        prop_assert_eq!(volume, stats.volume);
        prop_assert_eq!(u64::from(idx.volume(v0)), stats.volume);
    }

    #[test]
    fn monotone_coupling_preserves_connectivity(
        g in arb_graph(),
        p_lo in 0.0f64..=1.0,
        bump in 0.0f64..=1.0,
        seed in 0u64..1000,
    ) {
        let p_hi = (p_lo + bump).min(1.0);
        let lo = sample_config(&g, p_lo, seed, 0).unwrap();
        let hi = sample_config(&g, p_hi, seed, 0).unwrap();
        for e in 0..g.edge_count() {
            if lo.is_open(e) {
                prop_assert!(hi.is_open(e));
            }
        }
        let mut ilo = clusters(&g, &lo);
        let mut ihi = clusters(&g, &hi);
        for u in 0..g.vertex_count() {
            if ilo.same_cluster(0, u) {
                prop_assert!(ihi.same_cluster(0, u));
            }
            prop_assert!(ilo.volume(u) <= ihi.volume(u));
        }
    }

    #[test]
    fn con_rad_is_bounded_by_intrinsic_distance(
        g in arb_graph(),
        p in 0.1f64..=0.9,
        seed in 0u64..500,
        pick in 0u32..64,
    ) {
        let cfg = sample_config(&g, p, seed, 0).unwrap();
        let x = 0u32;
        let y = pick % g.vertex_count();
        let d = intrinsic_distance(&g, &cfg, x, y);
        let r = con_rad(&g, &cfg, x, y);
        match (d, r) {
            (Some(d), Some(r)) => {
                prop_assert!(u64::from(r) <= u64::from(d));
                if x != y {
                    prop_assert!(r >= 1);
                }
            }
            (None, None) => {}
            other => prop_assert!(false, "con_rad/distance disagree on connectivity: {:?}", other),
        }
    }
}
