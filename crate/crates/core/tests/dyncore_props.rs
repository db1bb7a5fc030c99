mod common;

use dynwalk::dyncore::{bipartite_embed, DynConfig, DynState};
use dynwalk::graph::{DynGraph, EdgeBatch, EdgeOp};
use dynwalk::linalg::PolyMatrix;
use dynwalk::matpow::power_sum;
use dynwalk::numerics::truncate_q;
use dynwalk::oracle::exact_power_sum;
use dynwalk::Q;
use num_traits::Signed;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn truth(g: &DynGraph, k: usize) -> PolyMatrix {
    exact_power_sum(&bipartite_embed(&g.lazy_transition().to_poly()), k)
}

fn max_gap(a: &PolyMatrix, b: &PolyMatrix) -> Q {
    a.sub(b).max_abs_coeff()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_mode_tracks_recompute(seed: u64, n in 2usize..7, d in 1usize..4, k in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = DynState::from_graph(DynGraph::new(n, d).unwrap(), DynConfig::exact(k)).unwrap();
        for _ in 0..6 {
            let g = st.graph().unwrap().clone();
            let batch = common::valid_batch(&mut rng, &g, 3);
            st.apply_batch(&batch).unwrap();
            prop_assert_eq!(st.series(), &truth(st.graph().unwrap(), k));
        }
    }

    #[test]
    fn disjoint_batches_commute(seed: u64, k in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 8;
        let mut ops_a = Vec::new();
        let mut ops_b = Vec::new();
        for _ in 0..3 {
            let (u, v) = (rng.gen_range(0..4), rng.gen_range(0..4));
            if u != v && !ops_a.contains(&EdgeOp::insert(u.min(v), u.max(v))) {
                ops_a.push(EdgeOp::insert(u.min(v), u.max(v)));
            }
            let (u, v) = (4 + rng.gen_range(0..4), 4 + rng.gen_range(0..4));
            if u != v && !ops_b.contains(&EdgeOp::insert(u.min(v), u.max(v))) {
                ops_b.push(EdgeOp::insert(u.min(v), u.max(v)));
            }
        }
        let (a, b) = (EdgeBatch::new(ops_a), EdgeBatch::new(ops_b));
        let base = DynGraph::new(n, 3).unwrap();
        let mut one = DynState::from_graph(base.clone(), DynConfig::exact(k)).unwrap();
        let mut two = DynState::from_graph(base, DynConfig::exact(k)).unwrap();
        one.apply_batch(&a).unwrap();
        one.apply_batch(&b).unwrap();
        two.apply_batch(&b).unwrap();
        two.apply_batch(&a).unwrap();
        prop_assert_eq!(one.series(), two.series());
    }

    #[test]
    fn gadget_walks_beyond_bound_add_nothing(seed: u64, k in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DynGraph::new(6, 3).unwrap();
        let mut tight = DynState::from_graph(g.clone(), DynConfig::exact(k)).unwrap();
        let mut loose = DynState::from_graph(g, DynConfig::exact(k)).unwrap();
        tight.set_max_delta_hops(Some(k.div_ceil(2).max(1)));
        loose.set_max_delta_hops(Some(2 * k + 1));
        for _ in 0..4 {
            let batch = common::valid_batch(&mut rng, tight.graph().unwrap(), 4);
            tight.apply_batch(&batch).unwrap();
            loose.apply_batch(&batch).unwrap();
            prop_assert_eq!(tight.series(), loose.series());
        }
    }

    #[test]
    fn cascade_path_matches_direct(seed: u64, k in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DynGraph::new(5, 2).unwrap();
        let mut direct = DynState::from_graph(g.clone(), DynConfig::exact(k)).unwrap();
        let mut cascade = DynState::from_graph(g, DynConfig::exact(k)).unwrap();
        cascade.set_cascade_threshold(Some(1));
        for _ in 0..3 {
            let batch = common::valid_batch(&mut rng, direct.graph().unwrap(), 3);
            direct.apply_batch(&batch).unwrap();
            cascade.apply_batch(&batch).unwrap();
            prop_assert_eq!(direct.series(), cascade.series());
        }
    }

    #[test]
    fn bits_mode_stays_within_certified_error(seed: u64, k in 2usize..7, bits in 24u64..48) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = DynState::from_graph(DynGraph::new(5, 3).unwrap(), DynConfig::bits(k, bits)).unwrap();
        for _ in 0..6 {
            let batch = common::valid_batch(&mut rng, st.graph().unwrap(), 3);
            st.apply_batch(&batch).unwrap();
            let gap = max_gap(st.series(), &truth(st.graph().unwrap(), k));
            prop_assert!(gap <= st.error_bound());
            prop_assert!(st.series().entries().iter().all(|p| p.coeffs().iter().all(|c| truncate_q(c, bits) == *c)));
        }
    }
}

#[test]
fn kernel_series_equals_walk_recompute() {
    let g = DynGraph::from_edges(5, 2, &[(0, 1), (1, 2), (3, 4)]).unwrap();
    let b = bipartite_embed(&g.lazy_transition().to_poly());
    let st = DynState::from_graph(g, DynConfig::exact(6)).unwrap();
    assert_eq!(st.series(), &power_sum(&b, 6));
    assert!(st.series().max_abs_coeff().is_positive());
}
