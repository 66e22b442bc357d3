mod common;

use rko_route::instance::DimSizes;
use rko_route::rko::tour_cost;
use rko_route::CostMode;

#[test]
fn layered_search_matches_plain_enumeration() {
    for seed in 0..6 {
        let inst = common::synthetic(3 + seed as usize % 2, DimSizes::new(2, 1, 2, 1), 0.7, seed);
        for mode in [CostMode::HomeAnchored, CostMode::Cyclic] {
            let (best, nodes) = common::optimum(&inst, mode);
            assert_eq!(tour_cost(&nodes, &inst, mode).0, best);
            let naive = common::optimum_naive(&inst, mode);
            assert!((best - naive).abs() < 1e-12, "{best} vs {naive}");
        }
    }
}

#[test]
fn permutation_count() {
    assert_eq!(common::permutations(4).len(), 24);
    assert_eq!(common::permutations(0), vec![Vec::<usize>::new()]);
}
