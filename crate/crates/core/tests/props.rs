//! Property suite for the pipeline invariances and the ranking metric.

mod common;

use proptest::prelude::*;

/// Node count plus a random edge subset over it, candidate pair left
/// out so the plus/minus variants differ.
fn small_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (5usize..=10).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
            .filter(|&p| p != (0, 1))
            .collect();
        let len = pairs.len();
        proptest::collection::vec(proptest::bool::weighted(0.35), len).prop_map(move |keep| {
            let edges = pairs
                .iter()
                .copied()
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(p, _)| p)
                .collect();
            (n, edges)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn focal_swap_features_bit_exact(
        (n, edges) in small_graph(),
        tau_c in 2usize..=7,
        seed in any::<u64>(),
    ) {
        let r = common::check_focal_swap(n, &edges, tau_c, seed);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }

    #[test]
    fn nonfocal_renaming_leaves_features(
        (n, edges) in small_graph(),
        tau_c in 2usize..=7,
        seed in any::<u64>(),
        perm_seed in any::<u64>(),
    ) {
        let r = common::check_nonfocal_permutation(n, &edges, tau_c, seed, perm_seed);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }

    #[test]
    fn transition_rows_stochastic(
        (n, edges) in small_graph(),
        seed in any::<u64>(),
    ) {
        let r = common::check_row_stochastic(n, &edges, seed);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }

    #[test]
    fn auc_invariant_under_monotone_maps(
        pos in proptest::collection::vec(-8_000_000i32..8_000_000, 1..40),
        neg in proptest::collection::vec(-8_000_000i32..8_000_000, 1..40),
        scale_pow in -2i32..=3,
        offset_grid in -5_000i32..=5_000,
        nonlinear in any::<bool>(),
    ) {
        let r = common::check_auc_monotone(&pos, &neg, scale_pow, offset_grid, nonlinear);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }
}
