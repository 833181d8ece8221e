use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use robust_gittins::oracle::{
    check_sandwich_and_optimality, enumerate_stopping_times, gittins_oracle, node_indices,
    sigma_rule, stopping_value, sup_enumerated, sup_recursive, ArmSet, FiniteTree, Tolerances,
};

fn tree(depth: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = FiniteTree> {
    (depth, any::<u64>()).prop_map(|(d, seed)| {
        FiniteTree::random(&mut ChaCha8Rng::seed_from_u64(seed), d).unwrap()
    })
}

/// Best value over stopping rules from `id` by backward induction: after each
/// play either stop or continue, whichever is cheaper, with nature choosing
/// the worst probability at every node.
fn snell(tree: &FiniteTree, id: usize, gamma: f64) -> f64 {
    let depth_of = |node: usize| (node + 1).ilog2() as usize;
    let after = |c: usize| {
        let here = tree.beta() * (tree.cost(c) - gamma);
        if depth_of(c) == tree.depth() {
            here
        } else {
            here + tree.beta() * snell(tree, c, gamma).min(0.0)
        }
    };
    let (f0, f1) = (after(2 * id + 1), after(2 * id + 2));
    tree.theta_set(id)
        .iter()
        .map(|&t| t * f1 + (1.0 - t) * f0)
        .fold(f64::NEG_INFINITY, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn recursion_matches_enumeration(t in tree(1..=4), values in prop::collection::vec(-3.0..3.0f64, 16)) {
        let payoff = &values[..t.leaf_count()];
        for id in 0..t.internal_count() {
            let a = sup_recursive(&t, id, payoff);
            let b = sup_enumerated(&t, id, payoff).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn best_rule_matches_backward_induction(t in tree(1..=3), gamma in 0.0..1.0f64) {
        for id in 0..t.internal_count() {
            let best = enumerate_stopping_times(&t, id)
                .unwrap()
                .iter()
                .map(|r| stopping_value(&t, r, gamma).unwrap())
                .fold(f64::INFINITY, f64::min);
            prop_assert!((best - snell(&t, id, gamma)).abs() <= 1e-12, "node {id}");
        }
    }

    /// Stopping after one play costs at most the worst one-step expected cost.
    #[test]
    fn index_below_one_step_cost(t in tree(1..=3)) {
        for id in 0..t.internal_count() {
            let (c0, c1) = (t.cost(2 * id + 1), t.cost(2 * id + 2));
            let bound = t.theta_set(id)
                .iter()
                .map(|&th| th * c1 + (1.0 - th) * c0)
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(gittins_oracle(&t, id).unwrap() <= bound + 1e-9);
        }
    }

    #[test]
    fn exceedance_rule_is_optimal(t in tree(1..=3)) {
        let gammas = node_indices(&t).unwrap();
        for id in 0..t.internal_count() {
            let Some(sigma) = sigma_rule(&t, &gammas, id) else { continue };
            let best = enumerate_stopping_times(&t, id)
                .unwrap()
                .iter()
                .map(|r| stopping_value(&t, r, gammas[id]).unwrap())
                .fold(f64::INFINITY, f64::min);
            let v = stopping_value(&t, &sigma, gammas[id]).unwrap();
            prop_assert!((v - best).abs() <= 1e-8, "node {id}: {v} vs {best}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sandwich_holds(seed in any::<u64>(), wide in prop::bool::ANY) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let depths = if wide { [3, 2] } else { [2, 2] };
        let trees = depths
            .iter()
            .map(|&d| FiniteTree::random_with_beta(&mut rng, d, 0.8).unwrap())
            .collect();
        let report = check_sandwich_and_optimality(&ArmSet::new(trees).unwrap(), Tolerances::default());
        prop_assert!(report.passed(), "{}", report);
    }
}
