//! Brute-force verification on small binary trees.
//!
//! Every quantity here is computed by exhaustive enumeration over extreme
//! product measures, stopping rules or allocation strategies, so it can serve
//! as an independent check on the recursive engine in [`crate::index`].

mod orthant;
mod report;
mod stopping;
mod strategy;
mod suite;
mod tree;

pub use orthant::{
    check_orthant, compensator_counterexample, consistency_counterexample,
    consistency_counterexample_values, counterexample_values, CounterexampleValues, ProductSpace,
};
pub use report::{CheckReport, Tolerances};
pub use stopping::{
    check_delay_inequality, check_fair_game, check_optimal_stopping, enumerate_stopping_times,
    gittins_oracle, node_indices, prevailing_path, sigma_hitting, sigma_rule, stopping_rule_count,
    stopping_value, StoppingRule,
};
pub use strategy::{
    check_sandwich_and_optimality, enumerate_orders, enumerate_strategies, gittins_value,
    strategy_count, AllocationStrategy, ArmInstance, ArmSet, CompensatorLedger, Plan,
};
pub use suite::{
    check_engine_equivalence, instance_rng, run_suite, SuiteConfig, SuiteReport, CHECK_NAMES,
};
pub use tree::{sup_enumerated, sup_expectation, sup_recursive, FiniteTree, COST_CAP};

/// Deepest tree the enumerators accept.
pub const MAX_TREE_DEPTH: usize = 4;
/// Largest number of extreme measures enumerated on one subtree.
pub const MAX_MEASURES: usize = 1 << 20;
/// Largest total number of plays across arms in strategy enumeration.
pub const MAX_TOTAL_PLAYS: usize = 8;
/// Largest number of adapted strategies enumerated at once.
pub const MAX_STRATEGIES: usize = 1_000_000;

/// Tolerance for identities that hold in exact arithmetic.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance wherever a bisected index enters.
pub const SOLVER_TOL: f64 = 1e-8;
/// Tolerance for sums that accumulate many exact terms.
pub const ACCUMULATED_TOL: f64 = 1e-10;
/// Margin below which an index is treated as not exceeding a level.
pub const TIE_TOL: f64 = 1e-10;
/// Width at which the index bisection stops.
pub const BISECTION_WIDTH: f64 = 1e-13;
