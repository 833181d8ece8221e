use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::{build_surface, IndexConfig};
use crate::nle::{compose_expectation, CredibleModel, PosteriorState};

use super::orthant::{check_orthant, compensator_counterexample, consistency_counterexample};
use super::report::{CheckReport, Tolerances};
use super::stopping::{check_delay_inequality, check_fair_game, check_optimal_stopping, gittins_oracle};
use super::strategy::{check_sandwich_and_optimality, ArmSet};
use super::tree::{sup_enumerated, sup_recursive, FiniteTree};
use super::MAX_TREE_DEPTH;

/// Names of every check the suite runs.
pub const CHECK_NAMES: [&str; 9] = [
    "representation",
    "engine_equivalence",
    "optimal_stopping",
    "fair_game",
    "delay_inequality",
    "orthant_expectation",
    "sandwich_and_optimality",
    "orthant_consistency_counterexample",
    "random_compensator_counterexample",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Depth of the single-arm trees, at most four.
    pub depth: usize,
    pub instances: usize,
    /// Random weight processes per delay check.
    pub delay_trials: usize,
    /// Random payoffs per orthant check.
    pub orthant_samples: usize,
    /// A check whose tolerances are made unsatisfiable, to exercise failure.
    pub broken: Option<String>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            depth: 3,
            instances: 50,
            delay_trials: 1000,
            orthant_samples: 3,
            broken: None,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.depth > MAX_TREE_DEPTH {
            return Err(Error::Guard(format!(
                "verification depth must lie in 1..={MAX_TREE_DEPTH}, got {}",
                self.depth
            )));
        }
        if let Some(name) = &self.broken {
            if !CHECK_NAMES.contains(&name.as_str()) {
                return Err(Error::domain(format!(
                    "unknown check `{name}`; expected one of {}",
                    CHECK_NAMES.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn tolerances(&self, check: &str) -> Tolerances {
        if self.broken.as_deref() == Some(check) {
            Tolerances::broken()
        } else {
            Tolerances::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuiteReport {
    pub reports: Vec<CheckReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(CheckReport::passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckReport> {
        self.reports.iter().filter(|r| !r.passed())
    }

    /// Reports of one check across all instances.
    pub fn of<'a>(&'a self, check: &'a str) -> impl Iterator<Item = &'a CheckReport> {
        self.reports.iter().filter(move |r| r.check == check)
    }
}

/// Seed of instance `i`: instances are numbered consecutively from the suite
/// seed, so any instance can be rerun alone.
pub fn instance_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Recursion and enumeration agree on random payoffs at every node, and the
/// credible-interval composition agrees with enumeration over its endpoints.
fn check_representation<R: Rng + ?Sized>(tree: &FiniteTree, rng: &mut R, tol: Tolerances) -> CheckReport {
    let mut report = CheckReport::new(
        "representation",
        "backward recursion equals the supremum over extreme product measures",
    );
    let result = (|| -> Result<()> {
        let payoff: Vec<f64> = (0..tree.leaf_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for id in 0..tree.internal_count() {
            let a = sup_recursive(tree, id, &payoff);
            let b = sup_enumerated(tree, id, &payoff)?;
            report.expect((a - b).abs() <= tol.exact, || {
                format!("node {id}: recursion {a} but enumeration {b}")
            });
        }
        let depth = tree.depth().min(3);
        let start = PosteriorState::new(rng.gen_range(0.05..0.95), rng.gen_range(1..=5) as f64)?;
        let model = CredibleModel::with_level(rng.gen_range(0.05..0.95))?;
        let credible = FiniteTree::from_credible_model(start, model, depth, 0.9)?;
        let payoff: Vec<f64> = (0..credible.leaf_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let composed = compose_expectation(
            |path| {
                payoff[path.iter().fold(0, |acc, &o| 2 * acc + o as usize)]
            },
            start,
            model,
            depth,
        )?;
        let enumerated = sup_enumerated(&credible, 0, &payoff)?;
        report.expect((composed - enumerated).abs() <= tol.exact, || {
            format!("composition {composed} but enumeration {enumerated}")
        });
        Ok(())
    })();
    if let Err(err) = result {
        report.fail(err.to_string());
    }
    report
}

/// The engine's index at the root of a credible-interval tree lies within
/// `slack` of the brute-force index.
pub fn check_engine_equivalence(
    k: f64,
    beta: f64,
    n0: f64,
    depth: usize,
    p_index: usize,
    slack: f64,
) -> CheckReport {
    let mut report = CheckReport::new(
        "engine_equivalence",
        "grid index engine matches the brute-force index within one grid step",
    );
    let result = (|| -> Result<()> {
        let config = IndexConfig::new(k, beta, depth, n0)?;
        let p = *config
            .p_grid()
            .get(p_index)
            .ok_or_else(|| Error::domain(format!("grid has no point {p_index}")))?;
        let engine = build_surface(&config).stage(0)[p_index];
        let tree = FiniteTree::from_credible_model(config.state_at(p, 0)?, config.model(), depth, beta)?;
        let oracle = gittins_oracle(&tree, 0)?;
        report.expect((engine - oracle).abs() <= slack, || {
            format!("k={k} beta={beta} n0={n0} p={p}: engine {engine}, oracle {oracle}")
        });
        Ok(())
    })();
    if let Err(err) = result {
        report.fail(err.to_string());
    }
    report
}

fn run_instance(config: &SuiteConfig, seed: u64) -> Vec<CheckReport> {
    let mut rng = instance_rng(seed);
    let depth = config.depth;
    let mut reports = Vec::new();
    let tree = match FiniteTree::random(&mut rng, depth) {
        Ok(t) => t,
        Err(err) => {
            let mut r = CheckReport::new("instance", "random instance generation");
            r.fail(err.to_string());
            return vec![r.with_seed(Some(seed))];
        }
    };

    reports.push(check_representation(&tree, &mut rng, config.tolerances("representation")));

    let k = rng.gen_range(0.01..0.9);
    let beta = rng.gen_range(0.5..0.999);
    let n0 = rng.gen_range(1..=5) as f64;
    let p_index = rng.gen_range(0..=100);
    let slack = if config.broken.as_deref() == Some("engine_equivalence") {
        -1.0
    } else {
        IndexConfig::new(k, beta, depth, n0).map_or(0.0, |c| c.gamma_spacing())
    };
    reports.push(check_engine_equivalence(k, beta, n0, depth, p_index, slack));

    let tol = config.tolerances("optimal_stopping");
    let mut stopping = CheckReport::new("optimal_stopping", "");
    for id in 0..tree.internal_count() {
        let r = check_optimal_stopping(&tree, id, tol);
        stopping.anchor = r.anchor.clone();
        stopping.cases += r.cases;
        stopping.failures += r.failures;
        stopping.violations.extend(r.violations);
    }
    reports.push(stopping);

    reports.push(check_fair_game(&tree, config.tolerances("fair_game")));
    reports.push(check_delay_inequality(
        &tree,
        &mut rng,
        config.delay_trials,
        config.tolerances("delay_inequality"),
    ));

    let orthant = FiniteTree::random(&mut rng, depth.min(3))
        .and_then(|a| Ok((a, FiniteTree::random(&mut rng, depth.min(2))?)));
    reports.push(match orthant {
        Ok((a, b)) => check_orthant(
            &a,
            &b,
            &mut rng,
            config.orthant_samples,
            config.tolerances("orthant_expectation"),
        ),
        Err(err) => {
            let mut r = CheckReport::new("orthant_expectation", "");
            r.fail(err.to_string());
            r
        }
    });

    // Alternate between the two horizon shapes when the depth allows.
    let horizons = if depth >= 3 && seed % 2 == 1 {
        [3, 2]
    } else {
        [depth.min(2); 2]
    };
    let shared_beta = rng.gen_range(0.5..0.99);
    let arms = horizons
        .iter()
        .map(|&d| FiniteTree::random_with_beta(&mut rng, d, shared_beta))
        .collect::<Result<Vec<_>>>()
        .and_then(ArmSet::new);
    reports.push(match arms {
        Ok(set) => check_sandwich_and_optimality(&set, config.tolerances("sandwich_and_optimality")),
        Err(err) => {
            let mut r = CheckReport::new("sandwich_and_optimality", "");
            r.fail(err.to_string());
            r
        }
    });

    reports
        .into_iter()
        .map(|r| r.with_seed(Some(seed)))
        .collect()
}

/// Runs every check on `instances` random instances seeded consecutively
/// from the configured seed, plus the two fixed counterexamples. No instances
/// means an empty report.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    config.validate()?;
    if config.instances == 0 {
        return Ok(SuiteReport::default());
    }
    let mut reports: Vec<CheckReport> = (0..config.instances as u64)
        .into_par_iter()
        .map(|i| run_instance(config, config.seed.wrapping_add(i)))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    reports.push(consistency_counterexample(
        config.tolerances("orthant_consistency_counterexample"),
    ));
    reports.push(compensator_counterexample(
        config.tolerances("random_compensator_counterexample"),
    ));
    Ok(SuiteReport { reports })
}
