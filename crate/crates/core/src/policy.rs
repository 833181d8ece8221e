//! Arm-selection policies. Every policy plays the arm with the smallest index
//! (costs are minimized) and breaks exact ties uniformly at random.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::index::IndexSurface;
use crate::nle::{posterior_update, PosteriorState};
use crate::sampling::beta_draw;

/// Posterior of one arm plus the number of trials it has seen, warm-up
/// included. The posterior count is the prior pseudo-count plus `pulls`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmState {
    posterior: PosteriorState,
    pulls: u64,
}

impl ArmState {
    pub fn new(prior: PosteriorState) -> Self {
        Self {
            posterior: prior,
            pulls: 0,
        }
    }

    pub fn posterior(&self) -> PosteriorState {
        self.posterior
    }

    pub fn pulls(&self) -> u64 {
        self.pulls
    }

    pub fn p(&self) -> f64 {
        self.posterior.p()
    }

    pub fn n(&self) -> f64 {
        self.posterior.n()
    }

    /// Records one Bernoulli outcome (`true` is a unit cost).
    pub fn observe(&mut self, outcome: bool) {
        self.posterior = posterior_update(self.posterior, outcome);
        self.pulls += 1;
    }
}

#[derive(Debug, Clone)]
pub enum PolicySpec {
    Dr { surface: Arc<IndexSurface> },
    Greedy,
    Thompson { a0: f64, b0: f64 },
    Ucb { lambda: f64 },
}

/// Exploration weight most often used with UCB.
pub const UCB_DEFAULT_LAMBDA: f64 = 2.0;

impl PolicySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PolicySpec::Thompson { a0, b0 } if !(a0 > 0.0 && b0 > 0.0) => Err(Error::domain(
                format!("Thompson prior shapes must be positive, got a0={a0}, b0={b0}"),
            )),
            PolicySpec::Ucb { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => Err(
                Error::domain(format!("UCB weight must be nonnegative, got {lambda}")),
            ),
            _ => Ok(()),
        }
    }

    /// Index of every arm at the current step.
    pub fn indices<R: Rng + ?Sized>(&self, arms: &[ArmState], rng: &mut R) -> Result<Vec<f64>> {
        match self {
            PolicySpec::Dr { surface } => arms.iter().map(|arm| index_dr(arm, surface)).collect(),
            PolicySpec::Greedy => Ok(arms.iter().map(index_greedy).collect()),
            PolicySpec::Thompson { a0, b0 } => Ok(arms
                .iter()
                .map(|arm| index_thompson(arm, *a0, *b0, rng))
                .collect()),
            PolicySpec::Ucb { lambda } => {
                let total: f64 = arms.iter().map(ArmState::n).sum();
                arms.iter()
                    .map(|arm| index_ucb(arm, total, *lambda))
                    .collect()
            }
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Dr { surface } => {
                let c = surface.config();
                write!(f, "dr(k={},beta={})", c.k(), c.beta())
            }
            PolicySpec::Greedy => f.write_str("greedy"),
            PolicySpec::Thompson { a0, b0 } => write!(f, "thompson(a0={a0},b0={b0})"),
            PolicySpec::Ucb { lambda } => write!(f, "ucb(lambda={lambda})"),
        }
    }
}

pub fn index_greedy(arm: &ArmState) -> f64 {
    arm.p()
}

/// One draw from `Beta(a0 + p n, b0 + (1 - p) n)`.
pub fn index_thompson<R: Rng + ?Sized>(arm: &ArmState, a0: f64, b0: f64, rng: &mut R) -> f64 {
    let (a, b) = arm.posterior().shapes();
    beta_draw(rng, a0 + a, b0 + b)
}

/// `p - sqrt(lambda ln(total) / n)`, where `total` counts observations over
/// all arms.
pub fn index_ucb(arm: &ArmState, total: f64, lambda: f64) -> Result<f64> {
    if !(total >= 1.0) {
        return Err(Error::domain(format!(
            "UCB needs at least one observation in total, got {total}"
        )));
    }
    Ok(arm.p() - (lambda * total.ln() / arm.n()).sqrt())
}

pub fn index_dr(arm: &ArmState, surface: &IndexSurface) -> Result<f64> {
    let n0 = surface.config().n0();
    if arm.n() < n0 {
        return Err(Error::domain(format!(
            "arm has {} observations, fewer than the surface prior count {n0}",
            arm.n()
        )));
    }
    Ok(surface.query(arm.p(), arm.n()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub chosen: usize,
    pub indices: Vec<f64>,
    pub tie_count: usize,
}

/// Picks uniformly among the positions holding the minimal index. Ties are
/// exact floating-point equality. A unique minimum consumes no randomness.
pub fn select_arm<R: Rng + ?Sized>(indices: Vec<f64>, rng: &mut R) -> Result<Decision> {
    if indices.is_empty() {
        return Err(Error::domain("cannot select from an empty index vector"));
    }
    if let Some(i) = indices.iter().position(|x| x.is_nan()) {
        return Err(Error::domain(format!("index of arm {i} is NaN")));
    }
    let min = indices.iter().copied().fold(f64::INFINITY, f64::min);
    let tie_count = indices.iter().filter(|&&x| x == min).count();
    let pick = if tie_count == 1 {
        0
    } else {
        rng.gen_range(0..tie_count)
    };
    let chosen = indices
        .iter()
        .enumerate()
        .filter(|&(_, &x)| x == min)
        .nth(pick)
        .map(|(i, _)| i)
        .expect("pick is below the tie count");
    Ok(Decision {
        chosen,
        indices,
        tie_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{build_surface, IndexConfig};
    use crate::sampling::tests::ConstantRng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arm(p: f64, n: f64) -> ArmState {
        ArmState::new(PosteriorState::new(p, n).unwrap())
    }

    #[test]
    fn greedy_is_the_mean() {
        for p in [0.3, 0.0, 1.0] {
            assert_eq!(index_greedy(&arm(p, 3.0)), p);
        }
    }

    #[test]
    fn ucb_examples() {
        let v = index_ucb(&arm(0.5, 4.0), 100.0, 2.0).unwrap();
        assert!((v - (0.5 - (2.0 * 100f64.ln() / 4.0).sqrt())).abs() < 1e-15);
        assert!((v + 1.01743).abs() < 1e-5);
        assert_eq!(index_ucb(&arm(0.3, 4.0), 1.0, 2.0).unwrap(), 0.3);
        assert_eq!(index_ucb(&arm(0.3, 4.0), 50.0, 0.0).unwrap(), 0.3);
        assert!(index_ucb(&arm(0.3, 4.0), 0.0, 2.0).is_err());
    }

    #[test]
    fn ucb_monotone_in_mean_and_count() {
        let at = |p, n| index_ucb(&arm(p, n), 40.0, 2.0).unwrap();
        assert!(at(0.2, 5.0) < at(0.3, 5.0));
        assert!(at(0.2, 5.0) < at(0.2, 6.0));
    }

    #[test]
    fn thompson_with_constant_generator_hits_the_median() {
        let mut rng = ConstantRng(1 << 63);
        assert_eq!(index_thompson(&arm(0.5, 2.0), 1.0, 1.0, &mut rng), 0.5);
    }

    #[test]
    fn thompson_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let a = arm(0.25, 4.0);
        let mean = (0..n)
            .map(|_| index_thompson(&a, 1.0, 1.0, &mut rng))
            .sum::<f64>()
            / n as f64;
        // Beta(2, 4): mean 1/3, variance 8 / (36 * 7).
        let sd = (8.0f64 / 252.0).sqrt();
        assert!(
            (mean - 2.0 / 6.0).abs() < 3.0 * sd / (n as f64).sqrt(),
            "{mean}"
        );
    }

    #[test]
    fn thompson_strong_prior_concentrates() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = arm(0.0, 1.0);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| index_thompson(&a, 50.0, 50.0, &mut rng))
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 50.0 / 101.0).abs() < 0.005);
        assert!(draws.iter().all(|&x| (0.25..0.75).contains(&x)));
    }

    #[test]
    fn dr_index_reads_the_surface() {
        let cfg = IndexConfig::with_grids(0.5, 0.9, 5, 1.0, 11, 21).unwrap();
        let surface = build_surface(&cfg);
        assert_eq!(
            index_dr(&arm(0.3, 1.0), &surface).unwrap(),
            surface.stage(0)[3]
        );
        assert_eq!(
            index_dr(&arm(0.3, 3.0), &surface).unwrap(),
            surface.stage(2)[3]
        );
        assert_eq!(index_dr(&arm(0.3, 6.0), &surface).unwrap(), 1.0);
        assert!(index_dr(&arm(0.3, 0.5), &surface).is_err());
    }

    #[test]
    fn arm_state_counts_pulls() {
        let mut a = arm(0.5, 1.0);
        a.observe(true);
        a.observe(false);
        assert_eq!(a.pulls(), 2);
        assert_eq!(a.n(), 3.0);
        assert!((a.p() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unique_minimum_and_singleton() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = select_arm(vec![0.3, 0.1, 0.2], &mut rng).unwrap();
        assert_eq!((d.chosen, d.tie_count), (1, 1));
        let d = select_arm(vec![0.7], &mut rng).unwrap();
        assert_eq!((d.chosen, d.tie_count), (0, 1));
    }

    #[test]
    fn bad_index_vectors_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(select_arm(vec![], &mut rng).is_err());
        assert!(select_arm(vec![0.1, f64::NAN], &mut rng).is_err());
    }

    #[test]
    fn ties_are_broken_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 10_000;
        let ones = (0..draws)
            .filter(|_| select_arm(vec![0.2, 0.2], &mut rng).unwrap().chosen == 1)
            .count() as f64;
        let half = draws as f64 / 2.0;
        let chi2 = 2.0 * (ones - half).powi(2) / half;
        // 99.9% quantile of chi-squared with one degree of freedom.
        assert!(chi2 < 10.83, "chi2 {chi2}");
    }
}
