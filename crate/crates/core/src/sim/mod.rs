//! Monte-Carlo benchmark of bandit policies on random Bernoulli scenarios.
//!
//! Every scenario is drawn once and replayed for each policy. Outcomes come
//! from one stream per arm, so the `i`-th pull of an arm sees the same
//! uniform under every policy, which tightens paired comparisons.

mod results;
mod seeding;

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::{build_surface, IndexConfig};
use crate::nle::PosteriorState;
use crate::policy::{select_arm, ArmState, PolicySpec};
use crate::sampling::{beta_draw, gamma_draw, uniform_open};

pub use results::{
    read_results, write_results, write_trace, PolicySummary, ResultRow, ResultsTable, Summary,
    METRIC_REGRET, METRIC_SUBOPTIMAL,
};
pub use seeding::{stream, StreamRole};

/// How the second argument of the scenario Gamma law is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaParam {
    Rate,
    Scale,
}

impl GammaParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            GammaParam::Rate => "rate",
            GammaParam::Scale => "scale",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub arms: usize,
    pub horizon: usize,
    pub warmup: usize,
    pub gamma_shape: f64,
    pub gamma_second: f64,
    pub gamma_param: GammaParam,
    pub prior_mean: f64,
    pub prior_count: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            arms: 50,
            horizon: 10_000,
            warmup: 10,
            gamma_shape: 1.0,
            gamma_second: 0.01,
            gamma_param: GammaParam::Rate,
            prior_mean: 0.5,
            prior_count: 1.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.arms == 0 {
            return Err(Error::domain("need at least one arm"));
        }
        if self.horizon == 0 {
            return Err(Error::domain("play horizon must be at least 1"));
        }
        if !(self.gamma_shape > 0.0 && self.gamma_second > 0.0) {
            return Err(Error::domain(format!(
                "scenario Gamma law needs positive parameters, got ({}, {})",
                self.gamma_shape, self.gamma_second
            )));
        }
        PosteriorState::new(self.prior_mean, self.prior_count)?;
        Ok(())
    }

    /// Scale of the scenario Gamma law under the chosen parameterization.
    pub fn gamma_scale(&self) -> f64 {
        match self.gamma_param {
            GammaParam::Rate => 1.0 / self.gamma_second,
            GammaParam::Scale => self.gamma_second,
        }
    }

    pub fn prior(&self) -> PosteriorState {
        PosteriorState::new(self.prior_mean, self.prior_count).expect("validated prior")
    }

    /// Horizon for a DR surface serving this benchmark: every arm keeps a
    /// finite index through warm-up plus all policy-driven plays.
    pub fn surface_horizon(&self) -> usize {
        self.warmup + self.horizon
    }

    /// DR policy with a surface built for this benchmark.
    pub fn dr_policy(&self, k: f64, beta: f64) -> Result<PolicySpec> {
        let config = IndexConfig::new(k, beta, self.surface_horizon(), self.prior_count)?;
        Ok(PolicySpec::Dr {
            surface: Arc::new(build_surface(&config)),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    theta: Vec<f64>,
    theta_star: f64,
}

impl Scenario {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::domain("scenario needs at least one arm"));
        }
        if let Some(bad) = theta.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::domain(format!(
                "success probability {bad} outside [0, 1]"
            )));
        }
        let theta_star = theta.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self { theta, theta_star })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_star(&self) -> f64 {
        self.theta_star
    }

    pub fn arms(&self) -> usize {
        self.theta.len()
    }
}

/// Draws `a, b ~ Gamma` i.i.d., then each arm's probability from `Beta(a, b)`.
pub fn draw_scenario<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Scenario {
    let scale = config.gamma_scale();
    let a = gamma_draw(rng, config.gamma_shape, scale);
    let b = gamma_draw(rng, config.gamma_shape, scale);
    let theta = (0..config.arms).map(|_| beta_draw(rng, a, b)).collect();
    Scenario::new(theta).expect("Beta draws lie in (0, 1)")
}

/// Generators for one episode: one outcome stream per arm and one stream
/// for the policy's own randomness.
pub struct EpisodeRng {
    outcomes: Vec<ChaCha8Rng>,
    policy: ChaCha8Rng,
}

impl EpisodeRng {
    pub fn new(seed: u64, scenario: u64, policy: u64, arms: usize) -> Self {
        Self {
            outcomes: (0..arms as u64)
                .map(|arm| stream(seed, StreamRole::Outcome, scenario, arm))
                .collect(),
            policy: stream(seed, StreamRole::Policy, scenario, policy),
        }
    }

    /// Bernoulli outcome of the next pull of `arm`; `true` is a unit cost.
    fn pull(&mut self, arm: usize, theta: f64) -> bool {
        uniform_open(&mut self.outcomes[arm]) < theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub arm: usize,
    pub regret: f64,
    pub suboptimal: u64,
}

/// Regret of one episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretTrace {
    /// Cumulative expected-expected regret `sum (theta_chosen - theta_star)`.
    pub regret: f64,
    /// Number of plays of an arm whose probability differs from `theta_star`.
    pub suboptimal: u64,
    /// Policy-driven plays of each arm (warm-up excluded).
    pub pulls: Vec<u64>,
    /// Per-step running totals, when requested.
    pub steps: Option<Vec<TraceStep>>,
}

impl RegretTrace {
    fn new(arms: usize, keep_steps: bool) -> Self {
        Self {
            pulls: vec![0; arms],
            steps: keep_steps.then(Vec::new),
            ..Self::default()
        }
    }

    /// Charges one play of `arm`.
    pub fn record(&mut self, scenario: &Scenario, arm: usize) {
        let theta = scenario.theta()[arm];
        self.regret += theta - scenario.theta_star();
        if theta != scenario.theta_star() {
            self.suboptimal += 1;
        }
        self.pulls[arm] += 1;
        if let Some(steps) = &mut self.steps {
            steps.push(TraceStep {
                arm,
                regret: self.regret,
                suboptimal: self.suboptimal,
            });
        }
    }

    /// Totals for a fixed sequence of plays.
    pub fn from_plays(scenario: &Scenario, plays: &[usize]) -> Self {
        let mut trace = Self::new(scenario.arms(), true);
        for &arm in plays {
            trace.record(scenario, arm);
        }
        trace
    }
}

/// Warm-up followed by `config.horizon` policy-driven plays. Warm-up trials
/// update the posteriors but are not charged.
pub fn run_episode(
    policy: &PolicySpec,
    scenario: &Scenario,
    config: &ScenarioConfig,
    rng: &mut EpisodeRng,
    keep_steps: bool,
) -> Result<RegretTrace> {
    if rng.outcomes.len() != scenario.arms() {
        return Err(Error::domain(format!(
            "generator has {} arm streams for a {}-arm scenario",
            rng.outcomes.len(),
            scenario.arms()
        )));
    }
    let mut arms = vec![ArmState::new(config.prior()); scenario.arms()];
    for (m, arm) in arms.iter_mut().enumerate() {
        for _ in 0..config.warmup {
            arm.observe(rng.pull(m, scenario.theta()[m]));
        }
    }
    let mut trace = RegretTrace::new(scenario.arms(), keep_steps);
    for _ in 0..config.horizon {
        let indices = policy.indices(&arms, &mut rng.policy)?;
        let chosen = select_arm(indices, &mut rng.policy)?.chosen;
        trace.record(scenario, chosen);
        let outcome = rng.pull(chosen, scenario.theta()[chosen]);
        arms[chosen].observe(outcome);
    }
    Ok(trace)
}

/// Results of a paired batch: `episodes[s][j]` is policy `j` on scenario `s`.
#[derive(Debug, Clone)]
pub struct Batch {
    pub config: ScenarioConfig,
    pub labels: Vec<String>,
    pub scenarios: Vec<Scenario>,
    pub episodes: Vec<Vec<RegretTrace>>,
}

impl Batch {
    pub fn n_sims(&self) -> usize {
        self.scenarios.len()
    }

    /// Final regret of policy `j` in every episode.
    pub fn regrets(&self, j: usize) -> Vec<f64> {
        self.episodes.iter().map(|row| row[j].regret).collect()
    }

    /// Final suboptimal-play count of policy `j` in every episode.
    pub fn suboptimal(&self, j: usize) -> Vec<f64> {
        self.episodes
            .iter()
            .map(|row| row[j].suboptimal as f64)
            .collect()
    }

    pub fn summaries(&self) -> Vec<PolicySummary> {
        self.labels
            .iter()
            .enumerate()
            .map(|(j, label)| PolicySummary {
                policy: label.clone(),
                regret: Summary::of(&self.regrets(j)),
                suboptimal: Summary::of(&self.suboptimal(j)),
            })
            .collect()
    }

    pub fn table(&self) -> ResultsTable {
        ResultsTable {
            header: self.header(),
            ..ResultsTable::from_summaries(&self.summaries(), self.n_sims(), self.config.seed)
        }
    }
}

/// Runs every policy on the same `n_sims` scenarios. Episodes run in
/// parallel; the result depends only on the inputs.
pub fn run_batch(
    policies: &[PolicySpec],
    config: &ScenarioConfig,
    n_sims: usize,
    keep_steps: bool,
) -> Result<Batch> {
    config.validate()?;
    if n_sims == 0 {
        return Err(Error::domain("need at least one simulation"));
    }
    for policy in policies {
        policy.validate()?;
        if let PolicySpec::Dr { surface } = policy {
            if surface.config().n0() != config.prior_count {
                return Err(Error::domain(format!(
                    "surface prior count {} differs from the scenario prior count {}",
                    surface.config().n0(),
                    config.prior_count
                )));
            }
        }
    }
    let runs: Vec<(Scenario, Vec<RegretTrace>)> = (0..n_sims as u64)
        .into_par_iter()
        .map(|s| {
            let mut scenario_rng = stream(config.seed, StreamRole::Scenario, s, 0);
            let scenario = draw_scenario(config, &mut scenario_rng);
            let traces = policies
                .iter()
                .enumerate()
                .map(|(j, policy)| {
                    let mut rng = EpisodeRng::new(config.seed, s, j as u64, config.arms);
                    run_episode(policy, &scenario, config, &mut rng, keep_steps)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((scenario, traces))
        })
        .collect::<Result<_>>()?;
    let (scenarios, episodes) = runs.into_iter().unzip();
    Ok(Batch {
        config: config.clone(),
        labels: policies.iter().map(ToString::to_string).collect(),
        scenarios,
        episodes,
    })
}
