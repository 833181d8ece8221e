use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nle::{
    credible_set, dr_one_step, posterior_update, CredibleModel, PosteriorState, ThetaInterval,
};

use super::{interpolate, locate, uniform_grid};

/// Upper bound on the Bernoulli cost. The index saturates here once an arm
/// has exhausted its horizon.
pub const COST_BOUND: f64 = 1.0;

const DEFAULT_P_GRID: usize = 101;
const DEFAULT_GAMMA_GRID: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexConfig {
    model: CredibleModel,
    beta: f64,
    horizon: usize,
    p_points: usize,
    gamma_points: usize,
}

impl IndexConfig {
    /// Config with the default 101-point `p` grid and 201-point `gamma` grid.
    pub fn new(k: f64, beta: f64, horizon: usize, n0: f64) -> Result<Self> {
        Self::with_grids(k, beta, horizon, n0, DEFAULT_P_GRID, DEFAULT_GAMMA_GRID)
    }

    pub fn with_grids(
        k: f64,
        beta: f64,
        horizon: usize,
        n0: f64,
        p_points: usize,
        gamma_points: usize,
    ) -> Result<Self> {
        let model = CredibleModel::new(k, n0)?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::domain(format!(
                "discount must lie in (0, 1), got {beta}"
            )));
        }
        if horizon == 0 {
            return Err(Error::domain("horizon must be at least 1"));
        }
        if p_points < 2 || gamma_points < 2 {
            return Err(Error::domain(format!(
                "grids need at least two points, got Np={p_points}, Ngamma={gamma_points}"
            )));
        }
        if gamma_points > u32::MAX as usize {
            return Err(Error::domain("gamma grid too large"));
        }
        Ok(Self {
            model,
            beta,
            horizon,
            p_points,
            gamma_points,
        })
    }

    pub fn model(&self) -> CredibleModel {
        self.model
    }

    pub fn k(&self) -> f64 {
        self.model.k()
    }

    pub fn n0(&self) -> f64 {
        self.model.n0()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn p_points(&self) -> usize {
        self.p_points
    }

    pub fn gamma_points(&self) -> usize {
        self.gamma_points
    }

    pub fn p_grid(&self) -> Vec<f64> {
        uniform_grid(self.p_points)
    }

    pub fn gamma_grid(&self) -> Vec<f64> {
        uniform_grid(self.gamma_points)
    }

    pub fn gamma_spacing(&self) -> f64 {
        1.0 / (self.gamma_points - 1) as f64
    }

    /// Posterior state of a grid cell at `stage`.
    pub fn state_at(&self, p: f64, stage: usize) -> Result<PosteriorState> {
        PosteriorState::new(p.clamp(0.0, 1.0), self.n0() + stage as f64)
    }
}

/// Stage value functions `V^gamma_t` for one candidate index value, sampled on
/// the `p` grid for `t = 0..=T`. Entry `T` is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTable {
    gamma: f64,
    config: IndexConfig,
    values: Vec<Vec<f64>>,
}

impl StageTable {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    pub fn stage(&self, t: usize) -> &[f64] {
        &self.values[t]
    }

    /// `V^gamma_t(p)` by linear interpolation on the `p` grid.
    pub fn value(&self, t: usize, p: f64) -> f64 {
        interpolate(&self.values[t], p)
    }
}

/// Tabulated index `gamma_{k, beta, T - t}(p, 1 / sqrt(n0 + t))` for stages
/// `t = 0..T`, sampled on the `p` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSurface {
    config: IndexConfig,
    values: Vec<Vec<f64>>,
}

impl IndexSurface {
    pub fn from_parts(config: IndexConfig, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != config.horizon() {
            return Err(Error::domain(format!(
                "surface needs {} stages, got {}",
                config.horizon(),
                values.len()
            )));
        }
        for (t, row) in values.iter().enumerate() {
            if row.len() != config.p_points() {
                return Err(Error::domain(format!(
                    "stage {t} has {} points, expected {}",
                    row.len(),
                    config.p_points()
                )));
            }
            if let Some(bad) = row.iter().find(|v| !(0.0..=COST_BOUND).contains(*v)) {
                return Err(Error::domain(format!(
                    "stage {t} holds index value {bad} outside [0, {COST_BOUND}]"
                )));
            }
        }
        Ok(Self { config, values })
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    pub fn stage(&self, t: usize) -> &[f64] {
        &self.values[t]
    }

    pub fn stages(&self) -> impl Iterator<Item = &[f64]> {
        self.values.iter().map(Vec::as_slice)
    }

    /// Index for an arm with posterior mean `p` and `n` effective observations.
    ///
    /// `n` maps to stage `round(n - n0)`; arms at or past `n0 + T` have no
    /// plays left and get the cost bound.
    pub fn query(&self, p: f64, n: f64) -> f64 {
        let offset = n - self.config.n0();
        if offset >= self.config.horizon() as f64 {
            return COST_BOUND;
        }
        let stage = offset
            .round()
            .clamp(0.0, (self.config.horizon() - 1) as f64) as usize;
        interpolate(&self.values[stage], p)
    }
}

pub fn query_index(surface: &IndexSurface, p: f64, n: f64) -> f64 {
    surface.query(p, n)
}

/// Credible interval and interpolation stencils of both children for one
/// `(stage, p)` grid cell.
#[derive(Debug, Clone, Copy)]
struct Transition {
    theta: ThetaInterval,
    down: (usize, f64),
    up: (usize, f64),
}

/// Everything in the recursion that does not depend on `gamma`.
struct Plan {
    stages: Vec<Vec<Transition>>,
}

impl Plan {
    fn new(config: &IndexConfig) -> Self {
        let grid = config.p_grid();
        let stages = (0..config.horizon())
            .into_par_iter()
            .map(|t| {
                grid.iter()
                    .map(|&p| {
                        let state = config.state_at(p, t).expect("grid states are valid");
                        Transition {
                            theta: credible_set(state, config.model()),
                            down: locate(grid.len(), posterior_update(state, false).p()),
                            up: locate(grid.len(), posterior_update(state, true).p()),
                        }
                    })
                    .collect()
            })
            .collect();
        Self { stages }
    }
}

fn stencil(values: &[f64], (j, w): (usize, f64)) -> f64 {
    if w == 0.0 {
        values[j]
    } else {
        (1.0 - w) * values[j] + w * values[j + 1]
    }
}

/// One-step value of `(h - gamma) + beta V_next(child)` under the cell's
/// credible interval. Outcome 1 carries unit cost.
fn one_step(cell: &Transition, gamma: f64, beta: f64, next: &[f64]) -> f64 {
    let f0 = -gamma + beta * stencil(next, cell.down);
    let f1 = (COST_BOUND - gamma) + beta * stencil(next, cell.up);
    dr_one_step(f0, f1, cell.theta)
}

/// Runs the backward recursion for one `gamma`, handing each stage's
/// unclipped values `U_t` to `visit` from `t = T - 1` down to `0`, and
/// returns the clipped tables `V_t = min(0, U_t)` for `t = 0..=T`.
fn sweep(
    config: &IndexConfig,
    plan: &Plan,
    gamma: f64,
    mut visit: impl FnMut(usize, &[f64]),
) -> Vec<Vec<f64>> {
    let horizon = config.horizon();
    let mut tables = vec![Vec::new(); horizon + 1];
    tables[horizon] = vec![0.0; config.p_points()];
    for t in (0..horizon).rev() {
        let next = &tables[t + 1];
        let unclipped: Vec<f64> = plan.stages[t]
            .iter()
            .map(|cell| one_step(cell, gamma, config.beta(), next))
            .collect();
        visit(t, &unclipped);
        tables[t] = unclipped.into_iter().map(|u| u.min(0.0)).collect();
    }
    tables
}

/// Stage value tables `V^gamma_t` for a single `gamma`.
pub fn stage_backward(gamma: f64, config: &IndexConfig) -> Result<StageTable> {
    if !(0.0..=COST_BOUND).contains(&gamma) {
        return Err(Error::domain(format!(
            "gamma must lie in [0, {COST_BOUND}], got {gamma}"
        )));
    }
    let plan = Plan::new(config);
    Ok(StageTable {
        gamma,
        config: *config,
        values: sweep(config, &plan, gamma, |_, _| {}),
    })
}

/// Initial value `U(gamma, p, 1 / sqrt(n0 + stage))`: the optimal-stopping
/// value of paying `h - gamma` for at least one more play.
pub fn initial_value(p: f64, stage: usize, tables: &StageTable) -> Result<f64> {
    let config = tables.config();
    if stage >= config.horizon() {
        return Err(Error::domain(format!(
            "stage {stage} is past the last playable stage {}",
            config.horizon() - 1
        )));
    }
    let state = config.state_at(p, stage)?;
    let next = tables.stage(stage + 1);
    let size = config.p_points();
    let cell = Transition {
        theta: credible_set(state, config.model()),
        down: locate(size, posterior_update(state, false).p()),
        up: locate(size, posterior_update(state, true).p()),
    };
    Ok(one_step(&cell, tables.gamma(), config.beta(), next))
}

/// Index surface: for every stage and grid `p`, the smallest grid `gamma`
/// whose initial value is nonpositive, or the cost bound if none is.
pub fn build_surface(config: &IndexConfig) -> IndexSurface {
    let plan = Plan::new(config);
    let gammas = config.gamma_grid();
    let width = config.p_points();
    let cells = config.horizon() * width;

    let first_admissible = (0..gammas.len())
        .into_par_iter()
        .fold(
            || vec![u32::MAX; cells],
            |mut best, j| {
                sweep(config, &plan, gammas[j], |t, unclipped| {
                    let row = &mut best[t * width..(t + 1) * width];
                    for (slot, &u) in row.iter_mut().zip(unclipped) {
                        if u <= 0.0 && (j as u32) < *slot {
                            *slot = j as u32;
                        }
                    }
                });
                best
            },
        )
        .reduce(
            || vec![u32::MAX; cells],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = (*x).min(y);
                }
                a
            },
        );

    let values = first_admissible
        .chunks(width)
        .map(|row| {
            row.iter()
                .map(|&j| match j {
                    u32::MAX => COST_BOUND,
                    j => gammas[j as usize],
                })
                .collect()
        })
        .collect();
    IndexSurface {
        config: *config,
        values,
    }
}
