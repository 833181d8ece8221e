use crate::error::{Error, Result};

use super::beta::beta_quantile;

/// Shape parameters at or below this are treated as an improper prior whose
/// mass has collapsed onto the boundary.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// Largest horizon the exact composer will materialize (2^depth leaves).
pub const COMPOSE_MAX_DEPTH: usize = 20;

/// Posterior mean estimate `p` and effective observation count `n` of one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorState {
    p: f64,
    n: f64,
}

impl PosteriorState {
    pub fn new(p: f64, n: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!(
                "posterior mean must lie in [0, 1], got {p}"
            )));
        }
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::domain(format!(
                "observation count must be positive and finite, got {n}"
            )));
        }
        Ok(Self { p, n })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    /// Beta shape parameters `(p n, (1 - p) n)` of the posterior.
    pub fn shapes(&self) -> (f64, f64) {
        (self.p * self.n, (1.0 - self.p) * self.n)
    }
}

/// Credible level `k` and prior pseudo-count `n0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CredibleModel {
    k: f64,
    n0: f64,
}

impl CredibleModel {
    pub fn new(k: f64, n0: f64) -> Result<Self> {
        // k = 1 would ask for the 0 and 1 quantiles, i.e. the whole support.
        if !(0.0..1.0).contains(&k) {
            return Err(Error::domain(format!(
                "credible level must lie in [0, 1), got {k}"
            )));
        }
        if !(n0 > 0.0 && n0.is_finite()) {
            return Err(Error::domain(format!(
                "prior pseudo-count must be positive and finite, got {n0}"
            )));
        }
        Ok(Self { k, n0 })
    }

    pub fn with_level(k: f64) -> Result<Self> {
        Self::new(k, 1.0)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }
}

/// Interval of plausible success probabilities `[lo, hi] ⊆ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaInterval {
    lo: f64,
    hi: f64,
}

impl ThetaInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::domain(format!(
                "theta interval must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(theta: f64) -> Result<Self> {
        Self::new(theta, theta)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, other: &ThetaInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

/// Central credible interval of the Beta posterior at level `k`.
pub fn credible_set(state: PosteriorState, model: CredibleModel) -> ThetaInterval {
    let (a, b) = state.shapes();
    if a <= DEGENERACY_EPS {
        return ThetaInterval { lo: 0.0, hi: 0.0 };
    }
    if b <= DEGENERACY_EPS {
        return ThetaInterval { lo: 1.0, hi: 1.0 };
    }
    let k = model.k();
    // Shapes are positive and both levels lie in (0, 1), so neither call can fail.
    let quantile = |q: f64| beta_quantile(a, b, q).expect("validated Beta shapes and level");
    let lo = quantile(0.5 - 0.5 * k);
    let hi = if k == 0.0 {
        lo
    } else {
        quantile(0.5 + 0.5 * k)
    };
    ThetaInterval { lo, hi: hi.max(lo) }
}

/// `sup_{theta in [lo, hi]} theta f1 + (1 - theta) f0`.
///
/// The objective is affine in theta so only the endpoints are evaluated.
pub fn dr_one_step(f0: f64, f1: f64, theta: ThetaInterval) -> f64 {
    let diff = f1 - f0;
    f0 + (theta.lo * diff).max(theta.hi * diff)
}

pub fn posterior_update(state: PosteriorState, outcome: bool) -> PosteriorState {
    let n = state.n + 1.0;
    let hits = state.p * state.n + if outcome { 1.0 } else { 0.0 };
    PosteriorState {
        p: (hits / n).clamp(0.0, 1.0),
        n,
    }
}

/// Backward composition of one-step operators over the full binary tree of
/// depth `depth`.
///
/// `terminal` receives a complete outcome path. `step(prefix, f0, f1)`
/// aggregates the two child values of the node reached by `prefix`, where
/// `f0` follows outcome `false` and `f1` outcome `true`.
pub fn compose_backward<F, S>(depth: usize, terminal: F, mut step: S) -> Result<f64>
where
    F: Fn(&[bool]) -> f64,
    S: FnMut(&[bool], f64, f64) -> f64,
{
    if depth == 0 {
        return Err(Error::domain("composition depth must be at least 1"));
    }
    if depth > COMPOSE_MAX_DEPTH {
        return Err(Error::Guard(format!(
            "composition depth {depth} exceeds the exact-composer cap {COMPOSE_MAX_DEPTH}"
        )));
    }
    let mut path = vec![false; depth];
    let mut values: Vec<f64> = (0..1usize << depth)
        .map(|leaf| {
            decode_path(leaf, depth, &mut path);
            terminal(&path)
        })
        .collect();
    for level in (0..depth).rev() {
        let next: Vec<f64> = (0..1usize << level)
            .map(|node| {
                decode_path(node, level, &mut path);
                step(&path[..level], values[2 * node], values[2 * node + 1])
            })
            .collect();
        values = next;
    }
    Ok(values[0])
}

/// The `depth`-fold composition of the data-driven one-step expectation
/// started from `start`, with each node's credible interval taken at the
/// posterior reached along its path.
pub fn compose_expectation<F>(
    terminal: F,
    start: PosteriorState,
    model: CredibleModel,
    depth: usize,
) -> Result<f64>
where
    F: Fn(&[bool]) -> f64,
{
    compose_backward(depth, terminal, |prefix, f0, f1| {
        let state = prefix.iter().fold(start, |s, &o| posterior_update(s, o));
        dr_one_step(f0, f1, credible_set(state, model))
    })
}

/// Writes the outcomes of node `index` at `level` into `path[..level]`,
/// first outcome in the most significant bit.
fn decode_path(index: usize, level: usize, path: &mut [bool]) {
    for (t, slot) in path.iter_mut().take(level).enumerate() {
        *slot = (index >> (level - 1 - t)) & 1 == 1;
    }
}
