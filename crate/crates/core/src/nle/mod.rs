//! The data-driven one-step coherent expectation over Bernoulli outcomes and
//! the Beta machinery behind its credible intervals.
//!
//! Outcome `1` is a unit cost and `theta` is always `P(outcome = 1)`.

mod beta;
mod expectation;

pub use beta::{beta_quantile, reg_inc_beta, QUANTILE_MAX_ITER, QUANTILE_TOL};
pub use expectation::{
    compose_backward, compose_expectation, credible_set, dr_one_step, posterior_update,
    CredibleModel, PosteriorState, ThetaInterval, COMPOSE_MAX_DEPTH, DEGENERACY_EPS,
};
