//! Grid computation of the robust Gittins index surface for the Beta-Bernoulli
//! data-driven expectation.
//!
//! Stage `t` of a recursion with horizon `T` describes an arm that has
//! `n = n0 + t` effective observations and `T - t` plays left. One backward
//! pass per candidate index value `gamma` therefore yields every stage of the
//! surface at once.

mod io;
mod surface;
mod tracker;

pub use io::{read_surface, surface_diff_to_csv, surface_from_csv, surface_to_csv, write_surface};
pub use surface::{
    build_surface, initial_value, query_index, stage_backward, IndexConfig, IndexSurface,
    StageTable, COST_BOUND,
};
pub use tracker::{prevailing_update, PrevailingTracker};

/// Uniform grid of `size` points on `[0, 1]`, endpoints included.
pub fn uniform_grid(size: usize) -> Vec<f64> {
    let last = (size - 1) as f64;
    (0..size).map(|i| i as f64 / last).collect()
}

/// Linear interpolation of `values` sampled on the uniform grid of the same
/// length. `p` is clamped to `[0, 1]` and knots are reproduced exactly.
pub(crate) fn interpolate(values: &[f64], p: f64) -> f64 {
    let (j, w) = locate(values.len(), p);
    if w == 0.0 {
        values[j]
    } else {
        (1.0 - w) * values[j] + w * values[j + 1]
    }
}

/// Left knot and weight of the right knot for `p` on a uniform grid.
pub(crate) fn locate(size: usize, p: f64) -> (usize, f64) {
    let last = (size - 1) as f64;
    let x = p.clamp(0.0, 1.0) * last;
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 {
        let j = nearest as usize;
        return if j == size - 1 {
            (j - 1, 1.0)
        } else {
            (j, 0.0)
        };
    }
    let j = (x.floor() as usize).min(size - 2);
    (j, x - j as f64)
}
