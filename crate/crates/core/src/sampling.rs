//! Gamma and Beta samplers that work in log space.
//!
//! Shapes as small as 0.001 push Gamma draws below the smallest double, so a
//! Beta draw formed as `X / (X + Y)` from raw draws collapses to 0 or NaN.
//! Keeping `ln X` and `ln Y` and taking a logistic of their difference does not.
//! All uniforms come from [`uniform_open`], so a generator that returns a
//! constant word yields a fixed, reproducible draw.

use std::f64::consts::TAU;

use rand::distributions::Open01;
use rand::Rng;

/// Uniform draw on the open interval `(0, 1)`.
pub fn uniform_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// Standard normal draw by the Box-Muller transform.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let radius = (-2.0 * uniform_open(rng).ln()).sqrt();
    radius * (TAU * uniform_open(rng)).cos()
}

/// Logarithm of a `Gamma(shape, 1)` draw.
///
/// Marsaglia-Tsang squeeze for `shape >= 1`. Smaller shapes are boosted:
/// `G(a) = G(a + 1) U^(1/a)`.
pub fn ln_gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    assert!(
        shape > 0.0 && shape.is_finite(),
        "gamma shape must be positive, got {shape}"
    );
    if shape < 1.0 {
        let boost = uniform_open(rng).ln() / shape;
        return ln_gamma_draw(rng, shape + 1.0) + boost;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let ln_v = 3.0 * v.ln();
        let u = uniform_open(rng);
        if u.ln() < 0.5 * x * x + d - d * ln_v.exp() + d * ln_v {
            return d.ln() + ln_v;
        }
    }
}

/// `Gamma(shape, scale)` draw.
pub fn gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    scale * ln_gamma_draw(rng, shape).exp()
}

/// `Beta(a, b)` draw, always strictly inside `(0, 1)`.
pub fn beta_draw<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let ln_x = ln_gamma_draw(rng, a);
    let ln_y = ln_gamma_draw(rng, b);
    // x / (x + y) = 1 / (1 + exp(ln y - ln x)).
    let draw = 1.0 / (1.0 + (ln_y - ln_x).exp());
    draw.clamp(f64::from_bits(1), 1.0 - f64::EPSILON / 2.0)
}
