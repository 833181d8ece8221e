use statrs::function::beta::checked_beta_reg;

use crate::error::{Error, Result};

/// Target accuracy of the quantile solver, measured on the CDF scale.
pub const QUANTILE_TOL: f64 = 1e-10;

/// Hard cap on bisection steps. Bit-level bisection over `[0, 1]` needs at
/// most 62, so hitting this cap signals a broken CDF.
pub const QUANTILE_MAX_ITER: usize = 200;

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(Error::domain(format!(
            "incomplete beta shapes must be positive and finite, got a={a}, b={b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!(
            "incomplete beta argument must lie in [0, 1], got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let value = checked_beta_reg(a, b, x).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(value.clamp(0.0, 1.0))
}

/// Quantile of `Beta(a, b)` at level `q`.
///
/// Bisects over the bit patterns of non-negative doubles rather than over
/// their values, so the bracket shrinks to two adjacent floats regardless
/// of how close to 0 or 1 the quantile sits. Of the two, the one whose CDF
/// is closer to `q` is returned (ties go to the smaller). The comparison
/// sequence depends on `q` only through `I(mid) < q`, which keeps the map
/// monotone in `q`.
pub fn beta_quantile(a: f64, b: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!(
            "quantile level must lie in (0, 1), got {q}"
        )));
    }
    // Validates the shapes once up front.
    reg_inc_beta(a, b, 0.5)?;

    // Symmetric shapes: the median is exactly 1/2 and upper quantiles mirror
    // lower ones, which CDF rounding alone does not guarantee.
    if a == b {
        if q == 0.5 {
            return Ok(0.5);
        }
        if q > 0.5 {
            return Ok(1.0 - bisect_quantile(a, b, 1.0 - q)?);
        }
    }
    bisect_quantile(a, b, q)
}

fn bisect_quantile(a: f64, b: f64, q: f64) -> Result<f64> {
    let mut lo = 0.0_f64.to_bits();
    let mut hi = 1.0_f64.to_bits();
    let mut cdf_lo = 0.0;
    let mut cdf_hi = 1.0;
    let mut iterations = 0;
    while hi - lo > 1 {
        if iterations == QUANTILE_MAX_ITER {
            return Err(Error::Numerical(format!(
                "beta quantile did not converge for a={a}, b={b}, q={q}"
            )));
        }
        iterations += 1;
        let mid = lo + (hi - lo) / 2;
        let cdf = reg_inc_beta(a, b, f64::from_bits(mid))?;
        if cdf < q {
            lo = mid;
            cdf_lo = cdf;
        } else {
            hi = mid;
            cdf_hi = cdf;
        }
    }
    if q - cdf_lo <= cdf_hi - q {
        Ok(f64::from_bits(lo))
    } else {
        Ok(f64::from_bits(hi))
    }
}
