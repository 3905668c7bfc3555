//! Scalar special functions used by the closed-form slot and power updates.
//!
//! `rate_slope` is the derivative of the perspective rate `t·log2(1 + c/t)`
//! with respect to `t`, expressed in the SNR `x = c/t`. Its inverse maps a
//! marginal time price back to the SNR that attains it and is evaluated
//! through the principal branch of the Lambert-W function.

use std::f64::consts::{E, LN_2};

use crate::error::{Error, Result};

/// `-1/e`, the branch point of the Lambert-W function.
pub const BRANCH_POINT: f64 = -1.0 / E;

/// Slack accepted below the branch point before reporting a domain error.
const BRANCH_TOL: f64 = 1e-15;

/// Inputs closer than this to the branch point return exactly `-1`.
const BRANCH_SNAP: f64 = 1e-12;

/// Negative `y` with magnitude below this is treated as zero by
/// [`rate_slope_inv`].
const NEG_CLAMP: f64 = 1e-14;

const HALLEY_MAX_ITERS: usize = 64;

/// Principal branch `W0` of the Lambert-W function on `[-1/e, inf)`.
///
/// Halley iteration on `w·e^w - x` started from a branch-point series for
/// `x` near `-1/e` and from Winitzki's logarithmic approximation elsewhere.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < BRANCH_POINT - BRANCH_TOL {
        return Err(Error::Domain {
            func: "lambert_w0",
            value: x,
            expected: "x >= -1/e",
        });
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if x - BRANCH_POINT <= BRANCH_SNAP {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }

    let mut w = initial_guess(x);
    for _ in 0..HALLEY_MAX_ITERS {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        let next = w - step;
        if (next - w).abs() <= 4.0 * f64::EPSILON * next.abs().max(1e-300) {
            w = next;
            break;
        }
        w = next;
    }
    Ok(w.max(-1.0))
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        // Series in p = sqrt(2(e·x + 1)) around the branch point.
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l = x.ln_1p();
        l * (1.0 - (1.0 + l).ln() / (2.0 + l))
    }
}

/// `F(x) = [ln(1+x) - x/(1+x)] / ln 2`, the marginal rate of slot time at
/// SNR `x`.
pub fn rate_slope(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain {
            func: "rate_slope",
            value: x,
            expected: "x >= 0",
        });
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    // ln(1+x) - x/(1+x) loses every digit for small x; use the series there.
    let v = if x < 1e-4 {
        // x^2/2 - 2x^3/3 + 3x^4/4 - ...
        x * x * (0.5 - x * (2.0 / 3.0 - x * 0.75))
    } else {
        x.ln_1p() - x / (1.0 + x)
    };
    Ok(v / LN_2)
}

/// Inverse of [`rate_slope`]: the SNR `x >= 0` with `F(x) = y`.
///
/// Evaluated as `exp(W0(-exp(-(1 + y ln2))) + 1 + y ln2) - 1`.
pub fn rate_slope_inv(y: f64) -> Result<f64> {
    if y.is_nan() || y < -NEG_CLAMP {
        return Err(Error::Domain {
            func: "rate_slope_inv",
            value: y,
            expected: "y >= 0",
        });
    }
    let y = y.max(0.0);
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let a = 1.0 + y * LN_2;
    let w = lambert_w0(-(-a).exp())?;
    Ok((w + a).exp_m1().max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain Newton on w·e^w = x, kept apart from the Halley path.
    fn newton_w(x: f64) -> f64 {
        let mut w = if x > 1.0 { x.ln() } else { 0.5 };
        for _ in 0..200 {
            let ew = w.exp();
            w -= (w * ew - x) / (ew * (w + 1.0));
        }
        w
    }

    /// Bisection inverse of F, independent of the Lambert-W route.
    fn bisect_inv(y: f64) -> f64 {
        let f = |x: f64| ((1.0 + x).ln() - x / (1.0 + x)) / LN_2;
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while f(hi) < y {
            hi *= 2.0;
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn w_fixed_points() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert_eq!(lambert_w0(BRANCH_POINT).unwrap(), -1.0);
        let omega = newton_w(1.0);
        assert!((omega - 0.567_143_290_409_783_8).abs() < 1e-15);
        let w = lambert_w0(1.0).unwrap();
        assert!((w - omega).abs() <= 1e-12 * omega);
    }

    #[test]
    fn w_matches_newton_oracle() {
        for &x in &[-0.3, -0.1, 1e-8, 0.5, 2.0, 10.0, 1e3, 1e6] {
            let w = lambert_w0(x).unwrap();
            let o = newton_w(x);
            assert!(
                (w - o).abs() <= 1e-12 * o.abs().max(1e-3),
                "x={x}: {w} vs {o}"
            );
        }
    }

    #[test]
    fn w_domain() {
        assert!(lambert_w0(-0.5).is_err());
        assert!(lambert_w0(f64::NAN).is_err());
        // within the accepted slack below the branch point
        assert_eq!(lambert_w0(BRANCH_POINT - 1e-16).unwrap(), -1.0);
    }

    #[test]
    fn rate_slope_values() {
        assert_eq!(rate_slope(0.0).unwrap(), 0.0);
        let one = 1.0 - 1.0 / (2.0 * LN_2);
        assert!((rate_slope(1.0).unwrap() - one).abs() < 1e-15);
        assert!((one - 0.278_652).abs() < 1e-6);
        let ten = (11.0_f64.ln() - 10.0 / 11.0) / LN_2;
        assert!((rate_slope(10.0).unwrap() - ten).abs() < 1e-14);
        assert!((ten - 2.147_891).abs() < 1e-6);
        assert!(rate_slope(-1e-3).is_err());
    }

    #[test]
    fn rate_slope_series_is_continuous() {
        let below = rate_slope(1e-4 * (1.0 - 1e-12)).unwrap();
        let above = rate_slope(1e-4).unwrap();
        assert!((below - above).abs() <= 1e-9 * above);
    }

    #[test]
    fn inverse_values() {
        assert_eq!(rate_slope_inv(0.0).unwrap(), 0.0);
        assert_eq!(rate_slope_inv(-1e-15).unwrap(), 0.0);
        assert!(rate_slope_inv(-1e-6).is_err());
        let x = rate_slope_inv(rate_slope(1.0).unwrap()).unwrap();
        assert!((x - 1.0).abs() < 1e-9);
        let x20 = rate_slope_inv(20.0).unwrap();
        assert!((rate_slope(x20).unwrap() - 20.0).abs() <= 1e-9 * 20.0);
        let o = bisect_inv(20.0);
        assert!((x20 - o).abs() <= 1e-9 * o);
    }

    #[test]
    fn inverse_matches_bisection_oracle() {
        for &y in &[1e-6, 1e-3, 0.1, 0.5, 2.0, 7.5, 30.0] {
            let x = rate_slope_inv(y).unwrap();
            let o = bisect_inv(y);
            assert!((x - o).abs() <= 1e-8 * o, "y={y}: {x} vs {o}");
        }
    }
}
