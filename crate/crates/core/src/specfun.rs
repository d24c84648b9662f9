//! Double-precision special functions used outside the high-precision
//! series engine: half-integer gamma values, digamma and trigamma.

use crate::error::{Error, Result};
use std::f64::consts::PI;

const SQRT_PI: f64 = 1.772_453_850_905_516;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Past this order `Γ(n/2)` overflows an `f64`.
const HALF_INT_OVERFLOW: u32 = 343;

/// `Γ(n/2)` for a positive integer `n`.
///
/// Values beyond `f64` range come back as `+∞`; use
/// [`ln_gamma_half_integer`] there.
///
/// ```
/// use imt_neuron::specfun::gamma_half_integer;
/// let pi: f64 = std::f64::consts::PI;
/// assert!((gamma_half_integer(1).unwrap() - pi.sqrt()).abs() < 1e-15);
/// assert_eq!(gamma_half_integer(2).unwrap(), 1.0);
/// assert!((gamma_half_integer(3).unwrap() - pi.sqrt() / 2.0).abs() < 1e-15);
/// ```
pub fn gamma_half_integer(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("gamma_half_integer needs n >= 1".into()));
    }
    if n >= HALF_INT_OVERFLOW {
        return Ok(f64::INFINITY);
    }
    let (mut value, mut k) = if n % 2 == 0 { (1.0, 2) } else { (SQRT_PI, 1) };
    while k < n {
        value *= k as f64 / 2.0;
        k += 2;
    }
    Ok(value)
}

/// `ln Γ(n/2)` for a positive integer `n`, accurate for any size of `n`.
pub fn ln_gamma_half_integer(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("ln_gamma_half_integer needs n >= 1".into()));
    }
    if n < 60 {
        return Ok(gamma_half_integer(n)?.ln());
    }
    Ok(ln_gamma_large(n as f64 / 2.0))
}

/// Stirling series for `ln Γ(x)`, good to machine precision for `x >= 30`.
fn ln_gamma_large(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0))));
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series
}

/// The digamma function `ψ(x) = Γ'(x)/Γ(x)` for `x > 0`.
///
/// Small arguments are shifted up past 20 and the asymptotic expansion is
/// applied there; the shift is then undone by recurrence.
///
/// ```
/// use imt_neuron::specfun::digamma;
/// let euler_gamma = 0.577_215_664_901_532_9;
/// assert!((digamma(1.0).unwrap() + euler_gamma).abs() < 1e-15);
/// ```
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("digamma needs x > 0, got {x}")));
    }
    if x == 1.0 {
        return Ok(-EULER_GAMMA);
    }
    let mut shift = 0.0;
    let mut y = x;
    while y < 20.0 {
        shift += 1.0 / y;
        y += 1.0;
    }
    let inv2 = 1.0 / (y * y);
    // Bernoulli terms B_2k / (2k y^2k) for k = 1..7.
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    Ok(y.ln() - 0.5 / y - tail - shift)
}

/// The trigamma function `ψ'(x)` for `x > 0`.
pub fn trigamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("trigamma needs x > 0, got {x}")));
    }
    let mut shift = 0.0;
    let mut y = x;
    while y < 20.0 {
        shift += 1.0 / (y * y);
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let tail = inv
        + 0.5 * inv2
        + inv * inv2
            * (1.0 / 6.0
                - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))));
    Ok(tail + shift)
}
