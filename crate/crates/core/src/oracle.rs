//! Independent checks on the series engine.
//!
//! Nothing here touches the high-precision series code: the Siegert
//! integrals are evaluated by double-precision adaptive quadrature and the
//! Monte Carlo estimator integrates the unit OU process directly.
//!
//! For the unit process `dx = -x dt + √2 dw` started at `x0` below `S`,
//!
//! ```text
//! τ1 = ∫_{x0}^{S} h(z) dz,                 h(z) = √(2π) e^{z²/2} Φ(z)
//! τ2 = τ1² + 2 ∫_{x0}^{S} e^{z²/2} K(z) dz,  K(z) = 2π ∫_{-∞}^{z} Φ(y)² e^{y²/2} dy
//! ```

use crate::error::{Error, Result};
use crate::quad::integrate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// `e^{x²} erfc(x)` without overflow for large positive `x`.
fn erfcx(x: f64) -> f64 {
    if x < 2.0 {
        return (x * x).exp() * erfc(x);
    }
    // Laplace continued fraction, evaluated bottom-up; sixty levels reach
    // full double precision from x = 2 onward.
    let mut t = x;
    for n in (1..=60).rev() {
        t = x + 0.5 * f64::from(n) / t;
    }
    1.0 / (PI.sqrt() * t)
}

/// `√(2π) e^{z²/2} Φ(z)`, the derivative of `φ1`.
fn h(z: f64) -> f64 {
    if z >= 0.0 {
        SQRT_2PI * (0.5 * z * z).exp() * 0.5 * erfc(-z * FRAC_1_SQRT_2)
    } else {
        SQRT_2PI * 0.5 * erfcx(-z * FRAC_1_SQRT_2)
    }
}

/// `e^{z²/2} K(z)` evaluated without forming either factor on its own.
fn scaled_k(z: f64) -> f64 {
    // Φ(y)² e^{(z² - y²)/2} for y < 0 written through erfcx; for y ≥ 0
    // directly. The integrand falls like e^{-d²/2} a distance d below min(z, 0).
    let integrand = |y: f64| {
        let half_z2 = 0.5 * z * z;
        if y < 0.0 {
            let g = 0.5 * erfcx(-y * FRAC_1_SQRT_2);
            g * g * (half_z2 - 0.5 * y * y).exp()
        } else {
            let p = 0.5 * erfc(-y * FRAC_1_SQRT_2);
            p * p * (half_z2 - 0.5 * y * y).exp() * (y * y).exp()
        }
    };
    let lo = z.min(0.0) - 14.0;
    let mut total = 0.0;
    if z > 0.0 {
        total += integrate(integrand, lo, 0.0, 0.0, 1e-14, 400).value;
        total += integrate(integrand, 0.0, z, 0.0, 1e-14, 400).value;
    } else {
        total += integrate(integrand, lo, z, 0.0, 1e-14, 400).value;
    }
    2.0 * PI * total
}

fn check(s: f64, x0: f64) -> Result<()> {
    if !(s.is_finite() && x0.is_finite()) || s.abs() > 30.0 || x0.abs() > 30.0 {
        return Err(Error::Domain(format!("quadrature oracle needs |S|, |x0| <= 30, got S = {s}, x0 = {x0}")));
    }
    if x0 > s {
        return Err(Error::Ordering { s, x0 });
    }
    Ok(())
}

/// Mean first-passage time of the unit OU process by quadrature.
///
/// ```
/// use imt_neuron::oracle::siegert_tau1;
/// let t = siegert_tau1(1.5, -1.0).unwrap();
/// assert!((t - 5.516_781_878_707_372).abs() < 1e-10);
/// ```
pub fn siegert_tau1(s: f64, x0: f64) -> Result<f64> {
    check(s, x0)?;
    Ok(integrate(h, x0, s, 0.0, 1e-14, 2000).value)
}

/// Second moment of the unit OU first-passage time by nested quadrature.
pub fn siegert_tau2(s: f64, x0: f64) -> Result<f64> {
    let t1 = siegert_tau1(s, x0)?;
    let var = 2.0 * integrate(scaled_k, x0, s, 0.0, 1e-13, 2000).value;
    Ok(t1 * t1 + var)
}

/// Monte Carlo estimate of the first three first-passage moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McFpt {
    pub moments: [f64; 3],
    pub std_err: [f64; 3],
    pub trials: usize,
}

impl McFpt {
    /// Distance from `value` to the `m`-th moment in standard errors.
    pub fn z_score(&self, m: usize, value: f64) -> f64 {
        (self.moments[m - 1] - value) / self.std_err[m - 1]
    }
}

const BLOCK: usize = 1024;

/// One passage of the unit OU process with Euler-Maruyama steps and a
/// Brownian-bridge test for crossings between grid points.
fn unit_passage(s: f64, x0: f64, dt: f64, rng: &mut ChaCha8Rng) -> f64 {
    let noise = (2.0 * dt).sqrt();
    let decay = 1.0 - dt;
    let mut x = x0;
    let mut n: u64 = 0;
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let next = decay * x + noise * z;
        n += 1;
        if next >= s {
            return n as f64 * dt;
        }
        let p = (-(s - x) * (s - next) / dt).exp();
        if rand::Rng::random::<f64>(rng) < p {
            return n as f64 * dt;
        }
        x = next;
    }
}

/// Raw first-passage moments of the unit OU process from `trials`
/// independent paths at step `dt`. Trial `k` uses stream `k` of a ChaCha8
/// generator keyed by `seed`, so the result does not depend on threading.
pub fn mc_unit_fpt(s: f64, x0: f64, dt: f64, trials: usize, seed: u64) -> Result<McFpt> {
    if !(dt > 0.0 && dt < 0.5) {
        return Err(Error::InvalidParameter(format!("step must lie in (0, 0.5), got {dt}")));
    }
    if trials < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: trials });
    }
    if x0 >= s {
        return Err(Error::Ordering { s, x0 });
    }
    let blocks: Vec<[f64; 6]> = (0..trials.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = [0.0; 6];
            for k in b * BLOCK..((b + 1) * BLOCK).min(trials) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let t = unit_passage(s, x0, dt, &mut rng);
                let mut p = 1.0;
                for slot in acc.iter_mut() {
                    p *= t;
                    *slot += p;
                }
            }
            acc
        })
        .collect();
    let mut sums = [0.0; 6];
    for block in &blocks {
        for (s, b) in sums.iter_mut().zip(block) {
            *s += b;
        }
    }
    let n = trials as f64;
    let mean = |j: usize| sums[j] / n;
    let mut moments = [0.0; 3];
    let mut std_err = [0.0; 3];
    for m in 0..3 {
        moments[m] = mean(m);
        let second = mean(2 * m + 1);
        std_err[m] = ((second - moments[m] * moments[m]).max(0.0) / (n - 1.0)).sqrt();
    }
    Ok(McFpt { moments, std_err, trials })
}

/// Richardson extrapolation `2 M(dt/2) - M(dt)` of [`mc_unit_fpt`], removing
/// the first-order step bias. The two runs use independent seeds.
pub fn mc_unit_fpt_extrapolated(s: f64, x0: f64, dt: f64, trials: usize, seed: u64) -> Result<McFpt> {
    let coarse = mc_unit_fpt(s, x0, dt, trials, seed)?;
    let fine = mc_unit_fpt(s, x0, 0.5 * dt, trials, seed.wrapping_add(0x9e37_79b9_7f4a_7c15))?;
    let mut moments = [0.0; 3];
    let mut std_err = [0.0; 3];
    for m in 0..3 {
        moments[m] = 2.0 * fine.moments[m] - coarse.moments[m];
        std_err[m] = (4.0 * fine.std_err[m].powi(2) + coarse.std_err[m].powi(2)).sqrt();
    }
    Ok(McFpt { moments, std_err, trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfcx_reference_values() {
        for (x, want) in [
            (0.5, 0.615_690_344_192_925_87),
            (2.0, 0.255_395_676_310_505_74),
            (5.0, 0.110_704_637_733_068_63),
            (20.0, 0.028_174_348_741_051_319),
            (24.999, 0.022_550_473_014_041_867),
            (25.0, 0.022_549_572_432_641_359),
        ] {
            let got = erfcx(x);
            assert!((got / want - 1.0).abs() < 1e-13, "x = {x}: {got}");
        }
    }

    #[test]
    fn siegert_mean_known_point() {
        // τ1(0 → S) for small S behaves like √(π/2)·S.
        let t = siegert_tau1(1e-4, 0.0).unwrap();
        assert!((t / 1e-4 - (PI / 2.0).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn siegert_second_moment_reference() {
        let t2 = siegert_tau2(1.5, -1.0).unwrap();
        assert!((t2 / 53.627_490_424_848_15 - 1.0).abs() < 1e-10, "{t2}");
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let a = mc_unit_fpt(0.5, -0.5, 0.01, 3000, 7).unwrap();
        let b = mc_unit_fpt(0.5, -0.5, 0.01, 3000, 7).unwrap();
        assert_eq!(a, b);
    }
}
