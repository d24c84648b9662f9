//! The spike-to-spike law of the IMT threshold `v_h`.
//!
//! A [`ThresholdDist`] is redrawn independently at every metal-to-insulator
//! transition. The analytic side needs its raw moments to very high order,
//! so moments are produced by exact recurrences in arbitrary precision.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rug::Float;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_ur, ln_gamma};
use std::f64::consts::LN_2;

/// Default highest moment order a [`MomentTable`] may hold.
///
/// Tied to the product-series cap: a Cauchy product of two default-length
/// series needs moments to twice the series length.
pub const DEFAULT_MOMENT_CAP: usize = 2 * crate::series::DEFAULT_MAX_TERMS;

/// Threshold law, in volts, or in OU units after [`affine`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdDist {
    Constant { value: f64 },
    Gaussian { mean: f64, std: f64 },
    /// Density proportional to `exp(-|(x - mean) / scale|^kappa)`.
    ExpPower { mean: f64, scale: f64, kappa: f64 },
    /// Finitely many atoms `(value, probability)`.
    Discrete { atoms: Vec<(f64, f64)> },
}

/// Which family [`fit`] should produce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitFamily {
    Gaussian,
    ExpPower { kappa: f64 },
}

impl ThresholdDist {
    /// An EP[κ] law specified by its standard deviation.
    pub fn exp_power_with_std(mean: f64, std: f64, kappa: f64) -> Result<Self> {
        let d = ThresholdDist::ExpPower {
            mean,
            scale: ep_scale_for_std(std, kappa),
            kappa,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            ThresholdDist::Constant { value } if !value.is_finite() => {
                bad(format!("constant threshold {value} is not finite"))
            }
            ThresholdDist::Gaussian { mean, std } if !(std > 0.0) || !mean.is_finite() || !std.is_finite() => {
                bad(format!("gaussian threshold needs finite mean and std > 0, got ({mean}, {std})"))
            }
            ThresholdDist::ExpPower { mean, scale, kappa }
                if !(scale > 0.0) || !mean.is_finite() || !scale.is_finite() =>
            {
                bad(format!("exp-power threshold needs scale > 0, got ({mean}, {scale}, {kappa})"))
            }
            ThresholdDist::ExpPower { kappa, .. } if !(kappa >= 2.0) || !kappa.is_finite() => {
                bad(format!("exp-power shape must be >= 2 (light tails only), got {kappa}"))
            }
            ThresholdDist::Discrete { ref atoms } => {
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                if atoms.is_empty()
                    || atoms.iter().any(|&(x, p)| !x.is_finite() || !(p >= 0.0))
                    || (total - 1.0).abs() > 1e-12
                {
                    bad("discrete threshold needs finite atoms with probabilities summing to 1".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Short label used in result tables, e.g. `gaussian` or `ep3`.
    pub fn label(&self) -> String {
        match *self {
            ThresholdDist::Constant { .. } => "constant".into(),
            ThresholdDist::Gaussian { .. } => "gaussian".into(),
            ThresholdDist::ExpPower { kappa, .. } => format!("ep{kappa}"),
            ThresholdDist::Discrete { .. } => "discrete".into(),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ThresholdDist::Constant { value } => value,
            ThresholdDist::Gaussian { mean, .. } | ThresholdDist::ExpPower { mean, .. } => mean,
            ThresholdDist::Discrete { ref atoms } => atoms.iter().map(|&(x, p)| x * p).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ThresholdDist::Constant { .. } => 0.0,
            ThresholdDist::Gaussian { std, .. } => std * std,
            ThresholdDist::ExpPower { scale, kappa, .. } => {
                scale * scale * (ln_gamma(3.0 / kappa) - ln_gamma(1.0 / kappa)).exp()
            }
            ThresholdDist::Discrete { ref atoms } => {
                let m = self.mean();
                atoms.iter().map(|&(x, p)| p * (x - m) * (x - m)).sum()
            }
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Whether `E[Π φ_{k_i}(X)]` over `factors` φ-factors is finite when `X`
    /// follows this law in OU units. Every `φ_k` grows like `e^{z²/2}`, so a
    /// product of `r` factors needs `E[e^{r X²/2}] < ∞`: bounded laws and
    /// tails lighter than Gaussian always qualify, a Gaussian needs
    /// `r·std² < 1`, and heavier tails never do.
    pub fn phi_product_finite(&self, factors: usize) -> bool {
        let r = factors as f64;
        match *self {
            ThresholdDist::Constant { .. } | ThresholdDist::Discrete { .. } => true,
            ThresholdDist::Gaussian { std, .. } => r * std * std < 1.0,
            ThresholdDist::ExpPower { scale, kappa, .. } if kappa == 2.0 => r * scale * scale < 2.0,
            ThresholdDist::ExpPower { kappa, .. } => kappa > 2.0,
        }
    }

    /// `P(X < x)`.
    pub fn mass_below(&self, x: f64) -> f64 {
        match *self {
            ThresholdDist::Constant { value } => f64::from(u8::from(value < x)),
            ThresholdDist::Gaussian { mean, std } => 0.5 * erfc((mean - x) / (std * std::f64::consts::SQRT_2)),
            ThresholdDist::ExpPower { mean, scale, kappa } => {
                if x == mean {
                    return 0.5;
                }
                let tail = 0.5 * gamma_ur(1.0 / kappa, ((x - mean).abs() / scale).powf(kappa));
                if x <= mean {
                    tail
                } else {
                    1.0 - tail
                }
            }
            ThresholdDist::Discrete { ref atoms } => atoms.iter().filter(|a| a.0 < x).map(|a| a.1).sum(),
        }
    }

    /// Largest value with positive probability (`+∞` for unbounded laws).
    pub fn support_max(&self) -> f64 {
        match *self {
            ThresholdDist::Constant { value } => value,
            ThresholdDist::Discrete { ref atoms } => atoms.iter().map(|a| a.0).fold(f64::NEG_INFINITY, f64::max),
            _ => f64::INFINITY,
        }
    }

    /// One exact draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ThresholdDist::Constant { value } => value,
            ThresholdDist::Gaussian { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            ThresholdDist::ExpPower { mean, scale, kappa } => {
                let g: f64 = Gamma::new(1.0 / kappa, 1.0)
                    .expect("shape validated positive")
                    .sample(rng);
                let magnitude = scale * g.powf(1.0 / kappa);
                if rng.random::<bool>() {
                    mean + magnitude
                } else {
                    mean - magnitude
                }
            }
            ThresholdDist::Discrete { ref atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(x, p) in atoms {
                    acc += p;
                    if u < acc {
                        return x;
                    }
                }
                atoms.last().expect("validated non-empty").0
            }
        }
    }

    /// A draw from the law conditioned on `X > floor`, plus the number of
    /// draws that were thrown away.
    pub fn sample_above<R: Rng + ?Sized>(&self, floor: f64, rng: &mut R) -> (f64, u64) {
        let mut rejected = 0;
        loop {
            let x = self.sample(rng);
            if x > floor {
                return (x, rejected);
            }
            rejected += 1;
            assert!(rejected < 1_000_000, "threshold law has (almost) no mass above {floor}");
        }
    }
}

/// EP scale parameter giving standard deviation `std` at shape `kappa`.
pub fn ep_scale_for_std(std: f64, kappa: f64) -> f64 {
    std * (0.5 * (ln_gamma(1.0 / kappa) - ln_gamma(3.0 / kappa))).exp()
}

/// The law of `a * X + b`.
///
/// ```
/// use imt_neuron::threshold::{affine, ThresholdDist};
/// let d = ThresholdDist::Gaussian { mean: 1.6, std: 0.05 };
/// let t = affine(&d, -2.0, 1.0);
/// assert_eq!(t, ThresholdDist::Gaussian { mean: -2.2, std: 0.1 });
/// ```
pub fn affine(dist: &ThresholdDist, a: f64, b: f64) -> ThresholdDist {
    assert!(a != 0.0, "affine gain must be nonzero");
    match *dist {
        ThresholdDist::Constant { value } => ThresholdDist::Constant { value: a * value + b },
        ThresholdDist::Gaussian { mean, std } => ThresholdDist::Gaussian {
            mean: a * mean + b,
            std: a.abs() * std,
        },
        ThresholdDist::ExpPower { mean, scale, kappa } => ThresholdDist::ExpPower {
            mean: a * mean + b,
            scale: a.abs() * scale,
            kappa,
        },
        ThresholdDist::Discrete { ref atoms } => ThresholdDist::Discrete {
            atoms: atoms.iter().map(|&(x, p)| (a * x + b, p)).collect(),
        },
    }
}

/// Fits a family to measured thresholds by matching mean and variance.
pub fn fit(samples: &[f64], family: FitFamily) -> Result<ThresholdDist> {
    const MIN_SAMPLES: usize = 30;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    if !(var > f64::EPSILON * f64::EPSILON * mean * mean) {
        return Err(Error::DegenerateVariance);
    }
    let d = match family {
        FitFamily::Gaussian => ThresholdDist::Gaussian { mean, std: var.sqrt() },
        FitFamily::ExpPower { kappa } => ThresholdDist::exp_power_with_std(mean, var.sqrt(), kappa)?,
    };
    d.validate()?;
    Ok(d)
}

/// Raw moments `E[X^n]`, `n = 0..=order`, held in arbitrary precision.
#[derive(Debug, Clone)]
pub struct MomentTable {
    moments: Vec<Float>,
}

impl MomentTable {
    /// Highest order held.
    pub fn order(&self) -> usize {
        self.moments.len() - 1
    }

    /// `E[X^n]` rounded to `f64` (may be `±∞` for huge orders).
    pub fn get(&self, n: usize) -> f64 {
        self.moments[n].to_f64()
    }

    /// `ln |E[X^n]|`, finite even where [`Self::get`] overflows.
    pub fn ln_abs(&self, n: usize) -> f64 {
        ln_abs_float(&self.moments[n])
    }

    pub fn exact(&self, n: usize) -> &Float {
        &self.moments[n]
    }

    /// `E[X^2] - E[X]^2`.
    pub fn variance(&self) -> f64 {
        let m1 = &self.moments[1];
        let var = Float::with_val(self.moments[0].prec(), &self.moments[2] - m1 * m1);
        var.to_f64()
    }
}

pub(crate) fn ln_abs_float(x: &Float) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let (mantissa, exp) = x.to_f64_exp();
    mantissa.abs().ln() + f64::from(exp) * LN_2
}

/// Raw moments up to `order` under the default cap.
///
/// ```
/// use imt_neuron::threshold::{raw_moments, ThresholdDist};
/// let t = raw_moments(&ThresholdDist::Gaussian { mean: 1.0, std: 0.5 }, 4).unwrap();
/// assert!((t.get(2) - 1.25).abs() < 1e-15);
/// assert!((t.get(4) - (1.0 + 6.0 * 0.25 + 3.0 * 0.0625)).abs() < 1e-14);
/// ```
pub fn raw_moments(dist: &ThresholdDist, order: usize) -> Result<MomentTable> {
    raw_moments_with_cap(dist, order, DEFAULT_MOMENT_CAP)
}

pub fn raw_moments_with_cap(dist: &ThresholdDist, order: usize, cap: usize) -> Result<MomentTable> {
    if order == 0 {
        return Err(Error::Domain("moment order must be >= 1".into()));
    }
    if order > cap {
        return Err(Error::OrderTooHigh { requested: order, cap });
    }
    dist.validate()?;
    let mut cache = MomentCache::new(dist.clone());
    cache.ensure(192, order);
    Ok(MomentTable {
        moments: cache.values[..=order].to_vec(),
    })
}

/// Incrementally extended raw-moment sequence at a fixed precision.
///
/// The series engine pulls moments from here term by term; extending the
/// sequence reuses all earlier work unless more precision is requested.
#[derive(Debug, Clone)]
pub(crate) struct MomentCache {
    dist: ThresholdDist,
    prec: u32,
    values: Vec<Float>,
    // Binomial row C(n, j) m^(n-j) for the exp-power expansion.
    row: Vec<Float>,
    central: Vec<Float>,
    atom_powers: Vec<Float>,
}

impl MomentCache {
    pub(crate) fn new(dist: ThresholdDist) -> Self {
        MomentCache {
            dist,
            prec: 0,
            values: Vec::new(),
            row: Vec::new(),
            central: Vec::new(),
            atom_powers: Vec::new(),
        }
    }

    pub(crate) fn dist(&self) -> &ThresholdDist {
        &self.dist
    }

    /// Makes moments `0..=order` available at precision at least `prec`.
    pub(crate) fn ensure(&mut self, prec: u32, order: usize) {
        if prec > self.prec {
            self.prec = prec;
            self.values.clear();
            self.row.clear();
            self.central.clear();
            self.atom_powers.clear();
        }
        while self.values.len() <= order {
            self.push_next();
        }
    }

    pub(crate) fn get(&self, n: usize) -> &Float {
        &self.values[n]
    }

    fn push_next(&mut self) {
        let p = self.prec;
        let n = self.values.len();
        if n == 0 {
            self.values.push(Float::with_val(p, 1));
            return;
        }
        let next = match self.dist {
            ThresholdDist::Constant { value } => Float::with_val(p, &self.values[n - 1] * value),
            ThresholdDist::Gaussian { mean, std } => {
                // M_n = m M_{n-1} + (n-1) s^2 M_{n-2}
                let mut v = Float::with_val(p, &self.values[n - 1] * mean);
                if n >= 2 {
                    let var = Float::with_val(p, std) * std;
                    v += Float::with_val(p, &self.values[n - 2] * &var) * (n as u32 - 1);
                }
                v
            }
            ThresholdDist::ExpPower { mean, scale, kappa } => self.next_exp_power(n, mean, scale, kappa),
            ThresholdDist::Discrete { ref atoms } => {
                if self.atom_powers.is_empty() {
                    self.atom_powers = atoms.iter().map(|_| Float::with_val(p, 1)).collect();
                }
                let mut v = Float::with_val(p, 0);
                for (power, &(x, prob)) in self.atom_powers.iter_mut().zip(atoms) {
                    *power *= x;
                    v += Float::with_val(p, &*power * prob);
                }
                v
            }
        };
        self.values.push(next);
    }

    fn next_exp_power(&mut self, n: usize, mean: f64, scale: f64, kappa: f64) -> Float {
        let p = self.prec;
        if self.row.is_empty() {
            self.row.push(Float::with_val(p, 1));
        }
        // Advance the row from n - 1 to n: R_n[j] = m R_{n-1}[j] + R_{n-1}[j-1].
        self.row.push(Float::with_val(p, 0));
        for j in (1..=n).rev() {
            let (lo, hi) = self.row.split_at_mut(j);
            hi[0] *= mean;
            hi[0] += &lo[j - 1];
        }
        self.row[0] *= mean;
        // Absolute central moments s^j Γ((j+1)/κ) / Γ(1/κ) for even j.
        while self.central.len() <= n {
            let j = self.central.len();
            let value = if j % 2 == 1 {
                Float::with_val(p, 0)
            } else {
                let k = Float::with_val(p, kappa);
                let num = Float::with_val(p, (j as u32 + 1) / &k).ln_gamma();
                let den = Float::with_val(p, 1 / &k).ln_gamma();
                let s = Float::with_val(p, scale).ln() * j as u32;
                (num - den + s).exp()
            };
            self.central.push(value);
        }
        let mut total = Float::with_val(p, 0);
        for j in (0..=n).step_by(2) {
            total += Float::with_val(p, &self.row[j] * &self.central[j]);
        }
        total
    }

    /// Upper bounds on `ln E|X|^n` for `n = 0..=order`, in `f64`.
    pub(crate) fn ln_abs_bounds(&self, order: usize) -> Vec<f64> {
        ln_abs_moment_bounds(&self.dist, order)
    }
}

/// Minkowski-type bounds `ln E|X|^n <= n ln(|m| + ||X - m||_n)`.
pub(crate) fn ln_abs_moment_bounds(dist: &ThresholdDist, order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    out.push(0.0);
    for n in 1..=order {
        let nf = n as f64;
        let b = match *dist {
            ThresholdDist::Constant { value } => nf * value.abs().ln(),
            ThresholdDist::Gaussian { mean, std } => {
                let ln_norm = (0.5 * nf * LN_2 + ln_gamma(0.5 * (nf + 1.0)) - 0.5 * std::f64::consts::PI.ln()) / nf;
                nf * (mean.abs() + std * ln_norm.exp()).ln()
            }
            ThresholdDist::ExpPower { mean, scale, kappa } => {
                let ln_norm = (ln_gamma((nf + 1.0) / kappa) - ln_gamma(1.0 / kappa)) / nf;
                nf * (mean.abs() + scale * ln_norm.exp()).ln()
            }
            ThresholdDist::Discrete { ref atoms } => {
                nf * atoms.iter().map(|a| a.0.abs()).fold(0.0, f64::max).ln()
            }
        };
        out.push(b);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_moments_are_powers() {
        let t = raw_moments(&ThresholdDist::Constant { value: -1.5 }, 7).unwrap();
        for n in 1..=7 {
            assert!((t.get(n) - (-1.5f64).powi(n as i32)).abs() < 1e-14 * 1.5f64.powi(n as i32));
        }
    }

    #[test]
    fn order_cap_is_enforced() {
        let d = ThresholdDist::Constant { value: 1.0 };
        assert!(matches!(raw_moments_with_cap(&d, 201, 200), Err(Error::OrderTooHigh { .. })));
        assert!(raw_moments(&d, 0).is_err());
    }

    #[test]
    fn ep_scale_round_trips_variance() {
        for &k in &[2.0, 2.4, 3.0, 5.0] {
            let d = ThresholdDist::exp_power_with_std(0.0, 0.3, k).unwrap();
            assert!((d.std() - 0.3).abs() < 1e-14);
        }
    }

    #[test]
    fn heavy_tails_are_rejected() {
        let d = ThresholdDist::ExpPower { mean: 0.0, scale: 1.0, kappa: 1.5 };
        assert!(d.validate().is_err());
    }

    #[test]
    fn mass_below_matches_symmetry() {
        let g = ThresholdDist::Gaussian { mean: 1.0, std: 0.2 };
        assert!((g.mass_below(1.0) - 0.5).abs() < 1e-15);
        let e = ThresholdDist::exp_power_with_std(1.0, 0.2, 3.0).unwrap();
        assert!((e.mass_below(1.0) - 0.5).abs() < 1e-15);
        assert!((e.mass_below(0.8) + e.mass_below(1.2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejection_sampling_respects_floor() {
        let d = ThresholdDist::Gaussian { mean: 0.0, std: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rejected = 0;
        for _ in 0..1000 {
            let (x, r) = d.sample_above(0.5, &mut rng);
            assert!(x > 0.5);
            rejected += r;
        }
        assert!(rejected > 1000);
    }

    #[test]
    fn fit_requires_enough_spread_and_data() {
        assert!(matches!(
            fit(&[1.0; 10], FitFamily::Gaussian),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(fit(&[1.0; 50], FitFamily::Gaussian), Err(Error::DegenerateVariance)));
    }

    #[test]
    fn discrete_moments_mix_atoms() {
        let d = ThresholdDist::Discrete { atoms: vec![(1.0, 0.25), (2.0, 0.75)] };
        let t = raw_moments(&d, 3).unwrap();
        assert!((t.get(3) - (0.25 + 0.75 * 8.0)).abs() < 1e-14);
    }
}
