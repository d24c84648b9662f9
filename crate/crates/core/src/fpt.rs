//! Interspike-interval moments with a fluctuating firing threshold.
//!
//! In the insulating phase the device voltage obeys
//! `C dv_i/dt = I(v_i) - g_vi v_i + g_vi η`, an OU process. Translating the
//! origin to its fixed point and rescaling by `α` turns each cycle into the
//! unit problem with start `α x0` and a boundary `α (v_h - μ)` that is redrawn
//! every spike. The tower rule then gives
//! `E[t^m] = θ^m E_{v_h}[τ̃_m(α(v_h - μ), α x0)]`, where every boundary-side
//! term is a moment series in the boundary law.

use crate::circuit::{crossing_time, ImtCircuit, SeriesElement};
use crate::error::{Error, Result};
use crate::series::{
    assemble, expectation, phi_k_exact, tau_m_unit_exact, working_prec, BoundaryPhis, OuParams, SeriesControl,
};
use crate::threshold::{affine, MomentCache, ThresholdDist};
use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};

/// The insulating-phase discharge as an OU process plus its boundary law.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    /// `μ` is the fixed point in device volts.
    pub ou: OuParams,
    /// `√(2 / (θ σ²))`.
    pub alpha: f64,
    /// Start point `v_l - μ`, in volts.
    pub x0: f64,
    /// Threshold law in device volts.
    pub threshold: ThresholdDist,
    /// The law of `α (v_h - μ)`.
    pub boundary: ThresholdDist,
}

impl ReducedModel {
    pub fn new(ou: OuParams, v_l: f64, threshold: ThresholdDist) -> Result<Self> {
        threshold.validate()?;
        let alpha = ou.alpha();
        let boundary = affine(&threshold, alpha, -alpha * ou.mu);
        Ok(ReducedModel {
            ou,
            alpha,
            x0: v_l - ou.mu,
            threshold,
            boundary,
        })
    }

    /// `α x0`, the start point of the unit problem.
    pub fn scaled_x0(&self) -> f64 {
        self.alpha * self.x0
    }

    pub fn v_l(&self) -> f64 {
        self.x0 + self.ou.mu
    }

    /// The same discharge with a different threshold law.
    pub fn with_threshold(&self, threshold: ThresholdDist) -> Result<Self> {
        ReducedModel::new(self.ou, self.v_l(), threshold)
    }

    /// Probability that a threshold draw lands at or below `v_l`. Such draws
    /// are rejected by the simulator and ignored by the moment series.
    pub fn rejected_mass(&self) -> f64 {
        self.threshold.mass_below(self.v_l())
    }
}

/// Largest threshold value used for the saturation check: the support edge
/// for bounded laws, six standard deviations above the mean otherwise.
fn threshold_ceiling(d: &ThresholdDist) -> f64 {
    let top = d.support_max();
    if top.is_finite() {
        top
    } else {
        d.mean() + 6.0 * d.std()
    }
}

/// Reduces the circuit's insulating phase to an OU process.
///
/// `sigma_t` is the amplitude of the thermal noise voltage in series with
/// the device, in V·s^(-1/2). With a transistor load, `θ = C/g_vi`,
/// `μ = I_T(v_gs)/g_vi` and `σ = σ_t/θ`; a plain conductance `g_s` gives
/// `θ = C/(g_vi + g_s)`, `μ = g_s v_dd/(g_vi + g_s)` and `σ = σ_t g_vi/C`.
/// The inductance is ignored.
pub fn circuit_to_ou(circuit: &ImtCircuit, v_gs: f64, sigma_t: f64, threshold: &ThresholdDist) -> Result<ReducedModel> {
    circuit.validate()?;
    if !(sigma_t > 0.0) || !sigma_t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "the OU reduction needs sigma_t > 0, got {sigma_t}; use the deterministic crossing time instead"
        )));
    }
    let dev = &circuit.device;
    match circuit.series {
        SeriesElement::Transistor(t) => {
            let v_ov = v_gs - t.v_t0;
            let v_ds = circuit.v_dd - threshold_ceiling(threshold);
            if v_ds < v_ov {
                return Err(Error::SaturationViolated { v_ds, v_ov });
            }
        }
        SeriesElement::Conductance { g_s } if g_s.is_infinite() => return Err(Error::DegenerateLoadLine),
        SeriesElement::Conductance { .. } => {}
    }
    let (theta, mu) = circuit.discharge(v_gs);
    let sigma = sigma_t * dev.g_vi / circuit.capacitance;
    ReducedModel::new(OuParams::new(mu, theta, sigma)?, dev.v_l, threshold.clone())
}

/// Noiseless interspike interval for threshold `v_h`, in seconds;
/// infinite when the circuit rests.
pub fn deterministic_isi(circuit: &ImtCircuit, v_gs: f64, v_h: f64) -> Result<f64> {
    circuit.validate()?;
    let (theta, mu) = circuit.discharge(v_gs);
    Ok(crossing_time(theta, mu, circuit.device.v_l, v_h))
}

/// Noiseless firing rate in Hz: zero on the resting side.
pub fn deterministic_rate(circuit: &ImtCircuit, v_gs: f64, v_h: f64) -> Result<f64> {
    let isi = deterministic_isi(circuit, v_gs, v_h)?;
    Ok(if isi.is_finite() && isi > 0.0 { 1.0 / isi } else { 0.0 })
}

fn check_factor(k: u8, allowed: std::ops::RangeInclusive<u8>) -> Result<()> {
    if allowed.contains(&k) {
        Ok(())
    } else {
        Err(Error::Domain(format!("phi order {k} is not supported here")))
    }
}

/// `E[φ_k(X)]` for `X` distributed as `boundary`, `k ∈ {1, 2, 3}`.
///
/// A constant law gives `φ_k` at that point.
///
/// ```
/// use imt_neuron::fpt::expected_phi;
/// use imt_neuron::series::{phi_k, SeriesControl};
/// use imt_neuron::threshold::ThresholdDist;
/// let ctl = SeriesControl::default();
/// let point = expected_phi(&ThresholdDist::Constant { value: 1.3 }, 1, &ctl).unwrap();
/// assert!((point / phi_k(1.3, 1, &ctl).unwrap() - 1.0).abs() < 1e-15);
/// ```
pub fn expected_phi(boundary: &ThresholdDist, k: u8, ctl: &SeriesControl) -> Result<f64> {
    check_factor(k, 1..=3)?;
    boundary.validate()?;
    ctl.validate()?;
    let mut moments = MomentCache::new(boundary.clone());
    Ok(expectation(&[k], &mut moments, ctl)?.to_f64())
}

/// `E[φ_{k1}(X) φ_{k2}(X)]` through the Cauchy product of the two series.
///
/// Orders run over `0..=2`, where order 0 is the constant series `1`; the
/// moment problem needs `(1, 1)` and `(1, 2)`.
pub fn expected_phi_product(boundary: &ThresholdDist, k1: u8, k2: u8, ctl: &SeriesControl) -> Result<f64> {
    check_factor(k1, 0..=2)?;
    check_factor(k2, 0..=2)?;
    if k1 == 0 && k2 == 0 {
        return Ok(1.0);
    }
    boundary.validate()?;
    ctl.validate()?;
    let mut moments = MomentCache::new(boundary.clone());
    Ok(expectation(&[k1, k2], &mut moments, ctl)?.to_f64())
}

/// Interspike-interval statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsiMoments {
    /// Mean interval, seconds.
    pub mean: f64,
    pub raw2: Option<f64>,
    pub raw3: Option<f64>,
    pub variance: Option<f64>,
    pub cv: Option<f64>,
    /// `1 / mean`, Hz.
    pub firing_rate: f64,
    /// Standard errors of the mean and the CV, for estimates from samples.
    pub std_err: Option<StdErrors>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdErrors {
    pub mean: f64,
    pub cv: f64,
}

impl IsiMoments {
    fn from_parts(mean: f64, raw2: Option<f64>, raw3: Option<f64>, variance: Option<f64>) -> Self {
        IsiMoments {
            mean,
            raw2,
            raw3,
            variance,
            cv: variance.map(|v| v.sqrt() / mean),
            firing_rate: if mean > 0.0 { 1.0 / mean } else { f64::INFINITY },
            std_err: None,
        }
    }
}

/// Boundary-side expectations for moments up to `m`.
fn boundary_terms(boundary: &ThresholdDist, m: u8, ctl: &SeriesControl) -> Result<BoundaryPhis> {
    let mut moments = MomentCache::new(boundary.clone());
    let mut take = |factors: &[u8]| expectation(factors, &mut moments, ctl);
    let e1 = take(&[1])?;
    let (e11, e2) = if m >= 2 {
        (Some(take(&[1, 1])?), Some(take(&[2])?))
    } else {
        (None, None)
    };
    let (e111, e12, e3) = if m >= 3 {
        (Some(take(&[1, 1, 1])?), Some(take(&[1, 2])?), Some(take(&[3])?))
    } else {
        (None, None, None)
    };
    Ok(BoundaryPhis { e1, e11, e2, e111, e12, e3 })
}

/// ISI moments up to order `highest ∈ {1, 2, 3}` from the tower rule.
///
/// A constant threshold takes the point-boundary path, so it agrees exactly
/// with [`crate::series::tau_m_scaled`].
pub fn isi_moments_analytic(model: &ReducedModel, highest: u8, ctl: &SeriesControl) -> Result<IsiMoments> {
    if !(1..=3).contains(&highest) {
        return Err(Error::Domain(format!("moment order must be 1, 2 or 3, got {highest}")));
    }
    ctl.validate()?;
    let theta = model.ou.theta;
    let x0 = model.scaled_x0();
    let unit: Vec<Float> = match model.threshold {
        ThresholdDist::Constant { value } => (1..=highest)
            .map(|m| tau_m_unit_exact(model.alpha * (value - model.ou.mu), x0, m, ctl))
            .collect::<Result<_>>()?,
        _ => {
            let a = boundary_terms(&model.boundary, highest, ctl)?;
            let b: Vec<Float> = (1..=highest).map(|k| phi_k_exact(x0, k, ctl)).collect::<Result<_>>()?;
            let mut all = vec![&a.e1];
            all.extend([&a.e11, &a.e2, &a.e111, &a.e12, &a.e3].into_iter().flatten());
            all.extend(&b);
            let p = working_prec(all);
            (1..=highest).map(|m| assemble(&a, &b, m, p)).collect()
        }
    };
    let mean = theta * unit[0].to_f64();
    let raw2 = unit.get(1).map(|t| theta * theta * t.to_f64());
    let raw3 = unit.get(2).map(|t| theta.powi(3) * t.to_f64());
    let variance = match unit.get(1) {
        Some(t2) => {
            let p = t2.prec().max(unit[0].prec());
            let spread = Float::with_val(p, t2) - Float::with_val(p, &unit[0] * &unit[0]);
            let v = theta * theta * spread.to_f64();
            if v < 0.0 {
                return Err(Error::NegativeVarianceComputed(v));
            }
            Some(v)
        }
        None => None,
    };
    Ok(IsiMoments::from_parts(mean, raw2, raw3, variance))
}

/// Outcome of one CV evaluation in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum CvEntry {
    Value(f64),
    /// The second-moment series does not converge: the variance is infinite.
    Diverged,
    Failed(String),
}

impl CvEntry {
    pub fn value(&self) -> Option<f64> {
        match self {
            CvEntry::Value(v) => Some(*v),
            _ => None,
        }
    }

    /// Short status tag for result tables.
    pub fn status(&self) -> &'static str {
        match self {
            CvEntry::Value(_) => "ok",
            CvEntry::Diverged => "diverged",
            CvEntry::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub sigma_t: f64,
    pub dist: ThresholdDist,
    pub entry: CvEntry,
}

fn cv_entry(result: Result<IsiMoments>) -> CvEntry {
    match result {
        Ok(m) => m.cv.map_or_else(|| CvEntry::Failed("variance not computed".into()), CvEntry::Value),
        Err(Error::Diverged) => CvEntry::Diverged,
        Err(e) => CvEntry::Failed(e.to_string()),
    }
}

/// CV over a grid of noise amplitudes (V·s^(-1/2)) and threshold laws.
///
/// Rows come back in grid order, `sigma_t` outermost. Divergent or failed
/// points are recorded, never propagated.
pub fn cv_sweep(
    circuit: &ImtCircuit,
    v_gs: f64,
    sigma_ts: &[f64],
    dists: &[ThresholdDist],
    ctl: &SeriesControl,
) -> Vec<CvRow> {
    let grid: Vec<(f64, &ThresholdDist)> = sigma_ts
        .iter()
        .flat_map(|&s| dists.iter().map(move |d| (s, d)))
        .collect();
    grid.par_iter()
        .map(|&(sigma_t, dist)| {
            let entry = cv_entry(
                circuit_to_ou(circuit, v_gs, sigma_t, dist).and_then(|m| isi_moments_analytic(&m, 2, ctl)),
            );
            CvRow {
                sigma_t,
                dist: dist.clone(),
                entry,
            }
        })
        .collect()
}

/// One point of an analytic transfer curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferPoint {
    pub v_gs: f64,
    /// Mean firing rate in Hz, or the reason it is missing.
    pub rate: std::result::Result<f64, String>,
}

/// Mean firing rate against gate voltage. With `sigma_t == 0` the
/// deterministic rate at the threshold mean is used.
pub fn transfer_curve(
    circuit: &ImtCircuit,
    v_gs: &[f64],
    sigma_t: f64,
    dist: &ThresholdDist,
    ctl: &SeriesControl,
) -> Vec<TransferPoint> {
    v_gs.par_iter()
        .map(|&v| {
            let rate = if sigma_t == 0.0 {
                deterministic_rate(circuit, v, dist.mean())
            } else {
                circuit_to_ou(circuit, v, sigma_t, dist)
                    .and_then(|m| isi_moments_analytic(&m, 1, ctl))
                    .map(|m| m.firing_rate)
            };
            TransferPoint {
                v_gs: v,
                rate: rate.map_err(|e| e.to_string()),
            }
        })
        .collect()
}
