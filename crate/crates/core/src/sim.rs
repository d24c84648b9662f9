//! Time-domain stochastic integration of the oscillator.
//!
//! Three models share one configuration type:
//!
//! * [`simulate_full`] integrates the two-dimensional L/C circuit with the
//!   hysteretic device switching between branches.
//! * [`simulate_reduced`] keeps only the insulating-phase discharge of the
//!   device voltage and treats the metallic phase as an instant reset.
//! * [`simulate_fhn`] integrates a piecewise-linear FitzHugh-Nagumo
//!   caricature in dimensionless time.
//!
//! Thermal noise is a voltage source of amplitude `σ_t` (V·s^(-1/2)) in
//! series with the device. Every run draws from a ChaCha8 stream selected by
//! `(seed, trial)`, so batches of trials give the same result however they
//! are scheduled.

use crate::circuit::{ImtCircuit, PhaseState};
use crate::error::{Error, Result};
use crate::fpt::{IsiMoments, StdErrors};
use crate::threshold::ThresholdDist;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Noise acting on one run.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    /// Thermal noise amplitude, V·s^(-1/2).
    pub sigma_t: f64,
    /// Spike-to-spike law of the IMT threshold.
    pub threshold: ThresholdDist,
}

impl NoiseSpec {
    pub fn new(sigma_t: f64, threshold: ThresholdDist) -> Self {
        NoiseSpec { sigma_t, threshold }
    }

    /// Checks the noise against a circuit: the threshold law must sit inside
    /// `(v_l, v_dd)`. Unbounded laws are checked through their mean; their
    /// tails below `v_l` are handled by redrawing.
    pub fn validate(&self, circuit: &ImtCircuit) -> Result<()> {
        if !(self.sigma_t >= 0.0) || !self.sigma_t.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma_t must be >= 0, got {}", self.sigma_t)));
        }
        self.threshold.validate()?;
        let (lo, hi) = (circuit.device.v_l, circuit.v_dd);
        let inside = |v: f64| v > lo && v < hi;
        let ok = match &self.threshold {
            ThresholdDist::Discrete { atoms } => atoms.iter().all(|a| inside(a.0)),
            d => inside(d.mean()),
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "threshold law must lie inside (v_l, v_dd) = ({lo}, {hi}) V"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Full2d,
    Reduced1d,
    FhnCaricature,
}

/// How a boundary crossing between grid points is detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CrossingRule {
    /// First grid point at or above the boundary.
    GridPoint,
    /// Also fire with the Brownian-bridge probability of an unseen crossing
    /// inside the step. Applies to the reduced model.
    #[default]
    BrownianBridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Time step, seconds (dimensionless for the caricature).
    pub dt: f64,
    /// Total simulated time.
    pub duration: f64,
    pub seed: u64,
    pub model: ModelKind,
    /// Stop early after this many spikes.
    #[serde(default)]
    pub max_spikes: Option<usize>,
    /// Keep every n-th step in the trace; `None` records no trace.
    #[serde(default)]
    pub record_every: Option<usize>,
    #[serde(default)]
    pub crossing: CrossingRule,
}

impl SimConfig {
    pub fn new(dt: f64, duration: f64, seed: u64, model: ModelKind) -> Self {
        SimConfig {
            dt,
            duration,
            seed,
            model,
            max_spikes: None,
            record_every: None,
            crossing: CrossingRule::default(),
        }
    }

    /// Checks the step against the model time scale `theta`.
    pub fn validate(&self, theta: f64) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= 100.0 * self.dt) {
            return Err(Error::Config(format!(
                "duration {} must cover at least 100 steps of {}",
                self.duration, self.dt
            )));
        }
        if self.dt > theta / 50.0 {
            return Err(Error::Config(format!(
                "dt = {:e} exceeds the stability limit theta/50 = {:e}",
                self.dt,
                theta / 50.0
            )));
        }
        if self.record_every == Some(0) {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }

    fn expect_model(&self, model: ModelKind) -> Result<()> {
        if self.model == model {
            Ok(())
        } else {
            Err(Error::Config(format!("configuration is for {:?}, not {:?}", self.model, model)))
        }
    }

    fn steps(&self) -> u64 {
        (self.duration / self.dt).floor() as u64
    }
}

/// Spike times and the intervals between them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpikeTrain {
    pub spike_times: Vec<f64>,
    pub isis: Vec<f64>,
    /// The run ended part-way through an interval.
    pub truncated_last: bool,
    /// Threshold draws at or below `v_l` that were redrawn.
    pub threshold_rejections: u64,
    pub threshold_draws: u64,
}

impl SpikeTrain {
    /// Builds a train from spike times, deriving the intervals.
    pub fn from_times(spike_times: Vec<f64>, truncated_last: bool) -> Self {
        let isis = spike_times.windows(2).map(|w| w[1] - w[0]).collect();
        SpikeTrain {
            spike_times,
            isis,
            truncated_last,
            ..Default::default()
        }
    }

    /// Fraction of threshold draws that had to be redrawn.
    pub fn rejection_rate(&self) -> f64 {
        if self.threshold_draws == 0 {
            0.0
        } else {
            self.threshold_rejections as f64 / self.threshold_draws as f64
        }
    }
}

/// Rejection rates above this flag a threshold law as poorly matched to
/// the circuit.
pub const REJECTION_WARN_RATE: f64 = 1e-3;

/// One recorded row of a full-model trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullSample {
    pub t: f64,
    pub i_i: f64,
    pub v_o: f64,
    pub s: PhaseState,
}

/// One recorded row of a reduced-model trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedSample {
    pub t: f64,
    pub v_i: f64,
}

/// One recorded row of a caricature trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FhnSample {
    pub t: f64,
    pub u: f64,
    pub w: f64,
}

fn stream(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

struct ThresholdSource<'a> {
    dist: &'a ThresholdDist,
    floor: f64,
    draws: u64,
    rejections: u64,
}

impl ThresholdSource<'_> {
    fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let (v, rejected) = self.dist.sample_above(self.floor, rng);
        self.draws += 1 + rejected;
        self.rejections += rejected;
        v
    }
}

/// Integrates the full L/C oscillator.
///
/// The inductor current is advanced with a linearly implicit Euler step, so
/// the step is limited by accuracy rather than by the fast `L g` time
/// constants; the capacitor voltage uses an explicit step. A spike is the
/// insulator-to-metal switch; a fresh threshold is drawn at every
/// metal-to-insulator switch. The run starts in the insulating state with
/// the device at `v_l`.
pub fn simulate_full(
    circuit: &ImtCircuit,
    v_gs: f64,
    noise: &NoiseSpec,
    cfg: &SimConfig,
) -> Result<(Vec<FullSample>, SpikeTrain)> {
    simulate_full_trial(circuit, v_gs, noise, cfg, 0)
}

/// [`simulate_full`] on stream `trial` of the configured seed.
pub fn simulate_full_trial(
    circuit: &ImtCircuit,
    v_gs: f64,
    noise: &NoiseSpec,
    cfg: &SimConfig,
    trial: u64,
) -> Result<(Vec<FullSample>, SpikeTrain)> {
    circuit.validate()?;
    noise.validate(circuit)?;
    cfg.expect_model(ModelKind::Full2d)?;
    if !(circuit.inductance > 0.0) {
        return Err(Error::Config("the full model needs L > 0".into()));
    }
    let (theta, _) = circuit.discharge(v_gs);
    cfg.validate(theta)?;

    let dev = &circuit.device;
    let (dt, l, c, v_dd) = (cfg.dt, circuit.inductance, circuit.capacitance, circuit.v_dd);
    let noise_step = noise.sigma_t * dt.sqrt() / l;
    let limit_v = 1e3 * v_dd;
    let limit_i = 1e3 * v_dd * dev.g_vm;
    let mut rng = stream(cfg.seed, trial);
    let mut thresholds = ThresholdSource {
        dist: &noise.threshold,
        floor: dev.v_l,
        draws: 0,
        rejections: 0,
    };

    let mut s = PhaseState::Insulating;
    let mut v_o = v_dd - dev.v_l;
    let mut i = dev.g_vi * dev.v_l;
    let mut v_h = thresholds.next(&mut rng);
    let mut trace = Vec::new();
    let mut spikes = Vec::new();
    let record = cfg.record_every;
    let noiseless = noise.sigma_t == 0.0;

    for n in 0..cfg.steps() {
        let t = n as f64 * dt;
        if let Some(every) = record {
            if n % every as u64 == 0 {
                trace.push(FullSample { t, i_i: i, v_o, s });
            }
        }
        let g = dev.conductance(s);
        let z: f64 = if noiseless { 0.0 } else { StandardNormal.sample(&mut rng) };
        let dw = noise_step * z;
        let v_dev_before = v_dd - v_o;
        // Implicit in i: L (i' - i)/dt = v_dd - i'/g - v_o + noise.
        let i_next = (i + dt / l * (v_dd - v_o) + dw) / (1.0 + dt / (l * g));
        let v_o_next = v_o + dt / c * (i - circuit.series_current(v_o, v_gs));
        i = i_next;
        v_o = v_o_next;
        if !(v_o.abs() <= limit_v && i.abs() <= limit_i) {
            return Err(Error::NumericalBlowup { t: t + dt });
        }
        let v_dev = v_dd - v_o;
        match s {
            PhaseState::Insulating if v_dev >= v_h => {
                let frac = if noiseless && v_dev > v_dev_before {
                    (v_h - v_dev_before) / (v_dev - v_dev_before)
                } else {
                    1.0
                };
                spikes.push(t + frac * dt);
                s = PhaseState::Metallic;
                if cfg.max_spikes.is_some_and(|m| spikes.len() >= m) {
                    break;
                }
            }
            PhaseState::Metallic if v_dev <= dev.v_l => {
                s = PhaseState::Insulating;
                v_h = thresholds.next(&mut rng);
            }
            _ => {}
        }
    }
    let complete = cfg.max_spikes.is_some_and(|m| spikes.len() >= m);
    let mut train = SpikeTrain::from_times(spikes, !complete);
    train.threshold_draws = thresholds.draws;
    train.threshold_rejections = thresholds.rejections;
    Ok((trace, train))
}

/// Integrates the insulating-phase discharge of the device voltage.
///
/// Each cycle starts at `v_l` with a fresh threshold and ends when the
/// voltage reaches it; the metallic phase takes no time. Spike `k` falls at
/// the sum of the first `k` cycle lengths.
pub fn simulate_reduced(
    circuit: &ImtCircuit,
    v_gs: f64,
    noise: &NoiseSpec,
    cfg: &SimConfig,
) -> Result<SpikeTrain> {
    Ok(simulate_reduced_trial(circuit, v_gs, noise, cfg, 0)?.1)
}

/// [`simulate_reduced`] on stream `trial`, also returning the trace.
pub fn simulate_reduced_trial(
    circuit: &ImtCircuit,
    v_gs: f64,
    noise: &NoiseSpec,
    cfg: &SimConfig,
    trial: u64,
) -> Result<(Vec<ReducedSample>, SpikeTrain)> {
    circuit.validate()?;
    noise.validate(circuit)?;
    cfg.expect_model(ModelKind::Reduced1d)?;
    let (theta, mu) = circuit.discharge(v_gs);
    cfg.validate(theta)?;

    let v_l = circuit.device.v_l;
    let dt = cfg.dt;
    let decay = dt / theta;
    // σ = σ_t g_vi / C for the device-voltage process.
    let sigma = noise.sigma_t * circuit.device.g_vi / circuit.capacitance;
    let noise_step = sigma * dt.sqrt();
    let bridge_scale = if cfg.crossing == CrossingRule::BrownianBridge && sigma > 0.0 {
        2.0 / (sigma * sigma * dt)
    } else {
        0.0
    };
    let noiseless = sigma == 0.0;
    let mut rng = stream(cfg.seed, trial);
    let mut thresholds = ThresholdSource {
        dist: &noise.threshold,
        floor: v_l,
        draws: 0,
        rejections: 0,
    };

    let total_steps = cfg.steps();
    let mut trace = Vec::new();
    let mut cycles = Vec::new();
    let mut elapsed_steps: u64 = 0;
    let mut v = v_l;
    let mut v_h = thresholds.next(&mut rng);
    let mut local: u64 = 0;
    let record = cfg.record_every;
    let limit = 1e3 * circuit.v_dd;

    while elapsed_steps + local < total_steps {
        if let Some(every) = record {
            if (elapsed_steps + local) % every as u64 == 0 {
                let t = (elapsed_steps + local) as f64 * dt;
                trace.push(ReducedSample { t, v_i: v });
            }
        }
        let z: f64 = if noiseless { 0.0 } else { StandardNormal.sample(&mut rng) };
        let next = v + (mu - v) * decay + noise_step * z;
        local += 1;
        if !(next.abs() <= limit) {
            return Err(Error::NumericalBlowup { t: (elapsed_steps + local) as f64 * dt });
        }
        let crossed = if next >= v_h {
            true
        } else if bridge_scale > 0.0 {
            let exponent = bridge_scale * (v_h - v) * (v_h - next);
            exponent < 40.0 && rng.random::<f64>() < (-exponent).exp()
        } else {
            false
        };
        if crossed {
            let isi = if noiseless {
                (local as f64 - 1.0 + (v_h - v) / (next - v)) * dt
            } else {
                local as f64 * dt
            };
            cycles.push(isi);
            elapsed_steps += local;
            local = 0;
            v = v_l;
            if cfg.max_spikes.is_some_and(|m| cycles.len() >= m) {
                break;
            }
            v_h = thresholds.next(&mut rng);
        } else {
            v = next;
        }
    }
    let complete = cfg.max_spikes.is_some_and(|m| cycles.len() >= m);
    let mut spike_times = Vec::with_capacity(cycles.len());
    let mut t = 0.0;
    for isi in &cycles {
        t += isi;
        spike_times.push(t);
    }
    let mut train = SpikeTrain::from_times(spike_times, !complete);
    train.threshold_rejections = thresholds.rejections;
    train.threshold_draws = thresholds.draws;
    Ok((trace, train))
}

/// Runs `trials` independent reduced-model trains in parallel; trial `k`
/// uses stream `k`.
pub fn simulate_reduced_trials(
    circuit: &ImtCircuit,
    v_gs: f64,
    noise: &NoiseSpec,
    cfg: &SimConfig,
    trials: usize,
) -> Result<Vec<SpikeTrain>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|k| simulate_reduced_trial(circuit, v_gs, noise, cfg, k).map(|r| r.1))
        .collect()
}

/// A piecewise-linear N-shaped (or mirrored) nonlinearity together with
/// the recovery dynamics
/// `du/dt = f(u) - w + I_ext`, `τ dw/dt = u - b w + a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FhnParams {
    /// Left breakpoint `u1 < u2` and the value of `f` there.
    pub u1: f64,
    pub f1: f64,
    /// Right breakpoint and the value of `f` there.
    pub u2: f64,
    pub f2: f64,
    /// Slope of `f` left of `u1`.
    pub slope_left: f64,
    /// Slope of `f` right of `u2`.
    pub slope_right: f64,
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    pub i_ext: f64,
}

impl FhnParams {
    pub fn slope_middle(&self) -> f64 {
        (self.f2 - self.f1) / (self.u2 - self.u1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u2 > self.u1) || !(self.tau > 0.0) {
            return Err(Error::InvalidParameter("need u1 < u2 and tau > 0".into()));
        }
        let m = self.slope_middle();
        if !(m * self.slope_left < 0.0 && m * self.slope_right < 0.0) {
            return Err(Error::InvalidParameter(
                "the middle segment must slope opposite to both outer segments".into(),
            ));
        }
        Ok(())
    }

    pub fn f(&self, u: f64) -> f64 {
        if u < self.u1 {
            self.f1 + self.slope_left * (u - self.u1)
        } else if u > self.u2 {
            self.f2 + self.slope_right * (u - self.u2)
        } else {
            self.f1 + self.slope_middle() * (u - self.u1)
        }
    }

    /// The caricature of an IMT circuit with a transistor load.
    ///
    /// With `u = i_i / I_ref`, `w = v_o / 1 V` and time in units of
    /// `L g_vi`, where `I_ref = g_vi · 1 V`, the circuit equations take the
    /// caricature form with `f(u) = -h(u I_ref)` for a device law `h` that
    /// follows the insulating branch up to `v_h`, the metallic branch from
    /// `v_l` and a straight segment between them. Then `I_ext = v_dd`,
    /// `a = -I_T / I_ref`, `b = 0` and `τ = θ / (L g_vi)`.
    pub fn matched_to(circuit: &ImtCircuit, v_gs: f64, v_h: f64) -> Result<Self> {
        circuit.validate()?;
        if !(circuit.inductance > 0.0) {
            return Err(Error::Config("the caricature needs L > 0".into()));
        }
        let dev = &circuit.device;
        let i_ref = dev.g_vi;
        let (theta, mu) = circuit.discharge(v_gs);
        let p = FhnParams {
            u1: v_h,
            f1: -v_h,
            u2: dev.v_l * dev.g_vm / i_ref,
            f2: -dev.v_l,
            slope_left: -1.0,
            slope_right: -dev.g_vi / dev.g_vm,
            a: -mu,
            b: 0.0,
            tau: theta / (circuit.inductance * dev.g_vi),
            i_ext: circuit.v_dd,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Euler-Maruyama trace of the caricature; noise of amplitude `noise`
/// enters the fast equation. Every step is returned unless the
/// configuration asks for decimation. The run starts at the left knee.
pub fn simulate_fhn(params: &FhnParams, noise: f64, cfg: &SimConfig) -> Result<Vec<FhnSample>> {
    params.validate()?;
    cfg.expect_model(ModelKind::FhnCaricature)?;
    cfg.validate(1.0)?;
    if !(noise >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise amplitude must be >= 0, got {noise}")));
    }
    let dt = cfg.dt;
    let noise_step = noise * dt.sqrt();
    let mut rng = stream(cfg.seed, 0);
    let every = cfg.record_every.unwrap_or(1) as u64;
    let mut u = params.u1;
    let mut w = params.f1 + params.i_ext;
    let limit = 1e3 * (params.i_ext.abs() + params.u2.abs() + params.f2.abs()).max(1.0);
    let mut trace = Vec::new();
    for n in 0..cfg.steps() {
        if n % every == 0 {
            trace.push(FhnSample { t: n as f64 * dt, u, w });
        }
        let z: f64 = if noise > 0.0 { StandardNormal.sample(&mut rng) } else { 0.0 };
        let du = (params.f(u) - w + params.i_ext) * dt + noise_step * z;
        let dw = (u - params.b * w + params.a) * dt / params.tau;
        u += du;
        w += dw;
        if !(u.abs() <= limit && w.abs() <= limit) {
            return Err(Error::NumericalBlowup { t: (n + 1) as f64 * dt });
        }
    }
    Ok(trace)
}

/// Pooled ISI statistics across trains, with batch-means standard errors.
///
/// Intervals are pooled in train order and cut into between 10 and 100
/// contiguous batches; the spread of the per-batch mean and CV gives the
/// standard errors.
pub fn mc_isi_moments(trains: &[SpikeTrain]) -> Result<IsiMoments> {
    const MIN_ISIS: usize = 100;
    let pooled: Vec<f64> = trains.iter().flat_map(|t| t.isis.iter().copied()).collect();
    let n = pooled.len();
    if n < MIN_ISIS {
        return Err(Error::InsufficientSamples { needed: MIN_ISIS, got: n });
    }
    let stats = |xs: &[f64]| {
        let k = xs.len() as f64;
        let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
        for &x in xs {
            s1 += x;
            s2 += x * x;
            s3 += x * x * x;
        }
        let mean = s1 / k;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
        (mean, s2 / k, s3 / k, var)
    };
    let (mean, raw2, raw3, var) = stats(&pooled);
    let batches = (n / 100).clamp(10, 100);
    let size = n / batches;
    let (mut bm, mut bc) = (Vec::with_capacity(batches), Vec::with_capacity(batches));
    for b in 0..batches {
        let (m, _, _, v) = stats(&pooled[b * size..(b + 1) * size]);
        bm.push(m);
        bc.push(v.sqrt() / m);
    }
    let se = |xs: &[f64]| {
        let k = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / k;
        (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (k - 1.0) / k).sqrt()
    };
    Ok(IsiMoments {
        mean,
        raw2: Some(raw2),
        raw3: Some(raw3),
        variance: Some(var),
        cv: Some(var.sqrt() / mean),
        firing_rate: 1.0 / mean,
        std_err: Some(StdErrors { mean: se(&bm), cv: se(&bc) }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{crossing_time, ImtDevice, SeriesElement, TransistorModel};

    fn circuit() -> ImtCircuit {
        ImtCircuit {
            device: ImtDevice::new(1e-3, 5e-5, 1.6, 0.8).unwrap(),
            v_dd: 5.0,
            inductance: 1e-3,
            capacitance: 2e-9,
            series: SeriesElement::Transistor(TransistorModel { g_m: 6e-4, v_t0: 1.6754 }),
        }
    }

    #[test]
    fn step_guard_rejects_coarse_steps() {
        let cfg = SimConfig::new(1e-6, 1e-3, 1, ModelKind::Reduced1d);
        assert!(cfg.validate(40e-6).is_err());
        let cfg = SimConfig::new(4e-7, 1e-3, 1, ModelKind::Reduced1d);
        assert!(cfg.validate(40e-6).is_ok());
        let cfg = SimConfig::new(4e-7, 1e-5, 1, ModelKind::Reduced1d);
        assert!(cfg.validate(40e-6).is_err());
    }

    #[test]
    fn noiseless_reduced_matches_closed_form() {
        let c = circuit();
        let noise = NoiseSpec::new(0.0, ThresholdDist::Constant { value: 1.6 });
        let cfg = SimConfig::new(40e-9, 2e-3, 3, ModelKind::Reduced1d);
        let train = simulate_reduced(&c, 1.85, &noise, &cfg).unwrap();
        let (theta, mu) = c.discharge(1.85);
        let expected = crossing_time(theta, mu, 0.8, 1.6);
        assert!(train.isis.len() > 10);
        for isi in &train.isis {
            assert!((isi - expected).abs() < 2.0 * cfg.dt);
        }
    }

    #[test]
    fn runs_are_reproducible_and_streams_differ() {
        let c = circuit();
        let noise = NoiseSpec::new(8.0 * 9.72e-5, ThresholdDist::Gaussian { mean: 1.6, std: 0.0584 });
        let cfg = SimConfig::new(40e-9, 5e-4, 11, ModelKind::Reduced1d);
        let a = simulate_reduced_trial(&c, 1.84, &noise, &cfg, 0).unwrap().1;
        let b = simulate_reduced_trial(&c, 1.84, &noise, &cfg, 0).unwrap().1;
        let other = simulate_reduced_trial(&c, 1.84, &noise, &cfg, 1).unwrap().1;
        assert_eq!(a, b);
        assert_ne!(a.spike_times, other.spike_times);
    }

    #[test]
    fn caricature_parameters_are_n_shaped() {
        let p = FhnParams::matched_to(&circuit(), 1.85, 1.6).unwrap();
        assert!(p.slope_middle() > 0.0);
        assert!((p.tau - 800.0).abs() < 1e-9);
        assert!((p.f(p.u1) - p.f1).abs() < 1e-15 && (p.f(p.u2) - p.f2).abs() < 1e-12);
    }

    #[test]
    fn too_few_intervals_are_rejected() {
        let t = SpikeTrain::from_times((0..50).map(f64::from).collect(), false);
        assert!(matches!(mc_isi_moments(&[t]), Err(Error::InsufficientSamples { .. })));
    }
}
