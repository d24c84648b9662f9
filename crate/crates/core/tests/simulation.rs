use imt_neuron::circuit::{crossing_time, ImtCircuit};
use imt_neuron::config::ExperimentConfig;
use imt_neuron::quad::integrate;
use imt_neuron::sim::{
    mc_isi_moments, simulate_fhn, simulate_full, simulate_reduced, simulate_reduced_trial, simulate_reduced_trials,
    FhnParams, ModelKind, NoiseSpec, SimConfig,
};
use imt_neuron::threshold::ThresholdDist;

const UNIT: f64 = 9.72e-5;

fn circuit() -> ImtCircuit {
    ExperimentConfig::builtin().circuit().unwrap()
}

fn ep3() -> ThresholdDist {
    ThresholdDist::exp_power_with_std(1.6, 0.0584, 3.0).unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn spike_trains_are_well_formed() {
    let noise = NoiseSpec::new(8.0 * UNIT, ep3());
    let train = simulate_reduced(&circuit(), 1.83, &noise, &SimConfig::new(4e-8, 5e-3, 5, ModelKind::Reduced1d)).unwrap();
    assert!(train.isis.len() > 20);
    assert!(train.spike_times.windows(2).all(|w| w[1] > w[0]));
    for (k, isi) in train.isis.iter().enumerate() {
        assert!(*isi > 0.0);
        assert_eq!(*isi, train.spike_times[k + 1] - train.spike_times[k]);
    }
}

#[test]
fn halving_the_step_barely_moves_the_noiseless_isi() {
    let c = circuit();
    let noise = NoiseSpec::new(0.0, ThresholdDist::Constant { value: 1.6 });
    let isi = |dt: f64| {
        let t = simulate_reduced(&c, 1.83, &noise, &SimConfig::new(dt, 2e-3, 1, ModelKind::Reduced1d)).unwrap();
        mean(&t.isis)
    };
    let (coarse, fine) = (isi(8e-7), isi(4e-7));
    assert!(((coarse - fine) / fine).abs() < 0.01, "{coarse} vs {fine}");
}

#[test]
fn halving_the_step_keeps_the_monte_carlo_mean_within_noise() {
    let c = circuit();
    let noise = NoiseSpec::new(14.0 * UNIT, ThresholdDist::Constant { value: 1.6 });
    let run = |dt: f64| {
        let mut cfg = SimConfig::new(dt, 1.0, 99, ModelKind::Reduced1d);
        cfg.max_spikes = Some(2_001);
        let trains = simulate_reduced_trials(&c, 1.84, &noise, &cfg, 10).unwrap();
        mc_isi_moments(&trains).unwrap()
    };
    let (coarse, fine) = (run(8e-8), run(4e-8));
    let se = fine.std_err.unwrap().mean.max(coarse.std_err.unwrap().mean);
    assert!(
        (coarse.mean - fine.mean).abs() < 2.0 * se,
        "{} vs {} (se {se})",
        coarse.mean,
        fine.mean
    );
}

#[test]
fn full_model_converges_to_the_reduction() {
    let mut c = circuit();
    // A fast metallic phase, C / g_vm = 200 ns, still resolved by the step.
    c.inductance = 1e-6;
    c.device.g_vm = 1e-2;
    let noise = NoiseSpec::new(0.0, ThresholdDist::Constant { value: 1.6 });
    let (_, full) = simulate_full(&c, 1.84, &noise, &SimConfig::new(2e-9, 1e-3, 1, ModelKind::Full2d)).unwrap();
    let reduced = simulate_reduced(&c, 1.84, &noise, &SimConfig::new(2e-9, 1e-3, 1, ModelKind::Reduced1d)).unwrap();
    assert!(full.isis.len() > 10);
    let (a, b) = (mean(&full.isis[2..]), mean(&reduced.isis));
    assert!(((a - b) / b).abs() < 0.02, "full {a} vs reduced {b}");
}

#[test]
fn threshold_only_noise_maps_through_the_crossing_time() {
    let c = circuit();
    let (m, s) = (1.6, 0.0584);
    let law = ThresholdDist::Gaussian { mean: m, std: s };
    let v_gs = 1.86;
    let mut cfg = SimConfig::new(4e-8, 1.0, 17, ModelKind::Reduced1d);
    cfg.max_spikes = Some(20_000);
    let train = simulate_reduced(&c, v_gs, &NoiseSpec::new(0.0, law), &cfg).unwrap();
    let simulated = mean(&train.isis);

    let (theta, mu) = c.discharge(v_gs);
    let density = |v: f64| (-0.5 * ((v - m) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
    let (lo, hi) = (m - 8.0 * s, m + 8.0 * s);
    let num = integrate(|v| crossing_time(theta, mu, 0.8, v) * density(v), lo, hi, 0.0, 1e-10, 2000);
    let mass = integrate(density, lo, hi, 0.0, 1e-12, 2000);
    let expected = num.value / mass.value;
    assert!(((simulated - expected) / expected).abs() < 0.01, "{simulated} vs {expected}");
}

#[test]
fn resting_circuit_spikes_rarely_and_driven_circuit_often() {
    let c = circuit();
    let noise = NoiseSpec::new(8.0 * UNIT, ep3());
    let cfg = SimConfig::new(4e-8, 0.05, 20240607, ModelKind::Reduced1d);
    let sparse = simulate_reduced(&c, 1.78, &noise, &cfg).unwrap();
    let dense = simulate_reduced(&c, 1.81, &noise, &cfg).unwrap();
    assert!(sparse.spike_times.len() < 20, "{} spikes at rest", sparse.spike_times.len());
    assert!(dense.spike_times.len() > 200, "{} spikes when driven", dense.spike_times.len());
}

#[test]
fn trials_do_not_depend_on_execution_order() {
    let noise = NoiseSpec::new(10.0 * UNIT, ep3());
    let cfg = SimConfig::new(4e-8, 1e-3, 3, ModelKind::Reduced1d);
    let parallel = simulate_reduced_trials(&circuit(), 1.84, &noise, &cfg, 6).unwrap();
    for (k, p) in parallel.iter().enumerate().rev() {
        let (_, seq) = simulate_reduced_trial(&circuit(), 1.84, &noise, &cfg, k as u64).unwrap();
        assert_eq!(&seq, p);
    }
}

fn fhn_swing(v_gs: f64) -> f64 {
    let p = FhnParams::matched_to(&circuit(), v_gs, 1.6).unwrap();
    let mut cfg = SimConfig::new(0.01, 20_000.0, 0, ModelKind::FhnCaricature);
    cfg.record_every = Some(10);
    let samples = simulate_fhn(&p, 0.0, &cfg).unwrap();
    let tail = &samples[samples.len() / 2..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.w), hi.max(s.w)));
    hi - lo
}

#[test]
fn caricature_has_a_limit_cycle_only_past_the_bifurcation() {
    let resting = fhn_swing(1.78);
    let firing = fhn_swing(1.85);
    assert!(resting < 1e-3, "resting swing {resting}");
    assert!(firing > 0.5, "firing swing {firing}");
}
