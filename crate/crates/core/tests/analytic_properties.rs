use imt_neuron::fpt::{isi_moments_analytic, ReducedModel};
use imt_neuron::series::{tau_m_unit, OuParams, SeriesControl};
use imt_neuron::threshold::ThresholdDist;
use imt_neuron::Error;
use proptest::prelude::*;

fn ctl() -> SeriesControl {
    SeriesControl::default()
}

/// The unit process: `μ = 0`, `θ = 1`, `σ = √2`, so `α = 1`.
fn unit_model(x0: f64, threshold: ThresholdDist) -> ReducedModel {
    ReducedModel::new(OuParams::new(0.0, 1.0, std::f64::consts::SQRT_2).unwrap(), x0, threshold).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mean_passage_time_grows_with_the_gap(
        x0 in -4.0f64..2.0,
        gap in 0.05f64..3.0,
        extra in 0.01f64..1.0,
    ) {
        let s = x0 + gap;
        let base = tau_m_unit(s, x0, 1, &ctl()).unwrap();
        prop_assert!(tau_m_unit(s + extra, x0, 1, &ctl()).unwrap() > base);
        prop_assert!(tau_m_unit(s, x0 - extra, 1, &ctl()).unwrap() > base);
    }

    #[test]
    fn passage_time_variance_is_nonnegative(x0 in -5.0f64..3.0, gap in 0.01f64..3.0) {
        let s = x0 + gap;
        let t1 = tau_m_unit(s, x0, 1, &ctl()).unwrap();
        let t2 = tau_m_unit(s, x0, 2, &ctl()).unwrap();
        let t3 = tau_m_unit(s, x0, 3, &ctl()).unwrap();
        prop_assert!(t2 >= t1 * t1 * (1.0 - 1e-12));
        // Lyapunov: E[T^3]^(1/3) >= E[T^2]^(1/2).
        prop_assert!(t3.cbrt() >= t2.sqrt() * (1.0 - 1e-12));
    }

    #[test]
    fn threshold_spread_only_adds_variance(
        a in -0.5f64..1.0,
        gap in 0.1f64..1.5,
        p in 0.05f64..0.95,
    ) {
        // Law of total variance: Var T = E[Var(T | S)] + Var(E[T | S]).
        let b = a + gap;
        let x0 = -1.5;
        let mix = isi_moments_analytic(&unit_model(x0, ThresholdDist::Discrete { atoms: vec![(a, p), (b, 1.0 - p)] }), 2, &ctl()).unwrap();
        let at = |s: f64| isi_moments_analytic(&unit_model(x0, ThresholdDist::Constant { value: s }), 2, &ctl()).unwrap();
        let (ma, mb) = (at(a), at(b));
        let within = p * ma.variance.unwrap() + (1.0 - p) * mb.variance.unwrap();
        let between = p * (1.0 - p) * (ma.mean - mb.mean).powi(2);
        let total = mix.variance.unwrap();
        prop_assert!(total >= within);
        prop_assert!((total - within - between).abs() <= 1e-9 * total);
        // Jensen on the mean: averaging over S can only raise E[T^2] over E[T]^2.
        prop_assert!(mix.raw2.unwrap() >= mix.mean * mix.mean);
    }
}

#[test]
fn constant_boundary_collapses_to_the_point_result() {
    let m = isi_moments_analytic(&unit_model(-1.0, ThresholdDist::Constant { value: 1.5 }), 3, &ctl()).unwrap();
    // α = 1 up to the rounding of √2 · √2.
    let close = |a: f64, b: f64| ((a - b) / b).abs() < 1e-14;
    assert!(close(m.mean, tau_m_unit(1.5, -1.0, 1, &ctl()).unwrap()));
    assert!(close(m.raw2.unwrap(), tau_m_unit(1.5, -1.0, 2, &ctl()).unwrap()));
    assert!(close(m.raw3.unwrap(), tau_m_unit(1.5, -1.0, 3, &ctl()).unwrap()));
}

#[test]
fn narrow_gaussian_approaches_the_constant_boundary() {
    let point = isi_moments_analytic(&unit_model(-1.0, ThresholdDist::Constant { value: 1.0 }), 2, &ctl()).unwrap();
    let narrow = isi_moments_analytic(&unit_model(-1.0, ThresholdDist::Gaussian { mean: 1.0, std: 1e-3 }), 2, &ctl()).unwrap();
    assert!(((narrow.mean - point.mean) / point.mean).abs() < 1e-5);
    assert!(((narrow.cv.unwrap() - point.cv.unwrap()) / point.cv.unwrap()).abs() < 1e-4);
}

#[test]
fn heavy_gaussian_has_a_finite_mean_but_infinite_variance() {
    let law = ThresholdDist::Gaussian { mean: 0.5, std: 0.8 };
    assert!(isi_moments_analytic(&unit_model(-1.0, law.clone()), 1, &ctl()).is_ok());
    assert!(matches!(isi_moments_analytic(&unit_model(-1.0, law), 2, &ctl()), Err(Error::Diverged)));
}

#[test]
fn lighter_tails_keep_the_variance_finite() {
    let ep3 = ThresholdDist::exp_power_with_std(0.5, 0.5, 3.0).unwrap();
    let m = isi_moments_analytic(&unit_model(-1.0, ep3), 2, &ctl()).unwrap();
    assert!(m.cv.unwrap() > 0.0 && m.cv.unwrap().is_finite());
}
