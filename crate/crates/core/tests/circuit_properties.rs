use imt_neuron::circuit::{
    bifurcation_vgs, device_voltage, fixed_points, ImtCircuit, ImtDevice, PhaseState, SeriesElement, TransistorModel,
};
use imt_neuron::config::ExperimentConfig;
use imt_neuron::Error;
use proptest::prelude::*;

fn circuit(g_vm: f64, g_vi: f64, series: SeriesElement) -> ImtCircuit {
    ImtCircuit {
        device: ImtDevice::new(g_vm, g_vi, 1.6, 0.8).unwrap(),
        v_dd: 5.0,
        inductance: 1e-3,
        capacitance: 2e-9,
        series,
    }
}

proptest! {
    #[test]
    fn device_voltage_is_increasing_and_metallic_is_lower(
        g_vi in 1e-6f64..1e-3,
        ratio in 1.5f64..100.0,
        i in 1e-7f64..1e-2,
        step in 1e-9f64..1e-3,
    ) {
        let dev = ImtDevice::new(g_vi * ratio, g_vi, 1.6, 0.8).unwrap();
        for s in [PhaseState::Insulating, PhaseState::Metallic] {
            prop_assert!(device_voltage(i + step, s, &dev) > device_voltage(i, s, &dev));
        }
        prop_assert!(device_voltage(i, PhaseState::Metallic, &dev) < device_voltage(i, PhaseState::Insulating, &dev));
    }

    #[test]
    fn fixed_points_ignore_a_common_conductance_scale(
        k in 0.01f64..100.0,
        v_gs in 1.7f64..1.9,
        use_transistor in any::<bool>(),
    ) {
        let series = |k: f64| {
            if use_transistor {
                SeriesElement::Transistor(TransistorModel { g_m: 6e-4 * k, v_t0: 1.6754 })
            } else {
                SeriesElement::Conductance { g_s: 2e-5 * k }
            }
        };
        let a = fixed_points(&circuit(1e-3, 5e-5, series(1.0)), v_gs).unwrap();
        let b = fixed_points(&circuit(1e-3 * k, 5e-5 * k, series(k)), v_gs).unwrap();
        for (x, y) in [(a.s1, b.s1), (a.s2, b.s2)] {
            let (vx, vy) = (x.device_voltage(5.0), y.device_voltage(5.0));
            prop_assert!((vx - vy).abs() <= 1e-12 * vx.abs().max(1.0));
            prop_assert!((y.i_i - k * x.i_i).abs() <= 1e-12 * (k * x.i_i).abs().max(1e-12));
        }
        prop_assert_eq!(a.oscillatory, b.oscillatory);
    }
}

#[test]
fn bifurcation_separates_rest_from_oscillation() {
    let c = ExperimentConfig::builtin().circuit().unwrap();
    let v_b = bifurcation_vgs(&c, 1.7, 1.9, 1e-9).unwrap();
    let eps = 1e-6;
    let above = fixed_points(&c, v_b + eps).unwrap();
    let below = fixed_points(&c, v_b - eps).unwrap();
    assert!(above.s1.device_voltage(c.v_dd) > c.device.v_h_nominal);
    assert!(below.s1.device_voltage(c.v_dd) <= c.device.v_h_nominal);
    assert!(above.oscillatory && !below.oscillatory);
    for v in [1.72, 1.76, 1.80] {
        assert!(!fixed_points(&c, v).unwrap().oscillatory, "{v} V should rest");
    }
    for v in [1.81, 1.84, 1.88] {
        assert!(fixed_points(&c, v).unwrap().oscillatory, "{v} V should oscillate");
    }
}

#[test]
fn bisection_needs_a_sign_change() {
    let c = ExperimentConfig::builtin().circuit().unwrap();
    assert!(matches!(
        bifurcation_vgs(&c, 1.82, 1.9, 1e-9),
        Err(Error::NoBifurcationInRange { .. })
    ));
}
