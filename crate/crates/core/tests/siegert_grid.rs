use imt_neuron::oracle::{siegert_tau1, siegert_tau2};
use imt_neuron::series::{tau_m_unit, SeriesControl};

fn grid() -> Vec<(f64, f64)> {
    let pts: Vec<f64> = (0..=10).map(|i| -5.0 + i as f64).collect();
    let mut out = Vec::new();
    for &s in &pts {
        for &x0 in &pts {
            if x0 < s {
                out.push((s, x0));
            }
        }
    }
    out
}

#[test]
fn series_matches_quadrature_on_grid() {
    let ctl = SeriesControl::default();
    let mut worst: (f64, f64, f64, u8) = (0.0, 0.0, 0.0, 0);
    for (s, x0) in grid() {
        let pairs = [
            (1u8, tau_m_unit(s, x0, 1, &ctl).unwrap(), siegert_tau1(s, x0).unwrap()),
            (2u8, tau_m_unit(s, x0, 2, &ctl).unwrap(), siegert_tau2(s, x0).unwrap()),
        ];
        for (m, series, quad) in pairs {
            let rel = (series / quad - 1.0).abs();
            if rel > worst.0 {
                worst = (rel, s, x0, m);
            }
        }
    }
    assert!(worst.0 < 1e-9, "worst relative error {worst:?}");
}
