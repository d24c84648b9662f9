//! Deterministic description of the IMT relaxation oscillator.
//!
//! The device sits between the supply `v_dd` and an output node `v_o`; an
//! inductor `L` in series with the device carries the current `i_i`, a
//! capacitor `C` holds `v_o`, and a series element (a plain conductance or a
//! saturated transistor) drains the output node:
//!
//! ```text
//! L di_i/dt = v_dd - h(i_i, s) - v_o
//! C dv_o/dt = i_i - I_series(v_o)
//! ```
//!
//! `h(i, s) = i / g_vi` in the insulating state and `i / g_vm` in the
//! metallic state. Fixed points are where the load line meets each branch.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tolerance for threshold comparisons at fixed points, in volts.
pub const REACH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseState {
    Insulating,
    Metallic,
}

impl PhaseState {
    /// `0` for insulating and `1` for metallic, as written to trace files.
    pub fn code(self) -> u8 {
        match self {
            PhaseState::Insulating => 0,
            PhaseState::Metallic => 1,
        }
    }
}

/// The hysteretic two-state resistor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImtDevice {
    pub g_vm: f64,
    pub g_vi: f64,
    pub v_h_nominal: f64,
    pub v_l: f64,
}

impl ImtDevice {
    pub fn new(g_vm: f64, g_vi: f64, v_h_nominal: f64, v_l: f64) -> Result<Self> {
        let d = ImtDevice { g_vm, g_vi, v_h_nominal, v_l };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_vm > self.g_vi && self.g_vi > 0.0) || !self.g_vm.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need g_vm > g_vi > 0, got g_vm = {}, g_vi = {}",
                self.g_vm, self.g_vi
            )));
        }
        if !(self.v_h_nominal > self.v_l && self.v_l > 0.0) || !self.v_h_nominal.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need v_h > v_l > 0, got v_h = {}, v_l = {}",
                self.v_h_nominal, self.v_l
            )));
        }
        Ok(())
    }

    pub fn conductance(&self, s: PhaseState) -> f64 {
        match s {
            PhaseState::Insulating => self.g_vi,
            PhaseState::Metallic => self.g_vm,
        }
    }
}

/// Device voltage `h(i_i, s)`.
///
/// ```
/// use imt_neuron::circuit::{device_voltage, ImtDevice, PhaseState};
/// let dev = ImtDevice::new(1e-3, 5e-5, 1.6, 0.8).unwrap();
/// assert_eq!(device_voltage(0.0, PhaseState::Metallic, &dev), 0.0);
/// assert!((device_voltage(8e-5, PhaseState::Insulating, &dev) - 1.6).abs() < 1e-12);
/// ```
pub fn device_voltage(i_i: f64, s: PhaseState, dev: &ImtDevice) -> f64 {
    i_i / dev.conductance(s)
}

/// Saturated transistor drawing `g_m (v_gs - v_t0)` regardless of `v_ds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransistorModel {
    pub g_m: f64,
    pub v_t0: f64,
}

impl TransistorModel {
    pub fn current(&self, v_gs: f64) -> f64 {
        (self.g_m * (v_gs - self.v_t0)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesElement {
    Conductance { g_s: f64 },
    Transistor(TransistorModel),
}

/// The full oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImtCircuit {
    pub device: ImtDevice,
    pub v_dd: f64,
    pub inductance: f64,
    pub capacitance: f64,
    pub series: SeriesElement,
}

impl ImtCircuit {
    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        if !(self.v_dd > self.device.v_h_nominal) {
            return Err(Error::InvalidParameter(format!(
                "v_dd = {} must exceed v_h = {}",
                self.v_dd, self.device.v_h_nominal
            )));
        }
        if !(self.inductance >= 0.0) || !(self.capacitance > 0.0) {
            return Err(Error::InvalidParameter("need L >= 0 and C > 0".into()));
        }
        match self.series {
            SeriesElement::Conductance { g_s } if !(g_s > 0.0) => {
                Err(Error::InvalidParameter(format!("series conductance must be positive, got {g_s}")))
            }
            SeriesElement::Transistor(t) if !(t.g_m > 0.0) || !t.v_t0.is_finite() => {
                Err(Error::InvalidParameter(format!("transconductance must be positive, got {}", t.g_m)))
            }
            _ => Ok(()),
        }
    }

    /// Current drawn by the series element at output voltage `v_o`.
    pub fn series_current(&self, v_o: f64, v_gs: f64) -> f64 {
        match self.series {
            SeriesElement::Conductance { g_s } => g_s * v_o,
            SeriesElement::Transistor(t) => t.current(v_gs),
        }
    }

    /// Insulating-phase relaxation time and fixed point `(θ, μ)` of the
    /// device voltage, with the inductor shorted.
    ///
    /// A transistor load gives `θ = C/g_vi` and `μ = I_T/g_vi`; a conductance
    /// `g_s` gives `θ = C/(g_vi + g_s)` and `μ = g_s v_dd/(g_vi + g_s)`.
    pub fn discharge(&self, v_gs: f64) -> (f64, f64) {
        let g_vi = self.device.g_vi;
        let c = self.capacitance;
        match self.series {
            SeriesElement::Transistor(t) => (c / g_vi, t.current(v_gs) / g_vi),
            SeriesElement::Conductance { g_s } if g_s.is_infinite() => (0.0, self.v_dd),
            SeriesElement::Conductance { g_s } => (c / (g_vi + g_s), g_s * self.v_dd / (g_vi + g_s)),
        }
    }

    /// The same circuit with the transistor replaced by a fixed conductance,
    /// or with a different `v_gs`-independent series element.
    pub fn with_series(mut self, series: SeriesElement) -> Self {
        self.series = series;
        self
    }
}

/// A fixed point `(i_i, v_o)` of one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub i_i: f64,
    pub v_o: f64,
}

impl FixedPoint {
    pub fn device_voltage(&self, v_dd: f64) -> f64 {
        v_dd - self.v_o
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointReport {
    /// Insulating-branch fixed point.
    pub s1: FixedPoint,
    /// Metallic-branch fixed point.
    pub s2: FixedPoint,
    pub s1_reachable: bool,
    pub s2_reachable: bool,
    pub oscillatory: bool,
}

fn branch_fixed_point(circuit: &ImtCircuit, g: f64, v_gs: f64) -> Result<FixedPoint> {
    let v_dd = circuit.v_dd;
    let fp = match circuit.series {
        SeriesElement::Transistor(t) => {
            let i = t.current(v_gs);
            FixedPoint { i_i: i, v_o: v_dd - i / g }
        }
        SeriesElement::Conductance { g_s } if g_s.is_infinite() => FixedPoint { i_i: g * v_dd, v_o: 0.0 },
        SeriesElement::Conductance { g_s } => {
            // i = g_s v_o and v_dd - v_o = i / g.
            if g + g_s == 0.0 {
                return Err(Error::DegenerateLoadLine);
            }
            let v_o = v_dd * g / (g + g_s);
            FixedPoint { i_i: g_s * v_o, v_o }
        }
    };
    if !fp.i_i.is_finite() || !fp.v_o.is_finite() {
        return Err(Error::DegenerateLoadLine);
    }
    Ok(fp)
}

/// Load-line intersections with both device branches.
///
/// The circuit oscillates when neither fixed point is reachable before its
/// exit threshold: the insulating one lies above `v_h` and the metallic one
/// below `v_l`.
pub fn fixed_points(circuit: &ImtCircuit, v_gs: f64) -> Result<FixedPointReport> {
    circuit.validate()?;
    let dev = &circuit.device;
    let s1 = branch_fixed_point(circuit, dev.g_vi, v_gs)?;
    let s2 = branch_fixed_point(circuit, dev.g_vm, v_gs)?;
    let in_band = |v: f64| v >= dev.v_l - REACH_TOL && v <= dev.v_h_nominal + REACH_TOL;
    let v1 = s1.device_voltage(circuit.v_dd);
    let v2 = s2.device_voltage(circuit.v_dd);
    Ok(FixedPointReport {
        s1,
        s2,
        s1_reachable: in_band(v1),
        s2_reachable: in_band(v2),
        oscillatory: v1 > dev.v_h_nominal + REACH_TOL && v2 < dev.v_l - REACH_TOL,
    })
}

/// Bisects for the gate voltage at which the oscillatory flag flips.
pub fn bifurcation_vgs(circuit: &ImtCircuit, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let osc = |v: f64| fixed_points(circuit, v).map(|r| r.oscillatory);
    let (mut a, mut b) = (lo, hi);
    let fa = osc(a)?;
    if fa == osc(b)? {
        return Err(Error::NoBifurcationInRange { lo, hi });
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if osc(mid)? == fa {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Default bisection tolerance for [`bifurcation_vgs`], 1 µV.
pub const BIFURCATION_TOL: f64 = 1e-6;

/// Noiseless insulating-phase duration from `v_l` up to `v_h` when the
/// discharge relaxes toward `mu`: `θ ln((μ - v_l)/(μ - v_h))`.
///
/// Zero when `v_h <= v_l` (the cycle starts past the boundary) and infinite
/// when the fixed point does not clear the threshold.
pub fn crossing_time(theta: f64, mu: f64, v_l: f64, v_h: f64) -> f64 {
    if v_h <= v_l {
        0.0
    } else if mu <= v_h {
        f64::INFINITY
    } else {
        theta * ((mu - v_l) / (mu - v_h)).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn device() -> ImtDevice {
        ImtDevice::new(1e-3, 5e-5, 1.6, 0.8).unwrap()
    }

    fn with_conductance(g_s: f64) -> ImtCircuit {
        ImtCircuit {
            device: device(),
            v_dd: 5.0,
            inductance: 1e-3,
            capacitance: 2e-9,
            series: SeriesElement::Conductance { g_s },
        }
    }

    #[test]
    fn invalid_devices_are_rejected() {
        assert!(ImtDevice::new(1e-5, 5e-5, 1.6, 0.8).is_err());
        assert!(ImtDevice::new(1e-3, 5e-5, 0.7, 0.8).is_err());
        let mut c = with_conductance(1e-4);
        c.v_dd = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn metallic_branch_is_shallower() {
        let d = device();
        let i = 100e-6;
        assert!(device_voltage(i, PhaseState::Metallic, &d) < device_voltage(i, PhaseState::Insulating, &d));
    }

    #[test]
    fn shorted_series_element_puts_s1_at_supply() {
        let r = fixed_points(&with_conductance(f64::INFINITY), 0.0).unwrap();
        assert_eq!(r.s1.v_o, 0.0);
        assert_eq!(r.s1.device_voltage(5.0), 5.0);
        assert!(!r.s1_reachable);
    }

    #[test]
    fn conductance_load_line_algebra() {
        let g_s = 2e-4;
        let c = with_conductance(g_s);
        let r = fixed_points(&c, 0.0).unwrap();
        let v_dev = r.s1.device_voltage(c.v_dd);
        assert!((r.s1.i_i - c.device.g_vi * v_dev).abs() < 1e-18);
        assert!((r.s1.i_i - g_s * r.s1.v_o).abs() < 1e-18);
    }

    #[test]
    fn crossing_time_edge_cases() {
        assert_eq!(crossing_time(1.0, 2.0, 0.8, 0.8), 0.0);
        assert!(crossing_time(1.0, 1.5, 0.8, 1.6).is_infinite());
        assert!((crossing_time(1.0, 2.0, 1.0, 1.5) - 2f64.ln()).abs() < 1e-15);
    }
}
