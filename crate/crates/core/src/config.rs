//! Experiment configuration read from TOML.
//!
//! Noise amplitudes are given in multiples of `noise.sigma_t_unit`
//! (V·s^(-1/2)); everything else is in SI units. Threshold laws may be named
//! by label, given inline in volts, or loaded from a file written by
//! `fit-threshold`.

use crate::circuit::{ImtCircuit, ImtDevice, SeriesElement, TransistorModel};
use crate::error::{Error, Result};
use crate::series::SeriesControl;
use crate::sim::{CrossingRule, ModelKind, SimConfig};
use crate::threshold::ThresholdDist;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

/// The configuration shipped with the tool: a VO2 oscillator tuned for a
/// sigmoid transfer curve peaking near 30 kHz.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/vo2_reference.toml");

/// A single value, an explicit list, or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Value(f64),
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    /// Grid points in increasing order. Range points are rounded to nine
    /// decimals so that tables print `1.79` rather than `1.7900000000000003`.
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            Grid::Value(x) => vec![*x],
            Grid::List(xs) => xs.clone(),
            Grid::Range { start, stop, step } => {
                if !(*step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                    return Err(Error::Config(format!(
                        "range needs step > 0 and stop >= start, got {start}..{stop} by {step}"
                    )));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect()
            }
        };
        if v.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!("grid has a non-finite value: {v:?}")));
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!("grid must be strictly increasing: {v:?}")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    pub g_vm: f64,
    pub g_vi: f64,
    /// Nominal IMT threshold; also the mean of labelled threshold laws.
    pub v_h: f64,
    pub v_l: f64,
    pub v_dd: f64,
    pub inductance: f64,
    pub capacitance: f64,
    pub g_m: f64,
    pub v_t0: f64,
    /// Replaces the transistor with a fixed series conductance.
    #[serde(default)]
    pub g_s: Option<f64>,
}

impl CircuitConfig {
    pub fn build(&self) -> Result<ImtCircuit> {
        let series = match self.g_s {
            Some(g_s) => SeriesElement::Conductance { g_s },
            None => SeriesElement::Transistor(TransistorModel {
                g_m: self.g_m,
                v_t0: self.v_t0,
            }),
        };
        let c = ImtCircuit {
            device: ImtDevice::new(self.g_vm, self.g_vi, self.v_h, self.v_l)?,
            v_dd: self.v_dd,
            inductance: self.inductance,
            capacitance: self.capacitance,
            series,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Physical size of one unit of `sigma_t`, V·s^(-1/2).
    pub sigma_t_unit: f64,
    /// Noise grid in units of `sigma_t_unit`.
    pub sigma_t: Grid,
    /// Standard deviation of labelled threshold laws, volts.
    pub threshold_std: f64,
}

/// One threshold law in a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistSpec {
    /// `"constant"`, `"gaussian"` or `"ep<kappa>"` such as `"ep3"`.
    Label(String),
    /// A law written by `fit-threshold`.
    File { file: PathBuf },
    Explicit(ThresholdDist),
}

impl DistSpec {
    /// The law in volts. Labels are centred on `v_h` with standard
    /// deviation `std`; relative file paths resolve against `base`.
    pub fn resolve(&self, v_h: f64, std: f64, base: &Path) -> Result<ThresholdDist> {
        let d = match self {
            DistSpec::Label(l) => parse_label(l, v_h, std)?,
            DistSpec::File { file } => read_dist_file(&base.join(file))?,
            DistSpec::Explicit(d) => d.clone(),
        };
        d.validate()?;
        Ok(d)
    }
}

fn parse_label(label: &str, v_h: f64, std: f64) -> Result<ThresholdDist> {
    let l = label.trim().to_ascii_lowercase();
    match l.as_str() {
        "constant" => return Ok(ThresholdDist::Constant { value: v_h }),
        "gaussian" | "normal" => return Ok(ThresholdDist::Gaussian { mean: v_h, std }),
        _ => {}
    }
    let kappa = l
        .strip_prefix("ep")
        .and_then(|k| k.trim_start_matches(['[', '(']).trim_end_matches([']', ')']).parse::<f64>().ok())
        .ok_or_else(|| Error::Config(format!("unknown threshold label {label:?}")))?;
    ThresholdDist::exp_power_with_std(v_h, std, kappa)
}

/// Reads a threshold law written as a TOML table (`kind = "gaussian"`, ...).
pub fn read_dist_file(path: &Path) -> Result<ThresholdDist> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Writes a threshold law in the format [`read_dist_file`] accepts.
pub fn dist_file_text(d: &ThresholdDist) -> Result<String> {
    toml::to_string(d).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub duration: f64,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default)]
    pub max_spikes: Option<usize>,
    #[serde(default)]
    pub record_every: Option<usize>,
    #[serde(default)]
    pub crossing: CrossingRule,
}

fn default_model() -> ModelKind {
    ModelKind::Reduced1d
}

impl SimSection {
    pub fn build(&self, seed: u64) -> SimConfig {
        SimConfig {
            dt: self.dt,
            duration: self.duration,
            seed,
            model: self.model,
            max_spikes: self.max_spikes,
            record_every: self.record_every,
            crossing: self.crossing,
        }
    }
}

/// Monte Carlo cross-checks attached to sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    #[serde(default)]
    pub enabled: bool,
    /// Spikes pooled per grid point.
    #[serde(default = "default_spikes")]
    pub spikes: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_spikes() -> usize {
    100_000
}

fn default_trials() -> usize {
    10
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        MonteCarloSection {
            enabled: false,
            spikes: default_spikes(),
            trials: default_trials(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSection {
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_max_terms")]
    pub max_terms: usize,
}

fn default_rel_tol() -> f64 {
    SeriesControl::default().rel_tol
}

fn default_max_terms() -> usize {
    SeriesControl::default().max_terms
}

impl Default for SeriesSection {
    fn default() -> Self {
        SeriesSection {
            rel_tol: default_rel_tol(),
            max_terms: default_max_terms(),
        }
    }
}

/// Per-command overrides of the shared grids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandSection {
    #[serde(default)]
    pub v_gs: Option<Grid>,
    #[serde(default)]
    pub sigma_t: Option<Grid>,
    #[serde(default)]
    pub dists: Option<Vec<DistSpec>>,
}

/// Optional measured data overlaid on the analytic results.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredSection {
    /// Table with columns `v_gs` and `rate_hz`.
    #[serde(default)]
    pub transfer_curve: Option<PathBuf>,
    /// A single CV value.
    #[serde(default)]
    pub cv: Option<PathBuf>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Where results go. Not part of the snapshot or its checksum, so the
    /// same experiment hashes the same wherever it is written.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    /// Worker threads for sweeps; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    pub v_gs: Grid,
    pub dists: Vec<DistSpec>,
    pub circuit: CircuitConfig,
    pub noise: NoiseConfig,
    pub sim: SimSection,
    #[serde(default)]
    pub monte_carlo: MonteCarloSection,
    #[serde(default)]
    pub series: SeriesSection,
    #[serde(default)]
    pub transfer_curve: CommandSection,
    #[serde(default)]
    pub cv_sweep: CommandSection,
    #[serde(default)]
    pub simulate: CommandSection,
    /// Operating points of the simulation cross-check in `validate`.
    #[serde(default)]
    pub validate: CommandSection,
    #[serde(default)]
    pub measured: MeasuredSection,
    /// Directory relative paths resolve against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Which subcommand a set of grids is resolved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    TransferCurve,
    CvSweep,
    Simulate,
    Validate,
}

/// Grids for one subcommand, noise already in V·s^(-1/2).
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub v_gs: Vec<f64>,
    /// Noise grid in config units.
    pub sigma_t_units: Vec<f64>,
    /// The same grid in V·s^(-1/2).
    pub sigma_t: Vec<f64>,
    pub dists: Vec<ThresholdDist>,
}

impl ExperimentConfig {
    /// Parses and validates a config. Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_CONFIG, Path::new(".")).expect("built-in config is valid")
    }

    pub fn circuit(&self) -> Result<ImtCircuit> {
        self.circuit.build().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn series_control(&self) -> Result<SeriesControl> {
        SeriesControl::new(self.series.rel_tol, self.series.max_terms).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sim_config(&self) -> SimConfig {
        self.sim.build(self.seed)
    }

    pub fn path(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    fn section(&self, cmd: Command) -> &CommandSection {
        match cmd {
            Command::TransferCurve => &self.transfer_curve,
            Command::CvSweep => &self.cv_sweep,
            Command::Simulate => &self.simulate,
            Command::Validate => &self.validate,
        }
    }

    pub fn resolve(&self, cmd: Command) -> Result<Resolved> {
        let s = self.section(cmd);
        let v_gs = s.v_gs.as_ref().unwrap_or(&self.v_gs).values()?;
        let sigma_t_units = s.sigma_t.as_ref().unwrap_or(&self.noise.sigma_t).values()?;
        if sigma_t_units.iter().any(|&x| x < 0.0) {
            return Err(Error::Config("sigma_t must be >= 0".into()));
        }
        let sigma_t = sigma_t_units.iter().map(|x| x * self.noise.sigma_t_unit).collect();
        let specs = s.dists.as_ref().unwrap_or(&self.dists);
        if specs.is_empty() {
            return Err(Error::Config("no threshold laws given".into()));
        }
        let dists = specs
            .iter()
            .map(|d| d.resolve(self.circuit.v_h, self.noise.threshold_std, &self.base_dir))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(Resolved {
            v_gs,
            sigma_t_units,
            sigma_t,
            dists,
        })
    }

    /// Checks everything that can be checked before a run starts.
    pub fn validate(&self) -> Result<()> {
        let circuit = self.circuit()?;
        self.series_control()?;
        if !(self.noise.sigma_t_unit > 0.0) || !(self.noise.threshold_std > 0.0) {
            return Err(Error::Config("sigma_t_unit and threshold_std must be positive".into()));
        }
        for cmd in [Command::TransferCurve, Command::CvSweep, Command::Simulate, Command::Validate] {
            self.resolve(cmd)?;
        }
        let (theta, _) = circuit.discharge(self.resolve(Command::Simulate)?.v_gs[0]);
        let sim = self.sim_config();
        match sim.model {
            ModelKind::FhnCaricature => sim.validate(1.0)?,
            _ => sim.validate(theta)?,
        }
        if self.monte_carlo.enabled && (self.monte_carlo.trials == 0 || self.monte_carlo.spikes < 100) {
            return Err(Error::Config("monte_carlo needs trials >= 1 and spikes >= 100".into()));
        }
        for p in [&self.measured.transfer_curve, &self.measured.cv].into_iter().flatten() {
            let full = self.path(p);
            if !full.is_file() {
                return Err(Error::Config(format!("measured file {} does not exist", full.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_config_parses() {
        let cfg = ExperimentConfig::builtin();
        let r = cfg.resolve(Command::CvSweep).unwrap();
        assert_eq!(r.v_gs, vec![1.8]);
        assert!(r.sigma_t_units.contains(&8.0));
    }

    #[test]
    fn range_grid_is_inclusive_and_rounded() {
        let g = Grid::Range {
            start: 1.76,
            stop: 1.9,
            step: 0.01,
        };
        let v = g.values().unwrap();
        assert_eq!(v.len(), 15);
        assert_eq!(v[3], 1.79);
        assert_eq!(*v.last().unwrap(), 1.9);
    }

    #[test]
    fn non_increasing_grid_is_rejected() {
        assert!(Grid::List(vec![1.0, 1.0]).values().is_err());
        assert!(Grid::List(vec![]).values().is_err());
    }

    #[test]
    fn labels_resolve() {
        let d = parse_label("EP[2.4]", 1.6, 0.05).unwrap();
        assert!((d.std() - 0.05).abs() < 1e-12);
        assert!(matches!(parse_label("ep3", 1.6, 0.05).unwrap(), ThresholdDist::ExpPower { kappa, .. } if kappa == 3.0));
        assert!(parse_label("cauchy", 1.6, 0.05).is_err());
    }

    #[test]
    fn oversized_step_is_rejected_at_parse_time() {
        let text = DEFAULT_CONFIG.replace("dt = 4e-8", "dt = 4e-6");
        let err = ExperimentConfig::parse(&text, Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn missing_measured_file_is_rejected() {
        let text = format!("{DEFAULT_CONFIG}\n[measured]\ncv = \"/nonexistent/cv.txt\"\n");
        assert!(ExperimentConfig::parse(&text, Path::new(".")).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = DEFAULT_CONFIG.replace("[circuit]", "[circuit]\nbogus = 1");
        assert!(ExperimentConfig::parse(&text, Path::new(".")).is_err());
    }
}
