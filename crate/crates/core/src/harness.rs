//! The experiments behind the command-line tool.
//!
//! Each command reads an [`ExperimentConfig`], writes its tables into the
//! output directory and finishes with a `manifest.json` listing every file
//! and its checksum. Grid points that fail are recorded in the tables and
//! never abort a sweep.

use crate::circuit::ImtCircuit;
use crate::config::{Command, ExperimentConfig, Grid};
use crate::error::{Error, Result};
use crate::fpt::{circuit_to_ou, cv_sweep, deterministic_rate, isi_moments_analytic, CvEntry, IsiMoments};
use crate::io::{self, num, RunManifest, Table};
use crate::oracle;
use crate::series::{tau_m_scaled, tau_m_unit, OuParams, SeriesControl};
use crate::sim::{
    mc_isi_moments, simulate_fhn, simulate_full, simulate_reduced_trial, simulate_reduced_trials, FhnParams,
    ModelKind, NoiseSpec, SimConfig, SpikeTrain, REJECTION_WARN_RATE,
};
use crate::threshold::{fit, FitFamily, ThresholdDist};
use crate::config::dist_file_text;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::statistics::{Data, OrderStatistics};
use std::path::{Path, PathBuf};

/// Process exit status for an error: 1 for bad input, 2 for numerical
/// failure. Validation failures exit with 3 through [`ValidationReport`].
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Io { .. }
        | Error::Parse { .. }
        | Error::InvalidParameter(_)
        | Error::InsufficientData { .. }
        | Error::DegenerateVariance
        | Error::Ordering { .. }
        | Error::SaturationViolated { .. }
        | Error::DegenerateLoadLine => 1,
        _ => 2,
    }
}

pub const EXIT_VALIDATION: i32 = 3;

/// Command-line replacements for config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub v_gs: Option<Vec<f64>>,
    /// In units of `noise.sigma_t_unit`.
    pub sigma_t: Option<Vec<f64>>,
    pub dists: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Applies the overrides to every command section and revalidates.
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        use crate::config::DistSpec;
        for sec in [&mut cfg.transfer_curve, &mut cfg.cv_sweep, &mut cfg.simulate, &mut cfg.validate] {
            if let Some(v) = &self.v_gs {
                sec.v_gs = Some(Grid::List(v.clone()));
            }
            if let Some(s) = &self.sigma_t {
                sec.sigma_t = Some(Grid::List(s.clone()));
            }
            if let Some(d) = &self.dists {
                sec.dists = Some(d.iter().cloned().map(DistSpec::Label).collect());
            }
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate()
    }
}

/// Files written by one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

struct Writer {
    dir: PathBuf,
    manifest: RunManifest,
    config_sha: String,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(cfg: &ExperimentConfig, command: &str) -> Result<Self> {
        let snapshot = toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?;
        let manifest = RunManifest::start(command, cfg.seed, &snapshot);
        Ok(Writer {
            dir: cfg.output_dir.clone(),
            config_sha: manifest.config_sha256.clone(),
            manifest,
            files: Vec::new(),
        })
    }

    fn table(&mut self, name: &str, table: Table) -> Result<()> {
        let path = self.dir.join(name);
        let t = table.with_meta("command", &self.manifest.command).with_meta("config_sha256", &self.config_sha);
        let sha = t.write(&path)?;
        self.manifest.record(Path::new(name), sha);
        self.files.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        let sha = io::write_text(&path, text)?;
        self.manifest.record(Path::new(name), sha);
        self.files.push(path);
        Ok(())
    }

    fn spikes(&mut self, name: &str, train: &SpikeTrain) -> Result<()> {
        let path = self.dir.join(name);
        let meta = vec![("config_sha256".to_string(), self.config_sha.clone())];
        let sha = io::write_spike_train(&path, train, &meta)?;
        self.manifest.record(Path::new(name), sha);
        self.files.push(path);
        Ok(())
    }

    fn finish(self) -> Result<Outputs> {
        let manifest = self.manifest.finish(&self.dir)?;
        Ok(Outputs {
            dir: self.dir,
            files: self.files,
            manifest,
        })
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

/// Seed for grid point `index`, decorrelated from its neighbours.
fn point_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Analytic ISI moments at one operating point; `sigma_t` in V·s^(-1/2).
pub fn analytic_point(
    circuit: &ImtCircuit,
    v_gs: f64,
    sigma_t: f64,
    dist: &ThresholdDist,
    highest: u8,
    ctl: &SeriesControl,
) -> Result<IsiMoments> {
    let model = circuit_to_ou(circuit, v_gs, sigma_t, dist)?;
    isi_moments_analytic(&model, highest, ctl)
}

fn analytic_rate(circuit: &ImtCircuit, v_gs: f64, sigma_t: f64, dist: &ThresholdDist, ctl: &SeriesControl) -> Result<f64> {
    if sigma_t == 0.0 {
        deterministic_rate(circuit, v_gs, dist.mean())
    } else {
        Ok(analytic_point(circuit, v_gs, sigma_t, dist, 1, ctl)?.firing_rate)
    }
}

/// Largest number of reduced-model steps a single Monte Carlo point may take.
pub const MC_STEP_BUDGET: f64 = 2e9;

/// Monte Carlo ISI statistics of the reduced model at one point, pooling
/// `spikes` intervals over `trials` trains. `expected_isi` sizes the runs.
pub fn monte_carlo_point(
    circuit: &ImtCircuit,
    v_gs: f64,
    noise: &NoiseSpec,
    sim: &SimConfig,
    spikes: usize,
    trials: usize,
    expected_isi: f64,
) -> Result<IsiMoments> {
    let per_trial = spikes.div_ceil(trials) + 1;
    if !(expected_isi > 0.0 && expected_isi.is_finite()) {
        return Err(Error::Domain("no finite mean interval to size the run".into()));
    }
    let steps = expected_isi * (spikes + trials) as f64 / sim.dt;
    if steps > MC_STEP_BUDGET {
        return Err(Error::Domain(format!("needs about {steps:.1e} steps, over the {MC_STEP_BUDGET:.0e} budget")));
    }
    let mut cfg = sim.clone();
    cfg.model = ModelKind::Reduced1d;
    cfg.record_every = None;
    cfg.max_spikes = Some(per_trial);
    // Generous horizon: the spike cap ends every ordinary run long before.
    cfg.duration = (20.0 * expected_isi * per_trial as f64).max(100.0 * cfg.dt);
    let trains = simulate_reduced_trials(circuit, v_gs, noise, &cfg, trials)?;
    mc_isi_moments(&trains)
}

/// One row of the transfer-curve table.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferRow {
    pub dist: String,
    /// In config units.
    pub sigma_t: f64,
    pub v_gs: f64,
    pub rate: std::result::Result<f64, String>,
    pub mc: Option<std::result::Result<IsiMoments, String>>,
}

/// Least-squares distance of one candidate to the measured curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranked {
    pub dist: String,
    pub sigma_t: f64,
    pub sse: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub rows: Vec<TransferRow>,
    /// Candidates from best to worst fit, when measured data was supplied.
    pub ranking: Vec<Ranked>,
    pub outputs: Outputs,
}

/// Reads a measured transfer curve with columns `v_gs` and `rate_hz`.
pub fn read_measured_curve(path: &Path) -> Result<Vec<(f64, f64)>> {
    let t = Table::read(path)?;
    let v = t.numbers("v_gs")?;
    let r = t.numbers("rate_hz")?;
    let pts: Vec<(f64, f64)> = v.into_iter().zip(r).filter_map(|(a, b)| Some((a?, b?))).collect();
    if pts.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(pts)
}

/// Firing rate against gate voltage for every threshold law and noise level.
pub fn transfer_curve(cfg: &ExperimentConfig) -> Result<TransferReport> {
    let circuit = cfg.circuit()?;
    let ctl = cfg.series_control()?;
    let grid = cfg.resolve(Command::TransferCurve)?;
    let sim = cfg.sim_config();
    let mc = &cfg.monte_carlo;
    let unit = cfg.noise.sigma_t_unit;

    let mut points: Vec<(&ThresholdDist, f64, f64)> = Vec::new();
    for d in &grid.dists {
        for &s in &grid.sigma_t_units {
            points.extend(grid.v_gs.iter().map(|&v| (d, s, v)));
        }
    }
    let rows: Vec<TransferRow> = points
        .par_iter()
        .enumerate()
        .map(|(i, &(dist, s, v))| {
            let rate = analytic_rate(&circuit, v, s * unit, dist, &ctl);
            let mc_result = (mc.enabled && s > 0.0).then(|| {
                let expected = rate.as_ref().map_err(|e| e.to_string())?.recip();
                let mut sim = sim.clone();
                sim.seed = point_seed(cfg.seed, i);
                monte_carlo_point(&circuit, v, &NoiseSpec::new(s * unit, dist.clone()), &sim, mc.spikes, mc.trials, expected)
                    .map_err(|e| e.to_string())
            });
            TransferRow {
                dist: dist.label(),
                sigma_t: s,
                v_gs: v,
                rate: rate.map_err(|e| e.to_string()),
                mc: mc_result,
            }
        })
        .collect();

    let mut w = Writer::new(cfg, "transfer-curve")?;
    let mut t = Table::new([
        "dist", "sigma_t", "v_gs", "rate_hz", "status", "mc_rate_hz", "mc_rate_se_hz", "mc_rel_diff", "mc_status",
    ])
    .with_meta("sigma_t_unit", unit)
    .with_meta("seed", cfg.seed);
    for r in &rows {
        let (mc_rate, mc_se, rel, mc_status) = match &r.mc {
            None => (None, None, None, String::new()),
            Some(Ok(m)) => {
                let se = m.std_err.map(|e| e.mean / (m.mean * m.mean));
                let rel = r.rate.as_ref().ok().map(|a| (a - m.firing_rate) / m.firing_rate);
                (Some(m.firing_rate), se, rel, "ok".to_string())
            }
            Some(Err(e)) => (None, None, None, format!("skipped: {e}")),
        };
        t.push(vec![
            r.dist.clone(),
            num(r.sigma_t),
            num(r.v_gs),
            r.rate.as_ref().map_or_else(|_| String::new(), |&x| num(x)),
            r.rate.as_ref().map_or_else(|e| e.clone(), |_| "ok".into()),
            fmt_opt(mc_rate),
            fmt_opt(mc_se),
            fmt_opt(rel),
            mc_status,
        ]);
    }
    w.table("transfer_curve.csv", t)?;

    let mut ranking = Vec::new();
    if let Some(p) = &cfg.measured.transfer_curve {
        let measured = read_measured_curve(&cfg.path(p))?;
        let candidates: Vec<(&ThresholdDist, f64)> = grid
            .dists
            .iter()
            .flat_map(|d| grid.sigma_t_units.iter().map(move |&s| (d, s)))
            .collect();
        let fitted: Vec<(Ranked, Vec<Option<f64>>)> = candidates
            .par_iter()
            .map(|&(d, s)| {
                let model: Vec<Option<f64>> = measured
                    .iter()
                    .map(|&(v, _)| analytic_rate(&circuit, v, s * unit, d, &ctl).ok())
                    .collect();
                let sse = measured
                    .iter()
                    .zip(&model)
                    .map(|(&(_, y), m)| m.map_or(f64::INFINITY, |m| (m - y) * (m - y)))
                    .sum::<f64>();
                let ranked = Ranked {
                    dist: d.label(),
                    sigma_t: s,
                    sse,
                    rms: (sse / measured.len() as f64).sqrt(),
                };
                (ranked, model)
            })
            .collect();
        let mut overlay = Table::new(["dist", "sigma_t", "v_gs", "measured_rate_hz", "model_rate_hz"]);
        for (r, model) in &fitted {
            for (&(v, y), m) in measured.iter().zip(model) {
                overlay.push(vec![r.dist.clone(), num(r.sigma_t), num(v), num(y), fmt_opt(*m)]);
            }
        }
        w.table("transfer_curve_overlay.csv", overlay)?;
        ranking = fitted.into_iter().map(|f| f.0).collect();
        ranking.sort_by(|a, b| a.sse.total_cmp(&b.sse));
        let mut rt = Table::new(["rank", "dist", "sigma_t", "sse_hz2", "rms_hz"]);
        for (i, r) in ranking.iter().enumerate() {
            rt.push(vec![(i + 1).to_string(), r.dist.clone(), num(r.sigma_t), num(r.sse), num(r.rms)]);
        }
        w.table("transfer_curve_ranking.csv", rt)?;
    }
    Ok(TransferReport {
        rows,
        ranking,
        outputs: w.finish()?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub v_gs: f64,
    /// `(sigma_t in config units, dist label, entry)` in grid order.
    pub rows: Vec<(f64, String, CvEntry)>,
    pub measured_cv: Option<f64>,
    pub outputs: Outputs,
}

/// Interspike-interval CV against noise level at a fixed gate voltage.
pub fn cv_sweep_cmd(cfg: &ExperimentConfig) -> Result<CvReport> {
    let circuit = cfg.circuit()?;
    let ctl = cfg.series_control()?;
    let grid = cfg.resolve(Command::CvSweep)?;
    if grid.v_gs.len() != 1 {
        return Err(Error::Config(format!("cv-sweep needs a single v_gs, got {:?}", grid.v_gs)));
    }
    let v_gs = grid.v_gs[0];
    let measured_cv = match &cfg.measured.cv {
        Some(p) => Some(
            *io::read_column(&cfg.path(p))?
                .first()
                .ok_or(Error::InsufficientData { needed: 1, got: 0 })?,
        ),
        None => None,
    };
    let raw = cv_sweep(&circuit, v_gs, &grid.sigma_t, &grid.dists, &ctl);
    let per = grid.dists.len();
    let rows: Vec<(f64, String, CvEntry)> = raw
        .into_iter()
        .enumerate()
        .map(|(i, r)| (grid.sigma_t_units[i / per], r.dist.label(), r.entry))
        .collect();

    let mut w = Writer::new(cfg, "cv-sweep")?;
    let mut t = Table::new(["sigma_t", "dist", "cv", "status", "detail"])
        .with_meta("v_gs", v_gs)
        .with_meta("sigma_t_unit", cfg.noise.sigma_t_unit);
    if let Some(m) = measured_cv {
        t = t.with_meta("measured_cv", m);
    }
    for (s, d, e) in &rows {
        let detail = match e {
            CvEntry::Failed(msg) => msg.clone(),
            _ => String::new(),
        };
        t.push(vec![num(*s), d.clone(), fmt_opt(e.value()), e.status().into(), detail]);
    }
    w.table("cv_sweep.csv", t)?;
    Ok(CvReport {
        v_gs,
        rows,
        measured_cv,
        outputs: w.finish()?,
    })
}

/// One check of the validation battery.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, error: f64, tolerance: f64, detail: String) -> Self {
        Check {
            name: name.into(),
            error,
            tolerance,
            pass: error <= tolerance,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub outputs: Outputs,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Constant-boundary grid for the quadrature comparison, unit OU scale.
pub const SIEGERT_GRID: [(f64, f64); 8] = [
    (1.0, 0.0),
    (2.0, -1.0),
    (0.0, -3.0),
    (-2.0, -5.0),
    (-1.0, -4.0),
    (1.5, -1.0),
    (3.0, 0.5),
    (4.0, -2.0),
];

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Series against Siegert quadrature, worst relative error over the grid.
pub fn check_siegert(ctl: &SeriesControl) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut at = String::new();
    for &(s, x0) in &SIEGERT_GRID {
        let e1 = rel(tau_m_unit(s, x0, 1, ctl)?, oracle::siegert_tau1(s, x0)?);
        let e2 = rel(tau_m_unit(s, x0, 2, ctl)?, oracle::siegert_tau2(s, x0)?);
        for (m, e) in [(1, e1), (2, e2)] {
            if e > worst || e.is_nan() {
                worst = if e.is_nan() { f64::INFINITY } else { e };
                at = format!("tau{m} at S = {s}, x0 = {x0}");
            }
        }
    }
    Ok(Check::new("series vs Siegert quadrature", worst, 1e-6, at))
}

/// Fluctuating-boundary moments of a two-point law against the mixture of
/// constant-boundary moments.
pub fn check_tower(ctl: &SeriesControl) -> Result<Check> {
    let ou = OuParams::new(0.0, 1.0, 2f64.sqrt())?;
    let mut worst: f64 = 0.0;
    for (atoms, v_l) in [
        (vec![(1.0, 0.3), (2.0, 0.7)], -1.0),
        (vec![(0.5, 0.5), (2.5, 0.5)], -2.0),
        (vec![(-0.5, 0.9), (3.0, 0.1)], -3.0),
    ] {
        let model = crate::fpt::ReducedModel::new(ou, v_l, ThresholdDist::Discrete { atoms: atoms.clone() })?;
        let m = isi_moments_analytic(&model, 3, ctl)?;
        for (order, got) in [(1u8, m.mean), (2, m.raw2.unwrap_or(f64::NAN)), (3, m.raw3.unwrap_or(f64::NAN))] {
            let mut want = 0.0;
            for &(s, p) in &atoms {
                want += p * tau_m_unit(s, v_l, order, ctl)?;
            }
            let e = rel(got, want);
            worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
        }
    }
    Ok(Check::new("tower rule, two-point thresholds", worst, 1e-8, "moments 1-3".into()))
}

/// `τ_m(S, x0; θ, σ) = θ^m τ̃_m(αS, αx0)` on random parameters.
pub fn check_scaling(ctl: &SeriesControl, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let theta = 10f64.powf(rng.random_range(-6.0..0.0));
        let sigma = 10f64.powf(rng.random_range(-2.0..1.0)) / theta.sqrt();
        let ou = OuParams::new(0.0, theta, sigma)?;
        let a = ou.alpha();
        let s = rng.random_range(-3.0..4.0) / a;
        let x0 = s - rng.random_range(0.1..5.0) / a;
        for m in 1..=2u8 {
            let lhs = tau_m_scaled(s, x0, m, &ou, ctl)?;
            let rhs = theta.powi(i32::from(m)) * tau_m_unit(a * s, a * x0, m, ctl)?;
            worst = worst.max(rel(lhs, rhs));
        }
    }
    Ok(Check::new("scaling identity", worst, 1e-12, "20 random (theta, sigma, S, x0)".into()))
}

/// Unit OU mean passage time against an extrapolated Monte Carlo estimate,
/// in standard errors.
pub fn check_unit_monte_carlo(ctl: &SeriesControl, seed: u64) -> Result<Check> {
    let (s, x0) = (1.0, -1.0);
    let mc = oracle::mc_unit_fpt_extrapolated(s, x0, 0.02, 100_000, seed)?;
    let z = mc.z_score(1, tau_m_unit(s, x0, 1, ctl)?).abs();
    Ok(Check::new(
        "series vs unit OU Monte Carlo (std errors)",
        z,
        3.0,
        format!("S = {s}, x0 = {x0}, 1e5 paths"),
    ))
}

/// Analytic ISI statistics against reduced-model simulation on the
/// configured circuit, at every point of the `[validate]` grid.
pub fn check_circuit_monte_carlo(cfg: &ExperimentConfig, ctl: &SeriesControl) -> Result<Vec<Check>> {
    let circuit = cfg.circuit()?;
    let grid = cfg.resolve(Command::Validate)?;
    let mut out = Vec::new();
    let mut index = 0;
    for &v_gs in &grid.v_gs {
        for (&s_units, &sigma_t) in grid.sigma_t_units.iter().zip(&grid.sigma_t) {
            for d in &grid.dists {
                index += 1;
                let name = format!("analytic vs simulated ISI, {} at v_gs = {v_gs}, sigma_t = {s_units}", d.label());
                let a = match analytic_point(&circuit, v_gs, sigma_t, d, 2, ctl) {
                    Ok(a) => a,
                    Err(e) => {
                        out.push(Check::new(&name, f64::INFINITY, 0.02, e.to_string()));
                        continue;
                    }
                };
                let mut sim = cfg.sim_config();
                sim.seed = point_seed(cfg.seed, index);
                let mc = monte_carlo_point(&circuit, v_gs, &NoiseSpec::new(sigma_t, d.clone()), &sim, 100_000, 10, a.mean)?;
                let e_cv = match (a.cv, mc.cv) {
                    (Some(x), Some(y)) => rel(x, y),
                    _ => f64::INFINITY,
                };
                out.push(Check::new(
                    &format!("{name}: mean"),
                    rel(a.mean, mc.mean),
                    0.02,
                    format!("{:.6e} vs {:.6e} s", a.mean, mc.mean),
                ));
                out.push(Check::new(
                    &format!("{name}: cv"),
                    e_cv,
                    0.05,
                    format!("{} vs {}", fmt_opt(a.cv), fmt_opt(mc.cv)),
                ));
            }
        }
    }
    Ok(out)
}

/// Runs the oracle battery. `ctl_override` replaces the configured series
/// control, which is how a corrupted coefficient table is injected.
pub fn validate(cfg: &ExperimentConfig, ctl_override: Option<SeriesControl>) -> Result<ValidationReport> {
    let ctl = match ctl_override {
        Some(c) => c,
        None => cfg.series_control()?,
    };
    let mut checks = vec![
        check_siegert(&ctl)?,
        check_tower(&ctl)?,
        check_scaling(&ctl, cfg.seed)?,
        check_unit_monte_carlo(&ctl, cfg.seed)?,
    ];
    checks.extend(check_circuit_monte_carlo(cfg, &ctl)?);
    let mut w = Writer::new(cfg, "validate")?;
    let mut t = Table::new(["check", "error", "tolerance", "pass", "detail"]);
    for c in &checks {
        t.push(vec![c.name.clone(), num(c.error), num(c.tolerance), c.pass.to_string(), c.detail.clone()]);
    }
    w.table("validation.csv", t)?;
    Ok(ValidationReport {
        checks,
        outputs: w.finish()?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateReport {
    pub v_gs: f64,
    pub sigma_t: f64,
    pub dist: String,
    pub train: Option<SpikeTrain>,
    pub outputs: Outputs,
}

/// Waveform and spike train at a single operating point. The caricature
/// model takes the noise value in config units as its own amplitude.
pub fn simulate(cfg: &ExperimentConfig) -> Result<SimulateReport> {
    let circuit = cfg.circuit()?;
    let grid = cfg.resolve(Command::Simulate)?;
    if grid.v_gs.len() != 1 || grid.sigma_t.len() != 1 || grid.dists.len() != 1 {
        return Err(Error::Config("simulate needs a single v_gs, sigma_t and threshold law".into()));
    }
    let (v_gs, s_units, dist) = (grid.v_gs[0], grid.sigma_t_units[0], grid.dists[0].clone());
    let noise = NoiseSpec::new(grid.sigma_t[0], dist.clone());
    let sim = cfg.sim_config();
    let mut w = Writer::new(cfg, "simulate")?;
    let meta = |t: Table| t.with_meta("v_gs", v_gs).with_meta("sigma_t", s_units).with_meta("dist", dist.label());
    let train = match sim.model {
        ModelKind::Full2d => {
            let (trace, train) = simulate_full(&circuit, v_gs, &noise, &sim)?;
            w.table("trace.csv", meta(io::full_trace_table(&trace)))?;
            Some(train)
        }
        ModelKind::Reduced1d => {
            let (trace, train) = simulate_reduced_trial(&circuit, v_gs, &noise, &sim, 0)?;
            w.table("trace.csv", meta(io::reduced_trace_table(&trace)))?;
            Some(train)
        }
        ModelKind::FhnCaricature => {
            let params = FhnParams::matched_to(&circuit, v_gs, dist.mean())?;
            let trace = simulate_fhn(&params, s_units, &sim)?;
            w.table("trace.csv", meta(io::fhn_trace_table(&trace)))?;
            None
        }
    };
    if let Some(t) = &train {
        if t.rejection_rate() > REJECTION_WARN_RATE {
            eprintln!(
                "warning: {:.2}% of threshold draws fell below v_l and were redrawn",
                100.0 * t.rejection_rate()
            );
        }
        w.spikes("spikes.txt", t)?;
    }
    Ok(SimulateReport {
        v_gs,
        sigma_t: s_units,
        dist: dist.label(),
        train,
        outputs: w.finish()?,
    })
}

/// Spread of one group of threshold samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpread {
    pub path: PathBuf,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub iqr: f64,
    /// Bootstrap standard error of the interquartile range.
    pub iqr_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub dist: ThresholdDist,
    pub groups: Vec<GroupSpread>,
    /// Largest pairwise IQR difference in combined standard errors.
    pub max_iqr_z: Option<f64>,
    pub outputs: Outputs,
}

const BOOTSTRAP_RESAMPLES: usize = 400;

fn iqr(xs: &[f64]) -> f64 {
    let mut d = Data::new(xs.to_vec());
    d.upper_quartile() - d.lower_quartile()
}

fn group_spread(path: &Path, xs: &[f64], seed: u64) -> GroupSpread {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; n];
    let boots: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = xs[rng.random_range(0..n)];
            }
            iqr(&buf)
        })
        .collect();
    let bm = boots.iter().sum::<f64>() / boots.len() as f64;
    let iqr_se = (boots.iter().map(|b| (b - bm) * (b - bm)).sum::<f64>() / (boots.len() as f64 - 1.0)).sqrt();
    GroupSpread {
        path: path.to_path_buf(),
        n,
        mean,
        std,
        iqr: iqr(xs),
        iqr_se,
    }
}

/// Fits a threshold law to the pooled samples of every file and compares
/// the spread of the groups.
pub fn fit_threshold(files: &[PathBuf], family: FitFamily, out: &Path, seed: u64) -> Result<FitReport> {
    if files.is_empty() {
        return Err(Error::Config("fit-threshold needs at least one sample file".into()));
    }
    let groups_raw: Vec<Vec<f64>> = files.iter().map(|f| io::read_threshold_samples(f)).collect::<Result<_>>()?;
    let pooled: Vec<f64> = groups_raw.iter().flatten().copied().collect();
    let dist = fit(&pooled, family)?;
    let groups: Vec<GroupSpread> = files
        .iter()
        .zip(&groups_raw)
        .enumerate()
        .map(|(i, (f, xs))| {
            if xs.len() < 2 {
                return Err(Error::InsufficientData { needed: 2, got: xs.len() });
            }
            Ok(group_spread(f, xs, point_seed(seed, i)))
        })
        .collect::<Result<_>>()?;
    let mut max_iqr_z: Option<f64> = None;
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            let z = (a.iqr - b.iqr).abs() / (a.iqr_se.powi(2) + b.iqr_se.powi(2)).sqrt();
            max_iqr_z = Some(max_iqr_z.map_or(z, |m: f64| m.max(z)));
        }
    }

    let snapshot = format!("fit-threshold family={family:?} files={files:?}");
    let mut w = Writer {
        dir: out.to_path_buf(),
        manifest: RunManifest::start("fit-threshold", seed, &snapshot),
        config_sha: io::sha256_hex(snapshot.as_bytes()),
        files: Vec::new(),
    };
    w.text("fitted_threshold.toml", &dist_file_text(&dist)?)?;
    let mut t = Table::new(["file", "n", "mean", "std", "iqr", "iqr_se"]).with_meta("pooled_samples", pooled.len());
    if let Some(z) = max_iqr_z {
        t = t.with_meta("max_iqr_z", z);
    }
    for g in &groups {
        t.push(vec![
            g.path.display().to_string(),
            g.n.to_string(),
            num(g.mean),
            num(g.std),
            num(g.iqr),
            num(g.iqr_se),
        ]);
    }
    w.table("threshold_groups.csv", t)?;
    Ok(FitReport {
        dist,
        groups,
        max_iqr_z,
        outputs: w.finish()?,
    })
}
