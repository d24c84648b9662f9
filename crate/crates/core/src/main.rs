use clap::{Args, Parser, Subcommand, ValueEnum};
use imt_neuron::config::ExperimentConfig;
use imt_neuron::fpt::CvEntry;
use imt_neuron::harness::{self, exit_code, Overrides, EXIT_VALIDATION};
use imt_neuron::threshold::FitFamily;
use imt_neuron::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "imt-neuron", version, about = "Stochastic IMT neuron experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Firing rate against gate voltage.
    TransferCurve(Common),
    /// ISI coefficient of variation against noise level.
    CvSweep(Common),
    /// Cross-check the analytic engine against its oracles.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Scale every rho(n,2) coefficient by this factor.
        #[arg(long, hide = true)]
        corrupt_rho2: Option<f64>,
    },
    /// Dump a waveform and spike train at one operating point.
    Simulate(Common),
    /// Fit a threshold law to measured IMT voltages, one file per group.
    FitThreshold {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Family::Gaussian)]
        family: Family,
        /// Shape exponent for the exponential-power family.
        #[arg(long, default_value_t = 3.0)]
        kappa: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Gaussian,
    ExpPower,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; the built-in VO2 reference setup if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Gate voltages, comma separated.
    #[arg(long, value_delimiter = ',')]
    vgs: Option<Vec<f64>>,
    /// Noise levels in config units, comma separated.
    #[arg(long = "sigma-t", value_delimiter = ',')]
    sigma_t: Option<Vec<f64>>,
    /// Threshold laws by label, e.g. constant,gaussian,ep3.
    #[arg(long, value_delimiter = ',')]
    dist: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::builtin(),
        };
        Overrides {
            v_gs: self.vgs.clone(),
            sigma_t: self.sigma_t.clone(),
            dists: self.dist.clone(),
            seed: self.seed,
            out: self.out.clone(),
        }
        .apply(&mut cfg)
        .map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })?;
        if cfg.threads > 0 {
            // Only fails if a pool already exists, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Cmd::TransferCurve(c) => {
            let r = harness::transfer_curve(&c.load()?)?;
            let failed = r.rows.iter().filter(|x| x.rate.is_err()).count();
            println!("{} points, {failed} without a rate", r.rows.len());
            if let Some(best) = r.ranking.first() {
                println!("closest to measured: {} at sigma_t = {} (rms {:.1} Hz)", best.dist, best.sigma_t, best.rms);
            }
            println!("wrote {}", r.outputs.manifest.display());
        }
        Cmd::CvSweep(c) => {
            let r = harness::cv_sweep_cmd(&c.load()?)?;
            println!("v_gs = {} V", r.v_gs);
            for (s, d, e) in &r.rows {
                match e {
                    CvEntry::Value(v) => println!("  sigma_t {s:>5}  {d:<9} cv = {v:.4e}"),
                    CvEntry::Diverged => println!("  sigma_t {s:>5}  {d:<9} diverged"),
                    CvEntry::Failed(m) => println!("  sigma_t {s:>5}  {d:<9} failed: {m}"),
                }
            }
            if let Some(m) = r.measured_cv {
                println!("measured cv = {m}");
            }
            println!("wrote {}", r.outputs.manifest.display());
        }
        Cmd::Validate { common, corrupt_rho2 } => {
            let cfg = common.load()?;
            let ctl = match corrupt_rho2 {
                Some(f) => Some(cfg.series_control()?.with_corrupted_rho2(f)),
                None => None,
            };
            let r = harness::validate(&cfg, ctl)?;
            for c in &r.checks {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                println!("{tag}  {:<70} error {:.3e} (tol {:.0e})  {}", c.name, c.error, c.tolerance, c.detail);
            }
            println!("wrote {}", r.outputs.manifest.display());
            if !r.passed() {
                return Ok(EXIT_VALIDATION);
            }
        }
        Cmd::Simulate(c) => {
            let r = harness::simulate(&c.load()?)?;
            if let Some(t) = &r.train {
                let rate = if t.isis.is_empty() {
                    0.0
                } else {
                    t.isis.len() as f64 / t.isis.iter().sum::<f64>()
                };
                println!(
                    "{} spikes at v_gs = {} V, sigma_t = {}, {}: mean rate {rate:.1} Hz",
                    t.spike_times.len(),
                    r.v_gs,
                    r.sigma_t,
                    r.dist
                );
            }
            println!("wrote {}", r.outputs.manifest.display());
        }
        Cmd::FitThreshold {
            files,
            family,
            kappa,
            out,
            seed,
        } => {
            let family = match family {
                Family::Gaussian => FitFamily::Gaussian,
                Family::ExpPower => FitFamily::ExpPower { kappa },
            };
            let r = harness::fit_threshold(&files, family, &out, seed)?;
            println!("fitted {:?}", r.dist);
            for g in &r.groups {
                println!("  {}: n = {}, iqr = {:.4} +/- {:.4} V", g.path.display(), g.n, g.iqr, g.iqr_se);
            }
            if let Some(z) = r.max_iqr_z {
                let verdict = if z < 3.0 { "consistent" } else { "differ" };
                println!("group spreads {verdict} (largest difference {z:.2} standard errors)");
            }
            println!("wrote {}", r.outputs.manifest.display());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
