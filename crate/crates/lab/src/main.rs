use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use fkpp_core::front::FitWindow;
use fkpp_lab::bridge_cmd::{cmd_bridge, BridgePlan};
use fkpp_lab::fk::{cmd_fk_validate, outliers};
use fkpp_lab::front_cmd::cmd_front;
use fkpp_lab::report::{cmd_report, summary};
use fkpp_lab::simulate::cmd_simulate;
use fkpp_lab::{init_threads, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fkpp-lab", version, about = "Non-local Fisher-KPP experiments")]
struct Cli {
    /// Worker threads for Monte Carlo and FFT work.
    #[arg(long, global = true, env = "FKPP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped preset: light, heavy-alpha1 or heavy-alpha2-3.
    #[arg(long)]
    preset: Option<String>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => bail!("pass --config PATH or --preset NAME"),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver and write trace, snapshots and manifest.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Speed, delay fits and model preference from a trace CSV.
    Front {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 300.0)]
        t_min: f64,
        #[arg(long, default_value_t = 3000.0)]
        t_max: f64,
        /// Start of the speed regression window (defaults to --t-min).
        #[arg(long)]
        speed_t_min: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Feynman-Kac estimates at the configured probes of a finished run.
    FkValidate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Run directory written by `simulate`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Bridge, Gaussian tail and tube validation.
    Bridge {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Consolidate a run directory and check its thresholds.
    Report {
        /// Run directory written by `simulate`.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    init_threads(cli.threads);
    match cli.command {
        Command::Simulate { cfg, out } => {
            let cfg = cfg.load()?;
            let m = cmd_simulate(&cfg, &out)?;
            println!(
                "{}: t = {} in {} steps ({:.1} s), sup u = {:.6}",
                m.name, m.t_reached, m.steps, m.wall_clock_s, m.max_u
            );
        }
        Command::Front {
            trace,
            t_min,
            t_max,
            speed_t_min,
            out,
        } => {
            let window = FitWindow::new(t_min, t_max)?;
            let speed = FitWindow::new(speed_t_min.unwrap_or(t_min), t_max)?;
            let r = cmd_front(&trace, window, speed, &out)?;
            for l in &r.levels {
                println!(
                    "level {}: speed {:.5}, log slope {:.4}, power exponent {}, prefers {:?}",
                    l.level,
                    l.speed,
                    l.fit.log.slope,
                    l.fit
                        .power
                        .map_or("-".into(), |p| format!("{:.4}", p.exponent)),
                    l.fit.preference
                );
            }
            println!("levels agree: {}", r.levels_agree);
        }
        Command::FkValidate { cfg, out } => {
            let cfg = cfg.load()?;
            let fk = cfg.fk.as_ref().context("config has no [fk] section")?;
            let rows = cmd_fk_validate(fk, &cfg.hash(), cfg.seed, &out)?;
            for r in &rows {
                println!(
                    "x = {:7.2}: grid {:.6}, fk {:.6} ± {:.6}, z = {:+.2}",
                    r.x, r.grid_u, r.estimate.mean, r.estimate.standard_error, r.z
                );
            }
            println!("{} of {} probes with |z| > 3", outliers(&rows), rows.len());
        }
        Command::Bridge { seed, out } => {
            let s = cmd_bridge(&BridgePlan::default(), seed, &out)?;
            println!("corrected cells with |z| > 3: {}", s.corrected_outliers);
            println!(
                "uncorrected cells biased high beyond 3 SE: {}",
                s.uncorrected_biased
            );
            println!("gaussian bound violations: {}", s.gaussian_violations);
            for t in &s.tubes {
                println!(
                    "tube R0 = {}, b = {}: rate {:.4} (expected {:.4})",
                    t.r0, t.slope, t.fitted_rate, t.expected_rate
                );
            }
            println!(
                "interval survival at t = {}: series {:.6}, mc {:.6} ± {:.6}",
                s.series.t,
                s.series.series,
                s.series.estimate.mean,
                s.series.estimate.standard_error
            );
        }
        Command::Report { out } => {
            let r = cmd_report(&out)?;
            print!("{}", summary(&r));
            if !r.all_passed {
                bail!("one or more checks failed");
            }
        }
    }
    Ok(())
}
