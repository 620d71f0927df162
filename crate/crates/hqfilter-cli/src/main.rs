use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hqfilter::io::{write_qekf_csv, write_record_csv, write_sme_csv};
use hqfilter::qekf::run_qekf;
use hqfilter::sme::{run_sme, SmeRunConfig};

use hqfilter_cli::bench::{bench_dimension, write_timing_csv};
use hqfilter_cli::config::ExperimentConfig;
use hqfilter_cli::experiment::{run_experiment, ExperimentContext};
use hqfilter_cli::plot::emit_plots;

/// Simulation and filtering for a continuously monitored qubit subject to
/// a classical stochastic disturbance.
#[derive(Parser)]
#[command(name = "hqfilter", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate truth trajectories and their measurement records as CSV.
    Simulate(CommonArgs),
    /// Run the filters over deterministically regenerated records and
    /// write per-trajectory estimate CSVs.
    Filter {
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Full ensemble experiment: figure CSVs, manifest and metrics.
    Experiment(CommonArgs),
    /// Measure filter cost against the cavity dimension.
    Bench {
        /// Comma-separated cavity truncations to sweep.
        #[arg(long, default_value = "2,3,4,5,6")]
        dims: String,
        /// Timed repetitions per dimension (one warm-up pass excluded).
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Render SVG plots from the figure CSVs in the output directory.
    Plot {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Sme,
    Qekf,
    Both,
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file (TOML); defaults to the reference experiment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker thread override for ensemble runs.
    #[arg(long)]
    workers: Option<usize>,
    /// Cavity truncation override.
    #[arg(long = "n-prime")]
    n_prime: Option<usize>,
    /// Cross-correlation form override: "derived" or "paper".
    #[arg(long = "s-matrix")]
    s_matrix: Option<String>,
}

impl CommonArgs {
    fn effective_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(workers) = self.workers {
            cfg.workers = workers;
        }
        if let Some(n_prime) = self.n_prime {
            cfg.n_prime = n_prime;
        }
        if let Some(s) = &self.s_matrix {
            cfg.s_matrix = s.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(common) => simulate(&common),
        Command::Filter { method, common } => filter(method, &common),
        Command::Experiment(common) => experiment(&common),
        Command::Bench { dims, reps, common } => bench(&dims, reps, &common),
        Command::Plot { out } => {
            for path in emit_plots(&out)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn simulate(common: &CommonArgs) -> Result<()> {
    let cfg = common.effective_config()?;
    let ctx = ExperimentContext::new(cfg)?;
    fs::create_dir_all(&common.out)?;
    for i in 0..ctx.cfg.ensemble as u64 {
        let traj = ctx.simulate(i)?;
        let path = common.out.join(format!("record_{i:03}.csv"));
        let mut file = fs::File::create(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        write_record_csv(&mut file, &traj)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn filter(method: Method, common: &CommonArgs) -> Result<()> {
    let cfg = common.effective_config()?;
    let ctx = ExperimentContext::new(cfg)?;
    fs::create_dir_all(&common.out)?;
    let run_cfg = SmeRunConfig {
        stride: ctx.cfg.stride,
        diagnostics: true,
        snapshot_steps: Vec::new(),
    };
    for i in 0..ctx.cfg.ensemble as u64 {
        let traj = ctx.simulate(i)?;
        if method != Method::Qekf {
            let mut sme = ctx.sme_filter()?;
            let series = run_sme(&mut sme, &traj.record, &ctx.observables, &run_cfg)
                .with_context(|| format!("conditional filter, trajectory {i}"))?;
            let path = common.out.join(format!("sme_{i:03}.csv"));
            let mut file = fs::File::create(&path)?;
            write_sme_csv(&mut file, &series)?;
            println!("wrote {}", path.display());
        }
        if method != Method::Sme {
            let mut qekf = ctx.qekf_filter()?;
            let series = run_qekf(&mut qekf, &traj.record, ctx.cfg.stride)
                .with_context(|| format!("moment filter, trajectory {i}"))?;
            let path = common.out.join(format!("qekf_{i:03}.csv"));
            let mut file = fs::File::create(&path)?;
            write_qekf_csv(&mut file, &series)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn experiment(common: &CommonArgs) -> Result<()> {
    let cfg = common.effective_config()?;
    let metrics = run_experiment(cfg.clone(), &common.out)?;
    println!(
        "ensemble {} trajectories, horizon {} at dt {}",
        cfg.ensemble, cfg.t_final, cfg.dt
    );
    println!(
        "q RMSE vs truth ensemble mean : sme {:.4}, qekf {:.4}",
        metrics.rmse_sme_q, metrics.rmse_qekf_q
    );
    println!(
        "q RMSE vs mean decay          : sme {:.4}, qekf {:.4}",
        metrics.rmse_sme_q_mean, metrics.rmse_qekf_q_mean
    );
    println!(
        "filter wall-clock per record  : sme {:.3}s, qekf {:.3}s",
        metrics.sme_seconds_per_traj, metrics.qekf_seconds_per_traj
    );
    let last = metrics.times.len() - 1;
    println!(
        "final means: truth sz {:.4}, sme sz {:.4}, qekf sz {:.4}",
        metrics.truth_sz.mean[last], metrics.sme_sz.mean[last], metrics.qekf_sz.mean[last]
    );
    println!("artifacts in {}", common.out.display());
    Ok(())
}

fn bench(dims: &str, reps: usize, common: &CommonArgs) -> Result<()> {
    let cfg = common.effective_config()?;
    let dims: Vec<usize> = dims
        .split(',')
        .map(|s| s.trim().parse::<usize>().context("parsing --dims"))
        .collect::<Result<_>>()?;
    let rows = bench_dimension(&cfg, &dims, reps)?;
    fs::create_dir_all(&common.out)?;
    let path = common.out.join("fig8_timing.csv");
    write_timing_csv(&path, &rows)?;
    println!("n_prime  sme_seconds  qekf_seconds");
    for row in &rows {
        println!(
            "{:7}  {:11.4}  {:12.4}",
            row.n_prime, row.sme_seconds, row.qekf_seconds
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}
