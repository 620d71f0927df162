//! Filter cost versus cavity dimension: one full pass of each filter over
//! identical records, warm-up excluded, single worker.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};

use hqfilter::qekf::run_qekf;
use hqfilter::sme::{run_sme, SmeRunConfig};

use crate::config::ExperimentConfig;
use crate::experiment::ExperimentContext;

#[derive(Debug, Clone, Copy)]
pub struct TimingRow {
    pub n_prime: usize,
    pub sme_seconds: f64,
    pub qekf_seconds: f64,
}

/// Mean wall-clock of one full filter pass per cavity truncation.
///
/// The record does not depend on the truncation, so every row consumes the
/// same increments. Timers wrap the filter fold only. Small truncations
/// cannot hold the initial coherent state to the usual leakage limit, so
/// the sweep admits up to 5% leakage: the measurement here is cost, not
/// representational fidelity.
pub fn bench_dimension(
    cfg: &ExperimentConfig,
    dims: &[usize],
    reps: usize,
) -> Result<Vec<TimingRow>> {
    let reps = reps.max(1);
    let base = ExperimentContext::new(cfg.clone())?;
    let traj = base.simulate(0).context("benchmark record")?;
    let run_cfg = SmeRunConfig {
        stride: cfg.stride,
        diagnostics: false,
        snapshot_steps: Vec::new(),
    };

    let mut rows = Vec::with_capacity(dims.len());
    for &n_prime in dims {
        let mut dim_cfg = cfg.clone();
        dim_cfg.n_prime = n_prime;
        dim_cfg.coherent_leakage = dim_cfg.coherent_leakage.max(0.05);
        let ctx = ExperimentContext::new(dim_cfg)?;

        // Warm-up pass of each filter, excluded from the means.
        let mut filter = ctx.sme_filter()?;
        run_sme(&mut filter, &traj.record, &ctx.observables, &run_cfg)?;
        let mut qekf = ctx.qekf_filter()?;
        run_qekf(&mut qekf, &traj.record, cfg.stride)?;

        let mut sme_total = 0.0;
        for _ in 0..reps {
            let mut filter = ctx.sme_filter()?;
            let t0 = Instant::now();
            run_sme(&mut filter, &traj.record, &ctx.observables, &run_cfg)?;
            sme_total += t0.elapsed().as_secs_f64();
        }
        let mut qekf_total = 0.0;
        for _ in 0..reps {
            let mut qekf = ctx.qekf_filter()?;
            let t0 = Instant::now();
            run_qekf(&mut qekf, &traj.record, cfg.stride)?;
            qekf_total += t0.elapsed().as_secs_f64();
        }
        rows.push(TimingRow {
            n_prime,
            sme_seconds: sme_total / reps as f64,
            qekf_seconds: qekf_total / reps as f64,
        });
    }
    Ok(rows)
}

/// Schema: `n_prime,sme_seconds,qekf_seconds`.
pub fn write_timing_csv(path: &Path, rows: &[TimingRow]) -> Result<()> {
    let mut file = fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    writeln!(file, "n_prime,sme_seconds,qekf_seconds")?;
    for row in rows {
        writeln!(
            file,
            "{},{:.6e},{:.6e}",
            row.n_prime, row.sme_seconds, row.qekf_seconds
        )?;
    }
    Ok(())
}
