//! Ensemble orchestration: truth simulation, both filters on every record,
//! aggregation into per-time statistics and figure CSVs.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;

use hqfilter::model::{CavityAnalog, OuProcess, QubitSystem, SlhModel};
use hqfilter::qekf::{run_qekf, QekfFilter, QekfParams, QekfSeries};
use hqfilter::sme::{
    run_sme, EnlargedObservables, SmeConfig, SmeFilter, SmeRunConfig, SmeSeries,
};
use hqfilter::state::{DensityMatrix, StateProjector, Tolerances};
use hqfilter::truth::{simulate_truth, TimeGrid, TrajectorySeed, TruthTrajectory};

use crate::config::{manifest_toml, ExperimentConfig};

/// Everything shared across the trajectories of one ensemble.
pub struct ExperimentContext {
    pub cfg: ExperimentConfig,
    pub qubit: QubitSystem,
    pub ou: OuProcess,
    pub analog: CavityAnalog,
    pub model: SlhModel,
    pub observables: EnlargedObservables,
    pub rho1: DensityMatrix,
    pub rho0: DensityMatrix,
    pub grid: TimeGrid,
    pub qekf_params: QekfParams,
    pub beta: num_complex::Complex64,
}

impl ExperimentContext {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let qubit = cfg.qubit()?;
        let ou = cfg.ou()?;
        let analog = cfg.analog()?;
        let model = hqfilter::model::enlarged_system(&qubit, &analog)?;
        let observables = EnlargedObservables::new(&analog);
        let rho1 = cfg.rho1()?;
        let rho0 = cfg.enlarged_initial(&analog)?;
        let grid = TimeGrid::from_horizon(cfg.dt, cfg.t_final)?;
        let qekf_params = QekfParams::from_model(
            qubit.params(),
            &analog,
            cfg.lambda,
            cfg.mu,
            cfg.s_form(),
        )?;
        let beta = cfg.beta(&analog);
        Ok(Self {
            cfg,
            qubit,
            ou,
            analog,
            model,
            observables,
            rho1,
            rho0,
            grid,
            qekf_params,
            beta,
        })
    }

    pub fn projector(&self) -> StateProjector {
        StateProjector::new(Tolerances::default(), SmeConfig::default().max_step_change)
    }

    pub fn simulate(&self, index: u64) -> Result<TruthTrajectory> {
        Ok(simulate_truth(
            &self.qubit,
            &self.ou,
            &self.rho1,
            self.grid,
            TrajectorySeed {
                master: self.cfg.seed,
                index,
            },
            &self.projector(),
        )?)
    }

    pub fn sme_filter(&self) -> Result<SmeFilter> {
        Ok(SmeFilter::new(
            &self.model,
            0,
            &self.rho0,
            SmeConfig::default(),
        )?)
    }

    pub fn qekf_filter(&self) -> Result<QekfFilter> {
        Ok(QekfFilter::from_initial_state(
            self.qekf_params,
            &self.rho1,
            self.beta,
            self.cfg.p0,
        )?)
    }
}

/// Truth observables sampled on the output grid.
#[derive(Debug, Clone, Default)]
pub struct StridedTruth {
    pub times: Vec<f64>,
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
    pub sz: Vec<f64>,
    pub q: Vec<f64>,
}

pub fn stride_truth(traj: &TruthTrajectory, stride: usize) -> Result<StridedTruth> {
    use hqfilter::operators::{pauli, Pauli};
    let sx = pauli(Pauli::X);
    let sy = pauli(Pauli::Y);
    let sz = pauli(Pauli::Z);
    let stride = stride.max(1);
    let last = traj.q_path.len() - 1;
    let mut out = StridedTruth::default();
    let mut push = |n: usize| -> Result<()> {
        out.times.push(n as f64 * traj.record.dt);
        out.sx.push(traj.rho_path[n].expect_real(&sx)?);
        out.sy.push(traj.rho_path[n].expect_real(&sy)?);
        out.sz.push(traj.rho_path[n].expect_real(&sz)?);
        out.q.push(traj.q_path[n]);
        Ok(())
    };
    push(0)?;
    let mut n = stride;
    while n < last {
        push(n)?;
        n += stride;
    }
    if last > 0 {
        push(last)?;
    }
    Ok(out)
}

/// One trajectory's worth of results.
pub struct TrajectoryResult {
    pub index: u64,
    pub truth: StridedTruth,
    pub sme: SmeSeries,
    pub qekf: QekfSeries,
    pub sme_seconds: f64,
    pub qekf_seconds: f64,
}

/// Simulate one trajectory and run both filters on its record. The timers
/// wrap only the filter folds.
pub fn run_trajectory(
    ctx: &ExperimentContext,
    index: u64,
    snapshot_steps: &[usize],
) -> Result<TrajectoryResult> {
    let traj = ctx
        .simulate(index)
        .with_context(|| format!("truth simulation, trajectory {index}"))?;
    let truth = stride_truth(&traj, ctx.cfg.stride)?;

    let mut sme = ctx.sme_filter()?;
    let run_cfg = SmeRunConfig {
        stride: ctx.cfg.stride,
        diagnostics: false,
        snapshot_steps: snapshot_steps.to_vec(),
    };
    let t0 = Instant::now();
    let sme_series = run_sme(&mut sme, &traj.record, &ctx.observables, &run_cfg)
        .with_context(|| format!("conditional filter, trajectory {index}"))?;
    let sme_seconds = t0.elapsed().as_secs_f64();

    let mut qekf = ctx.qekf_filter()?;
    let t1 = Instant::now();
    let qekf_series = run_qekf(&mut qekf, &traj.record, ctx.cfg.stride)
        .with_context(|| format!("moment filter, trajectory {index}"))?;
    let qekf_seconds = t1.elapsed().as_secs_f64();

    Ok(TrajectoryResult {
        index,
        truth,
        sme: sme_series,
        qekf: qekf_series,
        sme_seconds,
        qekf_seconds,
    })
}

/// Run the whole ensemble on a private worker pool. Results come back in
/// trajectory order, so aggregation is deterministic.
pub fn run_ensemble(
    ctx: &ExperimentContext,
    snapshot_steps: &[usize],
) -> Result<Vec<TrajectoryResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.cfg.workers)
        .build()
        .context("building worker pool")?;
    let results: Vec<Result<TrajectoryResult>> = pool.install(|| {
        (0..ctx.cfg.ensemble as u64)
            .into_par_iter()
            .map(|i| run_trajectory(ctx, i, snapshot_steps))
            .collect()
    });
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        out.push(r?);
    }
    Ok(out)
}

/// Pointwise ensemble mean and standard error.
#[derive(Debug, Clone, Default)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

pub fn series_stats<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, len: usize) -> SeriesStats {
    let n = rows.clone().count().max(1);
    let mut mean = vec![0.0; len];
    for row in rows.clone() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n as f64;
        }
    }
    let mut se = vec![0.0; len];
    if n > 1 {
        for row in rows {
            for (s, (m, v)) in se.iter_mut().zip(mean.iter().zip(row)) {
                *s += (v - m).powi(2);
            }
        }
        for s in se.iter_mut() {
            *s = (*s / ((n - 1) as f64 * n as f64)).sqrt();
        }
    }
    SeriesStats { mean, se }
}

/// Aggregated experiment metrics.
pub struct Metrics {
    pub times: Vec<f64>,
    pub truth_sx: SeriesStats,
    pub truth_sy: SeriesStats,
    pub truth_sz: SeriesStats,
    pub truth_q: SeriesStats,
    pub sme_sx: SeriesStats,
    pub sme_sy: SeriesStats,
    pub sme_sz: SeriesStats,
    pub sme_q: SeriesStats,
    pub qekf_sx: SeriesStats,
    pub qekf_sy: SeriesStats,
    pub qekf_sz: SeriesStats,
    pub qekf_q: SeriesStats,
    /// RMSE of the ensemble-mean estimates against the empirical truth
    /// ensemble mean of the disturbance.
    pub rmse_sme_q: f64,
    pub rmse_qekf_q: f64,
    /// RMSE of the ensemble-mean estimates against the disturbance's mean
    /// decay `q0 exp(-u t)`.
    pub rmse_sme_q_mean: f64,
    pub rmse_qekf_q_mean: f64,
    pub sme_seconds_per_traj: f64,
    pub qekf_seconds_per_traj: f64,
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

pub fn aggregate(ctx: &ExperimentContext, results: &[TrajectoryResult]) -> Metrics {
    let times = results[0].truth.times.clone();
    let len = times.len();
    let stat = |pick: &dyn Fn(&TrajectoryResult) -> &[f64]| -> SeriesStats {
        series_stats(results.iter().map(pick), len)
    };
    let truth_q = stat(&|r| &r.truth.q);
    let sme_q = stat(&|r| &r.sme.q);
    let qekf_q = stat(&|r| &r.qekf.q);
    let mean_decay: Vec<f64> = times
        .iter()
        .map(|t| ctx.ou.q0 * (-ctx.ou.u * t).exp())
        .collect();

    Metrics {
        rmse_sme_q: rmse(&sme_q.mean, &truth_q.mean),
        rmse_qekf_q: rmse(&qekf_q.mean, &truth_q.mean),
        rmse_sme_q_mean: rmse(&sme_q.mean, &mean_decay),
        rmse_qekf_q_mean: rmse(&qekf_q.mean, &mean_decay),
        truth_sx: stat(&|r| &r.truth.sx),
        truth_sy: stat(&|r| &r.truth.sy),
        truth_sz: stat(&|r| &r.truth.sz),
        truth_q,
        sme_sx: stat(&|r| &r.sme.sx),
        sme_sy: stat(&|r| &r.sme.sy),
        sme_sz: stat(&|r| &r.sme.sz),
        sme_q,
        qekf_sx: stat(&|r| &r.qekf.sx),
        qekf_sy: stat(&|r| &r.qekf.sy),
        qekf_sz: stat(&|r| &r.qekf.sz),
        qekf_q,
        sme_seconds_per_traj: results.iter().map(|r| r.sme_seconds).sum::<f64>()
            / results.len() as f64,
        qekf_seconds_per_traj: results.iter().map(|r| r.qekf_seconds).sum::<f64>()
            / results.len() as f64,
        times,
    }
}

fn write_figure_csv(
    path: &Path,
    times: &[f64],
    columns: &[(&str, &SeriesStats)],
) -> Result<()> {
    let mut file = fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut header = String::from("t");
    for (name, _) in columns {
        header.push_str(&format!(",{name}_mean,{name}_se"));
    }
    writeln!(file, "{header}")?;
    for i in 0..times.len() {
        let mut row = format!("{:.12e}", times[i]);
        for (_, stats) in columns {
            row.push_str(&format!(",{:.12e},{:.12e}", stats.mean[i], stats.se[i]));
        }
        writeln!(file, "{row}")?;
    }
    Ok(())
}

/// Write the per-figure CSVs and the manifest into `out_dir`.
pub fn write_artifacts(out_dir: &Path, ctx: &ExperimentContext, metrics: &Metrics) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_figure_csv(
        &out_dir.join("fig4_sigma_x.csv"),
        &metrics.times,
        &[
            ("truth", &metrics.truth_sx),
            ("sme", &metrics.sme_sx),
            ("qekf", &metrics.qekf_sx),
        ],
    )?;
    write_figure_csv(
        &out_dir.join("fig5_sigma_y.csv"),
        &metrics.times,
        &[
            ("truth", &metrics.truth_sy),
            ("sme", &metrics.sme_sy),
            ("qekf", &metrics.qekf_sy),
        ],
    )?;
    write_figure_csv(
        &out_dir.join("fig6_sigma_z.csv"),
        &metrics.times,
        &[
            ("truth", &metrics.truth_sz),
            ("sme", &metrics.sme_sz),
            ("qekf", &metrics.qekf_sz),
        ],
    )?;
    write_figure_csv(
        &out_dir.join("fig7_q.csv"),
        &metrics.times,
        &[
            ("truth", &metrics.truth_q),
            ("sme", &metrics.sme_q),
            ("qekf", &metrics.qekf_q),
        ],
    )?;
    fs::write(out_dir.join("manifest.toml"), manifest_toml(&ctx.cfg)?)?;
    Ok(())
}

/// Full experiment: ensemble, aggregation, artifacts (figure CSVs, the
/// timing table over cavity dimensions 2..6, and the manifest). On a
/// trajectory failure the partial aggregate is still flushed before the
/// error is returned.
pub fn run_experiment(cfg: ExperimentConfig, out_dir: &Path) -> Result<Metrics> {
    let ctx = ExperimentContext::new(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.cfg.workers)
        .build()
        .context("building worker pool")?;
    let results: Vec<Result<TrajectoryResult>> = pool.install(|| {
        (0..ctx.cfg.ensemble as u64)
            .into_par_iter()
            .map(|i| run_trajectory(&ctx, i, &[]))
            .collect()
    });

    let mut ok = Vec::new();
    let mut first_err = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => ok.push(t),
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(anyhow!("trajectory {i}: {e:#}"));
                }
            }
        }
    }
    if ok.is_empty() {
        return Err(first_err.unwrap_or_else(|| anyhow!("no trajectories completed")));
    }
    let metrics = aggregate(&ctx, &ok);
    write_artifacts(out_dir, &ctx, &metrics)?;
    if first_err.is_none() {
        // Timing table (excluded from the determinism guarantee).
        let rows = crate::bench::bench_dimension(&ctx.cfg, &[2, 3, 4, 5, 6], 3)?;
        crate::bench::write_timing_csv(&out_dir.join("fig8_timing.csv"), &rows)?;
    }
    match first_err {
        Some(e) => Err(e.context("partial results flushed")),
        None => Ok(metrics),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            t_final: 0.2,
            ensemble: 2,
            n_prime: 4,
            stride: 20,
            workers: 2,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn ensemble_is_deterministic_across_runs_and_workers() {
        let ctx1 = ExperimentContext::new(tiny_config()).unwrap();
        let r1 = run_ensemble(&ctx1, &[]).unwrap();
        let mut serial = tiny_config();
        serial.workers = 1;
        let ctx2 = ExperimentContext::new(serial).unwrap();
        let r2 = run_ensemble(&ctx2, &[]).unwrap();
        for (a, b) in r1.iter().zip(&r2) {
            assert_eq!(a.index, b.index);
            assert_eq!(a.sme.q, b.sme.q);
            assert_eq!(a.qekf.q, b.qekf.q);
            assert_eq!(a.truth.q, b.truth.q);
        }
    }

    #[test]
    fn frozen_system_keeps_all_estimates_constant() {
        // No measurement coupling, no disturbance noise, zero initial value.
        let cfg = ExperimentConfig {
            k1: 0.0,
            v: 0.0,
            q0: 0.0,
            ensemble: 1,
            t_final: 0.2,
            n_prime: 4,
            stride: 10,
            workers: 1,
            ..ExperimentConfig::default()
        };
        let ctx = ExperimentContext::new(cfg).unwrap();
        let results = run_ensemble(&ctx, &[]).unwrap();
        let r = &results[0];
        for series in [&r.sme.sx, &r.sme.sy, &r.sme.sz, &r.sme.q] {
            for v in series {
                assert!((v - series[0]).abs() < 1e-9, "series moved: {series:?}");
            }
        }
        for series in [&r.qekf.sx, &r.qekf.sy, &r.qekf.sz, &r.qekf.q] {
            for v in series {
                assert!((v - series[0]).abs() < 1e-9, "series moved: {series:?}");
            }
        }
    }

    #[test]
    fn stats_and_rmse_behave() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let stats = series_stats(rows.iter().map(|r| r.as_slice()), 2);
        assert!((stats.mean[0] - 2.0).abs() < 1e-12);
        assert!((stats.mean[1] - 3.0).abs() < 1e-12);
        assert!((stats.se[0] - 1.0).abs() < 1e-12);
        assert!((rmse(&[1.0, 2.0], &[1.0, 4.0]) - 2.0f64.sqrt()).abs() < 1e-12);
    }
}
