//! CSV export of measurement records and estimate time series.
//!
//! All columns are plain numeric fields; formatting is fixed so identical
//! runs produce byte-identical files.

use std::io::{self, Write};

use crate::operators::{pauli, Pauli};
use crate::qekf::QekfSeries;
use crate::sme::SmeSeries;
use crate::truth::TruthTrajectory;

fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

/// One row per record increment: the state columns hold the truth at the
/// step start that generated the increment.
///
/// Schema: `step,t,dY,q_true,sx_true,sy_true,sz_true`.
pub fn write_record_csv<W: Write>(w: &mut W, traj: &TruthTrajectory) -> io::Result<()> {
    let sx = pauli(Pauli::X);
    let sy = pauli(Pauli::Y);
    let sz = pauli(Pauli::Z);
    writeln!(w, "step,t,dY,q_true,sx_true,sy_true,sz_true")?;
    let dt = traj.record.dt;
    for (n, &dy) in traj.record.increments.iter().enumerate() {
        let rho = &traj.rho_path[n];
        let ex = rho.expect_real(&sx).map_err(io_err)?;
        let ey = rho.expect_real(&sy).map_err(io_err)?;
        let ez = rho.expect_real(&sz).map_err(io_err)?;
        writeln!(
            w,
            "{n},{},{},{},{},{},{}",
            fmt(n as f64 * dt),
            fmt(dy),
            fmt(traj.q_path[n]),
            fmt(ex),
            fmt(ey),
            fmt(ez)
        )?;
    }
    Ok(())
}

/// Schema: `t,sx_hat,sy_hat,sz_hat,q_hat,trace_err,min_eig`.
pub fn write_sme_csv<W: Write>(w: &mut W, series: &SmeSeries) -> io::Result<()> {
    writeln!(w, "t,sx_hat,sy_hat,sz_hat,q_hat,trace_err,min_eig")?;
    for i in 0..series.times.len() {
        let min_eig = series.min_eig.get(i).copied().unwrap_or(f64::NAN);
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt(series.times[i]),
            fmt(series.sx[i]),
            fmt(series.sy[i]),
            fmt(series.sz[i]),
            fmt(series.q[i]),
            fmt(series.trace_err[i]),
            fmt(min_eig)
        )?;
    }
    Ok(())
}

/// Schema: `t,sx_hat,sy_hat,sz_hat,q2_hat,p2_hat,P_trace,K_1..K_5`.
pub fn write_qekf_csv<W: Write>(w: &mut W, series: &QekfSeries) -> io::Result<()> {
    writeln!(
        w,
        "t,sx_hat,sy_hat,sz_hat,q2_hat,p2_hat,P_trace,K_1,K_2,K_3,K_4,K_5"
    )?;
    for i in 0..series.times.len() {
        let k = &series.gain[i];
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt(series.times[i]),
            fmt(series.sx[i]),
            fmt(series.sy[i]),
            fmt(series.sz[i]),
            fmt(series.q2[i]),
            fmt(series.p2[i]),
            fmt(series.p_trace[i]),
            fmt(k[0]),
            fmt(k[1]),
            fmt(k[2]),
            fmt(k[3]),
            fmt(k[4])
        )?;
    }
    Ok(())
}

fn io_err(e: crate::error::Error) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_qubit, OuProcess, QubitParams};
    use crate::state::{DensityMatrix, StateProjector, Tolerances};
    use crate::truth::{simulate_truth, TimeGrid, TrajectorySeed};
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    #[test]
    fn record_csv_has_header_and_one_row_per_increment() {
        let qubit = build_qubit(QubitParams::new(0.55).unwrap(), pauli(Pauli::Z)).unwrap();
        let ou = OuProcess::new(0.25, 0.5, 0.25).unwrap();
        let half = Complex64::new(0.5, 0.0);
        let rho0 = DensityMatrix::new(
            DMatrix::from_row_slice(2, 2, &[half, half, half, half]),
            &Tolerances::default(),
        )
        .unwrap();
        let grid = TimeGrid::from_horizon(1e-2, 0.1).unwrap();
        let traj = simulate_truth(
            &qubit,
            &ou,
            &rho0,
            grid,
            TrajectorySeed { master: 1, index: 0 },
            &StateProjector::new(Tolerances::default(), 0.05),
        )
        .unwrap();

        let mut buf = Vec::new();
        write_record_csv(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,t,dY,q_true,sx_true,sy_true,sz_true");
        assert_eq!(lines.len(), 1 + grid.steps);
        assert!(lines[1].starts_with("0,0"));
    }
}
