//! Ground-truth generation: sampled disturbance paths, the true conditional
//! qubit state under continuous homodyne monitoring, and the measurement
//! records consumed by the filters.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{OuProcess, QubitSystem};
use crate::operators::lindblad_state;
use crate::rng::{trajectory_rng, StreamTag};
use crate::state::{DensityMatrix, StateProjector};

/// Identifies the noise streams a trajectory was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectorySeed {
    pub master: u64,
    pub index: u64,
}

/// A homodyne measurement record: the increments dY on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub dt: f64,
    pub increments: Vec<f64>,
    pub seed: TrajectorySeed,
}

impl MeasurementRecord {
    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn horizon(&self) -> f64 {
        self.increments.len() as f64 * self.dt
    }
}

/// One simulated truth: the sampled disturbance path, the conditional qubit
/// state path (both on the grid t = 0, dt, ..., T) and the record driving
/// them (one increment per step).
#[derive(Debug, Clone)]
pub struct TruthTrajectory {
    pub q_path: Vec<f64>,
    pub rho_path: Vec<DensityMatrix>,
    pub record: MeasurementRecord,
}

/// Integration grid shared by the simulator and filters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn from_horizon(dt: f64, t_final: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {dt}"
            )));
        }
        if t_final < dt {
            return Err(Error::InvalidParameter(format!(
                "horizon {t_final} shorter than one step {dt}"
            )));
        }
        let steps = (t_final / dt).round() as usize;
        Ok(Self { dt, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

/// Euler-Maruyama path of `dq = -u q dt - v dw`, sampled on
/// t = 0, dt, ..., steps*dt (the initial value included).
pub fn sample_ou(ou: &OuProcess, grid: TimeGrid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sqrt_dt = grid.dt.sqrt();
    let mut path = Vec::with_capacity(grid.steps + 1);
    let mut q = ou.q0;
    path.push(q);
    for _ in 0..grid.steps {
        let xi: f64 = rng.sample(StandardNormal);
        q = q - ou.u * q * grid.dt - ou.v * sqrt_dt * xi;
        path.push(q);
    }
    path
}

/// Simulate the disturbed qubit under homodyne monitoring.
///
/// Per step, with `L = sqrt(k1) sigma_-` and `H = q_n * disturbance_op`:
/// the innovation is `dW ~ Normal(0, dt)`, the record increment is
/// `dY = Tr[(L + L^dag) rho] dt + dW`, and the state follows the
/// conditional master equation, Euler-discretised with a post-step
/// projection. The disturbance path advances in lockstep from an
/// independent noise stream.
pub fn simulate_truth(
    qubit: &QubitSystem,
    ou: &OuProcess,
    rho0: &DensityMatrix,
    grid: TimeGrid,
    seed: TrajectorySeed,
    projector: &StateProjector,
) -> Result<TruthTrajectory> {
    if rho0.dim() != 2 {
        return Err(Error::DimensionMismatch {
            context: "truth simulator initial state",
            left: rho0.dim(),
            right: 2,
        });
    }
    let mut meas_rng = trajectory_rng(seed.master, seed.index, StreamTag::Measurement);
    let mut class_rng = trajectory_rng(seed.master, seed.index, StreamTag::Classical);

    let l = qubit.coupling();
    let sqrt_dt = grid.dt.sqrt();

    let mut rho = rho0.matrix().clone();
    let mut q = ou.q0;

    let mut q_path = Vec::with_capacity(grid.steps + 1);
    let mut rho_path = Vec::with_capacity(grid.steps + 1);
    let mut increments = Vec::with_capacity(grid.steps);
    q_path.push(q);
    rho_path.push(rho0.clone());

    for step in 0..grid.steps {
        let h = qubit.hamiltonian(q);
        let drift = lindblad_state(l, &h, &rho)?;

        let l_rho = l * &rho;
        let m = 2.0 * l_rho.trace().re;
        let dw: f64 = sqrt_dt * meas_rng.sample::<f64, _>(StandardNormal);
        let dy = m * grid.dt + dw;

        let innovation = &l_rho + l_rho.adjoint() - (&rho * Complex64::new(m, 0.0));
        rho += drift * Complex64::new(grid.dt, 0.0) + innovation * Complex64::new(dw, 0.0);
        projector
            .project(&mut rho)
            .map_err(|detail| Error::StateInvariant { step, detail })?;

        let xi: f64 = class_rng.sample(StandardNormal);
        q = q - ou.u * q * grid.dt - ou.v * sqrt_dt * xi;

        increments.push(dy);
        q_path.push(q);
        rho_path.push(DensityMatrix::from_projected(rho.clone()));
    }

    Ok(TruthTrajectory {
        q_path,
        rho_path,
        record: MeasurementRecord {
            dt: grid.dt,
            increments,
            seed,
        },
    })
}
