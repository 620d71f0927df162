//! Quantum extended Kalman filter: a five-dimensional moment filter over
//! `(sigma_x, sigma_y, sigma_z, q2, p2)` with Riccati covariance
//! propagation. It approximates the optimal filter at a cost independent
//! of the cavity truncation.

use nalgebra::{Cholesky, SMatrix, SVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CavityAnalog, QubitParams};
use crate::state::DensityMatrix;
use crate::truth::MeasurementRecord;

pub type Vec5 = SVector<f64, 5>;
pub type Mat5 = SMatrix<f64, 5, 5>;

/// Which cross-correlation vector the filter uses.
///
/// Evaluating the defining symmetrised increment products gives a first
/// entry `sqrt(k1) sigma_z`; the printed matrix carries `k1 sigma_z`
/// instead. Both are available; the re-derived form is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SForm {
    #[default]
    Derived,
    Paper,
}

/// Filter parameters.
#[derive(Debug, Clone, Copy)]
pub struct QekfParams {
    pub k1: f64,
    pub k2: f64,
    /// Quadrature scaling of the cavity analog; may be infinite in the
    /// decoupled limit.
    pub alpha: f64,
    /// Riccati inflation, nonnegative.
    pub lambda: f64,
    /// Noise floor of the robustified covariance, strictly positive.
    pub mu: f64,
    pub s_form: SForm,
}

impl QekfParams {
    pub fn new(k1: f64, k2: f64, alpha: f64, lambda: f64, mu: f64, s_form: SForm) -> Result<Self> {
        if !(k1 >= 0.0) || !k1.is_finite() {
            return Err(Error::InvalidParameter(format!("k1 must be >= 0, got {k1}")));
        }
        if !(k2 > 0.0) || !k2.is_finite() {
            return Err(Error::InvalidParameter(format!("k2 must be > 0, got {k2}")));
        }
        if alpha == 0.0 || alpha.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "quadrature scaling must be nonzero, got {alpha}"
            )));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Riccati inflation must be nonnegative, got {lambda}"
            )));
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise floor must be positive, got {mu}"
            )));
        }
        Ok(Self {
            k1,
            k2,
            alpha,
            lambda,
            mu,
            s_form,
        })
    }

    pub fn from_model(
        qubit: QubitParams,
        analog: &CavityAnalog,
        lambda: f64,
        mu: f64,
        s_form: SForm,
    ) -> Result<Self> {
        Self::new(qubit.k1, analog.k, analog.alpha, lambda, mu, s_form)
    }

    /// `1/alpha`, zero in the decoupled limit.
    pub fn inv_alpha(&self) -> f64 {
        if self.alpha.is_infinite() {
            0.0
        } else {
            1.0 / self.alpha
        }
    }
}

/// Moment drift of the estimate vector.
pub fn drift(x: &Vec5, p: &QekfParams) -> Vec5 {
    let ia = p.inv_alpha();
    let (sx, sy, sz, q2, p2) = (x[0], x[1], x[2], x[3], x[4]);
    Vec5::new(
        -2.0 * q2 * ia * sy - 0.5 * p.k1 * sx,
        2.0 * q2 * ia * sx - 0.5 * p.k1 * sy,
        -p.k1 * (1.0 + sz),
        -0.5 * p.k2 * q2,
        -0.5 * ia * sz - 0.5 * p.k2 * p2,
    )
}

/// Jacobian of [`drift`].
pub fn jacobian(x: &Vec5, p: &QekfParams) -> Mat5 {
    let ia = p.inv_alpha();
    let (sx, sy, _, q2, _) = (x[0], x[1], x[2], x[3], x[4]);
    Mat5::from_row_slice(&[
        -0.5 * p.k1, -2.0 * q2 * ia, 0.0, -2.0 * sy * ia, 0.0,
        2.0 * q2 * ia, -0.5 * p.k1, 0.0, 2.0 * sx * ia, 0.0,
        0.0, 0.0, -p.k1, 0.0, 0.0,
        0.0, 0.0, 0.0, -0.5 * p.k2, 0.0,
        0.0, 0.0, -0.5 * ia, 0.0, -0.5 * p.k2,
    ])
}

/// Measurement row `H = (sqrt(k1), 0, 0, 0, 0)` applied to the estimate.
pub fn measurement(x: &Vec5, p: &QekfParams) -> f64 {
    p.k1.sqrt() * x[0]
}

/// Cross-correlation vector between state and measurement increments.
pub fn s_vector(x: &Vec5, p: &QekfParams) -> Vec5 {
    let first = match p.s_form {
        SForm::Derived => p.k1.sqrt() * x[2],
        SForm::Paper => p.k1 * x[2],
    };
    Vec5::new(first, 0.0, -p.k1.sqrt() * x[0], 0.0, 0.0)
}

/// The raw printed state-noise matrix, the (unit) measurement variance and
/// the cross-correlation vector, evaluated at an estimate.
#[derive(Debug, Clone, Copy)]
pub struct CovarianceTerms {
    /// The printed state-covariance matrix; diagnostic only, the filter
    /// propagates the robustified `mu I + S S^T` instead.
    pub q_raw: Mat5,
    pub r: f64,
    pub s: Vec5,
}

pub fn covariance_terms(x: &Vec5, p: &QekfParams) -> CovarianceTerms {
    let (sx, sy, sz) = (x[0], x[1], x[2]);
    let k1 = p.k1;
    let q_raw = Mat5::from_row_slice(&[
        k1, 0.0, k1 * sx, 0.0, 0.0,
        0.0, k1, k1 * sy, 0.0, 0.0,
        k1 * sx, k1 * sy, k1 * (1.0 + sz), 0.0, 0.0,
        0.0, 0.0, 0.0, -0.25 * p.k2, 0.0,
        0.0, 0.0, 0.0, 0.0, -0.25 * p.k2,
    ]);
    CovarianceTerms {
        q_raw,
        r: 1.0,
        s: s_vector(x, p),
    }
}

/// Diagnostic for the consistency requirement `Q - S R^-1 S^T >= 0` on the
/// printed matrices: the smallest eigenvalue of `q_raw - s s^T`. Negative
/// for this system, which is why the robustified covariance is used.
pub fn constraint_gap(x: &Vec5, p: &QekfParams) -> f64 {
    let terms = covariance_terms(x, p);
    let m = terms.q_raw - terms.s * terms.s.transpose();
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Kalman gain `(P H^T + S) R^-1`.
pub fn kalman_gain(x: &Vec5, cov: &Mat5, p: &QekfParams) -> Vec5 {
    let ph: Vec5 = cov.column(0) * p.k1.sqrt();
    ph + s_vector(x, p)
}

/// The quantum extended Kalman filter state.
pub struct QekfFilter {
    params: QekfParams,
    x: Vec5,
    cov: Mat5,
    t: f64,
    step_index: usize,
    last_gain: Vec5,
    psd_tol: f64,
}

impl QekfFilter {
    pub fn new(params: QekfParams, x0: Vec5, p0: Mat5) -> Result<Self> {
        if (p0 - p0.transpose()).abs().max() > 1e-10 {
            return Err(Error::InvalidParameter(
                "initial covariance must be symmetric".into(),
            ));
        }
        Ok(Self {
            params,
            x: x0,
            cov: p0,
            t: 0.0,
            step_index: 0,
            last_gain: Vec5::zeros(),
            psd_tol: 1e-8,
        })
    }

    /// Initialise from the qubit state and the cavity's coherent amplitude:
    /// `(Tr[sigma_x rho], Tr[sigma_y rho], Tr[sigma_z rho], Re beta, Im beta)`
    /// with covariance `p0_scale * I`.
    pub fn from_initial_state(
        params: QekfParams,
        rho1: &DensityMatrix,
        beta: Complex64,
        p0_scale: f64,
    ) -> Result<Self> {
        use crate::operators::{pauli, Pauli};
        if rho1.dim() != 2 {
            return Err(Error::DimensionMismatch {
                context: "filter qubit initial state",
                left: rho1.dim(),
                right: 2,
            });
        }
        if !(p0_scale >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "initial covariance scale must be nonnegative, got {p0_scale}"
            )));
        }
        let x0 = Vec5::new(
            rho1.expect_real(&pauli(Pauli::X))?,
            rho1.expect_real(&pauli(Pauli::Y))?,
            rho1.expect_real(&pauli(Pauli::Z))?,
            beta.re,
            beta.im,
        );
        Self::new(params, x0, Mat5::identity() * p0_scale)
    }

    pub fn params(&self) -> &QekfParams {
        &self.params
    }

    pub fn x(&self) -> &Vec5 {
        &self.x
    }

    pub fn covariance(&self) -> &Mat5 {
        &self.cov
    }

    pub fn gain(&self) -> &Vec5 {
        &self.last_gain
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Disturbance estimate `q2_hat / alpha`.
    pub fn estimate_q(&self) -> f64 {
        self.x[3] * self.params.inv_alpha()
    }

    /// One filter update driven by a record increment.
    pub fn step(&mut self, dy: f64, dt: f64) -> Result<()> {
        if !(dt > 0.0) || !dy.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bad step input dy={dy}, dt={dt}"
            )));
        }
        let p = &self.params;
        let f = drift(&self.x, p);
        let fm = jacobian(&self.x, p);
        let s = s_vector(&self.x, p);
        let q_hat = Mat5::identity() * p.mu + s * s.transpose();
        let k = kalman_gain(&self.x, &self.cov, p);

        let mut dp = fm * self.cov + self.cov * fm.transpose() + q_hat - k * k.transpose();
        if p.lambda != 0.0 {
            dp += self.cov * self.cov * p.lambda;
        }
        self.cov += dp * dt;
        self.cov = (self.cov + self.cov.transpose()) * 0.5;

        let innovation = dy - measurement(&self.x, p) * dt;
        self.x += f * dt + k * innovation;

        if !self.x.iter().all(|v| v.is_finite()) {
            return Err(Error::CovarianceInvariant {
                step: self.step_index,
                detail: "estimate diverged to non-finite values".into(),
            });
        }
        let shifted = self.cov + Mat5::identity() * self.psd_tol;
        if Cholesky::new(shifted).is_none() {
            return Err(Error::CovarianceInvariant {
                step: self.step_index,
                detail: format!(
                    "covariance lost positive semidefiniteness beyond {:.1e}",
                    self.psd_tol
                ),
            });
        }

        self.last_gain = k;
        self.t += dt;
        self.step_index += 1;
        Ok(())
    }
}

/// Estimate series emitted by [`run_qekf`].
#[derive(Debug, Clone, Default)]
pub struct QekfSeries {
    pub times: Vec<f64>,
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
    pub sz: Vec<f64>,
    pub q2: Vec<f64>,
    pub p2: Vec<f64>,
    /// Disturbance estimate `q2 / alpha`.
    pub q: Vec<f64>,
    pub p_trace: Vec<f64>,
    pub gain: Vec<[f64; 5]>,
}

/// Fold the filter over a record, emitting estimates every `stride` steps
/// (step 0 and the final step included).
pub fn run_qekf(
    filter: &mut QekfFilter,
    record: &MeasurementRecord,
    stride: usize,
) -> Result<QekfSeries> {
    let stride = stride.max(1);
    let mut out = QekfSeries::default();
    let emit = |filter: &QekfFilter, out: &mut QekfSeries| {
        out.times.push(filter.time());
        out.sx.push(filter.x[0]);
        out.sy.push(filter.x[1]);
        out.sz.push(filter.x[2]);
        out.q2.push(filter.x[3]);
        out.p2.push(filter.x[4]);
        out.q.push(filter.estimate_q());
        out.p_trace.push(filter.cov.trace());
        out.gain.push([
            filter.last_gain[0],
            filter.last_gain[1],
            filter.last_gain[2],
            filter.last_gain[3],
            filter.last_gain[4],
        ]);
    };
    emit(filter, &mut out);
    for (n, &dy) in record.increments.iter().enumerate() {
        filter.step(dy, record.dt)?;
        let step = n + 1;
        if step % stride == 0 || step == record.increments.len() {
            emit(filter, &mut out);
        }
    }
    Ok(out)
}
