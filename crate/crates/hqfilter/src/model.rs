//! The hybrid system model: classical mean-reverting disturbance, SLH
//! triples, the disturbance-to-cavity analog mapping and the concatenation
//! of qubit and cavity into one enlarged open system.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{
    annihilation, identity, is_hermitian, pauli, tensor, zeros, FockTruncation, Operator, Pauli,
};
use crate::state::Tolerances;

/// Mean-reverting classical disturbance `dq = -u q dt - v dw`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuProcess {
    /// Decay rate (1/time), strictly positive.
    pub u: f64,
    /// Noise gain (1/sqrt(time)).
    pub v: f64,
    /// Initial value.
    pub q0: f64,
}

impl OuProcess {
    pub fn new(u: f64, v: f64, q0: f64) -> Result<Self> {
        if !(u > 0.0) || !u.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "disturbance decay rate must be positive, got {u}"
            )));
        }
        if !v.is_finite() || !q0.is_finite() {
            return Err(Error::InvalidParameter(
                "disturbance noise gain and initial value must be finite".into(),
            ));
        }
        Ok(Self { u, v, q0 })
    }
}

/// Qubit-field coupling strength. Zero is admitted for the decoupled
/// limit in which the field carries no information about the qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitParams {
    pub k1: f64,
}

impl QubitParams {
    pub fn new(k1: f64) -> Result<Self> {
        if !(k1 >= 0.0) || !k1.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "qubit coupling strength must be nonnegative, got {k1}"
            )));
        }
        Ok(Self { k1 })
    }
}

/// Open quantum system triple (S, L, H) with identity scattering.
#[derive(Debug, Clone, PartialEq)]
pub struct SlhModel {
    scattering: Operator,
    coupling: Vec<Operator>,
    hamiltonian: Operator,
    dim: usize,
}

impl SlhModel {
    /// Build a model with S = I, validating that all operators share one
    /// dimension and that H is Hermitian.
    pub fn new(coupling: Vec<Operator>, hamiltonian: Operator, tol: &Tolerances) -> Result<Self> {
        let dim = hamiltonian.nrows();
        if !hamiltonian.is_square() {
            return Err(Error::DimensionMismatch {
                context: "SLH Hamiltonian",
                left: hamiltonian.nrows(),
                right: hamiltonian.ncols(),
            });
        }
        if !is_hermitian(&hamiltonian, tol.herm) {
            return Err(Error::NotHermitian {
                deviation: crate::operators::max_abs_diff(&hamiltonian, &hamiltonian.adjoint()),
            });
        }
        for l in &coupling {
            if l.nrows() != dim || l.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    context: "SLH coupling operator",
                    left: l.nrows(),
                    right: dim,
                });
            }
        }
        Ok(Self {
            scattering: identity(dim),
            coupling,
            hamiltonian,
            dim,
        })
    }

    pub fn scattering(&self) -> &Operator {
        &self.scattering
    }

    pub fn coupling(&self) -> &[Operator] {
        &self.coupling
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> usize {
        self.coupling.len()
    }
}

/// The disturbed qubit: coupling `sqrt(k1) sigma_-` and Hamiltonian
/// `q * disturbance_op`, parametric in the sampled disturbance value.
#[derive(Debug, Clone)]
pub struct QubitSystem {
    params: QubitParams,
    coupling: Operator,
    disturbance_op: Operator,
}

impl QubitSystem {
    pub fn params(&self) -> QubitParams {
        self.params
    }

    /// Coupling operator `sqrt(k1) sigma_-`.
    pub fn coupling(&self) -> &Operator {
        &self.coupling
    }

    /// Operator multiplied by the disturbance in the Hamiltonian.
    pub fn disturbance_op(&self) -> &Operator {
        &self.disturbance_op
    }

    /// SLH triple at a given disturbance value.
    pub fn slh(&self, q: f64) -> SlhModel {
        SlhModel::new(
            vec![self.coupling.clone()],
            &self.disturbance_op * Complex64::new(q, 0.0),
            &Tolerances::default(),
        )
        .expect("qubit SLH is valid by construction")
    }

    /// Hamiltonian at a given disturbance value.
    pub fn hamiltonian(&self, q: f64) -> Operator {
        &self.disturbance_op * Complex64::new(q, 0.0)
    }
}

/// Build the disturbed qubit `{I, [sqrt(k1) sigma_-], q * disturbance_op}`.
pub fn build_qubit(params: QubitParams, disturbance_op: Operator) -> Result<QubitSystem> {
    if disturbance_op.nrows() != 2 || disturbance_op.ncols() != 2 {
        return Err(Error::DimensionMismatch {
            context: "qubit disturbance operator",
            left: disturbance_op.nrows(),
            right: 2,
        });
    }
    if !is_hermitian(&disturbance_op, Tolerances::default().herm) {
        return Err(Error::NotHermitian {
            deviation: crate::operators::max_abs_diff(&disturbance_op, &disturbance_op.adjoint()),
        });
    }
    let coupling = pauli(Pauli::Minus) * Complex64::new(params.k1.sqrt(), 0.0);
    Ok(QubitSystem {
        params,
        coupling,
        disturbance_op,
    })
}

/// Cavity whose scaled quadrature reproduces the disturbance mean:
/// `k = 2u`, `alpha = sqrt(2u) / (2v)`, `q = (a + a^dag) / (2 alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityAnalog {
    /// Cavity-field coupling strength (1/time).
    pub k: f64,
    /// Quadrature scaling; infinite in the decoupled limit.
    pub alpha: f64,
    pub trunc: FockTruncation,
}

impl CavityAnalog {
    /// `1/alpha`; zero in the decoupled limit.
    pub fn inv_alpha(&self) -> f64 {
        if self.alpha.is_infinite() {
            0.0
        } else {
            1.0 / self.alpha
        }
    }

    pub fn annihilation(&self) -> Operator {
        annihilation(self.trunc)
    }

    /// Unscaled quadrature `(a + a^dag)/2`.
    pub fn q2_op(&self) -> Operator {
        let a = self.annihilation();
        (&a + a.adjoint()).scale(0.5)
    }

    /// Conjugate quadrature `(a - a^dag)/(2i)`.
    pub fn p2_op(&self) -> Operator {
        let a = self.annihilation();
        (&a - a.adjoint()) * Complex64::new(0.0, -0.5)
    }

    /// Scaled quadrature `(a + a^dag)/(2 alpha)` standing in for the
    /// classical disturbance.
    pub fn q_op(&self) -> Operator {
        self.q2_op().scale(self.inv_alpha())
    }

    /// Degenerate analog for a noiseless, zero disturbance: the coupling
    /// to the qubit vanishes (alpha -> infinity) and the estimate of the
    /// disturbance is identically zero.
    pub fn decoupled(u: f64, trunc: FockTruncation) -> Result<Self> {
        if !(u > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "decay rate must be positive, got {u}"
            )));
        }
        Ok(Self {
            k: 2.0 * u,
            alpha: f64::INFINITY,
            trunc,
        })
    }
}

/// Map a disturbance process onto its cavity analog.
pub fn analog_cavity(ou: &OuProcess, trunc: FockTruncation) -> Result<CavityAnalog> {
    if ou.v == 0.0 {
        return Err(Error::DegenerateAnalog(
            "noise gain v = 0: the disturbance is deterministic decay and has no \
             finite quadrature scaling"
                .into(),
        ));
    }
    let k = 2.0 * ou.u;
    let alpha = (2.0 * ou.u).sqrt() / (2.0 * ou.v);
    Ok(CavityAnalog {
        k,
        alpha,
        trunc,
    })
}

/// Build the cavity SLH triple `{I, [sqrt(k) a], 0}`.
pub fn build_cavity(analog: &CavityAnalog) -> SlhModel {
    let n = analog.trunc.levels();
    let l = annihilation(analog.trunc) * Complex64::new(analog.k.sqrt(), 0.0);
    SlhModel::new(vec![l], zeros(n), &Tolerances::default())
        .expect("cavity SLH is valid by construction")
}

/// Concatenation of two systems on the joint (first (x) second) space with
/// a direct interaction Hamiltonian given on the joint space.
///
/// The coupling channels stack: `[L1 (x) I, I (x) L2]`; the Hamiltonian is
/// `H1 (x) I + I (x) H2 + H_int`.
pub fn concatenate(
    g1: &SlhModel,
    g2: &SlhModel,
    h_int: &Operator,
    tol: &Tolerances,
) -> Result<SlhModel> {
    let dim = g1.dim() * g2.dim();
    if h_int.nrows() != dim || h_int.ncols() != dim {
        return Err(Error::DimensionMismatch {
            context: "interaction Hamiltonian",
            left: h_int.nrows(),
            right: dim,
        });
    }
    let i1 = identity(g1.dim());
    let i2 = identity(g2.dim());
    let mut coupling = Vec::with_capacity(g1.channels() + g2.channels());
    for l in g1.coupling() {
        coupling.push(tensor(l, &i2));
    }
    for l in g2.coupling() {
        coupling.push(tensor(&i1, l));
    }
    let h = tensor(g1.hamiltonian(), &i2) + tensor(&i1, g2.hamiltonian()) + h_int;
    SlhModel::new(coupling, h, tol)
}

/// The enlarged qubit-cavity system: the classical disturbance in the qubit
/// Hamiltonian is replaced by the analog quadrature, giving the interaction
/// `disturbance_op (x) (a + a^dag) / (2 alpha)`.
pub fn enlarged_system(qubit: &QubitSystem, analog: &CavityAnalog) -> Result<SlhModel> {
    let g1 = qubit.slh(0.0);
    let g2 = build_cavity(analog);
    let h_int = tensor(qubit.disturbance_op(), &analog.q_op());
    concatenate(&g1, &g2, &h_int, &Tolerances::default())
}
