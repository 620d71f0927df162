//! Finite-dimensional complex operator algebra: Pauli and truncated Fock
//! operators, tensor products, commutators, Lindblad generators and
//! coherent states.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::{DensityMatrix, Tolerances};

/// Dense complex operator on a finite Hilbert space.
pub type Operator = DMatrix<Complex64>;

/// Default admissible population leakage when truncating a coherent state.
pub const DEFAULT_COHERENT_LEAKAGE: f64 = 1e-6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn identity(dim: usize) -> Operator {
    DMatrix::identity(dim, dim)
}

pub fn zeros(dim: usize) -> Operator {
    DMatrix::zeros(dim, dim)
}

/// Qubit operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    /// Raising operator |e><g|.
    Plus,
    /// Lowering operator |g><e|.
    Minus,
}

pub fn pauli(which: Pauli) -> Operator {
    let entries = match which {
        Pauli::X => [ZERO, ONE, ONE, ZERO],
        Pauli::Y => [ZERO, -I, I, ZERO],
        Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        Pauli::Plus => [ZERO, ONE, ZERO, ZERO],
        Pauli::Minus => [ZERO, ZERO, ONE, ZERO],
    };
    DMatrix::from_row_slice(2, 2, &entries)
}

/// Number of Fock levels kept when the cavity is represented on a
/// finite space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockTruncation {
    levels: usize,
}

impl FockTruncation {
    pub fn new(levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidParameter(format!(
                "Fock truncation needs at least 2 levels, got {levels}"
            )));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }
}

/// Annihilation operator on the truncated Fock space:
/// `a[m, m+1] = sqrt(m+1)`.
///
/// The truncation puts the cutoff error at the top level, so
/// `[a, a^dag] = I` holds on all but the last diagonal entry.
pub fn annihilation(trunc: FockTruncation) -> Operator {
    let n = trunc.levels();
    let mut a = DMatrix::zeros(n, n);
    for m in 0..n - 1 {
        a[(m, m + 1)] = Complex64::new(((m + 1) as f64).sqrt(), 0.0);
    }
    a
}

/// Kronecker product; the system (qubit) factor comes first, the probe
/// (cavity) factor second.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    a.kronecker(b)
}

pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    check_same_dim("commutator", a, b)?;
    Ok(a * b - b * a)
}

pub fn anticommutator(a: &Operator, b: &Operator) -> Result<Operator> {
    check_same_dim("anticommutator", a, b)?;
    Ok(a * b + b * a)
}

/// Heisenberg-picture Lindblad generator
/// `i[H,X] + L^dag X L - (L^dag L X + X L^dag L)/2`.
pub fn lindblad(l: &Operator, h: &Operator, x: &Operator) -> Result<Operator> {
    check_same_dim("lindblad", l, x)?;
    check_same_dim("lindblad", h, x)?;
    let ldag = l.adjoint();
    let ldl = &ldag * l;
    let mut out = commutator(h, x)? * I;
    out += &ldag * x * l;
    out -= (&ldl * x + x * &ldl).scale(0.5);
    Ok(out)
}

/// Dissipator `D[L] rho = L rho L^dag - (L^dag L rho + rho L^dag L)/2`.
pub fn dissipator(l: &Operator, rho: &Operator) -> Result<Operator> {
    check_same_dim("dissipator", l, rho)?;
    let ldag = l.adjoint();
    let ldl = &ldag * l;
    let mut out = l * rho * &ldag;
    out -= (&ldl * rho + rho * &ldl).scale(0.5);
    Ok(out)
}

/// State-picture (adjoint) Lindblad generator
/// `-i[H,rho] + L rho L^dag - (L^dag L rho + rho L^dag L)/2`.
pub fn lindblad_state(l: &Operator, h: &Operator, rho: &Operator) -> Result<Operator> {
    check_same_dim("lindblad_state", l, rho)?;
    check_same_dim("lindblad_state", h, rho)?;
    let ldag = l.adjoint();
    let ldl = &ldag * l;
    let mut out = commutator(h, rho)? * (-I);
    out += l * rho * &ldag;
    out -= (&ldl * rho + rho * &ldl).scale(0.5);
    Ok(out)
}

/// Truncated coherent state |beta><beta|, renormalised to unit trace.
///
/// Rejected when the truncated expansion leaks more than `leakage_limit`
/// of the population; the error names the smallest adequate truncation.
pub fn coherent_state(
    beta: Complex64,
    trunc: FockTruncation,
    leakage_limit: f64,
    tol: &Tolerances,
) -> Result<DensityMatrix> {
    let n = trunc.levels();
    let amps = coherent_amplitudes(beta, n);
    let norm_sq: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
    let leakage = 1.0 - norm_sq;
    if leakage > leakage_limit {
        return Err(Error::CoherentLeakage {
            leakage,
            limit: leakage_limit,
            required: minimal_coherent_levels(beta, leakage_limit),
        });
    }
    let scale = norm_sq.sqrt();
    let mut mat = DMatrix::zeros(n, n);
    for (i, ci) in amps.iter().enumerate() {
        for (j, cj) in amps.iter().enumerate() {
            mat[(i, j)] = (ci / scale) * (cj / scale).conj();
        }
    }
    DensityMatrix::new(mat, tol)
}

/// Number-basis amplitudes `e^{-|beta|^2/2} beta^n / sqrt(n!)` of the
/// first `levels` terms.
pub fn coherent_amplitudes(beta: Complex64, levels: usize) -> Vec<Complex64> {
    let pre = (-beta.norm_sqr() / 2.0).exp();
    let mut amps = Vec::with_capacity(levels);
    let mut term = Complex64::new(pre, 0.0);
    amps.push(term);
    for n in 1..levels {
        term *= beta / Complex64::new((n as f64).sqrt(), 0.0);
        amps.push(term);
    }
    amps
}

/// Smallest number of Fock levels keeping the coherent-state leakage at
/// or below `limit`.
pub fn minimal_coherent_levels(beta: Complex64, limit: f64) -> usize {
    let x = beta.norm_sqr();
    let pre = (-x).exp();
    let mut term = pre;
    let mut mass = term;
    let mut n = 1usize;
    while 1.0 - mass > limit && n < 10_000 {
        term *= x / n as f64;
        mass += term;
        n += 1;
    }
    n.max(2)
}

/// Trace out the second tensor factor of dimension `right_dim`.
pub fn partial_trace_right(m: &Operator, right_dim: usize) -> Result<Operator> {
    let dim = m.nrows();
    if !m.is_square() || right_dim == 0 || dim % right_dim != 0 {
        return Err(Error::DimensionMismatch {
            context: "partial_trace_right",
            left: dim,
            right: right_dim,
        });
    }
    let left_dim = dim / right_dim;
    let mut out = DMatrix::zeros(left_dim, left_dim);
    for i in 0..left_dim {
        for j in 0..left_dim {
            let mut acc = ZERO;
            for k in 0..right_dim {
                acc += m[(i * right_dim + k, j * right_dim + k)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

pub fn max_abs(m: &Operator) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.norm()))
}

pub fn max_abs_diff(a: &Operator, b: &Operator) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// `max |A - A^dag| <= tol`.
pub fn is_hermitian(m: &Operator, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > tol {
                return false;
            }
        }
    }
    true
}

fn check_same_dim(context: &'static str, a: &Operator, b: &Operator) -> Result<()> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            context,
            left: a.nrows(),
            right: b.nrows(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sx() -> Operator {
        pauli(Pauli::X)
    }
    fn sy() -> Operator {
        pauli(Pauli::Y)
    }
    fn sz() -> Operator {
        pauli(Pauli::Z)
    }

    #[test]
    fn pauli_matrices_have_exact_entries() {
        assert_eq!(sx()[(0, 1)], ONE);
        assert_eq!(sx()[(1, 0)], ONE);
        assert_eq!(sy()[(0, 1)], -I);
        assert_eq!(sy()[(1, 0)], I);
        assert_eq!(sz()[(0, 0)], ONE);
        assert_eq!(sz()[(1, 1)], -ONE);
        assert_eq!(pauli(Pauli::Minus)[(1, 0)], ONE);
        assert_eq!(pauli(Pauli::Minus)[(0, 1)], ZERO);
        assert_eq!(pauli(Pauli::Plus)[(0, 1)], ONE);
    }

    #[test]
    fn pauli_commutation_relations_are_exact() {
        let two_i = Complex64::new(0.0, 2.0);
        assert_eq!(max_abs_diff(&commutator(&sx(), &sy()).unwrap(), &(sz() * two_i)), 0.0);
        assert_eq!(max_abs_diff(&commutator(&sz(), &sx()).unwrap(), &(sy() * two_i)), 0.0);
        assert_eq!(max_abs_diff(&commutator(&sy(), &sz()).unwrap(), &(sx() * two_i)), 0.0);
    }

    #[test]
    fn pauli_squares_are_identity_exactly() {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            let s = pauli(p);
            assert_eq!(max_abs_diff(&(&s * &s), &identity(2)), 0.0);
        }
    }

    #[test]
    fn annihilation_two_and_three_levels() {
        let a2 = annihilation(FockTruncation::new(2).unwrap());
        assert_eq!(a2[(0, 1)], ONE);
        assert_eq!(a2[(0, 0)], ZERO);
        assert_eq!(a2[(1, 0)], ZERO);
        assert_eq!(a2[(1, 1)], ZERO);

        let a3 = annihilation(FockTruncation::new(3).unwrap());
        assert_eq!(a3[(0, 1)], ONE);
        assert_relative_eq!(a3[(1, 2)].re, 2.0f64.sqrt(), epsilon = 1e-15);
        assert_eq!(a3[(0, 2)], ZERO);
        assert_eq!(a3[(2, 1)], ZERO);
    }

    #[test]
    fn fock_commutator_is_identity_away_from_cutoff() {
        let n = 7;
        let a = annihilation(FockTruncation::new(n).unwrap());
        let comm = commutator(&a, &a.adjoint()).unwrap();
        for i in 0..n - 1 {
            assert_relative_eq!(comm[(i, i)].re, 1.0, epsilon = 1e-14);
            assert_relative_eq!(comm[(i, i)].im, 0.0, epsilon = 1e-14);
        }
        // The last level absorbs the truncation error.
        assert_relative_eq!(comm[(n - 1, n - 1)].re, -((n - 1) as f64), epsilon = 1e-12);
    }

    #[test]
    fn fock_truncation_requires_two_levels() {
        assert!(FockTruncation::new(1).is_err());
        assert!(FockTruncation::new(2).is_ok());
    }

    #[test]
    fn tensor_of_identities_and_ordering() {
        assert_eq!(max_abs_diff(&tensor(&identity(2), &identity(3)), &identity(6)), 0.0);
        let t = tensor(&sz(), &identity(2));
        let diag: Vec<f64> = (0..4).map(|i| t[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn lindblad_damps_sigma_x_at_half_rate() {
        // L = sqrt(k) sigma_-, H = 0 sends sigma_x to -(k/2) sigma_x.
        let k: f64 = 0.55;
        let l = pauli(Pauli::Minus) * Complex64::new(k.sqrt(), 0.0);
        let got = lindblad(&l, &zeros(2), &sx()).unwrap();
        let want = sx() * Complex64::new(-k / 2.0, 0.0);
        assert!(max_abs_diff(&got, &want) < 1e-14);
    }

    #[test]
    fn lindblad_damps_sigma_z_towards_ground() {
        // L = sqrt(k) sigma_-, H = 0 sends sigma_z to -k (I + sigma_z).
        let k: f64 = 0.55;
        let l = pauli(Pauli::Minus) * Complex64::new(k.sqrt(), 0.0);
        let got = lindblad(&l, &zeros(2), &sz()).unwrap();
        let want = (identity(2) + sz()) * Complex64::new(-k, 0.0);
        assert!(max_abs_diff(&got, &want) < 1e-14);
    }

    #[test]
    fn lindblad_without_coupling_is_hamiltonian_flow() {
        let h = sy() * Complex64::new(0.7, 0.0);
        let got = lindblad(&zeros(2), &h, &sx()).unwrap();
        let want = commutator(&h, &sx()).unwrap() * I;
        assert!(max_abs_diff(&got, &want) < 1e-15);
    }

    #[test]
    fn lindblad_rejects_dimension_mismatch() {
        assert!(lindblad(&zeros(3), &zeros(2), &zeros(2)).is_err());
    }

    #[test]
    fn coherent_vacuum_is_fock_zero() {
        let trunc = FockTruncation::new(4).unwrap();
        let rho = coherent_state(ZERO, trunc, DEFAULT_COHERENT_LEAKAGE, &Tolerances::default())
            .unwrap();
        assert_relative_eq!(rho.matrix()[(0, 0)].re, 1.0, epsilon = 1e-14);
        assert!(max_abs(&(rho.matrix() - {
            let mut m = zeros(4);
            m[(0, 0)] = ONE;
            m
        })) < 1e-14);
    }

    #[test]
    fn coherent_quarter_displacement_quadrature_mean() {
        let trunc = FockTruncation::new(8).unwrap();
        let beta = Complex64::new(0.25, 0.0);
        let rho = coherent_state(beta, trunc, DEFAULT_COHERENT_LEAKAGE, &Tolerances::default())
            .unwrap();
        let a = annihilation(trunc);
        let q = (&a + a.adjoint()).scale(0.5);
        assert_relative_eq!(rho.expect_real(&q).unwrap(), 0.25, epsilon = 1e-6);
    }

    #[test]
    fn coherent_truncated_norm_matches_partial_sum() {
        // The kept population of |0.25> on 8 levels is
        // e^{-0.0625} * sum_{n<=7} 0.0625^n / n!.
        let beta = Complex64::new(0.25, 0.0);
        let amps = coherent_amplitudes(beta, 8);
        let norm_sq: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
        let mut expected = 0.0;
        let mut term = (-0.0625f64).exp();
        for n in 0..8 {
            if n > 0 {
                term *= 0.0625 / n as f64;
            }
            expected += term;
        }
        assert_relative_eq!(norm_sq, expected, epsilon = 1e-15);
    }

    #[test]
    fn coherent_leakage_error_names_adequate_truncation() {
        let trunc = FockTruncation::new(2).unwrap();
        let beta = Complex64::new(2.0, 0.0);
        let err = coherent_state(beta, trunc, 1e-6, &Tolerances::default()).unwrap_err();
        match err {
            Error::CoherentLeakage { required, .. } => {
                let fixed = FockTruncation::new(required).unwrap();
                assert!(coherent_state(beta, fixed, 1e-6, &Tolerances::default()).is_ok());
                // One level fewer must still leak.
                let smaller = FockTruncation::new(required - 1).unwrap();
                assert!(coherent_state(beta, smaller, 1e-6, &Tolerances::default()).is_err());
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn partial_trace_right_contracts_tensor_products() {
        let b = annihilation(FockTruncation::new(3).unwrap());
        let t = tensor(&sx(), &(&b + b.adjoint() + identity(3)));
        let reduced = partial_trace_right(&t, 3).unwrap();
        // Tr_2[A (x) B] = Tr[B] A.
        let want = sx() * Complex64::new(3.0, 0.0);
        assert!(max_abs_diff(&reduced, &want) < 1e-14);
    }

    fn random_operator(dim: usize, seed: &[f64]) -> Operator {
        let mut m = zeros(dim);
        let mut k = 0;
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = Complex64::new(seed[k % seed.len()], seed[(k + 1) % seed.len()]);
                k += 2;
            }
        }
        m
    }

    fn random_density(dim: usize, seed: &[f64]) -> Operator {
        let g = random_operator(dim, seed);
        let psd = &g * g.adjoint();
        let tr = psd.trace().re;
        psd.unscale(tr)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn tensor_trace_is_multiplicative(seed in proptest::collection::vec(-1.0f64..1.0, 26)) {
            let a = random_operator(2, &seed);
            let b = random_operator(3, &seed[2..]);
            let lhs = tensor(&a, &b).trace();
            let rhs = a.trace() * b.trace();
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn tensor_is_associative(seed in proptest::collection::vec(-1.0f64..1.0, 30)) {
            let a = random_operator(2, &seed);
            let b = random_operator(2, &seed[3..]);
            let c = random_operator(3, &seed[7..]);
            let lhs = tensor(&tensor(&a, &b), &c);
            let rhs = tensor(&a, &tensor(&b, &c));
            prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        }

        #[test]
        fn lindblad_state_is_traceless(seed in proptest::collection::vec(-1.0f64..1.0, 40)) {
            let l = random_operator(3, &seed[1..]);
            let h = {
                let g = random_operator(3, &seed[5..]);
                (&g + g.adjoint()).scale(0.5)
            };
            let rho = random_density(3, &seed);
            let out = lindblad_state(&l, &h, &rho).unwrap();
            prop_assert!(out.trace().norm() <= 10.0 * f64::EPSILON * 3.0 * 10.0);
        }

        #[test]
        fn lindblad_pictures_are_adjoint(seed in proptest::collection::vec(-1.0f64..1.0, 50)) {
            let l = random_operator(3, &seed[2..]);
            let h = {
                let g = random_operator(3, &seed[9..]);
                (&g + g.adjoint()).scale(0.5)
            };
            let x = random_operator(3, &seed[4..]);
            let rho = random_density(3, &seed);
            let lhs = (lindblad(&l, &h, &x).unwrap() * &rho).trace();
            let rhs = (&x * lindblad_state(&l, &h, &rho).unwrap()).trace();
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn coherent_states_satisfy_density_invariants(
            re in -0.6f64..0.6,
            im in -0.6f64..0.6,
        ) {
            let trunc = FockTruncation::new(12).unwrap();
            let rho = coherent_state(
                Complex64::new(re, im),
                trunc,
                DEFAULT_COHERENT_LEAKAGE,
                &Tolerances::default(),
            );
            prop_assert!(rho.is_ok());
        }
    }
}
