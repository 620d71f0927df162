//! Density matrices and the positivity-restoring projection used by the
//! stochastic integrators.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{is_hermitian, max_abs_diff, Operator};

/// Numerical tolerances for state invariants.
///
/// Defaults sit an order of magnitude above double-precision accumulation
/// error for the dimensions used here (up to 2 x 10).
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Hermiticity: max |A - A^dag| must stay below this.
    pub herm: f64,
    /// Trace normalisation: |Tr rho - 1| must stay below this.
    pub trace: f64,
    /// Positivity: the minimum eigenvalue may not drop below `-psd`.
    pub psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-9,
            trace: 1e-9,
            psd: 1e-8,
        }
    }
}

/// A quantum state: Hermitian, unit trace, positive semidefinite
/// (all within [`Tolerances`]).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validate the invariants and wrap the matrix.
    pub fn new(mat: DMatrix<Complex64>, tol: &Tolerances) -> Result<Self> {
        Self::validate(&mat, tol)?;
        Ok(Self { mat })
    }

    /// Wrap a matrix whose invariants were already established by the
    /// projection step. Checked again in debug builds.
    pub(crate) fn from_projected(mat: DMatrix<Complex64>) -> Self {
        debug_assert!(Self::validate(&mat, &Tolerances::default()).is_ok());
        Self { mat }
    }

    /// Qubit state from Bloch components, `(I + x sx + y sy + z sz)/2`.
    pub fn from_bloch(x: f64, y: f64, z: f64, tol: &Tolerances) -> Result<Self> {
        let half = Complex64::new(0.5, 0.0);
        let xc = Complex64::new(x, 0.0);
        let yc = Complex64::new(0.0, y);
        let zc = Complex64::new(z, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let mat = DMatrix::from_row_slice(
            2,
            2,
            &[
                half * (one + zc),
                half * (xc - yc),
                half * (xc + yc),
                half * (one - zc),
            ],
        );
        Self::new(mat, tol)
    }

    /// Check the DensityMatrix invariants without constructing one.
    pub fn validate(mat: &DMatrix<Complex64>, tol: &Tolerances) -> Result<()> {
        if !mat.is_square() {
            return Err(Error::DimensionMismatch {
                context: "density matrix",
                left: mat.nrows(),
                right: mat.ncols(),
            });
        }
        if !is_hermitian(mat, tol.herm) {
            let dev = max_abs_diff(mat, &mat.adjoint());
            return Err(Error::NotHermitian { deviation: dev });
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > tol.trace || tr.im.abs() > tol.trace {
            return Err(Error::InvalidParameter(format!(
                "trace {tr} deviates from 1 beyond {:.1e}",
                tol.trace
            )));
        }
        let min_eig = min_eigenvalue(mat);
        if min_eig < -tol.psd {
            return Err(Error::InvalidParameter(format!(
                "minimum eigenvalue {min_eig:.3e} below -{:.1e}",
                tol.psd
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Expectation Tr[rho X].
    pub fn expect(&self, op: &Operator) -> Result<Complex64> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "expectation",
                left: self.dim(),
                right: op.nrows(),
            });
        }
        // Tr[rho X] = sum_ij rho_ij X_ji, no full product needed.
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += self.mat[(i, j)] * op[(j, i)];
            }
        }
        Ok(acc)
    }

    /// Expectation of a Hermitian observable; the imaginary part is
    /// discarded after checking it is negligible.
    pub fn expect_real(&self, op: &Operator) -> Result<f64> {
        let v = self.expect(op)?;
        debug_assert!(v.im.abs() < 1e-6, "imaginary expectation {v}");
        Ok(v.re)
    }

    /// Trace distance (1/2) * sum |eig(rho - sigma)|.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        let diff = &self.mat - &other.mat;
        let eig = SymmetricEigen::new(diff);
        0.5 * eig.eigenvalues.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Smallest eigenvalue, for diagnostics.
    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.mat)
    }
}

fn min_eigenvalue(mat: &DMatrix<Complex64>) -> f64 {
    SymmetricEigen::new(mat.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Hermitian Cholesky factorisation of `m + shift I` with positive-pivot
/// checks: success certifies min eig(m) > -shift.
///
/// (nalgebra's `Cholesky` does not reject indefinite complex Hermitian
/// input, so the pivots are checked here.)
fn hermitian_psd_within(m: &DMatrix<Complex64>, shift: f64) -> bool {
    let n = m.nrows();
    let mut l = m.clone();
    for i in 0..n {
        l[(i, i)] += Complex64::new(shift, 0.0);
    }
    for j in 0..n {
        let mut d = l[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let dsqrt = d.sqrt();
        l[(j, j)] = Complex64::new(dsqrt, 0.0);
        for i in (j + 1)..n {
            let mut v = l[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / dsqrt;
        }
    }
    true
}

/// Post-step repair for Euler-Maruyama state updates: Hermitize, clip
/// negative eigenvalues, renormalise the trace.
///
/// The repair magnitude per step is bounded by `max_step_change`; a larger
/// repair would mask an integrator failure, so the caller gets an error
/// instead.
#[derive(Debug, Clone, Copy)]
pub struct StateProjector {
    pub tol: Tolerances,
    /// Largest admissible max-abs change applied by one projection.
    pub max_step_change: f64,
}

impl StateProjector {
    pub fn new(tol: Tolerances, max_step_change: f64) -> Self {
        Self {
            tol,
            max_step_change,
        }
    }

    /// Project in place; returns the max-abs change that was applied.
    ///
    /// Positivity is certified each step: a Cholesky factorisation of
    /// `rho + psd*I` proves min eig >= -psd without a full spectral
    /// decomposition; only when it fails are the eigenvalues clipped.
    pub fn project(&self, mat: &mut DMatrix<Complex64>) -> std::result::Result<f64, String> {
        let orig = mat.clone();

        // Hermitize: (rho + rho^dag)/2.
        let adj = mat.adjoint();
        *mat += adj;
        *mat *= Complex64::new(0.5, 0.0);

        if !hermitian_psd_within(mat, self.tol.psd) {
            // Negative weight beyond tolerance: clip the spectrum at zero.
            let mut eig = SymmetricEigen::new(mat.clone());
            for v in eig.eigenvalues.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            *mat = eig.recompose();
        }

        let tr = mat.trace();
        if !tr.re.is_finite() || tr.re < 0.25 {
            return Err(format!("trace {tr} not renormalisable"));
        }
        mat.unscale_mut(tr.re);

        let change = max_abs_diff(mat, &orig);
        if !change.is_finite() {
            return Err("non-finite entries after projection".to_string());
        }
        if change > self.max_step_change {
            return Err(format!(
                "projection repaired {change:.3e}, beyond the {:.1e} per-step bound",
                self.max_step_change
            ));
        }
        Ok(change)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::identity;
    use approx::assert_relative_eq;

    fn diag(entries: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            entries.len(),
            entries.iter().map(|&x| Complex64::new(x, 0.0)),
        ))
    }

    #[test]
    fn accepts_maximally_mixed_state() {
        let tol = Tolerances::default();
        let rho = identity(4).unscale(4.0);
        assert!(DensityMatrix::new(rho, &tol).is_ok());
    }

    #[test]
    fn rejects_non_hermitian() {
        let tol = Tolerances::default();
        let mut m = diag(&[0.5, 0.5]);
        m[(0, 1)] = Complex64::new(0.0, 0.3);
        assert!(matches!(
            DensityMatrix::new(m, &tol),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn rejects_wrong_trace_and_negativity() {
        let tol = Tolerances::default();
        assert!(DensityMatrix::new(diag(&[0.7, 0.7]), &tol).is_err());
        assert!(DensityMatrix::new(diag(&[1.1, -0.1]), &tol).is_err());
    }

    #[test]
    fn projection_repairs_small_defects() {
        let proj = StateProjector::new(Tolerances::default(), 1e-2);
        // Slightly negative eigenvalue and slightly off trace.
        let mut m = diag(&[1.0005, -0.0004]);
        m[(0, 1)] = Complex64::new(1e-5, 1e-5);
        let change = proj.project(&mut m).unwrap();
        assert!(change > 0.0 && change < 1e-2);
        assert!(DensityMatrix::new(m, &Tolerances::default()).is_ok());
    }

    #[test]
    fn projection_reports_excessive_repair() {
        let proj = StateProjector::new(Tolerances::default(), 1e-4);
        let mut m = diag(&[1.3, -0.3]);
        assert!(proj.project(&mut m).is_err());
    }

    #[test]
    fn projection_leaves_valid_state_almost_unchanged() {
        let proj = StateProjector::new(Tolerances::default(), 1e-6);
        let mut m = diag(&[0.25, 0.25, 0.25, 0.25]);
        let change = proj.project(&mut m).unwrap();
        assert_relative_eq!(change, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states_is_one() {
        let tol = Tolerances::default();
        let a = DensityMatrix::new(diag(&[1.0, 0.0]), &tol).unwrap();
        let b = DensityMatrix::new(diag(&[0.0, 1.0]), &tol).unwrap();
        assert_relative_eq!(a.trace_distance(&b), 1.0, epsilon = 1e-12);
    }
}
