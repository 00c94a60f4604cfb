//! Dense complex linear algebra for density matrices and the superoperator
//! actions used by the solvers.
//!
//! Matrices are stored column-major (nalgebra's native layout), so the raw
//! slice of a `d×d` matrix is exactly its column-stacked vectorization.
//! Units: ħ = 1, energies in rad/μs, time in μs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

/// General `d×d` complex operator.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Column-stacked vectorization of a [`ComplexMatrix`].
pub type VectorizedOperator = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance applied when a state is constructed directly.
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Drift allowance for states reported by long integrations.
pub const INTEGRATION_TOL: f64 = 1e-8;
/// Smallest eigenvalue accepted for a strictly constructed density matrix.
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}×{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is empty")]
    Empty,
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (max |M - M†| = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("density matrix trace is {trace}, expected 1")]
    NotUnitTrace { trace: f64 },
    #[error("density matrix has negative eigenvalue {eigenvalue:e}")]
    NotPositive { eigenvalue: f64 },
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Checks that `m` is a non-empty square matrix with finite entries and
/// returns its dimension.
pub fn check_square(m: &ComplexMatrix) -> Result<usize, QuantumError> {
    if m.nrows() != m.ncols() {
        return Err(QuantumError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(QuantumError::Empty);
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(QuantumError::NonFinite);
    }
    Ok(m.nrows())
}

/// Largest elementwise magnitude of `M − M†`.
pub fn hermiticity_error(m: &ComplexMatrix) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..d {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn check_hermitian(m: &ComplexMatrix, tol: f64) -> Result<usize, QuantumError> {
    let d = check_square(m)?;
    let deviation = hermiticity_error(m);
    if deviation > tol {
        return Err(QuantumError::NotHermitian { deviation });
    }
    Ok(d)
}

/// `(M + M†)/2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Spectral norm of a Hermitian matrix (largest |eigenvalue|).
pub fn hermitian_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, e| acc.max(e.abs()))
}

/// Accumulates `out += scale · (A X − X A)` on raw column-major `d×d`
/// slices. This is the hot kernel of the hierarchy right-hand side.
#[inline]
pub fn commutator_add(
    a: &[Complex64],
    x: &[Complex64],
    d: usize,
    scale: Complex64,
    out: &mut [Complex64],
) {
    debug_assert!(a.len() == d * d && x.len() == d * d && out.len() == d * d);
    for j in 0..d {
        for i in 0..d {
            let mut acc = ZERO;
            for k in 0..d {
                acc += a[k * d + i] * x[j * d + k] - x[k * d + i] * a[j * d + k];
            }
            out[j * d + i] += scale * acc;
        }
    }
}

/// `[A, X] = AX − XA`, computed without forming any `d²×d²` superoperator.
pub fn commutator(a: &ComplexMatrix, x: &ComplexMatrix) -> Result<ComplexMatrix, QuantumError> {
    let d = check_square(a)?;
    let dx = check_square(x)?;
    if d != dx {
        return Err(QuantumError::DimensionMismatch {
            expected: d,
            found: dx,
        });
    }
    let mut out = ComplexMatrix::zeros(d, d);
    commutator_add(a.as_slice(), x.as_slice(), d, ONE, out.as_mut_slice());
    Ok(out)
}

/// The `d²×d²` matrix `1⊗H − Hᵀ⊗1` acting on column-stacked operators, so
/// that `liouvillian_matrix(H)·vec(X) = vec([H, X])`.
pub fn liouvillian_matrix(h: &ComplexMatrix) -> ComplexMatrix {
    let d = h.nrows();
    let id = identity(d);
    id.kronecker(h) - h.transpose().kronecker(&id)
}

pub fn vectorize(m: &ComplexMatrix) -> VectorizedOperator {
    VectorizedOperator::from_column_slice(m.as_slice())
}

pub fn devectorize(v: &VectorizedOperator) -> Result<ComplexMatrix, QuantumError> {
    let n = v.len();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n || d == 0 {
        return Err(QuantumError::DimensionMismatch {
            expected: d * d,
            found: n,
        });
    }
    Ok(ComplexMatrix::from_column_slice(d, d, v.as_slice()))
}

/// `e^{−iHt}` for Hermitian `H`. Two-level systems use the closed form,
/// larger systems the Hermitian eigendecomposition.
pub fn unitary(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix, QuantumError> {
    let d = check_hermitian(h, CONSTRUCTION_TOL.max(1e-12 * max_abs(h)))?;
    if d == 2 {
        let u = unitary_2x2([[h[(0, 0)], h[(0, 1)]], [h[(1, 0)], h[(1, 1)]]], t);
        return Ok(ComplexMatrix::from_row_slice(
            2,
            2,
            &[u[0][0], u[0][1], u[1][0], u[1][1]],
        ));
    }
    let eig = SymmetricEigen::new(hermitian_part(h));
    let q = &eig.eigenvectors;
    let phases = ComplexMatrix::from_diagonal(&DVector::from_iterator(
        d,
        eig.eigenvalues
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -e * t)),
    ));
    Ok(q * phases * q.adjoint())
}

/// Closed-form `e^{−iHt}` for a 2×2 Hermitian matrix given row-major.
/// Writing `H = h₀·1 + r·n̂·σ`, the propagator is
/// `e^{−ih₀t}(cos(rt)·1 − i·sin(rt)/r·(H − h₀·1))`.
#[inline]
pub fn unitary_2x2(h: [[Complex64; 2]; 2], t: f64) -> [[Complex64; 2]; 2] {
    let h0 = 0.5 * (h[0][0].re + h[1][1].re);
    let hz = 0.5 * (h[0][0].re - h[1][1].re);
    let off = h[1][0];
    let r = (hz * hz + off.norm_sqr()).sqrt();
    let cos = (r * t).cos();
    // sin(rt)/r → t as r → 0
    let sinc = if r * t.abs() > 1e-8 {
        (r * t).sin() / r
    } else {
        t * (1.0 - (r * t) * (r * t) / 6.0)
    };
    let global = Complex64::from_polar(1.0, -h0 * t);
    let mi_sinc = Complex64::new(0.0, -sinc);
    [
        [global * (cos + mi_sinc * hz), global * mi_sinc * h[0][1]],
        [global * mi_sinc * off, global * (cos - mi_sinc * hz)],
    ]
}

/// Reference solution `e^{−iHt} ρ₀ e^{+iHt}` for a static Hermitian `H`.
pub fn evolve_exact(
    h: &ComplexMatrix,
    rho0: &DensityMatrix,
    t: f64,
) -> Result<DensityMatrix, QuantumError> {
    let d = rho0.dim();
    if h.nrows() != d || h.ncols() != d {
        return Err(QuantumError::DimensionMismatch {
            expected: d,
            found: h.nrows(),
        });
    }
    let u = unitary(h, t)?;
    let evolved = &u * rho0.matrix() * u.adjoint();
    Ok(DensityMatrix::from_evolved(&evolved))
}

/// A validated `d×d` density matrix: Hermitian, unit trace, positive
/// semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    /// Validates `m` at construction tolerance (1e-12 for Hermiticity and
    /// trace, −1e-10 for the smallest eigenvalue).
    pub fn new(m: ComplexMatrix) -> Result<Self, QuantumError> {
        check_hermitian(&m, CONSTRUCTION_TOL)?;
        let trace = m.trace();
        if (trace - ONE).norm() > CONSTRUCTION_TOL {
            return Err(QuantumError::NotUnitTrace { trace: trace.re });
        }
        let smallest = SymmetricEigen::new(hermitian_part(&m))
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |acc, &e| acc.min(e));
        if smallest < -POSITIVITY_TOL {
            return Err(QuantumError::NotPositive {
                eigenvalue: smallest,
            });
        }
        Ok(Self(m))
    }

    /// `|ψ⟩⟨ψ|` for a state vector, normalized on the way in.
    pub fn pure(psi: &[Complex64]) -> Result<Self, QuantumError> {
        let v = DVector::from_column_slice(psi);
        let norm = v.norm();
        if psi.is_empty() || !norm.is_finite() || norm == 0.0 {
            return Err(QuantumError::Empty);
        }
        let v = v.unscale(norm);
        Self::new(&v * v.adjoint())
    }

    /// `|k⟩⟨k|` in a `d`-dimensional space.
    pub fn basis(d: usize, k: usize) -> Self {
        let mut m = ComplexMatrix::zeros(d, d);
        m[(k, k)] = ONE;
        Self(m)
    }

    /// Wraps the output of an integration: the matrix is re-symmetrized and
    /// no positivity or trace check is applied (callers track drift through
    /// their own diagnostics).
    pub fn from_evolved(m: &ComplexMatrix) -> Self {
        Self(hermitian_part(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// Diagonal entry `⟨k|ρ|k⟩`.
    pub fn population(&self, k: usize) -> f64 {
        self.0[(k, k)].re
    }
}
