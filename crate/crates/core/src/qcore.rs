//! Dense complex linear algebra and the quantum state/operator types shared by
//! the rest of the crate.
//!
//! Natural units are used throughout (ħ = 1), so every rate is in inverse time
//! and the dephasing dissipator reads
//!
//! ```text
//! D(ρ) = ½ Σ_j γ_j [L_j, [L_j, ρ]] = ½ Σ_j γ_j ({L_j², ρ} − 2 L_j ρ L_j)
//! ```
//!
//! Storage is dense; the models of interest live in 2–16 dimensional spaces.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::ops::{Add, Mul, Sub};
use thiserror::Error;

pub type C64 = Complex64;

/// Maximum |M − M†| accepted as Hermitian.
pub const TAU_HERM: f64 = 1e-10;
/// Maximum |Tr ρ − 1| accepted for a density matrix.
pub const TAU_TRACE: f64 = 1e-10;
/// Most negative eigenvalue accepted for a density matrix.
pub const TAU_POS: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcoreError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix must be square with dim >= 1 (got {rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("operator is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("rate must be finite (got {0})")]
    NonFiniteRate(f64),
    #[error("state vector has zero norm")]
    ZeroNorm,
    #[error("not a density matrix: {0}")]
    InvalidDensity(DensityReport),
}

/// Tolerances used when validating Hermiticity, trace and positivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub herm: f64,
    pub trace: f64,
    pub pos: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: TAU_HERM,
            trace: TAU_TRACE,
            pos: TAU_POS,
        }
    }
}

/// Square complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix{}", self.0)
    }
}

impl ComplexMatrix {
    pub fn new(inner: DMatrix<C64>) -> Result<Self, QcoreError> {
        if inner.nrows() != inner.ncols() || inner.nrows() == 0 {
            return Err(QcoreError::NotSquare {
                rows: inner.nrows(),
                cols: inner.ncols(),
            });
        }
        Ok(Self(inner))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    /// Builds a matrix from row-major rows; fails on ragged or empty input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, QcoreError> {
        let n = rows.len();
        if n == 0 {
            return Err(QcoreError::NotSquare { rows: 0, cols: 0 });
        }
        for r in rows {
            if r.len() != n {
                return Err(QcoreError::NotSquare {
                    rows: n,
                    cols: r.len(),
                });
            }
        }
        Ok(Self(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self, QcoreError> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn pauli_x() -> Self {
        Self::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    pub fn pauli_y() -> Self {
        let i = C64::i();
        Self::from_rows(&[vec![C64::new(0.0, 0.0), -i], vec![i, C64::new(0.0, 0.0)]]).unwrap()
    }

    pub fn pauli_z() -> Self {
        Self::from_diagonal(&[1.0, -1.0])
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.0[(i, j)] = v;
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// Entrywise complex conjugate (the map K in a fixed basis).
    pub fn conjugate(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    /// max_ij |M_ij|
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// max_ij |M − M†|_ij
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Largest |off-diagonal| entry.
    pub fn off_diagonal_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.0[(i, j)].norm());
                }
            }
        }
        worst
    }

    pub fn real_diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.0 + self.0.adjoint()).map(|z| z * 0.5);
        let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Eigen-decomposition of the Hermitian part; eigenvalues ascending with
    /// matching eigenvector columns.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, DMatrix<C64>) {
        let herm = (&self.0 + self.0.adjoint()).map(|z| z * 0.5);
        let eig = SymmetricEigen::new(herm);
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |i, c| eig.eigenvectors[(i, order[c])]);
        (values, vectors)
    }

    /// Spectral norm of a Hermitian operator (max |eigenvalue|).
    pub fn hermitian_norm(&self) -> f64 {
        self.hermitian_eigenvalues()
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    fn check_dims(&self, other: &Self) -> Result<(), QcoreError> {
        if self.dim() != other.dim() {
            return Err(QcoreError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, QcoreError> {
        self.check_dims(other)?;
        Ok(Self(&self.0 * &other.0))
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, QcoreError> {
        self.check_dims(other)?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, QcoreError> {
        self.check_dims(other)?;
        Ok(Self(&self.0 - &other.0))
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.0 * v
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<C64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn to_nested(&self) -> Vec<Vec<[f64; 2]>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| [self.0[(i, j)].re, self.0[(i, j)].im]).collect())
            .collect()
    }

    pub fn from_nested(rows: &[Vec<[f64; 2]>]) -> Result<Self, QcoreError> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|p| C64::new(p[0], p[1])).collect())
            .collect();
        Self::from_rows(&rows)
    }
}

impl From<DMatrix<C64>> for ComplexMatrix {
    /// Panics on a non-square input.
    fn from(m: DMatrix<C64>) -> Self {
        ComplexMatrix::new(m).expect("square matrix")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        self.try_add(rhs).expect("dimension mismatch in matrix addition")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        self.try_sub(rhs).expect("dimension mismatch in matrix subtraction")
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        self.try_mul(rhs).expect("dimension mismatch in matrix product")
    }
}

/// Serialized as nested arrays of `[re, im]` pairs, row-major.
impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_nested().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        Self::from_nested(&rows).map_err(serde::de::Error::custom)
    }
}

/// AB − BA
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, QcoreError> {
    a.check_dims(b)?;
    Ok(ComplexMatrix(&a.0 * &b.0 - &b.0 * &a.0))
}

/// AB + BA
pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, QcoreError> {
    a.check_dims(b)?;
    Ok(ComplexMatrix(&a.0 * &b.0 + &b.0 * &a.0))
}

/// [L, [L, ρ]]
pub fn double_commutator(l: &ComplexMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix, QcoreError> {
    let inner = commutator(l, rho)?;
    commutator(l, &inner)
}

/// {L², ρ} − 2LρL, algebraically equal to [L, [L, ρ]].
pub fn double_commutator_expanded(
    l: &ComplexMatrix,
    rho: &ComplexMatrix,
) -> Result<ComplexMatrix, QcoreError> {
    l.check_dims(rho)?;
    let l2 = &l.0 * &l.0;
    let lrl = &l.0 * &rho.0 * &l.0;
    Ok(ComplexMatrix(&l2 * &rho.0 + &rho.0 * &l2 - lrl * C64::new(2.0, 0.0)))
}

/// Diagnostic summary of how close a matrix is to a valid density matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
    pub hermitian_ok: bool,
    pub trace_ok: bool,
    pub positive_ok: bool,
}

impl DensityReport {
    pub fn is_valid(&self) -> bool {
        self.hermitian_ok && self.trace_ok && self.positive_ok
    }
}

impl fmt::Display for DensityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "herm defect {:.3e}, trace defect {:.3e}, min eig {:.3e}",
            self.hermiticity_defect, self.trace_defect, self.min_eigenvalue
        )
    }
}

pub fn check_density(rho: &ComplexMatrix, tol: &Tolerances) -> DensityReport {
    let hermiticity_defect = rho.hermiticity_defect();
    let trace_defect = (rho.trace() - C64::new(1.0, 0.0)).norm();
    let min_eigenvalue = rho.hermitian_eigenvalues()[0];
    DensityReport {
        hermiticity_defect,
        trace_defect,
        min_eigenvalue,
        hermitian_ok: hermiticity_defect <= tol.herm,
        trace_ok: trace_defect <= tol.trace,
        positive_ok: min_eigenvalue >= -tol.pos,
    }
}

/// Trace-one positive-semidefinite Hermitian matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct DensityMatrix(ComplexMatrix);

impl TryFrom<ComplexMatrix> for DensityMatrix {
    type Error = QcoreError;
    fn try_from(m: ComplexMatrix) -> Result<Self, QcoreError> {
        Self::new(m, &Tolerances::default())
    }
}

impl From<DensityMatrix> for ComplexMatrix {
    fn from(d: DensityMatrix) -> Self {
        d.0
    }
}

impl DensityMatrix {
    pub fn new(m: ComplexMatrix, tol: &Tolerances) -> Result<Self, QcoreError> {
        let report = check_density(&m, tol);
        if !report.is_valid() {
            return Err(QcoreError::InvalidDensity(report));
        }
        Ok(Self(m))
    }

    pub fn pure(psi: &StateVector) -> Self {
        let v = psi.amplitudes() / C64::new(psi.norm(), 0.0);
        Self(ComplexMatrix(&v * v.adjoint()))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn purity(&self) -> f64 {
        purity(&self.0)
    }

    pub fn von_neumann_entropy(&self) -> f64 {
        von_neumann_entropy(&self.0)
    }
}

/// Tr(ρ²), real part.
pub fn purity(rho: &ComplexMatrix) -> f64 {
    (rho.inner() * rho.inner()).trace().re
}

/// −Tr ρ ln ρ over the eigenvalues of the Hermitian part; eigenvalues at or
/// below zero contribute nothing.
pub fn von_neumann_entropy(rho: &ComplexMatrix) -> f64 {
    rho.hermitian_eigenvalues()
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

/// Complex amplitude vector; the norm is not required to be one.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(DVector<C64>);

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Result<Self, QcoreError> {
        let v = DVector::from_vec(amps);
        if v.norm() == 0.0 {
            return Err(QcoreError::ZeroNorm);
        }
        Ok(Self(v))
    }

    /// Computational basis vector |k⟩.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[k] = C64::new(1.0, 0.0);
        Self(v)
    }

    pub fn from_dvector(v: DVector<C64>) -> Self {
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn normalized(&self) -> Self {
        Self(&self.0 / C64::new(self.norm(), 0.0))
    }

    /// |ψ⟩⟨ψ| without renormalisation.
    pub fn outer(&self) -> ComplexMatrix {
        ComplexMatrix(&self.0 * self.0.adjoint())
    }
}

impl Serialize for StateVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.0.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Self::new(pairs.iter().map(|p| C64::new(p[0], p[1])).collect()).map_err(serde::de::Error::custom)
    }
}

/// One Hermitian dephasing operator with a signed rate. A positive rate is a
/// forward-running (decohering) channel, a negative one backward-running.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DephasingChannel {
    pub operator: ComplexMatrix,
    pub gamma: f64,
}

impl DephasingChannel {
    pub fn new(operator: ComplexMatrix, gamma: f64) -> Result<Self, QcoreError> {
        let ch = Self { operator, gamma };
        ch.validate(TAU_HERM)?;
        Ok(ch)
    }

    /// Channel with a diagonal operator Σ_k a^k |k⟩⟨k|.
    pub fn diagonal(amplitudes: &[f64], gamma: f64) -> Result<Self, QcoreError> {
        Self::new(ComplexMatrix::from_diagonal(amplitudes), gamma)
    }

    pub fn validate(&self, herm_tol: f64) -> Result<(), QcoreError> {
        if !self.gamma.is_finite() {
            return Err(QcoreError::NonFiniteRate(self.gamma));
        }
        let defect = self.operator.hermiticity_defect();
        if defect > herm_tol {
            return Err(QcoreError::NotHermitian { defect });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    /// Diagonal amplitudes a^k when the operator is diagonal within `tol`.
    pub fn diagonal_amplitudes(&self, tol: f64) -> Option<Vec<f64>> {
        (self.operator.off_diagonal_defect() <= tol).then(|| self.operator.real_diagonal())
    }
}

/// ½ Σ_j γ_j [L_j, [L_j, ρ]]
pub fn dissipator(channels: &[DephasingChannel], rho: &ComplexMatrix) -> Result<ComplexMatrix, QcoreError> {
    let mut acc = ComplexMatrix::zeros(rho.dim());
    for ch in channels {
        let dc = double_commutator(&ch.operator, rho)?;
        acc = &acc + &dc.scale_real(0.5 * ch.gamma);
    }
    Ok(acc)
}
