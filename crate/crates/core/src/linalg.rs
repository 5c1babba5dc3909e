//! Dense complex vectors and matrices, plus the few numerical kernels the
//! simulator needs: the matrix exponential, Hermitian eigenvalues and
//! Kronecker products.
//!
//! Every system in this crate has dimension between 2 and 64, so everything is
//! stored densely in `ndarray` arrays.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// `e^{i angle}`
#[inline]
pub fn cis(angle: f64) -> C64 {
    C64::from_polar(1.0, angle)
}

/// Square complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    data: Array2<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            data: Array2::zeros((dim, dim)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            data: Array2::eye(dim),
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            data: Array2::from_shape_fn((dim, dim), |(i, j)| f(i, j)),
        }
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (k, &v) in entries.iter().enumerate() {
            m[(k, k)] = v;
        }
        m
    }

    /// Builds a matrix from an array, rejecting non-square or non-finite input.
    pub fn from_array(data: Array2<C64>) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows != cols || rows == 0 {
            return Err(Error::NotSquare { rows, cols });
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite {
                context: "matrix entries",
            });
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Array2::zeros((n, n));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                data[(i, j)] = v;
            }
        }
        Self::from_array(data)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<C64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self {
            data: self.data.t().mapv(|z| z.conj()),
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            data: &self.data * factor,
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        Self {
            data: self.data.mapv(|z| z * factor),
        }
    }

    pub fn trace(&self) -> C64 {
        self.data.diag().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> f64 {
        self.data
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖A − A†‖_F`
    pub fn hermiticity_error(&self) -> f64 {
        (self - &self.dagger()).frobenius_norm()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() < tol
    }

    /// `‖U†U − I‖_F`
    pub fn unitarity_error(&self) -> f64 {
        (&(&self.dagger() * self) - &Self::identity(self.dim())).frobenius_norm()
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() < tol
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        assert_eq!(self.dim(), v.dim());
        StateVector {
            data: self.data.dot(&v.data),
        }
    }

    /// `[A, B] = AB − BA`
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// Principal submatrix on the given (ordered) basis indices.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        Self::from_fn(indices.len(), |i, j| self.data[(indices[i], indices[j])])
    }

    /// Places `block` into a `dim`-dimensional zero matrix at `indices`.
    pub fn embed(dim: usize, indices: &[usize], block: &Self) -> Self {
        assert_eq!(indices.len(), block.dim());
        let mut out = Self::zeros(dim);
        for (i, &bi) in indices.iter().enumerate() {
            for (j, &bj) in indices.iter().enumerate() {
                out.data[(bi, bj)] = block.data[(i, j)];
            }
        }
        out
    }

    /// Computes `e^A`.
    pub fn exp(&self) -> Result<Self> {
        matrix_exp(self)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.data[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.data[idx]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim(), rhs.dim(), "matrix product dimension mismatch");
        ComplexMatrix {
            data: self.data.dot(&rhs.data),
        }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            data: &self.data + &rhs.data,
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            data: &self.data - &rhs.data,
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({0}x{0})", self.dim())?;
        for row in self.data.rows() {
            let cells: Vec<String> = row
                .iter()
                .map(|z| format!("{:+.4}{:+.4}i", z.re, z.im))
                .collect();
            writeln!(f, "  [{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// Column vector of complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    data: Array1<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        assert!(!amplitudes.is_empty(), "state dimension must be positive");
        Self {
            data: Array1::from(amplitudes),
        }
    }

    /// Computational basis vector `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim);
        let mut data = Array1::zeros(dim);
        data[index] = ONE;
        Self { data }
    }

    /// Returns the state if its norm is 1 within `1e-10`.
    pub fn normalized_checked(amplitudes: Vec<C64>) -> Result<Self> {
        let v = Self::new(amplitudes);
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm });
        }
        Ok(v)
    }

    pub fn normalize(mut self) -> Self {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize the zero vector");
        self.data.mapv_inplace(|z| z / n);
        self
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!(self.dim(), other.dim());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|self⟩⟨other|`
    pub fn outer(&self, other: &Self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim(), |i, j| self.data[i] * other.data[j].conj())
    }

    /// `|self⟩⟨self|`
    pub fn projector(&self) -> ComplexMatrix {
        self.outer(self)
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            data: &self.data * factor,
        }
    }
}

impl Index<usize> for StateVector {
    type Output = C64;

    fn index(&self, i: usize) -> &C64 {
        &self.data[i]
    }
}

impl Add for &StateVector {
    type Output = StateVector;

    fn add(self, rhs: &StateVector) -> StateVector {
        StateVector {
            data: &self.data + &rhs.data,
        }
    }
}

impl Sub for &StateVector {
    type Output = StateVector;

    fn sub(self, rhs: &StateVector) -> StateVector {
        StateVector {
            data: &self.data - &rhs.data,
        }
    }
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (na, nb) = (a.dim(), b.dim());
    ComplexMatrix::from_fn(na * nb, |i, j| a[(i / nb, j / nb)] * b[(i % nb, j % nb)])
}

/// Kronecker product of state vectors.
pub fn kron_state(a: &StateVector, b: &StateVector) -> StateVector {
    let nb = b.dim();
    StateVector::new(
        (0..a.dim() * nb)
            .map(|k| a[k / nb] * b[k % nb])
            .collect(),
    )
}

/// Matrix exponential by scaling and squaring around a Taylor series.
///
/// The argument is scaled by `2^-s` until its 1-norm is at most 1/2, the
/// series is summed until the next term is below machine precision relative
/// to the partial sum, and the result is squared `s` times.
pub fn matrix_exp(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_finite() {
        return Err(Error::NonFinite {
            context: "matrix_exp argument",
        });
    }
    let dim = a.dim();
    let norm = a.norm_one();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale_real(0.5f64.powi(squarings));

    let mut sum = ComplexMatrix::identity(dim);
    let mut term = ComplexMatrix::identity(dim);
    for k in 1..=40 {
        term = (&term * &scaled).scale_real(1.0 / k as f64);
        sum = &sum + &term;
        if term.norm_one() <= f64::EPSILON * 1e-2 * sum.norm_one() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

/// Real eigenvalues of a Hermitian matrix, in ascending order.
///
/// Uses cyclic complex Jacobi rotations: each pivot is first made real by a
/// diagonal phase and then annihilated by a real plane rotation.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>> {
    if !a.is_finite() {
        return Err(Error::NonFinite {
            context: "hermitian_eigenvalues argument",
        });
    }
    let deviation = a.hermiticity_error();
    if deviation >= 1e-9 {
        return Err(Error::NotHermitian { deviation });
    }
    let n = a.dim();
    let mut m: Vec<C64> = a.as_array().iter().copied().collect();
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| m[p * n + q].norm_sqr())
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                // make the pivot real: conjugate by diag(.., 1 at p, e^{-i arg} at q, ..)
                let phase = apq / mag;
                for r in 0..n {
                    m[r * n + q] *= phase.conj();
                }
                for r in 0..n {
                    m[q * n + r] *= phase;
                }
                let app = m[p * n + p].re;
                let aqq = m[q * n + q].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = m[r * n + p];
                    let arq = m[r * n + q];
                    m[r * n + p] = arp * c - arq * s;
                    m[r * n + q] = arp * s + arq * c;
                }
                for r in 0..n {
                    let apr = m[p * n + r];
                    let aqr = m[q * n + r];
                    m[p * n + r] = apr * c - aqr * s;
                    m[q * n + r] = apr * s + aqr * c;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|k| m[k * n + k].re).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Pauli matrices and other fixed single-qubit operators.
pub mod pauli {
    use super::*;

    pub fn identity() -> ComplexMatrix {
        ComplexMatrix::identity(2)
    }

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_fn(2, |i, j| if i != j { ONE } else { ZERO })
    }

    pub fn y() -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(2);
        m[(0, 1)] = -I;
        m[(1, 0)] = I;
        m
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::diagonal(&[ONE, -ONE])
    }

    pub fn hadamard() -> ComplexMatrix {
        (&x() + &z()).scale_real(std::f64::consts::FRAC_1_SQRT_2)
    }

    /// `S⁺ = |1⟩⟨0|`
    pub fn raising() -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(2);
        m[(1, 0)] = ONE;
        m
    }

    /// `S⁻ = |0⟩⟨1|`
    pub fn lowering() -> ComplexMatrix {
        raising().dagger()
    }
}
