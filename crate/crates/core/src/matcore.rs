//! Complex Hermitian linear algebra primitives.
//!
//! Everything downstream (the SDP solver, the certificates, the optics
//! model) works with small dense complex Hermitian operators. Matrices are
//! stored row-major. Eigenvalue problems are solved by embedding the
//! complex Hermitian matrix `A = P + iQ` into the real symmetric matrix
//! `[[P, -Q], [Q, P]]` of doubled dimension and running cyclic Jacobi;
//! every eigenvalue of `A` appears twice in the embedding.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex;
/// Scalar type for all operator entries and amplitudes.
pub type ComplexScalar = Complex<f64>;

/// Absolute entrywise tolerance for Hermiticity checks.
pub const HERMITICITY_TOL: f64 = 1e-12;

const SQRT2: f64 = core::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq)]
pub enum MatError {
    /// An entry was NaN or infinite.
    NonFinite,
    /// `entry(i, j)` and `conj(entry(j, i))` differ by more than the tolerance.
    NotHermitian { max_violation: f64 },
    /// Operand dimensions do not match.
    DimensionMismatch { left: usize, right: usize },
    /// A dimension of zero was supplied.
    EmptyDimension,
    /// A state vector is not normalized within 1e-12.
    NotNormalized { norm_sq: f64 },
    /// A negative tolerance was supplied.
    NegativeTolerance,
    /// Cholesky factorization hit a non-positive pivot.
    NotPositiveDefinite,
}

impl fmt::Display for MatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatError::NonFinite => write!(f, "non-finite entry"),
            MatError::NotHermitian { max_violation } => {
                write!(f, "not Hermitian (max violation {max_violation:e})")
            }
            MatError::DimensionMismatch { left, right } => {
                write!(f, "dimension mismatch: {left} vs {right}")
            }
            MatError::EmptyDimension => write!(f, "dimension must be at least 1"),
            MatError::NotNormalized { norm_sq } => {
                write!(f, "state not normalized (|psi|^2 = {norm_sq})")
            }
            MatError::NegativeTolerance => write!(f, "tolerance must be nonnegative"),
            MatError::NotPositiveDefinite => write!(f, "matrix is not positive definite"),
        }
    }
}

impl core::error::Error for MatError {}

/// A normalized pure state on a `dim`-dimensional Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Vec<ComplexScalar>,
}

impl PureState {
    /// Builds a state from amplitudes; the squared norm must be 1 within 1e-12.
    pub fn new(amps: Vec<ComplexScalar>) -> Result<Self, MatError> {
        if amps.is_empty() {
            return Err(MatError::EmptyDimension);
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(MatError::NonFinite);
        }
        let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > 1e-12 {
            return Err(MatError::NotNormalized { norm_sq });
        }
        Ok(Self { amps })
    }

    /// Builds a state from real amplitudes, normalizing them.
    pub fn from_real_normalized(amps: &[f64]) -> Result<Self, MatError> {
        let norm: f64 = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(MatError::NotNormalized { norm_sq: norm * norm });
        }
        Self::new(amps.iter().map(|&a| ComplexScalar::new(a / norm, 0.0)).collect())
    }

    /// The computational basis state `|index>`.
    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut amps = vec![ComplexScalar::new(0.0, 0.0); dim];
        amps[index] = ComplexScalar::new(1.0, 0.0);
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[ComplexScalar] {
        &self.amps
    }

    /// The rank-one projector `|psi><psi|`.
    pub fn projector(&self) -> HermitianOperator {
        let d = self.dim();
        let mut data = vec![ComplexScalar::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                data[i * d + j] = self.amps[i] * self.amps[j].conj();
            }
        }
        HermitianOperator { dim: d, data }
    }

    /// Inner product `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<ComplexScalar, MatError> {
        if self.dim() != other.dim() {
            return Err(MatError::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

/// A complex `d x d` self-adjoint matrix.
///
/// Constructors symmetrize the raw data as `(A + A^dag)/2` after checking
/// the Hermiticity violation against [`HERMITICITY_TOL`], which guards
/// against drift accumulated in solver iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    dim: usize,
    data: Vec<ComplexScalar>,
}

impl HermitianOperator {
    /// Builds an operator from row-major entries, rejecting data whose
    /// Hermiticity violation exceeds `tol` and symmetrizing the rest.
    pub fn from_entries_with_tol(
        dim: usize,
        entries: Vec<ComplexScalar>,
        tol: f64,
    ) -> Result<Self, MatError> {
        if dim == 0 {
            return Err(MatError::EmptyDimension);
        }
        if entries.len() != dim * dim {
            return Err(MatError::DimensionMismatch { left: entries.len(), right: dim * dim });
        }
        if entries.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(MatError::NonFinite);
        }
        let mut max_violation = 0.0f64;
        for i in 0..dim {
            for j in i..dim {
                let diff = entries[i * dim + j] - entries[j * dim + i].conj();
                max_violation = max_violation.max(diff.norm());
            }
        }
        if max_violation > tol {
            return Err(MatError::NotHermitian { max_violation });
        }
        let mut data = entries;
        for i in 0..dim {
            data[i * dim + i] = ComplexScalar::new(data[i * dim + i].re, 0.0);
            for j in (i + 1)..dim {
                let avg = (data[i * dim + j] + data[j * dim + i].conj()) * 0.5;
                data[i * dim + j] = avg;
                data[j * dim + i] = avg.conj();
            }
        }
        Ok(Self { dim, data })
    }

    /// Builds an operator from row-major entries with the default tolerance.
    pub fn from_entries(dim: usize, entries: Vec<ComplexScalar>) -> Result<Self, MatError> {
        Self::from_entries_with_tol(dim, entries, HERMITICITY_TOL)
    }

    /// Symmetrizes arbitrary finite raw data without a Hermiticity check.
    pub(crate) fn symmetrized(dim: usize, entries: Vec<ComplexScalar>) -> Self {
        Self::from_entries_with_tol(dim, entries, f64::INFINITY)
            .expect("finite entries expected")
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![ComplexScalar::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.data[i * dim + i] = ComplexScalar::new(1.0, 0.0);
        }
        out
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.data[i * dim + i] = ComplexScalar::new(diag[i], 0.0);
        }
        out
    }

    /// Embeds `self` as the leading block of a `dim`-dimensional operator
    /// (direct sum with a zero block).
    pub fn embed(&self, dim: usize) -> Result<Self, MatError> {
        if dim < self.dim {
            return Err(MatError::DimensionMismatch { left: self.dim, right: dim });
        }
        let mut out = Self::zeros(dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.data[i * dim + j] = self.data[i * self.dim + j];
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> ComplexScalar {
        self.data[i * self.dim + j]
    }

    pub fn entries(&self) -> &[ComplexScalar] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self, MatError> {
        if self.dim != other.dim {
            return Err(MatError::DimensionMismatch { left: self.dim, right: other.dim });
        }
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, MatError> {
        Ok(self.add(&other.scale(-1.0))?)
    }

    /// `self + s * other`, in place.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    /// Adds `s * I` in place.
    pub fn shift(&mut self, s: f64) {
        for i in 0..self.dim {
            self.data[i * self.dim + i].re += s;
        }
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let e = self.real_embedding();
        let mut vals = jacobi_eigenvalues(2 * self.dim, e);
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Each eigenvalue of the complex matrix appears twice in the
        // embedding; keep one representative per pair.
        (0..self.dim).map(|k| vals[2 * k]).collect()
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        let e = self.real_embedding();
        let vals = jacobi_eigenvalues(2 * self.dim, e);
        vals.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Largest eigenvalue.
    pub fn max_eigenvalue(&self) -> f64 {
        let vals = self.eigenvalues();
        vals[vals.len() - 1]
    }

    /// Full eigendecomposition; returns `(eigenvalues ascending, eigenvectors)`
    /// with `eigenvectors[k]` the unit eigenvector for `eigenvalues[k]`.
    pub fn eigh(&self) -> (Vec<f64>, Vec<Vec<ComplexScalar>>) {
        let d = self.dim;
        let (vals, vecs) = jacobi_eigen(2 * d, self.real_embedding());
        let mut order: Vec<usize> = (0..2 * d).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());

        let mut out_vals = Vec::with_capacity(d);
        let mut out_vecs: Vec<Vec<ComplexScalar>> = Vec::with_capacity(d);
        for &idx in &order {
            if out_vals.len() == d {
                break;
            }
            // Real eigenvector (u; v) of the embedding maps to u + i v; its
            // pair partner maps to i (u + i v), so Gram-Schmidt keeps exactly
            // one complex vector per doubled eigenvalue.
            let mut c: Vec<ComplexScalar> = (0..d)
                .map(|i| ComplexScalar::new(vecs[i * 2 * d + idx], vecs[(i + d) * 2 * d + idx]))
                .collect();
            for prev in &out_vecs {
                let ip: ComplexScalar = prev.iter().zip(&c).map(|(p, x)| p.conj() * x).sum();
                for (x, p) in c.iter_mut().zip(prev) {
                    *x -= ip * p;
                }
            }
            let norm: f64 = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for x in c.iter_mut() {
                    *x /= norm;
                }
                out_vals.push(vals[idx]);
                out_vecs.push(c);
            }
        }
        debug_assert_eq!(out_vals.len(), d);
        (out_vals, out_vecs)
    }

    /// `[[Re(A), -Im(A)], [Im(A), Re(A)]]` as a flat row-major vector.
    fn real_embedding(&self) -> Vec<f64> {
        let d = self.dim;
        let n = 2 * d;
        let mut e = vec![0.0f64; n * n];
        for i in 0..d {
            for j in 0..d {
                let a = self.data[i * d + j];
                e[i * n + j] = a.re;
                e[i * n + (j + d)] = -a.im;
                e[(i + d) * n + j] = a.im;
                e[(i + d) * n + (j + d)] = a.re;
            }
        }
        e
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        for i in 0..self.dim {
            for j in 0..self.dim {
                let e = self.entry(i, j);
                s.push_str(&format!("({:+.6e},{:+.6e}) ", e.re, e.im));
            }
            s.push('\n');
        }
        s
    }
}

/// Real part of `tr(A B)` for Hermitian `A`, `B` (the imaginary part
/// vanishes identically for Hermitian pairs).
pub fn trace_inner(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64, MatError> {
    if a.dim != b.dim {
        return Err(MatError::DimensionMismatch { left: a.dim, right: b.dim });
    }
    let d = a.dim;
    let mut acc = 0.0;
    for i in 0..d {
        for k in 0..d {
            let x = a.data[i * d + k];
            let y = b.data[k * d + i];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    Ok(acc)
}

/// Smallest eigenvalue of a Hermitian operator.
pub fn min_eigenvalue(a: &HermitianOperator) -> f64 {
    a.min_eigenvalue()
}

/// Whether `min_eigenvalue(A) >= -tol`.
pub fn is_psd(a: &HermitianOperator, tol: f64) -> Result<bool, MatError> {
    if tol < 0.0 {
        return Err(MatError::NegativeTolerance);
    }
    Ok(a.min_eigenvalue() >= -tol)
}

/// Trace-orthonormal basis of the real space of `d x d` Hermitian operators:
/// `d` diagonal units, then for each `i < j` the pair
/// `(e_ij + e_ji)/sqrt(2)` and `(i e_ij - i e_ji)/sqrt(2)`.
pub fn hermitian_basis(d: usize) -> Vec<HermitianOperator> {
    let mut basis = Vec::with_capacity(d * d);
    for i in 0..d {
        let mut m = HermitianOperator::zeros(d);
        m.data[i * d + i] = ComplexScalar::new(1.0, 0.0);
        basis.push(m);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut re = HermitianOperator::zeros(d);
            re.data[i * d + j] = ComplexScalar::new(1.0 / SQRT2, 0.0);
            re.data[j * d + i] = ComplexScalar::new(1.0 / SQRT2, 0.0);
            basis.push(re);
            let mut im = HermitianOperator::zeros(d);
            im.data[i * d + j] = ComplexScalar::new(0.0, -1.0 / SQRT2);
            im.data[j * d + i] = ComplexScalar::new(0.0, 1.0 / SQRT2);
            basis.push(im);
        }
    }
    basis
}

/// Coordinates of `a` in the [`hermitian_basis`] ordering.
pub fn hermitian_coords(a: &HermitianOperator) -> Vec<f64> {
    let d = a.dim;
    let mut coords = Vec::with_capacity(d * d);
    for i in 0..d {
        coords.push(a.data[i * d + i].re);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let e = a.data[i * d + j];
            coords.push(SQRT2 * e.re);
            coords.push(-SQRT2 * e.im);
        }
    }
    coords
}

/// Reassembles an operator from [`hermitian_coords`] coordinates.
pub fn from_hermitian_coords(d: usize, coords: &[f64]) -> HermitianOperator {
    debug_assert_eq!(coords.len(), d * d);
    let mut m = HermitianOperator::zeros(d);
    for i in 0..d {
        m.data[i * d + i] = ComplexScalar::new(coords[i], 0.0);
    }
    let mut k = d;
    for i in 0..d {
        for j in (i + 1)..d {
            let re = coords[k] / SQRT2;
            let im = -coords[k + 1] / SQRT2;
            m.data[i * d + j] = ComplexScalar::new(re, im);
            m.data[j * d + i] = ComplexScalar::new(re, -im);
            k += 2;
        }
    }
    m
}

// ---------------------------------------------------------------------------
// General complex matrices (solver internals).
// ---------------------------------------------------------------------------

/// Dense complex square matrix, row-major. Not necessarily Hermitian.
#[derive(Debug, Clone)]
pub(crate) struct CMat {
    pub dim: usize,
    pub data: Vec<ComplexScalar>,
}

impl CMat {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![ComplexScalar::new(0.0, 0.0); dim * dim] }
    }

    pub fn from_herm(h: &HermitianOperator) -> Self {
        Self { dim: h.dim, data: h.data.clone() }
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        let d = self.dim;
        let mut out = CMat::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        out
    }

    /// Hermitian part `(M + M^dag)/2`.
    pub fn herm_part(&self) -> HermitianOperator {
        HermitianOperator::symmetrized(self.dim, self.data.clone())
    }
}

/// Lower-triangular Cholesky factor of a Hermitian positive definite matrix.
pub(crate) struct Cholesky {
    pub dim: usize,
    /// Lower triangle, row-major; strictly-upper entries are zero.
    pub l: Vec<ComplexScalar>,
}

impl Cholesky {
    pub fn factor(a: &HermitianOperator) -> Result<Self, MatError> {
        let d = a.dim;
        let mut l = vec![ComplexScalar::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut sum = a.data[i * d + j];
                for k in 0..j {
                    sum -= l[i * d + k] * l[j * d + k].conj();
                }
                if i == j {
                    if sum.re <= 0.0 || !sum.re.is_finite() {
                        return Err(MatError::NotPositiveDefinite);
                    }
                    l[i * d + i] = ComplexScalar::new(sum.re.sqrt(), 0.0);
                } else {
                    l[i * d + j] = sum / l[j * d + j];
                }
            }
        }
        Ok(Self { dim: d, l })
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower(&self, b: &mut [ComplexScalar]) {
        let d = self.dim;
        for i in 0..d {
            let mut sum = b[i];
            for k in 0..i {
                sum -= self.l[i * d + k] * b[k];
            }
            b[i] = sum / self.l[i * d + i];
        }
    }

    /// Solves `L^dag x = b` in place.
    pub fn solve_upper(&self, b: &mut [ComplexScalar]) {
        let d = self.dim;
        for i in (0..d).rev() {
            let mut sum = b[i];
            for k in (i + 1)..d {
                sum -= self.l[k * d + i].conj() * b[k];
            }
            b[i] = sum / self.l[i * d + i];
        }
    }

    /// Inverse of the factored matrix. Fails when near-zero pivots make
    /// the back-substitutions overflow.
    pub fn inverse(&self) -> Result<HermitianOperator, MatError> {
        let d = self.dim;
        let mut inv = vec![ComplexScalar::new(0.0, 0.0); d * d];
        for col in 0..d {
            let mut e = vec![ComplexScalar::new(0.0, 0.0); d];
            e[col] = ComplexScalar::new(1.0, 0.0);
            self.solve_lower(&mut e);
            self.solve_upper(&mut e);
            for row in 0..d {
                inv[row * d + col] = e[row];
            }
        }
        HermitianOperator::from_entries_with_tol(d, inv, f64::INFINITY)
    }

    /// `L^{-1} M L^{-dag}` for a Hermitian `M` (congruence used for step
    /// lengths).
    pub fn whiten(&self, m: &HermitianOperator) -> HermitianOperator {
        let d = self.dim;
        // Columns of W1 = L^{-1} M.
        let mut w = CMat::from_herm(m);
        for col in 0..d {
            let mut v: Vec<ComplexScalar> = (0..d).map(|r| w.data[r * d + col]).collect();
            self.solve_lower(&mut v);
            for r in 0..d {
                w.data[r * d + col] = v[r];
            }
        }
        // Rows: W = W1 L^{-dag}  <=>  W^dag = L^{-1} W1^dag.
        let mut wd = CMat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                wd.data[i * d + j] = w.data[j * d + i].conj();
            }
        }
        for col in 0..d {
            let mut v: Vec<ComplexScalar> = (0..d).map(|r| wd.data[r * d + col]).collect();
            self.solve_lower(&mut v);
            for r in 0..d {
                wd.data[r * d + col] = v[r];
            }
        }
        let mut out = CMat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[i * d + j] = wd.data[j * d + i].conj();
            }
        }
        out.herm_part()
    }
}

// ---------------------------------------------------------------------------
// Real symmetric Jacobi eigenvalue iteration.
// ---------------------------------------------------------------------------

fn jacobi_sweeps(n: usize, a: &mut [f64], mut vecs: Option<&mut [f64]>) {
    if n <= 1 {
        return;
    }
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let tol = 1e-15 * norm;
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                if let Some(v) = vecs.as_deref_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
}

/// Eigenvalues of a real symmetric matrix (unsorted).
fn jacobi_eigenvalues(n: usize, mut a: Vec<f64>) -> Vec<f64> {
    jacobi_sweeps(n, &mut a, None);
    (0..n).map(|i| a[i * n + i]).collect()
}

/// Eigenvalues and eigenvectors (columns) of a real symmetric matrix.
fn jacobi_eigen(n: usize, mut a: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut vecs = vec![0.0f64; n * n];
    for i in 0..n {
        vecs[i * n + i] = 1.0;
    }
    jacobi_sweeps(n, &mut a, Some(&mut vecs));
    ((0..n).map(|i| a[i * n + i]).collect(), vecs)
}
