//! Dense complex linear algebra helpers shared by the operator, channel and
//! entropy layers. Everything here works on plain `nalgebra` matrices; the
//! subsystem bookkeeping lives in [`crate::operator`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Eigenvalues below this are treated as zero by PSD checks.
pub const PSD_FLOOR: f64 = 1e-9;
/// Inputs with `|X - X^dag|_2` below this are symmetrized, otherwise rejected.
pub const HERMITIAN_TOL: f64 = 1e-9;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `|X - X^dag|_2`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

/// `(X + X^dag) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * real(0.5)
}

/// Hermitian eigendecomposition with eigenvalues in nonincreasing order.
///
/// Ties keep the order the eigensolver produced them in (stable sort), so the
/// result is deterministic for a given input.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let mut h = hermitian_part(m);
    // Entries far below the scale of the matrix drive the QR sweeps into
    // subnormals, where nalgebra can return inf/NaN; flush them to zero.
    let floor = h.iter().map(|z| z.norm()).fold(0.0, f64::max) * 1e-100;
    for z in h.iter_mut() {
        if z.re.abs() < floor {
            z.re = 0.0;
        }
        if z.im.abs() < floor {
            z.im = 0.0;
        }
    }
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

pub fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    eigh(m).0
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigenvalues(m).last().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(m: &CMatrix) -> f64 {
    eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Rebuild `V diag(f(λ)) V^dag` from an eigendecomposition.
pub fn spectral_apply(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        let fk = real(f(v));
        for i in 0..n {
            scaled[(i, k)] *= fk;
        }
    }
    &scaled * vectors.adjoint()
}

/// Square root of a PSD matrix; eigenvalues above `-PSD_FLOOR` are clipped to 0.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (values, vectors) = eigh(m);
    spectral_apply(&values, &vectors, |v| v.max(0.0).sqrt())
}

/// Pseudo-inverse square root on the support (eigenvalues above `tol`).
pub fn psd_inv_sqrt(m: &CMatrix, tol: f64) -> CMatrix {
    let (values, vectors) = eigh(m);
    spectral_apply(&values, &vectors, |v| if v > tol { 1.0 / v.sqrt() } else { 0.0 })
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Indices of rows that are not identically zero in a square matrix whose
/// zero rows and columns coincide (true for Hermitian matrices).
fn nonzero_support(m: &CMatrix) -> Vec<usize> {
    (0..m.nrows())
        .filter(|&i| m.row(i).iter().any(|z| z.re != 0.0 || z.im != 0.0))
        .collect()
}

/// Schatten 1-norm. Hermitian inputs are first compressed onto the rows
/// that are not exactly zero, then evaluated from the spectrum; everything
/// else goes through an SVD.
pub fn trace_norm(m: &CMatrix) -> f64 {
    if m.nrows() == m.ncols() && hermiticity_defect(m) <= 1e-12 * (1.0 + m.norm()) {
        let support = nonzero_support(m);
        if support.is_empty() {
            return 0.0;
        }
        let sub = m.select_rows(&support).select_columns(&support);
        return eigenvalues(&sub).iter().map(|v| v.abs()).sum();
    }
    singular_values(m).iter().sum()
}

/// Squared Hilbert–Schmidt norm.
pub fn hs_norm_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Orthonormalize `seed` (dropping dependent vectors) and complete it to
/// `target` vectors using the canonical basis of `C^dim`, in index order.
pub fn gram_schmidt_complete(seed: &[CVector], dim: usize, target: usize) -> Vec<CVector> {
    let mut basis: Vec<CVector> = Vec::with_capacity(target);
    let push = |v: &CVector, basis: &mut Vec<CVector>| {
        if basis.len() >= target {
            return;
        }
        let mut w = v.clone();
        // Two passes of modified Gram–Schmidt keep the columns orthonormal to ~1e-15.
        for _ in 0..2 {
            for b in basis.iter() {
                let proj = b.dotc(&w);
                w -= b * proj;
            }
        }
        let n = w.norm();
        if n > 1e-8 {
            basis.push(w / real(n));
        }
    };
    for v in seed {
        push(v, &mut basis);
    }
    for k in 0..dim {
        if basis.len() >= target {
            break;
        }
        let mut e = CVector::zeros(dim);
        e[k] = real(1.0);
        push(&e, &mut basis);
    }
    basis
}

/// Conjugate `a` by `b`: `b a b^dag`.
pub fn conjugate(b: &CMatrix, a: &CMatrix) -> CMatrix {
    b * a * b.adjoint()
}

/// Largest deviation of `v^dag v` from the identity, for a matrix of columns.
pub fn isometry_defect(v: &CMatrix) -> f64 {
    let g = v.adjoint() * v;
    let n = g.nrows();
    (&g - CMatrix::identity(n, n)).norm()
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
