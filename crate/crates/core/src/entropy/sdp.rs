//! Dense solver for `min tr(sigma) s.t. 1_A ⊗ sigma >= rho_AB`.
//!
//! The conditioning operator is parameterized in an orthonormal Hermitian
//! basis and the log-barrier `t tr(sigma) - log det(1 ⊗ sigma - rho)` is
//! minimized by damped Newton steps along an increasing sequence of `t`.
//! Every outer iteration extracts a dual point `Y` with `tr_A Y = 1_B`; the
//! stopping rule uses the exact gap `tr(sigma) - tr(rho Y)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix, C64};

pub const GAP_TOL: f64 = 1e-9;
pub const MAX_ITER: usize = 500;
const SUPPORT_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    MaxIter,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    /// Feasible primal point on the full `B` space; `tr(sigma)` is the primal value.
    pub sigma: CMatrix,
    /// Dual point on `A ⊗ B` with `tr_A Y <= 1_B`.
    pub dual: CMatrix,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub status: SolverStatus,
}

/// Isometry onto the eigenvectors of `m` with eigenvalue above a relative floor.
fn support(m: &CMatrix) -> CMatrix {
    let (values, vectors) = linalg::eigh(m);
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let keep: Vec<usize> = (0..values.len()).filter(|&k| values[k] > SUPPORT_TOL * top && values[k] > 0.0).collect();
    vectors.select_columns(&keep)
}

fn ptrace_a(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    let mut out = CMatrix::zeros(db, db);
    for a in 0..da {
        out += m.view((a * db, a * db), (db, db));
    }
    out
}

fn ptrace_b(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    CMatrix::from_fn(da, da, |a, a2| {
        let mut acc = C64::new(0.0, 0.0);
        for b in 0..db {
            acc += m[(a * db + b, a2 * db + b)];
        }
        acc
    })
}

fn kron_identity(da: usize, sigma: &CMatrix) -> CMatrix {
    CMatrix::identity(da, da).kronecker(sigma)
}

/// Orthonormal Hermitian basis of `db x db` matrices, as coefficient rows
/// over the matrix units `E_pq` (index `p * db + q`).
pub(crate) fn hermitian_basis(db: usize) -> CMatrix {
    let n = db * db;
    let mut g = CMatrix::zeros(n, n);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut k = 0;
    for p in 0..db {
        g[(k, p * db + p)] = real(1.0);
        k += 1;
    }
    for p in 0..db {
        for q in p + 1..db {
            g[(k, p * db + q)] = real(h);
            g[(k, q * db + p)] = real(h);
            k += 1;
            g[(k, p * db + q)] = C64::new(0.0, h);
            g[(k, q * db + p)] = C64::new(0.0, -h);
            k += 1;
        }
    }
    g
}

fn to_matrix(coeffs: &CMatrix, x: &DVector<f64>, db: usize) -> CMatrix {
    let mut m = CMatrix::zeros(db, db);
    for (k, &xk) in x.iter().enumerate() {
        for p in 0..db {
            for q in 0..db {
                m[(p, q)] += coeffs[(k, p * db + q)] * xk;
            }
        }
    }
    linalg::hermitian_part(&m)
}

fn to_coords(coeffs: &CMatrix, m: &CMatrix, db: usize) -> DVector<f64> {
    DVector::from_fn(coeffs.nrows(), |k, _| {
        let mut acc = C64::new(0.0, 0.0);
        for p in 0..db {
            for q in 0..db {
                acc += coeffs[(k, p * db + q)].conj() * m[(p, q)];
            }
        }
        acc.re
    })
}

struct Barrier<'a> {
    rho: &'a CMatrix,
    da: usize,
    db: usize,
    basis: CMatrix,
}

struct Eval {
    value: f64,
    w: CMatrix,
}

impl Barrier<'_> {
    fn slack(&self, sigma: &CMatrix) -> CMatrix {
        kron_identity(self.da, sigma) - self.rho
    }

    /// Barrier value and `W = S^{-1}`, or `None` outside the cone.
    fn eval(&self, t: f64, sigma: &CMatrix) -> Option<Eval> {
        let s = self.slack(sigma);
        let chol = Cholesky::new(s)?;
        let l = chol.l_dirty();
        let mut logdet = 0.0;
        for i in 0..l.nrows() {
            logdet += 2.0 * l[(i, i)].re.ln();
        }
        let w = chol.inverse();
        let value = t * linalg::trace(sigma).re - logdet;
        value.is_finite().then_some(Eval { value, w })
    }

    fn gradient(&self, t: f64, w: &CMatrix) -> DVector<f64> {
        let db = self.db;
        let m = ptrace_a(w, self.da, db);
        DVector::from_fn(self.basis.nrows(), |k, _| {
            let mut tr_g = 0.0;
            let mut tr_mg = C64::new(0.0, 0.0);
            for p in 0..db {
                tr_g += self.basis[(k, p * db + p)].re;
                for q in 0..db {
                    tr_mg += m[(q, p)] * self.basis[(k, p * db + q)];
                }
            }
            t * tr_g - tr_mg.re
        })
    }

    /// `H_kl = tr(W (1 ⊗ G_k) W (1 ⊗ G_l))`.
    fn hessian(&self, w: &CMatrix) -> DMatrix<f64> {
        let (da, db) = (self.da, self.db);
        let n2 = db * db;
        // Hc[(p,q),(r,s)] = sum_ab (W_ab)_{sp} (W_ba)_{qr}.
        let left = CMatrix::from_fn(n2, da * da, |sp, ab| {
            let (s, p) = (sp / db, sp % db);
            let (a, b) = (ab / da, ab % da);
            w[(a * db + s, b * db + p)]
        });
        let right = CMatrix::from_fn(da * da, n2, |ab, qr| {
            let (a, b) = (ab / da, ab % da);
            let (q, r) = (qr / db, qr % db);
            w[(b * db + q, a * db + r)]
        });
        let z = left * right;
        let hc = CMatrix::from_fn(n2, n2, |pq, rs| {
            let (p, q) = (pq / db, pq % db);
            let (r, s) = (rs / db, rs % db);
            z[(s * db + p, q * db + r)]
        });
        let h = &self.basis * hc * self.basis.transpose();
        let n = h.nrows();
        let mut out = DMatrix::from_fn(n, n, |i, j| h[(i, j)].re);
        let sym = (&out + out.transpose()) * 0.5;
        out.copy_from(&sym);
        out
    }

    /// Dual point `Y = (1 ⊗ M^{-1/2}) W (1 ⊗ M^{-1/2})` with `M = tr_A W`,
    /// so that `tr_A Y = 1` on the support of `M`.
    fn dual_point(&self, w: &CMatrix) -> CMatrix {
        let m = ptrace_a(w, self.da, self.db);
        let m_isqrt = linalg::psd_inv_sqrt(&m, 1e-300);
        let big = kron_identity(self.da, &m_isqrt);
        linalg::hermitian_part(&(&big * w * &big))
    }
}

pub(crate) fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    if let Some(ch) = Cholesky::<f64, Dyn>::new(h.clone()) {
        return Some(ch.solve(&(-g)));
    }
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 1e-12;
    while reg < 1e-2 {
        let hr = &h + DMatrix::<f64>::identity(n, n) * (reg * scale);
        if let Some(ch) = Cholesky::<f64, Dyn>::new(hr) {
            return Some(ch.solve(&(-g)));
        }
        reg *= 100.0;
    }
    None
}

/// Solve the min-entropy SDP for `rho` on `A ⊗ B` with dimensions `(da, db)`.
pub fn solve(rho: &CMatrix, da: usize, db: usize) -> Result<SdpSolution> {
    let n = da * db;
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::Dimension(format!("operator of size {} for {da} x {db}", rho.nrows())));
    }
    let rho = linalg::hermitian_part(rho);
    if linalg::trace(&rho).re <= 0.0 {
        return Err(Error::InvalidState("zero operator has no conditional min-entropy".into()));
    }
    let va = support(&ptrace_b(&rho, da, db));
    let vb = support(&ptrace_a(&rho, da, db));
    let (ra, rb) = (va.ncols(), vb.ncols());
    let v = va.kronecker(&vb);
    let rho_c = linalg::hermitian_part(&(v.adjoint() * &rho * &v));

    let (sigma_c, dual_c, iterations, status) = if rb == 1 || ra == 1 {
        closed_form(&rho_c, ra, rb)
    } else if let Some(pure) = rank_one_form(&rho_c, ra, rb) {
        pure
    } else {
        barrier_solve(&rho_c, ra, rb)?
    };

    // Lift back and repair any residual infeasibility on the original space.
    let mut sigma = linalg::hermitian_part(&(&vb * &sigma_c * vb.adjoint()));
    let slack_min = linalg::min_eigenvalue(&(kron_identity(da, &sigma) - &rho));
    if slack_min < 0.0 {
        sigma += CMatrix::identity(db, db) * real(-slack_min * (1.0 + 1e-12) + 1e-300);
    }
    let dual = linalg::hermitian_part(&(&v * &dual_c * v.adjoint()));
    let primal_value = linalg::trace(&sigma).re;
    let dual_value = (&rho * &dual).trace().re;
    let gap = (primal_value - dual_value).max(0.0);
    Ok(SdpSolution { sigma, dual, primal_value, dual_value, gap, iterations, status })
}

/// Exact solutions when one factor is one-dimensional on the support.
fn closed_form(rho: &CMatrix, ra: usize, rb: usize) -> (CMatrix, CMatrix, usize, SolverStatus) {
    if rb == 1 {
        let (values, vectors) = linalg::eigh(rho);
        let top = vectors.column(0).into_owned();
        let sigma = CMatrix::from_element(1, 1, real(values[0].max(0.0)));
        (sigma, &top * top.adjoint(), 0, SolverStatus::Converged)
    } else {
        let _ = ra;
        (rho.clone(), CMatrix::identity(rb, rb), 0, SolverStatus::Converged)
    }
}

// rho = |v><v| with Schmidt form sum_i s_i |u_i>|f_i>: the optimum is
// sigma = (sum s) sum_i s_i |f_i><f_i| with dual |y><y|, y = sum_i |u_i>|f_i>.
fn rank_one_form(rho: &CMatrix, ra: usize, rb: usize) -> Option<(CMatrix, CMatrix, usize, SolverStatus)> {
    let (values, vectors) = linalg::eigh(rho);
    if values.len() > 1 && values[1] > SUPPORT_TOL * values[0] {
        return None;
    }
    let v = vectors.column(0) * real(values[0].max(0.0).sqrt());
    let m = CMatrix::from_fn(ra, rb, |a, b| v[a * rb + b]);
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let total: f64 = svd.singular_values.iter().sum();
    let mut sigma = CMatrix::zeros(rb, rb);
    let mut y = nalgebra::DVector::<C64>::zeros(ra * rb);
    for (i, s) in svd.singular_values.iter().enumerate() {
        let f = vt.row(i).transpose();
        sigma += &f * f.adjoint() * real(total * s);
        y += u.column(i).kronecker(&f);
    }
    Some((linalg::hermitian_part(&sigma), &y * y.adjoint(), 0, SolverStatus::Converged))
}

fn barrier_solve(rho: &CMatrix, da: usize, db: usize) -> Result<(CMatrix, CMatrix, usize, SolverStatus)> {
    let bar = Barrier { rho, da, db, basis: hermitian_basis(db) };
    let lmax = linalg::max_eigenvalue(rho);
    let mut sigma = CMatrix::identity(db, db) * real(1.5 * lmax + 1e-12);
    let mut x = to_coords(&bar.basis, &sigma, db);
    let first = bar
        .eval(1.0, &sigma)
        .ok_or_else(|| Error::Solver("initial point is not strictly feasible".into()))?;
    let mut t = (linalg::trace(&ptrace_a(&first.w, da, db)).re / db as f64).max(1e-300);
    let mu = 8.0;
    let mut iterations = 0;
    let mut best: Option<(f64, CMatrix, CMatrix)> = None;

    loop {
        // Centering.
        let mut current = bar.eval(t, &sigma).ok_or_else(|| Error::Solver("lost strict feasibility".into()))?;
        loop {
            if iterations >= MAX_ITER {
                break;
            }
            iterations += 1;
            let g = bar.gradient(t, &current.w);
            let h = bar.hessian(&current.w);
            let dx = match newton_direction(h, &g) {
                Some(d) => d,
                None => break,
            };
            let decrement = -g.dot(&dx);
            if !(decrement.is_finite()) || decrement < 0.0 {
                break;
            }
            if decrement * 0.5 <= 1e-9 {
                break;
            }
            let mut step = 1.0;
            let mut accepted = None;
            while step > 1e-14 {
                let xt = &x + &dx * step;
                let st = to_matrix(&bar.basis, &xt, db);
                if let Some(e) = bar.eval(t, &st) {
                    if e.value <= current.value - 0.25 * step * decrement {
                        accepted = Some((xt, st, e));
                        break;
                    }
                }
                step *= 0.5;
            }
            match accepted {
                Some((xt, st, e)) => {
                    x = xt;
                    sigma = st;
                    current = e;
                }
                None => break,
            }
        }

        let y = bar.dual_point(&current.w);
        let primal = linalg::trace(&sigma).re;
        let dual_value = (rho * &y).trace().re;
        let gap = primal - dual_value;
        if best.as_ref().is_none_or(|(bg, _, _)| gap < *bg) {
            best = Some((gap, sigma.clone(), y.clone()));
        }
        if gap <= GAP_TOL * primal.max(1.0) {
            return Ok((sigma, y, iterations, SolverStatus::Converged));
        }
        if iterations >= MAX_ITER {
            break;
        }
        t *= mu;
        if !t.is_finite() {
            break;
        }
    }
    let (gap, s, y) = best.expect("at least one outer iteration");
    let status = if gap <= GAP_TOL * linalg::trace(&s).re.max(1.0) {
        SolverStatus::Converged
    } else {
        SolverStatus::MaxIter
    };
    Ok((s, y, iterations, status))
}
