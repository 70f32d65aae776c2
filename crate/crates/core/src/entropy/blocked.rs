//! Min-entropy of states that are coherent classical between the conditioned
//! system `X` and a copy `X'` inside the conditioning system `X'E'`.
//!
//! For such states the optimal `sigma_{X'E'}` can be taken classical on `X'`,
//! `sigma = sum_x |x><x| ⊗ sigma_x`, and the constraint `1 ⊗ sigma >= rho`
//! reduces to `⊕_x sigma_x >= M` with `M` the compression of `rho` onto the
//! span of `|x x e>`. The reduced problem has `|X|` blocks of size `|E'|`.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::sdp::{hermitian_basis, newton_direction, SolverStatus, GAP_TOL, MAX_ITER};
use super::smooth::{check_eps, spectral_candidates, spread, MAX_PROJECTIONS, SMOOTHING_GRID};
use super::{check_cap, BoundDirection, EntropyCertificate};
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix, C64};
use crate::operator::{coherence_defect, purified_distance, Operator};

const COHERENCE_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-15;

pub(crate) struct BlockSolution {
    /// Diagonal blocks `sigma_x`, zero for blocks of `M` that vanish.
    pub blocks: Vec<CMatrix>,
    pub primal_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub status: SolverStatus,
}

fn block(m: &CMatrix, x: usize, y: usize, e: usize) -> CMatrix {
    m.view((x * e, y * e), (e, e)).into_owned()
}

fn block_diag(blocks: &[CMatrix], e: usize) -> CMatrix {
    let n = blocks.len() * e;
    let mut s = CMatrix::zeros(n, n);
    for (x, b) in blocks.iter().enumerate() {
        s.view_mut((x * e, x * e), (e, e)).copy_from(b);
    }
    s
}

struct Problem<'a> {
    m: &'a CMatrix,
    nb: usize,
    e: usize,
    basis: CMatrix,
}

impl Problem<'_> {
    fn params(&self) -> usize {
        self.nb * self.e * self.e
    }

    fn blocks_of(&self, x: &DVector<f64>) -> Vec<CMatrix> {
        let p = self.e * self.e;
        (0..self.nb)
            .map(|b| {
                let mut s = CMatrix::zeros(self.e, self.e);
                for k in 0..p {
                    let c = x[b * p + k];
                    for i in 0..self.e {
                        for j in 0..self.e {
                            s[(i, j)] += self.basis[(k, i * self.e + j)] * c;
                        }
                    }
                }
                linalg::hermitian_part(&s)
            })
            .collect()
    }

    fn eval(&self, t: f64, blocks: &[CMatrix]) -> Option<(f64, CMatrix)> {
        let s = block_diag(blocks, self.e) - self.m;
        let chol = Cholesky::new(s)?;
        let l = chol.l_dirty();
        let logdet: f64 = (0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum();
        let tr: f64 = blocks.iter().map(|b| linalg::trace(b).re).sum();
        let value = t * tr - logdet;
        value.is_finite().then(|| (value, chol.inverse()))
    }

    fn gradient(&self, t: f64, w: &CMatrix) -> DVector<f64> {
        let (e, p) = (self.e, self.e * self.e);
        DVector::from_fn(self.params(), |idx, _| {
            let (x, k) = (idx / p, idx % p);
            let mut tr_g = 0.0;
            let mut tr_wg = C64::new(0.0, 0.0);
            for i in 0..e {
                tr_g += self.basis[(k, i * e + i)].re;
                for j in 0..e {
                    tr_wg += w[(x * e + j, x * e + i)] * self.basis[(k, i * e + j)];
                }
            }
            t * tr_g - tr_wg.re
        })
    }

    /// `H[(x,k),(y,l)] = tr(W_yx G_k W_xy G_l)`.
    fn hessian(&self, w: &CMatrix) -> DMatrix<f64> {
        let (nb, e, p) = (self.nb, self.e, self.e * self.e);
        let mut h = DMatrix::zeros(nb * p, nb * p);
        if e == 1 {
            for x in 0..nb {
                for y in 0..nb {
                    h[(x, y)] = w[(x, y)].norm_sqr();
                }
            }
            return h;
        }
        for x in 0..nb {
            for y in 0..nb {
                let a = block(w, y, x, e);
                let b = block(w, x, y, e);
                // Hc[(b1,c),(d,a1)] = A[a1,b1] B[c,d].
                let hc = CMatrix::from_fn(p, p, |bc, da| {
                    let (b1, c) = (bc / e, bc % e);
                    let (d, a1) = (da / e, da % e);
                    a[(a1, b1)] * b[(c, d)]
                });
                let local = &self.basis * hc * self.basis.transpose();
                for k in 0..p {
                    for l in 0..p {
                        h[(x * p + k, y * p + l)] = local[(k, l)].re;
                    }
                }
            }
        }
        (&h + h.transpose()) * 0.5
    }

    /// `D^{-1/2} W D^{-1/2}` with `D` the diagonal blocks of `W`: every
    /// diagonal block of the result is the identity.
    fn dual_value(&self, w: &CMatrix) -> f64 {
        let e = self.e;
        let isqrt: Vec<CMatrix> = (0..self.nb).map(|x| linalg::psd_inv_sqrt(&block(w, x, x, e), 1e-300)).collect();
        let d = block_diag(&isqrt, e);
        let y = &d * w * &d;
        (&y * self.m).trace().re
    }
}

/// `min sum_x tr(sigma_x)` subject to `⊕_x sigma_x >= m`, block size `e`.
pub(crate) fn solve_blocks(m: &CMatrix, e: usize) -> Result<BlockSolution> {
    let n = m.nrows();
    if e == 0 || !n.is_multiple_of(e) {
        return Err(Error::Dimension(format!("operator of size {n} is not a multiple of block size {e}")));
    }
    let m = linalg::hermitian_part(m);
    let total = linalg::trace(&m).re;
    if total <= 0.0 {
        return Err(Error::InvalidState("zero operator has no conditional min-entropy".into()));
    }
    let nb_full = n / e;
    let kept: Vec<usize> = (0..nb_full)
        .filter(|&x| linalg::trace(&block(&m, x, x, e)).re > DROP_TOL * total)
        .collect();
    let rows: Vec<usize> = kept.iter().flat_map(|&x| (0..e).map(move |a| x * e + a)).collect();
    let mc = m.select_rows(&rows).select_columns(&rows);
    let (reduced, iterations, status, gap) = if kept.len() == 1 && e == 1 {
        (vec![CMatrix::from_element(1, 1, mc[(0, 0)])], 0, SolverStatus::Converged, 0.0)
    } else {
        barrier(&mc, kept.len(), e)?
    };
    let mut blocks = vec![CMatrix::zeros(e, e); nb_full];
    for (r, &x) in reduced.into_iter().zip(&kept) {
        blocks[x] = r;
    }
    // Repair residual infeasibility on the full space.
    let slack_min = linalg::min_eigenvalue(&(block_diag(&blocks, e) - &m));
    if slack_min < 0.0 {
        let shift = CMatrix::identity(e, e) * real(-slack_min * (1.0 + 1e-12) + 1e-300);
        for b in blocks.iter_mut() {
            *b += &shift;
        }
    }
    let primal_value: f64 = blocks.iter().map(|b| linalg::trace(b).re).sum();
    Ok(BlockSolution { blocks, primal_value, gap: gap.max(0.0), iterations, status })
}

fn barrier(m: &CMatrix, nb: usize, e: usize) -> Result<(Vec<CMatrix>, usize, SolverStatus, f64)> {
    let prob = Problem { m, nb, e, basis: hermitian_basis(e) };
    let p = e * e;
    let lmax = linalg::max_eigenvalue(m);
    let start = 1.5 * lmax + 1e-12;
    let mut x = DVector::zeros(prob.params());
    for b in 0..nb {
        for i in 0..e {
            x[b * p + i] = start;
        }
    }
    let mut blocks = prob.blocks_of(&x);
    let (_, w0) = prob
        .eval(1.0, &blocks)
        .ok_or_else(|| Error::Solver("initial point is not strictly feasible".into()))?;
    let mut t = (linalg::trace(&w0).re / (nb * e) as f64).max(1e-300);
    let mut iterations = 0;
    let mut best: Option<(f64, Vec<CMatrix>)> = None;
    loop {
        let (mut value, mut w) = prob.eval(t, &blocks).ok_or_else(|| Error::Solver("lost strict feasibility".into()))?;
        while iterations < MAX_ITER {
            iterations += 1;
            let g = prob.gradient(t, &w);
            let Some(dx) = newton_direction(prob.hessian(&w), &g) else { break };
            let decrement = -g.dot(&dx);
            if !decrement.is_finite() || decrement < 0.0 || decrement * 0.5 <= 1e-9 {
                break;
            }
            let mut step = 1.0;
            let mut accepted = None;
            while step > 1e-14 {
                let xt = &x + &dx * step;
                let bt = prob.blocks_of(&xt);
                if let Some((v, wt)) = prob.eval(t, &bt) {
                    if v <= value - 0.25 * step * decrement {
                        accepted = Some((xt, bt, v, wt));
                        break;
                    }
                }
                step *= 0.5;
            }
            match accepted {
                Some((xt, bt, v, wt)) => {
                    x = xt;
                    blocks = bt;
                    value = v;
                    w = wt;
                }
                None => break,
            }
        }
        let primal: f64 = blocks.iter().map(|b| linalg::trace(b).re).sum();
        let gap = primal - prob.dual_value(&w);
        if best.as_ref().is_none_or(|(bg, _)| gap < *bg) {
            best = Some((gap, blocks.clone()));
        }
        if gap <= GAP_TOL * primal.max(1.0) {
            return Ok((blocks, iterations, SolverStatus::Converged, gap));
        }
        if iterations >= MAX_ITER {
            break;
        }
        t *= 8.0;
        if !t.is_finite() {
            break;
        }
    }
    let (gap, b) = best.expect("at least one outer iteration");
    let primal: f64 = b.iter().map(|x| linalg::trace(x).re).sum();
    let status = if gap <= GAP_TOL * primal.max(1.0) { SolverStatus::Converged } else { SolverStatus::MaxIter };
    Ok((b, iterations, status, gap))
}

/// Compression of `rho` on `[X, X', E']` onto `|x x e>`, index `x e_dim + e`.
fn compress(rho: &Operator) -> CMatrix {
    let (dx, e) = (rho.dims()[0], rho.dims()[2]);
    let idx = |x: usize, a: usize| (x * dx + x) * e + a;
    CMatrix::from_fn(dx * e, dx * e, |r, c| rho.mat()[(idx(r / e, r % e), idx(c / e, c % e))])
}

fn expand(m: &CMatrix, dx: usize, e: usize) -> CMatrix {
    let n = dx * dx * e;
    let mut out = CMatrix::zeros(n, n);
    let idx = |x: usize, a: usize| (x * dx + x) * e + a;
    for r in 0..dx * e {
        for c in 0..dx * e {
            out[(idx(r / e, r % e), idx(c / e, c % e))] = m[(r, c)];
        }
    }
    out
}

fn certificate(sol: BlockSolution, dx: usize, e: usize, eps: f64) -> Result<EntropyCertificate> {
    let tr = sol.primal_value;
    if !(tr.is_finite() && tr > 0.0) {
        return Err(Error::Solver(format!("primal value {tr} is not positive")));
    }
    let mut sigma = CMatrix::zeros(dx * e, dx * e);
    for (x, b) in sol.blocks.iter().enumerate() {
        sigma.view_mut((x * e, x * e), (e, e)).copy_from(&(b * real(1.0 / tr)));
    }
    Ok(EntropyCertificate {
        value: -tr.log2(),
        eps,
        bound_direction: match sol.status {
            SolverStatus::Converged => BoundDirection::Exact,
            SolverStatus::MaxIter => BoundDirection::Lower,
        },
        gap: sol.gap,
        status: sol.status,
        iterations: sol.iterations,
        sigma: Operator::new(vec![dx * e], sigma)?,
        smoothing_state: None,
    })
}

/// Keep the `r` heaviest blocks of `m` (by `tr M_xx`), for each `r` in a spread.
fn block_projections(m: &CMatrix, e: usize, eps: f64) -> Vec<CMatrix> {
    let nb = m.nrows() / e;
    let mut order: Vec<(f64, usize)> = (0..nb).map(|x| (linalg::trace(&block(m, x, x, e)).re, x)).collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let nonzero = order.iter().filter(|(w, _)| *w > 0.0).count();
    let ranks: Vec<usize> = (1..nonzero).collect();
    let Ok(reference) = Operator::new(vec![nb, e], m.clone()) else { return Vec::new() };
    let mut out = Vec::new();
    for r in spread(&ranks, MAX_PROJECTIONS) {
        let mut keep = vec![false; nb];
        for &(_, x) in &order[..r] {
            keep[x] = true;
        }
        let cand = CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if keep[i / e] && keep[j / e] { m[(i, j)] } else { C64::new(0.0, 0.0) });
        let Ok(op) = Operator::new(vec![nb, e], cand) else { continue };
        if purified_distance(&op, &reference).is_ok_and(|p| p <= eps) {
            out.push(op.mat().clone());
        }
    }
    out
}

/// Certified `H^eps_min(X|X'E')` for `rho` on `[X, X', E']` that is coherent
/// classical between `X` and `X'`; exact (up to the solver) at `eps = 0`.
///
/// `sigma` of the certificate lives on `X'E'` and the smoothing state on
/// `[X, X'E']`. The smoothing states stay coherent classical.
pub fn hmin_coherent_classical(rho: &Operator, eps: f64) -> Result<EntropyCertificate> {
    let dims = rho.dims().to_vec();
    let (dx, e) = match dims.as_slice() {
        [x, xp, e] if x == xp => (*x, *e),
        [x, xp] if x == xp => (*x, 1),
        _ => return Err(Error::Dimension(format!("expected dims [X, X, E'], got {dims:?}"))),
    };
    let rho = Operator::new(vec![dx, dx, e], rho.mat().clone())?.require_subnormalized()?;
    let defect = coherence_defect(&rho, 0, 1)?;
    if defect > COHERENCE_TOL {
        return Err(Error::NotClassicallyCoherent(defect));
    }
    let m = Operator::new(vec![dx, e], compress(&rho))?;
    let mut cert = hmin_blocks(&m, eps)?;
    if let Some(state) = cert.smoothing_state.take() {
        cert.smoothing_state = Some(Operator::new(vec![dx, dx * e], expand(state.mat(), dx, e))?);
    }
    Ok(cert)
}

/// Same as [`hmin_coherent_classical`], given the compression `M` on
/// `[X, E']` with entries `<x a|M|y b> = <x x a|rho|y y b>`. The smoothing
/// state is returned in compressed form.
pub fn hmin_blocks(m: &Operator, eps: f64) -> Result<EntropyCertificate> {
    let [dx, e] = m.dims() else {
        return Err(Error::Dimension(format!("expected dims [X, E'], got {:?}", m.dims())));
    };
    let (dx, e) = (*dx, *e);
    let m_op = m.require_subnormalized()?;
    check_eps(&m_op, eps)?;
    check_cap(dx * e)?;
    let m = m_op.mat().clone();
    let mut best = certificate(solve_blocks(&m, e)?, dx, e, eps)?;
    if eps == 0.0 {
        return Ok(best);
    }
    best.bound_direction = BoundDirection::Lower;
    let projections = block_projections(&m, e, eps);
    let budget = SMOOTHING_GRID - projections.len().min(SMOOTHING_GRID);
    let mut candidates: Vec<CMatrix> = spectral_candidates(&m_op, eps * (1.0 - 1e-9), budget)
        .into_iter()
        .filter(|o| purified_distance(o, &m_op).is_ok_and(|p| p <= eps))
        .map(|o| o.mat().clone())
        .collect();
    candidates.extend(projections);
    let mut chosen: Option<CMatrix> = None;
    for cand in candidates {
        let Ok(sol) = solve_blocks(&cand, e) else { continue };
        let Ok(cert) = certificate(sol, dx, e, eps) else { continue };
        if cert.value > best.value {
            best = EntropyCertificate { bound_direction: BoundDirection::Lower, ..cert };
            chosen = Some(cand);
        }
    }
    if let Some(c) = chosen {
        let state = Operator::new(vec![dx, e], c)?;
        let p = purified_distance(&state, &m_op)?;
        if p > eps + 1e-8 {
            return Err(Error::Solver(format!("smoothing state left the ball (distance {p})")));
        }
        best.smoothing_state = Some(state);
    }
    Ok(best)
}
