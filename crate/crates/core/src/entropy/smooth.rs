//! Certified lower bounds on the smooth min-entropy.
//!
//! The candidates are (a) spectral truncations of `rho` that keep the top
//! eigenvalue groups and cap them at the smallest level the ball allows, and
//! (b) compressions `(Pi ⊗ 1) rho (Pi ⊗ 1)` onto the leading eigenvectors of
//! `rho_A`. Each candidate lies in the purified-distance ball, so its
//! min-entropy (or any certified lower bound on it) bounds `H^eps_min` from
//! below. `rho` itself is always a candidate.

use super::{check_cap, hmin_bipartite, BoundDirection, Cut, EntropyCertificate};
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix};
use crate::operator::{purified_distance, Operator};

/// Number of smoothing candidates examined per call (besides `rho` itself).
pub const SMOOTHING_GRID: usize = 32;
const TIE_TOL: f64 = 1e-10;
const EXACT_LIMIT: usize = 64;
const REFINE: usize = 3;
pub(crate) const MAX_PROJECTIONS: usize = 8;

pub(crate) fn check_eps(ab: &Operator, eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::EpsOutOfRange { eps, reason: "must be finite and nonnegative".into() });
    }
    let tr = ab.trace_re();
    if tr.max(0.0).sqrt() <= eps {
        return Err(Error::EpsOutOfRange { eps, reason: format!("requires sqrt(tr rho) = {} > eps", tr.max(0.0).sqrt()) });
    }
    Ok(())
}

/// Purified distance between commuting operators given by their spectra
/// in a shared eigenbasis.
fn commuting_distance(mu: &[f64], nu: &[f64]) -> f64 {
    let f: f64 = mu.iter().zip(nu).map(|(&a, &b)| (a.max(0.0) * b.max(0.0)).sqrt()).sum();
    let t1: f64 = mu.iter().sum();
    let t2: f64 = nu.iter().sum();
    let fbar = (f + ((1.0 - t1).max(0.0) * (1.0 - t2).max(0.0)).sqrt()).min(1.0);
    (1.0 - fbar * fbar).max(0.0).sqrt()
}

fn truncated(mu: &[f64], keep: usize, cap: f64) -> Vec<f64> {
    mu.iter()
        .enumerate()
        .map(|(k, &m)| if k < keep { m.max(0.0).min(cap) } else { 0.0 })
        .collect()
}

/// Evenly spaced subset of `items` of size at most `n`, keeping the last one.
pub(crate) fn spread<T: Clone>(items: &[T], n: usize) -> Vec<T> {
    if items.len() <= n {
        return items.to_vec();
    }
    (0..n)
        .map(|k| {
            let idx = ((k + 1) * items.len()) / n - 1;
            items[idx].clone()
        })
        .collect()
}

pub(crate) fn spectral_candidates(ab: &Operator, eps: f64, budget: usize) -> Vec<Operator> {
    let (values, vectors) = linalg::eigh(ab.mat());
    let mu: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let positive = mu.iter().filter(|&&m| m > 0.0).count();
    // Cut points at the ends of eigenvalue groups.
    let mut cuts = Vec::new();
    for k in 1..=positive {
        if k == positive || (mu[k - 1] - mu[k]).abs() > TIE_TOL {
            cuts.push(k);
        }
    }
    let top = mu.first().copied().unwrap_or(0.0);
    let mut out = Vec::new();
    for keep in spread(&cuts, budget) {
        if commuting_distance(&mu, &truncated(&mu, keep, top)) > eps {
            continue;
        }
        let (mut lo, mut hi) = (0.0, top);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if commuting_distance(&mu, &truncated(&mu, keep, mid)) <= eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let nu = truncated(&mu, keep, hi);
        let m = linalg::spectral_apply(&nu, &vectors, |v| v);
        if let Ok(op) = Operator::new(ab.dims().to_vec(), linalg::hermitian_part(&m)) {
            out.push(op);
        }
    }
    out
}

fn projection_candidates(ab: &Operator, eps: f64) -> Vec<Operator> {
    let (da, db) = (ab.dims()[0], ab.dims()[1]);
    let Ok(rho_a) = ab.partial_trace(&[0]) else {
        return Vec::new();
    };
    let (_, vectors) = linalg::eigh(rho_a.mat());
    let ranks: Vec<usize> = (1..da).collect();
    let mut out = Vec::new();
    for r in spread(&ranks, MAX_PROJECTIONS) {
        let v = vectors.columns(0, r).into_owned();
        let pi = &v * v.adjoint();
        let big = pi.kronecker(&CMatrix::identity(db, db));
        let m = linalg::hermitian_part(&linalg::conjugate(&big, ab.mat()));
        let Ok(op) = Operator::new(ab.dims().to_vec(), m) else { continue };
        if op.trace_re() <= 0.0 {
            continue;
        }
        if purified_distance(&op, ab).is_ok_and(|p| p <= eps) {
            out.push(op);
        }
    }
    out
}

/// Lower bound on `H_min(rho_tilde)` reusing the optimizer of `rho`:
/// `rho_tilde <= lambda 1 ⊗ sigma` with `lambda` the top generalized eigenvalue.
fn proxy_certificate(base: &EntropyCertificate, candidate: &Operator) -> Option<EntropyCertificate> {
    let da = candidate.dims()[0];
    let scale = 2f64.powf(-base.value);
    let dominating = CMatrix::identity(da, da).kronecker(base.sigma.mat()) * real(scale);
    let isqrt = linalg::psd_inv_sqrt(&dominating, 1e-13);
    let whitened = linalg::conjugate(&isqrt, candidate.mat());
    let lambda = linalg::max_eigenvalue(&whitened);
    if !(lambda.is_finite() && lambda > 0.0) {
        return None;
    }
    let mut cert = EntropyCertificate {
        value: base.value - lambda.log2(),
        smoothing_state: Some(candidate.clone()),
        ..base.clone()
    };
    // Keep only proxies whose domination actually holds.
    if cert.feasibility_margin(candidate).ok()? < -1e-10 {
        // Retry with a tiny inflation.
        cert.value -= 1e-9;
        if cert.feasibility_margin(candidate).ok()? < -1e-10 {
            return None;
        }
    }
    Some(cert)
}

/// Certified lower bound on `H^eps_min(A|B)`; exact (up to the solver) at `eps = 0`.
pub fn hmin_smooth(rho: &Operator, cut: &Cut, eps: f64) -> Result<EntropyCertificate> {
    let ab = cut.bipartite(rho)?.require_subnormalized()?;
    check_eps(&ab, eps)?;
    check_cap(ab.dim())?;
    let mut base = hmin_bipartite(&ab, eps)?;
    if eps == 0.0 {
        return Ok(base);
    }
    base.bound_direction = BoundDirection::Lower;
    let projections = projection_candidates(&ab, eps);
    let spectral_budget = SMOOTHING_GRID - projections.len().min(SMOOTHING_GRID);
    let mut candidates = spectral_candidates(&ab, eps * (1.0 - 1e-9), spectral_budget);
    candidates.retain(|o| purified_distance(o, &ab).is_ok_and(|p| p <= eps));
    candidates.extend(projections);

    let mut best = base.clone();
    let consider = |cert: EntropyCertificate, state: &Operator, best: &mut EntropyCertificate| {
        if cert.value > best.value {
            *best = EntropyCertificate {
                smoothing_state: Some(state.clone()),
                bound_direction: BoundDirection::Lower,
                eps,
                ..cert
            };
        }
    };

    if ab.dim() <= EXACT_LIMIT {
        for cand in &candidates {
            if let Ok(cert) = hmin_bipartite(cand, eps) {
                consider(cert, cand, &mut best);
            }
        }
    } else {
        let mut ranked: Vec<(f64, usize)> = Vec::new();
        for (k, cand) in candidates.iter().enumerate() {
            if let Some(cert) = proxy_certificate(&base, cand) {
                ranked.push((cert.value, k));
                consider(cert, cand, &mut best);
            }
        }
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
        for &(_, k) in ranked.iter().take(REFINE) {
            if let Ok(cert) = hmin_bipartite(&candidates[k], eps) {
                consider(cert, &candidates[k], &mut best);
            }
        }
    }
    if let Some(state) = &best.smoothing_state {
        let p = purified_distance(state, &ab)?;
        if p > eps + 1e-8 {
            return Err(Error::Solver(format!("smoothing state left the ball (distance {p})")));
        }
    }
    Ok(best)
}
