//! Von Neumann, min- and max-entropies with optimizer certificates.
//!
//! All values are in bits. Smooth min-entropies are certified lower bounds
//! from a deterministic smoothing family; smooth max-entropies are obtained
//! through duality on a purification and are therefore upper bounds.

pub mod sdp;
mod smooth;
mod blocked;

use serde::{Deserialize, Serialize};

pub use sdp::SolverStatus;
pub use blocked::{hmin_blocks, hmin_coherent_classical};
pub use smooth::{hmin_smooth, SMOOTHING_GRID};

use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix, CVector};
use crate::operator::{coherence_defect, Operator, PureState};

/// Total dimension cap for entropy computations; overridable with `ONESHOT_MAX_DIM`.
pub fn max_dim() -> usize {
    std::env::var("ONESHOT_MAX_DIM")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&d: &usize| d > 0)
        .unwrap_or(4096)
}

pub fn check_cap(dim: usize) -> Result<()> {
    let cap = max_dim();
    if dim > cap {
        return Err(Error::CapExceeded { dim, cap });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundDirection {
    Exact,
    Lower,
    Upper,
}

/// Bipartition of the subsystems of an operator; everything else is traced out.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cut {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl Cut {
    pub fn new(a: Vec<usize>, b: Vec<usize>) -> Self {
        Self { a, b }
    }

    /// `A` is subsystem 0 and `B` is subsystem 1.
    pub fn first_second() -> Self {
        Self { a: vec![0], b: vec![1] }
    }

    /// Reduce `rho` to a bipartite operator with dims `[d_A, d_B]` (`d_B = 1`
    /// for an empty conditioning set).
    pub fn bipartite(&self, rho: &Operator) -> Result<Operator> {
        if self.a.is_empty() {
            return Err(Error::Dimension("the conditioned system must be nonempty".into()));
        }
        for k in self.a.iter().chain(&self.b) {
            if *k >= rho.num_subsystems() {
                return Err(Error::SubsystemOutOfRange { index: *k, count: rho.num_subsystems() });
            }
        }
        if self.a.iter().any(|k| self.b.contains(k)) {
            return Err(Error::Dimension("cut sets overlap".into()));
        }
        let mut keep: Vec<usize> = self.a.iter().chain(&self.b).copied().collect();
        keep.sort_unstable();
        let reduced = rho.partial_trace(&keep)?;
        let pos = |k: usize| keep.iter().position(|&x| x == k).expect("kept");
        let mut order: Vec<usize> = self.a.iter().map(|&k| pos(k)).collect();
        order.extend(self.b.iter().map(|&k| pos(k)));
        let perm = reduced.permute_subsystems(&order)?;
        let da: usize = self.a.iter().map(|&k| rho.dims()[k]).product();
        let db: usize = self.b.iter().map(|&k| rho.dims()[k]).product();
        perm.with_dims(vec![da, db])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyCertificate {
    pub value: f64,
    pub eps: f64,
    pub bound_direction: BoundDirection,
    pub gap: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    /// Normalized conditioning operator of the min-entropy problem that
    /// produced `value` (for max-entropies, of the dual cut).
    #[serde(skip)]
    pub sigma: Operator,
    /// Smoothed state achieving `value`, when smoothing was applied.
    #[serde(skip)]
    pub smoothing_state: Option<Operator>,
}

impl EntropyCertificate {
    /// `lambda_min(2^{-value} 1 ⊗ sigma - rho)` for a bipartite `rho`; a
    /// min-entropy certificate is feasible when this is at least `-1e-8`.
    pub fn feasibility_margin(&self, rho_ab: &Operator) -> Result<f64> {
        let da = rho_ab.dims()[0];
        let scale = 2f64.powf(-self.value);
        let lhs = CMatrix::identity(da, da).kronecker(self.sigma.mat()) * real(scale);
        if lhs.nrows() != rho_ab.dim() {
            return Err(Error::Dimension("certificate does not match the state".into()));
        }
        Ok(linalg::min_eigenvalue(&(lhs - rho_ab.mat())))
    }
}

fn certificate_from(sol: sdp::SdpSolution, eps: f64, rho_ab: &Operator) -> Result<EntropyCertificate> {
    let db = rho_ab.dims()[1];
    let tr = sol.primal_value;
    if !(tr.is_finite() && tr > 0.0) {
        return Err(Error::Solver(format!("primal value {tr} is not positive")));
    }
    let sigma = Operator::new(vec![db], &sol.sigma * real(1.0 / tr))?;
    let direction = match sol.status {
        SolverStatus::Converged => BoundDirection::Exact,
        SolverStatus::MaxIter => BoundDirection::Lower,
    };
    Ok(EntropyCertificate {
        value: -tr.log2(),
        eps,
        bound_direction: direction,
        gap: sol.gap,
        status: sol.status,
        iterations: sol.iterations,
        sigma,
        smoothing_state: None,
    })
}

/// Shannon entropy in bits, `0 log 0 = 0`.
pub fn shannon(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

/// `H(rho) = -tr(rho log rho)` for a normalized state.
pub fn von_neumann(rho: &Operator) -> Result<f64> {
    let s = rho.require_state()?;
    let values: Vec<f64> = linalg::eigenvalues(s.mat()).into_iter().map(|v| v.max(0.0)).collect();
    Ok(shannon(&values))
}

/// `H(A|B) = H(AB) - H(B)`.
pub fn conditional_von_neumann(rho: &Operator, cut: &Cut) -> Result<f64> {
    let ab = cut.bipartite(rho)?;
    let b = ab.partial_trace(&[1])?;
    Ok(von_neumann(&ab)? - von_neumann(&b)?)
}

/// `H_max` of a classical distribution (Rényi order one half).
pub fn renyi_half(p: &[f64]) -> f64 {
    let s: f64 = p.iter().map(|&x| x.max(0.0).sqrt()).sum();
    2.0 * s.log2()
}

/// `H_min` of a classical distribution.
pub fn classical_min_entropy(p: &[f64]) -> f64 {
    -p.iter().cloned().fold(0.0, f64::max).log2()
}

/// Exact conditional min-entropy `H_min(A|B)`.
pub fn hmin_cond(rho: &Operator, cut: &Cut) -> Result<EntropyCertificate> {
    let ab = cut.bipartite(rho)?.require_subnormalized()?;
    check_cap(ab.dim())?;
    hmin_bipartite(&ab, 0.0)
}

pub(crate) fn hmin_bipartite(ab: &Operator, eps: f64) -> Result<EntropyCertificate> {
    let (da, db) = (ab.dims()[0], ab.dims()[1]);
    let sol = sdp::solve(ab.mat(), da, db)?;
    certificate_from(sol, eps, ab)
}

/// `H^eps_min(A|B)` through the block solver when `A` is subsystem 0, the
/// conditioning set is `1..k` and the state is coherent classical between the
/// first two subsystems; otherwise through [`hmin_smooth`].
pub fn hmin_smooth_structured(rho: &Operator, cut: &Cut, eps: f64) -> Result<EntropyCertificate> {
    check_cap(rho.dim())?;
    let k = rho.num_subsystems();
    let dims = rho.dims();
    let contiguous = cut.a == [0] && cut.b.len() + 1 == k && cut.b.iter().enumerate().all(|(i, &b)| b == i + 1);
    if contiguous && k >= 2 && dims[0] == dims[1] && coherence_defect(rho, 0, 1)? <= 1e-9 {
        let rest: usize = dims[2..].iter().product();
        let shaped = Operator::new(vec![dims[0], dims[1], rest], rho.mat().clone())?;
        return hmin_coherent_classical(&shaped, eps);
    }
    hmin_smooth(rho, cut, eps)
}

/// Purification `sum_k sqrt(mu_k) |v_k> |k>` on `[A, B, C]` of a bipartite
/// operator, eigenvectors in nonincreasing eigenvalue order.
pub fn purify(ab: &Operator) -> Result<PureState> {
    let h = ab.require_psd()?;
    let (values, vectors) = linalg::eigh(h.mat());
    let top = values.first().copied().unwrap_or(0.0);
    let r = values.iter().filter(|&&v| v > 1e-14 * top.max(1e-300) && v > 0.0).count().max(1);
    let n = h.dim();
    let mut amps = CVector::zeros(n * r);
    for k in 0..r {
        let s = values[k].max(0.0).sqrt();
        for i in 0..n {
            amps[i * r + k] = vectors[(i, k)] * real(s);
        }
    }
    let mut dims = ab.dims().to_vec();
    dims.push(r);
    PureState::new(dims, amps)
}

/// For `ab = sum_x |x><x| ⊗ rho_x`, the compression onto `|x x e>` of the
/// `A X' E` marginal of the purification `sum_x |x>_A |psi_x>_{BE} |x>_X'`,
/// on `[A, E]`: `<x e|M|y f> = sqrt(mu_e^x mu_f^y) <v_f^y|v_e^x>`. `None` when
/// `ab` is not block diagonal on `A`.
fn cq_purification_blocks(ab: &Operator) -> Result<Option<Operator>> {
    let (da, db) = (ab.dims()[0], ab.dims()[1]);
    let m = ab.mat();
    let mut off = 0.0;
    for x in 0..da {
        for y in 0..da {
            if x != y {
                off += m.view((x * db, y * db), (db, db)).norm_squared();
            }
        }
    }
    if off.sqrt() > 1e-12 {
        return Ok(None);
    }
    let spectra: Vec<_> = (0..da)
        .map(|x| linalg::eigh(&linalg::hermitian_part(&m.view((x * db, x * db), (db, db)).into_owned())))
        .collect();
    let top = spectra.iter().flat_map(|(v, _)| v.iter().copied()).fold(0.0, f64::max);
    let keep = |v: f64| v > 1e-14 * top.max(1e-300) && v > 0.0;
    let e = spectra.iter().map(|(v, _)| v.iter().filter(|&&x| keep(x)).count()).max().unwrap_or(1).max(1);
    check_cap(da * e)?;
    let amps: Vec<CMatrix> = spectra
        .iter()
        .map(|(values, vectors)| {
            CMatrix::from_fn(db, e, |b, k| {
                if k < values.len() && keep(values[k]) {
                    vectors[(b, k)] * real(values[k].sqrt())
                } else {
                    real(0.0)
                }
            })
        })
        .collect();
    let mut out = CMatrix::zeros(da * e, da * e);
    for x in 0..da {
        for y in 0..da {
            // <x e|M|y f> = sum_b psi_x(b, e) conj(psi_y(b, f)).
            let g = amps[x].transpose() * amps[y].map(|z| z.conj());
            out.view_mut((x * e, y * e), (e, e)).copy_from(&g);
        }
    }
    Ok(Some(Operator::new(vec![da, e], linalg::hermitian_part(&out))?))
}

/// Smooth max-entropy through duality: `-H^eps_min(A|C)` on a purification.
/// An upper bound whenever the inner value is a lower bound.
pub fn hmax_smooth(rho: &Operator, cut: &Cut, eps: f64) -> Result<EntropyCertificate> {
    let ab = cut.bipartite(rho)?.require_subnormalized()?;
    smooth::check_eps(&ab, eps)?;
    if let Some(m) = cq_purification_blocks(&ab)? {
        let inner = hmin_blocks(&m, eps)?;
        let direction = match inner.bound_direction {
            BoundDirection::Exact => BoundDirection::Exact,
            _ => BoundDirection::Upper,
        };
        return Ok(EntropyCertificate { value: -inner.value, bound_direction: direction, ..inner });
    }
    let psi = purify(&ab)?;
    let r = psi.dims()[2];
    check_cap(ab.dims()[0] * r)?;
    let ac = psi.density().partial_trace(&[0, 2])?;
    let inner = hmin_smooth(&ac, &Cut::first_second(), eps)?;
    let direction = match inner.bound_direction {
        BoundDirection::Exact => BoundDirection::Exact,
        _ => BoundDirection::Upper,
    };
    Ok(EntropyCertificate { value: -inner.value, bound_direction: direction, ..inner })
}

/// Exact (unsmoothed) max-entropy.
pub fn hmax_cond(rho: &Operator, cut: &Cut) -> Result<EntropyCertificate> {
    hmax_smooth(rho, cut, 0.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionCheck {
    pub holds: bool,
    /// `H_max(A|B)_rho - H_max(A|B)_{Pi rho Pi}`.
    pub margin: f64,
    /// The projected state vanished; nothing was compared.
    pub skipped: bool,
}

/// Check that projecting `A` with `0 <= Pi <= 1` does not increase `H_max(A|B)` (at `eps = 0`).
pub fn hmax_projection_check(rho_ab: &Operator, pi: &Operator) -> Result<ProjectionCheck> {
    let ab = Cut::first_second().bipartite(rho_ab)?.require_subnormalized()?;
    let da = ab.dims()[0];
    if pi.dim() != da {
        return Err(Error::Dimension("projection does not act on A".into()));
    }
    let p = pi.require_psd()?;
    let top = linalg::max_eigenvalue(p.mat());
    if top > 1.0 + 1e-9 {
        return Err(Error::InvalidState(format!("operator exceeds the identity (largest eigenvalue {top})")));
    }
    let big = p.mat().kronecker(&CMatrix::identity(ab.dims()[1], ab.dims()[1]));
    let projected = Operator::new(ab.dims().to_vec(), linalg::conjugate(&big, ab.mat()))?;
    if projected.trace_re() <= 1e-14 {
        return Ok(ProjectionCheck { holds: true, margin: 0.0, skipped: true });
    }
    let before = hmax_cond(&ab, &Cut::first_second())?.value;
    let after = hmax_cond(&projected, &Cut::first_second())?.value;
    let margin = before - after;
    Ok(ProjectionCheck { holds: margin >= -1e-8, margin, skipped: false })
}

#[derive(Clone, Debug, Serialize)]
pub struct StructureCheck {
    pub holds: bool,
    pub value: f64,
    /// `lambda_min(2^{-value} 1 ⊗ C_{X'}(sigma) - rho)`.
    pub pinched_margin: f64,
}

/// For `rho` on `[X, X', A, B]` coherent classical on `X, X'`: solve
/// `H_min(XA|X'B)`, pinch the optimizer on `X'` and recheck feasibility at
/// the same value.
pub fn cq_optimizer_structure_check(rho: &Operator) -> Result<StructureCheck> {
    if rho.num_subsystems() != 4 {
        return Err(Error::Dimension("expected subsystems [X, X', A, B]".into()));
    }
    let defect = coherence_defect(rho, 0, 1)?;
    if defect > 1e-9 {
        return Err(Error::NotClassicallyCoherent(defect));
    }
    let cut = Cut::new(vec![0, 2], vec![1, 3]);
    let cert = hmin_cond(rho, &cut)?;
    let dims = rho.dims();
    let sigma = cert.sigma.clone().with_dims(vec![dims[1], dims[3]])?;
    let pinched = sigma.classicalize(0)?.flattened();
    let pinched_cert = EntropyCertificate { sigma: pinched, ..cert.clone() };
    let ab = cut.bipartite(rho)?;
    let pinched_margin = pinched_cert.feasibility_margin(&ab)?;
    Ok(StructureCheck { holds: pinched_margin >= -1e-7, value: cert.value, pinched_margin })
}

#[derive(Clone, Debug, Serialize)]
pub struct QaepPoint {
    pub n: usize,
    pub per_copy: f64,
    pub bound_direction: BoundDirection,
}

#[derive(Clone, Debug, Serialize)]
pub struct QaepTrend {
    pub reference: f64,
    pub points: Vec<QaepPoint>,
}

/// `rho^{⊗n}` on `[A^n, B^n]` for a bipartite `rho`.
pub fn tensor_power_bipartite(ab: &Operator, n: usize) -> Result<Operator> {
    let (da, db) = (ab.dims()[0], ab.dims()[1]);
    let power = ab.tensor_power(n);
    let mut order: Vec<usize> = (0..n).map(|k| 2 * k).collect();
    order.extend((0..n).map(|k| 2 * k + 1));
    power.permute_subsystems(&order)?.with_dims(vec![da.pow(n as u32), db.pow(n as u32)])
}

/// `H^eps_min(A^n|B^n) / n` for `n = 1..=n_max`, with `H(A|B)` as reference.
pub fn qaep_trend(rho_ab: &Operator, eps: f64, n_max: usize) -> Result<QaepTrend> {
    let ab = Cut::first_second().bipartite(rho_ab)?.require_state()?;
    check_cap(ab.dim().pow(n_max as u32))?;
    let reference = conditional_von_neumann(&ab, &Cut::first_second())?;
    let mut points = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let power = tensor_power_bipartite(&ab, n)?;
        let cert = hmin_smooth(&power, &Cut::first_second(), eps)?;
        points.push(QaepPoint { n, per_copy: cert.value / n as f64, bound_direction: cert.bound_direction });
    }
    Ok(QaepTrend { reference, points })
}

pub fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty".into()));
    }
    if p.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err(Error::InvalidDistribution("entries must be finite and nonnegative".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("entries sum to {s}")));
    }
    Ok(())
}

/// `I(X;B) = H(sum_x p_x rho_x) - sum_x p_x H(rho_x)`.
pub fn holevo_information(probs: &[f64], outputs: &[Operator]) -> Result<f64> {
    check_distribution(probs)?;
    if probs.len() != outputs.len() {
        return Err(Error::Dimension("one output state per symbol required".into()));
    }
    let d = outputs[0].dim();
    let mut avg = CMatrix::zeros(d, d);
    let mut cond = 0.0;
    for (&p, o) in probs.iter().zip(outputs) {
        if o.dim() != d {
            return Err(Error::Dimension("output states differ in dimension".into()));
        }
        avg += o.mat() * real(p);
        cond += p * von_neumann(o)?;
    }
    let avg = Operator::new(vec![d], avg)?;
    Ok((von_neumann(&avg)? - cond).max(0.0))
}
