//! Type classes of sequences, type projectors, restriction of a CQ channel to
//! a type subspace and the finite-block-length achievable rate it yields.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::channel::QuantumChannel;
use crate::coding::corollary5_formula;
use crate::entropy::{self, check_cap, BoundDirection};
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix, CVector};
use crate::operator::{Operator, PureState};

fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

/// `C(n, k)` exactly.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `|P_n| = C(n + |X| - 1, |X| - 1)`.
pub fn type_count(n: usize, alphabet_size: usize) -> BigUint {
    binomial(n + alphabet_size - 1, alphabet_size - 1)
}

/// `log2` of a big integer, accurate to double precision.
pub fn log2_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits").log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("fits");
    top.log2() + shift as f64
}

/// All sequences whose empirical distribution has the given counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TypeClass {
    pub alphabet_size: usize,
    pub n: usize,
    pub counts: Vec<usize>,
    /// `|t(p)|` as a decimal string in serialized form.
    #[serde(serialize_with = "serialize_big")]
    pub size: BigUint,
}

fn serialize_big<S: serde::Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_str_radix(10))
}

impl TypeClass {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Dimension("empty alphabet".into()));
        }
        let n: usize = counts.iter().sum();
        if n == 0 {
            return Err(Error::Dimension("block length must be positive".into()));
        }
        let mut size = factorial(n);
        for &c in &counts {
            size /= factorial(c);
        }
        Ok(Self { alphabet_size: counts.len(), n, counts, size })
    }

    pub fn distribution(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n as f64).collect()
    }

    pub fn log2_size(&self) -> f64 {
        log2_big(&self.size)
    }

    /// `n H(p)` in bits.
    pub fn n_entropy(&self) -> f64 {
        self.n as f64 * entropy::shannon(&self.distribution())
    }

    /// `prod_x n_x^{n_x}`, exactly.
    fn count_power(&self) -> BigUint {
        self.counts
            .iter()
            .fold(BigUint::one(), |acc, &c| acc * BigUint::from(c).pow(c as u32))
    }

    /// Sequences of this type in lexicographic order.
    pub fn sequences(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(self.n);
        let mut left = self.counts.clone();
        fn rec(left: &mut [usize], current: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
            if current.len() == n {
                out.push(current.clone());
                return;
            }
            for x in 0..left.len() {
                if left[x] > 0 {
                    left[x] -= 1;
                    current.push(x);
                    rec(left, current, n, out);
                    current.pop();
                    left[x] += 1;
                }
            }
        }
        rec(&mut left, &mut current, self.n, &mut out);
        out
    }

    /// Indices `sum_k x_k |X|^{n-1-k}` of the sequences in `X^{⊗n}`, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.sequences().iter().map(|s| sequence_index(s, self.alphabet_size)).collect()
    }

    /// `Pi_{t(p)}` on `X^{⊗n}`.
    pub fn projector(&self) -> Result<Operator> {
        let total = self.alphabet_size.checked_pow(self.n as u32).unwrap_or(usize::MAX);
        check_cap(total)?;
        let mut diag = vec![0.0; total];
        for i in self.indices() {
            diag[i] = 1.0;
        }
        Operator::from_real_diagonal(&vec![self.alphabet_size; self.n], &diag)
    }

    /// `log2 q^n(t(p)) = log2 |t| + sum_x n_x log2 q_x`.
    pub fn log2_probability(&self, q: &[f64]) -> f64 {
        let mut s = self.log2_size();
        for (&c, &qx) in self.counts.iter().zip(q) {
            if c > 0 {
                if qx <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                s += c as f64 * qx.log2();
            }
        }
        s
    }

    pub fn probability(&self, q: &[f64]) -> f64 {
        self.log2_probability(q).exp2()
    }
}

pub fn sequence_index(seq: &[usize], alphabet_size: usize) -> usize {
    seq.iter().fold(0, |acc, &x| acc * alphabet_size + x)
}

/// All types of length-`n` sequences, counts in ascending lexicographic order.
pub fn enumerate_types(n: usize, alphabet_size: usize) -> Result<Vec<TypeClass>> {
    if n == 0 || alphabet_size == 0 {
        return Err(Error::Dimension("need n >= 1 and a nonempty alphabet".into()));
    }
    fn rec(k: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(k - 1, left - c, prefix, out);
            prefix.pop();
        }
    }
    let mut all = Vec::new();
    rec(alphabet_size, n, &mut Vec::new(), &mut all);
    all.into_iter().map(TypeClass::new).collect()
}

/// `D(p||q)` in bits, `+inf` when `p` charges a `q`-null symbol.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            d += a * (a / b).log2();
        }
    }
    d
}

/// Most probable type class under `q^n`; ties go to the lexicographically
/// smallest counts. Returns the class and its probability.
pub fn most_likely_type(q: &[f64], n: usize) -> Result<(TypeClass, f64)> {
    entropy::check_distribution(q)?;
    let types = enumerate_types(n, q.len())?;
    let total = type_count(n, q.len());
    let mut best: Option<(f64, TypeClass)> = None;
    for t in types {
        let lp = t.log2_probability(q);
        let better = match &best {
            None => true,
            Some((b, _)) => lp > *b + 1e-12,
        };
        if better {
            best = Some((lp, t));
        }
    }
    let (lp, t) = best.expect("at least one type");
    let p = lp.exp2();
    let floor = 1.0 / total.to_f64().unwrap_or(f64::INFINITY);
    if p < floor * (1.0 - 1e-12) {
        return Err(Error::Solver(format!("most likely type has probability {p} below 1/|P_n| = {floor}")));
    }
    Ok((t, p))
}

/// Outcome of the four type bounds for one `(n, |X|)` pair.
#[derive(Clone, Debug, Serialize)]
pub struct TypeBoundsCheck {
    pub n: usize,
    pub alphabet_size: usize,
    pub types: usize,
    pub count_formula: bool,
    pub class_size_sandwich: bool,
    pub probability_sandwich: bool,
    pub most_likely_floor: bool,
    /// Projectors are disjoint and cover `X^{⊗n}` (exact index bookkeeping).
    pub resolution_of_identity: bool,
}

impl TypeBoundsCheck {
    pub fn all_hold(&self) -> bool {
        self.count_formula
            && self.class_size_sandwich
            && self.probability_sandwich
            && self.most_likely_floor
            && self.resolution_of_identity
    }
}

/// Verify the four type bounds and the projector resolution for one `(n, |X|)`
/// and a reference distribution `q`.
///
/// The class-size sandwich is checked as the integer inequalities
/// `|t| prod n_x^{n_x} <= n^n <= |P_n| |t| prod n_x^{n_x}`. The probability
/// sandwich reduces to the same integers whenever `D(p||q)` is finite, and
/// is additionally checked in floating point (relative tolerance 1e-12).
pub fn check_type_bounds(n: usize, q: &[f64]) -> Result<TypeBoundsCheck> {
    entropy::check_distribution(q)?;
    let k = q.len();
    let types = enumerate_types(n, k)?;
    let total = type_count(n, k);
    let count_formula = BigUint::from(types.len()) == total;
    let nn = BigUint::from(n).pow(n as u32);
    let mut class_size = true;
    let mut prob = true;
    let log_total = log2_big(&total);
    for t in &types {
        let lhs = &t.size * t.count_power();
        class_size &= lhs <= nn && nn <= &total * &lhs;
        let d = kl_divergence(&t.distribution(), q);
        let lp = t.log2_probability(q);
        if d.is_infinite() {
            prob &= lp == f64::NEG_INFINITY;
        } else {
            let upper = -(n as f64) * d;
            let lower = upper - log_total;
            let tol = 1e-12 * (1.0 + upper.abs() + log_total);
            prob &= lp <= upper + tol && lp >= lower - tol;
        }
    }
    let (_, p_best) = most_likely_type(q, n)?;
    let most_likely_floor = p_best * total.to_f64().unwrap_or(f64::INFINITY) >= 1.0 - 1e-12;
    let space = k.checked_pow(n as u32).unwrap_or(usize::MAX);
    let mut hits = vec![0u32; space.min(1 << 24)];
    let mut covered = space <= hits.len();
    if covered {
        for t in &types {
            for i in t.indices() {
                hits[i] += 1;
            }
        }
        covered = hits.iter().all(|&h| h == 1);
    }
    Ok(TypeBoundsCheck {
        n,
        alphabet_size: k,
        types: types.len(),
        count_formula,
        class_size_sandwich: class_size,
        probability_sandwich: prob,
        most_likely_floor,
        resolution_of_identity: covered,
    })
}

/// Classical-quantum ensemble `{q_x, rho_x}`.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub probs: Vec<f64>,
    pub outputs: Vec<Operator>,
}

impl Ensemble {
    pub fn new(probs: Vec<f64>, outputs: Vec<Operator>) -> Result<Self> {
        entropy::check_distribution(&probs)?;
        if probs.len() != outputs.len() {
            return Err(Error::Dimension("one output state per symbol required".into()));
        }
        let d = outputs[0].dim();
        let mut states = Vec::with_capacity(outputs.len());
        for o in outputs {
            if o.dim() != d {
                return Err(Error::Dimension("output states differ in dimension".into()));
            }
            states.push(o.require_state()?.flattened());
        }
        Ok(Self { probs, outputs: states })
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs[0].dim()
    }

    pub fn channel(&self) -> Result<QuantumChannel> {
        QuantumChannel::cq(self.outputs.clone())
    }

    pub fn holevo(&self) -> Result<f64> {
        entropy::holevo_information(&self.probs, &self.outputs)
    }

    /// `tau_XB = sum_x q_x |x><x| ⊗ rho_x` on `[X, B]`.
    pub fn tau(&self) -> Operator {
        let (k, d) = (self.alphabet_size(), self.output_dim());
        let mut m = CMatrix::zeros(k * d, k * d);
        for (x, (p, o)) in self.probs.iter().zip(&self.outputs).enumerate() {
            m.view_mut((x * d, x * d), (d, d)).copy_from(&(o.mat() * real(*p)));
        }
        Operator::new(vec![k, d], m).expect("dimensions by construction")
    }

    /// Purification of `tau_XB` on `[X, B, X', E']`:
    /// `sum_x sqrt(q_x) |x>_X |psi_x>_{B E'} |x>_{X'}`.
    pub fn tau_purification(&self) -> Result<PureState> {
        let (k, d) = (self.alphabet_size(), self.output_dim());
        let spectra: Vec<_> = self.outputs.iter().map(|o| linalg::eigh(o.mat())).collect();
        let e = spectra
            .iter()
            .map(|(v, _)| v.iter().filter(|&&x| x > 1e-14).count())
            .max()
            .unwrap_or(1)
            .max(1);
        let mut amps = CVector::zeros(k * d * k * e);
        for (x, (values, vectors)) in spectra.iter().enumerate() {
            let s = self.probs[x].sqrt();
            for j in 0..e.min(values.len()) {
                let mu = values[j].max(0.0);
                if mu <= 1e-14 {
                    continue;
                }
                for b in 0..d {
                    amps[((x * d + b) * k + x) * e + j] = vectors[(b, j)] * real(s * mu.sqrt());
                }
            }
        }
        PureState::new(vec![k, d, k, e], amps)
    }

    /// The complementary marginal `rho_XC` with `C = (X', E')` on `[X, X', E']`.
    pub fn complementary_marginal(&self) -> Result<Operator> {
        let psi = self.tau_purification()?;
        let xc = psi.density().partial_trace(&[0, 2, 3])?;
        xc.with_dims(vec![self.alphabet_size(), psi.dims()[2], psi.dims()[3]])
    }

    /// Compression of the complementary marginal onto `|x x e>`, on `[X, E']`.
    fn complementary_blocks(&self) -> Result<Operator> {
        let xc = self.complementary_marginal()?;
        let (k, e) = (xc.dims()[0], xc.dims()[2]);
        let idx = |x: usize, a: usize| (x * k + x) * e + a;
        let m = CMatrix::from_fn(k * e, k * e, |r, c| xc.mat()[(idx(r / e, r % e), idx(c / e, c % e))]);
        Operator::new(vec![k, e], m)
    }
}

/// `rho^{⊗n}` on `[A_1, ..., A_s]^n` reordered to `[A_1^n, ..., A_s^n]`.
fn grouped_power(op: &Operator, n: usize) -> Result<Operator> {
    let dims = op.dims().to_vec();
    let s = dims.len();
    let total = op.dim().checked_pow(n as u32).unwrap_or(usize::MAX);
    check_cap(total)?;
    let p = op.tensor_power(n);
    let order: Vec<usize> = (0..s).flat_map(|j| (0..n).map(move |k| k * s + j)).collect();
    let grouped = p.permute_subsystems(&order)?;
    grouped.with_dims(dims.iter().map(|d| d.pow(n as u32)).collect())
}

/// CQ channel on the type subspace: input `|x⃗>` for `x⃗ ∈ t(p)` in
/// lexicographic order, output `rho_{x_1} ⊗ ... ⊗ rho_{x_n}`.
pub fn restricted_channel(outputs: &[Operator], tc: &TypeClass) -> Result<QuantumChannel> {
    if outputs.len() != tc.alphabet_size {
        return Err(Error::Dimension("one output per symbol required".into()));
    }
    let d = outputs[0].dim();
    let out_total = d.checked_pow(tc.n as u32).unwrap_or(usize::MAX);
    let size = tc.size.to_usize().unwrap_or(usize::MAX);
    check_cap(size.saturating_mul(out_total))?;
    let flat: Vec<Operator> = outputs.iter().map(|o| o.flattened()).collect();
    let outs = tc
        .sequences()
        .iter()
        .map(|s| QuantumChannel::cq_tensor_outputs(&flat, s).flattened())
        .collect();
    QuantumChannel::cq(outs)
}

/// `Pi tau^{⊗n} Pi / tr(Pi tau^{⊗n})` compressed onto the type subspace, on
/// `[|t|, d_B^n]`; equal to the Choi state of [`restricted_channel`].
pub fn projected_tau(ens: &Ensemble, tc: &TypeClass) -> Result<Operator> {
    let grouped = grouped_power(&ens.tau(), tc.n)?;
    let db = grouped.dims()[1];
    let idx = tc.indices();
    let rows: Vec<usize> = idx.iter().flat_map(|&i| (0..db).map(move |b| i * db + b)).collect();
    let sub = grouped.mat().select_rows(&rows).select_columns(&rows);
    let tr = linalg::trace(&sub).re;
    if tr <= 0.0 {
        return Err(Error::InvalidState("type class has zero probability".into()));
    }
    Operator::new(vec![idx.len(), db], sub * real(1.0 / tr))
}

/// One row of the rate curve.
#[derive(Clone, Debug, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub type_counts: Vec<usize>,
    /// `log2 |t(p)|`.
    pub log_type_class: f64,
    /// `H^eps_max(X^n|B^n)` of `tau^{⊗n}` (an upper bound).
    pub hmax_term: f64,
    pub hmax_direction: BoundDirection,
    /// `-log2 tr(Pi tau^{⊗n})`, nonnegative.
    pub projector_mass_term: f64,
    pub rate_bits_per_use: f64,
    pub holevo_reference: f64,
    pub eps: f64,
    pub p_e: f64,
}

/// Achievable rate from the one-shot message budget applied to the channel
/// restricted to the most likely type:
/// `(1/n)[log|t| - H^eps_max(X^n|B^n) - (-log tr(Pi tau^n)) - 1 + 2 log(p_e^2 - 8 eps)]`.
pub fn hsw_rate_lower_bound(ens: &Ensemble, n: usize, eps: f64, p_e: f64) -> Result<RatePoint> {
    if n == 0 {
        return Err(Error::Dimension("block length must be positive".into()));
    }
    corollary5_formula(0.0, 0.0, p_e, eps)?;
    let (tc, prob) = most_likely_type(&ens.probs, n)?;
    let log_type_class = tc.log2_size();
    let projector_mass_term = -prob.log2();
    let blocks = grouped_power(&ens.complementary_blocks()?, n)?;
    let inner = entropy::hmin_blocks(&blocks, eps)?;
    let hmax_direction = match inner.bound_direction {
        BoundDirection::Exact => BoundDirection::Exact,
        _ => BoundDirection::Upper,
    };
    let hmax_term = -inner.value;
    let budget = corollary5_formula(log_type_class, hmax_term + projector_mass_term, p_e, eps)?;
    Ok(RatePoint {
        n,
        type_counts: tc.counts.clone(),
        log_type_class,
        hmax_term,
        hmax_direction,
        projector_mass_term,
        rate_bits_per_use: budget / n as f64,
        holevo_reference: ens.holevo()?,
        eps,
        p_e,
    })
}

/// Rates for `n = 1..=n_max`.
pub fn hsw_rate_curve(ens: &Ensemble, n_max: usize, eps: f64, p_e: f64) -> Result<Vec<RatePoint>> {
    (1..=n_max).map(|n| hsw_rate_lower_bound(ens, n, eps, p_e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_type_counts() {
        assert_eq!(enumerate_types(2, 2).unwrap().len(), 3);
        let t = enumerate_types(8, 3).unwrap();
        assert_eq!(t.len(), 45);
        let total: BigUint = t.iter().map(|c| c.size.clone()).sum();
        assert_eq!(total, BigUint::from(6561u32));
        let singles = enumerate_types(1, 4).unwrap();
        assert!(singles.iter().all(|c| c.size == BigUint::one()));
    }

    #[test]
    fn most_likely_type_examples() {
        let (t, p) = most_likely_type(&[0.9, 0.1], 4).unwrap();
        assert_eq!(t.counts, vec![4, 0]);
        assert!((p - 0.6561).abs() < 1e-12);
        let (t, _) = most_likely_type(&[0.5, 0.5], 6).unwrap();
        assert_eq!(t.counts, vec![3, 3]);
    }

    #[test]
    fn sequences_are_lexicographic() {
        let t = TypeClass::new(vec![1, 2]).unwrap();
        assert_eq!(t.sequences(), vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]);
        assert_eq!(t.indices(), vec![3, 5, 6]);
    }

    #[test]
    fn log2_of_big_integers() {
        let x = BigUint::one() << 2000usize;
        assert!((log2_big(&x) - 2000.0).abs() < 1e-9);
    }
}
