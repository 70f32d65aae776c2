//! Permutation averages of channel outputs on the off-diagonal part of a
//! Schmidt-aligned pure state, and the min-entropy bounds on them.

use serde::Serialize;

use crate::channel::QuantumChannel;
use crate::entropy::{self, Cut, EntropyCertificate};
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix, CompensatedSum};
use crate::operator::{permutation_matrix, Operator, Permutation, PureState};
use crate::random::Sampler;

/// Largest input dimension for which all permutations are enumerated.
pub const EXHAUSTIVE_CAP: usize = 7;
/// Largest dimension for the brute-force counting identity.
pub const COUNTING_BRUTE_CAP: usize = 6;
/// Schmidt weights at or below this are dropped before averaging.
pub const SCHMIDT_CUTOFF: f64 = 1e-12;
const COHERENCE_TOL: f64 = 1e-9;

fn check_pair(d: usize, i: usize, j: usize) -> Result<()> {
    if i == j {
        return Err(Error::EqualIndices(i));
    }
    if i >= d || j >= d {
        return Err(Error::SubsystemOutOfRange { index: i.max(j), count: d });
    }
    Ok(())
}

/// `E_P[P⊗P (|i><j| ⊗ |j><i|) (P⊗P)^dag] = (F - sum_k |kk><kk|) / (d(d-1))`
/// on `[d, d]`, 0-based indices.
pub fn counting_average(d: usize, i: usize, j: usize) -> Result<Operator> {
    check_pair(d, i, j)?;
    let n = d * d;
    let scale = 1.0 / (d * (d - 1)) as f64;
    let mut m = CMatrix::zeros(n, n);
    for k in 0..d {
        for l in 0..d {
            if k != l {
                // |k l><l k|
                m[(k * d + l, l * d + k)] = real(scale);
            }
        }
    }
    Operator::new(vec![d, d], m)
}

/// The same average by enumerating all `d!` permutations.
pub fn counting_average_bruteforce(d: usize, i: usize, j: usize) -> Result<Operator> {
    check_pair(d, i, j)?;
    if d > COUNTING_BRUTE_CAP {
        return Err(Error::CapExceeded { dim: d, cap: COUNTING_BRUTE_CAP });
    }
    let n = d * d;
    let mut acc = CMatrix::zeros(n, n);
    let mut count = 0usize;
    let mut pi = Permutation::identity(d);
    loop {
        let (k, l) = (pi.apply(i), pi.apply(j));
        acc[(k * d + l, l * d + k)] += real(1.0);
        count += 1;
        if !pi.next_lexicographic() {
            break;
        }
    }
    Operator::new(vec![d, d], acc * real(1.0 / count as f64))
}

/// Schmidt weights of a state whose amplitude matrix across `A | R` is
/// diagonal, i.e. one given in its Schmidt basis.
pub fn schmidt_weights(rho: &PureState) -> Result<Vec<f64>> {
    if rho.dims().len() != 2 {
        return Err(Error::Dimension("expected a bipartite pure state on [A, R]".into()));
    }
    let m = rho.amplitude_matrix(1)?;
    let off: f64 = (0..m.nrows())
        .flat_map(|a| (0..m.ncols()).map(move |r| (a, r)))
        .filter(|(a, r)| a != r)
        .map(|(a, r)| m[(a, r)].norm_sqr())
        .sum();
    if off > 1e-20 {
        return Err(Error::InvalidState("state is not given in its Schmidt basis".into()));
    }
    Ok((0..m.nrows().min(m.ncols())).map(|k| m[(k, k)].norm_sqr()).collect())
}

/// `E_P |N((P ⊗ 1)(rho - rho^cl)(P ⊗ 1)^dag)|_2^2` by applying the Kraus form
/// of `n` to every permuted state.
pub fn prop2_lhs_bruteforce(n: &QuantumChannel, rho: &PureState) -> Result<f64> {
    let d = n.in_dim();
    if d > EXHAUSTIVE_CAP {
        return Err(Error::CapExceeded { dim: d, cap: EXHAUSTIVE_CAP });
    }
    if rho.dims()[0] != d {
        return Err(Error::Dimension(format!("state on A of dimension {}, map on {d}", rho.dims()[0])));
    }
    schmidt_weights(rho)?;
    let full = rho.density();
    let diff = full.sub(&full.classicalize(0)?)?;
    let dr = rho.dims()[1];
    let id_r = CMatrix::identity(dr, dr);
    let mut sum = CompensatedSum::default();
    let mut count = 0usize;
    let mut pi = Permutation::identity(d);
    loop {
        let p = permutation_matrix(&pi).kronecker(&id_r);
        let moved = diff.conjugate_by(&p)?;
        let out = n.apply_on(&moved, 0)?;
        sum.add(linalg::hs_norm_sq(out.mat()));
        count += 1;
        if !pi.next_lexicographic() {
            break;
        }
    }
    Ok(sum.value() / count as f64)
}

/// `d/(d-1) |rho - rho^cl|_2^2 |omega - omega^cl|_2^2`.
pub fn prop2_rhs_closedform(n: &QuantumChannel, rho: &PureState) -> Result<f64> {
    let d = n.in_dim();
    if d < 2 {
        return Err(Error::Dimension("the average needs an input dimension of at least 2".into()));
    }
    let lambda = schmidt_weights(rho)?;
    let s1: f64 = lambda.iter().sum();
    let s2: f64 = lambda.iter().map(|l| l * l).sum();
    let state_part = s1 * s1 - s2;
    let omega = n.choi();
    let channel_part = linalg::hs_norm_sq(&(omega.mat() - omega.classicalize(0)?.mat()));
    Ok(d as f64 / (d as f64 - 1.0) * state_part * channel_part)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DequantizeMode {
    Exhaustive,
    MonteCarlo { seed: u64, samples: usize },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LhsEstimate {
    pub value: f64,
    /// Zero in exhaustive mode.
    pub stderr: f64,
    pub evaluations: usize,
}

/// Refuse maps that are not complementary to a CQ channel: the output must
/// start with the classical copy `X` and the Choi operator must be classically
/// coherent between `A'` and `X`.
pub fn require_complementary_cq(tbar: &QuantumChannel) -> Result<()> {
    if tbar.is_complementary_cq() {
        return Ok(());
    }
    if !tbar.is_completely_positive() {
        return Err(Error::NotCompletelyPositive);
    }
    let tp = tbar.trace_preservation_defect();
    if tp > 1e-9 {
        return Err(Error::NotTracePreserving(tp));
    }
    let defect = tbar.classical_coherence_defect()?;
    if defect > COHERENCE_TOL {
        return Err(Error::NotClassicallyCoherent(defect));
    }
    Ok(())
}

/// Precomputed pieces for `|T((P ⊗ 1)(rho - rho^cl)(P ⊗ 1)^dag)|_1`.
struct LhsTerm {
    table: Vec<CMatrix>,
    support: Vec<usize>,
    amps: Vec<f64>,
    d: usize,
    out: usize,
}

impl LhsTerm {
    fn new(tbar: &QuantumChannel, lambda: &[f64]) -> Self {
        let support: Vec<usize> = (0..lambda.len()).filter(|&k| lambda[k] > SCHMIDT_CUTOFF).collect();
        let amps = support.iter().map(|&k| lambda[k].sqrt()).collect();
        Self { table: tbar.action_table(), support, amps, d: tbar.in_dim(), out: tbar.out_dim() }
    }

    fn eval(&self, pi: &Permutation) -> f64 {
        let ns = self.support.len();
        if ns < 2 {
            return 0.0;
        }
        let out = self.out;
        let mut m = CMatrix::zeros(out * ns, out * ns);
        for (r1, &i) in self.support.iter().enumerate() {
            for (r2, &j) in self.support.iter().enumerate() {
                if r1 == r2 {
                    continue;
                }
                let block = &self.table[pi.apply(i) * self.d + pi.apply(j)];
                let c = self.amps[r1] * self.amps[r2];
                for o1 in 0..out {
                    for o2 in 0..out {
                        m[(o1 * ns + r1, o2 * ns + r2)] = block[(o1, o2)] * c;
                    }
                }
            }
        }
        linalg::trace_norm(&m)
    }
}

/// `E_P |T((P ⊗ 1)(rho - rho^cl)(P ⊗ 1)^dag)|_1` for `T` complementary to a
/// CQ channel, with `P` ranging over permutations of the Schmidt basis.
pub fn dequantize_lhs(tbar: &QuantumChannel, rho: &PureState, mode: DequantizeMode) -> Result<LhsEstimate> {
    require_complementary_cq(tbar)?;
    let d = tbar.in_dim();
    if rho.dims()[0] != d {
        return Err(Error::Dimension(format!("state on A of dimension {}, channel on {d}", rho.dims()[0])));
    }
    let lambda = schmidt_weights(rho)?;
    let term = LhsTerm::new(tbar, &lambda);
    match mode {
        DequantizeMode::Exhaustive => {
            if d > EXHAUSTIVE_CAP {
                return Err(Error::CapExceeded { dim: d, cap: EXHAUSTIVE_CAP });
            }
            let mut sum = CompensatedSum::default();
            let mut count = 0usize;
            let mut pi = Permutation::identity(d);
            loop {
                sum.add(term.eval(&pi));
                count += 1;
                if !pi.next_lexicographic() {
                    break;
                }
            }
            Ok(LhsEstimate { value: sum.value() / count as f64, stderr: 0.0, evaluations: count })
        }
        DequantizeMode::MonteCarlo { seed, samples } => {
            if samples < 2 {
                return Err(Error::Dimension("Monte Carlo needs at least 2 samples".into()));
            }
            let mut sampler = Sampler::new(seed);
            let mut sum = CompensatedSum::default();
            let mut sq = CompensatedSum::default();
            for _ in 0..samples {
                let v = term.eval(&sampler.permutation(d));
                sum.add(v);
                sq.add(v * v);
            }
            let n = samples as f64;
            let mean = sum.value() / n;
            let var = ((sq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
            Ok(LhsEstimate { value: mean, stderr: (var / n).sqrt(), evaluations: samples })
        }
    }
}

/// Min-entropies entering the bound, with their certificates.
#[derive(Clone, Debug, Serialize)]
pub struct DequantizeBound {
    pub value: f64,
    /// `H_min^{eps'}(A'|EX)` of the normalized Choi state.
    pub hmin_channel: EntropyCertificate,
    /// `H_min^{eps}(A|R)` of the input state.
    pub hmin_state: EntropyCertificate,
    pub eps: f64,
    pub eps_prime: f64,
}

fn channel_cut(tbar: &QuantumChannel) -> Cut {
    let k = tbar.out_dims().len();
    Cut::new(vec![0], (1..=k).collect())
}

/// `sqrt(2^{-H_min(A'|EX)_omega - H_min(A|R)_rho} / (d_A - 1))`.
pub fn theorem1_bound(tbar: &QuantumChannel, rho: &PureState) -> Result<DequantizeBound> {
    theorem3_bound(tbar, rho, 0.0, 0.0)
}

/// The smoothed bound with `8 eps + 8 eps'` added; the smooth min-entropies
/// are certified lower bounds, so the value stays an upper bound.
pub fn theorem3_bound(tbar: &QuantumChannel, rho: &PureState, eps: f64, eps_prime: f64) -> Result<DequantizeBound> {
    require_complementary_cq(tbar)?;
    let d = tbar.in_dim();
    if d < 2 {
        return Err(Error::Dimension("the bound needs an input dimension of at least 2".into()));
    }
    schmidt_weights(rho)?;
    let omega = tbar.choi();
    let hmin_channel = entropy::hmin_smooth_structured(omega, &channel_cut(tbar), eps_prime)?;
    let hmin_state = entropy::hmin_smooth_structured(&rho.density(), &Cut::first_second(), eps)?;
    let exponent = -hmin_channel.value - hmin_state.value;
    let value = (2f64.powf(exponent) / (d as f64 - 1.0)).sqrt() + 8.0 * eps + 8.0 * eps_prime;
    Ok(DequantizeBound { value, hmin_channel, hmin_state, eps, eps_prime })
}

#[derive(Clone, Debug, Serialize)]
pub struct DequantizeReport {
    pub d_a: usize,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub mode: DequantizeMode,
    pub eps: f64,
    pub eps_prime: f64,
    pub margin: f64,
    pub bound: DequantizeBound,
}

pub fn dequantize_report(
    tbar: &QuantumChannel,
    rho: &PureState,
    mode: DequantizeMode,
    eps: f64,
    eps_prime: f64,
) -> Result<DequantizeReport> {
    let lhs = dequantize_lhs(tbar, rho, mode)?;
    let bound = theorem3_bound(tbar, rho, eps, eps_prime)?;
    Ok(DequantizeReport {
        d_a: tbar.in_dim(),
        lhs: lhs.value,
        lhs_stderr: lhs.stderr,
        rhs: bound.value,
        mode,
        eps,
        eps_prime,
        margin: bound.value - lhs.value,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn noiseless_bit() -> QuantumChannel {
        let outs = (0..2).map(|x| Operator::ket_bra(&[2], x, x)).collect();
        QuantumChannel::cq(outs).unwrap()
    }

    /// Identical pure outputs: the environment keeps a noiseless copy of the input.
    fn copying_environment() -> QuantumChannel {
        let outs = (0..2).map(|_| Operator::ket_bra(&[2], 0, 0)).collect();
        QuantumChannel::cq(outs).unwrap().complementary().unwrap()
    }

    #[test]
    fn counting_for_two_is_half_swap_of_offdiagonals() {
        let m = counting_average(2, 0, 1).unwrap();
        let mut expected = CMatrix::zeros(4, 4);
        expected[(1, 2)] = c(0.5, 0.0);
        expected[(2, 1)] = c(0.5, 0.0);
        assert!((m.mat() - expected).norm() < 1e-15);
    }

    #[test]
    fn counting_rejects_equal_indices() {
        assert!(matches!(counting_average(3, 1, 1), Err(Error::EqualIndices(1))));
    }

    #[test]
    fn classical_state_has_zero_lhs() {
        let tbar = noiseless_bit().complementary().unwrap();
        let rho = PureState::schmidt_aligned(2, &[1.0]).unwrap();
        let v = dequantize_lhs(&tbar, &rho, DequantizeMode::Exhaustive).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn bell_through_copying_environment() {
        let tbar = copying_environment();
        let rho = PureState::schmidt_aligned(2, &[0.5, 0.5]).unwrap();
        let v = dequantize_lhs(&tbar, &rho, DequantizeMode::Exhaustive).unwrap();
        // |(|00><11| + h.c.)/2|_1 = 1.
        assert!((v.value - 1.0).abs() < 1e-12, "{}", v.value);
        let b = theorem1_bound(&tbar, &rho).unwrap();
        assert!(b.value >= v.value - 1e-8);
    }

    #[test]
    fn decoding_receiver_leaves_environment_classical() {
        let tbar = noiseless_bit().complementary().unwrap();
        let rho = PureState::schmidt_aligned(2, &[0.5, 0.5]).unwrap();
        let v = dequantize_lhs(&tbar, &rho, DequantizeMode::Exhaustive).unwrap();
        assert!(v.value.abs() < 1e-15);
    }

    #[test]
    fn non_complementary_maps_are_refused() {
        let ch = QuantumChannel::depolarizing(2, 2);
        let rho = PureState::schmidt_aligned(2, &[0.5, 0.5]).unwrap();
        assert!(dequantize_lhs(&ch, &rho, DequantizeMode::Exhaustive).is_err());
    }
}
