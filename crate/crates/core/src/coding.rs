//! One-shot classical coding over a CQ channel with permutation encoders and
//! decoders synthesized from the Uhlmann isometry of the purified picture.

use serde::Serialize;

use crate::channel::QuantumChannel;
use crate::entropy::{self, Cut, EntropyCertificate};
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix, CVector, CompensatedSum};
use crate::operator::{uhlmann_isometry, Operator, Permutation, PureState};
use crate::random::Sampler;

/// Largest input dimension for exhaustive permutation search.
pub const SEARCH_EXHAUSTIVE_CAP: usize = 7;
const TIE_TOL: f64 = 1e-12;

/// Message distribution `lambda` over `K` messages.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageEnsemble {
    weights: Vec<f64>,
}

impl MessageEnsemble {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("no messages".into()));
        }
        if weights.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
            return Err(Error::InvalidDistribution("weights must be finite and nonnegative".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("weights sum to {s}")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDistribution("no messages".into()));
        }
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `|phi>_MR = sum_i sqrt(lambda_i) |ii>`.
    pub fn pure(&self) -> PureState {
        PureState::schmidt_aligned(self.len(), &self.weights).expect("valid weights")
    }

    /// `sum_i lambda_i |ii><ii|`.
    pub fn classical(&self) -> Operator {
        let k = self.len();
        let mut diag = vec![0.0; k * k];
        for (i, &w) in self.weights.iter().enumerate() {
            diag[i * k + i] = w;
        }
        Operator::from_real_diagonal(&[k, k], &diag).expect("valid weights")
    }

    /// `H_max(M) = 2 log sum_i sqrt(lambda_i)`.
    pub fn hmax(&self) -> f64 {
        entropy::renyi_half(&self.weights)
    }

    /// Same distribution with message `j` relabeled `sigma(j)`.
    pub fn relabeled(&self, sigma: &Permutation) -> Result<Self> {
        if sigma.len() != self.len() {
            return Err(Error::Dimension("relabeling must act on the messages".into()));
        }
        let mut w = vec![0.0; self.len()];
        for (j, &x) in self.weights.iter().enumerate() {
            w[sigma.apply(j)] = x;
        }
        Self::new(w)
    }
}

/// Decoder `B -> M̂` obtained from the isometry `V: B -> M̂ ⊗ E_D`
/// followed by a measurement of `M̂` in the message basis.
#[derive(Clone, Debug)]
pub struct Decoder {
    pub channel: QuantumChannel,
    pub isometry: CMatrix,
    pub env_dim: usize,
    /// Uhlmann overlap `|<xi| V |rho>|`.
    pub overlap: f64,
}

/// Encoder `i -> |pi(i)>` (embedding into the first `K` basis vectors, then
/// a basis permutation) with an optional decoder.
#[derive(Clone, Debug)]
pub struct PermutationCode {
    pub d_a: usize,
    pub messages: usize,
    pub permutation: Permutation,
    pub decoder: Option<Decoder>,
}

impl PermutationCode {
    pub fn new(d_a: usize, messages: usize, permutation: Permutation) -> Result<Self> {
        if permutation.len() != d_a {
            return Err(Error::Dimension(format!("permutation of {} points for input dimension {d_a}", permutation.len())));
        }
        if messages == 0 || messages > d_a {
            return Err(Error::Dimension(format!("{messages} messages do not fit into dimension {d_a}")));
        }
        Ok(Self { d_a, messages, permutation, decoder: None })
    }

    /// `P_A W` as a `d_A x K` matrix.
    pub fn encoder(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.d_a, self.messages);
        for i in 0..self.messages {
            m[(self.permutation.apply(i), i)] = real(1.0);
        }
        m
    }

    pub fn symbol(&self, message: usize) -> usize {
        self.permutation.apply(message)
    }
}

/// A CQ channel with its dilation; Kraus or Choi inputs that are CQ are
/// rebuilt from their outputs on the basis states.
fn as_cq(t: &QuantumChannel) -> Result<QuantumChannel> {
    if t.cq_dilation().is_some() {
        return Ok(t.clone());
    }
    if !t.is_cq() {
        return Err(Error::NotCq(t.cq_defect()));
    }
    t.classicalized()
}

/// Amplitudes of the purified channel output on `[R, X, E', B]`.
fn actual_state(t: &QuantumChannel, code: &PermutationCode, ens: &MessageEnsemble) -> Result<PureState> {
    let dil = t.cq_dilation().expect("checked CQ");
    let (db, dx, de) = (dil.b_dim, dil.x_dim, dil.eprime_dim);
    let k = code.messages;
    let mut amps = CVector::zeros(k * dx * de * db);
    for (i, &w) in ens.weights().iter().enumerate() {
        let x = code.symbol(i);
        let s = w.sqrt();
        for e in 0..de {
            for b in 0..db {
                amps[((i * dx + x) * de + e) * db + b] = dil.isometry[((b * dx + x) * de + e, x)] * real(s);
            }
        }
    }
    PureState::new(vec![k, dx, de, db], amps)
}

/// Target `sum_i sqrt(lambda_i) |i>_R |pi(i)>_X |i>_M̂ |theta^i>_{E' E_D}` with
/// `theta^i` purifying the environment state of input `pi(i)`.
fn target_state(t: &QuantumChannel, code: &PermutationCode, ens: &MessageEnsemble, env_dim: usize) -> Result<PureState> {
    let dil = t.cq_dilation().expect("checked CQ");
    let (db, dx, de) = (dil.b_dim, dil.x_dim, dil.eprime_dim);
    let k = code.messages;
    let mut amps = CVector::zeros(k * dx * de * k * env_dim);
    for (i, &w) in ens.weights().iter().enumerate() {
        let x = code.symbol(i);
        for e in 0..de {
            let mu: f64 = (0..db).map(|b| dil.isometry[((b * dx + x) * de + e, x)].norm_sqr()).sum();
            let idx = ((((i * dx + x) * de + e) * k + i) * env_dim) + e;
            amps[idx] = real((w * mu).sqrt());
        }
    }
    PureState::new(vec![k, dx, de, k, env_dim], amps)
}

/// Decoder environment size: enough to hold `theta` and to make `V` a full
/// isometry of `B`.
fn decoder_env_dim(t: &QuantumChannel, messages: usize) -> usize {
    let dil = t.cq_dilation().expect("checked CQ");
    dil.eprime_dim.max(dil.b_dim.div_ceil(messages))
}

pub fn build_decoder(t: &QuantumChannel, code: &PermutationCode, ens: &MessageEnsemble) -> Result<Decoder> {
    let t = as_cq(t)?;
    check_code(&t, code, ens)?;
    let k = code.messages;
    let env_dim = decoder_env_dim(&t, k);
    let phi = actual_state(&t, code, ens)?;
    let xi = target_state(&t, code, ens, env_dim)?;
    let uhl = uhlmann_isometry(&phi, &xi, 3)?;
    let v = uhl.map;
    let db = v.ncols();
    // Kraus |m><v_{m,e}| realize V followed by measuring M̂ and discarding E_D.
    let mut kraus = Vec::with_capacity(k * env_dim);
    for m in 0..k {
        for e in 0..env_dim {
            let row = m * env_dim + e;
            let mut op = CMatrix::zeros(k, db);
            for b in 0..db {
                op[(m, b)] = v[(row, b)];
            }
            kraus.push(op);
        }
    }
    let channel = QuantumChannel::from_kraus(kraus, db, vec![k])?;
    Ok(Decoder { channel, isometry: v, env_dim, overlap: uhl.overlap })
}

fn check_code(t: &QuantumChannel, code: &PermutationCode, ens: &MessageEnsemble) -> Result<()> {
    if code.d_a != t.in_dim() {
        return Err(Error::Dimension(format!("code on dimension {}, channel on {}", code.d_a, t.in_dim())));
    }
    if code.messages != ens.len() {
        return Err(Error::Dimension(format!("code for {} messages, ensemble of {}", code.messages, ens.len())));
    }
    Ok(())
}

/// `p_e = |(D∘T∘E)(phi^cl) - phi^cl|_1 / 2`, evaluated blockwise in `R`.
pub fn error_probability(code: &PermutationCode, t: &QuantumChannel, ens: &MessageEnsemble) -> Result<f64> {
    check_code(t, code, ens)?;
    let dec = code
        .decoder
        .as_ref()
        .ok_or_else(|| Error::Dimension("code has no decoder".into()))?;
    let k = code.messages;
    let mut total = CompensatedSum::default();
    for (i, &w) in ens.weights().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let x = Operator::ket_bra(&[t.in_dim()], code.symbol(i), code.symbol(i));
        let out = dec.channel.apply(&t.apply(&x)?.flattened())?;
        let ideal = Operator::ket_bra(&[k], i, i);
        total.add(w * linalg::trace_norm(out.sub(&ideal)?.mat()));
    }
    Ok(0.5 * total.value())
}

/// Code with its Uhlmann decoder attached.
pub fn decoded_code(t: &QuantumChannel, permutation: Permutation, ens: &MessageEnsemble) -> Result<PermutationCode> {
    let mut code = PermutationCode::new(t.in_dim(), ens.len(), permutation)?;
    code.decoder = Some(build_decoder(t, &code, ens)?);
    Ok(code)
}

/// Checks of the purified picture for a decoded code.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PurifiedPictureCheck {
    /// `|rho_RXE - rhô_RXE|_2` before and after the decoder isometry.
    pub untouched_defect: f64,
    /// `|V^dag V - 1|_2`.
    pub isometry_defect: f64,
    /// `|sum K^dag K - 1|_2` of the decoder channel.
    pub completeness_defect: f64,
}

pub fn purified_picture_check(t: &QuantumChannel, code: &PermutationCode, ens: &MessageEnsemble) -> Result<PurifiedPictureCheck> {
    let t = as_cq(t)?;
    let dec = code
        .decoder
        .as_ref()
        .ok_or_else(|| Error::Dimension("code has no decoder".into()))?;
    let phi = actual_state(&t, code, ens)?;
    let before = phi.amplitude_matrix(3)?;
    let after = phi.apply_to_tail(3, &dec.isometry)?.amplitude_matrix(3)?;
    let rho = &before * before.adjoint();
    let rho_hat = &after * after.adjoint();
    Ok(PurifiedPictureCheck {
        untouched_defect: (rho - rho_hat).norm(),
        isometry_defect: linalg::isometry_defect(&dec.isometry),
        completeness_defect: dec.channel.trace_preservation_defect(),
    })
}

fn choi_cut(t: &QuantumChannel) -> Cut {
    Cut::new(vec![0], (1..=t.out_dims().len()).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct CodingBound {
    pub value: f64,
    /// `H_max^eps(A|B)` of the normalized Choi state.
    pub hmax_channel: EntropyCertificate,
    pub hmax_message: f64,
    pub eps: f64,
    pub eps_state: f64,
}

/// `2 sqrt(sqrt(2^{H_max^eps(A|B)_omega + H_max(M)} / (d_A - 1)) + 8 eps)`.
pub fn theorem4_bound(t: &QuantumChannel, ens: &MessageEnsemble, eps: f64) -> Result<CodingBound> {
    theorem4_bound_with(t, ens, eps, 0.0)
}

/// Variant smoothing the message term as well, adding `8 eps_state`.
pub fn theorem4_bound_with(t: &QuantumChannel, ens: &MessageEnsemble, eps: f64, eps_state: f64) -> Result<CodingBound> {
    let d = t.in_dim();
    if d < 2 {
        return Err(Error::Dimension("the bound needs an input dimension of at least 2".into()));
    }
    if ens.len() > d {
        return Err(Error::Dimension(format!("{} messages do not fit into dimension {d}", ens.len())));
    }
    let hmax_channel = entropy::hmax_smooth(t.choi(), &choi_cut(t), eps)?;
    let hmax_message = if eps_state == 0.0 {
        ens.hmax()
    } else {
        let m = Operator::from_real_diagonal(&[ens.len()], ens.weights())?;
        entropy::hmax_smooth(&m, &Cut::new(vec![0], vec![]), eps_state)?.value
    };
    let inner = (2f64.powf(hmax_channel.value + hmax_message) / (d as f64 - 1.0)).sqrt() + 8.0 * eps + 8.0 * eps_state;
    Ok(CodingBound { value: 2.0 * inner.sqrt(), hmax_channel, hmax_message, eps, eps_state })
}

/// `log d - h_max - 1 + 2 log(p_e^2 - 8 eps)`, requiring `0 <= eps <= p_e^2 / 8`.
/// Negative infinity at the boundary means no guarantee.
pub fn corollary5_formula(log_d: f64, hmax: f64, p_e: f64, eps: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_e) {
        return Err(Error::InvalidDistribution(format!("error probability {p_e} outside [0, 1]")));
    }
    if !(eps.is_finite() && eps >= 0.0 && eps <= p_e * p_e / 8.0) {
        return Err(Error::EpsOutOfRange { eps, reason: format!("requires 0 <= eps <= p_e^2/8 = {}", p_e * p_e / 8.0) });
    }
    let slack = p_e * p_e - 8.0 * eps;
    if slack <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_d - hmax - 1.0 + 2.0 * slack.log2())
}

#[derive(Clone, Debug, Serialize)]
pub struct MessageBudget {
    /// Largest `H_max(M)` with a guaranteed code, in bits.
    pub value: f64,
    pub hmax_channel: EntropyCertificate,
    pub p_e: f64,
    pub eps: f64,
}

pub fn corollary5_max_message(t: &QuantumChannel, p_e: f64, eps: f64) -> Result<MessageBudget> {
    corollary5_formula(0.0, 0.0, p_e, eps)?;
    let hmax_channel = entropy::hmax_smooth(t.choi(), &choi_cut(t), eps)?;
    let value = corollary5_formula((t.in_dim() as f64).log2(), hmax_channel.value, p_e, eps)?;
    Ok(MessageBudget { value, hmax_channel, p_e, eps })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchMode {
    Exhaustive,
    Random { seed: u64, budget: usize },
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub code: PermutationCode,
    pub p_e: f64,
    /// Mean error probability over the examined permutations.
    pub mean_p_e: f64,
    pub examined: usize,
}

fn lexicographically_less(a: &Permutation, b: &Permutation) -> bool {
    a.images() < b.images()
}

/// Code minimizing the exact error probability among the examined
/// permutations; near ties (within 1e-12) go to the lexicographically
/// smallest permutation.
pub fn best_permutation_search(t: &QuantumChannel, ens: &MessageEnsemble, mode: SearchMode) -> Result<SearchResult> {
    let t = as_cq(t)?;
    let d = t.in_dim();
    let candidates: Vec<Permutation> = match mode {
        SearchMode::Exhaustive => {
            if d > SEARCH_EXHAUSTIVE_CAP {
                return Err(Error::CapExceeded { dim: d, cap: SEARCH_EXHAUSTIVE_CAP });
            }
            Permutation::all(d)
        }
        SearchMode::Random { seed, budget } => {
            if budget == 0 {
                return Err(Error::Dimension("random search needs a positive budget".into()));
            }
            let mut sampler = Sampler::new(seed);
            (0..budget).map(|_| sampler.permutation(d)).collect()
        }
    };
    let mut best: Option<(f64, PermutationCode)> = None;
    let mut sum = CompensatedSum::default();
    for pi in &candidates {
        let code = decoded_code(&t, pi.clone(), ens)?;
        let p = error_probability(&code, &t, ens)?;
        sum.add(p);
        let better = match &best {
            None => true,
            Some((bp, bc)) => p < bp - TIE_TOL || ((p - bp).abs() <= TIE_TOL && lexicographically_less(pi, &bc.permutation)),
        };
        if better {
            best = Some((p, code));
        }
    }
    let (p_e, code) = best.expect("at least one candidate");
    Ok(SearchResult { code, p_e, mean_p_e: sum.value() / candidates.len() as f64, examined: candidates.len() })
}
