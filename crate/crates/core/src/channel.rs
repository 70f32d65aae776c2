//! Linear maps between operator spaces, carried as (signed) Kraus operators
//! together with their Choi operator and a Stinespring dilation.
//!
//! Choi convention: `omega = (N ⊗ I)(Phi)` with the normalized maximally
//! entangled `Phi`, stored on `[A', B...]` (input copy first), so that
//! `N(|i><j|) = d_A * <i|_{A'} omega |j>_{A'}`.

use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix};
use crate::operator::{coherence_defect, Operator};

/// Kraus cutoff on Choi eigenvalues.
pub const KRAUS_CUTOFF: f64 = 1e-10;
const TP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChoiPositivity {
    /// Completely positive; negative eigenvalues beyond the floor are rejected.
    Psd,
    /// Hermitian-preserving map such as a difference of channels.
    Hermitian,
}

/// Isometry `U|i>_A = |i>_X ⊗ |rho^i>_{BE'}` of a classical-quantum channel,
/// stored with output order `(B, X, E')`.
#[derive(Clone, Debug)]
pub struct CqDilation {
    pub isometry: CMatrix,
    pub b_dim: usize,
    pub x_dim: usize,
    pub eprime_dim: usize,
}

impl CqDilation {
    /// Largest deviation from `U|i> = |i>_X ⊗ |psi_i>` over the columns.
    pub fn column_structure_defect(&self) -> f64 {
        let (bd, xd, ed) = (self.b_dim, self.x_dim, self.eprime_dim);
        let mut worst: f64 = 0.0;
        for i in 0..xd {
            for b in 0..bd {
                for x in 0..xd {
                    if x == i {
                        continue;
                    }
                    for e in 0..ed {
                        worst = worst.max(self.isometry[((b * xd + x) * ed + e, i)].norm());
                    }
                }
            }
        }
        worst
    }
}

/// Isometry `A -> B ⊗ E`, output order `(B..., E...)`.
#[derive(Clone, Debug)]
pub struct Stinespring {
    pub matrix: CMatrix,
    pub out_dims: Vec<usize>,
    pub env_dims: Vec<usize>,
}

impl Stinespring {
    /// `tr_E(U x U^dag)`.
    pub fn channel_output(&self, x: &CMatrix) -> Result<Operator> {
        let y = Operator::new(self.full_dims(), linalg::conjugate(&self.matrix, x))?;
        let keep: Vec<usize> = (0..self.out_dims.len()).collect();
        y.partial_trace(&keep)
    }

    /// `tr_B(U x U^dag)`.
    pub fn environment_output(&self, x: &CMatrix) -> Result<Operator> {
        let y = Operator::new(self.full_dims(), linalg::conjugate(&self.matrix, x))?;
        let keep: Vec<usize> = (self.out_dims.len()..self.out_dims.len() + self.env_dims.len()).collect();
        y.partial_trace(&keep)
    }

    fn full_dims(&self) -> Vec<usize> {
        let mut d = self.out_dims.clone();
        d.extend_from_slice(&self.env_dims);
        d
    }
}

#[derive(Clone, Debug)]
pub struct QuantumChannel {
    in_dim: usize,
    out_dims: Vec<usize>,
    kraus: Vec<CMatrix>,
    signs: Vec<f64>,
    env_dims: Vec<usize>,
    choi: Operator,
    cq_outputs: Option<Vec<Operator>>,
    cq_dilation: Option<CqDilation>,
    complementary_of_cq: bool,
}

fn choi_from_kraus(in_dim: usize, out_dims: &[usize], kraus: &[CMatrix], signs: &[f64]) -> Operator {
    let out: usize = out_dims.iter().product();
    let n = in_dim * out;
    let mut omega = CMatrix::zeros(n, n);
    let scale = 1.0 / in_dim as f64;
    for (k, s) in kraus.iter().zip(signs) {
        let w = crate::linalg::CVector::from_fn(n, |r, _| k[(r % out, r / out)]);
        omega += (&w * w.adjoint()) * real(s * scale);
    }
    let mut dims = vec![in_dim];
    dims.extend_from_slice(out_dims);
    Operator::new(dims, linalg::hermitian_part(&omega)).expect("dimensions by construction")
}

impl QuantumChannel {
    fn assemble(in_dim: usize, out_dims: Vec<usize>, kraus: Vec<CMatrix>, signs: Vec<f64>, env_dims: Vec<usize>) -> Self {
        let choi = choi_from_kraus(in_dim, &out_dims, &kraus, &signs);
        Self {
            in_dim,
            out_dims,
            kraus,
            signs,
            env_dims,
            choi,
            cq_outputs: None,
            cq_dilation: None,
            complementary_of_cq: false,
        }
    }

    fn validate_kraus(in_dim: usize, out_dims: &[usize], kraus: &[CMatrix]) -> Result<()> {
        let out: usize = out_dims.iter().product();
        if in_dim == 0 || out == 0 || kraus.is_empty() {
            return Err(Error::Dimension("channel needs positive dimensions and at least one Kraus operator".into()));
        }
        for k in kraus {
            if k.nrows() != out || k.ncols() != in_dim {
                return Err(Error::Dimension(format!(
                    "Kraus operator is {}x{}, expected {out}x{in_dim}",
                    k.nrows(),
                    k.ncols()
                )));
            }
        }
        Ok(())
    }

    /// Trace-preserving channel from Kraus operators `out x in`.
    pub fn from_kraus(kraus: Vec<CMatrix>, in_dim: usize, out_dims: Vec<usize>) -> Result<Self> {
        Self::validate_kraus(in_dim, &out_dims, &kraus)?;
        let ch = Self::from_kraus_unchecked(kraus, in_dim, out_dims)?;
        let defect = ch.trace_preservation_defect();
        if defect > TP_TOL {
            return Err(Error::NotTracePreserving(defect));
        }
        Ok(ch)
    }

    /// Completely positive map without the trace-preservation check
    /// (subnormalized maps arising from smoothing).
    pub fn from_kraus_unchecked(kraus: Vec<CMatrix>, in_dim: usize, out_dims: Vec<usize>) -> Result<Self> {
        Self::validate_kraus(in_dim, &out_dims, &kraus)?;
        let r = kraus.len();
        let signs = vec![1.0; r];
        Ok(Self::assemble(in_dim, out_dims, kraus, signs, vec![r]))
    }

    pub fn identity(d: usize) -> Self {
        Self::assemble(d, vec![d], vec![CMatrix::identity(d, d)], vec![1.0], vec![1])
    }

    /// Completely depolarizing channel `X -> tr(X) 1/d_out`.
    pub fn depolarizing(in_dim: usize, out_dim: usize) -> Self {
        let s = real((1.0 / out_dim as f64).sqrt());
        let mut kraus = Vec::with_capacity(in_dim * out_dim);
        for b in 0..out_dim {
            for i in 0..in_dim {
                let mut k = CMatrix::zeros(out_dim, in_dim);
                k[(b, i)] = s;
                kraus.push(k);
            }
        }
        let r = kraus.len();
        Self::assemble(in_dim, vec![out_dim], kraus, vec![1.0; r], vec![r])
    }

    /// Inverse Choi–Jamiołkowski map. `omega` lives on `[A', B]` with
    /// `A'` of dimension `in_dim`.
    pub fn from_choi(omega: &Operator, in_dim: usize, out_dims: Vec<usize>, positivity: ChoiPositivity) -> Result<Self> {
        let out: usize = out_dims.iter().product();
        if in_dim == 0 || out == 0 || omega.dim() != in_dim * out {
            return Err(Error::Dimension(format!(
                "Choi operator of dimension {} does not match {in_dim} x {out}",
                omega.dim()
            )));
        }
        let h = match positivity {
            ChoiPositivity::Psd => omega.require_psd().map_err(|e| match e {
                Error::NotPsd(_) => Error::NotCompletelyPositive,
                other => other,
            })?,
            ChoiPositivity::Hermitian => omega.hermitize()?,
        };
        let (values, vectors) = linalg::eigh(h.mat());
        let mut kraus = Vec::new();
        let mut signs = Vec::new();
        for (k, &mu) in values.iter().enumerate() {
            if mu.abs() <= KRAUS_CUTOFF {
                continue;
            }
            if positivity == ChoiPositivity::Psd && mu < 0.0 {
                continue;
            }
            let amp = real((in_dim as f64 * mu.abs()).sqrt());
            kraus.push(CMatrix::from_fn(out, in_dim, |b, i| vectors[(i * out + b, k)] * amp));
            signs.push(mu.signum());
        }
        if kraus.is_empty() {
            kraus.push(CMatrix::zeros(out, in_dim));
            signs.push(1.0);
        }
        let r = kraus.len();
        Ok(Self::assemble(in_dim, out_dims, kraus, signs, vec![r]))
    }

    /// Classical-quantum channel `X -> sum_i <i|X|i> rho_i`.
    pub fn cq(outputs: Vec<Operator>) -> Result<Self> {
        let d_a = outputs.len();
        if d_a == 0 {
            return Err(Error::Dimension("a CQ channel needs at least one output".into()));
        }
        let out_dims = outputs[0].dims().to_vec();
        let d_b = outputs[0].dim();
        let mut states = Vec::with_capacity(d_a);
        let mut spectra = Vec::with_capacity(d_a);
        for o in &outputs {
            if o.dim() != d_b {
                return Err(Error::Dimension("CQ outputs differ in dimension".into()));
            }
            let s = o.require_state()?;
            spectra.push(linalg::eigh(s.mat()));
            states.push(s);
        }
        let e_dim = spectra
            .iter()
            .map(|(v, _)| v.iter().filter(|&&x| x > KRAUS_CUTOFF).count())
            .max()
            .unwrap_or(1)
            .max(1);
        // Kraus operators K_{x,e} = sqrt(mu_e^x) |v_e^x><x|, indexed x * e_dim + e.
        let mut kraus = Vec::with_capacity(d_a * e_dim);
        for (x, (values, vectors)) in spectra.iter().enumerate() {
            for e in 0..e_dim {
                let mut k = CMatrix::zeros(d_b, d_a);
                if e < values.len() && values[e] > KRAUS_CUTOFF {
                    let amp = real(values[e].sqrt());
                    for b in 0..d_b {
                        k[(b, x)] = vectors[(b, e)] * amp;
                    }
                }
                kraus.push(k);
            }
        }
        let r = kraus.len();
        let mut ch = Self::assemble(d_a, out_dims, kraus, vec![1.0; r], vec![d_a, e_dim]);
        let mut u = CMatrix::zeros(d_b * d_a * e_dim, d_a);
        for (x, k) in ch.kraus.chunks(e_dim).enumerate() {
            for (e, kk) in k.iter().enumerate() {
                for b in 0..d_b {
                    u[((b * d_a + x) * e_dim + e, x)] = kk[(b, x)];
                }
            }
        }
        ch.cq_dilation = Some(CqDilation { isometry: u, b_dim: d_b, x_dim: d_a, eprime_dim: e_dim });
        ch.cq_outputs = Some(states);
        Ok(ch)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dims(&self) -> &[usize] {
        &self.out_dims
    }

    pub fn out_dim(&self) -> usize {
        self.out_dims.iter().product()
    }

    pub fn env_dims(&self) -> &[usize] {
        &self.env_dims
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn kraus_signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn choi(&self) -> &Operator {
        &self.choi
    }

    pub fn cq_outputs(&self) -> Option<&[Operator]> {
        self.cq_outputs.as_deref()
    }

    pub fn cq_dilation(&self) -> Option<&CqDilation> {
        self.cq_dilation.as_ref()
    }

    pub fn is_completely_positive(&self) -> bool {
        self.signs.iter().all(|&s| s > 0.0)
    }

    /// Built as the complementary channel of a CQ channel; output order `(X, E')`.
    pub fn is_complementary_cq(&self) -> bool {
        self.complementary_of_cq
    }

    /// `|sum_k s_k K_k^dag K_k - 1|_2`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let mut acc = CMatrix::zeros(self.in_dim, self.in_dim);
        for (k, s) in self.kraus.iter().zip(&self.signs) {
            acc += k.adjoint() * k * real(*s);
        }
        (acc - CMatrix::identity(self.in_dim, self.in_dim)).norm()
    }

    /// Off-diagonal weight of the Choi operator in the `A'` index.
    pub fn cq_defect(&self) -> f64 {
        let c = self.choi.classicalize(0).expect("subsystem 0 exists");
        (self.choi.mat() - c.mat()).norm()
    }

    pub fn is_cq(&self) -> bool {
        self.cq_defect() <= 1e-10
    }

    /// `N(x)` for an operator on the input space.
    pub fn apply_matrix(&self, x: &CMatrix) -> CMatrix {
        let out = self.out_dim();
        let mut acc = CMatrix::zeros(out, out);
        for (k, s) in self.kraus.iter().zip(&self.signs) {
            acc += k * x * k.adjoint() * real(*s);
        }
        acc
    }

    pub fn apply(&self, x: &Operator) -> Result<Operator> {
        if x.dim() != self.in_dim {
            return Err(Error::Dimension(format!("input of dimension {} for a map on {}", x.dim(), self.in_dim)));
        }
        Operator::new(self.out_dims.clone(), self.apply_matrix(x.mat()))
    }

    /// `(N ⊗ I)(x)` acting on subsystem `k`; the output subsystems replace
    /// subsystem `k` in place.
    pub fn apply_on(&self, x: &Operator, k: usize) -> Result<Operator> {
        let dims = x.dims().to_vec();
        if k >= dims.len() {
            return Err(Error::SubsystemOutOfRange { index: k, count: dims.len() });
        }
        if dims[k] != self.in_dim {
            return Err(Error::Dimension(format!("subsystem {k} has dimension {}, map expects {}", dims[k], self.in_dim)));
        }
        let mut order = vec![k];
        order.extend((0..dims.len()).filter(|&j| j != k));
        let front = x.permute_subsystems(&order)?;
        let rest: usize = dims.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, d)| d).product();
        let id = CMatrix::identity(rest, rest);
        let out = self.out_dim();
        let mut acc = CMatrix::zeros(out * rest, out * rest);
        for (kk, s) in self.kraus.iter().zip(&self.signs) {
            let big = kk.kronecker(&id);
            acc += &big * front.mat() * big.adjoint() * real(*s);
        }
        let mut new_dims = self.out_dims.clone();
        new_dims.extend(dims.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &d)| d));
        let moved = Operator::new(new_dims, acc)?;
        // Move the output block back to position k.
        let n_out = self.out_dims.len();
        let n_rest = dims.len() - 1;
        let mut back = Vec::with_capacity(n_out + n_rest);
        back.extend(n_out..n_out + k);
        back.extend(0..n_out);
        back.extend(n_out + k..n_out + n_rest);
        moved.permute_subsystems(&back)
    }

    /// `N(|a><b|)` for all `a, b`, indexed `a * d + b`, read off the Choi operator.
    pub fn action_table(&self) -> Vec<CMatrix> {
        let d = self.in_dim;
        let out = self.out_dim();
        let scale = real(d as f64);
        let mut table = Vec::with_capacity(d * d);
        for a in 0..d {
            for b in 0..d {
                table.push(self.choi.mat().view((a * out, b * out), (out, out)) * scale);
            }
        }
        table
    }

    /// Stinespring isometry `A -> B ⊗ E` with `U[(b, k), i] = K_k[b, i]` and
    /// the minimal environment. For CQ channels `E = (X, E')`.
    pub fn stinespring(&self) -> Result<Stinespring> {
        Ok(Stinespring {
            matrix: self.stinespring_matrix()?,
            out_dims: self.out_dims.clone(),
            env_dims: self.env_dims.clone(),
        })
    }

    /// Rectangular isometry matrix `(d_B d_E) x d_A`, output order `B, E`.
    pub fn stinespring_matrix(&self) -> Result<CMatrix> {
        if !self.is_completely_positive() {
            return Err(Error::NotCompletelyPositive);
        }
        let defect = self.trace_preservation_defect();
        if defect > TP_TOL {
            return Err(Error::NotTracePreserving(defect));
        }
        let out = self.out_dim();
        let r = self.kraus.len();
        Ok(CMatrix::from_fn(out * r, self.in_dim, |row, i| self.kraus[row % r][(row / r, i)]))
    }

    /// Complementary channel `X -> tr_B(U X U^dag)` onto the environment.
    pub fn complementary(&self) -> Result<Self> {
        self.stinespring_matrix()?;
        let out = self.out_dim();
        let r = self.kraus.len();
        let kraus: Vec<CMatrix> = (0..out)
            .map(|b| CMatrix::from_fn(r, self.in_dim, |k, i| self.kraus[k][(b, i)]))
            .collect();
        let n = kraus.len();
        let mut ch = Self::assemble(self.in_dim, self.env_dims.clone(), kraus, vec![1.0; n], self.out_dims.clone());
        ch.complementary_of_cq = self.cq_outputs.is_some();
        Ok(ch)
    }

    /// The map whose Choi operator is `C_{A'}(omega)`.
    pub fn classicalized(&self) -> Result<Self> {
        if self.is_completely_positive() && self.trace_preservation_defect() <= TP_TOL {
            let outputs = (0..self.in_dim)
                .map(|i| {
                    let x = Operator::ket_bra(&[self.in_dim], i, i);
                    self.apply(&x)
                })
                .collect::<Result<Vec<_>>>()?;
            return Self::cq(outputs);
        }
        let c = self.choi.classicalize(0)?;
        let pos = if self.is_completely_positive() { ChoiPositivity::Psd } else { ChoiPositivity::Hermitian };
        Self::from_choi(&c, self.in_dim, self.out_dims.clone(), pos)
    }

    /// `|omega - P omega P|_2`, `P = P_{A'X}`, for a map whose first output subsystem is the
    /// classical copy `X` of the input.
    pub fn classical_coherence_defect(&self) -> Result<f64> {
        if self.out_dims.first() != Some(&self.in_dim) {
            return Err(Error::NotClassicallyCoherent(f64::INFINITY));
        }
        coherence_defect(&self.choi, 0, 1)
    }

    /// Largest `|N(|a><b|) - M(|a><b|)|_2` over matrix units.
    pub fn action_distance(&self, other: &Self) -> Result<f64> {
        if self.in_dim != other.in_dim || self.out_dim() != other.out_dim() {
            return Err(Error::Dimension("maps act on different spaces".into()));
        }
        Ok(self
            .action_table()
            .iter()
            .zip(other.action_table())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Tensor power `N^{⊗n}` for a CQ channel, again CQ-structured.
    pub fn cq_tensor_outputs(outputs: &[Operator], sequence: &[usize]) -> Operator {
        let mut acc = outputs[sequence[0]].clone();
        for &x in &sequence[1..] {
            acc = acc.tensor(&outputs[x]);
        }
        acc
    }
}
