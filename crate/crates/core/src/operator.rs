//! Dense operators on tensor-product Hilbert spaces.
//!
//! An [`Operator`] is a square complex matrix together with the list of
//! subsystem dimensions it acts on; indices are row-major over the
//! subsystem multi-index, so the last subsystem varies fastest.

use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix, CVector, C64, HERMITIAN_TOL, PSD_FLOOR};

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dims: Vec<usize>,
    mat: CMatrix,
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::Dimension(format!("invalid subsystem dimensions {dims:?}")));
    }
    Ok(dims.iter().product())
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// For each flat index of the permuted space, the flat index in the original
/// space. New subsystem `k` is old subsystem `order[k]`.
pub(crate) fn permutation_index_map(dims: &[usize], order: &[usize]) -> Vec<usize> {
    let old_strides = strides(dims);
    let new_dims: Vec<usize> = order.iter().map(|&k| dims[k]).collect();
    let total: usize = dims.iter().product();
    let mut map = vec![0; total];
    let mut digits = vec![0usize; new_dims.len()];
    for slot in map.iter_mut() {
        *slot = digits
            .iter()
            .zip(order)
            .map(|(&d, &k)| d * old_strides[k])
            .sum();
        for pos in (0..digits.len()).rev() {
            digits[pos] += 1;
            if digits[pos] < new_dims[pos] {
                break;
            }
            digits[pos] = 0;
        }
    }
    map
}

impl Operator {
    pub fn new(dims: Vec<usize>, mat: CMatrix) -> Result<Self> {
        let n = check_dims(&dims)?;
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, dims {dims:?} require {n}x{n}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { dims, mat })
    }

    pub fn identity(dims: &[usize]) -> Self {
        let n: usize = dims.iter().product();
        Self { dims: dims.to_vec(), mat: CMatrix::identity(n, n) }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let n: usize = dims.iter().product();
        Self { dims: dims.to_vec(), mat: CMatrix::zeros(n, n) }
    }

    /// Completely mixed state `1/d`.
    pub fn maximally_mixed(dims: &[usize]) -> Self {
        let n: usize = dims.iter().product();
        Self { dims: dims.to_vec(), mat: CMatrix::identity(n, n) * real(1.0 / n as f64) }
    }

    pub fn from_real_diagonal(dims: &[usize], diag: &[f64]) -> Result<Self> {
        let n = check_dims(dims)?;
        if diag.len() != n {
            return Err(Error::Dimension(format!("diagonal of length {} for dimension {n}", diag.len())));
        }
        let v = CVector::from_iterator(n, diag.iter().map(|&x| real(x)));
        Ok(Self { dims: dims.to_vec(), mat: CMatrix::from_diagonal(&v) })
    }

    /// `|i><j|` in the computational basis.
    pub fn ket_bra(dims: &[usize], i: usize, j: usize) -> Self {
        let mut op = Self::zeros(dims);
        op.mat[(i, j)] = real(1.0);
        op
    }

    /// Projector `|v><v|`.
    pub fn projector(dims: &[usize], v: &CVector) -> Result<Self> {
        Self::new(dims.to_vec(), v * v.adjoint())
    }

    /// Maximally entangled state `Phi = (1/d) sum_ij |ii><jj|` on two copies of `C^d`.
    pub fn max_entangled(d: usize) -> Self {
        let mut v = CVector::zeros(d * d);
        for i in 0..d {
            v[i * d + i] = real(1.0);
        }
        let mat = (&v * v.adjoint()) * real(1.0 / d as f64);
        Self { dims: vec![d, d], mat }
    }

    /// Maximally classically correlated state `T = (1/d) sum_i |ii><ii|`.
    pub fn max_classical(d: usize) -> Self {
        let mut op = Self::zeros(&[d, d]);
        for i in 0..d {
            op.mat[(i * d + i, i * d + i)] = real(1.0 / d as f64);
        }
        op
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn num_subsystems(&self) -> usize {
        self.dims.len()
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_mat(self) -> CMatrix {
        self.mat
    }

    /// Relabel the subsystem structure without touching the entries.
    pub fn with_dims(self, dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, self.mat)
    }

    /// Merge all subsystems into one.
    pub fn flattened(&self) -> Self {
        Self { dims: vec![self.dim()], mat: self.mat.clone() }
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.mat)
    }

    pub fn trace_re(&self) -> f64 {
        self.trace().re
    }

    pub fn adjoint(&self) -> Self {
        Self { dims: self.dims.clone(), mat: self.mat.adjoint() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { dims: self.dims.clone(), mat: &self.mat * real(s) }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self { dims: self.dims.clone(), mat: &self.mat + &other.mat })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self { dims: self.dims.clone(), mat: &self.mat - &other.mat })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self { dims: self.dims.clone(), mat: &self.mat * &other.mat })
    }

    /// `b x b^dag` for a square `b` on the same space.
    pub fn conjugate_by(&self, b: &CMatrix) -> Result<Self> {
        if b.nrows() != self.dim() || b.ncols() != self.dim() {
            return Err(Error::Dimension("conjugating matrix does not match operator".into()));
        }
        Ok(Self { dims: self.dims.clone(), mat: linalg::conjugate(b, &self.mat) })
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }

    /// Kronecker product; subsystem lists are concatenated.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims, mat: self.mat.kronecker(&other.mat) }
    }

    /// `x^{⊗n}` on `n` copies, subsystems in copy-major order.
    pub fn tensor_power(&self, n: usize) -> Self {
        let mut out = self.clone();
        for _ in 1..n.max(1) {
            out = out.tensor(self);
        }
        out
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.dims.len() {
            return Err(Error::SubsystemOutOfRange { index: k, count: self.dims.len() });
        }
        Ok(())
    }

    /// Reorder subsystems: new subsystem `k` is old subsystem `order[k]`.
    pub fn permute_subsystems(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.dims.len() {
            return Err(Error::NotBijection(self.dims.len()));
        }
        let mut seen = vec![false; order.len()];
        for &k in order {
            self.check_index(k)?;
            if seen[k] {
                return Err(Error::NotBijection(self.dims.len()));
            }
            seen[k] = true;
        }
        let map = permutation_index_map(&self.dims, order);
        let n = self.dim();
        let mat = CMatrix::from_fn(n, n, |r, c| self.mat[(map[r], map[c])]);
        Ok(Self { dims: order.iter().map(|&k| self.dims[k]).collect(), mat })
    }

    /// Trace out every subsystem not in `keep`. Kept subsystems retain their
    /// original relative order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        for &k in keep {
            self.check_index(k)?;
        }
        let mut kept: Vec<usize> = keep.to_vec();
        kept.sort_unstable();
        kept.dedup();
        if kept.is_empty() {
            return Ok(Self { dims: vec![1], mat: CMatrix::from_element(1, 1, self.trace()) });
        }
        let traced: Vec<usize> = (0..self.dims.len()).filter(|k| !kept.contains(k)).collect();
        let mut order = kept.clone();
        order.extend_from_slice(&traced);
        let map = permutation_index_map(&self.dims, &order);
        let dk: usize = kept.iter().map(|&k| self.dims[k]).product();
        let dt: usize = traced.iter().map(|&k| self.dims[k]).product();
        let mut mat = CMatrix::zeros(dk, dk);
        for r in 0..dk {
            for col in 0..dk {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..dt {
                    acc += self.mat[(map[r * dt + t], map[col * dt + t])];
                }
                mat[(r, col)] = acc;
            }
        }
        Ok(Self { dims: kept.iter().map(|&k| self.dims[k]).collect(), mat })
    }

    /// Trace out the given subsystems.
    pub fn trace_out(&self, traced: &[usize]) -> Result<Self> {
        for &k in traced {
            self.check_index(k)?;
        }
        let keep: Vec<usize> = (0..self.dims.len()).filter(|k| !traced.contains(k)).collect();
        self.partial_trace(&keep)
    }

    /// Group subsystems into two blocks `[left..., right...]` and reshape to a
    /// bipartite operator with dims `[d_left, d_right]`.
    pub fn bipartite(&self, left: &[usize]) -> Result<Self> {
        for &k in left {
            self.check_index(k)?;
        }
        let right: Vec<usize> = (0..self.dims.len()).filter(|k| !left.contains(k)).collect();
        let mut order = left.to_vec();
        order.extend_from_slice(&right);
        let p = self.permute_subsystems(&order)?;
        let dl: usize = left.iter().map(|&k| self.dims[k]).product();
        let dr: usize = right.iter().map(|&k| self.dims[k]).product();
        p.with_dims(vec![dl, dr])
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.mat)
    }

    /// Symmetrize a numerically Hermitian operator; reject anything else.
    pub fn hermitize(&self) -> Result<Self> {
        let defect = self.hermiticity_defect();
        if defect >= HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self { dims: self.dims.clone(), mat: linalg::hermitian_part(&self.mat) })
    }

    /// Eigenvalues (nonincreasing) and eigenvectors of a Hermitian operator.
    pub fn eigh(&self) -> Result<(Vec<f64>, CMatrix)> {
        let h = self.hermitize()?;
        Ok(linalg::eigh(&h.mat))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eigh()?.0)
    }

    /// Check positivity with the `-1e-9` floor; returns the Hermitized operator.
    pub fn require_psd(&self) -> Result<Self> {
        let h = self.hermitize()?;
        let min = linalg::min_eigenvalue(&h.mat);
        if min < -PSD_FLOOR {
            return Err(Error::NotPsd(min));
        }
        Ok(h)
    }

    pub fn is_psd(&self) -> bool {
        self.require_psd().is_ok()
    }

    /// Require a subnormalized state: PSD with trace at most `1 + 1e-9`.
    pub fn require_subnormalized(&self) -> Result<Self> {
        let h = self.require_psd()?;
        let tr = h.trace_re();
        if tr > 1.0 + 1e-9 {
            return Err(Error::TraceTooLarge(tr));
        }
        Ok(h)
    }

    /// Require a normalized state.
    pub fn require_state(&self) -> Result<Self> {
        let h = self.require_psd()?;
        let tr = h.trace_re();
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        Ok(h)
    }

    pub fn schatten_norm(&self, p: Schatten) -> f64 {
        match p {
            Schatten::One => linalg::trace_norm(&self.mat),
            Schatten::Two => linalg::hs_norm_sq(&self.mat).sqrt(),
        }
    }

    pub fn trace_norm(&self) -> f64 {
        self.schatten_norm(Schatten::One)
    }

    /// Pinch subsystem `k` in the computational basis.
    pub fn classicalize(&self, k: usize) -> Result<Self> {
        self.check_index(k)?;
        let map_dims = &self.dims;
        let s = strides(map_dims);
        let d = map_dims[k];
        let n = self.dim();
        let digit = |idx: usize| (idx / s[k]) % d;
        let mat = CMatrix::from_fn(n, n, |r, col| {
            if digit(r) == digit(col) {
                self.mat[(r, col)]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Ok(Self { dims: self.dims.clone(), mat })
    }

    /// Pinch subsystem `k` in an arbitrary orthonormal basis.
    pub fn classicalize_in(&self, k: usize, basis: &[CVector]) -> Result<Self> {
        self.check_index(k)?;
        let d = self.dims[k];
        check_orthonormal_basis(basis, d)?;
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for v in basis {
            let proj = embed_on(&self.dims, k, &(v * v.adjoint()));
            out += &proj * &self.mat * &proj;
        }
        Ok(Self { dims: self.dims.clone(), mat: out })
    }

    /// Embed a local matrix acting on subsystem `k` as `1 ⊗ .. ⊗ m ⊗ .. ⊗ 1`.
    pub fn local(dims: &[usize], k: usize, m: &CMatrix) -> Result<Self> {
        if k >= dims.len() {
            return Err(Error::SubsystemOutOfRange { index: k, count: dims.len() });
        }
        if m.nrows() != dims[k] || m.ncols() != dims[k] {
            return Err(Error::Dimension("local operator does not match subsystem".into()));
        }
        Self::new(dims.to_vec(), embed_on(dims, k, m))
    }
}

pub(crate) fn embed_on(dims: &[usize], k: usize, m: &CMatrix) -> CMatrix {
    let before: usize = dims[..k].iter().product();
    let after: usize = dims[k + 1..].iter().product();
    CMatrix::identity(before, before)
        .kronecker(m)
        .kronecker(&CMatrix::identity(after, after))
}

fn check_orthonormal_basis(basis: &[CVector], d: usize) -> Result<()> {
    if basis.len() != d || basis.iter().any(|v| v.len() != d) {
        return Err(Error::NotOrthonormal(f64::INFINITY));
    }
    let mut worst: f64 = 0.0;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a.dotc(b) - real(target)).norm());
        }
    }
    if worst > 1e-9 {
        return Err(Error::NotOrthonormal(worst));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schatten {
    One,
    Two,
}

/// `F(rho, sigma) = |sqrt(rho) sqrt(sigma)|_1`.
pub fn fidelity(rho: &Operator, sigma: &Operator) -> Result<f64> {
    let r = rho.require_psd()?;
    let s = sigma.require_psd()?;
    if r.dim() != s.dim() {
        return Err(Error::Dimension("fidelity arguments differ in dimension".into()));
    }
    let prod = linalg::psd_sqrt(r.mat()) * linalg::psd_sqrt(s.mat());
    Ok(linalg::singular_values(&prod).iter().sum())
}

/// Generalized fidelity `F + sqrt((1 - tr rho)(1 - tr sigma))`.
pub fn generalized_fidelity(rho: &Operator, sigma: &Operator) -> Result<f64> {
    let r = rho.require_subnormalized()?;
    let s = sigma.require_subnormalized()?;
    let f = fidelity(&r, &s)?;
    let slack = ((1.0 - r.trace_re()).max(0.0) * (1.0 - s.trace_re()).max(0.0)).sqrt();
    Ok(f + slack)
}

/// Purified distance `sqrt(1 - Fbar^2)` between subnormalized states.
pub fn purified_distance(rho: &Operator, sigma: &Operator) -> Result<f64> {
    let f = generalized_fidelity(rho, sigma)?.min(1.0);
    Ok((1.0 - f * f).max(0.0).sqrt())
}

/// Swap operator `F = sum_ij |i><j| ⊗ |j><i|` on `C^d ⊗ C^d`.
pub fn swap_operator(d: usize) -> Operator {
    let mut op = Operator::zeros(&[d, d]);
    for i in 0..d {
        for j in 0..d {
            op.mat[(i * d + j, j * d + i)] = real(1.0);
        }
    }
    op
}

/// A bijection of `0..d`, stored as its image list: `self[i] = pi(i)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let d = images.len();
        let mut seen = vec![false; d];
        for &x in &images {
            if x >= d || seen[x] {
                return Err(Error::NotBijection(d));
            }
            seen[x] = true;
        }
        Ok(Self(images))
    }

    pub fn identity(d: usize) -> Self {
        Self((0..d).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Self) -> Self {
        Self(other.0.iter().map(|&i| self.0[i]).collect())
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p] = i;
        }
        Self(inv)
    }

    /// Advance to the lexicographically next permutation; `false` at the last one.
    pub fn next_lexicographic(&mut self) -> bool {
        let v = &mut self.0;
        if v.len() < 2 {
            return false;
        }
        let mut i = v.len() - 1;
        while i > 0 && v[i - 1] >= v[i] {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        let mut j = v.len() - 1;
        while v[j] <= v[i - 1] {
            j -= 1;
        }
        v.swap(i - 1, j);
        v[i..].reverse();
        true
    }

    /// All `d!` permutations in lexicographic order.
    pub fn all(d: usize) -> Vec<Self> {
        let mut p = Self::identity(d);
        let mut out = vec![p.clone()];
        while p.next_lexicographic() {
            out.push(p.clone());
        }
        out
    }

    /// Uniformly random permutation by Fisher–Yates shuffle.
    pub fn random<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        use rand::seq::SliceRandom;
        let mut v: Vec<usize> = (0..d).collect();
        v.shuffle(rng);
        Self(v)
    }

    /// Cycle notation with fixed points omitted, e.g. `(0 2 1)(3 4)`; the
    /// identity prints as `()`.
    pub fn cycle_notation(&self) -> String {
        let mut seen = vec![false; self.0.len()];
        let mut out = String::new();
        for start in 0..self.0.len() {
            if seen[start] || self.0[start] == start {
                seen[start] = true;
                continue;
            }
            let mut cycle = Vec::new();
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                cycle.push(x.to_string());
                x = self.0[x];
            }
            out.push('(');
            out.push_str(&cycle.join(" "));
            out.push(')');
        }
        if out.is_empty() {
            out.push_str("()");
        }
        out
    }
}

impl std::fmt::Display for Permutation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.cycle_notation())
    }
}

/// Matrix of `P(pi)` in the computational basis: `P|i> = |pi(i)>`.
pub fn permutation_matrix(pi: &Permutation) -> CMatrix {
    let d = pi.len();
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m[(pi.apply(i), i)] = real(1.0);
    }
    m
}

/// `P(pi)` with `P|b_i> = |b_pi(i)>` for an orthonormal basis `b`.
pub fn permutation_operator(pi: &Permutation, basis: &[CVector]) -> Result<Operator> {
    let d = pi.len();
    check_orthonormal_basis(basis, d)?;
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m += &basis[pi.apply(i)] * basis[i].adjoint();
    }
    Operator::new(vec![d], m)
}

pub fn computational_basis(d: usize) -> Vec<CVector> {
    (0..d)
        .map(|i| {
            let mut v = CVector::zeros(d);
            v[i] = real(1.0);
            v
        })
        .collect()
}

/// A (possibly subnormalized) pure state vector on a tensor-product space.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    dims: Vec<usize>,
    amps: CVector,
}

impl PureState {
    pub fn new(dims: Vec<usize>, amps: CVector) -> Result<Self> {
        let n = check_dims(&dims)?;
        if amps.len() != n {
            return Err(Error::Dimension(format!("vector of length {} for dims {dims:?}", amps.len())));
        }
        let norm_sq = amps.norm_squared();
        if norm_sq <= 0.0 || norm_sq > 1.0 + 1e-9 {
            return Err(Error::InvalidState(format!("squared norm {norm_sq} outside (0, 1]")));
        }
        Ok(Self { dims, amps })
    }

    /// `sum_i sqrt(w_i) |i>_A |i>_R` with `A` of dimension `d_a` and `R` of
    /// dimension `weights.len()`.
    pub fn schmidt_aligned(d_a: usize, weights: &[f64]) -> Result<Self> {
        let k = weights.len();
        if k == 0 || k > d_a {
            return Err(Error::Dimension(format!("{k} Schmidt weights for input dimension {d_a}")));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidDistribution("negative Schmidt weight".into()));
        }
        let mut amps = CVector::zeros(d_a * k);
        for (i, &w) in weights.iter().enumerate() {
            amps[i * k + i] = real(w.sqrt());
        }
        Self::new(vec![d_a, k], amps)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn density(&self) -> Operator {
        Operator { dims: self.dims.clone(), mat: &self.amps * self.amps.adjoint() }
    }

    fn split_dims(&self, split: usize) -> Result<(usize, usize)> {
        if split == 0 || split >= self.dims.len() {
            return Err(Error::SubsystemOutOfRange { index: split, count: self.dims.len() });
        }
        Ok((self.dims[..split].iter().product(), self.dims[split..].iter().product()))
    }

    /// Amplitude matrix `M[a, b] = <a b|psi>` for the cut after `split` subsystems.
    pub fn amplitude_matrix(&self, split: usize) -> Result<CMatrix> {
        let (da, db) = self.split_dims(split)?;
        Ok(CMatrix::from_fn(da, db, |a, b| self.amps[a * db + b]))
    }

    pub fn schmidt_decompose(&self, split: usize) -> Result<SchmidtForm> {
        let m = self.amplitude_matrix(split)?;
        let svd = m.clone().svd(true, true);
        let u = svd.u.ok_or_else(|| Error::Solver("SVD did not return U".into()))?;
        let vt = svd.v_t.ok_or_else(|| Error::Solver("SVD did not return V^T".into()))?;
        let r = svd.singular_values.len();
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .partial_cmp(&svd.singular_values[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let coefficients = order.iter().map(|&k| svd.singular_values[k]).collect();
        let left = order.iter().map(|&k| u.column(k).into_owned()).collect();
        let right = order.iter().map(|&k| vt.row(k).transpose()).collect();
        Ok(SchmidtForm { coefficients, left, right })
    }

    /// Apply a linear map `v: C^{d_tail} -> C^{d_out}` to everything after
    /// `split`; the tail subsystems are replaced by one of dimension `d_out`.
    pub fn apply_to_tail(&self, split: usize, v: &CMatrix) -> Result<Self> {
        let (_, db) = self.split_dims(split)?;
        if v.ncols() != db {
            return Err(Error::Dimension("map does not match the tail dimension".into()));
        }
        let m = self.amplitude_matrix(split)?;
        let out = m * v.transpose();
        let dc = v.nrows();
        let mut dims = self.dims[..split].to_vec();
        dims.push(dc);
        let amps = CVector::from_iterator(out.len(), (0..out.nrows()).flat_map(|a| (0..dc).map(move |c| (a, c))).map(|(a, c)| out[(a, c)]));
        Ok(Self { dims, amps })
    }
}

/// Schmidt coefficients (square roots of the reduced spectrum) and bases.
#[derive(Clone, Debug)]
pub struct SchmidtForm {
    pub coefficients: Vec<f64>,
    pub left: Vec<CVector>,
    pub right: Vec<CVector>,
}

impl SchmidtForm {
    pub fn rank(&self, tol: f64) -> usize {
        self.coefficients.iter().filter(|&&c| c > tol).count()
    }

    pub fn reconstruct(&self) -> CVector {
        let da = self.left.first().map_or(0, |v| v.len());
        let db = self.right.first().map_or(0, |v| v.len());
        let mut out = CVector::zeros(da * db);
        for ((&s, u), w) in self.coefficients.iter().zip(&self.left).zip(&self.right) {
            out += u.kronecker(w) * real(s);
        }
        out
    }
}

/// Result of [`uhlmann_isometry`].
#[derive(Clone, Debug)]
pub struct UhlmannIsometry {
    /// `d_C x d_B` matrix of the map `B -> C`.
    pub map: CMatrix,
    /// `|<psi|(1 ⊗ V)|phi>|`, equal to the fidelity of the shared marginals.
    pub overlap: f64,
    /// Whether `map` is a full isometry (`V^dag V = 1_B`).
    pub isometric: bool,
}

/// Partial isometry `V: B -> C` maximizing `|<psi|(1_A ⊗ V)|phi>|`, where the
/// first `split` subsystems of both states form the shared system `A`.
///
/// Built from the SVD of the cross overlap `Psi^dag Phi`. When `d_C >= d_B`
/// the singular vectors with vanishing singular value are completed by
/// Gram–Schmidt on the canonical basis so that `V` is a full isometry.
pub fn uhlmann_isometry(phi: &PureState, psi: &PureState, split: usize) -> Result<UhlmannIsometry> {
    if phi.dims.get(..split) != psi.dims.get(..split) {
        return Err(Error::Dimension("purifications disagree on the shared system".into()));
    }
    let phi_m = phi.amplitude_matrix(split)?;
    let psi_m = psi.amplitude_matrix(split)?;
    let (db, dc) = (phi_m.ncols(), psi_m.ncols());
    let rank_b = phi.schmidt_decompose(split)?.rank(1e-12);
    if dc < rank_b {
        return Err(Error::DimensionTooSmall { required: rank_b, available: dc });
    }
    let q = psi_m.adjoint() * &phi_m;
    let svd = q.clone().svd(true, true);
    let w = svd.u.ok_or_else(|| Error::Solver("SVD did not return U".into()))?;
    let zt = svd.v_t.ok_or_else(|| Error::Solver("SVD did not return V^T".into()))?;
    let s = &svd.singular_values;
    let scale = s.iter().fold(0.0f64, |m, &x| m.max(x));
    let tol = 1e-12 * scale.max(1e-300);
    let mut kept: Vec<usize> = (0..s.len()).filter(|&k| s[k] > tol).collect();
    kept.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(std::cmp::Ordering::Equal));
    let w_cols: Vec<CVector> = kept.iter().map(|&k| w.column(k).into_owned()).collect();
    let z_cols: Vec<CVector> = kept.iter().map(|&k| zt.row(k).adjoint()).collect();
    let target = if dc >= db { db } else { kept.len() };
    let w_full = linalg::gram_schmidt_complete(&w_cols, dc, target);
    let z_full = linalg::gram_schmidt_complete(&z_cols, db, target);
    let mut map = CMatrix::zeros(dc, db);
    for (wk, zk) in w_full.iter().zip(&z_full) {
        map += wk.map(|x| x.conj()) * zk.transpose();
    }
    let overlap = psi.amps.dotc(&phi.apply_to_tail(split, &map)?.amps).norm();
    Ok(UhlmannIsometry { map, overlap, isometric: dc >= db })
}

/// `P = sum_x |x><x|_i ⊗ |x><x|_j ⊗ 1_rest` for two subsystems of equal dimension.
pub fn coherence_projector(dims: &[usize], i: usize, j: usize) -> Result<Operator> {
    check_dims(dims)?;
    for &k in &[i, j] {
        if k >= dims.len() {
            return Err(Error::SubsystemOutOfRange { index: k, count: dims.len() });
        }
    }
    if i == j {
        return Err(Error::EqualIndices(i));
    }
    if dims[i] != dims[j] {
        return Err(Error::Dimension(format!("subsystems {i} and {j} differ in dimension")));
    }
    let s = strides(dims);
    let mut op = Operator::zeros(dims);
    for r in 0..op.dim() {
        if (r / s[i]) % dims[i] == (r / s[j]) % dims[j] {
            op.mat[(r, r)] = real(1.0);
        }
    }
    Ok(op)
}

/// `|x - P x P|_2` with `P` from [`coherence_projector`]; zero iff `x` is
/// supported on the span of `|xx>`, i.e. coherent classical on the two subsystems.
pub fn coherence_defect(x: &Operator, i: usize, j: usize) -> Result<f64> {
    let p = coherence_projector(x.dims(), i, j)?;
    let inside = p.mat() * x.mat() * p.mat();
    Ok((x.mat() - inside).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::Sampler;

    fn diag(d: &[f64]) -> Operator {
        Operator::from_real_diagonal(&[d.len()], d).unwrap()
    }

    #[test]
    fn tensor_of_identities_and_diagonals() {
        let i6 = Operator::identity(&[2]).tensor(&Operator::identity(&[3]));
        assert_eq!(i6.mat(), &CMatrix::identity(6, 6));
        assert_eq!(i6.dims(), &[2, 3]);
        let p = diag(&[1.0, 0.0]).tensor(&diag(&[0.0, 1.0]));
        assert_eq!(p.mat(), diag(&[0.0, 1.0, 0.0, 0.0]).mat());
    }

    #[test]
    fn partial_trace_of_product_and_bell() {
        let mut s = Sampler::new(3);
        let rho = s.density(3, 3);
        let sigma = s.density(2, 2);
        let reduced = rho.tensor(&sigma).partial_trace(&[0]).unwrap();
        assert!((reduced.mat() - rho.mat()).norm() < 1e-12);
        let pi = Operator::max_entangled(2).partial_trace(&[0]).unwrap();
        assert!((pi.mat() - Operator::maximally_mixed(&[2]).mat()).norm() < 1e-15);
        assert!(matches!(rho.partial_trace(&[2]), Err(Error::SubsystemOutOfRange { .. })));
    }

    #[test]
    fn partial_trace_of_middle_subsystem() {
        let mut s = Sampler::new(5);
        let a = s.density(2, 2);
        let b = s.density(3, 2);
        let cc = s.density(2, 1);
        let abc = a.tensor(&b).tensor(&cc);
        let ac = abc.partial_trace(&[0, 2]).unwrap();
        assert!((ac.mat() - a.tensor(&cc).mat()).norm() < 1e-12);
    }

    #[test]
    fn permute_subsystems_swaps_kronecker_order() {
        let mut s = Sampler::new(11);
        let a = s.density(2, 2);
        let b = s.density(3, 3);
        let ba = a.tensor(&b).permute_subsystems(&[1, 0]).unwrap();
        assert!((ba.mat() - b.tensor(&a).mat()).norm() < 1e-14);
        assert_eq!(ba.dims(), &[3, 2]);
    }

    #[test]
    fn schatten_norms_of_identity_and_rank_one() {
        let id = Operator::identity(&[5]);
        assert!((id.schatten_norm(Schatten::One) - 5.0).abs() < 1e-12);
        assert!((id.schatten_norm(Schatten::Two) - 5f64.sqrt()).abs() < 1e-12);
        let mut s = Sampler::new(2);
        let v = s.unit_vector(4);
        let w = s.unit_vector(4);
        let op = Operator::new(vec![4], &v * w.adjoint()).unwrap();
        assert!((op.schatten_norm(Schatten::One) - 1.0).abs() < 1e-12);
        assert!((op.schatten_norm(Schatten::Two) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let zero = diag(&[1.0, 0.0]);
        let one = diag(&[0.0, 1.0]);
        assert!((fidelity(&zero, &zero).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&zero, &one).unwrap().abs() < 1e-12);
        let mixed = Operator::maximally_mixed(&[2]);
        assert!((fidelity(&mixed, &zero).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(matches!(fidelity(&diag(&[1.0, -0.1]), &zero), Err(Error::NotPsd(_))));
    }

    #[test]
    fn purified_distance_pure_states() {
        let mut s = Sampler::new(9);
        let v = s.unit_vector(3);
        let w = s.unit_vector(3);
        let overlap = v.dotc(&w).norm();
        let pv = Operator::projector(&[3], &v).unwrap();
        let pw = Operator::projector(&[3], &w).unwrap();
        let p = purified_distance(&pv, &pw).unwrap();
        assert!((p - (1.0 - overlap * overlap).sqrt()).abs() < 1e-8);
        assert!(purified_distance(&pv, &pv).unwrap() < 1e-6);
        assert!(matches!(purified_distance(&pv.scale(1.5), &pw), Err(Error::TraceTooLarge(_))));
    }

    #[test]
    fn schmidt_of_bell_and_product() {
        let h = 0.5f64.sqrt();
        let bell = PureState::new(vec![2, 2], CVector::from_vec(vec![real(h), real(0.0), real(0.0), real(h)])).unwrap();
        let form = bell.schmidt_decompose(1).unwrap();
        assert!((form.coefficients[0] - h).abs() < 1e-12 && (form.coefficients[1] - h).abs() < 1e-12);
        let mut s = Sampler::new(4);
        let a = s.unit_vector(2);
        let b = s.unit_vector(3);
        let prod = PureState::new(vec![2, 3], a.kronecker(&b)).unwrap();
        let form = prod.schmidt_decompose(1).unwrap();
        assert!((form.coefficients[0] - 1.0).abs() < 1e-12);
        assert_eq!(form.rank(1e-10), 1);
    }

    #[test]
    fn classicalize_examples() {
        let plus = CVector::from_vec(vec![real(0.5f64.sqrt()), real(0.5f64.sqrt())]);
        let p = Operator::projector(&[2], &plus).unwrap();
        let c = p.classicalize(0).unwrap();
        assert!((c.mat() - Operator::maximally_mixed(&[2]).mat()).norm() < 1e-15);
        assert_eq!(c.classicalize(0).unwrap(), c);
        let t = Operator::max_entangled(2).classicalize(0).unwrap();
        assert!((t.mat() - Operator::max_classical(2).mat()).norm() < 1e-15);
    }

    #[test]
    fn classicalize_in_rejects_non_orthonormal_basis() {
        let x = Operator::identity(&[2]);
        let bad = vec![CVector::from_vec(vec![real(1.0), real(0.0)]), CVector::from_vec(vec![real(1.0), real(1.0)])];
        assert!(matches!(x.classicalize_in(0, &bad), Err(Error::NotOrthonormal(_))));
        let hadamard = vec![
            CVector::from_vec(vec![real(0.5f64.sqrt()), real(0.5f64.sqrt())]),
            CVector::from_vec(vec![real(0.5f64.sqrt()), real(-(0.5f64.sqrt()))]),
        ];
        let plus = Operator::projector(&[2], &hadamard[0]).unwrap();
        let c = plus.classicalize_in(0, &hadamard).unwrap();
        assert!((c.mat() - plus.mat()).norm() < 1e-14);
    }

    #[test]
    fn permutation_operators() {
        assert_eq!(permutation_matrix(&Permutation::identity(4)), CMatrix::identity(4, 4));
        let swap = Permutation::new(vec![1, 0]).unwrap();
        let x = permutation_matrix(&swap);
        assert_eq!(x, CMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)]));
        assert!(matches!(Permutation::new(vec![0, 0]), Err(Error::NotBijection(2))));
        let p = Permutation::new(vec![2, 0, 1, 3]).unwrap();
        assert_eq!(p.cycle_notation(), "(0 2 1)");
        assert_eq!(Permutation::identity(3).cycle_notation(), "()");
        assert_eq!(Permutation::all(4).len(), 24);
    }

    #[test]
    fn swap_operator_is_involution() {
        let f = swap_operator(3);
        assert!((f.trace_re() - 3.0).abs() < 1e-15);
        assert_eq!(f.matmul(&f).unwrap().mat(), &CMatrix::identity(9, 9));
    }

    #[test]
    fn uhlmann_for_identical_purifications() {
        let mut s = Sampler::new(21);
        let phi = s.pure_state(&[3, 3]);
        let u = uhlmann_isometry(&phi, &phi, 1).unwrap();
        assert!((u.overlap - 1.0).abs() < 1e-10);
        assert!(u.isometric);
        assert!(linalg::isometry_defect(&u.map) < 1e-10);
    }

    #[test]
    fn uhlmann_rejects_small_target() {
        let mut s = Sampler::new(22);
        let phi = s.pure_state(&[3, 3]);
        let psi = s.pure_state(&[3, 1]);
        assert!(matches!(uhlmann_isometry(&phi, &psi, 1), Err(Error::DimensionTooSmall { .. })));
    }
}
