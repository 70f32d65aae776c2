//! Seeded generators for test instances. Everything derives from a
//! `ChaCha8Rng`, so the same seed gives the same instance on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{c, real, CMatrix, CVector};
use crate::operator::{Operator, Permutation, PureState};

/// SplitMix64 step, used to derive independent child seeds.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Matrix with iid standard complex Gaussian entries.
    pub fn ginibre(&mut self, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| c(self.normal(), self.normal()))
    }

    pub fn unit_vector(&mut self, d: usize) -> CVector {
        let v = CVector::from_fn(d, |_, _| c(self.normal(), self.normal()));
        let n = v.norm();
        v / real(n)
    }

    /// Random density matrix of the given rank (induced measure).
    pub fn density(&mut self, d: usize, rank: usize) -> Operator {
        let g = self.ginibre(d, rank.max(1));
        let m = &g * g.adjoint();
        let tr = crate::linalg::trace(&m).re;
        Operator::new(vec![d], m / real(tr)).expect("square by construction")
    }

    /// Random density matrix on a multipartite space.
    pub fn density_on(&mut self, dims: &[usize], rank: usize) -> Operator {
        let d: usize = dims.iter().product();
        self.density(d, rank).with_dims(dims.to_vec()).expect("dimension matches")
    }

    pub fn pure_state(&mut self, dims: &[usize]) -> PureState {
        let d: usize = dims.iter().product();
        PureState::new(dims.to_vec(), self.unit_vector(d)).expect("unit vector")
    }

    /// Probability vector drawn from the flat Dirichlet distribution.
    pub fn distribution(&mut self, k: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..k).map(|_| -(1.0 - self.uniform()).ln()).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    }

    /// Random Hermitian matrix with Gaussian entries.
    pub fn hermitian(&mut self, d: usize) -> CMatrix {
        let g = self.ginibre(d, d);
        (&g + g.adjoint()) * real(0.5)
    }

    /// Kraus operators of a random channel `in_dim -> out_dim` with `k` Kraus
    /// terms, from a Haar-like isometry `C^in -> C^out ⊗ C^k`. `k` is raised
    /// to `ceil(in / out)` when needed for the isometry to exist.
    pub fn kraus_channel(&mut self, in_dim: usize, out_dim: usize, k: usize) -> Vec<CMatrix> {
        let k = k.max(in_dim.div_ceil(out_dim)).max(1);
        let g = self.ginibre(out_dim * k, in_dim);
        let q = g.qr().q();
        (0..k)
            .map(|e| CMatrix::from_fn(out_dim, in_dim, |b, i| q[(b * k + e, i)]))
            .collect()
    }

    pub fn permutation(&mut self, d: usize) -> Permutation {
        Permutation::random(d, &mut self.rng)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Output states of a random CQ channel `d_a -> d_b`, each of random rank.
    pub fn cq_outputs(&mut self, d_a: usize, d_b: usize) -> Vec<Operator> {
        (0..d_a)
            .map(|_| {
                let rank = 1 + self.index(d_b);
                self.density(d_b, rank)
            })
            .collect()
    }

    /// Random state on `[X, X', rest...]` supported on `span{|x x>} ⊗ rest`.
    pub fn coherent_classical(&mut self, dx: usize, rest: &[usize], rank: usize) -> Operator {
        let r: usize = rest.iter().product();
        let tau = self.density(dx * r, rank);
        let mut v = CMatrix::zeros(dx * dx * r, dx * r);
        for x in 0..dx {
            for a in 0..r {
                v[((x * dx + x) * r + a, x * r + a)] = real(1.0);
            }
        }
        let mut dims = vec![dx, dx];
        dims.extend_from_slice(rest);
        Operator::new(dims, &v * tau.mat() * v.adjoint()).expect("dimension matches")
    }
}
