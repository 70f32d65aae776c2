//! Seeded verification suite: every theorem check on random instances, with
//! a reduced-size quick mode.

use std::time::Instant;

use serde::Serialize;

use crate::channel::QuantumChannel;
use crate::coding::{best_permutation_search, error_probability, theorem4_bound, MessageEnsemble, SearchMode};
use crate::dequantizer::{
    counting_average, counting_average_bruteforce, dequantize_lhs, dequantize_report, prop2_lhs_bruteforce,
    prop2_rhs_closedform, theorem1_bound, theorem3_bound, DequantizeMode,
};
use crate::entropy::{cq_optimizer_structure_check, hmax_cond, hmax_projection_check, hmin_cond, Cut};
use crate::error::Result;
use crate::linalg::{c, real, CMatrix};
use crate::operator::{fidelity, purified_distance, Operator, PureState, Schatten};
use crate::random::{split_seed, Sampler};
use crate::types::{check_type_bounds, enumerate_types, hsw_rate_lower_bound, Ensemble};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Full,
    Quick,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub scale: Scale,
}

impl VerifyConfig {
    pub fn full(seed: u64) -> Self {
        Self { seed, scale: Scale::Full }
    }

    pub fn quick(seed: u64) -> Self {
        Self { seed, scale: Scale::Quick }
    }

    fn count(&self, full: usize, quick: usize) -> usize {
        match self.scale {
            Scale::Full => full,
            Scale::Quick => quick,
        }
    }

    fn sampler(&self, criterion: u64, index: u64) -> Sampler {
        Sampler::new(split_seed(split_seed(self.seed, criterion), index))
    }
}

/// Outcome of one criterion. `worst` is the smallest margin observed (or the
/// largest error, for equality checks) and `tolerance` the threshold it is
/// compared with.
#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub instances: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
    #[serde(skip)]
    pub seconds: f64,
}

struct Tally {
    instances: usize,
    worst_margin: f64,
    failures: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Self { instances: 0, worst_margin: f64::INFINITY, failures: Vec::new() }
    }

    /// Record `margin >= -tol`.
    fn margin(&mut self, label: impl FnOnce() -> String, margin: f64, tol: f64) {
        self.instances += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if margin.is_nan() || margin < -tol {
            self.failures.push(format!("{} (margin {margin:e})", label()));
        }
    }

    /// Record `err <= tol`.
    fn error(&mut self, label: impl FnOnce() -> String, err: f64, tol: f64) {
        self.margin(label, -err, tol);
    }

    fn fail(&mut self, label: String) {
        self.instances += 1;
        self.failures.push(label);
    }

    fn outcome(self, id: u8, name: &str, tolerance: f64, as_error: bool, start: Instant) -> CheckOutcome {
        let worst = if as_error { -self.worst_margin } else { self.worst_margin };
        let detail = match self.failures.len() {
            0 => String::new(),
            n => format!("{n} failure(s); first: {}", self.failures[0]),
        };
        CheckOutcome {
            id,
            name: name.into(),
            passed: self.failures.is_empty() && self.instances > 0,
            instances: self.instances,
            worst: if worst.is_finite() { worst } else { 0.0 },
            tolerance,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

fn random_schmidt(s: &mut Sampler, d: usize) -> Result<PureState> {
    PureState::schmidt_aligned(d, &s.distribution(d))
}

fn random_complementary_cq(s: &mut Sampler, d_a: usize, d_b: usize) -> Result<QuantumChannel> {
    QuantumChannel::cq(s.cq_outputs(d_a, d_b))?.complementary()
}

/// Exhaustive permutation average against the closed form.
pub fn check_prop2(cfg: &VerifyConfig) -> CheckOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    let per_d = cfg.count(20, 5);
    for d in 2..=4usize {
        for k in 0..per_d {
            let mut s = cfg.sampler(1, (d * 1000 + k) as u64);
            let d_b = 2 + s.index(2);
            let mut run = || -> Result<(f64, f64)> {
                let rho = random_schmidt(&mut s, d)?;
                let tbar = random_complementary_cq(&mut s, d, d_b)?;
                Ok((prop2_lhs_bruteforce(&tbar, &rho)?, prop2_rhs_closedform(&tbar, &rho)?))
            };
            match run() {
                Ok((lhs, rhs)) => {
                    let rel = if rhs == 0.0 { lhs.abs() } else { (lhs - rhs).abs() / rhs.abs() };
                    t.error(|| format!("d={d} #{k}"), rel, 1e-9);
                }
                Err(e) => t.fail(format!("d={d} #{k}: {e}")),
            }
        }
    }
    t.outcome(1, "permutation average equals the closed form", 1e-9, true, start)
}

/// Closed-form counting average against full enumeration of S_d.
pub fn check_counting(_cfg: &VerifyConfig) -> CheckOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for d in 2..=5usize {
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                match (counting_average(d, i, j), counting_average_bruteforce(d, i, j)) {
                    (Ok(a), Ok(b)) => {
                        let err = (a.mat() - b.mat()).iter().map(|z| z.norm()).fold(0.0, f64::max);
                        t.error(|| format!("d={d} i={i} j={j}"), err, 1e-12);
                    }
                    (Err(e), _) | (_, Err(e)) => t.fail(format!("d={d} i={i} j={j}: {e}")),
                }
            }
        }
    }
    t.outcome(2, "counting identity matches enumeration", 1e-12, true, start)
}

/// Exhaustive LHS against the unsmoothed and smoothed bounds.
pub fn check_dequantizing_bounds(cfg: &VerifyConfig) -> CheckOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    let per_d = cfg.count(20, 3);
    let d_max = cfg.count(6, 5);
    for d in 2..=d_max {
        for k in 0..per_d {
            let mut s = cfg.sampler(3, (d * 1000 + k) as u64);
            let d_b = 2 + s.index(2);
            let mut run = || -> Result<(f64, f64, Option<f64>)> {
                let rho = random_schmidt(&mut s, d)?;
                let tbar = random_complementary_cq(&mut s, d, d_b)?;
                let lhs = dequantize_lhs(&tbar, &rho, DequantizeMode::Exhaustive)?.value;
                let t1 = theorem1_bound(&tbar, &rho)?.value;
                let t3 = if d <= 5 { Some(theorem3_bound(&tbar, &rho, 0.05, 0.05)?.value) } else { None };
                Ok((lhs, t1, t3))
            };
            match run() {
                Ok((lhs, t1, t3)) => {
                    t.margin(|| format!("unsmoothed d={d} #{k}"), t1 - lhs, 1e-8);
                    if let Some(t3) = t3 {
                        t.margin(|| format!("smoothed d={d} #{k}"), t3 - lhs, 1e-8);
                    }
                }
                Err(e) => t.fail(format!("d={d} #{k}: {e}")),
            }
        }
    }
    t.outcome(3, "dequantizing bounds are sound", 1e-8, false, start)
}

fn product_oracle(s: &mut Sampler) -> Result<(Operator, f64)> {
    let (da, db) = (2 + s.index(2), 2 + s.index(2));
    let (rka, rkb) = (1 + s.index(da), 1 + s.index(db));
    let ra = s.density(da, rka);
    let rb = s.density(db, rkb);
    let lmax = ra.eigenvalues()?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok((ra.tensor(&rb), -lmax.log2()))
}

fn classical_oracle(s: &mut Sampler) -> Result<(Operator, f64)> {
    let (dx, dy) = (2 + s.index(3), 2 + s.index(2));
    let p = s.distribution(dx * dy);
    let guess: f64 = (0..dy).map(|y| (0..dx).map(|x| p[x * dy + y]).fold(0.0, f64::max)).sum();
    Ok((Operator::from_real_diagonal(&[dx, dy], &p)?, -guess.log2()))
}

/// Analytic min-entropies and the duality between independent solves.
pub fn check_entropy_oracles(cfg: &VerifyConfig) -> CheckOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    let cut = Cut::first_second();
    let n = cfg.count(20, 5);
    for k in 0..n {
        let mut s = cfg.sampler(4, k as u64);
        for (kind, oracle) in [("product", product_oracle(&mut s)), ("classical", classical_oracle(&mut s))] {
            match oracle.and_then(|(rho, expected)| Ok((hmin_cond(&rho, &cut)?.value, expected))) {
                Ok((value, expected)) => t.error(|| format!("{kind} #{k}"), (value - expected).abs(), 1e-6),
                Err(e) => t.fail(format!("{kind} #{k}: {e}")),
            }
        }
    }
    for d in 2..=4usize {
        match hmin_cond(&Operator::max_entangled(d), &cut) {
            Ok(c) => t.error(|| format!("maximally entangled d={d}"), (c.value + (d as f64).log2()).abs(), 1e-6),
            Err(e) => t.fail(format!("maximally entangled d={d}: {e}")),
        }
    }
    let mut dual = Tally::new();
    for k in 0..n {
        let mut s = cfg.sampler(4, 10_000 + k as u64);
        let dims = [2, 2 + s.index(2), 2 + s.index(2)];
        let mut run = || -> Result<f64> {
            let psi = s.pure_state(&dims).density();
            let h_min = hmin_cond(&psi, &Cut::new(vec![0], vec![1]))?.value;
            let h_max = hmax_cond(&psi, &Cut::new(vec![0], vec![2]))?.value;
            Ok((h_min + h_max).abs())
        };
        match run() {
            Ok(err) => dual.error(|| format!("duality #{k}"), err, 1e-5),
            Err(e) => dual.fail(format!("duality #{k}: {e}")),
        }
    }
    let mut out = t.outcome(4, "entropy oracles and duality", 1e-6, true, start);
    let d = dual.outcome(4, "", 1e-5, true, start);
    out.passed &= d.passed;
    out.instances += d.instances;
    out.worst = out.worst.max(d.worst);
    if !d.detail.is_empty() {
        out.detail = [out.detail, d.detail].iter().filter(|s| !s.is_empty()).cloned().collect::<Vec<_>>().join("; ");
    }
    out
}

fn subnormalized(s: &mut Sampler, d: usize) -> Operator {
    let rank = 1 + s.index(d);
    let scale = 0.5 + 0.5 * s.uniform();
    s.density(d, rank).scale(scale)
}

/// Fuchs-van de Graaf for the purified distance and the 1-2 norm sandwich.
pub fn check_distance_inequalities(cfg: &VerifyConfig) -> CheckOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    let n = cfg.count(100, 25);
    for k in 0..n {
        let mut s = cfg.sampler(5, k as u64);
        let d = 2 + s.index(4);
        let (rho, sigma) = (subnormalized(&mut s, d), subnormalized(&mut s, d));
        match (purified_distance(&rho, &sigma), rho.sub(&sigma)) {
            (Ok(p), Ok(diff)) => {
                let l1 = diff.trace_norm();
                let dt = (rho.trace_re() - sigma.trace_re()).abs();
                t.margin(|| format!("lower #{k}"), p - 0.5 * l1 - 0.5 * dt, 1e-10);
                t.margin(|| format!("upper #{k}"), (l1 + dt).sqrt() - p, 1e-10);
            }
            (Err(e), _) | (_, Err(e)) => t.fail(format!("pair #{k}: {e}")),
        }
        if let (Ok(f), Ok(p)) = (fidelity(&rho, &sigma), purified_distance(&rho, &sigma)) {
            // Generalized fidelity dominates the plain one.
            t.margin(|| format!("fidelity #{k}"), (1.0 - p * p).max(0.0).sqrt() - f, 1e-10);
        }
        let x = Operator::new(vec![d], s.ginibre(d, d)).expect("square");
        let (n1, n2) = (x.schatten_norm(Schatten::One), x.schatten_norm(Schatten::Two));
        t.margin(|| format!("norm lower #{k}"), n1 - n2, 1e-10 * n1.max(1.0));
        t.margin(|| format!("norm upper #{k}"), (d as f64).sqrt() * n2 - n1, 1e-10 * n1.max(1.0));
    }
    t.outcome(5, "Fuchs-van de Graaf and norm sandwich", 1e-10, false, start)
}

fn random_projection(s: &mut Sampler, d: usize) -> Operator {
    let r = 1 + s.index(d);
    let q = s.ginibre(d, d).qr().q();
    let v = q.columns(0, r).into_owned();
    let pi = &v * v.adjoint();
    // Occasionally a strict contraction 0 <= Pi <= 1.
    let pi = if s.uniform() < 0.3 { pi * real(0.5 + 0.5 * s.uniform()) } else { pi };
    Operator::new(vec![d], crate::linalg::hermitian_part(&pi)).expect("square")
}

/// Projection lemma and pinching of the coherent-classical optimizer.
pub fn check_projection_lemma(cfg: &VerifyConfig) -> CheckOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for k in 0..cfg.count(50, 10) {
        let mut s = cfg.sampler(6, k as u64);
        let (da, db) = (2 + s.index(2), 2 + s.index(2));
        let rank = 1 + s.index(da * db);
        let rho = s.density_on(&[da, db], rank);
        let pi = random_projection(&mut s, da);
        match hmax_projection_check(&rho, &pi) {
            Ok(c) if c.skipped => {}
            Ok(c) => t.margin(|| format!("projection #{k}"), c.margin, 1e-8),
            Err(e) => t.fail(format!("projection #{k}: {e}")),
        }
    }
    for k in 0..cfg.count(20, 5) {
        let mut s = cfg.sampler(6, 10_000 + k as u64);
        let dx = 2 + s.index(2);
        let rest = [1 + s.index(2), 2];
        let rank = 1 + s.index(3);
        let rho = s.coherent_classical(dx, &rest, rank);
        match cq_optimizer_structure_check(&rho) {
            Ok(c) => t.margin(|| format!("pinching #{k}"), c.pinched_margin, 1e-7),
            Err(e) => t.fail(format!("pinching #{k}: {e}")),
        }
    }
    t.outcome(6, "projection lemma and optimizer pinching", 1e-8, false, start)
}

fn noiseless(d: usize) -> Result<QuantumChannel> {
    QuantumChannel::cq((0..d).map(|x| Operator::ket_bra(&[d], x, x)).collect())
}

/// Uhlmann decoder on noiseless channels and the coding bound on noisy ones.
pub fn check_coding(cfg: &VerifyConfig) -> CheckOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for d in [2usize, 4, 8] {
        let run = || -> Result<f64> {
            let ch = noiseless(d)?;
            let ens = MessageEnsemble::uniform(d)?;
            let code = crate::coding::decoded_code(&ch, crate::operator::Permutation::identity(d), &ens)?;
            error_probability(&code, &ch, &ens)
        };
        match run() {
            Ok(p) => t.error(|| format!("noiseless d={d}"), p, 1e-9),
            Err(e) => t.fail(format!("noiseless d={d}: {e}")),
        }
    }
    let d_max = cfg.count(6, 4);
    for d in 2..=d_max {
        for k in 0..cfg.count(3, 1) {
            let mut s = cfg.sampler(7, (d * 100 + k) as u64);
            let d_b = 2 + s.index(2);
            let mut run = || -> Result<(f64, f64, f64)> {
                let ch = QuantumChannel::cq(s.cq_outputs(d, d_b))?;
                let messages = 2 + s.index(d - 1);
                let ens = MessageEnsemble::new(s.distribution(messages))?;
                let best = best_permutation_search(&ch, &ens, SearchMode::Exhaustive)?;
                let bound = theorem4_bound(&ch, &ens, 0.0)?.value;
                Ok((best.p_e, best.mean_p_e, bound))
            };
            match run() {
                Ok((p, mean, bound)) => {
                    t.margin(|| format!("best d={d} #{k}"), bound - 2.0 * p, 1e-8);
                    t.margin(|| format!("average d={d} #{k}"), bound - 2.0 * mean, 1e-8);
                }
                Err(e) => t.fail(format!("noisy d={d} #{k}: {e}")),
            }
        }
    }
    t.outcome(7, "decoder and coding bound", 1e-8, false, start)
}

/// Type counts and sandwiches for every type with `n <= 8`, alphabet `<= 3`.
pub fn check_types(cfg: &VerifyConfig) -> CheckOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for k in 1..=3usize {
        for n in 1..=8usize {
            let mut s = cfg.sampler(8, (k * 100 + n) as u64);
            let q = s.distribution(k);
            match check_type_bounds(n, &q) {
                Ok(r) => t.margin(|| format!("|X|={k} n={n}: {r:?}"), if r.all_hold() { 0.0 } else { -1.0 }, 0.0),
                Err(e) => t.fail(format!("|X|={k} n={n}: {e}")),
            }
        }
    }
    // Dense projector sums where the space is small enough to build.
    for (k, n) in [(2usize, 4usize), (3, 3), (2, 6)] {
        let dim = k.pow(n as u32);
        let run = || -> Result<f64> {
            let mut sum = CMatrix::zeros(dim, dim);
            for tc in enumerate_types(n, k)? {
                sum += tc.projector()?.mat();
            }
            Ok((sum - CMatrix::identity(dim, dim)).norm())
        };
        match run() {
            Ok(err) => t.error(|| format!("projector sum |X|={k} n={n}"), err, 0.0),
            Err(e) => t.fail(format!("projector sum |X|={k} n={n}: {e}")),
        }
    }
    t.outcome(8, "type bounds and resolution of the identity", 0.0, false, start)
}

pub fn orthogonal_ensemble() -> Result<Ensemble> {
    Ensemble::new(vec![0.5, 0.5], vec![Operator::ket_bra(&[2], 0, 0), Operator::ket_bra(&[2], 1, 1)])
}

/// Uniform over `{|0>, |+>}`.
pub fn bb84_ensemble() -> Result<Ensemble> {
    let h = 0.5;
    let plus = Operator::new(vec![2], CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(h, 0.0)]))?;
    Ensemble::new(vec![0.5, 0.5], vec![Operator::ket_bra(&[2], 0, 0), plus])
}

pub const HSW_EPS: f64 = 0.01;
pub const HSW_PE: f64 = 0.3;

/// Rates below the Holevo reference with a non-increasing gap, `n = 1..4`.
pub fn check_hsw(_cfg: &VerifyConfig) -> CheckOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for (name, ens) in [("orthogonal", orthogonal_ensemble()), ("bb84", bb84_ensemble())] {
        let run = || -> Result<Vec<(f64, f64)>> {
            let ens = ens?;
            (1..=4).map(|n| hsw_rate_lower_bound(&ens, n, HSW_EPS, HSW_PE).map(|p| (p.rate_bits_per_use, p.holevo_reference))).collect()
        };
        match run() {
            Ok(points) => {
                let mut prev_gap = f64::INFINITY;
                for (i, (rate, holevo)) in points.into_iter().enumerate() {
                    t.margin(|| format!("{name} n={} below reference", i + 1), holevo + 1e-6 - rate, 0.0);
                    let gap = holevo - rate;
                    t.margin(|| format!("{name} n={} gap non-increasing", i + 1), prev_gap - gap, 1e-12);
                    prev_gap = gap;
                }
            }
            Err(e) => t.fail(format!("{name}: {e}")),
        }
    }
    t.outcome(9, "finite-n rate trend", 1e-6, false, start)
}

/// Same seed, same bytes: seeded Monte Carlo and random search rerun in process.
pub fn check_reproducibility(cfg: &VerifyConfig) -> CheckOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    let once = |seed: u64| -> Result<String> {
        let mut s = Sampler::new(seed);
        let rho = random_schmidt(&mut s, 4)?;
        let tbar = random_complementary_cq(&mut s, 4, 2)?;
        let mode = DequantizeMode::MonteCarlo { seed: split_seed(seed, 1), samples: 64 };
        let report = dequantize_report(&tbar, &rho, mode, 0.0, 0.0)?;
        let ch = QuantumChannel::cq(s.cq_outputs(4, 2))?;
        let search = best_permutation_search(&ch, &MessageEnsemble::uniform(3)?, SearchMode::Random { seed, budget: 8 })?;
        let text = serde_json::to_string(&report).map_err(|e| crate::error::Error::Format(e.to_string()))?;
        Ok(format!("{text}|{}|{:e}", search.code.permutation.cycle_notation(), search.p_e))
    };
    for k in 0..cfg.count(4, 2) {
        let seed = split_seed(cfg.seed, 10_000 + k as u64);
        match (once(seed), once(seed)) {
            (Ok(a), Ok(b)) => t.margin(|| format!("rerun #{k}"), if a == b { 0.0 } else { -1.0 }, 0.0),
            (Err(e), _) | (_, Err(e)) => t.fail(format!("rerun #{k}: {e}")),
        }
    }
    t.outcome(10, "seeded reruns are identical", 0.0, false, start)
}

pub fn run_all(cfg: &VerifyConfig) -> Vec<CheckOutcome> {
    vec![
        check_prop2(cfg),
        check_counting(cfg),
        check_dequantizing_bounds(cfg),
        check_entropy_oracles(cfg),
        check_distance_inequalities(cfg),
        check_projection_lemma(cfg),
        check_coding(cfg),
        check_types(cfg),
        check_hsw(cfg),
        check_reproducibility(cfg),
    ]
}
