use std::collections::BTreeMap;

use num_bigint::BigUint;
use oneshot_core::linalg::CMatrix;
use oneshot_core::random::Sampler;
use oneshot_core::types::{
    check_type_bounds, enumerate_types, hsw_rate_curve, most_likely_type, projected_tau, restricted_channel,
    type_count, Ensemble, TypeClass,
};
use oneshot_core::verify::{bb84_ensemble, orthogonal_ensemble};
use oneshot_core::{Operator, QuantumChannel};
use proptest::prelude::*;

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

// Count vectors of all k^n sequences, by direct enumeration.
fn type_oracle(n: usize, k: usize) -> BTreeMap<Vec<usize>, u64> {
    let mut out = BTreeMap::new();
    for code in 0..k.pow(n as u32) {
        let mut counts = vec![0; k];
        let mut c = code;
        for _ in 0..n {
            counts[c % k] += 1;
            c /= k;
        }
        *out.entry(counts).or_insert(0) += 1;
    }
    out
}

fn type_probability(counts: &[usize], q: &[f64], size: u64) -> f64 {
    size as f64 * counts.iter().zip(q).map(|(&c, &p)| p.powi(c as i32)).product::<f64>()
}

#[test]
fn enumeration_matches_sequence_oracle() {
    for (n, k) in [(2, 2), (4, 3), (8, 3), (5, 4)] {
        let oracle = type_oracle(n, k);
        let types = enumerate_types(n, k).unwrap();
        assert_eq!(types.len(), oracle.len());
        assert_eq!(BigUint::from(types.len()), type_count(n, k));
        for t in &types {
            assert_eq!(t.size, BigUint::from(oracle[&t.counts]), "{:?}", t.counts);
        }
    }
    assert_eq!(enumerate_types(8, 3).unwrap().len(), 45);
}

#[test]
fn most_likely_type_for_a_biased_bit() {
    let (t, p) = most_likely_type(&[0.9, 0.1], 4).unwrap();
    assert_eq!(t.counts, vec![4, 0]);
    assert!((p - 0.6561).abs() < 1e-12);
    let (balanced, _) = most_likely_type(&[0.5, 0.5], 6).unwrap();
    assert_eq!(balanced.counts, vec![3, 3]);
}

#[test]
fn type_projector_is_idempotent() {
    let t = TypeClass::new(vec![2, 1, 1]).unwrap();
    let p = t.projector().unwrap();
    assert!(max_abs(&(p.mat() * p.mat() - p.mat())) < 1e-15);
    assert!((p.trace_re() - 12.0).abs() < 1e-12);
    assert_eq!(t.sequences().len(), 12);
}

#[test]
fn single_letter_restriction_is_the_channel() {
    let ens = bb84_ensemble().unwrap();
    let t = TypeClass::new(vec![0, 1]).unwrap();
    let ch = restricted_channel(&ens.outputs, &t).unwrap();
    assert_eq!(ch.in_dim(), 1);
    let y = ch.apply(&Operator::ket_bra(&[1], 0, 0)).unwrap();
    assert!(max_abs(&(y.mat() - ens.outputs[1].mat())) < 1e-15);
}

#[test]
fn balanced_pair_of_noiseless_bits_is_a_noiseless_pair() {
    let outs = vec![Operator::ket_bra(&[2], 0, 0), Operator::ket_bra(&[2], 1, 1)];
    let t = TypeClass::new(vec![1, 1]).unwrap();
    let ch = restricted_channel(&outs, &t).unwrap();
    assert_eq!(ch.in_dim(), 2);
    // Sequences 01 and 10, in that order.
    let expected = QuantumChannel::cq(vec![
        Operator::ket_bra(&[4], 1, 1),
        Operator::ket_bra(&[4], 2, 2),
    ])
    .unwrap();
    assert!(ch.action_distance(&expected).unwrap() < 1e-15);
}

#[test]
fn restricted_choi_is_the_projected_state() {
    let ens = bb84_ensemble().unwrap();
    for n in 1..=3 {
        let (t, _) = most_likely_type(&ens.probs, n).unwrap();
        let ch = restricted_channel(&ens.outputs, &t).unwrap();
        let tau = projected_tau(&ens, &t).unwrap();
        assert!(max_abs(&(ch.choi().mat() - tau.mat())) < 1e-13, "n={n}");
    }
}

#[test]
fn rates_stay_below_holevo() {
    for ens in [orthogonal_ensemble().unwrap(), bb84_ensemble().unwrap()] {
        let curve = hsw_rate_curve(&ens, 3, 0.01, 0.3).unwrap();
        let holevo = ens.holevo().unwrap();
        for p in &curve {
            assert!(p.rate_bits_per_use <= holevo + 1e-6);
            assert!(p.projector_mass_term >= 0.0);
            assert!((p.holevo_reference - holevo).abs() < 1e-12);
        }
        let gaps: Vec<f64> = curve.iter().map(|p| holevo - p.rate_bits_per_use).collect();
        assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{gaps:?}");
    }
    assert!((orthogonal_ensemble().unwrap().holevo().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn identical_outputs_give_no_rate() {
    let mut s = Sampler::new(61);
    let o = s.density(2, 2);
    let ens = Ensemble::new(vec![0.5, 0.5], vec![o.clone(), o]).unwrap();
    assert!(ens.holevo().unwrap().abs() < 1e-12);
    for p in hsw_rate_curve(&ens, 3, 0.01, 0.3).unwrap() {
        assert!(p.rate_bits_per_use <= 1e-9);
    }
}

#[test]
fn eps_too_large_for_the_error_is_rejected() {
    assert!(hsw_rate_curve(&bb84_ensemble().unwrap(), 1, 0.05, 0.3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn type_bounds_hold(seed in any::<u64>(), k in 2usize..4, n in 1usize..7) {
        let q = Sampler::new(seed).distribution(k);
        let check = check_type_bounds(n, &q).unwrap();
        prop_assert!(check.all_hold(), "{check:?}");
    }

    #[test]
    fn most_likely_type_is_the_argmax(seed in any::<u64>(), k in 2usize..4, n in 1usize..7) {
        let q = Sampler::new(seed).distribution(k);
        let (best, p) = most_likely_type(&q, n).unwrap();
        let oracle = type_oracle(n, k);
        let top = oracle.iter().map(|(c, &sz)| type_probability(c, &q, sz)).fold(0.0, f64::max);
        prop_assert!((p - top).abs() <= 1e-12 * top.max(1e-300) + 1e-15);
        prop_assert!((type_probability(&best.counts, &q, oracle[&best.counts]) - p).abs() < 1e-12);
        prop_assert!(p >= 1.0 / oracle.len() as f64 - 1e-12);
    }

    #[test]
    fn class_size_sandwich(n in 1usize..10, split in 0usize..10) {
        let a = split.min(n);
        let t = TypeClass::new(vec![a, n - a]).unwrap();
        let nh = t.n_entropy();
        let poly = (n + 1) as f64;
        prop_assert!(t.log2_size() <= nh + 1e-9);
        prop_assert!(t.log2_size() >= nh - poly.log2() - 1e-9);
    }
}
