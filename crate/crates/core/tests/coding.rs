use oneshot_core::coding::{
    best_permutation_search, build_decoder, corollary5_formula, corollary5_max_message, decoded_code,
    error_probability, purified_picture_check, theorem4_bound, MessageEnsemble, SearchMode,
};
use oneshot_core::linalg::CMatrix;
use oneshot_core::random::Sampler;
use oneshot_core::{Error, Operator, Permutation, QuantumChannel};
use proptest::prelude::*;

fn noiseless(d: usize) -> QuantumChannel {
    QuantumChannel::cq((0..d).map(|x| Operator::ket_bra(&[d], x, x)).collect()).unwrap()
}

fn kraus_completeness(ch: &QuantumChannel) -> f64 {
    let d = ch.in_dim();
    let sum = ch.kraus().iter().fold(CMatrix::zeros(d, d), |acc, k| acc + k.adjoint() * k);
    (sum - CMatrix::identity(d, d)).norm()
}

#[test]
fn noiseless_channel_decodes_perfectly() {
    for d in [2, 4, 8] {
        let ens = MessageEnsemble::uniform(d).unwrap();
        let code = decoded_code(&noiseless(d), Permutation::identity(d), &ens).unwrap();
        assert!(error_probability(&code, &noiseless(d), &ens).unwrap() <= 1e-9);
    }
}

#[test]
fn noiseless_decoder_inverts_the_permutation() {
    let mut s = Sampler::new(51);
    let pi = s.permutation(4);
    let ens = MessageEnsemble::new(s.distribution(4)).unwrap();
    let code = decoded_code(&noiseless(4), pi.clone(), &ens).unwrap();
    let dec = code.decoder.as_ref().unwrap();
    assert!(kraus_completeness(&dec.channel) < 1e-9);
    for m in 0..4 {
        let out = dec.channel.apply(&Operator::ket_bra(&[4], pi.apply(m), pi.apply(m))).unwrap();
        assert!((out.mat()[(m, m)].re - 1.0).abs() < 1e-9);
    }
}

#[test]
fn useless_channel_is_a_coin_flip() {
    let pi = Operator::maximally_mixed(&[2]);
    let t = QuantumChannel::cq(vec![pi.clone(), pi]).unwrap();
    let ens = MessageEnsemble::uniform(2).unwrap();
    let code = decoded_code(&t, Permutation::identity(2), &ens).unwrap();
    assert!(kraus_completeness(&code.decoder.as_ref().unwrap().channel) < 1e-9);
    assert!((error_probability(&code, &t, &ens).unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn orthogonal_pure_outputs_are_recovered() {
    let mut s = Sampler::new(52);
    let u = s.ginibre(3, 3).qr().q();
    let outs = (0..3).map(|x| Operator::projector(&[3], &u.column(x).into_owned()).unwrap()).collect();
    let t = QuantumChannel::cq(outs).unwrap();
    let ens = MessageEnsemble::new(s.distribution(3)).unwrap();
    let code = decoded_code(&t, s.permutation(3), &ens).unwrap();
    assert!(error_probability(&code, &t, &ens).unwrap() < 1e-9);
}

#[test]
fn noiseless_bit_has_zero_conditional_max_entropy() {
    let ens = MessageEnsemble::uniform(2).unwrap();
    let b = theorem4_bound(&noiseless(2), &ens, 0.0).unwrap();
    assert!(b.hmax_channel.value.abs() < 1e-6, "{}", b.hmax_channel.value);
    assert!((b.hmax_message - 1.0).abs() < 1e-12);
    // 2 sqrt(sqrt(2^{0 + 1} / 1)) = 2 * 2^{1/4}.
    assert!((b.value - 2.0 * 2f64.powf(0.25)).abs() < 1e-5);
}

#[test]
fn uniform_message_term_is_log_k() {
    for k in 1..=6 {
        assert!((MessageEnsemble::uniform(k).unwrap().hmax() - (k as f64).log2()).abs() < 1e-12);
    }
}

#[test]
fn message_budget_formula() {
    assert!((corollary5_formula(10.0, 0.0, 0.5, 0.0).unwrap() - 5.0).abs() < 1e-12);
    assert_eq!(corollary5_formula(10.0, 0.0, 0.5, 0.03125).unwrap(), f64::NEG_INFINITY);
    assert!(matches!(corollary5_formula(10.0, 0.0, 0.4, 0.03), Err(Error::EpsOutOfRange { .. })));
    let b = corollary5_max_message(&noiseless(4), 0.5, 0.0).unwrap();
    assert!((b.value - (2.0 - 1.0 + 2.0 * 0.25f64.log2())).abs() < 1e-5);
}

#[test]
fn single_message_never_fails() {
    let mut s = Sampler::new(53);
    let t = QuantumChannel::cq(s.cq_outputs(3, 2)).unwrap();
    let ens = MessageEnsemble::uniform(1).unwrap();
    let r = best_permutation_search(&t, &ens, SearchMode::Exhaustive).unwrap();
    assert!(r.p_e < 1e-9);
}

#[test]
fn identity_is_among_noiseless_minimizers() {
    let ens = MessageEnsemble::uniform(3).unwrap();
    let r = best_permutation_search(&noiseless(4), &ens, SearchMode::Exhaustive).unwrap();
    assert_eq!(r.examined, 24);
    assert_eq!(r.code.permutation.images(), Permutation::identity(4).images());
    assert!(r.p_e < 1e-9);
}

#[test]
fn exhaustive_search_respects_the_bound() {
    let mut s = Sampler::new(54);
    for d in 2..=5 {
        let t = QuantumChannel::cq(s.cq_outputs(d, 2)).unwrap();
        let k = 2 + s.index(d - 1);
        let ens = MessageEnsemble::new(s.distribution(k)).unwrap();
        let r = best_permutation_search(&t, &ens, SearchMode::Exhaustive).unwrap();
        let bound = theorem4_bound(&t, &ens, 0.0).unwrap().value;
        assert!(bound - 2.0 * r.p_e >= -1e-8, "d={d}");
        assert!(bound - 2.0 * r.mean_p_e >= -1e-8, "d={d} mean");
        assert!(r.p_e <= r.mean_p_e + 1e-12);
    }
}

#[test]
fn random_search_is_reproducible() {
    let mut s = Sampler::new(55);
    let t = QuantumChannel::cq(s.cq_outputs(5, 2)).unwrap();
    let ens = MessageEnsemble::uniform(3).unwrap();
    let mode = SearchMode::Random { seed: 9, budget: 16 };
    let a = best_permutation_search(&t, &ens, mode).unwrap();
    let b = best_permutation_search(&t, &ens, mode).unwrap();
    assert_eq!(a.code.permutation.images(), b.code.permutation.images());
    assert_eq!(a.p_e.to_bits(), b.p_e.to_bits());
}

#[test]
fn decoder_acts_only_on_the_output() {
    let mut s = Sampler::new(56);
    let t = QuantumChannel::cq(s.cq_outputs(3, 2)).unwrap();
    let ens = MessageEnsemble::new(s.distribution(3)).unwrap();
    let code = decoded_code(&t, s.permutation(3), &ens).unwrap();
    let check = purified_picture_check(&t, &code, &ens).unwrap();
    assert!(check.untouched_defect < 1e-9);
    assert!(check.isometry_defect < 1e-9);
    assert!(check.completeness_defect < 1e-9);
}

#[test]
fn too_many_messages_rejected() {
    let ens = MessageEnsemble::uniform(3).unwrap();
    let code = oneshot_core::coding::PermutationCode::new(2, 3, Permutation::identity(2));
    assert!(code.is_err());
    assert!(theorem4_bound(&noiseless(2), &ens, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn error_probability_is_a_probability(seed in any::<u64>(), d in 2usize..5, db in 1usize..4) {
        let mut s = Sampler::new(seed);
        let t = QuantumChannel::cq(s.cq_outputs(d, db)).unwrap();
        let k = 1 + s.index(d);
        let ens = MessageEnsemble::new(s.distribution(k)).unwrap();
        let code = decoded_code(&t, s.permutation(d), &ens).unwrap();
        let p = error_probability(&code, &t, &ens).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p));
        prop_assert!(kraus_completeness(&code.decoder.as_ref().unwrap().channel) < 1e-9);
    }

    #[test]
    fn joint_relabeling_keeps_error_probability(seed in any::<u64>(), d in 2usize..5) {
        let mut s = Sampler::new(seed);
        let t = QuantumChannel::cq(s.cq_outputs(d, 2)).unwrap();
        let ens = MessageEnsemble::new(s.distribution(d)).unwrap();
        let (pi, sigma) = (s.permutation(d), s.permutation(d));
        let code = decoded_code(&t, pi.clone(), &ens).unwrap();
        // Message j becomes sigma(j) but is still sent as pi(j).
        let moved = ens.relabeled(&sigma).unwrap();
        let moved_code = decoded_code(&t, pi.compose(&sigma.inverse()), &moved).unwrap();
        let a = error_probability(&code, &t, &ens).unwrap();
        let b = error_probability(&moved_code, &t, &moved).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn budget_is_monotone_in_error(p in 0.05f64..0.9, dp in 0.0f64..0.1) {
        let a = corollary5_formula(4.0, 0.5, p, 0.0).unwrap();
        let b = corollary5_formula(4.0, 0.5, (p + dp).min(1.0), 0.0).unwrap();
        prop_assert!(b >= a);
    }

    #[test]
    fn decoder_dimensions_match(seed in any::<u64>(), d in 2usize..5) {
        let mut s = Sampler::new(seed);
        let t = QuantumChannel::cq(s.cq_outputs(d, 2)).unwrap();
        let ens = MessageEnsemble::uniform(d).unwrap();
        let code = oneshot_core::coding::PermutationCode::new(d, d, s.permutation(d)).unwrap();
        let dec = build_decoder(&t, &code, &ens).unwrap();
        prop_assert_eq!(dec.channel.in_dim(), 2);
        prop_assert_eq!(dec.channel.out_dim(), d);
        prop_assert!(oneshot_core::linalg::isometry_defect(&dec.isometry) < 1e-9);
    }
}
