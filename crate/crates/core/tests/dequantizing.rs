use oneshot_core::dequantizer::{
    counting_average, counting_average_bruteforce, dequantize_lhs, prop2_lhs_bruteforce, prop2_rhs_closedform,
    theorem1_bound, theorem3_bound, DequantizeMode,
};
use oneshot_core::linalg::CMatrix;
use oneshot_core::random::Sampler;
use oneshot_core::{Error, Operator, PureState, QuantumChannel};
use proptest::prelude::*;

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn noiseless(d: usize) -> QuantumChannel {
    QuantumChannel::cq((0..d).map(|x| Operator::ket_bra(&[d], x, x)).collect()).unwrap()
}

// Every input goes to |0>: the environment keeps a perfect copy.
fn constant(d: usize) -> QuantumChannel {
    QuantumChannel::cq(vec![Operator::ket_bra(&[2], 0, 0); d]).unwrap()
}

fn bell() -> PureState {
    PureState::schmidt_aligned(2, &[0.5, 0.5]).unwrap()
}

#[test]
fn counting_average_for_a_qubit_pair() {
    let mut expected = CMatrix::zeros(4, 4);
    expected[(1, 2)] = 0.5.into();
    expected[(2, 1)] = 0.5.into();
    for (i, j) in [(0, 1), (1, 0)] {
        assert!(max_abs(&(counting_average(2, i, j).unwrap().mat() - &expected)) < 1e-15);
        assert!(max_abs(&(counting_average_bruteforce(2, i, j).unwrap().mat() - &expected)) < 1e-15);
    }
}

#[test]
fn counting_closed_form_matches_enumeration() {
    for d in 3..=5 {
        let reference = counting_average(d, 0, 1).unwrap();
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                let brute = counting_average_bruteforce(d, i, j).unwrap();
                assert!(max_abs(&(brute.mat() - reference.mat())) < 1e-12, "d={d} ({i},{j})");
                assert!(max_abs(&(counting_average(d, i, j).unwrap().mat() - reference.mat())) == 0.0);
            }
        }
    }
}

#[test]
fn counting_rejects_equal_indices() {
    assert!(matches!(counting_average(3, 1, 1), Err(Error::EqualIndices(1))));
}

#[test]
fn distance_from_classicality_closed_form() {
    let mut s = Sampler::new(41);
    for _ in 0..5 {
        let ch = QuantumChannel::from_kraus(s.kraus_channel(3, 2, 2), 3, vec![2]).unwrap();
        let rho = PureState::schmidt_aligned(3, &s.distribution(3)).unwrap();
        let lhs = prop2_lhs_bruteforce(&ch, &rho).unwrap();
        let rhs = prop2_rhs_closedform(&ch, &rho).unwrap();
        assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-300), "{lhs} vs {rhs}");
    }
}

#[test]
fn classical_inputs_give_zero() {
    let rho = PureState::schmidt_aligned(3, &[1.0, 0.0, 0.0]).unwrap();
    let ch = QuantumChannel::depolarizing(3, 2);
    assert_eq!(prop2_lhs_bruteforce(&ch, &rho).unwrap(), 0.0);
    let tbar = constant(3).complementary().unwrap();
    assert_eq!(dequantize_lhs(&tbar, &rho, DequantizeMode::Exhaustive).unwrap().value, 0.0);
    assert!(prop2_rhs_closedform(&noiseless(3), &bell_like(3)).unwrap() < 1e-24);
}

fn bell_like(d: usize) -> PureState {
    PureState::schmidt_aligned(d, &vec![1.0 / d as f64; d]).unwrap()
}

#[test]
fn copying_environment_keeps_all_coherence() {
    let tbar = constant(2).complementary().unwrap();
    let lhs = dequantize_lhs(&tbar, &bell(), DequantizeMode::Exhaustive).unwrap();
    assert!((lhs.value - 1.0).abs() < 1e-12);
    assert_eq!(lhs.evaluations, 2);
    let bound = theorem1_bound(&tbar, &bell()).unwrap();
    assert!(bound.value >= lhs.value - 1e-8);
}

#[test]
fn noiseless_complementary_is_dephasing() {
    let tbar = noiseless(2).complementary().unwrap();
    let lhs = dequantize_lhs(&tbar, &bell(), DequantizeMode::Exhaustive).unwrap();
    assert!(lhs.value.abs() < 1e-15);
}

#[test]
fn monte_carlo_agrees_with_enumeration() {
    let mut s = Sampler::new(42);
    let tbar = QuantumChannel::cq(s.cq_outputs(5, 2)).unwrap().complementary().unwrap();
    let rho = PureState::schmidt_aligned(5, &s.distribution(5)).unwrap();
    let exact = dequantize_lhs(&tbar, &rho, DequantizeMode::Exhaustive).unwrap();
    assert_eq!(exact.evaluations, 120);
    let mc = dequantize_lhs(&tbar, &rho, DequantizeMode::MonteCarlo { seed: 7, samples: 2000 }).unwrap();
    assert!((mc.value - exact.value).abs() <= 3.0 * mc.stderr + 1e-9, "{} {} {}", mc.value, exact.value, mc.stderr);
    let again = dequantize_lhs(&tbar, &rho, DequantizeMode::MonteCarlo { seed: 7, samples: 2000 }).unwrap();
    assert_eq!(mc.value.to_bits(), again.value.to_bits());
}

#[test]
fn schmidt_relabeling_changes_nothing() {
    let mut s = Sampler::new(43);
    let tbar = QuantumChannel::cq(s.cq_outputs(4, 2)).unwrap().complementary().unwrap();
    let ch = QuantumChannel::from_kraus(s.kraus_channel(4, 2, 2), 4, vec![2]).unwrap();
    let w = s.distribution(4);
    let rho = PureState::schmidt_aligned(4, &w).unwrap();
    let pi = s.permutation(4);
    let wp: Vec<f64> = (0..4).map(|k| w[pi.apply(k)]).collect();
    let rho_p = PureState::schmidt_aligned(4, &wp).unwrap();
    let a = dequantize_lhs(&tbar, &rho, DequantizeMode::Exhaustive).unwrap().value;
    let b = dequantize_lhs(&tbar, &rho_p, DequantizeMode::Exhaustive).unwrap().value;
    assert!((a - b).abs() < 1e-12);
    let c = prop2_lhs_bruteforce(&ch, &rho).unwrap();
    let d = prop2_lhs_bruteforce(&ch, &rho_p).unwrap();
    assert!((c - d).abs() < 1e-12 * c.max(1.0));
}

#[test]
fn bound_moves_against_state_entropy() {
    // Flattening a pure state's spectrum entangles it more, so H_min(A|R)
    // falls to -log d and the bound rises.
    let mut s = Sampler::new(44);
    let tbar = QuantumChannel::cq(s.cq_outputs(3, 2)).unwrap().complementary().unwrap();
    let peaked = [0.8, 0.15, 0.05];
    let (mut last_h, mut last_b) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let w: Vec<f64> = peaked.iter().map(|p| (1.0 - t) * p + t / 3.0).collect();
        let rho = PureState::schmidt_aligned(3, &w).unwrap();
        let b = theorem1_bound(&tbar, &rho).unwrap();
        let closed = -2.0 * w.iter().map(|x| x.sqrt()).sum::<f64>().log2();
        assert!((b.hmin_state.value - closed).abs() < 1e-6);
        assert!(b.hmin_state.value <= last_h + 1e-9 && b.value >= last_b - 1e-9, "t={t}");
        (last_h, last_b) = (b.hmin_state.value, b.value);
    }
    assert!((last_h + 3f64.log2()).abs() < 1e-6);
}

#[test]
fn qubit_prefactor_is_one() {
    let tbar = constant(2).complementary().unwrap();
    let b = theorem1_bound(&tbar, &bell()).unwrap();
    let expected = 2f64.powf(-b.hmin_channel.value - b.hmin_state.value).sqrt();
    assert!((b.value - expected).abs() < 1e-12);
}

#[test]
fn smoothing_adds_the_penalty() {
    let tbar = constant(2).complementary().unwrap();
    let b = theorem3_bound(&tbar, &bell(), 0.01, 0.02).unwrap();
    let core = 2f64.powf(-b.hmin_channel.value - b.hmin_state.value).sqrt();
    assert!((b.value - core - 0.24).abs() < 1e-12);
}

#[test]
fn non_complementary_maps_are_refused() {
    let rho = bell();
    let dep = QuantumChannel::depolarizing(2, 2);
    assert!(matches!(
        dequantize_lhs(&dep, &rho, DequantizeMode::Exhaustive),
        Err(Error::NotClassicallyCoherent(_))
    ));
    assert!(theorem1_bound(&dep, &rho).is_err());
}

#[test]
fn non_schmidt_input_is_refused() {
    let psi = Sampler::new(45).pure_state(&[2, 2]);
    let tbar = constant(2).complementary().unwrap();
    assert!(dequantize_lhs(&tbar, &psi, DequantizeMode::Exhaustive).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn theorem_margin_is_nonnegative(seed in any::<u64>(), d in 2usize..5, db in 1usize..3) {
        let mut s = Sampler::new(seed);
        let tbar = QuantumChannel::cq(s.cq_outputs(d, db)).unwrap().complementary().unwrap();
        let rho = PureState::schmidt_aligned(d, &s.distribution(d)).unwrap();
        let lhs = dequantize_lhs(&tbar, &rho, DequantizeMode::Exhaustive).unwrap().value;
        let rhs = theorem1_bound(&tbar, &rho).unwrap().value;
        prop_assert!(rhs - lhs >= -1e-8, "{rhs} < {lhs}");
    }

    #[test]
    fn prop2_identity_for_random_maps(seed in any::<u64>(), d in 2usize..5, dout in 1usize..3) {
        let mut s = Sampler::new(seed);
        let ch = QuantumChannel::from_kraus(s.kraus_channel(d, dout, 2), d, vec![dout]).unwrap();
        let rho = PureState::schmidt_aligned(d, &s.distribution(d)).unwrap();
        let lhs = prop2_lhs_bruteforce(&ch, &rho).unwrap();
        let rhs = prop2_rhs_closedform(&ch, &rho).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1e-12));
    }

    #[test]
    fn cq_maps_have_no_distance_from_classicality(seed in any::<u64>(), d in 2usize..5) {
        let mut s = Sampler::new(seed);
        let ch = QuantumChannel::cq(s.cq_outputs(d, 2)).unwrap();
        let rho = PureState::schmidt_aligned(d, &s.distribution(d)).unwrap();
        prop_assert!(prop2_rhs_closedform(&ch, &rho).unwrap() < 1e-24);
        prop_assert!(prop2_lhs_bruteforce(&ch, &rho).unwrap() < 1e-24);
    }
}
