use oneshot_core::entropy::{
    conditional_von_neumann, hmax_cond, hmax_projection_check, hmin_blocks, hmin_coherent_classical, hmin_cond,
    hmin_smooth, holevo_information, purify, qaep_trend, shannon, BoundDirection, Cut, SolverStatus,
};
use oneshot_core::linalg::{real, CMatrix};
use oneshot_core::random::Sampler;
use oneshot_core::Operator;
use proptest::prelude::*;

fn h2(p: f64) -> f64 {
    shannon(&[p, 1.0 - p])
}

// max over guessing functions g: Y -> X of sum_y p(g(y), y), by enumeration.
fn guessing_oracle(p: &[f64], dx: usize, dy: usize) -> f64 {
    let mut best: f64 = 0.0;
    let total = dx.pow(dy as u32);
    for code in 0..total {
        let mut c = code;
        let mut s = 0.0;
        for y in 0..dy {
            let x = c % dx;
            c /= dx;
            s += p[x * dy + y];
        }
        best = best.max(s);
    }
    best
}

#[test]
fn conditional_entropy_of_bell_state() {
    let h = conditional_von_neumann(&Operator::max_entangled(2), &Cut::first_second()).unwrap();
    assert!((h + 1.0).abs() < 1e-12);
}

#[test]
fn product_state_min_entropy() {
    let mut s = Sampler::new(31);
    for _ in 0..5 {
        let ra = s.density(3, 2);
        let rb = s.density(2, 2);
        let mu = ra.eigenvalues().unwrap().into_iter().fold(0.0, f64::max);
        let cert = hmin_cond(&ra.tensor(&rb), &Cut::first_second()).unwrap();
        assert!((cert.value + mu.log2()).abs() < 1e-6, "{} vs {}", cert.value, -mu.log2());
        assert_eq!(cert.status, SolverStatus::Converged);
        assert!(cert.feasibility_margin(&ra.tensor(&rb)).unwrap() > -1e-8);
    }
}

#[test]
fn maximally_entangled_min_entropy() {
    for d in 2..=4 {
        let phi = Operator::max_entangled(d);
        let cert = hmin_cond(&phi, &Cut::first_second()).unwrap();
        assert!((cert.value + (d as f64).log2()).abs() < 1e-6);
        assert!(cert.gap <= 1e-7, "d={d} {} {:?} {}", cert.gap, cert.status, cert.iterations);
        assert!(cert.feasibility_margin(&phi).unwrap() > -1e-8);
        assert_eq!(cert.bound_direction, BoundDirection::Exact);
    }
}

#[test]
fn classical_min_entropy_is_guessing_probability() {
    let mut s = Sampler::new(32);
    for (dx, dy) in [(2, 2), (3, 2), (2, 3), (4, 3)] {
        let p = s.distribution(dx * dy);
        let rho = Operator::from_real_diagonal(&[dx, dy], &p).unwrap();
        let cert = hmin_cond(&rho, &Cut::first_second()).unwrap();
        let oracle = -guessing_oracle(&p, dx, dy).log2();
        assert!((cert.value - oracle).abs() < 1e-6, "{} vs {oracle}", cert.value);
    }
}

#[test]
fn smoothing_helps_a_noisy_pure_state() {
    let mut s = Sampler::new(33);
    let psi = s.pure_state(&[2, 2]).density();
    let rho = psi.scale(0.98).add(&Operator::maximally_mixed(&[2, 2]).scale(0.02)).unwrap();
    let exact = hmin_cond(&rho, &Cut::first_second()).unwrap().value;
    let smooth = hmin_smooth(&rho, &Cut::first_second(), 0.1).unwrap();
    assert!(smooth.value > exact + 1e-6, "{} vs {exact}", smooth.value);
    assert_eq!(smooth.bound_direction, BoundDirection::Lower);
    let state = smooth.smoothing_state.as_ref().unwrap();
    assert!(oneshot_core::purified_distance(state, &rho).unwrap() <= 0.1 + 1e-8);
    assert!(smooth.feasibility_margin(state).unwrap() > -1e-8);
}

#[test]
fn max_entropy_of_bell_marginal() {
    let cert = hmax_cond(&Operator::max_entangled(2), &Cut::new(vec![0], vec![])).unwrap();
    assert!((cert.value - 1.0).abs() < 1e-6);
}

#[test]
fn duality_on_random_pure_states() {
    let mut s = Sampler::new(34);
    for _ in 0..10 {
        let d2 = 2 + s.index(2);
        let psi = s.pure_state(&[2, d2, 2]).density();
        let hmin = hmin_cond(&psi, &Cut::new(vec![0], vec![1])).unwrap().value;
        let hmax = hmax_cond(&psi, &Cut::new(vec![0], vec![2])).unwrap().value;
        assert!((hmin + hmax).abs() < 1e-5, "{hmin} {hmax}");
    }
}

#[test]
fn rank_one_projection_does_not_raise_max_entropy() {
    let mut s = Sampler::new(35);
    for _ in 0..5 {
        let rho = s.density_on(&[2, 2], 3);
        let v = s.unit_vector(2);
        let pi = Operator::projector(&[2], &v).unwrap();
        let check = hmax_projection_check(&rho, &pi).unwrap();
        assert!(check.margin >= -1e-8, "{}", check.margin);
    }
}

#[test]
fn product_trend_is_flat() {
    let mut s = Sampler::new(36);
    let ra = s.density(2, 2);
    let rb = s.density(2, 1);
    let mu = ra.eigenvalues().unwrap().into_iter().fold(0.0, f64::max);
    let trend = qaep_trend(&ra.tensor(&rb), 0.0, 3).unwrap();
    for p in &trend.points {
        assert!((p.per_copy + mu.log2()).abs() < 1e-6, "n={} {}", p.n, p.per_copy);
    }
}

#[test]
fn classical_trend_stays_between_min_and_von_neumann() {
    let p = [0.4, 0.1, 0.1, 0.4];
    let rho = Operator::from_real_diagonal(&[2, 2], &p).unwrap();
    let reference = conditional_von_neumann(&rho, &Cut::first_second()).unwrap();
    let trend = qaep_trend(&rho, 0.1, 3).unwrap();
    assert!((trend.reference - reference).abs() < 1e-12);
    let values: Vec<f64> = trend.points.iter().map(|p| p.per_copy).collect();
    let floor = -(0.8f64).log2();
    for v in &values {
        assert!(*v <= reference + 1e-9 && *v >= floor - 1e-9, "{values:?}");
    }
}

#[test]
fn holevo_references() {
    let orth = [Operator::ket_bra(&[2], 0, 0), Operator::ket_bra(&[2], 1, 1)];
    assert!((holevo_information(&[0.5, 0.5], &orth).unwrap() - 1.0).abs() < 1e-12);
    let plus = Operator::new(vec![2], CMatrix::from_element(2, 2, real(0.5))).unwrap();
    let bb84 = [Operator::ket_bra(&[2], 0, 0), plus];
    let c2 = (std::f64::consts::PI / 8.0).cos().powi(2);
    assert!((holevo_information(&[0.5, 0.5], &bb84).unwrap() - h2(c2)).abs() < 1e-12);
    assert!((h2(c2) - 0.600876).abs() < 1e-6);
}

#[test]
fn certificate_serializes_with_fixed_fields() {
    let cert = hmin_cond(&Operator::max_entangled(2), &Cut::first_second()).unwrap();
    let v: serde_json::Value = serde_json::to_value(&cert).unwrap();
    for key in ["value", "eps", "bound_direction", "gap", "status"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["bound_direction"], "exact");
}

#[test]
fn eps_beyond_the_state_is_rejected() {
    let rho = Operator::max_entangled(2);
    assert!(hmin_smooth(&rho, &Cut::first_second(), 1.5).is_err());
    assert!(hmin_smooth(&rho, &Cut::first_second(), -0.1).is_err());
}

#[test]
fn cap_is_enforced() {
    std::env::set_var("ONESHOT_MAX_DIM", "8");
    let rho = Operator::maximally_mixed(&[4, 4]);
    let r = hmin_cond(&rho, &Cut::first_second());
    std::env::remove_var("ONESHOT_MAX_DIM");
    assert!(matches!(r, Err(oneshot_core::Error::CapExceeded { .. })));
}

fn cq_state(s: &mut Sampler, dx: usize, db: usize) -> Operator {
    let q = s.distribution(dx);
    let mut m = CMatrix::zeros(dx * db, dx * db);
    for (x, qx) in q.iter().enumerate() {
        let rank = 1 + s.index(db);
        let r = s.density(db, rank);
        m.view_mut((x * db, x * db), (db, db)).copy_from(&(r.mat() * real(*qx)));
    }
    Operator::new(vec![dx, db], m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn block_solver_agrees_with_generic(seed in any::<u64>(), dx in 2usize..4, e in 1usize..3) {
        let mut s = Sampler::new(seed);
        let rank = 1 + s.index(dx * e);
        let rho = s.coherent_classical(dx, &[e], rank);
        let blocked = hmin_coherent_classical(&rho, 0.0).unwrap();
        let generic = hmin_cond(&rho, &Cut::new(vec![0], vec![1, 2])).unwrap();
        prop_assert!((blocked.value - generic.value).abs() < 1e-6, "{} vs {}", blocked.value, generic.value);
    }

    #[test]
    fn cq_max_entropy_matches_generic_purification(seed in any::<u64>(), dx in 2usize..4, db in 1usize..4) {
        let mut s = Sampler::new(seed);
        let rho = cq_state(&mut s, dx, db);
        let fast = hmax_cond(&rho, &Cut::first_second()).unwrap().value;
        let psi = purify(&rho).unwrap();
        let ac = psi.density().partial_trace(&[0, 2]).unwrap();
        let slow = -hmin_cond(&ac, &Cut::first_second()).unwrap().value;
        prop_assert!((fast - slow).abs() < 1e-5, "{fast} vs {slow}");
    }

    #[test]
    fn min_entropy_bounded_by_dimension(seed in any::<u64>(), da in 2usize..4, db in 1usize..4) {
        let rho = Sampler::new(seed).density_on(&[da, db], da * db);
        let hmin = hmin_cond(&rho, &Cut::first_second()).unwrap().value;
        let lg = (da as f64).log2();
        prop_assert!(hmin >= -lg - 1e-6 && hmin <= lg + 1e-6);
        let hv = conditional_von_neumann(&rho, &Cut::first_second()).unwrap();
        prop_assert!(hmin <= hv + 1e-6);
    }

    #[test]
    fn smoothing_is_monotone_in_eps(seed in any::<u64>()) {
        let rho = Sampler::new(seed).density_on(&[2, 2], 2);
        let cut = Cut::first_second();
        let a = hmin_smooth(&rho, &cut, 0.0).unwrap().value;
        let b = hmin_smooth(&rho, &cut, 0.05).unwrap().value;
        let c = hmin_smooth(&rho, &cut, 0.2).unwrap().value;
        prop_assert!(b >= a - 1e-9 && c >= b - 1e-9);
    }

    #[test]
    fn block_smoothing_stays_in_ball(seed in any::<u64>(), eps in 0.01f64..0.3) {
        let mut s = Sampler::new(seed);
        let rank = 1 + s.index(3);
        let rho = s.coherent_classical(3, &[1], rank);
        let blocks = Operator::new(vec![3, 1], CMatrix::from_fn(3, 3, |r, c| rho.mat()[(r * 4, c * 4)])).unwrap();
        let cert = hmin_blocks(&blocks, eps).unwrap();
        if let Some(state) = &cert.smoothing_state {
            prop_assert!(oneshot_core::purified_distance(state, &blocks).unwrap() <= eps + 1e-8);
        }
    }
}
