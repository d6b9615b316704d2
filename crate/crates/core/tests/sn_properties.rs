use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snewton_core::linalg::lambda_min;
use snewton_core::sn::lyapunov_w;
use snewton_core::{
    solve_reference, synth_logistic, synth_quadratic, Certified, FiniteSum, QuadraticSum, ReferenceOptions,
    SnState, Vector,
};

fn random_anchors(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Vec<Vector> {
    (0..n)
        .map(|_| Vector::from_fn(d, |_, _| scale * (2.0 * rng.random::<f64>() - 1.0)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_step_exact_on_quadratics(seed in 0u64..10_000, n in 1usize..=12, d in 1usize..=6, tau_frac in 0.0f64..1.0) {
        let q = synth_quadratic(seed, n, d, 0.1, 10.0).unwrap();
        let x_star = q.minimizer().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let anchors = random_anchors(&mut rng, n, d, 5.0);
        let tau = 1 + ((n - 1) as f64 * tau_frac) as usize;
        let mut s = SnState::new(&q, anchors, tau, seed).unwrap();
        let x1 = s.step(&q).unwrap();
        prop_assert!((x1 - &x_star).norm() <= 1e-10 * (1.0 + x_star.norm()));
    }

    #[test]
    fn sampled_subsets_are_valid(seed in 0u64..1000, n in 1usize..=9, tau_frac in 0.0f64..1.0) {
        let q = synth_quadratic(1, n, 1, 1.0, 1.0).unwrap();
        let tau = 1 + ((n - 1) as f64 * tau_frac) as usize;
        let mut s = SnState::new(&q, Vector::zeros(1), tau, seed).unwrap();
        for _ in 0..5 {
            s.step(&q).unwrap();
            let sub = s.last_subset();
            prop_assert_eq!(sub.len(), tau);
            prop_assert!(sub.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(sub.iter().all(|&i| i < n));
        }
    }
}

#[test]
fn anchors_at_optimum_are_a_fixed_point() {
    let q = synth_quadratic(4, 5, 3, 0.5, 2.0).unwrap();
    let xs = q.minimizer().unwrap();
    let mut s = SnState::new(&q, xs.clone(), 2, 0).unwrap();
    assert!((s.step(&q).unwrap() - &xs).norm() <= 1e-12);
    let chk = s.check_theory(&xs, Some(Certified { mu: 0.5, hess_lip: 0.0 })).unwrap();
    assert!(chk.expected.exact <= 1e-24);
    assert!(!chk.report.any_failed());
}

#[test]
fn quadratic_distance_bound_equality_case() {
    let q = QuadraticSum::scalar(&[1.0, 2.0], &[1.0, -1.0]).unwrap();
    let s = SnState::new(&q, vec![Vector::from_element(1, 5.0), Vector::from_element(1, -5.0)], 1, 0).unwrap();
    let xs = q.minimizer().unwrap();
    let c = s.check_distance_bound(&xs, Certified { mu: 1.0, hess_lip: 0.0 }).unwrap();
    assert_eq!(c.rhs, 0.0);
    assert!(c.lhs <= 1e-10 && c.passed());
}

#[test]
fn expectation_identity_small_cases() {
    let p = synth_logistic(7, 3, 2, 0.1).unwrap();
    let r = solve_reference(&p, &Vector::zeros(2), ReferenceOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = SnState::new(&p, random_anchors(&mut rng, 3, 2, 1.0), 2, 7).unwrap();
    let e = s.expected_next_w(&r.x_star).unwrap();
    let en = e.enumerated.unwrap();
    assert!((en - e.exact).abs() <= 1e-12 * e.exact);

    let full = SnState::new(&p, random_anchors(&mut rng, 3, 2, 1.0), 3, 7).unwrap();
    let e = full.expected_next_w(&r.x_star).unwrap();
    assert!((e.exact - e.next_dist_sq).abs() <= 1e-15 * e.exact);
}

/// The next-iterate distance bound on a ridge-dominated logistic fixture over 100 steps.
#[test]
fn distance_bound_holds_along_trajectory() {
    let p = synth_logistic(2, 5, 3, 0.5).unwrap();
    let r = solve_reference(&p, &Vector::zeros(3), ReferenceOptions::default()).unwrap();
    let cert = Certified {
        mu: p.strong_convexity(),
        hess_lip: p.hessian_lipschitz(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut s = SnState::new(&p, random_anchors(&mut rng, 5, 3, 2.0), 1, 3).unwrap();
    for _ in 0..100 {
        let c = s.check_distance_bound(&r.x_star, cert).unwrap();
        assert!(c.passed(), "lhs {} rhs {}", c.lhs, c.rhs);
        s.step(&p).unwrap();
    }
}

#[test]
fn sums_do_not_drift_over_many_updates() {
    let p = synth_logistic(3, 20, 4, 1e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut s = SnState::new(&p, random_anchors(&mut rng, 20, 4, 3.0), 1, 5).unwrap();
    let mu = p.strong_convexity();
    for k in 0..10_000 {
        s.step(&p).unwrap();
        if k % 2500 == 0 {
            let h = s.hess_sum() / 20.0;
            assert!(lambda_min(&h) >= mu - 1e-8);
        }
    }
    assert!(s.sum_drift(&p) <= 1e-8, "drift {}", s.sum_drift(&p));
}

#[test]
fn lyapunov_w_is_nonincreasing_in_expectation_inside_basin() {
    let p = synth_logistic(5, 4, 2, 1.0).unwrap();
    let r = solve_reference(&p, &Vector::zeros(2), ReferenceOptions::default()).unwrap();
    let radius = p.strong_convexity() / p.hessian_lipschitz();
    let anchors: Vec<Vector> = (0..4)
        .map(|i| {
            let dir = Vector::from_vec(vec![(i as f64).cos(), (i as f64).sin()]);
            &r.x_star + dir * (0.9 * radius)
        })
        .collect();
    assert!(lyapunov_w(&anchors, &r.x_star) <= radius * radius);
    let s = SnState::new(&p, anchors, 2, 0).unwrap();
    let chk = s
        .check_theory(
            &r.x_star,
            Some(Certified {
                mu: p.strong_convexity(),
                hess_lip: p.hessian_lipschitz(),
            }),
        )
        .unwrap();
    let c = chk.report.get("w_basin_contraction").unwrap();
    assert!(c.passed());
    assert!(chk.expected.exact <= 0.625 * chk.expected.w + 1e-12);
}
