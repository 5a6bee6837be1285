use kerrscope::analytic::{linear_limit, log_normalization, observables, photon_distribution, NORMALIZATION_RTOL};
use kerrscope::lindblad::{observables_full, steady_state, steady_state_at_dim, FockConfig};
use kerrscope::model::{scale, unscale, ModelParams, NonlinearSign};
use proptest::prelude::*;

fn sign() -> impl Strategy<Value = NonlinearSign> {
    prop_oneof![Just(NonlinearSign::Attractive), Just(NonlinearSign::Repulsive)]
}

/// Weak-excitation regime used throughout: Ω/α ≤ 0.06, γ/α ≤ 1e-3.
fn weak_scaled() -> impl Strategy<Value = (f64, f64, f64, u32, NonlinearSign)> {
    (-7.0..1.0f64, 1e-3..0.06f64, 1e-4..1e-3f64, 10u32..=80, sign())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scale_round_trip(delta in -10.0..10.0f64, alpha in 0.1..5.0f64, eps in 0.0..3.0f64,
                        kappa in 1e-3..2.0f64, two_s in 1u32..500, sign in sign()) {
        let p = ModelParams::new(delta, alpha, eps, kappa, sign).unwrap();
        let back = unscale(&scale(&p, two_s).unwrap());
        prop_assert!((back.kappa - kappa).abs() <= 1e-14 * kappa);
        prop_assert!((back.epsilon - eps).abs() <= 1e-14 * eps.max(f64::MIN_POSITIVE));
        prop_assert_eq!((back.delta, back.alpha, back.sign), (delta, alpha, sign));
    }

    #[test]
    fn sigma_linear_in_drive_phi_independent(delta in -5.0..5.0f64, eps in 0.01..2.0f64,
                                            kappa in 1e-3..1.0f64, sign in sign()) {
        let p = ModelParams::new(delta, 1.0, eps, kappa, sign).unwrap();
        let a = scale(&p, 50).unwrap();
        let b = scale(&p.with_epsilon(2.0 * eps), 50).unwrap();
        prop_assert_eq!(b.sigma.norm(), 2.0 * a.sigma.norm());
        prop_assert_eq!(a.phi, b.phi);
    }

    #[test]
    fn analytic_distribution_is_normalized((delta, omega, gamma, two_s, sign) in weak_scaled()) {
        let p = ModelParams::from_scaled(delta, 1.0, omega, gamma, two_s, sign).unwrap();
        let s = scale(&p, two_s).unwrap();
        let d = photon_distribution(&s).unwrap();
        prop_assert!(d.probs().iter().all(|x| *x >= 0.0 && x.is_finite()));
        prop_assert!((d.total() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(d.q_max(), two_s as usize);
        let z = log_normalization(&s).unwrap();
        prop_assert!((z.closed - z.direct).exp_m1().abs() <= NORMALIZATION_RTOL);
    }

    #[test]
    fn zero_drive_gives_vacuum(delta in -5.0..5.0f64, alpha in 0.0..3.0f64, sign in sign()) {
        let p = ModelParams::new(delta, alpha, 0.0, 0.05, sign).unwrap();
        let d = photon_distribution(&scale(&p, 50).unwrap()).unwrap();
        prop_assert_eq!(d.probs()[0], 1.0);
    }

    #[test]
    fn analytic_mirror((delta, omega, gamma, two_s, _s) in weak_scaled()) {
        let p = ModelParams::from_scaled(delta, 1.0, omega, gamma, two_s, NonlinearSign::Attractive).unwrap();
        let a = photon_distribution(&scale(&p, two_s).unwrap()).unwrap();
        let b = photon_distribution(&scale(&p.mirrored(), two_s).unwrap()).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn engines_agree_in_weak_regime(delta in -7.0..1.0f64, omega in 1e-3..0.06f64) {
        let p = ModelParams::from_scaled(delta, 1.0, omega, 1e-3, 50, NonlinearSign::Attractive).unwrap();
        let a = photon_distribution(&scale(&p, 50).unwrap()).unwrap();
        let (_, _, n) = observables_full(&steady_state(&p, &FockConfig::default()).unwrap());
        let worst = a.probs().iter().zip(n.probs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        // The closed form carries an O(⟨n⟩/2s) error; the worst point seen on
        // the default detuning grid is 1.18e-2.
        prop_assert!(worst <= 1.5e-2, "Δ={} Ω={}: {}", delta, omega, worst);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_limit_exact(eps in 0.01..0.3f64, kappa in 0.1..1.0f64, delta in -1.0..1.0f64) {
        let p = ModelParams::new(delta, 0.0, eps, kappa, NonlinearSign::Attractive).unwrap();
        let (obs, _, _) = observables_full(&steady_state(&p, &FockConfig::default()).unwrap());
        let exact = linear_limit(&p).mean_n;
        prop_assert!(((obs.mean_n - exact) / exact).abs() <= 1e-8);
    }

    #[test]
    fn density_matrix_invariants(delta in -7.0..1.0f64, omega in 0.0..0.3f64, sign in sign()) {
        let p = ModelParams::from_scaled(delta, 1.0, omega, 1e-3, 50, sign).unwrap();
        let rho = steady_state(&p, &FockConfig::default()).unwrap();
        let diag = rho.diagnostics();
        prop_assert!(diag.is_physical(), "{:?}", diag);
        let (_, fid, dist) = observables_full(&rho);
        let higher = dist.tail_mass(2);
        prop_assert!((fid.phi_plus + fid.phi_minus + higher - 1.0).abs() <= 1e-10);
        prop_assert!(fid.phi_plus + fid.phi_minus <= 1.0 + 1e-10);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&fid.phi_plus));
        prop_assert!((-1e-12..=1.0).contains(&fid.phi_minus));
    }

    #[test]
    fn numeric_mirror(delta in -7.0..1.0f64, omega in 0.0..0.1f64) {
        let p = ModelParams::from_scaled(delta, 1.0, omega, 1e-3, 50, NonlinearSign::Attractive).unwrap();
        let a = steady_state(&p, &FockConfig::default()).unwrap();
        let b = steady_state(&p.mirrored(), &FockConfig::default()).unwrap();
        // Diagonals equal; coherences map to (−1)^(m+n) times their conjugates.
        for m in 0..a.dim() {
            for n in 0..a.dim() {
                let s = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
                prop_assert!((a.get(m, n).conj() * s - b.get(m, n)).norm() <= 1e-10);
            }
        }
        let (oa, _, _) = observables_full(&a);
        let (ob, _, _) = observables_full(&b);
        prop_assert!((oa.mean_n - ob.mean_n).abs() <= 1e-10);
    }

    #[test]
    fn truncation_insensitive_when_weak(delta in -7.0..1.0f64, omega in 1e-3..0.06f64) {
        let p = ModelParams::from_scaled(delta, 1.0, omega, 1e-3, 50, NonlinearSign::Attractive).unwrap();
        let n20 = observables_full(&steady_state_at_dim(&p, 20).unwrap()).0.mean_n;
        let n40 = observables_full(&steady_state_at_dim(&p, 40).unwrap()).0.mean_n;
        prop_assert!((n20 - n40).abs() <= 1e-8);
    }
}

#[test]
fn g2_consistent_with_unnormalized_moment() {
    let p = ModelParams::from_scaled(-2.0, 1.0, 0.06, 1e-3, 50, NonlinearSign::Attractive).unwrap();
    let o = observables(&photon_distribution(&scale(&p, 50).unwrap()).unwrap());
    assert!((o.g2.unwrap() - o.g2_unnorm / o.mean_n.powi(2)).abs() < 1e-15);
    assert!(o.mean_n <= 50.0);
}
