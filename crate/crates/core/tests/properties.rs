use proptest::prelude::*;

use torsionlab::asymmetry::{fraenkel, AsymmetryConfig};
use torsionlab::brownian::{ball_lifetime, closed_form_lifetime, ellipse_lifetime, grid_torsion};
use torsionlab::certify::{constants, ellipse_deficit_inf, ellipse_deficit_p, rhs_exponent};
use torsionlab::level::{self, Exponent};
use torsionlab::rng;
use torsionlab::stable::{a_n_alpha, stable_ball_lifetime, FractionalConfig};
use torsionlab::Domain;

use rand::Rng;

fn quick() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ball_lifetime_scales_quadratically(r in 0.1f64..5.0, s in 0.1f64..4.0, fx in -0.7f64..0.7, fy in -0.7f64..0.7) {
        let x = [fx * r, fy * r];
        let u = ball_lifetime(r, &x, 2).unwrap();
        let v = ball_lifetime(s * r, &[s * x[0], s * x[1]], 2).unwrap();
        prop_assert!((v - s * s * u).abs() <= 1e-12 * v.abs().max(1e-300));
        prop_assert!(u <= ball_lifetime(r, &[0.0, 0.0], 2).unwrap());
    }

    #[test]
    fn ellipse_center_deficit_matches_family_formula(eps in 0.0f64..2.0) {
        let u = ellipse_lifetime(eps, &[0.0, 0.0]);
        let d = Domain::ellipse_eps(eps).unwrap();
        let ub = d.measure().unwrap() / (4.0 * std::f64::consts::PI);
        let delta = 1.0 - u / ub;
        prop_assert!((delta - ellipse_deficit_inf(eps)).abs() < 1e-12);
        prop_assert!((0.0..1.0).contains(&delta));
    }

    #[test]
    fn ellipse_deficits_grow_with_p(eps in 0.01f64..1.0, p in 1.0f64..6.0, q in 0.0f64..3.0) {
        let a = ellipse_deficit_p(eps, p);
        let b = ellipse_deficit_p(eps, p + q);
        prop_assert!(a <= b + 1e-15);
        prop_assert!(a >= ellipse_deficit_inf(eps) - 1e-15);
    }

    #[test]
    fn rhs_exponent_is_two_plus_kappa(p in 1.0f64..50.0) {
        prop_assert_eq!(rhs_exponent(Exponent::Finite(p)), 2.0 + p);
        prop_assert_eq!(rhs_exponent(Exponent::Infinity), 3.0);
    }

    #[test]
    fn constants_are_positive_and_consistent(n in 2usize..6, beta in 1e-6f64..2.0, p in 1.0f64..8.0) {
        let k = constants(n, Exponent::Finite(p), beta, None).unwrap();
        let omega = torsionlab::geometry::unit_ball_volume(n);
        prop_assert!((k.c_n - beta * omega.powf(1.0 / n as f64)).abs() <= 1e-12 * k.c_n);
        prop_assert!(k.c_n_p.unwrap() > 0.0 && k.c_n_inf > 0.0 && k.c_tilde_n > 0.0);
        // halving β halves C_n and cannot increase the other constants
        let h = constants(n, Exponent::Finite(p), beta / 2.0, None).unwrap();
        prop_assert!((h.c_n * 2.0 - k.c_n).abs() <= 1e-12 * k.c_n);
        prop_assert!(h.c_n_p.unwrap() <= k.c_n_p.unwrap() && h.c_n_inf <= k.c_n_inf);
    }

    #[test]
    fn ball_distribution_is_monotone_and_bounded(n in 2usize..5, v in 0.1f64..10.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let top = ball_lifetime(torsionlab::geometry::equivalent_ball_radius(v, n).unwrap(), &vec![0.0; n], n).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let m_lo = level::ball_distribution(n, v, lo * top);
        let m_hi = level::ball_distribution(n, v, hi * top);
        prop_assert!(m_hi <= m_lo + 1e-12);
        prop_assert!(m_lo <= v * (1.0 + 1e-12));
        prop_assert!(m_hi >= 0.0);
    }

    #[test]
    fn stable_ball_lifetime_scales_with_alpha(alpha in 0.2f64..1.99, r in 0.2f64..3.0, s in 0.2f64..3.0, f in 0.0f64..0.9) {
        let cfg = FractionalConfig::new(2, alpha, 0.7).unwrap();
        let x = [f * r, 0.0];
        let u = stable_ball_lifetime(&cfg, r, &x, 2).unwrap();
        let v = stable_ball_lifetime(&cfg, s * r, &[s * x[0], 0.0], 2).unwrap();
        prop_assert!((v - s.powf(alpha) * u).abs() <= 1e-10 * v.max(1e-300));
        prop_assert!(a_n_alpha(2, alpha).unwrap() > 0.0);
    }

    #[test]
    fn random_streams_are_reproducible(seed in any::<u64>(), k in 0u64..1_000_000) {
        let a: Vec<u64> = (0..4).map({ let mut r = rng::stream(seed, k); move |_| r.random() }).collect();
        let b: Vec<u64> = (0..4).map({ let mut r = rng::stream(seed, k); move |_| r.random() }).collect();
        let c: u64 = rng::stream(seed, k + 1).random();
        prop_assert_eq!(&a, &b);
        prop_assert_ne!(a[0], c);
    }
}

proptest! {
    #![proptest_config(quick())]

    #[test]
    fn asymmetry_is_invariant_under_similarities(eps in 0.05f64..0.8, r in 0.3f64..3.0, tx in -2.0f64..2.0, ty in -2.0f64..2.0) {
        let cfg = AsymmetryConfig::default();
        let d = Domain::ellipse_eps(eps).unwrap();
        let a = fraenkel(&d, &cfg).unwrap().a;
        let moved = d.scale(r).unwrap().translate(&[tx, ty]).unwrap();
        let b = fraenkel(&moved, &cfg).unwrap().a;
        prop_assert!((a - b).abs() < 1e-4, "A = {a} vs {b}");
        prop_assert!(a > 0.0 && a < 2.0);
    }

    #[test]
    fn distribution_function_is_non_increasing(w in 1.0f64..2.0, h in 1.0f64..2.0) {
        let d = Domain::rectangle(vec![0.0, 0.0], vec![w, h]).unwrap();
        let f = grid_torsion(&d, 32).unwrap();
        let mu = level::distribution_function(&f, 64).unwrap();
        let top = f.max();
        let mut prev = f64::INFINITY;
        for k in 0..=40 {
            let m = mu.eval(top * k as f64 / 40.0);
            prop_assert!(m <= prev + 1e-12);
            prev = m;
        }
        prop_assert!(mu.eval(0.0) <= f.mask_volume() * (1.0 + 1e-9));
    }

    #[test]
    fn layer_cake_agrees_with_cell_sums(w in 1.0f64..2.0, h in 1.0f64..2.0, p in 1.0f64..3.0) {
        let d = Domain::rectangle(vec![0.0, 0.0], vec![w, h]).unwrap();
        let f = grid_torsion(&d, 48).unwrap();
        let mu = level::distribution_function(&f, 4096).unwrap();
        let direct: f64 = f.values.iter().map(|u| u.powf(p)).sum::<f64>() * f.grid.cell_volume();
        let cake = level::layer_cake(&mu, p);
        prop_assert!((cake - direct).abs() < 2e-3 * direct, "{cake} vs {direct}");
    }

    #[test]
    fn grid_torsion_stays_below_ball_center_value(w in 0.5f64..2.0, h in 0.5f64..2.0) {
        // maximum principle plus the expected-lifetime inequality
        let d = Domain::rectangle(vec![0.0, 0.0], vec![w, h]).unwrap();
        let f = grid_torsion(&d, 48).unwrap();
        let ub = torsionlab::brownian::ball_center_lifetime(&d).unwrap();
        prop_assert!(f.values.iter().all(|&u| u >= 0.0 && u <= ub));
    }

    #[test]
    fn closed_form_deficit_is_a_fraction(eps in 0.0f64..1.5, s in 0.0f64..0.95, th in 0.0f64..std::f64::consts::TAU) {
        let d = Domain::ellipse_eps(eps).unwrap();
        let x = [s * th.cos(), s * (1.0 + eps) * th.sin()];
        let u = closed_form_lifetime(&d, &x).unwrap();
        let ub = torsionlab::brownian::ball_center_lifetime(&d).unwrap();
        prop_assert!(u > 0.0 && u <= ub * (1.0 + 1e-12));
    }
}
