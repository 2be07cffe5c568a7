use fk_lab::action::{periodic_action, MultiStartOptions};
use fk_lab::birkhoff::GapInterval;
use fk_lab::lattice::PeriodicConfig;
use fk_lab::perturbation::*;
use fk_lab::potentials::{builtin, OnsiteTerm};
use proptest::prelude::*;
use std::sync::Arc;

// closed form of the step, evaluated without jets
fn step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        1.0 / (1.0 + (1.0 / u - 1.0 / (1.0 - u)).exp())
    }
}

#[test]
fn step_derivatives_match_closed_form() {
    let h = 1e-4;
    for i in 1..40 {
        let u = i as f64 / 40.0;
        let d = smooth_step_derivs(u, 2);
        assert!((d[0] - step(u)).abs() < 1e-14);
        let d1 = (step(u + h) - step(u - h)) / (2.0 * h);
        let d2 = (step(u + h) - 2.0 * step(u) + step(u - h)) / (h * h);
        assert!((d[1] - d1).abs() < 1e-6 * (1.0 + d1.abs()), "{u}: {} vs {d1}", d[1]);
        assert!((d[2] - d2).abs() < 1e-4 * (1.0 + d2.abs()), "{u}: {} vs {d2}", d[2]);
    }
}

#[test]
fn c_k_bounds_sampled_bump_derivatives() {
    for k in 2..=4 {
        let c = c_k(k);
        let mut sup: f64 = 1.0;
        for i in 0..=20_000 {
            let t = i as f64 / 20_000.0;
            for v in unit_bump_derivs(t, k) {
                sup = sup.max(v.abs());
            }
        }
        assert!(sup <= c, "k={k}: sampled {sup} > C_k {c}");
        // and the bound is not loose
        assert!(c <= sup * 1.01, "k={k}: {c} vs {sup}");
    }
    // the second-order constant is 16·max|S″| up to padding
    let m2 = (0..=20_000).map(|i| smooth_step_derivs(i as f64 / 20_000.0, 2)[2].abs()).fold(0.0, f64::max);
    assert!((c_k(2) - 16.0 * m2).abs() / c_k(2) < 1e-3);
}

#[test]
fn bump_shape() {
    let b = make_bump(0.2, 0.5, 0.01, 3).unwrap();
    let want = 0.01 * 0.3f64.powi(3) / b.c_k;
    assert_eq!(b.plateau(), (0.2 + 0.075, 0.5 - 0.075));
    for i in 0..=10 {
        let xi = 0.275 + 0.15 * i as f64 / 10.0;
        assert!((b.value(xi) - want).abs() <= 1e-15);
    }
    for i in 0..=70 {
        assert_eq!(b.value(0.5 + i as f64 * 0.01), 0.0);
    }
    assert!(b.sampled_ck_norm(20_000) <= 0.01);
    // wraps around the circle
    let w = make_bump(0.9, 1.1, 0.01, 2).unwrap();
    assert!(w.value(0.0) > 0.0 && w.value(1.0) == w.value(0.0));
    assert_eq!(w.value(0.5), 0.0);
}

#[test]
fn bump_rejects_bad_input() {
    assert!(make_bump(0.5, 0.2, 0.01, 2).is_err());
    assert!(make_bump(0.0, 1.5, 0.01, 2).is_err());
    assert!(make_bump(0.1, 0.2, 0.0, 2).is_err());
    assert!(make_bump(0.1, 0.2, 0.01, 1).is_err());
}

#[test]
fn bump_serde_round_trip() {
    let b = make_bump(0.2, 0.5, 0.01, 3).unwrap();
    let s = serde_json::to_string(&b).unwrap();
    assert_eq!(serde_json::from_str::<BumpSpec>(&s).unwrap(), b);
}

#[test]
fn cantor_bump_sizes_halve() {
    let gaps = vec![
        GapInterval::new(0.0, 0.3).unwrap(),
        GapInterval::new(0.4, 0.6).unwrap(),
        GapInterval::new(0.7, 0.8).unwrap(),
    ];
    let c = cantor_bump(&gaps, 0.01, 2, 64).unwrap();
    let eps: Vec<f64> = c.bumps.iter().map(|b| b.eps).collect();
    assert_eq!(eps, vec![0.01, 0.005, 0.0025]);
    assert!(c.sampled_ck_norm(20_000) <= 0.01);
    // supports are disjoint, so the sum equals each piece on its plateau
    assert_eq!(c.derivative(0.5, 0), c.bumps[1].plateau_value());
    let overlapping = vec![GapInterval::new(0.0, 0.3).unwrap(), GapInterval::new(0.2, 0.4).unwrap()];
    assert!(cantor_bump(&overlapping, 0.01, 2, 64).is_err());
}

#[test]
fn perturbed_action_adds_onsite_sum() {
    let f = builtin("fk_nn", 0.4).unwrap();
    let b = make_bump(0.1, 0.3, 0.02, 2).unwrap();
    let g = perturb(&f, Arc::new(b.clone()));
    let x = PeriodicConfig::new(3, 1, vec![0.2, 0.5, 0.9]).unwrap();
    let extra: f64 = x.values.iter().map(|&v| b.value(v)).sum();
    assert!((periodic_action(&g, &x) - periodic_action(&f, &x) - extra).abs() < 1e-14);
}

#[test]
fn destroy_nondegenerate_minimizer() {
    // λ = 1 has isolated minimizers: a bump in the largest gap leaves them alone
    let f = builtin("fk_nn", 1.0).unwrap();
    let (_, rep) = destroy_periodic(&f, 5, 3, 0.01, 2, &DestroyOptions::new(10, 4)).unwrap();
    assert_eq!(rep.y_min_action_change, 0.0);
    assert!(rep.gap.len() >= 0.2 - 1e-12);
    assert!(rep.all_translates, "{:?}", rep.reminimized);
    assert!(rep.probes.iter().all(|p| p.pass));
    let mut opts = DestroyOptions::new(10, 4);
    opts.multistart = MultiStartOptions::new(0, 0);
    assert!(destroy_periodic(&f, 5, 3, 0.01, 2, &opts).is_err());
}

proptest! {
    #[test]
    fn step_symmetry(u in 0.0f64..1.0) {
        prop_assert!((step(u) + step(1.0 - u) - 1.0).abs() < 1e-14);
        let a = smooth_step_derivs(u, 3);
        let b = smooth_step_derivs(1.0 - u, 3);
        // S(1−u) = 1 − S(u): odd derivatives agree, even ones flip
        prop_assert!((a[1] - b[1]).abs() < 1e-9 * (1.0 + a[1].abs()));
        prop_assert!((a[2] + b[2]).abs() < 1e-8 * (1.0 + a[2].abs()));
    }

    #[test]
    fn bump_is_bounded_and_supported(lo in 0.0f64..1.0, w in 0.01f64..0.9, eps in 1e-4f64..1.0, xi in -2.0f64..2.0) {
        let b = make_bump(lo, lo + w, eps, 2).unwrap();
        let v = b.value(xi);
        prop_assert!(v >= 0.0 && v <= b.plateau_value());
        let d = (xi - lo).rem_euclid(1.0);
        if d >= w {
            prop_assert_eq!(v, 0.0);
        }
        for n in 0..=2 {
            prop_assert!(b.derivative(xi, n).abs() <= eps * (1.0 + 1e-12));
        }
    }
}
