use std::f64::consts::PI;

use fk_lab::lattice::{PeriodicConfig, SeqWindow, Sequence};
use fk_lab::potentials::*;
use proptest::prelude::*;

fn sg(lambda: f64, x: f64) -> f64 {
    lambda / (2.0 * PI) * (2.0 * PI * x).sin()
}

// direct pair sums: the nearest family is ½Σ(x_{j+1} − x_j)² + ΣV(x_j)
fn total_nn(lambda: f64, x: &[f64]) -> f64 {
    let inner = 1..x.len() - 1;
    let pairs: f64 = inner.clone().map(|j| 0.25 * ((x[j] - x[j - 1]).powi(2) + (x[j + 1] - x[j]).powi(2))).sum();
    pairs + inner.map(|j| sg(lambda, x[j])).sum::<f64>()
}

#[test]
fn builtin_names() {
    assert_eq!(builtin("fk_nn", 1.0).unwrap().range(), 1);
    assert_eq!(builtin("fk_nnn", 1.0).unwrap().range(), 2);
    assert!(builtin("standard", 1.0).is_err());
    let f = builtin("fk_nn", 0.3).unwrap();
    assert_eq!(LocalPotentialFamily::from_spec(&f.spec()).unwrap().spec(), f.spec());
}

#[test]
fn local_energy_formula() {
    let f = builtin("fk_nn", 0.8).unwrap();
    let w = SeqWindow::new(0, vec![0.1, 0.5, 0.7]).unwrap();
    let e = f.local_energy(1, &w).unwrap();
    let want = 0.25 * 0.16 + 0.25 * 0.04 + sg(0.8, 0.5);
    assert!((e - want).abs() < 1e-15);
    assert!(f.local_energy(0, &w).is_err());
}

#[test]
fn twist_derivative_is_sine_gordon_force() {
    let f = builtin("fk_nn", 0.6).unwrap();
    for x in [0.0, 0.1, 0.37] {
        let h = 1e-6;
        let fd = (sg(0.6, x + h) - sg(0.6, x - h)) / (2.0 * h);
        assert!((f.twist_potential_derivative(x).unwrap() - fd).abs() < 1e-8);
    }
}

#[test]
fn conditions_hold_for_builtins() {
    for (name, lambda) in [("fk_nn", 0.0), ("fk_nn", 1.0), ("fk_nnn", 0.5)] {
        let f = builtin(name, lambda).unwrap();
        let samples = band_samples(12, 2.0, 200, 1);
        let rep = verify_conditions(&f, &samples, 2.0);
        assert!(!rep.any_violated(), "{name} {lambda}: {rep:?}");
    }
}

#[test]
fn derivative_bounds_dominate_samples() {
    let f = builtin("fk_nnn", 1.0).unwrap();
    let b = f.derivative_bounds(1.0).unwrap();
    for w in band_samples(5, 1.0, 200, 3) {
        assert!(f.window_gradient(&w.values).iter().all(|g| g.abs() <= b.first + 1e-12));
        assert!(f.window_hessian(&w.values).iter().all(|h| h.abs() <= b.second + 1e-12));
    }
}

proptest! {
    #[test]
    fn nn_action_matches_pair_sum(lambda in -2.0f64..2.0, x in proptest::collection::vec(-3.0f64..3.0, 3..12)) {
        let f = builtin("fk_nn", lambda).unwrap();
        let w = SeqWindow::new(0, x.clone()).unwrap();
        let s: f64 = (1..x.len() as i64 - 1).map(|j| f.local_energy(j, &w).unwrap()).sum();
        prop_assert!((s - total_nn(lambda, &x)).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences(
        lambda in -1.5f64..1.5,
        nnn in any::<bool>(),
        seed in 0u64..1000,
        i in 0i64..6,
    ) {
        let f = builtin(if nnn { "fk_nnn" } else { "fk_nn" }, lambda).unwrap();
        let x = band_samples(20, 0.5, 1, seed).pop().unwrap();
        let site = 7 + i;
        let g = f.grad_component(site, &x).unwrap();
        let h = 1e-5;
        let mut up = x.clone();
        let mut dn = x.clone();
        up.values[site as usize] += h;
        dn.values[site as usize] -= h;
        let r = f.range() as i64;
        let sum = |w: &SeqWindow| -> f64 { (site - r..=site + r).map(|j| f.local_energy(j, w).unwrap()).sum() };
        let fd = (sum(&up) - sum(&dn)) / (2.0 * h);
        prop_assert!((g - fd).abs() <= 1e-6 * (1.0 + g.abs()), "{g} vs {fd}");
    }

    #[test]
    fn hessian_symmetric(lambda in -1.0f64..1.0, seed in 0u64..500) {
        let f = builtin("fk_nnn", lambda).unwrap();
        let x = band_samples(20, 0.5, 1, seed).pop().unwrap();
        for i in 6..10 {
            for k in i - 3..=i + 3 {
                let a = f.hessian_entry(i, k, &x).unwrap();
                let b = f.hessian_entry(k, i, &x).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shift_invariance(lambda in -1.0f64..1.0, seed in 0u64..500, l in -5i64..5) {
        let f = builtin("fk_nnn", lambda).unwrap();
        let x = band_samples(12, 0.5, 1, seed).pop().unwrap();
        let y = x.shift(3, l);
        let a = f.local_energy(5, &x).unwrap();
        let b = f.local_energy(8, &y).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn periodic_config_windows() {
    let f = builtin("fk_nn", 0.0).unwrap();
    let x = PeriodicConfig::linear(3, 1, 0.0);
    let w = f.window(&x, 0).unwrap();
    assert_eq!(w.len(), 3);
    assert!((w[2] - w[1] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(x.at(-100).unwrap(), x.get(-100));
}
