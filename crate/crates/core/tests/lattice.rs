use fk_lab::lattice::*;
use proptest::prelude::*;

fn coprime() -> impl Strategy<Value = (usize, i64)> {
    (1usize..12, -15i64..15).prop_filter("coprime", |(p, q)| num_integer::Integer::gcd(&(*p as i64), q) == 1)
}

fn config() -> impl Strategy<Value = PeriodicConfig> {
    coprime().prop_flat_map(|(p, q)| {
        proptest::collection::vec(-0.4f64..0.4, p)
            .prop_map(move |jit| {
                let mut x = PeriodicConfig::linear(p, q, 0.0);
                x.values.iter_mut().zip(jit).for_each(|(v, j)| *v += j);
                x
            })
    })
}

#[test]
fn linear_profile_values() {
    let x = PeriodicConfig::linear(5, 3, 0.1);
    assert_eq!(x.values.len(), 5);
    assert!((x.get(0) - 0.1).abs() < 1e-15);
    assert!((x.get(5) - 3.1).abs() < 1e-15);
    assert!((x.get(-5) + 2.9).abs() < 1e-15);
    assert_eq!(x.rotation_number(), 0.6);
    assert!(rotation_bound_check(&x) < 1e-14);
}

#[test]
fn bad_configs_rejected() {
    assert!(PeriodicConfig::new(0, 1, vec![]).is_err());
    assert!(PeriodicConfig::new(2, 1, vec![0.0]).is_err());
    assert!(PeriodicConfig::new(1, 1, vec![f64::NAN]).is_err());
    assert!(SeqWindow::new(0, vec![]).is_err());
}

#[test]
fn classify_cases() {
    assert_eq!(classify([0.0, 0.0], 1e-12), Ordering::Equal);
    assert_eq!(classify([1.0, 2.0], 1e-12), Ordering::StrictlyBelow);
    assert_eq!(classify([0.0, 2.0], 1e-12), Ordering::WeaklyBelow);
    assert_eq!(classify([-1.0, -2.0], 1e-12), Ordering::StrictlyAbove);
    assert_eq!(classify([1.0, -2.0], 1e-12), Ordering::Incomparable);
    assert_eq!(Ordering::StrictlyBelow.reverse(), Ordering::StrictlyAbove);
}

#[test]
fn different_rotation_numbers_cross() {
    let x = PeriodicConfig::linear(2, 1, 0.0);
    let y = PeriodicConfig::linear(3, 1, 5.0);
    assert_eq!(compare(&x, &y, 1e-12), Ordering::Incomparable);
}

#[test]
fn non_birkhoff_detected() {
    // x_1 and x_2 swapped relative to the linear profile
    let x = PeriodicConfig::new(3, 1, vec![0.9, 0.1, 1.0]).unwrap();
    assert!(!is_birkhoff(&x, 1e-12).birkhoff);
}

#[test]
fn window_ops() {
    let w = SeqWindow::new(-1, vec![0.0, 1.0, 3.0]).unwrap();
    assert_eq!(w.hi(), 1);
    let s = w.shift(1, 2);
    assert_eq!((s.lo, s.values.clone()), (0, vec![2.0, 3.0, 5.0]));
    let m = w.meet(&s).unwrap();
    assert_eq!((m.lo, m.values), (0, vec![1.0, 3.0]));
    assert!(w.at(2).is_err());
    assert_eq!(l1_window(&w, &s, 0, 1).unwrap(), 1.0);
}

proptest! {
    // |pl − qk| is exact for a linear profile: every site moves by l − kq/p
    #[test]
    fn translate_norm_of_linear((p, q) in coprime(), x0 in -1.0f64..1.0, k in -20i64..20, l in -20i64..20) {
        let x = PeriodicConfig::linear(p, q, x0);
        let norm = x.shift(k, l).l1_period(&x);
        let want = (p as i64 * l - q * k).abs() as f64;
        prop_assert!((norm - want).abs() < 1e-9 * (1.0 + want));
    }

    #[test]
    fn linear_is_birkhoff((p, q) in coprime(), x0 in -1.0f64..1.0) {
        prop_assert!(is_birkhoff(&PeriodicConfig::linear(p, q, x0), 1e-12).birkhoff);
    }

    #[test]
    fn shift_composes(x in config(), k1 in -9i64..9, l1 in -9i64..9, k2 in -9i64..9, l2 in -9i64..9) {
        let a = x.shift(k1, l1).shift(k2, l2);
        let b = x.shift(k1 + k2, l1 + l2);
        for i in 1..=x.p as i64 {
            prop_assert!((a.get(i) - b.get(i)).abs() < 1e-9);
        }
        // τ_{p,q} is the identity on X_{p,q}
        let c = x.shift(x.p as i64, x.q);
        prop_assert!(c.l1_period(&x) < 1e-9);
    }

    #[test]
    fn meet_join_lattice(x in config(), dy in proptest::collection::vec(-0.3f64..0.3, 12)) {
        let mut y = x.clone();
        y.values.iter_mut().zip(&dy).for_each(|(v, d)| *v += d);
        let m = x.meet(&y).unwrap();
        let j = x.join(&y).unwrap();
        for i in 1..=x.p as i64 {
            prop_assert!(m.get(i) <= x.get(i).min(y.get(i)));
            prop_assert_eq!(m.get(i) + j.get(i), x.get(i) + y.get(i));
        }
        prop_assert!(compare(&m, &j, 0.0).is_ordered());
    }

    #[test]
    fn compare_is_antisymmetric(x in config(), c in -0.5f64..0.5) {
        let mut y = x.clone();
        y.values.iter_mut().for_each(|v| *v += c);
        let o = compare(&x, &y, 1e-12);
        prop_assert_eq!(compare(&y, &x, 1e-12), o.reverse());
        prop_assert!(o.is_ordered());
    }

    #[test]
    fn embed_and_reduce(x in config(), n in 1usize..4) {
        let big = x.embed(n).unwrap();
        prop_assert_eq!((big.p, big.q), (x.p * n, x.q * n as i64));
        for i in -30..30 {
            prop_assert!((big.get(i) - x.get(i)).abs() < 1e-12);
        }
        let back = big.reduced(1e-9);
        prop_assert_eq!(back.p, x.p);
    }

    #[test]
    fn normalized_x0_in_unit_interval(x in config(), l in -50i64..50) {
        let y = x.shift(0, l).normalized();
        prop_assert!((0.0..1.0).contains(&y.x0()));
    }
}
