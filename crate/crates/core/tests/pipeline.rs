use fk_lab::exact::{rat, ExactNum};
use fk_lab::io::{from_json, to_json};
use fk_lab::number_theory::{c_kr, RotationSpec};
use fk_lab::perturbation::c_k_rational;
use fk_lab::pipeline::*;
use fk_lab::potentials::builtin;
use num_bigint::BigInt;
use num_rational::BigRational;

fn run() -> (fk_lab::potentials::LocalPotentialFamily, DestructionCertificate) {
    let f = builtin("fk_nn", 0.5).unwrap();
    let w: RotationSpec = "liouville:10".parse().unwrap();
    destroy(&f, &w, &rat(1, 1), &rat(14, 1), 2, 1, &rat(1, 100), &PipelineOptions::default()).unwrap()
}

#[test]
fn run_mode_strings() {
    assert_eq!("exact-constants".parse::<RunMode>().unwrap(), RunMode::Exact);
    let m: RunMode = "relaxed:1e-6".parse().unwrap();
    assert_eq!(m, RunMode::Relaxed(rat(1, 1_000_000)));
    assert_eq!(m.to_string(), "relaxed:1/1000000");
    assert_eq!("relaxed-constants:1/2".parse::<RunMode>().unwrap().a2_factor(), rat(1, 2));
    assert!("relaxed:0".parse::<RunMode>().is_err());
    assert!("fast".parse::<RunMode>().is_err());
    assert_eq!(serde_json::to_string(&RunMode::Exact).unwrap(), "\"exact-constants\"");
}

#[test]
fn relaxed_pipeline_certificate() {
    let (f2, cert) = run();
    assert!(cert.pass, "{:?}", cert.checks.iter().filter(|c| c.gating && !c.pass).collect::<Vec<_>>());
    let p = &cert.params;
    // ω_L = 0.110001000…: first relaxed approximant 1/10, p′ = 10
    assert_eq!((p.p.clone(), p.q.clone(), p.p_prime.clone()), (ExactNum::from_int(10), ExactNum::from_int(1), ExactNum::from_int(10)));
    // Ω-window [11/100, 1/9]
    assert_eq!(cert.omega_left.value().unwrap(), ExactNum::from_rational(rat(11, 100)));
    assert_eq!(cert.omega_right.value().unwrap(), ExactNum::from_rational(rat(1, 9)));
    // η width ε/(2·C_{k,r}·p^{k+1}) with C_{k,r} = 12·C·C_k·(2r+1)²
    let ckr = c_kr(&p.c, &c_k_rational(2), 1);
    assert_eq!(ckr, rat(12 * 9, 1) * &p.c * c_k_rational(2));
    let want = rat(1, 100) / (rat(2, 1) * ckr * BigRational::from_integer(BigInt::from(1000)));
    assert_eq!(cert.eta_width, ExactNum::from_rational(want));

    let s1 = cert.stage1.as_ref().unwrap();
    assert!(s1.gap.len() >= 1.0 / 10.0 - 1e-12);
    let s2 = cert.stage2.as_ref().unwrap();
    assert!(s2.gap2.len() >= s2.guaranteed_gap);
    assert_eq!(s2.probes.len(), 10);
    assert!(s2.probes.iter().all(|p| p.pass));
    assert!(s2.eta_minus < s2.eta_plus);

    let omegas = default_probe_omegas(&cert.params).unwrap();
    assert_eq!(omegas, vec![(100, 11), (9, 1), (109, 12)]);
    let rep = probe_gap_minimizers(
        &f2,
        &omegas,
        Some((&cert.omega_left, &cert.omega_right)),
        &cert.params.omega,
        Some(&cert.delta),
        s2.eta_minus,
        s2.eta_plus,
        8,
        1,
        2000,
    )
    .unwrap();
    assert!(!rep.any_hit);
    assert!(rep.probes.iter().all(|p| p.in_window && p.status == "probed"));
}

#[test]
fn certificate_round_trip_and_tamper() {
    let (_, cert) = run();
    let s = to_json(&cert).unwrap();
    let back: DestructionCertificate = from_json(&s).unwrap();
    assert_eq!(back, cert);
    assert_eq!(to_json(&back).unwrap(), s);
    assert!(check_certificate(&back).unwrap().pass);

    let mut bad = cert.clone();
    bad.stage2.as_mut().unwrap().eta_plus += 1e-3;
    let rep = check_certificate(&bad).unwrap();
    assert!(!rep.pass);
    assert!(rep.failed.iter().any(|n| n == "eta-width-float"));

    let mut bad = cert.clone();
    bad.delta = bad.delta.scale(&rat(2, 1));
    assert!(!check_certificate(&bad).unwrap().pass);

    let mut bad = cert.clone();
    bad.omega_left = bad.omega_right.clone();
    assert!(check_certificate(&bad).is_err());

    let mut bad = cert;
    bad.stage1 = None;
    assert!(check_certificate(&bad).is_err());
}

#[test]
fn probes_outside_window_are_out_of_scope() {
    let (f2, cert) = run();
    let s2 = cert.stage2.as_ref().unwrap();
    let rep = probe_gap_minimizers(
        &f2,
        &[(5, 1)],
        Some((&cert.omega_left, &cert.omega_right)),
        &cert.params.omega,
        Some(&cert.delta),
        s2.eta_minus,
        s2.eta_plus,
        4,
        0,
        2000,
    )
    .unwrap();
    assert_eq!(rep.probes[0].status, "out_of_scope");
    assert!(!rep.probes[0].in_window);
}

#[test]
fn condition_constant_covers_band() {
    let f = builtin("fk_nn", 0.5).unwrap();
    let w = RotationSpec::golden();
    let c = condition_constant(&f, &w).unwrap();
    let b = f.derivative_bounds(w.approx_f64() + 2.0).unwrap().combined();
    assert!(fk_lab::exact::rational_to_f64(&c) >= b);
}
