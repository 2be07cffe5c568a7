use fk_lab::cli::{run, EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE};
use serde_json::Value;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("fk-lab").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn minimize_echoes_run_config() {
    let (code, out, _) = call(&["minimize", "--family", "fk_nn", "--lambda", "1", "--p", "5", "--q", "3", "--starts", "4"]);
    assert_eq!(code, EXIT_OK);
    let v = json(&out);
    assert_eq!(v["run_config"]["subcommand"], "minimize");
    assert_eq!(v["run_config"]["p"], 5);
    assert_eq!(v["pass"], true);
    // same seed, same bytes
    let (_, again, _) = call(&["minimize", "--family", "fk_nn", "--lambda", "1", "--p", "5", "--q", "3", "--starts", "4"]);
    assert_eq!(out, again);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(call(&["minimize", "--bogus", "1"]).0, EXIT_USAGE);
    assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
    let (code, _, err) = call(&["minimize", "--family", "nope", "--p", "5", "--q", "3"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("nope"));
    assert_eq!(call(&["minimize", "--family", "fk_nn"]).0, EXIT_USAGE);
    assert_eq!(call(&["--help"]).0, EXIT_OK);
}

#[test]
fn files_csv_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("min.json");
    let csv = dir.path().join("min.csv");
    let (code, stdout, _) = call(&[
        "minimize", "--family", "fk_nn", "--lambda", "0", "--p", "5", "--q", "1", "--starts", "2",
        "--out", out.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.is_empty());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("i,value\n"));

    // λ = 0 minimizers are equally spaced: every gap is 1/5
    for input in [&out, &csv] {
        let (code, stdout, _) = call(&["gaps", "--input", input.to_str().unwrap(), "--q", "1"]);
        assert_eq!(code, EXIT_OK);
        let v = json(&stdout);
        assert!((v["result"]["max_gap"].as_f64().unwrap() - 0.2).abs() < 1e-6);
    }

    // a saved artifact replays as a config; explicit flags override it
    let (code, replay, _) = call(&["minimize", "--config", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(json(&replay)["result"], json(&std::fs::read_to_string(&out).unwrap())["result"]);
    let saved = json(&std::fs::read_to_string(&out).unwrap());
    assert!(saved["run_config"].get("out").is_none());
    let (_, other, _) = call(&["minimize", "--config", out.to_str().unwrap(), "--p", "7"]);
    assert_eq!(json(&other)["run_config"]["p"], 7);

    let missing = dir.path().join("missing.json");
    assert_ne!(call(&["gaps", "--input", missing.to_str().unwrap()]).0, EXIT_OK);
}

#[test]
fn bump_and_check_cert() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bump.csv");
    let (code, out, _) = call(&["bump", "--xi-minus", "0.2", "--xi-plus", "0.5", "--eps", "0.01", "--k", "3", "--csv", csv.to_str().unwrap(), "--samples", "50"]);
    assert_eq!(code, EXIT_OK, "{out}");
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().next().unwrap(), "xi,phi,d1,d2,d3");
    assert_eq!(rows.lines().count(), 51);

    let cert = dir.path().join("cert.json");
    let (code, _, err) = call(&["destroy", "--family", "fk_nn", "--lambda", "0.5", "--omega", "liouville:10", "--gamma", "1", "--sigma", "14", "--k", "2", "--r", "1", "--eps", "0.01", "--out", cert.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (code, out, _) = call(&["check-cert", "--input", cert.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(json(&out)["pass"], true);

    // a tampered certificate fails the re-check
    let mut v = json(&std::fs::read_to_string(&cert).unwrap());
    let eta = v["result"]["stage2"]["eta_plus"].as_f64().unwrap();
    v["result"]["stage2"]["eta_plus"] = serde_json::json!(eta + 1e-3);
    std::fs::write(&cert, serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(call(&["check-cert", "--input", cert.to_str().unwrap()]).0, EXIT_CHECK_FAILED);
}
