use std::process::{Command, Output};

fn permlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_permlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn factorize_three_cycle() {
    let out = permlab(&["factorize", "2 3 1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("t: 1 1 1"), "{text}");
    assert!(text.contains("distance: 2"), "{text}");
}

#[test]
fn factorize_identity_has_no_factors() {
    let out = permlab(&["factorize", "1 2 3", "--active"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("t: 1 2 3"));
    assert!(text.contains("factors: none"));
    assert!(text.contains("distance: 0"));
    assert!(text.contains("active x=3: 3"), "{text}");
}

#[test]
fn factorize_swap_active_sets_differ() {
    let text = stdout(&permlab(&["factorize", "2 1", "--active"]));
    assert!(text.contains("factors: (2 1)"), "{text}");
    // The swap is its own inverse, yet the sets at point 1 differ.
    assert!(text.contains("\nactive x=1: 1 2\n"), "{text}");
    assert!(text.contains("inverse-active y=1: 2\n"), "{text}");
}

#[test]
fn malformed_input_is_a_usage_error() {
    assert_eq!(permlab(&["factorize", "2 1 1"]).status.code(), Some(2));
    assert_eq!(permlab(&["factorize", "a b"]).status.code(), Some(2));
    assert_eq!(permlab(&["verify", "--suite", "bogus"]).status.code(), Some(2));
}

#[test]
fn verify_all_small() {
    let out = permlab(&["verify", "--suite", "all", "--n", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let totals = &report["totals"];
    assert_eq!(totals["passed"], totals["cases"]);
}

#[test]
fn verify_writes_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gamma.json");
    let out = permlab(&["verify", "--suite", "gamma", "--n", "4", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["suite"], "gamma");
    assert!(!report["cases"].as_array().unwrap().is_empty());
}

#[test]
fn verify_csv_has_header() {
    let out = permlab(&["verify", "--suite", "factorization", "--n", "3", "--format", "csv"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("name,lhs,rhs,slack,pass"));
}

#[test]
fn oracle_suite_rejects_odd_size() {
    assert_eq!(permlab(&["verify", "--suite", "twirl", "--n", "3"]).status.code(), Some(1));
}

#[test]
fn reports_are_deterministic_up_to_timing() {
    let strip = |out: Output| {
        let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        for case in v["cases"].as_array_mut().unwrap() {
            case["runtime_ms"] = serde_json::Value::Null;
        }
        v
    };
    let args = ["verify", "--suite", "sparsity", "--n", "4", "--seed", "9"];
    assert_eq!(strip(permlab(&args)), strip(permlab(&args)));
}

#[test]
fn bound_fixtures() {
    let main = stdout(&permlab(&["bound", "--kind", "main", "--q", "1", "--n", "1048576"]));
    assert!(main.contains("raw: 1.382706686"), "{main}");
    assert!(main.contains("vacuous: false"));
    let sponge = stdout(&permlab(&["bound", "--kind", "sponge", "--q", "1", "--n", "60", "--c", "30"]));
    assert!(sponge.contains("raw: 5.277618765"), "{sponge}");
    let zero = stdout(&permlab(&["bound", "--kind", "zero-search", "--q", "1", "--n", "40", "--c", "40"]));
    assert!(zero.contains("raw: 6.816480890"), "{zero}");
    let vacuous = stdout(&permlab(&["bound", "--kind", "main", "--q", "2", "--n", "16"]));
    assert!(vacuous.contains("clamped: 1\n") && vacuous.contains("vacuous: true"), "{vacuous}");
}

#[test]
fn bound_needs_capacity() {
    assert_eq!(permlab(&["bound", "--kind", "sponge", "--q", "1", "--n", "8"]).status.code(), Some(2));
}

#[test]
fn attack_backends_agree_at_three_bits() {
    let success = |backend: &str| {
        let out = permlab(&["attack", "--kind", "zero-search", "--n", "3", "--c", "1", "--backend", backend, "--trials", "0"]);
        assert!(out.status.success());
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["success"].as_f64().unwrap()
    };
    assert!((success("spo") - success("concrete")).abs() < 1e-9);
}

#[test]
fn theorem_on_shipped_circuit() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../circuits/grover-sponge-n3.circuit");
    let out = permlab(&["theorem", "--circuit", path, "--relation", "sponge", "--c", "1", "--target", "1"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // Same value as the built-in attack: 19/28 averaged over all of S_8.
    assert!((v["reports"][0]["lhs"].as_f64().unwrap() - 19.0 / 28.0).abs() < 1e-9);
    assert_eq!(v["bound"]["vacuous"], true);
    assert_eq!(v["queries"], 3);
}
