use serde_json::Value;
use tn_tsp::cli::{run, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_OK};

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("tntsp").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).expect("JSON output")
}

#[test]
fn verify_agrees_with_the_oracle_on_every_fixture() {
    for name in [
        "tsp4.json",
        "tsp6.json",
        "dnsnn.json",
        "nmtsp.json",
        "btsp_minmax.json",
        "politician.json",
        "precedence.json",
    ] {
        let (code, out, err) = call(&["verify", "--input", &fixture(name)]);
        assert_eq!(code, EXIT_OK, "{name}: {err}");
        let v = json(&out);
        assert_eq!(v["oracle_match"], Value::Bool(true), "{name}");
        assert_eq!(v["feasible"], Value::Bool(true), "{name}");
    }
}

#[test]
fn tsp4_optimum() {
    let (code, out, _) = call(&["solve", "--input", &fixture("tsp4.json")]);
    assert_eq!(code, EXIT_OK);
    // 0-1-2-3-0 = 3 + 2 + 5 + 4
    assert_eq!(json(&out)["cost"], Value::from(14.0));
}

#[test]
fn same_seed_same_bytes() {
    let args = ["solve", "--input", &fixture("tsp6.json"), "--seed", "7", "--reuse", "on"];
    let (_, a, _) = call(&args);
    let (_, b, _) = call(&args);
    assert_eq!(a, b);
    let args = ["solve", "--input", &fixture("tsp6.json"), "--approx", "random:2", "--seed", "3"];
    assert_eq!(call(&args).1, call(&args).1);
}

#[test]
fn reuse_flag_keeps_the_route() {
    let input = fixture("tsp6.json");
    let plain = json(&call(&["solve", "--input", &input]).1);
    let reused = json(&call(&["solve", "--input", &input, "--reuse", "on"]).1);
    assert_eq!(plain["route"], reused["route"]);
}

#[test]
fn fully_forbidden_start_is_infeasible() {
    let (code, _, err) = call(&["solve", "--input", &fixture("forbidden.json")]);
    assert_eq!(code, EXIT_INFEASIBLE);
    assert!(err.contains("no surviving state"));
}

#[test]
fn huge_tau_reports_underflow() {
    let (code, out, _) = call(&["solve", "--input", &fixture("tsp6.json"), "--tau", "1e6"]);
    assert_eq!(code, EXIT_INFEASIBLE);
    assert!(json(&out)["error"].as_str().unwrap().contains("underflow"));
}

#[test]
fn bad_arguments_are_errors() {
    assert_eq!(call(&["solve", "--input", "/nonexistent.json"]).0, EXIT_ERROR);
    assert_eq!(call(&["solve", "--input", &fixture("tsp4.json"), "--tau", "warm"]).0, EXIT_ERROR);
    assert_eq!(call(&["solve", "--input", &fixture("tsp4.json"), "--approx", "some:2"]).0, EXIT_ERROR);
    assert_eq!(call(&["bench", "--from", "5", "--to", "40"]).0, EXIT_ERROR);
}

#[test]
fn jrp_degenerate_fixture_ties_in_worker_orientation() {
    let (code, out, _) = call(&["jrp", "--input", &fixture("jrp_degenerate.json"), "--orientation", "workers"]);
    assert_eq!(code, EXIT_OK);
    let v = json(&out);
    assert_eq!(v["tie_count"], Value::from(2));
    assert_eq!(v["delta_p"], Value::from(-7.0));
}

#[test]
fn jrp_orientations_share_the_objective() {
    let input = fixture("jrp.json");
    let costs: Vec<Value> = ["auto", "workers", "vacancies"]
        .iter()
        .map(|o| json(&call(&["jrp", "--input", &input, "--orientation", o]).1)["cost"].clone())
        .collect();
    assert_eq!(costs[0], Value::from(-10.0));
    assert!(costs.iter().all(|c| *c == costs[0]));
}

#[test]
fn bench_csv_has_a_row_per_size() {
    let (code, out, _) = call(&["bench", "--from", "4", "--to", "7", "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("n,"));
}
