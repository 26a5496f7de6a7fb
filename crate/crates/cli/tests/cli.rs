use std::process::{Command, Output};

use multiscale_cli::report::Report;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multiscale"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn stdout(args: &[&str]) -> String {
    String::from_utf8(run(args).stdout).expect("utf-8")
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(args)).expect("valid json")
}

fn golden(name: &str) -> Value {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).expect("golden file")).expect("json")
}

#[test]
fn reduce_order_5_text() {
    let out = stdout(&["reduce", "--model", "dnls", "--order", "5"]);
    assert!(out.contains("a = (-h^2+3)/24"), "{out}");
    assert!(out.contains("nu1 = (-1)*phi1_t1^1"), "{out}");
    let neg = stdout(&[
        "reduce", "--model", "dnls", "--order", "5", "--c-sign", "-1",
    ]);
    assert!(neg.contains("a = (h^2-3)/24"), "{neg}");
}

#[test]
fn reduce_order_7_lists_three_monomials() {
    let v = json(&[
        "reduce", "--model", "dnls", "--order", "7", "--format", "json",
    ]);
    assert_eq!(v["forcing"].as_array().map(Vec::len), Some(3));
    assert_eq!(v["b"]["3"], "(-h^4+30*h^2+15)/1920");
    let text = stdout(&["reduce", "--model", "dnls", "--order", "7"]);
    assert!(text.contains("f2: 3 monomials"));
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["reduce", "--model", "dnls", "--order", "4"]), 64);
    assert_eq!(code(&["reduce", "--model", "dnls"]), 64);
    assert_eq!(
        code(&["reduce", "--model", "dnls", "--order", "5", "--c-sign", "2"]),
        64
    );
    assert_eq!(code(&["verdict", "--model", "xyz"]), 64);
    assert_eq!(code(&["dim", "--n", "six", "--r", "1"]), 64);
    assert_eq!(code(&["flows", "--j", "9"]), 64);
    assert_eq!(code(&["nonsense"]), 64);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["reduce", "--model", "al", "--order", "5"]), 0);
}

#[test]
fn verdicts() {
    assert_eq!(code(&["verdict", "--model", "dnls"]), 1);
    assert_eq!(code(&["verdict", "--model", "al"]), 0);
    assert_eq!(code(&["verdict", "--model", "dnls", "--order", "7"]), 0);
    let v = json(&["verdict", "--model", "al"]);
    assert_eq!(v["verdict"], "INTEGRABLE_CONSISTENT");
    assert_eq!(v["obstruction"]["stage"], "eps9");
    assert_eq!(v["obstruction"]["n_unknowns"], 31);
    assert_eq!(v["obstruction"]["satisfied"], true);
    let d = json(&["verdict", "--model", "dnls"]);
    assert_eq!(d["verdict"], "OBSTRUCTED");
    assert_eq!(
        d["obstruction"]["constraints"].as_array().map(Vec::len),
        Some(5)
    );
    let text = stdout(&["verdict", "--model", "dnls", "--format", "text"]);
    assert!(text.contains("verdict: OBSTRUCTED"));
}

#[test]
fn json_schema_keys() {
    let v = json(&["verdict", "--model", "dnls"]);
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    for k in [
        "model",
        "order",
        "c_sign",
        "a",
        "b",
        "forcing",
        "obstruction",
        "verdict",
    ] {
        assert!(keys.contains(&k), "missing {k}");
    }
    let obs = v["obstruction"].as_object().unwrap();
    for k in ["stage", "n_unknowns", "rank", "constraints", "satisfied"] {
        assert!(obs.contains_key(k), "missing {k}");
    }
    for t in v["forcing"].as_array().unwrap() {
        assert!(t["monomial"].is_string() && t["coeff"].is_string());
    }
}

#[test]
fn golden_files() {
    for (name, args) in [
        (
            "reduce_dnls_7.json",
            &[
                "reduce", "--model", "dnls", "--order", "7", "--format", "json",
            ][..],
        ),
        (
            "reduce_dnls_9.json",
            &[
                "reduce", "--model", "dnls", "--order", "9", "--format", "json",
            ][..],
        ),
        ("verdict_dnls.json", &["verdict", "--model", "dnls"][..]),
        ("verdict_al.json", &["verdict", "--model", "al"][..]),
    ] {
        assert_eq!(json(args), golden(name), "{name}");
    }
}

#[test]
fn json_round_trips_through_the_report_type() {
    let text = stdout(&["verdict", "--model", "dnls"]);
    let r: Report = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string_pretty(&r).unwrap();
    assert_eq!(again.trim_end(), text.trim_end());
}

#[test]
fn deterministic_json() {
    let args = [
        "reduce", "--model", "dnls", "--order", "9", "--format", "json",
    ];
    let a = run(&args).stdout;
    let b = run(&args).stdout;
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn dim_and_basis() {
    assert_eq!(
        stdout(&["dim", "--n", "6", "--r", "1"]).lines().next(),
        Some("4")
    );
    assert_eq!(
        stdout(&["dim", "--n", "3", "--r", "1"]).lines().next(),
        Some("1")
    );
    let big = stdout(&["dim", "--n", "11", "--r", "2"]);
    assert!(big.contains("31"), "{big}");
    let d = json(&["dim", "--n", "9", "--r", "2", "--format", "json"]);
    assert_eq!(d["dim"], 16);
    assert_eq!(d["product_dim"], 14);
    let basis = stdout(&["basis", "--n", "6", "--r", "1"]);
    assert_eq!(basis.lines().count(), 4);
    assert!(basis.lines().any(|l| l == "D2[phi,1]^2"));
    let prod = stdout(&["basis", "--n", "6", "--r", "1", "--products"]);
    assert_eq!(prod.lines().count(), 3);
}

#[test]
fn flows_render() {
    let out = stdout(&["flows", "--j", "2"]);
    assert!(
        out.contains("K2 = ((-h^2+3)/24)*D3[phi,1]+(-3/4)*D1[phi,1]^2"),
        "{out}"
    );
}

#[test]
fn selfcheck_passes() {
    let out = run(&["selfcheck", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 10);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}
