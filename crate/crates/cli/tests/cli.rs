use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn svan(args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svan"))
        .args(args.split_whitespace())
        .current_dir(root())
        .env("SVAN_COLOR", "0")
        .output()
        .expect("binary runs")
}

fn code(args: &str) -> i32 {
    svan(args).status.code().unwrap()
}

fn stdout(args: &str) -> String {
    String::from_utf8(svan(args).stdout).unwrap()
}

const C: &str = "crates/core/corpus";

#[test]
fn figure_recipes() {
    let cases = [
        (format!("compat --notion ur {C}/fig1_s1.json {C}/fig1_s2.json"), 1),
        (format!("compat --notion ur {C}/fig1_s1p.json {C}/fig1_s2.json"), 0),
        (format!("compat --notion uc --big 2 {C}/fig2_s1.json {C}/fig2_s2.json"), 0),
        (format!("compat --notion uc --big 2 {C}/fig2_s1p.json {C}/fig2_s2.json"), 1),
        (format!("deadlocks {C}/fig3_s1.json {C}/fig3_s2.json"), 0),
        (format!("deadlocks {C}/fig3_s1p.json {C}/fig3_s2.json"), 1),
        (format!("compat --notion df {C}/fig4_s1.json {C}/fig4_s2.json"), 1),
        (format!("compat --notion df {C}/fig4_s1p.json {C}/fig4_s2.json"), 0),
        (format!("equiv --relation trace {C}/fig5a_t1.json {C}/fig5a_t2.json"), 0),
        (format!("equiv --relation strong {C}/fig5a_t1.json {C}/fig5a_t2.json"), 1),
        (format!("equiv --relation trace --observable-only {C}/fig5b_u1.json {C}/fig5b_u2.json"), 0),
        (format!("equiv --relation weak {C}/fig5b_u1.json {C}/fig5b_u2.json"), 1),
        (format!("choreo --check realizability {C}/fig7_left.json"), 1),
        (format!("choreo --check realizability {C}/fig7_right.json"), 0),
        (format!("choreo --check realizability --comm async --bound 1 {C}/fig7_right.json"), 1),
        (format!("adapt --contract {C}/sql.contract s={C}/sql_service.json c={C}/sql_client.json"), 0),
        (format!("adapt --contract {C}/sql_without_v2.contract s={C}/sql_service.json c={C}/sql_client.json"), 1),
    ];
    for (args, expected) in cases {
        let out = svan(&args);
        assert_eq!(out.status.code(), Some(expected), "svan {args}\n{}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn evidence_is_printed() {
    let out = stdout(&format!("compat --notion df {C}/fig4_s1.json {C}/fig4_s2.json"));
    assert!(out.contains("deadlock at ⟨s1,u1⟩"), "{out}");
    let out = stdout(&format!("choreo --check realizability --comm async --bound 1 {C}/fig7_right.json"));
    assert!(out.contains("violation: [update, request]"), "{out}");
    let out = stdout(&format!("compat --notion ur {C}/fig1_s1.json {C}/fig1_s2.json --format json"));
    assert!(out.contains("\"label\": \"c!\""), "{out}");
}

#[test]
fn adaptor_round_trip_through_files() {
    let dir = std::env::temp_dir().join(format!("svan-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let adaptor = dir.join("adaptor.json");
    let json = stdout(&format!(
        "adapt --contract {C}/sql.contract s={C}/sql_service.json c={C}/sql_client.json --format json"
    ));
    std::fs::write(&adaptor, json).unwrap();
    let args = format!(
        "verify-adapt --adaptor {} {C}/sql_service.json {C}/sql_client.json",
        adaptor.display()
    );
    assert_eq!(code(&args), 0);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn errors_are_single_machine_lines() {
    for args in [
        "equiv --relation bogus a b".to_string(),
        format!("compat --notion df {C}/missing.json {C}/fig4_s2.json"),
        format!("compat --notion uc --big 3 {C}/fig2_s1.json {C}/fig2_s2.json"),
        format!("product {C}/fig4_s1.json {C}/fig4_s2.json --comm async --bound 0"),
        format!("compat-degree --notion df {C}/fig4_s1.json {C}/fig4_s2.json --static-weights 1,1,1"),
        format!("validate {C}/sql.contract"),
        "frobnicate".to_string(),
    ] {
        let out = svan(&args);
        assert_eq!(out.status.code(), Some(2), "svan {args}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "svan {args}: {err}");
        assert!(err.starts_with("svan: error: "), "{err}");
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn validate_reports_warnings_and_errors() {
    let dir = std::env::temp_dir().join(format!("svan-validate-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(
        &bad,
        r#"{"states":["s0"],"initial":"s0","finals":["s0"],"transitions":[{"from":"s0","label":{"tau":true},"to":"s9"}]}"#,
    )
    .unwrap();
    let out = svan(&format!("validate {}", bad.display()));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("unknown-state"));
    let lonely = dir.join("lonely.json");
    std::fs::write(&lonely, r#"{"states":["s0","s1"],"initial":"s0","finals":["s0"],"transitions":[]}"#).unwrap();
    let out = svan(&format!("validate {}", lonely.display()));
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("unreachable-state"));
    assert_eq!(stdout(&format!("validate {C}/fig4_s2.json")), "valid\n");
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn output_formats() {
    let dot = stdout(&format!("product {C}/fig4_s1p.json {C}/fig4_s2.json --format dot"));
    assert!(dot.starts_with("digraph"));
    assert!(dot.contains("doublecircle"));
    let csv = stdout(&format!("compat-degree --notion df {C}/fig4_s1.json {C}/fig4_s2.json --format csv"));
    assert_eq!(csv.lines().next(), Some("state,u0,u1,u2"));
    let proj = stdout(&format!("choreo --check projection {C}/fig7_right.json"));
    assert!(proj.contains("A: request! . update?"), "{proj}");
    let conf = svan(&format!("conformance {C}/fig7_right.json A={C}/fig4_s2.json"));
    assert_eq!(conf.status.code(), Some(2));
}
