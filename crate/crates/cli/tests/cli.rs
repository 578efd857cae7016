//! End-to-end checks of the `holoknot` binary: subcommand wiring, report
//! schema, and the documented exit-code mapping.

use std::process::{Command, Output};

fn holoknot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holoknot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn validate_builtin_diagram() {
    let out = holoknot(&["diagram", "validate", "figure8"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["results"]["crossings"], 4);
    assert_eq!(r["results"]["internal_segments"], 7);
    assert_eq!(r["results"]["segment_count_identity"], true);
    assert_eq!(r["schema_version"], "1");
}

#[test]
fn regions_of_trefoil() {
    let out = holoknot(&["diagram", "regions", "trefoil"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["results"]["region_count"], 5);
    assert_eq!(r["results"]["euler_ok"], true);
}

#[test]
fn missing_file_exits_2() {
    let out = holoknot(&["diagram", "validate", "/nonexistent/diagram.json"]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(&out);
    assert!(r["diagnostics"]["error"].as_str().unwrap().contains("cannot read"));
}

#[test]
fn bad_k_length_exits_2() {
    let out = holoknot(&[
        "stateintegral",
        "trefoil",
        "trefoil-generic",
        "--N",
        "2",
        "--k",
        "0,0",
        "--nodes",
        "4099",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fixtures_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = holoknot(&["fixtures", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    for name in [
        "figure8.json",
        "trefoil.json",
        "figure8-parabolic.json",
        "trefoil-generic.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name} written");
    }
    // The written documents feed back through the pipelines.
    let diagram = dir.path().join("figure8.json");
    let rep = dir.path().join("figure8-parabolic.json");
    let out = holoknot(&["diagram", "validate", diagram.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let out = holoknot(&[
        "color",
        diagram.to_str().unwrap(),
        rep.to_str().unwrap(),
        "--normalize",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["results"]["parameters"]["admissible"], true);
    let worst = r["results"]["segment_residual_max"].as_f64().unwrap();
    assert!(worst < 1e-9, "segment residual {worst}");
}

#[test]
fn statesum_trefoil_with_brute_cross_check() {
    let out = holoknot(&["statesum", "trefoil", "trefoil-generic", "--N", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let v = &r["results"]["value"];
    let z = (v[0].as_f64().unwrap().powi(2) + v[1].as_f64().unwrap().powi(2)).sqrt();
    assert!((z - 1.945510).abs() < 1e-5, "|Z| = {z}");
    let dev = r["results"]["brute_force"]["deviation"].as_f64().unwrap();
    assert!(dev < 1e-10);
}

#[test]
fn critical_figure8_reports_the_volume() {
    let out = holoknot(&["critical", "figure8"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let vol = r["results"]["volume"].as_f64().unwrap();
    assert!(
        (vol - 2.029883212819).abs() < 1e-6,
        "volume {vol} should match the figure-eight volume"
    );
}

#[test]
fn dilog_check_passes() {
    let out = holoknot(&["dilog", "check", "--N", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let checks = r["results"]["checks"].as_array().unwrap();
    assert!(checks.len() >= 4);
    for check in checks {
        if let Some(pass) = check.get("pass") {
            assert_eq!(pass, true, "{check}");
        }
    }
}

#[test]
fn scan_parabolic_concentrates() {
    let out = holoknot(&["scan-parabolic", "figure8", "figure8-parabolic", "--N", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["results"]["allowed_mu"], 2);
    let ratio = r["results"]["concentration_ratio"].as_f64().unwrap();
    assert!(ratio > 1e3, "concentration ratio {ratio}");
}

#[test]
fn scan_rejects_even_level() {
    let out = holoknot(&["scan-parabolic", "figure8", "figure8-parabolic", "--N", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_theorem_truncated_at_k0_fails_tolerance() {
    // A single state integral cannot reproduce Z: exit code 1.
    let out = holoknot(&[
        "verify-theorem",
        "trefoil",
        "trefoil-generic",
        "--N",
        "2",
        "--K",
        "0",
        "--no-branch-scan",
        "--grid",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["diagnostics"]["pass"], false);
}

#[test]
fn action_show_prints_bare_canonical_text() {
    let out = holoknot(&["action", "show", "figure8", "--N", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("(1/N) Lambda[+](mu | 0, t5, t1, t6)"));
    assert!(text.contains("Lambda[-](mu | t3 + 1/N - 1, t6, t4 + 1/N - 1, t7)"));
    // Bare text, not a JSON report.
    assert!(!text.contains("schema_version"));
}

#[test]
fn asymptotics_table_rows() {
    let out = holoknot(&[
        "asymptotics",
        "figure8",
        "figure8-parabolic",
        "--N-list",
        "3,5",
        "--mu",
        "1,0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let rows = r["results"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["status"], "ok");
}

#[test]
fn reports_are_bit_identical_across_reruns() {
    let run = || {
        let out = holoknot(&["--seed", "9", "solve", "trefoil", "--m", "1.2,0.3", "--seeds", "8"]);
        assert_eq!(out.status.code(), Some(0));
        let mut v: serde_json::Value = report(&out);
        // Timing differs between runs by design; everything else must not.
        v["timing_ms"] = serde_json::json!(0);
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn cache_dir_is_used_for_integrand_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_holoknot"))
        .env("HOLOKNOT_CACHE_DIR", dir.path())
        .args([
            "stateintegral",
            "trefoil",
            "trefoil-generic",
            "--N",
            "2",
            "--k",
            "0,0,0,0,0",
            "--nodes",
            "4099",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let cached: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("holoknot-tables-"))
        .collect();
    assert!(!cached.is_empty(), "cache file written");
}
