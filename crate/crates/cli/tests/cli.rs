//! End-to-end tests of the `sae` binary: runs the compiled executable
//! against the committed fixtures and checks outputs, determinism, and
//! exit codes. The simulate outputs are additionally locked against
//! golden files committed under `tests/golden/`.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn sae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sae"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn parse_csv(content: &str) -> Vec<Vec<String>> {
    content
        .lines()
        .map(|l| l.split(',').map(|c| c.to_string()).collect())
        .collect()
}

#[test]
fn estimate_matches_library_results_exactly() {
    let out = tempfile::tempdir().unwrap();
    let output = sae(&[
        "estimate",
        "--config",
        fixture("config.toml").to_str().unwrap(),
        "--survey",
        fixture("survey.csv").to_str().unwrap(),
        "--population",
        fixture("population.csv").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");

    // recompute through the library with the same inputs and settings
    let schema = sae_core::data::CovariateSchema::new(
        vec![
            sae_core::data::VarDef::new("sex", &["m", "f"]),
            sae_core::data::VarDef::new("age", &["young", "old"]),
        ],
        vec![sae_core::data::VarDef::new("pid", &["d", "r"])],
        "y",
        "area",
    )
    .unwrap();
    let survey = sae_core::data::load_survey(&fixture("survey.csv"), &schema).unwrap();
    let table = sae_core::data::load_population(&fixture("population.csv"), &schema).unwrap();
    let cfg = sae_core::estimators::EstimatorConfig {
        lambda: 0.16,
        seed: 42,
        ..Default::default()
    };
    let all = sae_core::estimators::estimate_all_areas(&survey, &table, &cfg).unwrap();

    let written = read(&out.path().join("results.csv"));
    assert_eq!(written, all.to_csv_string());
    assert!(out.path().join("run_log.txt").exists());
}

#[test]
fn estimate_is_byte_deterministic_across_runs() {
    let out1 = tempfile::tempdir().unwrap();
    let out2 = tempfile::tempdir().unwrap();
    for out in [&out1, &out2] {
        let output = sae(&[
            "estimate",
            "--config",
            fixture("config.toml").to_str().unwrap(),
            "--survey",
            fixture("survey.csv").to_str().unwrap(),
            "--population",
            fixture("population.csv").to_str().unwrap(),
            "--emit-weights",
            "--out",
            out.path().to_str().unwrap(),
        ]);
        assert!(output.status.success());
    }
    for name in ["results.csv", "weights_east.csv", "weights_west.csv"] {
        assert_eq!(
            read(&out1.path().join(name)),
            read(&out2.path().join(name)),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn single_area_estimate_equals_national_weighted_mean() {
    let out = tempfile::tempdir().unwrap();
    let output = sae(&[
        "estimate",
        "--config",
        fixture("config.toml").to_str().unwrap(),
        "--survey",
        fixture("single_area.csv").to_str().unwrap(),
        "--population",
        fixture("single_area_population.csv").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let rows = parse_csv(&read(&out.path().join("results.csv")));
    // weights 2,1,1,4 on outcomes 1,0,1,0 -> 3/8
    let synthetic = rows
        .iter()
        .find(|r| r[2].starts_with("synthetic"))
        .expect("synthetic row");
    let est: f64 = synthetic[3].parse().unwrap();
    assert!((est - 0.375).abs() < 1e-12, "estimate {est}");
}

#[test]
fn diagnose_writes_panel_with_flags() {
    let out = tempfile::tempdir().unwrap();
    let output = sae(&[
        "diagnose",
        "--config",
        fixture("config.toml").to_str().unwrap(),
        "--survey",
        fixture("survey.csv").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let rows = parse_csv(&read(&out.path().join("diagnostics.csv")));
    assert_eq!(
        rows[0],
        vec!["area", "delta", "se", "ci_lower", "ci_upper", "p_conventional", "p_tost", "flag"]
    );
    assert_eq!(rows.len(), 3); // header + two areas
}

#[test]
fn diagnose_single_area_is_a_numerical_error() {
    let out = tempfile::tempdir().unwrap();
    let output = sae(&[
        "diagnose",
        "--config",
        fixture("config.toml").to_str().unwrap(),
        "--survey",
        fixture("single_area.csv").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&output.stderr);
    let parsed: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(parsed["error"]["kind"], "numeric");
}

#[test]
fn missing_schema_is_a_config_error() {
    let output = sae(&[
        "estimate",
        "--survey",
        fixture("survey.csv").to_str().unwrap(),
        "--population",
        fixture("population.csv").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    let parsed: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(parsed["error"]["kind"], "config");
}

#[test]
fn unreadable_survey_is_a_data_error() {
    let output = sae(&[
        "estimate",
        "--config",
        fixture("config.toml").to_str().unwrap(),
        "--survey",
        "/nonexistent/survey.csv",
        "--population",
        fixture("population.csv").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    let parsed: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(parsed["error"]["kind"], "data");
}

#[test]
fn simulate_verifies_identification_and_consistency() {
    let out = tempfile::tempdir().unwrap();
    let output = sae(&[
        "simulate",
        "--config",
        fixture("simulate.toml").to_str().unwrap(),
        "--svg",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");

    // identification residuals vanish when the shift is zero
    let rows = parse_csv(&read(&out.path().join("identification.csv")));
    assert_eq!(rows[0][3], "residual");
    for row in &rows[1..] {
        let residual: f64 = row[3].parse().unwrap();
        let decomposition_residual: f64 = row[6].parse().unwrap();
        assert!(residual.abs() <= 1e-10, "identification residual {residual}");
        assert!(decomposition_residual.abs() <= 1e-10);
    }

    // the consistency sweep's median RMSE decreases in n
    let summary = parse_csv(&read(&out.path().join("consistency_summary.csv")));
    let medians: Vec<f64> = summary[1..]
        .iter()
        .map(|r| r[1].parse::<f64>().unwrap())
        .collect();
    assert_eq!(medians.len(), 3);
    assert!(medians[1] < medians[0] && medians[2] < medians[1], "{medians:?}");

    assert!(out.path().join("scatter.svg").exists());
    assert!(out.path().join("estimates.csv").exists());
    assert!(out.path().join("metrics.csv").exists());
}

#[test]
fn simulate_seed_changes_estimates_but_not_truth() {
    let out1 = tempfile::tempdir().unwrap();
    let out2 = tempfile::tempdir().unwrap();
    for (out, seed) in [(&out1, "2718"), (&out2, "31415")] {
        let output = sae(&[
            "simulate",
            "--config",
            fixture("simulate.toml").to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out.path().to_str().unwrap(),
        ]);
        assert!(output.status.success());
    }
    assert_eq!(
        read(&out1.path().join("truth.csv")),
        read(&out2.path().join("truth.csv"))
    );
    assert_ne!(
        read(&out1.path().join("estimates.csv")),
        read(&out2.path().join("estimates.csv"))
    );
}

/// Seed-locked regression of the full simulate pipeline against golden
/// files produced by this same configuration.
#[test]
fn simulate_output_matches_golden_lock() {
    let out = tempfile::tempdir().unwrap();
    let output = sae(&[
        "simulate",
        "--config",
        fixture("simulate.toml").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    for name in [
        "truth.csv",
        "identification.csv",
        "estimates.csv",
        "metrics.csv",
        "consistency.csv",
        "consistency_summary.csv",
    ] {
        let got = read(&out.path().join(name));
        let want = read(&golden("simulate").join(name));
        assert_eq!(got, want, "{name} deviates from the golden lock");
    }
}

#[test]
fn validate_scores_sets_and_error_correlations() {
    let out = tempfile::tempdir().unwrap();
    let output = sae(&[
        "validate",
        "--estimates",
        fixture("estimates.csv").to_str().unwrap(),
        "--truth",
        fixture("truth.csv").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");

    let metrics = parse_csv(&read(&out.path().join("metrics.csv")));
    assert_eq!(metrics[0], vec!["set", "rmse", "mae", "mean_error", "correlation"]);
    let find = |name: &str| -> Vec<String> {
        metrics[1..]
            .iter()
            .find(|r| r[0] == name)
            .unwrap_or_else(|| panic!("set {name}"))
            .clone()
    };
    // exact set: all zeros, correlation 1
    let exact = find("exact");
    assert_eq!(exact[1].parse::<f64>().unwrap(), 0.0);
    assert!((exact[4].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    // constant offset: rmse = mae = mean error = 0.05
    let offset = find("offset");
    for k in 1..4 {
        assert!((offset[k].parse::<f64>().unwrap() - 0.05).abs() < 1e-12);
    }

    let corr = parse_csv(&read(&out.path().join("error_correlation.csv")));
    let header = &corr[0];
    let zig_col = header.iter().position(|h| h == "zig").unwrap();
    let mirror_row = corr.iter().find(|r| r[0] == "mirror").unwrap();
    let zig_row = corr.iter().find(|r| r[0] == "zig").unwrap();
    // a set against itself scores 1; mirrored errors score -1
    assert!((zig_row[zig_col].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    assert!((mirror_row[zig_col].parse::<f64>().unwrap() + 1.0).abs() < 1e-12);
    // the zero-error set has no defined correlation: empty cell
    let exact_row = corr.iter().find(|r| r[0] == "exact").unwrap();
    assert_eq!(exact_row[zig_col], "");
}

#[test]
fn validate_key_mismatch_is_a_data_error() {
    let out = tempfile::tempdir().unwrap();
    let bad = out.path().join("bad_truth.csv");
    std::fs::write(&bad, "area,truth\neast,0.5\nwest,0.3\nsouth,0.9\n").unwrap();
    let output = sae(&[
        "validate",
        "--estimates",
        fixture("estimates.csv").to_str().unwrap(),
        "--truth",
        bad.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
}
