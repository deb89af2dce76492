//! End-to-end checks of the `canyonsim` binary against the golden data files:
//! subcommands, output formats, and the documented exit codes
//! (0 success / 1 config error / 2 runtime error).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_canyonsim"))
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(rel)
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn canyonsim");
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn run_open_sky_emits_jsonl_records() {
    let out = run_ok(&[
        "run",
        "--config",
        data("scenarios/open_sky.json").to_str().unwrap(),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 30, "one record per epoch");
    for line in &lines {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(record["num_vis_sat"], 8);
        assert_eq!(record["prns"].as_array().unwrap().len(), 8);
        assert!(record["fix"]["converged"].as_bool().unwrap());
        assert!(record["dop"]["gdop"].as_f64().unwrap() > 1.0);
        // Open sky: no multipath offsets anywhere.
        for v in record["range_offset_m"].as_array().unwrap() {
            assert_eq!(v.as_f64().unwrap(), 0.0);
        }
    }
}

#[test]
fn run_canyon_csv_shows_blocked_prns_and_nofix() {
    let dir = std::env::temp_dir().join("canyonsim-cli-test-run");
    std::fs::create_dir_all(&dir).unwrap();
    let out_path = dir.join("canyon.csv");
    run_ok(&[
        "run",
        "--config",
        data("scenarios/canyon.json").to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 31, "header plus 30 epochs");
    assert!(lines[0].starts_with("timestamp_s,"));
    assert!(
        text.contains("insufficient"),
        "the canyon walk must lose the fix somewhere"
    );
    assert!(
        text.contains("6;7;8") || text.contains(";6;"),
        "blocked PRN lists in CSV"
    );
}

#[test]
fn run_seed_override_changes_noise() {
    let cfg = data("scenarios/open_sky.json");
    let a = run_ok(&["run", "--config", cfg.to_str().unwrap(), "--seed", "1"]);
    let b = run_ok(&["run", "--config", cfg.to_str().unwrap(), "--seed", "1"]);
    let c = run_ok(&["run", "--config", cfg.to_str().unwrap(), "--seed", "2"]);
    assert_eq!(a.stdout, b.stdout, "same seed, same bytes");
    assert_ne!(a.stdout, c.stdout, "different seed, different noise");
}

#[test]
fn run_ephemeris_scenario_produces_fixes() {
    let out = run_ok(&[
        "run",
        "--config",
        data("scenarios/orbit_demo.json").to_str().unwrap(),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut with_fix = 0;
    for line in stdout.lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        if !record["fix"].is_null() {
            with_fix += 1;
        }
    }
    assert!(
        with_fix >= 25,
        "orbit demo should fix almost every epoch, got {with_fix}"
    );
}

#[test]
fn heatmap_csv_and_pgm() {
    let dir = std::env::temp_dir().join("canyonsim-cli-test-heatmap");
    std::fs::create_dir_all(&dir).unwrap();
    let csv_path = dir.join("grid.csv");
    let pgm_path = dir.join("grid.pgm");
    run_ok(&[
        "heatmap",
        "--config",
        data("scenarios/canyon.json").to_str().unwrap(),
        "--bbox",
        "-50,-50,50,50",
        "--cell",
        "25",
        "--alt",
        "15",
        "--epochs-per-cell",
        "2",
        "--workers",
        "2",
        "--out",
        csv_path.to_str().unwrap(),
        "--pgm",
        pgm_path.to_str().unwrap(),
        "--pgm-metric",
        "visible",
    ]);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("row,col,east_m,north_m,"));
    assert_eq!(csv.lines().count(), 1 + 16, "4x4 grid plus header");
    let pgm = std::fs::read_to_string(&pgm_path).unwrap();
    assert!(pgm.starts_with("P2\n4 4\n255\n"));
}

#[test]
fn raycheck_reports_multipath_geometry() {
    let out = run_ok(&[
        "raycheck",
        "--model",
        data("citymodels/canyon.json").to_str().unwrap(),
        "--pos",
        "0,0,2",
        "--az",
        "1.5707963267948966",
        "--el",
        "0.3",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("r_los_m: 10.467516015380857"), "{text}");
    assert!(text.contains("visibility: Multipath"), "{text}");
    assert!(text.contains("multipath_offset_m: 19.10"), "{text}");
}

#[test]
fn raycheck_open_sky_is_clear() {
    let out = run_ok(&[
        "raycheck",
        "--model",
        data("citymodels/open_sky.json").to_str().unwrap(),
        "--pos",
        "0,0,2",
        "--az",
        "0.5",
        "--el",
        "0.4",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("visibility: LosClear"), "{text}");
    assert!(text.contains("multipath_offset_m: 0"), "{text}");
}

#[test]
fn config_errors_exit_1() {
    // Missing config file.
    let out = bin()
        .args(["run", "--config", "/nonexistent/nope.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Elevation out of range.
    let out = bin()
        .args([
            "raycheck",
            "--model",
            data("citymodels/open_sky.json").to_str().unwrap(),
            "--pos",
            "0,0,2",
            "--az",
            "0",
            "--el",
            "2.0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("elevation"));

    // Bad CLI usage.
    let out = bin().args(["run"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Degenerate heat map box.
    let out = bin()
        .args([
            "heatmap",
            "--config",
            data("scenarios/open_sky.json").to_str().unwrap(),
            "--bbox",
            "0,0,0,10",
            "--cell",
            "5",
            "--alt",
            "15",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_2() {
    // Valid config, unwritable output path.
    let out = bin()
        .args([
            "run",
            "--config",
            data("scenarios/open_sky.json").to_str().unwrap(),
            "--out",
            "/nonexistent-dir/records.jsonl",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn city_model_errors_name_the_building() {
    let dir = std::env::temp_dir().join("canyonsim-cli-test-badmodel");
    std::fs::create_dir_all(&dir).unwrap();
    let model_path = dir.join("bad.json");
    std::fs::write(
        &model_path,
        r#"{"origin": {"lat_deg": 0, "lon_deg": 0, "alt_m": 0},
           "buildings": [{"id": 77, "height_m": 5.0, "footprint_local_m": [[0,0],[1,0]]}]}"#,
    )
    .unwrap();
    let out = bin()
        .args([
            "raycheck",
            "--model",
            model_path.to_str().unwrap(),
            "--pos",
            "0,0,2",
            "--az",
            "0",
            "--el",
            "0.5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("77"));
}
