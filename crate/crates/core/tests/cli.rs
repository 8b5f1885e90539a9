use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use phototransform::io::read_field;
use phototransform::verify::central_half_error;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phototransform"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn phototransform")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn smoke_verify_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify", "--level", "smoke", "--out", "r.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["overall_passed"], true);
    assert_eq!(report["environment"]["level"], "smoke");
}

#[test]
fn schedule_through_zero_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"schedule": {"alphas": [-1.0, 0.0, 2.0]}}"#).unwrap();
    assert_eq!(run(dir.path(), &["phantom", "--out", "f"]).status.code(), Some(0));
    let o = run(dir.path(), &["forward", "--config", "c.json", "--input", "f", "--out", "g"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schedule.alphas"), "{}", stderr(&o));
    assert!(!dir.path().join("g.bin").exists());
}

#[test]
fn default_round_trip_recovers_the_phantom() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["phantom", "--out", "f"][..],
        &["forward", "--input", "f", "--out", "g"],
        &["invert", "--input", "g", "--out", "r"],
    ] {
        let o = run(dir.path(), args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    }
    let truth = read_field(dir.path().join("f")).unwrap();
    let rec = read_field(dir.path().join("r")).unwrap();
    let err = central_half_error(&rec, &truth);
    assert!(err <= 0.05, "round trip error {err}");
}

#[test]
fn config_outputs_drive_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "phantom": {"kind": "gaussian", "width": 2.0},
        "grids": [{"count": 32, "spacing": 0.25}, {"count": 32, "spacing": 0.25}],
        "schedule": {"a_min": -8, "a_max": 9, "count": 129},
        "recon": {"method": "fbp"},
        "outputs": {"field": "f", "stack": "g", "adjoint": "a", "reconstruction": "r", "slice": "s.pgm", "table": "t.csv"}
    }"#;
    fs::write(dir.path().join("c.json"), cfg).unwrap();
    for cmd in ["phantom", "forward", "adjoint", "invert", "slice", "radon-compare"] {
        let o = run(dir.path(), &[cmd, "--config", "c.json"]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
    }
    for f in ["f.bin", "g.json", "a.bin", "r.json", "s.pgm", "t.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let pgm = fs::read(dir.path().join("s.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n32 32\n255\n"));
    assert_eq!(pgm.len(), b"P5\n32 32\n255\n".len() + 32 * 32);
    let csv = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(csv.starts_with("alpha,xbar,photography,scaled_radon,difference\n"));
    let alphas: std::collections::BTreeSet<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(alphas.len(), 129);
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "phantom": {"kind": "gaussian_mixture", "count": 3, "spread": 1.0, "width_range": [1.0, 1.5]},
        "grids": [{"count": 32, "spacing": 0.25}, {"count": 32, "spacing": 0.25}],
        "schedule": {"a_min": -4, "a_max": 5, "count": 33}
    }"#;
    fs::write(dir.path().join("c.json"), cfg).unwrap();
    let mut payloads = Vec::new();
    for tag in ["a", "b"] {
        let (f, g) = (format!("f{tag}"), format!("g{tag}"));
        let steps: [&[&str]; 2] = [
            &["phantom", "--config", "c.json", "--seed", "3", "--threads", "2", "--out", &f],
            &["forward", "--config", "c.json", "--threads", "2", "--input", &f, "--out", &g],
        ];
        for args in steps {
            assert_eq!(run(dir.path(), args).status.code(), Some(0));
        }
        payloads.push(fs::read(dir.path().join(format!("{g}.bin"))).unwrap());
    }
    assert_eq!(payloads[0], payloads[1]);
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let o = run(d, &["forward", "--input", "missing", "--out", "g"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!stderr(&o).contains("panicked"));

    fs::write(d.join("junk.json"), "{\"kind\": \"field\"").unwrap();
    fs::write(d.join("junk.bin"), [0u8; 5]).unwrap();
    for cmd in ["forward", "slice"] {
        let o = run(d, &[cmd, "--input", "junk", "--out", "x"]);
        assert_eq!(o.status.code(), Some(1), "{cmd}");
        assert!(!stderr(&o).contains("panicked"));
    }

    assert_eq!(run(d, &["phantom", "--out", "f"]).status.code(), Some(0));
    fs::write(d.join("f.bin"), [0u8; 16]).unwrap();
    let o = run(d, &["forward", "--input", "f", "--out", "g"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("payload"), "{}", stderr(&o));

    fs::write(d.join("c.json"), r#"{"recon": {"beta": 0.5, "colour": 1}}"#).unwrap();
    let o = run(d, &["invert", "--config", "c.json", "--input", "g", "--out", "r"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("recon") && stderr(&o).contains("colour"), "{}", stderr(&o));

    let o = run(d, &["phantom", "--config", "nope.json", "--out", "f"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--config"));

    assert_eq!(run(d, &["phantom"]).status.code(), Some(2));
    assert_eq!(run(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(d, &["verify", "--threads", "0"]).status.code(), Some(2));
}

#[test]
fn n2_inversion_requires_the_lambertian_flag() {
    let dir = tempfile::tempdir().unwrap();
    let g = r#"{"count": 8, "spacing": 0.5}"#;
    let cfg = format!(
        r#"{{"phantom": {{"kind": "lambertian_slope", "slope": 0.5, "width": 1.0}},
            "grids": [{g}, {g}, {g}, {g}], "schedule": {{"alphas": [-0.5, 0.5, 1.5]}}}}"#
    );
    fs::write(dir.path().join("c.json"), cfg).unwrap();
    assert_eq!(run(dir.path(), &["phantom", "--config", "c.json", "--out", "f"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["forward", "--config", "c.json", "--input", "f", "--out", "g"]).status.code(), Some(0));
    let o = run(dir.path(), &["invert", "--config", "c.json", "--input", "g", "--out", "r"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("recon.assume_lambertian"));
    let o = run(dir.path(), &["slice", "--config", "c.json", "--input", "g", "--index", "1", "--out", "s.pgm"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(dir.path(), &["slice", "--input", "g", "--index", "9", "--out", "s.pgm"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_lists_exit_codes_and_formats() {
    let o = run(Path::new("."), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for needle in ["--threads", "--seed", "--level", "Exit codes", "PGM", "CSV", "radon-compare"] {
        assert!(text.contains(needle), "help lacks {needle}");
    }
}
