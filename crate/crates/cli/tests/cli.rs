use std::fs;
use std::path::{Path, PathBuf};

use fk_hetero_cli::{run_command, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK};
use tempfile::TempDir;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> i32 {
    run_command(std::iter::once("fk-hetero").chain(args.iter().copied()))
}

fn with_config(cmd: &[&str], cfg: &str, out: &Path) -> i32 {
    let cfg = config(cfg);
    let mut args = cmd.to_vec();
    args.extend(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    run(&args)
}

#[test]
fn gaps_writes_detection() {
    let dir = TempDir::new().unwrap();
    assert_eq!(with_config(&["gaps"], "sg.toml", dir.path()), EXIT_OK);
    let text = fs::read_to_string(dir.path().join("gaps.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["detection"]["pairs"].as_array().unwrap().len(), 1);
    assert!(dir.path().join("run.log").exists());
}

#[test]
fn ground_state_of_half_rotation() {
    let dir = TempDir::new().unwrap();
    assert_eq!(with_config(&["ground"], "half.toml", dir.path()), EXIT_OK);
    let text = fs::read_to_string(dir.path().join("ground.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let c0 = json["result"]["critical_value"].as_f64().unwrap();
    assert!((c0 - 0.238_481_765_935_283_5).abs() < 1e-10);
}

#[test]
fn level_one_kink_then_verify_energy_export() {
    let dir = TempDir::new().unwrap();
    let out = dir.path();
    assert_eq!(with_config(&["hetero", "--level", "1"], "sg.toml", out), EXIT_OK);
    assert!(out.join("kink.json").exists());
    let csv = fs::read_to_string(out.join("profile.csv")).unwrap();
    assert!(csv.starts_with("i,slab_avg,v_ref,w_ref\n"));

    assert_eq!(with_config(&["verify"], "sg.toml", out), EXIT_OK);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["overall"], serde_json::Value::Bool(true));

    assert_eq!(with_config(&["energy", "--lo", "-30", "--hi", "30"], "sg.toml", out), EXIT_OK);
    let target = out.join("copy.csv");
    assert_eq!(
        with_config(&["export", "--output", target.to_str().unwrap()], "sg.toml", out),
        EXIT_OK
    );
    assert_eq!(fs::read_to_string(target).unwrap(), csv);
}

#[test]
fn reverse_kink_has_the_same_value() {
    let fwd = TempDir::new().unwrap();
    let rev = TempDir::new().unwrap();
    assert_eq!(with_config(&["hetero", "--level", "1"], "sg.toml", fwd.path()), EXIT_OK);
    assert_eq!(
        with_config(&["hetero", "--level", "1", "--direction", "rev"], "sg.toml", rev.path()),
        EXIT_OK
    );
    let value = |d: &Path| {
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("kink.json")).unwrap()).unwrap();
        json["result"]["critical_value"].as_f64().unwrap()
    };
    assert!((value(fwd.path()) - value(rev.path())).abs() < 1e-10);
}

#[test]
fn outputs_are_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        assert_eq!(with_config(&["hetero", "--level", "1"], "sg.toml", d.path()), EXIT_OK);
    }
    let read = |d: &TempDir| fs::read(d.path().join("kink.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn flat_potential_has_no_gap() {
    let dir = TempDir::new().unwrap();
    assert_eq!(with_config(&["hetero", "--level", "1"], "flat.toml", dir.path()), EXIT_NUMERICAL);
    assert!(!dir.path().join("kink.json").exists());
}

#[test]
fn level_two_needs_its_prerequisite() {
    let dir = TempDir::new().unwrap();
    assert_eq!(with_config(&["hetero", "--level", "2"], "sg2.toml", dir.path()), EXIT_CONFIG);
    assert_eq!(with_config(&["verify"], "sg.toml", dir.path()), EXIT_CONFIG);
}

#[test]
fn level_two_with_forced_gap() {
    let dir = TempDir::new().unwrap();
    let out = dir.path();
    assert_eq!(with_config(&["hetero", "--level", "2", "--force-gap"], "sg2.toml", out), EXIT_OK);
    assert!(out.join("kink.json").exists());
    assert!(out.join("kink2.json").exists());
    let probe: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("probe.json")).unwrap()).unwrap();
    assert_eq!(probe["report"]["gap"], serde_json::Value::Bool(true));
    let csv = fs::read_to_string(out.join("profile2.csv")).unwrap();
    assert!(csv.starts_with("i1,i2,value\n"));
}

#[test]
fn force_gap_is_only_for_level_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(with_config(&["hetero", "--level", "1", "--force-gap"], "sg.toml", dir.path()), EXIT_CONFIG);
}

#[test]
fn bad_invocations_are_config_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["frobnicate"]), EXIT_CONFIG);
    assert_eq!(run(&["gaps", "--config", "/nonexistent/run.toml"]), EXIT_CONFIG);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[potential]\ndimension = 1\ncoupling = 1.0\nonsite = { sin2 = [1.0] }\nwobble = 3\n").unwrap();
    assert_eq!(run(&["gaps", "--config", bad.to_str().unwrap()]), EXIT_CONFIG);

    fs::write(&bad, "[potential]\ndimension = 1\ncoupling = -1.0\nonsite = { sin2 = [1.0] }\n").unwrap();
    assert_eq!(run(&["gaps", "--config", bad.to_str().unwrap()]), EXIT_CONFIG);

    fs::write(&bad, "[potential]\ndimension = 2\ncoupling = 1.0\nonsite = { sin2 = [1.0] }\n[domain]\nperiods = [1]\n").unwrap();
    assert_eq!(run(&["gaps", "--config", bad.to_str().unwrap()]), EXIT_CONFIG);
}
