use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use secondgrade::fieldio;

fn exe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_secondgrade"))
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn every_example_config_parses() {
    for entry in fs::read_dir(configs()).unwrap() {
        let p = entry.unwrap().path();
        secondgrade::harness::RunConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn config_error_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[physics]\nalpha = 1.0\nnu = \"slow\"\n").unwrap();
    let o = exe()
        .arg("basis-check")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn threshold_failure_exits_nonzero_and_names_metric() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.toml");
    fs::write(
        &cfg,
        "seeds = [0]\n[discretization]\ncutoff = 4\n[checks]\nsamples = 5\nalphas = [1.0]\n[thresholds]\neigen_rel = -1.0\n",
    )
    .unwrap();
    let o = exe()
        .arg("basis-check")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("eigen_relation_rel"));
    let text = fs::read_to_string(dir.path().join("basis-check/report.txt")).unwrap();
    assert!(text.contains("[FAIL] eigen_relation_rel"));
}

#[test]
fn simulate_writes_artifacts_under_env_root() {
    let dir = tempfile::tempdir().unwrap();
    let o = exe()
        .arg("simulate")
        .arg("--config")
        .arg(configs().join("simulate.toml"))
        .env("SECONDGRADE_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("simulate");
    let path = fs::read_to_string(out.join("path.csv")).unwrap();
    assert!(path.starts_with("t,W,Q\n"));
    assert_eq!(path.lines().count(), 202);
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,norm_v,norm_w\n"));
    let mall = fs::read_to_string(out.join("malliavin_field.csv")).unwrap();
    assert!(mall.starts_with("r,t,norm_v\n"));

    let (bin, alpha) = fieldio::load(&out.join("final_u.bin")).unwrap();
    let (csv, alpha_csv) = fieldio::load(&out.join("final_u.csv")).unwrap();
    assert_eq!(bin, csv);
    assert_eq!(alpha.to_bits(), alpha_csv.to_bits());
    // A single level gives nothing to fit, so no plot.
    assert!(!out.join("plot.svg").exists());
}

#[test]
fn linear_config_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = exe()
        .arg("simulate")
        .arg("--config")
        .arg(configs().join("linear-decay.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("[PASS] linear_closed_form_rel"), "{text}");
}

#[test]
fn seeds_and_levels_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = exe()
        .args([
            "product-rule",
            "--seeds",
            "0..20",
            "--levels",
            "16,32,64",
            "--threads",
            "2",
        ])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let study = fs::read_to_string(dir.path().join("product-rule/study.csv")).unwrap();
    let rows: Vec<&str> = study.lines().collect();
    assert_eq!(rows[0], "dt,mean,std,seeds");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("0.0625,") && rows[1].ends_with(",20"));
    let svg = fs::read_to_string(dir.path().join("product-rule/plot.svg")).unwrap();
    assert!(svg.contains("fitted slope"));
}

#[test]
fn bad_seed_spec_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = exe()
        .args(["energy", "--seeds", "5..2"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seeds"));
}
