use std::collections::HashSet;
use std::process::{Command, Output};

fn frontlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frontlab")).args(args).output().expect("binary runs")
}

#[test]
fn schedule_prints_t_star() {
    let out = frontlab(&["schedule", "--epsilon", "0.01", "--alpha", "0.5", "--alpha-bar", "0.75", "--d", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("t_star ")).unwrap();
    assert_eq!(line.split_whitespace().nth(1), Some("4.331687"));
}

#[test]
fn missing_config_is_a_validation_error() {
    let out = frontlab(&["experiment", "E1", "--config", "missing.cfg"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_config_values_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("e1.cfg");
    std::fs::write(&cfg, "# sigma must lie in (0, 1)\nsigmas = 1.5\n").unwrap();
    let out = frontlab(&["experiment", "E1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::write(&cfg, "no_such_key = 3\n").unwrap();
    let out = frontlab(&["experiment", "E1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = frontlab(&["bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn corrupted_input_is_rejected_as_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("eta.afld");
    let out = frontlab(&["sample", "--epsilon", "0.1", "--points", "32", "--extent", "1.6", "--out", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let mut bytes = std::fs::read(&f).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    std::fs::write(&f, bytes).unwrap();
    let img = dir.path().join("x.pgm");
    let out = frontlab(&["render", f.to_str().unwrap(), "--out", img.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn render_of_constant_field_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("c.afld");
    let grid = frontlab::Grid::new(2, 16, 1.0).unwrap();
    frontlab::io::write_field(&frontlab::Field::constant(&grid, 0.3, 0.0), &f).unwrap();
    let img = dir.path().join("c.pgm");
    let out = frontlab(&["render", f.to_str().unwrap(), "--out", img.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let bytes = std::fs::read(&img).unwrap();
    let header = b"P5\n16 16\n255\n".len();
    assert_eq!(bytes.len(), header + 256);
    let distinct: HashSet<u8> = bytes[header..].iter().copied().collect();
    assert_eq!(distinct.len(), 1);
}

#[test]
fn sample_evolve_and_mcf_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let psi = dir.path().join("psi.afld");
    let out = frontlab(&[
        "sample", "--epsilon", "0.1", "--kind", "psi", "--points", "128", "--extent", "6.4", "--seed", "3", "--out",
        psi.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let runs = dir.path().join("mcf");
    let out = frontlab(&["mcf", psi.to_str().unwrap(), "--sigma", "1.1", "--out", runs.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(runs.join("w_sigma1.1000.afld").exists());
    assert!(runs.join("w_sigma1.1000_nodal.csv").exists());

    let eta = dir.path().join("eta.afld");
    frontlab(&["sample", "--epsilon", "0.1", "--points", "64", "--extent", "3.2", "--out", eta.to_str().unwrap()]);
    let ev = dir.path().join("ev");
    let out = frontlab(&["evolve", eta.to_str().unwrap(), "--to", "0.5", "--rough", "0.1", "--out", ev.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let u = frontlab::io::read_field(&ev.join("u_t0.5000.afld")).unwrap();
    assert_eq!(u.time(), 0.5);
}

#[test]
fn failing_criteria_exit_with_three() {
    // Single rung: the ladder criteria cannot pass, so the run reports failure.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("e3.cfg");
    std::fs::write(
        &cfg,
        "experiment = E3\nepsilons = 0.1\npoints = 128\nextents = 6.4\nreplicas = 2\n",
    )
    .unwrap();
    let out_dir = dir.path().join("report");
    let out = frontlab(&["experiment", "E3", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("report.json").exists());
    assert!(std::fs::read_dir(&out_dir).unwrap().count() > 1);
}
