use std::path::Path;
use std::process::{Command, Output};

fn weylvn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weylvn"))
        .args(args)
        .output()
        .expect("binary runs")
}

const TINY: &str = r#"
preset = "harmonic"
desk = true

[grid]
nx = 48

[model]
n = 6
t_final = 0.5

[stepper]
dt = 0.1

[output]
interval = 0.1
snapshots = [0.25, 0.5]
xi_count = 17
"#;

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("case.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn presets_lists_every_scenario() {
    let out = weylvn(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["harmonic", "quartic", "tunneling", "morse"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn run_writes_outputs_and_conserves_norm() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out_dir = dir.path().join("out");
    let out = weylvn(&[
        "run",
        "--config",
        &cfg,
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(out_dir.join("observables.csv")).unwrap();
    let t = column(&csv, "t");
    assert_eq!(t.first(), Some(&0.0));
    assert!((t.last().unwrap() - 0.5).abs() < 1e-12);
    let norm = column(&csv, "norm");
    for v in &norm {
        assert!(((v - norm[0]) / norm[0]).abs() < 1e-9);
    }

    let names: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.iter().filter(|n| n.ends_with(".bin")).count(), 2, "{names:?}");
    assert!(
        names.iter().any(|n| n.starts_with("wigner_") && n.ends_with(".csv")),
        "{names:?}"
    );
}

#[test]
fn repeated_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let mut files = Vec::new();
    for k in 0..2 {
        let out_dir = dir.path().join(format!("out{k}"));
        let out = weylvn(&[
            "run",
            "--config",
            &cfg,
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--quiet",
        ]);
        assert!(out.status.success());
        files.push(std::fs::read(out_dir.join("observables.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "preset = \"harmonic\"\n[model]\nbogus = 1\n");
    let out = weylvn(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let out = weylvn(&["run", "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(2));

    let out = weylvn(&["convergence", "--steps", "0.5,-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_with_code_3_and_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{TINY}\n").replace("dt = 0.1", "dt = 0.1\nkrylov_max_iter = 1");
    let cfg = write_config(dir.path(), &body);
    let out_dir = dir.path().join("out");
    let out = weylvn(&[
        "run",
        "--config",
        &cfg,
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let csv = std::fs::read_to_string(out_dir.join("observables.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn wigner_subcommand_converts_a_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out_dir = dir.path().join("out");
    assert!(weylvn(&[
        "run",
        "--config",
        &cfg,
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--quiet"
    ])
    .status
    .success());
    let snap = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "bin"))
        .unwrap();
    let target = dir.path().join("w.csv");
    let out = weylvn(&[
        "wigner",
        snap.to_str().unwrap(),
        "--out",
        target.to_str().unwrap(),
        "--xi-min",
        "-6",
        "--xi-max",
        "6",
        "--xi-count",
        "25",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&target).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 26);
    assert_eq!(lines.count(), 48);

    let out = weylvn(&["wigner", dir.path().join("missing").to_str().unwrap(), "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn convergence_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "preset = \"harmonic\"\ndesk = true\n[model]\nn = 8\nt_final = 0.5\n[output]\nsnapshots = []\n",
    );
    let out = weylvn(&[
        "convergence",
        "--config",
        &cfg,
        "--steps",
        "0.5,0.25",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(csv.starts_with("dt,dx,error,order\n"));
    assert_eq!(csv.lines().count(), 3);
}
