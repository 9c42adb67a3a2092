use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sphere-fem"))
}

#[test]
fn check_mesh_writes_csv_to_stdout() {
    let out = bin().args(["check-mesh", "--set", "grids=4x2"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("nx,ny,nz,"));
    assert!(lines.next().unwrap().starts_with("4,2,,15,16,"));
}

#[test]
fn invalid_config_fails_with_message() {
    let out = bin()
        .args(["barrier-scan", "--set", "samples_per_cell=2"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("samples_per_cell"), "{err}");

    let out = bin().args(["dynamics", "--set", "nonsense=1"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn config_file_and_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# short run\nexperiment = convergence-space\nlevels = 1..2\nk = 0.05\nt_final = 0.1\n",
    )
    .unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = bin()
            .arg("convergence-space")
            .arg("--config")
            .arg(&cfg)
            .args(["--solver", "uzawa", "--quad-order", "5", "--out"])
            .arg(&path)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 3);

    let out = bin().arg("dynamics").arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success(), "experiment mismatch must be rejected");
}

#[test]
fn dynamics_over_two_grids_writes_one_file_each() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dyn.csv");
    let status = bin()
        .args([
            "dynamics",
            "--scheme",
            "euler",
            "--set",
            "grids=8x4,16x8",
            "--set",
            "t_final=0.003",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for g in ["8x4", "16x8"] {
        let text = std::fs::read_to_string(dir.path().join(format!("dyn-{g}.csv"))).unwrap();
        assert!(text.starts_with("step,time,energy,"));
        assert_eq!(text.lines().count(), 5);
    }
}
