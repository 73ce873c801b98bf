use std::process::Command;

fn partape(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_partape")).args(args).output().unwrap()
}

#[test]
fn primal_writes_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.csv");
    let o = partape(&["primal", "--grid", "6", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 1 + 7 * 6);
    assert!(String::from_utf8_lossy(&o.stderr).contains("converged: true"));
}

#[test]
fn adjoint_with_config_file_and_mesh_file() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("m.mesh");
    partape_fvm::Mesh::generate_grid(5, 4, 1.0, 1.0).unwrap().save(&mesh).unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "nu = 0.2\nadjoint_mode = gmres\nadjoint_tol = 1e-10\nscheme = reuse\n").unwrap();
    let out = dir.path().join("s.csv");
    let o = partape(&[
        "adjoint",
        "--config",
        cfg.to_str().unwrap(),
        "--mesh",
        mesh.to_str().unwrap(),
        "--threads",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(o.status.success(), "{err}");
    assert!(err.contains("adjoint (gmres)") && err.contains("converged: true"), "{err}");
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("point,x,y,dj_dx,dj_dy"));
    assert_eq!(text.lines().count(), 1 + 30);
}

#[test]
fn bench_and_matrix_reports() {
    let o = partape(&["bench", "--grid", "6", "6", "--reps", "2", "--warmup", "0", "--adjoint-iters", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 2);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let o = partape(&[
        "matrix",
        "--grid",
        "6",
        "6",
        "--reps",
        "1",
        "--warmup",
        "0",
        "--adjoint-iters",
        "5",
        "--axis",
        "scheme=linear,reuse",
        "--axis",
        "preacc=on,off,hybrid",
        "--report",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = partape_bench::read_rows(&std::fs::read_to_string(out).unwrap(), partape_bench::ReportFormat::Json).unwrap();
    assert_eq!(rows.len(), 6);
}

#[test]
fn bad_input_fails_with_diagnostic() {
    for args in [
        vec!["bench", "--reps", "0"],
        vec!["adjoint", "--scheme", "cubic"],
        vec!["primal", "--mesh", "/nonexistent/mesh"],
        vec!["bench", "--report", "xml", "--grid", "2", "2"],
        vec!["primal", "--grid", "3"],
        vec!["frobnicate"],
    ] {
        let o = partape(&args);
        assert!(!o.status.success(), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
}
