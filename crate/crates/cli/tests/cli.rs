use std::process::{Command, Output};

use hdg_core::Mesh;

fn hdgns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdgns")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn default_study_prints_csv() {
    let o = hdgns(&["--levels", "4,8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,h,err_u_rel,rate_u,err_L_rel,rate_L,err_p_rel,rate_p,div_l1,iters");
    assert!(lines[1].starts_with("4,3.5355E-01,1.6593E-01,,1.5900E-01,,5.1047E-01,,"), "{}", lines[1]);
    assert_eq!(lines.len(), 3);
    assert!(!lines[2].split(',').nth(3).unwrap().is_empty());
}

#[test]
fn output_is_deterministic() {
    let a = hdgns(&["--levels", "2,4", "--k", "2"]);
    let b = hdgns(&["--levels", "2,4", "--k", "2"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn writes_markdown_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.md");
    let o = hdgns(&["--levels", "2,4", "--format", "markdown", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("| n | h | err_u_rel |"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn invalid_configuration_exits_with_one() {
    for args in [
        &["--k", "4"][..],
        &["--k", "2", "--m", "0"],
        &["--mode", "iterative"],
        &["--format", "json"],
        &["--example", "3"],
        &["--re", "0"],
        &["--levels", "8,4"],
        &["--tau", "face"],
        &["--no-such-flag"],
        &["--mesh-file", "/nonexistent/mesh.node"],
    ] {
        let o = hdgns(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(stderr(&o).contains("error"), "{args:?}");
    }
}

#[test]
fn bad_thread_count_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_hdgns"))
        .args(["--levels", "2"])
        .env("THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("THREADS"));
}

#[test]
fn non_convergence_exits_with_two() {
    let o = hdgns(&["--levels", "2", "--max-iter", "1", "--tol", "1e-30"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("did not converge"));
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with("1*"));
}

#[test]
fn non_doubling_levels_warn() {
    let o = hdgns(&["--levels", "4,6"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("do not double"));
    let text = stdout(&o);
    let last: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    assert_eq!(last[0], "6");
    assert!(last[3].is_empty() && last[5].is_empty() && last[7].is_empty());
}

#[test]
fn imported_mesh_matches_uniform_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let (node, ele) = Mesh::uniform(4).to_triangle();
    std::fs::write(dir.path().join("sq.node"), node).unwrap();
    std::fs::write(dir.path().join("sq.ele"), ele).unwrap();
    let node_path = dir.path().join("sq.node");
    let o = hdgns(&["--mesh-file", node_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let reference = stdout(&hdgns(&["--levels", "4"]));
    assert_eq!(lines[1].split(',').skip(1).collect::<Vec<_>>(), reference.lines().nth(1).unwrap().split(',').skip(1).collect::<Vec<_>>());
}

#[test]
fn hydrostatic_example_runs_monolithic() {
    let o = hdgns(&["--example", "2", "--levels", "4", "--mode", "monolithic"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let err_u: f64 = row[2].parse().unwrap();
    assert!(err_u < 1e-9);
}
