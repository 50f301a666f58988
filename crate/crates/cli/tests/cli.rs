use std::process::{Command, Output};

fn hrfem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrfem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

#[test]
fn adjoint_check_passes() {
    let o = hrfem(&["verify", "--check", "adjoint", "--mesh", "crisscross:2"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("adjoint level=1 nt=16"), "{out}");
    assert!(out.contains("status=pass"));
}

#[test]
fn solve_reports_degrees_of_freedom() {
    let o = hrfem(&[
        "solve",
        "--scheme",
        "hr",
        "--case",
        "divfree-locking",
        "--mesh",
        "crisscross:1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ndof=31 (19 + 12)"));
}

#[test]
fn solve_writes_cell_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cells.csv");
    let o = hrfem(&[
        "solve",
        "--scheme",
        "nl-min",
        "--case",
        "trig_generic",
        "--levels",
        "2",
        "--lambda",
        "1,100",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 2);
    let csv = std::fs::read_to_string(&path).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("lambda,cell,x,y,u1,u2,s11,s12,s22")
    );
    assert_eq!(csv.lines().count(), 1 + 2 * 16);
}

#[test]
fn study_emits_one_row_per_level_and_lambda() {
    let args = [
        "study",
        "--scheme",
        "hr",
        "--case",
        "divfree-locking",
        "--mesh",
        "crisscross:1",
        "--levels",
        "4",
        "--lambda",
        "1,1e6",
    ];
    let first = hrfem(&args);
    assert_eq!(first.status.code(), Some(0));
    let csv = stdout(&first);
    assert_eq!(csv.lines().count(), 1 + 8);
    assert!(csv.starts_with("scheme,case,level,h,ndof,lambda,"));
    let second = hrfem(&args);
    assert_eq!(csv, stdout(&second), "reruns are byte-identical");
}

#[test]
fn mesh_file_feeds_later_commands() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    let p = path.to_str().unwrap();
    let o = hrfem(&[
        "mesh",
        "--mesh",
        "alternating:2",
        "--levels",
        "2",
        "--out",
        p,
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("nt=32"));
    let spec = format!("file:{p}");
    let v = hrfem(&["verify", "--check", "dims", "--mesh", &spec]);
    assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(
        hrfem(&["solve", "--scheme", "bogus", "--case", "trig-generic"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(hrfem(&["verify", "--lambda", "-1"]).status.code(), Some(1));
    assert_eq!(
        hrfem(&["verify", "--mesh", "alternating:3"]).status.code(),
        Some(1)
    );
    let empty = hrfem(&["verify", "--check", "poincare", "--samples", "0"]);
    assert_eq!(empty.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&empty.stderr).starts_with("error kind=usage"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(hrfem(&["--help"]).status.code(), Some(0));
}

#[test]
fn solver_failures_exit_three() {
    let o = hrfem(&[
        "solve",
        "--scheme",
        "hr",
        "--case",
        "trig-generic",
        "--mesh",
        "crisscross:2",
        "--lambda",
        "1e14",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error kind=solver"));
}
