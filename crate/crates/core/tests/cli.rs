use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stocp"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.conf"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn stocp")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn mesh_info_on_kuhn_4_2() {
    let o = run(&["mesh-info", "--dim", "4", "--cells", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("vertices            81"), "{text}");
    assert!(text.contains("pentatopes          384"), "{text}");
    assert!(text.contains("audit               passed"));
}

#[test]
fn smooth_example_gives_a_table_1_shaped_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config("example_4_1_1");
    let o = run(&["study", "--config", cfg.to_str().unwrap(), "--out", out, "--max-cells", "32", "--format", "csv", "--format", "gnuplot"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("example_4_1_1.csv"));
    assert_eq!(rows[0].join(","), "level,h,rho,dofs_total,dofs_X,dofs_Y,error_L2,eoc,iterations,wall_time_s");
    assert_eq!(rows.len(), 5);
    let eoc: f64 = rows[4][7].parse().unwrap();
    assert!((eoc - 2.0).abs() < 0.1, "{eoc}");
    assert!(dir.path().join("example_4_1_1.dat").exists());
    assert!(!dir.path().join("example_4_1_1.json").exists());
    // the table on standard output lists h, rho, error and eoc
    let table = stdout(&o);
    assert!(table.lines().next().unwrap().contains("error_L2"));
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn every_bundled_config_runs_at_reduced_levels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cases: &[(&str, &str, &[&str])] = &[
        ("study", "example_4_1_1", &["--max-cells", "8"]),
        ("study", "example_4_1_2", &["--max-cells", "8"]),
        ("study", "example_4_1_3", &["--max-cells", "8"]),
        ("adapt", "example_4_1_3", &["--max-dofs", "1500"]),
        ("noise", "example_4_1_4", &["--max-cells", "8"]),
        ("study", "example_4_2_1", &["--max-cells", "4"]),
        ("study", "example_4_2_2", &["--max-cells", "4"]),
        ("study", "example_4_2_3", &["--max-cells", "4"]),
        ("adapt", "example_4_2_3", &["--max-dofs", "800"]),
    ];
    for (cmd, name, extra) in cases {
        let cfg = config(name);
        let mut args = vec![*cmd, "--config", cfg.to_str().unwrap(), "--out", out];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert!(o.status.success(), "{cmd} {name}: {}", stderr(&o));
        let rows = csv_rows(&dir.path().join(format!("{name}.csv")));
        assert!(rows.len() >= 3, "{cmd} {name}");
        if *cmd == "adapt" {
            assert_eq!(rows[0].last().unwrap(), "marked_count");
        }
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("{name}.json"))).unwrap()).unwrap();
        assert_eq!(json["provenance"]["command"], *cmd);
    }
}

#[test]
fn solve_writes_legacy_vtk_in_every_dimension() {
    let dir = tempfile::tempdir().unwrap();
    for (d, cells, count_line) in [(2, 4, "CELLS 32 128"), (3, 2, "CELLS 48 240"), (4, 2, "CELLS 48 240")] {
        let cfg = dir.path().join(format!("solve{d}.conf"));
        std::fs::write(&cfg, format!("name = solve{d}\ndimension = {d}\ntarget = hat\ncells = {cells}\n")).unwrap();
        let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--format", "vtk"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = std::fs::read_to_string(dir.path().join(format!("solve{d}.vtk"))).unwrap();
        assert!(text.starts_with("# vtk DataFile Version"));
        assert!(text.contains(count_line), "d={d}");
        for field in ["SCALARS u double", "SCALARS p double", "SCALARS z_nodal double"] {
            assert!(text.contains(field));
        }
    }
}

#[test]
fn config_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "dimension = 3\nrho = -1\nsmoothness = 2\n").unwrap();
    let o = run(&["study", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("line 2") && err.contains("line 3"), "{err}");
    let o = run(&["study", "--config", "/nonexistent/file.conf"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn non_convergence_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.conf");
    std::fs::write(&cfg, "name = short\ndimension = 3\ntarget = smooth\ncells = 8\nmax_iter = 2\nformats = csv\n").unwrap();
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    // results are still written
    assert!(dir.path().join("short.csv").exists());
}

fn numeric_columns(rows: &[Vec<String>]) -> Vec<Vec<String>> {
    // wall-clock time is the only non-deterministic column
    rows.iter().map(|r| r[..9].to_vec()).collect()
}

#[test]
fn csv_is_deterministic() {
    let cfg = config("example_4_1_3");
    let mut results = Vec::new();
    for threads in ["1", "1", "2"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&["study", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--max-cells", "8", "--threads", threads, "--format", "csv"]);
        assert!(o.status.success());
        results.push(numeric_columns(&csv_rows(&dir.path().join("example_4_1_3.csv"))));
    }
    assert_eq!(results[0], results[1]);
    for (a, b) in results[0].iter().zip(&results[2]).skip(1) {
        for (x, y) in a.iter().zip(b) {
            if let (Ok(x), Ok(y)) = (x.parse::<f64>(), y.parse::<f64>()) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()));
            } else {
                assert_eq!(x, y);
            }
        }
    }
}
