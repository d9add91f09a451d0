use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stochpoisson"))
}

fn systems(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../systems").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn paths_layout_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("paths.csv");
    let o = run(&["paths", "-T", "1", "--h", "0.01", "-o", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&csv);
    assert_eq!(header, ["t", "y1", "y2", "y3", "y1_ref", "y2_ref", "y3_ref"]);
    assert_eq!(rows.len(), 101);
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
    assert_eq!(rows[0][1..4], rows[0][4..7]);
    let last = rows.last().unwrap();
    assert!((0..3).all(|i| (last[1 + i] - last[4 + i]).abs() < 1e-2));

    let meta: toml::Table = toml::from_str(&std::fs::read_to_string(dir.path().join("paths.csv.meta.toml")).unwrap()).unwrap();
    assert_eq!(meta["reference_refinement"].as_integer(), Some(1000));
    assert_eq!(meta["reference_capped"].as_bool(), Some(false));
    assert_eq!(meta["system"].as_str(), Some("srb"));
}

#[test]
fn paths_reference_step_is_capped() {
    let o = run(&["paths", "-T", "50", "--h", "0.01"]);
    assert!(o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("# reference_refinement = 200"), "{err}");
    assert!(err.contains("# reference_capped = true"));
    assert_eq!(stdout(&o).lines().count(), 5002);
}

#[test]
fn reruns_are_byte_identical() {
    let a = run(&["paths", "--system", "slv", "-T", "1", "--seed", "17"]);
    let b = run(&["paths", "--system", "slv", "-T", "1", "--seed", "17"]);
    let c = run(&["paths", "--system", "slv", "-T", "1", "--seed", "18"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);

    let args = ["order", "--samples", "16", "--h", "0.02,0.01", "-T", "1", "--seed", "5"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn rigid_body_casimir_is_exact_and_em_drifts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let o = run(&["casimir", "-o", csv.to_str().unwrap()]);
    assert!(o.status.success());
    let (header, rows) = read_csv(&csv);
    assert_eq!(header, ["t", "casimir_scheme", "casimir_em"]);
    assert_eq!(rows.len(), 50_001);
    assert!((rows[0][1] - 0.5).abs() < 1e-15);
    let scheme = rows.iter().map(|r| (r[1] - 0.5).abs()).fold(0.0, f64::max);
    let em = rows.iter().map(|r| (r[2] - 0.5).abs()).fold(0.0, f64::max);
    assert!(scheme < 1e-10, "{scheme}");
    assert!(em > 1e-3, "{em}");
}

#[test]
fn lotka_volterra_casimir_has_implicit_comparator() {
    let o = run(&["casimir", "--system", "slv", "--alpha", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,casimir_scheme,casimir_em,casimir_iem"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 1001);
    let c0 = rows[0][1];
    assert!((c0 + 2.184802057337662).abs() < 1e-12);
    assert!(rows.iter().all(|r| (r[1] - c0).abs() < 1e-10));
    assert!(rows.iter().any(|r| (r[3] - c0).abs() > 1e-3));
}

#[test]
fn order_csv_and_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("o.csv");
    let o = run(&[
        "order", "--samples", "40", "--h", "0.04,0.02,0.01", "-T", "2", "--spherical", "-o",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&csv);
    assert_eq!(header, ["h", "rms_alpha_0", "rms_alpha_0.5", "rms_alpha_1", "rms_spherical"]);
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), [0.04, 0.02, 0.01]);
    assert!(rows.iter().all(|r| r[1..].iter().all(|e| *e > 0.0 && *e < 0.1)));
    let text = stdout(&o);
    let slopes: Vec<f64> = text
        .lines()
        .map(|l| l.rsplit(" = ").next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(slopes.len(), 4, "{text}");
    assert!(slopes.iter().all(|s| (0.7..1.3).contains(s)), "{slopes:?}");
}

#[test]
fn order_on_stdout_comments_the_slopes() {
    let o = run(&["order", "--system", "slv", "--samples", "8", "--h", "0.02,0.01", "-T", "1", "--alpha", "0.5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "h,rms_alpha_0.5");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("# slope rms_alpha_0.5 = "));
}

#[test]
fn check_passes_for_builtin_and_custom_systems() {
    for system in [
        "srb".to_string(),
        "slv".to_string(),
        systems("oscillator.toml").display().to_string(),
        systems("rigid_body.toml").display().to_string(),
        systems("lotka_volterra.toml").display().to_string(),
    ] {
        let o = run(&["check", "--system", &system]);
        let text = stdout(&o);
        assert!(o.status.success(), "{system}:\n{text}");
        assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6, "{text}");
    }
}

#[test]
fn custom_systems_reproduce_the_builtins() {
    for (builtin, file) in [("srb", "rigid_body.toml"), ("slv", "lotka_volterra.toml")] {
        let path = systems(file);
        let a = stdout(&run(&["paths", "--system", builtin, "-T", "0.5", "--alpha", "0"]));
        let b = stdout(&run(&["paths", "--system", path.to_str().unwrap(), "-T", "0.5", "--alpha", "0"]));
        let parse = |s: &str| -> Vec<f64> {
            s.lines().skip(1).flat_map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()).collect::<Vec<_>>()).collect()
        };
        let (a, b) = (parse(&a), parse(&b));
        assert_eq!(a.len(), b.len());
        let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "{builtin}: {worst}");
    }
}

#[test]
fn non_skew_structure_fails_skew_check() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(systems("rigid_body.toml"))
        .unwrap()
        .replace("[\"y3\", 0, \"-y1\"]", "[\"y3 + 0.1\", 0, \"-y1\"]");
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, text).unwrap();
    let o = run(&["check", "--system", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("FAIL skew")), "{out}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("skew"));
}

#[test]
fn config_file_is_used_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "system = \"oscillator.toml\"\nT = 0.5\nh = [0.05]\noutput = \"out.csv\"\n").unwrap();
    std::fs::copy(systems("oscillator.toml"), dir.path().join("oscillator.toml")).unwrap();
    let o = run(&["paths", "--config", cfg.to_str().unwrap(), "--h", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&dir.path().join("out.csv"));
    assert_eq!(header.len(), 7);
    assert_eq!(rows.len(), 6);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "stepsize = 0.1\n").unwrap();
    assert_eq!(run(&["paths", "--config", bad.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(run(&["paths", "--bogus"]).status.code(), Some(3));
    assert_eq!(run(&["paths", "--help"]).status.code(), Some(0));
    assert_eq!(run(&["paths", "--system", "missing.toml"]).status.code(), Some(3));
    assert_eq!(run(&["paths", "--param", "zz=1"]).status.code(), Some(3));
    assert_eq!(run(&["paths", "--h", "0.011", "-T", "1"]).status.code(), Some(3));
    assert_eq!(run(&["order", "--system", "slv", "--spherical"]).status.code(), Some(3));

    let o = run(&["paths", "--system", "slv", "--param", "c2=200", "-T", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step 3"));
}
