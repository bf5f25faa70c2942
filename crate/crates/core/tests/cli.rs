use std::path::{Path, PathBuf};

use pharmonic::cli::run_command;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str], out: &Path) -> i32 {
    let mut argv = vec!["pharmonic"];
    argv.extend_from_slice(args);
    argv.extend_from_slice(&["--out", out.to_str().unwrap()]);
    run_command(argv)
}

fn report(out: &Path) -> String {
    std::fs::read_to_string(out.join("report.txt")).unwrap()
}

fn value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing in\n{report}"))
        .parse()
        .unwrap()
}

#[test]
fn flat_weyl_csv_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["curvature", "--metric", &data("flat.toy"), "--tensor", "weyl"], dir.path()), 0);
    let csv = std::fs::read_to_string(dir.path().join("weyl.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("x1,x2,x3,W_1111"));
    for line in lines {
        for v in line.split(',').skip(3) {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn csv_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(run(&["curvature", "--metric", &data("sphere.toy"), "--tensor", "scalar"], d.path()), 0);
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("scalar.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn sphere_flatness_reports_positive_factor() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(&["flatness", "--metric", &data("sphere.toy"), "--center", "0,0,0,0", "--radius", "0.2"], dir.path());
    assert_eq!(code, 0);
    let r = report(dir.path());
    assert!(r.contains("conformally_flat = true"));
    assert!(value(&r, "c_min") > 3.5 && value(&r, "c_max") <= 4.0 + 1e-12);
    assert!(dir.path().join("conformal_factor.csv").exists());
}

#[test]
fn parametrix_identity_demo() {
    let dir = tempfile::tempdir().unwrap();
    for sys in ["laplace.toy", "hessian.toy"] {
        assert_eq!(run(&["parametrix", "--system", &data(sys), "--demo", "identity"], dir.path()), 0);
        assert!(value(&report(dir.path()), "identity_residual") <= 1e-10);
    }
    assert_eq!(run(&["parametrix", "--system", &data("laplace.toy"), "--demo", "neumann"], dir.path()), 0);
    let r = report(dir.path());
    assert!(value(&r, "kappa") < 1.0 && value(&r, "residual") <= 2e-10);
}

#[test]
fn symbol_and_structural_commands() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["symbol-ellipticity", "--system", &data("hessian.toy"), "--directions", "32"], dir.path()), 0);
    assert!((value(&report(dir.path()), "min_singular_value") - 0.75f64.sqrt()).abs() < 1e-3);
    assert_eq!(run(&["symbol-ellipticity", "--metric", &data("sphere.toy"), "--directions", "50"], dir.path()), 0);
    let r = report(dir.path());
    assert!(r.contains("weyl.injective = false") && r.contains("weyl_gauged.injective = true"));
    assert_eq!(run(&["structural-check", "--metric", &data("flat.toy"), "--p", "3"], dir.path()), 0);
    assert!(value(&report(dir.path()), "homogeneity_max_violation") < 1e-12);
    assert_eq!(run(&["pharm", "--metric", &data("flat.toy"), "--p", "3", "--radius", "0.3"], dir.path()), 0);
    assert!(value(&report(dir.path()), "deviation") < 1e-10);
}

#[test]
fn holder_and_conformal_demos() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["holder", "--demo", "sqrt"], dir.path()), 0);
    assert!((value(&report(dir.path()), "alpha_est") - 0.5).abs() < 0.05);
    assert_eq!(run(&["holder", "--metric", &data("sphere.toy"), "--tensor", "g11"], dir.path()), 0);
    assert!(value(&report(dir.path()), "alpha_min") > 0.75);
    assert_eq!(run(&["conformal-check", "--demo", "stretch"], dir.path()), 0);
    assert!((value(&report(dir.path()), "max_distortion") - 2.0).abs() < 1e-12);
}

#[test]
fn validation_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["curvature", "--metric", &data("flat.toy"), "--bogus", "1"], dir.path()), 1);
    assert_eq!(run(&["curvature", "--metric", "/nonexistent/file.toy"], dir.path()), 1);
    assert_eq!(run(&["curvature", "--metric", &data("flat.toy"), "--order", "3"], dir.path()), 1);
    assert_eq!(run(&["pharm", "--metric", &data("flat.toy"), "--center", "0,0"], dir.path()), 1);
    let bad: PathBuf = dir.path().join("indef.toy");
    std::fs::write(&bad, "dim = 2\nlower = -1, -1\nupper = 1, 1\nresolution = 9\ng[1][1] = x1\n").unwrap();
    assert_eq!(run(&["curvature", "--metric", bad.to_str().unwrap()], dir.path()), 1);
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let big = dir.path().join("big.toy");
    std::fs::write(
        &big,
        "dim = 2\nlower = -pi, -pi\nupper = pi, pi\nresolution = 32\nperiodic = 1\nN = 1\nM = 1\n\
         A[1][1][1][1] = 1 + 5*sin(x1)\nA[2][2][1][1] = 1 + 5*sin(x1)\n",
    )
    .unwrap();
    let code = run(&["parametrix", "--system", big.to_str().unwrap(), "--demo", "neumann", "--center", "0,0", "--radius", "1"], dir.path());
    assert_eq!(code, 2);
}
