use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn perfhom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perfhom")).args(args).output().unwrap()
}

fn run_config(config: &Path, out: &Path) -> Output {
    perfhom(&["run", config.to_str().unwrap(), "--output-dir", out.to_str().unwrap()])
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn rows(csv: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn bump_kernel_validates() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(&configs().join("validate_bump.toml"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let checks = rows(&dir.path().join("kernel_checks.csv"));
    assert_eq!(checks.len(), 4);
    assert!(checks.iter().all(|r| r[1] == "true"));
}

#[test]
fn indicator_kernel_is_flagged_discontinuous() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "experiment = \"validate-kernel\"\n[kernel]\nprofile = \"indicator\"\ndim = 3\n",
    );
    let out = run_config(&cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("discontinuous"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "validate-kernel");
    assert_eq!(summary["units"]["radius"], "dimensionless");
    assert!(summary["provenance"]["timestamp"].as_str().is_some());
}

#[test]
fn annulus_has_zero_eigenvalue_and_no_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(&configs().join("annulus_eigen.toml"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("covering certificate not established"), "{stdout}");
    let row = &rows(&dir.path().join("eigen.csv"))[0];
    let lambda: f64 = row[2].parse().unwrap();
    assert!(lambda.abs() <= 1e-8);
    assert_eq!(row[7], "");
}

#[test]
fn covering_without_certificate_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fs::read_to_string(configs().join("annulus_eigen.toml"))
        .unwrap()
        .replace("experiment = \"eigen\"", "experiment = \"covering\"")
        .replace("spacing = 0.03125", "spacing = 0.0625");
    let cfg = write_config(dir.path(), &cfg);
    let out = run_config(&cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(3));
    // outputs are written before the failure is reported
    let status = &rows(&dir.path().join("out/covering.csv"))[0][4];
    assert_ne!(status, "established");
}

#[test]
fn dirichlet_case_three_is_unequal_in_three_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "experiment = \"iterated-limits\"\n[cases]\nboundary = \"dirichlet\"\nregimes = [\"EQ_a\"]\ndim = 3\nnodes = 17\n",
    );
    let out = run_config(&cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &rows(&dir.path().join("out/iterated_limits.csv"))[0];
    assert_eq!(r[0], "dirichlet-3");
    assert_eq!(r[3], "unequal");
    assert_eq!(r[5], "true");
}

#[test]
fn rejected_regime_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "experiment = \"iterated-limits\"\n[cases]\nboundary = \"dirichlet\"\nregimes = [\"LL_b\"]\ndim = 3\nnodes = 9\n",
    );
    assert_eq!(run_config(&cfg, &dir.path().join("out")).status.code(), Some(3));
}

#[test]
fn unknown_key_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "experiment = \"validate-kernel\"\n[kernel]\nprofile = \"bump\"\nwidth = 2\n",
    );
    let out = run_config(&cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("width"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_config_file_exits_with_config_code() {
    assert_eq!(perfhom(&["run", "/nonexistent/run.toml"]).status.code(), Some(2));
}

#[test]
fn unknown_field_name_exits_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let out = perfhom(&[
        "run",
        configs().join("disk_cell.toml").to_str().unwrap(),
        "--output-dir",
        dir.path().join("out").to_str().unwrap(),
        "--emit-fields",
        "solution",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cell_run_is_byte_identical_and_emits_correctors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "experiment = \"cell-coefficients\"\n[cell]\nhole = { shape = \"ball\", radius_factor = 0.25 }\nspacing = 0.03125\n",
    );
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out_dir = dir.path().join(format!("out{k}"));
        let out = perfhom(&[
            "run",
            cfg.to_str().unwrap(),
            "--output-dir",
            out_dir.to_str().unwrap(),
            "--emit-fields",
            "correctors",
        ]);
        assert_eq!(out.status.code(), Some(0));
        outputs.push(out_dir);
    }
    for name in ["cell_coefficients.csv", "cell.csv", "fields/corrector_1.txt", "fields/corrector_2.txt"] {
        let a = fs::read(outputs[0].join(name)).unwrap();
        let b = fs::read(outputs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
    let q = rows(&outputs[0].join("cell_coefficients.csv"));
    let q11: f64 = q[0][2].parse().unwrap();
    let q22: f64 = q[3][2].parse().unwrap();
    assert!((q11 - q22).abs() < 1e-8 && q11 > 0.5 && q11 < 1.0);
}

#[test]
fn sweep_output_has_no_nan_and_fixed_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"experiment = "epsilon-sweep"
[geometry]
kind = "periodic-balls"
omega_lo = [0.0, 0.0]
omega_hi = [1.0, 1.0]
c0 = 0.25
spacing = 0.03125
[kernel]
profile = "tent"
radius = 0.25
[solver]
boundary = "neumann"
threads = 2
[sweep]
epsilons = [0.5, 0.25]
"#,
    );
    let out = run_config(&cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/epsilon_sweep.csv")).unwrap();
    assert!(text.starts_with("epsilon,h,lambda1,l2_norm_u,pairing_err_phi1,"));
    assert!(!text.to_lowercase().contains("nan") && !text.contains("inf"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn nonlocal_critical_requires_dirichlet() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fs::read_to_string(configs().join("critical_sweep.toml"))
        .unwrap()
        .replace("[sweep]", "[solver]\nboundary = \"neumann\"\n\n[sweep]");
    let cfg = write_config(dir.path(), &cfg);
    assert_eq!(run_config(&cfg, &dir.path().join("out")).status.code(), Some(2));
}

#[test]
fn check_prints_the_normalized_config() {
    let out = perfhom(&["check", configs().join("neumann_cases.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("cell_radius = 0.25"), "{text}");
}
