use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mf_cli::Report;
use mf_core::recovery::Scheme;

const MATERIALS: &str = r#"
[[material]]
phase = 0
young = 250000.0
poisson = 0.17

[[material]]
phase = 1
young = 775000.0
poisson = 0.2
"#;

fn mf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mf")).args(args).current_dir(dir).env("MF_THREADS", "1").output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, format!("{body}\n{MATERIALS}")).unwrap();
    path.to_str().unwrap().to_owned()
}

fn run_ok(dir: &Path, body: &str) -> Report {
    let cfg = write_config(dir, body);
    let out = mf(&["run", &cfg], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    Report::read(&dir.join("out")).unwrap()
}

#[test]
fn single_phase_without_reference() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_ok(
        dir.path(),
        r#"synthetic = { kind = "uniform", size = 8 }
           coupling = "kubc"
           steps = 0
           reference_factor = 0
           output = "out""#,
    );
    assert_eq!(report.steps.len(), 1);
    let step = &report.steps[0];
    assert_eq!(step.ndof, 2 * 9 * 9);
    assert_eq!(step.reduction_factor, 1.0);
    let errors = &step.couplings[0].errors;
    assert!(errors.total_true.is_none() && errors.effectivity.is_empty());
    // a homogeneous strain is reproduced exactly
    assert!(errors.total_estimated.values().all(|&e| e < 1e-12));
    let summary = fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    assert!(!summary.contains("theta"));
    for f in ["mesh_step0.vtk", "elements_step0.csv", "report.json", "timings.json"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
}

#[test]
fn soft_laminate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_ok(
        dir.path(),
        r#"synthetic = { kind = "laminate", size = 32, fraction = 0.5 }
           algorithm = "soft"
           steps = 3
           coupling = "dirichlet"
           reference_factor = 8
           homogenize = false
           output = "out""#,
    );
    assert_eq!(report.steps.len(), 4);
    for w in report.steps.windows(2) {
        assert!(w[1].ndof <= w[0].ndof);
        for s in Scheme::ALL {
            let est = |k: usize| report.steps[k].couplings[0].errors.total_estimated[&s];
            let (a, b) = (est(w[0].step), est(w[1].step));
            assert!(b >= a * (1.0 - 1e-9), "{s}: step {} {a} -> {b}", w[1].step);
        }
    }
    assert!(report.steps[2].ndof < report.steps[1].ndof && report.steps[1].ndof < report.steps[0].ndof);
    for st in &report.steps {
        let e = &st.couplings[0].errors;
        assert!(e.total_true.unwrap() > 0.0);
        assert_eq!(e.effectivity.len(), 3);
    }
    let summary = fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    let rows = summary.lines().filter(|l| l.split_whitespace().next().is_some_and(|t| t.parse::<usize>().is_ok()));
    assert_eq!(rows.count(), 4 * 3);
    assert!(summary.contains("theta"));
    for k in 0..4 {
        let vtk = fs::read_to_string(dir.path().join(format!("out/mesh_step{k}.vtk"))).unwrap();
        assert!(vtk.contains("rel_error_dirichlet_modified_spr") && vtk.contains("strain_xx_dirichlet"));
        let csv = fs::read_to_string(dir.path().join(format!("out/elements_step{k}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), report.steps[k].elements + 1);
    }
}

#[test]
fn invalid_palette_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut pgm = b"P5 2 2 255\n".to_vec();
    pgm.extend([0u8, 255, 255, 0]);
    fs::write(dir.path().join("grid.pgm"), pgm).unwrap();
    fs::write(dir.path().join("colors.txt"), "0 0\nnot-a-color 1\n").unwrap();
    let cfg = write_config(dir.path(), "input = \"grid.pgm\"\npalette = \"colors.txt\"\noutput = \"out\"");
    let out = mf(&["run", &cfg], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("palette") && err.contains("line 2"), "{err}");

    // a valid palette missing one of the image's colors
    fs::write(dir.path().join("colors.txt"), "0 0\n").unwrap();
    let out = mf(&["run", &cfg], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not in the palette"));
}

#[test]
fn invalid_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "synthetic = { kind = \"uniform\", size = 4 }\nreference_factor = 3");
    let out = mf(&["run", &cfg], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("reference_factor"));
}

#[test]
fn report_is_deterministic_and_rerenderable() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"synthetic = { kind = "cross", size = 16, half_width = 0.1, half_length = 0.35 }
                  steps = 2
                  coupling = ["dirichlet", "periodic", "neumann"]
                  macro_stress = [100.0, 0.0, 50.0]
                  body_force = 1000.0
                  reference_factor = 2
                  output = "out""#;
    run_ok(dir.path(), body);
    let first = fs::read(dir.path().join("out/report.json")).unwrap();
    let summary = fs::read(dir.path().join("out/summary.txt")).unwrap();
    let report = run_ok(dir.path(), body);
    assert_eq!(first, fs::read(dir.path().join("out/report.json")).unwrap());
    assert!(report.steps.iter().all(|s| s.couplings.iter().all(|c| c.tensor.is_some())));

    fs::remove_file(dir.path().join("out/summary.txt")).unwrap();
    let out = mf(&["report", "out"], dir.path());
    assert!(out.status.success());
    assert_eq!(summary, fs::read(dir.path().join("out/summary.txt")).unwrap());
}

#[test]
fn coarsen_writes_meshes_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "synthetic = { kind = \"cross\", size = 16, half_width = 0.1, half_length = 0.35 }\nalgorithm = \"hard\"\nsteps = 2\noutput = \"out\"",
    );
    let out = mf(&["coarsen", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for k in 0..3 {
        assert!(dir.path().join(format!("out/mesh_step{k}.vtk")).is_file());
        assert!(dir.path().join(format!("out/mesh_step{k}.json")).is_file());
    }
    assert!(!dir.path().join("out/report.json").exists());
}
