//! Command-line behavior: artifact round trips, exit-code policy, and the
//! calibration of a full `power --null` run.

use std::process::Command;

use somtest::cli::{COUNTS_FILE, MODEL_FILE, PLANES_FILE, RELDIFF_FILE, RESULT_FILE};
use somtest::export::{CountsDoc, GridValuesDoc, PlanesDoc, ResultDoc};
use somtest::{Family, GeneratorSpec, Method, PowerReport, SomModel};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_somtest"))
}

fn sample_csvs(dir: &std::path::Path, seed: u64, n: usize) -> (std::path::PathBuf, std::path::PathBuf) {
    let x = dir.join("x.csv");
    let z = dir.join("z.csv");
    let spec = GeneratorSpec::new(Family::GaussLocation, 3, seed);
    somtest::cli::write_sample_csvs(&spec, n, n, false, &x, &z).unwrap();
    (x, z)
}

#[test]
fn identical_files_give_p_value_one() {
    let dir = tempfile::tempdir().unwrap();
    let (x, _) = sample_csvs(dir.path(), 5, 100);
    let out = dir.path().join("out");
    let status = bin()
        .args([
            "test",
            x.to_str().unwrap(),
            x.to_str().unwrap(),
            "--method",
            "som",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let doc: ResultDoc = somtest::export::read_json(&out.join(RESULT_FILE)).unwrap();
    assert_eq!(doc.p_value, 1.0);
    assert_eq!(doc.statistic, 0.0);
}

#[test]
fn som_artifacts_round_trip_through_their_loaders() {
    let dir = tempfile::tempdir().unwrap();
    let (x, z) = sample_csvs(dir.path(), 8, 150);
    let out = dir.path().join("out");
    let status = bin()
        .args([
            "test",
            x.to_str().unwrap(),
            z.to_str().unwrap(),
            "--method",
            "som",
            "--width",
            "6",
            "--height",
            "5",
            "--seed",
            "2",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let result: ResultDoc = somtest::export::read_json(&out.join(RESULT_FILE)).unwrap();
    assert_eq!(result.method, Method::SomChi2);
    assert_eq!(result.model_path.as_deref(), Some(MODEL_FILE));
    assert!(result.p_value > 0.0 && result.p_value <= 1.0);

    let model = SomModel::load(&out.join(MODEL_FILE)).unwrap();
    assert_eq!(model.geometry().width, 6);
    assert_eq!(model.geometry().height, 5);
    assert_eq!(model.dim(), 3);

    let counts: CountsDoc = somtest::export::read_json(&out.join(COUNTS_FILE)).unwrap();
    let (geometry, grid) = counts.into_grid().unwrap();
    assert_eq!(geometry.neuron_count(), 30);
    assert_eq!(grid.n_x(), 150);
    assert_eq!(grid.n_z(), 150);

    // The inline counts and the grid document agree.
    let inline = result.counts.unwrap();
    assert_eq!(inline.r, grid.r());
    assert_eq!(inline.s, grid.s());

    let reldiff: GridValuesDoc = somtest::export::read_json(&out.join(RELDIFF_FILE)).unwrap();
    reldiff.validate().unwrap();
    assert_eq!(reldiff.values, grid.relative_difference());

    let planes: PlanesDoc = somtest::export::read_json(&out.join(PLANES_FILE)).unwrap();
    assert_eq!(planes.planes.len(), 3);
    assert!(planes.planes.windows(2).all(|w| w[0].score >= w[1].score));

    // export re-emits the same grids from the saved model.
    let out2 = dir.path().join("exported");
    let status = bin()
        .args([
            "export",
            "--model",
            out.join(MODEL_FILE).to_str().unwrap(),
            x.to_str().unwrap(),
            z.to_str().unwrap(),
            "--out",
            out2.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        std::fs::read(out.join(COUNTS_FILE)).unwrap(),
        std::fs::read(out2.join(COUNTS_FILE)).unwrap()
    );
}

#[test]
fn every_method_runs_and_exits_zero_on_rejection_or_not() {
    let dir = tempfile::tempdir().unwrap();
    let (x, z) = sample_csvs(dir.path(), 13, 120);
    for method in ["som", "knn", "c2st-nn", "c2st-knn", "mmd"] {
        let out = dir.path().join(method);
        let output = bin()
            .args([
                "test",
                x.to_str().unwrap(),
                z.to_str().unwrap(),
                "--method",
                method,
                "--seed",
                "4",
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "{method}: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        let doc: ResultDoc = somtest::export::read_json(&out.join(RESULT_FILE)).unwrap();
        assert!(doc.p_value > 0.0 && doc.p_value <= 1.0);
    }
}

#[test]
fn operational_failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let (x, _) = sample_csvs(dir.path(), 3, 50);

    // Missing input file.
    let status = bin()
        .args(["test", "/nonexistent/a.csv", "/nonexistent/b.csv"])
        .status()
        .unwrap();
    assert!(!status.success());

    // Dimension mismatch between datasets.
    let narrow = dir.path().join("narrow.csv");
    std::fs::write(&narrow, "a\n1\n2\n3\n4\n5\n").unwrap();
    let status = bin()
        .args([
            "test",
            x.to_str().unwrap(),
            narrow.to_str().unwrap(),
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(!status.success());

    // Export against a model of the wrong dimension.
    let out = dir.path().join("somout");
    assert!(bin()
        .args([
            "test",
            x.to_str().unwrap(),
            x.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());
    let status = bin()
        .args([
            "export",
            "--model",
            out.join(MODEL_FILE).to_str().unwrap(),
            narrow.to_str().unwrap(),
            narrow.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(!status.success());
}

#[test]
fn power_null_run_calibrates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let output = bin()
        .args([
            "power",
            "--family",
            "gauss_location",
            "--dim",
            "10",
            "--n",
            "500",
            "--reps",
            "200",
            "--alpha",
            "0.1",
            "--seed",
            "1",
            "--null",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(PowerReport::CSV_HEADER));
    let report = PowerReport::from_csv_row(lines.next().unwrap()).unwrap();
    assert_eq!(report.method, Method::SomChi2);
    assert_eq!(report.n_reps, 200);
    assert_eq!(report.sample_size, 500);
    assert_eq!(report.dim, 10);
    assert!(
        (0.045..=0.155).contains(&report.type1_rate),
        "type I rate {} outside the binomial band",
        report.type1_rate
    );
    // The alternative side was drawn under the null too.
    assert!(report.type2_rate >= 0.5);
}
