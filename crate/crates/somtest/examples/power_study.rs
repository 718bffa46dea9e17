//! Estimate type I/II error rates over repeated synthetic pairs, the way
//! the calibration and power figures are produced.
//!
//! Run with: cargo run --release --example power_study

use somtest::{power_run, Family, GeneratorSpec, Method, PowerReport, TestParams};

fn main() {
    let n = 250;
    let reps = 50;
    println!("{}", PowerReport::CSV_HEADER);
    for dim in [1, 5, 10] {
        let mut spec = GeneratorSpec::new(Family::GaussFairLocation, dim, 0);
        spec.shift = 1.0; // information fixed: only the first mean differs
        for method in [Method::SomChi2, Method::KnnCoincidence, Method::MmdB] {
            let params = TestParams::new(0);
            let report = power_run(method, &spec, n, n, 0.1, reps, 10_000, &params, false)
                .unwrap();
            println!("{}", report.to_csv_row());
        }
    }
    println!();
    println!("type1_rate should hover near alpha; 1 - type2_rate is the power.");
}
