//! Run all five tests on the same pair of samples and compare p-values.
//!
//! Run with: cargo run --release --example baseline_comparison

use somtest::{run_test, sample_pair, Family, GeneratorSpec, Method, TestParams};

fn main() {
    // A subtle scale difference: covariances drawn from a Wishart prior.
    let spec = GeneratorSpec {
        family: Family::GaussScale,
        dim: 5,
        shift: 1.0,
        wishart_dof: 6,
        seed: 2024,
    };
    let (x, z) = sample_pair(&spec, 500, 500, false).unwrap();
    let params = TestParams::new(2024);

    println!("{:<16} {:>12} {:>12}  verdict at alpha = 0.1", "method", "statistic", "p-value");
    for method in Method::ALL {
        let result = run_test(method, &x, &z, &params).unwrap();
        println!(
            "{:<16} {:>12.4} {:>12.3e}  {}",
            result.method.name(),
            result.statistic,
            result.p_value,
            if result.p_value <= 0.1 { "reject H0" } else { "keep H0" }
        );
    }
}
