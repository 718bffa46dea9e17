//! The headline test: train a SOM on two pooled samples, compare their
//! projected densities with a chi-squared statistic, and keep the map.
//!
//! Run with: cargo run --release --example som_chi2_test

use somtest::{
    sample_pair, som_two_sample_test, Family, GeneratorSpec, MapGeometry, TrainSchedule,
};

fn main() {
    let geometry = MapGeometry::new(10, 10).unwrap();
    let schedule = TrainSchedule::for_geometry(&geometry).with_seed(42);

    // Two 5-dimensional Gaussians whose means differ by 0.5 per dimension.
    let mut spec = GeneratorSpec::new(Family::GaussLocation, 5, 42);
    spec.shift = 0.5;
    let (x, z) = sample_pair(&spec, 500, 500, false).unwrap();

    let result = som_two_sample_test(&x, &z, geometry, &schedule).unwrap();
    println!("method:    {}", result.method.name());
    println!("statistic: {:.3}", result.statistic);
    println!("null:      {:?}", result.null);
    println!("p-value:   {:.3e}", result.p_value);
    println!(
        "verdict:   {} at alpha = 0.1",
        if result.p_value <= 0.1 {
            "reject H0 (the samples differ)"
        } else {
            "fail to reject H0"
        }
    );

    // The same pair under the null: both samples from the first population.
    let (x0, z0) = sample_pair(&spec, 500, 500, true).unwrap();
    let null_result = som_two_sample_test(&x0, &z0, geometry, &schedule).unwrap();
    println!();
    println!("same generator for both samples:");
    println!("statistic: {:.3}", null_result.statistic);
    println!("p-value:   {:.3}", null_result.p_value);
}
