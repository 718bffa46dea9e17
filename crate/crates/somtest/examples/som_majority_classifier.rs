//! Reuse a SOM as a classifier: label each neuron by the majority of the
//! training rows it captures, then classify held-out rows by their BMU.
//!
//! Run with: cargo run --release --example som_majority_classifier

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use somtest::{som_classifier_cv, Dataset, MapGeometry, TrainSchedule};

fn main() {
    // Two unit-variance Gaussians two apart: Bayes accuracy is about 0.841.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..1000 {
        let v: f64 = StandardNormal.sample(&mut rng);
        values.push(v);
        labels.push(-1);
        let v: f64 = StandardNormal.sample(&mut rng);
        values.push(2.0 + v);
        labels.push(1);
    }
    let data = Dataset::with_labels(
        Array2::from_shape_vec((2000, 1), values).unwrap(),
        labels,
    )
    .unwrap();

    let geometry = MapGeometry::new(10, 10).unwrap();
    let schedule = TrainSchedule::for_geometry(&geometry).with_seed(12);
    let accuracy = som_classifier_cv(&data, geometry, &schedule, 50).unwrap();
    println!("50-fold cross-validated majority-rule accuracy: {accuracy:.4}");
    println!("Bayes accuracy for this mixture:                0.8413");
}
