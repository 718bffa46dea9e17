//! After a rejection, look at WHERE the samples differ: the per-neuron
//! relative-difference map and the codebook planes that align with it.
//!
//! Run with: cargo run --release --example interpret_differences

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use somtest::{rank_codebook_planes, som_two_sample_test, Dataset, MapGeometry, TrainSchedule};

fn main() {
    // Three features; only feature 1 differs between the populations.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut draw = |shift1: f64, n: usize| -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                let c: f64 = StandardNormal.sample(&mut rng);
                vec![a, b + shift1, c]
            })
            .collect();
        Dataset::from_rows(&rows).unwrap()
    };
    let x = draw(0.0, 600);
    let z = draw(1.2, 600);

    let geometry = MapGeometry::new(8, 8).unwrap();
    let schedule = TrainSchedule::for_geometry(&geometry).with_seed(5);
    let result = som_two_sample_test(&x, &z, geometry, &schedule).unwrap();
    println!("p-value: {:.3e}", result.p_value);

    let grid = result.counts.as_ref().unwrap();
    let model = result.model.as_ref().unwrap();
    let contrast = grid.relative_difference();

    println!();
    println!("relative difference per neuron (- first sample heavy, + second):");
    for gy in 0..geometry.height {
        let mut line = String::new();
        for gx in 0..geometry.width {
            let v = contrast[gy * geometry.width + gx];
            let glyph = match v {
                v if v <= -0.5 => " --",
                v if v < -0.1 => "  -",
                v if v < 0.1 => "  .",
                v if v < 0.5 => "  +",
                _ => " ++",
            };
            line.push_str(glyph);
        }
        println!("{line}");
    }

    println!();
    println!("codebook planes ranked by alignment with that contrast:");
    for (feature, score) in rank_codebook_planes(model, grid).unwrap() {
        println!("  feature {feature}: |correlation| = {score:.3}");
    }
    println!("(feature 1 carries the shift and should rank first)");
}
