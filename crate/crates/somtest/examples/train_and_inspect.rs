//! Train a map on a noisy ring, check that grid neighbors stay close in
//! feature space, and round-trip the model document.
//!
//! Run with: cargo run --release --example train_and_inspect

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use somtest::{fit_som, Dataset, MapGeometry, SomModel, TrainSchedule};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rows: Vec<Vec<f64>> = (0..1500)
        .map(|_| {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let radius = 1.0 + rng.gen_range(-0.1..0.1);
            vec![radius * angle.cos(), radius * angle.sin()]
        })
        .collect();
    let data = Dataset::from_rows(&rows).unwrap();

    let geometry = MapGeometry::new(8, 8).unwrap();
    let schedule = TrainSchedule {
        epochs: 20,
        ..TrainSchedule::for_geometry(&geometry).with_seed(7)
    };
    let model = fit_som(&data, geometry, &schedule).unwrap();

    let codebook = model.codebook();
    let dist = |a: usize, b: usize| -> f64 {
        codebook
            .row(a)
            .iter()
            .zip(codebook.row(b).iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut adjacent = Vec::new();
    let mut distant = Vec::new();
    for a in 0..geometry.neuron_count() {
        for b in (a + 1)..geometry.neuron_count() {
            let g = geometry.grid_distance_sq(a, b);
            if g == 1.0 {
                adjacent.push(dist(a, b));
            } else if g >= 16.0 {
                distant.push(dist(a, b));
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("trained {}x{} map on a ring of {} points", geometry.width, geometry.height, data.n());
    println!("mean codebook distance, grid-adjacent neurons: {:.4}", mean(&adjacent));
    println!("mean codebook distance, far-apart neurons:     {:.4}", mean(&distant));

    let json = model.to_json_string();
    let restored = SomModel::from_json_str(&json).unwrap();
    let probe = [0.7, -0.7];
    println!(
        "document round-trip: {} bytes, bmu({probe:?}) = {} both before and after",
        json.len(),
        restored.bmu(&probe).unwrap()
    );
    assert_eq!(model.bmu(&probe).unwrap(), restored.bmu(&probe).unwrap());
}
