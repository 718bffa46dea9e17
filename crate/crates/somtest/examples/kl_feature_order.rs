//! Order features by their ANOVA F-score between two samples and watch the
//! estimated KL divergence grow as informative dimensions are added.
//!
//! Run with: cargo run --release --example kl_feature_order

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use somtest::{anova_f_scores, kbest_order, kl_knn_estimate, Dataset};

fn main() {
    // Six features with per-feature mean shifts of varying size.
    let shifts = [0.0, 0.8, 0.1, 0.4, 0.0, 1.5];
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut draw = |apply_shift: bool, n: usize| -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                shifts
                    .iter()
                    .map(|&s| {
                        let v: f64 = StandardNormal.sample(&mut rng);
                        if apply_shift {
                            v + s
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        Dataset::from_rows(&rows).unwrap()
    };
    let x = draw(false, 1500);
    let z = draw(true, 1500);

    let scores = anova_f_scores(&x, &z).unwrap();
    let order = kbest_order(&x, &z).unwrap();
    println!("feature shifts: {shifts:?}");
    println!("selection order (by F-score): {order:?}");
    println!();
    println!("{:<22} {:>10} {:>12}", "features used", "F-score", "KL estimate");
    for used in 1..=order.len() {
        let keep = &order[..used];
        let xs = select_columns(&x, keep);
        let zs = select_columns(&z, keep);
        let kl = kl_knn_estimate(&xs, &zs, 1).unwrap();
        println!(
            "{:<22} {:>10.1} {:>12.3}",
            format!("{keep:?}"),
            scores[*keep.last().unwrap()],
            kl
        );
    }
    println!();
    println!("adding weak features stops paying once the informative ones are in.");
}

fn select_columns(data: &Dataset, cols: &[usize]) -> Dataset {
    let rows: Vec<Vec<f64>> = data
        .view()
        .rows()
        .into_iter()
        .map(|r| cols.iter().map(|&c| r[c]).collect())
        .collect();
    Dataset::from_rows(&rows).unwrap()
}
