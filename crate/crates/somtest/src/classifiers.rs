//! From-scratch classifiers backing the classifier two-sample tests:
//! a one-hidden-layer MLP trained with Adam, and a k-nearest-neighbor vote.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const HIDDEN_UNITS: usize = 100;
pub const DEFAULT_MLP_EPOCHS: usize = 200;
pub const MAX_BATCH: usize = 200;

/// d -> 100 -> 2 network with rectified hidden units and a softmax readout.
/// Class index 0 carries the smaller label; ties in the readout go to it.
#[derive(Debug, Clone)]
pub struct MlpModel {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
    classes: [i32; 2],
}

/// Adam accumulators, one slot per parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    step: usize,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    fn new(n_params: usize) -> Self {
        Self {
            step: 0,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

impl MlpModel {
    /// Glorot-uniform initialization of weights and biases.
    pub fn new_random(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = |fan_in: usize, fan_out: usize, len: usize| -> Vec<f64> {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..len).map(|_| rng.gen_range(-bound..=bound)).collect()
        };
        let w1 = Array2::from_shape_vec((dim, HIDDEN_UNITS), init(dim, HIDDEN_UNITS, dim * HIDDEN_UNITS)).unwrap();
        let b1 = Array1::from_vec(init(dim, HIDDEN_UNITS, HIDDEN_UNITS));
        let w2 = Array2::from_shape_vec((HIDDEN_UNITS, 2), init(HIDDEN_UNITS, 2, HIDDEN_UNITS * 2)).unwrap();
        let b2 = Array1::from_vec(init(HIDDEN_UNITS, 2, 2));
        Self {
            w1,
            b1,
            w2,
            b2,
            classes: [-1, 1],
        }
    }

    /// Minimize cross-entropy with mini-batch Adam: batch size min(200, n),
    /// seeded shuffled batches each epoch.
    pub fn fit(train: &Dataset, epochs: usize, seed: u64) -> Result<Self> {
        let labels = train.require_labels()?;
        if train.n() < 2 {
            return Err(Error::InvalidParameter(
                "mlp training requires at least 2 rows".into(),
            ));
        }
        let classes = two_classes(labels)?;
        let mut model = Self::new_random(train.dim(), seed);
        model.classes = classes;

        let y: Vec<usize> = labels
            .iter()
            .map(|&l| if l == classes[0] { 0 } else { 1 })
            .collect();
        let n = train.n();
        let batch_size = MAX_BATCH.min(n);
        let mut adam = AdamState::new(model.param_count());
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let mut order: Vec<usize> = (0..n).collect();

        for _ in 0..epochs {
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            for chunk in order.chunks(batch_size) {
                let xb = select_matrix(train, chunk);
                let yb: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
                let (_, grads) = model.loss_and_grads(&xb, &yb);
                let mut params = model.flat_params();
                adam.update(&mut params, &grads);
                model.set_flat_params(&params)?;
            }
        }
        if model.flat_params().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "mlp training diverged to non-finite parameters".into(),
            ));
        }
        Ok(model)
    }

    /// Fraction of rows whose argmax score matches the label.
    pub fn accuracy(&self, test: &Dataset) -> Result<f64> {
        let labels = test.require_labels()?;
        if test.n() == 0 {
            return Err(Error::EmptyData("test set"));
        }
        if test.dim() != self.w1.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.w1.nrows(),
                got: test.dim(),
            });
        }
        let logits = self.forward(&test.view().to_owned()).1;
        let mut correct = 0usize;
        for (i, &label) in labels.iter().enumerate() {
            // Strict inequality: a tied readout predicts the smaller label.
            let pred = if logits[[i, 1]] > logits[[i, 0]] {
                self.classes[1]
            } else {
                self.classes[0]
            };
            if pred == label {
                correct += 1;
            }
        }
        Ok(correct as f64 / test.n() as f64)
    }

    /// Mean cross-entropy over a labeled dataset.
    pub fn loss(&self, data: &Dataset) -> Result<f64> {
        let labels = data.require_labels()?;
        let y: Vec<usize> = labels
            .iter()
            .map(|&l| if l == self.classes[0] { 0 } else { 1 })
            .collect();
        Ok(self.loss_and_grads(&data.view().to_owned(), &y).0)
    }

    /// Gradient of the mean cross-entropy, flattened in parameter order.
    pub fn loss_gradients(&self, data: &Dataset) -> Result<Vec<f64>> {
        let labels = data.require_labels()?;
        let y: Vec<usize> = labels
            .iter()
            .map(|&l| if l == self.classes[0] { 0 } else { 1 })
            .collect();
        Ok(self.loss_and_grads(&data.view().to_owned(), &y).1)
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameters flattened as w1 (row-major), b1, w2 (row-major), b2.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend(self.w1.iter());
        out.extend(self.b1.iter());
        out.extend(self.w2.iter());
        out.extend(self.b2.iter());
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut it = params.iter();
        for w in self.w1.iter_mut() {
            *w = *it.next().unwrap();
        }
        for b in self.b1.iter_mut() {
            *b = *it.next().unwrap();
        }
        for w in self.w2.iter_mut() {
            *w = *it.next().unwrap();
        }
        for b in self.b2.iter_mut() {
            *b = *it.next().unwrap();
        }
        Ok(())
    }

    /// Hidden activations and output logits for a batch.
    fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let mut hidden = x.dot(&self.w1);
        for mut row in hidden.rows_mut() {
            for (j, h) in row.iter_mut().enumerate() {
                *h = (*h + self.b1[j]).max(0.0);
            }
        }
        let mut logits = hidden.dot(&self.w2);
        for mut row in logits.rows_mut() {
            for (j, l) in row.iter_mut().enumerate() {
                *l += self.b2[j];
            }
        }
        (hidden, logits)
    }

    fn loss_and_grads(&self, x: &Array2<f64>, y: &[usize]) -> (f64, Vec<f64>) {
        let n = x.nrows() as f64;
        let (hidden, logits) = self.forward(x);

        // Stable softmax and mean cross-entropy.
        let mut probs = logits.clone();
        let mut loss = 0.0;
        for (i, mut row) in probs.rows_mut().into_iter().enumerate() {
            let max = row[0].max(row[1]);
            let e0 = (row[0] - max).exp();
            let e1 = (row[1] - max).exp();
            let sum = e0 + e1;
            row[0] = e0 / sum;
            row[1] = e1 / sum;
            loss -= row[y[i]].max(1e-300).ln();
        }
        loss /= n;

        // delta_out = (probs - onehot)/n
        let mut delta_out = probs;
        for (i, mut row) in delta_out.rows_mut().into_iter().enumerate() {
            row[y[i]] -= 1.0;
            row[0] /= n;
            row[1] /= n;
        }

        let grad_w2 = hidden.t().dot(&delta_out);
        let grad_b2 = delta_out.sum_axis(ndarray::Axis(0));

        let mut delta_hidden = delta_out.dot(&self.w2.t());
        for (mut drow, hrow) in delta_hidden
            .rows_mut()
            .into_iter()
            .zip(hidden.rows())
        {
            for (d, &h) in drow.iter_mut().zip(hrow.iter()) {
                if h <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        let grad_w1 = x.t().dot(&delta_hidden);
        let grad_b1 = delta_hidden.sum_axis(ndarray::Axis(0));

        let mut grads = Vec::with_capacity(self.param_count());
        grads.extend(grad_w1.iter());
        grads.extend(grad_b1.iter());
        grads.extend(grad_w2.iter());
        grads.extend(grad_b2.iter());
        (loss, grads)
    }
}

/// Majority vote among the k nearest training rows. Distance ties prefer
/// the lower row index; vote ties prefer the smaller label.
pub fn knn_accuracy(train: &Dataset, test: &Dataset, k: usize) -> Result<f64> {
    let train_labels = train.require_labels()?;
    let test_labels = test.require_labels()?;
    if k == 0 || k > train.n() {
        return Err(Error::InvalidParameter(format!(
            "k must lie in [1, {}], got {k}",
            train.n()
        )));
    }
    if test.n() == 0 {
        return Err(Error::EmptyData("test set"));
    }
    if train.dim() != test.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            got: test.dim(),
        });
    }

    let mut correct = 0usize;
    for (i, row) in test.view().rows().into_iter().enumerate() {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (j, trow) in train.view().rows().into_iter().enumerate() {
            let mut d = 0.0;
            for (a, b) in row.iter().zip(trow.iter()) {
                let diff = a - b;
                d += diff * diff;
            }
            let entry = (d, j);
            let pos = best.partition_point(|e| (e.0, e.1) <= (d, j));
            if pos < k {
                best.insert(pos, entry);
                best.truncate(k);
            }
        }
        let mut votes: Vec<(i32, usize)> = Vec::new();
        for &(_, j) in &best {
            let label = train_labels[j];
            match votes.iter_mut().find(|(l, _)| *l == label) {
                Some((_, c)) => *c += 1,
                None => votes.push((label, 1)),
            }
        }
        votes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        if votes[0].0 == test_labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.n() as f64)
}

fn two_classes(labels: &[i32]) -> Result<[i32; 2]> {
    let mut classes: Vec<i32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    match classes.len() {
        0 | 1 => Err(Error::SingleClass),
        2 => Ok([classes[0], classes[1]]),
        n => Err(Error::InvalidParameter(format!(
            "expected 2 classes, found {n}"
        ))),
    }
}

fn select_matrix(data: &Dataset, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), data.dim()));
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).assign(&data.row(i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand_distr::{Distribution, StandardNormal};

    fn labeled(rows: Vec<Vec<f64>>, labels: Vec<i32>) -> Dataset {
        let dim = rows[0].len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let data = Array2::from_shape_vec((labels.len(), dim), flat).unwrap();
        Dataset::with_labels(data, labels).unwrap()
    }

    fn separable_1d(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
            rows.push(vec![sign * (1.0 + rng.gen_range(0.0..1.0))]);
            labels.push(if sign < 0.0 { -1 } else { 1 });
        }
        labeled(rows, labels)
    }

    #[test]
    fn fit_rejects_single_class() {
        let d = labeled(vec![vec![0.0], vec![1.0]], vec![1, 1]);
        assert!(matches!(
            MlpModel::fit(&d, 10, 0).unwrap_err(),
            Error::SingleClass
        ));
    }

    #[test]
    fn fit_separates_1d_margin() {
        let train = separable_1d(200, 4);
        let model = MlpModel::fit(&train, DEFAULT_MLP_EPOCHS, 4).unwrap();
        assert_eq!(model.accuracy(&train).unwrap(), 1.0);
    }

    #[test]
    fn fit_learns_xor() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..50 {
            for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
                let na: f64 = StandardNormal.sample(&mut rng);
                let nb: f64 = StandardNormal.sample(&mut rng);
                rows.push(vec![a + 0.05 * na, b + 0.05 * nb]);
                labels.push(if (a > 0.5) != (b > 0.5) { 1 } else { -1 });
            }
        }
        let train = labeled(rows, labels);
        let model = MlpModel::fit(&train, DEFAULT_MLP_EPOCHS, 8).unwrap();
        assert!(model.accuracy(&train).unwrap() >= 0.95);
    }

    #[test]
    fn zero_params_predict_smaller_label() {
        let mut model = MlpModel::new_random(1, 0);
        let zeros = vec![0.0; model.param_count()];
        model.set_flat_params(&zeros).unwrap();
        let test = labeled(vec![vec![0.3], vec![-0.5], vec![2.0]], vec![-1, -1, 1]);
        // Every score ties, so every prediction is -1.
        assert!((model.accuracy(&test).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn accuracy_rejects_empty_test() {
        let train = separable_1d(20, 1);
        let model = MlpModel::fit(&train, 20, 1).unwrap();
        let empty =
            Dataset::with_labels(Array2::zeros((0, 1)), vec![]).unwrap();
        assert!(matches!(
            model.accuracy(&empty).unwrap_err(),
            Error::EmptyData(_)
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..3 {
            let dim = 2 + trial;
            let rows: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect();
            let labels: Vec<i32> = (0..5).map(|i| if i % 2 == 0 { -1 } else { 1 }).collect();
            let data = labeled(rows, labels);
            let model = MlpModel::new_random(dim, 100 + trial as u64);
            let analytic = model.loss_gradients(&data).unwrap();

            let params = model.flat_params();
            let step = 1e-5;
            let mut numeric = vec![0.0; params.len()];
            let mut probe = model.clone();
            for i in 0..params.len() {
                let mut p = params.clone();
                p[i] += step;
                probe.set_flat_params(&p).unwrap();
                let up = probe.loss(&data).unwrap();
                p[i] = params[i] - step;
                probe.set_flat_params(&p).unwrap();
                let down = probe.loss(&data).unwrap();
                numeric[i] = (up - down) / (2.0 * step);
            }
            let diff: f64 = analytic
                .iter()
                .zip(&numeric)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(diff / norm.max(1e-12) < 1e-4, "trial {trial}: {}", diff / norm);
        }
    }

    #[test]
    fn training_stays_finite_on_large_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let base = if i % 2 == 0 { -1e3 } else { 1e3 };
                vec![base + rng.gen_range(-10.0..10.0)]
            })
            .collect();
        let labels: Vec<i32> = (0..40).map(|i| if i % 2 == 0 { -1 } else { 1 }).collect();
        let model = MlpModel::fit(&labeled(rows, labels), 50, 23).unwrap();
        assert!(model.flat_params().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn knn_votes_by_hand() {
        let train = labeled(vec![vec![0.0], vec![1.0], vec![2.0]], vec![-1, 1, -1]);
        let test = labeled(vec![vec![0.9]], vec![-1]);
        assert_eq!(knn_accuracy(&train, &test, 3).unwrap(), 1.0);
    }

    #[test]
    fn knn_self_test_is_perfect() {
        let train = separable_1d(30, 9);
        assert_eq!(knn_accuracy(&train, &train, 1).unwrap(), 1.0);
    }

    #[test]
    fn knn_separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..30 {
            rows.push(vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]);
            labels.push(-1);
            rows.push(vec![100.0 + rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]);
            labels.push(1);
        }
        let data = labeled(rows, labels);
        assert_eq!(knn_accuracy(&data, &data, 5).unwrap(), 1.0);
    }

    #[test]
    fn knn_rejects_oversized_k() {
        let train = separable_1d(4, 0);
        assert!(knn_accuracy(&train, &train, 5).is_err());
    }

    #[test]
    fn knn_invariant_to_training_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let rows: Vec<Vec<f64>> = (0..25)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let labels: Vec<i32> = (0..25).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
        let train = labeled(rows.clone(), labels.clone());
        let test = labeled(
            vec![vec![0.1, 0.2], vec![-0.4, 0.9]],
            vec![-1, 1],
        );
        let base = knn_accuracy(&train, &test, 5).unwrap();

        let mut perm: Vec<usize> = (0..25).collect();
        for i in (1..perm.len()).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        let shuffled = train.select_rows(&perm);
        assert_eq!(knn_accuracy(&shuffled, &test, 5).unwrap(), base);
    }
}
