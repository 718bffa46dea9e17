//! Synthetic generators, information measures, and the Monte-Carlo loops
//! used to estimate type I/II error rates.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::som::{fit_som, MapGeometry, TrainSchedule};
use crate::two_sample::{run_test, Method, TestParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    GaussLocation,
    GaussScale,
    GaussFairLocation,
    GaussFairScale,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::GaussLocation => "gauss_location",
            Family::GaussScale => "gauss_scale",
            Family::GaussFairLocation => "gauss_fair_location",
            Family::GaussFairScale => "gauss_fair_scale",
        }
    }
}

/// A pair of multivariate Gaussian populations.
///
/// Location families shift the mean of the second population by `shift`
/// (every dimension, or only the first for the "fair" variant). The scale
/// family draws two covariances from Wishart(I, dof)/dof; the fair scale
/// variant multiplies only the first coordinate's deviation by `shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub dim: usize,
    pub shift: f64,
    pub wishart_dof: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(family: Family, dim: usize, seed: u64) -> Self {
        Self {
            family,
            dim,
            shift: 1.0,
            wishart_dof: dim,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dim must be >= 1".into()));
        }
        if !self.shift.is_finite() {
            return Err(Error::InvalidParameter("shift must be finite".into()));
        }
        if matches!(self.family, Family::GaussScale) && self.wishart_dof < self.dim {
            return Err(Error::InvalidParameter(format!(
                "wishart_dof ({}) must be >= dim ({})",
                self.wishart_dof, self.dim
            )));
        }
        Ok(())
    }
}

/// Draw the two samples. Under the null both come from the first population.
/// Fully determined by `spec.seed`.
pub fn sample_pair(
    spec: &GeneratorSpec,
    n: usize,
    m: usize,
    under_null: bool,
) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    if n == 0 || m == 0 {
        return Err(Error::EmptyData("requested sample"));
    }
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.family {
        Family::GaussLocation | Family::GaussFairLocation => {
            let mut mean = vec![0.0; d];
            if !under_null {
                match spec.family {
                    Family::GaussLocation => mean.iter_mut().for_each(|v| *v = spec.shift),
                    _ => mean[0] = spec.shift,
                }
            }
            let x = gauss_rows(n, d, &vec![0.0; d], None, &mut rng);
            let z = gauss_rows(m, d, &mean, None, &mut rng);
            Ok((Dataset::new(x)?, Dataset::new(z)?))
        }
        Family::GaussScale => {
            // Both factors are always drawn so the covariances depend only
            // on the seed, not on `under_null`.
            let l1 = wishart_factor(d, spec.wishart_dof, &mut rng);
            let l2 = wishart_factor(d, spec.wishart_dof, &mut rng);
            let zero = vec![0.0; d];
            let x = gauss_rows(n, d, &zero, Some(&l1), &mut rng);
            let lz = if under_null { &l1 } else { &l2 };
            let z = gauss_rows(m, d, &zero, Some(lz), &mut rng);
            Ok((Dataset::new(x)?, Dataset::new(z)?))
        }
        Family::GaussFairScale => {
            let zero = vec![0.0; d];
            let x = gauss_rows(n, d, &zero, None, &mut rng);
            let mut z = gauss_rows(m, d, &zero, None, &mut rng);
            if !under_null {
                for mut row in z.rows_mut() {
                    row[0] *= spec.shift;
                }
            }
            Ok((Dataset::new(x)?, Dataset::new(z)?))
        }
    }
}

/// Covariance matrix Wishart(I_dim, dof)/dof, via the Bartlett factor.
/// Symmetric by construction and almost surely positive-definite.
pub fn wishart_covariance(dim: usize, dof: usize, seed: u64) -> Result<Array2<f64>> {
    if dim == 0 || dof < dim {
        return Err(Error::InvalidParameter(format!(
            "wishart requires 1 <= dim <= dof, got dim {dim}, dof {dof}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = wishart_factor(dim, dof, &mut rng);
    let mut cov = Array2::zeros((dim, dim));
    for a in 0..dim {
        for b in 0..=a {
            let mut v = 0.0;
            for k in 0..dim {
                v += l[[a, k]] * l[[b, k]];
            }
            cov[[a, b]] = v;
            cov[[b, a]] = v;
        }
    }
    Ok(cov)
}

/// Lower-triangular L with L L^T ~ Wishart(I, dof)/dof: the Bartlett
/// decomposition scaled by 1/sqrt(dof). Doubles as the sampling factor.
fn wishart_factor<R: Rng>(dim: usize, dof: usize, rng: &mut R) -> Array2<f64> {
    let mut a = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..i {
            a[[i, j]] = StandardNormal.sample(rng);
        }
        let chi = ChiSquared::new((dof - i) as f64).expect("dof - i >= 1");
        a[[i, i]] = chi.sample(rng).sqrt();
    }
    a / (dof as f64).sqrt()
}

fn gauss_rows<R: Rng>(
    n: usize,
    d: usize,
    mean: &[f64],
    factor: Option<&Array2<f64>>,
    rng: &mut R,
) -> Array2<f64> {
    let mut out = Array2::zeros((n, d));
    let mut z = vec![0.0f64; d];
    for mut row in out.rows_mut() {
        for zj in z.iter_mut() {
            *zj = StandardNormal.sample(rng);
        }
        match factor {
            None => {
                for (j, r) in row.iter_mut().enumerate() {
                    *r = mean[j] + z[j];
                }
            }
            Some(l) => {
                for (j, r) in row.iter_mut().enumerate() {
                    let mut v = 0.0;
                    for k in 0..=j {
                        v += l[[j, k]] * z[k];
                    }
                    *r = mean[j] + v;
                }
            }
        }
    }
    out
}

/// Nearest-neighbor estimate of D(P || Q) from samples X ~ P and Z ~ Q:
/// (d/n) * sum log(nu_i / rho_i) + log(m / (n - 1)), with rho the k-th
/// nearest distance within X and nu the k-th nearest distance into Z.
pub fn kl_knn_estimate(x: &Dataset, z: &Dataset, neighbor: usize) -> Result<f64> {
    if x.n() < 2 {
        return Err(Error::InvalidParameter(
            "kl estimate requires at least 2 rows in the first sample".into(),
        ));
    }
    if z.n() == 0 {
        return Err(Error::EmptyData("second sample"));
    }
    if x.dim() != z.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: z.dim(),
        });
    }
    if neighbor == 0 || neighbor > x.n() - 1 || neighbor > z.n() {
        return Err(Error::InvalidParameter(format!(
            "neighbor must lie in [1, min({}, {})], got {neighbor}",
            x.n() - 1,
            z.n()
        )));
    }
    const FLOOR: f64 = 1e-12;
    let n = x.n();
    let d = x.dim() as f64;
    let xv = x.view();
    let zv = z.view();
    let mut rho = Vec::with_capacity(n - 1);
    let mut nu = Vec::with_capacity(z.n());
    let mut sum = 0.0;
    for i in 0..n {
        let row = xv.row(i);
        rho.clear();
        for j in 0..n {
            if j == i {
                continue;
            }
            rho.push(euclid(row, xv.row(j)));
        }
        rho.select_nth_unstable_by(neighbor - 1, f64::total_cmp);
        nu.clear();
        nu.extend((0..z.n()).map(|j| euclid(row, zv.row(j))));
        nu.select_nth_unstable_by(neighbor - 1, f64::total_cmp);
        let rho_k = rho[neighbor - 1].max(FLOOR);
        let nu_k = nu[neighbor - 1].max(FLOOR);
        sum += (nu_k / rho_k).ln();
    }
    Ok(d / n as f64 * sum + ((z.n() as f64) / (n as f64 - 1.0)).ln())
}

fn euclid(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    let mut d = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let diff = x - y;
        d += diff * diff;
    }
    d.sqrt()
}

/// One-way ANOVA F-score of each feature between the two samples.
/// A pooled zero-variance feature scores 0.
pub fn anova_f_scores(x: &Dataset, z: &Dataset) -> Result<Vec<f64>> {
    if x.dim() != z.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: z.dim(),
        });
    }
    if x.n() == 0 || z.n() == 0 {
        return Err(Error::EmptyData("two-sample input"));
    }
    if x.n() + z.n() < 3 {
        return Err(Error::InvalidParameter(
            "f-score needs at least 3 pooled rows".into(),
        ));
    }
    let n = x.n() as f64;
    let m = z.n() as f64;
    let mut scores = Vec::with_capacity(x.dim());
    for j in 0..x.dim() {
        let mean_x = x.view().column(j).sum() / n;
        let mean_z = z.view().column(j).sum() / m;
        let grand = (mean_x * n + mean_z * m) / (n + m);
        let ssb = n * (mean_x - grand).powi(2) + m * (mean_z - grand).powi(2);
        let ssw: f64 = x
            .view()
            .column(j)
            .iter()
            .map(|v| (v - mean_x).powi(2))
            .sum::<f64>()
            + z.view()
                .column(j)
                .iter()
                .map(|v| (v - mean_z).powi(2))
                .sum::<f64>();
        let score = if ssw > 0.0 {
            ssb / (ssw / (n + m - 2.0))
        } else if ssb > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        scores.push(score);
    }
    Ok(scores)
}

/// Feature indices sorted by decreasing F-score, ties toward the lower
/// index. Used to grow dimensionality in sweeps.
pub fn kbest_order(x: &Dataset, z: &Dataset) -> Result<Vec<usize>> {
    let scores = anova_f_scores(x, z)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("f-scores are never NaN")
            .then(a.cmp(&b))
    });
    Ok(order)
}

/// Empirical error rates of one method over repeated synthetic pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub method: Method,
    pub alpha: f64,
    pub n_reps: usize,
    pub sample_size: usize,
    pub dim: usize,
    pub type1_rate: f64,
    pub type2_rate: f64,
    pub mean_runtime: f64,
}

impl PowerReport {
    pub const CSV_HEADER: &'static str =
        "method,alpha,n_reps,sample_size,dim,type1_rate,type2_rate,mean_runtime";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.method.name(),
            self.alpha,
            self.n_reps,
            self.sample_size,
            self.dim,
            self.type1_rate,
            self.type2_rate,
            self.mean_runtime
        )
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let cells: Vec<&str> = row.trim_end().split(',').collect();
        if cells.len() != 8 {
            return Err(Error::MalformedDocument(format!(
                "power report row has {} cells, expected 8",
                cells.len()
            )));
        }
        let method = Method::ALL
            .into_iter()
            .find(|m| m.name() == cells[0])
            .ok_or_else(|| Error::MalformedDocument(format!("unknown method {:?}", cells[0])))?;
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::MalformedDocument(format!("bad number {s:?}")))
        };
        Ok(Self {
            method,
            alpha: parse(cells[1])?,
            n_reps: parse(cells[2])? as usize,
            sample_size: parse(cells[3])? as usize,
            dim: parse(cells[4])? as usize,
            type1_rate: parse(cells[5])?,
            type2_rate: parse(cells[6])?,
            mean_runtime: parse(cells[7])?,
        })
    }
}

/// Run `n_reps` null pairs and `n_reps` alternative pairs with per-rep
/// derived seeds. With `null_alternative` the "alternative" pairs are drawn
/// under the null too (a calibration run). Repetitions run in parallel;
/// results do not depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn power_run(
    method: Method,
    spec: &GeneratorSpec,
    n: usize,
    m: usize,
    alpha: f64,
    n_reps: usize,
    seed: u64,
    params: &TestParams,
    null_alternative: bool,
) -> Result<PowerReport> {
    if n_reps == 0 {
        return Err(Error::InvalidParameter("n_reps must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }

    let run_one = |rep_seed: u64, under_null: bool| -> Result<(bool, f64)> {
        let rep_spec = spec.with_seed(rep_seed);
        let (x, z) = sample_pair(&rep_spec, n, m, under_null)?;
        let start = Instant::now();
        let result = run_test(method, &x, &z, &params.reseed(rep_seed))?;
        Ok((result.p_value <= alpha, start.elapsed().as_secs_f64()))
    };
    let collect = |under_null: bool, offset: u64| -> Result<Vec<(bool, f64)>> {
        let outcomes: Vec<Result<(bool, f64)>> = (0..n_reps)
            .into_par_iter()
            .map(|i| {
                let rep_seed = seed.wrapping_add(offset).wrapping_add(i as u64);
                run_one(rep_seed, under_null).map_err(|e| Error::FailedRepetition {
                    seed: rep_seed,
                    source: Box::new(e),
                })
            })
            .collect();
        outcomes.into_iter().collect()
    };

    let nulls = collect(true, 0)?;
    let alts = collect(null_alternative, n_reps as u64)?;

    let rejected_null = nulls.iter().filter(|(r, _)| *r).count();
    let rejected_alt = alts.iter().filter(|(r, _)| *r).count();
    let total_time: f64 = nulls.iter().chain(&alts).map(|(_, t)| t).sum();

    Ok(PowerReport {
        method,
        alpha,
        n_reps,
        sample_size: n,
        dim: spec.dim,
        type1_rate: rejected_null as f64 / n_reps as f64,
        type2_rate: (n_reps - rejected_alt) as f64 / n_reps as f64,
        mean_runtime: total_time / (2 * n_reps) as f64,
    })
}

/// k-fold cross-validated accuracy of the majority-rule SOM classifier:
/// each neuron takes the majority label of the training rows it captures;
/// held-out rows landing on unlabeled (empty) neurons count as errors.
pub fn som_classifier_cv(
    data: &Dataset,
    geometry: MapGeometry,
    schedule: &TrainSchedule,
    folds: usize,
) -> Result<f64> {
    let labels = data.require_labels()?;
    if folds < 2 {
        return Err(Error::InvalidParameter("folds must be >= 2".into()));
    }
    if folds > data.n() {
        return Err(Error::InvalidParameter(format!(
            "fold count {folds} exceeds data size {}",
            data.n()
        )));
    }
    let mut class_counts: Vec<(i32, usize)> = Vec::new();
    for &l in labels {
        match class_counts.iter_mut().find(|(c, _)| *c == l) {
            Some((_, n)) => *n += 1,
            None => class_counts.push((l, 1)),
        }
    }
    if let Some((c, n)) = class_counts.iter().find(|(_, n)| *n < folds) {
        return Err(Error::InvalidParameter(format!(
            "class {c} has {n} rows, fewer than {folds} folds"
        )));
    }

    let mut order: Vec<usize> = (0..data.n()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }

    let mut total_acc = 0.0;
    for fold in 0..folds {
        let test_idx: Vec<usize> = order
            .iter()
            .copied()
            .skip(fold)
            .step_by(folds)
            .collect();
        let train_idx: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(i, _)| i % folds != fold)
            .map(|(_, &r)| r)
            .collect();
        let train = data.select_rows(&train_idx);
        let test = data.select_rows(&test_idx);

        let fold_schedule = TrainSchedule {
            seed: schedule.seed.wrapping_add(fold as u64 + 1),
            ..schedule.clone()
        };
        let model = fit_som(&train, geometry, &fold_schedule)?;

        // Majority label per neuron; ties go to the smaller label.
        let mut votes: Vec<Vec<(i32, usize)>> =
            vec![Vec::new(); geometry.neuron_count()];
        let train_labels = train.labels().unwrap();
        for (i, row) in train.view().rows().into_iter().enumerate() {
            let b = model.bmu(row.as_slice().unwrap())?;
            match votes[b].iter_mut().find(|(l, _)| *l == train_labels[i]) {
                Some((_, c)) => *c += 1,
                None => votes[b].push((train_labels[i], 1)),
            }
        }
        let neuron_labels: Vec<Option<i32>> = votes
            .into_iter()
            .map(|mut v| {
                v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
                v.first().map(|(l, _)| *l)
            })
            .collect();

        let test_labels = test.labels().unwrap();
        let mut correct = 0usize;
        for (i, row) in test.view().rows().into_iter().enumerate() {
            let b = model.bmu(row.as_slice().unwrap())?;
            if neuron_labels[b] == Some(test_labels[i]) {
                correct += 1;
            }
        }
        total_acc += correct as f64 / test.n() as f64;
    }
    Ok(total_acc / folds as f64)
}
