//! Two-sample tests: the SOM chi-squared test plus the ML baselines
//! (nearest-neighbor coincidences, classifier tests, block-averaged MMD).
//!
//! Every test consumes two datasets and produces a [`TestResult`] holding the
//! statistic, its null distribution, and the p-value. The SOM test also
//! returns the trained map and the per-neuron counts, which is the point:
//! rejecting the null leaves the caller with something to look at.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{knn_accuracy, MlpModel, DEFAULT_MLP_EPOCHS};
use crate::counts::CountGrid;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::som::{fit_som, MapGeometry, SomModel, TrainSchedule};
use crate::stats::{chi2_sf, normal_sf, permutation_pvalue, NullDescriptor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SomChi2,
    KnnCoincidence,
    C2stNn,
    C2stKnn,
    MmdB,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::SomChi2,
        Method::KnnCoincidence,
        Method::C2stNn,
        Method::C2stKnn,
        Method::MmdB,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::SomChi2 => "som_chi2",
            Method::KnnCoincidence => "knn_coincidence",
            Method::C2stNn => "c2st_nn",
            Method::C2stKnn => "c2st_knn",
            Method::MmdB => "mmd_b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classifier {
    Nn,
    Knn,
}

/// Outcome of a two-sample test. `model` and `counts` are attached only by
/// the SOM test.
#[derive(Debug, Clone)]
pub struct TestResult {
    pub method: Method,
    pub statistic: f64,
    pub null: NullDescriptor,
    pub p_value: f64,
    pub model: Option<SomModel>,
    pub counts: Option<CountGrid>,
}

/// Everything the dispatcher needs to run any of the five tests.
#[derive(Debug, Clone)]
pub struct TestParams {
    pub geometry: MapGeometry,
    pub schedule: TrainSchedule,
    /// Neighbors for the coincidence statistic.
    pub coincidence_k: usize,
    pub n_permutations: usize,
    pub test_fraction: f64,
    pub mlp_epochs: usize,
    pub c2st_knn_k: usize,
    /// MMD block size; `None` picks floor(sqrt(n)).
    pub block_size: Option<usize>,
    pub bandwidth: Option<f64>,
    pub seed: u64,
}

impl TestParams {
    pub fn new(seed: u64) -> Self {
        let geometry = MapGeometry::new(10, 10).expect("static geometry");
        let schedule = TrainSchedule::for_geometry(&geometry).with_seed(seed);
        Self {
            geometry,
            schedule,
            coincidence_k: 5,
            n_permutations: 199,
            test_fraction: 0.5,
            mlp_epochs: DEFAULT_MLP_EPOCHS,
            c2st_knn_k: 5,
            block_size: None,
            bandwidth: None,
            seed,
        }
    }

    pub fn reseed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.seed = seed;
        out.schedule.seed = seed;
        out
    }
}

/// Run `method` on the pair with the given parameters.
pub fn run_test(method: Method, x: &Dataset, z: &Dataset, params: &TestParams) -> Result<TestResult> {
    match method {
        Method::SomChi2 => som_two_sample_test(x, z, params.geometry, &params.schedule),
        Method::KnnCoincidence => knn_coincidence_test(
            x,
            z,
            params.coincidence_k,
            params.n_permutations,
            params.seed,
        ),
        Method::C2stNn => c2st_test(x, z, Classifier::Nn, params.test_fraction, params.seed),
        Method::C2stKnn => c2st_test(x, z, Classifier::Knn, params.test_fraction, params.seed),
        Method::MmdB => {
            let n = x.n();
            let block = params.block_size.unwrap_or_else(|| {
                ((n as f64).sqrt().floor() as usize).max(2)
            });
            mmd_block_test(x, z, block, params.bandwidth, params.seed)
        }
    }
}

/// Chi-squared statistic over occupied cells, with constants
/// K1 = sqrt(n_z/n_x) and K2 = sqrt(n_x/n_z) adjusting for sample sizes.
/// Degrees of freedom are k - c: k occupied cells, c = 1 iff n_x = n_z.
pub fn chi2_from_counts(grid: &CountGrid) -> Result<(f64, usize)> {
    if grid.n_x() == 0 || grid.n_z() == 0 {
        return Err(Error::EmptyData("sample projected onto the grid"));
    }
    let n_x = grid.n_x() as f64;
    let n_z = grid.n_z() as f64;
    let k1 = (n_z / n_x).sqrt();
    let k2 = (n_x / n_z).sqrt();
    let mut statistic = 0.0;
    let mut occupied = 0usize;
    for (&r, &s) in grid.r().iter().zip(grid.s()) {
        let total = r + s;
        if total == 0 {
            continue;
        }
        occupied += 1;
        let diff = k1 * r as f64 - k2 * s as f64;
        statistic += diff * diff / total as f64;
    }
    let c = usize::from(grid.n_x() == grid.n_z());
    if occupied <= c {
        return Err(Error::DegenerateDof { occupied });
    }
    Ok((statistic, occupied - c))
}

/// Train a map on the pooled samples, project each sample, and compare the
/// per-neuron counts with the chi-squared statistic.
pub fn som_two_sample_test(
    x: &Dataset,
    z: &Dataset,
    geometry: MapGeometry,
    schedule: &TrainSchedule,
) -> Result<TestResult> {
    if x.n() == 0 || z.n() == 0 {
        return Err(Error::EmptyData("two-sample input"));
    }
    let pooled = x.pooled(z)?;
    let model = fit_som(&pooled, geometry, schedule)?;
    let counts = model.project_counts(x, z)?;
    let (statistic, dof) = chi2_from_counts(&counts)?;
    let p_value = chi2_sf(statistic, dof)?;
    Ok(TestResult {
        method: Method::SomChi2,
        statistic,
        null: NullDescriptor::ChiSquared { dof },
        p_value,
        model: Some(model),
        counts: Some(counts),
    })
}

/// Schilling-Henze coincidence test: pool both samples, count same-label
/// pairs among each point's k nearest neighbors, and compare against label
/// permutations. When all distinct label assignments number at most
/// `n_permutations` the null is enumerated exactly.
pub fn knn_coincidence_test(
    x: &Dataset,
    z: &Dataset,
    k: usize,
    n_permutations: usize,
    seed: u64,
) -> Result<TestResult> {
    if x.n() == 0 || z.n() == 0 {
        return Err(Error::EmptyData("two-sample input"));
    }
    if n_permutations == 0 {
        return Err(Error::InvalidParameter(
            "need at least one permutation".into(),
        ));
    }
    let n = x.n() + z.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k must lie in [1, {}), got {k}",
            n
        )));
    }
    let pooled = x.pooled(z)?;
    let neighbors = neighbor_lists(&pooled, k);
    let mut labels: Vec<i8> = vec![1; x.n()];
    labels.resize(x.n() + z.n(), -1);
    let observed = coincidence_statistic(&neighbors, &labels);

    let (p_value, reference) = match assignments_up_to(n, x.n(), n_permutations as u128) {
        Some(total) => {
            // Exact null over all C(n, n_x) label assignments.
            let mut reference = Vec::with_capacity(total as usize);
            let mut at_least = 0usize;
            let mut perm_labels = vec![-1i8; n];
            for combo in (0..n).combinations(x.n()) {
                for l in perm_labels.iter_mut() {
                    *l = -1;
                }
                for &i in &combo {
                    perm_labels[i] = 1;
                }
                let t = coincidence_statistic(&neighbors, &perm_labels);
                if t >= observed {
                    at_least += 1;
                }
                reference.push(t as f64);
            }
            (at_least as f64 / total as f64, reference)
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = labels.clone();
            let mut reference = Vec::with_capacity(n_permutations);
            for _ in 0..n_permutations {
                for i in (1..shuffled.len()).rev() {
                    let j = rng.gen_range(0..=i);
                    shuffled.swap(i, j);
                }
                reference.push(coincidence_statistic(&neighbors, &shuffled) as f64);
            }
            (permutation_pvalue(observed as f64, &reference)?, reference)
        }
    };

    Ok(TestResult {
        method: Method::KnnCoincidence,
        statistic: observed as f64,
        null: NullDescriptor::Permutation {
            reference_stats: reference,
        },
        p_value,
        model: None,
        counts: None,
    })
}

/// k nearest neighbors of every pooled row (Euclidean, self excluded,
/// distance ties resolved toward the lower index).
fn neighbor_lists(pooled: &Dataset, k: usize) -> Vec<Vec<usize>> {
    let n = pooled.n();
    let view = pooled.view();
    let mut lists = Vec::with_capacity(n);
    for i in 0..n {
        let row_i = view.row(i);
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for j in 0..n {
            if j == i {
                continue;
            }
            let mut d = 0.0;
            for (a, b) in row_i.iter().zip(view.row(j).iter()) {
                let diff = a - b;
                d += diff * diff;
            }
            if best.len() == k && (d, j) >= (best[k - 1].0, best[k - 1].1) {
                continue;
            }
            let pos = best.partition_point(|e| (e.0, e.1) <= (d, j));
            best.insert(pos, (d, j));
            best.truncate(k);
        }
        lists.push(best.into_iter().map(|(_, j)| j).collect());
    }
    lists
}

fn coincidence_statistic(neighbors: &[Vec<usize>], labels: &[i8]) -> usize {
    let mut t = 0usize;
    for (i, nb) in neighbors.iter().enumerate() {
        for &j in nb {
            if labels[i] == labels[j] {
                t += 1;
            }
        }
    }
    t
}

/// C(n, k) if it is at most `cap`, else None.
fn assignments_up_to(n: usize, k: usize, cap: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k {
        c = c.checked_mul((n - k + i) as u128)? / i as u128;
        if c > cap {
            return None;
        }
    }
    Some(c)
}

/// Classifier two-sample test: stratified split, train on one part, and use
/// held-out accuracy as the statistic with its asymptotic normal null.
pub fn c2st_test(
    x: &Dataset,
    z: &Dataset,
    classifier: Classifier,
    test_fraction: f64,
    seed: u64,
) -> Result<TestResult> {
    if x.n() < 4 || z.n() < 4 {
        return Err(Error::InvalidParameter(
            "too few samples to split (need at least 4 rows per sample)".into(),
        ));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let pooled = x.pooled(z)?;
    let mut labels: Vec<i32> = vec![1; x.n()];
    labels.resize(x.n() + z.n(), -1);
    let pooled = Dataset::with_labels(pooled.view().to_owned(), labels)?;

    let (train_idx, test_idx) = stratified_split(pooled.labels().unwrap(), test_fraction, seed);
    let train = pooled.select_rows(&train_idx);
    let test = pooled.select_rows(&test_idx);

    let accuracy = match classifier {
        Classifier::Nn => {
            let model = MlpModel::fit(&train, DEFAULT_MLP_EPOCHS, seed.wrapping_add(1))?;
            model.accuracy(&test)?
        }
        Classifier::Knn => knn_accuracy(&train, &test, 5)?,
    };

    let n_test = test.n() as f64;
    let variance = 1.0 / (4.0 * n_test);
    let z_score = (accuracy - 0.5) / variance.sqrt();
    let p_value = normal_sf(z_score)?;
    Ok(TestResult {
        method: match classifier {
            Classifier::Nn => Method::C2stNn,
            Classifier::Knn => Method::C2stKnn,
        },
        statistic: accuracy,
        null: NullDescriptor::Normal {
            mean: 0.5,
            variance,
        },
        p_value,
        model: None,
        counts: None,
    })
}

/// Seeded stratified shuffle split: each class contributes round(frac * n_c)
/// test rows, clamped so both sides keep at least one row per class.
fn stratified_split(labels: &[i32], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut classes: Vec<i32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in classes {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        for i in (1..idx.len()).rev() {
            let j = rng.gen_range(0..=i);
            idx.swap(i, j);
        }
        let n_test = ((test_fraction * idx.len() as f64).round() as usize)
            .clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    (train, test)
}

/// Block-averaged MMD test with a Gaussian kernel. Requires balanced
/// samples; the bandwidth defaults to the median pairwise distance over a
/// pooled subsample of at most 1000 points.
pub fn mmd_block_test(
    x: &Dataset,
    z: &Dataset,
    block_size: usize,
    bandwidth: Option<f64>,
    seed: u64,
) -> Result<TestResult> {
    if x.n() != z.n() {
        return Err(Error::UnbalancedSamples {
            n_x: x.n(),
            n_z: z.n(),
        });
    }
    if x.n() == 0 {
        return Err(Error::EmptyData("two-sample input"));
    }
    if x.dim() != z.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: z.dim(),
        });
    }
    if block_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "block size must be >= 2, got {block_size}"
        )));
    }
    let n = x.n();
    let n_blocks = n / block_size;
    if n_blocks < 2 {
        return Err(Error::TooFewBlocks { blocks: n_blocks });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = match bandwidth {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive and finite, got {s}"
            )))
        }
        None => median_heuristic(x, z, &mut rng),
    };

    let mut x_order: Vec<usize> = (0..n).collect();
    let mut z_order: Vec<usize> = (0..n).collect();
    for order in [&mut x_order, &mut z_order] {
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
    }

    let xv = x.view();
    let zv = z.view();
    let mut estimates = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let range = b * block_size..(b + 1) * block_size;
        let xi: Vec<usize> = range.clone().map(|i| x_order[i]).collect();
        let zi: Vec<usize> = range.map(|i| z_order[i]).collect();
        let mut sum = 0.0;
        for a in 0..block_size {
            for c in 0..block_size {
                if a == c {
                    continue;
                }
                sum += gauss_kernel(xv.row(xi[a]), xv.row(xi[c]), sigma)
                    + gauss_kernel(zv.row(zi[a]), zv.row(zi[c]), sigma)
                    - gauss_kernel(xv.row(xi[a]), zv.row(zi[c]), sigma)
                    - gauss_kernel(xv.row(xi[c]), zv.row(zi[a]), sigma);
            }
        }
        estimates.push(sum / (block_size * (block_size - 1)) as f64);
    }

    let mean = estimates.iter().sum::<f64>() / n_blocks as f64;
    let var = estimates
        .iter()
        .map(|e| (e - mean) * (e - mean))
        .sum::<f64>()
        / (n_blocks - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let statistic = (n_blocks as f64).sqrt() * mean / sd;
    let p_value = normal_sf(statistic)?;
    Ok(TestResult {
        method: Method::MmdB,
        statistic,
        null: NullDescriptor::Normal {
            mean: 0.0,
            variance: 1.0,
        },
        p_value,
        model: None,
        counts: None,
    })
}

fn gauss_kernel(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>, sigma: f64) -> f64 {
    let mut d = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let diff = x - y;
        d += diff * diff;
    }
    (-d / (2.0 * sigma * sigma)).exp()
}

/// Median pairwise Euclidean distance over a pooled subsample of <= 1000
/// points, falling back to 1 when the median degenerates to zero.
fn median_heuristic<R: Rng>(x: &Dataset, z: &Dataset, rng: &mut R) -> f64 {
    let pooled = x.pooled(z).expect("dims checked by caller");
    let n = pooled.n();
    let cap = 1000usize;
    let idx: Vec<usize> = if n <= cap {
        (0..n).collect()
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        for i in (1..all.len()).rev() {
            let j = rng.gen_range(0..=i);
            all.swap(i, j);
        }
        all.truncate(cap);
        all
    };
    let view = pooled.view();
    let mut dists = Vec::with_capacity(idx.len() * (idx.len() - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let mut d = 0.0;
            for (p, q) in view.row(i).iter().zip(view.row(j).iter()) {
                let diff = p - q;
                d += diff * diff;
            }
            dists.push(d.sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}
