//! Self-organizing maps: seeded training, best-matching-unit queries, and a
//! versioned model document.
//!
//! Maps are planar rectangular grids. Neuron `i` sits at grid position
//! `(i % width, i / width)`. Features are z-score standardized with pooled
//! statistics captured at initialization; the codebook lives in that
//! standardized space and queries are standardized on the way in.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::counts::CountGrid;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Planar, non-wrapping rectangular grid of neurons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapGeometry {
    pub width: usize,
    pub height: usize,
}

impl MapGeometry {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(
                "map geometry requires width >= 1 and height >= 1".into(),
            ));
        }
        Ok(Self { width, height })
    }

    pub fn neuron_count(&self) -> usize {
        self.width * self.height
    }

    /// Grid position of neuron `i`, row-major.
    pub fn position(&self, i: usize) -> (usize, usize) {
        (i % self.width, i / self.width)
    }

    /// Squared Euclidean distance between two neuron positions on the grid.
    pub fn grid_distance_sq(&self, a: usize, b: usize) -> f64 {
        let (ax, ay) = self.position(a);
        let (bx, by) = self.position(b);
        let dx = ax as f64 - bx as f64;
        let dy = ay as f64 - by as f64;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    Random,
    Pca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Online,
    Batch,
}

/// Training parameters. The neighborhood radius decays linearly from
/// `delta0` to `delta_final` over the epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub mode: TrainMode,
    pub alpha0: f64,
    pub delta0: f64,
    pub delta_final: f64,
    pub init: InitMethod,
    pub seed: u64,
}

impl TrainSchedule {
    /// Defaults: 10 batch epochs, alpha 0.1, radius max(w, h)/2 -> 1.
    pub fn for_geometry(geometry: &MapGeometry) -> Self {
        let delta0 = (geometry.width.max(geometry.height) as f64 / 2.0).max(1.0);
        Self {
            epochs: 10,
            mode: TrainMode::Batch,
            alpha0: 0.1,
            delta0,
            delta_final: 1.0,
            init: InitMethod::Random,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be >= 1".into()));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha0 must lie in (0, 1], got {}",
                self.alpha0
            )));
        }
        if !self.delta0.is_finite()
            || !self.delta_final.is_finite()
            || self.delta0 <= 0.0
            || self.delta_final <= 0.0
        {
            return Err(Error::InvalidParameter(
                "neighborhood radii must be positive and finite".into(),
            ));
        }
        if self.delta_final > self.delta0 {
            return Err(Error::InvalidParameter(format!(
                "delta_final ({}) must not exceed delta0 ({})",
                self.delta_final, self.delta0
            )));
        }
        Ok(())
    }

    fn delta_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            self.delta0
        } else {
            let frac = epoch as f64 / (self.epochs - 1) as f64;
            self.delta0 + (self.delta_final - self.delta0) * frac
        }
    }
}

/// A trained map: geometry plus the codebook and the standardization
/// captured from the training data.
#[derive(Debug, Clone, PartialEq)]
pub struct SomModel {
    geometry: MapGeometry,
    dim: usize,
    codebook: Array2<f64>,
    feature_means: Array1<f64>,
    feature_scales: Array1<f64>,
}

impl SomModel {
    /// Assemble a model from raw parts, validating shapes and values.
    pub fn from_parts(
        geometry: MapGeometry,
        codebook: Array2<f64>,
        feature_means: Vec<f64>,
        feature_scales: Vec<f64>,
    ) -> Result<Self> {
        let dim = codebook.ncols();
        if dim == 0 {
            return Err(Error::EmptyData("zero-dimensional codebook"));
        }
        if codebook.nrows() != geometry.neuron_count() {
            return Err(Error::ShapeMismatch(format!(
                "codebook has {} rows, geometry requires {}",
                codebook.nrows(),
                geometry.neuron_count()
            )));
        }
        if feature_means.len() != dim || feature_scales.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "feature statistics have lengths {}/{}, expected {}",
                feature_means.len(),
                feature_scales.len(),
                dim
            )));
        }
        if codebook.iter().any(|v| !v.is_finite())
            || feature_means.iter().any(|v| !v.is_finite())
        {
            return Err(Error::MalformedDocument(
                "codebook or feature means contain non-finite values".into(),
            ));
        }
        if feature_scales.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::MalformedDocument(
                "feature scales must be strictly positive".into(),
            ));
        }
        Ok(Self {
            geometry,
            dim,
            codebook,
            feature_means: Array1::from_vec(feature_means),
            feature_scales: Array1::from_vec(feature_scales),
        })
    }

    /// Initialize a map from data. Random init draws each codebook entry
    /// uniformly from the standardized per-feature range; PCA init spreads
    /// the grid over +-2 standard deviations along the first two principal
    /// components.
    pub fn init(
        geometry: MapGeometry,
        data: &Dataset,
        init: InitMethod,
        seed: u64,
    ) -> Result<Self> {
        if data.n() == 0 {
            return Err(Error::EmptyData("initialization data"));
        }
        if data.n() < 2 {
            return Err(Error::InvalidParameter(
                "initialization requires at least 2 rows".into(),
            ));
        }
        let dim = data.dim();
        let (means, scales) = feature_stats(data.view());
        let std_data = standardize(data.view(), &means, &scales);

        let n_neurons = geometry.neuron_count();
        let codebook = match init {
            InitMethod::Random => {
                let mut lo = vec![f64::INFINITY; dim];
                let mut hi = vec![f64::NEG_INFINITY; dim];
                for row in std_data.rows() {
                    for (j, &v) in row.iter().enumerate() {
                        lo[j] = lo[j].min(v);
                        hi[j] = hi[j].max(v);
                    }
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut codebook = Array2::zeros((n_neurons, dim));
                for i in 0..n_neurons {
                    for j in 0..dim {
                        codebook[[i, j]] = rng.gen_range(lo[j]..=hi[j]);
                    }
                }
                codebook
            }
            InitMethod::Pca => pca_codebook(&geometry, &std_data, seed)?,
        };

        Self::from_parts(geometry, codebook, means, scales)
    }

    pub fn geometry(&self) -> &MapGeometry {
        &self.geometry
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Codebook in standardized feature space, one row per neuron.
    pub fn codebook(&self) -> ArrayView2<'_, f64> {
        self.codebook.view()
    }

    /// Codebook mapped back to the original feature units.
    pub fn codebook_denormalized(&self) -> Array2<f64> {
        let mut out = self.codebook.clone();
        for mut row in out.rows_mut() {
            for j in 0..self.dim {
                row[j] = row[j] * self.feature_scales[j] + self.feature_means[j];
            }
        }
        out
    }

    pub fn feature_means(&self) -> &[f64] {
        self.feature_means.as_slice().expect("contiguous")
    }

    pub fn feature_scales(&self) -> &[f64] {
        self.feature_scales.as_slice().expect("contiguous")
    }

    /// Index of the neuron whose weight vector is closest to `x`
    /// (Euclidean, in standardized space). Ties go to the lowest index.
    pub fn bmu(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if let Some(col) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col });
        }
        let std_x: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(j, &v)| (v - self.feature_means[j]) / self.feature_scales[j])
            .collect();
        Ok(self.bmu_standardized(&std_x))
    }

    fn bmu_standardized(&self, std_x: &[f64]) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, row) in self.codebook.rows().into_iter().enumerate() {
            let mut d = 0.0;
            for (w, &v) in row.iter().zip(std_x) {
                let diff = w - v;
                d += diff * diff;
            }
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Train in place. Online mode visits rows in a seed-shuffled order and
    /// pulls every neuron toward each input; batch mode replaces each weight
    /// by the neighborhood-weighted mean of the inputs per epoch.
    pub fn train(&mut self, data: &Dataset, schedule: &TrainSchedule) -> Result<()> {
        schedule.validate()?;
        if data.n() == 0 {
            return Err(Error::EmptyData("training data"));
        }
        if data.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: data.dim(),
            });
        }
        let std_data = standardize_with(
            data.view(),
            self.feature_means.as_slice().unwrap(),
            self.feature_scales.as_slice().unwrap(),
        );
        match schedule.mode {
            TrainMode::Online => self.train_online(&std_data, schedule),
            TrainMode::Batch => self.train_batch(&std_data, schedule),
        }
        Ok(())
    }

    fn train_online(&mut self, std_data: &Array2<f64>, schedule: &TrainSchedule) {
        let n = std_data.nrows();
        let n_neurons = self.geometry.neuron_count();
        let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..schedule.epochs {
            let h = self.neighborhood_matrix(schedule.delta_at(epoch));
            shuffle(&mut order, &mut rng);
            for &r in &order {
                let x = std_data.row(r);
                let x = x.as_slice().expect("contiguous row");
                let b = self.bmu_standardized(x);
                for i in 0..n_neurons {
                    let coef = schedule.alpha0 * h[[b, i]];
                    let mut w = self.codebook.row_mut(i);
                    for (wj, &xj) in w.iter_mut().zip(x) {
                        *wj += coef * (xj - *wj);
                    }
                }
            }
        }
    }

    fn train_batch(&mut self, std_data: &Array2<f64>, schedule: &TrainSchedule) {
        let n_neurons = self.geometry.neuron_count();
        let dim = self.dim;
        for epoch in 0..schedule.epochs {
            let h = self.neighborhood_matrix(schedule.delta_at(epoch));
            // Per-BMU sums first; the weighted means then only couple neurons.
            let mut bmu_sums = Array2::<f64>::zeros((n_neurons, dim));
            let mut bmu_counts = vec![0.0f64; n_neurons];
            for row in std_data.rows() {
                let x = row.as_slice().expect("contiguous row");
                let b = self.bmu_standardized(x);
                let mut s = bmu_sums.row_mut(b);
                for (sj, &xj) in s.iter_mut().zip(x) {
                    *sj += xj;
                }
                bmu_counts[b] += 1.0;
            }
            let mut next = self.codebook.clone();
            for i in 0..n_neurons {
                let mut denom = 0.0;
                let mut numer = vec![0.0f64; dim];
                for b in 0..n_neurons {
                    if bmu_counts[b] == 0.0 {
                        continue;
                    }
                    let w = h[[b, i]];
                    denom += w * bmu_counts[b];
                    let s = bmu_sums.row(b);
                    for (nj, &sj) in numer.iter_mut().zip(s.iter()) {
                        *nj += w * sj;
                    }
                }
                if denom > 0.0 {
                    let mut row = next.row_mut(i);
                    for (wj, nj) in row.iter_mut().zip(numer) {
                        *wj = nj / denom;
                    }
                }
            }
            self.codebook = next;
        }
    }

    fn neighborhood_matrix(&self, delta: f64) -> Array2<f64> {
        let n = self.geometry.neuron_count();
        let mut h = Array2::zeros((n, n));
        let two_delta_sq = 2.0 * delta * delta;
        for a in 0..n {
            for b in a..n {
                let v = (-self.geometry.grid_distance_sq(a, b) / two_delta_sq).exp();
                h[[a, b]] = v;
                h[[b, a]] = v;
            }
        }
        h
    }

    /// Project two samples and count how many rows of each hit every neuron.
    pub fn project_counts(&self, x: &Dataset, z: &Dataset) -> Result<CountGrid> {
        let r = self.project(x)?;
        let s = self.project(z)?;
        CountGrid::from_counts(r, s)
    }

    /// Per-neuron hit counts for one sample.
    pub fn project(&self, data: &Dataset) -> Result<Vec<usize>> {
        if data.dim() != self.dim && data.n() > 0 {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: data.dim(),
            });
        }
        let mut counts = vec![0usize; self.geometry.neuron_count()];
        let means = self.feature_means.as_slice().unwrap();
        let scales = self.feature_scales.as_slice().unwrap();
        let mut buf = vec![0.0f64; self.dim];
        for row in data.view().rows() {
            for j in 0..self.dim {
                buf[j] = (row[j] - means[j]) / scales[j];
            }
            counts[self.bmu_standardized(&buf)] += 1;
        }
        Ok(counts)
    }

    pub fn to_json_string(&self) -> String {
        let doc = ModelDoc {
            version: MODEL_FORMAT_VERSION,
            width: self.geometry.width,
            height: self.geometry.height,
            dim: self.dim,
            codebook: self.codebook.iter().copied().collect(),
            feature_means: self.feature_means.to_vec(),
            feature_scales: self.feature_scales.to_vec(),
        };
        serde_json::to_string_pretty(&doc).expect("model document serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)
            .map_err(|e| Error::MalformedDocument(e.to_string()))?;
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: doc.version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        if doc.width == 0 || doc.height == 0 || doc.dim == 0 {
            return Err(Error::ShapeMismatch(
                "width, height, and dim must all be >= 1".into(),
            ));
        }
        let geometry = MapGeometry::new(doc.width, doc.height)?;
        if doc.codebook.len() != geometry.neuron_count() * doc.dim {
            return Err(Error::ShapeMismatch(format!(
                "codebook has {} entries, expected {} ({} neurons x {} features)",
                doc.codebook.len(),
                geometry.neuron_count() * doc.dim,
                geometry.neuron_count(),
                doc.dim
            )));
        }
        let codebook =
            Array2::from_shape_vec((geometry.neuron_count(), doc.dim), doc.codebook)
                .expect("length checked above");
        Self::from_parts(geometry, codebook, doc.feature_means, doc.feature_scales)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }
}

/// Initialize per `schedule.init` and train: the usual way to get a model.
pub fn fit_som(data: &Dataset, geometry: MapGeometry, schedule: &TrainSchedule) -> Result<SomModel> {
    let mut model = SomModel::init(geometry, data, schedule.init, schedule.seed)?;
    model.train(data, schedule)?;
    Ok(model)
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    width: usize,
    height: usize,
    dim: usize,
    codebook: Vec<f64>,
    feature_means: Vec<f64>,
    feature_scales: Vec<f64>,
}

/// Per-feature mean and population standard deviation; a zero deviation is
/// replaced by scale 1 so constant features standardize to 0.
fn feature_stats(data: ArrayView2<'_, f64>) -> (Vec<f64>, Vec<f64>) {
    let n = data.nrows() as f64;
    let dim = data.ncols();
    let mut means = vec![0.0; dim];
    for row in data.rows() {
        for (j, &v) in row.iter().enumerate() {
            means[j] += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut vars = vec![0.0; dim];
    for row in data.rows() {
        for (j, &v) in row.iter().enumerate() {
            let d = v - means[j];
            vars[j] += d * d;
        }
    }
    let scales: Vec<f64> = vars
        .iter()
        .map(|&v| {
            let s = (v / n).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (means, scales)
}

fn standardize(data: ArrayView2<'_, f64>, means: &[f64], scales: &[f64]) -> Array2<f64> {
    standardize_with(data, means, scales)
}

fn standardize_with(
    data: ArrayView2<'_, f64>,
    means: &[f64],
    scales: &[f64],
) -> Array2<f64> {
    let mut out = data.to_owned();
    for mut row in out.rows_mut() {
        for j in 0..means.len() {
            row[j] = (row[j] - means[j]) / scales[j];
        }
    }
    out
}

/// Fisher-Yates with an explicit RNG; kept local so the draw order is part
/// of the training contract.
fn shuffle<R: Rng>(items: &mut [usize], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Lay the codebook on a regular grid spanning +-2 standard deviations
/// along the first two principal components of the standardized data.
fn pca_codebook(geometry: &MapGeometry, std_data: &Array2<f64>, seed: u64) -> Result<Array2<f64>> {
    let n = std_data.nrows() as f64;
    let dim = std_data.ncols();
    // Population covariance; standardized means are zero by construction.
    let mut cov = Array2::<f64>::zeros((dim, dim));
    for row in std_data.rows() {
        for a in 0..dim {
            for b in a..dim {
                cov[[a, b]] += row[a] * row[b];
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            let v = cov[[a, b]] / n;
            cov[[a, b]] = v;
            cov[[b, a]] = v;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lambda1, v1) = dominant_eigenpair(&cov, &mut rng);
    if lambda1 <= 1e-12 {
        return Err(Error::InvalidParameter(
            "pca init requires non-constant data".into(),
        ));
    }
    let (lambda2, v2) = if dim > 1 {
        let mut deflated = cov.clone();
        for a in 0..dim {
            for b in 0..dim {
                deflated[[a, b]] -= lambda1 * v1[a] * v1[b];
            }
        }
        dominant_eigenpair(&deflated, &mut rng)
    } else {
        (0.0, vec![0.0; dim])
    };
    let (lambda2, v2) = if lambda2 > 1e-12 * lambda1.max(1.0) {
        (lambda2, v2)
    } else {
        (0.0, vec![0.0; dim])
    };

    let sd1 = lambda1.sqrt();
    let sd2 = lambda2.sqrt();
    let span = |idx: usize, len: usize| -> f64 {
        if len <= 1 {
            0.0
        } else {
            -2.0 + 4.0 * idx as f64 / (len - 1) as f64
        }
    };
    let mut codebook = Array2::zeros((geometry.neuron_count(), dim));
    for i in 0..geometry.neuron_count() {
        let (gx, gy) = geometry.position(i);
        let u = span(gx, geometry.width) * sd1;
        let v = span(gy, geometry.height) * sd2;
        for j in 0..dim {
            codebook[[i, j]] = u * v1[j] + v * v2[j];
        }
    }
    Ok(codebook)
}

/// Power iteration on a symmetric positive-semidefinite matrix.
fn dominant_eigenpair<R: Rng>(mat: &Array2<f64>, rng: &mut R) -> (f64, Vec<f64>) {
    let dim = mat.nrows();
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let mut next = vec![0.0; dim];
        for a in 0..dim {
            for b in 0..dim {
                next[a] += mat[[a, b]] * v[b];
            }
        }
        let new_lambda = dot(&next, &v);
        let norm = normalize(&mut next);
        if norm <= 1e-300 {
            return (0.0, vec![0.0; dim]);
        }
        let converged = (new_lambda - lambda).abs() <= 1e-14 * new_lambda.abs().max(1.0);
        v = next;
        lambda = new_lambda;
        if converged {
            break;
        }
    }
    (lambda.max(0.0), v)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}
