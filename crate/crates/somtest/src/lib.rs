//! Nonparametric multivariate two-sample testing on self-organizing maps.
//!
//! The main test trains a SOM on the pooled samples, projects each sample
//! onto the map separately, and compares the per-neuron occupation counts
//! with a chi-squared statistic over the occupied cells. Besides the
//! p-value, the caller keeps the trained map, the count grids, and a
//! relative-difference map showing *where* the samples differ.
//!
//! Baselines with the same two-dataset interface: the nearest-neighbor
//! coincidence permutation test, classifier two-sample tests (MLP and kNN),
//! and the block-averaged MMD kernel test. A Monte-Carlo harness estimates
//! their empirical type I/II error rates on synthetic Gaussian pairs.
//!
//! ```
//! use somtest::{sample_pair, som_two_sample_test, Family, GeneratorSpec,
//!               MapGeometry, TrainSchedule};
//!
//! let spec = GeneratorSpec::new(Family::GaussLocation, 3, 42);
//! let (x, z) = sample_pair(&spec, 150, 150, false).unwrap();
//! let geometry = MapGeometry::new(6, 6).unwrap();
//! let schedule = TrainSchedule::for_geometry(&geometry).with_seed(42);
//! let result = som_two_sample_test(&x, &z, geometry, &schedule).unwrap();
//! assert!(result.p_value < 0.05); // the samples are shifted apart
//! ```
//!
//! See the `examples/` directory for one runnable program per capability,
//! and the `somtest` binary for the CSV-driven command line.

pub mod bench;
pub mod classifiers;
pub mod cli;
pub mod counts;
pub mod dataset;
pub mod error;
pub mod export;
pub mod som;
pub mod stats;
pub mod two_sample;

pub use bench::{
    anova_f_scores, kbest_order, kl_knn_estimate, power_run, sample_pair, som_classifier_cv,
    wishart_covariance, Family, GeneratorSpec, PowerReport,
};
pub use classifiers::{knn_accuracy, MlpModel};
pub use counts::CountGrid;
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use export::{planes_doc, rank_codebook_planes, ResultDoc};
pub use som::{
    fit_som, InitMethod, MapGeometry, SomModel, TrainMode, TrainSchedule,
};
pub use stats::{chi2_sf, normal_sf, permutation_pvalue, NullDescriptor};
pub use two_sample::{
    c2st_test, chi2_from_counts, knn_coincidence_test, mmd_block_test, run_test,
    som_two_sample_test, Classifier, Method, TestParams, TestResult,
};
