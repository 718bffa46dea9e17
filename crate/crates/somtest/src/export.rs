//! Plot-ready artifact documents: count grids, relative-difference maps,
//! ranked codebook planes, and the test-result document. All documents are
//! JSON with a format-version field and can be re-read by their loaders.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::counts::CountGrid;
use crate::error::{Error, Result};
use crate::som::{MapGeometry, SomModel};
use crate::stats::NullDescriptor;
use crate::two_sample::{Method, TestResult};

pub const DOC_FORMAT_VERSION: u32 = 1;

/// Per-neuron counts of both samples, with the map geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsDoc {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub n_x: usize,
    pub n_z: usize,
    pub r: Vec<usize>,
    pub s: Vec<usize>,
}

impl CountsDoc {
    pub fn new(geometry: &MapGeometry, grid: &CountGrid) -> Result<Self> {
        if grid.cells() != geometry.neuron_count() {
            return Err(Error::ShapeMismatch(format!(
                "grid has {} cells, geometry requires {}",
                grid.cells(),
                geometry.neuron_count()
            )));
        }
        Ok(Self {
            version: DOC_FORMAT_VERSION,
            width: geometry.width,
            height: geometry.height,
            n_x: grid.n_x(),
            n_z: grid.n_z(),
            r: grid.r().to_vec(),
            s: grid.s().to_vec(),
        })
    }

    pub fn into_grid(self) -> Result<(MapGeometry, CountGrid)> {
        check_version(self.version)?;
        let geometry = MapGeometry::new(self.width, self.height)?;
        if self.r.len() != geometry.neuron_count() || self.s.len() != geometry.neuron_count() {
            return Err(Error::ShapeMismatch(format!(
                "count arrays have lengths {}/{}, expected {}",
                self.r.len(),
                self.s.len(),
                geometry.neuron_count()
            )));
        }
        let grid = CountGrid::from_counts(self.r, self.s)?;
        if grid.n_x() != self.n_x || grid.n_z() != self.n_z {
            return Err(Error::ShapeMismatch(
                "count sums disagree with the recorded sample sizes".into(),
            ));
        }
        Ok((geometry, grid))
    }
}

/// One real value per neuron (used for the relative-difference map).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridValuesDoc {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl GridValuesDoc {
    pub fn new(geometry: &MapGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.neuron_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} neurons",
                values.len(),
                geometry.neuron_count()
            )));
        }
        Ok(Self {
            version: DOC_FORMAT_VERSION,
            width: geometry.width,
            height: geometry.height,
            values,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_version(self.version)?;
        if self.values.len() != self.width * self.height {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}x{} grid",
                self.values.len(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }
}

/// Codebook planes in original feature units, ordered by distinctness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanesDoc {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub dim: usize,
    /// How the planes were ranked, recorded for the reader.
    pub ranking: String,
    pub planes: Vec<PlaneEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneEntry {
    pub feature: usize,
    pub score: f64,
    pub values: Vec<f64>,
}

/// A rendered test result. The SOM test inlines its counts and points at
/// the serialized model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultDoc {
    pub version: u32,
    pub method: Method,
    pub statistic: f64,
    pub null: NullDescriptor,
    pub p_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<CountsDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_path: Option<String>,
}

impl ResultDoc {
    pub fn new(result: &TestResult, model_path: Option<String>) -> Result<Self> {
        let counts = match (&result.counts, &result.model) {
            (Some(grid), Some(model)) => Some(CountsDoc::new(model.geometry(), grid)?),
            _ => None,
        };
        Ok(Self {
            version: DOC_FORMAT_VERSION,
            method: result.method,
            statistic: result.statistic,
            null: result.null.clone(),
            p_value: result.p_value,
            counts,
            model_path,
        })
    }
}

/// Rank codebook planes by how well they align with the density contrast:
/// the absolute Pearson correlation, across neurons, between the plane and
/// the relative-difference vector. Zero-variance planes score 0; ties keep
/// index order.
pub fn rank_codebook_planes(model: &SomModel, grid: &CountGrid) -> Result<Vec<(usize, f64)>> {
    if grid.cells() != model.geometry().neuron_count() {
        return Err(Error::ShapeMismatch(format!(
            "grid has {} cells, model has {} neurons",
            grid.cells(),
            model.geometry().neuron_count()
        )));
    }
    if grid.r().iter().zip(grid.s()).all(|(&r, &s)| r + s == 0) {
        return Err(Error::EmptyData("count grid is entirely empty"));
    }
    let contrast = grid.relative_difference();
    let codebook = model.codebook();
    let mut ranked: Vec<(usize, f64)> = (0..model.dim())
        .map(|f| {
            let plane: Vec<f64> = codebook.column(f).to_vec();
            (f, abs_pearson(&plane, &contrast))
        })
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("scores are finite").then(a.0.cmp(&b.0)));
    Ok(ranked)
}

fn abs_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        0.0
    } else {
        (cov / (va * vb).sqrt()).abs()
    }
}

/// Build the planes document, ranked by [`rank_codebook_planes`]. Plane
/// values are reported in original feature units.
pub fn planes_doc(model: &SomModel, grid: &CountGrid) -> Result<PlanesDoc> {
    let ranked = rank_codebook_planes(model, grid)?;
    let denorm = model.codebook_denormalized();
    let planes = ranked
        .into_iter()
        .map(|(feature, score)| PlaneEntry {
            feature,
            score,
            values: denorm.column(feature).to_vec(),
        })
        .collect();
    Ok(PlanesDoc {
        version: DOC_FORMAT_VERSION,
        width: model.geometry().width,
        height: model.geometry().height,
        dim: model.dim(),
        ranking: "abs_pearson_correlation_with_relative_difference".into(),
        planes,
    })
}

pub fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)
        .map_err(|e| Error::MalformedDocument(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedDocument(e.to_string()))
}

fn check_version(found: u32) -> Result<()> {
    if found != DOC_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found,
            expected: DOC_FORMAT_VERSION,
        });
    }
    Ok(())
}
