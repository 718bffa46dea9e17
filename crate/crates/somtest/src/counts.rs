//! Per-neuron occupation counts of two projected samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// R holds the first sample's per-neuron counts, S the second sample's.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountGrid {
    r: Vec<usize>,
    s: Vec<usize>,
    n_x: usize,
    n_z: usize,
}

impl CountGrid {
    pub fn from_counts(r: Vec<usize>, s: Vec<usize>) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::EmptyData("count grid"));
        }
        if r.len() != s.len() {
            return Err(Error::ShapeMismatch(format!(
                "count vectors have lengths {} and {}",
                r.len(),
                s.len()
            )));
        }
        let n_x = r.iter().sum();
        let n_z = s.iter().sum();
        Ok(Self { r, s, n_x, n_z })
    }

    pub fn cells(&self) -> usize {
        self.r.len()
    }

    pub fn r(&self) -> &[usize] {
        &self.r
    }

    pub fn s(&self) -> &[usize] {
        &self.s
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    /// Per-neuron normalized density contrast in [-1, 1]: with p and q the
    /// two samples' cell densities, (q - p)/(q + p), and 0 for empty cells.
    /// -1 means the second sample is absent from the cell, +1 the first.
    pub fn relative_difference(&self) -> Vec<f64> {
        let nx = self.n_x as f64;
        let nz = self.n_z as f64;
        self.r
            .iter()
            .zip(&self.s)
            .map(|(&r, &s)| {
                let p = if nx > 0.0 { r as f64 / nx } else { 0.0 };
                let q = if nz > 0.0 { s as f64 / nz } else { 0.0 };
                if p + q > 0.0 {
                    (q - p) / (q + p)
                } else {
                    0.0
                }
            })
            .collect()
    }
}
