//! Real-valued sample matrices with optional per-row labels.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// An n x d sample matrix with optional integer labels (one per row).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    data: Array2<f64>,
    labels: Option<Vec<i32>>,
}

impl Dataset {
    /// Wrap a matrix, rejecting non-finite entries. Zero rows are allowed
    /// (an empty sample), zero columns are not.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(Error::EmptyData("zero-dimensional data"));
        }
        check_finite(&data)?;
        Ok(Self { data, labels: None })
    }

    pub fn with_labels(data: Array2<f64>, labels: Vec<i32>) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(Error::EmptyData("zero-dimensional data"));
        }
        check_finite(&data)?;
        if labels.len() != data.nrows() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                got: labels.len(),
            });
        }
        Ok(Self {
            data,
            labels: Some(labels),
        })
    }

    /// Build from row vectors; all rows must have the same arity.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyData("no rows"));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::EmptyData("zero-dimensional rows"));
        }
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            for (j, &v) in r.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                flat.push(v);
            }
        }
        let data = Array2::from_shape_vec((rows.len(), dim), flat)
            .expect("shape checked above");
        Ok(Self { data, labels: None })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn labels(&self) -> Option<&[i32]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[i32]> {
        self.labels().ok_or(Error::MissingLabels)
    }

    /// Stack the rows of `self` and `other` (labels are dropped).
    pub fn pooled(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let mut data = Array2::zeros((self.n() + other.n(), self.dim()));
        data.slice_mut(ndarray::s![..self.n(), ..]).assign(&self.data);
        data.slice_mut(ndarray::s![self.n().., ..]).assign(&other.data);
        Ok(Dataset { data, labels: None })
    }

    /// Select rows by index, carrying labels along when present.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let mut data = Array2::zeros((idx.len(), self.dim()));
        for (out, &i) in idx.iter().enumerate() {
            data.row_mut(out).assign(&self.data.row(i));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| idx.iter().map(|&i| l[i]).collect());
        Dataset { data, labels }
    }

    /// Read a CSV file: one header line, then comma-separated decimal rows.
    /// A final column named `label` is parsed as integer labels.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let headers: Vec<String> = rdr
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(|h| h.to_string())
            .collect();
        if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
            return Err(Error::EmptyData("csv header"));
        }
        let mut seen = HashSet::new();
        for h in &headers {
            if !seen.insert(h) {
                return Err(Error::Csv {
                    line: 1,
                    msg: format!("duplicate header name {h:?}"),
                });
            }
        }
        let has_label = headers.last().map(String::as_str) == Some("label");
        let n_features = if has_label {
            headers.len() - 1
        } else {
            headers.len()
        };
        if n_features == 0 {
            return Err(Error::EmptyData("csv has a label column but no features"));
        }

        let mut rows: Vec<f64> = Vec::new();
        let mut labels: Vec<i32> = Vec::new();
        let mut n_rows = 0usize;
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != headers.len() {
                return Err(Error::Csv {
                    line,
                    msg: format!("expected {} cells, got {}", headers.len(), rec.len()),
                });
            }
            for (j, cell) in rec.iter().take(n_features).enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Csv {
                    line,
                    msg: format!("non-numeric cell {cell:?} in column {:?}", headers[j]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Csv {
                        line,
                        msg: format!("non-finite cell in column {:?}", headers[j]),
                    });
                }
                rows.push(v);
            }
            if has_label {
                let cell = &rec[headers.len() - 1];
                let v: f64 = cell.parse().map_err(|_| Error::Csv {
                    line,
                    msg: format!("non-numeric label {cell:?}"),
                })?;
                if v.fract() != 0.0 || v.abs() > i32::MAX as f64 {
                    return Err(Error::Csv {
                        line,
                        msg: format!("label {cell:?} is not an integer"),
                    });
                }
                labels.push(v as i32);
            }
            n_rows += 1;
        }
        if n_rows == 0 {
            return Err(Error::EmptyData("csv body"));
        }
        let data = Array2::from_shape_vec((n_rows, n_features), rows)
            .expect("row arity checked per record");
        if has_label {
            Dataset::with_labels(data, labels)
        } else {
            Dataset::new(data)
        }
    }
}

fn check_finite(data: &Array2<f64>) -> Result<()> {
    for ((row, col), &v) in data.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, csv::Position::line);
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Csv {
            line,
            msg: format!("expected {expected_len} cells, got {len}"),
        },
        _ => Error::Csv {
            line,
            msg: e.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_two_by_two() {
        let d = Dataset::from_csv_reader("a,b\n1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.row(1).to_vec(), vec![3.0, 4.0]);
        assert!(d.labels().is_none());
    }

    #[test]
    fn csv_ragged_row_names_line() {
        let err = Dataset::from_csv_reader("a,b\n1,2\n1,2,3\n".as_bytes()).unwrap_err();
        match err {
            Error::Csv { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("3"), "{msg}");
            }
            other => panic!("expected csv error, got {other:?}"),
        }
    }

    #[test]
    fn csv_label_column() {
        let d = Dataset::from_csv_reader("a,label\n1.5,1\n2.5,-1\n".as_bytes()).unwrap();
        assert_eq!(d.dim(), 1);
        assert_eq!(d.labels(), Some(&[1, -1][..]));
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(matches!(
            Dataset::from_csv_reader("a,b\n".as_bytes()).unwrap_err(),
            Error::EmptyData(_)
        ));
        assert!(matches!(
            Dataset::from_csv_reader("a,a\n1,2\n".as_bytes()).unwrap_err(),
            Error::Csv { .. }
        ));
        assert!(matches!(
            Dataset::from_csv_reader("a,b\n1,x\n".as_bytes()).unwrap_err(),
            Error::Csv { line: 2, .. }
        ));
    }

    #[test]
    fn from_rows_rejects_non_finite() {
        let err = Dataset::from_rows(&[vec![1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
    }
}
