//! Row-major `n x D` sample matrix.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    data: Vec<f64>,
    ncols: usize,
}

impl DataMatrix {
    pub fn new(data: Vec<f64>, ncols: usize) -> Result<Self> {
        if ncols == 0 || !data.len().is_multiple_of(ncols) {
            return Err(Error::DimensionMismatch {
                expected: ncols,
                got: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!("non-finite value {v}")));
        }
        Ok(Self { data, ncols })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
            return Err(Error::InvalidSample(format!(
                "row {bad} has {} columns, expected {ncols}",
                rows[bad].len()
            )));
        }
        Self::new(rows.concat(), ncols)
    }

    pub fn nrows(&self) -> usize {
        self.data.len() / self.ncols
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.ncols)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &DataMatrix) -> Result<Self> {
        if other.ncols != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                got: other.ncols,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self { data, ncols: self.ncols })
    }
}
