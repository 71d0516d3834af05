//! The sample container shared by the estimator, the probe, and the trainer.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// N rows of d-dimensional real samples. Every entry is finite; row count
/// zero is representable so empty inputs can be rejected by the consumer
/// that actually requires data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix(Array2<f64>);

impl SampleMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "sample matrix contains a non-finite entry".into(),
            ));
        }
        Ok(SampleMatrix(data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Shape("rows have inconsistent lengths".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let arr = Array2::from_shape_vec((rows.len(), ncols), flat)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(arr)
    }

    /// Single-column matrix from a value-per-sample slice.
    pub fn column(values: &[f64]) -> Result<Self> {
        let arr = Array2::from_shape_vec((values.len(), 1), values.to_vec())
            .map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(arr)
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.0.row(i)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let n = self.nrows();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Param(format!(
                "row index {bad} out of bounds for {n} rows"
            )));
        }
        let mut out = Array2::zeros((indices.len(), self.ncols()));
        for (dst, &src) in indices.iter().enumerate() {
            out.row_mut(dst).assign(&self.0.row(src));
        }
        Ok(SampleMatrix(out))
    }
}
