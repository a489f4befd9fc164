//! Rectangular CSR operators used as per-layer propagation blocks.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::real::Real;

/// Rectangular CSR matrix with `f64` values.
///
/// Row `i` aggregates from columns `indices[offsets[i]..offsets[i + 1]]`.
/// Sampled blocks map the node set of hop `l + 1` (columns) onto the node
/// set of hop `l` (rows); full-graph operators are square.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row `(column, value)` lists. Columns within a row are
    /// sorted; duplicates are summed.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        let n_rows = rows.len();
        let mut offsets = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                if c as usize >= n_cols {
                    return Err(Error::NodeOutOfRange {
                        id: c as usize,
                        num_nodes: n_cols,
                    });
                }
                if indices.len() > *offsets.last().unwrap() && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            offsets,
            indices,
            values,
        })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// `nnz / (rows * cols)`.
    pub fn density(&self) -> f64 {
        if self.n_rows == 0 || self.n_cols == 0 {
            return 0.0;
        }
        self.nnz() as f64 / (self.n_rows as f64 * self.n_cols as f64)
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&(j as u32)).map_or(0.0, |k| vals[k])
    }

    /// `self * m`.
    pub fn spmm<T: Real>(&self, m: &Matrix<T>) -> Result<Matrix<T>> {
        if m.rows() != self.n_cols {
            return Err(Error::DimensionMismatch {
                context: "block spmm",
                expected: self.n_cols,
                actual: m.rows(),
            });
        }
        let mut out = Matrix::zeros(self.n_rows, m.cols());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let o = out.row_mut(i);
            for (&j, &w) in cols.iter().zip(vals) {
                let w = T::from_f64(w);
                for (o, &x) in o.iter_mut().zip(m.row(j as usize)) {
                    *o += w * x;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ * m`, used by the backward pass.
    pub fn spmm_t<T: Real>(&self, m: &Matrix<T>) -> Result<Matrix<T>> {
        if m.rows() != self.n_rows {
            return Err(Error::DimensionMismatch {
                context: "transposed block spmm",
                expected: self.n_rows,
                actual: m.rows(),
            });
        }
        let mut out = Matrix::zeros(self.n_cols, m.cols());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let src = m.row(i);
            for (&j, &w) in cols.iter().zip(vals) {
                let w = T::from_f64(w);
                for (o, &x) in out.row_mut(j as usize).iter_mut().zip(src) {
                    *o += w * x;
                }
            }
        }
        Ok(out)
    }
}

impl From<&Graph> for SparseMatrix {
    /// Square operator from a graph; unvalued entries become 1.
    fn from(g: &Graph) -> Self {
        let values = match g.values() {
            Some(v) => v.to_vec(),
            None => alloc::vec![1.0; g.num_stored()],
        };
        Self {
            n_rows: g.num_nodes(),
            n_cols: g.num_nodes(),
            offsets: g.row_offsets().to_vec(),
            indices: g.col_indices().to_vec(),
            values,
        }
    }
}
