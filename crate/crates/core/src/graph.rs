//! CSR adjacency, GCN renormalization and subgraph induction.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::real::Real;

/// Immutable square CSR adjacency with optional edge values.
///
/// Invariants: `row_offsets` is non-decreasing, starts at 0 and ends at the
/// number of stored entries; column ids are in range and strictly increasing
/// within a row. Undirected graphs store both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    values: Option<Vec<f64>>,
}

/// A node-induced subgraph together with the global ids of its nodes.
///
/// Local node `i` is global node `nodes[i]`; `nodes` is strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph {
    pub graph: Graph,
    pub nodes: Vec<u32>,
}

impl Subgraph {
    /// Local id of a global node, if it belongs to the subgraph.
    pub fn local_id(&self, global: u32) -> Option<u32> {
        self.nodes.binary_search(&global).ok().map(|i| i as u32)
    }
}

impl Graph {
    /// Builds a symmetric, unvalued graph from an undirected edge list.
    ///
    /// Duplicate edges collapse and self-loops are dropped.
    pub fn from_undirected_edges(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); num_nodes];
        for (u, v) in edges {
            for id in [u, v] {
                if id as usize >= num_nodes {
                    return Err(Error::NodeOutOfRange {
                        id: id as usize,
                        num_nodes,
                    });
                }
            }
            if u == v {
                continue;
            }
            rows[u as usize].push(v);
            rows[v as usize].push(u);
        }
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            col_indices.extend_from_slice(&row);
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            num_nodes,
            row_offsets,
            col_indices,
            values: None,
        })
    }

    /// Builds a graph from raw CSR arrays, validating the structural invariants.
    pub fn from_csr(
        num_nodes: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<u32>,
        values: Option<Vec<f64>>,
    ) -> Result<Self> {
        if row_offsets.len() != num_nodes + 1 {
            return Err(Error::InvalidGraph(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                num_nodes + 1
            )));
        }
        if row_offsets[0] != 0 || row_offsets[num_nodes] != col_indices.len() {
            return Err(Error::InvalidGraph(String::from(
                "row_offsets must start at 0 and end at the entry count",
            )));
        }
        if let Some(v) = &values {
            if v.len() != col_indices.len() {
                return Err(Error::InvalidGraph(String::from(
                    "values length differs from col_indices length",
                )));
            }
        }
        for i in 0..num_nodes {
            let (a, b) = (row_offsets[i], row_offsets[i + 1]);
            if a > b {
                return Err(Error::InvalidGraph(format!(
                    "row_offsets decrease at row {i}"
                )));
            }
            let row = &col_indices[a..b];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGraph(format!(
                    "row {i} columns are not strictly increasing"
                )));
            }
            if let Some(&last) = row.last() {
                if last as usize >= num_nodes {
                    return Err(Error::NodeOutOfRange {
                        id: last as usize,
                        num_nodes,
                    });
                }
            }
        }
        Ok(Self {
            num_nodes,
            row_offsets,
            col_indices,
            values,
        })
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of stored (directed) entries.
    #[inline]
    pub fn num_stored(&self) -> usize {
        self.col_indices.len()
    }

    /// Number of undirected edges, self-loops excluded.
    pub fn num_undirected_edges(&self) -> usize {
        self.undirected_edges().count()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    #[inline]
    pub fn row_values(&self, i: usize) -> Option<&[f64]> {
        self.values
            .as_ref()
            .map(|v| &v[self.row_offsets[i]..self.row_offsets[i + 1]])
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes)
            .map(|i| self.degree(i))
            .max()
            .unwrap_or(0)
    }

    /// Stored value at `(i, j)`: `Some(1.0)` for unvalued entries, `None` if absent.
    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        let row = self.neighbors(i);
        let pos = row.binary_search(&(j as u32)).ok()?;
        Some(match self.row_values(i) {
            Some(v) => v[pos],
            None => 1.0,
        })
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&(j as u32)).is_ok()
    }

    /// Undirected edges `(u, v)` with `u < v`, in row-major order.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.num_nodes).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| (v as usize) > u)
                .map(move |&v| (u as u32, v))
        })
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.num_nodes).all(|i| {
            self.neighbors(i)
                .iter()
                .enumerate()
                .all(|(k, &j)| match self.value(j as usize, i) {
                    None => false,
                    Some(back) => match self.row_values(i) {
                        Some(v) => v[k] == back,
                        None => true,
                    },
                })
        })
    }

    /// Adds self-loops (`A + I`), ignoring any self-loops already stored, and
    /// returns the structure together with the degree of `A + I`.
    fn with_self_loops(&self) -> (Vec<usize>, Vec<u32>, Vec<f64>) {
        let mut offsets = Vec::with_capacity(self.num_nodes + 1);
        let mut cols = Vec::with_capacity(self.num_stored() + self.num_nodes);
        let mut degree = Vec::with_capacity(self.num_nodes);
        offsets.push(0);
        for i in 0..self.num_nodes {
            let start = cols.len();
            let mut inserted = false;
            for &j in self.neighbors(i) {
                if j as usize == i {
                    continue;
                }
                if !inserted && j as usize > i {
                    cols.push(i as u32);
                    inserted = true;
                }
                cols.push(j);
            }
            if !inserted {
                cols.push(i as u32);
            }
            degree.push((cols.len() - start) as f64);
            offsets.push(cols.len());
        }
        (offsets, cols, degree)
    }

    /// `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃` is the degree of `A + I`.
    pub fn sym_normalize(&self) -> Graph {
        let (offsets, cols, degree) = self.with_self_loops();
        let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / Float::sqrt(*d)).collect();
        let mut values = Vec::with_capacity(cols.len());
        for i in 0..self.num_nodes {
            for &j in &cols[offsets[i]..offsets[i + 1]] {
                values.push(inv_sqrt[i] * inv_sqrt[j as usize]);
            }
        }
        Graph {
            num_nodes: self.num_nodes,
            row_offsets: offsets,
            col_indices: cols,
            values: Some(values),
        }
    }

    /// Row-stochastic `D̃^{-1} (A + I)`: each node averages itself and its neighbors.
    pub fn mean_normalize(&self) -> Graph {
        let (offsets, cols, degree) = self.with_self_loops();
        let mut values = Vec::with_capacity(cols.len());
        for i in 0..self.num_nodes {
            let w = 1.0 / degree[i];
            values.extend(core::iter::repeat_n(w, offsets[i + 1] - offsets[i]));
        }
        Graph {
            num_nodes: self.num_nodes,
            row_offsets: offsets,
            col_indices: cols,
            values: Some(values),
        }
    }

    /// Subgraph on `nodes` keeping every edge with both endpoints inside.
    ///
    /// The node list is sorted and deduplicated; local ids follow that order.
    pub fn induce_subgraph(&self, nodes: &[u32]) -> Result<Subgraph> {
        if nodes.is_empty() {
            return Err(Error::EmptyNodeSet);
        }
        let mut sorted = nodes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if let Some(&last) = sorted.last() {
            if last as usize >= self.num_nodes {
                return Err(Error::NodeOutOfRange {
                    id: last as usize,
                    num_nodes: self.num_nodes,
                });
            }
        }
        let mut local = vec![u32::MAX; self.num_nodes];
        for (new, &old) in sorted.iter().enumerate() {
            local[old as usize] = new as u32;
        }
        let mut offsets = Vec::with_capacity(sorted.len() + 1);
        let mut cols = Vec::new();
        let mut values = self.values.as_ref().map(|_| Vec::new());
        offsets.push(0);
        for &old in &sorted {
            let row = self.neighbors(old as usize);
            let row_vals = self.row_values(old as usize);
            for (k, &j) in row.iter().enumerate() {
                let l = local[j as usize];
                if l != u32::MAX {
                    // neighbors are sorted by global id and the relabelling is
                    // monotone, so local ids stay sorted
                    cols.push(l);
                    if let (Some(vs), Some(rv)) = (values.as_mut(), row_vals) {
                        vs.push(rv[k]);
                    }
                }
            }
            offsets.push(cols.len());
        }
        Ok(Subgraph {
            graph: Graph {
                num_nodes: sorted.len(),
                row_offsets: offsets,
                col_indices: cols,
                values,
            },
            nodes: sorted,
        })
    }

    /// Sparse × dense product; unvalued entries count as 1.
    pub fn spmm<T: Real>(&self, m: &Matrix<T>) -> Result<Matrix<T>> {
        if m.rows() != self.num_nodes {
            return Err(Error::DimensionMismatch {
                context: "spmm rows",
                expected: self.num_nodes,
                actual: m.rows(),
            });
        }
        let mut out = Matrix::zeros(self.num_nodes, m.cols());
        for i in 0..self.num_nodes {
            let vals = self.row_values(i);
            let o = out.row_mut(i);
            for (k, &j) in self.neighbors(i).iter().enumerate() {
                let w = T::from_f64(vals.map_or(1.0, |v| v[k]));
                for (o, &x) in o.iter_mut().zip(m.row(j as usize)) {
                    *o += w * x;
                }
            }
        }
        Ok(out)
    }

    /// Stable fingerprint of the structure (and values, if any).
    pub fn fingerprint(&self) -> String {
        let mut bytes =
            Vec::with_capacity(8 + 8 * self.row_offsets.len() + 4 * self.col_indices.len());
        bytes.extend_from_slice(&(self.num_nodes as u64).to_le_bytes());
        for &o in &self.row_offsets {
            bytes.extend_from_slice(&(o as u64).to_le_bytes());
        }
        for &c in &self.col_indices {
            bytes.extend_from_slice(&c.to_le_bytes());
        }
        if let Some(v) = &self.values {
            for x in v {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        crate::fingerprint(&bytes)
    }
}
