#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng as _;
use soupgnn_core::rng::{stream_rng, Stream};
use soupgnn_core::{Graph, Matrix};

/// Erdős–Rényi graph with edge probability `p`.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = stream_rng(seed, Stream::Fixture, 100, 0);
    let mut edges = Vec::new();
    for i in 0..n as u32 {
        for j in i + 1..n as u32 {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_undirected_edges(n, edges).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
    let mut rng = stream_rng(seed, Stream::Fixture, 101, 0);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// 0/1 adjacency without self loops.
pub fn dense_adjacency(g: &Graph) -> DMatrix<f64> {
    let n = g.num_nodes();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for &j in g.neighbors(i) {
            if j as usize != i {
                a[(i, j as usize)] = 1.0;
            }
        }
    }
    a
}

/// D̃^{-1/2}(A+I)D̃^{-1/2}, from scratch.
pub fn dense_sym_norm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let at = a + DMatrix::identity(n, n);
    let d: Vec<f64> = (0..n).map(|i| at.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| at[(i, j)] / (d[i] * d[j]).sqrt())
}

/// D̃^{-1}(A+I), from scratch.
pub fn dense_mean_norm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let at = a + DMatrix::identity(n, n);
    let d: Vec<f64> = (0..n).map(|i| at.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| at[(i, j)] / d[i])
}

/// Dense matrix of a valued graph (missing values read as 1).
pub fn graph_to_dense(g: &Graph) -> DMatrix<f64> {
    let n = g.num_nodes();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for (k, &j) in g.neighbors(i).iter().enumerate() {
            m[(i, j as usize)] = g.row_values(i).map_or(1.0, |v| v[k]);
        }
    }
    m
}

pub fn to_dense(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
