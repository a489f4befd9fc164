//! Synthetic fixtures: stochastic block model datasets, grids, and splits.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, SplitSet};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::real::Real;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SbmConfig {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian noise added to the one-hot features.
    pub feature_noise: f64,
    pub seed: u64,
}

impl SbmConfig {
    pub fn new(num_nodes: usize, num_classes: usize, p_in: f64, p_out: f64, seed: u64) -> Self {
        Self {
            num_nodes,
            num_classes,
            p_in,
            p_out,
            feature_dim: 16,
            feature_noise: 0.5,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.num_classes == 0 || self.num_nodes < self.num_classes {
            return Err(Error::InvalidConfig(format!(
                "sbm needs 1 <= classes <= nodes, got {} classes for {} nodes",
                self.num_classes, self.num_nodes
            )));
        }
        if !prob(self.p_in) || !prob(self.p_out) {
            return Err(Error::InvalidConfig(
                "sbm probabilities must be in [0, 1]".into(),
            ));
        }
        if self.feature_dim < self.num_classes {
            return Err(Error::InvalidConfig(format!(
                "feature_dim {} smaller than class count {}",
                self.feature_dim, self.num_classes
            )));
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return Err(Error::InvalidConfig(
                "feature noise must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Block of node `i` when `n` nodes are split into `k` contiguous equal blocks.
pub fn block_of(i: usize, n: usize, k: usize) -> u32 {
    (i * k / n) as u32
}

/// SBM graph only, plus the block labels.
pub fn sbm_graph(cfg: &SbmConfig) -> Result<(Graph, Vec<u32>)> {
    cfg.validate()?;
    let n = cfg.num_nodes;
    let labels: Vec<u32> = (0..n).map(|i| block_of(i, n, cfg.num_classes)).collect();
    let mut rng = stream_rng(cfg.seed, Stream::Fixture, 0, 0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] {
                cfg.p_in
            } else {
                cfg.p_out
            };
            if rng.random::<f64>() < p {
                edges.push((i as u32, j as u32));
            }
        }
    }
    Ok((Graph::from_undirected_edges(n, edges)?, labels))
}

/// Noisy one-hot block indicators padded with pure-noise columns.
pub fn sbm_features<T: Real>(labels: &[u32], cfg: &SbmConfig) -> Result<Matrix<T>> {
    let noise = Normal::new(0.0, cfg.feature_noise)
        .map_err(|e| Error::InvalidConfig(format!("feature noise: {e}")))?;
    let mut rng = stream_rng(cfg.seed, Stream::Fixture, 1, 0);
    let mut x = Matrix::zeros(labels.len(), cfg.feature_dim);
    for (i, &c) in labels.iter().enumerate() {
        for (j, v) in x.row_mut(i).iter_mut().enumerate() {
            let base = if j == c as usize { 1.0 } else { 0.0 };
            *v = T::from_f64(base + noise.sample(&mut rng));
        }
    }
    Ok(x)
}

/// Complete SBM dataset with a stratified 60/20/20 split.
pub fn sbm_dataset<T: Real>(cfg: &SbmConfig) -> Result<Dataset<T>> {
    let (graph, labels) = sbm_graph(cfg)?;
    let features = sbm_features(&labels, cfg)?;
    let splits = stratified_split(&labels, cfg.num_classes, 0.6, 0.2, cfg.seed)?;
    Dataset::new(graph, features, labels, cfg.num_classes, splits)
}

/// Per class: shuffle the members, then assign the first `train_frac`
/// share to train, the next `val_frac` share to val and the rest to test.
pub fn stratified_split(
    labels: &[u32],
    num_classes: usize,
    train_frac: f64,
    val_frac: f64,
    seed: u64,
) -> Result<SplitSet> {
    if !(train_frac >= 0.0 && val_frac > 0.0 && train_frac + val_frac <= 1.0) {
        return Err(Error::InvalidSplit(format!(
            "bad split fractions train={train_frac} val={val_frac}"
        )));
    }
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class
            .get_mut(c as usize)
            .ok_or_else(|| Error::InvalidSplit(format!("label {c} >= {num_classes} classes")))?
            .push(i as u32);
    }
    let mut rng = stream_rng(seed, Stream::Fixture, 2, 0);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for members in &mut by_class {
        members.shuffle(&mut rng);
        let m = members.len() as f64;
        let n_train = num_traits::Float::round(m * train_frac) as usize;
        let n_val =
            (num_traits::Float::round(m * (train_frac + val_frac)) as usize).max(n_train) - n_train;
        train.extend_from_slice(&members[..n_train]);
        val.extend_from_slice(&members[n_train..n_train + n_val]);
        test.extend_from_slice(&members[n_train + n_val..]);
    }
    SplitSet::new(train, val, test, labels.len())
}

/// `per_class` training nodes per class, then `num_val` and `num_test` nodes
/// from the shuffled remainder.
pub fn per_class_split(
    labels: &[u32],
    num_classes: usize,
    per_class: usize,
    num_val: usize,
    num_test: usize,
    seed: u64,
) -> Result<SplitSet> {
    let mut order: Vec<u32> = (0..labels.len() as u32).collect();
    let mut rng = stream_rng(seed, Stream::Fixture, 3, 0);
    order.shuffle(&mut rng);
    let mut taken = vec![0usize; num_classes];
    let (mut train, mut rest) = (Vec::new(), Vec::new());
    for n in order {
        let c = labels[n as usize] as usize;
        if c >= num_classes {
            return Err(Error::InvalidSplit(format!(
                "label {c} >= {num_classes} classes"
            )));
        }
        if taken[c] < per_class {
            taken[c] += 1;
            train.push(n);
        } else {
            rest.push(n);
        }
    }
    if num_val + num_test > rest.len() {
        return Err(Error::InvalidSplit(format!(
            "requested {num_val} val + {num_test} test nodes, only {} remain",
            rest.len()
        )));
    }
    let test = rest[num_val..num_val + num_test].to_vec();
    rest.truncate(num_val);
    SplitSet::new(train, rest, test, labels.len())
}

/// `w × h` 4-neighbor grid, node `r * w + c`.
pub fn grid_graph(w: usize, h: usize) -> Result<Graph> {
    let mut edges = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let v = (r * w + c) as u32;
            if c + 1 < w {
                edges.push((v, v + 1));
            }
            if r + 1 < h {
                edges.push((v, v + w as u32));
            }
        }
    }
    Graph::from_undirected_edges(w * h, edges)
}

/// Grid dataset labeled by quadrant (4 classes) with noisy one-hot features.
pub fn grid_dataset<T: Real>(side: usize, feature_noise: f64, seed: u64) -> Result<Dataset<T>> {
    let graph = grid_graph(side, side)?;
    let half = side.div_ceil(2);
    let labels: Vec<u32> = (0..side * side)
        .map(|v| {
            let (r, c) = (v / side, v % side);
            (2 * usize::from(r >= half) + usize::from(c >= half)) as u32
        })
        .collect();
    let cfg = SbmConfig {
        feature_noise,
        ..SbmConfig::new(side * side, 4, 0.0, 0.0, seed)
    };
    let features = sbm_features(&labels, &cfg)?;
    let splits = stratified_split(&labels, 4, 0.6, 0.2, seed)?;
    Dataset::new(graph, features, labels, 4, splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sbm_is_deterministic() {
        let cfg = SbmConfig::new(200, 4, 0.1, 0.01, 3);
        let a = sbm_dataset::<f32>(&cfg).unwrap();
        let b = sbm_dataset::<f32>(&cfg).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.features, b.features);
        assert_eq!(a.splits, b.splits);
        let c = sbm_dataset::<f32>(&SbmConfig { seed: 4, ..cfg }).unwrap();
        assert_ne!(a.graph, c.graph);
    }

    #[test]
    fn sbm_is_assortative() {
        let (g, labels) = sbm_graph(&SbmConfig::new(400, 4, 0.1, 0.005, 1)).unwrap();
        let inside = g
            .undirected_edges()
            .filter(|&(u, v)| labels[u as usize] == labels[v as usize])
            .count();
        assert!(inside * 2 > g.num_undirected_edges());
        assert_eq!(labels.iter().filter(|&&c| c == 3).count(), 100);
    }

    #[test]
    fn stratified_split_proportions() {
        let labels: Vec<u32> = (0..100).map(|i| (i % 4) as u32).collect();
        let s = stratified_split(&labels, 4, 0.6, 0.2, 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (60, 20, 20));
        for c in 0..4 {
            assert_eq!(
                s.train.iter().filter(|&&n| labels[n as usize] == c).count(),
                15
            );
        }
    }

    #[test]
    fn per_class_split_counts() {
        let labels: Vec<u32> = (0..60).map(|i| (i % 3) as u32).collect();
        let s = per_class_split(&labels, 3, 5, 10, 20, 2).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (15, 10, 20));
        assert!(per_class_split(&labels, 3, 5, 40, 20, 2).is_err());
    }

    #[test]
    fn grid_shape() {
        let g = grid_graph(16, 16).unwrap();
        assert_eq!(g.num_undirected_edges(), 2 * 16 * 15);
        let d = grid_dataset::<f32>(4, 0.1, 1).unwrap();
        assert_eq!(d.labels[..4], [0, 0, 1, 1]);
        assert_eq!(d.labels[15], 3);
    }
}
