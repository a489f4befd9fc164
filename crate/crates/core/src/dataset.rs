use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::real::Real;

/// Disjoint, sorted train / validation / test node-id sets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitSet {
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

impl SplitSet {
    /// Sorts each set and checks disjointness, range and a non-empty validation set.
    pub fn new(
        mut train: Vec<u32>,
        mut val: Vec<u32>,
        mut test: Vec<u32>,
        num_nodes: usize,
    ) -> Result<Self> {
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        let split = Self { train, val, test };
        split.validate(num_nodes)?;
        Ok(split)
    }

    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if self.val.is_empty() {
            return Err(Error::InvalidSplit(String::from("validation set is empty")));
        }
        let mut owner = alloc::vec![0u8; num_nodes];
        for (tag, (name, ids)) in [
            ("train", &self.train),
            ("val", &self.val),
            ("test", &self.test),
        ]
        .into_iter()
        .enumerate()
        {
            if ids.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidSplit(format!(
                    "{name} ids are not sorted and unique"
                )));
            }
            for &id in ids.iter() {
                let slot = owner.get_mut(id as usize).ok_or(Error::NodeOutOfRange {
                    id: id as usize,
                    num_nodes,
                })?;
                if *slot != 0 {
                    return Err(Error::InvalidSplit(format!(
                        "node {id} appears in more than one split"
                    )));
                }
                *slot = tag as u8 + 1;
            }
        }
        Ok(())
    }
}

/// Graph, features, labels and splits of one node-classification task.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    pub graph: Graph,
    pub features: Matrix<T>,
    pub labels: Vec<u32>,
    pub num_classes: usize,
    pub splits: SplitSet,
}

impl<T: Real> Dataset<T> {
    pub fn new(
        graph: Graph,
        features: Matrix<T>,
        labels: Vec<u32>,
        num_classes: usize,
        splits: SplitSet,
    ) -> Result<Self> {
        let n = graph.num_nodes();
        if features.rows() != n {
            return Err(Error::DimensionMismatch {
                context: "feature rows vs nodes",
                expected: n,
                actual: features.rows(),
            });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                context: "label count vs nodes",
                expected: n,
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::InvalidConfig(format!(
                "label {bad} outside {num_classes} classes"
            )));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("features"));
        }
        splits.validate(n)?;
        Ok(Self {
            graph,
            features,
            labels,
            num_classes,
            splits,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn cast<U: Real>(&self) -> Dataset<U> {
        Dataset {
            graph: self.graph.clone(),
            features: self.features.cast(),
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            splits: self.splits.clone(),
        }
    }
}
