use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ModelKind {
    /// `σ(Â H W + b)` per layer with the symmetric GCN operator.
    Gcn,
    /// `Â^K X W + b`: K propagation steps and a single linear layer.
    Sgc,
    /// `σ(M H W + b)` where `M` averages each node with its neighbors.
    SageMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

/// How the full-graph propagation operator is built for an architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Symmetric,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelArch {
    pub kind: ModelKind,
    /// Message-passing depth K (propagation steps for SGC).
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub activation: Activation,
}

impl ModelArch {
    pub fn gcn(in_dim: usize, hidden_dim: usize, out_dim: usize, num_layers: usize) -> Self {
        Self {
            kind: ModelKind::Gcn,
            num_layers,
            hidden_dim,
            in_dim,
            out_dim,
            activation: Activation::Relu,
        }
    }

    pub fn sgc(in_dim: usize, out_dim: usize, hops: usize) -> Self {
        Self {
            kind: ModelKind::Sgc,
            num_layers: hops,
            hidden_dim: out_dim,
            in_dim,
            out_dim,
            activation: Activation::Identity,
        }
    }

    pub fn sage_mean(in_dim: usize, hidden_dim: usize, out_dim: usize, num_layers: usize) -> Self {
        Self {
            kind: ModelKind::SageMean,
            ..Self::gcn(in_dim, hidden_dim, out_dim, num_layers)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::InvalidConfig("num_layers must be >= 1".into()));
        }
        if self.in_dim == 0 || self.out_dim == 0 || (self.hidden_dim == 0 && self.num_layers > 1) {
            return Err(Error::InvalidConfig(format!(
                "dimensions must be positive (in {}, hidden {}, out {})",
                self.in_dim, self.hidden_dim, self.out_dim
            )));
        }
        Ok(())
    }

    /// Shapes of the weight matrices, input layer first.
    pub fn weight_shapes(&self) -> Vec<(usize, usize)> {
        match self.kind {
            ModelKind::Sgc => alloc::vec![(self.in_dim, self.out_dim)],
            ModelKind::Gcn | ModelKind::SageMean => (0..self.num_layers)
                .map(|l| {
                    let rows = if l == 0 { self.in_dim } else { self.hidden_dim };
                    let cols = if l + 1 == self.num_layers {
                        self.out_dim
                    } else {
                        self.hidden_dim
                    };
                    (rows, cols)
                })
                .collect(),
        }
    }

    pub fn normalization(&self) -> Normalization {
        match self.kind {
            ModelKind::Gcn | ModelKind::Sgc => Normalization::Symmetric,
            ModelKind::SageMean => Normalization::Mean,
        }
    }
}

/// Per-ingredient training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout_rate: f64,
    /// Target nodes per mini-batch for node / layer sampling; 0 means all.
    pub batch_size: usize,
    pub epochs: usize,
    /// Training seed (batch schedule, sampling, dropout). The initialization
    /// seed is separate and shared by every ingredient of a soup.
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: 5e-4,
            dropout_rate: 0.5,
            batch_size: 0,
            epochs: 200,
            seed: 1,
        }
    }
}

impl Hyperparams {
    /// `epochs = 0` is accepted and means "no training".
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "weight_decay must be finite and non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}
