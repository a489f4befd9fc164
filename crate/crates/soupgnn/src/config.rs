//! TOML run configuration and per-mode defaults.
//!
//! Every key is optional; anything missing falls back to the preset of the
//! chosen `mode` (see [`Preset::for_mode`]). Unknown keys are rejected.
//! Relative paths are resolved against the config file's directory.
//!
//! ```toml
//! dataset = "data/sbm"
//! output = "runs/sbm"
//! mode = "node-sample"
//! ingredient_count = 10
//! worker_count = 4
//!
//! [model]
//! kind = "sage-mean"
//! hidden_dim = 64
//!
//! [hyper]
//! epochs = 20
//!
//! [grid]
//! learning_rate = [0.001, 0.01]
//! dropout_rate = [0.2, 0.5]
//!
//! [sampler]
//! kind = "node"
//! fanout = 5
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use soupgnn_core::nn::{Activation, Hyperparams, ModelArch, ModelKind};
use soupgnn_core::sampling::SamplerConfig;
use soupgnn_core::soup::SoupConfig;
use soupgnn_core::Dataset;

use crate::checkpoint::Precision;
use crate::error::{self, IoError};
use crate::orchestrator::{
    default_sampler, hyper_grid_expand, GridAxes, MergeOrder, PartitionSettings, PipelineConfig,
    PipelineMode, PipelineResult,
};

/// Architecture without the dataset-dependent input and output widths.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Option<ModelKind>,
    pub hidden_dim: Option<usize>,
    pub num_layers: Option<usize>,
    pub activation: Option<Activation>,
}

/// Overrides of the preset's base hyperparameters. `seed` is not here: the
/// grid assigns training seeds `1..=ingredient_count`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub dropout_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Defaults to f32.
    pub precision: Option<Precision>,
    /// Saved partition to use in partition mode; created there if missing,
    /// otherwise written to `<output>/partition`.
    pub partition_dir: Option<PathBuf>,
    /// Defaults to full-batch.
    pub mode: Option<PipelineMode>,
    /// Defaults to 50.
    pub ingredient_count: Option<usize>,
    /// Defaults to 1.
    pub worker_count: Option<usize>,
    /// Defaults to 0.
    pub shared_init_seed: Option<u64>,
    /// Epochs between synchronizations; absent means communication-free.
    pub comm_interval: Option<usize>,
    pub merge_order: Option<MergeOrder>,
    pub model: Option<ModelSection>,
    pub hyper: Option<HyperSection>,
    /// Axes swept around the base hyperparameters.
    pub grid: Option<GridAxes>,
    /// Explicit per-ingredient settings; takes precedence over `grid`.
    pub hyper_grid: Option<Vec<Hyperparams>>,
    pub sampler: Option<SamplerConfig>,
    pub partition: Option<PartitionSettings>,
    pub soup: Option<SoupConfig>,
}

macro_rules! or_fields {
    ($a:ident, $b:ident, $($f:ident),*) => {
        RunConfig { $($f: $a.$f.or($b.$f)),* }
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = error::read_string(path)?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start].matches('\n').count() + 1);
            IoError::parse(path, line, e.message().to_string())
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.dataset, &mut cfg.output, &mut cfg.partition_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Field-wise: values set here win over `other`.
    pub fn or(self, other: RunConfig) -> RunConfig {
        let a = self;
        let b = other;
        or_fields!(
            a,
            b,
            dataset,
            output,
            precision,
            partition_dir,
            mode,
            ingredient_count,
            worker_count,
            shared_init_seed,
            comm_interval,
            merge_order,
            model,
            hyper,
            grid,
            hyper_grid,
            sampler,
            partition,
            soup
        )
    }

    pub fn mode(&self) -> PipelineMode {
        self.mode.unwrap_or(PipelineMode::FullBatch)
    }

    /// Fills every gap from the mode's preset and sizes the model to `data`.
    pub fn pipeline_config<T: soupgnn_core::Real>(
        &self,
        data: &Dataset<T>,
    ) -> PipelineResult<PipelineConfig> {
        let mode = self.mode();
        let preset = Preset::for_mode(mode);
        let m = self.model.clone().unwrap_or_default();
        let arch = ModelArch {
            kind: m.kind.unwrap_or(preset.kind),
            num_layers: m.num_layers.unwrap_or(preset.num_layers),
            hidden_dim: m.hidden_dim.unwrap_or(preset.hidden_dim),
            in_dim: data.features.cols(),
            out_dim: data.num_classes,
            activation: m.activation.unwrap_or_default(),
        };
        let h = self.hyper.clone().unwrap_or_default();
        let base = Hyperparams {
            learning_rate: h.learning_rate.unwrap_or(preset.hyper.learning_rate),
            weight_decay: h.weight_decay.unwrap_or(preset.hyper.weight_decay),
            dropout_rate: h.dropout_rate.unwrap_or(preset.hyper.dropout_rate),
            batch_size: h.batch_size.unwrap_or(preset.hyper.batch_size),
            epochs: h.epochs.unwrap_or(preset.hyper.epochs),
            seed: 1,
        };
        let count = self.ingredient_count.unwrap_or(50);
        let hyper_grid = match (&self.hyper_grid, &self.grid) {
            (Some(list), _) => list.clone(),
            (None, Some(axes)) if !axes.is_empty() => hyper_grid_expand(&base, axes, count)?,
            _ => {
                let seeds_only = GridAxes {
                    learning_rate: vec![base.learning_rate],
                    ..GridAxes::default()
                };
                hyper_grid_expand(&base, &seeds_only, count)?
            }
        };
        let sampler = mode.sampler_kind().map(|kind| {
            self.sampler
                .clone()
                .unwrap_or_else(|| default_sampler(kind, arch.num_layers))
        });
        let cfg = PipelineConfig {
            ingredient_count: count,
            worker_count: self.worker_count.unwrap_or(1),
            mode,
            arch,
            hyper_grid,
            shared_init_seed: self.shared_init_seed.unwrap_or(0),
            sampler,
            partition: (mode == PipelineMode::Partition)
                .then(|| self.partition.clone().unwrap_or_default()),
            comm_interval: self.comm_interval,
            soup: self.soup.clone().unwrap_or_default(),
            merge_order: self.merge_order.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Mode defaults. Sampling modes follow the large-graph settings of the
/// corresponding published recipes (GraphSAGE for node sampling, LADIES for
/// layer sampling, GraphSAINT for edge sampling, Cluster-GCN for partitions);
/// full-batch is the usual 2-layer GCN recipe. Samplers come from
/// [`default_sampler`].
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub kind: ModelKind,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub hyper: Hyperparams,
}

impl Preset {
    pub fn for_mode(mode: PipelineMode) -> Self {
        let hyper = |learning_rate, weight_decay, dropout_rate, epochs, batch_size| Hyperparams {
            learning_rate,
            weight_decay,
            dropout_rate,
            batch_size,
            epochs,
            seed: 1,
        };
        match mode {
            PipelineMode::FullBatch => Preset {
                kind: ModelKind::Gcn,
                hidden_dim: 64,
                num_layers: 2,
                hyper: hyper(0.01, 5e-4, 0.5, 200, 0),
            },
            PipelineMode::NodeSample => Preset {
                kind: ModelKind::SageMean,
                hidden_dim: 512,
                num_layers: 4,
                hyper: hyper(0.001, 0.0, 0.5, 50, 1000),
            },
            PipelineMode::LayerSample => Preset {
                kind: ModelKind::Gcn,
                hidden_dim: 256,
                num_layers: 2,
                hyper: hyper(0.01, 0.0, 0.2, 30, 5000),
            },
            PipelineMode::EdgeSample => Preset {
                kind: ModelKind::Gcn,
                hidden_dim: 128,
                num_layers: 2,
                hyper: hyper(0.01, 0.0, 0.2, 40, 0),
            },
            PipelineMode::Partition => Preset {
                kind: ModelKind::Gcn,
                hidden_dim: 128,
                num_layers: 4,
                hyper: hyper(0.001, 1e-4, 0.2, 40, 0),
            },
        }
    }
}
