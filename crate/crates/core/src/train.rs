//! Ingredient training over a shared, read-only training context.
//!
//! A [`TrainContext`] holds everything derived once from the dataset (the
//! normalized operator, SGC features, importance weights, the partition).
//! Each [`Trainer`] exclusively owns one model and its optimizer state, so
//! many trainers can run against the same context from different threads.

use alloc::borrow::Cow;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Graph, Subgraph};
use crate::matrix::Matrix;
use crate::nn::{
    accuracy, forward, sgc_precompute, train_step, Adam, Batch, Hyperparams, Mode, ModelArch,
    ModelKind, ModelParams, Normalization,
};
use crate::partition::{epoch_cluster_groups, induce_clusters, ClusterBatchConfig, PartitionMap};
use crate::real::Real;
use crate::rng::{stream_rng, Stream};
use crate::sampling::{
    layer_importance, sample_layer_wise, sample_node_wise, EdgeSampler, LayeredBlocks,
    SamplerConfig, SamplerKind,
};
use crate::soup::Ingredient;
use crate::sparse::SparseMatrix;

/// Where an ingredient's training batches come from.
#[derive(Debug, Clone, PartialEq)]
pub enum BatchPlan {
    FullBatch,
    Sampled(SamplerConfig),
    Partition(ClusterBatchConfig),
}

/// Read-only state shared by every ingredient trained on one dataset.
#[derive(Debug)]
pub struct TrainContext<'d, T> {
    data: &'d Dataset<T>,
    arch: ModelArch,
    plan: BatchPlan,
    norm_graph: Graph,
    full_op: SparseMatrix,
    sgc_features: Option<Matrix<T>>,
    importance: Vec<f64>,
    edges: Option<EdgeSampler<'d>>,
    partition: Option<PartitionMap>,
    is_train: Vec<bool>,
}

/// One unit of an epoch's schedule.
#[derive(Debug, Clone, PartialEq)]
enum Step {
    Full,
    Targets(Vec<u32>),
    Edges,
    Clusters(Vec<u32>),
}

impl<'d, T: Real> TrainContext<'d, T> {
    /// `partition` is required for [`BatchPlan::Partition`] and ignored otherwise.
    pub fn new(
        data: &'d Dataset<T>,
        arch: ModelArch,
        plan: BatchPlan,
        partition: Option<PartitionMap>,
    ) -> Result<Self> {
        arch.validate()?;
        if arch.in_dim != data.num_features() {
            return Err(Error::DimensionMismatch {
                context: "model input dim vs features",
                expected: data.num_features(),
                actual: arch.in_dim,
            });
        }
        if arch.out_dim != data.num_classes {
            return Err(Error::DimensionMismatch {
                context: "model output dim vs classes",
                expected: data.num_classes,
                actual: arch.out_dim,
            });
        }
        let norm_graph = normalize(&data.graph, arch.normalization());
        let full_op = SparseMatrix::from(&norm_graph);
        let sgc_features = match arch.kind {
            ModelKind::Sgc => Some(sgc_precompute(
                &norm_graph,
                &data.features,
                arch.num_layers,
            )?),
            _ => None,
        };
        let mut importance = Vec::new();
        let mut edges = None;
        let partition = match &plan {
            BatchPlan::FullBatch => None,
            BatchPlan::Sampled(cfg) => {
                cfg.validate(arch.num_layers)?;
                match cfg.kind {
                    SamplerKind::Layer => importance = layer_importance(&norm_graph),
                    SamplerKind::Edge => edges = Some(EdgeSampler::new(&data.graph)),
                    SamplerKind::Node => {}
                }
                None
            }
            BatchPlan::Partition(cfg) => {
                let p = partition.ok_or_else(|| {
                    Error::InvalidConfig("partition plan needs a partition map".into())
                })?;
                p.validate(data.num_nodes())?;
                cfg.validate(p.num_clusters)?;
                Some(p)
            }
        };
        let mut is_train = vec![false; data.num_nodes()];
        for &n in &data.splits.train {
            is_train[n as usize] = true;
        }
        Ok(Self {
            data,
            arch,
            plan,
            norm_graph,
            full_op,
            sgc_features,
            importance,
            edges,
            partition,
            is_train,
        })
    }

    pub fn data(&self) -> &'d Dataset<T> {
        self.data
    }

    pub fn arch(&self) -> &ModelArch {
        &self.arch
    }

    pub fn plan(&self) -> &BatchPlan {
        &self.plan
    }

    pub fn partition(&self) -> Option<&PartitionMap> {
        self.partition.as_ref()
    }

    /// Full-graph normalized adjacency used for evaluation.
    pub fn normalized_graph(&self) -> &Graph {
        &self.norm_graph
    }

    /// Operators and input features for full-graph inference.
    pub fn eval_inputs(&self) -> (Vec<&SparseMatrix>, &Matrix<T>) {
        match &self.sgc_features {
            Some(f) => (Vec::new(), f),
            None => (
                vec![&self.full_op; self.arch.num_layers],
                &self.data.features,
            ),
        }
    }

    /// Eval-mode logits for every node.
    pub fn logits(&self, params: &ModelParams<T>) -> Result<Matrix<T>> {
        let (ops, x) = self.eval_inputs();
        forward(params, &ops, x, Mode::Eval)
    }

    pub fn accuracy_on(&self, params: &ModelParams<T>, nodes: &[u32]) -> Result<f64> {
        accuracy(&self.logits(params)?, &self.data.labels, nodes)
    }

    pub fn val_acc(&self, params: &ModelParams<T>) -> Result<f64> {
        self.accuracy_on(params, &self.data.splits.val)
    }

    pub fn test_acc(&self, params: &ModelParams<T>) -> Result<f64> {
        self.accuracy_on(params, &self.data.splits.test)
    }

    fn schedule(&self, hyper: &Hyperparams, epoch: u64) -> Vec<Step> {
        let mut rng = stream_rng(hyper.seed, Stream::Schedule, epoch, 0);
        match &self.plan {
            BatchPlan::FullBatch => vec![Step::Full],
            BatchPlan::Sampled(cfg) if cfg.kind == SamplerKind::Edge => {
                let e = self.edges.as_ref().map_or(0, EdgeSampler::num_edges);
                vec![Step::Edges; e.div_ceil(cfg.edge_budget).max(1)]
            }
            BatchPlan::Sampled(_) => {
                let mut train = self.data.splits.train.clone();
                train.shuffle(&mut rng);
                let bs = if hyper.batch_size == 0 {
                    train.len()
                } else {
                    hyper.batch_size
                };
                train
                    .chunks(bs.max(1))
                    .map(|c| {
                        let mut c = c.to_vec();
                        c.sort_unstable();
                        Step::Targets(c)
                    })
                    .collect()
            }
            BatchPlan::Partition(cfg) => {
                let k = self.partition.as_ref().map_or(1, |p| p.num_clusters);
                epoch_cluster_groups(k, cfg, &mut rng)
                    .into_iter()
                    .map(Step::Clusters)
                    .collect()
            }
        }
    }

    /// Builds the batch for one schedule step; `None` if it holds no training node.
    fn build(
        &self,
        step: &Step,
        hyper: &Hyperparams,
        epoch: u64,
        idx: usize,
    ) -> Result<Option<Batch<'_, T>>> {
        let mut rng = stream_rng(hyper.seed, Stream::Sample, epoch, idx as u64);
        let depth = self.arch.num_layers;
        match (step, &self.plan) {
            (Step::Full, _) => {
                let (ops, x) = self.eval_inputs();
                Ok(Some(Batch {
                    ops: ops.into_iter().map(Cow::Borrowed).collect(),
                    features: Cow::Borrowed(x),
                    labels: Cow::Borrowed(&self.data.labels),
                    loss_rows: self.data.splits.train.clone(),
                }))
            }
            (Step::Targets(targets), BatchPlan::Sampled(cfg)) => {
                let blocks = match cfg.kind {
                    SamplerKind::Node => {
                        sample_node_wise(&self.data.graph, targets, cfg.fanout, depth, &mut rng)?
                    }
                    _ => sample_layer_wise(
                        &self.norm_graph,
                        &self.importance,
                        targets,
                        &cfg.layer_sizes,
                        cfg.layer_scope,
                        &mut rng,
                    )?,
                };
                Ok(Some(self.block_batch(blocks)))
            }
            (Step::Edges, BatchPlan::Sampled(cfg)) => {
                let sampler = self
                    .edges
                    .as_ref()
                    .expect("edge sampler built for edge plan");
                let sample = sampler.sample(cfg.edge_budget, &mut rng)?;
                Ok(self.subgraph_batch(sample.subgraph))
            }
            (Step::Clusters(clusters), BatchPlan::Partition(_)) => {
                let p = self
                    .partition
                    .as_ref()
                    .expect("partition present for partition plan");
                Ok(self.subgraph_batch(induce_clusters(&self.data.graph, p, clusters)?))
            }
            _ => unreachable!("schedule steps always match the plan"),
        }
    }

    fn block_batch(&self, blocks: LayeredBlocks) -> Batch<'_, T> {
        let targets = &blocks.nodes[0];
        let labels = targets
            .iter()
            .map(|&n| self.data.labels[n as usize])
            .collect::<Vec<_>>();
        let features = self.data.features.gather_rows(blocks.input_nodes());
        let loss_rows = (0..targets.len() as u32).collect();
        Batch {
            ops: blocks.layer_ops().cloned().map(Cow::Owned).collect(),
            features: Cow::Owned(features),
            labels: Cow::Owned(labels),
            loss_rows,
        }
    }

    fn subgraph_batch(&self, sub: Subgraph) -> Option<Batch<'_, T>> {
        let loss_rows: Vec<u32> = sub
            .nodes
            .iter()
            .enumerate()
            .filter(|&(_, &n)| self.is_train[n as usize])
            .map(|(i, _)| i as u32)
            .collect();
        if loss_rows.is_empty() {
            return None;
        }
        let op = SparseMatrix::from(&normalize(&sub.graph, self.arch.normalization()));
        let labels = sub
            .nodes
            .iter()
            .map(|&n| self.data.labels[n as usize])
            .collect::<Vec<_>>();
        Some(Batch {
            ops: vec![Cow::Owned(op); self.arch.num_layers],
            features: Cow::Owned(self.data.features.gather_rows(&sub.nodes)),
            labels: Cow::Owned(labels),
            loss_rows,
        })
    }
}

fn normalize(g: &Graph, n: Normalization) -> Graph {
    match n {
        Normalization::Symmetric => g.sym_normalize(),
        Normalization::Mean => g.mean_normalize(),
    }
}

/// Batch-size statistics accumulated over a training run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BatchStats {
    pub batches: usize,
    /// Batches dropped because they held no training node.
    pub skipped: usize,
    pub input_nodes: usize,
    pub output_nodes: usize,
    pub nnz: usize,
}

impl BatchStats {
    pub fn mean_input_nodes(&self) -> f64 {
        self.input_nodes as f64 / self.batches.max(1) as f64
    }

    pub fn mean_nnz(&self) -> f64 {
        self.nnz as f64 / self.batches.max(1) as f64
    }

    pub fn merge(&mut self, other: &BatchStats) {
        self.batches += other.batches;
        self.skipped += other.skipped;
        self.input_nodes += other.input_nodes;
        self.output_nodes += other.output_nodes;
        self.nnz += other.nnz;
    }
}

/// One model, its optimizer state and its position in the epoch budget.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub params: ModelParams<T>,
    pub hyper: Hyperparams,
    opt: Adam<T>,
    epoch: u64,
    pub last_loss: f64,
    pub stats: BatchStats,
}

impl<T: Real> Trainer<T> {
    pub fn new(params: ModelParams<T>, hyper: Hyperparams) -> Result<Self> {
        hyper.validate()?;
        Ok(Self {
            opt: Adam::new(&params),
            params,
            hyper,
            epoch: 0,
            last_loss: f64::NAN,
            stats: BatchStats::default(),
        })
    }

    pub fn epochs_done(&self) -> u64 {
        self.epoch
    }

    /// Swaps in new parameters and keeps the optimizer moments.
    pub fn replace_params(&mut self, params: ModelParams<T>) -> Result<()> {
        self.params.check_compatible(&params)?;
        self.params = params;
        Ok(())
    }

    pub fn run_epochs(&mut self, ctx: &TrainContext<'_, T>, n: usize) -> Result<()> {
        if self.params.arch != ctx.arch {
            return Err(Error::ArchMismatch(format!(
                "{:?} vs {:?}",
                self.params.arch, ctx.arch
            )));
        }
        for _ in 0..n {
            let epoch = self.epoch;
            for (idx, step) in ctx.schedule(&self.hyper, epoch).iter().enumerate() {
                let Some(batch) = ctx.build(step, &self.hyper, epoch, idx)? else {
                    self.stats.skipped += 1;
                    continue;
                };
                self.stats.batches += 1;
                self.stats.input_nodes += batch.features.rows();
                self.stats.output_nodes += batch.num_output_rows();
                self.stats.nnz += batch.ops.iter().map(|o| o.nnz()).sum::<usize>();
                let mut dropout = stream_rng(self.hyper.seed, Stream::Dropout, epoch, idx as u64);
                self.last_loss = train_step(
                    &mut self.params,
                    &mut self.opt,
                    &batch,
                    &self.hyper,
                    &mut dropout,
                )
                .map_err(|e| match e {
                    Error::NonFinite(what) => Error::Diverged {
                        epoch,
                        step: idx,
                        what,
                    },
                    other => other,
                })?;
            }
            self.epoch += 1;
        }
        Ok(())
    }

    /// Runs whatever is left of `hyper.epochs`.
    pub fn finish(&mut self, ctx: &TrainContext<'_, T>) -> Result<()> {
        let left = (self.hyper.epochs as u64).saturating_sub(self.epoch);
        self.run_epochs(ctx, left as usize)
    }
}

/// Trains from `init` for `hyper.epochs` epochs and records validation
/// accuracy with full-graph inference.
pub fn train_ingredient<T: Real>(
    ctx: &TrainContext<'_, T>,
    id: usize,
    init: &ModelParams<T>,
    hyper: &Hyperparams,
) -> Result<(Ingredient<T>, BatchStats)> {
    let mut trainer = Trainer::new(init.clone(), hyper.clone())?;
    trainer.finish(ctx)?;
    let ingredient = finish_ingredient(ctx, id, init, trainer.params, hyper.clone())?;
    Ok((ingredient, trainer.stats))
}

/// Wraps trained parameters into an [`Ingredient`].
pub fn finish_ingredient<T: Real>(
    ctx: &TrainContext<'_, T>,
    id: usize,
    init: &ModelParams<T>,
    params: ModelParams<T>,
    hyper: Hyperparams,
) -> Result<Ingredient<T>> {
    let val_acc = ctx.val_acc(&params)?;
    Ok(Ingredient {
        id,
        params,
        hyper,
        val_acc,
        init_fingerprint: init.fingerprint(),
    })
}
