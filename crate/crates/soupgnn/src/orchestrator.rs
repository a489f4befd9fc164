//! Communication-free ingredient training over a worker pool, incremental
//! souping, and the periodic-synchronization ablation.
//!
//! Ingredients are dequeued in rounds of `worker_count`. Each worker thread
//! owns one training job outright and hands the finished ingredient to the
//! coordinator over a channel; nothing else is shared except the read-only
//! [`TrainContext`]. Because an ingredient is a pure function of
//! `(dataset, arch, shared init, its Hyperparams)`, the trained parameters do
//! not depend on how many workers ran or in which order they finished.

use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use soupgnn_core::nn::{Hyperparams, ModelArch, ModelParams};
use soupgnn_core::partition::{partition_graph, ClusterBatchConfig, PartitionMap};
use soupgnn_core::sampling::{SamplerConfig, SamplerKind};
use soupgnn_core::soup::{
    ensemble_eval, greedy_soup, incremental_soup, Ingredient, SoupConfig, SoupState,
};
use soupgnn_core::train::{
    finish_ingredient, train_ingredient, BatchPlan, BatchStats, TrainContext, Trainer,
};
use soupgnn_core::{Dataset, Error, Real};

use crate::checkpoint::Precision;
use crate::report::{
    Accuracy, BestSingle, CommunicationReport, IngredientRecord, IngredientStatus, PartitionInfo,
    SamplerStats, SoupReport, SoupSummary, Timing,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error("all {0} ingredients diverged")]
    AllDiverged(usize),
}

pub type PipelineResult<T> = Result<T, PipelineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineMode {
    FullBatch,
    NodeSample,
    EdgeSample,
    LayerSample,
    Partition,
}

impl PipelineMode {
    pub const ALL: [PipelineMode; 5] = [
        PipelineMode::FullBatch,
        PipelineMode::NodeSample,
        PipelineMode::EdgeSample,
        PipelineMode::LayerSample,
        PipelineMode::Partition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PipelineMode::FullBatch => "full-batch",
            PipelineMode::NodeSample => "node-sample",
            PipelineMode::EdgeSample => "edge-sample",
            PipelineMode::LayerSample => "layer-sample",
            PipelineMode::Partition => "partition",
        }
    }

    pub fn sampler_kind(self) -> Option<SamplerKind> {
        match self {
            PipelineMode::NodeSample => Some(SamplerKind::Node),
            PipelineMode::EdgeSample => Some(SamplerKind::Edge),
            PipelineMode::LayerSample => Some(SamplerKind::Layer),
            _ => None,
        }
    }
}

/// Cluster count and batch composition for partition mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSettings {
    #[serde(default = "default_clusters")]
    pub num_clusters: usize,
    #[serde(default = "default_q")]
    pub q: usize,
    #[serde(default)]
    pub single_batch_per_epoch: bool,
}

fn default_clusters() -> usize {
    32
}

fn default_q() -> usize {
    2
}

impl Default for PartitionSettings {
    fn default() -> Self {
        Self {
            num_clusters: default_clusters(),
            q: default_q(),
            single_batch_per_epoch: false,
        }
    }
}

impl PartitionSettings {
    pub fn batch_config(&self) -> ClusterBatchConfig {
        ClusterBatchConfig {
            q: self.q,
            single_batch_per_epoch: self.single_batch_per_epoch,
        }
    }
}

/// Order in which completed ingredients enter the soup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeOrder {
    /// After each round, merge its ingredients one at a time by index. The
    /// final soup is then the same for every worker count.
    #[default]
    Index,
    /// After each round, merge the whole round in one greedy pass, in the
    /// order the workers finished.
    Arrival,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub ingredient_count: usize,
    pub worker_count: usize,
    pub mode: PipelineMode,
    pub arch: ModelArch,
    /// Cycled when shorter than `ingredient_count`.
    pub hyper_grid: Vec<Hyperparams>,
    pub shared_init_seed: u64,
    /// Defaults to [`default_sampler`] for sampling modes.
    pub sampler: Option<SamplerConfig>,
    pub partition: Option<PartitionSettings>,
    /// Epochs between synchronizations; `None` is communication-free.
    pub comm_interval: Option<usize>,
    pub soup: SoupConfig,
    pub merge_order: MergeOrder,
}

impl PipelineConfig {
    pub fn new(
        mode: PipelineMode,
        arch: ModelArch,
        hyper_grid: Vec<Hyperparams>,
        ingredient_count: usize,
    ) -> Self {
        Self {
            ingredient_count,
            worker_count: 1,
            mode,
            arch,
            hyper_grid,
            shared_init_seed: 0,
            sampler: None,
            partition: None,
            comm_interval: None,
            soup: SoupConfig::default(),
            merge_order: MergeOrder::Index,
        }
    }

    pub fn validate(&self) -> PipelineResult<()> {
        if self.ingredient_count == 0 {
            return Err(PipelineError::Config(
                "ingredient_count must be at least 1".into(),
            ));
        }
        if self.worker_count == 0 {
            return Err(PipelineError::Config(
                "worker_count must be at least 1".into(),
            ));
        }
        if self.hyper_grid.is_empty() {
            return Err(PipelineError::Config("hyper_grid is empty".into()));
        }
        if self.comm_interval == Some(0) {
            return Err(PipelineError::Config(
                "comm_interval must be at least 1".into(),
            ));
        }
        if let (Some(s), Some(kind)) = (&self.sampler, self.mode.sampler_kind()) {
            if s.kind != kind {
                return Err(PipelineError::Config(format!(
                    "sampler kind {:?} does not match mode {}",
                    s.kind,
                    self.mode.name()
                )));
            }
        }
        for h in &self.hyper_grid {
            h.validate()?;
        }
        self.arch.validate()?;
        self.soup.alphas()?;
        Ok(())
    }

    /// The hyperparameters of ingredient `i`.
    pub fn hyper(&self, i: usize) -> &Hyperparams {
        &self.hyper_grid[i % self.hyper_grid.len()]
    }

    pub fn sampler_config(&self) -> Option<SamplerConfig> {
        let kind = self.mode.sampler_kind()?;
        Some(
            self.sampler
                .clone()
                .unwrap_or_else(|| default_sampler(kind, self.arch.num_layers)),
        )
    }

    pub fn partition_settings(&self) -> Option<PartitionSettings> {
        (self.mode == PipelineMode::Partition).then(|| self.partition.clone().unwrap_or_default())
    }

    fn plan(&self) -> BatchPlan {
        match self.mode {
            PipelineMode::FullBatch => BatchPlan::FullBatch,
            PipelineMode::Partition => {
                BatchPlan::Partition(self.partition_settings().unwrap_or_default().batch_config())
            }
            _ => BatchPlan::Sampled(self.sampler_config().expect("sampling mode")),
        }
    }
}

/// Sampler used when a sampling mode is configured without one: fanout 10,
/// 5000 edges per batch, or 512 nodes per layer.
pub fn default_sampler(kind: SamplerKind, depth: usize) -> SamplerConfig {
    match kind {
        SamplerKind::Node => SamplerConfig::node(10),
        SamplerKind::Edge => SamplerConfig::edge(5000),
        SamplerKind::Layer => SamplerConfig::layer(vec![512; depth]),
    }
}

/// Values swept per hyperparameter; an empty axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxes {
    #[serde(default)]
    pub learning_rate: Vec<f64>,
    #[serde(default)]
    pub weight_decay: Vec<f64>,
    #[serde(default)]
    pub dropout_rate: Vec<f64>,
    #[serde(default)]
    pub batch_size: Vec<usize>,
}

impl GridAxes {
    pub fn is_empty(&self) -> bool {
        self.learning_rate.is_empty()
            && self.weight_decay.is_empty()
            && self.dropout_rate.is_empty()
            && self.batch_size.is_empty()
    }
}

/// Cartesian product of the axes (learning rate outermost, batch size
/// fastest), cycled or truncated to `count` entries. Entry `i` gets training
/// seed `i + 1`; the initialization seed is not part of `Hyperparams`.
pub fn hyper_grid_expand(
    base: &Hyperparams,
    axes: &GridAxes,
    count: usize,
) -> PipelineResult<Vec<Hyperparams>> {
    if axes.is_empty() {
        return Err(PipelineError::Config(
            "hyperparameter grid has no axes".into(),
        ));
    }
    fn or_base<V: Copy>(axis: &[V], base: V) -> Vec<V> {
        if axis.is_empty() {
            vec![base]
        } else {
            axis.to_vec()
        }
    }
    let lrs = or_base(&axes.learning_rate, base.learning_rate);
    let wds = or_base(&axes.weight_decay, base.weight_decay);
    let dps = or_base(&axes.dropout_rate, base.dropout_rate);
    let bss = or_base(&axes.batch_size, base.batch_size);
    let mut grid = Vec::with_capacity(lrs.len() * wds.len() * dps.len() * bss.len());
    for &learning_rate in &lrs {
        for &weight_decay in &wds {
            for &dropout_rate in &dps {
                for &batch_size in &bss {
                    grid.push(Hyperparams {
                        learning_rate,
                        weight_decay,
                        dropout_rate,
                        batch_size,
                        ..base.clone()
                    });
                }
            }
        }
    }
    Ok((0..count)
        .map(|i| Hyperparams {
            seed: i as u64 + 1,
            ..grid[i % grid.len()].clone()
        })
        .collect())
}

/// Everything a pipeline run produces. `ingredients[i]` is `None` when
/// ingredient `i` diverged.
#[derive(Debug, Clone)]
pub struct PipelineOutput<T> {
    pub report: SoupReport,
    pub ingredients: Vec<Option<Ingredient<T>>>,
    pub soup: SoupState<T>,
    pub partition: Option<PartitionMap>,
}

/// Runs `work` over `jobs` in rounds of `workers` threads and returns the
/// results of each round in the order they finished.
fn run_rounds<J, R, W>(
    jobs: Vec<(usize, J)>,
    workers: usize,
    work: &W,
    mut round_done: impl FnMut(Vec<(usize, R)>) -> PipelineResult<()>,
) -> PipelineResult<()>
where
    J: Send,
    R: Send,
    W: Fn(usize, J) -> R + Sync,
{
    let mut queue = jobs.into_iter().peekable();
    while queue.peek().is_some() {
        let round: Vec<(usize, J)> = queue.by_ref().take(workers).collect();
        let (tx, rx) = mpsc::channel();
        let arrived: Vec<(usize, R)> = std::thread::scope(|s| {
            for (idx, job) in round {
                let tx = tx.clone();
                s.spawn(move || {
                    let _ = tx.send((idx, work(idx, job)));
                });
            }
            drop(tx);
            rx.iter().collect()
        });
        round_done(arrived)?;
    }
    Ok(())
}

struct Finished<T> {
    result: Result<(Ingredient<T>, BatchStats), Error>,
    secs: f64,
}

fn context<'d, T: Real>(
    data: &'d Dataset<T>,
    cfg: &PipelineConfig,
    partition: Option<PartitionMap>,
) -> PipelineResult<(TrainContext<'d, T>, Option<PartitionMap>)> {
    cfg.validate()?;
    let partition = match cfg.partition_settings() {
        Some(s) => Some(match partition {
            Some(p) if p.num_clusters == s.num_clusters => p,
            Some(p) => {
                return Err(PipelineError::Config(format!(
                    "partition has {} clusters, config asks for {}",
                    p.num_clusters, s.num_clusters
                )))
            }
            None => partition_graph(&data.graph, s.num_clusters)?,
        }),
        None => None,
    };
    let ctx = TrainContext::new(data, cfg.arch.clone(), cfg.plan(), partition.clone())?;
    Ok((ctx, partition))
}

/// Merges completed ingredients into the running soup per `order`.
struct Merger<'c, 'd, T> {
    ctx: &'c TrainContext<'d, T>,
    cfg: &'c PipelineConfig,
    state: Option<SoupState<T>>,
}

impl<T: Real> Merger<'_, '_, T> {
    fn merge(&mut self, mut batch: Vec<&Ingredient<T>>) -> PipelineResult<()> {
        let val = |p: &ModelParams<T>| self.ctx.val_acc(p);
        match self.cfg.merge_order {
            MergeOrder::Index => {
                batch.sort_by_key(|i| i.id);
                for ing in batch {
                    self.state = incremental_soup(
                        self.state.take(),
                        std::slice::from_ref(ing),
                        &self.cfg.soup,
                        val,
                    )?;
                }
            }
            MergeOrder::Arrival => {
                let owned: Vec<Ingredient<T>> = batch.into_iter().cloned().collect();
                self.state = incremental_soup(self.state.take(), &owned, &self.cfg.soup, val)?;
            }
        }
        Ok(())
    }
}

fn diverged(e: &Error) -> bool {
    matches!(e, Error::Diverged { .. })
}

/// Trains `cfg.ingredient_count` ingredients without any communication and
/// soups them. Partition mode partitions the graph when `partition` is `None`.
/// When `cfg.comm_interval` is set this runs the synchronized ablation
/// instead (see [`run_pipeline_with_communication`]).
pub fn run_pipeline<T: Real + Send + Sync>(
    data: &Dataset<T>,
    cfg: &PipelineConfig,
    partition: Option<PartitionMap>,
) -> PipelineResult<PipelineOutput<T>> {
    if cfg.comm_interval.is_some() {
        return run_pipeline_with_communication(data, cfg, partition);
    }
    let started = Instant::now();
    let (ctx, partition) = context(data, cfg, partition)?;
    let init = ModelParams::<T>::init(&cfg.arch, cfg.shared_init_seed)?;
    let n = cfg.ingredient_count;
    let mut finished: Vec<Option<Finished<T>>> = (0..n).map(|_| None).collect();
    let mut merger = Merger {
        ctx: &ctx,
        cfg,
        state: None,
    };
    let work = |idx: usize, hyper: Hyperparams| {
        let t = Instant::now();
        let result = train_ingredient(&ctx, idx, &init, &hyper);
        Finished {
            result,
            secs: t.elapsed().as_secs_f64(),
        }
    };
    let jobs = (0..n).map(|i| (i, cfg.hyper(i).clone())).collect();
    run_rounds(jobs, cfg.worker_count, &work, |arrived| {
        let mut batch = Vec::new();
        for (idx, f) in arrived {
            match &f.result {
                Err(e) if !diverged(e) => return Err(PipelineError::Core(e.clone())),
                _ => {}
            }
            finished[idx] = Some(f);
            batch.push(idx);
        }
        let ingredients = batch
            .iter()
            .filter_map(|&i| {
                finished[i]
                    .as_ref()
                    .and_then(|f| f.result.as_ref().ok())
                    .map(|(ing, _)| ing)
            })
            .collect();
        merger.merge(ingredients)
    })?;
    let soup = merger.state.take().ok_or(PipelineError::AllDiverged(n))?;

    let mut secs = Vec::with_capacity(n);
    let mut ingredients = Vec::with_capacity(n);
    let mut stats = Vec::with_capacity(n);
    let mut errors = Vec::with_capacity(n);
    for f in finished {
        let f = f.expect("every job reports");
        secs.push(f.secs);
        match f.result {
            Ok((ing, s)) => {
                ingredients.push(Some(ing));
                stats.push(Some(s));
                errors.push(None);
            }
            Err(e) => {
                ingredients.push(None);
                stats.push(None);
                errors.push(Some(e.to_string()));
            }
        }
    }
    let report = build_report(
        &ctx,
        cfg,
        &ingredients,
        &stats,
        &errors,
        &soup,
        partition.as_ref(),
        None,
        Timing {
            total_secs: started.elapsed().as_secs_f64(),
            ingredient_secs: secs,
        },
    )?;
    Ok(PipelineOutput {
        report,
        ingredients,
        soup,
        partition,
    })
}

/// Trains all ingredients side by side and, every `comm_interval` epochs
/// before the last, replaces each one's parameters with the greedy soup of
/// all of them (optimizer moments are kept). Afterwards the ingredients are
/// souped as in [`run_pipeline`], and a communication-free run of the same
/// config is made for the report's delta.
pub fn run_pipeline_with_communication<T: Real + Send + Sync>(
    data: &Dataset<T>,
    cfg: &PipelineConfig,
    partition: Option<PartitionMap>,
) -> PipelineResult<PipelineOutput<T>> {
    let interval = cfg
        .comm_interval
        .ok_or_else(|| PipelineError::Config("communication run needs comm_interval".into()))?;
    let started = Instant::now();
    let (ctx, partition) = context(data, cfg, partition)?;
    let init = ModelParams::<T>::init(&cfg.arch, cfg.shared_init_seed)?;
    let n = cfg.ingredient_count;
    let total_epochs = (0..n).map(|i| cfg.hyper(i).epochs).max().unwrap_or(0);

    let mut trainers: Vec<Option<Trainer<T>>> = (0..n)
        .map(|i| Trainer::new(init.clone(), cfg.hyper(i).clone()).map(Some))
        .collect::<Result<_, _>>()?;
    let mut errors: Vec<Option<String>> = vec![None; n];
    let mut secs = vec![0.0; n];
    let mut syncs = 0;
    let mut epoch = 0;
    while epoch < total_epochs {
        let seg = interval.min(total_epochs - epoch);
        let jobs: Vec<(usize, Trainer<T>)> = trainers
            .iter_mut()
            .enumerate()
            .filter_map(|(i, t)| t.take().map(|t| (i, t)))
            .collect();
        let work = |_: usize, mut t: Trainer<T>| {
            let start = Instant::now();
            let left = (t.hyper.epochs as u64).saturating_sub(t.epochs_done()) as usize;
            let r = t.run_epochs(&ctx, seg.min(left));
            (t, r, start.elapsed().as_secs_f64())
        };
        run_rounds(jobs, cfg.worker_count, &work, |arrived| {
            for (idx, (t, r, s)) in arrived {
                secs[idx] += s;
                match r {
                    Ok(()) => trainers[idx] = Some(t),
                    Err(e) if diverged(&e) => errors[idx] = Some(e.to_string()),
                    Err(e) => return Err(e.into()),
                }
            }
            Ok(())
        })?;
        epoch += seg;
        if epoch < total_epochs {
            let current = trainers
                .iter()
                .enumerate()
                .filter_map(|(i, t)| {
                    t.as_ref().map(|t| {
                        finish_ingredient(&ctx, i, &init, t.params.clone(), t.hyper.clone())
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if current.is_empty() {
                break;
            }
            let merged = greedy_soup(&current, &cfg.soup, |p| ctx.val_acc(p))?;
            for t in trainers.iter_mut().flatten() {
                t.replace_params(merged.params.clone())?;
            }
            syncs += 1;
        }
    }

    let mut ingredients = Vec::with_capacity(n);
    let mut stats = Vec::with_capacity(n);
    for (i, t) in trainers.into_iter().enumerate() {
        match t {
            Some(t) => {
                stats.push(Some(t.stats));
                ingredients.push(Some(finish_ingredient(&ctx, i, &init, t.params, t.hyper)?));
            }
            None => {
                stats.push(None);
                ingredients.push(None);
            }
        }
    }
    let mut merger = Merger {
        ctx: &ctx,
        cfg,
        state: None,
    };
    for round in ingredients.chunks(cfg.worker_count) {
        merger.merge(round.iter().flatten().collect())?;
    }
    let soup = merger.state.take().ok_or(PipelineError::AllDiverged(n))?;

    let free_cfg = PipelineConfig {
        comm_interval: None,
        ..cfg.clone()
    };
    let free = run_pipeline(data, &free_cfg, partition.clone())?;
    let soup_val = soup.val_acc;
    let soup_test = ctx.test_acc(&soup.params)?;
    let comm = CommunicationReport {
        interval,
        syncs,
        free_soup: free.report.soup.accuracy,
        delta_val: soup_val - free.report.soup.accuracy.val,
        delta_test: soup_test - free.report.soup.accuracy.test,
    };
    let report = build_report(
        &ctx,
        cfg,
        &ingredients,
        &stats,
        &errors,
        &soup,
        partition.as_ref(),
        Some(comm),
        Timing {
            total_secs: started.elapsed().as_secs_f64(),
            ingredient_secs: secs,
        },
    )?;
    Ok(PipelineOutput {
        report,
        ingredients,
        soup,
        partition,
    })
}

/// Test accuracies are computed here, once, after the soup is final.
#[allow(clippy::too_many_arguments)]
fn build_report<T: Real>(
    ctx: &TrainContext<'_, T>,
    cfg: &PipelineConfig,
    ingredients: &[Option<Ingredient<T>>],
    stats: &[Option<BatchStats>],
    errors: &[Option<String>],
    soup: &SoupState<T>,
    partition: Option<&PartitionMap>,
    communication: Option<CommunicationReport>,
    timing: Timing,
) -> PipelineResult<SoupReport> {
    let data = ctx.data();
    let mut records = Vec::with_capacity(ingredients.len());
    let mut total = BatchStats::default();
    let mut best: Option<BestSingle> = None;
    let mut sum = Accuracy {
        val: 0.0,
        test: 0.0,
    };
    let mut trained = Vec::new();
    for (i, ing) in ingredients.iter().enumerate() {
        let record = match ing {
            Some(ing) => {
                let acc = Accuracy {
                    val: ing.val_acc,
                    test: ctx.test_acc(&ing.params)?,
                };
                sum.val += acc.val;
                sum.test += acc.test;
                if best.as_ref().is_none_or(|b| acc.val > b.accuracy.val) {
                    best = Some(BestSingle {
                        index: i,
                        accuracy: acc,
                    });
                }
                if let Some(s) = &stats[i] {
                    total.merge(s);
                }
                trained.push(&ing.params);
                IngredientRecord {
                    index: i,
                    hyper: ing.hyper.clone(),
                    status: IngredientStatus::Trained,
                    accuracy: Some(acc),
                    error: None,
                    params_fingerprint: Some(ing.params.fingerprint()),
                    batch_stats: stats[i],
                }
            }
            None => IngredientRecord {
                index: i,
                hyper: cfg.hyper(i).clone(),
                status: IngredientStatus::Diverged,
                accuracy: None,
                error: errors[i].clone(),
                params_fingerprint: None,
                batch_stats: None,
            },
        };
        records.push(record);
    }
    let k = trained.len() as f64;
    let (ops, x) = ctx.eval_inputs();
    let ensemble = Accuracy {
        val: ensemble_eval(&trained, &ops, x, &data.labels, &data.splits.val)?,
        test: ensemble_eval(&trained, &ops, x, &data.labels, &data.splits.test)?,
    };
    let sampler_stats = (cfg.mode != PipelineMode::FullBatch).then(|| SamplerStats::from(&total));
    let partition = partition.map(|p| {
        let sizes = p.cluster_sizes();
        PartitionInfo {
            num_clusters: p.num_clusters,
            q: cfg.partition_settings().unwrap_or_default().q,
            edge_cut: p.edge_cut,
            min_cluster: sizes.iter().copied().min().unwrap_or(0),
            max_cluster: sizes.iter().copied().max().unwrap_or(0),
            fingerprint: p.fingerprint(),
        }
    });
    Ok(SoupReport {
        mode: cfg.mode,
        precision: Precision::of::<T>(),
        arch: cfg.arch.clone(),
        ingredient_count: cfg.ingredient_count,
        worker_count: cfg.worker_count,
        shared_init_seed: cfg.shared_init_seed,
        merge_order: cfg.merge_order,
        soup_config: cfg.soup.clone(),
        sampler: cfg.sampler_config(),
        partition,
        ingredients: records,
        soup: SoupSummary {
            accuracy: Accuracy {
                val: soup.val_acc,
                test: ctx.test_acc(&soup.params)?,
            },
            params_fingerprint: soup.params.fingerprint(),
            lineage: soup.lineage.clone(),
        },
        best_single: best.expect("soup exists so some ingredient trained"),
        vanilla_mean: Accuracy {
            val: sum.val / k,
            test: sum.test / k,
        },
        ensemble,
        sampler_stats,
        communication,
        timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use soupgnn_core::synth::{sbm_dataset, SbmConfig};

    fn fixture() -> Dataset<f32> {
        sbm_dataset(&SbmConfig::new(120, 3, 0.15, 0.01, 5)).unwrap()
    }

    fn cfg(data: &Dataset<f32>, count: usize) -> PipelineConfig {
        let arch = ModelArch::gcn(data.num_features(), 8, data.num_classes, 2);
        let base = Hyperparams {
            epochs: 15,
            ..Hyperparams::default()
        };
        let axes = GridAxes {
            learning_rate: vec![0.01, 0.03],
            ..GridAxes::default()
        };
        PipelineConfig::new(
            PipelineMode::FullBatch,
            arch,
            hyper_grid_expand(&base, &axes, count).unwrap(),
            count,
        )
    }

    #[test]
    fn grid_order_and_seeds() {
        let base = Hyperparams::default();
        let axes = GridAxes {
            learning_rate: vec![1e-3, 1e-2],
            dropout_rate: vec![0.2, 0.5],
            ..GridAxes::default()
        };
        let g = hyper_grid_expand(&base, &axes, 6).unwrap();
        let pairs: Vec<(f64, f64, u64)> = g
            .iter()
            .map(|h| (h.learning_rate, h.dropout_rate, h.seed))
            .collect();
        assert_eq!(
            pairs,
            vec![
                (1e-3, 0.2, 1),
                (1e-3, 0.5, 2),
                (1e-2, 0.2, 3),
                (1e-2, 0.5, 4),
                (1e-3, 0.2, 5),
                (1e-3, 0.5, 6)
            ]
        );
        assert!(g.iter().all(|h| h.weight_decay == base.weight_decay));
        assert!(hyper_grid_expand(&base, &GridAxes::default(), 3).is_err());
    }

    #[test]
    fn single_ingredient_soup_is_that_ingredient() {
        let data = fixture();
        let out = run_pipeline(&data, &cfg(&data, 1), None).unwrap();
        let ing = out.ingredients[0].as_ref().unwrap();
        assert_eq!(out.soup.params, ing.params);
        assert_eq!(out.report.soup.accuracy, out.report.best_single.accuracy);
        assert!(out.report.sampler_stats.is_none());
    }

    #[test]
    fn diverged_ingredient_is_skipped() {
        let data = fixture();
        let mut c = cfg(&data, 3);
        c.hyper_grid[1].learning_rate = 1e30;
        c.worker_count = 2;
        let out = run_pipeline(&data, &c, None).unwrap();
        assert!(out.ingredients[1].is_none());
        assert_eq!(out.report.ingredients[1].status, IngredientStatus::Diverged);
        assert!(out.report.ingredients[1]
            .error
            .as_deref()
            .unwrap()
            .contains("diverged"));
        assert!(out.report.soup.accuracy.val >= out.report.best_single.accuracy.val);

        c.hyper_grid.iter_mut().for_each(|h| h.learning_rate = 1e30);
        assert!(matches!(
            run_pipeline(&data, &c, None),
            Err(PipelineError::AllDiverged(3))
        ));
    }

    #[test]
    fn sampler_kind_must_match_mode() {
        let data = fixture();
        let mut c = cfg(&data, 2);
        c.mode = PipelineMode::NodeSample;
        c.sampler = Some(SamplerConfig::edge(10));
        assert!(matches!(
            run_pipeline(&data, &c, None),
            Err(PipelineError::Config(_))
        ));
    }
}
