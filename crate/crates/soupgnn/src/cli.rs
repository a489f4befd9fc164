//! The `soupgnn` command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use clap::{Args, Parser, Subcommand, ValueEnum};
use soupgnn_core::partition::partition_graph;
use soupgnn_core::soup::{ensemble_eval, greedy_soup, Ingredient, SoupConfig, SoupStrategy};
use soupgnn_core::synth::SbmConfig;
use soupgnn_core::train::{BatchPlan, TrainContext};
use soupgnn_core::{Dataset, Real};

use crate::checkpoint::{Checkpoint, Precision};
use crate::config::RunConfig;
use crate::dataset_io::{load_dataset, save_dataset};
use crate::error;
use crate::orchestrator::{run_pipeline, MergeOrder, PipelineMode};
use crate::partition_io::{load_partition, save_partition};
use crate::prepare::{read_cora, read_tsv, sbm, SplitSpec};
use crate::report::save_outputs;

#[derive(Debug, Parser)]
#[command(
    name = "soupgnn",
    version,
    about = "Train GNN ingredients independently and merge them into a model soup"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert raw data (or generate an SBM fixture) into a dataset directory.
    Prepare(PrepareArgs),
    /// Partition a dataset's graph into K clusters and save the assignment.
    Partition(PartitionArgs),
    /// Train ingredients, soup them and write checkpoints plus a report.
    Pipeline(PipelineArgs),
    /// Greedy interpolation soup over existing checkpoints.
    Soup(SoupArgs),
    /// Validation and test accuracy of one checkpoint.
    Eval(EvalArgs),
    /// Validation and test accuracy of the logit-averaging ensemble.
    Ensemble(EnsembleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitKind {
    /// Per-class train/val fractions, remainder is test.
    Stratified,
    /// A fixed number of training nodes per class.
    PerClass,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// `<id> <features...> <class>` rows.
    #[arg(long, requires = "cora_cites", conflicts_with_all = ["edges", "sbm"])]
    pub cora_content: Option<PathBuf>,
    /// `<cited> <citing>` rows.
    #[arg(long, requires = "cora_content")]
    pub cora_cites: Option<PathBuf>,
    /// Tab-separated `src dst` edge list with 0-based ids.
    #[arg(long, requires_all = ["features", "labels"], conflicts_with = "sbm")]
    pub edges: Option<PathBuf>,
    /// One whitespace-separated feature row per node.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// One integer class per line.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Synthetic SBM, e.g. `--sbm n=1000 k=4 p_in=0.05 p_out=0.005`
    /// (optional keys: dim, noise).
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    pub sbm: Option<Vec<String>>,
    /// Seed for the SBM generator and the split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SplitKind::Stratified)]
    pub split: SplitKind,
    #[arg(long, default_value_t = 0.6)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 0.2)]
    pub val_frac: f64,
    #[arg(long, default_value_t = 20)]
    pub per_class: usize,
    #[arg(long, default_value_t = 500)]
    pub num_val: usize,
    #[arg(long, default_value_t = 1000)]
    pub num_test: usize,
    /// Scale each feature row to sum to one.
    #[arg(long)]
    pub row_normalize: bool,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,
    /// Output partition directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Values set in `--config` take precedence over these flags.
#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// TOML run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory for checkpoints and the report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<PipelineMode>,
    #[arg(long)]
    pub ingredients: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub init_seed: Option<u64>,
    /// Synchronize every T epochs (ablation); omit for communication-free.
    #[arg(long)]
    pub comm_interval: Option<usize>,
    #[arg(long)]
    pub merge_order: Option<MergeOrder>,
    #[arg(long)]
    pub precision: Option<Precision>,
    #[arg(long)]
    pub partition_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SoupArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory for soup.ckpt and lineage.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub alpha_step: f64,
    #[arg(long, value_enum, default_value_t = StrategyArg::InPlace)]
    pub strategy: StrategyArg,
    /// Ingredient checkpoints; lineage ids are their positions here.
    #[arg(required = true)]
    pub checkpoints: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    InPlace,
    BestAlpha,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(required = true)]
    pub checkpoints: Vec<PathBuf>,
}

impl clap::ValueEnum for PipelineMode {
    fn value_variants<'a>() -> &'a [Self] {
        &PipelineMode::ALL
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.name()))
    }
}

impl clap::ValueEnum for MergeOrder {
    fn value_variants<'a>() -> &'a [Self] {
        &[MergeOrder::Index, MergeOrder::Arrival]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            MergeOrder::Index => "index",
            MergeOrder::Arrival => "arrival",
        }))
    }
}

impl clap::ValueEnum for Precision {
    fn value_variants<'a>() -> &'a [Self] {
        &[Precision::F32, Precision::F64]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }))
    }
}

/// Runs one command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> anyhow::Result<()> {
    match cli.command {
        Command::Prepare(a) => prepare(a, out),
        Command::Partition(a) => partition(a, out),
        Command::Pipeline(a) => pipeline(a, out),
        Command::Soup(a) => soup(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Ensemble(a) => ensemble(a, out),
    }
}

fn parse_sbm(pairs: &[String], seed: u64) -> anyhow::Result<SbmConfig> {
    let (mut n, mut k, mut p_in, mut p_out) = (None, None, None, None);
    let mut cfg = SbmConfig::new(0, 0, 0.0, 0.0, seed);
    for pair in pairs {
        let (key, value) = pair
            .split_once('=')
            .with_context(|| format!("--sbm expects KEY=VALUE, got {pair:?}"))?;
        let bad = || format!("--sbm {key}: cannot parse {value:?}");
        match key {
            "n" => n = Some(value.parse::<usize>().with_context(bad)?),
            "k" => k = Some(value.parse::<usize>().with_context(bad)?),
            "p_in" => p_in = Some(value.parse::<f64>().with_context(bad)?),
            "p_out" => p_out = Some(value.parse::<f64>().with_context(bad)?),
            "dim" => cfg.feature_dim = value.parse().with_context(bad)?,
            "noise" => cfg.feature_noise = value.parse().with_context(bad)?,
            _ => bail!("--sbm: unknown key {key:?} (expected n, k, p_in, p_out, dim, noise)"),
        }
    }
    let (Some(n), Some(k), Some(p_in), Some(p_out)) = (n, k, p_in, p_out) else {
        bail!("--sbm needs n, k, p_in and p_out");
    };
    Ok(SbmConfig {
        num_nodes: n,
        num_classes: k,
        p_in,
        p_out,
        ..cfg
    })
}

fn prepare(a: PrepareArgs, out: &mut dyn std::io::Write) -> anyhow::Result<()> {
    let split = match a.split {
        SplitKind::Stratified => SplitSpec::Stratified {
            train: a.train_frac,
            val: a.val_frac,
        },
        SplitKind::PerClass => SplitSpec::PerClass {
            per_class: a.per_class,
            val: a.num_val,
            test: a.num_test,
        },
    };
    let mut raw = if let (Some(content), Some(cites)) = (&a.cora_content, &a.cora_cites) {
        Some(read_cora(content, cites)?)
    } else if let (Some(e), Some(f), Some(l)) = (&a.edges, &a.features, &a.labels) {
        Some(read_tsv(e, f, l)?)
    } else {
        None
    };
    let data = match (&mut raw, &a.sbm) {
        (Some(raw), _) => {
            if a.row_normalize {
                raw.row_normalize();
            }
            raw.clone().into_dataset(split, a.seed)?
        }
        (None, Some(pairs)) => {
            let mut d = sbm(&parse_sbm(pairs, a.seed)?, split)?;
            if a.row_normalize {
                for i in 0..d.features.rows() {
                    let row = d.features.row_mut(i);
                    let s: f32 = row.iter().sum();
                    if s != 0.0 {
                        row.iter_mut().for_each(|v| *v /= s);
                    }
                }
            }
            d
        }
        (None, None) => bail!(
            "prepare needs --cora-content/--cora-cites, --edges/--features/--labels, or --sbm"
        ),
    };
    save_dataset(&a.out, &data)?;
    if let Some(raw) = &raw {
        let names = serde_json::json!(raw.class_names);
        error::write_json(&a.out.join("classes.json"), &names)?;
    }
    writeln!(
        out,
        "{}: {} nodes, {} edges, {} features, {} classes, split {}/{}/{}",
        a.out.display(),
        data.num_nodes(),
        data.graph.num_undirected_edges(),
        data.num_features(),
        data.num_classes,
        data.splits.train.len(),
        data.splits.val.len(),
        data.splits.test.len()
    )?;
    Ok(())
}

fn partition(a: PartitionArgs, out: &mut dyn std::io::Write) -> anyhow::Result<()> {
    let data = load_dataset(&a.dataset)?;
    let p = partition_graph(&data.graph, a.k)?;
    save_partition(&a.out, &p, &data.graph)?;
    let sizes = p.cluster_sizes();
    writeln!(
        out,
        "{} clusters, edge cut {} of {} edges, cluster sizes {}..{}",
        p.num_clusters,
        p.edge_cut,
        data.graph.num_undirected_edges(),
        sizes.iter().min().unwrap_or(&0),
        sizes.iter().max().unwrap_or(&0)
    )?;
    Ok(())
}

fn pipeline(a: PipelineArgs, out: &mut dyn std::io::Write) -> anyhow::Result<()> {
    let flags = RunConfig {
        dataset: a.dataset,
        output: a.out,
        precision: a.precision,
        partition_dir: a.partition_dir,
        mode: a.mode,
        ingredient_count: a.ingredients,
        worker_count: a.workers,
        shared_init_seed: a.init_seed,
        comm_interval: a.comm_interval,
        merge_order: a.merge_order,
        ..RunConfig::default()
    };
    let cfg = match &a.config {
        Some(path) => RunConfig::load(path)?.or(flags),
        None => flags,
    };
    let dataset = cfg
        .dataset
        .clone()
        .context("no dataset given (--dataset or `dataset` in the config)")?;
    let output = cfg
        .output
        .clone()
        .context("no output directory given (--out or `output` in the config)")?;
    let data = load_dataset(&dataset)?;
    match cfg.precision.unwrap_or_default() {
        Precision::F32 => pipeline_with(&cfg, &data, &output, out),
        Precision::F64 => pipeline_with(&cfg, &data.cast::<f64>(), &output, out),
    }
}

fn pipeline_with<T: Real + Send + Sync>(
    cfg: &RunConfig,
    data: &Dataset<T>,
    output: &Path,
    out: &mut dyn std::io::Write,
) -> anyhow::Result<()> {
    let pcfg = cfg.pipeline_config(data)?;
    let mut partition = None;
    if let Some(settings) = pcfg.partition_settings() {
        let dir = cfg
            .partition_dir
            .clone()
            .unwrap_or_else(|| output.join("partition"));
        if dir.join("header.json").exists() {
            partition = Some(load_partition(&dir, &data.graph)?);
        } else {
            let p = partition_graph(&data.graph, settings.num_clusters)?;
            save_partition(&dir, &p, &data.graph)?;
            partition = Some(p);
        }
    }
    let run = run_pipeline(data, &pcfg, partition)?;
    save_outputs(output, &run)?;
    write!(out, "{}", run.report.table())?;
    writeln!(out, "outputs written to {}", output.display())?;
    Ok(())
}

enum Loaded {
    F32(Dataset<f32>, Vec<Checkpoint>),
    F64(Dataset<f64>, Vec<Checkpoint>),
}

/// Loads checkpoints and the dataset at the checkpoints' precision.
fn load_checkpoints(dataset: &Path, paths: &[PathBuf]) -> anyhow::Result<Loaded> {
    let data = load_dataset(dataset)?;
    let ckpts = paths
        .iter()
        .map(|p| Checkpoint::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let dtype = ckpts[0].header.dtype;
    if let Some(c) = ckpts.iter().find(|c| c.header.dtype != dtype) {
        bail!(
            "checkpoints mix precisions ({:?} and {:?})",
            dtype,
            c.header.dtype
        );
    }
    Ok(match dtype {
        Precision::F32 => Loaded::F32(data, ckpts),
        Precision::F64 => Loaded::F64(data.cast(), ckpts),
    })
}

fn eval_context<'d, T: Real>(
    data: &'d Dataset<T>,
    ck: &Checkpoint,
) -> anyhow::Result<TrainContext<'d, T>> {
    TrainContext::new(data, ck.header.arch.clone(), BatchPlan::FullBatch, None)
        .context("checkpoint does not fit the dataset")
}

fn eval(a: EvalArgs, out: &mut dyn std::io::Write) -> anyhow::Result<()> {
    fn go<T: Real>(
        data: &Dataset<T>,
        ckpts: Vec<Checkpoint>,
        out: &mut dyn std::io::Write,
    ) -> anyhow::Result<()> {
        let ck = &ckpts[0];
        let ctx = eval_context(data, ck)?;
        let params = ck.params_as::<T>();
        writeln!(out, "val_acc {}", ctx.val_acc(&params)?)?;
        writeln!(out, "test_acc {}", ctx.test_acc(&params)?)?;
        Ok(())
    }
    match load_checkpoints(&a.dataset, &[a.checkpoint])? {
        Loaded::F32(d, c) => go(&d, c, out),
        Loaded::F64(d, c) => go(&d, c, out),
    }
}

fn ensemble(a: EnsembleArgs, out: &mut dyn std::io::Write) -> anyhow::Result<()> {
    fn go<T: Real>(
        data: &Dataset<T>,
        ckpts: Vec<Checkpoint>,
        out: &mut dyn std::io::Write,
    ) -> anyhow::Result<()> {
        let ctx = eval_context(data, &ckpts[0])?;
        let params: Vec<_> = ckpts.iter().map(|c| c.params_as::<T>()).collect();
        for p in &params {
            p.check_compatible(&params[0])?;
        }
        let refs: Vec<_> = params.iter().collect();
        let (ops, x) = ctx.eval_inputs();
        let val = ensemble_eval(&refs, &ops, x, &data.labels, &data.splits.val)?;
        let test = ensemble_eval(&refs, &ops, x, &data.labels, &data.splits.test)?;
        writeln!(out, "models {}", refs.len())?;
        writeln!(out, "val_acc {val}")?;
        writeln!(out, "test_acc {test}")?;
        Ok(())
    }
    match load_checkpoints(&a.dataset, &a.checkpoints)? {
        Loaded::F32(d, c) => go(&d, c, out),
        Loaded::F64(d, c) => go(&d, c, out),
    }
}

fn soup(a: SoupArgs, out: &mut dyn std::io::Write) -> anyhow::Result<()> {
    let cfg = SoupConfig {
        alpha_step: a.alpha_step,
        strategy: match a.strategy {
            StrategyArg::InPlace => SoupStrategy::InPlace,
            StrategyArg::BestAlpha => SoupStrategy::BestAlpha,
        },
    };
    fn go<T: Real>(
        data: &Dataset<T>,
        ckpts: Vec<Checkpoint>,
        cfg: &SoupConfig,
        dir: &Path,
        out: &mut dyn std::io::Write,
    ) -> anyhow::Result<()> {
        let ctx = eval_context(data, &ckpts[0])?;
        let init_seed = ckpts[0].header.init_seed;
        let mut ingredients: Vec<Ingredient<T>> = Vec::with_capacity(ckpts.len());
        for (i, ck) in ckpts.into_iter().enumerate() {
            let mut ing = ck.into_ingredient::<T>(i);
            // Accuracies are re-measured on this dataset rather than trusted.
            ing.val_acc = ctx.val_acc(&ing.params)?;
            ingredients.push(ing);
        }
        let state = greedy_soup(&ingredients, cfg, |p| ctx.val_acc(p))?;
        Checkpoint::new(
            &state.params,
            None,
            init_seed,
            state.init_fingerprint.clone(),
            state.val_acc,
        )
        .save(&dir.join("soup.ckpt"))?;
        error::write_json(&dir.join("lineage.json"), &state.lineage)?;
        let best = ingredients
            .iter()
            .map(|i| i.val_acc)
            .fold(f64::NEG_INFINITY, f64::max);
        writeln!(
            out,
            "ingredients {}, interpolation steps {}",
            ingredients.len(),
            state.lineage.steps.len()
        )?;
        writeln!(out, "best single val_acc {best}")?;
        writeln!(out, "soup val_acc {}", state.val_acc)?;
        writeln!(out, "soup test_acc {}", ctx.test_acc(&state.params)?)?;
        Ok(())
    }
    error::create_dir(&a.out)?;
    match load_checkpoints(&a.dataset, &a.checkpoints)? {
        Loaded::F32(d, c) => go(&d, c, &cfg, &a.out, out),
        Loaded::F64(d, c) => go(&d, c, &cfg, &a.out, out),
    }
}
