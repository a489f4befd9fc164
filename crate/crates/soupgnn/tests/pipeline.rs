use soupgnn::orchestrator::{
    hyper_grid_expand, run_pipeline, GridAxes, MergeOrder, PartitionSettings, PipelineConfig,
    PipelineMode, PipelineOutput,
};
use soupgnn_core::nn::{Hyperparams, ModelArch};
use soupgnn_core::partition::partition_graph;
use soupgnn_core::soup::replay;
use soupgnn_core::synth::{grid_dataset, sbm_dataset, SbmConfig};
use soupgnn_core::{Dataset, Real};

fn max_val<T: Real>(out: &PipelineOutput<T>) -> f64 {
    out.ingredients
        .iter()
        .flatten()
        .map(|i| i.val_acc)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn grid(count: usize, epochs: usize) -> Vec<Hyperparams> {
    let axes = GridAxes {
        learning_rate: vec![0.005, 0.02],
        dropout_rate: vec![0.2, 0.5],
        ..GridAxes::default()
    };
    let base = Hyperparams {
        epochs,
        batch_size: 32,
        ..Hyperparams::default()
    };
    hyper_grid_expand(&base, &axes, count).unwrap()
}

fn noisy_sbm() -> Dataset<f32> {
    let mut cfg = SbmConfig::new(400, 4, 0.05, 0.01, 7);
    cfg.feature_noise = 2.0;
    sbm_dataset(&cfg).unwrap()
}

#[test]
fn partition_mode_on_grid_dominates() {
    let data = grid_dataset::<f32>(16, 1.0, 3).unwrap();
    let arch = ModelArch::gcn(data.num_features(), 16, data.num_classes, 2);
    let mut cfg = PipelineConfig::new(PipelineMode::Partition, arch, grid(10, 10), 10);
    cfg.worker_count = 3;
    cfg.partition = Some(PartitionSettings {
        num_clusters: 8,
        q: 2,
        single_batch_per_epoch: false,
    });
    let partition = partition_graph(&data.graph, 8).unwrap();
    let out = run_pipeline(&data, &cfg, Some(partition)).unwrap();
    assert_eq!(out.report.trained(), 10);
    assert!(out.report.soup.accuracy.val >= max_val(&out));
    let info = out.report.partition.as_ref().unwrap();
    assert_eq!((info.num_clusters, info.q), (8, 2));
}

#[test]
fn arrival_order_still_dominates() {
    let data = noisy_sbm();
    let arch = ModelArch::gcn(16, 16, 4, 2);
    let mut cfg = PipelineConfig::new(PipelineMode::FullBatch, arch, grid(8, 20), 8);
    cfg.worker_count = 3;
    cfg.merge_order = MergeOrder::Arrival;
    let out = run_pipeline(&data, &cfg, None).unwrap();
    assert!(out.report.soup.accuracy.val >= max_val(&out));
    assert_eq!(out.report.merge_order, MergeOrder::Arrival);
}

#[test]
fn double_precision_run_and_lineage_replay() {
    let data = noisy_sbm().cast::<f64>();
    let arch = ModelArch::sgc(16, 4, 2);
    let mut cfg = PipelineConfig::new(PipelineMode::EdgeSample, arch, grid(6, 8), 6);
    cfg.sampler = Some(soupgnn_core::sampling::SamplerConfig::edge(300));
    cfg.worker_count = 2;
    let out = run_pipeline(&data, &cfg, None).unwrap();
    assert!(out.report.soup.accuracy.val >= max_val(&out));
    let ingredients: Vec<_> = out.ingredients.iter().flatten().cloned().collect();
    let replayed = replay(&out.soup.lineage, &ingredients).unwrap();
    assert_eq!(replayed, out.soup.params);
}

#[test]
fn report_table_lists_every_baseline() {
    let data = noisy_sbm();
    let arch = ModelArch::sage_mean(16, 8, 4, 2);
    let mut cfg = PipelineConfig::new(PipelineMode::NodeSample, arch, grid(4, 3), 4);
    cfg.sampler = Some(soupgnn_core::sampling::SamplerConfig::node(4));
    let out = run_pipeline(&data, &cfg, None).unwrap();
    let table = out.report.table();
    for row in [
        "soup",
        "best single",
        "vanilla mean",
        "ensemble",
        "mean nnz",
    ] {
        assert!(table.contains(row), "{row} missing from\n{table}");
    }
    let csv = out.report.ingredients_csv();
    assert_eq!(csv.lines().count(), 5);
}
