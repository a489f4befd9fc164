//! Pipeline report, its human-readable table, and the output directory.
//!
//! `report.json` is a pure function of the config and data except for the
//! `timing` field; [`SoupReport::content_hash`] ignores it.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use soupgnn_core::nn::{Hyperparams, ModelArch};
use soupgnn_core::sampling::SamplerConfig;
use soupgnn_core::soup::{Lineage, SoupConfig};
use soupgnn_core::train::BatchStats;
use soupgnn_core::Real;

use crate::checkpoint::{Checkpoint, Precision};
use crate::error::{self, IoError};
use crate::orchestrator::{MergeOrder, PipelineMode, PipelineOutput};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub val: f64,
    pub test: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IngredientStatus {
    Trained,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngredientRecord {
    pub index: usize,
    pub hyper: Hyperparams,
    pub status: IngredientStatus,
    pub accuracy: Option<Accuracy>,
    pub error: Option<String>,
    pub params_fingerprint: Option<String>,
    pub batch_stats: Option<BatchStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoupSummary {
    pub accuracy: Accuracy,
    pub params_fingerprint: String,
    pub lineage: Lineage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestSingle {
    pub index: usize,
    pub accuracy: Accuracy,
}

/// Batch sizes summed over every trained ingredient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerStats {
    pub batches: usize,
    pub skipped: usize,
    pub mean_input_nodes: f64,
    pub mean_output_nodes: f64,
    pub mean_nnz: f64,
}

impl From<&BatchStats> for SamplerStats {
    fn from(s: &BatchStats) -> Self {
        Self {
            batches: s.batches,
            skipped: s.skipped,
            mean_input_nodes: s.mean_input_nodes(),
            mean_output_nodes: s.output_nodes as f64 / s.batches.max(1) as f64,
            mean_nnz: s.mean_nnz(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionInfo {
    pub num_clusters: usize,
    pub q: usize,
    pub edge_cut: usize,
    pub min_cluster: usize,
    pub max_cluster: usize,
    pub fingerprint: String,
}

/// Synchronized run compared with the communication-free run of the same config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommunicationReport {
    pub interval: usize,
    pub syncs: usize,
    pub free_soup: Accuracy,
    /// Synchronized soup minus communication-free soup.
    pub delta_val: f64,
    pub delta_test: f64,
}

/// Wall-clock seconds; the only nondeterministic part of a report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_secs: f64,
    pub ingredient_secs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoupReport {
    pub mode: PipelineMode,
    pub precision: Precision,
    pub arch: ModelArch,
    pub ingredient_count: usize,
    pub worker_count: usize,
    pub shared_init_seed: u64,
    pub merge_order: MergeOrder,
    pub soup_config: SoupConfig,
    pub sampler: Option<SamplerConfig>,
    pub partition: Option<PartitionInfo>,
    pub ingredients: Vec<IngredientRecord>,
    pub soup: SoupSummary,
    pub best_single: BestSingle,
    /// Mean over trained ingredients.
    pub vanilla_mean: Accuracy,
    /// Logit averaging over trained ingredients.
    pub ensemble: Accuracy,
    pub sampler_stats: Option<SamplerStats>,
    pub communication: Option<CommunicationReport>,
    pub timing: Timing,
}

impl SoupReport {
    pub fn trained(&self) -> usize {
        self.ingredients
            .iter()
            .filter(|r| r.status == IngredientStatus::Trained)
            .count()
    }

    /// Fingerprint of the report with `timing` cleared.
    pub fn content_hash(&self) -> String {
        let mut r = self.clone();
        r.timing = Timing::default();
        soupgnn_core::fingerprint(
            serde_json::to_string(&r)
                .expect("report serializes")
                .as_bytes(),
        )
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "mode {}, {} of {} ingredients trained, {} workers",
            self.mode.name(),
            self.trained(),
            self.ingredient_count,
            self.worker_count
        );
        let _ = writeln!(out, "{:<24} {:>8} {:>8}", "model", "val", "test");
        let mut row = |name: &str, a: &Accuracy| {
            let _ = writeln!(out, "{name:<24} {:>8.4} {:>8.4}", a.val, a.test);
        };
        row("soup", &self.soup.accuracy);
        row(
            &format!("best single (#{})", self.best_single.index),
            &self.best_single.accuracy,
        );
        row("vanilla mean", &self.vanilla_mean);
        row("ensemble", &self.ensemble);
        if let Some(c) = &self.communication {
            row("communication-free soup", &c.free_soup);
            let _ = writeln!(
                out,
                "communication every {} epochs ({} syncs): delta val {:+.4}, test {:+.4}",
                c.interval, c.syncs, c.delta_val, c.delta_test
            );
        }
        if let Some(s) = &self.sampler_stats {
            let _ = writeln!(
                out,
                "batches {} (skipped {}), mean input nodes {:.1}, mean output nodes {:.1}, mean nnz {:.1}",
                s.batches, s.skipped, s.mean_input_nodes, s.mean_output_nodes, s.mean_nnz
            );
        }
        if let Some(p) = &self.partition {
            let _ = writeln!(
                out,
                "partition K={} q={}: edge cut {}, cluster sizes {}..{}",
                p.num_clusters, p.q, p.edge_cut, p.min_cluster, p.max_cluster
            );
        }
        out
    }

    /// One row per ingredient, for external plotting.
    pub fn ingredients_csv(&self) -> String {
        let mut out = String::from("index,status,learning_rate,weight_decay,dropout_rate,batch_size,epochs,seed,val_acc,test_acc\n");
        for r in &self.ingredients {
            let (v, t) = r.accuracy.map_or((String::new(), String::new()), |a| {
                (a.val.to_string(), a.test.to_string())
            });
            let h = &r.hyper;
            let status = match r.status {
                IngredientStatus::Trained => "trained",
                IngredientStatus::Diverged => "diverged",
            };
            let _ = writeln!(
                out,
                "{},{status},{},{},{},{},{},{},{v},{t}",
                r.index,
                h.learning_rate,
                h.weight_decay,
                h.dropout_rate,
                h.batch_size,
                h.epochs,
                h.seed
            );
        }
        out
    }
}

pub fn ingredient_dir(out: &Path, index: usize) -> std::path::PathBuf {
    out.join(format!("ingredient_{index}.ckpt"))
}

/// Writes `ingredient_<idx>.ckpt` for every trained ingredient, `soup.ckpt`,
/// `lineage.json`, `report.json`, `report.txt` and `ingredients.csv`.
pub fn save_outputs<T: Real>(out: &Path, run: &PipelineOutput<T>) -> Result<(), IoError> {
    error::create_dir(out)?;
    let seed = run.report.shared_init_seed;
    for ing in run.ingredients.iter().flatten() {
        Checkpoint::from_ingredient(ing, seed).save(&ingredient_dir(out, ing.id))?;
    }
    Checkpoint::new(
        &run.soup.params,
        None,
        seed,
        run.soup.init_fingerprint.clone(),
        run.soup.val_acc,
    )
    .save(&out.join("soup.ckpt"))?;
    error::write_json(&out.join("lineage.json"), &run.soup.lineage)?;
    error::write_json(&out.join("report.json"), &run.report)?;
    error::write(&out.join("report.txt"), run.report.table())?;
    error::write(&out.join("ingredients.csv"), run.report.ingredients_csv())
}

pub fn load_report(path: &Path) -> Result<SoupReport, IoError> {
    error::read_json(path)
}
