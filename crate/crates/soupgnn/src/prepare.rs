//! Conversion of raw exports into the canonical dataset directory.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::path::Path;

use soupgnn_core::synth::{per_class_split, sbm_dataset, stratified_split, SbmConfig};
use soupgnn_core::{Dataset, Graph, Matrix, SplitSet};

use crate::error::{self, IoError};

/// How splits are generated when the input has none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitSpec {
    /// Per-class fractions; the rest is test.
    Stratified { train: f64, val: f64 },
    /// Fixed training nodes per class, then val/test counts from the rest.
    PerClass {
        per_class: usize,
        val: usize,
        test: usize,
    },
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Stratified {
            train: 0.6,
            val: 0.2,
        }
    }
}

impl SplitSpec {
    pub fn apply(
        &self,
        labels: &[u32],
        num_classes: usize,
        seed: u64,
    ) -> soupgnn_core::Result<SplitSet> {
        match *self {
            SplitSpec::Stratified { train, val } => {
                stratified_split(labels, num_classes, train, val, seed)
            }
            SplitSpec::PerClass {
                per_class,
                val,
                test,
            } => per_class_split(labels, num_classes, per_class, val, test, seed),
        }
    }
}

/// Raw graph, features and labels before splitting.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub graph: Graph,
    pub features: Matrix<f32>,
    pub labels: Vec<u32>,
    pub num_classes: usize,
    /// Original class names, index = class id.
    pub class_names: Vec<String>,
}

impl RawDataset {
    /// Scales every feature row to sum to one (rows summing to zero are kept).
    pub fn row_normalize(&mut self) {
        for i in 0..self.features.rows() {
            let row = self.features.row_mut(i);
            let s: f32 = row.iter().sum();
            if s != 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
    }

    pub fn into_dataset(
        self,
        split: SplitSpec,
        seed: u64,
    ) -> Result<Dataset<f32>, soupgnn_core::Error> {
        let splits = split.apply(&self.labels, self.num_classes, seed)?;
        Dataset::new(
            self.graph,
            self.features,
            self.labels,
            self.num_classes,
            splits,
        )
    }
}

fn class_ids(names: Vec<String>) -> (Vec<u32>, Vec<String>) {
    let sorted: BTreeMap<&str, u32> = {
        let mut uniq: Vec<&str> = names.iter().map(String::as_str).collect();
        uniq.sort_unstable();
        uniq.dedup();
        uniq.into_iter()
            .enumerate()
            .map(|(i, s)| (s, i as u32))
            .collect()
    };
    let labels = names.iter().map(|n| sorted[n.as_str()]).collect();
    let class_names = sorted.keys().map(|s| s.to_string()).collect();
    (labels, class_names)
}

/// Cora-style export: `content` rows are `<id> <f_1> ... <f_P> <class>`,
/// `cites` rows are `<cited> <citing>`. Node ids follow content order.
pub fn read_cora(content: &Path, cites: &Path) -> Result<RawDataset, IoError> {
    let text = error::read_string(content)?;
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut rows: Vec<Vec<f32>> = Vec::new();
    let mut names = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let line = i + 1;
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 3 {
            return Err(IoError::parse(
                content,
                line,
                "expected id, features and class",
            ));
        }
        if let Some(prev) = rows.first() {
            if prev.len() != fields.len() - 2 {
                return Err(IoError::parse(
                    content,
                    line,
                    format!(
                        "expected {} features, found {}",
                        prev.len(),
                        fields.len() - 2
                    ),
                ));
            }
        }
        let feats = fields[1..fields.len() - 1]
            .iter()
            .map(|f| {
                f.parse::<f32>()
                    .map_err(|_| IoError::parse(content, line, format!("bad feature {f:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if index
            .insert(fields[0].to_string(), rows.len() as u32)
            .is_some()
        {
            return Err(IoError::parse(
                content,
                line,
                format!("duplicate node id {}", fields[0]),
            ));
        }
        rows.push(feats);
        names.push(fields[fields.len() - 1].to_string());
    }
    if rows.is_empty() {
        return Err(IoError::format(content, "no nodes"));
    }
    let n = rows.len();
    let p = rows[0].len();
    let features = Matrix::from_vec(n, p, rows.concat()).expect("rows checked");

    let text = error::read_string(cites)?;
    let mut edges = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let line = i + 1;
        let fields: Vec<&str> = l.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [a, b] => {
                let id = |s: &str| {
                    index
                        .get(s)
                        .copied()
                        .ok_or_else(|| IoError::parse(cites, line, format!("unknown node id {s}")))
                };
                edges.push((id(a)?, id(b)?));
            }
            _ => return Err(IoError::parse(cites, line, "expected \"<cited> <citing>\"")),
        }
    }
    let graph = Graph::from_undirected_edges(n, edges).map_err(|source| IoError::Invalid {
        path: cites.to_path_buf(),
        source,
    })?;
    let (labels, class_names) = class_ids(names);
    Ok(RawDataset {
        graph,
        features,
        labels,
        num_classes: class_names.len(),
        class_names,
    })
}

/// Generic export: `edges` as `src<TAB>dst` (dense 0-based ids), `features`
/// as one whitespace-separated row per node, `labels` as one class per line.
pub fn read_tsv(edges: &Path, features: &Path, labels: &Path) -> Result<RawDataset, IoError> {
    let text = error::read_string(features)?;
    let mut rows: Vec<Vec<f32>> = Vec::new();
    for (i, l) in text.lines().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let row = l
            .split_whitespace()
            .map(|f| {
                f.parse::<f32>()
                    .map_err(|_| IoError::parse(features, i + 1, format!("bad feature {f:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if rows.first().is_some_and(|r| r.len() != row.len()) {
            return Err(IoError::parse(features, i + 1, "ragged feature row"));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IoError::format(features, "no feature rows"));
    }
    let n = rows.len();
    let p = rows[0].len();
    let feats = Matrix::from_vec(n, p, rows.concat()).expect("rows checked");

    let text = error::read_string(labels)?;
    let mut raw = Vec::new();
    for (i, l) in text.lines().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let c: u32 = l
            .trim()
            .parse()
            .map_err(|_| IoError::parse(labels, i + 1, format!("bad label {l:?}")))?;
        raw.push(c);
    }
    if raw.len() != n {
        return Err(IoError::format(
            labels,
            format!(
                "label count mismatch: {n} feature rows, {} labels",
                raw.len()
            ),
        ));
    }
    let num_classes = raw.iter().max().map_or(0, |&m| m as usize + 1);
    let graph = crate::dataset_io::load_edges(edges, n)?;
    Ok(RawDataset {
        graph,
        features: feats,
        labels: raw,
        num_classes,
        class_names: (0..num_classes).map(|c| c.to_string()).collect(),
    })
}

/// Synthetic SBM dataset, deterministic in `cfg.seed`.
pub fn sbm(cfg: &SbmConfig, split: SplitSpec) -> soupgnn_core::Result<Dataset<f32>> {
    let d = sbm_dataset::<f32>(cfg)?;
    let splits = split.apply(&d.labels, d.num_classes, cfg.seed)?;
    Dataset::new(d.graph, d.features, d.labels, d.num_classes, splits)
}
