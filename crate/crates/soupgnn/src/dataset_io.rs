//! Canonical dataset directory: `meta.json`, `edges.tsv`, `features.bin`,
//! `labels.tsv`, `splits.json`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use soupgnn_core::{Dataset, Graph, Matrix, SplitSet};

use crate::error::{self, IoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub num_nodes: usize,
    pub num_features: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitsFile {
    train: Vec<u32>,
    val: Vec<u32>,
    test: Vec<u32>,
}

fn parse_id(path: &Path, line: usize, field: &str, n: usize) -> Result<u32, IoError> {
    let id: u32 = field
        .trim()
        .parse()
        .map_err(|_| IoError::parse(path, line, format!("bad node id {field:?}")))?;
    if id as usize >= n {
        return Err(IoError::parse(
            path,
            line,
            format!("node id {id} out of range ({n} nodes)"),
        ));
    }
    Ok(id)
}

/// Lines with content, numbered from 1.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn load_meta(dir: &Path) -> Result<Meta, IoError> {
    error::read_json(&dir.join("meta.json"))
}

pub fn load_edges(path: &Path, n: usize) -> Result<Graph, IoError> {
    let text = error::read_string(path)?;
    let mut edges = Vec::new();
    for (line, l) in content_lines(&text) {
        let mut fields = l.split('\t');
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(IoError::parse(path, line, "expected \"src<TAB>dst\""));
        };
        edges.push((parse_id(path, line, a, n)?, parse_id(path, line, b, n)?));
    }
    Graph::from_undirected_edges(n, edges).map_err(|source| IoError::Invalid {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_labels(path: &Path, meta: &Meta) -> Result<Vec<u32>, IoError> {
    let text = error::read_string(path)?;
    let mut labels = Vec::with_capacity(meta.num_nodes);
    for (line, l) in content_lines(&text) {
        let c: u32 = l
            .trim()
            .parse()
            .map_err(|_| IoError::parse(path, line, format!("bad label {l:?}")))?;
        if c as usize >= meta.num_classes {
            return Err(IoError::parse(
                path,
                line,
                format!("label {c} out of range ({} classes)", meta.num_classes),
            ));
        }
        labels.push(c);
    }
    if labels.len() != meta.num_nodes {
        return Err(IoError::format(
            path,
            format!(
                "label count mismatch: expected {}, found {}",
                meta.num_nodes,
                labels.len()
            ),
        ));
    }
    Ok(labels)
}

pub fn load_features(path: &Path, meta: &Meta) -> Result<Matrix<f32>, IoError> {
    let bytes = error::read(path)?;
    let expected = meta.num_nodes * meta.num_features * 4;
    if bytes.len() != expected {
        return Err(IoError::format(
            path,
            format!(
                "feature size mismatch: expected {expected} bytes ({} x {} f32), found {}",
                meta.num_nodes,
                meta.num_features,
                bytes.len()
            ),
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Matrix::from_vec(meta.num_nodes, meta.num_features, data).expect("length checked"))
}

pub fn load_splits(path: &Path, n: usize) -> Result<SplitSet, IoError> {
    let s: SplitsFile = error::read_json(path)?;
    SplitSet::new(s.train, s.val, s.test, n).map_err(|source| IoError::Invalid {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<Dataset<f32>, IoError> {
    let meta = load_meta(dir)?;
    let graph = load_edges(&dir.join("edges.tsv"), meta.num_nodes)?;
    let features = load_features(&dir.join("features.bin"), &meta)?;
    let labels = load_labels(&dir.join("labels.tsv"), &meta)?;
    let splits = load_splits(&dir.join("splits.json"), meta.num_nodes)?;
    Dataset::new(graph, features, labels, meta.num_classes, splits).map_err(|source| {
        IoError::Invalid {
            path: dir.to_path_buf(),
            source,
        }
    })
}

pub fn save_dataset(dir: &Path, data: &Dataset<f32>) -> Result<(), IoError> {
    error::create_dir(dir)?;
    let meta = Meta {
        num_nodes: data.num_nodes(),
        num_features: data.num_features(),
        num_classes: data.num_classes,
    };
    error::write_json(&dir.join("meta.json"), &meta)?;
    let mut edges = String::new();
    for (u, v) in data.graph.undirected_edges() {
        writeln!(edges, "{u}\t{v}").expect("writing to a String");
    }
    error::write(&dir.join("edges.tsv"), edges)?;
    let bytes: Vec<u8> = data
        .features
        .as_slice()
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    error::write(&dir.join("features.bin"), bytes)?;
    let labels: String = data.labels.iter().map(|c| format!("{c}\n")).collect();
    error::write(&dir.join("labels.tsv"), labels)?;
    let splits = SplitsFile {
        train: data.splits.train.clone(),
        val: data.splits.val.clone(),
        test: data.splits.test.clone(),
    };
    error::write_json(&dir.join("splits.json"), &splits)
}
