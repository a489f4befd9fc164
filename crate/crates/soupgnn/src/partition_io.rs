//! Partition directory: `header.json` plus `assignment.bin` (N little-endian u32).

use std::path::Path;

use serde::{Deserialize, Serialize};
use soupgnn_core::partition::PartitionMap;
use soupgnn_core::Graph;

use crate::error::{self, IoError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionHeader {
    pub num_nodes: usize,
    pub num_clusters: usize,
    pub edge_cut: usize,
    pub graph_fingerprint: String,
}

pub fn save_partition(dir: &Path, p: &PartitionMap, g: &Graph) -> Result<(), IoError> {
    error::create_dir(dir)?;
    let header = PartitionHeader {
        num_nodes: p.assignment.len(),
        num_clusters: p.num_clusters,
        edge_cut: p.edge_cut,
        graph_fingerprint: g.fingerprint(),
    };
    error::write_json(&dir.join("header.json"), &header)?;
    let bytes: Vec<u8> = p.assignment.iter().flat_map(|c| c.to_le_bytes()).collect();
    error::write(&dir.join("assignment.bin"), bytes)
}

/// Loads a partition and checks it against the graph it will be used with.
pub fn load_partition(dir: &Path, g: &Graph) -> Result<PartitionMap, IoError> {
    let header_path = dir.join("header.json");
    let header: PartitionHeader = error::read_json(&header_path)?;
    if header.num_nodes != g.num_nodes() {
        return Err(IoError::format(
            &header_path,
            format!(
                "partition node count mismatch: file has {}, dataset has {}",
                header.num_nodes,
                g.num_nodes()
            ),
        ));
    }
    if header.graph_fingerprint != g.fingerprint() {
        return Err(IoError::format(
            &header_path,
            "partition was computed for a different graph",
        ));
    }
    let bin = dir.join("assignment.bin");
    let bytes = error::read(&bin)?;
    if bytes.len() != 4 * header.num_nodes {
        return Err(IoError::format(
            &bin,
            format!(
                "corrupt partition file: expected {} bytes, found {}",
                4 * header.num_nodes,
                bytes.len()
            ),
        ));
    }
    let assignment = bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let p = PartitionMap::new(header.num_clusters, assignment, g).map_err(|source| {
        IoError::Invalid {
            path: bin.clone(),
            source,
        }
    })?;
    if p.edge_cut != header.edge_cut {
        return Err(IoError::format(
            &header_path,
            "corrupt partition file: edge cut does not match",
        ));
    }
    Ok(p)
}
