//! Node-wise, edge-wise and layer-wise mini-batch samplers.
//!
//! Layered samplers return one bipartite block per hop: `blocks[l]` has the
//! nodes of hop `l` as rows and the nodes of hop `l + 1` as columns, with
//! `nodes[0]` the requested batch. The first `|nodes[l]|` entries of
//! `nodes[l + 1]` are always `nodes[l]` itself, so every target keeps its
//! own row of features.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;

use crate::error::{Error, Result};
use crate::graph::{Graph, Subgraph};
use crate::rng::Rng;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SamplerKind {
    Node,
    Edge,
    Layer,
}

/// Candidate pool for the layer-wise sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LayerScope {
    /// Draw from the 1-hop neighborhood of the current layer (LADIES-style).
    #[default]
    Conditional,
    /// Draw from every node of the graph (FastGCN-style).
    Global,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Neighbor cap per target and layer (node kind).
    #[cfg_attr(feature = "serde", serde(default))]
    pub fanout: usize,
    /// Undirected edges per batch (edge kind).
    #[cfg_attr(feature = "serde", serde(default))]
    pub edge_budget: usize,
    /// Nodes drawn per layer, hop 1 first (layer kind).
    #[cfg_attr(feature = "serde", serde(default))]
    pub layer_sizes: Vec<usize>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub layer_scope: LayerScope,
}

impl SamplerConfig {
    pub fn node(fanout: usize) -> Self {
        Self {
            kind: SamplerKind::Node,
            fanout,
            edge_budget: 0,
            layer_sizes: Vec::new(),
            layer_scope: LayerScope::Conditional,
        }
    }

    pub fn edge(edge_budget: usize) -> Self {
        Self {
            kind: SamplerKind::Edge,
            edge_budget,
            ..Self::node(0)
        }
    }

    pub fn layer(layer_sizes: Vec<usize>) -> Self {
        Self {
            kind: SamplerKind::Layer,
            layer_sizes,
            ..Self::node(0)
        }
    }

    /// Checks the field relevant to the sampler kind against the model depth.
    pub fn validate(&self, depth: usize) -> Result<()> {
        use alloc::format;
        let bad = |m: alloc::string::String| Err(Error::InvalidConfig(m));
        match self.kind {
            SamplerKind::Node if self.fanout == 0 => bad("node sampler needs fanout >= 1".into()),
            SamplerKind::Edge if self.edge_budget == 0 => {
                bad("edge sampler needs edge_budget >= 1".into())
            }
            SamplerKind::Layer if self.layer_sizes.len() != depth => bad(format!(
                "layer sampler needs {depth} layer sizes, got {}",
                self.layer_sizes.len()
            )),
            SamplerKind::Layer if self.layer_sizes.contains(&0) => {
                bad("layer sizes must be positive".into())
            }
            _ => Ok(()),
        }
    }
}

/// Per-hop node sets and bipartite propagation blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredBlocks {
    /// `nodes[0]` is the batch; `nodes[K]` is the input node set.
    pub nodes: Vec<Vec<u32>>,
    /// `blocks[l]` maps `nodes[l + 1]` (columns) onto `nodes[l]` (rows).
    pub blocks: Vec<SparseMatrix>,
}

impl LayeredBlocks {
    /// Blocks in model-layer order (input hop first).
    pub fn layer_ops(&self) -> impl Iterator<Item = &SparseMatrix> {
        self.blocks.iter().rev()
    }

    pub fn input_nodes(&self) -> &[u32] {
        self.nodes.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn total_nnz(&self) -> usize {
        self.blocks.iter().map(SparseMatrix::nnz).sum()
    }
}

fn position_map(nodes: &[u32]) -> Result<BTreeMap<u32, u32>> {
    let mut map = BTreeMap::new();
    for (i, &n) in nodes.iter().enumerate() {
        if map.insert(n, i as u32).is_some() {
            return Err(Error::InvalidConfig(alloc::format!(
                "duplicate batch node {n}"
            )));
        }
    }
    Ok(map)
}

fn check_batch(g: &Graph, batch: &[u32]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyNodeSet);
    }
    if let Some(&bad) = batch.iter().find(|&&b| b as usize >= g.num_nodes()) {
        return Err(Error::NodeOutOfRange {
            id: bad as usize,
            num_nodes: g.num_nodes(),
        });
    }
    Ok(())
}

/// GraphSAGE-style sampling: each target keeps itself plus `min(q, deg)`
/// distinct neighbors drawn uniformly; rows are averaged.
pub fn sample_node_wise(
    g: &Graph,
    batch: &[u32],
    q: usize,
    depth: usize,
    rng: &mut Rng,
) -> Result<LayeredBlocks> {
    check_batch(g, batch)?;
    if q == 0 {
        return Err(Error::InvalidConfig(alloc::string::String::from(
            "fanout must be >= 1",
        )));
    }
    let mut nodes = vec![batch.to_vec()];
    let mut blocks = Vec::with_capacity(depth);
    for l in 0..depth {
        let current = &nodes[l];
        let mut next = current.clone();
        let mut pos = position_map(current)?;
        let mut rows = Vec::with_capacity(current.len());
        for (i, &v) in current.iter().enumerate() {
            let neigh: Vec<u32> = g
                .neighbors(v as usize)
                .iter()
                .copied()
                .filter(|&u| u != v)
                .collect();
            let take = q.min(neigh.len());
            let mut picked: Vec<u32> = if take == neigh.len() {
                neigh
            } else {
                index::sample(rng, neigh.len(), take)
                    .into_iter()
                    .map(|k| neigh[k])
                    .collect()
            };
            picked.sort_unstable();
            let w = 1.0 / (take + 1) as f64;
            let mut row = Vec::with_capacity(take + 1);
            row.push((i as u32, w));
            for u in picked {
                let p = *pos.entry(u).or_insert_with(|| {
                    next.push(u);
                    (next.len() - 1) as u32
                });
                row.push((p, w));
            }
            rows.push(row);
        }
        blocks.push(SparseMatrix::from_rows(next.len(), rows)?);
        nodes.push(next);
    }
    Ok(LayeredBlocks { nodes, blocks })
}

/// Result of one edge-sampling draw.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSample {
    /// The drawn undirected edges `(u, v)`, `u < v`.
    pub edges: Vec<(u32, u32)>,
    /// Node-induced subgraph on the endpoints (unnormalized).
    pub subgraph: Subgraph,
}

/// Uniform edge sampler over a fixed graph; caches the undirected edge list.
#[derive(Debug, Clone)]
pub struct EdgeSampler<'g> {
    graph: &'g Graph,
    edges: Vec<(u32, u32)>,
}

impl<'g> EdgeSampler<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        Self {
            graph,
            edges: graph.undirected_edges().collect(),
        }
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Draws `min(budget, E)` distinct edges without replacement. A budget
    /// covering every edge returns the whole graph, isolated nodes included.
    pub fn sample(&self, budget: usize, rng: &mut Rng) -> Result<EdgeSample> {
        if budget == 0 {
            return Err(Error::InvalidConfig(alloc::string::String::from(
                "edge budget must be >= 1",
            )));
        }
        if budget >= self.edges.len() {
            let all: Vec<u32> = (0..self.graph.num_nodes() as u32).collect();
            return Ok(EdgeSample {
                edges: self.edges.clone(),
                subgraph: self.graph.induce_subgraph(&all)?,
            });
        }
        let mut edges: Vec<(u32, u32)> = index::sample(rng, self.edges.len(), budget)
            .into_iter()
            .map(|k| self.edges[k])
            .collect();
        edges.sort_unstable();
        let endpoints: Vec<u32> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
        let subgraph = self.graph.induce_subgraph(&endpoints)?;
        Ok(EdgeSample { edges, subgraph })
    }
}

pub fn sample_edge_wise(g: &Graph, budget: usize, rng: &mut Rng) -> Result<EdgeSample> {
    EdgeSampler::new(g).sample(budget, rng)
}

/// `p(u) ∝ ‖Â(u,:)‖²` over a normalized adjacency.
pub fn layer_importance(normalized: &Graph) -> Vec<f64> {
    let mut p: Vec<f64> = (0..normalized.num_nodes())
        .map(|u| match normalized.row_values(u) {
            Some(vals) => vals.iter().map(|v| v * v).sum(),
            None => normalized.degree(u) as f64,
        })
        .collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|v| *v /= total);
    }
    p
}

/// Importance-sampled layer-wise blocks over a normalized adjacency.
///
/// Nodes already in hop `l` are kept with their exact weights; `sizes[l]`
/// further nodes are drawn with replacement from the candidate pool with
/// probability proportional to `importance`, and a drawn node `u` enters
/// every row with weight `Â(v,u) · count(u) / (sizes[l] · q(u))`, which keeps
/// `E[Ã X] = Â X`. When the pool is no larger than `sizes[l]` it is taken
/// whole with unit scaling.
pub fn sample_layer_wise(
    normalized: &Graph,
    importance: &[f64],
    batch: &[u32],
    sizes: &[usize],
    scope: LayerScope,
    rng: &mut Rng,
) -> Result<LayeredBlocks> {
    check_batch(normalized, batch)?;
    if importance.len() != normalized.num_nodes() {
        return Err(Error::DimensionMismatch {
            context: "importance vector",
            expected: normalized.num_nodes(),
            actual: importance.len(),
        });
    }
    let mut nodes = vec![batch.to_vec()];
    let mut blocks = Vec::with_capacity(sizes.len());
    for (l, &size) in sizes.iter().enumerate() {
        if size == 0 {
            return Err(Error::InvalidConfig(alloc::string::String::from(
                "layer sizes must be positive",
            )));
        }
        let current = &nodes[l];
        let pos = position_map(current)?;
        let candidates: Vec<u32> = match scope {
            LayerScope::Conditional => {
                let mut c: Vec<u32> = current
                    .iter()
                    .flat_map(|&v| normalized.neighbors(v as usize).iter().copied())
                    .filter(|u| !pos.contains_key(u))
                    .collect();
                c.sort_unstable();
                c.dedup();
                c
            }
            LayerScope::Global => (0..normalized.num_nodes() as u32)
                .filter(|u| !pos.contains_key(u))
                .collect(),
        };
        // node -> multiplier applied to its Â entries
        let mut scale: BTreeMap<u32, f64> = BTreeMap::new();
        if size >= candidates.len() {
            scale.extend(candidates.iter().map(|&u| (u, 1.0)));
        } else {
            let weights: Vec<f64> = candidates.iter().map(|&u| importance[u as usize]).collect();
            let mass: f64 = weights.iter().sum();
            let dist = WeightedIndex::new(&weights).map_err(|_| {
                Error::InvalidConfig(alloc::string::String::from("degenerate importance weights"))
            })?;
            let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
            for _ in 0..size {
                *counts.entry(candidates[dist.sample(rng)]).or_insert(0) += 1;
            }
            for (u, c) in counts {
                let q = importance[u as usize] / mass;
                scale.insert(u, c as f64 / (size as f64 * q));
            }
        }
        let mut next = current.clone();
        let mut col_of: BTreeMap<u32, u32> = BTreeMap::new();
        for &u in scale.keys() {
            col_of.insert(u, next.len() as u32);
            next.push(u);
        }
        let mut rows = Vec::with_capacity(current.len());
        for &v in current {
            let cols = normalized.neighbors(v as usize);
            let vals = normalized.row_values(v as usize);
            let mut row = Vec::new();
            for (k, &u) in cols.iter().enumerate() {
                let a = vals.map_or(1.0, |vs| vs[k]);
                if let Some(&p) = pos.get(&u) {
                    row.push((p, a));
                } else if let Some(&c) = col_of.get(&u) {
                    row.push((c, a * scale[&u]));
                }
            }
            rows.push(row);
        }
        blocks.push(SparseMatrix::from_rows(next.len(), rows)?);
        nodes.push(next);
    }
    Ok(LayeredBlocks { nodes, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use approx::assert_relative_eq;

    fn rng(seed: u64) -> Rng {
        stream_rng(seed, Stream::Sample, 0, 0)
    }

    fn star(leaves: u32) -> Graph {
        Graph::from_undirected_edges(leaves as usize + 1, (1..=leaves).map(|l| (0, l))).unwrap()
    }

    #[test]
    fn star_center_is_capped() {
        let b = sample_node_wise(&star(10), &[0], 3, 1, &mut rng(1)).unwrap();
        assert_eq!(b.blocks[0].row(0).0.len(), 4);
        assert_eq!(b.nodes[1].len(), 4);
        assert_eq!(b.nodes[1][0], 0);
        for &w in b.blocks[0].row(0).1 {
            assert_relative_eq!(w, 0.25);
        }
    }

    #[test]
    fn uncapped_node_sampling_is_full_neighborhood() {
        let g = Graph::from_undirected_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).unwrap();
        let b = sample_node_wise(&g, &[0, 2], 10, 2, &mut rng(3)).unwrap();
        let mut hop1 = b.nodes[1].clone();
        hop1.sort_unstable();
        assert_eq!(hop1, alloc::vec![0, 1, 2, 3, 4]);
        for (i, &v) in b.nodes[0].iter().enumerate() {
            assert_eq!(b.blocks[0].row(i).0.len(), g.degree(v as usize) + 1);
        }
    }

    #[test]
    fn node_sampler_rejects_empty_batch() {
        assert_eq!(
            sample_node_wise(&star(3), &[], 2, 1, &mut rng(1)),
            Err(Error::EmptyNodeSet)
        );
    }

    #[test]
    fn edge_sampling_cases() {
        let tri = Graph::from_undirected_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let s = sample_edge_wise(&tri, 1, &mut rng(2)).unwrap();
        assert_eq!(s.edges.len(), 1);
        assert_eq!(s.subgraph.nodes.len(), 2);
        assert_eq!(s.subgraph.graph.num_undirected_edges(), 1);

        let full = sample_edge_wise(&tri, 10, &mut rng(2)).unwrap();
        assert_eq!(full.subgraph.graph, tri);
    }

    #[test]
    fn regular_graph_has_uniform_importance() {
        let ring = Graph::from_undirected_edges(6, (0..6).map(|i| (i, (i + 1) % 6))).unwrap();
        let p = layer_importance(&ring.sym_normalize());
        for v in p {
            assert_relative_eq!(v, 1.0 / 6.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn path_importance_matches_hand_values() {
        // Â rows of the 3-node path: (1/2, 1/√6), (1/√6, 1/3, 1/√6), (1/√6, 1/2)
        let p = layer_importance(
            &Graph::from_undirected_edges(3, [(0, 1), (1, 2)])
                .unwrap()
                .sym_normalize(),
        );
        let end = 0.25 + 1.0 / 6.0;
        let mid = 1.0 / 9.0 + 2.0 / 6.0;
        let total = 2.0 * end + mid;
        assert_relative_eq!(p[0], end / total, epsilon = 1e-12);
        assert_relative_eq!(p[1], mid / total, epsilon = 1e-12);
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn large_layer_sizes_give_exact_blocks() {
        let g = Graph::from_undirected_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let a = g.sym_normalize();
        let p = layer_importance(&a);
        let b = sample_layer_wise(
            &a,
            &p,
            &[2],
            &[10, 10],
            LayerScope::Conditional,
            &mut rng(1),
        )
        .unwrap();
        let blk = &b.blocks[0];
        for (i, &v) in b.nodes[0].iter().enumerate() {
            let (cols, vals) = blk.row(i);
            assert_eq!(cols.len(), a.degree(v as usize));
            for (&c, &w) in cols.iter().zip(vals) {
                let u = b.nodes[1][c as usize];
                assert_eq!(w, a.value(v as usize, u as usize).unwrap());
            }
        }
    }
}
