//! Multilevel k-way graph partitioning and cluster batches.
//!
//! The partitioner coarsens by heavy-edge matching, grows an initial k-way
//! assignment on the coarsest graph, then projects back level by level with
//! boundary refinement. Everything is deterministic for a given graph and k.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{Graph, Subgraph};
use crate::rng::{stream_rng, Rng, Stream};

/// Allowed imbalance by node count.
pub const BALANCE_TOLERANCE: f64 = 0.10;
const REFINE_PASSES: usize = 10;
const INITIAL_TRIALS: u64 = 4;
const UNASSIGNED: u32 = u32::MAX;

/// Node → cluster assignment over `num_clusters` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMap {
    pub num_clusters: usize,
    pub assignment: Vec<u32>,
    pub edge_cut: usize,
}

impl PartitionMap {
    /// Validates the assignment against `g` and computes its edge cut.
    pub fn new(num_clusters: usize, assignment: Vec<u32>, g: &Graph) -> Result<Self> {
        let map = Self {
            num_clusters,
            edge_cut: 0,
            assignment,
        };
        map.validate(g.num_nodes())?;
        let edge_cut = edge_cut(g, &map.assignment);
        Ok(Self { edge_cut, ..map })
    }

    /// Every node assigned to exactly one cluster in range; no cluster empty.
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if self.assignment.len() != num_nodes {
            return Err(Error::InvalidPartition(format!(
                "assignment covers {} nodes, graph has {num_nodes}",
                self.assignment.len()
            )));
        }
        if self.num_clusters == 0 {
            return Err(Error::InvalidPartition(String::from("zero clusters")));
        }
        let mut sizes = vec![0usize; self.num_clusters];
        for (node, &c) in self.assignment.iter().enumerate() {
            *sizes.get_mut(c as usize).ok_or_else(|| {
                Error::InvalidPartition(format!(
                    "node {node} assigned to cluster {c} of {}",
                    self.num_clusters
                ))
            })? += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidPartition(format!("cluster {empty} is empty")));
        }
        Ok(())
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.num_clusters];
        for &c in &self.assignment {
            sizes[c as usize] += 1;
        }
        sizes
    }

    /// Node ids of every cluster, ascending.
    pub fn clusters(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (n, &c) in self.assignment.iter().enumerate() {
            out[c as usize].push(n as u32);
        }
        out
    }

    pub fn fingerprint(&self) -> String {
        let mut bytes = Vec::with_capacity(8 + 4 * self.assignment.len());
        bytes.extend_from_slice(&(self.num_clusters as u64).to_le_bytes());
        for a in &self.assignment {
            bytes.extend_from_slice(&a.to_le_bytes());
        }
        crate::fingerprint(&bytes)
    }
}

/// Number of undirected edges whose endpoints lie in different clusters.
pub fn edge_cut(g: &Graph, assignment: &[u32]) -> usize {
    g.undirected_edges()
        .filter(|&(u, v)| assignment[u as usize] != assignment[v as usize])
        .count()
}

/// Weighted graph used during coarsening.
#[derive(Debug, Clone)]
struct WGraph {
    xadj: Vec<usize>,
    adj: Vec<u32>,
    ew: Vec<u64>,
    vw: Vec<u64>,
}

impl WGraph {
    fn from_graph(g: &Graph) -> Self {
        let mut xadj = Vec::with_capacity(g.num_nodes() + 1);
        let mut adj = Vec::with_capacity(g.num_stored());
        xadj.push(0);
        for u in 0..g.num_nodes() {
            adj.extend(g.neighbors(u).iter().copied().filter(|&v| v as usize != u));
            xadj.push(adj.len());
        }
        let ew = vec![1; adj.len()];
        Self {
            xadj,
            adj,
            ew,
            vw: vec![1; g.num_nodes()],
        }
    }

    fn n(&self) -> usize {
        self.vw.len()
    }

    fn total_weight(&self) -> u64 {
        self.vw.iter().sum()
    }

    fn nbrs(&self, u: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let r = self.xadj[u]..self.xadj[u + 1];
        self.adj[r.clone()]
            .iter()
            .zip(&self.ew[r])
            .map(|(&v, &w)| (v as usize, w))
    }

    fn cut(&self, part: &[u32]) -> u64 {
        let mut cut = 0;
        for u in 0..self.n() {
            for (v, w) in self.nbrs(u) {
                if part[u] != part[v] {
                    cut += w;
                }
            }
        }
        cut / 2
    }

    /// Heavy-edge matching; returns the coarse graph and the fine → coarse map.
    fn coarsen(&self, max_vw: u64, rng: &mut Rng) -> (WGraph, Vec<u32>) {
        let n = self.n();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut mate = vec![UNASSIGNED; n];
        for &u in &order {
            if mate[u] != UNASSIGNED {
                continue;
            }
            let mut best: Option<(usize, u64)> = None;
            for (v, w) in self.nbrs(u) {
                if mate[v] != UNASSIGNED || self.vw[u] + self.vw[v] > max_vw {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bv, bw)) => w > bw || (w == bw && v < bv),
                };
                if better {
                    best = Some((v, w));
                }
            }
            let v = best.map_or(u, |(v, _)| v);
            mate[u] = v as u32;
            mate[v] = u as u32;
        }

        let mut cmap = vec![UNASSIGNED; n];
        let mut nc = 0u32;
        for u in 0..n {
            if cmap[u] == UNASSIGNED {
                cmap[u] = nc;
                cmap[mate[u] as usize] = nc;
                nc += 1;
            }
        }
        let nc = nc as usize;
        let mut members = vec![Vec::with_capacity(2); nc];
        for u in 0..n {
            members[cmap[u] as usize].push(u);
        }

        let mut xadj = Vec::with_capacity(nc + 1);
        let mut adj = Vec::new();
        let mut ew = Vec::new();
        let mut vw = Vec::with_capacity(nc);
        let mut slot = vec![usize::MAX; nc];
        xadj.push(0);
        for (c, group) in members.iter().enumerate() {
            let start = adj.len();
            vw.push(group.iter().map(|&u| self.vw[u]).sum());
            for &u in group {
                for (v, w) in self.nbrs(u) {
                    let cv = cmap[v] as usize;
                    if cv == c {
                        continue;
                    }
                    if slot[cv] == usize::MAX || slot[cv] < start {
                        slot[cv] = adj.len();
                        adj.push(cv as u32);
                        ew.push(w);
                    } else {
                        ew[slot[cv]] += w;
                    }
                }
            }
            // keep adjacency sorted for deterministic iteration
            let mut row: Vec<(u32, u64)> = adj[start..]
                .iter()
                .copied()
                .zip(ew[start..].iter().copied())
                .collect();
            row.sort_unstable();
            for (i, (a, w)) in row.into_iter().enumerate() {
                adj[start + i] = a;
                ew[start + i] = w;
                slot[a as usize] = start + i;
            }
            xadj.push(adj.len());
        }
        (WGraph { xadj, adj, ew, vw }, cmap)
    }
}

struct PartState {
    weight: Vec<u64>,
    count: Vec<usize>,
}

impl PartState {
    fn new(g: &WGraph, part: &[u32], k: usize) -> Self {
        let mut weight = vec![0; k];
        let mut count = vec![0; k];
        for u in 0..g.n() {
            weight[part[u] as usize] += g.vw[u];
            count[part[u] as usize] += 1;
        }
        Self { weight, count }
    }

    fn apply(&mut self, g: &WGraph, part: &mut [u32], u: usize, to: usize) {
        let from = part[u] as usize;
        self.weight[from] -= g.vw[u];
        self.count[from] -= 1;
        self.weight[to] += g.vw[u];
        self.count[to] += 1;
        part[u] = to as u32;
    }
}

/// Connectivity of `u` to every part it touches.
fn connectivity(g: &WGraph, part: &[u32], u: usize, conn: &mut [u64], touched: &mut Vec<usize>) {
    for &p in touched.iter() {
        conn[p] = 0;
    }
    touched.clear();
    for (v, w) in g.nbrs(u) {
        let p = part[v] as usize;
        if conn[p] == 0 {
            touched.push(p);
        }
        conn[p] += w;
    }
}

/// Greedy graph growing: parts `0..k-1` absorb their best-connected frontier
/// node until they reach `total / k`; the last part takes the rest.
fn grow_initial(g: &WGraph, k: usize, rng: &mut Rng) -> Vec<u32> {
    let n = g.n();
    let target = g.total_weight() as f64 / k as f64;
    let mut part = vec![UNASSIGNED; n];
    let mut conn = vec![0u64; n];
    let mut remaining = n;
    for p in 0..k.saturating_sub(1) {
        let mut weight = 0u64;
        let mut frontier: Vec<usize> = Vec::new();
        while (weight as f64) < target && remaining > k - 1 - p {
            let pick = frontier
                .iter()
                .copied()
                .filter(|&v| part[v] == UNASSIGNED)
                .max_by(|&a, &b| conn[a].cmp(&conn[b]).then(b.cmp(&a)));
            let v = match pick {
                Some(v) => v,
                None => {
                    let free: Vec<usize> = (0..n).filter(|&v| part[v] == UNASSIGNED).collect();
                    free[rng.random_range(0..free.len())]
                }
            };
            part[v] = p as u32;
            weight += g.vw[v];
            remaining -= 1;
            for (u, w) in g.nbrs(v) {
                if part[u] == UNASSIGNED {
                    if conn[u] == 0 {
                        frontier.push(u);
                    }
                    conn[u] += w;
                }
            }
        }
        for &u in &frontier {
            conn[u] = 0;
        }
    }
    for slot in part.iter_mut() {
        if *slot == UNASSIGNED {
            *slot = (k - 1) as u32;
        }
    }
    part
}

/// Moves nodes out of overweight parts, cheapest cut increase first.
fn rebalance(g: &WGraph, part: &mut [u32], k: usize, max_w: u64) {
    let mut state = PartState::new(g, part, k);
    let mut conn = vec![0u64; k];
    let mut touched = Vec::new();
    for _ in 0..g.n() {
        let Some(heavy) = (0..k)
            .filter(|&p| state.weight[p] > max_w)
            .max_by_key(|&p| state.weight[p])
        else {
            return;
        };
        let mut best: Option<(i64, usize, usize)> = None;
        for u in 0..g.n() {
            if part[u] as usize != heavy || state.count[heavy] == 1 {
                continue;
            }
            connectivity(g, part, u, &mut conn, &mut touched);
            for to in 0..k {
                if to == heavy || state.weight[to] + g.vw[u] > max_w {
                    continue;
                }
                let loss = conn[heavy] as i64 - conn[to] as i64;
                if best.is_none_or(|(b, _, _)| loss < b) {
                    best = Some((loss, u, to));
                }
            }
        }
        match best {
            Some((_, u, to)) => state.apply(g, part, u, to),
            None => return,
        }
    }
}

/// Boundary refinement with single-node moves. A move is taken when it cuts
/// fewer edges, or cuts the same number while evening out part weights, and
/// never when it would break the balance bound or empty a part; the cut is
/// therefore non-increasing across passes.
fn refine(g: &WGraph, part: &mut [u32], k: usize, max_w: u64) {
    let mut state = PartState::new(g, part, k);
    let mut conn = vec![0u64; k];
    let mut touched = Vec::new();
    let mut cut = g.cut(part);
    for _ in 0..REFINE_PASSES {
        let mut moved = 0;
        for u in 0..g.n() {
            let from = part[u] as usize;
            if state.count[from] == 1 {
                continue;
            }
            connectivity(g, part, u, &mut conn, &mut touched);
            let internal = conn[from] as i64;
            let mut best: Option<(i64, usize)> = None;
            for &to in touched.iter() {
                if to == from || state.weight[to] + g.vw[u] > max_w {
                    continue;
                }
                let gain = conn[to] as i64 - internal;
                let evens_out = state.weight[to] + g.vw[u] < state.weight[from];
                if gain < 0 || (gain == 0 && !evens_out) {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bg, bt)) => {
                        gain > bg || (gain == bg && state.weight[to] < state.weight[bt])
                    }
                };
                if better {
                    best = Some((gain, to));
                }
            }
            if let Some((_, to)) = best {
                state.apply(g, part, u, to);
                moved += 1;
            }
        }
        let after = g.cut(part);
        assert!(
            after <= cut,
            "refinement increased the edge cut ({cut} -> {after})"
        );
        cut = after;
        if moved == 0 {
            break;
        }
    }
}

fn max_part_weight(total: u64, k: usize) -> u64 {
    let ideal = total as f64 / k as f64;
    num_traits::Float::ceil(ideal * (1.0 + BALANCE_TOLERANCE)) as u64
}

/// Partitions `g` into `k` non-empty clusters.
pub fn partition_graph(g: &Graph, k: usize) -> Result<PartitionMap> {
    let n = g.num_nodes();
    if k == 0 {
        return Err(Error::InvalidConfig(String::from(
            "cluster count must be >= 1",
        )));
    }
    if k > n {
        return Err(Error::InvalidConfig(format!(
            "cannot split {n} nodes into {k} clusters"
        )));
    }
    if k == 1 {
        return PartitionMap::new(1, vec![0; n], g);
    }
    let mut rng = stream_rng(0, Stream::Partition, n as u64, k as u64);
    let threshold = (20 * k).max(100);
    let finest = WGraph::from_graph(g);
    let total = finest.total_weight();
    let max_vw = ((1.5 * total as f64) / threshold as f64).max(1.0) as u64;

    let mut levels: Vec<(WGraph, Vec<u32>)> = Vec::new();
    loop {
        let current = levels.last().map_or(&finest, |(g, _)| g);
        if current.n() <= threshold {
            break;
        }
        let (coarse, cmap) = current.coarsen(max_vw, &mut rng);
        if coarse.n() as f64 > 0.95 * current.n() as f64 {
            break;
        }
        levels.push((coarse, cmap));
    }

    let coarsest = levels.last().map_or(&finest, |(g, _)| g);
    let max_w = max_part_weight(total, k);
    let mut best: Option<(bool, u64, Vec<u32>)> = None;
    for trial in 0..INITIAL_TRIALS {
        let mut trial_rng = stream_rng(trial, Stream::Partition, n as u64, k as u64);
        let mut part = grow_initial(coarsest, k, &mut trial_rng);
        rebalance(coarsest, &mut part, k, max_w);
        refine(coarsest, &mut part, k, max_w);
        let balanced = PartState::new(coarsest, &part, k)
            .weight
            .iter()
            .all(|&w| w <= max_w);
        let cut = coarsest.cut(&part);
        let better = match &best {
            None => true,
            Some((b_bal, b_cut, _)) => (balanced && !b_bal) || (balanced == *b_bal && cut < *b_cut),
        };
        if better {
            best = Some((balanced, cut, part));
        }
    }
    let mut part = best.map(|(_, _, p)| p).unwrap_or_default();

    for i in (0..levels.len()).rev() {
        let fine = if i == 0 { &finest } else { &levels[i - 1].0 };
        let cmap = &levels[i].1;
        part = cmap.iter().map(|&c| part[c as usize]).collect();
        rebalance(fine, &mut part, k, max_w);
        refine(fine, &mut part, k, max_w);
    }
    PartitionMap::new(k, part, g)
}

/// Clusters per batch for partition-based training.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterBatchConfig {
    /// Clusters merged into one batch.
    pub q: usize,
    /// One batch per epoch instead of a sweep over all clusters.
    #[cfg_attr(feature = "serde", serde(default))]
    pub single_batch_per_epoch: bool,
}

impl ClusterBatchConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.q == 0 || self.q > k {
            return Err(Error::InvalidConfig(format!(
                "clusters per batch must be in 1..={k}, got {}",
                self.q
            )));
        }
        Ok(())
    }
}

/// `q` distinct clusters drawn uniformly, ascending.
pub fn choose_clusters(k: usize, q: usize, rng: &mut Rng) -> Vec<u32> {
    let mut c: Vec<u32> = index::sample(rng, k, q)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    c.sort_unstable();
    c
}

/// Cluster groups for one epoch: a random permutation split into groups of
/// `q` (the last group may be smaller), or a single random group.
pub fn epoch_cluster_groups(k: usize, cfg: &ClusterBatchConfig, rng: &mut Rng) -> Vec<Vec<u32>> {
    if cfg.single_batch_per_epoch {
        return vec![choose_clusters(k, cfg.q, rng)];
    }
    let mut perm: Vec<u32> = (0..k as u32).collect();
    perm.shuffle(rng);
    perm.chunks(cfg.q)
        .map(|c| {
            let mut c = c.to_vec();
            c.sort_unstable();
            c
        })
        .collect()
}

/// Subgraph induced on the union of `clusters`, between-cluster edges included.
pub fn induce_clusters(g: &Graph, p: &PartitionMap, clusters: &[u32]) -> Result<Subgraph> {
    let mut chosen = vec![false; p.num_clusters];
    for &c in clusters {
        *chosen
            .get_mut(c as usize)
            .ok_or_else(|| Error::InvalidPartition(format!("cluster {c} out of range")))? = true;
    }
    let nodes: Vec<u32> = (0..g.num_nodes() as u32)
        .filter(|&n| chosen[p.assignment[n as usize] as usize])
        .collect();
    g.induce_subgraph(&nodes)
}

/// Draws `cfg.q` clusters and induces their union.
pub fn form_cluster_batch(
    g: &Graph,
    p: &PartitionMap,
    cfg: &ClusterBatchConfig,
    rng: &mut Rng,
) -> Result<(Vec<u32>, Subgraph)> {
    cfg.validate(p.num_clusters)?;
    let clusters = choose_clusters(p.num_clusters, cfg.q, rng);
    let sub = induce_clusters(g, p, &clusters)?;
    Ok((clusters, sub))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> Graph {
        Graph::from_undirected_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap()
    }

    #[test]
    fn single_cluster() {
        let p = partition_graph(&two_triangles(), 1).unwrap();
        assert_eq!(p.assignment, vec![0; 6]);
        assert_eq!(p.edge_cut, 0);
    }

    #[test]
    fn disjoint_triangles_separate() {
        let p = partition_graph(&two_triangles(), 2).unwrap();
        assert_eq!(p.edge_cut, 0);
        assert_eq!(p.cluster_sizes(), vec![3, 3]);
        assert_eq!(p.assignment[0], p.assignment[1]);
        assert_eq!(p.assignment[3], p.assignment[5]);
    }

    #[test]
    fn bad_cluster_counts() {
        assert!(partition_graph(&two_triangles(), 0).is_err());
        assert!(partition_graph(&two_triangles(), 7).is_err());
        let p = partition_graph(&two_triangles(), 6).unwrap();
        assert_eq!(p.cluster_sizes(), vec![1; 6]);
    }

    #[test]
    fn validate_catches_empty_cluster() {
        let g = two_triangles();
        assert!(PartitionMap::new(3, vec![0, 0, 0, 1, 1, 1], &g).is_err());
        assert!(PartitionMap::new(2, vec![0, 0, 0, 1, 1], &g).is_err());
        assert!(PartitionMap::new(2, vec![0, 0, 0, 1, 1, 2], &g).is_err());
    }

    #[test]
    fn cluster_batches_on_triangles() {
        let g = two_triangles();
        let p = partition_graph(&g, 2).unwrap();
        let mut rng = stream_rng(1, Stream::Schedule, 0, 0);
        let cfg = ClusterBatchConfig {
            q: 1,
            single_batch_per_epoch: true,
        };
        let (chosen, sub) = form_cluster_batch(&g, &p, &cfg, &mut rng).unwrap();
        assert_eq!(chosen.len(), 1);
        assert_eq!(sub.nodes.len(), 3);
        assert_eq!(sub.graph.num_undirected_edges(), 3);

        let all = induce_clusters(&g, &p, &[0, 1]).unwrap();
        assert_eq!(all.graph, g);

        let sweep = ClusterBatchConfig {
            q: 2,
            single_batch_per_epoch: false,
        };
        assert_eq!(epoch_cluster_groups(2, &sweep, &mut rng), vec![vec![0, 1]]);
        assert!(ClusterBatchConfig {
            q: 3,
            single_batch_per_epoch: false
        }
        .validate(2)
        .is_err());
    }
}
