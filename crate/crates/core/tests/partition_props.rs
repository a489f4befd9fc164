mod common;

use common::random_graph;
use rand::seq::SliceRandom;
use soupgnn_core::partition::{
    edge_cut, epoch_cluster_groups, form_cluster_batch, induce_clusters, partition_graph,
    ClusterBatchConfig,
};
use soupgnn_core::rng::{stream_rng, Stream};
use soupgnn_core::synth::{grid_graph, sbm_graph, SbmConfig};

fn random_balanced_cut(g: &soupgnn_core::Graph, k: usize, seed: u64) -> usize {
    let n = g.num_nodes();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Fixture, 200, 0));
    let mut assignment = vec![0u32; n];
    for (pos, &v) in order.iter().enumerate() {
        assignment[v] = (pos * k / n) as u32;
    }
    edge_cut(g, &assignment)
}

#[test]
fn grid_cut_beats_random_balanced_partitions() {
    let g = grid_graph(16, 16).unwrap();
    let p = partition_graph(&g, 4).unwrap();
    let mean_random = (0..100)
        .map(|s| random_balanced_cut(&g, 4, s) as f64)
        .sum::<f64>()
        / 100.0;
    assert!(
        p.edge_cut as f64 <= 0.5 * mean_random,
        "cut {} vs random mean {mean_random}",
        p.edge_cut
    );
    assert_eq!(p.edge_cut, edge_cut(&g, &p.assignment));
}

#[test]
fn partitions_are_balanced_disjoint_covers() {
    let (sbm, _) = sbm_graph(&SbmConfig::new(1000, 4, 0.05, 0.005, 1)).unwrap();
    let cases = [
        (sbm, 32),
        (random_graph(300, 0.02, 2), 8),
        (random_graph(120, 0.01, 3), 5),
        (grid_graph(10, 7).unwrap(), 3),
    ];
    for (g, k) in cases {
        let p = partition_graph(&g, k).unwrap();
        p.validate(g.num_nodes()).unwrap();
        let sizes = p.cluster_sizes();
        assert_eq!(sizes.iter().sum::<usize>(), g.num_nodes());
        assert!(sizes.iter().all(|&s| s > 0));
        let cap = (1.1 * g.num_nodes() as f64 / k as f64).ceil() as usize;
        assert!(sizes.iter().all(|&s| s <= cap), "sizes {sizes:?} cap {cap}");
        assert_eq!(partition_graph(&g, k).unwrap(), p, "deterministic");
    }
}

#[test]
fn cluster_batch_edges_match_brute_force() {
    let g = grid_graph(16, 16).unwrap();
    let p = partition_graph(&g, 4).unwrap();
    let cfg = ClusterBatchConfig {
        q: 2,
        single_batch_per_epoch: true,
    };
    for seed in 0..10 {
        let (chosen, sub) =
            form_cluster_batch(&g, &p, &cfg, &mut stream_rng(seed, Stream::Schedule, 0, 0))
                .unwrap();
        assert_eq!(chosen.len(), 2);
        let inside = |v: u32| chosen.contains(&p.assignment[v as usize]);
        let expected = g
            .undirected_edges()
            .filter(|&(u, v)| inside(u) && inside(v))
            .count();
        assert_eq!(sub.graph.num_undirected_edges(), expected);
        assert_eq!(sub.nodes.len(), (0..256).filter(|&v| inside(v)).count());
    }
}

#[test]
fn all_clusters_give_the_full_graph() {
    let g = random_graph(90, 0.05, 4);
    let p = partition_graph(&g, 6).unwrap();
    let all: Vec<u32> = (0..6).collect();
    assert_eq!(induce_clusters(&g, &p, &all).unwrap().graph, g);
}

#[test]
fn epoch_groups_cover_every_cluster_once() {
    let cfg = ClusterBatchConfig {
        q: 3,
        single_batch_per_epoch: false,
    };
    let mut rng = stream_rng(5, Stream::Schedule, 1, 0);
    let groups = epoch_cluster_groups(8, &cfg, &mut rng);
    assert_eq!(groups.len(), 3);
    let mut flat: Vec<u32> = groups.concat();
    flat.sort_unstable();
    assert_eq!(flat, (0..8).collect::<Vec<_>>());
    let again = epoch_cluster_groups(8, &cfg, &mut stream_rng(5, Stream::Schedule, 1, 0));
    assert_eq!(groups, again);
}
