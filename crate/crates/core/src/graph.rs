//! Graphs, node partitions and block statistics.
//!
//! Nodes are `0..n`. Cluster labels are `0..k` internally; file formats and
//! user-facing output add one.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::Matrix;

/// Undirected simple graph stored as a sorted edge list plus CSR adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Graph {
    /// Builds a graph from node pairs in any orientation.
    ///
    /// Duplicates (including `(j, i)` after `(i, j)`) are merged. Self-loops
    /// and out-of-range endpoints are rejected.
    pub fn from_edges<I>(n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(invalid("graph must have at least one node"));
        }
        let mut edges = Vec::new();
        for (i, j) in pairs {
            if i >= n || j >= n {
                return Err(invalid(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(invalid(format!("self-loop at node {i}")));
            }
            edges.push(if i < j { (i, j) } else { (j, i) });
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self::from_sorted_unique(n, edges))
    }

    /// Graph with no edges.
    pub fn empty(n: usize) -> Result<Self> {
        Self::from_edges(n, core::iter::empty())
    }

    pub(crate) fn from_sorted_unique(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut degree = vec![0usize; n];
        for &(i, j) in &edges {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; 2 * edges.len()];
        for &(i, j) in &edges {
            neighbors[fill[i]] = j;
            fill[i] += 1;
            neighbors[fill[j]] = i;
            fill[j] += 1;
        }
        // edges are sorted, so each adjacency list is filled in increasing
        // order for the `i` side but not the `j` side
        for v in 0..n {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Graph {
            n,
            edges,
            offsets,
            neighbors,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.neighbors(i).binary_search(&j).is_ok()
    }

    pub fn pair_count(&self) -> u64 {
        let n = self.n as u64;
        n * n.saturating_sub(1) / 2
    }

    /// Edge density `|E| / (n(n-1)/2)`; zero for a single node.
    pub fn density(&self) -> f64 {
        match self.pair_count() {
            0 => 0.0,
            p => self.edges.len() as f64 / p as f64,
        }
    }
}

/// Assignment of nodes to `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl Partition {
    /// Checks that every label is below `k` and that no cluster is empty.
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("partition needs at least one cluster"));
        }
        let mut sizes = vec![0usize; k];
        for (node, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(invalid(format!(
                    "node {node} has label {l}, outside 0..{k}"
                )));
            }
            sizes[l] += 1;
        }
        if let Some(cluster) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::EmptyCluster { cluster });
        }
        Ok(Partition { labels, sizes })
    }

    /// Relabels arbitrary labels onto `0..k'`, keeping the relative order
    /// of the original label values. Empty input is rejected.
    pub fn compact(labels: &[usize]) -> Result<Self> {
        let (compacted, k) = compact_labels(labels);
        Partition::new(compacted, k)
    }

    /// All nodes in a single cluster.
    pub fn single(n: usize) -> Self {
        Partition {
            labels: vec![0; n],
            sizes: vec![n],
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Renames cluster `c` to `perm[c]`. `perm` must be a permutation of `0..k`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if !is_permutation(perm, self.k()) {
            return Err(invalid("not a permutation of the cluster labels"));
        }
        Partition::new(self.labels.iter().map(|&l| perm[l]).collect(), self.k())
    }
}

/// Maps label values onto `0..k'` in increasing order of the original values.
/// Returns the compacted labels and `k'`.
pub fn compact_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let max = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut remap = vec![usize::MAX; max];
    for &l in labels {
        remap[l] = 0;
    }
    let mut next = 0;
    for slot in remap.iter_mut().filter(|s| **s == 0) {
        *slot = next;
        next += 1;
    }
    (labels.iter().map(|&l| remap[l]).collect(), next)
}

pub(crate) fn is_permutation(perm: &[usize], k: usize) -> bool {
    if perm.len() != k {
        return false;
    }
    let mut seen = vec![false; k];
    perm.iter()
        .all(|&p| p < k && !core::mem::replace(&mut seen[p], true))
}

/// Edge and pair counts for every block `(a, b)` of a partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStats {
    k: usize,
    edges: Vec<u64>,
    pairs: Vec<u64>,
}

impl BlockStats {
    /// Builds stats from explicit symmetric `k x k` row-major count tables.
    pub fn from_counts(k: usize, edges: Vec<u64>, pairs: Vec<u64>) -> Result<Self> {
        if k == 0 || edges.len() != k * k || pairs.len() != k * k {
            return Err(invalid("block count tables must be k x k with k >= 1"));
        }
        for a in 0..k {
            for b in 0..k {
                let (x, m) = (edges[a * k + b], pairs[a * k + b]);
                if x != edges[b * k + a] || m != pairs[b * k + a] {
                    return Err(invalid(format!("block ({a}, {b}) is not symmetric")));
                }
                if x > m {
                    return Err(invalid(format!(
                        "block ({a}, {b}) has {x} edges but only {m} pairs"
                    )));
                }
            }
        }
        Ok(BlockStats { k, edges, pairs })
    }

    /// Counts over the subgraph induced by `nodes`, with the cluster count
    /// fixed at `k`. Clusters with no member in `nodes` are allowed and
    /// give zero-pair blocks.
    pub fn for_subset(graph: &Graph, labels: &[usize], k: usize, nodes: &[usize]) -> Result<Self> {
        if labels.len() != graph.n() {
            return Err(invalid(format!(
                "{} labels for a graph with {} nodes",
                labels.len(),
                graph.n()
            )));
        }
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= k) {
            return Err(invalid(format!("label {l} outside 0..{k}")));
        }
        let mut member = vec![false; graph.n()];
        let mut sizes = vec![0u64; k];
        for &v in nodes {
            if v >= graph.n() {
                return Err(invalid(format!("node {v} out of range")));
            }
            if !core::mem::replace(&mut member[v], true) {
                sizes[labels[v]] += 1;
            }
        }
        let mut stats = BlockStats::with_sizes(k, &sizes);
        for &(i, j) in graph.edges() {
            if member[i] && member[j] {
                stats.add_edge(labels[i], labels[j]);
            }
        }
        Ok(stats)
    }

    fn with_sizes(k: usize, sizes: &[u64]) -> Self {
        let mut pairs = vec![0u64; k * k];
        for a in 0..k {
            for b in 0..k {
                pairs[a * k + b] = if a == b {
                    sizes[a] * sizes[a].saturating_sub(1) / 2
                } else {
                    sizes[a] * sizes[b]
                };
            }
        }
        BlockStats {
            k,
            edges: vec![0; k * k],
            pairs,
        }
    }

    fn add_edge(&mut self, a: usize, b: usize) {
        self.edges[a * self.k + b] += 1;
        if a != b {
            self.edges[b * self.k + a] += 1;
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `X^B_ab`, the number of edges in block `(a, b)`.
    pub fn edges(&self, a: usize, b: usize) -> u64 {
        self.edges[a * self.k + b]
    }

    /// `n_ab`, the number of node pairs in block `(a, b)`.
    pub fn pairs(&self, a: usize, b: usize) -> u64 {
        self.pairs[a * self.k + b]
    }

    /// Sum of edge counts over blocks with `a <= b`.
    pub fn total_edges(&self) -> u64 {
        self.upper().map(|(_, _, x, _)| x).sum()
    }

    pub fn total_pairs(&self) -> u64 {
        self.upper().map(|(_, _, _, m)| m).sum()
    }

    /// Pooled edge frequency over all blocks, zero when there are no pairs.
    pub fn density(&self) -> f64 {
        match self.total_pairs() {
            0 => 0.0,
            m => self.total_edges() as f64 / m as f64,
        }
    }

    /// `(a, a, X^B_aa, n_aa)` for every diagonal block.
    pub fn diagonal(&self) -> impl Iterator<Item = (usize, usize, u64, u64)> + '_ {
        (0..self.k).map(move |a| (a, a, self.edges(a, a), self.pairs(a, a)))
    }

    /// `(a, b, X^B_ab, n_ab)` for every block with `a < b`.
    pub fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize, u64, u64)> + '_ {
        (0..self.k).flat_map(move |a| {
            (a + 1..self.k).map(move |b| (a, b, self.edges(a, b), self.pairs(a, b)))
        })
    }

    /// Diagonal and upper off-diagonal blocks.
    pub fn upper(&self) -> impl Iterator<Item = (usize, usize, u64, u64)> + '_ {
        self.diagonal().chain(self.off_diagonal())
    }
}

/// Per-block edge and pair counts of `graph` under `partition`.
pub fn block_stats(graph: &Graph, partition: &Partition) -> Result<BlockStats> {
    if partition.n() != graph.n() {
        return Err(invalid(format!(
            "partition covers {} nodes, graph has {}",
            partition.n(),
            graph.n()
        )));
    }
    let sizes: Vec<u64> = partition.sizes().iter().map(|&s| s as u64).collect();
    let mut stats = BlockStats::with_sizes(partition.k(), &sizes);
    for &(i, j) in graph.edges() {
        stats.add_edge(partition.label(i), partition.label(j));
    }
    Ok(stats)
}

/// Node-level probability matrix `M[i][j] = theta[z_i][z_j]`.
///
/// The diagonal is filled the same way; callers that follow the no-self-loop
/// convention ignore it.
pub fn expand_theta(theta: &Matrix, partition: &Partition) -> Result<Matrix> {
    check_theta_covers(theta, partition)?;
    let labels = partition.labels();
    Ok(Matrix::from_fn(labels.len(), labels.len(), |i, j| {
        theta[(labels[i], labels[j])]
    }))
}

pub(crate) fn check_theta_covers(theta: &Matrix, partition: &Partition) -> Result<()> {
    if !theta.is_square() {
        return Err(invalid("connectivity matrix must be square"));
    }
    if partition.k() > theta.rows() {
        return Err(invalid(format!(
            "partition has {} clusters but theta is {}x{}",
            partition.k(),
            theta.rows(),
            theta.cols()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_node() -> (Graph, Partition) {
        let g = Graph::from_edges(4, [(0, 1), (0, 2), (2, 3)]).unwrap();
        let p = Partition::new(vec![0, 0, 1, 1], 2).unwrap();
        (g, p)
    }

    #[test]
    fn block_stats_small_example() {
        let (g, p) = four_node();
        let s = block_stats(&g, &p).unwrap();
        assert_eq!((s.edges(0, 0), s.edges(0, 1), s.edges(1, 1)), (1, 1, 1));
        assert_eq!((s.pairs(0, 0), s.pairs(0, 1), s.pairs(1, 1)), (1, 4, 1));
        assert_eq!(s.edges(1, 0), s.edges(0, 1));
    }

    #[test]
    fn single_cluster_holds_everything() {
        let (g, _) = four_node();
        let s = block_stats(&g, &Partition::single(4)).unwrap();
        assert_eq!(s.edges(0, 0), 3);
        assert_eq!(s.pairs(0, 0), 6);
    }

    #[test]
    fn empty_graph_counts() {
        let g = Graph::empty(5).unwrap();
        let p = Partition::new(vec![0, 1, 1, 2, 2], 3).unwrap();
        let s = block_stats(&g, &p).unwrap();
        assert_eq!(s.total_edges(), 0);
        assert_eq!(s.pairs(0, 0), 0);
        assert_eq!(s.pairs(1, 1), 1);
        assert_eq!(s.pairs(1, 2), 4);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let (g, _) = four_node();
        let p = Partition::new(vec![0, 0, 1], 2).unwrap();
        assert!(matches!(block_stats(&g, &p), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn empty_cluster_is_rejected() {
        assert_eq!(
            Partition::new(vec![0, 0, 2], 3),
            Err(Error::EmptyCluster { cluster: 1 })
        );
    }

    #[test]
    fn compaction_keeps_label_order() {
        let p = Partition::compact(&[5, 2, 5, 9]).unwrap();
        assert_eq!(p.labels(), &[1, 0, 1, 2]);
        assert_eq!(p.sizes(), &[1, 2, 1]);
    }

    #[test]
    fn graph_rejects_self_loops_and_merges_duplicates() {
        assert!(Graph::from_edges(3, [(1, 1)]).is_err());
        assert!(Graph::from_edges(3, [(0, 3)]).is_err());
        let g = Graph::from_edges(3, [(0, 1), (1, 0), (2, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert!(g.has_edge(2, 1));
        assert!(!g.has_edge(0, 2));
    }

    #[test]
    fn expand_theta_lookups() {
        let theta = Matrix::from_rows(&[[0.9, 0.1], [0.1, 0.5]]);
        let p = Partition::new(vec![0, 0, 1], 2).unwrap();
        let m = expand_theta(&theta, &p).unwrap();
        assert_eq!(m[(0, 1)], 0.9);
        assert_eq!(m[(0, 2)], 0.1);
        assert_eq!(m[(2, 1)], 0.1);

        let one = expand_theta(&Matrix::filled(1, 1, 0.3), &Partition::single(3)).unwrap();
        assert!((0..3).all(|i| (0..3).all(|j| i == j || one[(i, j)] == 0.3)));

        let too_small = Matrix::filled(1, 1, 0.3);
        assert!(expand_theta(&too_small, &p).is_err());
    }

    #[test]
    fn subset_counts_allow_missing_clusters() {
        let (g, _) = four_node();
        let s = BlockStats::for_subset(&g, &[0, 0, 1, 2], 3, &[0, 1, 2]).unwrap();
        assert_eq!(s.pairs(2, 2), 0);
        assert_eq!(s.pairs(0, 2), 0);
        assert_eq!(s.edges(0, 0), 1);
        assert_eq!(s.edges(0, 1), 1);
        assert_eq!(s.total_edges(), 2);
    }

    #[test]
    fn from_counts_validates() {
        assert!(BlockStats::from_counts(1, vec![3], vec![2]).is_err());
        assert!(BlockStats::from_counts(2, vec![0, 1, 2, 0], vec![1, 4, 4, 1]).is_err());
        assert!(BlockStats::from_counts(2, vec![0, 1, 1, 0], vec![1, 4, 4, 1]).is_ok());
    }
}
