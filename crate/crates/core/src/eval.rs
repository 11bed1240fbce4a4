//! Comparison metrics: SBM-space MSE, the MSE-optimal reference K, selection
//! deviations, annotation-based connectivity and held-out likelihood.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::eb::{mle_estimate, ConnectivityEstimate};
use crate::error::{invalid, Result};
use crate::graph::{block_stats, check_theta_covers, Graph, Partition};
use crate::samplers::rng_from_seed;
use crate::select::SelectionScore;
use crate::Matrix;

/// Clamp applied to probabilities before taking logs in [`test_loglik`].
pub const PROB_CLAMP: f64 = 1e-9;
/// Default share of nodes in the training set.
pub const TRAIN_FRACTION: f64 = 0.7;

/// One fitted candidate within one replicate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentRecord {
    pub replicate: usize,
    #[cfg_attr(feature = "serde", serde(rename = "K_input"))]
    pub k_input: usize,
    #[cfg_attr(feature = "serde", serde(rename = "K_returned"))]
    pub k_returned: usize,
    pub mse_mle: f64,
    pub mse_eb: f64,
    pub mse_vbem: f64,
    pub scores: Vec<SelectionScore>,
    pub seed: u64,
}

/// Mean squared difference between two expanded connectivity matrices over
/// node pairs `i ≠ j`.
///
/// Nodes are grouped by their (estimated, true) label pair, so the cost is
/// quadratic in the number of occupied label pairs rather than in `n`.
pub fn mse_sbm(
    est_theta: &Matrix,
    est_partition: &Partition,
    true_theta: &Matrix,
    true_partition: &Partition,
) -> Result<f64> {
    let n = est_partition.n();
    if true_partition.n() != n {
        return Err(invalid(alloc::format!(
            "partitions cover {n} and {} nodes",
            true_partition.n()
        )));
    }
    check_theta_covers(est_theta, est_partition)?;
    check_theta_covers(true_theta, true_partition)?;
    if n < 2 {
        return Err(invalid("MSE needs at least two nodes"));
    }
    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&a, &c) in est_partition.labels().iter().zip(true_partition.labels()) {
        *cells.entry((a, c)).or_insert(0.0) += 1.0;
    }
    let cells: Vec<((usize, usize), f64)> = cells.into_iter().collect();
    let mut sum = 0.0;
    for (x, &((a, c), m)) in cells.iter().enumerate() {
        let d = est_theta[(a, a)] - true_theta[(c, c)];
        sum += m * (m - 1.0) / 2.0 * d * d;
        for &((b, e), w) in &cells[x + 1..] {
            let d = est_theta[(a, b)] - true_theta[(c, e)];
            sum += m * w * d * d;
        }
    }
    let nf = n as f64;
    Ok((sum / (nf * (nf - 1.0) / 2.0)).max(0.0))
}

/// K minimizing the MLE's MSE; ties go to the smaller K.
pub fn k_tilde(curve: &[(usize, f64)]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &(k, mse) in curve {
        best = match best {
            Some((bk, bm)) if bm < mse || (bm == mse && bk <= k) => Some((bk, bm)),
            _ => Some((k, mse)),
        };
    }
    best.map(|(k, _)| k)
        .ok_or_else(|| invalid("empty MSE curve"))
}

/// `(E_K*, E_K̃)`: mean absolute deviation of the selected K from the true K
/// and from the per-replicate MSE-optimal K.
pub fn deviation_metrics(
    k_hats: &[usize],
    k_star: usize,
    k_tildes: &[usize],
) -> Result<(f64, f64)> {
    if k_hats.is_empty() || k_hats.len() != k_tildes.len() {
        return Err(invalid(alloc::format!(
            "need equal nonempty lists, got {} and {}",
            k_hats.len(),
            k_tildes.len()
        )));
    }
    let m = k_hats.len() as f64;
    let e_star = k_hats
        .iter()
        .map(|&k| k.abs_diff(k_star) as f64)
        .sum::<f64>()
        / m;
    let e_tilde = k_hats
        .iter()
        .zip(k_tildes)
        .map(|(&k, &t)| k.abs_diff(t) as f64)
        .sum::<f64>()
        / m;
    Ok((e_star, e_tilde))
}

/// Block edge frequencies under an annotation; empty blocks get the pooled
/// density and are flagged.
pub fn theta_star(graph: &Graph, annotation: &Partition) -> Result<ConnectivityEstimate> {
    Ok(mle_estimate(&block_stats(graph, annotation)?))
}

/// Round-half-up of `fraction · n` nodes drawn without replacement for
/// training; the rest form the test set. Both lists are sorted.
pub fn split_nodes(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(invalid(alloc::format!(
            "fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let take = ((fraction * n as f64) + 0.5).floor() as usize;
    let mut nodes: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(seed);
    for i in 0..take.min(n) {
        let j = rng.random_range(i..n);
        nodes.swap(i, j);
    }
    let mut test = nodes.split_off(take.min(n));
    nodes.sort_unstable();
    test.sort_unstable();
    Ok((nodes, test))
}

/// Bernoulli log-likelihood of the pairs touching the test set: every
/// train-test pair and every test-test pair. Probabilities are clamped to
/// `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub fn test_loglik(
    graph: &Graph,
    labels: &Partition,
    theta_hat: &Matrix,
    train: &[usize],
    test: &[usize],
) -> Result<f64> {
    if labels.n() != graph.n() {
        return Err(invalid("labels do not cover the graph"));
    }
    check_theta_covers(theta_hat, labels)?;
    if train.iter().chain(test).any(|&v| v >= graph.n()) {
        return Err(invalid("split refers to a node outside the graph"));
    }
    let term = |i: usize, j: usize| {
        let p = theta_hat[(labels.label(i), labels.label(j))].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        if graph.has_edge(i, j) {
            p.ln()
        } else {
            (-p).ln_1p()
        }
    };
    let mut sum = 0.0;
    for &t in test {
        for &r in train {
            sum += term(r, t);
        }
    }
    for (x, &j) in test.iter().enumerate() {
        for &k in &test[..x] {
            sum += term(k, j);
        }
    }
    Ok(sum)
}
