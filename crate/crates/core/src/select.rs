//! Scoring candidate partitions and choosing the number of blocks.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::eb::{fit_hyperparams, HyperFit, HyperParams};
use crate::error::{invalid, Error, Result};
use crate::graph::{block_stats, BlockStats, Graph, Partition};
use crate::numerics::ln_gamma;

/// Symmetric Dirichlet concentration for the Jeffreys prior on block proportions.
pub const JEFFREYS_TAU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectionScore {
    #[cfg_attr(feature = "serde", serde(rename = "K"))]
    pub k: usize,
    pub j_z: f64,
    pub penalty: f64,
    /// `j_z - penalty`.
    pub total: f64,
    pub cvrp: f64,
    pub hyper: HyperParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CvrpMode {
    /// `Σ n_i / n`, which always equals 1.
    Literal,
    /// `Σ (n_i / n)²`.
    #[default]
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Criterion {
    #[default]
    #[cfg_attr(feature = "serde", serde(rename = "EB"))]
    Eb,
    #[cfg_attr(feature = "serde", serde(rename = "CVRP"))]
    Cvrp,
}

/// `log [Γ(Kτ) Π Γ(n_i + τ) / (Γ(n + Kτ) Γ(τ)^K)]`.
pub fn log_dirichlet_marginal(sizes: &[usize], tau: f64) -> Result<f64> {
    if sizes.is_empty() {
        return Err(invalid("cluster sizes are empty"));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain {
            function: "log_dirichlet_marginal",
            value: tau,
        });
    }
    let k = sizes.len() as f64;
    let n: usize = sizes.iter().sum();
    let ln_tau = ln_gamma(tau);
    let body: f64 = sizes
        .iter()
        .map(|&s| ln_gamma(s as f64 + tau) - ln_tau)
        .sum();
    Ok(ln_gamma(k * tau) - ln_gamma(n as f64 + k * tau) + body)
}

/// `(1/2) [(K - 1) log n + K(K + 1)/2 · log(n(n - 1)/2)]`.
pub fn eb_penalty(k: usize, n: usize) -> Result<f64> {
    if k == 0 || n < 2 {
        return Err(invalid(alloc::format!(
            "penalty needs K >= 1 and n >= 2, got K={k}, n={n}"
        )));
    }
    let (kf, nf) = (k as f64, n as f64);
    let pairs = nf * (nf - 1.0) / 2.0;
    Ok(0.5 * ((kf - 1.0) * nf.ln() + kf * (kf + 1.0) / 2.0 * pairs.ln()))
}

/// Cross-validated risk of the precision parameter for a partition of `n` nodes.
pub fn cvrp_score(partition: &Partition, n: usize, mode: CvrpMode) -> Result<f64> {
    if n <= 1 {
        return Err(invalid(alloc::format!("cvrp needs n >= 2, got {n}")));
    }
    let k = partition.k() as f64;
    let nf = n as f64;
    let spread: f64 = match mode {
        CvrpMode::Literal => partition.sizes().iter().map(|&s| s as f64 / nf).sum(),
        CvrpMode::Squared => partition
            .sizes()
            .iter()
            .map(|&s| (s as f64 / nf).powi(2))
            .sum(),
    };
    Ok(2.0 * k / (nf - 1.0) - (nf + 1.0) * k / (nf - 1.0) * spread)
}

/// Fitted marginal log-likelihood plus the Dirichlet term, from block counts.
pub fn j_z_from_stats(stats: &BlockStats, sizes: &[usize]) -> Result<(f64, HyperFit)> {
    let fit = fit_hyperparams(stats)?;
    Ok((
        fit.loglik() + log_dirichlet_marginal(sizes, JEFFREYS_TAU)?,
        fit,
    ))
}

/// `J_Z`: marginal likelihood at the fitted hyperparameters plus the
/// Jeffreys-Dirichlet term for the cluster sizes.
pub fn j_z(graph: &Graph, partition: &Partition) -> Result<(f64, HyperParams)> {
    let stats = block_stats(graph, partition)?;
    let (score, fit) = j_z_from_stats(&stats, partition.sizes())?;
    Ok((score, fit.params))
}

/// Full score row for one candidate.
pub fn score_partition(
    graph: &Graph,
    partition: &Partition,
    mode: CvrpMode,
) -> Result<SelectionScore> {
    let (j, hyper) = j_z(graph, partition)?;
    let penalty = eb_penalty(partition.k(), graph.n())?;
    Ok(SelectionScore {
        k: partition.k(),
        j_z: j,
        penalty,
        total: j - penalty,
        cvrp: cvrp_score(partition, graph.n(), mode)?,
        hyper,
    })
}

/// Index of the winning score: EB maximizes `total`, CVRP minimizes `cvrp`.
/// Ties go to the smaller K, then to the earlier entry.
pub fn best_index(scores: &[SelectionScore], criterion: Criterion) -> Option<usize> {
    let key = |s: &SelectionScore| match criterion {
        Criterion::Eb => -s.total,
        Criterion::Cvrp => s.cvrp,
    };
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let (kb, ks) = (key(&scores[b]), key(s));
                if ks < kb || (ks == kb && s.k < scores[b].k) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Scores every candidate and returns the winner with the full score table.
pub fn select_partition<'a>(
    graph: &Graph,
    candidates: &'a [Partition],
    criterion: Criterion,
    mode: CvrpMode,
) -> Result<(&'a Partition, Vec<SelectionScore>)> {
    if candidates.is_empty() {
        return Err(invalid("no candidate partitions"));
    }
    let scores = candidates
        .iter()
        .map(|p| score_partition(graph, p, mode))
        .collect::<Result<Vec<_>>>()?;
    let best = best_index(&scores, criterion).expect("nonempty");
    Ok((&candidates[best], scores))
}
