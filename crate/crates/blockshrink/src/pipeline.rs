//! Detection, estimation and scoring over a range of input K.

use blockshrink_core::community::{detect_with, SpectralEmbedding, VemOptions};
use blockshrink_core::eb::{eb_estimate, mle_estimate, ConnectivityEstimate};
use blockshrink_core::graph::{block_stats, Graph, Partition};
use blockshrink_core::graphon::{build_step_graphon, StepGraphon};
use blockshrink_core::select::{
    best_index, cvrp_score, eb_penalty, j_z_from_stats, Criterion, CvrpMode, SelectionScore,
};

use crate::error::{Error, Result};

/// Everything fitted for one input K.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub k_input: usize,
    pub partition: Partition,
    pub mle: ConnectivityEstimate,
    pub eb: ConnectivityEstimate,
    pub vbem: ConnectivityEstimate,
    pub score: SelectionScore,
    pub vem_converged: bool,
}

impl Candidate {
    pub fn k_returned(&self) -> usize {
        self.partition.k()
    }

    /// EB estimate as a step graphon in identifiable order.
    pub fn step_graphon(&self) -> Result<StepGraphon> {
        Ok(build_step_graphon(&self.partition, &self.eb.theta)?
            .reorder_identifiable()
            .0)
    }
}

/// Checks a K range against a graph size.
pub fn check_k_range(k_range: &[usize], n: usize) -> Result<()> {
    if k_range.is_empty() {
        return Err(Error::Config("K range is empty".into()));
    }
    if let Some(&k) = k_range.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::Config(format!("K = {k} is outside 1..={n}")));
    }
    if n < 2 {
        return Err(Error::Config(format!(
            "graph needs at least two nodes, has {n}"
        )));
    }
    Ok(())
}

/// Fits one candidate from a given partition.
pub fn fit_partition(
    graph: &Graph,
    k_input: usize,
    partition: Partition,
    vbem_theta: blockshrink_core::Matrix,
    mode: CvrpMode,
) -> Result<Candidate> {
    let stats = block_stats(graph, &partition)?;
    let (j, fit) = j_z_from_stats(&stats, partition.sizes())?;
    let mut eb = eb_estimate(&stats, &fit.params);
    eb.flags = fit.flags();
    let penalty = eb_penalty(partition.k(), graph.n())?;
    let score = SelectionScore {
        k: partition.k(),
        j_z: j,
        penalty,
        total: j - penalty,
        cvrp: cvrp_score(&partition, graph.n(), mode)?,
        hyper: fit.params,
    };
    Ok(Candidate {
        k_input,
        mle: mle_estimate(&stats),
        eb,
        vbem: ConnectivityEstimate::vbem_baseline(vbem_theta),
        score,
        partition,
        vem_converged: true,
    })
}

/// Runs spectral initialization and variational EM at every K, sharing one
/// embedding, then estimates and scores each returned partition.
pub fn fit_candidates(
    graph: &Graph,
    k_range: &[usize],
    seed: u64,
    vem: VemOptions,
    mode: CvrpMode,
) -> Result<Vec<Candidate>> {
    check_k_range(k_range, graph.n())?;
    let embedding = SpectralEmbedding::new(graph)?;
    k_range
        .iter()
        .map(|&k| {
            let out = detect_with(graph, &embedding, k, seed, vem)?;
            let converged = out.detection.converged;
            let mut c = fit_partition(graph, k, out.detection.partition, out.theta_vb, mode)?;
            c.vem_converged = converged;
            Ok(c)
        })
        .collect()
}

/// Index of the selected candidate.
pub fn choose(candidates: &[Candidate], criterion: Criterion) -> Option<usize> {
    let scores: Vec<SelectionScore> = candidates.iter().map(|c| c.score).collect();
    best_index(&scores, criterion)
}

/// Parses `a..b` (inclusive), `a..=b`, `a,b,c` or a single integer.
pub fn parse_k_range(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot parse K range {text:?}"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let text = text.trim();
    let ks = if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b) = (num(a)?, num(b)?);
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if ks.is_empty() {
        return Err(bad());
    }
    Ok(ks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_range_forms() {
        assert_eq!(parse_k_range("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_k_range("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_k_range("5").unwrap(), vec![5]);
        assert_eq!(parse_k_range("8, 10,12").unwrap(), vec![8, 10, 12]);
        assert!(parse_k_range("4..2").is_err());
        assert!(parse_k_range("").is_err());
        assert!(parse_k_range("a").is_err());
    }

    #[test]
    fn range_checked_against_graph() {
        assert!(check_k_range(&[], 5).is_err());
        assert!(check_k_range(&[0], 5).is_err());
        assert!(check_k_range(&[6], 5).is_err());
        assert!(check_k_range(&[1, 5], 5).is_ok());
    }
}
