//! Held-out likelihood protocol for annotated graphs: estimate the
//! connectivity of the annotation blocks from a random share of the nodes
//! and score every pair that touches the remaining nodes.

use blockshrink_core::eb::{empirical_bayes, fixed_prior_estimate, mle_estimate, JEFFREYS};
use blockshrink_core::eval::{split_nodes, test_loglik};
use blockshrink_core::graph::{BlockStats, Graph, Partition};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub split: usize,
    pub seed: u64,
    pub train: usize,
    pub test: usize,
    pub loglik_mle: f64,
    pub loglik_eb: f64,
    pub loglik_fixed_prior: f64,
}

/// Runs one split; seed `base_seed + split`.
pub fn run_split(
    graph: &Graph,
    annotation: &Partition,
    fraction: f64,
    split: usize,
    base_seed: u64,
) -> Result<SplitResult> {
    let seed = base_seed.wrapping_add(split as u64);
    let (train, test) = split_nodes(graph.n(), fraction, seed)?;
    let stats = BlockStats::for_subset(graph, annotation.labels(), annotation.k(), &train)?;
    let mle = mle_estimate(&stats);
    let (eb, _) = empirical_bayes(&stats)?;
    let fixed = fixed_prior_estimate(&stats, JEFFREYS, JEFFREYS)?;
    let score = |theta| test_loglik(graph, annotation, theta, &train, &test);
    Ok(SplitResult {
        split,
        seed,
        train: train.len(),
        test: test.len(),
        loglik_mle: score(&mle.theta)?,
        loglik_eb: score(&eb.theta)?,
        loglik_fixed_prior: score(&fixed.theta)?,
    })
}

/// Runs `splits` independent splits in parallel; results in split order.
pub fn split_protocol(
    graph: &Graph,
    annotation: &Partition,
    splits: usize,
    fraction: f64,
    base_seed: u64,
) -> Result<Vec<SplitResult>> {
    if splits == 0 {
        return Err(Error::Config("need at least one split".into()));
    }
    if annotation.n() != graph.n() {
        return Err(Error::Data("annotation does not cover the graph".into()));
    }
    (0..splits)
        .into_par_iter()
        .map(|s| run_split(graph, annotation, fraction, s, base_seed))
        .collect()
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        (values[m - 1] + values[m]) / 2.0
    }
}

/// Medians of the three log-likelihood columns: (MLE, EB, fixed prior).
pub fn medians(results: &[SplitResult]) -> (f64, f64, f64) {
    let col = |f: fn(&SplitResult) -> f64| median(&mut results.iter().map(f).collect::<Vec<_>>());
    (
        col(|r| r.loglik_mle),
        col(|r| r.loglik_eb),
        col(|r| r.loglik_fixed_prior),
    )
}

pub fn splits_csv(results: &[SplitResult]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in results {
        w.serialize(r)?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}
