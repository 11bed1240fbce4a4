//! Seeded random graph generators.
//!
//! Every sampler draws from a ChaCha20 stream created with
//! `ChaCha20Rng::seed_from_u64(seed)`. Node-level variables (labels or
//! latent positions) are drawn first, in node order, followed by one uniform
//! per unordered pair `(i, j)`, `i < j`, in row-major order. The same
//! `(spec, n, seed)` therefore gives the same graph on every platform.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{invalid, Result};
use crate::graph::{compact_labels, Graph, Partition};
use crate::graphon::StepGraphon;
use crate::Matrix;

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Stochastic block model parameters `(π, Θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    pi: Vec<f64>,
    theta: Matrix,
}

impl SbmSpec {
    pub fn new(pi: Vec<f64>, theta: Matrix) -> Result<Self> {
        let k = pi.len();
        if k == 0 {
            return Err(invalid("SBM needs at least one block"));
        }
        if pi.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("block proportions must be finite and nonnegative"));
        }
        if (pi.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(invalid("block proportions must sum to 1"));
        }
        if theta.rows() != k || !theta.is_symmetric(0.0) {
            return Err(invalid(format!("theta must be a symmetric {k}x{k} matrix")));
        }
        if theta.as_slice().iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(invalid("theta entries must lie in [0, 1]"));
        }
        Ok(SbmSpec { pi, theta })
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }

    /// The piecewise-constant graphon with cell widths `π` and values `Θ`.
    pub fn to_graphon(&self) -> Result<StepGraphon> {
        StepGraphon::from_proportions(&self.pi, self.theta.clone())
    }
}

/// Affiliation model: `ρλ` within blocks, `ρε` between, uniform `π`.
pub fn affiliation_theta(k: usize, lambda: f64, epsilon: f64, rho: f64) -> Result<SbmSpec> {
    if k == 0 {
        return Err(invalid("K must be at least 1"));
    }
    if !(0.0 <= epsilon && epsilon < lambda && lambda <= 1.0) {
        return Err(invalid(format!(
            "need 0 <= epsilon < lambda <= 1, got epsilon = {epsilon}, lambda = {lambda}"
        )));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid(format!("need 0 < rho <= 1, got {rho}")));
    }
    let theta = Matrix::from_fn(k, k, |a, b| rho * if a == b { lambda } else { epsilon });
    let mut pi = alloc::vec![1.0 / k as f64; k];
    // make the proportions sum to one exactly
    let rest: f64 = pi[1..].iter().sum();
    pi[0] = 1.0 - rest;
    SbmSpec::new(pi, theta)
}

/// A sampled SBM graph with its ground truth.
#[derive(Debug, Clone)]
pub struct SbmSample {
    pub graph: Graph,
    /// True labels with empty blocks compacted away.
    pub partition: Partition,
    /// `Θ` restricted to the blocks that received nodes, indexed like `partition`.
    pub theta: Matrix,
    /// Original block index of each compacted cluster.
    pub blocks: Vec<usize>,
}

/// Draws labels i.i.d. from `π` and each pair independently with
/// probability `θ_{z_i z_j}`.
pub fn sample_sbm(spec: &SbmSpec, n: usize, seed: u64) -> Result<SbmSample> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let raw: Vec<usize> = (0..n)
        .map(|_| draw_categorical(&mut rng, &spec.pi))
        .collect();
    let theta = &spec.theta;
    let edges = sample_pairs(&mut rng, n, |i, j| theta[(raw[i], raw[j])]);
    let graph = Graph::from_sorted_unique(n, edges);

    let (labels, k) = compact_labels(&raw);
    let mut blocks = alloc::vec![0usize; k];
    for (&c, &r) in labels.iter().zip(&raw) {
        blocks[c] = r;
    }
    Ok(SbmSample {
        graph,
        partition: Partition::new(labels, k)?,
        theta: theta.select(&blocks),
        blocks,
    })
}

fn draw_categorical(rng: &mut ChaCha20Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the final cumulative sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn sample_pairs(
    rng: &mut ChaCha20Rng,
    n: usize,
    mut prob: impl FnMut(usize, usize) -> f64,
) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let u: f64 = rng.random();
            if u < prob(i, j) {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// A symmetric function `[0,1]^2 -> [0,1]`.
#[derive(Clone)]
pub enum GraphonSpec {
    Constant(f64),
    /// `W(x, y) = ρ λ² (x y)^(λ - 1)`.
    PowerLaw {
        rho: f64,
        lambda: f64,
    },
    Step(StepGraphon),
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for GraphonSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphonSpec::Constant(p) => f.debug_tuple("Constant").field(p).finish(),
            GraphonSpec::PowerLaw { rho, lambda } => f
                .debug_struct("PowerLaw")
                .field("rho", rho)
                .field("lambda", lambda)
                .finish(),
            GraphonSpec::Step(g) => f.debug_tuple("Step").field(g).finish(),
            GraphonSpec::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

const PROBE: usize = 100;

impl GraphonSpec {
    pub fn constant(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!(
                "constant graphon value {p} outside [0, 1]"
            )));
        }
        Ok(GraphonSpec::Constant(p))
    }

    /// Requires `0 < ρ <= 1` and `1 <= λ <= 1/√ρ`, which keeps `W` within
    /// `[0, 1]` on the whole square.
    pub fn power_law(rho: f64, lambda: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(invalid(format!("need 0 < rho <= 1, got {rho}")));
        }
        if !(lambda >= 1.0 && rho * lambda * lambda <= 1.0) {
            return Err(invalid(format!(
                "need 1 <= lambda <= 1/sqrt(rho), got lambda = {lambda}, rho = {rho}"
            )));
        }
        Ok(GraphonSpec::PowerLaw { rho, lambda })
    }

    /// Wraps an arbitrary function after probing range and symmetry on a
    /// 100 x 100 grid of cell midpoints.
    pub fn custom<F>(w: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        for a in 0..PROBE {
            let x = (a as f64 + 0.5) / PROBE as f64;
            for b in 0..=a {
                let y = (b as f64 + 0.5) / PROBE as f64;
                let v = w(x, y);
                if !(0.0..=1.0).contains(&v) {
                    return Err(invalid(format!("W({x}, {y}) = {v} outside [0, 1]")));
                }
                if v != w(y, x) {
                    return Err(invalid(format!("W is not symmetric at ({x}, {y})")));
                }
            }
        }
        Ok(GraphonSpec::Custom(Arc::new(w)))
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            GraphonSpec::Constant(p) => *p,
            GraphonSpec::PowerLaw { rho, lambda } => {
                rho * lambda * lambda * (x * y).powf(lambda - 1.0)
            }
            GraphonSpec::Step(g) => g.value(x.min(PRE_ONE), y.min(PRE_ONE)),
            GraphonSpec::Custom(w) => w(x, y),
        }
    }
}

/// Largest double below one; step graphons are defined on `[0, 1)`.
const PRE_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Draws `u_i ~ U(0, 1)` and connects each pair with probability
/// `W(u_i, u_j)`. Returns the graph and the latent positions.
pub fn sample_graphon(spec: &GraphonSpec, n: usize, seed: u64) -> Result<(Graph, Vec<f64>)> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let latent: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = spec.value(latent[i], latent[j]);
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!(
                    "graphon value {p} outside [0, 1] at ({}, {})",
                    latent[i], latent[j]
                )));
            }
            let u: f64 = rng.random();
            if u < p {
                edges.push((i, j));
            }
        }
    }
    Ok((Graph::from_sorted_unique(n, edges), latent))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affiliation_dense_and_sparse() {
        let dense = affiliation_theta(10, 0.9, 0.1, 1.0).unwrap();
        assert_eq!(dense.theta()[(3, 3)], 0.9);
        assert_eq!(dense.theta()[(3, 4)], 0.1);
        assert!(dense.pi().iter().all(|p| (p - 0.1).abs() < 1e-15));

        let sparse = affiliation_theta(10, 0.9, 0.1, 0.2).unwrap();
        assert!((sparse.theta()[(0, 0)] - 0.18).abs() < 1e-15);
        assert!((sparse.theta()[(0, 1)] - 0.02).abs() < 1e-15);

        let one = affiliation_theta(1, 0.5, 0.0, 1.0).unwrap();
        assert_eq!(one.theta(), &Matrix::filled(1, 1, 0.5));
    }

    #[test]
    fn affiliation_rejects_bad_ranges() {
        assert!(affiliation_theta(0, 0.9, 0.1, 1.0).is_err());
        assert!(affiliation_theta(3, 0.1, 0.9, 1.0).is_err());
        assert!(affiliation_theta(3, 0.9, 0.1, 0.0).is_err());
        assert!(affiliation_theta(3, 1.2, 0.1, 1.0).is_err());
    }

    #[test]
    fn extreme_probabilities() {
        let full = SbmSpec::new(alloc::vec![0.5, 0.5], Matrix::filled(2, 2, 1.0)).unwrap();
        let s = sample_sbm(&full, 30, 7).unwrap();
        assert_eq!(s.graph.edge_count(), 30 * 29 / 2);

        let none = SbmSpec::new(alloc::vec![0.5, 0.5], Matrix::zeros(2, 2)).unwrap();
        assert_eq!(sample_sbm(&none, 30, 7).unwrap().graph.edge_count(), 0);
    }

    #[test]
    fn sbm_is_deterministic_and_compacts() {
        let spec = SbmSpec::new(
            alloc::vec![0.5, 0.0, 0.5],
            Matrix::from_rows(&[[0.5, 0.1, 0.2], [0.1, 0.3, 0.1], [0.2, 0.1, 0.7]]),
        )
        .unwrap();
        let a = sample_sbm(&spec, 40, 11).unwrap();
        let b = sample_sbm(&spec, 40, 11).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.partition, b.partition);
        assert_eq!(a.partition.k(), 2);
        assert_eq!(a.blocks, alloc::vec![0, 2]);
        assert_eq!(a.theta, Matrix::from_rows(&[[0.5, 0.2], [0.2, 0.7]]));
    }

    #[test]
    fn power_law_validation() {
        assert!(GraphonSpec::power_law(0.1, 2.0).is_ok());
        assert!(GraphonSpec::power_law(0.1, 5.0).is_err());
        assert!(GraphonSpec::power_law(0.1, 0.5).is_err());
        assert!(GraphonSpec::custom(|x, y| x * y).is_ok());
        assert!(GraphonSpec::custom(|x, _| x).is_err());
        assert!(GraphonSpec::custom(|x, y| 2.0 * x * y).is_err());
    }

    #[test]
    fn graphon_sampler_rejects_out_of_range_values() {
        let bad = GraphonSpec::Custom(Arc::new(|_, _| 1.5));
        assert!(sample_graphon(&bad, 5, 1).is_err());
    }
}
