//! Reference computations for the test suites. Nothing here calls the
//! special functions or optimizer under test.
#![allow(dead_code)]

use blockshrink_core::eb::{BlockKind, HYPER_MAX, HYPER_MIN};
use blockshrink_core::graph::BlockStats;
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix as PfMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::function::gamma::ln_gamma;

/// `ln ∫₀¹ x^(a-1) (1-x)^(b-1) dx` by tanh-sinh quadrature, halving the step
/// until successive levels agree to 1e-14.
pub fn ln_beta_integral(a: f64, b: f64) -> f64 {
    let log_term = |t: f64| -> f64 {
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        // x = 1 / (1 + e^{-2u}), 1 - x = 1 / (1 + e^{2u})
        let ln_x = -(-2.0 * u).exp().ln_1p();
        let ln_1mx = -(2.0 * u).exp().ln_1p();
        let ln_jac = (std::f64::consts::PI * t.cosh()).ln() + ln_x + ln_1mx;
        if !ln_x.is_finite() || !ln_1mx.is_finite() {
            return f64::NEG_INFINITY;
        }
        (a - 1.0) * ln_x + (b - 1.0) * ln_1mx + ln_jac
    };
    let level = |h: f64| -> f64 {
        let n = (7.0 / h).ceil() as i64;
        let logs: Vec<f64> = (-n..=n).map(|k| log_term(k as f64 * h)).collect();
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + (logs.iter().map(|l| (l - m).exp()).sum::<f64>() * h).ln()
    };
    let mut h = 0.25;
    let mut prev = level(h);
    loop {
        h /= 2.0;
        let cur = level(h);
        if (cur - prev).abs() < 1e-14 * cur.abs().max(1.0) || h < 1e-4 {
            return cur;
        }
        prev = cur;
    }
}

/// Log of `∫ θ^x (1-θ)^(m-x) dBeta(θ; α, β)`, both integrals by quadrature.
pub fn block_marginal_quadrature(alpha: f64, beta: f64, x: u64, m: u64) -> f64 {
    let (x, m) = (x as f64, m as f64);
    ln_beta_integral(alpha + x, beta + m - x) - ln_beta_integral(alpha, beta)
}

fn kind_blocks(stats: &BlockStats, kind: BlockKind) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    for a in 0..stats.k() {
        for b in a..stats.k() {
            if (a == b) == (kind == BlockKind::Diagonal) && stats.pairs(a, b) > 0 {
                out.push((stats.edges(a, b), stats.pairs(a, b)));
            }
        }
    }
    out
}

pub fn marginal_quadrature(stats: &BlockStats, alpha: f64, beta: f64, kind: BlockKind) -> f64 {
    kind_blocks(stats, kind)
        .into_iter()
        .map(|(x, m)| block_marginal_quadrature(alpha, beta, x, m))
        .sum()
}

fn ln_b(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Marginal log-likelihood evaluated through an independent log-gamma.
pub fn marginal_reference(stats: &BlockStats, alpha: f64, beta: f64, kind: BlockKind) -> f64 {
    kind_blocks(stats, kind)
        .into_iter()
        .map(|(x, m)| {
            let (x, m) = (x as f64, m as f64);
            ln_b(alpha + x, beta + m - x) - ln_b(alpha, beta)
        })
        .sum()
}

/// Best value over a `size × size` log-spaced grid covering the hyperparameter box.
pub fn grid_max(stats: &BlockStats, kind: BlockKind, size: usize) -> (f64, f64, f64) {
    let (lo, hi) = (HYPER_MIN.ln(), HYPER_MAX.ln());
    let point = |i: usize| (lo + (hi - lo) * i as f64 / (size - 1) as f64).exp();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..size {
        for j in 0..size {
            let (a, b) = (point(i), point(j));
            let v = marginal_reference(stats, a, b, kind);
            if v > best.0 {
                best = (v, a, b);
            }
        }
    }
    best
}

/// Random symmetric block counts with `k ∈ 1..=max_k` and `n_ab ≤ max_pairs`.
/// Block densities are drawn around a per-instance diagonal and off-diagonal
/// level so that the hyperparameter fits are nontrivial.
pub fn random_stats(seed: u64, max_k: usize, max_pairs: u64) -> BlockStats {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=max_k);
    let level = [rng.random_range(0.05..0.95), rng.random_range(0.0..0.5)];
    let spread: f64 = rng.random_range(0.0..0.4);
    let mut edges = vec![0u64; k * k];
    let mut pairs = vec![0u64; k * k];
    for a in 0..k {
        for b in a..k {
            let m = rng.random_range(0..=max_pairs);
            let base = level[usize::from(a != b)];
            let p: f64 = (base + spread * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0);
            let x = (0..m).filter(|_| rng.random::<f64>() < p).count() as u64;
            for (i, j) in [(a, b), (b, a)] {
                edges[i * k + j] = x;
                pairs[i * k + j] = m;
            }
        }
    }
    if (0..k).all(|a| pairs[a * k + a] == 0) {
        pairs[0] = 1;
    }
    BlockStats::from_counts(k, edges, pairs).expect("valid counts")
}

/// Fraction of nodes whose labels agree after the best one-to-one matching
/// of clusters.
pub fn matched_agreement(est: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(est.len(), truth.len());
    let ke = est.iter().max().map_or(0, |m| m + 1);
    let kt = truth.iter().max().map_or(0, |m| m + 1);
    let size = ke.max(kt);
    let mut counts = vec![vec![0i64; size]; size];
    for (&e, &t) in est.iter().zip(truth) {
        counts[e][t] += 1;
    }
    let weights = PfMatrix::from_rows(counts).expect("square table");
    let (matched, _) = kuhn_munkres(&weights);
    matched as f64 / est.len() as f64
}

/// True when the two labelings induce the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && matched_agreement(a, b) == 1.0 && {
        let ka = a.iter().collect::<std::collections::BTreeSet<_>>().len();
        let kb = b.iter().collect::<std::collections::BTreeSet<_>>().len();
        ka == kb
    }
}
