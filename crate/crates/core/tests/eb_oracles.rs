mod oracle;

use blockshrink_core::eb::{
    eb_estimate, fit_hyperparams, mle_estimate, moment_init, BlockKind, HyperParams, HYPER_MAX,
};
use blockshrink_core::graph::BlockStats;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[test]
fn fitted_objective_beats_grid_search() {
    for instance in 0..20 {
        let stats = oracle::random_stats(900 + instance, 5, 50);
        let fit = fit_hyperparams(&stats).unwrap();
        let mut kinds = vec![(BlockKind::Diagonal, fit.diagonal)];
        if fit.off_diagonal.fitted {
            kinds.push((BlockKind::OffDiagonal, fit.off_diagonal));
        }
        for (kind, pair) in kinds {
            let (best, a, b) = oracle::grid_max(&stats, kind, 100);
            let achieved = oracle::marginal_reference(&stats, pair.alpha, pair.beta, kind);
            assert!(
                achieved >= best - 1e-3,
                "instance {instance} {kind:?}: fit ({}, {}) gives {achieved}, grid ({a}, {b}) gives {best}",
                pair.alpha,
                pair.beta
            );
            let (a0, b0) = moment_init(&stats, kind);
            assert!(achieved >= oracle::marginal_reference(&stats, a0, b0, kind) - 1e-9);
        }
    }
}

#[test]
fn homogeneous_diagonal_hits_the_upper_bound() {
    let k = 8;
    let mut edges = vec![0; k * k];
    let mut pairs = vec![0; k * k];
    for a in 0..k {
        edges[a * k + a] = 300;
        pairs[a * k + a] = 1000;
    }
    let stats = BlockStats::from_counts(k, edges, pairs).unwrap();
    let fit = fit_hyperparams(&stats).unwrap();
    let (a, b) = (fit.params.alpha0, fit.params.beta0);
    assert!((a / (a + b) - 0.3).abs() < 0.01);
    assert!(a.max(b) >= 0.99 * HYPER_MAX, "({a}, {b})");
    let (best, ..) = oracle::grid_max(&stats, BlockKind::Diagonal, 100);
    assert!(fit.diagonal.loglik >= best - 1e-3);
}

#[test]
fn dispersed_diagonal_gives_heavy_tailed_prior() {
    let k = 10;
    let mut edges = vec![0; k * k];
    let mut pairs = vec![0; k * k];
    for a in 0..k {
        pairs[a * k + a] = 45;
        edges[a * k + a] = if a % 2 == 0 { 44 } else { 1 };
    }
    let stats = BlockStats::from_counts(k, edges, pairs).unwrap();
    let fit = fit_hyperparams(&stats).unwrap();
    assert!(
        fit.params.alpha0 + fit.params.beta0 < 1.0,
        "{:?}",
        fit.params
    );
    let (best, ..) = oracle::grid_max(&stats, BlockKind::Diagonal, 100);
    assert!(fit.diagonal.loglik >= best - 1e-3);
}

#[test]
fn convex_combination_identity() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for instance in 0..50 {
        let stats = oracle::random_stats(3000 + instance, 6, 80);
        let mut draw = || 10f64.powf(rng.random_range(-3.0..5.0));
        let h = HyperParams::new(draw(), draw(), draw(), draw()).unwrap();
        let eb = eb_estimate(&stats, &h);
        let mle = mle_estimate(&stats);
        let eta = eb.shrinkage.as_ref().unwrap();
        for a in 0..stats.k() {
            for b in 0..stats.k() {
                let (alpha, beta) = h.pair(BlockKind::of(a, b));
                if stats.pairs(a, b) == 0 {
                    assert_eq!(eta[(a, b)], 1.0);
                    continue;
                }
                let combo =
                    eta[(a, b)] * alpha / (alpha + beta) + (1.0 - eta[(a, b)]) * mle.theta[(a, b)];
                assert!(
                    (eb.theta[(a, b)] - combo).abs() <= 1e-12,
                    "instance {instance} ({a}, {b})"
                );
                assert!((0.0..=1.0).contains(&eta[(a, b)]));
            }
        }
    }
}

#[test]
fn pinned_extremes_reach_mle_and_prior_mean() {
    for instance in 0..20 {
        let stats = oracle::random_stats(4000 + instance, 6, 50);
        let mle = mle_estimate(&stats);
        let tiny = HyperParams::new(1e-9, 1e-9, 1e-9, 1e-9).unwrap();
        let eb = eb_estimate(&stats, &tiny);
        let (m0, m1) = (0.3, 0.05);
        let huge =
            HyperParams::new(1e10 * m0, 1e10 * (1.0 - m0), 1e10 * m1, 1e10 * (1.0 - m1)).unwrap();
        let pooled = eb_estimate(&stats, &huge);
        for a in 0..stats.k() {
            for b in 0..stats.k() {
                if stats.pairs(a, b) > 0 {
                    assert!((eb.theta[(a, b)] - mle.theta[(a, b)]).abs() <= 1e-6);
                }
                let mean = if a == b { m0 } else { m1 };
                assert!((pooled.theta[(a, b)] - mean).abs() <= 1e-6);
            }
        }
    }
}
