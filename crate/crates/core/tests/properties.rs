mod oracle;

use blockshrink_core::community::{spectral_partition, variational_em, VemOptions};
use blockshrink_core::eb::{eb_estimate, mle_estimate, BlockKind, HyperParams};
use blockshrink_core::eval::{mse_sbm, split_nodes, test_loglik};
use blockshrink_core::graph::{block_stats, expand_theta, Graph, Partition};
use blockshrink_core::graphon::{bin, build_step_graphon, mse_graphon, StepGraphon};
use blockshrink_core::numerics::{log_beta, maximize_box, Bounds, MaximizeOptions};
use blockshrink_core::samplers::{affiliation_theta, sample_sbm, GraphonSpec};
use blockshrink_core::select::{eb_penalty, j_z};
use blockshrink_core::Matrix;
use proptest::prelude::*;

fn planted(n: usize, k: usize, p_in: f64, p_out: f64, seed: u64) -> (Graph, Partition) {
    let spec = affiliation_theta(k, p_in, p_out, 1.0).unwrap();
    let s = sample_sbm(&spec, n, seed).unwrap();
    (s.graph, s.partition)
}

fn permuted_graph(g: &Graph, perm: &[usize]) -> Graph {
    Graph::from_edges(g.n(), g.edges().iter().map(|&(i, j)| (perm[i], perm[j]))).unwrap()
}

fn random_theta(k: usize, vals: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(k, k);
    let mut it = vals.iter().cycle();
    for a in 0..k {
        for b in a..k {
            let v = *it.next().unwrap();
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_beta_is_symmetric(a in 0.01f64..1e5, b in 0.01f64..1e5) {
        prop_assert_eq!(log_beta(a, b).unwrap(), log_beta(b, a).unwrap());
    }

    #[test]
    fn log_beta_recurrence(a in 0.1f64..1e4, b in 0.1f64..1e4) {
        let lhs = log_beta(a + 1.0, b).unwrap() - log_beta(a, b).unwrap();
        prop_assert!((lhs - (a / (a + b)).ln()).abs() <= 1e-10);
    }

    #[test]
    fn maximize_box_stays_inside(
        cx in -5.0f64..15.0, cy in -5.0f64..15.0,
        sx in 0.1f64..20.0, x0 in 0.0f64..10.0, y0 in 0.0f64..10.0,
    ) {
        let f = |x: &[f64], g: &mut [f64]| {
            let (dx, dy) = (x[0] - cx, x[1] - cy);
            g[0] = -2.0 * dx;
            g[1] = -2.0 * sx * dy;
            -(dx * dx) - sx * dy * dy
        };
        let bounds = Bounds::uniform(2, 0.0, 10.0).unwrap();
        let init = [x0, y0];
        let start = f(&init, &mut [0.0; 2]);
        let opt = maximize_box(f, &bounds, &init, MaximizeOptions::default()).unwrap();
        prop_assert!(bounds.contains(&opt.argmax));
        prop_assert!(opt.value >= start);
        prop_assert!((opt.argmax[0] - cx.clamp(0.0, 10.0)).abs() < 1e-5);
        prop_assert!((opt.argmax[1] - cy.clamp(0.0, 10.0)).abs() < 1e-5);
    }

    #[test]
    fn eb_lies_between_prior_mean_and_mle(seed in 0u64..10_000, a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        let stats = oracle::random_stats(seed, 5, 60);
        let h = HyperParams::new(a, b, b, a).unwrap();
        let eb = eb_estimate(&stats, &h);
        let mle = mle_estimate(&stats);
        for x in 0..stats.k() {
            for y in 0..stats.k() {
                let (al, be) = h.pair(BlockKind::of(x, y));
                let prior = al / (al + be);
                let t = eb.theta[(x, y)];
                let lo = prior.min(mle.theta[(x, y)]) - 1e-12;
                let hi = prior.max(mle.theta[(x, y)]) + 1e-12;
                prop_assert!(t >= lo && t <= hi);
                prop_assert_eq!(t, eb.theta[(y, x)]);
            }
        }
    }

    #[test]
    fn penalty_increases_in_k_and_n(k in 1usize..40, n in 3usize..5000) {
        prop_assert!(eb_penalty(k + 1, n).unwrap() > eb_penalty(k, n).unwrap());
        if k >= 2 {
            prop_assert!(eb_penalty(k, n + 1).unwrap() > eb_penalty(k, n).unwrap());
        }
        prop_assert!(eb_penalty(k, n).unwrap() >= 0.0);
    }

    #[test]
    fn mse_sbm_matches_expanded_pairs(
        n in 2usize..25, ke in 1usize..4, kt in 1usize..4,
        labels in proptest::collection::vec((0usize..4, 0usize..4), 25),
        vals in proptest::collection::vec(0.0f64..1.0, 10),
    ) {
        let le: Vec<usize> = labels[..n].iter().map(|&(a, _)| a % ke).collect();
        let lt: Vec<usize> = labels[..n].iter().map(|&(_, b)| b % kt).collect();
        let pe = Partition::compact(&le).unwrap();
        let pt = Partition::compact(&lt).unwrap();
        let te = random_theta(pe.k(), &vals);
        let tt = random_theta(pt.k(), &vals[3..]);
        let me = expand_theta(&te, &pe).unwrap();
        let mt = expand_theta(&tt, &pt).unwrap();
        let mut brute = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    brute += (me[(i, j)] - mt[(i, j)]).powi(2);
                }
            }
        }
        brute /= (n * (n - 1)) as f64;
        prop_assert!((mse_sbm(&te, &pe, &tt, &pt).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn mse_sbm_is_label_permutation_invariant(seed in 0u64..1000, shift in 1usize..3) {
        let (_, z) = planted(30, 3, 0.5, 0.1, seed);
        let k = z.k();
        let theta = random_theta(k, &[0.7, 0.2, 0.1, 0.6, 0.3, 0.5]);
        let perm: Vec<usize> = (0..k).map(|a| (a + shift) % k).collect();
        let zp = Partition::new(z.labels().iter().map(|&l| perm[l]).collect(), k).unwrap();
        let mut tp = Matrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                tp[(perm[a], perm[b])] = theta[(a, b)];
            }
        }
        let truth = random_theta(k, &[0.9, 0.1, 0.1, 0.8, 0.2, 0.7]);
        let base = mse_sbm(&theta, &z, &truth, &z).unwrap();
        prop_assert!((mse_sbm(&tp, &zp, &truth, &z).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn reorder_preserves_entries_and_gaps(
        widths in proptest::collection::vec(0.05f64..1.0, 1..6),
        vals in proptest::collection::vec(0.0f64..1.0, 21),
    ) {
        let k = widths.len();
        let g = StepGraphon::from_proportions(&widths, random_theta(k, &vals)).unwrap();
        let (r, order) = g.reorder_identifiable();
        let d = r.degrees();
        prop_assert!(d.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        let sorted = |mut v: Vec<f64>| { v.sort_by(f64::total_cmp); v };
        prop_assert_eq!(sorted(r.theta().as_slice().to_vec()), sorted(g.theta().as_slice().to_vec()));
        let (gw, rw) = (g.widths(), r.widths());
        for (i, &o) in order.iter().enumerate() {
            prop_assert!((rw[i] - gw[o]).abs() < 1e-12);
        }
        prop_assert!(mse_graphon(&g, &GraphonSpec::Step(g.clone())) <= 1e-12);
    }

    #[test]
    fn bin_is_right_open(widths in proptest::collection::vec(0.05f64..1.0, 2..6)) {
        let g = StepGraphon::from_proportions(&widths, Matrix::filled(widths.len(), widths.len(), 0.5)).unwrap();
        let c = g.boundaries();
        for k in 1..widths.len() {
            prop_assert_eq!(bin(c[k] - 1e-9, c).unwrap(), k - 1);
            prop_assert_eq!(bin(c[k], c).unwrap(), k);
        }
    }

    #[test]
    fn evaluate_is_symmetric(x in 0.0f64..1.0, y in 0.0f64..1.0, vals in proptest::collection::vec(0.0f64..1.0, 6)) {
        let g = StepGraphon::from_proportions(&[0.2, 0.5, 0.3], random_theta(3, &vals)).unwrap();
        prop_assert_eq!(g.evaluate(x, y).unwrap(), g.evaluate(y, x).unwrap());
    }

    #[test]
    fn split_partitions_the_nodes(n in 2usize..2000, f in 0.05f64..0.95, seed in any::<u64>()) {
        let (train, test) = split_nodes(n, f, seed).unwrap();
        prop_assert_eq!(train.len(), (f * n as f64 + 0.5).floor() as usize);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(split_nodes(n, f, seed).unwrap(), (train, test));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn j_z_is_label_permutation_invariant(seed in 0u64..1000, shift in 1usize..4) {
        let (g, z) = planted(40, 4, 0.6, 0.1, seed);
        let k = z.k();
        let zp = Partition::new(z.labels().iter().map(|&l| (l + shift) % k).collect(), k).unwrap();
        let (a, _) = j_z(&g, &z).unwrap();
        let (b, _) = j_z(&g, &zp).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn vem_objective_is_monotone(seed in 0u64..1000, k in 1usize..6, p_in in 0.2f64..0.9) {
        let (g, _) = planted(50, 3, p_in, 0.1, seed);
        let init = spectral_partition(&g, k, seed).unwrap();
        let out = variational_em(&g, k, &init, VemOptions::default()).unwrap();
        for w in out.objective.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0));
        }
        if let Some(r) = &out.detection.responsibilities {
            for i in 0..r.rows() {
                prop_assert!((r.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-8);
            }
        }
        prop_assert!(out.detection.k() <= k);
    }

    #[test]
    fn spectral_partition_is_relabeling_invariant(seed in 0u64..1000, rot in 1usize..59) {
        let (g, _) = planted(60, 3, 0.8, 0.05, seed);
        let perm: Vec<usize> = (0..60).map(|i| (i * 7 + rot) % 60).collect();
        let gp = permuted_graph(&g, &perm);
        let a = spectral_partition(&g, 3, 1).unwrap().partition;
        let b = spectral_partition(&gp, 3, 1).unwrap().partition;
        let b_back: Vec<usize> = (0..60).map(|i| b.label(perm[i])).collect();
        prop_assert!(oracle::same_partition(a.labels(), &b_back));
    }

    #[test]
    fn test_loglik_prefers_empirical_frequencies(seed in 0u64..1000, push in 0.05f64..0.5) {
        let (g, z) = planted(20, 2, 0.6, 0.3, seed);
        let (train, test) = split_nodes(20, 0.7, seed).unwrap();
        let mut edges = [[0.0f64; 2]; 2];
        let mut pairs = [[0.0f64; 2]; 2];
        let mut count = |i: usize, j: usize| {
            let (a, b) = (z.label(i).min(z.label(j)), z.label(i).max(z.label(j)));
            pairs[a][b] += 1.0;
            edges[a][b] += if g.has_edge(i, j) { 1.0 } else { 0.0 };
        };
        for &t in &test {
            for &r in &train {
                count(r, t);
            }
        }
        for (x, &j) in test.iter().enumerate() {
            for &k in &test[..x] {
                count(k, j);
            }
        }
        let k = z.k();
        let freq = Matrix::from_fn(k, k, |a, b| {
            let (a, b) = (a.min(b), a.max(b));
            if pairs[a][b] > 0.0 { edges[a][b] / pairs[a][b] } else { 0.5 }
        });
        prop_assume!(freq.as_slice().iter().all(|&p| p > 0.0 && p < 1.0));
        let far = freq.map(|p| if p < 0.5 { (p + push).min(0.999) } else { (p - push).max(0.001) });
        let best = test_loglik(&g, &z, &freq, &train, &test).unwrap();
        let worse = test_loglik(&g, &z, &far, &train, &test).unwrap();
        prop_assert!(worse <= best + 1e-12);
    }
}

#[test]
fn block_stats_total_matches_graph() {
    let (g, z) = planted(80, 5, 0.5, 0.05, 3);
    let s = block_stats(&g, &z).unwrap();
    assert_eq!(s.total_edges() as usize, g.edge_count());
    assert_eq!(s.total_pairs(), g.pair_count());
    let step = build_step_graphon(&z, &mle_estimate(&s).theta).unwrap();
    assert_eq!(step.k(), z.k());
}
