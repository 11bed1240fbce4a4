//! Partition providers: regularized spectral clustering and a variational EM
//! for the Bernoulli stochastic block model.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::error::{invalid, Error, Result};
use crate::graph::{compact_labels, Graph, Partition};
use crate::numerics::{digamma_unchecked, ln_beta, ln_gamma};
use crate::samplers::rng_from_seed;
use crate::Matrix;

/// Number of seeded k-means restarts.
pub const KMEANS_RESTARTS: u64 = 10;
const LLOYD_MAX_ITER: usize = 300;
/// Beta prior on each block probability and Dirichlet weight on proportions.
const VB_PRIOR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub partition: Partition,
    /// Soft assignments, `n × K′`, when the provider produces them.
    pub responsibilities: Option<Matrix>,
    pub converged: bool,
    pub iterations: usize,
}

impl DetectionResult {
    pub fn hard(partition: Partition) -> Self {
        DetectionResult {
            partition,
            responsibilities: None,
            converged: true,
            iterations: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.partition.k()
    }
}

/// Eigendecomposition of the regularized normalized adjacency
/// `D^{-1/2} (A + τ 11ᵀ) D^{-1/2}`, with `τ` the mean degree over `n`.
/// Computed once per graph and reused for every K.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    n: usize,
    /// Eigenvector columns ordered by decreasing eigenvalue magnitude.
    vectors: DMatrix<f64>,
    values: Vec<f64>,
}

impl SpectralEmbedding {
    pub fn new(graph: &Graph) -> Result<Self> {
        let n = graph.n();
        if n == 0 {
            return Err(invalid("graph has no nodes"));
        }
        let nf = n as f64;
        let mean_degree = 2.0 * graph.edge_count() as f64 / nf;
        let tau = if mean_degree > 0.0 {
            mean_degree / nf
        } else {
            1.0 / nf
        };
        let inv_sqrt: Vec<f64> = (0..n)
            .map(|v| 1.0 / (graph.degree(v) as f64 + tau * nf).sqrt())
            .collect();
        let mut m = DMatrix::from_fn(n, n, |i, j| tau * inv_sqrt[i] * inv_sqrt[j]);
        for &(i, j) in graph.edges() {
            let w = inv_sqrt[i] * inv_sqrt[j];
            m[(i, j)] += w;
            m[(j, i)] += w;
        }
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .abs()
                .partial_cmp(&eig.eigenvalues[a].abs())
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let vectors = DMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
        let values = order.iter().map(|&c| eig.eigenvalues[c]).collect();
        Ok(SpectralEmbedding { n, vectors, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Eigenvalues by decreasing magnitude.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// Row-normalized coordinates in the leading `k` eigenvectors.
    pub fn embed(&self, k: usize) -> Result<Matrix> {
        check_k(k, self.n)?;
        let mut out = Matrix::from_fn(self.n, k, |i, c| self.vectors[(i, c)]);
        for i in 0..self.n {
            let row = out.row_mut(i);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        Ok(out)
    }

    /// k-means on the `k`-dimensional embedding; labels compacted.
    pub fn partition(&self, k: usize, seed: u64) -> Result<DetectionResult> {
        check_k(k, self.n)?;
        if k == 1 {
            return Ok(DetectionResult::hard(Partition::single(self.n)));
        }
        let points = self.embed(k)?;
        let fit = kmeans(&points, k, seed)?;
        Ok(DetectionResult {
            partition: Partition::compact(&fit.labels)?,
            responsibilities: None,
            converged: fit.converged,
            iterations: fit.iterations,
        })
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(invalid(alloc::format!("K must lie in 1..={n}, got {k}")));
    }
    Ok(())
}

/// Regularized spectral clustering into at most `k` groups.
pub fn spectral_partition(graph: &Graph, k: usize, seed: u64) -> Result<DetectionResult> {
    check_k(k, graph.n())?;
    if k == 1 {
        return Ok(DetectionResult::hard(Partition::single(graph.n())));
    }
    SpectralEmbedding::new(graph)?.partition(k, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centers: Matrix,
    pub wcss: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centers.rows() {
        let d = sq_dist(point, centers.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_centers(points: &Matrix, k: usize, rng: &mut ChaCha20Rng) -> Matrix {
    let n = points.rows();
    let mut centers = Matrix::zeros(k, points.cols());
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(points.row(first));
    let mut dist: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in dist.iter().enumerate() {
                acc += d;
                if target < acc {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centers.row(c)));
        }
    }
    centers
}

fn lloyd(points: &Matrix, mut centers: Matrix) -> KMeansFit {
    let (n, dim, k) = (points.rows(), points.cols(), centers.rows());
    let mut labels = vec![usize::MAX; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < LLOYD_MAX_ITER {
        iterations += 1;
        let mut changed = false;
        for i in 0..n {
            let (c, _) = nearest(points.row(i), &centers);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        // an empty cluster takes the point farthest from its own center
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&c| counts[c] += 1);
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .map(|i| (i, sq_dist(points.row(i), centers.row(labels[i]))))
                .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                });
            if let Some((i, _)) = far {
                counts[labels[i]] -= 1;
                labels[i] = c;
                counts[c] = 1;
                changed = true;
            }
        }
        centers = Matrix::zeros(k, dim);
        for i in 0..n {
            let row = centers.row_mut(labels[i]);
            row.iter_mut().zip(points.row(i)).for_each(|(s, p)| *s += p);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers
                    .row_mut(c)
                    .iter_mut()
                    .for_each(|s| *s /= counts[c] as f64);
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    let wcss = (0..n)
        .map(|i| sq_dist(points.row(i), centers.row(labels[i])))
        .sum();
    KMeansFit {
        labels,
        centers,
        wcss,
        converged,
        iterations,
    }
}

/// k-means++ seeding followed by Lloyd iterations, restarted
/// [`KMEANS_RESTARTS`] times on independent streams of `seed`. The lowest
/// within-cluster sum of squares wins; ties go to the earlier restart.
pub fn kmeans(points: &Matrix, k: usize, seed: u64) -> Result<KMeansFit> {
    check_k(k, points.rows())?;
    if points.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(invalid("k-means input has non-finite coordinates"));
    }
    let mut best: Option<KMeansFit> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng = rng_from_seed(seed);
        rng.set_stream(restart);
        let fit = lloyd(points, seed_centers(points, k, &mut rng));
        if best.as_ref().map_or(true, |b| fit.wcss < b.wcss) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VemOptions {
    pub max_iter: usize,
    /// Stop once the objective rises by less than this.
    pub tol: f64,
}

impl Default for VemOptions {
    fn default() -> Self {
        VemOptions {
            max_iter: 200,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VemOutput {
    pub detection: DetectionResult,
    /// Posterior mean block proportions.
    pub pi_hat: Vec<f64>,
    /// Posterior mean connectivity.
    pub theta_vb: Matrix,
    /// Objective after every iteration, starting with the initial state.
    pub objective: Vec<f64>,
}

/// Variational posterior factors implied by the responsibilities.
struct Globals {
    /// Dirichlet parameters `1/2 + Σ_i τ_iq`.
    dir: Vec<f64>,
    /// Beta parameters (edges, non-edges) per block, row-major `K × K`.
    eta: Vec<f64>,
    zeta: Vec<f64>,
}

fn m_step(graph: &Graph, tau: &Matrix) -> Globals {
    let (n, k) = (tau.rows(), tau.cols());
    let mut sums = vec![0.0; k];
    let mut self_pairs = vec![0.0; k * k];
    for i in 0..n {
        let t = tau.row(i);
        for q in 0..k {
            sums[q] += t[q];
            for l in 0..k {
                self_pairs[q * k + l] += t[q] * t[l];
            }
        }
    }
    let mut edges = vec![0.0; k * k];
    for &(i, j) in graph.edges() {
        let (ti, tj) = (tau.row(i), tau.row(j));
        for q in 0..k {
            for l in 0..k {
                edges[q * k + l] += ti[q] * tj[l] + tj[q] * ti[l];
            }
        }
    }
    let mut eta = vec![0.0; k * k];
    let mut zeta = vec![0.0; k * k];
    for q in 0..k {
        for l in 0..k {
            let half = if q == l { 0.5 } else { 1.0 };
            let e = (edges[q * k + l] * half).max(0.0);
            let p = ((sums[q] * sums[l] - self_pairs[q * k + l]) * half).max(e);
            eta[q * k + l] = VB_PRIOR + e;
            zeta[q * k + l] = VB_PRIOR + (p - e);
        }
    }
    Globals {
        dir: sums.iter().map(|s| VB_PRIOR + s).collect(),
        eta,
        zeta,
    }
}

fn objective(g: &Globals, tau: &Matrix) -> f64 {
    let k = g.dir.len();
    let kf = k as f64;
    let total: f64 = g.dir.iter().sum();
    let mut v = ln_gamma(kf * VB_PRIOR) - kf * ln_gamma(VB_PRIOR) - ln_gamma(total)
        + g.dir.iter().map(|&a| ln_gamma(a)).sum::<f64>();
    let prior = ln_beta(VB_PRIOR, VB_PRIOR);
    for q in 0..k {
        for l in q..k {
            v += ln_beta(g.eta[q * k + l], g.zeta[q * k + l]) - prior;
        }
    }
    let entropy: f64 = tau
        .as_slice()
        .iter()
        .filter(|&&t| t > 0.0)
        .map(|&t| -t * t.ln())
        .sum();
    v + entropy
}

/// One sequential sweep of node-wise updates with the global factors held fixed.
fn e_step(graph: &Graph, tau: &mut Matrix, g: &Globals) {
    let (n, k) = (tau.rows(), tau.cols());
    let mut d = vec![0.0; k * k];
    let mut e = vec![0.0; k * k];
    for idx in 0..k * k {
        let both = digamma_unchecked(g.eta[idx] + g.zeta[idx]);
        d[idx] = digamma_unchecked(g.eta[idx]) - digamma_unchecked(g.zeta[idx]);
        e[idx] = digamma_unchecked(g.zeta[idx]) - both;
    }
    let total: f64 = g.dir.iter().sum();
    let prior: Vec<f64> = g
        .dir
        .iter()
        .map(|&a| digamma_unchecked(a) - digamma_unchecked(total))
        .collect();
    let mut sums = vec![0.0; k];
    for i in 0..n {
        tau.row(i)
            .iter()
            .zip(sums.iter_mut())
            .for_each(|(t, s)| *s += t);
    }
    let mut nbr = vec![0.0; k];
    let mut logit = vec![0.0; k];
    for i in 0..n {
        nbr.iter_mut().for_each(|v| *v = 0.0);
        for &j in graph.neighbors(i) {
            tau.row(j)
                .iter()
                .zip(nbr.iter_mut())
                .for_each(|(t, s)| *s += t);
        }
        let own = tau.row(i);
        for q in 0..k {
            let mut acc = prior[q];
            for l in 0..k {
                let others = sums[l] - own[l];
                acc += nbr[l] * d[q * k + l] + others * e[q * k + l];
            }
            logit[q] = acc;
        }
        let top = logit.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logit.iter().map(|v| (v - top).exp()).sum();
        let row = tau.row_mut(i);
        for q in 0..k {
            let fresh = (logit[q] - top).exp() / z;
            sums[q] += fresh - row[q];
            row[q] = fresh;
        }
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (q, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = q;
        }
    }
    best
}

/// Mean-field variational EM for a Bernoulli SBM with `Beta(1/2, 1/2)` block
/// priors and a `Dirichlet(1/2, …, 1/2)` prior on proportions, started from
/// `init`. Clusters that end with no argmax members are dropped.
pub fn variational_em(
    graph: &Graph,
    k: usize,
    init: &DetectionResult,
    options: VemOptions,
) -> Result<VemOutput> {
    let n = graph.n();
    check_k(k, n)?;
    if init.partition.n() != n {
        return Err(invalid("initial partition does not match the graph"));
    }
    if init.k() > k {
        return Err(invalid(alloc::format!(
            "initial partition has {} clusters, more than K = {k}",
            init.k()
        )));
    }
    let mut tau = match &init.responsibilities {
        Some(r) if r.rows() == n && r.cols() == init.k() => r.clone(),
        _ => {
            let mut t = Matrix::zeros(n, init.k());
            for (i, &c) in init.partition.labels().iter().enumerate() {
                t[(i, c)] = 1.0;
            }
            t
        }
    };
    let mut globals = m_step(graph, &tau);
    let mut trace = vec![objective(&globals, &tau)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iter {
        iterations += 1;
        e_step(graph, &mut tau, &globals);
        globals = m_step(graph, &tau);
        let value = objective(&globals, &tau);
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: "variational_em",
                iteration: iterations,
            });
        }
        let prev = *trace.last().expect("nonempty");
        debug_assert!(
            value >= prev - 1e-9 * prev.abs().max(1.0),
            "objective fell from {prev} to {value} at iteration {iterations}"
        );
        trace.push(value);
        if value - prev < options.tol {
            converged = true;
            break;
        }
    }

    let hard: Vec<usize> = (0..n).map(|i| argmax(tau.row(i))).collect();
    let (labels, kept) = compact_labels(&hard);
    let mut used = vec![false; tau.cols()];
    hard.iter().for_each(|&c| used[c] = true);
    let cols: Vec<usize> = (0..tau.cols()).filter(|&c| used[c]).collect();
    debug_assert_eq!(cols.len(), kept);
    let mut resp = Matrix::from_fn(n, kept, |i, c| tau[(i, cols[c])]);
    for i in 0..n {
        let row = resp.row_mut(i);
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    let globals = m_step(graph, &resp);
    let total: f64 = globals.dir.iter().sum();
    let pi_hat = globals.dir.iter().map(|a| a / total).collect();
    let theta_vb = Matrix::from_fn(kept, kept, |q, l| {
        let idx = q * kept + l;
        globals.eta[idx] / (globals.eta[idx] + globals.zeta[idx])
    });
    Ok(VemOutput {
        detection: DetectionResult {
            partition: Partition::new(labels, kept)?,
            responsibilities: Some(resp),
            converged,
            iterations,
        },
        pi_hat,
        theta_vb,
        objective: trace,
    })
}

/// Spectral initialization refined by variational EM.
pub fn detect(graph: &Graph, k: usize, seed: u64, options: VemOptions) -> Result<VemOutput> {
    let init = spectral_partition(graph, k, seed)?;
    variational_em(graph, k, &init, options)
}

/// As [`detect`], sharing one embedding across calls on the same graph.
pub fn detect_with(
    graph: &Graph,
    embedding: &SpectralEmbedding,
    k: usize,
    seed: u64,
    options: VemOptions,
) -> Result<VemOutput> {
    if embedding.n() != graph.n() {
        return Err(invalid("embedding does not match the graph"));
    }
    let init = embedding.partition(k, seed)?;
    variational_em(graph, k, &init, options)
}
