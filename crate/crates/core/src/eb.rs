//! Connectivity estimation under the hierarchical Beta-Binomial block model.
//!
//! Given a partition, each block `(a, b)` holds `X^B_ab` edges out of `n_ab`
//! pairs. Diagonal blocks share a `Beta(α0, β0)` prior on their connection
//! probability and off-diagonal blocks share `Beta(α1, β1)`. The two
//! hyperparameter pairs are fitted by maximizing the marginal likelihood,
//! and each block is then estimated by its posterior mean
//!
//! ```text
//! θ_ab = (α_d + X_ab) / (α_d + β_d + n_ab)
//!      = η_ab · α_d / (α_d + β_d) + (1 - η_ab) · X_ab / n_ab,
//! η_ab = (α_d + β_d) / (α_d + β_d + n_ab).
//! ```

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::graph::BlockStats;
use crate::numerics::{digamma_unchecked, ln_rising, maximize_box, Bounds, MaximizeOptions};
use crate::Matrix;

/// Lower edge of the hyperparameter search box.
pub const HYPER_MIN: f64 = 1e-4;
/// Upper edge of the hyperparameter search box.
pub const HYPER_MAX: f64 = 1e6;
/// `Beta(1/2, 1/2)` prior used by the fixed-prior baseline.
pub const JEFFREYS: f64 = 0.5;

/// The two Beta hyperparameter pairs: `d = 0` diagonal, `d = 1` off-diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HyperParams {
    pub alpha0: f64,
    pub beta0: f64,
    pub alpha1: f64,
    pub beta1: f64,
}

impl HyperParams {
    pub fn new(alpha0: f64, beta0: f64, alpha1: f64, beta1: f64) -> Result<Self> {
        for v in [alpha0, beta0, alpha1, beta1] {
            check_positive("HyperParams", v)?;
        }
        Ok(HyperParams {
            alpha0,
            beta0,
            alpha1,
            beta1,
        })
    }

    pub fn pair(&self, kind: BlockKind) -> (f64, f64) {
        match kind {
            BlockKind::Diagonal => (self.alpha0, self.beta0),
            BlockKind::OffDiagonal => (self.alpha1, self.beta1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BlockKind {
    Diagonal,
    OffDiagonal,
}

impl BlockKind {
    pub fn of(a: usize, b: usize) -> Self {
        if a == b {
            BlockKind::Diagonal
        } else {
            BlockKind::OffDiagonal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Method {
    #[cfg_attr(feature = "serde", serde(rename = "MLE"))]
    Mle,
    #[cfg_attr(feature = "serde", serde(rename = "EB"))]
    Eb,
    #[cfg_attr(feature = "serde", serde(rename = "VBEM-baseline"))]
    VbemBaseline,
    #[cfg_attr(feature = "serde", serde(rename = "fixed-prior"))]
    FixedPrior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "flag", rename_all = "snake_case"))]
pub enum EstimateFlag {
    /// Block had no node pairs; the MLE was filled with the pooled density.
    EmptyBlockFilled { a: usize, b: usize },
    /// No off-diagonal block had pairs; `(α1, β1)` was left at `(1, 1)`.
    OffDiagonalUnfitted,
    /// The hyperparameter search stopped before meeting its tolerance.
    NotConverged { kind: BlockKind },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityEstimate {
    pub theta: Matrix,
    pub method: Method,
    pub hyper: Option<HyperParams>,
    /// Shrinkage factors `η_ab` (EB and fixed-prior estimates only).
    pub shrinkage: Option<Matrix>,
    pub flags: Vec<EstimateFlag>,
}

impl ConnectivityEstimate {
    pub fn k(&self) -> usize {
        self.theta.rows()
    }

    /// Wraps an externally computed matrix, e.g. the variational posterior
    /// mean, as a baseline estimate.
    pub fn vbem_baseline(theta: Matrix) -> Self {
        ConnectivityEstimate {
            theta,
            method: Method::VbemBaseline,
            hyper: None,
            shrinkage: None,
            flags: Vec::new(),
        }
    }
}

fn check_positive(function: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { function, value: v })
    }
}

fn blocks(stats: &BlockStats, kind: BlockKind) -> Vec<(f64, f64)> {
    let it: alloc::boxed::Box<dyn Iterator<Item = _>> = match kind {
        BlockKind::Diagonal => alloc::boxed::Box::new(stats.diagonal()),
        BlockKind::OffDiagonal => alloc::boxed::Box::new(stats.off_diagonal()),
    };
    it.filter(|&(_, _, _, m)| m > 0)
        .map(|(_, _, x, m)| (x as f64, m as f64))
        .collect()
}

/// Block-level MLE `X / n`. Zero-pair blocks get the pooled density and a flag.
pub fn mle_estimate(stats: &BlockStats) -> ConnectivityEstimate {
    let k = stats.k();
    let fill = stats.density();
    let mut flags = Vec::new();
    let theta = Matrix::from_fn(k, k, |a, b| match stats.pairs(a, b) {
        0 => {
            if a <= b {
                flags.push(EstimateFlag::EmptyBlockFilled { a, b });
            }
            fill
        }
        m => stats.edges(a, b) as f64 / m as f64,
    });
    ConnectivityEstimate {
        theta,
        method: Method::Mle,
        hyper: None,
        shrinkage: None,
        flags,
    }
}

fn block_loglik(alpha: f64, beta: f64, x: f64, m: f64) -> f64 {
    // log B(α + x, β + m - x) - log B(α, β)
    ln_rising(alpha, x) + ln_rising(beta, m - x) - ln_rising(alpha + beta, m)
}

fn block_gradient(alpha: f64, beta: f64, x: f64, m: f64) -> (f64, f64) {
    let common = digamma_unchecked(alpha + beta) - digamma_unchecked(alpha + beta + m);
    (
        digamma_unchecked(alpha + x) - digamma_unchecked(alpha) + common,
        digamma_unchecked(beta + m - x) - digamma_unchecked(beta) + common,
    )
}

/// Marginal log-likelihood of the diagonal or off-diagonal blocks:
/// `Σ log B(α + X, β + n - X) - log B(α, β)`. Zero-pair blocks add nothing.
pub fn marginal_loglik(stats: &BlockStats, alpha: f64, beta: f64, kind: BlockKind) -> Result<f64> {
    check_positive("marginal_loglik", alpha)?;
    check_positive("marginal_loglik", beta)?;
    Ok(blocks(stats, kind)
        .into_iter()
        .map(|(x, m)| block_loglik(alpha, beta, x, m))
        .sum())
}

/// Gradient of [`marginal_loglik`] in `(α, β)`.
pub fn loglik_gradient(
    stats: &BlockStats,
    alpha: f64,
    beta: f64,
    kind: BlockKind,
) -> Result<(f64, f64)> {
    check_positive("loglik_gradient", alpha)?;
    check_positive("loglik_gradient", beta)?;
    Ok(blocks(stats, kind)
        .into_iter()
        .map(|(x, m)| block_gradient(alpha, beta, x, m))
        .fold((0.0, 0.0), |(ga, gb), (da, db)| (ga + da, gb + db)))
}

/// Outcome of fitting one hyperparameter pair.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairFit {
    pub alpha: f64,
    pub beta: f64,
    /// Maximized marginal log-likelihood (0 when unfitted).
    pub loglik: f64,
    /// False when there were no blocks to fit and the default was used.
    pub fitted: bool,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperFit {
    pub params: HyperParams,
    pub diagonal: PairFit,
    pub off_diagonal: PairFit,
}

impl HyperFit {
    /// Sum of the two maximized marginal log-likelihoods.
    pub fn loglik(&self) -> f64 {
        self.diagonal.loglik + self.off_diagonal.loglik
    }

    pub fn flags(&self) -> Vec<EstimateFlag> {
        let mut flags = Vec::new();
        if !self.off_diagonal.fitted {
            flags.push(EstimateFlag::OffDiagonalUnfitted);
        }
        for (fit, kind) in [
            (&self.diagonal, BlockKind::Diagonal),
            (&self.off_diagonal, BlockKind::OffDiagonal),
        ] {
            if fit.fitted && !fit.converged {
                flags.push(EstimateFlag::NotConverged { kind });
            }
        }
        flags
    }
}

/// Method-of-moments Beta fit to the block frequencies, clamped into the
/// search box. Falls back to `(1, 1)` when the moments do not determine a Beta.
pub fn moment_init(stats: &BlockStats, kind: BlockKind) -> (f64, f64) {
    let freqs: Vec<f64> = blocks(stats, kind).iter().map(|(x, m)| x / m).collect();
    let count = freqs.len() as f64;
    if freqs.len() < 2 {
        return (1.0, 1.0);
    }
    let mean = freqs.iter().sum::<f64>() / count;
    let var = freqs.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / count;
    if !(var > 0.0 && mean > 0.0 && mean < 1.0) {
        return (1.0, 1.0);
    }
    let total = mean * (1.0 - mean) / var - 1.0;
    if !(total > 0.0) {
        return (1.0, 1.0);
    }
    let clamp = |v: f64| v.max(HYPER_MIN).min(HYPER_MAX);
    (clamp(mean * total), clamp((1.0 - mean) * total))
}

/// Maximizes the marginal likelihood of one block family over
/// `α, β ∈ [HYPER_MIN, HYPER_MAX]`, searching in log space from the moment
/// estimate and from `(1, 1)`.
pub fn fit_pair(stats: &BlockStats, kind: BlockKind) -> Result<PairFit> {
    let data = blocks(stats, kind);
    if data.is_empty() {
        return match kind {
            BlockKind::Diagonal => Err(Error::InvalidInput(
                "no diagonal block has any node pairs".into(),
            )),
            BlockKind::OffDiagonal => Ok(PairFit {
                alpha: 1.0,
                beta: 1.0,
                loglik: 0.0,
                fitted: false,
                converged: true,
                iterations: 0,
            }),
        };
    }
    let objective = |u: &[f64], grad: &mut [f64]| {
        let (alpha, beta) = (u[0].exp(), u[1].exp());
        let mut value = 0.0;
        let (mut ga, mut gb) = (0.0, 0.0);
        for &(x, m) in &data {
            value += block_loglik(alpha, beta, x, m);
            let (da, db) = block_gradient(alpha, beta, x, m);
            ga += da;
            gb += db;
        }
        grad[0] = alpha * ga;
        grad[1] = beta * gb;
        value
    };
    let bounds = Bounds::uniform(2, HYPER_MIN.ln(), HYPER_MAX.ln())?;
    let to_log = |(a, b): (f64, f64)| {
        let lo = HYPER_MIN.ln();
        let hi = HYPER_MAX.ln();
        [a.ln().max(lo).min(hi), b.ln().max(lo).min(hi)]
    };

    let mut starts = alloc::vec![to_log(moment_init(stats, kind))];
    let unit = to_log((1.0, 1.0));
    if starts[0] != unit {
        starts.push(unit);
    }
    let mut best: Option<crate::numerics::BoxOptimum> = None;
    for start in &starts {
        let run = maximize_box(objective, &bounds, start, MaximizeOptions::default())?;
        if best.as_ref().map_or(true, |b| run.value > b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    Ok(PairFit {
        alpha: best.argmax[0].exp(),
        beta: best.argmax[1].exp(),
        loglik: best.value,
        fitted: true,
        converged: best.converged,
        iterations: best.iterations,
    })
}

/// Maximum marginal likelihood estimates of both hyperparameter pairs.
pub fn fit_hyperparams(stats: &BlockStats) -> Result<HyperFit> {
    let diagonal = fit_pair(stats, BlockKind::Diagonal)?;
    let off_diagonal = fit_pair(stats, BlockKind::OffDiagonal)?;
    Ok(HyperFit {
        params: HyperParams {
            alpha0: diagonal.alpha,
            beta0: diagonal.beta,
            alpha1: off_diagonal.alpha,
            beta1: off_diagonal.beta,
        },
        diagonal,
        off_diagonal,
    })
}

fn posterior_mean(stats: &BlockStats, hyper: &HyperParams, method: Method) -> ConnectivityEstimate {
    let k = stats.k();
    let mut shrinkage = Matrix::zeros(k, k);
    let theta = Matrix::from_fn(k, k, |a, b| {
        let (alpha, beta) = hyper.pair(BlockKind::of(a, b));
        let m = stats.pairs(a, b) as f64;
        shrinkage[(a, b)] = (alpha + beta) / (alpha + beta + m);
        (alpha + stats.edges(a, b) as f64) / (alpha + beta + m)
    });
    ConnectivityEstimate {
        theta,
        method,
        hyper: Some(*hyper),
        shrinkage: Some(shrinkage),
        flags: Vec::new(),
    }
}

/// Posterior-mean estimate under the given hyperparameters.
pub fn eb_estimate(stats: &BlockStats, hyper: &HyperParams) -> ConnectivityEstimate {
    posterior_mean(stats, hyper, Method::Eb)
}

/// Fits the hyperparameters and returns the empirical Bayes estimate,
/// carrying the fit's flags.
pub fn empirical_bayes(stats: &BlockStats) -> Result<(ConnectivityEstimate, HyperFit)> {
    let fit = fit_hyperparams(stats)?;
    let mut est = eb_estimate(stats, &fit.params);
    est.flags = fit.flags();
    Ok((est, fit))
}

/// Per-block posterior mean under a fixed `Beta(a0, b0)` prior on every block.
pub fn fixed_prior_estimate(stats: &BlockStats, a0: f64, b0: f64) -> Result<ConnectivityEstimate> {
    check_positive("fixed_prior_estimate", a0)?;
    check_positive("fixed_prior_estimate", b0)?;
    let hyper = HyperParams {
        alpha0: a0,
        beta0: b0,
        alpha1: a0,
        beta1: b0,
    };
    Ok(posterior_mean(stats, &hyper, Method::FixedPrior))
}
