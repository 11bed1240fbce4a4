//! Piecewise-constant graphons built from block model fits.
//!
//! A [`StepGraphon`] splits `[0, 1)` into `K` half-open cells
//! `[c_{k-1}, c_k)` whose widths are the cluster proportions, and takes the
//! value `θ_ab` on cell `a x b`. Cell indices are 0-based here.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::graph::Partition;
use crate::samplers::GraphonSpec;
use crate::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct StepGraphon {
    boundaries: Vec<f64>,
    theta: Matrix,
}

impl StepGraphon {
    /// `boundaries` must run strictly upward from 0 to 1 (the ends are
    /// snapped to exactly 0 and 1 when within 1e-12).
    pub fn new(mut boundaries: Vec<f64>, theta: Matrix) -> Result<Self> {
        let k = theta.rows();
        if k == 0 || !theta.is_square() {
            return Err(invalid("theta must be a non-empty square matrix"));
        }
        if boundaries.len() != k + 1 {
            return Err(invalid(format!(
                "{} boundaries for {k} cells",
                boundaries.len()
            )));
        }
        if boundaries[0].abs() > 1e-12 || (boundaries[k] - 1.0).abs() > 1e-12 {
            return Err(invalid("boundaries must start at 0 and end at 1"));
        }
        boundaries[0] = 0.0;
        boundaries[k] = 1.0;
        if boundaries.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("boundaries must be strictly increasing"));
        }
        if !theta.is_symmetric(1e-12) {
            return Err(invalid("theta must be symmetric"));
        }
        if theta.as_slice().iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(invalid("theta entries must lie in [0, 1]"));
        }
        Ok(StepGraphon { boundaries, theta })
    }

    /// Cells with the given widths; the cumulative sums are rescaled so the
    /// last boundary is exactly 1.
    pub fn from_proportions(widths: &[f64], theta: Matrix) -> Result<Self> {
        let total: f64 = widths.iter().sum();
        if widths.is_empty() || !(total > 0.0) || widths.iter().any(|w| !(*w > 0.0)) {
            return Err(invalid("cell widths must be positive"));
        }
        let mut boundaries = Vec::with_capacity(widths.len() + 1);
        boundaries.push(0.0);
        let mut acc = 0.0;
        for w in widths {
            acc += w;
            boundaries.push(acc / total);
        }
        *boundaries.last_mut().unwrap() = 1.0;
        StepGraphon::new(boundaries, theta)
    }

    pub fn k(&self) -> usize {
        self.theta.rows()
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }

    /// Width of each cell, `π_k = c_k - c_{k-1}`.
    pub fn widths(&self) -> Vec<f64> {
        self.boundaries.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `Ŵ(x, y)` for `x, y ∈ [0, 1)`.
    pub fn evaluate(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.theta[(bin(x, &self.boundaries)?, bin(y, &self.boundaries)?)])
    }

    pub(crate) fn value(&self, x: f64, y: f64) -> f64 {
        self.theta[(cell_of(x, &self.boundaries), cell_of(y, &self.boundaries))]
    }

    /// Block degree function `g(l) = Σ_k π_k θ_lk`.
    pub fn degrees(&self) -> Vec<f64> {
        let widths = self.widths();
        (0..self.k())
            .map(|l| {
                widths
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * self.theta[(l, k)])
                    .sum()
            })
            .collect()
    }

    /// Relabels cells so the degree function is nondecreasing.
    ///
    /// Returns the reordered graphon and `order`, where new cell `i` is old
    /// cell `order[i]`. Ties keep their original relative order.
    pub fn reorder_identifiable(&self) -> (StepGraphon, Vec<usize>) {
        let g = self.degrees();
        let mut order: Vec<usize> = (0..self.k()).collect();
        order.sort_by(|&a, &b| {
            g[a].partial_cmp(&g[b])
                .unwrap_or(core::cmp::Ordering::Equal)
        });
        let widths = self.widths();
        let new_widths: Vec<f64> = order.iter().map(|&o| widths[o]).collect();
        let mut boundaries = Vec::with_capacity(self.k() + 1);
        boundaries.push(0.0);
        let mut acc = 0.0;
        for w in &new_widths {
            acc += w;
            boundaries.push(acc);
        }
        *boundaries.last_mut().unwrap() = 1.0;
        let reordered = StepGraphon {
            boundaries,
            theta: self.theta.select(&order),
        };
        (reordered, order)
    }
}

/// Step graphon with cell widths `n_k / n` and values `theta`.
pub fn build_step_graphon(partition: &Partition, theta: &Matrix) -> Result<StepGraphon> {
    if theta.rows() != partition.k() || !theta.is_square() {
        return Err(invalid(format!(
            "theta is {}x{} but the partition has {} clusters",
            theta.rows(),
            theta.cols(),
            partition.k()
        )));
    }
    let widths: Vec<f64> = partition.sizes().iter().map(|&s| s as f64).collect();
    StepGraphon::from_proportions(&widths, theta.clone())
}

/// Index of the half-open cell `[c_k, c_{k+1})` containing `x ∈ [0, 1)`,
/// counted as the number of interior boundaries `c_k <= x`.
pub fn bin(x: f64, boundaries: &[f64]) -> Result<usize> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain {
            function: "bin",
            value: x,
        });
    }
    if boundaries.len() < 2 {
        return Err(invalid("need at least two boundaries"));
    }
    Ok(cell_of(x, boundaries))
}

fn cell_of(x: f64, boundaries: &[f64]) -> usize {
    let interior = &boundaries[1..boundaries.len() - 1];
    interior.partition_point(|&c| c <= x)
}

/// Grid resolution for truths without a closed form.
pub const MSE_GRID: usize = 2000;

/// Integrated squared error `∫∫ (W - Ŵ)²` over the unit square.
///
/// Exact for constant, power-law and step truths; midpoint rule on a
/// [`MSE_GRID`]² grid for custom functions. No alignment is applied; see
/// [`mse_graphon_aligned`].
pub fn mse_graphon(estimate: &StepGraphon, truth: &GraphonSpec) -> f64 {
    let cells = estimate.boundaries.windows(2);
    let value = match truth {
        GraphonSpec::Constant(p) => {
            let w = estimate.widths();
            let mut total = 0.0;
            for a in 0..estimate.k() {
                for b in 0..estimate.k() {
                    total += w[a] * w[b] * (estimate.theta[(a, b)] - p).powi(2);
                }
            }
            total
        }
        GraphonSpec::PowerLaw { rho, lambda } => {
            if *lambda <= 0.5 {
                // W is not square integrable
                return f64::INFINITY;
            }
            let c = rho * lambda * lambda;
            let moments: Vec<(f64, f64, f64)> = cells
                .map(|w| {
                    let (lo, hi) = (w[0], w[1]);
                    let m1 = (hi.powf(*lambda) - lo.powf(*lambda)) / lambda;
                    let e2 = 2.0 * lambda - 1.0;
                    let m2 = (hi.powf(e2) - lo.powf(e2)) / e2;
                    (hi - lo, m1, m2)
                })
                .collect();
            let mut total = 0.0;
            for (a, &(wa, m1a, m2a)) in moments.iter().enumerate() {
                for (b, &(wb, m1b, m2b)) in moments.iter().enumerate() {
                    let t = estimate.theta[(a, b)];
                    total += c * c * m2a * m2b - 2.0 * t * c * m1a * m1b + t * t * wa * wb;
                }
            }
            total
        }
        GraphonSpec::Step(other) => {
            let mut cuts: Vec<f64> = estimate
                .boundaries
                .iter()
                .chain(&other.boundaries)
                .copied()
                .collect();
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            cuts.dedup();
            let mids: Vec<(f64, f64)> = cuts
                .windows(2)
                .map(|w| ((w[0] + w[1]) / 2.0, w[1] - w[0]))
                .collect();
            let mut total = 0.0;
            for &(x, wx) in &mids {
                for &(y, wy) in &mids {
                    total += wx * wy * (estimate.value(x, y) - other.value(x, y)).powi(2);
                }
            }
            total
        }
        GraphonSpec::Custom(_) => mse_midpoint(estimate, truth, MSE_GRID),
    };
    value.max(0.0)
}

/// Midpoint-rule approximation of the integrated squared error on a
/// `grid x grid` lattice.
pub fn mse_midpoint(estimate: &StepGraphon, truth: &GraphonSpec, grid: usize) -> f64 {
    let h = 1.0 / grid as f64;
    let pts: Vec<(f64, usize)> = (0..grid)
        .map(|i| {
            let x = (i as f64 + 0.5) * h;
            (x, cell_of(x, &estimate.boundaries))
        })
        .collect();
    let mut total = 0.0;
    for &(x, a) in &pts {
        let mut row = 0.0;
        for &(y, b) in &pts {
            row += (truth.value(x, y) - estimate.theta[(a, b)]).powi(2);
        }
        total += row;
    }
    total * h * h
}

/// Integrated squared error after putting the estimate in nondecreasing
/// degree order.
pub fn mse_graphon_aligned(estimate: &StepGraphon, truth: &GraphonSpec) -> f64 {
    mse_graphon(&estimate.reorder_identifiable().0, truth)
}
