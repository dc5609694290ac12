//! Block-structure recovery from continuous posterior output.
//!
//! Two rules are provided. [`project_blocks`] discretises one draw (θ, σ) by
//! declaring a successive difference fused when |θⱼ − θⱼ₋₁|/σ falls below
//! ε_n/n with ε_n = c·sqrt(s₀ log n / n). [`practical_threshold`] needs no
//! knowledge of s₀ and compares estimated gaps against half the observed gaps.
//!
//! Difference positions are 0-based and named by their later element: `j`
//! stands for θ[j] − θ[j−1], `j` in `1..n`.

use std::collections::BTreeSet;

use crate::error::{FusionError, Result};
use crate::model::PosteriorSamples;

/// Fused difference positions of one projected draw.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProjection {
    pub n: usize,
    pub fused_set: BTreeSet<usize>,
    pub threshold: f64,
}

impl BlockProjection {
    pub fn is_fused(&self, j: usize) -> bool {
        self.fused_set.contains(&j)
    }

    /// Positions declared as block boundaries.
    pub fn boundaries(&self) -> impl Iterator<Item = usize> + '_ {
        (1..self.n).filter(|j| !self.fused_set.contains(j))
    }
}

/// ε_n / n with ε_n = constant · sqrt(s₀ log n / n).
pub fn contraction_threshold(n: usize, s0: usize, constant: f64) -> f64 {
    let nf = n as f64;
    constant * (s0 as f64 * nf.ln() / nf).sqrt() / nf
}

pub fn project_blocks(theta: &[f64], sigma: f64, s0: usize) -> Result<BlockProjection> {
    project_blocks_with(theta, sigma, s0, 1.0)
}

/// [`project_blocks`] with an explicit proportionality constant in ε_n.
pub fn project_blocks_with(
    theta: &[f64],
    sigma: f64,
    s0: usize,
    constant: f64,
) -> Result<BlockProjection> {
    if s0 == 0 {
        return Err(FusionError::domain("s0 must be at least 1"));
    }
    if !(sigma > 0.0) {
        return Err(FusionError::domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(constant > 0.0) {
        return Err(FusionError::domain("threshold constant must be positive"));
    }
    let n = theta.len();
    let threshold = contraction_threshold(n, s0, constant);
    let fused_set = (1..n)
        .filter(|&j| (theta[j] - theta[j - 1]).abs() / sigma < threshold)
        .collect();
    Ok(BlockProjection {
        n,
        fused_set,
        threshold,
    })
}

/// Number of positions declared non-fused where the truth has no jump.
pub fn false_positive_count(proj: &BlockProjection, truth: &[f64]) -> Result<usize> {
    if truth.len() != proj.n {
        return Err(FusionError::domain(format!(
            "truth has length {} but projection covers {}",
            truth.len(),
            proj.n
        )));
    }
    Ok(proj
        .boundaries()
        .filter(|&j| truth[j] == truth[j - 1])
        .count())
}

/// How σ is plugged into the projection of each draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaMode {
    /// Use each draw's own σ.
    PerDraw,
    /// Use the posterior mean of σ for every draw.
    PosteriorMean,
}

/// False-positive count for every stored draw.
pub fn false_positives_per_draw(
    samples: &PosteriorSamples,
    truth: &[f64],
    s0: usize,
    constant: f64,
    mode: SigmaMode,
) -> Result<Vec<usize>> {
    if samples.rows() == 0 {
        return Err(FusionError::State("no posterior draws".into()));
    }
    let mean_sigma = samples.sigma_draws.iter().map(|s| s.sqrt()).sum::<f64>()
        / samples.rows() as f64;
    samples
        .iter_rows()
        .zip(&samples.sigma_draws)
        .map(|(theta, &s2)| {
            let sigma = match mode {
                SigmaMode::PerDraw => s2.sqrt(),
                SigmaMode::PosteriorMean => mean_sigma,
            };
            let proj = project_blocks_with(theta, sigma, s0, constant)?;
            false_positive_count(&proj, truth)
        })
        .collect()
}

/// Symmetric fused/not-fused relation over index pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwiseBlocks {
    n: usize,
    indicator: Vec<bool>,
}

impl PairwiseBlocks {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fused(&self, j1: usize, j2: usize) -> bool {
        self.indicator[j1 * self.n + j2]
    }

    /// Number of unordered pairs j1 < j2 declared fused.
    pub fn fused_pair_count(&self) -> usize {
        (0..self.n)
            .flat_map(|a| (a + 1..self.n).map(move |b| (a, b)))
            .filter(|&(a, b)| self.fused(a, b))
            .count()
    }

    /// Maximal runs of consecutive indices whose neighbours are fused,
    /// as half-open ranges.
    pub fn adjacent_segments(&self) -> Vec<std::ops::Range<usize>> {
        let mut segments = Vec::new();
        let mut start = 0;
        for j in 1..self.n {
            if !self.fused(j - 1, j) {
                segments.push(start..j);
                start = j;
            }
        }
        if self.n > 0 {
            segments.push(start..self.n);
        }
        segments
    }
}

/// θ̂_{j1} and θ̂_{j2} are declared equal when |θ̂_{j1} − θ̂_{j2}| < ½|y_{j1} − y_{j2}|.
pub fn practical_threshold(theta_hat: &[f64], y: &[f64]) -> Result<PairwiseBlocks> {
    let n = theta_hat.len();
    if y.len() != n {
        return Err(FusionError::domain(format!(
            "estimate has length {n} but data has length {}",
            y.len()
        )));
    }
    let mut indicator = vec![false; n * n];
    for a in 0..n {
        indicator[a * n + a] = true;
        for b in a + 1..n {
            let f = (theta_hat[a] - theta_hat[b]).abs() < 0.5 * (y[a] - y[b]).abs();
            indicator[a * n + b] = f;
            indicator[b * n + a] = f;
        }
    }
    Ok(PairwiseBlocks { n, indicator })
}

/// Within-block average variation and between-block separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WbMetrics {
    /// Mean |θ̂_{j1} − θ̂_{j2}| over pairs with equal true values (0 when none).
    pub w: f64,
    /// Min |θ̂_{j1} − θ̂_{j2}| over pairs with different true values (+∞ when none).
    pub b: f64,
}

pub fn wb_metrics(theta_hat: &[f64], truth: &[f64]) -> Result<WbMetrics> {
    let n = theta_hat.len();
    if truth.len() != n {
        return Err(FusionError::domain(format!(
            "estimate has length {n} but truth has length {}",
            truth.len()
        )));
    }
    let mut within_sum = 0.0;
    let mut within_count = 0usize;
    let mut between_min = f64::INFINITY;
    for a in 0..n {
        for b in a + 1..n {
            let gap = (theta_hat[a] - theta_hat[b]).abs();
            if truth[a] == truth[b] {
                within_sum += gap;
                within_count += 1;
            } else if gap < between_min {
                between_min = gap;
            }
        }
    }
    let w = if within_count == 0 {
        0.0
    } else {
        within_sum / within_count as f64
    };
    Ok(WbMetrics { w, b: between_min })
}
