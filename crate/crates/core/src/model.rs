//! Data model for the normal sequence problem: observations, prior and MCMC
//! configuration, sampler state, and stored posterior draws.

use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};

/// Observed signal over a linear chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainData {
    pub y: Vec<f64>,
    /// Planted signal, when known (simulations).
    pub truth: Option<Vec<f64>>,
    /// Planted noise standard deviation, when known.
    pub sigma0: Option<f64>,
}

impl ChainData {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.len() < 2 {
            return Err(FusionError::domain(format!(
                "a chain needs at least 2 observations, got {}",
                y.len()
            )));
        }
        if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
            return Err(FusionError::domain(format!(
                "observation {bad} is not finite"
            )));
        }
        Ok(Self {
            y,
            truth: None,
            sigma0: None,
        })
    }

    pub fn with_truth(mut self, truth: Vec<f64>) -> Result<Self> {
        if truth.len() != self.y.len() {
            return Err(FusionError::domain(format!(
                "truth has length {} but y has length {}",
                truth.len(),
                self.y.len()
            )));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn with_sigma0(mut self, sigma0: f64) -> Result<Self> {
        if !(sigma0 > 0.0) {
            return Err(FusionError::domain(format!("sigma0 must be positive, got {sigma0}")));
        }
        self.sigma0 = Some(sigma0);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Shrinkage prior placed on successive differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorFamily {
    Horseshoe,
    TShrinkage,
    Laplace,
}

impl PriorFamily {
    pub fn label(&self) -> &'static str {
        match self {
            PriorFamily::Horseshoe => "hs",
            PriorFamily::TShrinkage => "t",
            PriorFamily::Laplace => "laplace",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hs" | "horseshoe" => Ok(PriorFamily::Horseshoe),
            "t" | "t_shrinkage" | "t-shrinkage" => Ok(PriorFamily::TShrinkage),
            "laplace" => Ok(PriorFamily::Laplace),
            other => Err(FusionError::Config(format!("unknown prior family '{other}'"))),
        }
    }
}

impl std::fmt::Display for PriorFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Fixed hyperparameters of the fusion prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub family: PriorFamily,
    pub a_sigma: f64,
    pub b_sigma: f64,
    /// Fixed scale of the first mean (chain) or of the root mean (graph).
    pub lambda_first: f64,
    /// Scale of η/σ for the t and Laplace families. `None` selects
    /// [`default_family_scale`] for the data length.
    pub family_scale: Option<f64>,
    /// Degrees of freedom of the t family.
    pub t_df: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            family: PriorFamily::Horseshoe,
            a_sigma: 0.5,
            b_sigma: 0.5,
            lambda_first: 5.0,
            family_scale: None,
            t_df: 2.0,
        }
    }
}

/// Default per-difference scale for the t and Laplace families:
/// 1 / (n² · sqrt(n log n)).
pub fn default_family_scale(n: usize) -> f64 {
    let nf = n.max(2) as f64;
    1.0 / (nf * nf * (nf * nf.ln()).sqrt())
}

impl PriorConfig {
    pub fn with_family(family: PriorFamily) -> Self {
        Self {
            family,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(FusionError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("a_sigma", self.a_sigma)?;
        positive("b_sigma", self.b_sigma)?;
        positive("lambda_first", self.lambda_first)?;
        positive("t_df", self.t_df)?;
        if let Some(s) = self.family_scale {
            positive("family_scale", s)?;
        }
        Ok(())
    }

    pub fn resolved_family_scale(&self, n: usize) -> f64 {
        self.family_scale.unwrap_or_else(|| default_family_scale(n))
    }
}

/// One full parameter configuration of the Gibbs sampler.
///
/// `lambda_sq[k]` and `nu[k]` belong to the difference θ[k+1] − θ[k]. For the
/// t and Laplace families `lambda_sq` holds the per-difference mixing
/// variances and `tau_sq` stays fixed at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub theta: Vec<f64>,
    pub lambda_sq: Vec<f64>,
    pub tau_sq: f64,
    pub sigma_sq: f64,
    pub nu: Vec<f64>,
    pub xi: f64,
}

impl GibbsState {
    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn check_invariants(&self) -> Result<()> {
        let n = self.theta.len();
        if self.lambda_sq.len() + 1 != n || self.nu.len() + 1 != n {
            return Err(FusionError::State(format!(
                "state shape mismatch: {} means, {} local scales, {} nu",
                n,
                self.lambda_sq.len(),
                self.nu.len()
            )));
        }
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(FusionError::State(format!("{name} must be positive, got {v}")))
            }
        };
        pos("tau_sq", self.tau_sq)?;
        pos("sigma_sq", self.sigma_sq)?;
        pos("xi", self.xi)?;
        for (k, (&l, &v)) in self.lambda_sq.iter().zip(&self.nu).enumerate() {
            pos(&format!("lambda_sq[{k}]"), l)?;
            pos(&format!("nu[{k}]"), v)?;
        }
        if let Some(k) = self.theta.iter().position(|t| !t.is_finite()) {
            return Err(FusionError::State(format!("theta[{k}] is not finite")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub thin: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_iter: 5000,
            burn_in: 500,
            seed: 0,
            thin: 1,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(FusionError::Config("n_iter must be positive".into()));
        }
        if self.thin == 0 {
            return Err(FusionError::Config("thin must be positive".into()));
        }
        if self.burn_in >= self.n_iter {
            return Err(FusionError::Config(format!(
                "burn_in ({}) must be smaller than n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        Ok(())
    }

    /// Whether iteration `iter` (0-based) is recorded.
    pub fn keeps(&self, iter: usize) -> bool {
        iter >= self.burn_in && (iter - self.burn_in) % self.thin == 0
    }

    pub fn kept_rows(&self) -> usize {
        (self.n_iter - self.burn_in).div_ceil(self.thin)
    }
}

/// Provenance attached to stored draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub seed: u64,
    pub prior: PriorConfig,
    pub mcmc: McmcConfig,
    /// Root vertex (0-based) for graph chains.
    pub root: Option<usize>,
}

/// Post-burn-in draws of θ (row-major, one row per kept iteration) plus the
/// matching σ² and τ² draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    n: usize,
    draws: Vec<f64>,
    pub sigma_draws: Vec<f64>,
    pub tau_draws: Vec<f64>,
    pub meta: SampleMeta,
}

impl PosteriorSamples {
    pub fn with_capacity(n: usize, rows: usize, meta: SampleMeta) -> Self {
        Self {
            n,
            draws: Vec::with_capacity(n * rows),
            sigma_draws: Vec::with_capacity(rows),
            tau_draws: Vec::with_capacity(rows),
            meta,
        }
    }

    pub fn push(&mut self, theta: &[f64], sigma_sq: f64, tau_sq: f64) {
        debug_assert_eq!(theta.len(), self.n);
        self.draws.extend_from_slice(theta);
        self.sigma_draws.push(sigma_sq);
        self.tau_draws.push(tau_sq);
    }

    /// Builds samples from explicit rows; every row must have length `n`.
    pub fn from_rows(
        rows: &[Vec<f64>],
        sigma_draws: Vec<f64>,
        tau_draws: Vec<f64>,
        meta: SampleMeta,
    ) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(FusionError::State("ragged draw rows".into()));
        }
        if sigma_draws.len() != rows.len() || tau_draws.len() != rows.len() {
            return Err(FusionError::State("scale draws do not match row count".into()));
        }
        Ok(Self {
            n,
            draws: rows.concat(),
            sigma_draws,
            tau_draws,
            meta,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.sigma_draws.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.draws[k * self.n..(k + 1) * self.n]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.draws.chunks_exact(self.n.max(1)).take(self.rows())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[j]).collect()
    }

    pub fn posterior_mean(&self) -> Result<Vec<f64>> {
        if self.rows() == 0 || self.n == 0 {
            return Err(FusionError::State("no posterior draws".into()));
        }
        let mut mean = vec![0.0; self.n];
        for row in self.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let k = self.rows() as f64;
        mean.iter_mut().for_each(|m| *m /= k);
        Ok(mean)
    }

    /// Appends another sample set with the same dimension.
    pub fn append(&mut self, other: &PosteriorSamples) -> Result<()> {
        if other.n != self.n {
            return Err(FusionError::State(format!(
                "cannot pool samples of dimension {} and {}",
                self.n, other.n
            )));
        }
        self.draws.extend_from_slice(&other.draws);
        self.sigma_draws.extend_from_slice(&other.sigma_draws);
        self.tau_draws.extend_from_slice(&other.tau_draws);
        Ok(())
    }
}

/// Component-wise posterior mean and equal-tailed credible band.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
}

/// Linear-interpolation quantile (R type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn posterior_summary(samples: &PosteriorSamples, level: f64) -> Result<PosteriorSummary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(FusionError::domain(format!(
            "credible level must lie in (0, 1), got {level}"
        )));
    }
    let mean = samples.posterior_mean()?;
    let alpha = (1.0 - level) / 2.0;
    let n = samples.n();
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut col = Vec::with_capacity(samples.rows());
    for j in 0..n {
        col.clear();
        col.extend(samples.iter_rows().map(|r| r[j]));
        col.sort_by(f64::total_cmp);
        lower.push(quantile_sorted(&col, alpha));
        upper.push(quantile_sorted(&col, 1.0 - alpha));
    }
    Ok(PosteriorSummary {
        mean,
        lower,
        upper,
        level,
    })
}

fn check_same_len(est: &[f64], truth: &[f64]) -> Result<()> {
    if est.len() != truth.len() || est.is_empty() {
        return Err(FusionError::domain(format!(
            "estimate and truth lengths differ or are empty ({} vs {})",
            est.len(),
            truth.len()
        )));
    }
    Ok(())
}

fn squared_error(est: &[f64], truth: &[f64]) -> f64 {
    est.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// ‖est − truth‖² / n
pub fn mse(est: &[f64], truth: &[f64]) -> Result<f64> {
    check_same_len(est, truth)?;
    Ok(squared_error(est, truth) / est.len() as f64)
}

/// ‖est − truth‖² / ‖truth‖²
pub fn adj_mse(est: &[f64], truth: &[f64]) -> Result<f64> {
    check_same_len(est, truth)?;
    let norm: f64 = truth.iter().map(|t| t * t).sum();
    if norm == 0.0 {
        return Err(FusionError::domain("adjusted MSE needs a non-zero truth vector"));
    }
    Ok(squared_error(est, truth) / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample_standard_normal, seeded_rng};
    use proptest::prelude::*;

    fn meta() -> SampleMeta {
        SampleMeta {
            seed: 0,
            prior: PriorConfig::default(),
            mcmc: McmcConfig::default(),
            root: None,
        }
    }

    fn samples_from(rows: Vec<Vec<f64>>) -> PosteriorSamples {
        let k = rows.len();
        PosteriorSamples::from_rows(&rows, vec![1.0; k], vec![1.0; k], meta()).unwrap()
    }

    #[test]
    fn identical_draws_collapse_the_band() {
        let v = vec![1.0, -2.0, 3.5];
        let s = samples_from(vec![v.clone(); 20]);
        let sum = posterior_summary(&s, 0.95).unwrap();
        assert_eq!(sum.mean, v);
        assert_eq!(sum.lower, v);
        assert_eq!(sum.upper, v);
    }

    #[test]
    fn symmetric_draws_give_centre_mean() {
        let v = [0.5, 2.0];
        let c = 0.25;
        let mut rows = Vec::new();
        for _ in 0..50 {
            rows.push(v.iter().map(|x| x - c).collect());
            rows.push(v.iter().map(|x| x + c).collect());
        }
        let sum = posterior_summary(&samples_from(rows), 0.95).unwrap();
        for (m, x) in sum.mean.iter().zip(v) {
            assert!((m - x).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_draws_band_matches_normal_quantiles() {
        // Each tail quantile has a Monte-Carlo SE of about 0.027 at 10^4 draws,
        // so the 0.05 tolerance is under 2 SE.
        let mut rng = seeded_rng(1);
        let rows: Vec<Vec<f64>> = (0..10_000)
            .map(|_| (0..3).map(|_| sample_standard_normal(&mut rng)).collect())
            .collect();
        let sum = posterior_summary(&samples_from(rows), 0.95).unwrap();
        let z = 1.959_963_984_540_054;
        for j in 0..3 {
            assert!((sum.lower[j] + z).abs() < 0.05, "lower {}", sum.lower[j]);
            assert!((sum.upper[j] - z).abs() < 0.05, "upper {}", sum.upper[j]);
            assert!(sum.lower[j] <= sum.mean[j] && sum.mean[j] <= sum.upper[j]);
        }
    }

    #[test]
    fn summary_errors() {
        let empty = PosteriorSamples::with_capacity(3, 0, meta());
        assert!(matches!(posterior_summary(&empty, 0.9), Err(FusionError::State(_))));
        let s = samples_from(vec![vec![1.0]; 3]);
        assert!(posterior_summary(&s, 1.0).is_err());
        assert!(posterior_summary(&s, 0.0).is_err());
    }

    #[test]
    fn mse_basic_values() {
        let t = vec![1.0, 2.0, 3.0, -1.0];
        assert_eq!(mse(&t, &t).unwrap(), 0.0);
        assert_eq!(adj_mse(&t, &t).unwrap(), 0.0);
        let c = 0.75;
        let shifted: Vec<f64> = t.iter().map(|x| x + c).collect();
        assert!((mse(&shifted, &t).unwrap() - c * c).abs() < 1e-15);
        assert!(adj_mse(&t, &[0.0; 4]).is_err());
        assert!(mse(&t, &t[..3]).is_err());
    }

    #[test]
    fn mse_matches_reverse_order_accumulation() {
        let mut rng = seeded_rng(21);
        let est: Vec<f64> = (0..7).map(|_| sample_standard_normal(&mut rng)).collect();
        let truth: Vec<f64> = (0..7).map(|_| 3.0 * sample_standard_normal(&mut rng)).collect();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in (0..7).rev() {
            let d = est[i] - truth[i];
            num += d * d;
            den += truth[i] * truth[i];
        }
        let m = mse(&est, &truth).unwrap();
        let a = adj_mse(&est, &truth).unwrap();
        assert!(((num / 7.0) - m).abs() <= 1e-12 * m);
        assert!(((num / den) - a).abs() <= 1e-12 * a);
    }

    #[test]
    fn mcmc_config_rows() {
        let cfg = McmcConfig {
            n_iter: 100,
            burn_in: 10,
            seed: 1,
            thin: 3,
        };
        let kept = (0..100).filter(|&i| cfg.keeps(i)).count();
        assert_eq!(kept, cfg.kept_rows());
        assert!(McmcConfig { burn_in: 100, ..cfg }.validate().is_err());
        assert!(McmcConfig { thin: 0, ..cfg }.validate().is_err());
    }

    #[test]
    fn chain_data_rejects_short_or_mismatched() {
        assert!(ChainData::new(vec![1.0]).is_err());
        let d = ChainData::new(vec![1.0, 2.0]).unwrap();
        assert!(d.clone().with_truth(vec![1.0]).is_err());
        assert!(d.with_truth(vec![1.0, 2.0]).is_ok());
    }

    proptest! {
        #[test]
        fn mse_is_symmetric(a in prop::collection::vec(-10.0f64..10.0, 1..20), shift in -3.0f64..3.0) {
            let b: Vec<f64> = a.iter().map(|x| x * 0.5 + shift).collect();
            prop_assert!((mse(&a, &b).unwrap() - mse(&b, &a).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn adj_mse_scale_covariant(a in prop::collection::vec(-10.0f64..10.0, 2..20), c in prop::sample::select(vec![-3.0, -0.5, 0.25, 2.0, 7.0])) {
            let truth: Vec<f64> = a.iter().map(|x| x + 11.0).collect();
            let est: Vec<f64> = a.iter().map(|x| x * 0.9).collect();
            let scaled_t: Vec<f64> = truth.iter().map(|x| x * c).collect();
            let scaled_e: Vec<f64> = est.iter().map(|x| x * c).collect();
            let base = adj_mse(&est, &truth).unwrap();
            prop_assert!((adj_mse(&scaled_e, &scaled_t).unwrap() - base).abs() <= 1e-10 * base.max(1e-12));
        }

        #[test]
        fn summary_invariant_to_row_permutation(seed in 0u64..1000) {
            let mut rng = seeded_rng(seed);
            let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| sample_standard_normal(&mut rng)).collect()).collect();
            let mut rev = rows.clone();
            rev.reverse();
            let a = posterior_summary(&samples_from(rows), 0.9).unwrap();
            let b = posterior_summary(&samples_from(rev), 0.9).unwrap();
            prop_assert_eq!(a.lower, b.lower);
            prop_assert_eq!(a.upper, b.upper);
            for (x, y) in a.mean.iter().zip(&b.mean) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
