//! Gibbs sampler for the one-dimensional fusion model.
//!
//! Indices are 0-based: `theta[i]` is the i-th mean, and `lambda_sq[k]`,
//! `nu[k]` belong to the difference `theta[k + 1] - theta[k]`. One sweep
//! updates, in order: every mean from first to last, the local scales
//! (λ²ₖ then νₖ for each k), the global scale (τ² then ξ), and σ².

use log::warn;
use rand::Rng;

use crate::distributions::{
    sample_inverse_gamma, sample_inverse_gaussian, sample_normal, sample_standard_gamma, seeded_rng,
    InverseGammaParams,
};
use crate::error::{FusionError, Result};
use crate::model::{
    ChainData, GibbsState, McmcConfig, PosteriorSamples, PriorConfig, PriorFamily, SampleMeta,
};

/// Lower clip applied to every drawn scale parameter.
pub const SCALE_FLOOR: f64 = 1e-12;
/// Upper clip applied to every drawn scale parameter.
pub const SCALE_CEIL: f64 = 1e12;

/// Full conditional N(mu, zeta) of one mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalNormalParams {
    pub mu: f64,
    /// Variance.
    pub zeta: f64,
}

impl ConditionalNormalParams {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let d = x - self.mu;
        -0.5 * (2.0 * std::f64::consts::PI * self.zeta).ln() - d * d / (2.0 * self.zeta)
    }
}

/// Counts clipped scale draws during a sweep.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ScaleGuard {
    pub clipped: usize,
}

impl ScaleGuard {
    pub(crate) fn apply(&mut self, value: f64, what: &str) -> Result<f64> {
        if value.is_nan() {
            return Err(FusionError::Numerical {
                iteration: 0,
                message: format!("{what} draw is NaN"),
            });
        }
        if value < SCALE_FLOOR {
            self.clipped += 1;
            Ok(SCALE_FLOOR)
        } else if value > SCALE_CEIL {
            self.clipped += 1;
            Ok(SCALE_CEIL)
        } else {
            Ok(value)
        }
    }
}

fn ig(shape: f64, scale: f64, what: &str) -> Result<InverseGammaParams> {
    InverseGammaParams::new(shape, scale).map_err(|e| FusionError::Numerical {
        iteration: 0,
        message: format!("{what}: {e}"),
    })
}

fn check_index(i: usize, len: usize) -> Result<()> {
    if i >= len {
        Err(FusionError::IndexOutOfRange { index: i, len })
    } else {
        Ok(())
    }
}

/// How the means are coupled by the fused differences. Implemented by the
/// linear chain here and by depth-first-search trees in the graph module.
pub(crate) trait Coupling {
    /// ηₖ for the k-th coupled pair.
    fn difference(&self, theta: &[f64], k: usize) -> f64;
    /// Index of the mean carrying the fixed-scale prior N(0, λ₁²σ²).
    fn anchor(&self) -> usize;
    fn theta_conditional(
        &self,
        i: usize,
        state: &GibbsState,
        y: &[f64],
        prior: &PriorConfig,
    ) -> Result<ConditionalNormalParams>;
}

/// θ[0] − θ[1] − … − θ[n−1], anchored at the first mean.
pub(crate) struct LinearChain;

impl Coupling for LinearChain {
    fn difference(&self, theta: &[f64], k: usize) -> f64 {
        theta[k + 1] - theta[k]
    }

    fn anchor(&self) -> usize {
        0
    }

    fn theta_conditional(
        &self,
        i: usize,
        state: &GibbsState,
        y: &[f64],
        prior: &PriorConfig,
    ) -> Result<ConditionalNormalParams> {
        let n = state.n();
        check_index(i, n)?;
        let mut prec = 1.0;
        let mut num = y[i];
        if i == 0 {
            prec += 1.0 / (prior.lambda_first * prior.lambda_first);
        } else {
            let w = 1.0 / (state.lambda_sq[i - 1] * state.tau_sq);
            prec += w;
            num += state.theta[i - 1] * w;
        }
        if i + 1 < n {
            let w = 1.0 / (state.lambda_sq[i] * state.tau_sq);
            prec += w;
            num += state.theta[i + 1] * w;
        }
        Ok(ConditionalNormalParams {
            mu: num / prec,
            zeta: state.sigma_sq / prec,
        })
    }
}

/// Full conditional of `theta[i]`. The first mean carries the fixed-scale
/// prior term 1/λ₁²; the last mean has no right neighbour.
pub fn theta_conditional(
    i: usize,
    state: &GibbsState,
    data: &ChainData,
    prior: &PriorConfig,
) -> Result<ConditionalNormalParams> {
    LinearChain.theta_conditional(i, state, &data.y, prior)
}

pub(crate) fn update_theta_for<C: Coupling, R: Rng + ?Sized>(
    c: &C,
    state: &mut GibbsState,
    y: &[f64],
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<()> {
    for i in 0..state.n() {
        let p = c.theta_conditional(i, state, y, prior)?;
        let draw = sample_normal(p.mu, p.zeta, rng);
        if !draw.is_finite() {
            return Err(FusionError::Numerical {
                iteration: 0,
                message: format!("theta[{i}] draw is not finite (mu {}, zeta {})", p.mu, p.zeta),
            });
        }
        state.theta[i] = draw;
    }
    Ok(())
}

/// Systematic scan over the means, first to last, each using current neighbours.
pub fn update_theta<R: Rng + ?Sized>(
    state: &mut GibbsState,
    data: &ChainData,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<()> {
    update_theta_for(&LinearChain, state, &data.y, prior, rng)
}

fn diff_sq<C: Coupling>(c: &C, state: &GibbsState, k: usize) -> f64 {
    let d = c.difference(&state.theta, k);
    d * d
}

pub(crate) fn lambda_sq_conditional_for<C: Coupling>(
    c: &C,
    state: &GibbsState,
    k: usize,
) -> Result<InverseGammaParams> {
    check_index(k, state.lambda_sq.len())?;
    ig(
        1.0,
        1.0 / state.nu[k] + diff_sq(c, state, k) / (2.0 * state.tau_sq * state.sigma_sq),
        "lambda_sq",
    )
}

/// λ²ₖ | · ~ IG(1, 1/νₖ + ηₖ²/(2τ²σ²)).
pub fn lambda_sq_conditional(state: &GibbsState, k: usize) -> Result<InverseGammaParams> {
    lambda_sq_conditional_for(&LinearChain, state, k)
}

/// νₖ | · ~ IG(1, 1 + 1/λ²ₖ).
pub fn nu_conditional(state: &GibbsState, k: usize) -> Result<InverseGammaParams> {
    check_index(k, state.nu.len())?;
    ig(1.0, 1.0 + 1.0 / state.lambda_sq[k], "nu")
}

/// Σₖ ηₖ²/λ²ₖ
fn weighted_diff_sum<C: Coupling>(c: &C, state: &GibbsState) -> f64 {
    (0..state.lambda_sq.len())
        .map(|k| diff_sq(c, state, k) / state.lambda_sq[k])
        .sum()
}

pub(crate) fn tau_sq_conditional_for<C: Coupling>(
    c: &C,
    state: &GibbsState,
) -> Result<InverseGammaParams> {
    ig(
        state.n() as f64 / 2.0,
        1.0 / state.xi + weighted_diff_sum(c, state) / (2.0 * state.sigma_sq),
        "tau_sq",
    )
}

/// τ² | · ~ IG(n/2, 1/ξ + Σ ηₖ²/λ²ₖ / (2σ²)).
pub fn tau_sq_conditional(state: &GibbsState) -> Result<InverseGammaParams> {
    tau_sq_conditional_for(&LinearChain, state)
}

/// ξ | · ~ IG(1, 1 + 1/τ²).
pub fn xi_conditional(state: &GibbsState) -> Result<InverseGammaParams> {
    ig(1.0, 1.0 + 1.0 / state.tau_sq, "xi")
}

pub(crate) fn sigma_sq_conditional_for<C: Coupling>(
    c: &C,
    state: &GibbsState,
    y: &[f64],
    prior: &PriorConfig,
) -> Result<InverseGammaParams> {
    let quad = weighted_diff_sum(c, state) / state.tau_sq;
    let rss: f64 = y
        .iter()
        .zip(&state.theta)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let anchor = state.theta[c.anchor()];
    let anchor_term = anchor * anchor / (prior.lambda_first * prior.lambda_first);
    ig(
        state.n() as f64 + prior.a_sigma,
        prior.b_sigma + 0.5 * (rss + quad + anchor_term),
        "sigma_sq",
    )
}

/// σ² | · ~ IG(n + a_σ, b_σ + ½[Σ(yᵢ − θᵢ)² + Σ ηₖ²/(λ²ₖτ²) + θ₁²/λ₁²]).
pub fn sigma_sq_conditional(
    state: &GibbsState,
    data: &ChainData,
    prior: &PriorConfig,
) -> Result<InverseGammaParams> {
    sigma_sq_conditional_for(&LinearChain, state, &data.y, prior)
}

pub(crate) fn update_local_scales_hs_for<C: Coupling, R: Rng + ?Sized>(
    c: &C,
    state: &mut GibbsState,
    rng: &mut R,
    guard: &mut ScaleGuard,
) -> Result<()> {
    for k in 0..state.lambda_sq.len() {
        let l = sample_inverse_gamma(&lambda_sq_conditional_for(c, state, k)?, rng);
        state.lambda_sq[k] = guard.apply(l, "lambda_sq")?;
        let v = sample_inverse_gamma(&nu_conditional(state, k)?, rng);
        state.nu[k] = guard.apply(v, "nu")?;
    }
    Ok(())
}

/// Horseshoe local-scale step: λ²ₖ then νₖ for each difference.
pub fn update_local_scales_hs<R: Rng + ?Sized>(
    state: &mut GibbsState,
    rng: &mut R,
    guard: &mut ScaleGuard,
) -> Result<()> {
    update_local_scales_hs_for(&LinearChain, state, rng, guard)
}

pub(crate) fn t_scale_conditional_for<C: Coupling>(
    c: &C,
    state: &GibbsState,
    k: usize,
    df: f64,
    scale: f64,
) -> Result<InverseGammaParams> {
    check_index(k, state.lambda_sq.len())?;
    ig(
        (df + 1.0) / 2.0,
        df * scale * scale / 2.0 + diff_sq(c, state, k) / (2.0 * state.sigma_sq),
        "t mixing variance",
    )
}

/// Conditional of the t-family mixing variance ωₖ, where
/// ηₖ | ωₖ, σ² ~ N(0, ωₖσ²) and ωₖ ~ IG(df/2, df·s²/2):
/// ωₖ | · ~ IG((df + 1)/2, df·s²/2 + ηₖ²/(2σ²)).
pub fn t_scale_conditional(
    state: &GibbsState,
    k: usize,
    df: f64,
    scale: f64,
) -> Result<InverseGammaParams> {
    t_scale_conditional_for(&LinearChain, state, k, df, scale)
}

pub(crate) fn update_local_scales_t_for<C: Coupling, R: Rng + ?Sized>(
    c: &C,
    state: &mut GibbsState,
    prior: &PriorConfig,
    rng: &mut R,
    guard: &mut ScaleGuard,
) -> Result<()> {
    let scale = prior.resolved_family_scale(state.n());
    for k in 0..state.lambda_sq.len() {
        let w = sample_inverse_gamma(&t_scale_conditional_for(c, state, k, prior.t_df, scale)?, rng);
        state.lambda_sq[k] = guard.apply(w, "t mixing variance")?;
    }
    Ok(())
}

/// t-shrinkage local-scale step.
pub fn update_local_scales_t<R: Rng + ?Sized>(
    state: &mut GibbsState,
    prior: &PriorConfig,
    rng: &mut R,
    guard: &mut ScaleGuard,
) -> Result<()> {
    update_local_scales_t_for(&LinearChain, state, prior, rng, guard)
}

pub(crate) fn update_local_scales_laplace_for<C: Coupling, R: Rng + ?Sized>(
    c: &C,
    state: &mut GibbsState,
    prior: &PriorConfig,
    rng: &mut R,
    guard: &mut ScaleGuard,
) -> Result<()> {
    let scale = prior.resolved_family_scale(state.n());
    let rate = 1.0 / scale;
    let shape = rate * rate;
    let sigma = state.sigma_sq.sqrt();
    for k in 0..state.lambda_sq.len() {
        let eta = c.difference(&state.theta, k).abs();
        let omega = if eta > 0.0 {
            let mean = rate * sigma / eta;
            1.0 / sample_inverse_gaussian(mean, shape, rng).map_err(|e| FusionError::Numerical {
                iteration: 0,
                message: e.to_string(),
            })?
        } else {
            sample_standard_gamma(0.5, rng) * 2.0 / shape
        };
        state.lambda_sq[k] = guard.apply(omega, "laplace mixing variance")?;
    }
    Ok(())
}

/// Laplace local-scale step. With η/σ ~ Laplace(0, s) written as
/// ηₖ | ωₖ, σ² ~ N(0, ωₖσ²), ωₖ ~ Exp(rate 1/(2s²)), the reciprocal
/// 1/ωₖ | · is inverse Gaussian with mean σ/(s|ηₖ|) and shape 1/s².
/// A zero difference falls back to ωₖ ~ Gamma(1/2, rate 1/(2s²)).
pub fn update_local_scales_laplace<R: Rng + ?Sized>(
    state: &mut GibbsState,
    prior: &PriorConfig,
    rng: &mut R,
    guard: &mut ScaleGuard,
) -> Result<()> {
    update_local_scales_laplace_for(&LinearChain, state, prior, rng, guard)
}

pub(crate) fn update_global_scale_for<C: Coupling, R: Rng + ?Sized>(
    c: &C,
    state: &mut GibbsState,
    rng: &mut R,
    guard: &mut ScaleGuard,
) -> Result<()> {
    let t = sample_inverse_gamma(&tau_sq_conditional_for(c, state)?, rng);
    state.tau_sq = guard.apply(t, "tau_sq")?;
    let x = sample_inverse_gamma(&xi_conditional(state)?, rng);
    state.xi = guard.apply(x, "xi")?;
    Ok(())
}

/// τ² then ξ.
pub fn update_global_scale<R: Rng + ?Sized>(
    state: &mut GibbsState,
    rng: &mut R,
    guard: &mut ScaleGuard,
) -> Result<()> {
    update_global_scale_for(&LinearChain, state, rng, guard)
}

pub fn update_sigma2<R: Rng + ?Sized>(
    state: &mut GibbsState,
    data: &ChainData,
    prior: &PriorConfig,
    rng: &mut R,
    guard: &mut ScaleGuard,
) -> Result<()> {
    let s = sample_inverse_gamma(&sigma_sq_conditional(state, data, prior)?, rng);
    state.sigma_sq = guard.apply(s, "sigma_sq")?;
    Ok(())
}

/// Sample variance of the given differences, or 1 when degenerate.
pub(crate) fn diff_variance(diffs: impl Iterator<Item = f64>) -> f64 {
    let d: Vec<f64> = diffs.collect();
    if d.len() < 2 {
        return 1.0;
    }
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (d.len() - 1) as f64;
    if var > 0.0 && var.is_finite() {
        var
    } else {
        1.0
    }
}

/// Warm start: θ = y, unit local/global scales, σ² from the sample variance
/// of the coupled differences of y.
pub(crate) fn initial_state_for<C: Coupling>(c: &C, y: &[f64]) -> GibbsState {
    let n = y.len();
    GibbsState {
        theta: y.to_vec(),
        lambda_sq: vec![1.0; n - 1],
        tau_sq: 1.0,
        sigma_sq: diff_variance((0..n - 1).map(|k| c.difference(y, k))),
        nu: vec![1.0; n - 1],
        xi: 1.0,
    }
}

/// Warm start at the data: θ = y, unit local/global scales, σ² from the
/// first differences of y.
pub fn initial_state(data: &ChainData) -> GibbsState {
    initial_state_for(&LinearChain, &data.y)
}

pub(crate) fn gibbs_sweep_for<C: Coupling, R: Rng + ?Sized>(
    c: &C,
    state: &mut GibbsState,
    y: &[f64],
    prior: &PriorConfig,
    rng: &mut R,
    guard: &mut ScaleGuard,
) -> Result<()> {
    update_theta_for(c, state, y, prior, rng)?;
    match prior.family {
        PriorFamily::Horseshoe => {
            update_local_scales_hs_for(c, state, rng, guard)?;
            update_global_scale_for(c, state, rng, guard)?;
        }
        PriorFamily::TShrinkage => update_local_scales_t_for(c, state, prior, rng, guard)?,
        PriorFamily::Laplace => update_local_scales_laplace_for(c, state, prior, rng, guard)?,
    }
    let s = sample_inverse_gamma(&sigma_sq_conditional_for(c, state, y, prior)?, rng);
    state.sigma_sq = guard.apply(s, "sigma_sq")?;
    Ok(())
}

/// One full systematic-scan sweep for the configured prior family.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &mut GibbsState,
    data: &ChainData,
    prior: &PriorConfig,
    rng: &mut R,
    guard: &mut ScaleGuard,
) -> Result<()> {
    gibbs_sweep_for(&LinearChain, state, &data.y, prior, rng, guard)
}

/// Shared driver: runs `sweep` for every iteration and stores kept draws.
pub(crate) fn drive<F>(
    mut state: GibbsState,
    mcmc: &McmcConfig,
    meta: SampleMeta,
    mut sweep: F,
) -> Result<PosteriorSamples>
where
    F: FnMut(&mut GibbsState, &mut ScaleGuard) -> Result<()>,
{
    let mut samples = PosteriorSamples::with_capacity(state.n(), mcmc.kept_rows(), meta);
    let mut guard = ScaleGuard::default();
    for iter in 0..mcmc.n_iter {
        sweep(&mut state, &mut guard).map_err(|e| match e {
            FusionError::Numerical { message, .. } => FusionError::Numerical {
                iteration: iter,
                message,
            },
            other => other,
        })?;
        debug_assert!(state.check_invariants().is_ok());
        if mcmc.keeps(iter) {
            samples.push(&state.theta, state.sigma_sq, state.tau_sq);
        }
    }
    if guard.clipped > 0 {
        warn!(
            "{} scale draws clipped to [{SCALE_FLOOR:e}, {SCALE_CEIL:e}] (seed {})",
            guard.clipped, mcmc.seed
        );
    }
    Ok(samples)
}

/// Runs the chain sampler from the warm start and returns post-burn-in draws.
pub fn run_chain(
    data: &ChainData,
    prior: &PriorConfig,
    mcmc: &McmcConfig,
) -> Result<PosteriorSamples> {
    prior.validate()?;
    mcmc.validate()?;
    let mut rng = seeded_rng(mcmc.seed);
    let meta = SampleMeta {
        seed: mcmc.seed,
        prior: *prior,
        mcmc: *mcmc,
        root: None,
    };
    drive(initial_state(data), mcmc, meta, |state, guard| {
        gibbs_sweep(state, data, prior, &mut rng, guard)
    })
}
