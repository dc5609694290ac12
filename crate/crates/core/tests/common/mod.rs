#![allow(dead_code)]

pub mod geweke;

use std::f64::consts::PI;

use hsfusion::distributions::{
    sample_inverse_gamma, sample_normal, InverseGammaParams,
};
use hsfusion::model::{GibbsState, PriorConfig};
use rand::Rng;

pub fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * PI * var).ln() - d * d / (2.0 * var)
}

/// Normalised inverse-gamma log density, written out independently of the
/// library's kernel.
pub fn ln_inv_gamma(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

pub fn ln_ig(x: f64, p: &InverseGammaParams) -> f64 {
    ln_inv_gamma(x, p.shape, p.scale)
}

/// Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let s = G[1..]
        .iter()
        .enumerate()
        .fold(G[0], |acc, (i, g)| acc + g / (x + i as f64 + 1.0));
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + s.ln()
}

/// Log joint density of (y, θ, λ², ν, τ², ξ, σ²) under the horseshoe fusion
/// prior on a chain, with the half-Cauchy scales written as inverse-gamma
/// mixtures.
pub fn ln_joint(y: &[f64], s: &GibbsState, prior: &PriorConfig) -> f64 {
    let n = y.len();
    let mut lp = 0.0;
    for i in 0..n {
        lp += ln_normal(y[i], s.theta[i], s.sigma_sq);
    }
    lp += ln_normal(s.theta[0], 0.0, prior.lambda_first.powi(2) * s.sigma_sq);
    for k in 0..n - 1 {
        let eta = s.theta[k + 1] - s.theta[k];
        lp += ln_normal(eta, 0.0, s.lambda_sq[k] * s.tau_sq * s.sigma_sq);
        lp += ln_inv_gamma(s.lambda_sq[k], 0.5, 1.0 / s.nu[k]);
        lp += ln_inv_gamma(s.nu[k], 0.5, 1.0);
    }
    lp += ln_inv_gamma(s.tau_sq, 0.5, 1.0 / s.xi);
    lp += ln_inv_gamma(s.xi, 0.5, 1.0);
    lp += ln_inv_gamma(s.sigma_sq, prior.a_sigma, prior.b_sigma);
    lp
}

fn ig<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    sample_inverse_gamma(&InverseGammaParams::new(shape, scale).unwrap(), rng)
}

/// One draw of (state, y) straight from the prior and likelihood.
pub fn forward_draw<R: Rng + ?Sized>(n: usize, prior: &PriorConfig, rng: &mut R) -> (GibbsState, Vec<f64>) {
    let sigma_sq = ig(prior.a_sigma, prior.b_sigma, rng);
    let xi = ig(0.5, 1.0, rng);
    let tau_sq = ig(0.5, 1.0 / xi, rng);
    let mut nu = Vec::with_capacity(n - 1);
    let mut lambda_sq = Vec::with_capacity(n - 1);
    for _ in 0..n - 1 {
        let v = ig(0.5, 1.0, rng);
        nu.push(v);
        lambda_sq.push(ig(0.5, 1.0 / v, rng));
    }
    let mut theta = vec![sample_normal(0.0, prior.lambda_first.powi(2) * sigma_sq, rng)];
    for k in 0..n - 1 {
        let eta = sample_normal(0.0, lambda_sq[k] * tau_sq * sigma_sq, rng);
        theta.push(theta[k] + eta);
    }
    let y = resample_y(&theta, sigma_sq, rng);
    let state = GibbsState {
        theta,
        lambda_sq,
        tau_sq,
        sigma_sq,
        nu,
        xi,
    };
    (state, y)
}

pub fn resample_y<R: Rng + ?Sized>(theta: &[f64], sigma_sq: f64, rng: &mut R) -> Vec<f64> {
    theta.iter().map(|t| sample_normal(*t, sigma_sq, rng)).collect()
}

/// A random but well-conditioned state for pointwise checks.
pub fn random_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> GibbsState {
    GibbsState {
        theta: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        lambda_sq: (0..n - 1).map(|_| rng.random_range(0.05..4.0)).collect(),
        tau_sq: rng.random_range(0.05..2.0),
        sigma_sq: rng.random_range(0.1..2.0),
        nu: (0..n - 1).map(|_| rng.random_range(0.1..3.0)).collect(),
        xi: rng.random_range(0.1..3.0),
    }
}

/// Spread of (log joint − log conditional) over `points` values of one
/// coordinate; zero when the conditional is proportional to the joint.
pub fn spread(
    base: &GibbsState,
    y: &[f64],
    prior: &PriorConfig,
    points: &[f64],
    set: impl Fn(&mut GibbsState, f64),
    ln_cond: impl Fn(f64) -> f64,
) -> f64 {
    let diffs: Vec<f64> = points
        .iter()
        .map(|&x| {
            let mut s = base.clone();
            set(&mut s, x);
            ln_joint(y, &s, prior) - ln_cond(x)
        })
        .collect();
    diffs.iter().map(|d| (d - diffs[0]).abs()).fold(0.0, f64::max)
}

/// Worst spread per conditional family on one random n-point instance,
/// probing each coordinate at `points` random values.
pub fn conditional_spreads(n: usize, points: usize, seed: u64) -> Vec<(&'static str, f64)> {
    use hsfusion::model::ChainData;
    use hsfusion::sampler::{
        lambda_sq_conditional, nu_conditional, sigma_sq_conditional, tau_sq_conditional,
        theta_conditional, xi_conditional,
    };
    let mut rng = hsfusion::distributions::seeded_rng(seed);
    let state = random_state(n, &mut rng);
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let data = ChainData::new(y.clone()).unwrap();
    let prior = PriorConfig::default();
    let mut probe = |lo: f64, hi: f64| -> Vec<f64> { (0..points).map(|_| rng.random_range(lo..hi)).collect() };
    let mut out = Vec::new();
    let worst = (0..n)
        .map(|i| {
            let p = theta_conditional(i, &state, &data, &prior).unwrap();
            spread(&state, &y, &prior, &probe(-3.0, 3.0), |s, x| s.theta[i] = x, |x| p.ln_pdf(x))
        })
        .fold(0.0, f64::max);
    out.push(("theta_i", worst));
    let worst = (0..n - 1)
        .map(|k| {
            let p = lambda_sq_conditional(&state, k).unwrap();
            spread(&state, &y, &prior, &probe(0.01, 5.0), |s, x| s.lambda_sq[k] = x, |x| ln_ig(x, &p))
        })
        .fold(0.0, f64::max);
    out.push(("lambda_sq_i", worst));
    let worst = (0..n - 1)
        .map(|k| {
            let p = nu_conditional(&state, k).unwrap();
            spread(&state, &y, &prior, &probe(0.01, 5.0), |s, x| s.nu[k] = x, |x| ln_ig(x, &p))
        })
        .fold(0.0, f64::max);
    out.push(("nu_i", worst));
    let p = tau_sq_conditional(&state).unwrap();
    out.push(("tau_sq", spread(&state, &y, &prior, &probe(0.01, 5.0), |s, x| s.tau_sq = x, |x| ln_ig(x, &p))));
    let p = xi_conditional(&state).unwrap();
    out.push(("xi", spread(&state, &y, &prior, &probe(0.01, 5.0), |s, x| s.xi = x, |x| ln_ig(x, &p))));
    let p = sigma_sq_conditional(&state, &data, &prior).unwrap();
    out.push(("sigma_sq", spread(&state, &y, &prior, &probe(0.05, 5.0), |s, x| s.sigma_sq = x, |x| ln_ig(x, &p))));
    out
}
