use hsfusion::distributions::{
    sample_inverse_gamma, sample_normal, sample_standard_gamma, seeded_rng, FusionRng,
    InverseGammaParams,
};
use hsfusion::model::{ChainData, GibbsState, PriorConfig, PriorFamily};
use hsfusion::sampler::{
    gibbs_sweep, tau_sq_conditional, update_local_scales_hs, update_sigma2, update_theta,
    xi_conditional, ScaleGuard,
};

use super::{forward_draw, resample_y};

pub const N: usize = 5;
pub const DRAWS: usize = 20_000;
pub const SWEEPS: usize = 10;

// σ² ~ IG(6, 5) keeps the second moments of θ₁ and σ² finite.
pub fn prior() -> PriorConfig {
    PriorConfig {
        a_sigma: 6.0,
        b_sigma: 5.0,
        ..PriorConfig::default()
    }
}

pub type Sweep = fn(&mut GibbsState, &ChainData, &PriorConfig, &mut FusionRng);

pub fn library_sweep(s: &mut GibbsState, d: &ChainData, p: &PriorConfig, rng: &mut FusionRng) {
    gibbs_sweep(s, d, p, rng, &mut ScaleGuard::default()).unwrap();
}

// Same sweep with the τ² shape lowered by a half.
pub fn broken_sweep(s: &mut GibbsState, d: &ChainData, p: &PriorConfig, rng: &mut FusionRng) {
    let mut guard = ScaleGuard::default();
    update_theta(s, d, p, rng).unwrap();
    update_local_scales_hs(s, rng, &mut guard).unwrap();
    let good = tau_sq_conditional(s).unwrap();
    let bad = InverseGammaParams::new(good.shape - 0.5, good.scale).unwrap();
    s.tau_sq = sample_inverse_gamma(&bad, rng);
    s.xi = sample_inverse_gamma(&xi_conditional(s).unwrap(), rng);
    update_sigma2(s, d, p, rng, &mut guard).unwrap();
}

pub fn summaries(s: &GibbsState) -> [f64; 3] {
    [s.theta[0], s.sigma_sq, s.tau_sq.ln()]
}

pub const NAMES: [&str; 3] = ["theta_1", "sigma_sq", "log tau_sq"];

pub fn forward(seed: u64) -> Vec<[f64; 3]> {
    let prior = prior();
    let mut rng = seeded_rng(seed);
    (0..DRAWS).map(|_| summaries(&forward_draw(N, &prior, &mut rng).0)).collect()
}

pub fn successive(seed: u64, sweep: Sweep) -> Vec<[f64; 3]> {
    let prior = prior();
    let mut rng = seeded_rng(seed);
    (0..DRAWS)
        .map(|_| {
            let (mut state, mut y) = forward_draw(N, &prior, &mut rng);
            for _ in 0..SWEEPS {
                let data = ChainData::new(y).unwrap();
                sweep(&mut state, &data, &prior, &mut rng);
                y = resample_y(&state.theta, state.sigma_sq, &mut rng);
            }
            summaries(&state)
        })
        .collect()
}

pub fn mean_var(x: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = x.clone().count() as f64;
    let m = x.clone().sum::<f64>() / n;
    let v = x.map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

pub fn z_scores(names: [&str; 3], a: &[[f64; 3]], b: &[[f64; 3]]) -> [f64; 3] {
    std::array::from_fn(|j| {
        let (ma, va) = mean_var(a.iter().map(|r| r[j]));
        let (mb, vb) = mean_var(b.iter().map(|r| r[j]));
        let z = (ma - mb) / (va / a.len() as f64 + vb / b.len() as f64).sqrt();
        println!("{}: forward {ma:.4} successive {mb:.4} z {z:.2}", names[j]);
        z
    })
}

// t and Laplace families: ηₖ | ωₖ, σ² ~ N(0, ωₖσ²) with τ² held at 1.
pub fn mixture_prior(family: PriorFamily) -> PriorConfig {
    PriorConfig {
        family,
        family_scale: Some(0.5),
        ..prior()
    }
}

pub fn mixture_forward(p: &PriorConfig, rng: &mut FusionRng) -> (GibbsState, Vec<f64>) {
    let s = p.family_scale.unwrap();
    let sigma_sq = sample_inverse_gamma(&InverseGammaParams::new(p.a_sigma, p.b_sigma).unwrap(), rng);
    let omega: Vec<f64> = (0..N - 1)
        .map(|_| match p.family {
            PriorFamily::TShrinkage => sample_inverse_gamma(
                &InverseGammaParams::new(p.t_df / 2.0, p.t_df * s * s / 2.0).unwrap(),
                rng,
            ),
            // Exponential with rate 1/(2s²).
            _ => sample_standard_gamma(1.0, rng) * 2.0 * s * s,
        })
        .collect();
    let mut theta = vec![sample_normal(0.0, p.lambda_first.powi(2) * sigma_sq, rng)];
    for k in 0..N - 1 {
        theta.push(theta[k] + sample_normal(0.0, omega[k] * sigma_sq, rng));
    }
    let y = resample_y(&theta, sigma_sq, rng);
    let state = GibbsState {
        theta,
        lambda_sq: omega,
        tau_sq: 1.0,
        sigma_sq,
        nu: vec![1.0; N - 1],
        xi: 1.0,
    };
    (state, y)
}

pub fn mixture_summaries(s: &GibbsState) -> [f64; 3] {
    [s.theta[0], s.sigma_sq, s.lambda_sq[0].ln()]
}

pub fn mixture_z(family: PriorFamily) -> [f64; 3] {
    let p = mixture_prior(family);
    let mut rng = seeded_rng(606);
    let fwd: Vec<[f64; 3]> = (0..DRAWS).map(|_| mixture_summaries(&mixture_forward(&p, &mut rng).0)).collect();
    let mut rng = seeded_rng(707);
    let succ: Vec<[f64; 3]> = (0..DRAWS)
        .map(|_| {
            let (mut state, mut y) = mixture_forward(&p, &mut rng);
            for _ in 0..SWEEPS {
                let data = ChainData::new(y).unwrap();
                library_sweep(&mut state, &data, &p, &mut rng);
                y = resample_y(&state.theta, state.sigma_sq, &mut rng);
            }
            mixture_summaries(&state)
        })
        .collect();
    z_scores(["theta_1", "sigma_sq", "log omega_1"], &fwd, &succ)
}

