mod common;

use common::{conditional_spreads, ln_ig, random_state, spread};
use hsfusion::distributions::{seeded_rng, FusionRng};
use hsfusion::model::{ChainData, GibbsState, PriorConfig};
use hsfusion::sampler::{
    lambda_sq_conditional, nu_conditional, sigma_sq_conditional, tau_sq_conditional,
    theta_conditional, xi_conditional,
};
use rand::Rng;

const N: usize = 5;
const POINTS: usize = 5;
const TOL: f64 = 1e-8;

fn setup(seed: u64) -> (GibbsState, ChainData, PriorConfig, FusionRng) {
    let mut rng = seeded_rng(seed);
    let state = random_state(N, &mut rng);
    let y: Vec<f64> = (0..N).map(|_| rng.random_range(-2.0..2.0)).collect();
    (state, ChainData::new(y).unwrap(), PriorConfig::default(), rng)
}

fn probes(rng: &mut impl Rng, lo: f64, hi: f64) -> Vec<f64> {
    (0..POINTS).map(|_| rng.random_range(lo..hi)).collect()
}

#[test]
fn theta_conditionals_match_joint() {
    let (state, data, prior, mut rng) = setup(11);
    for i in 0..N {
        let pts = probes(&mut rng, -3.0, 3.0);
        let p = theta_conditional(i, &state, &data, &prior).unwrap();
        let d = spread(&state, &data.y, &prior, &pts, |s, x| s.theta[i] = x, |x| p.ln_pdf(x));
        assert!(d < TOL, "theta[{i}]: spread {d:e}");
    }
}

#[test]
fn lambda_sq_conditionals_match_joint() {
    let (state, data, prior, mut rng) = setup(12);
    for k in 0..N - 1 {
        let pts = probes(&mut rng, 0.01, 5.0);
        let p = lambda_sq_conditional(&state, k).unwrap();
        let d = spread(&state, &data.y, &prior, &pts, |s, x| s.lambda_sq[k] = x, |x| ln_ig(x, &p));
        assert!(d < TOL, "lambda_sq[{k}]: spread {d:e}");
    }
}

#[test]
fn nu_conditionals_match_joint() {
    let (state, data, prior, mut rng) = setup(13);
    for k in 0..N - 1 {
        let pts = probes(&mut rng, 0.01, 5.0);
        let p = nu_conditional(&state, k).unwrap();
        let d = spread(&state, &data.y, &prior, &pts, |s, x| s.nu[k] = x, |x| ln_ig(x, &p));
        assert!(d < TOL, "nu[{k}]: spread {d:e}");
    }
}

#[test]
fn tau_sq_conditional_matches_joint() {
    let (state, data, prior, mut rng) = setup(14);
    let pts = probes(&mut rng, 0.01, 5.0);
    let p = tau_sq_conditional(&state).unwrap();
    let d = spread(&state, &data.y, &prior, &pts, |s, x| s.tau_sq = x, |x| ln_ig(x, &p));
    assert!(d < TOL, "tau_sq: spread {d:e}");
}

#[test]
fn xi_conditional_matches_joint() {
    let (state, data, prior, mut rng) = setup(15);
    let pts = probes(&mut rng, 0.01, 5.0);
    let p = xi_conditional(&state).unwrap();
    let d = spread(&state, &data.y, &prior, &pts, |s, x| s.xi = x, |x| ln_ig(x, &p));
    assert!(d < TOL, "xi: spread {d:e}");
}

#[test]
fn sigma_sq_conditional_matches_joint() {
    let (state, data, prior, mut rng) = setup(16);
    let pts = probes(&mut rng, 0.05, 5.0);
    let p = sigma_sq_conditional(&state, &data, &prior).unwrap();
    let d = spread(&state, &data.y, &prior, &pts, |s, x| s.sigma_sq = x, |x| ln_ig(x, &p));
    assert!(d < TOL, "sigma_sq: spread {d:e}");
}

#[test]
fn a_wrong_shape_is_detected() {
    // The check must be sensitive: perturbing the σ² shape breaks proportionality.
    let (state, data, prior, mut rng) = setup(17);
    let pts = probes(&mut rng, 0.05, 5.0);
    let mut p = sigma_sq_conditional(&state, &data, &prior).unwrap();
    p.shape += 0.5;
    let d = spread(&state, &data.y, &prior, &pts, |s, x| s.sigma_sq = x, |x| ln_ig(x, &p));
    assert!(d > 1e-3);
}

#[test]
fn non_default_hyperparameters() {
    let (state, data, _, mut rng) = setup(18);
    let prior = PriorConfig {
        a_sigma: 2.5,
        b_sigma: 0.7,
        lambda_first: 1.3,
        ..PriorConfig::default()
    };
    let pts = probes(&mut rng, -3.0, 3.0);
    let p = theta_conditional(0, &state, &data, &prior).unwrap();
    let d = spread(&state, &data.y, &prior, &pts, |s, x| s.theta[0] = x, |x| p.ln_pdf(x));
    assert!(d < TOL);
    let pts = probes(&mut rng, 0.05, 5.0);
    let p = sigma_sq_conditional(&state, &data, &prior).unwrap();
    let d = spread(&state, &data.y, &prior, &pts, |s, x| s.sigma_sq = x, |x| ln_ig(x, &p));
    assert!(d < TOL);
}

#[test]
fn every_conditional_on_several_instances() {
    for seed in 0..20 {
        for (name, d) in conditional_spreads(N, POINTS, 1000 + seed) {
            assert!(d < TOL, "seed {seed} {name}: spread {d:e}");
        }
    }
}
