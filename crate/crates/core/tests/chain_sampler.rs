use hsfusion::model::{mse, ChainData, McmcConfig, PriorConfig, PriorFamily};
use hsfusion::sampler::run_chain;
use hsfusion::simulate::{add_noise, make_signal, monte_carlo, SignalKind, SignalSpec};

fn even_data(sigma: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let truth = make_signal(&SignalSpec::new(SignalKind::Even, 100, 0)).unwrap();
    let y = add_noise(&truth, sigma, seed).unwrap();
    (truth, y)
}

fn mcmc(seed: u64) -> McmcConfig {
    McmcConfig {
        n_iter: 2000,
        burn_in: 200,
        thin: 1,
        seed,
    }
}

fn shifted_runs(lambda_first: f64, c: f64) -> (hsfusion::model::PosteriorSamples, hsfusion::model::PosteriorSamples) {
    let (_, y) = even_data(0.1, 5);
    let prior = PriorConfig {
        lambda_first,
        ..PriorConfig::default()
    };
    let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
    let a = run_chain(&ChainData::new(y).unwrap(), &prior, &mcmc(9)).unwrap();
    let b = run_chain(&ChainData::new(shifted).unwrap(), &prior, &mcmc(9)).unwrap();
    (a, b)
}

#[test]
fn shift_moves_every_draw_with_a_flat_first_mean() {
    for c in [0.1, 1.0, 3.0] {
        let (a, b) = shifted_runs(1e8, c);
        for r in 0..a.rows() {
            for (x, y) in a.row(r).iter().zip(b.row(r)) {
                assert!((y - x - c).abs() < 1e-8, "c {c} row {r}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn shift_moves_posterior_mean_approximately() {
    // The fixed prior on θ₁ breaks exact equivariance; the error grows with c.
    let c = 0.05;
    let (a, b) = shifted_runs(5.0, c);
    let (ma, mb) = (a.posterior_mean().unwrap(), b.posterior_mean().unwrap());
    for (j, (x, y)) in ma.iter().zip(&mb).enumerate() {
        assert!((y - x - c).abs() < 1e-3, "mean {j}: {x} vs {y}");
    }
}

#[test]
fn scale_parameters_stay_positive_for_every_family() {
    let (_, y) = even_data(0.3, 6);
    for family in [PriorFamily::Horseshoe, PriorFamily::TShrinkage, PriorFamily::Laplace] {
        let s = run_chain(&ChainData::new(y.clone()).unwrap(), &PriorConfig::with_family(family), &mcmc(3)).unwrap();
        assert!(s.sigma_draws.iter().all(|v| *v > 0.0 && v.is_finite()));
        assert!(s.tau_draws.iter().all(|v| *v > 0.0 && v.is_finite()));
    }
}

#[test]
fn horseshoe_denoises_even_signal() {
    let (truth, y) = even_data(0.1, 7);
    let s = run_chain(&ChainData::new(y).unwrap(), &PriorConfig::default(), &McmcConfig::default()).unwrap();
    let e = mse(&s.posterior_mean().unwrap(), &truth).unwrap();
    assert!(e < 0.01, "mse {e}");
}

#[test]
fn laplace_matches_published_even_mse() {
    let spec = SignalSpec::new(SignalKind::Even, 100, 2024);
    let prior = PriorConfig::with_family(PriorFamily::Laplace);
    let t = monte_carlo(&spec, &[0.3], &[prior], 20, &mcmc(0)).unwrap();
    let m = t.scenarios[0].metric_mean("mse").unwrap();
    println!("laplace even 0.3: mse {m:.4}");
    assert!((m - 0.516).abs() <= 0.1, "mse {m}");
}
