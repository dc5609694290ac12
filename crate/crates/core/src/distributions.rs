//! Sampling primitives and Horseshoe density bounds.
//!
//! Every sampler in the crate draws from a [`FusionRng`]: a ChaCha8 stream
//! seeded from a `u64`, so draw sequences are stable across platforms.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, InverseGaussian, StandardNormal};

use crate::error::{FusionError, Result};

pub type FusionRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> FusionRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `stream` of a master seed. Stream 0 is the master
/// seed itself, so a single-stream run and stream 0 of a multi-stream run
/// see identical draws.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    if stream == 0 {
        master
    } else {
        splitmix64(master ^ splitmix64(stream))
    }
}

/// (2π)^{3/2}
const TWO_PI_POW_1_5: f64 = 15.749_609_945_722_419;

/// Inverse-gamma IG(shape, scale) with density ∝ x^(-shape-1) exp(-scale/x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseGammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGammaParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(FusionError::domain(format!(
                "inverse-gamma shape must be positive and finite, got {shape}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(FusionError::domain(format!(
                "inverse-gamma scale must be positive and finite, got {scale}"
            )));
        }
        Ok(Self { shape, scale })
    }

    /// Mean, defined only for shape > 1.
    pub fn mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.scale / (self.shape - 1.0))
    }

    pub fn variance(&self) -> Option<f64> {
        (self.shape > 2.0).then(|| {
            let a1 = self.shape - 1.0;
            self.scale * self.scale / (a1 * a1 * (self.shape - 2.0))
        })
    }

    /// Log density up to the normalising constant.
    pub fn ln_kernel(&self, x: f64) -> f64 {
        -(self.shape + 1.0) * x.ln() - self.scale / x
    }
}

/// Draws IG(shape, scale) as scale / Gamma(shape, 1).
pub fn sample_inverse_gamma<R: Rng + ?Sized>(params: &InverseGammaParams, rng: &mut R) -> f64 {
    params.scale / sample_standard_gamma(params.shape, rng)
}

/// Gamma(shape, 1). Marsaglia-Tsang, with the U^(1/shape) boost for shape < 1.
pub fn sample_standard_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    // Gamma::new only fails for non-positive or NaN shape, which callers exclude.
    Gamma::new(shape, 1.0)
        .expect("gamma shape validated by caller")
        .sample(rng)
}

pub fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws N(mean, variance).
pub fn sample_normal<R: Rng + ?Sized>(mean: f64, variance: f64, rng: &mut R) -> f64 {
    mean + variance.sqrt() * sample_standard_normal(rng)
}

/// Inverse Gaussian with the given mean and shape (Michael-Schucany-Haas).
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> Result<f64> {
    let dist = InverseGaussian::new(mean, shape).map_err(|e| {
        FusionError::domain(format!("inverse Gaussian (mean {mean}, shape {shape}): {e}"))
    })?;
    Ok(dist.sample(rng))
}

/// Draws X² for X ~ C+(0, psi) through the two-stage mixture
/// X² | φ ~ IG(1/2, 1/φ), φ ~ IG(1/2, 1/psi²).
pub fn sample_half_cauchy_sq<R: Rng + ?Sized>(psi: f64, rng: &mut R) -> Result<f64> {
    if !(psi > 0.0 && psi.is_finite()) {
        return Err(FusionError::domain(format!(
            "half-Cauchy scale must be positive, got {psi}"
        )));
    }
    let phi = sample_inverse_gamma(&InverseGammaParams::new(0.5, 1.0 / (psi * psi))?, rng);
    let x_sq = sample_inverse_gamma(&InverseGammaParams::new(0.5, 1.0 / phi)?, rng);
    Ok(x_sq)
}

/// Parameters for evaluating the Horseshoe prior-mass and thickness bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsBoundConfig {
    /// Global scale.
    pub tau: f64,
    /// Bound on |η/σ| over the true differences.
    pub l: f64,
    /// Half-width of the prior-mass window.
    pub a_n: f64,
}

impl HsBoundConfig {
    pub fn new(tau: f64, l: f64, a_n: f64) -> Result<Self> {
        check_positive("tau", tau)?;
        check_positive("L", l)?;
        check_positive("a_n", a_n)?;
        Ok(Self { tau, l, a_n })
    }

    /// Window a_n = s0·log(n)/n² used by the prior-mass lemma.
    pub fn window(n: usize, s0: usize) -> f64 {
        let nf = n as f64;
        s0 as f64 * nf.ln() / (nf * nf)
    }

    pub fn prior_mass_outside(&self) -> Result<f64> {
        prior_mass_outside(self.a_n, self.tau)
    }

    pub fn thickness(&self, sigma: f64) -> Result<f64> {
        hs_thickness(self.l, self.tau, sigma)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(FusionError::domain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Lower and upper envelopes of the Horseshoe density p_HS(η | τ):
///
/// lower = log(1 + 4τ²/η²) / (τ(2π)^{3/2}),
/// upper = 2·log(1 + 2τ²/η²) / (τ(2π)^{3/2}).
pub fn hs_density_bounds(eta: f64, tau: f64) -> Result<HsBounds> {
    if eta == 0.0 || !eta.is_finite() {
        return Err(FusionError::domain(format!(
            "Horseshoe density bounds need a finite non-zero eta, got {eta}"
        )));
    }
    check_positive("tau", tau)?;
    let ratio = (tau / eta) * (tau / eta);
    let norm = tau * TWO_PI_POW_1_5;
    Ok(HsBounds {
        lower: (4.0 * ratio).ln_1p() / norm,
        upper: 2.0 * (2.0 * ratio).ln_1p() / norm,
    })
}

/// Upper bound on the Horseshoe prior mass outside [-a_n, a_n]:
/// (2/π³)^{1/2} · 4τ/a_n.
pub fn prior_mass_outside(a_n: f64, tau: f64) -> Result<f64> {
    check_positive("a_n", a_n)?;
    check_positive("tau", tau)?;
    Ok((2.0 / (PI * PI * PI)).sqrt() * 4.0 * tau / a_n)
}

/// −log of the lower density envelope at the worst point |η| = L·σ.
pub fn hs_thickness(l: f64, tau: f64, sigma: f64) -> Result<f64> {
    check_positive("L", l)?;
    check_positive("tau", tau)?;
    check_positive("sigma", sigma)?;
    let bounds = hs_density_bounds(l * sigma, tau)?;
    let value = -bounds.lower.ln();
    if !value.is_finite() {
        return Err(FusionError::domain(format!(
            "thickness underflows for L={l}, tau={tau}, sigma={sigma}"
        )));
    }
    Ok(value)
}
