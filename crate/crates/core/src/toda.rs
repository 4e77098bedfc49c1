//! Thermal ensembles of the classical Toda chain and the stretch generating function.
//!
//! In a generalized Gibbs state at inverse temperature `β` and pressure `P` the
//! stretches `r_x = q_{x+1} − q_x` are iid with density `∝ exp(−β e^{−r} − P r)`.
//! Writing `u = e^{−r}` makes `u ~ Gamma(P, rate β)`, which is how draws are made.
//! The twist observable is `e^{λ φ(x)}` with height `φ(x) = Σ_{x'<x} r_{x'}`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{ensure_finite, Error, Result};

/// Largest ensemble (sites × draws) held in memory.
pub const MAX_ENSEMBLE_SAMPLES: usize = 1 << 27;

/// Words of keystream reserved per site within a draw's stream.
const WORDS_PER_SITE: u128 = 1 << 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TodaEnsemble {
    pub beta: f64,
    pub pressure: f64,
    pub sites: usize,
    pub draws: usize,
    pub seed: u64,
    /// Stretches, draw-major: `samples[d * sites + x]`.
    pub samples: Vec<f64>,
}

impl TodaEnsemble {
    pub fn stretch(&self, draw: usize, site: usize) -> f64 {
        self.samples[draw * self.sites + site]
    }

    /// Heights `φ(x)` of one draw.
    pub fn height(&self, draw: usize, x: usize) -> f64 {
        self.samples[draw * self.sites..draw * self.sites + x].iter().sum()
    }
}

fn check_state(beta: f64, pressure: f64) -> Result<()> {
    ensure_finite("beta", beta)?;
    ensure_finite("pressure", pressure)?;
    if beta <= 0.0 || pressure <= 0.0 {
        return Err(Error::Validation(format!("beta and pressure must be positive, got {beta} and {pressure}")));
    }
    Ok(())
}

/// Draw `draws` independent chains of `sites` stretches.
///
/// Every `(site, draw)` pair owns a fixed window of a ChaCha20 keystream
/// (stream = draw, word offset = site · 2³²), so a sample never depends on how
/// many others were generated or in what order.
pub fn sample_toda_thermal(beta: f64, pressure: f64, sites: usize, draws: usize, seed: u64) -> Result<TodaEnsemble> {
    check_state(beta, pressure)?;
    if sites == 0 || draws == 0 {
        return Err(Error::Validation("ensemble needs at least one site and one draw".into()));
    }
    let total = sites.checked_mul(draws).filter(|&t| t <= MAX_ENSEMBLE_SAMPLES);
    let Some(total) = total else {
        return Err(Error::Capacity(format!(
            "{sites} sites × {draws} draws exceeds {MAX_ENSEMBLE_SAMPLES} samples"
        )));
    };
    let gamma = Gamma::new(pressure, 1.0 / beta).map_err(|e| Error::Validation(e.to_string()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(total);
    for d in 0..draws {
        rng.set_stream(d as u64);
        for x in 0..sites {
            rng.set_word_pos(x as u128 * WORDS_PER_SITE);
            let u: f64 = gamma.sample(&mut rng);
            // u underflows to 0 only for astronomically unlikely draws at tiny P
            samples.push(-u.max(f64::MIN_POSITIVE).ln());
        }
    }
    Ok(TodaEnsemble { beta, pressure, sites, draws, seed, samples })
}

/// Monte Carlo `<e^{λ φ(x)}>` with its jackknife standard error.
pub fn stretch_fcs_estimate(ens: &TodaEnsemble, lambda: f64, x: usize) -> Result<(f64, f64)> {
    ensure_finite("lambda", lambda)?;
    if x > ens.sites {
        return Err(Error::Index(format!("x = {x} exceeds the {} sites of the ensemble", ens.sites)));
    }
    if lambda >= ens.pressure {
        return Err(Error::Divergence(format!(
            "<e^(λφ)> is infinite for λ = {lambda} ≥ P = {}",
            ens.pressure
        )));
    }
    if lambda == 0.0 || x == 0 {
        return Ok((1.0, 0.0));
    }
    let values: Vec<f64> = (0..ens.draws).map(|d| (lambda * ens.height(d, x)).exp()).collect();
    Ok(jackknife_mean(&values))
}

/// Mean and delete-one jackknife error.
fn jackknife_mean(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let sum: f64 = values.iter().sum();
    let mean = sum / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var: f64 = values
        .iter()
        .map(|v| {
            let loo = (sum - v) / (n - 1.0);
            (loo - mean).powi(2)
        })
        .sum();
    (mean, ((n - 1.0) / n * var).sqrt())
}

/// `<e^{λ φ(x)}> = [β^λ Γ(P−λ)/Γ(P)]^x`.
pub fn stretch_fcs_oracle(beta: f64, pressure: f64, lambda: f64, x: usize) -> Result<f64> {
    Ok(stretch_fcs_log_oracle(beta, pressure, lambda, x)?.exp())
}

/// Logarithm of [`stretch_fcs_oracle`], which stays finite where the power overflows.
pub fn stretch_fcs_log_oracle(beta: f64, pressure: f64, lambda: f64, x: usize) -> Result<f64> {
    check_state(beta, pressure)?;
    ensure_finite("lambda", lambda)?;
    if lambda >= pressure {
        return Err(Error::Divergence(format!("<e^(λφ)> is infinite for λ = {lambda} ≥ P = {pressure}")));
    }
    if lambda == 0.0 || x == 0 {
        return Ok(0.0);
    }
    Ok(x as f64 * (lambda * beta.ln() + ln_gamma(pressure - lambda) - ln_gamma(pressure)))
}

/// Cumulative distribution of a single stretch, `P(r ≤ t) = Q(P, β e^{−t})`.
pub fn stretch_cdf(beta: f64, pressure: f64, t: f64) -> Result<f64> {
    check_state(beta, pressure)?;
    if t.is_nan() {
        return Err(Error::Validation("stretch must not be NaN".into()));
    }
    Ok(gamma_ur(pressure, beta * (-t).exp()))
}
