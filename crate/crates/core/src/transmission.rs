//! Transmission estimators and comparison metrics.

use std::f64::consts::{LN_10, SQRT_2};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::analytic_ramp::{rho, GaussianPacket, RampSpec};
use crate::bohmian::{trajectory, TrajectoryInitial};
use crate::error::{require, Error, Result};

/// Samples drawn per Monte-Carlo shard.
const SHARD: u64 = 1 << 14;

/// Cutoff placed where the initial density has dropped by `10^-n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCutoff {
    pub n: f64,
    /// `N = sqrt(2 n ln 10)`.
    pub multiplier: f64,
    pub x_cutoff: f64,
}

pub fn sensitivity_multiplier(n: f64) -> f64 {
    (2.0 * n * LN_10).sqrt()
}

pub fn cutoff_from_sensitivity(packet: &GaussianPacket, n: f64) -> Result<SensitivityCutoff> {
    require("n", n.is_finite() && n > 0.0, || {
        format!("must be positive, got {n}")
    })?;
    let multiplier = sensitivity_multiplier(n);
    Ok(SensitivityCutoff {
        n,
        multiplier,
        x_cutoff: packet.x0 + multiplier * packet.sigma0,
    })
}

/// `ρ0(x)/ρ0(x0)`.
pub fn gamma(packet: &GaussianPacket, x: f64) -> f64 {
    let u = (x - packet.x0) / packet.sigma0;
    (-0.5 * u * u).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransmissionMethod {
    ErfcEstimate,
    MonteCarlo,
    WavePacket,
    Corrected,
}

impl TransmissionMethod {
    pub const ALL: [TransmissionMethod; 4] = [
        TransmissionMethod::ErfcEstimate,
        TransmissionMethod::MonteCarlo,
        TransmissionMethod::WavePacket,
        TransmissionMethod::Corrected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransmissionMethod::ErfcEstimate => "erfc",
            TransmissionMethod::MonteCarlo => "mc",
            TransmissionMethod::WavePacket => "wp",
            TransmissionMethod::Corrected => "corrected",
        }
    }
}

impl std::str::FromStr for TransmissionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        match key.as_str() {
            "erfc" | "erfcestimate" | "est" | "estimate" => Ok(TransmissionMethod::ErfcEstimate),
            "mc" | "montecarlo" | "monte-carlo" => Ok(TransmissionMethod::MonteCarlo),
            "wp" | "wavepacket" | "wave-packet" | "tdse" => Ok(TransmissionMethod::WavePacket),
            "corrected" | "corr" => Ok(TransmissionMethod::Corrected),
            _ => Err(Error::Configuration(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionResult {
    pub value: f64,
    pub method: TransmissionMethod,
    pub x0_min_used: Option<f64>,
    pub n_samples: Option<u64>,
}

impl TransmissionResult {
    pub fn wave_packet(value: f64) -> Self {
        Self {
            value,
            method: TransmissionMethod::WavePacket,
            x0_min_used: None,
            n_samples: None,
        }
    }
}

/// Probability mass of the initial Gaussian above `x0_min`.
pub fn erfc_transmission(packet: &GaussianPacket, x0_min: f64) -> TransmissionResult {
    TransmissionResult {
        value: gaussian_tail(packet, x0_min),
        method: TransmissionMethod::ErfcEstimate,
        x0_min_used: Some(x0_min),
        n_samples: None,
    }
}

/// Same functional evaluated at an onset located from numeric trajectories.
pub fn corrected_transmission(
    packet: &GaussianPacket,
    x0_min_corrected: f64,
) -> TransmissionResult {
    TransmissionResult {
        method: TransmissionMethod::Corrected,
        ..erfc_transmission(packet, x0_min_corrected)
    }
}

fn gaussian_tail(packet: &GaussianPacket, x: f64) -> f64 {
    0.5 * erfc((x - packet.x0) / (SQRT_2 * packet.sigma0))
}

/// Mass of the initial Gaussian on `(lo, hi)`.
pub fn interval_probability(packet: &GaussianPacket, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    // Difference of tails taken on the side where both are small.
    if lo >= packet.x0 {
        gaussian_tail(packet, lo) - gaussian_tail(packet, hi)
    } else {
        let mirror = |x: f64| gaussian_tail(packet, 2.0 * packet.x0 - x);
        mirror(hi) - mirror(lo)
    }
}

/// Uniform on (0, 1) from the `index`-th draw of the stream.
fn uniform_at(rng: &mut ChaCha8Rng, index: u64) -> f64 {
    rng.set_word_pos(2 * index as u128);
    let bits = rng.next_u64() >> 11;
    (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Sample `index` of the seeded initial-position stream. Pure function of
/// `(seed, index)`.
pub fn initial_position_sample(packet: &GaussianPacket, seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(&mut rng, packet, index)
}

fn sample_with(rng: &mut ChaCha8Rng, packet: &GaussianPacket, index: u64) -> f64 {
    let normal = Normal::new(packet.x0, packet.sigma0).expect("validated width");
    normal.inverse_cdf(uniform_at(rng, index))
}

/// Fraction of `n_samples` initial positions falling in `(x0_min, x2_bound)`.
/// `x2_bound` may be `f64::INFINITY`.
pub fn monte_carlo_transmission(
    packet: &GaussianPacket,
    x0_min: f64,
    x2_bound: f64,
    n_samples: u64,
    seed: u64,
) -> Result<TransmissionResult> {
    require("n_samples", n_samples >= 1, || {
        "need at least one sample".into()
    })?;
    require("x0_min", !x0_min.is_nan() && !x2_bound.is_nan(), || {
        "bounds must not be NaN".into()
    })?;
    let shards = n_samples.div_ceil(SHARD);
    let hits: u64 = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start = s * SHARD;
            let end = (start + SHARD).min(n_samples);
            (start..end)
                .filter(|&i| {
                    let x = sample_with(&mut rng, packet, i);
                    x > x0_min && x < x2_bound
                })
                .count() as u64
        })
        .sum();
    Ok(TransmissionResult {
        value: hits as f64 / n_samples as f64,
        method: TransmissionMethod::MonteCarlo,
        x0_min_used: Some(x0_min),
        n_samples: Some(n_samples),
    })
}

/// Binomial standard error of a Monte-Carlo fraction.
pub fn binomial_sigma(p: f64, n_samples: u64) -> f64 {
    (p * (1.0 - p) / n_samples as f64).sqrt()
}

/// Relative shortfall of `estimate` against `reference`, in percent.
pub fn deviation_sigma(
    estimate: &TransmissionResult,
    reference: &TransmissionResult,
) -> Result<f64> {
    if reference.value == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((1.0 - estimate.value / reference.value) * 100.0)
}

/// Largest defect of `ρ_t(x(t))·dx(t) = ρ_0(x(0))·dx(0)` over a sorted
/// family of trajectories. `dx` at an interior member is half the distance
/// between its two neighbours, so the check is exact for affine flows and
/// second order in the spacing otherwise.
pub fn jacobian_defect(
    inits: &[f64],
    finals: &[f64],
    rho0: impl Fn(f64) -> f64,
    rho_t: impl Fn(f64) -> f64,
) -> f64 {
    assert_eq!(
        inits.len(),
        finals.len(),
        "one final position per trajectory"
    );
    if inits.len() < 3 {
        return 0.0;
    }
    (1..inits.len() - 1)
        .map(|i| {
            let d0 = inits[i + 1] - inits[i - 1];
            let dt = finals[i + 1] - finals[i - 1];
            (rho_t(finals[i]) * dt / (rho0(inits[i]) * d0) - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// [`jacobian_defect`] along the closed-form trajectories of the ramp.
pub fn jacobian_check(
    packet: &GaussianPacket,
    ramp: &RampSpec,
    inits: &[f64],
    t: f64,
) -> Result<f64> {
    require("t", t >= 0.0, || format!("must be non-negative, got {t}"))?;
    require("inits", inits.windows(2).all(|w| w[0] < w[1]), || {
        "must be strictly increasing".into()
    })?;
    let finals: Vec<f64> = inits
        .iter()
        .map(|&x| trajectory(packet, ramp, &TrajectoryInitial::new(packet, x), t))
        .collect();
    Ok(jacobian_defect(
        inits,
        &finals,
        |x| packet.initial_density(x),
        |x| rho(packet, ramp, x, t),
    ))
}
