//! Closed-form Bohmian trajectories on the untruncated ramp and the
//! tunneling-onset estimators built on them.
//!
//! Every trajectory is the classical centroid path plus a rigidly scaled
//! offset, `x(t) = x_cl(t) + (σ_t/σ0)·δ0`. A trajectory tunnels through a
//! ramp truncated at `x_cutoff` when its turning point reaches the cutoff;
//! the smallest initial position that does so is the onset `x0_min`.

use serde::Serialize;

use crate::analytic_ramp::{classical_path, GaussianPacket, RampSpec};
use crate::error::{Error, Result};
use crate::quadrature::bisect;

/// Initial condition of one trajectory, with its offset from the centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryInitial {
    pub x_init: f64,
    pub delta0: f64,
}

impl TrajectoryInitial {
    pub fn new(packet: &GaussianPacket, x_init: f64) -> Self {
        Self {
            x_init,
            delta0: x_init - packet.x0,
        }
    }

    pub fn from_offset(packet: &GaussianPacket, delta0: f64) -> Self {
        Self {
            x_init: packet.x0 + delta0,
            delta0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TurningKind {
    /// Moves forward for a while, then turns back.
    TrueTurning,
    /// Moves backwards from the start; the initial position is the turning point.
    ImmediateBackward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurningEvent {
    pub t_tp: f64,
    pub x_tp: f64,
    pub kind: TurningKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OnsetRegime {
    /// Packet initially at rest.
    Resting,
    /// Spreading negligible up to the classical turning time.
    SlowBoost,
    /// Spreading already linear in time before the turning point.
    FastBoost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnsetEstimate {
    pub x0_min: f64,
    pub regime: OnsetRegime,
}

/// Bohmian velocity `v_cl + (ħ² t / 4m²σ0²σ_t²)(x − x_cl)`.
pub fn bohm_velocity(packet: &GaussianPacket, ramp: &RampSpec, x: f64, t: f64) -> f64 {
    let (x_cl, p_cl) = classical_path(packet, ramp, t);
    let st = packet.sigma_t(t);
    let m = packet.mass;
    let coupling =
        packet.hbar * packet.hbar * t / (4.0 * m * m * packet.sigma0 * packet.sigma0 * st * st);
    p_cl / m + coupling * (x - x_cl)
}

/// Closed-form trajectory position at `t`.
pub fn trajectory(
    packet: &GaussianPacket,
    ramp: &RampSpec,
    init: &TrajectoryInitial,
    t: f64,
) -> f64 {
    let (x_cl, _) = classical_path(packet, ramp, t);
    x_cl + packet.width_ratio(t) * init.delta0
}

/// Relative distance growth between any two trajectories, `σ_t/σ0`.
pub fn separation_ratio(packet: &GaussianPacket, t: f64) -> f64 {
    packet.width_ratio(t)
}

/// Critical offset `δ0ᶜ = (α/α_s)·σ0` beyond which a resting packet's
/// trajectories show a true turning point.
pub fn critical_delta(packet: &GaussianPacket, ramp: &RampSpec) -> f64 {
    ramp.alpha / packet.boost_acceleration() * packet.sigma0
}

/// `x_c(0) = x0 + δ0ᶜ`, start of the separatrix trajectory.
pub fn critical_position(packet: &GaussianPacket, ramp: &RampSpec) -> f64 {
    packet.x0 + critical_delta(packet, ramp)
}

fn require_at_rest(packet: &GaussianPacket) -> Result<()> {
    if packet.p0 == 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "closed-form turning quantities assume v0 = 0, got p0 = {}",
            packet.p0
        )))
    }
}

/// Turning time for a packet initially at rest.
///
/// Trajectories with `δ0 ≤ δ0ᶜ` turn immediately and are reported as
/// [`TurningKind::ImmediateBackward`] at `t = 0`.
pub fn turning_time_v0zero(
    packet: &GaussianPacket,
    ramp: &RampSpec,
    delta0: f64,
) -> Result<TurningEvent> {
    require_at_rest(packet)?;
    let q = packet.boost_acceleration() / ramp.alpha * delta0 / packet.sigma0;
    if q <= 1.0 {
        return Ok(TurningEvent {
            t_tp: 0.0,
            x_tp: packet.x0 + delta0,
            kind: TurningKind::ImmediateBackward,
        });
    }
    // (q-1)(q+1) instead of q²-1 keeps precision just above the separatrix.
    let t_tp = packet.sigma0 / packet.spreading_velocity() * ((q - 1.0) * (q + 1.0)).sqrt();
    Ok(TurningEvent {
        t_tp,
        x_tp: turning_point_v0zero(packet, ramp, delta0)?,
        kind: TurningKind::TrueTurning,
    })
}

/// Turning point `x0 + (σ0/2)(α/α_s) + (1/2)(α_s/α)(δ0²/σ0)` for `δ0 ≥ δ0ᶜ`.
pub fn turning_point_v0zero(packet: &GaussianPacket, ramp: &RampSpec, delta0: f64) -> Result<f64> {
    require_at_rest(packet)?;
    let dc = critical_delta(packet, ramp);
    if delta0 < dc {
        return Err(Error::Domain(format!(
            "offset {delta0} is below the critical distance {dc}; no true turning point"
        )));
    }
    let ratio = ramp.alpha / packet.boost_acceleration();
    Ok(packet.x0 + 0.5 * packet.sigma0 * ratio + 0.5 * delta0 * delta0 / (ratio * packet.sigma0))
}

/// Onset for a resting packet: the initial position whose turning point
/// sits exactly at `x_cutoff`.
pub fn onset_resting(
    packet: &GaussianPacket,
    ramp: &RampSpec,
    x_cutoff: f64,
) -> Result<OnsetEstimate> {
    let alpha_s = packet.boost_acceleration();
    let radicand = x_cutoff - packet.x0 - packet.sigma0 * ramp.alpha / (2.0 * alpha_s);
    if radicand < 0.0 {
        return Err(Error::Domain(format!(
            "cutoff {x_cutoff} lies inside the no-turning zone (short by {})",
            -radicand
        )));
    }
    let x0_min = packet.x0 + (2.0 * ramp.alpha * packet.sigma0 / alpha_s).sqrt() * radicand.sqrt();
    Ok(OnsetEstimate {
        x0_min,
        regime: OnsetRegime::Resting,
    })
}

/// Slow-boost onset `x_cutoff − v0²/2α`; trajectories run parallel to the
/// centroid.
pub fn onset_slow_boost(packet: &GaussianPacket, ramp: &RampSpec, x_cutoff: f64) -> OnsetEstimate {
    let v0 = packet.v0();
    OnsetEstimate {
        x0_min: x_cutoff - v0 * v0 / (2.0 * ramp.alpha),
        regime: OnsetRegime::SlowBoost,
    }
}

/// Fast-boost onset `x0 + sqrt(2ασ0/α_s)·sqrt(x_cutoff − x0) − (v0/v_s)·σ0`.
pub fn onset_fast_boost(
    packet: &GaussianPacket,
    ramp: &RampSpec,
    x_cutoff: f64,
) -> Result<OnsetEstimate> {
    let span = x_cutoff - packet.x0;
    if span < 0.0 {
        return Err(Error::Domain(format!(
            "cutoff {x_cutoff} lies behind the centroid"
        )));
    }
    let alpha_s = packet.boost_acceleration();
    let x0_min = packet.x0 + (2.0 * ramp.alpha * packet.sigma0 / alpha_s).sqrt() * span.sqrt()
        - packet.v0() / packet.spreading_velocity() * packet.sigma0;
    Ok(OnsetEstimate {
        x0_min,
        regime: OnsetRegime::FastBoost,
    })
}

/// Effective velocity `v0 + v_s δ0/σ0` of the fast-boost regime.
pub fn effective_velocity(packet: &GaussianPacket, delta0: f64) -> f64 {
    packet.v0() + packet.spreading_velocity() * delta0 / packet.sigma0
}

/// Fast-boost turning point `x0 + v_eff²/2α`, reached at `v_eff/α`.
pub fn fast_boost_turning(packet: &GaussianPacket, ramp: &RampSpec, delta0: f64) -> (f64, f64) {
    let v_eff = effective_velocity(packet, delta0);
    (
        v_eff / ramp.alpha,
        packet.x0 + v_eff * v_eff / (2.0 * ramp.alpha),
    )
}

/// Slow-boost turning time `v0 / (α − α_s δ0/σ0)`; `None` when the
/// denominator is not positive.
pub fn slow_boost_turning_time(
    packet: &GaussianPacket,
    ramp: &RampSpec,
    delta0: f64,
) -> Option<f64> {
    let denom = ramp.alpha - packet.boost_acceleration() * delta0 / packet.sigma0;
    (denom > 0.0).then(|| packet.v0() / denom)
}

/// Velocity along a trajectory, `v0 − αt + α_s δ0 t / σ_t`.
pub fn velocity_along(packet: &GaussianPacket, ramp: &RampSpec, delta0: f64, t: f64) -> f64 {
    packet.v0() - ramp.alpha * t + packet.boost_acceleration() * delta0 * t / packet.sigma_t(t)
}

/// Turning event for any `v0 ≥ 0`, by bisection on the velocity along the
/// trajectory.
///
/// The velocity is concave in `t` and starts at `v0 ≥ 0`, so the positive
/// root is unique when it exists.
pub fn turning_event(
    packet: &GaussianPacket,
    ramp: &RampSpec,
    delta0: f64,
    tol: f64,
) -> TurningEvent {
    let init = TrajectoryInitial::from_offset(packet, delta0);
    let v0 = packet.v0();
    if v0 == 0.0 && delta0 <= critical_delta(packet, ramp) {
        return TurningEvent {
            t_tp: 0.0,
            x_tp: init.x_init,
            kind: TurningKind::ImmediateBackward,
        };
    }
    let f = |t: f64| velocity_along(packet, ramp, delta0, t);
    let mut hi = 10.0 * v0 / ramp.alpha + 10.0 * packet.sigma0 / packet.spreading_velocity();
    while f(hi) >= 0.0 {
        hi *= 2.0;
    }
    // Skip the trivial root at t = 0 of the resting case.
    let lo = if v0 == 0.0 { hi * 1e-12 } else { 0.0 };
    let t_tp = bisect(f, lo, hi, tol).unwrap_or(0.0);
    TurningEvent {
        t_tp,
        x_tp: trajectory(packet, ramp, &init, t_tp),
        kind: TurningKind::TrueTurning,
    }
}

/// Which onset formula fits the packet, judged by `σ_t/σ0` at the classical
/// turning time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeAdvice {
    Resting,
    SlowBoost,
    FastBoost,
    /// Between the limits; use a numeric boundary search instead.
    Intermediate,
}

pub const SLOW_BOOST_MAX_RATIO: f64 = 1.1;
pub const FAST_BOOST_MIN_RATIO: f64 = 3.0;

pub fn recommend_regime(packet: &GaussianPacket, ramp: &RampSpec) -> RegimeAdvice {
    if packet.v0() == 0.0 {
        return RegimeAdvice::Resting;
    }
    let ratio = packet.width_ratio(packet.v0() / ramp.alpha);
    if ratio <= SLOW_BOOST_MAX_RATIO {
        RegimeAdvice::SlowBoost
    } else if ratio >= FAST_BOOST_MIN_RATIO {
        RegimeAdvice::FastBoost
    } else {
        RegimeAdvice::Intermediate
    }
}
