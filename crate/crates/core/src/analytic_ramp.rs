//! Closed-form evolution of a Gaussian wave packet on the untruncated
//! linear ramp `V(x) = m·α·x`.
//!
//! The packet keeps its Gaussian shape: the centroid follows the classical
//! uniformly accelerated path while the width grows exactly as for a free
//! packet. All formulas carry explicit `mass` and `hbar`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require, Result};

/// Wavefunction value at a single point, in units of length^(-1/2).
pub type ComplexAmplitude = Complex64;

/// Initial Gaussian state: centroid position and momentum, width, mass and
/// the reduced Planck constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub x0: f64,
    pub p0: f64,
    pub sigma0: f64,
    pub mass: f64,
    pub hbar: f64,
}

impl GaussianPacket {
    pub fn new(x0: f64, p0: f64, sigma0: f64, mass: f64, hbar: f64) -> Result<Self> {
        require("x0", x0.is_finite(), || format!("must be finite, got {x0}"))?;
        require("p0", p0.is_finite() && p0 >= 0.0, || {
            format!("must be finite and non-negative, got {p0}")
        })?;
        require("sigma0", sigma0.is_finite() && sigma0 > 0.0, || {
            format!("must be positive, got {sigma0}")
        })?;
        require("mass", mass.is_finite() && mass > 0.0, || {
            format!("must be positive, got {mass}")
        })?;
        require("hbar", hbar.is_finite() && hbar > 0.0, || {
            format!("must be positive, got {hbar}")
        })?;
        Ok(Self {
            x0,
            p0,
            sigma0,
            mass,
            hbar,
        })
    }

    /// Packet in units where `hbar = mass = 1`.
    pub fn natural(x0: f64, p0: f64, sigma0: f64) -> Result<Self> {
        Self::new(x0, p0, sigma0, 1.0, 1.0)
    }

    /// Centroid velocity `p0 / m`.
    pub fn v0(&self) -> f64 {
        self.p0 / self.mass
    }

    /// Spreading velocity `v_s = ħ / (2 m σ0)`.
    pub fn spreading_velocity(&self) -> f64 {
        self.hbar / (2.0 * self.mass * self.sigma0)
    }

    /// Spreading momentum `p_s = m v_s`.
    pub fn spreading_momentum(&self) -> f64 {
        self.mass * self.spreading_velocity()
    }

    /// Boost acceleration `α_s = v_s² / σ0`.
    pub fn boost_acceleration(&self) -> f64 {
        let vs = self.spreading_velocity();
        vs * vs / self.sigma0
    }

    /// Width at time `t`: `σ0·sqrt(1 + (v_s t / σ0)²)`.
    pub fn sigma_t(&self, t: f64) -> f64 {
        self.sigma0 * self.width_ratio(t)
    }

    /// `σ_t / σ0`, which is also the separation ratio between any two
    /// Bohmian trajectories.
    pub fn width_ratio(&self, t: f64) -> f64 {
        let u = self.spreading_velocity() * t / self.sigma0;
        u.hypot(1.0)
    }

    /// `dσ_t/dt = v_s² t / σ_t`.
    pub fn spreading_rate(&self, t: f64) -> f64 {
        let vs = self.spreading_velocity();
        vs * vs * t / self.sigma_t(t)
    }

    /// Complex width `σ̃_t = σ0 (1 + iħt / 2mσ0²)`.
    pub fn complex_width(&self, t: f64) -> Complex64 {
        let tau = self.hbar * t / (2.0 * self.mass * self.sigma0 * self.sigma0);
        Complex64::new(self.sigma0, self.sigma0 * tau)
    }

    /// Initial density `ρ0(x) = |Ψ0(x)|²`.
    pub fn initial_density(&self, x: f64) -> f64 {
        gaussian_density(x - self.x0, self.sigma0)
    }

    /// Initial wavefunction, a Gaussian envelope times a plane wave.
    pub fn initial_amplitude(&self, x: f64) -> ComplexAmplitude {
        let d = x - self.x0;
        let norm = (2.0 * PI * self.sigma0 * self.sigma0).powf(-0.25);
        let envelope = norm * (-d * d / (4.0 * self.sigma0 * self.sigma0)).exp();
        Complex64::from_polar(envelope, self.p0 * d / self.hbar)
    }
}

pub(crate) fn gaussian_density(d: f64, sigma: f64) -> f64 {
    (-d * d / (2.0 * sigma * sigma)).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// Slope of the untruncated ramp. The potential is `mass·alpha·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    pub alpha: f64,
}

impl RampSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        require("alpha", alpha.is_finite() && alpha > 0.0, || {
            format!("ramp slope must be positive, got {alpha}")
        })?;
        Ok(Self { alpha })
    }

    /// The `α → 0` limit, a free packet. Used as a validation baseline.
    pub fn free() -> Self {
        Self { alpha: 0.0 }
    }

    pub fn potential(&self, mass: f64, x: f64) -> f64 {
        mass * self.alpha * x
    }
}

/// Classical centroid position and momentum at `t`.
pub fn classical_path(packet: &GaussianPacket, ramp: &RampSpec, t: f64) -> (f64, f64) {
    let x = packet.x0 + packet.v0() * t - 0.5 * ramp.alpha * t * t;
    let p = packet.mass * (packet.v0() - ramp.alpha * t);
    (x, p)
}

/// Exact wavefunction on the ramp.
///
/// The normalization `(2πσ̃_t²)^(-1/4)` uses the principal square root of
/// `σ̃_t`, which is continuous in `t` since `arg σ̃_t ∈ [0, π/2)`.
pub fn psi(packet: &GaussianPacket, ramp: &RampSpec, x: f64, t: f64) -> ComplexAmplitude {
    let GaussianPacket {
        x0,
        p0,
        sigma0,
        mass,
        hbar,
    } = *packet;
    let alpha = ramp.alpha;
    let (x_cl, p_cl) = classical_path(packet, ramp, t);
    let st = packet.complex_width(t);
    let norm = (2.0 * PI).powf(-0.25) / st.sqrt();
    let d = x - x_cl;
    let gauss = -(d * d) / (4.0 * sigma0 * st);
    let phase = p_cl * d / hbar + (p0 * p0 / (2.0 * mass) - mass * alpha * x0) * t / hbar
        - (p0 - mass * alpha * t / 3.0) * alpha * t * t / hbar;
    norm * (gauss + Complex64::new(0.0, phase)).exp()
}

/// Probability density `(2πσ_t²)^(-1/2) exp(-(x - x_cl)² / 2σ_t²)`.
pub fn rho(packet: &GaussianPacket, ramp: &RampSpec, x: f64, t: f64) -> f64 {
    let (x_cl, _) = classical_path(packet, ramp, t);
    gaussian_density(x - x_cl, packet.sigma_t(t))
}

/// Energy bookkeeping: the classical-like part and the spreading part are
/// separately conserved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySplit {
    pub total: f64,
    pub classical: f64,
    pub spreading: f64,
}

/// `p_cl²/2m + m α x_cl` at time `t`.
pub fn classical_energy(packet: &GaussianPacket, ramp: &RampSpec, t: f64) -> f64 {
    let (x_cl, p_cl) = classical_path(packet, ramp, t);
    p_cl * p_cl / (2.0 * packet.mass) + ramp.potential(packet.mass, x_cl)
}

pub fn mean_energy(packet: &GaussianPacket, ramp: &RampSpec) -> EnergySplit {
    let classical = classical_energy(packet, ramp, 0.0);
    let spreading = packet.hbar * packet.hbar / (8.0 * packet.mass * packet.sigma0 * packet.sigma0);
    EnergySplit {
        total: classical + spreading,
        classical,
        spreading,
    }
}

/// Same as [`GaussianPacket::spreading_rate`], kept as a free function to
/// mirror the other closed-form quantities.
pub fn spreading_rate(packet: &GaussianPacket, t: f64) -> f64 {
    packet.spreading_rate(t)
}

pub fn sigma_t(packet: &GaussianPacket, t: f64) -> f64 {
    packet.sigma_t(t)
}
