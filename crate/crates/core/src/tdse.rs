//! Grid propagation of the time-dependent Schrödinger equation.
//!
//! Second-order symmetric split-step Fourier scheme on a periodic grid:
//! half a potential kick in position space, a full kinetic step in
//! momentum space, then the other half kick. Each step is unitary up to
//! round-off. The grid must be wide enough that no probability wraps
//! around before the transmission plateau is reached.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::analytic_ramp::GaussianPacket;
use crate::csv::Table;
use crate::error::{require, Error, Result};

/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 1 << 14;
/// Default time step.
pub const DEFAULT_DT: f64 = 1e-4;
/// Time span used to size the default grid.
pub const DEFAULT_HORIZON: f64 = 3.0;
/// Largest tolerated norm drift before a run is declared divergent.
pub const MAX_NORM_DRIFT: f64 = 1e-6;

/// Uniform periodic grid `x_i = x_min + i·dx`, `i < n_points`, with
/// `dx = (x_max − x_min)/n_points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        require(
            "x_min",
            x_min.is_finite() && x_max.is_finite() && x_min < x_max,
            || format!("need x_min < x_max, got [{x_min}, {x_max}]"),
        )?;
        require("n_points", n_points >= 1024, || {
            format!("need at least 1024 points, got {n_points}")
        })?;
        Ok(Self {
            x_min,
            x_max,
            n_points,
        })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x < self.x_max
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * PI / (n as f64 * self.dx());
        (0..n)
            .map(|i| {
                let j = if i < n.div_ceil(2) {
                    i as f64
                } else {
                    i as f64 - n as f64
                };
                j * dk
            })
            .collect()
    }

    /// Same extent with twice the points.
    pub fn refined(&self) -> Self {
        Self {
            n_points: self.n_points * 2,
            ..*self
        }
    }
}

/// Ramp truncated on both sides:
/// `V = plateau` for `x < x_minus`, `m·α·x` on `[x_minus, x_cutoff]`,
/// and `plateau` again for `x > x_cutoff`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedRampSpec {
    pub alpha: f64,
    pub mass: f64,
    pub x_minus: f64,
    pub x_cutoff: f64,
    pub plateau: f64,
}

impl TruncatedRampSpec {
    pub fn new(alpha: f64, mass: f64, x_minus: f64, x_cutoff: f64, plateau: f64) -> Result<Self> {
        require("alpha", alpha.is_finite() && alpha > 0.0, || {
            format!("must be positive, got {alpha}")
        })?;
        require("mass", mass.is_finite() && mass > 0.0, || {
            format!("must be positive, got {mass}")
        })?;
        require("x_minus", x_minus < x_cutoff, || {
            format!("left truncation {x_minus} must lie below the cutoff {x_cutoff}")
        })?;
        require("plateau", plateau.is_finite(), || {
            format!("must be finite, got {plateau}")
        })?;
        Ok(Self {
            alpha,
            mass,
            x_minus,
            x_cutoff,
            plateau,
        })
    }

    /// Standard layout for a packet: cutoff at `x0 + Nσ0`, left truncation at
    /// `x0 − 3Nσ0`, and plateau `m·α·x_minus` so the potential is continuous
    /// there. `N = sqrt(2 n ln 10)`.
    pub fn for_packet(packet: &GaussianPacket, alpha: f64, sensitivity: f64) -> Result<Self> {
        require(
            "sensitivity",
            sensitivity.is_finite() && sensitivity > 0.0,
            || format!("must be positive, got {sensitivity}"),
        )?;
        let n_mult = (2.0 * sensitivity * std::f64::consts::LN_10).sqrt();
        let x_cutoff = packet.x0 + n_mult * packet.sigma0;
        let x_minus = packet.x0 - 3.0 * n_mult * packet.sigma0;
        Self::new(
            alpha,
            packet.mass,
            x_minus,
            x_cutoff,
            packet.mass * alpha * x_minus,
        )
    }

    pub fn value(&self, x: f64) -> f64 {
        if x < self.x_minus || x > self.x_cutoff {
            self.plateau
        } else {
            self.mass * self.alpha * x
        }
    }
}

/// Potentials the engine can propagate under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PotentialModel {
    Free,
    /// Untruncated `m·α·x`.
    Ramp {
        alpha: f64,
        mass: f64,
    },
    Truncated(TruncatedRampSpec),
}

impl PotentialModel {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            PotentialModel::Free => 0.0,
            PotentialModel::Ramp { alpha, mass } => mass * alpha * x,
            PotentialModel::Truncated(spec) => spec.value(x),
        }
    }

    pub fn sample(&self, grid: &SpatialGrid) -> Vec<f64> {
        grid.positions().map(|x| self.value(x)).collect()
    }
}

/// Samples the truncated ramp on the grid, without smoothing the steps.
pub fn build_potential(spec: &TruncatedRampSpec, grid: &SpatialGrid) -> Result<Vec<f64>> {
    if !grid.contains(spec.x_cutoff) {
        return Err(Error::Configuration(format!(
            "cutoff {} lies outside the grid [{}, {})",
            spec.x_cutoff, grid.x_min, grid.x_max
        )));
    }
    Ok(PotentialModel::Truncated(*spec).sample(grid))
}

/// Wavefunction samples on a grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketState {
    pub grid: SpatialGrid,
    pub amplitudes: Vec<Complex64>,
    pub t: f64,
}

impl PacketState {
    pub fn from_fn(grid: SpatialGrid, t: f64, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = grid.positions().map(f).collect();
        Self {
            grid,
            amplitudes,
            t,
        }
    }

    /// The initial Gaussian sampled on the grid.
    pub fn from_packet(packet: &GaussianPacket, grid: SpatialGrid) -> Self {
        Self::from_fn(grid, 0.0, |x| packet.initial_amplitude(x))
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Discrete norm `Σ|ψ_i|² dx`.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn mean_position(&self) -> f64 {
        let dx = self.grid.dx();
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| a.norm_sqr() * self.grid.x(i))
            .sum::<f64>()
            * dx
            / self.norm()
    }

    pub fn peak_density(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .fold(0.0, f64::max)
    }

    /// Density linearly interpolated between grid nodes.
    pub fn density_at(&self, x: f64) -> Option<f64> {
        let s = (x - self.grid.x_min) / self.grid.dx();
        if s < 0.0 || s >= (self.grid.n_points - 1) as f64 {
            return None;
        }
        let i = s.floor() as usize;
        let w = s - i as f64;
        Some((1.0 - w) * self.amplitudes[i].norm_sqr() + w * self.amplitudes[i + 1].norm_sqr())
    }

    /// Probability beyond `x_cutoff`. Sample `i` stands for the cell
    /// `[x_i − dx/2, x_i + dx/2]`; the cell holding the cutoff contributes
    /// the fraction of it lying beyond.
    pub fn restricted_probability(&self, x_cutoff: f64) -> f64 {
        let dx = self.grid.dx();
        let mut sum = 0.0;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let upper = self.grid.x(i) + 0.5 * dx;
            let frac = ((upper - x_cutoff) / dx).clamp(0.0, 1.0);
            if frac > 0.0 {
                sum += frac * a.norm_sqr();
            }
        }
        sum * dx
    }

    /// Probability held in the outer `fraction` of the grid on each side.
    pub fn edge_probability(&self, fraction: f64) -> f64 {
        let n = self.grid.n_points;
        let band = ((n as f64 * fraction).ceil() as usize).clamp(1, n / 2);
        let head: f64 = self.amplitudes[..band].iter().map(|a| a.norm_sqr()).sum();
        let tail: f64 = self.amplitudes[n - band..]
            .iter()
            .map(|a| a.norm_sqr())
            .sum();
        (head + tail) * self.grid.dx()
    }

    /// Snapshot with columns `x, re_psi, im_psi, rho`.
    pub fn snapshot_table(&self) -> Table {
        let mut table = Table::new(&["x", "re_psi", "im_psi", "rho"]);
        for (i, a) in self.amplitudes.iter().enumerate() {
            table.push_numbers(&[self.grid.x(i), a.re, a.im, a.norm_sqr()]);
        }
        table
    }

    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        self.snapshot_table().write(path)
    }
}

/// Split-step propagator for a fixed potential and time step.
pub struct SplitStepPropagator {
    grid: SpatialGrid,
    dt: f64,
    half_kick: Vec<Complex64>,
    drift: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl SplitStepPropagator {
    pub fn new(
        grid: SpatialGrid,
        potential: &[f64],
        mass: f64,
        hbar: f64,
        dt: f64,
    ) -> Result<Self> {
        require("dt", dt.is_finite() && dt > 0.0, || {
            format!("must be positive, got {dt}")
        })?;
        require("potential", potential.len() == grid.n_points, || {
            format!(
                "expected {} samples, got {}",
                grid.n_points,
                potential.len()
            )
        })?;
        let n = grid.n_points;
        let half_kick = potential
            .iter()
            .map(|&v| Complex64::from_polar(1.0, -0.5 * v * dt / hbar))
            .collect();
        // 1/n of the inverse transform folded into the drift factor.
        let scale = 1.0 / n as f64;
        let drift = grid
            .wavenumbers()
            .into_iter()
            .map(|k| Complex64::from_polar(scale, -hbar * k * k * dt / (2.0 * mass)))
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            grid,
            dt,
            half_kick,
            drift,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn step(&mut self, state: &mut PacketState) {
        debug_assert_eq!(state.amplitudes.len(), self.grid.n_points);
        let psi = &mut state.amplitudes;
        for (a, k) in psi.iter_mut().zip(&self.half_kick) {
            *a *= k;
        }
        self.forward.process_with_scratch(psi, &mut self.scratch);
        for (a, d) in psi.iter_mut().zip(&self.drift) {
            *a *= d;
        }
        self.inverse.process_with_scratch(psi, &mut self.scratch);
        for (a, k) in psi.iter_mut().zip(&self.half_kick) {
            *a *= k;
        }
        state.t += self.dt;
    }
}

/// Propagates `n_steps` steps under the sampled `potential`.
pub fn propagate(
    state: &PacketState,
    potential: &[f64],
    mass: f64,
    hbar: f64,
    dt: f64,
    n_steps: usize,
) -> Result<PacketState> {
    let mut prop = SplitStepPropagator::new(state.grid, potential, mass, hbar, dt)?;
    let mut out = state.clone();
    let norm0 = state.norm();
    for _ in 0..n_steps {
        prop.step(&mut out);
    }
    let drift = (out.norm() - norm0).abs();
    if drift.is_nan() || drift > MAX_NORM_DRIFT {
        return Err(Error::Divergence { drift, t: out.t });
    }
    Ok(out)
}

/// Restricted probability beyond `x_cutoff`.
pub fn restricted_probability(state: &PacketState, x_cutoff: f64) -> f64 {
    state.restricted_probability(x_cutoff)
}

/// Time series of the restricted probability and its long-time value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransmissionTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Set only once the plateau criterion is met.
    pub t_inf: Option<f64>,
    pub converged: bool,
    pub plateau_time: Option<f64>,
}

impl TransmissionTrace {
    pub fn table(&self) -> Table {
        let mut table = Table::new(&["t", "T"]);
        for (&t, &v) in self.times.iter().zip(&self.values) {
            table.push_numbers(&[t, v]);
        }
        table
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.table().write(path)
    }
}

/// Stopping rule and sanity checks of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteOptions {
    /// Width of the plateau comparison window.
    pub window: f64,
    /// Largest change of `T` across the window accepted as a plateau.
    pub plateau_tol: f64,
    /// Spacing of the recorded `T(t)` samples.
    pub sample_interval: f64,
    /// Give up after this time.
    pub t_max: f64,
    /// Width of each edge band, as a fraction of the grid.
    pub edge_fraction: f64,
    /// Probability in the edge bands that aborts the run.
    pub edge_probability: f64,
}

impl Default for AsymptoteOptions {
    fn default() -> Self {
        Self {
            window: 0.5,
            plateau_tol: 1e-4,
            sample_interval: 0.01,
            t_max: 10.0,
            edge_fraction: 0.02,
            edge_probability: 1e-6,
        }
    }
}

/// Hook called after every propagation step with the states on both sides
/// of the step.
pub trait StepObserver {
    fn on_step(&mut self, before: &PacketState, after: &PacketState) -> Result<()>;
}

impl StepObserver for () {
    fn on_step(&mut self, _: &PacketState, _: &PacketState) -> Result<()> {
        Ok(())
    }
}

/// Time at which the classical centroid slides past the left truncation.
pub fn reflection_time(packet: &GaussianPacket, spec: &TruncatedRampSpec) -> f64 {
    let drop = (packet.x0 - spec.x_minus).max(0.0);
    let v0 = packet.v0();
    (v0 + (v0 * v0 + 2.0 * spec.alpha * drop).sqrt()) / spec.alpha
}

/// Grid wide enough for both the reflected and the transmitted parts up to
/// `horizon`, including six spreading velocities of width growth.
pub fn default_grid(
    packet: &GaussianPacket,
    spec: &TruncatedRampSpec,
    horizon: f64,
    n_points: usize,
) -> Result<SpatialGrid> {
    let v0 = packet.v0();
    let step_gain = (2.0 * spec.alpha * (spec.x_cutoff - spec.x_minus).max(0.0)).sqrt();
    let v_fast = v0 + 6.0 * packet.spreading_velocity() + step_gain;
    let spread = 6.0 * packet.spreading_velocity() * horizon;
    let left = packet.x0
        - 40.0 * packet.sigma0
        - v0 * horizon
        - 0.5 * spec.alpha * horizon * horizon
        - spread;
    let right = packet.x0 + 40.0 * packet.sigma0 + v_fast * horizon;
    aligned_grid(
        left.min(spec.x_minus - 10.0 * packet.sigma0),
        right,
        n_points,
        spec.x_cutoff,
    )
}

/// Grid of about `[left, right)` shifted so that `edge` falls midway between
/// two nodes, i.e. on a cell boundary. The sampled potential step and the
/// restricted probability then both sit exactly at `edge`.
pub fn aligned_grid(left: f64, right: f64, n_points: usize, edge: f64) -> Result<SpatialGrid> {
    let probe = SpatialGrid::new(left, right, n_points)?;
    let dx = probe.dx();
    let k = ((edge - left) / dx).floor();
    let x_min = edge - (k + 0.5) * dx;
    SpatialGrid::new(x_min, x_min + n_points as f64 * dx, n_points)
}

/// Outcome of a full run: the trace and the final state.
#[derive(Debug, Clone)]
pub struct AsymptoteRun {
    pub trace: TransmissionTrace,
    pub final_state: PacketState,
}

/// Propagates until the restricted probability beyond the cutoff settles.
pub fn run_to_asymptote(
    packet: &GaussianPacket,
    spec: &TruncatedRampSpec,
    grid: &SpatialGrid,
    dt: f64,
) -> Result<TransmissionTrace> {
    run_to_asymptote_with(
        packet,
        spec,
        grid,
        dt,
        &AsymptoteOptions::default(),
        &mut (),
    )
    .map(|r| r.trace)
}

/// [`run_to_asymptote`] with explicit options and a per-step observer.
///
/// The plateau is declared once `|T(t) − T(t − window)| < plateau_tol` and
/// the classical centroid has passed the left truncation.
pub fn run_to_asymptote_with(
    packet: &GaussianPacket,
    spec: &TruncatedRampSpec,
    grid: &SpatialGrid,
    dt: f64,
    options: &AsymptoteOptions,
    observer: &mut dyn StepObserver,
) -> Result<AsymptoteRun> {
    let potential = build_potential(spec, grid)?;
    let mut prop = SplitStepPropagator::new(*grid, &potential, packet.mass, packet.hbar, dt)?;
    let mut state = PacketState::from_packet(packet, *grid);
    let mut before = state.clone();
    let norm0 = state.norm();

    let steps_per_sample = ((options.sample_interval / dt).round() as usize).max(1);
    let sample_dt = steps_per_sample as f64 * dt;
    let lag = ((options.window / sample_dt).round() as usize).max(1);
    let t_reflect = reflection_time(packet, spec);

    let mut times = vec![0.0];
    let mut values = vec![state.restricted_probability(spec.x_cutoff)];
    let mut step = 0usize;
    loop {
        before.amplitudes.copy_from_slice(&state.amplitudes);
        before.t = state.t;
        prop.step(&mut state);
        step += 1;
        observer.on_step(&before, &state)?;
        if !step.is_multiple_of(steps_per_sample) {
            continue;
        }

        let t = state.t;
        let drift = (state.norm() - norm0).abs();
        if drift.is_nan() || drift > MAX_NORM_DRIFT {
            return Err(Error::Divergence { drift, t });
        }
        let value = state.restricted_probability(spec.x_cutoff);
        times.push(t);
        values.push(value);

        let k = values.len() - 1;
        if k >= lag && t >= t_reflect && (value - values[k - lag]).abs() < options.plateau_tol {
            return Ok(AsymptoteRun {
                trace: TransmissionTrace {
                    times,
                    values,
                    t_inf: Some(value),
                    converged: true,
                    plateau_time: Some(t),
                },
                final_state: state,
            });
        }
        let edge = state.edge_probability(options.edge_fraction);
        if edge >= options.edge_probability {
            return Err(Error::NonConvergence {
                t,
                reason: format!("probability {edge:.3e} reached the grid edges"),
            });
        }
        if t >= options.t_max {
            return Err(Error::NonConvergence {
                t,
                reason: "time limit reached".into(),
            });
        }
    }
}
