//! Bohmian trajectories driven by the grid wavefunction.
//!
//! The velocity field is taken from the phase difference of neighbouring
//! samples, `v_i = (ħ/m)·arg(ψ_{i+1} ψ*_{i−1})/(2dx)`, which is exact for
//! phases up to quadratic order in `x`. Trajectories advance with a
//! classical RK4 step per propagation step; the field at the half step is
//! the average of the fields before and after it.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analytic_ramp::GaussianPacket;
use crate::csv::{fmt_e12, fmt_opt, Table};
use crate::error::{io_err, require, Error, Result};
use crate::tdse::{
    default_grid, run_to_asymptote_with, AsymptoteOptions, PacketState, PotentialModel,
    SpatialGrid, SplitStepPropagator, StepObserver, TransmissionTrace, TruncatedRampSpec,
    DEFAULT_DT, DEFAULT_HORIZON, DEFAULT_POINTS, MAX_NORM_DRIFT,
};

/// Density below this fraction of the peak masks the velocity.
pub const RHO_FLOOR: f64 = 1e-12;
/// Smallest `ρ0/ρ0_peak` accepted for a starting point.
pub const MIN_START_DENSITY: f64 = 1e-8;
/// Largest tolerated fraction of lost trajectories in an ensemble.
pub const MAX_LOST_FRACTION: f64 = 1e-3;
/// Points of the coarse boundary scan.
pub const SCAN_POINTS: usize = 64;
/// Interior points per refinement round of the boundary search.
pub const REFINE_POINTS: usize = 15;

/// Velocity samples at one instant; `NaN` where masked.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub grid: SpatialGrid,
    pub v: Vec<f64>,
}

impl VelocityField {
    /// Linear interpolation; `None` outside the grid or next to a masked node.
    pub fn at(&self, x: f64) -> Option<f64> {
        let s = (x - self.grid.x_min) / self.grid.dx();
        if !(s >= 0.0 && s < (self.grid.n_points - 1) as f64) {
            return None;
        }
        let i = s as usize;
        let w = s - i as f64;
        let v = (1.0 - w) * self.v[i] + w * self.v[i + 1];
        v.is_finite().then_some(v)
    }

    pub fn is_masked(&self, i: usize) -> bool {
        !self.v[i].is_finite()
    }
}

pub fn velocity_from_state(state: &PacketState, mass: f64, hbar: f64) -> VelocityField {
    let psi = &state.amplitudes;
    let n = psi.len();
    let floor = RHO_FLOOR * state.peak_density();
    let scale = hbar / (mass * 2.0 * state.grid.dx());
    let v = (0..n)
        .into_par_iter()
        .map(|i| {
            if i == 0 || i + 1 == n {
                return f64::NAN;
            }
            let (a, b, c) = (psi[i - 1], psi[i], psi[i + 1]);
            if a.norm_sqr() <= floor || b.norm_sqr() <= floor || c.norm_sqr() <= floor {
                return f64::NAN;
            }
            scale * (c * a.conj()).arg()
        })
        .collect();
    VelocityField {
        grid: state.grid,
        v,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fate {
    Transmitted,
    Reflected,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericTrajectory {
    pub x_init: f64,
    /// `(t, x)` pairs in increasing time.
    pub samples: Vec<(f64, f64)>,
    pub fate: Fate,
    /// Time and place at which the trajectory ran into a masked region.
    pub lost: Option<(f64, f64)>,
}

impl NumericTrajectory {
    pub fn final_position(&self) -> f64 {
        self.samples.last().map(|s| s.1).unwrap_or(self.x_init)
    }
}

/// When a coupled run stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopRule {
    /// Until the restricted probability beyond the cutoff settles. Needs a
    /// truncated potential.
    Plateau(AsymptoteOptions),
    FixedTime(f64),
}

/// Everything needed to propagate the wavefunction together with a set of
/// trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRunner {
    pub packet: GaussianPacket,
    pub potential: PotentialModel,
    pub grid: SpatialGrid,
    pub dt: f64,
    pub stop: StopRule,
    /// Record a sample every this many steps.
    pub record_every: usize,
}

impl CoupledRunner {
    /// Truncated ramp on the default grid, run to the plateau.
    pub fn truncated(packet: GaussianPacket, spec: TruncatedRampSpec) -> Result<Self> {
        let grid = default_grid(&packet, &spec, DEFAULT_HORIZON, DEFAULT_POINTS)?;
        Ok(Self {
            packet,
            potential: PotentialModel::Truncated(spec),
            grid,
            dt: DEFAULT_DT,
            stop: StopRule::Plateau(AsymptoteOptions::default()),
            record_every: 100,
        })
    }

    /// Untruncated ramp on `grid` up to `t_end`.
    pub fn ramp(packet: GaussianPacket, alpha: f64, grid: SpatialGrid, t_end: f64) -> Self {
        Self {
            potential: PotentialModel::Ramp {
                alpha,
                mass: packet.mass,
            },
            packet,
            grid,
            dt: DEFAULT_DT,
            stop: StopRule::FixedTime(t_end),
            record_every: 100,
        }
    }

    pub fn with_grid(mut self, grid: SpatialGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_record_every(mut self, steps: usize) -> Self {
        self.record_every = steps.max(1);
        self
    }

    pub fn x_cutoff(&self) -> Option<f64> {
        match self.potential {
            PotentialModel::Truncated(spec) => Some(spec.x_cutoff),
            _ => None,
        }
    }

    fn validate_inits(&self, inits: &[f64]) -> Result<()> {
        let peak = self.packet.initial_density(self.packet.x0);
        for &x in inits {
            let ok = x.is_finite() && self.packet.initial_density(x) >= MIN_START_DENSITY * peak;
            if !ok {
                return Err(Error::Domain(format!(
                    "starting point {x} lies where the initial density is below {MIN_START_DENSITY:e} of its peak"
                )));
            }
        }
        Ok(())
    }

    fn drive(&self, observer: &mut Integrator) -> Result<(PacketState, Option<TransmissionTrace>)> {
        match self.stop {
            StopRule::Plateau(options) => {
                let PotentialModel::Truncated(spec) = self.potential else {
                    return Err(Error::Configuration(
                        "plateau stop needs a truncated potential".into(),
                    ));
                };
                let run = run_to_asymptote_with(
                    &self.packet,
                    &spec,
                    &self.grid,
                    self.dt,
                    &options,
                    observer,
                )?;
                Ok((run.final_state, Some(run.trace)))
            }
            StopRule::FixedTime(t_end) => {
                require("t_end", t_end.is_finite() && t_end >= 0.0, || {
                    format!("must be non-negative, got {t_end}")
                })?;
                let potential = self.potential.sample(&self.grid);
                let mut prop = SplitStepPropagator::new(
                    self.grid,
                    &potential,
                    self.packet.mass,
                    self.packet.hbar,
                    self.dt,
                )?;
                let mut state = PacketState::from_packet(&self.packet, self.grid);
                let mut before = state.clone();
                let norm0 = state.norm();
                let n_steps = (t_end / self.dt).round() as usize;
                for _ in 0..n_steps {
                    before.amplitudes.copy_from_slice(&state.amplitudes);
                    before.t = state.t;
                    prop.step(&mut state);
                    observer.on_step(&before, &state)?;
                }
                let drift = (state.norm() - norm0).abs();
                if drift.is_nan() || drift > MAX_NORM_DRIFT {
                    return Err(Error::Divergence { drift, t: state.t });
                }
                Ok((state, None))
            }
        }
    }
}

/// Advances a set of trajectories alongside the propagation.
struct Integrator {
    mass: f64,
    hbar: f64,
    record_every: usize,
    step: usize,
    last_field: Option<VelocityField>,
    x: Vec<f64>,
    lost: Vec<Option<(f64, f64)>>,
    samples: Vec<Vec<(f64, f64)>>,
    centroid: Vec<(f64, f64)>,
}

impl Integrator {
    fn new(inits: &[f64], mass: f64, hbar: f64, record_every: usize) -> Self {
        Self {
            mass,
            hbar,
            record_every,
            step: 0,
            last_field: None,
            x: inits.to_vec(),
            lost: vec![None; inits.len()],
            samples: inits.iter().map(|&x| vec![(0.0, x)]).collect(),
            centroid: Vec::new(),
        }
    }

    fn record(&mut self, state: &PacketState) {
        let t = state.t;
        for ((s, &x), lost) in self.samples.iter_mut().zip(&self.x).zip(&self.lost) {
            if lost.is_none() && s.last().map(|p| p.0) != Some(t) {
                s.push((t, x));
            }
        }
        if self.centroid.last().map(|p| p.0) != Some(t) {
            self.centroid.push((t, state.mean_position()));
        }
    }
}

fn rk4(f0: &VelocityField, f1: &VelocityField, x: f64, h: f64) -> Option<f64> {
    let mid = |y: f64| Some(0.5 * (f0.at(y)? + f1.at(y)?));
    let k1 = f0.at(x)?;
    let k2 = mid(x + 0.5 * h * k1)?;
    let k3 = mid(x + 0.5 * h * k2)?;
    let k4 = f1.at(x + h * k3)?;
    Some(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

impl StepObserver for Integrator {
    fn on_step(&mut self, before: &PacketState, after: &PacketState) -> Result<()> {
        if self.step == 0 {
            self.centroid.push((before.t, before.mean_position()));
        }
        let f0 = match self.last_field.take() {
            Some(f) => f,
            None => velocity_from_state(before, self.mass, self.hbar),
        };
        let f1 = velocity_from_state(after, self.mass, self.hbar);
        let h = after.t - before.t;
        let t = before.t;
        self.x
            .par_iter_mut()
            .zip(self.lost.par_iter_mut())
            .for_each(|(x, lost)| {
                if lost.is_some() {
                    return;
                }
                match rk4(&f0, &f1, *x, h) {
                    Some(next) => *x = next,
                    None => *lost = Some((t, *x)),
                }
            });
        self.last_field = Some(f1);
        self.step += 1;
        if self.step.is_multiple_of(self.record_every) {
            self.record(after);
        }
        Ok(())
    }
}

/// Trajectories of one coupled run.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub trajectories: Vec<NumericTrajectory>,
    pub transmitted_fraction: f64,
    pub lost: usize,
    /// `(t, ⟨x⟩)` at the recorded times.
    pub centroid: Vec<(f64, f64)>,
    pub final_state: PacketState,
    pub trace: Option<TransmissionTrace>,
}

impl EnsembleResult {
    pub fn fates(&self) -> Vec<Fate> {
        self.trajectories.iter().map(|t| t.fate).collect()
    }

    pub fn bundle(&self) -> TrajectoryBundle {
        TrajectoryBundle::from_trajectories(&self.trajectories)
    }
}

/// Integrates every starting point in `inits` during a single propagation.
pub fn ensemble_run(inits: &[f64], runner: &CoupledRunner) -> Result<EnsembleResult> {
    let result = run_ensemble(inits, runner)?;
    let total = result.trajectories.len();
    if result.lost as f64 > MAX_LOST_FRACTION * total as f64 {
        return Err(Error::TooManyLost {
            lost: result.lost,
            total,
        });
    }
    Ok(result)
}

fn run_ensemble(inits: &[f64], runner: &CoupledRunner) -> Result<EnsembleResult> {
    runner.validate_inits(inits)?;
    let mut integ = Integrator::new(
        inits,
        runner.packet.mass,
        runner.packet.hbar,
        runner.record_every,
    );
    let (final_state, trace) = runner.drive(&mut integ)?;
    integ.record(&final_state);

    let x_cutoff = runner.x_cutoff();
    let Integrator {
        x,
        lost,
        samples,
        centroid,
        ..
    } = integ;
    let mut n_lost = 0;
    let trajectories: Vec<NumericTrajectory> = inits
        .iter()
        .zip(x)
        .zip(lost)
        .zip(samples)
        .map(|(((&x_init, x_end), lost), samples)| {
            let fate = match (lost, x_cutoff) {
                (Some(_), _) => {
                    n_lost += 1;
                    Fate::Undecided
                }
                (None, Some(c)) if x_end > c => Fate::Transmitted,
                (None, Some(_)) => Fate::Reflected,
                (None, None) => Fate::Undecided,
            };
            NumericTrajectory {
                x_init,
                samples,
                fate,
                lost,
            }
        })
        .collect();
    let decided = trajectories.len().max(1) as f64;
    let transmitted = trajectories
        .iter()
        .filter(|t| t.fate == Fate::Transmitted)
        .count() as f64;
    Ok(EnsembleResult {
        transmitted_fraction: transmitted / decided,
        trajectories,
        lost: n_lost,
        centroid,
        final_state,
        trace,
    })
}

/// A single trajectory; losing it is an error.
pub fn integrate_trajectory(x_init: f64, runner: &CoupledRunner) -> Result<NumericTrajectory> {
    let mut result = run_ensemble(&[x_init], runner)?;
    let traj = result.trajectories.pop().expect("one trajectory");
    if let Some((t, x)) = traj.lost {
        return Err(Error::TrajectoryLost { x_init, x, t });
    }
    Ok(traj)
}

/// `k` starting points at equispaced quantiles `(i + 1/2)/k` of the initial
/// density.
pub fn percentile_inits(packet: &GaussianPacket, k: usize) -> Vec<f64> {
    let normal = Normal::new(packet.x0, packet.sigma0).expect("validated width");
    (0..k)
        .map(|i| normal.inverse_cdf((i as f64 + 0.5) / k as f64))
        .collect()
}

/// `k ≥ 2` points equispaced in the initial distribution function between
/// `lo` and `hi`, endpoints included.
pub fn percentile_scan(packet: &GaussianPacket, lo: f64, hi: f64, k: usize) -> Vec<f64> {
    let normal = Normal::new(packet.x0, packet.sigma0).expect("validated width");
    let (a, b) = (normal.cdf(lo), normal.cdf(hi));
    let mut pts: Vec<f64> = (0..k)
        .map(|i| normal.inverse_cdf(a + (b - a) * i as f64 / (k - 1) as f64))
        .collect();
    pts[0] = lo;
    pts[k - 1] = hi;
    pts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryResult {
    pub x0_min_corrected: f64,
    pub bracket_width: f64,
    /// Highest reflected start.
    pub lo: f64,
    /// Lowest transmitted start.
    pub hi: f64,
    /// Coupled runs spent.
    pub runs: usize,
}

/// Brackets the start of the separatrix between reflected and transmitted
/// trajectories. A percentile scan of `[x0 − σ0, x_cutoff]` finds the fate
/// flip; each further run splits the bracket into 16 equal parts.
pub fn locate_boundary(runner: &CoupledRunner, tol: f64) -> Result<BoundaryResult> {
    require("tol", tol.is_finite() && tol > 0.0, || {
        format!("must be positive, got {tol}")
    })?;
    let x_cutoff = runner.x_cutoff().ok_or_else(|| {
        Error::Configuration("boundary search needs a truncated potential".into())
    })?;
    let runner = CoupledRunner {
        record_every: usize::MAX,
        ..runner.clone()
    };
    let p = &runner.packet;
    let (scan_lo, scan_hi) = (p.x0 - p.sigma0, x_cutoff);
    let mut inits = percentile_scan(p, scan_lo, scan_hi, SCAN_POINTS);
    let mut runs = 0;
    let (mut lo, mut hi);
    loop {
        let fates = ensemble_run(&inits, &runner)?.fates();
        runs += 1;
        let flip = fates.iter().position(|&f| f == Fate::Transmitted);
        if runs == 1 {
            match flip {
                None => {
                    return Err(Error::NoTransmission {
                        lo: scan_lo,
                        hi: scan_hi,
                    })
                }
                Some(0) => {
                    return Err(Error::NoReflection {
                        lo: scan_lo,
                        hi: scan_hi,
                    })
                }
                _ => {}
            }
        }
        // Refinement grids start reflected and end transmitted.
        let j = flip.unwrap_or(inits.len() - 1).clamp(1, inits.len() - 1);
        lo = inits[j - 1];
        hi = inits[j];
        if hi - lo <= tol {
            break;
        }
        let step = (hi - lo) / (REFINE_POINTS + 1) as f64;
        inits = (0..=REFINE_POINTS + 1)
            .map(|i| lo + step * i as f64)
            .collect();
        inits[REFINE_POINTS + 1] = hi;
    }
    Ok(BoundaryResult {
        x0_min_corrected: 0.5 * (lo + hi),
        bracket_width: hi - lo,
        lo,
        hi,
        runs,
    })
}

/// Positions of a set of trajectories on a common time axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBundle {
    pub times: Vec<f64>,
    /// `positions[k][j]`: trajectory `k` at `times[j]`, `None` once lost.
    pub positions: Vec<Vec<Option<f64>>>,
    pub inits: Vec<f64>,
    pub fates: Vec<Fate>,
}

#[derive(Serialize)]
struct BundleMeta<'a> {
    inits: &'a [f64],
    fates: &'a [Fate],
    transmitted: usize,
    reflected: usize,
    undecided: usize,
}

impl TrajectoryBundle {
    pub fn from_trajectories(trajs: &[NumericTrajectory]) -> Self {
        let longest = trajs.iter().max_by_key(|t| t.samples.len());
        let times: Vec<f64> = longest
            .map(|t| t.samples.iter().map(|s| s.0).collect())
            .unwrap_or_default();
        let positions = trajs
            .iter()
            .map(|t| {
                let mut row = vec![None; times.len()];
                let mut j = 0;
                for &(ts, x) in &t.samples {
                    while j < times.len() && times[j] < ts {
                        j += 1;
                    }
                    if j < times.len() && times[j] == ts {
                        row[j] = Some(x);
                    }
                }
                row
            })
            .collect();
        Self {
            times,
            positions,
            inits: trajs.iter().map(|t| t.x_init).collect(),
            fates: trajs.iter().map(|t| t.fate).collect(),
        }
    }

    /// CSV with columns `t, x_1, …, x_K`.
    pub fn table(&self) -> Table {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.positions.len()).map(|k| format!("x_{k}")));
        let mut table = Table::new(&header);
        for (j, &t) in self.times.iter().enumerate() {
            let mut row = vec![fmt_e12(t)];
            row.extend(self.positions.iter().map(|p| fmt_opt(p[j])));
            table.push_cells(&row);
        }
        table
    }

    pub fn metadata_json(&self) -> Result<String> {
        let count = |f: Fate| self.fates.iter().filter(|&&g| g == f).count();
        let meta = BundleMeta {
            inits: &self.inits,
            fates: &self.fates,
            transmitted: count(Fate::Transmitted),
            reflected: count(Fate::Reflected),
            undecided: count(Fate::Undecided),
        };
        Ok(serde_json::to_string_pretty(&meta)?)
    }

    /// Writes `<stem>.csv` and `<stem>.json` next to each other.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        self.table().write(&dir.join(format!("{stem}.csv")))?;
        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, self.metadata_json()? + "\n").map_err(io_err(&path))
    }
}

/// A plane wave `e^{ikx}` on `grid`, mostly for checks.
pub fn plane_wave(grid: SpatialGrid, k: f64) -> PacketState {
    PacketState::from_fn(grid, 0.0, |x| Complex64::from_polar(1.0, k * x))
}
