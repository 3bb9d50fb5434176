//! Parameter sweeps and figure data.
//!
//! Every output table gets a `<name>.config.json` sidecar holding the full
//! configuration it was produced with, defaults included.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic_ramp::{GaussianPacket, RampSpec};
use crate::bohmian::{
    critical_delta, onset_fast_boost, onset_resting, onset_slow_boost, recommend_regime,
    RegimeAdvice,
};
use crate::csv::{fmt_e12, fmt_opt, Table};
use crate::error::{io_err, require, Error, Result};
use crate::tdse::{
    default_grid, run_to_asymptote, TruncatedRampSpec, DEFAULT_DT, DEFAULT_HORIZON, DEFAULT_POINTS,
};
use crate::trajectory::{
    ensemble_run, locate_boundary, percentile_inits, CoupledRunner, Fate, StopRule,
};
use crate::transmission::{
    corrected_transmission, cutoff_from_sensitivity, deviation_sigma, erfc_transmission,
    interval_probability, monte_carlo_transmission, TransmissionMethod, TransmissionResult,
};

pub const DEFAULT_SEED: u64 = 20_240_617;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub x0: f64,
    pub mass: f64,
    pub hbar: f64,
    pub sigma0: Vec<f64>,
    pub alpha: Vec<f64>,
    pub n: Vec<f64>,
    pub v0: Vec<f64>,
    pub methods: Vec<TransmissionMethod>,
    /// Grid points of the wave-packet runs; `None` for the default.
    pub grid_points: Option<usize>,
    pub dt: f64,
    /// Bracket width at which the boundary search stops.
    pub tol: f64,
    pub seed: u64,
    pub mc_samples: u64,
    pub out_dir: PathBuf,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            x0: 0.0,
            mass: 1.0,
            hbar: 1.0,
            sigma0: vec![0.15],
            alpha: vec![10.0],
            n: vec![6.0],
            v0: vec![0.0],
            methods: vec![TransmissionMethod::ErfcEstimate],
            grid_points: None,
            dt: DEFAULT_DT,
            tol: 1e-3,
            seed: DEFAULT_SEED,
            mc_samples: 100_000,
            out_dir: PathBuf::from("out"),
            jobs: None,
        }
    }
}

/// `lo, lo + step, …` up to `hi` inclusive, without accumulated drift.
pub fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let k = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=k).map(|i| lo + step * i as f64).collect()
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, xs: &[f64]| {
            require(name, !xs.is_empty(), || "axis is empty".into())?;
            require(name, xs.iter().all(|x| x.is_finite() && *x > 0.0), || {
                format!("all values must be positive, got {xs:?}")
            })
        };
        positive("sigma0", &self.sigma0)?;
        positive("alpha", &self.alpha)?;
        positive("n", &self.n)?;
        require("v0", !self.v0.is_empty(), || "axis is empty".into())?;
        require(
            "v0",
            self.v0.iter().all(|v| v.is_finite() && *v >= 0.0),
            || format!("all values must be non-negative, got {:?}", self.v0),
        )?;
        require("methods", !self.methods.is_empty(), || {
            "no method selected".into()
        })?;
        require("x0", self.x0.is_finite(), || {
            format!("must be finite, got {}", self.x0)
        })?;
        require("mass", self.mass.is_finite() && self.mass > 0.0, || {
            format!("must be positive, got {}", self.mass)
        })?;
        require("hbar", self.hbar.is_finite() && self.hbar > 0.0, || {
            format!("must be positive, got {}", self.hbar)
        })?;
        require("dt", self.dt.is_finite() && self.dt > 0.0, || {
            format!("must be positive, got {}", self.dt)
        })?;
        require("tol", self.tol.is_finite() && self.tol > 0.0, || {
            format!("must be positive, got {}", self.tol)
        })?;
        require("mc_samples", self.mc_samples >= 1, || {
            "need at least one sample".into()
        })?;
        if let Some(n) = self.grid_points {
            require("grid_points", n >= 1024, || {
                format!("need at least 1024, got {n}")
            })?;
        }
        if let Some(j) = self.jobs {
            require("jobs", j >= 1, || "need at least one worker".into())?;
        }
        Ok(())
    }

    pub fn packet(&self, sigma0: f64, v0: f64) -> Result<GaussianPacket> {
        GaussianPacket::new(self.x0, self.mass * v0, sigma0, self.mass, self.hbar)
    }

    fn wants(&self, m: TransmissionMethod) -> bool {
        self.methods.contains(&m)
    }

    fn points(&self) -> Vec<SweepPoint> {
        let mut pts = Vec::new();
        for &sigma0 in &self.sigma0 {
            for &alpha in &self.alpha {
                for &n in &self.n {
                    for &v0 in &self.v0 {
                        pts.push(SweepPoint {
                            sigma0,
                            alpha,
                            n,
                            v0,
                        });
                    }
                }
            }
        }
        pts
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            builder = builder.num_threads(j);
        }
        builder
            .build()
            .map_err(|e| Error::Configuration(format!("cannot start worker pool: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SweepPoint {
    sigma0: f64,
    alpha: f64,
    n: f64,
    v0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sigma0: f64,
    pub alpha: f64,
    pub n: f64,
    pub v0: f64,
    pub x_cutoff: f64,
    pub delta0_c: f64,
    pub x0_min_est: Option<f64>,
    /// Slow- and fast-boost onsets, only for moving packets.
    pub x0_min_slow: Option<f64>,
    pub x0_min_fast: Option<f64>,
    pub x0_min_corr: Option<f64>,
    pub t_est: Option<f64>,
    pub t_mc: Option<f64>,
    pub t_wp: Option<f64>,
    pub t_corr: Option<f64>,
    pub sigma_pct: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn blank(p: SweepPoint, x_cutoff: f64, delta0_c: f64) -> Self {
        Self {
            sigma0: p.sigma0,
            alpha: p.alpha,
            n: p.n,
            v0: p.v0,
            x_cutoff,
            delta0_c,
            x0_min_est: None,
            x0_min_slow: None,
            x0_min_fast: None,
            x0_min_corr: None,
            t_est: None,
            t_mc: None,
            t_wp: None,
            t_corr: None,
            sigma_pct: None,
            error: None,
        }
    }

    fn note(&mut self, e: Error) {
        let msg = e.to_string();
        self.error = Some(match self.error.take() {
            Some(prev) => format!("{prev}; {msg}"),
            None => msg,
        });
    }
}

/// Onset estimate for a packet: the resting formula when `v0 = 0`,
/// otherwise the boost formula suggested by [`recommend_regime`], with both
/// boost variants returned alongside.
pub fn onset_estimate(
    packet: &GaussianPacket,
    ramp: &RampSpec,
    x_cutoff: f64,
) -> Result<(f64, Option<f64>, Option<f64>)> {
    if packet.v0() == 0.0 {
        return Ok((onset_resting(packet, ramp, x_cutoff)?.x0_min, None, None));
    }
    let slow = onset_slow_boost(packet, ramp, x_cutoff).x0_min;
    let fast = onset_fast_boost(packet, ramp, x_cutoff)?.x0_min;
    let chosen = match recommend_regime(packet, ramp) {
        RegimeAdvice::SlowBoost => slow,
        _ => fast,
    };
    Ok((chosen, Some(slow), Some(fast)))
}

fn evaluate(cfg: &SweepConfig, p: SweepPoint, seed: u64) -> SweepRow {
    let packet = match cfg.packet(p.sigma0, p.v0) {
        Ok(pk) => pk,
        Err(e) => {
            let mut row = SweepRow::blank(p, f64::NAN, f64::NAN);
            row.note(e);
            return row;
        }
    };
    let ramp = RampSpec { alpha: p.alpha };
    let cutoff = match cutoff_from_sensitivity(&packet, p.n) {
        Ok(c) => c,
        Err(e) => {
            let mut row = SweepRow::blank(p, f64::NAN, f64::NAN);
            row.note(e);
            return row;
        }
    };
    let mut row = SweepRow::blank(p, cutoff.x_cutoff, critical_delta(&packet, &ramp));

    let mut estimate = None;
    match onset_estimate(&packet, &ramp, cutoff.x_cutoff) {
        Ok((x, slow, fast)) => {
            row.x0_min_est = Some(x);
            row.x0_min_slow = slow;
            row.x0_min_fast = fast;
            let est = erfc_transmission(&packet, x);
            row.t_est = Some(est.value);
            estimate = Some(est);
        }
        Err(e) => row.note(e),
    }

    if cfg.wants(TransmissionMethod::MonteCarlo) {
        if let Some(x) = row.x0_min_est {
            match monte_carlo_transmission(&packet, x, f64::INFINITY, cfg.mc_samples, seed) {
                Ok(r) => row.t_mc = Some(r.value),
                Err(e) => row.note(e),
            }
        }
    }

    let needs_runner =
        cfg.wants(TransmissionMethod::WavePacket) || cfg.wants(TransmissionMethod::Corrected);
    if needs_runner {
        let setup = TruncatedRampSpec::for_packet(&packet, p.alpha, p.n).and_then(|spec| {
            let grid = default_grid(
                &packet,
                &spec,
                DEFAULT_HORIZON,
                cfg.grid_points.unwrap_or(DEFAULT_POINTS),
            )?;
            Ok((
                spec,
                CoupledRunner::truncated(packet, spec)?
                    .with_grid(grid)
                    .with_dt(cfg.dt),
            ))
        });
        match setup {
            Ok((spec, runner)) => {
                if cfg.wants(TransmissionMethod::WavePacket) {
                    match run_to_asymptote(&packet, &spec, &runner.grid, runner.dt) {
                        Ok(trace) => {
                            let wp =
                                TransmissionResult::wave_packet(trace.t_inf.unwrap_or(f64::NAN));
                            row.t_wp = Some(wp.value);
                            if let Some(est) = &estimate {
                                match deviation_sigma(est, &wp) {
                                    Ok(s) => row.sigma_pct = Some(s),
                                    Err(e) => row.note(e),
                                }
                            }
                        }
                        Err(e) => row.note(e),
                    }
                }
                if cfg.wants(TransmissionMethod::Corrected) {
                    match locate_boundary(&runner, cfg.tol) {
                        Ok(b) => {
                            row.x0_min_corr = Some(b.x0_min_corrected);
                            row.t_corr =
                                Some(corrected_transmission(&packet, b.x0_min_corrected).value);
                        }
                        Err(e) => row.note(e),
                    }
                }
            }
            Err(e) => row.note(e),
        }
    }
    row
}

/// Evaluates the Cartesian product of the axes. Rows come back in axis
/// order (σ0 outermost, then α, n, v0) whatever the scheduling. Failures
/// land in the row's error field.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let points = config.points();
    let pool = config.pool()?;
    Ok(pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, &p)| evaluate(config, p, config.seed.wrapping_add(i as u64)))
            .collect()
    }))
}

/// Table of sweep rows. Optional columns appear only when a requested
/// method or a moving packet calls for them.
pub fn sweep_table(config: &SweepConfig, rows: &[SweepRow]) -> Table {
    let moving = config.v0.iter().any(|&v| v != 0.0);
    let mc = config.wants(TransmissionMethod::MonteCarlo);
    let wp = config.wants(TransmissionMethod::WavePacket);
    let corr = config.wants(TransmissionMethod::Corrected);

    let mut header = vec![
        "sigma0",
        "alpha",
        "n",
        "v0",
        "x_cutoff",
        "delta0_c",
        "x0_min_est",
    ];
    if moving {
        header.extend(["x0_min_slow", "x0_min_fast"]);
    }
    if corr {
        header.push("x0_min_corr");
    }
    header.push("T_est");
    if mc {
        header.push("T_mc");
    }
    if wp {
        header.push("T_wp");
    }
    if corr {
        header.push("T_corr");
    }
    if wp {
        header.push("Sigma_pct");
    }
    header.push("error");

    let mut table = Table::new(&header);
    for r in rows {
        let mut cells: Vec<String> = [r.sigma0, r.alpha, r.n, r.v0, r.x_cutoff, r.delta0_c]
            .iter()
            .map(|&v| fmt_e12(v))
            .collect();
        cells.push(fmt_opt(r.x0_min_est));
        if moving {
            cells.push(fmt_opt(r.x0_min_slow));
            cells.push(fmt_opt(r.x0_min_fast));
        }
        if corr {
            cells.push(fmt_opt(r.x0_min_corr));
        }
        cells.push(fmt_opt(r.t_est));
        if mc {
            cells.push(fmt_opt(r.t_mc));
        }
        if wp {
            cells.push(fmt_opt(r.t_wp));
        }
        if corr {
            cells.push(fmt_opt(r.t_corr));
        }
        if wp {
            cells.push(fmt_opt(r.sigma_pct));
        }
        cells.push(r.error.clone().unwrap_or_default());
        table.push_cells(&cells);
    }
    table
}

/// Writes `<dir>/<name>.csv` and the matching config sidecar. Returns the
/// CSV path.
pub fn write_with_config(
    table: &Table,
    config: &SweepConfig,
    dir: &Path,
    name: &str,
) -> Result<PathBuf> {
    let csv = dir.join(format!("{name}.csv"));
    table.write(&csv)?;
    let sidecar = dir.join(format!("{name}.config.json"));
    std::fs::write(&sidecar, config.to_json()? + "\n").map_err(io_err(&sidecar))?;
    Ok(csv)
}

/// Runs the sweep and writes `sweep.csv` into the configured directory.
pub fn sweep_to_dir(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    let rows = run_sweep(config)?;
    write_with_config(
        &sweep_table(config, &rows),
        config,
        &config.out_dir,
        "sweep",
    )?;
    Ok(rows)
}

/// Contribution of the initial positions between two consecutive
/// sensitivity cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Shell {
    /// Upper cutoff index; `None` for the tail beyond the last cutoff.
    pub n: Option<u32>,
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

/// Splits the estimated transmission at sensitivity `n_onset` into shells
/// `(cutoff(k−1), cutoff(k)]`, `k = 1..=n_max`, with `cutoff(0) = x0`, each
/// clipped below at the onset. A final tail shell covers everything beyond
/// `cutoff(n_max)`, so the shells add up to the total.
pub fn sensitivity_shells(
    packet: &GaussianPacket,
    alpha: f64,
    n_onset: f64,
    n_max: u32,
) -> Result<Vec<Shell>> {
    require("n_max", n_max >= 2, || {
        format!("need at least 2, got {n_max}")
    })?;
    let ramp = RampSpec::new(alpha)?;
    let x_cut = cutoff_from_sensitivity(packet, n_onset)?.x_cutoff;
    let (x0_min, _, _) = onset_estimate(packet, &ramp, x_cut)?;
    let mut shells = Vec::with_capacity(n_max as usize + 1);
    let mut prev = packet.x0;
    for k in 1..=n_max {
        let c = cutoff_from_sensitivity(packet, k as f64)?.x_cutoff;
        let lo = prev.max(x0_min);
        shells.push(Shell {
            n: Some(k),
            lo,
            hi: c,
            value: interval_probability(packet, lo, c),
        });
        prev = c;
    }
    let lo = prev.max(x0_min);
    shells.push(Shell {
        n: None,
        lo,
        hi: f64::INFINITY,
        value: erfc_transmission(packet, lo).value,
    });
    Ok(shells)
}

/// Figure-2 data: the sweep over σ0 and the sensitivity axis, plus a shells
/// table per σ0.
pub fn figure2(config: &SweepConfig, n_max: u32) -> Result<Vec<PathBuf>> {
    let rows = run_sweep(config)?;
    let dir = &config.out_dir;
    let mut written = vec![write_with_config(
        &sweep_table(config, &rows),
        config,
        dir,
        "fig2_sensitivity",
    )?];

    let mut header = vec![
        "sigma0".to_string(),
        "alpha".to_string(),
        "n_onset".to_string(),
    ];
    header.extend((1..=n_max).map(|k| format!("T_shell_{k}")));
    header.extend(["T_tail".to_string(), "T_total".to_string()]);
    let mut table = Table::new(&header);
    for &sigma0 in &config.sigma0 {
        for &alpha in &config.alpha {
            for &n in &config.n {
                let packet = config.packet(sigma0, 0.0)?;
                let mut cells = vec![fmt_e12(sigma0), fmt_e12(alpha), fmt_e12(n)];
                match sensitivity_shells(&packet, alpha, n, n_max) {
                    Ok(shells) => {
                        let total: f64 = shells.iter().map(|s| s.value).sum();
                        cells.extend(shells.iter().map(|s| fmt_e12(s.value)));
                        cells.push(fmt_e12(total));
                    }
                    Err(_) => cells.extend((0..n_max + 2).map(|_| String::new())),
                }
                table.push_cells(&cells);
            }
        }
    }
    written.push(write_with_config(&table, config, dir, "fig2_shells")?);
    Ok(written)
}

/// Figure-4 data: estimated against wave-packet transmission along the σ0
/// axis.
pub fn figure4(config: &SweepConfig) -> Result<PathBuf> {
    let rows = run_sweep(config)?;
    write_with_config(&sweep_table(config, &rows), config, &config.out_dir, "fig4")
}

/// Per-σ0 summary of a figure-3 run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure3Summary {
    pub sigma0: f64,
    pub transmitted: usize,
    pub reflected: usize,
    pub undecided: usize,
    pub t_wp: f64,
    pub plateau_time: f64,
}

/// Trajectories per bundle.
pub const FIG3_TRAJECTORIES: usize = 51;

/// Figure-3 data for each σ0 of the config (first α and n, `v0 = 0`):
/// trajectory bundles on the untruncated and truncated ramps from 51
/// percentile starts, the centroid curve and initial and final densities.
/// The untruncated run lasts as long as the truncated one.
pub fn figure3_bundle(config: &SweepConfig) -> Result<Vec<Figure3Summary>> {
    config.validate()?;
    let alpha = config.alpha[0];
    let n = config.n[0];
    let dir = &config.out_dir;
    let mut out = Vec::new();
    for &sigma0 in &config.sigma0 {
        let packet = config.packet(sigma0, 0.0)?;
        let spec = TruncatedRampSpec::for_packet(&packet, alpha, n)?;
        let grid = default_grid(
            &packet,
            &spec,
            DEFAULT_HORIZON,
            config.grid_points.unwrap_or(DEFAULT_POINTS),
        )?;
        let inits = percentile_inits(&packet, FIG3_TRAJECTORIES);
        let tag = format!("fig3_s{sigma0:.3}");

        let truncated = CoupledRunner::truncated(packet, spec)?
            .with_grid(grid)
            .with_dt(config.dt);
        let res = ensemble_run(&inits, &truncated)?;
        let trace = res.trace.clone().expect("plateau run has a trace");
        let t_end = res.final_state.t;
        res.bundle().write(dir, &format!("{tag}_truncated"))?;
        trace.write(&dir.join(format!("{tag}_trace.csv")))?;
        res.final_state
            .write_snapshot(&dir.join(format!("{tag}_final_truncated.csv")))?;
        write_centroid(
            &res.centroid,
            &dir.join(format!("{tag}_centroid_truncated.csv")),
        )?;

        let ramp = CoupledRunner {
            stop: StopRule::FixedTime(t_end),
            ..CoupledRunner::ramp(packet, alpha, grid, t_end).with_dt(config.dt)
        };
        let free = ensemble_run(&inits, &ramp)?;
        free.bundle().write(dir, &format!("{tag}_untruncated"))?;
        free.final_state
            .write_snapshot(&dir.join(format!("{tag}_final_untruncated.csv")))?;
        write_centroid(
            &free.centroid,
            &dir.join(format!("{tag}_centroid_untruncated.csv")),
        )?;

        let initial = crate::tdse::PacketState::from_packet(&packet, grid);
        initial.write_snapshot(&dir.join(format!("{tag}_initial.csv")))?;

        let count = |f: Fate| res.trajectories.iter().filter(|t| t.fate == f).count();
        out.push(Figure3Summary {
            sigma0,
            transmitted: count(Fate::Transmitted),
            reflected: count(Fate::Reflected),
            undecided: count(Fate::Undecided),
            t_wp: trace.t_inf.unwrap_or(f64::NAN),
            plateau_time: t_end,
        });
    }
    let mut table = Table::new(&[
        "sigma0",
        "transmitted",
        "reflected",
        "undecided",
        "T_wp",
        "plateau_time",
    ]);
    for s in &out {
        table.push_cells(&[
            fmt_e12(s.sigma0),
            s.transmitted.to_string(),
            s.reflected.to_string(),
            s.undecided.to_string(),
            fmt_e12(s.t_wp),
            fmt_e12(s.plateau_time),
        ]);
    }
    write_with_config(&table, config, dir, "fig3_summary")?;
    Ok(out)
}

fn write_centroid(curve: &[(f64, f64)], path: &Path) -> Result<()> {
    let mut table = Table::new(&["t", "x_mean"]);
    for &(t, x) in curve {
        table.push_numbers(&[t, x]);
    }
    table.write(path)
}
