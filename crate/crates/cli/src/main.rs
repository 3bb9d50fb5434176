use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ramp_tunnel::analytic_ramp::{rho, RampSpec};
use ramp_tunnel::bohmian::{critical_delta, trajectory, TrajectoryInitial};
use ramp_tunnel::csv::{fmt_e12, Table};
use ramp_tunnel::sweep::{
    axis, figure2, figure3_bundle, figure4, onset_estimate, sweep_to_dir, SweepConfig,
};
use ramp_tunnel::tdse::{
    default_grid, run_to_asymptote_with, AsymptoteOptions, PacketState, DEFAULT_HORIZON,
};
use ramp_tunnel::trajectory::percentile_inits;
use ramp_tunnel::transmission::{cutoff_from_sensitivity, erfc_transmission, TransmissionMethod};
use ramp_tunnel::TruncatedRampSpec;

#[derive(Parser, Debug)]
#[command(
    name = "ramp-tunnel",
    version,
    about = "Tunneling through truncated linear ramps"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated methods: erfc, mc, wp, corrected.
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct Physics {
    #[arg(long, default_value_t = 0.15)]
    sigma0: f64,
    #[arg(long, default_value_t = 10.0)]
    alpha: f64,
    /// Sensitivity parameter.
    #[arg(long, default_value_t = 6.0)]
    n: f64,
    #[arg(long, default_value_t = 0.0)]
    x0: f64,
    #[arg(long, default_value_t = 0.0)]
    v0: f64,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Closed-form quantities and densities on the untruncated ramp.
    Analytic {
        #[command(flatten)]
        phys: Physics,
        /// Times at which to tabulate the density.
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,1")]
        times: Vec<f64>,
        #[arg(long, default_value_t = 2001)]
        points: usize,
    },
    /// Closed-form trajectories from percentile starting points.
    Trajectories {
        #[command(flatten)]
        phys: Physics,
        #[arg(long, default_value_t = 51)]
        count: usize,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.01)]
        t_step: f64,
    },
    /// Wave-packet run on the truncated ramp up to the transmission plateau.
    Tdse {
        #[command(flatten)]
        phys: Physics,
        #[arg(long)]
        grid_points: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Parameter sweep driven by the configuration.
    Sweep,
    /// Transmission against σ0 for several sensitivity values, plus shells.
    Fig2 {
        #[arg(long, default_value_t = 7)]
        n_max: u32,
    },
    /// Trajectory bundles and densities for σ0 = 0.15, 0.3, 0.5.
    Fig3,
    /// Estimated and wave-packet transmission against σ0.
    Fig4,
}

fn base_config(common: &Common, preset: SweepConfig) -> Result<SweepConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            SweepConfig::load(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => preset,
    };
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(list) = &common.methods {
        cfg.methods = list
            .iter()
            .map(|m| m.parse::<TransmissionMethod>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(jobs) = common.jobs {
        cfg.jobs = Some(jobs);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(common: &Common) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn analytic(dir: &Path, phys: &Physics, times: &[f64], points: usize) -> Result<()> {
    let packet = ramp_tunnel::GaussianPacket::natural(phys.x0, phys.v0, phys.sigma0)?;
    let ramp = RampSpec::new(phys.alpha)?;
    let cutoff = cutoff_from_sensitivity(&packet, phys.n)?;
    let mut summary = Table::new(&[
        "sigma0",
        "alpha",
        "n",
        "v0",
        "v_s",
        "alpha_s",
        "width_ratio_t1",
        "x_cutoff",
        "delta0_c",
        "x0_min_est",
        "T_est",
    ]);
    let (x0_min, _, _) = onset_estimate(&packet, &ramp, cutoff.x_cutoff)?;
    summary.push_numbers(&[
        phys.sigma0,
        phys.alpha,
        phys.n,
        phys.v0,
        packet.spreading_velocity(),
        packet.boost_acceleration(),
        packet.width_ratio(1.0),
        cutoff.x_cutoff,
        critical_delta(&packet, &ramp),
        x0_min,
        erfc_transmission(&packet, x0_min).value,
    ]);
    summary.write(&dir.join("analytic_summary.csv"))?;

    if points < 2 {
        bail!("need at least two density points");
    }
    let mut density = Table::new(&["t", "x", "rho"]);
    for &t in times {
        let (x_cl, _) = ramp_tunnel::analytic_ramp::classical_path(&packet, &ramp, t);
        let half = 6.0 * packet.sigma_t(t);
        for i in 0..points {
            let x = x_cl - half + 2.0 * half * i as f64 / (points - 1) as f64;
            density.push_numbers(&[t, x, rho(&packet, &ramp, x, t)]);
        }
    }
    density.write(&dir.join("analytic_density.csv"))?;
    println!(
        "x0_min_est = {x0_min:.6}, T_est = {:.6}",
        erfc_transmission(&packet, x0_min).value
    );
    Ok(())
}

fn trajectories(dir: &Path, phys: &Physics, count: usize, t_end: f64, t_step: f64) -> Result<()> {
    if count == 0 || t_step <= 0.0 || t_end < 0.0 {
        bail!("need a positive count and step and a non-negative end time");
    }
    let packet = ramp_tunnel::GaussianPacket::natural(phys.x0, phys.v0, phys.sigma0)?;
    let ramp = RampSpec::new(phys.alpha)?;
    let inits: Vec<TrajectoryInitial> = percentile_inits(&packet, count)
        .into_iter()
        .map(|x| TrajectoryInitial::new(&packet, x))
        .collect();
    let mut header = vec!["t".to_string()];
    header.extend((1..=count).map(|k| format!("x_{k}")));
    let mut table = Table::new(&header);
    for t in axis(0.0, t_end, t_step) {
        let mut row = vec![t];
        row.extend(inits.iter().map(|init| trajectory(&packet, &ramp, init, t)));
        table.push_numbers(&row);
    }
    table.write(&dir.join("trajectories.csv"))?;
    Ok(())
}

fn tdse(dir: &Path, phys: &Physics, grid_points: Option<usize>, dt: Option<f64>) -> Result<()> {
    let packet = ramp_tunnel::GaussianPacket::natural(phys.x0, phys.v0, phys.sigma0)?;
    let spec = TruncatedRampSpec::for_packet(&packet, phys.alpha, phys.n)?;
    let grid = default_grid(
        &packet,
        &spec,
        DEFAULT_HORIZON,
        grid_points.unwrap_or(ramp_tunnel::tdse::DEFAULT_POINTS),
    )?;
    let dt = dt.unwrap_or(ramp_tunnel::tdse::DEFAULT_DT);
    let run = run_to_asymptote_with(
        &packet,
        &spec,
        &grid,
        dt,
        &AsymptoteOptions::default(),
        &mut (),
    )?;
    run.trace.write(&dir.join("tdse_trace.csv"))?;
    PacketState::from_packet(&packet, grid).write_snapshot(&dir.join("tdse_initial.csv"))?;
    run.final_state
        .write_snapshot(&dir.join("tdse_final.csv"))?;
    let t_inf = run.trace.t_inf.unwrap_or(f64::NAN);
    let meta = serde_json::json!({
        "sigma0": phys.sigma0,
        "alpha": phys.alpha,
        "n": phys.n,
        "x0": phys.x0,
        "v0": phys.v0,
        "x_minus": spec.x_minus,
        "x_cutoff": spec.x_cutoff,
        "plateau": spec.plateau,
        "grid": grid,
        "dt": dt,
        "T_inf": t_inf,
        "plateau_time": run.trace.plateau_time,
    });
    let path = dir.join("tdse_run.json");
    fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    println!("T_inf = {}", fmt_e12(t_inf));
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let common = &cli.common;
    match &cli.verb {
        Verb::Analytic {
            phys,
            times,
            points,
        } => {
            let dir = out_dir(common);
            fs::create_dir_all(&dir)?;
            analytic(&dir, phys, times, *points)?;
        }
        Verb::Trajectories {
            phys,
            count,
            t_end,
            t_step,
        } => {
            let dir = out_dir(common);
            fs::create_dir_all(&dir)?;
            trajectories(&dir, phys, *count, *t_end, *t_step)?;
        }
        Verb::Tdse {
            phys,
            grid_points,
            dt,
        } => {
            let dir = out_dir(common);
            fs::create_dir_all(&dir)?;
            tdse(&dir, phys, *grid_points, *dt)?;
        }
        Verb::Sweep => {
            let cfg = base_config(common, SweepConfig::default())?;
            let rows = sweep_to_dir(&cfg)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!(
                "{} rows written to {} ({failed} with errors)",
                rows.len(),
                cfg.out_dir.display()
            );
        }
        Verb::Fig2 { n_max } => {
            let cfg = base_config(
                common,
                SweepConfig {
                    sigma0: axis(0.10, 0.50, 0.01),
                    n: vec![4.0, 5.0, 6.0, 7.0],
                    ..Default::default()
                },
            )?;
            for path in figure2(&cfg, *n_max)? {
                println!("{}", path.display());
            }
        }
        Verb::Fig3 => {
            let cfg = base_config(
                common,
                SweepConfig {
                    sigma0: vec![0.15, 0.3, 0.5],
                    ..Default::default()
                },
            )?;
            for s in figure3_bundle(&cfg)? {
                println!(
                    "sigma0 = {}: {} transmitted, {} reflected, T_wp = {:.6e}",
                    s.sigma0, s.transmitted, s.reflected, s.t_wp
                );
            }
        }
        Verb::Fig4 => {
            let cfg = base_config(
                common,
                SweepConfig {
                    sigma0: axis(0.10, 0.50, 0.01),
                    methods: vec![
                        TransmissionMethod::ErfcEstimate,
                        TransmissionMethod::WavePacket,
                    ],
                    ..Default::default()
                },
            )?;
            println!("{}", figure4(&cfg)?.display());
        }
    }
    Ok(())
}
