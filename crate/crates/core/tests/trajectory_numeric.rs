use proptest::prelude::*;
use ramp_tunnel::analytic_ramp::RampSpec;
use ramp_tunnel::bohmian::{trajectory, TrajectoryInitial};
use ramp_tunnel::tdse::{run_to_asymptote, SpatialGrid, TruncatedRampSpec};
use ramp_tunnel::trajectory::{
    ensemble_run, integrate_trajectory, locate_boundary, percentile_inits, CoupledRunner, Fate,
};
use ramp_tunnel::transmission::{binomial_sigma, erfc_transmission, initial_position_sample};
use ramp_tunnel::{Error, GaussianPacket};

fn truncated(sigma0: f64) -> CoupledRunner {
    let p = GaussianPacket::natural(0.0, 0.0, sigma0).unwrap();
    let spec = TruncatedRampSpec::for_packet(&p, 10.0, 6.0).unwrap();
    CoupledRunner::truncated(p, spec).unwrap()
}

fn is_up_set(fates: &[Fate]) -> bool {
    let first = fates
        .iter()
        .position(|&f| f == Fate::Transmitted)
        .unwrap_or(fates.len());
    fates[..first].iter().all(|&f| f == Fate::Reflected)
        && fates[first..].iter().all(|&f| f == Fate::Transmitted)
}

#[test]
fn ensembles_reproduce_the_wave_packet_transmission() {
    let runner = truncated(0.15);
    let p = runner.packet;

    let pct = ensemble_run(&percentile_inits(&p, 99), &runner).unwrap();
    let t_inf = pct.trace.as_ref().unwrap().t_inf.unwrap();
    assert_eq!(pct.lost, 0);
    assert!(
        (pct.transmitted_fraction - t_inf).abs() <= 1.0 / 99.0,
        "{} vs {t_inf}",
        pct.transmitted_fraction
    );
    assert!(is_up_set(&pct.fates()));
    // never crossing at any stored sample
    let n = pct.trajectories[0].samples.len();
    for j in 0..n {
        for w in pct.trajectories.windows(2) {
            assert!(
                w[0].samples[j].1 < w[1].samples[j].1,
                "crossing at sample {j}"
            );
        }
    }

    let mut sampled: Vec<f64> = (0..10_000)
        .map(|i| initial_position_sample(&p, 11, i))
        .collect();
    sampled.sort_by(f64::total_cmp);
    let mc = ensemble_run(&sampled, &runner.clone().with_record_every(usize::MAX)).unwrap();
    let sigma = binomial_sigma(t_inf, 10_000);
    assert!(
        (mc.transmitted_fraction - t_inf).abs() <= 3.0 * sigma,
        "{} vs {t_inf}",
        mc.transmitted_fraction
    );
    assert!(is_up_set(&mc.fates()));
}

#[test]
fn starts_far_below_the_onset_all_reflect() {
    let runner = truncated(0.15);
    let inits: Vec<f64> = (0..20).map(|i| -0.3 + 0.02 * i as f64).collect();
    let res = ensemble_run(&inits, &runner).unwrap();
    assert_eq!(res.transmitted_fraction, 0.0);
}

#[test]
fn wide_packet_onset_sits_deep_in_the_tail() {
    let runner = truncated(0.5);
    let p = runner.packet;
    let traj = integrate_trajectory(0.0, &runner).unwrap();
    assert_eq!(traj.fate, Fate::Reflected);
    // the tail beyond the corrected onset carries the whole wave-packet transmission
    let b = locate_boundary(&runner, 1e-3).unwrap();
    let spec = TruncatedRampSpec::for_packet(&p, 10.0, 6.0).unwrap();
    let t_wp = run_to_asymptote(&p, &spec, &runner.grid, runner.dt)
        .unwrap()
        .t_inf
        .unwrap();
    let tail = erfc_transmission(&p, b.x0_min_corrected).value;
    assert!(b.x0_min_corrected > p.x0 + 4.0 * p.sigma0);
    assert!((tail / t_wp - 1.0).abs() < 0.05, "{tail:e} vs {t_wp:e}");
}

#[test]
fn leaving_the_grid_is_reported() {
    // trajectories do not wrap around the periodic grid
    let p = GaussianPacket::natural(0.0, 40.0, 0.3).unwrap();
    let grid = SpatialGrid::new(-3.0, 3.0, 1024).unwrap();
    let runner = CoupledRunner::ramp(p, 0.0, grid, 0.2).with_dt(1e-3);
    let res = integrate_trajectory(0.0, &runner);
    assert!(
        matches!(res, Err(Error::TrajectoryLost { .. })),
        "{:?}",
        res.map(|t| (t.fate, t.final_position()))
    );
    assert!(matches!(
        ensemble_run(&[-0.1, 0.0, 0.1], &runner),
        Err(Error::TooManyLost { lost: 3, total: 3 })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn numeric_trajectories_match_closed_form(sigma0 in 0.2f64..0.5, alpha in 2.0f64..12.0, u in -2.0f64..2.0) {
        let p = GaussianPacket::natural(0.0, 0.0, sigma0).unwrap();
        let grid = SpatialGrid::new(-60.0, 40.0, 8192).unwrap();
        let runner = CoupledRunner::ramp(p, alpha, grid, 1.0).with_dt(1e-3).with_record_every(10);
        let traj = integrate_trajectory(u * sigma0, &runner).unwrap();
        let ramp = RampSpec::new(alpha).unwrap();
        let init = TrajectoryInitial::new(&p, u * sigma0);
        for &(t, x) in &traj.samples {
            prop_assert!((x - trajectory(&p, &ramp, &init, t)).abs() <= 1e-4);
        }
    }
}
