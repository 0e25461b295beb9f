//! Acceptance checks. Each test prints one PASS/FAIL line and then asserts it.

use std::process::Command;

use itertools::Itertools;
use mpcrange::assignment::hungarian;
use mpcrange::channel::{friis_amp_sq, measurement_sigma, uniform_direction, DelayProfile};
use mpcrange::distance::{
    analytic_rmse, distance_loglik, estimate_distance_closedform, estimate_distance_mle, estimate_distance_noassoc,
    ClosedFormVariant, DeltaObservation, RmseCase,
};
use mpcrange::geometry::{mpc_pair_from_virtual_source, projection_residual, relpos_from_single_mpc};
use mpcrange::harness::{rss_beat_threshold, toa_beat_criterion, Sweep, SweepVar};
use mpcrange::io::write_mpc_file;
use mpcrange::position::{build_projection_system, estimate_position_by_delta, DeltaMode};
use mpcrange::{
    run_experiment, ChannelConfig, ChannelModel, EstimatorKind, ExperimentConfig, MeasuredMpc, Observation,
    ObserverSets, PairedMpc, ProjectionMode, RmseReport, Vec3, C_M_PER_NS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn verdict(id: u32, pass: bool, detail: &str) {
    println!("criterion {id:>2}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

fn rel_err(x: f64, target: f64) -> f64 {
    (x - target).abs() / target.abs()
}

fn experiment(base: ExperimentConfig, var: SweepVar, values: &[f64], estimators: &[EstimatorKind]) -> RmseReport {
    let cfg = ExperimentConfig {
        sweep: Some(Sweep {
            variable: var,
            values: values.to_vec(),
        }),
        estimators: estimators.to_vec(),
        ..base
    };
    run_experiment(&cfg).expect("experiment runs")
}

/// Per-K Monte Carlo of the closed-form estimators: (rmse_mvue, rmse_eps, rmse_sync, mean_mvue, se_mean_mvue, mean_mle).
fn closed_form_mc(d: f64, k: usize, trials: usize, seed: u64) -> [f64; 6] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = d / C_M_PER_NS;
    let (mut sq_d, mut sq_e, mut sq_s, mut sum_d, mut sum_d2, mut sum_mle) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..trials {
        let deltas: Vec<f64> = (0..k).map(|_| rng.gen_range(-h..h)).collect();
        let obs = DeltaObservation::new(vec![deltas]);
        let mvue = estimate_distance_closedform(&obs, ClosedFormVariant::Mvue).unwrap();
        let mle = estimate_distance_closedform(&obs, ClosedFormVariant::Mle).unwrap();
        let sync = estimate_distance_closedform(&obs.clone().with_known_eps(0.0), ClosedFormVariant::Mvue).unwrap();
        sq_d += (mvue.d_hat_m - d).powi(2);
        sq_e += mvue.eps_hat_ns.unwrap().powi(2);
        sq_s += (sync.d_hat_m - d).powi(2);
        sum_d += mvue.d_hat_m;
        sum_d2 += mvue.d_hat_m.powi(2);
        sum_mle += mle.d_hat_m;
    }
    let n = trials as f64;
    let mean = sum_d / n;
    let var = (sum_d2 / n - mean * mean) * n / (n - 1.0);
    [(sq_d / n).sqrt(), (sq_e / n).sqrt(), (sq_s / n).sqrt(), mean, (var / n).sqrt(), sum_mle / n]
}

#[test]
fn criterion_01_closed_form_rmse_laws() {
    const TRIALS: usize = 1_000_000;
    const TOL: f64 = 0.01;
    let d = 2.5;
    let mut pass = true;
    let mut detail = String::new();
    for (i, k) in [2usize, 4, 12, 40].into_iter().enumerate() {
        let mc = closed_form_mc(d, k, TRIALS, 100 + i as u64);
        let want = [
            analytic_rmse(d, k, RmseCase::AsyncDist).unwrap(),
            analytic_rmse(d, k, RmseCase::EpsOffset).unwrap(),
            analytic_rmse(d, k, RmseCase::SyncDist).unwrap(),
        ];
        for j in 0..3 {
            pass &= rel_err(mc[j], want[j]) <= TOL;
        }
        detail += &format!(
            "K={k}: {:.6}/{:.6} {:.5}/{:.5} {:.6}/{:.6}; ",
            mc[0], want[0], mc[1], want[1], mc[2], want[2]
        );
    }
    let k12 = [
        analytic_rmse(d, 12, RmseCase::AsyncDist).unwrap(),
        analytic_rmse(d, 12, RmseCase::EpsOffset).unwrap(),
        analytic_rmse(d, 12, RmseCase::SyncDist).unwrap(),
    ];
    pass &= (k12[0] - 0.284901).abs() < 1e-6 && (k12[1] - 0.87415).abs() < 1e-4 && (k12[2] - 0.192880).abs() < 1e-6;
    verdict(1, pass, &format!("(empirical/analytic, tol {TOL}) {detail}"));
}

#[test]
fn criterion_02_unbiasedness() {
    const TRIALS: usize = 1_000_000;
    const MLE_TOL: f64 = 0.005;
    let d = 2.5;
    let mut pass = true;
    let mut detail = String::new();
    for (i, k) in [2usize, 4, 12, 40].into_iter().enumerate() {
        let mc = closed_form_mc(d, k, TRIALS, 200 + i as u64);
        let z = (mc[3] - d) / mc[4];
        let ratio = mc[5] / d;
        let want = (k as f64 - 1.0) / (k as f64 + 1.0);
        pass &= z.abs() <= 3.0 && rel_err(ratio, want) <= MLE_TOL;
        detail += &format!("K={k}: z={z:.2} mle/d={ratio:.5} vs {want:.5}; ");
    }
    verdict(2, pass, &detail);
}

#[test]
fn criterion_03_distance_rmse_vs_distance() {
    const TRIALS: usize = 100_000;
    const TOL: f64 = 0.05;
    let base = ExperimentConfig {
        trials: TRIALS,
        seed: 3,
        ..Default::default()
    };
    let mvue = experiment(base.clone(), SweepVar::DistanceM, &[2.5119], &[EstimatorKind::Mvue]);
    let r = mvue.row(2.5119, EstimatorKind::Mvue).unwrap();
    let ok_level = rel_err(r.rmse_m, 0.30) <= TOL;
    let both = experiment(base, SweepVar::DistanceM, &[0.1, 10.0], &[EstimatorKind::Mvue, EstimatorKind::Mle]);
    let gap = |d: f64| {
        let a = both.row(d, EstimatorKind::Mvue).unwrap();
        let b = both.row(d, EstimatorKind::Mle).unwrap();
        ((a.rmse_m - b.rmse_m) / a.stderr_m.hypot(b.stderr_m), a.rmse_m, b.rmse_m)
    };
    let (z_small, mv_s, ml_s) = gap(0.1);
    let (z_large, mv_l, ml_l) = gap(10.0);
    let pass = ok_level && z_small > 3.0 && z_large < -3.0;
    verdict(
        3,
        pass,
        &format!(
            "MVUE@2.5119={:.4} (0.30 +-{TOL}); d=0.1 MVUE={mv_s:.4} MLE={ml_s:.4} z={z_small:.1}; d=10 MVUE={mv_l:.4} MLE={ml_l:.4} z={z_large:.1}",
            r.rmse_m
        ),
    );
}

#[test]
fn criterion_04_position_rmse_vs_distance() {
    const TRIALS: usize = 20_000;
    const DD_RANGE: (f64, f64) = (0.055, 0.080);
    const TOL: f64 = 0.20;
    let base = ExperimentConfig {
        trials: TRIALS,
        seed: 4,
        ..Default::default()
    };
    let ds = [0.1, 0.2512, 0.631, 1.585, 2.5119, 3.981, 10.0];
    let rep = experiment(
        base,
        SweepVar::DistanceM,
        &ds,
        &[EstimatorKind::Dd, EstimatorKind::Tau, EstimatorKind::TauSync],
    );
    let mut pass = true;
    let mut detail = String::from("DD:");
    for &d in &ds {
        let v = rep.row(d, EstimatorKind::Dd).unwrap().rmse_m;
        pass &= (DD_RANGE.0..=DD_RANGE.1).contains(&v);
        detail += &format!(" {d}->{v:.4}");
    }
    let tau = rep.row(2.5119, EstimatorKind::Tau).unwrap().rmse_m;
    let tau_sync = rep.row(2.5119, EstimatorKind::TauSync).unwrap().rmse_m;
    pass &= rel_err(tau, 0.027) <= TOL && rel_err(tau_sync, 0.018) <= TOL;
    verdict(
        4,
        pass,
        &format!("{detail} (range {DD_RANGE:?}); TAU={tau:.4} (0.027 +-{TOL}); TAU_SYNC={tau_sync:.4} (0.018 +-{TOL})"),
    );
}

/// Delay-difference LSE RMSE with iid Gaussian delay errors and plane-wave geometry.
fn pwa_lse_rmse(k: usize, c_sigma_m: f64, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, c_sigma_m / C_M_PER_NS).unwrap();
    let truth = Vec3::new(0.3, -0.2, 0.1);
    let eps = 7.0;
    let mut sq = 0.0;
    let mut n = 0usize;
    for _ in 0..trials {
        let mut set = ObserverSets::default();
        for _ in 0..k {
            let e = uniform_direction(&mut rng);
            let tau_a = 30.0;
            let delta = e.dot(&truth) / C_M_PER_NS + eps + noise.sample(&mut rng);
            set.a.push(MeasuredMpc::new(tau_a).with_dir(e));
            set.b.push(MeasuredMpc::new(tau_a + delta).with_dir(e));
        }
        let obs = Observation { observers: vec![set] };
        if let Ok(est) = estimate_position_by_delta(&obs, &DeltaMode::Lse, ProjectionMode::PlaneWave) {
            sq += (est.d_hat - truth).norm_squared();
            n += 1;
        }
    }
    (sq / n as f64).sqrt()
}

#[test]
fn criterion_05_position_rmse_approximation() {
    const TRIALS: usize = 20_000;
    const TOL: f64 = 0.10;
    const EXAMPLE_TOL: f64 = 0.15;
    let c_sigma = 0.05;
    let mut pass = true;
    let mut detail = String::new();
    for (i, k) in [8usize, 12, 32].into_iter().enumerate() {
        let emp = pwa_lse_rmse(k, c_sigma, TRIALS, 500 + i as u64);
        let approx = 3.0 * c_sigma / (k as f64).sqrt();
        pass &= rel_err(emp, approx) <= TOL;
        detail += &format!("K={k}: {emp:.5} vs {approx:.5} (ratio {:.3}); ", emp / approx);
    }
    let example = pwa_lse_rmse(12, 0.071, TRIALS, 599);
    pass &= rel_err(example, 0.0615) <= EXAMPLE_TOL;
    detail += &format!("K=12 c*sigma=71mm: {example:.4} vs 0.0615 (tol {EXAMPLE_TOL})");
    verdict(5, pass, &format!("(tol {TOL}) {detail}"));
}

#[test]
fn criterion_06_direction_error_robustness() {
    const TRIALS: usize = 10_000;
    const TAU_MIN: f64 = 0.15;
    const DD_MAX: f64 = 0.08;
    const DDN_TOL: f64 = 0.05;
    let base = ExperimentConfig {
        trials: TRIALS,
        seed: 6,
        distance_m: 1.0,
        ..Default::default()
    };
    let sds = [1.0, 2.0, 3.0, 4.0];
    let rep = experiment(
        base,
        SweepVar::DirectionErrorDeg,
        &sds,
        &[EstimatorKind::Tau, EstimatorKind::Dd, EstimatorKind::Ddn],
    );
    let tau1 = rep.row(1.0, EstimatorKind::Tau).unwrap().rmse_m;
    let dd1 = rep.row(1.0, EstimatorKind::Dd).unwrap().rmse_m;
    let mut pass = tau1 >= TAU_MIN && dd1 <= DD_MAX;
    let mut detail = format!("at 1 deg TAU={tau1:.4} (>= {TAU_MIN}) DD={dd1:.4} (<= {DD_MAX}); DDN/DD:");
    for &s in &sds {
        let dd = rep.row(s, EstimatorKind::Dd).unwrap().rmse_m;
        let ddn = rep.row(s, EstimatorKind::Ddn).unwrap().rmse_m;
        pass &= rel_err(ddn, dd) <= DDN_TOL;
        detail += &format!(" {s}deg {ddn:.4}/{dd:.4}");
    }
    verdict(6, pass, &format!("{detail} (tol {DDN_TOL}, d=1 m)"));
}

#[test]
fn criterion_07_alien_robustness() {
    const TRIALS: usize = 10_000;
    let base = ExperimentConfig {
        trials: TRIALS,
        seed: 7,
        ..Default::default()
    };
    let rep = experiment(
        base,
        SweepVar::NAlien,
        &[2.0, 6.0],
        &[EstimatorKind::Mvue, EstimatorKind::Dd, EstimatorKind::Ddn],
    );
    let med = |n: f64, k| rep.row(n, k).unwrap().median_abs_err_m;
    let (mvue2, dd2, ddn2, ddn6) = (
        med(2.0, EstimatorKind::Mvue),
        med(2.0, EstimatorKind::Dd),
        med(2.0, EstimatorKind::Ddn),
        med(6.0, EstimatorKind::Ddn),
    );
    let pass = mvue2 > 1.0 && dd2 > 1.0 && ddn2 < 0.10 && ddn6 < 0.16;
    verdict(
        7,
        pass,
        &format!("medians at 2 aliens MVUE={mvue2:.3} (>1) DD={dd2:.3} (>1) DDN={ddn2:.4} (<0.10); at 6 aliens DDN={ddn6:.4} (<0.16)"),
    );
}

#[test]
fn criterion_08_channel_moments() {
    const MOMENT_TOL: f64 = 0.01;
    const LOS_TOL: f64 = 0.02;
    let cfg = ChannelConfig::default();
    let p = DelayProfile::new(&cfg);
    let tau_los = cfg.observer_radius_m / C_M_PER_NS;
    let (_, sigma) = measurement_sigma(friis_amp_sq(tau_los, 1.0, &cfg), 0.0, &cfg);
    let los_mm = C_M_PER_NS * sigma * 1e3;
    let (mean, rms) = (p.mean_excess_delay_ns(), p.rms_delay_spread_ns());
    let pass = rel_err(mean, 36.5) <= MOMENT_TOL && rel_err(rms, 30.3) <= MOMENT_TOL && rel_err(los_mm, 5.3) <= LOS_TOL;
    verdict(
        8,
        pass,
        &format!("mean excess {mean:.3} ns, rms spread {rms:.3} ns (tol {MOMENT_TOL}); LOS c*sigma {los_mm:.3} mm (tol {LOS_TOL})"),
    );
}

fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    (0..n)
        .permutations(n)
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Exhaustive zero-error no-association MLE for one observer: every (upper, lower)
/// pair of candidate delay differences, scored by explicit permutation counting.
fn brute_force_noassoc(tau_a: &[f64], tau_b: &[f64]) -> (f64, f64) {
    let k = tau_a.len();
    let all: Vec<f64> = tau_a.iter().flat_map(|a| tau_b.iter().map(move |b| b - a)).collect();
    let mut best: Option<(f64, f64, f64)> = None;
    for &hi in &all {
        for &lo in &all {
            let d = C_M_PER_NS * (hi - lo) / 2.0;
            if d <= 1e-6 {
                continue;
            }
            let (eps, h) = ((hi + lo) / 2.0, (hi - lo) / 2.0);
            let count = (0..k)
                .permutations(k)
                .filter(|p| {
                    p.iter()
                        .enumerate()
                        .all(|(i, &j)| (tau_b[j] - tau_a[i] - eps).abs() <= h * (1.0 + 1e-12) + 1e-12)
                })
                .count();
            if count == 0 {
                continue;
            }
            let score = -(k as f64) * d.ln() + (count as f64).ln();
            let better = match best {
                None => true,
                Some((bd, be, bs)) => {
                    if (score - bs).abs() <= 1e-12 * bs.abs().max(1.0) {
                        d < bd || (d == bd && eps.abs() < be.abs())
                    } else {
                        score > bs
                    }
                }
            };
            if better {
                best = Some((d, eps, score));
            }
        }
    }
    let (d, eps, _) = best.expect("at least one hypothesis");
    (d, eps)
}

#[test]
fn criterion_09_oracle_equivalences() {
    const INSTANCES: usize = 1000;
    const GRID: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    let mut hungarian_ok = 0;
    for _ in 0..INSTANCES {
        let n = rng.gen_range(1..=7);
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(0.0..10.0)).collect()).collect();
        let fast = hungarian(&cost).cost;
        if (fast - brute_force_assignment(&cost)).abs() <= 1e-9 {
            hungarian_ok += 1;
        }
    }

    let mut noassoc_ok = 0;
    for _ in 0..INSTANCES {
        let k = rng.gen_range(2..=4);
        let d = rng.gen_range(0.1..5.0);
        let eps = rng.gen_range(-20.0..20.0);
        let tau_a: Vec<f64> = (0..k).map(|_| rng.gen_range(20.0..80.0)).collect();
        let mut tau_b: Vec<f64> =
            tau_a.iter().map(|t| t + eps + rng.gen_range(-d..d) / C_M_PER_NS).collect();
        tau_b.reverse();
        let set = ObserverSets {
            a: tau_a.iter().map(|&t| MeasuredMpc::new(t)).collect(),
            b: tau_b.iter().map(|&t| MeasuredMpc::new(t)).collect(),
        };
        let obs = Observation { observers: vec![set] };
        let (want_d, _) = brute_force_noassoc(&tau_a, &tau_b);
        match estimate_distance_noassoc(&obs, None) {
            Ok(est) if (est.d_hat_m - want_d).abs() <= 1e-9 * want_d.max(1.0) => noassoc_ok += 1,
            _ => {}
        }
    }

    let mut grid_ok = 0;
    let grid_instances = 100;
    for _ in 0..grid_instances {
        let d = rng.gen_range(0.05..3.0);
        let k = rng.gen_range(2..=12);
        let sigma = rng.gen_range(0.02..0.3);
        let noise = Normal::new(0.0, sigma).unwrap();
        let deltas: Vec<f64> = (0..k).map(|_| rng.gen_range(-d..d) / C_M_PER_NS + noise.sample(&mut rng)).collect();
        let obs = DeltaObservation::new(vec![deltas.clone()]).with_sigmas(vec![vec![sigma; k]]);
        let est = estimate_distance_mle(&obs).unwrap();
        let at_est = distance_loglik(&obs, est.d_hat_m, est.eps_hat_ns.unwrap()).unwrap();
        let lo = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = deltas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let d_max = 2.0 * (C_M_PER_NS * (hi - lo) + 6.0 * C_M_PER_NS * sigma);
        let mut grid_best = f64::NEG_INFINITY;
        for i in 1..=GRID {
            let dg = d_max * i as f64 / GRID as f64;
            for j in 0..GRID {
                let eg = lo - 3.0 * sigma + (hi - lo + 6.0 * sigma) * j as f64 / (GRID - 1) as f64;
                grid_best = grid_best.max(distance_loglik(&obs, dg, eg).unwrap());
            }
        }
        if at_est >= grid_best - 1e-9 {
            grid_ok += 1;
        }
    }

    let pass = hungarian_ok == INSTANCES && noassoc_ok == INSTANCES && grid_ok == grid_instances;
    verdict(
        9,
        pass,
        &format!(
            "hungarian {hungarian_ok}/{INSTANCES}, no-association {noassoc_ok}/{INSTANCES}, Gaussian MLE vs {GRID}x{GRID} grid {grid_ok}/{grid_instances}"
        ),
    );
}

#[test]
fn criterion_10_geometry_invariants() {
    const TRIANGLES: usize = 10_000;
    const TOL: f64 = 1e-9;
    const K: usize = 100_000;
    const FROB_MAX: f64 = 0.02;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut point = |r: f64| Vec3::new(rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r));
    let mut worst: f64 = 0.0;
    let mut ok = 0;
    for _ in 0..TRIANGLES {
        let (a, b, s) = (point(5.0), point(5.0), point(20.0));
        let Ok(m) = mpc_pair_from_virtual_source(&s, &a, &b) else { continue };
        let d = b - a;
        let bound = C_M_PER_NS * (m.tau_b_ns - m.tau_a_ns).abs() - d.norm();
        let vector = (relpos_from_single_mpc(&m).unwrap() - d).norm();
        let proj = projection_residual(&m, &d, ProjectionMode::Exact).unwrap().abs();
        worst = worst.max(bound).max(vector).max(proj);
        if bound <= TOL && vector <= TOL && proj <= TOL {
            ok += 1;
        }
    }
    let mpcs: Vec<PairedMpc> = (0..K)
        .map(|_| {
            let e = uniform_direction(&mut rng);
            PairedMpc {
                observer: 0,
                tau_a_ns: 0.0,
                tau_b_ns: 0.0,
                dir_a: e,
                dir_b: e,
                sigma_a_ns: 0.0,
                sigma_b_ns: 0.0,
            }
        })
        .collect();
    let sys = build_projection_system(&mpcs, ProjectionMode::PlaneWave).unwrap();
    let gram = &sys.e * sys.e.transpose() / K as f64;
    let target = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0];
    let mut frob = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let t = if i == j { target[i] } else { 0.0 };
            frob += (gram[(i, j)] - t).powi(2);
        }
    }
    let frob = frob.sqrt();
    let pass = ok == TRIANGLES && frob < FROB_MAX;
    verdict(
        10,
        pass,
        &format!("{ok}/{TRIANGLES} triangles within {TOL} (worst {worst:.2e}); Frobenius deviation {frob:.4} (< {FROB_MAX}) at K={K}"),
    );
}

#[test]
fn criterion_11_break_even_thresholds() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/rss_breakpoints.csv");
    let mut rdr = csv::Reader::from_path(path).expect("breakpoint table");
    let (mut total, mut matched) = (0, 0);
    let mut alphas = std::collections::BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let alpha: f64 = rec[0].parse().unwrap();
        let sigma: f64 = rec[1].parse().unwrap();
        let k: u64 = rec[2].parse().unwrap();
        alphas.insert(alpha as i64);
        total += 1;
        if rss_beat_threshold(alpha, sigma).ok() == Some(k) {
            matched += 1;
        }
    }
    let flip = !toa_beat_criterion(18) && toa_beat_criterion(19);
    let pass = total > 0 && matched == total && alphas.len() == 3 && flip;
    verdict(
        11,
        pass,
        &format!("RSS breakpoints {matched}/{total} exact for alpha {alphas:?}; TOA criterion flips at 18->19: {flip}"),
    );
}

#[test]
fn criterion_12_estimate_from_mpc_file() {
    const TOL: f64 = 1e-6;
    let cfg = ChannelConfig {
        measurement_errors: false,
        clock_offset_std_ns: 5.0,
        ..Default::default()
    };
    let model = ChannelModel::new(cfg).unwrap();
    let truth = Vec3::new(1.2, -0.7, 0.4);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let scenario = model.sample_scenario(&truth, &mut rng).unwrap();
    let obs = scenario.observation();
    assert!(obs.observers.iter().all(|s| s.a.iter().chain(&s.b).all(|m| m.delay_ns >= 0.0)));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mpcs.csv");
    write_mpc_file(&obs, &path).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mpcrange"))
        .args(["estimate", "--mpcs"])
        .arg(&path)
        .args(["--estimators", "DD,TAU"])
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    for line in stdout.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let v: Vec<f64> = f[1..5].iter().map(|x| x.parse().unwrap()).collect();
        worst = worst
            .max((v[0] - truth.norm()).abs())
            .max((Vec3::new(v[1], v[2], v[3]) - truth).norm());
        rows += 1;
    }
    let pass = out.status.success() && rows == 2 && worst <= TOL;
    verdict(
        12,
        pass,
        &format!("exit {:?}, {rows} rows, worst deviation {worst:.2e} m (tol {TOL})", out.status.code()),
    );
}
