//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::{LN_2, TAU};
use std::process::ExitCode;
use std::time::Instant;

use hapsim::channel::{complex_normal, correlation_matrix, ChannelParams, KarhunenLoeve};
use hapsim::config::{AccessMode, Objective, ScenarioConfig, SicGap};
use hapsim::harness::{alloc_params, output, resolve_workers, run_drop, run_sweep, Estimate, SweepResult, SweepSpec};
use hapsim::powalloc::oracle::{cluster_rate, two_cluster_oracle};
use hapsim::powalloc::{allocate, AllocParams, ClusterModel, ClusterSpec};
use hapsim::topology::{assign_time_slots, n_time_slots};
use hapsim::transceiver::{detection_vector, effective_gain, nulling_residual, sic_power_check, user_rate};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Composite trapezoid of `E[exp(j 2pi d_v k sin(theta + delta))]`, `delta ~ N(0, sigma^2)`,
/// over `[-8 sigma, 8 sigma]`, for lags `0..n_lags` at once.
fn trapezoid_lags(d_v: f64, theta: f64, sigma: f64, n_lags: usize, points: usize) -> Vec<Complex64> {
    let lo = -8.0 * sigma;
    let h = 16.0 * sigma / (points - 1) as f64;
    let norm = 1.0 / (sigma * TAU.sqrt());
    let mut acc = vec![Complex64::new(0.0, 0.0); n_lags];
    for i in 0..points {
        let delta = lo + h * i as f64;
        let mut w = norm * (-0.5 * (delta / sigma).powi(2)).exp() * h;
        if i == 0 || i == points - 1 {
            w *= 0.5;
        }
        let z = Complex64::from_polar(1.0, TAU * d_v * (theta + delta).sin());
        let mut zk = Complex64::new(w, 0.0);
        for a in acc.iter_mut() {
            *a += zk;
            zk *= z;
        }
    }
    acc
}

fn corr_params(d_v: f64, theta: f64, sigma: f64, beta: f64) -> ChannelParams {
    ChannelParams {
        sector_id: 0,
        sector_boresight_azimuth: 0.0,
        beta_los: 0.0,
        beta_nlos: beta,
        los_indicator: false,
        elevation: theta,
        d_v,
        sigma_theta: sigma,
    }
}

fn c1_correlation_kernel() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let start = Instant::now();
    let (mut worst_err, mut worst_herm, mut worst_eig) = (0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..100 {
        let d_v = rng.random_range(0.5..2.0);
        let theta = rng.random_range(11.0f64..90.0).to_radians();
        let sigma = rng.random_range(1.0f64..10.0).to_radians();
        let beta = 10f64.powf(rng.random_range(-14.0..-8.0));
        let m = [4, 6, 8][rng.random_range(0..3)];
        let c = correlation_matrix(&corr_params(d_v, theta, sigma, beta), m).map_err(|e| e.to_string())?;
        let lags = trapezoid_lags(d_v, theta, sigma, m, 1_000_000);
        for a in 0..m {
            for b in 0..m {
                let want = if a >= b { lags[a - b] } else { lags[b - a].conj() } * beta;
                worst_err = worst_err.max((c[(a, b)] - want).norm() / beta);
                worst_herm = worst_herm.max((c[(a, b)] - c[(b, a)].conj()).norm() / beta);
            }
        }
        let eig = c.symmetric_eigen().eigenvalues;
        let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        worst_eig = worst_eig.min(min / max);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst_err < 1e-7 && worst_herm == 0.0 && worst_eig >= -1e-10 && secs < 30.0,
        format!("max |err|/beta {worst_err:.2e}, hermitian gap {worst_herm:.1e}, min eig/max {worst_eig:.2e}, {secs:.1} s"),
    )
}

fn c2_kl_sampling() -> Outcome {
    let start = Instant::now();
    let c = correlation_matrix(&corr_params(2.0, 30f64.to_radians(), 5f64.to_radians(), 1.0), 4)
        .map_err(|e| e.to_string())?;
    let kl = KarhunenLoeve::new(&c).map_err(|e| e.to_string())?;
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let samples = kl.sample(&DVector::zeros(4), false, n, &mut rng);
    let emp = DMatrix::from_fn(4, 4, |a, b| {
        let s: Complex64 = (0..n).map(|i| samples[(i, a)] * samples[(i, b)].conj()).sum();
        s / n as f64
    });
    let err = (&emp - &c).norm() / c.norm();
    let secs = start.elapsed().as_secs_f64();
    ensure(err < 0.05 && secs < 10.0, format!("relative Frobenius error {err:.4}, {secs:.1} s"))
}

/// `||(I - P) h_m||^2` with `P` the projector onto the other columns.
fn projection_gain(h: &DMatrix<Complex64>, m: usize) -> f64 {
    let others: Vec<usize> = (0..h.ncols()).filter(|&k| k != m).collect();
    let b = DMatrix::from_fn(h.nrows(), others.len(), |i, j| h[(i, others[j])]);
    let gram = (b.adjoint() * &b).try_inverse().expect("full column rank");
    let p = &b * gram * b.adjoint();
    let hm = h.column(m).into_owned();
    let r = &hm - p * &hm;
    r.norm_squared()
}

fn c3_zero_forcing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut worst_res, mut worst_gamma) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let h = DMatrix::from_fn(4, 4, |_, _| complex_normal(&mut rng));
        let m = rng.random_range(0..4);
        let v = detection_vector(&h, m).map_err(|e| e.to_string())?;
        let spectral = h.clone().svd(false, false).singular_values.max();
        worst_res = worst_res.max(nulling_residual(&v, &h, m) / spectral);
        let g = effective_gain(&v, &h, m);
        let want = projection_gain(&h, m);
        worst_gamma = worst_gamma.max((g - want).abs() / want);
    }
    ensure(
        worst_res < 1e-9 && worst_gamma < 1e-10,
        format!("max residual/||H|| {worst_res:.2e}, max gamma rel err {worst_gamma:.2e}"),
    )
}

fn c4_constraints() -> Outcome {
    let cfg = ScenarioConfig::preset("18x4x2").map_err(|e| e.to_string())?;
    let rho = cfg.rho();
    let (mut feasible, mut index) = (0, 0u64);
    let (mut worst_rate, mut worst_sic, mut worst_total) = (f64::INFINITY, f64::INFINITY, 0.0f64);
    while feasible < 1000 && index < 10_000 {
        let out = run_drop(&cfg, index).map_err(|e| e.to_string())?;
        index += 1;
        if !out.feasible() {
            continue;
        }
        feasible += 1;
        let params = alloc_params(&cfg, out.plan.n_time_slots);
        let sol = &out.solution;
        worst_total = worst_total.max((sol.total_omega - 1.0).abs());
        let mut c = 0;
        while c < sol.users.len() {
            let cluster: Vec<_> = sol.users[c..].iter().take_while(|u| u.cluster == sol.users[c].cluster).collect();
            let omegas: Vec<f64> = cluster.iter().map(|u| u.omega).collect();
            let gammas: Vec<f64> = cluster.iter().map(|u| u.gamma).collect();
            for l in 0..omegas.len() {
                worst_rate = worst_rate.min(user_rate(gammas[l], omegas[l], &omegas[..l], rho) - cfg.r_qos);
            }
            let sic = sic_power_check(&omegas, &gammas, params.sic_scale(), params.p_tol, params.p_max);
            worst_sic = sic.margins.iter().copied().fold(worst_sic, f64::min);
            c += cluster.len();
        }
    }
    ensure(
        feasible == 1000 && worst_rate >= -1e-9 && worst_sic >= -1e-9 * cfg.p_max && worst_total <= 1e-9,
        format!(
            "{feasible} feasible of {index} drops, min rate - R {worst_rate:.2e}, min SIC margin {worst_sic:.3e}, max |sum Omega - 1| {worst_total:.1e}"
        ),
    )
}

fn c5_transfer_to_strongest() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut checked, mut failures) = (0, 0);
    while checked < 10_000 {
        let l = rng.random_range(2..=3);
        let mut a: Vec<f64> = (0..l).map(|_| 10f64.powf(rng.random_range(0.0..3.0))).collect();
        a.sort_by(|x, y| y.total_cmp(x));
        let r: f64 = rng.random_range(0.1..2.0);
        let tau: f64 = rng.random_range(0.0..1.0);
        let q = r.exp2() - 1.0;
        let (mut om, mut mins, mut s) = (Vec::new(), Vec::new(), 0.0);
        for k in 0..l {
            let mut m = q * (s + 1.0 / a[k]);
            if k > 0 {
                m = m.max(s + tau / a[k - 1]);
            }
            let extra = rng.random_range(0.0..0.5);
            mins.push(m);
            om.push(m + extra);
            s += m + extra;
        }
        let from = rng.random_range(1..l);
        let residual = om[from] - mins[from];
        if residual <= 1e-9 || a[0] <= a[from] * (1.0 + 1e-9) {
            continue;
        }
        checked += 1;
        let eps = rng.random_range(1e-3..1.0) * residual;
        let mut moved = om.clone();
        moved[from] -= eps;
        moved[0] += eps;
        if cluster_rate(&a, &moved) <= cluster_rate(&a, &om) {
            failures += 1;
        }
    }
    ensure(failures == 0, format!("{checked} transfers, {failures} without a strict rate increase"))
}

fn c6_two_cluster_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let step = 1e-3;
    let (mut n, mut worst_gap, mut worst_shift, mut shifts) = (0, f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
    let mut failures = 0;
    while n < 1000 {
        let r = rng.random_range(0.25..1.5);
        let tau = rng.random_range(0.0..0.5);
        let gains: Vec<Vec<f64>> = (0..2)
            .map(|_| {
                let l = rng.random_range(1..=2);
                let mut g: Vec<f64> = (0..l).map(|_| 10f64.powf(rng.random_range(0.5..2.0))).collect();
                g.sort_by(|x, y| y.total_cmp(x));
                g
            })
            .collect();
        let params = AllocParams {
            p_max: 1.0,
            noise_power: 1.0,
            r_qos: r,
            p_tol: tau,
            sic_gap: SicGap::NoiseNormalized,
            objective: Objective::MaxSumRate,
            access: AccessMode::Noma,
            cascade: true,
            slot_share: 1.0,
        };
        let specs: Vec<ClusterSpec> = gains.iter().map(|g| ClusterSpec { gains: g.clone(), weight: 1.0 }).collect();
        let sol = allocate(&specs, &params);
        if !sol.feasible || sol.p_req > 0.8 {
            continue;
        }
        n += 1;
        let oracle = two_cluster_oracle([(&gains[0], 1.0), (&gains[1], 1.0)], r, tau, step);
        // Rate is Lipschitz in each coefficient with constant a_l / ln 2.
        let bound: f64 = gains.iter().flatten().map(|a| step * a / LN_2).sum();
        let gap = oracle - sol.sum_rate;
        worst_gap = worst_gap.max(gap / bound);
        if gap > bound {
            failures += 1;
        }
        let models: Vec<ClusterModel> = gains.iter().map(|g| ClusterModel::new(g.clone(), r, tau, 1.0, 1.0, true)).collect();
        let used0: f64 = sol.users.iter().filter(|u| u.cluster == 0).map(|u| u.omega).sum();
        for dp in [-0.05, -0.01, 0.01, 0.05] {
            let budgets = [used0 + dp, 1.0 - used0 - dp];
            if models.iter().zip(&budgets).any(|(m, &b)| b < m.minima.total()) {
                continue;
            }
            shifts += 1;
            let rate: f64 = models.iter().zip(&budgets).map(|(m, &b)| m.profile(m.extra_for_budget(b)).rate).sum();
            worst_shift = worst_shift.max(rate - sol.sum_rate);
            if rate > sol.sum_rate + 1e-12 {
                failures += 1;
            }
        }
    }
    ensure(
        failures == 0,
        format!("{n} instances, max (oracle - alg)/bound {worst_gap:.3}, {shifts} shifts, max shift gain {worst_shift:.2e}"),
    )
}

fn p_max_values() -> Vec<String> {
    (0..10).map(|i| format!("{}", 30.0 + 20.0 * i as f64 / 9.0)).collect()
}

fn sweep(base: &ScenarioConfig, key: &str, values: &[String]) -> Result<SweepResult, String> {
    let spec = SweepSpec {
        base_config: base.clone(),
        swept_parameter: key.into(),
        values: values.to_vec(),
        n_drops: 200,
        confidence: 0.95,
        workers: resolve_workers(1),
    };
    run_sweep(&spec).map_err(|e| e.to_string())
}

fn ee(result: &SweepResult) -> Vec<Estimate> {
    result.points.iter().map(|p| p.estimate("energy_efficiency")).collect()
}

fn overlaps(x: &Estimate, y: &Estimate) -> bool {
    (x.mean - y.mean).abs() <= x.ci_halfwidth + y.ci_halfwidth
}

/// `x` above `y` with non-overlapping intervals.
fn above(x: &Estimate, y: &Estimate) -> bool {
    x.mean - x.ci_halfwidth > y.mean + y.ci_halfwidth
}

fn c7_ee_shape() -> Outcome {
    let start = Instant::now();
    let mut base = ScenarioConfig::preset("18x4x2").map_err(|e| e.to_string())?;
    let values = p_max_values();
    base.objective = Objective::MaxEe;
    let max_ee = sweep(&base, "p_max_dbm", &values)?;
    base.objective = Objective::MaxSumRate;
    let max_rate = sweep(&base, "p_max_dbm", &values)?;
    // Saturated: no feasible drop spends the whole budget.
    let saturated = max_ee.points.iter().position(|p| {
        p.drops.iter().filter(|d| d.feasible).all(|d| d.sum_rate / d.energy_efficiency < p.config.p_max * (1.0 - 1e-9))
    });
    let (e, r) = (ee(&max_ee), ee(&max_rate));
    let Some(first) = saturated else {
        return Err("no saturated point".into());
    };
    let constant = e[first..].iter().all(|x| overlaps(x, &e[first]));
    let spread = e[first..].iter().map(|x| (x.mean - e[first].mean).abs()).fold(0.0, f64::max);
    let pointwise = e.iter().zip(&r).all(|(x, y)| x.mean >= y.mean);
    let per_drop = max_ee.points.iter().zip(&max_rate.points).all(|(p, q)| {
        p.drops.iter().zip(&q.drops).all(|(a, b)| {
            !a.feasible || a.energy_efficiency >= b.energy_efficiency * (1.0 - 1e-9)
        })
    });
    let secs = start.elapsed().as_secs_f64();
    ensure(
        constant && pointwise && per_drop && secs < 300.0,
        format!(
            "saturated from point {first}, max_ee EE {:.4} (max drift {spread:.2e}), max_sum_rate EE {:.4} .. {:.4}, dominance {}, {secs:.1} s",
            e[first].mean,
            r[0].mean,
            r[9].mean,
            pointwise && per_drop
        ),
    )
}

/// Every sweep of the trend suite, in a fixed order.
fn trend_suite() -> Result<Vec<(&'static str, SweepResult)>, String> {
    let base = ScenarioConfig::preset("18x4x2").map_err(|e| e.to_string())?;
    let wide = ScenarioConfig::preset("9x8x2").map_err(|e| e.to_string())?;
    let with = |cfg: &ScenarioConfig, key: &str, value: &str| {
        let mut c = cfg.clone();
        c.set(key, value).map(|_| c).map_err(|e| e.to_string())
    };
    let p = p_max_values();
    let r_min: Vec<String> = ["1", "3", "5", "6", "6.5", "7", "7.25", "7.5", "7.75", "8"].map(String::from).to_vec();
    Ok(vec![
        ("baseline", sweep(&base, "p_max_dbm", &p)?),
        ("uncorrelated", sweep(&with(&base, "spatial_mode", "uncorrelated")?, "p_max_dbm", &p)?),
        ("oma", sweep(&with(&base, "access_mode", "oma")?, "p_max_dbm", &p)?),
        ("half_wavelength", sweep(&with(&base, "antenna_spacing", "0.5")?, "p_max_dbm", &p)?),
        ("dual_18x4x2", sweep(&with(&base, "polarization", "dual")?, "p_max_dbm", &p)?),
        ("uni_9x8x2", sweep(&wide, "p_max_dbm", &p)?),
        ("dual_9x8x2", sweep(&with(&wide, "polarization", "dual")?, "p_max_dbm", &p)?),
        ("r_min", sweep(&with(&base, "p_max_dbm", "40")?, "r_qos", &r_min)?),
    ])
}

fn suite_csv(suite: &[(&str, SweepResult)]) -> Vec<u8> {
    let mut bytes = Vec::new();
    for (_, r) in suite {
        output::write_sweep_csv(r, &mut bytes).expect("in-memory write");
        output::write_drops_csv(r, &mut bytes).expect("in-memory write");
    }
    bytes
}

fn c8_trends(suite: &[(&str, SweepResult)], secs: f64) -> Outcome {
    let get = |name: &str| ee(&suite.iter().find(|(n, _)| *n == name).expect("suite entry").1);
    let count = |x: &[Estimate], y: &[Estimate]| x.iter().zip(y).filter(|(a, b)| above(a, b)).count();
    let base = get("baseline");
    let a = count(&get("uncorrelated"), &base);
    let b = count(&base, &get("oma"));
    let c = count(&base, &get("half_wavelength"));
    let (uni9, dual9, dual18) = (get("uni_9x8x2"), get("dual_9x8x2"), get("dual_18x4x2"));
    let d = count(&dual9, &uni9);
    let wider = (0..10).filter(|&i| dual9[i].mean - uni9[i].mean > dual18[i].mean - base[i].mean).count();

    // Flat until the first point clearly below the first one, then clearly below from there on.
    let rm = get("r_min");
    let brk = rm.iter().position(|x| above(&rm[0], x)).unwrap_or(rm.len());
    let conforming = (0..rm.len())
        .filter(|&i| if i < brk { overlaps(&rm[i], &rm[0]) } else { above(&rm[0], &rm[i]) })
        .count();
    let e = (2..=8).contains(&brk) && conforming >= 7;

    let ok = a >= 7 && b >= 7 && c >= 7 && d >= 7 && wider >= 7 && e && secs < 1200.0;
    ensure(
        ok,
        format!(
            "(a) {a}/10 (b) {b}/10 (c) {c}/10 (d) {d}/10 with wider gap at {wider}/10 (e) break at point {brk}, {conforming}/10 conforming; {secs:.1} s"
        ),
    )
}

fn c9_time_slots() -> Outcome {
    let cfg = ScenarioConfig::preset("18x4x2").map_err(|e| e.to_string())?;
    let n_t = n_time_slots(cfg.phi_3db, cfg.sector_width_deg());
    let slots = assign_time_slots(cfg.n_sectors, n_t);
    let first: Vec<usize> = (0..cfg.n_sectors).filter(|&s| slots[s] == 0).map(|s| s + 1).collect();
    ensure(n_t == 5 && first == [1, 6, 11, 16], format!("N_t = {n_t}, slot 1 sectors {first:?}"))
}

fn c10_determinism(first: &[u8]) -> Outcome {
    let again = trend_suite()?;
    let second = suite_csv(&again);
    ensure(first == second, format!("{} bytes per run, identical: {}", first.len(), first == second))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, start: Instant, outcome: Outcome| {
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {id:>2} {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {d} [{secs:.1} s]");
            }
        }
    };
    let simple: [(&str, fn() -> Outcome); 7] = [
        ("correlation kernel", c1_correlation_kernel),
        ("Karhunen-Loeve sampling", c2_kl_sampling),
        ("zero-forcing nulling", c3_zero_forcing),
        ("constraint satisfaction", c4_constraints),
        ("transfer to strongest user", c5_transfer_to_strongest),
        ("two-cluster optimality", c6_two_cluster_optimality),
        ("energy-efficiency shape", c7_ee_shape),
    ];
    for (i, (name, f)) in simple.iter().enumerate() {
        let t = Instant::now();
        report(i + 1, name, t, f());
    }
    let t = Instant::now();
    let suite = trend_suite();
    let secs = t.elapsed().as_secs_f64();
    let csv = suite.as_ref().map(|s| suite_csv(s)).ok();
    report(8, "trend suite", t, suite.and_then(|s| c8_trends(&s, secs)));
    let t = Instant::now();
    report(9, "time-slot arithmetic", t, c9_time_slots());
    let t = Instant::now();
    report(
        10,
        "determinism",
        t,
        csv.ok_or_else(|| "trend suite did not run".to_string()).and_then(|c| c10_determinism(&c)),
    );
    if failed == 0 {
        println!("all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
