//! Monte Carlo driver: one drop runs the whole link chain; a sweep repeats
//! drops over a list of values for one configuration key and aggregates.

pub mod output;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::channel::{
    self, db_to_gain, large_scale_fading, los_probability, los_steering, ChannelParams, KarhunenLoeve,
};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::{drop_users, UserGeometry};
use crate::powalloc::{allocate, AllocParams, ClusterSpec, PowerSolution};
use crate::topology::{build_plan, ClusterPlan};
use crate::transceiver::{detection_vector, effective_gain, MAX_RESAMPLES};

/// Environment variable that overrides the worker count.
pub const WORKERS_ENV: &str = "SIM_WORKERS";

/// Keys a sweep is normally run over; any key accepted by
/// [`ScenarioConfig::set`] works.
pub const SWEEP_PARAMS: [&str; 7] = [
    "p_max_dbm",
    "r_qos",
    "antenna_spacing",
    "spatial_mode",
    "polarization",
    "access_mode",
    "objective",
];

/// SplitMix64 finalizer; spreads `(master, drop)` into independent seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of drop `index` under `master`. It does not depend on the swept
/// value, so all sweep points see the same user drops and fading.
pub fn drop_seed(master: u64, index: u64) -> u64 {
    mix(mix(master) ^ index)
}

/// Stream 0 places users; stream `u + 1` belongs to user `u`.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Large-scale state of one user.
#[derive(Debug, Clone)]
pub struct UserLink {
    pub geometry: UserGeometry,
    pub params: ChannelParams,
    pub beta_los_db: f64,
    pub beta_nlos_db: f64,
    pub los_mean: DVector<Complex64>,
}

/// Small-scale state after detection.
#[derive(Debug, Clone)]
pub struct UserDetection {
    pub sample: DMatrix<Complex64>,
    pub gamma: f64,
    /// Redraws needed before the detection vector existed.
    pub resamples: usize,
}

/// Everything one drop produced.
#[derive(Debug, Clone)]
pub struct DropOutcome {
    pub index: u64,
    pub seed: u64,
    pub users: Vec<UserLink>,
    pub detections: Vec<UserDetection>,
    pub plan: ClusterPlan,
    /// `(sector, cluster index)` for each entry of `solution`'s cluster ids.
    pub cluster_keys: Vec<(usize, usize)>,
    pub solution: PowerSolution,
}

impl DropOutcome {
    pub fn feasible(&self) -> bool {
        self.solution.feasible
    }
}

/// Draws the large-scale parameters of every user from its own stream.
fn user_links(config: &ScenarioConfig, seed: u64, users: &[UserGeometry]) -> Vec<(UserLink, ChaCha8Rng)> {
    let delta = std::f64::consts::TAU / config.n_sectors as f64;
    users
        .iter()
        .map(|u| {
            let mut rng = stream(seed, u.user_id as u64 + 1);
            let los = rng.random::<f64>() < los_probability(u.elevation_deg(), config.kappa, config.omega);
            let shadow_los: f64 = rng.sample::<f64, _>(StandardNormal) * config.sigma_sf_los;
            let shadow_nlos: f64 = rng.sample::<f64, _>(StandardNormal) * config.sigma_sf_nlos;
            let los_db = large_scale_fading(u.slant_distance, config.carrier_freq, shadow_los);
            let nlos_db = large_scale_fading(u.slant_distance, config.carrier_freq, shadow_nlos);
            let sector = crate::topology::sector_of_azimuth(u.azimuth, config.n_sectors);
            let params = ChannelParams {
                sector_id: sector,
                sector_boresight_azimuth: (sector as f64 + 0.5) * delta,
                beta_los: db_to_gain(los_db),
                beta_nlos: db_to_gain(nlos_db),
                los_indicator: los,
                elevation: u.elevation,
                d_v: config.antenna_spacing,
                sigma_theta: config.sigma_theta.to_radians(),
            };
            let link = UserLink {
                geometry: *u,
                params,
                beta_los_db: los_db,
                beta_nlos_db: nlos_db,
                los_mean: los_steering(&params, config.elements_per_sector),
            };
            (link, rng)
        })
        .collect()
}

/// Allocator settings for a scenario whose sectors share `n_time_slots` slots.
pub fn alloc_params(config: &ScenarioConfig, n_time_slots: usize) -> AllocParams {
    AllocParams {
        p_max: config.p_max,
        noise_power: config.noise_power,
        r_qos: config.r_qos,
        p_tol: config.p_tol,
        sic_gap: config.sic_gap,
        objective: config.objective,
        access: config.access_mode,
        cascade: true,
        slot_share: 1.0 / n_time_slots as f64,
    }
}

/// Runs geometry, channel, clustering, detection and power allocation for one drop.
pub fn run_drop(config: &ScenarioConfig, index: u64) -> Result<DropOutcome> {
    let seed = drop_seed(config.seed, index);
    run_drop_seeded(config, index, seed).map_err(|e| Error::Drop { drop: index, source: Box::new(e) })
}

fn run_drop_seeded(config: &ScenarioConfig, index: u64, seed: u64) -> Result<DropOutcome> {
    let m = config.elements_per_sector;
    let n = config.user_antennas;
    let users = drop_users(config, &mut stream(seed, 0));
    let mut links = user_links(config, seed, &users);
    let means: Vec<DVector<Complex64>> = links.iter().map(|(l, _)| l.los_mean.clone()).collect();
    let plan = build_plan(&users, &means, config)?;

    let mut column = vec![0usize; users.len()];
    for c in plan.all_clusters() {
        for &u in &c.users {
            column[u] = c.column;
        }
    }
    let mut detections = Vec::with_capacity(users.len());
    for (u, (link, rng)) in links.iter_mut().enumerate() {
        let (corr, mean) = channel::channel_statistics(&link.params, m, config.spatial_mode, config.polarization)?;
        let kl = KarhunenLoeve::new(&corr)?;
        let mut resamples = 0;
        let detection = loop {
            let sample = kl.sample(&mean, link.params.los_indicator, n, rng);
            match detection_vector(&sample, column[u]) {
                Ok(v) => {
                    let gamma = effective_gain(&v, &sample, column[u]);
                    break UserDetection { sample, gamma, resamples };
                }
                Err(Error::RankDeficiency { .. }) if resamples < MAX_RESAMPLES => resamples += 1,
                Err(e) => return Err(e),
            }
        };
        detections.push(detection);
    }

    let mut specs = Vec::new();
    let mut cluster_keys = Vec::new();
    for c in plan.all_clusters() {
        let mut members = c.users.clone();
        members.sort_by(|&a, &b| detections[b].gamma.total_cmp(&detections[a].gamma).then(a.cmp(&b)));
        specs.push(ClusterSpec {
            gains: members.iter().map(|&u| detections[u].gamma).collect(),
            weight: plan.round_weight(c.sector),
        });
        cluster_keys.push((c.sector, c.index));
    }
    let solution = allocate(&specs, &alloc_params(config, plan.n_time_slots));
    Ok(DropOutcome {
        index,
        seed,
        users: links.into_iter().map(|(l, _)| l).collect(),
        detections,
        plan,
        cluster_keys,
        solution,
    })
}

/// User ids of each cluster in decoding order, matching `solution.users`.
pub fn decoding_order(outcome: &DropOutcome) -> Vec<usize> {
    let mut order = Vec::new();
    for c in outcome.plan.all_clusters() {
        let mut members = c.users.clone();
        members.sort_by(|&a, &b| {
            outcome.detections[b]
                .gamma
                .total_cmp(&outcome.detections[a].gamma)
                .then(a.cmp(&b))
        });
        order.extend(members);
    }
    order
}

/// Mean, normal-approximation half-width and count of the finite samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub ci_halfwidth: f64,
    pub n: usize,
}

pub fn estimate(samples: &[f64], confidence: f64) -> Estimate {
    let n = samples.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, ci_halfwidth: f64::NAN, n };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Estimate { mean, ci_halfwidth: 0.0, n };
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
    Estimate { mean, ci_halfwidth: z * (var / n as f64).sqrt(), n }
}

/// Metrics reported for every sweep point.
pub const METRICS: [&str; 3] = ["sum_rate", "energy_efficiency", "p_req"];

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base_config: ScenarioConfig,
    pub swept_parameter: String,
    pub values: Vec<String>,
    pub n_drops: u64,
    pub confidence: f64,
    pub workers: usize,
}

/// Per-drop summary kept by a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropMetrics {
    pub drop: u64,
    pub feasible: bool,
    pub sum_rate: f64,
    pub energy_efficiency: f64,
    pub p_req: f64,
    pub water_level: f64,
    pub n_time_slots: usize,
}

impl DropMetrics {
    pub fn of(outcome: &DropOutcome) -> Self {
        let s = &outcome.solution;
        Self {
            drop: outcome.index,
            feasible: s.feasible,
            sum_rate: s.sum_rate,
            energy_efficiency: s.energy_efficiency,
            p_req: s.p_req,
            water_level: s.water_level,
            n_time_slots: outcome.plan.n_time_slots,
        }
    }

    pub fn metric(&self, name: &str) -> f64 {
        match name {
            "sum_rate" => self.sum_rate,
            "energy_efficiency" => self.energy_efficiency,
            "p_req" => self.p_req,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: String,
    pub config: ScenarioConfig,
    pub drops: Vec<DropMetrics>,
    /// One estimate per entry of [`METRICS`], over feasible drops.
    pub estimates: Vec<Estimate>,
    pub outage_fraction: f64,
}

impl SweepPoint {
    pub fn estimate(&self, metric: &str) -> Estimate {
        let i = METRICS.iter().position(|&m| m == metric).expect("unknown metric");
        self.estimates[i]
    }

    pub fn all_infeasible(&self) -> bool {
        self.drops.iter().all(|d| !d.feasible)
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub parameter: String,
    pub points: Vec<SweepPoint>,
}

/// The configuration for one sweep value.
pub fn config_for(base: &ScenarioConfig, key: &str, value: &str) -> Result<ScenarioConfig> {
    let mut cfg = base.clone();
    cfg.set(key, value)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Worker count after the environment override; at least 1.
pub fn resolve_workers(requested: usize) -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(requested)
        .max(1)
}

/// Runs `f` over drops `0..n` on `workers` threads, collecting in drop order.
pub fn par_drops<T, F>(n: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

/// Aggregates per-drop metrics of one sweep value.
pub fn summarize(value: String, config: ScenarioConfig, drops: Vec<DropMetrics>, confidence: f64) -> SweepPoint {
    let feasible: Vec<&DropMetrics> = drops.iter().filter(|d| d.feasible).collect();
    let estimates = METRICS
        .iter()
        .map(|m| {
            let xs: Vec<f64> = feasible.iter().map(|d| d.metric(m)).collect();
            estimate(&xs, confidence)
        })
        .collect();
    let outage_fraction = if drops.is_empty() {
        0.0
    } else {
        (drops.len() - feasible.len()) as f64 / drops.len() as f64
    };
    SweepPoint { value, config, drops, estimates, outage_fraction }
}

/// Runs every sweep value. `inspect` sees each full drop outcome and its
/// results come back per value in drop order (used for the optional dumps).
pub fn run_sweep_with<S, F>(spec: &SweepSpec, inspect: F) -> Result<(SweepResult, Vec<Vec<S>>)>
where
    S: Send,
    F: Fn(usize, &DropOutcome) -> Result<S> + Sync + Send,
{
    if spec.values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    if spec.n_drops == 0 {
        return Err(Error::Config("sweep needs at least one drop".into()));
    }
    let configs: Vec<ScenarioConfig> = spec
        .values
        .iter()
        .map(|v| config_for(&spec.base_config, &spec.swept_parameter, v))
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(configs.len());
    let mut extras = Vec::with_capacity(configs.len());
    for (i, (value, cfg)) in spec.values.iter().zip(configs).enumerate() {
        let drops = par_drops(spec.n_drops, spec.workers, |d| {
            let outcome = run_drop(&cfg, d)?;
            Ok((DropMetrics::of(&outcome), inspect(i, &outcome)?))
        })?;
        let (metrics, extra): (Vec<_>, Vec<_>) = drops.into_iter().unzip();
        points.push(summarize(value.clone(), cfg, metrics, spec.confidence));
        extras.push(extra);
    }
    Ok((SweepResult { parameter: spec.swept_parameter.clone(), points }, extras))
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_with(spec, |_, _| Ok(())).map(|(r, _)| r)
}
