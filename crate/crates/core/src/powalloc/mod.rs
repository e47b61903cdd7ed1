//! QoS/SIC minimum power, water-filling of the residual budget across
//! clusters, the energy-efficiency objective and the OMA baseline.
//!
//! Inside a cluster every coefficient above the minima goes to the strongest
//! user, and the weaker users' minima are recomputed on top of it (the
//! cascade). Across clusters the residual is split so that every cluster that
//! receives power ends at the same marginal level `lambda`, the power needed
//! per extra bit. When all cascaded users are QoS-bound this level is the
//! fractional level `P_max 2^(sum R) / (rho gamma_1)` grown linearly in the
//! extra coefficient; otherwise it is computed numerically.

pub mod oracle;

use std::f64::consts::LN_2;

use crate::config::{AccessMode, Objective, SicGap};
use crate::error::{Error, Result};

/// One cluster as seen by the allocator.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    /// Effective gains `gamma`, sorted in decreasing order.
    pub gains: Vec<f64>,
    /// Share of time the cluster is on air (overflow rounds), before slot sharing.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocParams {
    pub p_max: f64,
    pub noise_power: f64,
    pub r_qos: f64,
    pub p_tol: f64,
    pub sic_gap: SicGap,
    pub objective: Objective,
    pub access: AccessMode,
    /// Raise the weaker users' minima when the strongest user gets extra power.
    pub cascade: bool,
    /// Fraction of time each sector is active, `1 / N_t`.
    pub slot_share: f64,
}

impl AllocParams {
    pub fn rho(&self) -> f64 {
        self.p_max / self.noise_power
    }

    /// SIC tolerance in the units of `rho * gamma * Omega`.
    pub fn sic_threshold(&self) -> f64 {
        match self.sic_gap {
            SicGap::NoiseNormalized => self.p_tol,
            SicGap::Absolute => self.p_tol / self.noise_power,
        }
    }

    /// Factor turning `gamma * (Omega_l - S_{l-1})` into the SIC margin's power units.
    pub fn sic_scale(&self) -> f64 {
        match self.sic_gap {
            SicGap::NoiseNormalized => self.rho(),
            SicGap::Absolute => self.p_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserPower {
    pub cluster: usize,
    /// 1-based decoding rank.
    pub rank: usize,
    pub gamma: f64,
    pub omega_min: f64,
    pub omega: f64,
    /// bit/s/Hz while the cluster is on air; OMA rates include the `1/L` time share.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolution {
    pub users: Vec<UserPower>,
    /// Watts, `P_max * sum(Omega_min)`.
    pub p_req: f64,
    /// Final marginal level in watts; `NaN` when infeasible.
    pub water_level: f64,
    /// bit/s/Hz, time- and slot-weighted.
    pub sum_rate: f64,
    /// bit/s/Hz per watt of transmitted power.
    pub energy_efficiency: f64,
    pub total_omega: f64,
    pub feasible: bool,
}

/// Minimum coefficients of one ordered cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct Minima {
    pub omega_min: Vec<f64>,
    pub omega_qos: Vec<f64>,
    /// `omega_sic[0]` is 0; the strongest user has no SIC condition.
    pub omega_sic: Vec<f64>,
}

impl Minima {
    pub fn total(&self) -> f64 {
        self.omega_min.iter().sum()
    }
}

/// Sequential minima in `a = rho * gamma` units with SIC threshold `tau`
/// (`Omega^SIC_l = S_{l-1} + tau / a_{l-1}`).
pub fn min_coefficients_scaled(a: &[f64], r_qos: f64, tau: f64) -> Minima {
    let q = r_qos.exp2() - 1.0;
    let mut out = Minima { omega_min: vec![], omega_qos: vec![], omega_sic: vec![] };
    let mut s = 0.0;
    for l in 0..a.len() {
        let qos = q * (s + 1.0 / a[l]);
        let sic = if l == 0 { 0.0 } else { s + tau / a[l - 1] };
        let m = if l == 0 { qos } else { qos.max(sic) };
        out.omega_qos.push(qos);
        out.omega_sic.push(sic);
        out.omega_min.push(m);
        s += m;
    }
    out
}

/// Minimum coefficients for gains `gamma` (sorted decreasing); fails when they
/// alone exceed the budget.
pub fn min_coefficients(
    gains: &[f64],
    rho: f64,
    r_qos: f64,
    p_tol: f64,
    p_max: f64,
    sic_gap: SicGap,
) -> Result<Minima> {
    let tau = match sic_gap {
        SicGap::NoiseNormalized => p_tol,
        SicGap::Absolute => p_tol * rho / p_max,
    };
    let a: Vec<f64> = gains.iter().map(|g| rho * g).collect();
    let m = min_coefficients_scaled(&a, r_qos, tau);
    let required = m.total();
    if required.is_nan() || required > 1.0 {
        return Err(Error::Infeasible { required });
    }
    Ok(m)
}

/// `P_max 2^(sum R) / (rho gamma_1)`.
pub fn fractional_level(rho_gamma_1: f64, rate_sum: f64, p_max: f64) -> f64 {
    p_max * rate_sum.exp2() / rho_gamma_1
}

/// Classic fill-to-level: `sum [lambda - H]^+ = p_remaining`. Returns `lambda`
/// and the coefficient increments `[lambda - H]^+ / P_max`.
pub fn water_fill_levels(levels: &[f64], p_remaining: f64, p_max: f64) -> (f64, Vec<f64>) {
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut lambda, mut top) = (sorted[0], sorted[0]);
    let mut acc = 0.0;
    for k in 0..sorted.len() {
        acc += sorted[k];
        let candidate = (p_remaining + acc) / (k + 1) as f64;
        let next = sorted.get(k + 1).copied().unwrap_or(f64::INFINITY);
        // Rounding must not leak an ulp of power into the next level.
        if candidate <= next * (1.0 + 4.0 * f64::EPSILON) {
            lambda = candidate.min(next);
            top = sorted[k];
            break;
        }
    }
    let inc = levels
        .iter()
        .map(|&h| if h <= top { (lambda - h).max(0.0) / p_max } else { 0.0 })
        .collect();
    (lambda, inc)
}

/// Energy efficiency as a function of the water level with every cluster
/// charged only for its strongest user:
/// `(sum R_min + sum [log2 lambda - log2 H]^+) / (P_req + sum [lambda - H]^+)`.
pub fn energy_efficiency(r_min_sum: f64, lambda: f64, levels: &[f64], p_req: f64) -> f64 {
    let gain: f64 = levels.iter().map(|&h| (lambda.log2() - h.log2()).max(0.0)).sum();
    let extra: f64 = levels.iter().map(|&h| (lambda - h).max(0.0)).sum();
    (r_min_sum + gain) / (p_req + extra)
}

/// Maximizes [`energy_efficiency`] over `[min H, lambda_budget]`, where the
/// budget level spends `P_max - P_req`. Golden-section search, run to
/// well below `1e-8 * lambda_budget`.
pub fn max_ee_level(levels: &[f64], p_req: f64, p_max: f64, r_min_sum: f64) -> f64 {
    let lo = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let (hi, _) = water_fill_levels(levels, (p_max - p_req).max(0.0), p_max);
    golden_max(lo, hi, 1e-14 * hi, |l| energy_efficiency(r_min_sum, l, levels, p_req))
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximizer of a unimodal function on `[lo, hi]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut lo: f64, mut hi: f64, tol: f64, mut f: F) -> f64 {
    if hi <= lo {
        return lo;
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
        if hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Rate, consumption and their slopes in the strongest user's extra coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub omegas: Vec<f64>,
    /// Unweighted `sum log2(...)` over the cluster.
    pub rate: f64,
    pub d_rate: f64,
    /// `sum Omega`.
    pub consumption: f64,
    pub d_consumption: f64,
}

/// A cluster (or, for OMA, a single time-sharing user) prepared for filling.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    /// `rho * gamma`, decreasing.
    pub a: Vec<f64>,
    pub r_qos: f64,
    pub tau: f64,
    /// Weight of `rate` in the objective.
    pub weight: f64,
    pub p_max: f64,
    pub cascade: bool,
    pub minima: Minima,
    /// `(H, k)` when the marginal level is exactly `H + P_max k x`.
    linear: Option<(f64, f64)>,
}

impl ClusterModel {
    pub fn new(a: Vec<f64>, r_qos: f64, tau: f64, weight: f64, p_max: f64, cascade: bool) -> Self {
        let minima = min_coefficients_scaled(&a, r_qos, tau);
        let q = r_qos.exp2() - 1.0;
        let qos_bound = (1..a.len()).all(|l| minima.omega_qos[l] >= minima.omega_sic[l]);
        // QoS-bound users stay QoS-bound as the interference grows when q >= 1.
        // Without the cascade the level is the fixed fractional level by construction.
        let linear = (!cascade || a.len() == 1 || (q >= 1.0 && qos_bound)).then(|| {
            let k = if cascade { (1.0 + q).powi(a.len() as i32 - 1) } else { 1.0 };
            let mut s = 0.0;
            let mut rate_sum = 0.0;
            for (l, &om) in minima.omega_min.iter().enumerate() {
                rate_sum += (a[l] * om / (1.0 + a[l] * s)).ln_1p() / LN_2;
                s += om;
            }
            (fractional_level(a[0], rate_sum, p_max), k)
        });
        Self { a, r_qos, tau, weight, p_max, cascade, minima, linear }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Fractional level `P_max 2^(sum R^min) / a_1` of the minimum allocation.
    pub fn fractional_level(&self) -> f64 {
        let rates: f64 = self.profile(0.0).rate;
        fractional_level(self.a[0], rates, self.p_max)
    }

    /// Coefficients and slopes with `x` extra on the strongest user.
    pub fn profile(&self, x: f64) -> Profile {
        let q = self.r_qos.exp2() - 1.0;
        let a = &self.a;
        let o1 = self.minima.omega_min[0] + x;
        let mut omegas = vec![o1];
        let mut rate = (a[0] * o1).ln_1p() / LN_2;
        let mut d_rate = a[0] / (LN_2 * (1.0 + a[0] * o1));
        let (mut s, mut ds) = (o1, 1.0);
        for l in 1..a.len() {
            let (om, dom) = if self.cascade {
                let qos = q * (s + 1.0 / a[l]);
                let sic = s + self.tau / a[l - 1];
                if qos > sic || (qos == sic && q >= 1.0) {
                    (qos, q * ds)
                } else {
                    (sic, ds)
                }
            } else {
                (self.minima.omega_min[l], 0.0)
            };
            let num = 1.0 + a[l] * (s + om);
            let den = 1.0 + a[l] * s;
            rate += (num / den).log2();
            d_rate += (a[l] * (ds + dom) / num - a[l] * ds / den) / LN_2;
            omegas.push(om);
            s += om;
            ds += dom;
        }
        Profile { omegas, rate, d_rate, consumption: s, d_consumption: ds }
    }

    /// Weighted marginal level `P_max F'(x) / (ln2 w B'(x))` in watts per bit.
    pub fn level(&self, x: f64) -> f64 {
        if let Some((h, k)) = self.linear {
            return (h + self.p_max * k * x) / self.weight;
        }
        let p = self.profile(x);
        if p.d_rate <= 0.0 {
            return f64::INFINITY;
        }
        self.p_max * p.d_consumption / (LN_2 * self.weight * p.d_rate)
    }

    /// Extra coefficient that brings the weighted level up to `lambda`,
    /// capped at the whole budget.
    pub fn extra_at_level(&self, lambda: f64) -> f64 {
        if let Some((h, k)) = self.linear {
            return ((lambda * self.weight - h) / (self.p_max * k)).clamp(0.0, 1.0);
        }
        if self.level(0.0) >= lambda {
            return 0.0;
        }
        if self.level(1.0) <= lambda {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.level(mid) < lambda {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-18 + 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Extra coefficient on the strongest user that makes the cluster consume `budget`.
    pub fn extra_for_budget(&self, budget: f64) -> f64 {
        let base = self.minima.total();
        if budget <= base {
            return 0.0;
        }
        if let Some((_, k)) = self.linear {
            return (budget - base) / k;
        }
        let (mut lo, mut hi) = (0.0, budget - base);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.profile(mid).consumption < budget {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-18 + 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Extra coefficients at level `lambda` and the total consumption they imply.
fn fill_at(models: &[ClusterModel], lambda: f64) -> (Vec<f64>, f64) {
    let xs: Vec<f64> = models.iter().map(|m| m.extra_at_level(lambda)).collect();
    let total = models.iter().zip(&xs).map(|(m, &x)| m.profile(x).consumption).sum();
    (xs, total)
}

/// Smallest level at which some cluster starts receiving extra power.
pub fn base_level(models: &[ClusterModel]) -> f64 {
    models.iter().map(|m| m.level(0.0)).fold(f64::INFINITY, f64::min)
}

/// Level that spends the whole budget, with the extra coefficients.
pub fn water_fill(models: &[ClusterModel]) -> (f64, Vec<f64>) {
    let lo0 = base_level(models);
    let (mut xs, total) = fill_at(models, lo0);
    if total >= 1.0 || !lo0.is_finite() {
        return (lo0, xs);
    }
    let (mut lo, mut hi) = (lo0, lo0 * 2.0);
    while fill_at(models, hi).1 < 1.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    for _ in 0..300 {
        let mid = if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        if fill_at(models, mid).1 < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    xs = fill_at(models, lo).0;
    // Spend the sub-ulp remainder on the cluster with the largest share.
    let total: f64 = models.iter().zip(&xs).map(|(m, &x)| m.profile(x).consumption).sum();
    if let Some((i, _)) = xs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
        let slope = models[i].profile(xs[i]).d_consumption;
        xs[i] += (1.0 - total) / slope;
    }
    (lo, xs)
}

/// Exact energy efficiency `sum w R / (P_max sum Omega)` after filling to `lambda`.
fn ee_at(models: &[ClusterModel], lambda: f64) -> f64 {
    let (xs, total) = fill_at(models, lambda);
    let rate: f64 = models.iter().zip(&xs).map(|(m, &x)| m.weight * m.profile(x).rate).sum();
    if total <= 0.0 {
        return 0.0;
    }
    rate / total
}

/// Level in `[base, budget]` that maximizes the exact energy efficiency.
pub fn max_ee_fill(models: &[ClusterModel]) -> (f64, Vec<f64>) {
    let (budget_level, budget_xs) = water_fill(models);
    let lo = base_level(models);
    if !(budget_level > lo) {
        return (budget_level, budget_xs);
    }
    // Search in log level; the span routinely covers many decades.
    let t = golden_max(lo.ln(), budget_level.ln(), 1e-12, |t| ee_at(models, t.exp()));
    let lambda = t.exp();
    let best = [lo, lambda, budget_level]
        .into_iter()
        .max_by(|&x, &y| ee_at(models, x).total_cmp(&ee_at(models, y)))
        .unwrap_or(lambda);
    if best == budget_level {
        (budget_level, budget_xs)
    } else {
        (best, fill_at(models, best).0)
    }
}

/// Full allocation for one drop.
pub fn allocate(clusters: &[ClusterSpec], params: &AllocParams) -> PowerSolution {
    let rho = params.rho();
    let tau = params.sic_threshold();
    // For OMA each user is its own single-user model on a 1/L time share.
    let mut models = Vec::new();
    let mut owners: Vec<(usize, Option<usize>)> = Vec::new();
    for (c, spec) in clusters.iter().enumerate() {
        let a: Vec<f64> = spec.gains.iter().map(|g| rho * g).collect();
        match params.access {
            AccessMode::Noma => {
                models.push(ClusterModel::new(a, params.r_qos, tau, spec.weight, params.p_max, params.cascade));
                owners.push((c, None));
            }
            AccessMode::Oma => {
                let l = a.len() as f64;
                for (u, &au) in a.iter().enumerate() {
                    models.push(ClusterModel::new(
                        vec![l * au],
                        l * params.r_qos,
                        tau,
                        spec.weight / l,
                        params.p_max,
                        true,
                    ));
                    owners.push((c, Some(u)));
                }
            }
        }
    }
    let required: f64 = models.iter().map(|m| m.minima.total()).sum();
    let feasible = required <= 1.0 && required.is_finite();
    let (lambda, xs) = if models.is_empty() {
        (f64::NAN, vec![])
    } else if !feasible {
        (f64::NAN, vec![0.0; models.len()])
    } else {
        match params.objective {
            Objective::MaxSumRate => water_fill(&models),
            Objective::MaxEe => max_ee_fill(&models),
        }
    };

    let mut users = Vec::new();
    let mut weighted = 0.0;
    let mut total_omega = 0.0;
    for ((m, &x), &(c, slot)) in models.iter().zip(&xs).zip(&owners) {
        let p = m.profile(x);
        let rate_scale = match slot {
            Some(_) => 1.0 / clusters[c].gains.len() as f64,
            None => 1.0,
        };
        let mut s = 0.0;
        for (l, &om) in p.omegas.iter().enumerate() {
            let r = (m.a[l] * om / (1.0 + m.a[l] * s)).ln_1p() / LN_2 * rate_scale;
            let rank = slot.unwrap_or(l) + 1;
            let gamma = clusters[c].gains[rank - 1];
            users.push(UserPower {
                cluster: c,
                rank,
                gamma,
                omega_min: m.minima.omega_min[l],
                omega: om,
                rate: r,
            });
            weighted += clusters[c].weight * r;
            total_omega += om;
            s += om;
        }
    }
    let sum_rate = if feasible { weighted * params.slot_share } else { f64::NAN };
    let energy_efficiency = if feasible && total_omega > 0.0 {
        sum_rate / (params.p_max * total_omega)
    } else {
        f64::NAN
    };
    PowerSolution {
        users,
        p_req: params.p_max * required,
        water_level: lambda,
        sum_rate,
        energy_efficiency,
        total_omega,
        feasible,
    }
}

/// Rates at the solution meet the QoS target and every SIC margin holds.
pub fn check_constraints(solution: &PowerSolution, params: &AllocParams) -> (f64, f64) {
    let mut worst_rate = f64::INFINITY;
    let mut worst_sic = f64::INFINITY;
    let mut by_cluster: std::collections::BTreeMap<usize, Vec<&UserPower>> = Default::default();
    for u in &solution.users {
        worst_rate = worst_rate.min(u.rate - params.r_qos);
        by_cluster.entry(u.cluster).or_default().push(u);
    }
    if params.access == AccessMode::Noma {
        for users in by_cluster.values() {
            let omegas: Vec<f64> = users.iter().map(|u| u.omega).collect();
            let gammas: Vec<f64> = users.iter().map(|u| u.gamma).collect();
            let check = crate::transceiver::sic_power_check(
                &omegas,
                &gammas,
                params.sic_scale(),
                params.p_tol,
                params.p_max,
            );
            for m in check.margins {
                worst_sic = worst_sic.min(m);
            }
        }
    }
    (worst_rate, worst_sic)
}
