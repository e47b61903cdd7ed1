//! Sectorization, correlation-based NOMA clustering and time-slot reuse.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::config::{CorrelationForm, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::UserGeometry;

/// One NOMA cluster placed on a precoding column of its sector.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub sector: usize,
    /// Position in the sector's cluster list.
    pub index: usize,
    /// Time-sharing round inside the sector's slot.
    pub round: usize,
    /// Precoding column `m` used during that round.
    pub column: usize,
    /// Members in clustering order. Decoding order is set later from the effective gains.
    pub users: Vec<usize>,
}

/// The user grouping and scheduling of one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPlan {
    pub sector_of_user: Vec<usize>,
    /// Per sector, its clusters in formation order.
    pub clusters: Vec<Vec<Cluster>>,
    /// Time-sharing rounds per sector; at least 1.
    pub rounds: Vec<usize>,
    pub time_slot_of_sector: Vec<usize>,
    pub n_time_slots: usize,
}

impl ClusterPlan {
    /// Share of the sector's slot a cluster is active for.
    pub fn round_weight(&self, sector: usize) -> f64 {
        1.0 / self.rounds[sector] as f64
    }

    pub fn all_clusters(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().flatten()
    }

    /// `(cluster, slot)` of every user, indexed by user id.
    pub fn user_rows(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut rows: Vec<_> = self
            .all_clusters()
            .flat_map(|c| {
                let slot = self.time_slot_of_sector[c.sector];
                c.users.iter().map(move |&u| (u, c.sector, c.index, slot))
            })
            .collect();
        rows.sort_unstable();
        rows
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "user,sector,cluster,slot")?;
        for (u, s, c, t) in self.user_rows() {
            writeln!(out, "{u},{s},{c},{t}")?;
        }
        Ok(())
    }
}

/// 0-based sector index `floor(phi / delta)` for each user.
pub fn assign_sectors(users: &[UserGeometry], n_sectors: usize) -> Vec<usize> {
    users.iter().map(|u| sector_of_azimuth(u.azimuth, n_sectors)).collect()
}

pub fn sector_of_azimuth(azimuth: f64, n_sectors: usize) -> usize {
    let delta = TAU / n_sectors as f64;
    ((azimuth / delta).floor() as usize).min(n_sectors - 1)
}

/// Normalized inner-product magnitude between two LoS mean vectors.
pub fn los_correlation(
    a: &DVector<Complex64>,
    b: &DVector<Complex64>,
    form: CorrelationForm,
) -> Result<f64> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let inner = match form {
        CorrelationForm::Hermitian => a.dotc(b),
        CorrelationForm::Transpose => a.dot(b),
    };
    Ok((inner.norm() / (na * nb)).min(1.0))
}

/// Greedy anchor clustering. Users are visited by descending LoS gain
/// `|h_bar|^2` (ties by id); each unassigned user opens a cluster and pulls in
/// later unassigned users whose correlation with it reaches `rho`, up to `capacity`.
pub fn form_clusters(
    sector_users: &[usize],
    los_means: &[DVector<Complex64>],
    rho: f64,
    capacity: usize,
    form: CorrelationForm,
) -> Result<Vec<Vec<usize>>> {
    let mut order = sector_users.to_vec();
    order.sort_by(|&a, &b| {
        los_means[b]
            .norm_squared()
            .total_cmp(&los_means[a].norm_squared())
            .then(a.cmp(&b))
    });
    let mut taken = vec![false; order.len()];
    let mut clusters = Vec::new();
    for i in 0..order.len() {
        if taken[i] {
            continue;
        }
        taken[i] = true;
        let anchor = order[i];
        let mut cluster = vec![anchor];
        for j in i + 1..order.len() {
            if cluster.len() >= capacity {
                break;
            }
            if !taken[j] && los_correlation(&los_means[anchor], &los_means[order[j]], form)? >= rho {
                taken[j] = true;
                cluster.push(order[j]);
            }
        }
        clusters.push(cluster);
    }
    Ok(clusters)
}

/// `2 ceil((phi - delta) / (2 delta)) + 1`, or 1 when the beam fits in one sector.
pub fn n_time_slots(phi_3db_deg: f64, delta_deg: f64) -> usize {
    if phi_3db_deg <= delta_deg {
        return 1;
    }
    2 * ((phi_3db_deg - delta_deg) / (2.0 * delta_deg)).ceil() as usize + 1
}

/// Sector `k` transmits in slot `k mod n_t`.
pub fn assign_time_slots(n_sectors: usize, n_t: usize) -> Vec<usize> {
    (0..n_sectors).map(|k| k % n_t).collect()
}

/// Runs sectorization, clustering and slot assignment for one drop.
pub fn build_plan(
    users: &[UserGeometry],
    los_means: &[DVector<Complex64>],
    config: &ScenarioConfig,
) -> Result<ClusterPlan> {
    let n_s = config.n_sectors;
    let sector_of_user = assign_sectors(users, n_s);
    let mut members = vec![Vec::new(); n_s];
    for (u, &s) in sector_of_user.iter().enumerate() {
        members[s].push(u);
    }
    let per_round = config.clusters_per_sector;
    let mut clusters = Vec::with_capacity(n_s);
    let mut rounds = Vec::with_capacity(n_s);
    for (sector, users) in members.iter().enumerate() {
        let groups = form_clusters(
            users,
            los_means,
            config.rho_threshold,
            config.users_per_cluster,
            config.correlation_form,
        )?;
        rounds.push(groups.len().div_ceil(per_round).max(1));
        clusters.push(
            groups
                .into_iter()
                .enumerate()
                .map(|(index, users)| Cluster {
                    sector,
                    index,
                    round: index / per_round,
                    column: index % per_round,
                    users,
                })
                .collect(),
        );
    }
    let n_t = n_time_slots(config.phi_3db, config.sector_width_deg()).min(n_s);
    Ok(ClusterPlan {
        sector_of_user,
        clusters,
        rounds,
        time_slot_of_sector: assign_time_slots(n_s, n_t),
        n_time_slots: n_t,
    })
}
