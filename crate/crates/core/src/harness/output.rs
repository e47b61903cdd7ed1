//! CSV writers for sweep results and the optional per-drop dumps.
//!
//! Floats use Rust's shortest round-trip formatting, so identical runs give
//! identical bytes.

use std::fmt::Write as _;
use std::io::Write;

use super::{decoding_order, DropOutcome, SweepResult, METRICS};
use crate::channel::{write_channel_header, write_channel_record, ChannelRecord};

pub const SWEEP_HEADER: &str = "param_value,metric,mean,ci_halfwidth,outage_fraction,n_drops";
pub const DROPS_HEADER: &str = "param_value,drop,feasible,sum_rate,energy_efficiency,p_req,water_level,n_time_slots";
pub const PLAN_HEADER: &str = "drop,user,sector,cluster,slot";
pub const ALLOCATION_HEADER: &str = "drop,sector,cluster,user,gamma,omega_min,omega,rate,feasible";

pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for p in &result.points {
        for (metric, est) in METRICS.iter().zip(&p.estimates) {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                p.value,
                metric,
                est.mean,
                est.ci_halfwidth,
                p.outage_fraction,
                p.drops.len()
            )?;
        }
    }
    Ok(())
}

pub fn write_drops_csv<W: Write>(result: &SweepResult, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{DROPS_HEADER}")?;
    for p in &result.points {
        for d in &p.drops {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                p.value,
                d.drop,
                d.feasible as u8,
                d.sum_rate,
                d.energy_efficiency,
                d.p_req,
                d.water_level,
                d.n_time_slots
            )?;
        }
    }
    Ok(())
}

/// Header of the channel dump for `n x m` user channels.
pub fn channel_header(n: usize, m: usize) -> String {
    let mut buf = Vec::new();
    write_channel_header(&mut buf, n, m).expect("in-memory write");
    String::from_utf8(buf).expect("ascii header")
}

pub fn channel_rows(outcome: &DropOutcome) -> String {
    let mut buf = Vec::new();
    for (u, (link, det)) in outcome.users.iter().zip(&outcome.detections).enumerate() {
        let rec = ChannelRecord {
            drop: outcome.index,
            user: u,
            sector: link.params.sector_id,
            los_flag: link.params.los_indicator,
            beta_los_db: link.beta_los_db,
            beta_nlos_db: link.beta_nlos_db,
            sample: &det.sample,
        };
        write_channel_record(&mut buf, &rec).expect("in-memory write");
    }
    String::from_utf8(buf).expect("ascii rows")
}

pub fn plan_rows(outcome: &DropOutcome) -> String {
    let mut s = String::new();
    for (u, sector, cluster, slot) in outcome.plan.user_rows() {
        let _ = writeln!(s, "{},{u},{sector},{cluster},{slot}", outcome.index);
    }
    s
}

pub fn allocation_rows(outcome: &DropOutcome) -> String {
    let mut s = String::new();
    let order = decoding_order(outcome);
    let feasible = outcome.solution.feasible as u8;
    for (user, up) in order.iter().zip(&outcome.solution.users) {
        let (sector, cluster) = outcome.cluster_keys[up.cluster];
        let _ = writeln!(
            s,
            "{},{sector},{cluster},{user},{},{},{},{},{feasible}",
            outcome.index, up.gamma, up.omega_min, up.omega, up.rate
        );
    }
    s
}

/// Which optional dumps to write.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DumpFlags {
    pub channels: bool,
    pub plan: bool,
    pub allocations: bool,
}

impl DumpFlags {
    pub fn any(&self) -> bool {
        self.channels || self.plan || self.allocations
    }

    /// Rows for each enabled dump, in the order channels, plan, allocations.
    pub fn rows(&self, outcome: &DropOutcome) -> [Option<String>; 3] {
        [
            self.channels.then(|| channel_rows(outcome)),
            self.plan.then(|| plan_rows(outcome)),
            self.allocations.then(|| allocation_rows(outcome)),
        ]
    }
}

/// Plain gnuplot script plotting every metric of `sweep.csv` against the swept value.
pub fn gnuplot_script(csv: &str, parameter: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set xlabel '{parameter}'");
    let _ = writeln!(s, "set grid");
    for metric in METRICS {
        let _ = writeln!(s, "set terminal pngcairo size 800,600");
        let _ = writeln!(s, "set output '{metric}.png'");
        let _ = writeln!(s, "set ylabel '{metric}'");
        let _ = writeln!(
            s,
            "plot '{csv}' using 1:(strcol(2) eq '{metric}' ? $3 : 1/0):(strcol(2) eq '{metric}' ? $4 : 1/0) with yerrorlines title '{metric}'"
        );
    }
    s
}
