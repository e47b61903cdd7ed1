//! Zero-forcing detection, effective gains, SIC ordering and user rates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Redraws allowed for a channel whose detection vector is degenerate.
pub const MAX_RESAMPLES: usize = 16;

/// A user's detection result on its cluster's precoding column.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveLink {
    pub user_id: usize,
    /// Precoding column `m`.
    pub cluster_index: usize,
    pub sector_index: usize,
    pub detection_vector: DVector<Complex64>,
    pub effective_gain: f64,
    /// 1-based SIC rank after sorting.
    pub rank_in_cluster: usize,
}

/// Unit vector along the part of column `m` of the `N x M` matrix `h` that is
/// orthogonal to every other column.
pub fn detection_vector(h: &DMatrix<Complex64>, m: usize) -> Result<DVector<Complex64>> {
    let target = h.column(m).into_owned();
    let others: Vec<usize> = (0..h.ncols()).filter(|&k| k != m).collect();
    // Orthonormal basis of the interfering columns.
    let mut basis: Vec<DVector<Complex64>> = Vec::with_capacity(others.len());
    for &k in &others {
        let mut q = h.column(k).into_owned();
        let scale = q.norm();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&q);
                q -= b * c;
            }
        }
        let norm = q.norm();
        if norm <= 1e-12 * scale {
            return Err(Error::RankDeficiency { column: m });
        }
        basis.push(q / Complex64::new(norm, 0.0));
    }
    let mut v = target.clone();
    for _ in 0..2 {
        for b in &basis {
            let c = b.dotc(&v);
            v -= b * c;
        }
    }
    let norm = v.norm();
    if norm < 1e-12 * target.norm() || norm == 0.0 {
        return Err(Error::RankDeficiency { column: m });
    }
    Ok(v / Complex64::new(norm, 0.0))
}

/// `|v^H h_m|^2`.
pub fn effective_gain(v: &DVector<Complex64>, h: &DMatrix<Complex64>, m: usize) -> f64 {
    v.dotc(&h.column(m)).norm_sqr()
}

/// Largest `|v^H h_k|` over the interfering columns.
pub fn nulling_residual(v: &DVector<Complex64>, h: &DMatrix<Complex64>, m: usize) -> f64 {
    (0..h.ncols())
        .filter(|&k| k != m)
        .map(|k| v.dotc(&h.column(k)).norm())
        .fold(0.0, f64::max)
}

/// Sorts by descending gain (ties by id) and writes the 1-based ranks.
pub fn order_cluster(mut links: Vec<EffectiveLink>) -> Vec<EffectiveLink> {
    links.sort_by(|a, b| {
        b.effective_gain
            .total_cmp(&a.effective_gain)
            .then(a.user_id.cmp(&b.user_id))
    });
    for (i, l) in links.iter_mut().enumerate() {
        l.rank_in_cluster = i + 1;
    }
    links
}

/// `log2(1 + rho Omega_l gamma_l / (1 + rho gamma_l sum_{k<l} Omega_k))`.
pub fn user_rate(gamma: f64, omega: f64, interferers: &[f64], rho: f64) -> f64 {
    let a = rho * gamma;
    let interference: f64 = interferers.iter().sum();
    (a * omega / (1.0 + a * interference)).ln_1p() / std::f64::consts::LN_2
}

/// Per-user SIC margins for `l >= 2` and whether all of them hold.
#[derive(Debug, Clone, PartialEq)]
pub struct SicCheck {
    pub margins: Vec<f64>,
    pub pass: bool,
}

/// `scale * gamma_{l-1} (Omega_l - sum_{k<l} Omega_k) - p_tol` for `l = 2..L`;
/// `scale` is `P_max` for an absolute tolerance in watts.
pub fn sic_power_check(omegas: &[f64], gammas: &[f64], scale: f64, p_tol: f64, p_max: f64) -> SicCheck {
    let mut margins = Vec::with_capacity(omegas.len().saturating_sub(1));
    let mut prefix = 0.0;
    for l in 1..omegas.len() {
        prefix += omegas[l - 1];
        margins.push(scale * gammas[l - 1] * (omegas[l] - prefix) - p_tol);
    }
    let pass = margins.iter().all(|&m| m >= -1e-9 * p_max);
    SicCheck { margins, pass }
}

/// Tries the channel generator until the detection vector exists, up to
/// [`MAX_RESAMPLES`] redraws.
pub fn detect_with_retries<F>(m: usize, mut draw: F) -> Result<(DMatrix<Complex64>, DVector<Complex64>)>
where
    F: FnMut() -> Result<DMatrix<Complex64>>,
{
    let mut h = draw()?;
    for _ in 0..MAX_RESAMPLES {
        match detection_vector(&h, m) {
            Ok(v) => return Ok((h, v)),
            Err(Error::RankDeficiency { .. }) => h = draw()?,
            Err(e) => return Err(e),
        }
    }
    detection_vector(&h, m).map(|v| (h, v))
}
