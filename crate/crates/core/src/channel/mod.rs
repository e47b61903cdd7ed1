//! Spatially correlated Rician channel between a ULA sector and a user.
//!
//! The LoS part is the ULA steering vector, the scattered part has the
//! local-scattering correlation matrix (Gaussian angular spread around the
//! nominal elevation) and is sampled through its Karhunen-Loeve expansion.
//! Each of the user's `N` antennas sees an independent row draw.

pub mod quadrature;

use std::f64::consts::{PI, TAU};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{Polarization, SpatialMode};
use crate::error::{Error, Result};

/// Speed of light used by the path-loss model.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Default Gauss-Hermite order for the correlation integral.
pub const QUADRATURE_NODES: usize = 64;
/// Node doubling stops here with [`Error::QuadratureNonConvergence`].
pub const QUADRATURE_MAX_NODES: usize = 1024;
/// Allowed change between an `n`- and `2n`-node evaluation, relative to `beta_nlos`.
pub const QUADRATURE_TOL: f64 = 1e-8;

/// Large-scale and angular parameters of one user toward its serving sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub sector_id: usize,
    pub sector_boresight_azimuth: f64,
    /// Linear LoS power gain.
    pub beta_los: f64,
    /// Linear NLoS power gain.
    pub beta_nlos: f64,
    pub los_indicator: bool,
    /// Nominal elevation, radians.
    pub elevation: f64,
    /// Element spacing in wavelengths.
    pub d_v: f64,
    /// Angular standard deviation, radians.
    pub sigma_theta: f64,
}

/// One sampled channel with everything used to produce it.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub los_mean: DVector<Complex64>,
    pub corr_matrix: DMatrix<Complex64>,
    pub eig_basis: DMatrix<Complex64>,
    pub eig_values: DVector<f64>,
    /// `N x M`: row `i` is the channel seen by user antenna `i`.
    pub sample: DMatrix<Complex64>,
    pub los_indicator: bool,
}

/// `sqrt(beta_los) * exp(j 2pi d_v m sin(theta))` for `m = 0..M`.
pub fn los_steering(params: &ChannelParams, m: usize) -> DVector<Complex64> {
    let amp = params.beta_los.sqrt();
    let phase = TAU * params.d_v * params.elevation.sin();
    DVector::from_fn(m, |i, _| Complex64::from_polar(amp, phase * i as f64))
}

/// Correlation at lags `0..n_lags` (entry `(a, b)` with `a - b = k`), by
/// Gauss-Hermite quadrature with node doubling until two consecutive orders agree.
pub fn correlation_lags(
    beta_nlos: f64,
    d_v: f64,
    elevation: f64,
    sigma_theta: f64,
    n_lags: usize,
) -> Result<Vec<Complex64>> {
    let eval = |nodes: usize| -> Vec<Complex64> {
        let rule = quadrature::rule(nodes);
        (0..n_lags)
            .map(|k| {
                if k == 0 {
                    return Complex64::new(beta_nlos, 0.0);
                }
                let freq = TAU * d_v * k as f64;
                rule.gaussian_expectation(elevation, sigma_theta, |angle| {
                    Complex64::from_polar(1.0, freq * angle.sin())
                }) * beta_nlos
            })
            .collect()
    };
    let mut nodes = QUADRATURE_NODES;
    let mut coarse = eval(nodes);
    loop {
        let fine = eval(2 * nodes);
        let change = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
            / beta_nlos;
        if change <= QUADRATURE_TOL {
            return Ok(coarse);
        }
        nodes *= 2;
        if nodes >= QUADRATURE_MAX_NODES {
            return Err(Error::QuadratureNonConvergence { nodes, change });
        }
        coarse = fine;
    }
}

/// Builds the Hermitian Toeplitz matrix whose first column is `lags`.
pub fn toeplitz_hermitian(lags: &[Complex64]) -> DMatrix<Complex64> {
    let m = lags.len();
    DMatrix::from_fn(m, m, |a, b| {
        if a >= b {
            lags[a - b]
        } else {
            lags[b - a].conj()
        }
    })
}

/// Local-scattering spatial correlation matrix of an `m`-element ULA.
pub fn correlation_matrix(params: &ChannelParams, m: usize) -> Result<DMatrix<Complex64>> {
    let lags = correlation_lags(
        params.beta_nlos,
        params.d_v,
        params.elevation,
        params.sigma_theta,
        m,
    )?;
    Ok(toeplitz_hermitian(&lags))
}

/// Free-space path loss in dB plus shadowing.
pub fn large_scale_fading(distance: f64, freq: f64, shadow_db: f64) -> f64 {
    20.0 * distance.log10() + 20.0 * freq.log10() + 20.0 * (4.0 * PI / SPEED_OF_LIGHT).log10() + shadow_db
}

/// Linear power gain of a path loss given in dB.
pub fn db_to_gain(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Elevation-dependent LoS probability; `elevation_deg` in degrees.
pub fn los_probability(elevation_deg: f64, kappa: f64, omega: f64) -> f64 {
    1.0 / (1.0 + kappa * (-omega * (elevation_deg - kappa)).exp())
}

/// Interleaved V/H layout: even (0-based) elements are vertically polarized,
/// odd ones horizontally. Each polarization is a co-polarized sub-array of
/// `M/2` elements at twice the spacing; cross-polarized entries vanish.
pub fn dual_polarized_structure(
    params: &ChannelParams,
    m: usize,
) -> Result<(DMatrix<Complex64>, DVector<Complex64>)> {
    if !m.is_multiple_of(2) {
        return Err(Error::OddElementCount(m));
    }
    let sub = ChannelParams { d_v: 2.0 * params.d_v, ..*params };
    let block = correlation_matrix(&sub, m / 2)?;
    let corr = DMatrix::from_fn(m, m, |a, b| {
        if a % 2 == b % 2 {
            block[(a / 2, b / 2)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok((corr, los_steering(params, m)))
}

/// The correlation matrix and LoS mean a sector exposes for these settings.
pub fn channel_statistics(
    params: &ChannelParams,
    m: usize,
    spatial: SpatialMode,
    polarization: Polarization,
) -> Result<(DMatrix<Complex64>, DVector<Complex64>)> {
    let (corr, mean) = match polarization {
        Polarization::Uni => (correlation_matrix(params, m)?, los_steering(params, m)),
        Polarization::DualInterleaved => dual_polarized_structure(params, m)?,
    };
    let corr = match spatial {
        SpatialMode::Correlated => corr,
        SpatialMode::Uncorrelated => {
            DMatrix::from_diagonal_element(m, m, Complex64::new(params.beta_nlos, 0.0))
        }
    };
    Ok((corr, mean))
}

/// Square root factor `U D^(1/2)` of a PSD correlation matrix.
#[derive(Debug, Clone)]
pub struct KarhunenLoeve {
    pub basis: DMatrix<Complex64>,
    pub eigenvalues: DVector<f64>,
    factor: DMatrix<Complex64>,
}

impl KarhunenLoeve {
    pub fn new(corr: &DMatrix<Complex64>) -> Result<Self> {
        let eig = corr.clone().symmetric_eigen();
        let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-8 * max {
            return Err(Error::EigendecompositionFailure { min, max });
        }
        let mut factor = eig.eigenvectors.clone();
        for (j, &lam) in eig.eigenvalues.iter().enumerate() {
            let s = lam.max(0.0).sqrt();
            factor.column_mut(j).scale_mut(s);
        }
        Ok(Self { basis: eig.eigenvectors, eigenvalues: eig.eigenvalues, factor })
    }

    /// `n_rows` independent draws `mean * 1[los] + U D^(1/2) e`, stacked as rows.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        mean: &DVector<Complex64>,
        los: bool,
        n_rows: usize,
        rng: &mut R,
    ) -> DMatrix<Complex64> {
        let m = self.factor.nrows();
        let mut out = DMatrix::zeros(n_rows, m);
        let mut e = DVector::<Complex64>::zeros(m);
        for i in 0..n_rows {
            for v in e.iter_mut() {
                *v = complex_normal(rng);
            }
            let mut row = &self.factor * &e;
            if los {
                row += mean;
            }
            out.set_row(i, &row.transpose());
        }
        out
    }
}

/// Circularly symmetric complex normal with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Samples an `n_rows x M` user channel from its statistics.
pub fn sample_channel<R: Rng + ?Sized>(
    los_mean: &DVector<Complex64>,
    corr_matrix: &DMatrix<Complex64>,
    los_indicator: bool,
    n_rows: usize,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    Ok(KarhunenLoeve::new(corr_matrix)?.sample(los_mean, los_indicator, n_rows, rng))
}

impl ChannelRealization {
    pub fn draw<R: Rng + ?Sized>(
        los_mean: DVector<Complex64>,
        corr_matrix: DMatrix<Complex64>,
        los_indicator: bool,
        n_rows: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let kl = KarhunenLoeve::new(&corr_matrix)?;
        let sample = kl.sample(&los_mean, los_indicator, n_rows, rng);
        Ok(Self {
            los_mean,
            corr_matrix,
            eig_basis: kl.basis,
            eig_values: kl.eigenvalues,
            sample,
            los_indicator,
        })
    }

    /// Redraws only the fast-fading sample from the same statistics.
    pub fn redraw<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut factor = self.eig_basis.clone();
        for (j, &lam) in self.eig_values.iter().enumerate() {
            factor.column_mut(j).scale_mut(lam.max(0.0).sqrt());
        }
        let kl = KarhunenLoeve {
            basis: self.eig_basis.clone(),
            eigenvalues: self.eig_values.clone(),
            factor,
        };
        self.sample = kl.sample(&self.los_mean, self.los_indicator, self.sample.nrows(), rng);
    }
}

/// Row of the optional channel dump.
#[derive(Debug, Clone)]
pub struct ChannelRecord<'a> {
    pub drop: u64,
    pub user: usize,
    pub sector: usize,
    pub los_flag: bool,
    pub beta_los_db: f64,
    pub beta_nlos_db: f64,
    pub sample: &'a DMatrix<Complex64>,
}

pub fn write_channel_header<W: Write>(out: &mut W, n_rows: usize, m: usize) -> std::io::Result<()> {
    write!(out, "drop,user,sector,los_flag,beta_los_db,beta_nlos_db")?;
    for i in 0..n_rows {
        for j in 0..m {
            write!(out, ",h_{i}_{j}_re,h_{i}_{j}_im")?;
        }
    }
    writeln!(out)
}

pub fn write_channel_record<W: Write>(out: &mut W, rec: &ChannelRecord<'_>) -> std::io::Result<()> {
    write!(
        out,
        "{},{},{},{},{},{}",
        rec.drop, rec.user, rec.sector, rec.los_flag as u8, rec.beta_los_db, rec.beta_nlos_db
    )?;
    for i in 0..rec.sample.nrows() {
        for j in 0..rec.sample.ncols() {
            let h = rec.sample[(i, j)];
            write!(out, ",{},{}", h.re, h.im)?;
        }
    }
    writeln!(out)
}
