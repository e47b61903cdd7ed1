//! Scenario description and its flat `key = value` file format.
//!
//! One key per line, `#` starts a comment, blank lines are ignored and an
//! unknown key is an error. Enum-valued keys take the lower-case names used
//! by [`std::fmt::Display`] on each enum.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Thermal noise spectral density at room temperature.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;
/// Receiver noise figure from the reference scenario.
pub const NOISE_FIGURE_DB: f64 = 7.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts * 1000.0).log10()
}

/// Noise power in watts over `bandwidth_hz` for a given spectral density and noise figure.
pub fn noise_power_watts(psd_dbm_per_hz: f64, noise_figure_db: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_watts(psd_dbm_per_hz + noise_figure_db) * bandwidth_hz
}

macro_rules! keyword_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal $(| $alias:literal)*),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match self {
                    $(Self::$variant => f.write_str($text)),+
                }
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text $(| $alias)* => Ok(Self::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($name), " '{}'"),
                        other
                    ))),
                }
            }
        }
    };
}

keyword_enum!(
    /// Whether the scattered component keeps its angular correlation.
    SpatialMode { Correlated => "correlated", Uncorrelated => "uncorrelated" }
);

keyword_enum!(
    /// Array polarization layout.
    Polarization { Uni => "uni", DualInterleaved => "dual_interleaved" | "dual" }
);

keyword_enum!(
    /// Multiple access inside a cluster.
    AccessMode { Noma => "noma", Oma => "oma" }
);

keyword_enum!(
    /// What the residual power allocation maximizes.
    Objective { MaxSumRate => "max_sum_rate", MaxEe => "max_ee" }
);

keyword_enum!(
    /// Normalization of the SIC power gap `P_tol`.
    ///
    /// `NoiseNormalized` requires `rho * gamma * gap >= P_tol`, i.e. the gap is
    /// measured relative to the noise floor. `Absolute` requires
    /// `P_max * gamma * gap >= P_tol` in watts of received power.
    SicGap { NoiseNormalized => "noise_normalized", Absolute => "absolute" }
);

keyword_enum!(
    /// Inner product used for the LoS correlation coefficient.
    CorrelationForm { Hermitian => "hermitian", Transpose => "transpose" }
);

/// Full experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_sectors: usize,
    pub elements_per_sector: usize,
    pub users_per_cluster: usize,
    pub clusters_per_sector: usize,
    pub user_antennas: usize,
    /// Element spacing in wavelengths.
    pub antenna_spacing: f64,
    pub carrier_freq: f64,
    pub bandwidth: f64,
    pub haps_altitude: f64,
    pub cell_radius: f64,
    /// Total transmit power budget in watts.
    pub p_max: f64,
    /// Receiver noise power in watts.
    pub noise_power: f64,
    /// Per-user QoS rate in bit/s/Hz.
    pub r_qos: f64,
    /// Minimum SIC power gap, see [`SicGap`].
    pub p_tol: f64,
    pub sic_gap: SicGap,
    /// Horizontal 3 dB beamwidth of a sector, degrees.
    pub phi_3db: f64,
    /// Angular spread of the local scattering model, degrees.
    pub sigma_theta: f64,
    pub sigma_sf_los: f64,
    pub sigma_sf_nlos: f64,
    pub kappa: f64,
    pub omega: f64,
    pub rho_threshold: f64,
    pub correlation_form: CorrelationForm,
    pub spatial_mode: SpatialMode,
    pub polarization: Polarization,
    pub access_mode: AccessMode,
    pub objective: Objective,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_sectors: 18,
            elements_per_sector: 4,
            users_per_cluster: 2,
            clusters_per_sector: 4,
            user_antennas: 4,
            antenna_spacing: 2.0,
            carrier_freq: 2.5e9,
            bandwidth: 10e6,
            haps_altitude: 20e3,
            cell_radius: 100e3,
            p_max: dbm_to_watts(40.0),
            // Per-resource-element noise: rates are per Hz, so the floor is the
            // spectral density plus noise figure. See README for the
            // bandwidth-integrated alternative.
            noise_power: noise_power_watts(THERMAL_NOISE_DBM_PER_HZ, NOISE_FIGURE_DB, 1.0),
            r_qos: 1.0,
            p_tol: dbm_to_watts(10.0),
            sic_gap: SicGap::NoiseNormalized,
            phi_3db: 65.0,
            sigma_theta: 5.0,
            sigma_sf_los: 4.0,
            sigma_sf_nlos: 6.0,
            kappa: 9.61,
            omega: 0.16,
            rho_threshold: 0.95,
            correlation_form: CorrelationForm::Hermitian,
            spatial_mode: SpatialMode::Correlated,
            polarization: Polarization::Uni,
            access_mode: AccessMode::Noma,
            objective: Objective::MaxSumRate,
            seed: 1,
        }
    }
}

/// Named array layouts, `sectors x elements x users-per-cluster`.
pub const PRESETS: [&str; 6] = ["18x4x2", "12x6x2", "9x8x2", "18x4x3", "12x6x3", "9x8x3"];

impl ScenarioConfig {
    pub fn total_users(&self) -> usize {
        self.n_sectors * self.clusters_per_sector * self.users_per_cluster
    }

    pub fn p_max_dbm(&self) -> f64 {
        watts_to_dbm(self.p_max)
    }

    /// `P_max / sigma^2`.
    pub fn rho(&self) -> f64 {
        self.p_max / self.noise_power
    }

    /// Sector wedge width in degrees.
    pub fn sector_width_deg(&self) -> f64 {
        360.0 / self.n_sectors as f64
    }

    /// Applies a named preset. Clusters per sector and user antennas follow
    /// the element count.
    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        let parts: Vec<&str> = name.split('x').collect();
        let parsed: Option<Vec<usize>> = (parts.len() == 3)
            .then(|| parts.iter().map(|p| p.parse().ok()).collect())
            .flatten();
        let Some(dims) = parsed else {
            return Err(Error::Config(format!(
                "preset '{name}' is not of the form SxMxL (known: {})",
                PRESETS.join(", ")
            )));
        };
        self.n_sectors = dims[0];
        self.elements_per_sector = dims[1];
        self.users_per_cluster = dims[2];
        self.clusters_per_sector = dims[1];
        self.user_antennas = dims[1];
        self.validate()
    }

    pub fn preset(name: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_preset(name)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_sectors == 0 || self.elements_per_sector == 0 || self.users_per_cluster == 0 {
            return fail("n_sectors, elements_per_sector and users_per_cluster must be >= 1".into());
        }
        if self.clusters_per_sector == 0 || self.clusters_per_sector > self.elements_per_sector {
            return fail(format!(
                "clusters_per_sector must be in 1..={} (one precoder column per cluster)",
                self.elements_per_sector
            ));
        }
        if self.user_antennas < self.elements_per_sector {
            return fail(format!(
                "user_antennas ({}) must be >= elements_per_sector ({}) for zero-forcing",
                self.user_antennas, self.elements_per_sector
            ));
        }
        let positive = [
            ("p_max", self.p_max),
            ("noise_power", self.noise_power),
            ("cell_radius", self.cell_radius),
            ("haps_altitude", self.haps_altitude),
            ("carrier_freq", self.carrier_freq),
            ("bandwidth", self.bandwidth),
            ("antenna_spacing", self.antenna_spacing),
            ("phi_3db", self.phi_3db),
            ("sigma_theta", self.sigma_theta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.p_tol >= 0.0) || !(self.r_qos >= 0.0) {
            return fail("p_tol and r_qos must be >= 0".into());
        }
        if !(self.sigma_sf_los >= 0.0) || !(self.sigma_sf_nlos >= 0.0) {
            return fail("shadow fading deviations must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.rho_threshold) {
            return fail(format!("rho_threshold must be in [0, 1], got {}", self.rho_threshold));
        }
        if self.polarization == Polarization::DualInterleaved && !self.elements_per_sector.is_multiple_of(2) {
            return Err(Error::OddElementCount(self.elements_per_sector));
        }
        Ok(())
    }

    /// Sets a single field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
        }
        match key {
            "n_sectors" => self.n_sectors = num(key, value)?,
            "elements_per_sector" => self.elements_per_sector = num(key, value)?,
            "users_per_cluster" => self.users_per_cluster = num(key, value)?,
            "clusters_per_sector" => self.clusters_per_sector = num(key, value)?,
            "user_antennas" => self.user_antennas = num(key, value)?,
            "antenna_spacing" => self.antenna_spacing = num(key, value)?,
            "carrier_freq" => self.carrier_freq = num(key, value)?,
            "bandwidth" => self.bandwidth = num(key, value)?,
            "haps_altitude" => self.haps_altitude = num(key, value)?,
            "cell_radius" => self.cell_radius = num(key, value)?,
            "p_max" => self.p_max = num(key, value)?,
            "p_max_dbm" => self.p_max = dbm_to_watts(num(key, value)?),
            "noise_power" => self.noise_power = num(key, value)?,
            "r_qos" => self.r_qos = num(key, value)?,
            "p_tol" => self.p_tol = num(key, value)?,
            "sic_gap" => self.sic_gap = value.parse()?,
            "phi_3db" => self.phi_3db = num(key, value)?,
            "sigma_theta" => self.sigma_theta = num(key, value)?,
            "sigma_sf_los" => self.sigma_sf_los = num(key, value)?,
            "sigma_sf_nlos" => self.sigma_sf_nlos = num(key, value)?,
            "kappa" => self.kappa = num(key, value)?,
            "omega" => self.omega = num(key, value)?,
            "rho_threshold" => self.rho_threshold = num(key, value)?,
            "correlation_form" => self.correlation_form = value.parse()?,
            "spatial_mode" => self.spatial_mode = value.parse()?,
            "polarization" => self.polarization = value.parse()?,
            "access_mode" => self.access_mode = value.parse()?,
            "objective" => self.objective = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            "preset" => self.apply_preset(value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parses the flat config format on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::ConfigParse { line: idx + 1, msg: "expected key = value".into() });
            };
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::ConfigParse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Renders every field in the file format; `parse(render())` is the identity.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("n_sectors", self.n_sectors.to_string());
        kv("elements_per_sector", self.elements_per_sector.to_string());
        kv("users_per_cluster", self.users_per_cluster.to_string());
        kv("clusters_per_sector", self.clusters_per_sector.to_string());
        kv("user_antennas", self.user_antennas.to_string());
        kv("antenna_spacing", self.antenna_spacing.to_string());
        kv("carrier_freq", self.carrier_freq.to_string());
        kv("bandwidth", self.bandwidth.to_string());
        kv("haps_altitude", self.haps_altitude.to_string());
        kv("cell_radius", self.cell_radius.to_string());
        kv("p_max", self.p_max.to_string());
        kv("noise_power", self.noise_power.to_string());
        kv("r_qos", self.r_qos.to_string());
        kv("p_tol", self.p_tol.to_string());
        kv("sic_gap", self.sic_gap.to_string());
        kv("phi_3db", self.phi_3db.to_string());
        kv("sigma_theta", self.sigma_theta.to_string());
        kv("sigma_sf_los", self.sigma_sf_los.to_string());
        kv("sigma_sf_nlos", self.sigma_sf_nlos.to_string());
        kv("kappa", self.kappa.to_string());
        kv("omega", self.omega.to_string());
        kv("rho_threshold", self.rho_threshold.to_string());
        kv("correlation_form", self.correlation_form.to_string());
        kv("spatial_mode", self.spatial_mode.to_string());
        kv("polarization", self.polarization.to_string());
        kv("access_mode", self.access_mode.to_string());
        kv("objective", self.objective.to_string());
        kv("seed", self.seed.to_string());
        out
    }
}
