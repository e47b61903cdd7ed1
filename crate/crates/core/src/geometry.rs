//! User placement in the coverage disk and the derived angles and distances.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::config::ScenarioConfig;

/// Users closer to nadir than this are pushed out radially; azimuth is
/// undefined at the origin.
pub const MIN_STANDOFF_M: f64 = 1.0;

/// One terrestrial user seen from the HAPS nadir point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserGeometry {
    pub user_id: usize,
    pub x: f64,
    pub y: f64,
    /// Azimuth in `[0, 2pi)`.
    pub azimuth: f64,
    /// Elevation of the HAPS above the user's horizon, `(0, pi/2]`.
    pub elevation: f64,
    pub slant_distance: f64,
}

impl UserGeometry {
    pub fn from_position(user_id: usize, x: f64, y: f64, altitude: f64) -> Self {
        let ground = x.hypot(y);
        let mut azimuth = y.atan2(x);
        if azimuth < 0.0 {
            azimuth += TAU;
        }
        // atan2 can round -0.0 up to exactly 2pi.
        if azimuth >= TAU {
            azimuth = 0.0;
        }
        Self {
            user_id,
            x,
            y,
            azimuth,
            elevation: altitude.atan2(ground),
            slant_distance: (ground * ground + altitude * altitude).sqrt(),
        }
    }

    pub fn ground_distance(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation * 180.0 / PI
    }
}

/// Drops `n_sectors * clusters_per_sector * users_per_cluster` users uniformly over the disk.
pub fn drop_users<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Vec<UserGeometry> {
    (0..config.total_users())
        .map(|id| {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            let r = (config.cell_radius * u.sqrt()).max(MIN_STANDOFF_M);
            let angle = TAU * v;
            UserGeometry::from_position(id, r * angle.cos(), r * angle.sin(), config.haps_altitude)
        })
        .collect()
}
