//! Satellite positions: two-body Keplerian propagation or fixed
//! azimuth/elevation lists, feeding one common [`SatelliteState`] type so the
//! measurement pipeline never cares where positions came from.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{
    azimuth_into_range, ecef_to_local, enu_rotation, geodetic_to_ecef, local_to_geodetic,
    GeodeticPoint, EARTH_MU, EARTH_ROTATION_RATE,
};

#[derive(Debug, Error)]
pub enum SatelliteError {
    #[error("eccentricity {0} outside [0, 1)")]
    InvalidEccentricity(f64),
    #[error("semi-major axis {0} m is not positive")]
    InvalidSemiMajorAxis(f64),
    #[error("Kepler iteration failed to reach 1e-13 residual after 50 iterations (M={m}, e={e})")]
    KeplerNonConvergence { m: f64, e: f64 },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse ephemeris set: {0}")]
    Parse(String),
    #[error("duplicate PRN {0} in ephemeris set")]
    DuplicatePrn(u32),
    #[error("fixed satellite PRN {prn}: elevation {elevation_rad} outside [0, pi/2]")]
    ElevationOutOfRange { prn: u32, elevation_rad: f64 },
}

/// Minimal Keplerian element set for two-body propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeplerianEphemeris {
    pub prn: u32,
    pub semi_major_axis_m: f64,
    pub eccentricity: f64,
    pub inclination_rad: f64,
    pub raan_rad: f64,
    pub arg_perigee_rad: f64,
    /// Mean anomaly at `epoch_s`.
    pub mean_anomaly_rad: f64,
    pub epoch_s: f64,
}

/// Per-satellite state at one epoch, as seen from a given receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteState {
    pub prn: u32,
    pub position_ecef: Vector3<f64>,
    pub position_local: Vector3<f64>,
    /// Azimuth of the receiver->satellite direction, clockwise from north, [0, 2pi).
    pub azimuth_rad: f64,
    /// Elevation above the receiver's horizontal plane, [-pi/2, pi/2].
    pub elevation_rad: f64,
}

/// A satellite pinned to a fixed azimuth/elevation as seen from the receiver,
/// synthesized at `nominal_range_m`. This mirrors how constellations are
/// usually configured for canyon studies: the angles are what matter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedSatellite {
    pub prn: u32,
    pub azimuth_rad: f64,
    pub elevation_rad: f64,
    #[serde(default = "default_nominal_range")]
    pub nominal_range_m: f64,
}

fn default_nominal_range() -> f64 {
    2.0e7
}

// ---------------------------------------------------------------------------
// Kepler's equation
// ---------------------------------------------------------------------------

/// Solve E - e*sin(E) = M for the eccentric anomaly E.
///
/// Newton iteration with a bisection fallback on the bracket [M - e, M + e];
/// the residual is driven below 1e-13. Non-convergence is reported, never
/// silently clamped (it should be unreachable for e < 1).
pub fn solve_kepler(mean_anomaly: f64, eccentricity: f64) -> Result<f64, SatelliteError> {
    if !(0.0..1.0).contains(&eccentricity) {
        return Err(SatelliteError::InvalidEccentricity(eccentricity));
    }
    // Reduce M to [-pi, pi]; the solution shifts by the same multiple of 2pi.
    let turns = (mean_anomaly / std::f64::consts::TAU).round();
    let m = mean_anomaly - turns * std::f64::consts::TAU;

    let mut lo = m - eccentricity;
    let mut hi = m + eccentricity;
    let mut e_anom = m;
    for _ in 0..50 {
        let f = e_anom - eccentricity * e_anom.sin() - m;
        if f.abs() < 1e-13 {
            return Ok(e_anom + turns * std::f64::consts::TAU);
        }
        if f > 0.0 {
            hi = e_anom;
        } else {
            lo = e_anom;
        }
        let fp = 1.0 - eccentricity * e_anom.cos();
        let next = e_anom - f / fp;
        // Newton can overshoot near e -> 1; fall back to bisection when it
        // leaves the bracket.
        e_anom = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(SatelliteError::KeplerNonConvergence { m, e: eccentricity })
}

/// Two-body propagation of `eph` to time `t` (seconds, same clock as
/// `epoch_s`). With `earth_rotation` the inertial position is rotated by the
/// accumulated Earth rotation angle to yield ECEF; otherwise the inertial
/// position is returned unchanged (adequate for short desk-scale scenarios).
pub fn propagate_kepler(
    eph: &KeplerianEphemeris,
    t: f64,
    earth_rotation: bool,
) -> Result<Vector3<f64>, SatelliteError> {
    if !eph.semi_major_axis_m.is_finite() || eph.semi_major_axis_m <= 0.0 {
        return Err(SatelliteError::InvalidSemiMajorAxis(eph.semi_major_axis_m));
    }
    let a = eph.semi_major_axis_m;
    let ecc = eph.eccentricity;
    let mean_motion = (EARTH_MU / (a * a * a)).sqrt();
    let m = eph.mean_anomaly_rad + mean_motion * (t - eph.epoch_s);
    let e_anom = solve_kepler(m, ecc)?;

    // Perifocal coordinates.
    let x_pf = a * (e_anom.cos() - ecc);
    let y_pf = a * (1.0 - ecc * ecc).sqrt() * e_anom.sin();

    let inertial = rot_z(eph.raan_rad)
        * rot_x(eph.inclination_rad)
        * rot_z(eph.arg_perigee_rad)
        * Vector3::new(x_pf, y_pf, 0.0);

    if earth_rotation {
        Ok(rot_z(-EARTH_ROTATION_RATE * t) * inertial)
    } else {
        Ok(inertial)
    }
}

fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

// ---------------------------------------------------------------------------
// Look angles and fixed constellations
// ---------------------------------------------------------------------------

/// Azimuth (clockwise from north, [0, 2pi)) and elevation ([-pi/2, pi/2]) of
/// the receiver->satellite vector in the receiver's own ENU frame. A satellite
/// exactly overhead has unconstrained azimuth; 0 is returned by convention.
pub fn azimuth_elevation(sat_ecef: &Vector3<f64>, receiver: &GeodeticPoint) -> (f64, f64) {
    let enu = enu_rotation(receiver) * (sat_ecef - geodetic_to_ecef(receiver));
    let horizontal = enu.x.hypot(enu.y);
    let elevation = enu.z.atan2(horizontal);
    let azimuth = if horizontal == 0.0 {
        0.0
    } else {
        azimuth_into_range(enu.x.atan2(enu.y))
    };
    (azimuth, elevation)
}

/// Synthesize satellite states at `nominal_range_m` along each configured
/// (azimuth, elevation) direction from the receiver, using the receiver's own
/// ENU frame so that recomputing the look angles reproduces the inputs.
pub fn fixed_constellation(
    satellites: &[FixedSatellite],
    receiver_local: &Vector3<f64>,
    origin: &GeodeticPoint,
) -> Vec<SatelliteState> {
    let receiver_geodetic = local_to_geodetic(receiver_local, origin);
    let receiver_ecef = geodetic_to_ecef(&receiver_geodetic);
    let enu_t = enu_rotation(&receiver_geodetic).transpose();
    satellites
        .iter()
        .map(|fx| {
            let (sin_az, cos_az) = fx.azimuth_rad.sin_cos();
            let (sin_el, cos_el) = fx.elevation_rad.sin_cos();
            let dir_enu = Vector3::new(sin_az * cos_el, cos_az * cos_el, sin_el);
            let sat_ecef = receiver_ecef + enu_t * (fx.nominal_range_m * dir_enu);
            SatelliteState {
                prn: fx.prn,
                position_ecef: sat_ecef,
                position_local: ecef_to_local(&sat_ecef, origin),
                azimuth_rad: fx.azimuth_rad,
                elevation_rad: fx.elevation_rad,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Ephemeris file
// ---------------------------------------------------------------------------

/// A set of Keplerian ephemerides, one per PRN, loaded from the JSON ephemeris
/// format (`{"satellites": [{...KeplerianEphemeris fields...}]}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EphemerisSet {
    pub satellites: Vec<KeplerianEphemeris>,
}

impl EphemerisSet {
    pub fn from_json_str(text: &str) -> Result<Self, SatelliteError> {
        let set: EphemerisSet =
            serde_json::from_str(text).map_err(|e| SatelliteError::Parse(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SatelliteError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SatelliteError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    fn validate(&self) -> Result<(), SatelliteError> {
        let mut prns: Vec<u32> = self.satellites.iter().map(|s| s.prn).collect();
        prns.sort_unstable();
        for w in prns.windows(2) {
            if w[0] == w[1] {
                return Err(SatelliteError::DuplicatePrn(w[0]));
            }
        }
        for s in &self.satellites {
            if !(0.0..1.0).contains(&s.eccentricity) {
                return Err(SatelliteError::InvalidEccentricity(s.eccentricity));
            }
            if !(s.semi_major_axis_m > 0.0 && s.semi_major_axis_m.is_finite()) {
                return Err(SatelliteError::InvalidSemiMajorAxis(s.semi_major_axis_m));
            }
            let angles_ok = s.inclination_rad.is_finite()
                && s.raan_rad.is_finite()
                && s.arg_perigee_rad.is_finite()
                && s.mean_anomaly_rad.is_finite()
                && s.epoch_s.is_finite();
            if !angles_ok {
                return Err(SatelliteError::Parse(format!(
                    "PRN {}: ephemeris elements must be finite",
                    s.prn
                )));
            }
        }
        Ok(())
    }

    /// Propagate every satellite to time `t` and express it relative to the
    /// given receiver.
    pub fn states_at(
        &self,
        t: f64,
        earth_rotation: bool,
        receiver_local: &Vector3<f64>,
        origin: &GeodeticPoint,
    ) -> Result<Vec<SatelliteState>, SatelliteError> {
        let receiver_geodetic = local_to_geodetic(receiver_local, origin);
        self.satellites
            .iter()
            .map(|eph| {
                let ecef = propagate_kepler(eph, t, earth_rotation)?;
                let (az, el) = azimuth_elevation(&ecef, &receiver_geodetic);
                Ok(SatelliteState {
                    prn: eph.prn,
                    position_ecef: ecef,
                    position_local: ecef_to_local(&ecef, origin),
                    azimuth_rad: az,
                    elevation_rad: el,
                })
            })
            .collect()
    }
}

/// The validation rule for fixed-constellation entries: elevations must lie in
/// [0, pi/2] (satellites below the horizon cannot be configured directly),
/// azimuths finite, ranges positive.
pub fn validate_fixed_list(satellites: &[FixedSatellite]) -> Result<(), SatelliteError> {
    for fx in satellites {
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&fx.elevation_rad) {
            return Err(SatelliteError::ElevationOutOfRange {
                prn: fx.prn,
                elevation_rad: fx.elevation_rad,
            });
        }
        if !fx.azimuth_rad.is_finite()
            || !(fx.nominal_range_m > 0.0 && fx.nominal_range_m.is_finite())
        {
            return Err(SatelliteError::Parse(format!(
                "PRN {}: azimuth must be finite and nominal range positive",
                fx.prn
            )));
        }
    }
    Ok(())
}
