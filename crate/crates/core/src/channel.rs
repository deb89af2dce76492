//! From geometry to measurements: visibility classification, the multipath
//! pseudorange offset, Ornstein-Uhlenbeck measurement noise, and per-epoch
//! pseudorange assembly.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::citymodel::CityModel;
use crate::geodesy::SPEED_OF_LIGHT;
use crate::raycast::{GridIndex, RayPairResult};
use crate::satellites::SatelliteState;

/// How a satellite's signal reaches (or fails to reach) the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Visibility {
    /// Direct line of sight; no multipath offset.
    LosClear,
    /// LOS obstructed but a reflector exists behind the receiver; the
    /// measurement carries a multipath offset.
    Multipath,
    /// LOS obstructed and no reflector; no signal received.
    Blocked,
    /// Below the elevation mask; excluded before ray casting.
    BelowMask,
}

/// Decision table from the two ray ranges. The `max_range` sentinel means "no
/// hit": a clear LOS wins regardless of the mirror ray; an obstructed LOS is
/// multipath exactly when the mirror ray found a reflector.
pub fn classify_visibility(pair: &RayPairResult, max_range: f64) -> Visibility {
    if pair.r_los >= max_range {
        Visibility::LosClear
    } else if pair.r_ref < max_range {
        Visibility::Multipath
    } else {
        Visibility::Blocked
    }
}

/// The reflection geometry behind one multipath offset.
///
/// The mirror-ray slant range is the pre-reflection extra distance `d`; the
/// post-reflection leg is `l = d * sin(alpha)` with `alpha = pi/2 - 2*theta`,
/// giving the total offset `m = d + l = d * (1 + sin(pi/2 - 2*theta))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultipathGeometry {
    /// Pre-reflection extra distance `d` (the mirror-ray range), meters.
    pub pre_reflection_m: f64,
    /// Post-reflection extra distance `l`, meters.
    pub post_reflection_m: f64,
    /// Angle between the reflected ray and the reflector normal, radians.
    pub normal_angle_rad: f64,
    /// Satellite elevation `theta`, radians.
    pub elevation_rad: f64,
    /// Total offset `m = d + l`, meters.
    pub offset_m: f64,
}

impl MultipathGeometry {
    pub fn from_mirror_range(r_ref: f64, elevation_rad: f64) -> Self {
        let normal_angle = std::f64::consts::FRAC_PI_2 - 2.0 * elevation_rad;
        let post = r_ref * normal_angle.sin();
        MultipathGeometry {
            pre_reflection_m: r_ref,
            post_reflection_m: post,
            normal_angle_rad: normal_angle,
            elevation_rad,
            offset_m: r_ref + post,
        }
    }
}

/// Multipath pseudorange offset `m = r_ref * (1 + sin(pi/2 - 2*theta))`.
///
/// Exact anchor points: `m(d, pi/4) = d`, `m(d, 0) = 2d`, `m(d, pi/2) = 0`;
/// `m` is continuous and non-increasing in `theta` on [0, pi/2], and always
/// within [0, 2*r_ref].
pub fn multipath_offset(r_ref: f64, theta: f64) -> f64 {
    r_ref * (1.0 + (std::f64::consts::FRAC_PI_2 - 2.0 * theta).sin())
}

// ---------------------------------------------------------------------------
// Ornstein-Uhlenbeck measurement noise
// ---------------------------------------------------------------------------

/// Parameters of the OU process `dx = theta_ou * (mu_ou - x) dt + sigma_ou dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuNoiseConfig {
    /// Mean-reversion rate, 1/s. Zero degenerates to a pure random walk.
    pub theta_ou: f64,
    /// Long-run mean, meters.
    pub mu_ou: f64,
    /// Diffusion coefficient, m/sqrt(s).
    pub sigma_ou: f64,
    /// Step size, seconds. Scenario runs override this with the epoch interval.
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    /// Generator seed. Scenario runs override this per PRN from the master seed.
    #[serde(default)]
    pub seed: u64,
}

fn default_dt() -> f64 {
    1.0
}

impl Default for OuNoiseConfig {
    fn default() -> Self {
        OuNoiseConfig {
            theta_ou: 0.5,
            mu_ou: 0.0,
            sigma_ou: 1.0,
            dt_s: 1.0,
            seed: 0,
        }
    }
}

/// One OU channel: current value plus its own deterministic generator.
#[derive(Debug, Clone)]
pub struct OuNoiseState {
    x: f64,
    rng: ChaCha8Rng,
}

impl OuNoiseState {
    /// Start the channel at the long-run mean.
    pub fn new(cfg: &OuNoiseConfig) -> Self {
        OuNoiseState {
            x: cfg.mu_ou,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        }
    }

    pub fn with_value(cfg: &OuNoiseConfig, x0: f64) -> Self {
        OuNoiseState {
            x: x0,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        }
    }

    pub fn value(&self) -> f64 {
        self.x
    }
}

/// Advance one OU step using the exact conditional-Gaussian discretization
///
/// `x' = mu + (x - mu) * exp(-theta*dt) + sigma * sqrt((1 - exp(-2*theta*dt)) / (2*theta)) * z`
///
/// which is correct for any step size, unlike Euler-Maruyama. At
/// `theta_ou == 0` the random-walk limit `x' = x + sigma * sqrt(dt) * z`
/// applies. Returns the new value.
pub fn ou_step(state: &mut OuNoiseState, cfg: &OuNoiseConfig) -> f64 {
    let z: f64 = StandardNormal.sample(&mut state.rng);
    let x = if cfg.theta_ou == 0.0 {
        state.x + cfg.sigma_ou * cfg.dt_s.sqrt() * z
    } else {
        let decay = (-cfg.theta_ou * cfg.dt_s).exp();
        // exp_m1 keeps the variance factor accurate for tiny theta*dt.
        let var_factor = -(-2.0 * cfg.theta_ou * cfg.dt_s).exp_m1() / (2.0 * cfg.theta_ou);
        cfg.mu_ou + (state.x - cfg.mu_ou) * decay + cfg.sigma_ou * var_factor.sqrt() * z
    };
    state.x = x;
    x
}

/// Stable seed derivation (splitmix64 chain), pinned so parallel and serial
/// runs agree on every platform.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ a) ^ b)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Context tag for per-PRN noise channel seeds.
const SEED_CTX_NOISE: u64 = 1;

/// One independent OU channel per PRN, all derived from a single master seed.
#[derive(Debug, Clone)]
pub struct NoiseBank {
    channels: BTreeMap<u32, (OuNoiseConfig, OuNoiseState)>,
}

impl NoiseBank {
    pub fn new(base: &OuNoiseConfig, dt_s: f64, master_seed: u64, prns: &[u32]) -> Self {
        let mut channels = BTreeMap::new();
        for &prn in prns {
            let cfg = OuNoiseConfig {
                dt_s,
                seed: derive_seed(master_seed, SEED_CTX_NOISE, prn as u64),
                ..*base
            };
            let state = OuNoiseState::new(&cfg);
            channels.insert(prn, (cfg, state));
        }
        NoiseBank { channels }
    }

    /// Advance the channel for `prn` one step and return the new value.
    pub fn step(&mut self, prn: u32) -> f64 {
        let (cfg, state) = self
            .channels
            .get_mut(&prn)
            .expect("noise channel for every PRN");
        let cfg = *cfg;
        ou_step(state, &cfg)
    }

    pub fn has_channel(&self, prn: u32) -> bool {
        self.channels.contains_key(&prn)
    }
}

// ---------------------------------------------------------------------------
// Pseudorange assembly
// ---------------------------------------------------------------------------

/// Receiver-side knobs for one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReceiverConfig {
    /// Elevation mask `theta_0`, radians. Satellites at or below it are
    /// excluded. Default 10 degrees, the conventional GNSS mask.
    pub elevation_mask_rad: f64,
    /// Ray-cast range, meters; also the no-hit sentinel.
    pub max_range_m: f64,
    /// Receiver clock bias, seconds; enters pseudoranges as `c0 * dt`.
    pub clock_bias_s: f64,
    /// Master switch for the OU measurement noise.
    pub noise_enabled: bool,
    /// OU noise parameters shared by every PRN channel.
    pub noise: OuNoiseConfig,
    /// A-priori pseudorange standard deviation, meters, used for DOP scaling.
    pub pseudorange_sigma_m: f64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        ReceiverConfig {
            elevation_mask_rad: 10f64.to_radians(),
            max_range_m: crate::raycast::DEFAULT_MAX_RANGE_M,
            clock_bias_s: 0.0,
            noise_enabled: true,
            noise: OuNoiseConfig::default(),
            pseudorange_sigma_m: 1.0,
        }
    }
}

/// One satellite's measurement at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudorangeMeasurement {
    pub prn: u32,
    /// Geometric range from the true receiver position, meters.
    pub true_range_m: f64,
    /// Multipath offset `m_i`, meters (0 unless `Multipath`).
    pub multipath_offset_m: f64,
    /// Measurement noise `e_i` applied to this epoch, meters.
    pub noise_m: f64,
    /// Clock term `c0 * dt`, meters.
    pub clock_term_m: f64,
    /// Assembled pseudorange; `None` for `Blocked` / `BelowMask` satellites,
    /// which produce no usable measurement at all.
    pub pseudorange_m: Option<f64>,
    pub visibility: Visibility,
}

impl PseudorangeMeasurement {
    /// Usable measurements enter the position solution (clear or multipath).
    pub fn is_usable(&self) -> bool {
        matches!(
            self.visibility,
            Visibility::LosClear | Visibility::Multipath
        )
    }
}

/// Pseudorange assembly `P = rho + m + c0*dt + e`, summed left to right so the
/// zero-extras case is bitwise equal to the geometric range.
pub fn generate_pseudorange(rho: f64, m: f64, delta_t: f64, e: f64) -> f64 {
    rho + m + SPEED_OF_LIGHT * delta_t + e
}

/// Run one epoch of the measurement pipeline for every satellite: mask check,
/// LOS/mirror ray casting, visibility classification, multipath offset, OU
/// noise, pseudorange assembly.
///
/// When noise is enabled, every PRN channel advances exactly once per epoch
/// regardless of visibility, so the noise time series of one satellite does
/// not depend on the visibility of the others.
pub fn epoch_measurements(
    model: &CityModel,
    index: &GridIndex,
    satellites: &[SatelliteState],
    receiver_truth: &Vector3<f64>,
    cfg: &ReceiverConfig,
    noise: &mut NoiseBank,
) -> Vec<PseudorangeMeasurement> {
    satellites
        .iter()
        .map(|sat| {
            let e_i = if cfg.noise_enabled {
                noise.step(sat.prn)
            } else {
                0.0
            };
            let rho = (sat.position_local - receiver_truth).norm();
            let clock_term = SPEED_OF_LIGHT * cfg.clock_bias_s;

            if sat.elevation_rad <= cfg.elevation_mask_rad {
                return PseudorangeMeasurement {
                    prn: sat.prn,
                    true_range_m: rho,
                    multipath_offset_m: 0.0,
                    noise_m: e_i,
                    clock_term_m: clock_term,
                    pseudorange_m: None,
                    visibility: Visibility::BelowMask,
                };
            }

            let pair = index.cast_satellite_rays(
                model,
                receiver_truth,
                sat.azimuth_rad,
                sat.elevation_rad,
                cfg.max_range_m,
            );
            let visibility = classify_visibility(&pair, cfg.max_range_m);
            let offset = match visibility {
                Visibility::Multipath => multipath_offset(pair.r_ref, sat.elevation_rad),
                _ => 0.0,
            };
            let pseudorange = match visibility {
                Visibility::LosClear | Visibility::Multipath => {
                    Some(generate_pseudorange(rho, offset, cfg.clock_bias_s, e_i))
                }
                _ => None,
            };
            PseudorangeMeasurement {
                prn: sat.prn,
                true_range_m: rho,
                multipath_offset_m: offset,
                noise_m: e_i,
                clock_term_m: clock_term,
                pseudorange_m: pseudorange,
                visibility,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::citymodel::rect_footprint;
    use crate::geodesy::GeodeticPoint;
    use crate::satellites::{fixed_constellation, FixedSatellite};

    fn pair(r_los: f64, r_ref: f64) -> RayPairResult {
        RayPairResult {
            r_los,
            r_ref,
            los_hit: None,
            ref_hit: None,
        }
    }

    #[test]
    fn visibility_decision_table() {
        let max = 5000.0;
        // All four sentinel/hit combinations.
        assert_eq!(
            classify_visibility(&pair(max, max), max),
            Visibility::LosClear
        );
        assert_eq!(
            classify_visibility(&pair(max, 12.0), max),
            Visibility::LosClear
        );
        assert_eq!(
            classify_visibility(&pair(30.0, 8.0), max),
            Visibility::Multipath
        );
        assert_eq!(
            classify_visibility(&pair(30.0, max), max),
            Visibility::Blocked
        );
    }

    #[test]
    fn offset_at_quarter_pi_is_exactly_d() {
        assert_eq!(multipath_offset(10.0, std::f64::consts::FRAC_PI_4), 10.0);
    }

    #[test]
    fn offset_at_grazing_is_exactly_two_d() {
        assert_eq!(multipath_offset(10.0, 0.0), 20.0);
    }

    #[test]
    fn offset_at_zenith_is_zero() {
        assert_eq!(multipath_offset(10.0, std::f64::consts::FRAC_PI_2), 0.0);
    }

    /// Frozen high-precision evaluation: m(100, 0.78) = 101.07961170582674.
    #[test]
    fn offset_matches_frozen_evaluation() {
        let m = multipath_offset(100.0, 0.78);
        assert!((m - 101.07961170582674).abs() < 1e-9, "m = {m}");
    }

    #[test]
    fn offset_monotone_and_continuous_on_elevation() {
        let d = 37.5;
        let n = 2000;
        let mut prev = multipath_offset(d, 0.0);
        for k in 1..=n {
            let theta = std::f64::consts::FRAC_PI_2 * k as f64 / n as f64;
            let m = multipath_offset(d, theta);
            assert!(m <= prev + 1e-12, "not non-increasing at theta={theta}");
            assert!((m - prev).abs() < d * 4.0 * std::f64::consts::FRAC_PI_2 / n as f64 + 1e-9);
            assert!((0.0..=2.0 * d + 1e-12).contains(&m));
            prev = m;
        }
    }

    #[test]
    fn geometry_decomposition_holds() {
        let g = MultipathGeometry::from_mirror_range(42.0, 0.3);
        assert!((g.offset_m - (g.pre_reflection_m + g.post_reflection_m)).abs() < 1e-9);
        assert!(
            (g.normal_angle_rad - (std::f64::consts::FRAC_PI_2 - 0.6)).abs() < 1e-15,
            "alpha = pi/2 - 2*theta"
        );
        assert_eq!(g.offset_m, multipath_offset(42.0, 0.3));
    }

    #[test]
    fn ou_deterministic_decay_halves_exactly() {
        let cfg = OuNoiseConfig {
            theta_ou: 1.0,
            mu_ou: 0.0,
            sigma_ou: 0.0,
            dt_s: std::f64::consts::LN_2,
            seed: 7,
        };
        let mut state = OuNoiseState::with_value(&cfg, 1.0);
        assert_eq!(ou_step(&mut state, &cfg), 0.5);
        assert_eq!(ou_step(&mut state, &cfg), 0.25);
    }

    #[test]
    fn ou_zero_theta_is_a_random_walk() {
        // Var(x_N - x_0) ~= N * dt for theta = 0.
        let n_paths = 4000;
        let n_steps = 64;
        let dt = 0.25;
        let mut acc = 0.0;
        for p in 0..n_paths {
            let cfg = OuNoiseConfig {
                theta_ou: 0.0,
                mu_ou: 0.0,
                sigma_ou: 1.0,
                dt_s: dt,
                seed: p,
            };
            let mut st = OuNoiseState::new(&cfg);
            let mut x = 0.0;
            for _ in 0..n_steps {
                x = ou_step(&mut st, &cfg);
            }
            acc += x * x;
        }
        let var = acc / n_paths as f64;
        let expected = n_steps as f64 * dt;
        assert!(
            (var - expected).abs() / expected < 0.1,
            "random-walk variance {var} vs {expected}"
        );
    }

    #[test]
    fn ou_stationary_variance_matches_analytic() {
        // sigma^2 / (2 theta) = 1.0 for theta = 0.5, sigma = 1.
        let cfg = OuNoiseConfig {
            theta_ou: 0.5,
            mu_ou: 0.0,
            sigma_ou: 1.0,
            dt_s: 0.5,
            seed: 99,
        };
        let mut st = OuNoiseState::new(&cfg);
        let burn_in = 1000;
        let samples = 100_000;
        for _ in 0..burn_in {
            ou_step(&mut st, &cfg);
        }
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..samples {
            let x = ou_step(&mut st, &cfg);
            acc += x;
            acc2 += x * x;
        }
        let mean = acc / samples as f64;
        let var = acc2 / samples as f64 - mean * mean;
        assert!((var - 1.0).abs() < 0.05, "stationary variance {var}");
    }

    #[test]
    fn ou_is_reproducible_for_equal_seeds() {
        let cfg = OuNoiseConfig {
            theta_ou: 0.7,
            mu_ou: 2.0,
            sigma_ou: 1.3,
            dt_s: 0.1,
            seed: 1234,
        };
        let mut a = OuNoiseState::new(&cfg);
        let mut b = OuNoiseState::new(&cfg);
        for _ in 0..100 {
            assert_eq!(ou_step(&mut a, &cfg), ou_step(&mut b, &cfg));
        }
    }

    #[test]
    fn seed_derivation_is_stable_and_spread() {
        // Pinned values: these must never change across releases, or stored
        // scenario outputs stop being reproducible.
        assert_eq!(derive_seed(0, 0, 0), derive_seed(0, 0, 0));
        assert_ne!(derive_seed(1, 1, 1), derive_seed(1, 1, 2));
        assert_ne!(derive_seed(1, 1, 1), derive_seed(1, 2, 1));
        assert_ne!(derive_seed(1, 1, 1), derive_seed(2, 1, 1));
    }

    #[test]
    fn pseudorange_identity_case() {
        assert_eq!(generate_pseudorange(2.0e7, 0.0, 0.0, 0.0), 2.0e7);
    }

    /// Frozen arithmetic: c0 * 1e-6 = 299.792458 m.
    #[test]
    fn pseudorange_with_clock_and_offset() {
        let p = generate_pseudorange(2.0e7, 15.3, 1e-6, 0.0);
        assert!((p - 20_000_315.092458).abs() < 1e-6, "P = {p}");
    }

    #[test]
    fn pseudorange_with_negative_noise() {
        let p = generate_pseudorange(2.0e7, 0.0, 0.0, -2.1);
        assert!((p - 19_999_997.9).abs() < 1e-9);
    }

    #[test]
    fn decomposition_reconstructs_exactly() {
        let (rho, m, dt, e) = (2.123e7, 33.5, 2.5e-7, -1.7);
        let p = generate_pseudorange(rho, m, dt, e);
        assert!((p - rho - m - SPEED_OF_LIGHT * dt - e).abs() < 1e-9);
    }

    fn open_sky_setup() -> (CityModel, GridIndex, Vec<crate::satellites::SatelliteState>) {
        let origin = GeodeticPoint::from_degrees(22.3, 114.17, 0.0).unwrap();
        let model = CityModel::from_buildings(origin, vec![]).unwrap();
        let index = GridIndex::build(&model);
        let az = [2.93, 3.39, 5.56, 0.23, 4.02, 1.38, 2.23, 0.65];
        let el = [0.78, 0.32, 1.02, 0.90, 0.47, 0.26, 1.09, 0.38];
        let fixed: Vec<FixedSatellite> = az
            .iter()
            .zip(el.iter())
            .enumerate()
            .map(|(i, (&a, &e))| FixedSatellite {
                prn: i as u32 + 1,
                azimuth_rad: a,
                elevation_rad: e,
                nominal_range_m: 2.0e7,
            })
            .collect();
        let sats = fixed_constellation(&fixed, &Vector3::new(0.0, 0.0, 2.0), &origin);
        (model, index, sats)
    }

    #[test]
    fn open_sky_measurements_equal_true_ranges_bitwise() {
        let (model, index, sats) = open_sky_setup();
        let cfg = ReceiverConfig {
            noise_enabled: false,
            clock_bias_s: 0.0,
            ..Default::default()
        };
        let mut bank = NoiseBank::new(
            &cfg.noise,
            1.0,
            0,
            &sats.iter().map(|s| s.prn).collect::<Vec<_>>(),
        );
        let receiver = Vector3::new(0.0, 0.0, 2.0);
        let meas = epoch_measurements(&model, &index, &sats, &receiver, &cfg, &mut bank);
        assert_eq!(meas.len(), 8);
        for m in &meas {
            assert_eq!(m.visibility, Visibility::LosClear);
            assert_eq!(m.pseudorange_m.unwrap(), m.true_range_m, "bitwise equality");
            assert_eq!(m.multipath_offset_m, 0.0);
        }
    }

    #[test]
    fn below_mask_satellite_is_excluded_regardless_of_geometry() {
        let (model, index, _) = open_sky_setup();
        let origin = *model.origin();
        let fixed = [FixedSatellite {
            prn: 1,
            azimuth_rad: 1.0,
            elevation_rad: 0.05,
            nominal_range_m: 2.0e7,
        }];
        let sats = fixed_constellation(&fixed, &Vector3::new(0.0, 0.0, 2.0), &origin);
        let cfg = ReceiverConfig {
            elevation_mask_rad: 0.1745,
            ..Default::default()
        };
        let mut bank = NoiseBank::new(&cfg.noise, 1.0, 0, &[1]);
        let meas = epoch_measurements(
            &model,
            &index,
            &sats,
            &Vector3::new(0.0, 0.0, 2.0),
            &cfg,
            &mut bank,
        );
        assert_eq!(meas[0].visibility, Visibility::BelowMask);
        assert!(meas[0].pseudorange_m.is_none());
    }

    /// Hand-set canyon: LOS walled at east = 10, rear reflector at east = -5;
    /// r_ref and the offset follow the analytic plane intersection.
    #[test]
    fn canyon_multipath_offset_matches_analytic_geometry() {
        let origin = GeodeticPoint::from_degrees(22.3, 114.17, 0.0).unwrap();
        let model = CityModel::from_buildings(
            origin,
            vec![
                rect_footprint(1, 10.0, -100.0, 12.0, 100.0, 300.0),
                rect_footprint(2, -7.0, -100.0, -5.0, 100.0, 300.0),
            ],
        )
        .unwrap();
        let index = GridIndex::build(&model);
        let elevation = 0.3;
        let fixed = [FixedSatellite {
            prn: 5,
            azimuth_rad: std::f64::consts::FRAC_PI_2,
            elevation_rad: elevation,
            nominal_range_m: 2.0e7,
        }];
        let sats = fixed_constellation(&fixed, &Vector3::new(0.0, 0.0, 2.0), &origin);
        let cfg = ReceiverConfig {
            noise_enabled: false,
            ..Default::default()
        };
        let mut bank = NoiseBank::new(&cfg.noise, 1.0, 0, &[5]);
        let meas = epoch_measurements(
            &model,
            &index,
            &sats,
            &Vector3::new(0.0, 0.0, 2.0),
            &cfg,
            &mut bank,
        );
        assert_eq!(meas[0].visibility, Visibility::Multipath);
        let r_ref = 5.233758007690429; // 5 / cos(0.3), frozen analytic oracle
        let expected = multipath_offset(r_ref, elevation);
        assert!(
            (meas[0].multipath_offset_m - expected).abs() < 1e-9,
            "offset {} vs {expected}",
            meas[0].multipath_offset_m
        );
        let p = meas[0].pseudorange_m.unwrap();
        assert!((p - meas[0].true_range_m - expected).abs() < 1e-9);
    }
}
