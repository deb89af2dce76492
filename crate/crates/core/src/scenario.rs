//! Scenario configuration, the epoch loop, and per-epoch record emission.
//!
//! A scenario ties together a city model, a satellite source (fixed
//! azimuth/elevation list or Keplerian ephemerides), a receiver path (static
//! point or waypoint trajectory), and the receiver/solver configuration. Each
//! epoch produces one [`EpochRecord`] carrying the fix, DOP components,
//! per-PRN multipath offsets and noise, blocked-PRN list, visibility counts,
//! and the simulator-only ground-truth fix error. Records stream out as
//! line-delimited JSON or CSV.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    epoch_measurements, NoiseBank, PseudorangeMeasurement, ReceiverConfig, Visibility,
};
use crate::citymodel::{CityModel, CityModelError};
use crate::geodesy::local_to_geodetic;
use crate::raycast::GridIndex;
use crate::satellites::{
    fixed_constellation, validate_fixed_list, EphemerisSet, FixedSatellite, SatelliteError,
    SatelliteState,
};
use crate::solver::{
    compute_dop, solve_position, DopRating, RangeObservation, SolverConfig, SolverError,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario config: {0}")]
    Invalid(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse scenario config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    CityModel(#[from] CityModelError),
    #[error(transparent)]
    Satellite(#[from] SatelliteError),
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Where satellite positions come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SatelliteSource {
    /// Fixed azimuth/elevation list, receiver-relative, constant over the run.
    Fixed { satellites: Vec<FixedSatellite> },
    /// Keplerian ephemeris file propagated from `start_time_s`.
    Ephemeris {
        path: PathBuf,
        #[serde(default)]
        start_time_s: f64,
        #[serde(default)]
        earth_rotation: bool,
    },
}

/// Static receiver or a time-stamped waypoint trajectory (linear position
/// interpolation between waypoints; clamped at the ends).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReceiverPath {
    Static { position_m: [f64; 3] },
    Trajectory { waypoints: Vec<Waypoint> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t_s: f64,
    pub position_m: [f64; 3],
}

impl ReceiverPath {
    /// Truth position at scenario-relative time `t`.
    pub fn position_at(&self, t: f64) -> Vector3<f64> {
        match self {
            ReceiverPath::Static { position_m } => Vector3::from_row_slice(position_m),
            ReceiverPath::Trajectory { waypoints } => {
                let first = waypoints.first().expect("validated non-empty");
                let last = waypoints.last().expect("validated non-empty");
                if waypoints.len() == 1 || t <= first.t_s {
                    return Vector3::from_row_slice(&first.position_m);
                }
                if t >= last.t_s {
                    return Vector3::from_row_slice(&last.position_m);
                }
                let i = waypoints
                    .partition_point(|w| w.t_s <= t)
                    .clamp(1, waypoints.len() - 1);
                let (a, b) = (&waypoints[i - 1], &waypoints[i]);
                let frac = (t - a.t_s) / (b.t_s - a.t_s);
                let pa = Vector3::from_row_slice(&a.position_m);
                let pb = Vector3::from_row_slice(&b.position_m);
                pa + frac * (pb - pa)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialGuess {
    pub position_m: [f64; 3],
    pub clock_s: f64,
}

impl Default for InitialGuess {
    fn default() -> Self {
        InitialGuess {
            position_m: [0.0; 3],
            clock_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: OutputFormat,
}

fn default_format() -> OutputFormat {
    OutputFormat::Jsonl
}

/// Everything needed to run one scenario. One JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Path to the city model file.
    pub city_model: PathBuf,
    pub satellites: SatelliteSource,
    pub receiver: ReceiverPath,
    pub epochs: u32,
    pub dt_s: f64,
    #[serde(default)]
    pub receiver_cfg: ReceiverConfig,
    #[serde(default)]
    pub solver_cfg: SolverConfig,
    #[serde(default)]
    pub initial_guess: InitialGuess,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config file and resolve its relative paths against the config
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_json_str(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if self.city_model.is_relative() {
            self.city_model = base.join(&self.city_model);
        }
        if let SatelliteSource::Ephemeris { path, .. } = &mut self.satellites {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let finite3 = |v: &[f64; 3]| v.iter().all(|c| c.is_finite());
        if self.epochs < 1 {
            return Err(ScenarioError::Invalid("epochs must be >= 1".into()));
        }
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return Err(ScenarioError::Invalid(format!(
                "dt_s must be > 0, got {}",
                self.dt_s
            )));
        }
        match &self.receiver {
            ReceiverPath::Static { position_m } => {
                if !finite3(position_m) {
                    return Err(ScenarioError::Invalid(
                        "receiver position must be finite".into(),
                    ));
                }
            }
            ReceiverPath::Trajectory { waypoints } => {
                if waypoints.is_empty() {
                    return Err(ScenarioError::Invalid(
                        "trajectory needs at least one waypoint".into(),
                    ));
                }
                for w in waypoints {
                    if !(w.t_s.is_finite() && finite3(&w.position_m)) {
                        return Err(ScenarioError::Invalid("waypoints must be finite".into()));
                    }
                }
                for w in waypoints.windows(2) {
                    if w[1].t_s <= w[0].t_s {
                        return Err(ScenarioError::Invalid(
                            "trajectory timestamps must be strictly increasing".into(),
                        ));
                    }
                }
            }
        }
        match &self.satellites {
            SatelliteSource::Fixed { satellites } => validate_fixed_list(satellites)?,
            SatelliteSource::Ephemeris { start_time_s, .. } => {
                if !start_time_s.is_finite() {
                    return Err(ScenarioError::Invalid("start_time_s must be finite".into()));
                }
            }
        }
        let rc = &self.receiver_cfg;
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&rc.elevation_mask_rad) {
            return Err(ScenarioError::Invalid(format!(
                "elevation mask {} outside [0, pi/2)",
                rc.elevation_mask_rad
            )));
        }
        if !(rc.max_range_m > 0.0 && rc.max_range_m.is_finite()) {
            return Err(ScenarioError::Invalid(
                "max_range_m must be > 0 and finite".into(),
            ));
        }
        if !rc.clock_bias_s.is_finite() {
            return Err(ScenarioError::Invalid("clock_bias_s must be finite".into()));
        }
        let noise_ok = rc.noise.theta_ou >= 0.0
            && rc.noise.theta_ou.is_finite()
            && rc.noise.sigma_ou >= 0.0
            && rc.noise.sigma_ou.is_finite()
            && rc.noise.mu_ou.is_finite();
        if !noise_ok {
            return Err(ScenarioError::Invalid(
                "OU noise needs finite mu and non-negative finite theta/sigma".into(),
            ));
        }
        if !(rc.pseudorange_sigma_m > 0.0 && rc.pseudorange_sigma_m.is_finite()) {
            return Err(ScenarioError::Invalid(
                "pseudorange_sigma_m must be > 0".into(),
            ));
        }
        if !(self.solver_cfg.epsilon_m > 0.0 && self.solver_cfg.epsilon_m.is_finite())
            || self.solver_cfg.max_iterations < 1
        {
            return Err(ScenarioError::Invalid(
                "solver epsilon must be > 0, iterations >= 1".into(),
            ));
        }
        if !(finite3(&self.initial_guess.position_m) && self.initial_guess.clock_s.is_finite()) {
            return Err(ScenarioError::Invalid(
                "initial guess must be finite".into(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// Geodetic position in degrees, for record output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticDegrees {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixReport {
    pub position_local_m: [f64; 3],
    pub position_geodetic: GeodeticDegrees,
    pub clock_bias_s: f64,
    pub converged: bool,
    pub iterations: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DopReport {
    pub gdop: f64,
    pub pdop: f64,
    pub hdop: f64,
    pub vdop: f64,
    pub tdop: f64,
    pub rating: DopRating,
}

/// One epoch of simulator output.
///
/// Per-PRN arrays (`range_offset_m`, `noise_m`) are aligned with `prns`, which
/// lists the full constellation in ascending PRN order. `num_vis_sat` counts
/// usable satellites (clear + multipath), `num_block_sat` counts blocked ones,
/// and the two plus `num_below_mask_sat` always sum to the constellation size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub timestamp_s: f64,
    pub prns: Vec<u32>,
    /// `None` when this epoch produced no fix; see `no_fix_reason`.
    pub fix: Option<FixReport>,
    pub no_fix_reason: Option<String>,
    pub dop: Option<DopReport>,
    pub range_offset_m: Vec<f64>,
    pub sats_blocked: Vec<u32>,
    pub num_vis_sat: u32,
    pub num_block_sat: u32,
    pub num_below_mask_sat: u32,
    pub noise_m: Vec<f64>,
    /// Distance from the fix to the simulator ground truth, meters.
    pub fix_error_m: Option<f64>,
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

/// A scenario with its referenced files loaded and validated, ready to run.
pub struct LoadedScenario {
    pub config: ScenarioConfig,
    pub model: CityModel,
    pub ephemeris: Option<EphemerisSet>,
}

impl LoadedScenario {
    /// Load the config and every file it references.
    pub fn load(config_path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let config = ScenarioConfig::load(config_path)?;
        let model = CityModel::load(&config.city_model)?;
        let ephemeris = match &config.satellites {
            SatelliteSource::Ephemeris { path, .. } => Some(EphemerisSet::load(path)?),
            SatelliteSource::Fixed { .. } => None,
        };
        Ok(LoadedScenario {
            config,
            model,
            ephemeris,
        })
    }

    /// Assemble a scenario from in-memory parts (used by tests and the heat
    /// map, which substitutes its own receivers).
    pub fn from_memory(
        config: ScenarioConfig,
        model: CityModel,
        ephemeris: Option<EphemerisSet>,
    ) -> Result<Self, ScenarioError> {
        config.validate()?;
        if matches!(config.satellites, SatelliteSource::Ephemeris { .. }) && ephemeris.is_none() {
            return Err(ScenarioError::Invalid(
                "ephemeris source configured but no ephemeris set supplied".into(),
            ));
        }
        Ok(LoadedScenario {
            config,
            model,
            ephemeris,
        })
    }

    /// Constellation PRNs in ascending order.
    pub fn prns(&self) -> Vec<u32> {
        let mut prns: Vec<u32> = match &self.config.satellites {
            SatelliteSource::Fixed { satellites } => satellites.iter().map(|s| s.prn).collect(),
            SatelliteSource::Ephemeris { .. } => self
                .ephemeris
                .as_ref()
                .map(|e| e.satellites.iter().map(|s| s.prn).collect())
                .unwrap_or_default(),
        };
        prns.sort_unstable();
        prns
    }

    /// Scenario time origin: the ephemeris start time, or 0 for fixed lists.
    pub fn start_time_s(&self) -> f64 {
        match &self.config.satellites {
            SatelliteSource::Ephemeris { start_time_s, .. } => *start_time_s,
            SatelliteSource::Fixed { .. } => 0.0,
        }
    }

    /// Satellite states at absolute time `t_abs` for an arbitrary receiver
    /// (the heat map substitutes cell centers for the configured receiver).
    pub fn satellite_states_at(
        &self,
        t_abs: f64,
        receiver: &Vector3<f64>,
    ) -> Result<Vec<SatelliteState>, SatelliteError> {
        let origin = self.model.origin();
        let mut states = match &self.config.satellites {
            SatelliteSource::Fixed { satellites } => {
                fixed_constellation(satellites, receiver, origin)
            }
            SatelliteSource::Ephemeris { earth_rotation, .. } => self
                .ephemeris
                .as_ref()
                .expect("checked at load")
                .states_at(t_abs, *earth_rotation, receiver, origin)?,
        };
        states.sort_by_key(|s| s.prn);
        Ok(states)
    }

    /// Run the full epoch loop. Per-epoch solver failures become no-fix
    /// records; only configuration-level problems abort.
    pub fn run(&self) -> Result<Vec<EpochRecord>, ScenarioError> {
        self.run_seeded(self.config.master_seed)
    }

    /// Run with an explicit master seed (the CLI `--seed` override).
    pub fn run_seeded(&self, master_seed: u64) -> Result<Vec<EpochRecord>, ScenarioError> {
        let cfg = &self.config;
        let index = GridIndex::build(&self.model);
        let prns = self.prns();
        let mut noise = NoiseBank::new(&cfg.receiver_cfg.noise, cfg.dt_s, master_seed, &prns);
        let start_time = self.start_time_s();

        let mut records = Vec::with_capacity(cfg.epochs as usize);
        for epoch in 0..cfg.epochs {
            let t_rel = epoch as f64 * cfg.dt_s;
            let t_abs = start_time + t_rel;
            let truth = cfg.receiver.position_at(t_rel);
            let states = self.satellite_states_at(t_abs, &truth)?;
            let measurements = epoch_measurements(
                &self.model,
                &index,
                &states,
                &truth,
                &cfg.receiver_cfg,
                &mut noise,
            );
            records.push(build_record(
                t_abs,
                &prns,
                &states,
                &measurements,
                &truth,
                cfg,
                self.model.origin(),
            ));
        }
        Ok(records)
    }
}

pub(crate) fn build_record(
    timestamp_s: f64,
    prns: &[u32],
    states: &[SatelliteState],
    measurements: &[PseudorangeMeasurement],
    truth: &Vector3<f64>,
    cfg: &ScenarioConfig,
    origin: &crate::geodesy::GeodeticPoint,
) -> EpochRecord {
    debug_assert_eq!(states.len(), measurements.len());
    let by_prn = |prn: u32| measurements.iter().find(|m| m.prn == prn);

    let range_offset_m: Vec<f64> = prns
        .iter()
        .map(|&p| by_prn(p).map_or(0.0, |m| m.multipath_offset_m))
        .collect();
    let noise_m: Vec<f64> = prns
        .iter()
        .map(|&p| by_prn(p).map_or(0.0, |m| m.noise_m))
        .collect();
    let sats_blocked: Vec<u32> = prns
        .iter()
        .copied()
        .filter(|&p| by_prn(p).is_some_and(|m| m.visibility == Visibility::Blocked))
        .collect();
    let num_vis_sat = measurements.iter().filter(|m| m.is_usable()).count() as u32;
    let num_block_sat = measurements
        .iter()
        .filter(|m| m.visibility == Visibility::Blocked)
        .count() as u32;
    let num_below_mask_sat = measurements
        .iter()
        .filter(|m| m.visibility == Visibility::BelowMask)
        .count() as u32;

    // Usable observations paired with their satellite positions.
    let observations: Vec<RangeObservation> = measurements
        .iter()
        .zip(states.iter())
        .filter_map(|(m, s)| {
            debug_assert_eq!(m.prn, s.prn);
            m.pseudorange_m.map(|p| RangeObservation {
                sat_position: s.position_local,
                pseudorange_m: p,
            })
        })
        .collect();

    let mut fix = None;
    let mut no_fix_reason = None;
    let mut dop = None;
    let mut fix_error_m = None;

    if observations.len() < 4 {
        no_fix_reason = Some(format!(
            "insufficient usable satellites: {} of {} (need 4)",
            observations.len(),
            prns.len()
        ));
    } else {
        let guess = Vector3::from_row_slice(&cfg.initial_guess.position_m);
        match solve_position(
            &observations,
            &guess,
            cfg.initial_guess.clock_s,
            &cfg.solver_cfg,
        ) {
            Ok(solution) => {
                let geo = local_to_geodetic(&solution.position, origin);
                fix_error_m = Some((solution.position - truth).norm());
                fix = Some(FixReport {
                    position_local_m: [
                        solution.position.x,
                        solution.position.y,
                        solution.position.z,
                    ],
                    position_geodetic: GeodeticDegrees {
                        lat_deg: geo.lat_rad.to_degrees(),
                        lon_deg: geo.lon_rad.to_degrees(),
                        alt_m: geo.alt_m,
                    },
                    clock_bias_s: solution.clock_bias_s,
                    converged: solution.converged,
                    iterations: solution.iterations,
                });
                let sat_positions: Vec<Vector3<f64>> = measurements
                    .iter()
                    .zip(states.iter())
                    .filter(|(m, _)| m.is_usable())
                    .map(|(_, s)| s.position_local)
                    .collect();
                match compute_dop(
                    &sat_positions,
                    &solution.position,
                    cfg.receiver_cfg.pseudorange_sigma_m,
                ) {
                    Ok(d) => {
                        dop = Some(DopReport {
                            gdop: d.gdop,
                            pdop: d.pdop,
                            hdop: d.hdop,
                            vdop: d.vdop,
                            tdop: d.tdop,
                            rating: d.rating,
                        })
                    }
                    Err(e) => no_fix_reason = Some(format!("dop: {e}")),
                }
            }
            Err(e @ SolverError::SingularGeometry) => {
                no_fix_reason = Some(e.to_string());
            }
            Err(e) => no_fix_reason = Some(e.to_string()),
        }
    }

    EpochRecord {
        timestamp_s,
        prns: prns.to_vec(),
        fix,
        no_fix_reason,
        dop,
        range_offset_m,
        sats_blocked,
        num_vis_sat,
        num_block_sat,
        num_below_mask_sat,
        noise_m,
        fix_error_m,
    }
}

// ---------------------------------------------------------------------------
// Output writers
// ---------------------------------------------------------------------------

/// One JSON document per line.
pub fn write_jsonl<W: Write>(records: &[EpochRecord], mut w: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub const CSV_HEADER: &str = "timestamp_s,fix_east_m,fix_north_m,fix_up_m,fix_lat_deg,fix_lon_deg,fix_alt_m,clock_bias_s,converged,iterations,gdop,pdop,hdop,vdop,tdop,dop_rating,num_vis_sat,num_block_sat,num_below_mask_sat,fix_error_m,no_fix_reason,prns,range_offset_m,sats_blocked,noise_m";

/// Flat CSV: scalar columns plus `;`-joined per-PRN arrays. Optional fields of
/// no-fix epochs are left empty.
pub fn write_csv<W: Write>(records: &[EpochRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        let mut cols: Vec<String> = Vec::with_capacity(25);
        cols.push(fmt_f64(r.timestamp_s));
        match &r.fix {
            Some(f) => {
                cols.push(fmt_f64(f.position_local_m[0]));
                cols.push(fmt_f64(f.position_local_m[1]));
                cols.push(fmt_f64(f.position_local_m[2]));
                cols.push(fmt_f64(f.position_geodetic.lat_deg));
                cols.push(fmt_f64(f.position_geodetic.lon_deg));
                cols.push(fmt_f64(f.position_geodetic.alt_m));
                cols.push(fmt_f64(f.clock_bias_s));
                cols.push(f.converged.to_string());
                cols.push(f.iterations.to_string());
            }
            None => cols.extend(std::iter::repeat_with(String::new).take(9)),
        }
        match &r.dop {
            Some(d) => {
                cols.push(fmt_f64(d.gdop));
                cols.push(fmt_f64(d.pdop));
                cols.push(fmt_f64(d.hdop));
                cols.push(fmt_f64(d.vdop));
                cols.push(fmt_f64(d.tdop));
                cols.push(format!("{:?}", d.rating));
            }
            None => cols.extend(std::iter::repeat_with(String::new).take(6)),
        }
        cols.push(r.num_vis_sat.to_string());
        cols.push(r.num_block_sat.to_string());
        cols.push(r.num_below_mask_sat.to_string());
        cols.push(r.fix_error_m.map_or_else(String::new, fmt_f64));
        cols.push(r.no_fix_reason.clone().map_or_else(String::new, csv_quote));
        cols.push(join_with(&r.prns, |p| p.to_string()));
        cols.push(join_with(&r.range_offset_m, |v| fmt_f64(*v)));
        cols.push(join_with(&r.sats_blocked, |p| p.to_string()));
        cols.push(join_with(&r.noise_m, |v| fmt_f64(*v)));
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    // Rust's shortest round-trip float formatting keeps output byte-stable.
    format!("{v}")
}

fn csv_quote(s: String) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

fn join_with<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(";")
}

pub fn write_records<W: Write>(
    records: &[EpochRecord],
    format: OutputFormat,
    w: W,
) -> std::io::Result<()> {
    match format {
        OutputFormat::Jsonl => write_jsonl(records, w),
        OutputFormat::Csv => write_csv(records, w),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::citymodel::rect_footprint;
    use crate::geodesy::GeodeticPoint;

    pub(crate) fn eight_sat_fixed() -> Vec<FixedSatellite> {
        let az = [2.93, 3.39, 5.56, 0.23, 4.02, 1.38, 2.23, 0.65];
        let el = [0.78, 0.32, 1.02, 0.90, 0.47, 0.26, 1.09, 0.38];
        az.iter()
            .zip(el.iter())
            .enumerate()
            .map(|(i, (&a, &e))| FixedSatellite {
                prn: i as u32 + 1,
                azimuth_rad: a,
                elevation_rad: e,
                nominal_range_m: 2.0e7,
            })
            .collect()
    }

    fn base_config() -> ScenarioConfig {
        ScenarioConfig {
            city_model: PathBuf::from("unused.json"),
            satellites: SatelliteSource::Fixed {
                satellites: eight_sat_fixed(),
            },
            receiver: ReceiverPath::Static {
                position_m: [0.0, 0.0, 2.0],
            },
            epochs: 10,
            dt_s: 1.0,
            receiver_cfg: ReceiverConfig {
                noise_enabled: false,
                ..Default::default()
            },
            solver_cfg: SolverConfig::default(),
            initial_guess: InitialGuess {
                position_m: [500.0, -300.0, 50.0],
                clock_s: 0.0,
            },
            master_seed: 42,
            output: None,
        }
    }

    fn origin() -> GeodeticPoint {
        GeodeticPoint::from_degrees(22.3, 114.17, 0.0).unwrap()
    }

    fn open_sky() -> LoadedScenario {
        LoadedScenario::from_memory(
            base_config(),
            CityModel::from_buildings(origin(), vec![]).unwrap(),
            None,
        )
        .unwrap()
    }

    /// East wall only: blocks PRNs {1, 4, 6, 7, 8}, leaving 3 usable.
    fn canyon_no_reflector() -> LoadedScenario {
        LoadedScenario::from_memory(
            base_config(),
            CityModel::from_buildings(
                origin(),
                vec![rect_footprint(1, 10.0, -200.0, 12.0, 200.0, 60.0)],
            )
            .unwrap(),
            None,
        )
        .unwrap()
    }

    /// Both walls: every blocked LOS gains a rear reflector.
    fn canyon_with_reflector() -> LoadedScenario {
        LoadedScenario::from_memory(
            base_config(),
            CityModel::from_buildings(
                origin(),
                vec![
                    rect_footprint(1, 10.0, -200.0, 12.0, 200.0, 60.0),
                    rect_footprint(2, -12.0, -200.0, -10.0, 200.0, 60.0),
                ],
            )
            .unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn open_sky_pipeline_is_exact() {
        let records = open_sky().run().unwrap();
        assert_eq!(records.len(), 10);
        for r in &records {
            assert!(r.fix.is_some());
            assert!(
                r.fix_error_m.unwrap() < 1e-6,
                "fix error {}",
                r.fix_error_m.unwrap()
            );
            assert_eq!(r.num_vis_sat, 8);
            assert_eq!(r.num_block_sat, 0);
            assert!(r.sats_blocked.is_empty());
            assert!(r.dop.is_some());
            assert!(r.range_offset_m.iter().all(|&m| m == 0.0));
        }
    }

    #[test]
    fn canyon_without_reflectors_loses_the_fix() {
        let records = canyon_no_reflector().run().unwrap();
        for r in &records {
            assert_eq!(r.num_vis_sat, 3);
            assert_eq!(r.num_block_sat, 5);
            assert_eq!(
                r.sats_blocked,
                vec![1, 4, 6, 7, 8],
                "hand-computed shadow geometry"
            );
            assert!(r.fix.is_none());
            assert!(r.no_fix_reason.as_deref().unwrap().contains("insufficient"));
        }
    }

    #[test]
    fn canyon_with_reflectors_fixes_with_bias() {
        let open = open_sky().run().unwrap();
        let canyon = canyon_with_reflector().run().unwrap();
        let mean = |rs: &[EpochRecord]| {
            let v: Vec<f64> = rs.iter().filter_map(|r| r.fix_error_m).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let open_err = mean(&open);
        let canyon_err = mean(&canyon);
        for r in &canyon {
            assert!(r.fix.is_some(), "reflectors restore the fix");
            assert_eq!(r.num_vis_sat, 8);
            assert!(
                r.range_offset_m.iter().all(|&m| m > 0.0),
                "all satellites multipath"
            );
        }
        assert!(
            canyon_err > open_err,
            "multipath bias: canyon {canyon_err} must exceed open sky {open_err}"
        );
        assert!(
            canyon_err > 1.0,
            "offsets of tens of meters must visibly bias the fix"
        );
    }

    #[test]
    fn record_partition_counts_sum_to_constellation() {
        for scenario in [open_sky(), canyon_no_reflector(), canyon_with_reflector()] {
            for r in scenario.run().unwrap() {
                assert_eq!(
                    r.num_vis_sat + r.num_block_sat + r.num_below_mask_sat,
                    r.prns.len() as u32
                );
            }
        }
    }

    #[test]
    fn identical_seeds_give_byte_identical_streams() {
        let mut cfg = base_config();
        cfg.receiver_cfg.noise_enabled = true;
        let scenario = LoadedScenario::from_memory(
            cfg,
            CityModel::from_buildings(origin(), vec![]).unwrap(),
            None,
        )
        .unwrap();
        let a = scenario.run().unwrap();
        let b = scenario.run().unwrap();
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        write_jsonl(&a, &mut buf_a).unwrap();
        write_jsonl(&b, &mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);

        let c = scenario.run_seeded(43).unwrap();
        assert_ne!(a, c, "different seed must change the noise stream");
    }

    #[test]
    fn trajectory_interpolates_linearly() {
        let path = ReceiverPath::Trajectory {
            waypoints: vec![
                Waypoint {
                    t_s: 0.0,
                    position_m: [0.0, 0.0, 2.0],
                },
                Waypoint {
                    t_s: 10.0,
                    position_m: [100.0, 0.0, 2.0],
                },
            ],
        };
        assert_eq!(path.position_at(-5.0), Vector3::new(0.0, 0.0, 2.0));
        assert_eq!(path.position_at(2.5), Vector3::new(25.0, 0.0, 2.0));
        assert_eq!(path.position_at(10.0), Vector3::new(100.0, 0.0, 2.0));
        assert_eq!(path.position_at(99.0), Vector3::new(100.0, 0.0, 2.0));
    }

    #[test]
    fn moving_receiver_crosses_the_canyon_shadow() {
        // Walk east: starts west of the canyon (clear), ends inside it.
        let mut cfg = base_config();
        cfg.receiver = ReceiverPath::Trajectory {
            waypoints: vec![
                Waypoint {
                    t_s: 0.0,
                    position_m: [-300.0, 0.0, 2.0],
                },
                Waypoint {
                    t_s: 9.0,
                    position_m: [0.0, 0.0, 2.0],
                },
            ],
        };
        let scenario = LoadedScenario::from_memory(
            cfg,
            CityModel::from_buildings(
                origin(),
                vec![rect_footprint(1, 10.0, -200.0, 12.0, 200.0, 60.0)],
            )
            .unwrap(),
            None,
        )
        .unwrap();
        let records = scenario.run().unwrap();
        assert!(
            records.first().unwrap().fix.is_some(),
            "clear of the wall at the start"
        );
        assert!(records.last().unwrap().fix.is_none(), "shadowed at the end");
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = base_config();
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = base_config();
        cfg.dt_s = 0.0;
        assert!(cfg.validate().is_err());

        let mut cfg = base_config();
        cfg.receiver = ReceiverPath::Trajectory {
            waypoints: vec![
                Waypoint {
                    t_s: 1.0,
                    position_m: [0.0; 3],
                },
                Waypoint {
                    t_s: 1.0,
                    position_m: [1.0; 3],
                },
            ],
        };
        assert!(cfg.validate().is_err());

        let mut cfg = base_config();
        if let SatelliteSource::Fixed { satellites } = &mut cfg.satellites {
            satellites[0].elevation_rad = 2.0;
        }
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn jsonl_round_trips() {
        let records = open_sky().run().unwrap();
        let mut buf = Vec::new();
        write_jsonl(&records, &mut buf).unwrap();
        let parsed: Vec<EpochRecord> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(parsed, records);
    }

    #[test]
    fn csv_has_one_line_per_epoch_plus_header() {
        let records = canyon_no_reflector().run().unwrap();
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), records.len() + 1);
        assert_eq!(lines[0], CSV_HEADER);
        // No-fix rows leave the fix columns empty but keep the counts.
        assert!(lines[1].contains(",,"));
        assert!(lines[1].contains("insufficient"));
    }
}
