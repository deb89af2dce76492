//! GNSS urban-canyon simulator.
//!
//! Models what a GNSS receiver experiences among tall buildings: satellite
//! signals are traced as rays against extruded building footprints, obstructed
//! lines of sight either kill the measurement or pick up a reflected-path
//! pseudorange offset, correlated measurement noise follows an
//! Ornstein-Uhlenbeck process, and the receiver position is recovered by
//! iterative least squares with dilution-of-precision quality analysis.
//!
//! Pipeline, bottom up:
//!
//! * [`geodesy`] — WGS-84 constants and geodetic / ECEF / local-ENU transforms.
//! * [`citymodel`] — building-footprint ingestion and validation.
//! * [`raycast`] — LOS + mirror ray casting: brute-force reference and a
//!   uniform-grid index with tested equivalence.
//! * [`satellites`] — Keplerian propagation and fixed az/el constellations.
//! * [`channel`] — visibility classification, multipath offset, OU noise,
//!   pseudorange assembly.
//! * [`solver`] — least-squares position fix and DOP components.
//! * [`scenario`] — config, epoch loop, per-epoch records, output writers.
//! * [`heatmap`] — per-cell quality maps over a city area.

pub mod channel;
pub mod citymodel;
pub mod geodesy;
pub mod heatmap;
pub mod raycast;
pub mod satellites;
pub mod scenario;
pub mod solver;

pub use channel::{
    classify_visibility, epoch_measurements, generate_pseudorange, multipath_offset, ou_step,
    MultipathGeometry, NoiseBank, OuNoiseConfig, OuNoiseState, PseudorangeMeasurement,
    ReceiverConfig, Visibility,
};
pub use citymodel::{BuildingFootprint, CityModel, CityModelError};
pub use geodesy::{GeodeticPoint, SPEED_OF_LIGHT};
pub use heatmap::{
    generate_heatmap, write_heatmap_csv, write_heatmap_pgm, HeatmapGrid, HeatmapMetric, HeatmapSpec,
};
pub use raycast::{cast_ray, cast_satellite_rays, Face, GridIndex, Ray, RayHit, RayPairResult};
pub use satellites::{
    azimuth_elevation, fixed_constellation, propagate_kepler, solve_kepler, EphemerisSet,
    FixedSatellite, KeplerianEphemeris, SatelliteState,
};
pub use scenario::{
    write_csv, write_jsonl, write_records, EpochRecord, LoadedScenario, OutputFormat, ReceiverPath,
    SatelliteSource, ScenarioConfig, ScenarioError, Waypoint,
};
pub use solver::{
    classify_dop, compute_dop, solve_position, DopComponents, DopRating, FixSolution,
    RangeObservation, SolverConfig, SolverError,
};
