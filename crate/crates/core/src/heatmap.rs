//! City-scale quality maps: run a short static scenario at every grid cell and
//! aggregate fix error, GDOP, and satellite visibility.
//!
//! Cells are fully independent: each derives its own seed from
//! `(master_seed, row, col)`, so a cell recomputed in isolation reproduces its
//! value from the full grid and the output is invariant to the worker count.

use std::io::Write;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{derive_seed, epoch_measurements, NoiseBank};
use crate::raycast::GridIndex;
use crate::scenario::{build_record, LoadedScenario, ScenarioError};

/// Context tag for per-cell seed derivation.
const SEED_CTX_CELL: u64 = 2;

/// Grid geometry and sampling depth for one heat map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSpec {
    pub min_east_m: f64,
    pub min_north_m: f64,
    pub max_east_m: f64,
    pub max_north_m: f64,
    pub cell_size_m: f64,
    /// Receiver altitude for every cell, meters above the local ground plane.
    pub altitude_m: f64,
    pub epochs_per_cell: u32,
}

impl HeatmapSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.cell_size_m.is_finite() || self.cell_size_m <= 0.0 {
            return Err(ScenarioError::Invalid("cell_size_m must be > 0".into()));
        }
        if !(self.max_east_m > self.min_east_m && self.max_north_m > self.min_north_m) {
            return Err(ScenarioError::Invalid(
                "heat map bounding box is degenerate".into(),
            ));
        }
        if self.epochs_per_cell < 1 {
            return Err(ScenarioError::Invalid(
                "epochs_per_cell must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Grid dimensions: `ceil(extent / cell_size)` per axis.
    pub fn dims(&self) -> (usize, usize) {
        let cols = ((self.max_east_m - self.min_east_m) / self.cell_size_m).ceil() as usize;
        let rows = ((self.max_north_m - self.min_north_m) / self.cell_size_m).ceil() as usize;
        (rows.max(1), cols.max(1))
    }

    /// Center of cell (row, col); row 0 is the southernmost row.
    pub fn cell_center(&self, row: usize, col: usize) -> Vector3<f64> {
        Vector3::new(
            self.min_east_m + (col as f64 + 0.5) * self.cell_size_m,
            self.min_north_m + (row as f64 + 0.5) * self.cell_size_m,
            self.altitude_m,
        )
    }
}

/// Aggregated metrics for one cell. Fix-dependent metrics are `None` when no
/// epoch in the cell produced a fix (the explicit no-fix sentinel).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub mean_fix_error_m: Option<f64>,
    pub mean_gdop: Option<f64>,
    pub mean_visible_sat: f64,
    /// Epochs (out of `epochs_per_cell`) that produced a fix.
    pub fix_epochs: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    pub spec: HeatmapSpec,
    pub rows: usize,
    pub cols: usize,
    /// Row-major, row 0 southernmost.
    pub cells: Vec<CellMetrics>,
}

impl HeatmapGrid {
    pub fn cell(&self, row: usize, col: usize) -> &CellMetrics {
        &self.cells[row * self.cols + col]
    }
}

/// Which metric a rendered map shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapMetric {
    FixError,
    Gdop,
    Visible,
}

/// Compute the metrics of a single cell. Exposed so the cell-independence
/// property is directly testable.
pub fn compute_cell(
    scenario: &LoadedScenario,
    index: &GridIndex,
    spec: &HeatmapSpec,
    master_seed: u64,
    row: usize,
    col: usize,
) -> Result<CellMetrics, ScenarioError> {
    let cfg = &scenario.config;
    let receiver = spec.cell_center(row, col);
    let prns = scenario.prns();
    let cell_seed = derive_seed(master_seed, SEED_CTX_CELL, (row as u64) << 32 | col as u64);
    let mut noise = NoiseBank::new(&cfg.receiver_cfg.noise, cfg.dt_s, cell_seed, &prns);

    let mut err_sum = 0.0;
    let mut gdop_sum = 0.0;
    let mut fix_epochs = 0u32;
    let mut visible_sum = 0u64;

    for epoch in 0..spec.epochs_per_cell {
        let t_abs = scenario.start_time_s() + epoch as f64 * cfg.dt_s;
        let states = scenario.satellite_states_at(t_abs, &receiver)?;
        let measurements = epoch_measurements(
            &scenario.model,
            index,
            &states,
            &receiver,
            &cfg.receiver_cfg,
            &mut noise,
        );
        let record = build_record(
            t_abs,
            &prns,
            &states,
            &measurements,
            &receiver,
            cfg,
            scenario.model.origin(),
        );
        visible_sum += record.num_vis_sat as u64;
        if let (Some(err), Some(dop)) = (record.fix_error_m, record.dop.as_ref()) {
            err_sum += err;
            gdop_sum += dop.gdop;
            fix_epochs += 1;
        }
    }

    let n = spec.epochs_per_cell as f64;
    Ok(CellMetrics {
        mean_fix_error_m: (fix_epochs > 0).then(|| err_sum / fix_epochs as f64),
        mean_gdop: (fix_epochs > 0).then(|| gdop_sum / fix_epochs as f64),
        mean_visible_sat: visible_sum as f64 / n,
        fix_epochs,
    })
}

/// Generate the full grid. `workers` bounds the rayon pool; any value yields
/// byte-identical output because cells are seeded independently and assembled
/// by index.
pub fn generate_heatmap(
    scenario: &LoadedScenario,
    spec: &HeatmapSpec,
    workers: usize,
) -> Result<HeatmapGrid, ScenarioError> {
    spec.validate()?;
    let (rows, cols) = spec.dims();
    let index = GridIndex::build(&scenario.model);
    let master_seed = scenario.config.master_seed;

    let indices: Vec<(usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .collect();

    let compute_all = || -> Result<Vec<CellMetrics>, ScenarioError> {
        indices
            .par_iter()
            .map(|&(r, c)| compute_cell(scenario, &index, spec, master_seed, r, c))
            .collect()
    };

    let cells = if workers == 0 {
        compute_all()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| ScenarioError::Invalid(format!("worker pool: {e}")))?;
        pool.install(compute_all)?
    };

    Ok(HeatmapGrid {
        spec: *spec,
        rows,
        cols,
        cells,
    })
}

/// CSV: one line per cell with all three metrics; empty fields mark no-fix
/// cells so plots can mask them.
pub fn write_heatmap_csv<W: Write>(grid: &HeatmapGrid, mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "row,col,east_m,north_m,mean_fix_error_m,mean_gdop,mean_visible_sat,fix_epochs"
    )?;
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let cell = grid.cell(row, col);
            let center = grid.spec.cell_center(row, col);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                row,
                col,
                center.x,
                center.y,
                cell.mean_fix_error_m
                    .map_or_else(String::new, |v| format!("{v}")),
                cell.mean_gdop.map_or_else(String::new, |v| format!("{v}")),
                cell.mean_visible_sat,
                cell.fix_epochs
            )?;
        }
    }
    Ok(())
}

/// Plain-text portable graymap (P2) for quick viewing. Values are scaled to
/// 1..=255 over the finite range of the chosen metric; no-fix cells render as
/// 0 (black). Rows are written north-down so the image reads like a map.
pub fn write_heatmap_pgm<W: Write>(
    grid: &HeatmapGrid,
    metric: HeatmapMetric,
    mut w: W,
) -> std::io::Result<()> {
    let value = |c: &CellMetrics| -> Option<f64> {
        match metric {
            HeatmapMetric::FixError => c.mean_fix_error_m,
            HeatmapMetric::Gdop => c.mean_gdop,
            HeatmapMetric::Visible => Some(c.mean_visible_sat),
        }
    };
    let finite: Vec<f64> = grid.cells.iter().filter_map(value).collect();
    let (lo, hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    writeln!(w, "P2")?;
    writeln!(w, "{} {}", grid.cols, grid.rows)?;
    writeln!(w, "255")?;
    for row in (0..grid.rows).rev() {
        let line: Vec<String> = (0..grid.cols)
            .map(|col| match value(grid.cell(row, col)) {
                None => "0".to_string(),
                Some(v) => {
                    let scaled = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
                    format!("{}", 1 + (scaled * 254.0).round() as u32)
                }
            })
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}
