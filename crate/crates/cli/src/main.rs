//! `canyonsim` command line: run scenarios, build heat maps, probe single rays.
//!
//! Exit codes: 0 success, 1 configuration error (bad arguments, invalid or
//! unreadable config/model files), 2 runtime error (I/O while writing
//! results, satellite propagation failure mid-run).

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;

use canyonsim::channel::{classify_visibility, multipath_offset, Visibility};
use canyonsim::citymodel::CityModel;
use canyonsim::heatmap::{
    generate_heatmap, write_heatmap_csv, write_heatmap_pgm, HeatmapMetric, HeatmapSpec,
};
use canyonsim::raycast::{cast_satellite_rays, DEFAULT_MAX_RANGE_M};
use canyonsim::scenario::{write_records, LoadedScenario, OutputFormat};

#[derive(Parser)]
#[command(name = "canyonsim", version, about = "GNSS urban-canyon simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and emit one record per epoch.
    Run(RunArgs),
    /// Sweep a receiver grid over the city and emit per-cell quality metrics.
    Heatmap(HeatmapArgs),
    /// Cast one LOS/mirror ray pair and report ranges, visibility, and offset.
    Raycheck(RaycheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output path; falls back to the config's `output.path`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output format override (`jsonl` or `csv`).
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct HeatmapArgs {
    /// Scenario config (JSON); its receiver is ignored, cell centers substitute.
    #[arg(long)]
    config: PathBuf,
    /// Grid bounding box in local meters: E0,N0,E1,N1.
    #[arg(long, allow_hyphen_values = true)]
    bbox: String,
    /// Cell size, meters.
    #[arg(long)]
    cell: f64,
    /// Receiver altitude, meters.
    #[arg(long)]
    alt: f64,
    /// Epochs simulated per cell.
    #[arg(long, default_value_t = 10)]
    epochs_per_cell: u32,
    /// Worker threads (0 = rayon default).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a grayscale PGM preview here.
    #[arg(long)]
    pgm: Option<PathBuf>,
    /// Metric for the PGM: fix-error, gdop, or visible.
    #[arg(long, default_value = "fix-error")]
    pgm_metric: String,
}

#[derive(Args)]
struct RaycheckArgs {
    /// City model file (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Receiver position in local meters: E,N,U.
    #[arg(long, allow_hyphen_values = true)]
    pos: String,
    /// Azimuth, radians clockwise from north.
    #[arg(long, allow_negative_numbers = true)]
    az: f64,
    /// Elevation, radians above the horizon, in [0, pi/2].
    #[arg(long, allow_negative_numbers = true)]
    el: f64,
    /// Ray range / no-hit sentinel, meters.
    #[arg(long, default_value_t = DEFAULT_MAX_RANGE_M)]
    max_range: f64,
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(1),
            CliError::Runtime(_) => ExitCode::from(2),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Treat argument misuse as a config error, but let --help/--version
            // print normally and exit 0.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Heatmap(args) => heatmap(args),
        Command::Raycheck(args) => raycheck(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let mut scenario =
        LoadedScenario::load(&args.config).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(seed) = args.seed {
        scenario.config.master_seed = seed;
    }

    let records = scenario
        .run()
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let out_path = args
        .out
        .or_else(|| scenario.config.output.as_ref().map(|o| o.path.clone()));
    let format = match args.format.as_deref() {
        Some("jsonl") => OutputFormat::Jsonl,
        Some("csv") => OutputFormat::Csv,
        Some(other) => {
            return Err(CliError::Config(format!(
                "unknown format `{other}` (jsonl|csv)"
            )))
        }
        None => match (&out_path, &scenario.config.output) {
            (Some(p), _) if p.extension().is_some_and(|e| e == "csv") => OutputFormat::Csv,
            (_, Some(o)) => o.format,
            _ => OutputFormat::Jsonl,
        },
    };

    match &out_path {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::Runtime(format!("create {}: {e}", path.display())))?;
            write_records(&records, format, std::io::BufWriter::new(file))
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        None => {
            let stdout = std::io::stdout();
            write_records(&records, format, stdout.lock())
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
    }

    let fixes = records.iter().filter(|r| r.fix.is_some()).count();
    eprintln!(
        "{} epochs, {} with a fix, {} without",
        records.len(),
        fixes,
        records.len() - fixes
    );
    Ok(())
}

fn heatmap(args: HeatmapArgs) -> Result<(), CliError> {
    let scenario =
        LoadedScenario::load(&args.config).map_err(|e| CliError::Config(e.to_string()))?;
    let bbox = parse_floats::<4>(&args.bbox).ok_or_else(|| {
        CliError::Config(format!("--bbox must be E0,N0,E1,N1, got `{}`", args.bbox))
    })?;
    let spec = HeatmapSpec {
        min_east_m: bbox[0].min(bbox[2]),
        min_north_m: bbox[1].min(bbox[3]),
        max_east_m: bbox[0].max(bbox[2]),
        max_north_m: bbox[1].max(bbox[3]),
        cell_size_m: args.cell,
        altitude_m: args.alt,
        epochs_per_cell: args.epochs_per_cell,
    };
    spec.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let metric = match args.pgm_metric.as_str() {
        "fix-error" => HeatmapMetric::FixError,
        "gdop" => HeatmapMetric::Gdop,
        "visible" => HeatmapMetric::Visible,
        other => {
            return Err(CliError::Config(format!(
                "unknown metric `{other}` (fix-error|gdop|visible)"
            )))
        }
    };

    let grid = generate_heatmap(&scenario, &spec, args.workers)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::Runtime(format!("create {}: {e}", path.display())))?;
            write_heatmap_csv(&grid, std::io::BufWriter::new(file))
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        None => {
            let stdout = std::io::stdout();
            write_heatmap_csv(&grid, stdout.lock())
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
    }
    if let Some(path) = &args.pgm {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::Runtime(format!("create {}: {e}", path.display())))?;
        write_heatmap_pgm(&grid, metric, std::io::BufWriter::new(file))
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    eprintln!("{} x {} cells", grid.rows, grid.cols);
    Ok(())
}

fn raycheck(args: RaycheckArgs) -> Result<(), CliError> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&args.el) {
        return Err(CliError::Config(format!(
            "elevation {} outside [0, pi/2]",
            args.el
        )));
    }
    if !args.max_range.is_finite() || args.max_range <= 0.0 {
        return Err(CliError::Config("max range must be > 0".into()));
    }
    let model = CityModel::load(&args.model).map_err(|e| CliError::Config(e.to_string()))?;
    let pos = parse_floats::<3>(&args.pos)
        .ok_or_else(|| CliError::Config(format!("--pos must be E,N,U, got `{}`", args.pos)))?;
    let receiver = Vector3::new(pos[0], pos[1], pos[2]);

    let pair = cast_satellite_rays(&model, &receiver, args.az, args.el, args.max_range);
    let visibility = classify_visibility(&pair, args.max_range);

    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let mut report = || -> std::io::Result<()> {
        writeln!(w, "r_los_m: {}", pair.r_los)?;
        writeln!(w, "r_ref_m: {}", pair.r_ref)?;
        if let Some(hit) = &pair.los_hit {
            writeln!(w, "los_hit: building {} {:?}", hit.building_id, hit.face)?;
        }
        if let Some(hit) = &pair.ref_hit {
            writeln!(w, "ref_hit: building {} {:?}", hit.building_id, hit.face)?;
        }
        writeln!(w, "visibility: {visibility:?}")?;
        if visibility == Visibility::Multipath {
            writeln!(
                w,
                "multipath_offset_m: {}",
                multipath_offset(pair.r_ref, args.el)
            )?;
        } else {
            writeln!(w, "multipath_offset_m: 0")?;
        }
        Ok(())
    };
    report().map_err(|e| CliError::Runtime(e.to_string()))
}

fn parse_floats<const N: usize>(text: &str) -> Option<[f64; N]> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .ok()?;
    parts.try_into().ok()
}
