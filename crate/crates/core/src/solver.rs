//! Receiver position and clock estimation by iterative linearized least
//! squares, plus dilution-of-precision analysis.
//!
//! The linearized subproblem at each iterate minimizes `|A*dx - dP|_2` where
//! row i of A is `[(x_i - x)/rho_i, (y_i - y)/rho_i, (z_i - z)/rho_i, -1]` and
//! `dP` is measured-minus-modeled pseudorange. The subproblem is solved by QR
//! factorization rather than the normal equations: identical minimizer, better
//! conditioning. The clock unknown is carried in meters internally so the
//! fourth column of A is exactly -1, and converted to seconds at the boundary.

use nalgebra::{DMatrix, DVector, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::SPEED_OF_LIGHT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("need at least 4 usable measurements, got {0}")]
    InsufficientSatellites(usize),
    #[error("singular satellite geometry (rank < 4)")]
    SingularGeometry,
}

/// Convergence controls for the iterative solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Stop when the update norm `|dx|` falls below this, meters.
    pub epsilon_m: f64,
    pub max_iterations: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon_m: 1e-6,
            max_iterations: 20,
        }
    }
}

/// One pseudorange observation tied to a satellite position (any consistent
/// frame; the fix comes out in the same frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeObservation {
    pub sat_position: Vector3<f64>,
    pub pseudorange_m: f64,
}

/// Estimated receiver state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixSolution {
    pub position: Vector3<f64>,
    pub clock_bias_s: f64,
    pub iterations: u32,
    /// True iff the last update norm fell below `epsilon_m`. A non-converged
    /// solution is still returned after `max_iterations`.
    pub converged: bool,
    /// Post-fit measurement residual norm, meters.
    pub residual_norm_m: f64,
}

/// Build the n-by-4 geometry matrix at `position`; rows have unit-norm
/// direction components and a -1 clock column.
fn geometry_matrix(
    observations: &[RangeObservation],
    position: &Vector3<f64>,
) -> Result<DMatrix<f64>, SolverError> {
    let n = observations.len();
    let mut a = DMatrix::zeros(n, 4);
    for (i, obs) in observations.iter().enumerate() {
        let delta = obs.sat_position - position;
        let rho = delta.norm();
        if rho <= 0.0 {
            return Err(SolverError::SingularGeometry);
        }
        a[(i, 0)] = delta.x / rho;
        a[(i, 1)] = delta.y / rho;
        a[(i, 2)] = delta.z / rho;
        a[(i, 3)] = -1.0;
    }
    Ok(a)
}

/// Least-squares solve of `A*dx = dP` via QR; detects rank deficiency from the
/// R diagonal.
fn solve_subproblem(a: &DMatrix<f64>, dp: &DVector<f64>) -> Result<Vector4<f64>, SolverError> {
    let qr = a.clone().qr();
    let r = qr.r();
    let max_diag = (0..4).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    if max_diag <= 0.0 {
        return Err(SolverError::SingularGeometry);
    }
    for i in 0..4 {
        if r[(i, i)].abs() < 1e-10 * max_diag {
            return Err(SolverError::SingularGeometry);
        }
    }
    let rhs = qr.q().transpose() * dp;
    let dx = r
        .solve_upper_triangular(&rhs)
        .ok_or(SolverError::SingularGeometry)?;
    Ok(Vector4::new(dx[0], dx[1], dx[2], dx[3]))
}

/// Iterative linearized least-squares position fix.
///
/// Iterates until the update norm drops below `cfg.epsilon_m` or
/// `cfg.max_iterations` is reached; the `converged` flag reports which. Fails
/// fast on fewer than 4 observations or rank-deficient geometry.
pub fn solve_position(
    observations: &[RangeObservation],
    initial_position: &Vector3<f64>,
    initial_clock_s: f64,
    cfg: &SolverConfig,
) -> Result<FixSolution, SolverError> {
    if observations.len() < 4 {
        return Err(SolverError::InsufficientSatellites(observations.len()));
    }
    let mut position = *initial_position;
    let mut clock_m = SPEED_OF_LIGHT * initial_clock_s;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iterations {
        iterations += 1;
        let a = geometry_matrix(observations, &position)?;
        let dp = DVector::from_iterator(
            observations.len(),
            observations.iter().map(|obs| {
                let modeled = (obs.sat_position - position).norm() + clock_m;
                obs.pseudorange_m - modeled
            }),
        );
        let dx = solve_subproblem(&a, &dp)?;
        // With A's sign convention ([unit-to-sat, -1] rows and dP = measured -
        // modeled), the solved update is the negative of the state correction.
        position -= Vector3::new(dx[0], dx[1], dx[2]);
        clock_m -= dx[3];
        if dx.norm() < cfg.epsilon_m {
            converged = true;
            break;
        }
    }

    let residual_norm_m = observations
        .iter()
        .map(|obs| {
            let modeled = (obs.sat_position - position).norm() + clock_m;
            let r = obs.pseudorange_m - modeled;
            r * r
        })
        .sum::<f64>()
        .sqrt();

    Ok(FixSolution {
        position,
        clock_bias_s: clock_m / SPEED_OF_LIGHT,
        iterations,
        converged,
        residual_norm_m,
    })
}

// ---------------------------------------------------------------------------
// Dilution of precision
// ---------------------------------------------------------------------------

/// Solution-quality rating bins for GDOP. Lower bounds inclusive, upper
/// exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DopRating {
    Ideal,
    Excellent,
    Good,
    Moderate,
    Fair,
    Poor,
}

/// GDOP rating: <1 Ideal, [1,2) Excellent, [2,5) Good, [5,10) Moderate,
/// [10,20) Fair, >=20 Poor. Total on all inputs (NaN rates Poor).
pub fn classify_dop(value: f64) -> DopRating {
    if value < 1.0 {
        DopRating::Ideal
    } else if value < 2.0 {
        DopRating::Excellent
    } else if value < 5.0 {
        DopRating::Good
    } else if value < 10.0 {
        DopRating::Moderate
    } else if value < 20.0 {
        DopRating::Fair
    } else {
        DopRating::Poor
    }
}

/// DOP components extracted from `D = (A^T A)^-1`.
///
/// The solver operates in the local ENU frame, so the position block of D is
/// already horizontal/vertical aligned: HDOP reads the east/north diagonal,
/// VDOP the up diagonal (positions in a non-local frame must be rotated to ENU
/// before calling).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DopComponents {
    pub gdop: f64,
    pub pdop: f64,
    pub hdop: f64,
    pub vdop: f64,
    pub tdop: f64,
    /// A-priori measurement sigma, meters; `gdop * sigma` is the expected
    /// solution-error standard deviation.
    pub sigma_m: f64,
    pub rating: DopRating,
}

/// The 4x4 cofactor matrix `D = (A^T A)^-1` at a receiver estimate, computed
/// from the QR factors of A (`D = R^-1 R^-T`).
pub fn geometry_cofactor(
    sat_positions: &[Vector3<f64>],
    receiver: &Vector3<f64>,
) -> Result<Matrix4<f64>, SolverError> {
    if sat_positions.len() < 4 {
        return Err(SolverError::InsufficientSatellites(sat_positions.len()));
    }
    let observations: Vec<RangeObservation> = sat_positions
        .iter()
        .map(|p| RangeObservation {
            sat_position: *p,
            pseudorange_m: 0.0,
        })
        .collect();
    let a = geometry_matrix(&observations, receiver)?;
    let qr = a.qr();
    let r = qr.r();
    let max_diag = (0..4).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    if max_diag <= 0.0 {
        return Err(SolverError::SingularGeometry);
    }
    for i in 0..4 {
        if r[(i, i)].abs() < 1e-10 * max_diag {
            return Err(SolverError::SingularGeometry);
        }
    }
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(4, 4))
        .ok_or(SolverError::SingularGeometry)?;
    let d = &r_inv * r_inv.transpose();
    Ok(Matrix4::from_fn(|i, j| d[(i, j)]))
}

/// DOP components at a receiver estimate: GDOP from the full trace of D, PDOP
/// from the position block, HDOP/VDOP from its horizontal/vertical split, TDOP
/// from the clock entry.
pub fn compute_dop(
    sat_positions: &[Vector3<f64>],
    receiver: &Vector3<f64>,
    sigma_m: f64,
) -> Result<DopComponents, SolverError> {
    let d = geometry_cofactor(sat_positions, receiver)?;
    let gdop = (d[(0, 0)] + d[(1, 1)] + d[(2, 2)] + d[(3, 3)]).sqrt();
    let pdop = (d[(0, 0)] + d[(1, 1)] + d[(2, 2)]).sqrt();
    let hdop = (d[(0, 0)] + d[(1, 1)]).sqrt();
    let vdop = d[(2, 2)].sqrt();
    let tdop = d[(3, 3)].sqrt();
    Ok(DopComponents {
        gdop,
        pdop,
        hdop,
        vdop,
        tdop,
        sigma_m,
        rating: classify_dop(gdop),
    })
}
