//! Ray casting against extruded building prisms.
//!
//! Two query paths share one intersection primitive:
//!
//! * [`cast_ray`] — brute force over every wall and roof face; the reference.
//! * [`GridIndex`] — a uniform 2D grid over footprints. Buildings are vertical
//!   prisms, so 2D binning is exact; the grid only culls candidates and the
//!   per-building math is byte-identical to the brute force path.
//!
//! Hits are ordered by `(distance, building id, face index)` so ties at shared
//! wall edges resolve deterministically on both paths.

use nalgebra::Vector3;
use thiserror::Error;

use crate::citymodel::{BuildingFootprint, CityModel};

/// Default maximum ray range, meters. Urban scales; configurable everywhere.
pub const DEFAULT_MAX_RANGE_M: f64 = 5000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RayError {
    #[error("ray direction has near-zero norm {0}")]
    DegenerateDirection(f64),
    #[error("non-finite ray component")]
    NonFinite,
}

/// A ray with a unit direction (`|direction| = 1` within 1e-12).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Vector3<f64>,
    direction: Vector3<f64>,
}

impl Ray {
    /// Build a ray, normalizing `direction`. Rejects degenerate directions.
    pub fn new(origin: Vector3<f64>, direction: Vector3<f64>) -> Result<Self, RayError> {
        if !(origin.iter().all(|c| c.is_finite()) && direction.iter().all(|c| c.is_finite())) {
            return Err(RayError::NonFinite);
        }
        let norm = direction.norm();
        if norm < 1e-12 {
            return Err(RayError::DegenerateDirection(norm));
        }
        Ok(Ray {
            origin,
            direction: direction / norm,
        })
    }

    /// Ray toward an (azimuth, elevation) direction. Azimuth is clockwise from
    /// north; elevation is up from the horizontal plane. The constructed
    /// direction is unit by construction.
    pub fn from_azimuth_elevation(
        origin: Vector3<f64>,
        azimuth_rad: f64,
        elevation_rad: f64,
    ) -> Self {
        let (sin_az, cos_az) = azimuth_rad.sin_cos();
        let (sin_el, cos_el) = elevation_rad.sin_cos();
        Ray {
            origin,
            direction: Vector3::new(sin_az * cos_el, cos_az * cos_el, sin_el),
        }
    }

    pub fn origin(&self) -> Vector3<f64> {
        self.origin
    }

    pub fn direction(&self) -> Vector3<f64> {
        self.direction
    }
}

/// Which face of a prism a ray hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    /// Wall `i` spans footprint vertices `i` and `i + 1 (mod n)`.
    Wall(usize),
    Roof,
}

impl Face {
    /// Tie-break rank: walls in index order, roof after all walls.
    fn rank(self) -> usize {
        match self {
            Face::Wall(i) => i,
            Face::Roof => usize::MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Distance along the ray, meters; always `< max_range`.
    pub distance: f64,
    pub building_id: u64,
    pub face: Face,
}

impl RayHit {
    /// Deterministic ordering: nearer first, then lower building id, then
    /// lower face rank. Used identically by both query paths.
    fn beats(&self, other: &RayHit) -> bool {
        (self.distance, self.building_id, self.face.rank())
            < (other.distance, other.building_id, other.face.rank())
    }
}

/// LOS + mirror ray query result. `r_los` / `r_ref` carry the hit distance, or
/// the `max_range` sentinel exactly when the corresponding hit is absent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayPairResult {
    pub r_los: f64,
    pub r_ref: f64,
    pub los_hit: Option<RayHit>,
    pub ref_hit: Option<RayHit>,
}

// ---------------------------------------------------------------------------
// Shared intersection primitive
// ---------------------------------------------------------------------------

/// Nearest intersection of `ray` with one prism, or `None`. Distances at or
/// beyond `max_range` do not count as hits, so the sentinel stays unambiguous.
fn intersect_prism(b: &BuildingFootprint, ray: &Ray, max_range: f64) -> Option<(f64, Face)> {
    let o = ray.origin;
    let d = ray.direction;
    let verts = &b.vertices;
    let n = verts.len();
    let mut best: Option<(f64, Face)> = None;

    // Walls: finite rectangles from z = 0 to z = height over each footprint edge.
    for i in 0..n {
        let v0 = verts[i];
        let v1 = verts[(i + 1) % n];
        let edge = [v1[0] - v0[0], v1[1] - v0[1]];
        // Horizontal plane normal; facing does not matter for blockage.
        let normal = [edge[1], -edge[0]];
        let denom = d.x * normal[0] + d.y * normal[1];
        if denom == 0.0 {
            continue; // parallel to the wall plane
        }
        let t = ((v0[0] - o.x) * normal[0] + (v0[1] - o.y) * normal[1]) / denom;
        if t < 0.0 || t >= max_range {
            continue;
        }
        let z = o.z + t * d.z;
        if z < 0.0 || z > b.height_m {
            continue;
        }
        let qx = o.x + t * d.x - v0[0];
        let qy = o.y + t * d.y - v0[1];
        let len2 = edge[0] * edge[0] + edge[1] * edge[1];
        let s = (qx * edge[0] + qy * edge[1]) / len2;
        if !(0.0..=1.0).contains(&s) {
            continue;
        }
        let cand = (t, Face::Wall(i));
        if best.is_none_or(|(bt, bf)| (t, cand.1.rank()) < (bt, bf.rank())) {
            best = Some(cand);
        }
    }

    // Roof: footprint polygon at z = height.
    if d.z != 0.0 {
        let t = (b.height_m - o.z) / d.z;
        if t >= 0.0 && t < max_range {
            let px = o.x + t * d.x;
            let py = o.y + t * d.y;
            if point_in_polygon([px, py], verts) {
                let better = best.is_none_or(|(bt, bf)| (t, Face::Roof.rank()) < (bt, bf.rank()));
                if better {
                    best = Some((t, Face::Roof));
                }
            }
        }
    }

    best
}

/// Even-odd crossing test.
fn point_in_polygon(p: [f64; 2], verts: &[[f64; 2]]) -> bool {
    let n = verts.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = verts[i];
        let [xj, yj] = verts[j];
        if (yi > p[1]) != (yj > p[1]) {
            let x_cross = (xj - xi) * (p[1] - yi) / (yj - yi) + xi;
            if p[0] < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

// ---------------------------------------------------------------------------
// Brute-force reference path
// ---------------------------------------------------------------------------

/// Nearest hit over every face of every building, or `None` if nothing is hit
/// within `max_range`. This is the reference the accelerated index must match
/// exactly.
pub fn cast_ray(model: &CityModel, ray: &Ray, max_range: f64) -> Option<RayHit> {
    debug_assert!(max_range > 0.0);
    let mut best: Option<RayHit> = None;
    for b in model.buildings() {
        if let Some((t, face)) = intersect_prism(b, ray, max_range) {
            let cand = RayHit {
                distance: t,
                building_id: b.id,
                face,
            };
            if best.is_none_or(|cur| cand.beats(&cur)) {
                best = Some(cand);
            }
        }
    }
    best
}

/// Cast the LOS ray toward (azimuth, elevation) and the mirror ray toward
/// (azimuth + pi, elevation), brute force.
pub fn cast_satellite_rays(
    model: &CityModel,
    receiver: &Vector3<f64>,
    azimuth_rad: f64,
    elevation_rad: f64,
    max_range: f64,
) -> RayPairResult {
    pair_result(
        cast_ray(
            model,
            &Ray::from_azimuth_elevation(*receiver, azimuth_rad, elevation_rad),
            max_range,
        ),
        cast_ray(
            model,
            &Ray::from_azimuth_elevation(
                *receiver,
                azimuth_rad + std::f64::consts::PI,
                elevation_rad,
            ),
            max_range,
        ),
        max_range,
    )
}

fn pair_result(los: Option<RayHit>, mirror: Option<RayHit>, max_range: f64) -> RayPairResult {
    RayPairResult {
        r_los: los.map_or(max_range, |h| h.distance),
        r_ref: mirror.map_or(max_range, |h| h.distance),
        los_hit: los,
        ref_hit: mirror,
    }
}

// ---------------------------------------------------------------------------
// Uniform-grid index
// ---------------------------------------------------------------------------

/// Uniform 2D grid over building footprints.
///
/// Queries return results identical to [`cast_ray`] for every ray: the grid
/// visits cells in entry order along the ray's horizontal projection and keeps
/// examining candidates until the next cell begins strictly beyond the best
/// hit, so equal-distance ties resolve through the same `(distance, id, face)`
/// ordering as the brute force path. Immutable after build; queries are
/// lock-free and safe from any number of threads.
#[derive(Debug, Clone)]
pub struct GridIndex {
    min: [f64; 2],
    cell_size: f64,
    nx: usize,
    ny: usize,
    /// Building indices per cell, row-major.
    cells: Vec<Vec<u32>>,
    n_buildings: usize,
}

/// Padding applied when binning footprint bounding boxes, so geometry lying
/// exactly on a cell boundary is reachable from both neighboring cells.
const BIN_EPS_M: f64 = 1e-7;

impl GridIndex {
    pub fn build(model: &CityModel) -> Self {
        let n_buildings = model.buildings().len();
        let Some(bbox) = model.bbox() else {
            return GridIndex {
                min: [0.0; 2],
                cell_size: 1.0,
                nx: 0,
                ny: 0,
                cells: Vec::new(),
                n_buildings,
            };
        };
        let ext = [bbox.max[0] - bbox.min[0], bbox.max[1] - bbox.min[1]];
        // Aim for roughly one building per cell, clamped to sane grid sizes.
        let area = (ext[0].max(1.0)) * (ext[1].max(1.0));
        let cell_size = (area / n_buildings as f64).sqrt().clamp(1.0, 10_000.0);
        let nx = ((ext[0] / cell_size).ceil() as usize).clamp(1, 1024);
        let ny = ((ext[1] / cell_size).ceil() as usize).clamp(1, 1024);
        // Recompute the cell size so the grid exactly covers the bbox.
        let cell_size = (ext[0] / nx as f64).max(ext[1] / ny as f64).max(1e-6);

        let mut cells = vec![Vec::new(); nx * ny];
        for (bi, b) in model.buildings().iter().enumerate() {
            let mut bmin = [f64::INFINITY; 2];
            let mut bmax = [f64::NEG_INFINITY; 2];
            for &v in &b.vertices {
                for k in 0..2 {
                    bmin[k] = bmin[k].min(v[k]);
                    bmax[k] = bmax[k].max(v[k]);
                }
            }
            let c0 = Self::cell_of(
                [bmin[0] - BIN_EPS_M, bmin[1] - BIN_EPS_M],
                bbox.min,
                cell_size,
                nx,
                ny,
            );
            let c1 = Self::cell_of(
                [bmax[0] + BIN_EPS_M, bmax[1] + BIN_EPS_M],
                bbox.min,
                cell_size,
                nx,
                ny,
            );
            for cy in c0[1]..=c1[1] {
                for cx in c0[0]..=c1[0] {
                    cells[cy * nx + cx].push(bi as u32);
                }
            }
        }
        GridIndex {
            min: bbox.min,
            cell_size,
            nx,
            ny,
            cells,
            n_buildings,
        }
    }

    fn cell_of(p: [f64; 2], min: [f64; 2], cell: f64, nx: usize, ny: usize) -> [usize; 2] {
        let cx = (((p[0] - min[0]) / cell).floor() as i64).clamp(0, nx as i64 - 1) as usize;
        let cy = (((p[1] - min[1]) / cell).floor() as i64).clamp(0, ny as i64 - 1) as usize;
        [cx, cy]
    }

    /// Accelerated equivalent of [`cast_ray`].
    pub fn cast_ray(&self, model: &CityModel, ray: &Ray, max_range: f64) -> Option<RayHit> {
        debug_assert!(max_range > 0.0);
        debug_assert_eq!(
            model.buildings().len(),
            self.n_buildings,
            "index built from another model"
        );
        if self.nx == 0 {
            return None;
        }

        let o = ray.origin;
        let d = ray.direction;
        let gmin = self.min;
        let gmax = [
            self.min[0] + self.cell_size * self.nx as f64,
            self.min[1] + self.cell_size * self.ny as f64,
        ];

        // Clip the ray parameter to the grid's horizontal extent.
        let mut t0 = 0.0f64;
        let mut t1 = max_range;
        for k in 0..2 {
            let (oc, dc) = if k == 0 { (o.x, d.x) } else { (o.y, d.y) };
            if dc == 0.0 {
                if oc < gmin[k] || oc > gmax[k] {
                    return None;
                }
            } else {
                let ta = (gmin[k] - oc) / dc;
                let tb = (gmax[k] - oc) / dc;
                let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
                t0 = t0.max(lo);
                t1 = t1.min(hi);
            }
        }
        if t0 > t1 {
            return None;
        }

        let mut visited = vec![false; self.n_buildings];
        let mut best: Option<RayHit> = None;
        let buildings = model.buildings();

        // Amanatides & Woo traversal over the 2D projection.
        let start = [o.x + t0 * d.x, o.y + t0 * d.y];
        let mut cell = Self::cell_of(start, gmin, self.cell_size, self.nx, self.ny);
        let step = [signum_step(d.x), signum_step(d.y)];
        let mut t_max = [f64::INFINITY; 2];
        let mut t_delta = [f64::INFINITY; 2];
        for k in 0..2 {
            let dc = if k == 0 { d.x } else { d.y };
            let oc = if k == 0 { o.x } else { o.y };
            if dc != 0.0 {
                let next_boundary = if step[k] > 0 {
                    gmin[k] + (cell[k] as f64 + 1.0) * self.cell_size
                } else {
                    gmin[k] + cell[k] as f64 * self.cell_size
                };
                t_max[k] = (next_boundary - oc) / dc;
                t_delta[k] = self.cell_size / dc.abs();
            }
        }

        let mut t_entry = t0;
        loop {
            // Stop once every remaining cell starts strictly beyond the best hit.
            if let Some(hit) = best {
                if t_entry > hit.distance {
                    break;
                }
            }
            for &bi in &self.cells[cell[1] * self.nx + cell[0]] {
                let bi = bi as usize;
                if visited[bi] {
                    continue;
                }
                visited[bi] = true;
                let b = &buildings[bi];
                if let Some((t, face)) = intersect_prism(b, ray, max_range) {
                    let cand = RayHit {
                        distance: t,
                        building_id: b.id,
                        face,
                    };
                    if best.is_none_or(|cur| cand.beats(&cur)) {
                        best = Some(cand);
                    }
                }
            }
            // Advance to the next cell along the ray.
            let axis = if t_max[0] <= t_max[1] { 0 } else { 1 };
            t_entry = t_max[axis];
            if t_entry > t1 {
                break;
            }
            let next = cell[axis] as i64 + step[axis];
            let limit = if axis == 0 { self.nx } else { self.ny } as i64;
            if next < 0 || next >= limit {
                break;
            }
            cell[axis] = next as usize;
            t_max[axis] += t_delta[axis];
        }

        best
    }

    /// Accelerated equivalent of [`cast_satellite_rays`].
    pub fn cast_satellite_rays(
        &self,
        model: &CityModel,
        receiver: &Vector3<f64>,
        azimuth_rad: f64,
        elevation_rad: f64,
        max_range: f64,
    ) -> RayPairResult {
        pair_result(
            self.cast_ray(
                model,
                &Ray::from_azimuth_elevation(*receiver, azimuth_rad, elevation_rad),
                max_range,
            ),
            self.cast_ray(
                model,
                &Ray::from_azimuth_elevation(
                    *receiver,
                    azimuth_rad + std::f64::consts::PI,
                    elevation_rad,
                ),
                max_range,
            ),
            max_range,
        )
    }
}

fn signum_step(d: f64) -> i64 {
    if d > 0.0 {
        1
    } else if d < 0.0 {
        -1
    } else {
        0
    }
}
