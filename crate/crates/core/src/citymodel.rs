//! Building footprints and the immutable city model the rays are cast against.
//!
//! Buildings are vertical prisms: a simple 2D footprint polygon extruded from
//! ground level (z = 0 in the local frame) up to `height_m`. Footprints are
//! normalized at load time: counter-clockwise winding, duplicate consecutive
//! vertices collapsed, zero-area and self-intersecting polygons rejected.
//!
//! The on-disk format is a single JSON document; footprints may be given either
//! as geodetic `[lat_deg, lon_deg]` pairs or directly in the local frame as
//! `[east_m, north_m]` pairs. See `data/citymodels/` for golden samples.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{geodetic_to_local, GeodeticPoint};

#[derive(Debug, Error)]
pub enum CityModelError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse city model: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid origin: {0}")]
    Origin(#[from] crate::geodesy::GeodesyError),
    #[error("building {id}: {reason}")]
    Building { id: u64, reason: FootprintError },
    #[error("duplicate building id {0}")]
    DuplicateId(u64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FootprintError {
    #[error("footprint has {0} vertices after collapsing duplicates; need at least 3")]
    TooFewVertices(usize),
    #[error("height {0} m is not positive")]
    NonPositiveHeight(f64),
    #[error("footprint polygon self-intersects")]
    SelfIntersecting,
    #[error("footprint has zero area")]
    ZeroArea,
    #[error("exactly one of `footprint` and `footprint_local_m` must be given")]
    AmbiguousFootprint,
    #[error("non-finite vertex coordinate")]
    NonFiniteVertex,
    #[error("invalid geodetic vertex: {0}")]
    BadGeodeticVertex(crate::geodesy::GeodesyError),
}

/// One extruded building: a validated CCW footprint plus a height.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingFootprint {
    pub id: u64,
    /// Footprint vertices `[east_m, north_m]`, CCW, no duplicate neighbors.
    pub vertices: Vec<[f64; 2]>,
    pub height_m: f64,
}

/// Axis-aligned 2D bounding box in the local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bbox2 {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bbox2 {
    fn empty() -> Self {
        Bbox2 {
            min: [f64::INFINITY; 2],
            max: [f64::NEG_INFINITY; 2],
        }
    }

    fn include(&mut self, p: [f64; 2]) {
        for (k, &c) in p.iter().enumerate() {
            self.min[k] = self.min[k].min(c);
            self.max[k] = self.max[k].max(c);
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }
}

/// Immutable set of buildings in a local ENU tangent frame.
///
/// Buildings are stored sorted by id; the model never changes after load, so
/// it is safe to share across any number of ray-casting workers.
#[derive(Debug, Clone, PartialEq)]
pub struct CityModel {
    origin: GeodeticPoint,
    buildings: Vec<BuildingFootprint>,
    bbox: Option<Bbox2>,
}

// ---------------------------------------------------------------------------
// On-disk schema
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CityModelDoc {
    origin: OriginDoc,
    buildings: Vec<BuildingDoc>,
}

#[derive(Serialize, Deserialize)]
struct OriginDoc {
    lat_deg: f64,
    lon_deg: f64,
    alt_m: f64,
}

#[derive(Serialize, Deserialize)]
struct BuildingDoc {
    id: u64,
    height_m: f64,
    /// Geodetic footprint: `[[lat_deg, lon_deg], ...]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    footprint: Option<Vec<[f64; 2]>>,
    /// Local-frame footprint: `[[east_m, north_m], ...]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    footprint_local_m: Option<Vec<[f64; 2]>>,
}

impl CityModel {
    /// Build a model from already-local footprints, applying full validation
    /// and normalization.
    pub fn from_buildings(
        origin: GeodeticPoint,
        buildings: Vec<BuildingFootprint>,
    ) -> Result<Self, CityModelError> {
        let mut normalized = Vec::with_capacity(buildings.len());
        for b in buildings {
            let vertices = normalize_footprint(b.id, b.vertices)
                .map_err(|reason| CityModelError::Building { id: b.id, reason })?;
            if !(b.height_m.is_finite() && b.height_m > 0.0) {
                return Err(CityModelError::Building {
                    id: b.id,
                    reason: FootprintError::NonPositiveHeight(b.height_m),
                });
            }
            normalized.push(BuildingFootprint {
                id: b.id,
                vertices,
                height_m: b.height_m,
            });
        }
        normalized.sort_by_key(|b| b.id);
        for w in normalized.windows(2) {
            if w[0].id == w[1].id {
                return Err(CityModelError::DuplicateId(w[0].id));
            }
        }
        let mut bbox = Bbox2::empty();
        let mut any = false;
        for b in &normalized {
            for &v in &b.vertices {
                bbox.include(v);
                any = true;
            }
        }
        Ok(CityModel {
            origin,
            buildings: normalized,
            bbox: any.then_some(bbox),
        })
    }

    /// Parse the JSON building-set format.
    pub fn from_json_str(text: &str) -> Result<Self, CityModelError> {
        let doc: CityModelDoc = serde_json::from_str(text)?;
        let origin =
            GeodeticPoint::from_degrees(doc.origin.lat_deg, doc.origin.lon_deg, doc.origin.alt_m)?;
        let mut buildings = Vec::with_capacity(doc.buildings.len());
        for b in doc.buildings {
            let vertices = match (b.footprint, b.footprint_local_m) {
                (Some(geo), None) => {
                    let mut out = Vec::with_capacity(geo.len());
                    for [lat_deg, lon_deg] in geo {
                        let p = GeodeticPoint::from_degrees(lat_deg, lon_deg, origin.alt_m)
                            .map_err(|e| CityModelError::Building {
                                id: b.id,
                                reason: FootprintError::BadGeodeticVertex(e),
                            })?;
                        let local = geodetic_to_local(&p, &origin);
                        out.push([local.x, local.y]);
                    }
                    out
                }
                (None, Some(local)) => local,
                _ => {
                    return Err(CityModelError::Building {
                        id: b.id,
                        reason: FootprintError::AmbiguousFootprint,
                    })
                }
            };
            buildings.push(BuildingFootprint {
                id: b.id,
                vertices,
                height_m: b.height_m,
            });
        }
        Self::from_buildings(origin, buildings)
    }

    /// Load a building-set file from disk.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CityModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CityModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// Serialize back to the file format, emitting local-frame footprints so a
    /// reload reproduces the geometry bit for bit.
    pub fn to_json_string(&self) -> String {
        let doc = CityModelDoc {
            origin: OriginDoc {
                lat_deg: self.origin.lat_rad.to_degrees(),
                lon_deg: self.origin.lon_rad.to_degrees(),
                alt_m: self.origin.alt_m,
            },
            buildings: self
                .buildings
                .iter()
                .map(|b| BuildingDoc {
                    id: b.id,
                    height_m: b.height_m,
                    footprint: None,
                    footprint_local_m: Some(b.vertices.clone()),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("city model serialization cannot fail")
    }

    pub fn origin(&self) -> &GeodeticPoint {
        &self.origin
    }

    /// Buildings sorted by ascending id.
    pub fn buildings(&self) -> &[BuildingFootprint] {
        &self.buildings
    }

    /// Bounding box over all footprint vertices; `None` for an empty model.
    pub fn bbox(&self) -> Option<Bbox2> {
        self.bbox
    }

    pub fn is_empty(&self) -> bool {
        self.buildings.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Footprint validation
// ---------------------------------------------------------------------------

/// Twice the signed area of a polygon (positive for CCW winding).
fn signed_area2(vertices: &[[f64; 2]]) -> f64 {
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        let [x0, y0] = vertices[i];
        let [x1, y1] = vertices[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    acc
}

fn normalize_footprint(id: u64, raw: Vec<[f64; 2]>) -> Result<Vec<[f64; 2]>, FootprintError> {
    if raw.iter().any(|v| !(v[0].is_finite() && v[1].is_finite())) {
        return Err(FootprintError::NonFiniteVertex);
    }
    // Collapse duplicate consecutive vertices, including a closing repeat of
    // the first vertex.
    let mut verts: Vec<[f64; 2]> = Vec::with_capacity(raw.len());
    for v in raw {
        if verts.last() != Some(&v) {
            verts.push(v);
        }
    }
    while verts.len() > 1 && verts.first() == verts.last() {
        verts.pop();
    }
    if verts.len() < 3 {
        return Err(FootprintError::TooFewVertices(verts.len()));
    }
    // Self-intersection first: a symmetric bowtie has zero signed area and
    // would otherwise be misreported.
    if self_intersects(&verts) {
        return Err(FootprintError::SelfIntersecting);
    }
    let area2 = signed_area2(&verts);
    if area2.abs() < 1e-9 {
        return Err(FootprintError::ZeroArea);
    }
    if area2 < 0.0 {
        verts.reverse();
    }
    let _ = id;
    Ok(verts)
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Segment intersection test for the simple-polygon check.
fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if (o1 > 0.0) != (o2 > 0.0) && (o3 > 0.0) != (o4 > 0.0) && o1 != 0.0 && o2 != 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// O(n^2) simple-polygon test over non-adjacent edge pairs.
fn self_intersects(vertices: &[[f64; 2]]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        for j in (i + 1)..n {
            // Skip adjacent edges (they share an endpoint by construction).
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

/// Convenience constructor for axis-aligned box footprints, used widely in
/// tests and fixtures.
pub fn rect_footprint(
    id: u64,
    e0: f64,
    n0: f64,
    e1: f64,
    n1: f64,
    height_m: f64,
) -> BuildingFootprint {
    BuildingFootprint {
        id,
        vertices: vec![[e0, n0], [e1, n0], [e1, n1], [e0, n1]],
        height_m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn test_origin() -> GeodeticPoint {
        GeodeticPoint::from_degrees(22.3, 114.17, 0.0).unwrap()
    }

    #[test]
    fn empty_model_loads() {
        let text =
            r#"{"origin": {"lat_deg": 22.3, "lon_deg": 114.17, "alt_m": 0.0}, "buildings": []}"#;
        let model = CityModel::from_json_str(text).unwrap();
        assert!(model.is_empty());
        assert!(model.bbox().is_none());
    }

    #[test]
    fn single_square_prism_loads() {
        let model = CityModel::from_buildings(
            test_origin(),
            vec![rect_footprint(7, 0.0, 0.0, 20.0, 20.0, 50.0)],
        )
        .unwrap();
        assert_eq!(model.buildings().len(), 1);
        let b = &model.buildings()[0];
        assert_eq!(
            b.vertices.len(),
            4,
            "square prism exposes 4 walls plus roof"
        );
        assert_eq!(b.height_m, 50.0);
    }

    #[test]
    fn two_vertex_footprint_reports_building_id() {
        let err = CityModel::from_buildings(
            test_origin(),
            vec![BuildingFootprint {
                id: 42,
                vertices: vec![[0.0, 0.0], [1.0, 0.0]],
                height_m: 5.0,
            }],
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("42"), "error must name the building id: {msg}");
    }

    #[test]
    fn non_positive_height_rejected() {
        let err = CityModel::from_buildings(
            test_origin(),
            vec![rect_footprint(3, 0.0, 0.0, 1.0, 1.0, 0.0)],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            CityModelError::Building {
                id: 3,
                reason: FootprintError::NonPositiveHeight(_)
            }
        ));
    }

    #[test]
    fn bowtie_rejected_as_self_intersecting() {
        let bowtie = BuildingFootprint {
            id: 9,
            vertices: vec![[0.0, 0.0], [10.0, 10.0], [10.0, 0.0], [0.0, 10.0]],
            height_m: 5.0,
        };
        let err = CityModel::from_buildings(test_origin(), vec![bowtie]).unwrap_err();
        assert!(matches!(
            err,
            CityModelError::Building {
                id: 9,
                reason: FootprintError::SelfIntersecting
            }
        ));
    }

    #[test]
    fn clockwise_footprint_normalized_to_ccw() {
        let cw = BuildingFootprint {
            id: 1,
            vertices: vec![[0.0, 0.0], [0.0, 10.0], [10.0, 10.0], [10.0, 0.0]],
            height_m: 5.0,
        };
        let model = CityModel::from_buildings(test_origin(), vec![cw]).unwrap();
        assert!(signed_area2(&model.buildings()[0].vertices) > 0.0);
    }

    #[test]
    fn duplicate_vertices_collapsed() {
        let b = BuildingFootprint {
            id: 1,
            vertices: vec![
                [0.0, 0.0],
                [0.0, 0.0],
                [10.0, 0.0],
                [10.0, 10.0],
                [10.0, 10.0],
                [0.0, 10.0],
                [0.0, 0.0],
            ],
            height_m: 5.0,
        };
        let model = CityModel::from_buildings(test_origin(), vec![b]).unwrap();
        assert_eq!(model.buildings()[0].vertices.len(), 4);
    }

    #[test]
    fn zero_area_rejected() {
        let degenerate = BuildingFootprint {
            id: 5,
            vertices: vec![[0.0, 0.0], [5.0, 0.0], [10.0, 0.0]],
            height_m: 5.0,
        };
        let err = CityModel::from_buildings(test_origin(), vec![degenerate]).unwrap_err();
        assert!(matches!(
            err,
            CityModelError::Building {
                id: 5,
                reason: FootprintError::ZeroArea
            }
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = CityModel::from_buildings(
            test_origin(),
            vec![
                rect_footprint(1, 0.0, 0.0, 1.0, 1.0, 5.0),
                rect_footprint(1, 3.0, 3.0, 4.0, 4.0, 5.0),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, CityModelError::DuplicateId(1)));
    }

    #[test]
    fn geodetic_footprints_convert_through_origin() {
        let text = r#"{
            "origin": {"lat_deg": 0.0, "lon_deg": 0.0, "alt_m": 0.0},
            "buildings": [
                {"id": 1, "height_m": 30.0,
                 "footprint": [[0.0, 0.0], [0.0, 1e-4], [1e-4, 1e-4], [1e-4, 0.0]]}
            ]
        }"#;
        let model = CityModel::from_json_str(text).unwrap();
        let b = &model.buildings()[0];
        // 1e-4 deg of latitude at the equator is about 11.06 m north.
        let north_extent = b
            .vertices
            .iter()
            .map(|v| v[1])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            (north_extent - 11.057).abs() < 0.01,
            "north extent {north_extent}"
        );
    }

    #[test]
    fn reload_is_bit_identical() {
        let text = r#"{
            "origin": {"lat_deg": 22.3, "lon_deg": 114.17, "alt_m": 3.5},
            "buildings": [
                {"id": 2, "height_m": 47.25, "footprint_local_m": [[0.1, 0.2], [10.3, 0.2], [10.3, 9.7], [0.1, 9.7]]},
                {"id": 1, "height_m": 12.5, "footprint": [[22.3001, 114.1702], [22.3002, 114.1702], [22.3002, 114.1703]]}
            ]
        }"#;
        let first = CityModel::from_json_str(text).unwrap();
        let second = CityModel::from_json_str(&first.to_json_string()).unwrap();
        assert_eq!(first, second, "serialize/reload must be bit-identical");
    }

    proptest! {
        #[test]
        fn bbox_contains_all_vertices(
            boxes in proptest::collection::vec((0u64..1000, -500.0f64..500.0, -500.0f64..500.0, 1.0f64..80.0, 1.0f64..80.0, 2.0f64..120.0), 1..20)
        ) {
            let mut buildings = Vec::new();
            for (i, (id, e, n, w, d, h)) in boxes.into_iter().enumerate() {
                buildings.push(rect_footprint(id * 1000 + i as u64, e, n, e + w, n + d, h));
            }
            let model = CityModel::from_buildings(test_origin(), buildings).unwrap();
            let bbox = model.bbox().unwrap();
            for b in model.buildings() {
                for &v in &b.vertices {
                    prop_assert!(bbox.contains(v));
                }
            }
        }
    }
}
