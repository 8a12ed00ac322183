//! Cross-sections of a frame-aligned closed mesh.
//!
//! Slices are planes perpendicular to the major axis (local x). From a point
//! on the axis, rays are cast in the slice plane and their surface hits are
//! collected into point groups, one per body part crossing the plane. In
//! parity-refined mode a ray's hit count tells whether its origin is inside
//! the surface: pairs of hits bound interior intervals whose midpoints seed
//! further groups.

mod parts;
mod ray;

pub use parts::{classify_parts, Chain, ChainNode, PartChains, PartLabel};
pub use ray::{
    intersect_ray, sphere_directions, Hit, ParityVote, RayCast, RayCaster, DEDUP_DISTANCE, GRAZING_COSINE,
    JITTER_ANGLE, MIN_HIT_DISTANCE,
};

use crate::linalg::Vec3;
use crate::mesh::{validate_topology, Mesh};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::TAU;
use thiserror::Error;

/// Depth limit for seeding new centers from interval midpoints.
pub const MAX_REFINE_DEPTH: usize = 3;
/// Minimum fraction of a group center's own rays that must report odd parity.
pub const CENTER_PARITY_FRACTION: f64 = 0.9;
/// Times an interior group is re-cast from its own center.
pub const RECENTER_ITERATIONS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SliceError {
    #[error("mesh is not closed: {boundary} boundary edges, {non_manifold} non-manifold edges")]
    NotClosed { boundary: usize, non_manifold: usize },
    #[error("mesh has {0} non-manifold vertices")]
    NonManifoldVertices(usize),
    #[error("invalid slice config: {0}")]
    Config(String),
    #[error("no interior point found from the candidate center")]
    NoInteriorFound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SliceMode {
    /// First hit of every ray from the axis point.
    Nearest,
    /// Every hit of every ray.
    All,
    /// Parity-driven refinement into one group per enclosed section.
    #[default]
    #[serde(alias = "parity")]
    ParityRefined,
}

impl std::str::FromStr for SliceMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nearest" => Ok(SliceMode::Nearest),
            "all" => Ok(SliceMode::All),
            "parity" | "parity-refined" => Ok(SliceMode::ParityRefined),
            other => Err(format!("unknown slice mode `{other}` (nearest|all|parity)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceConfig {
    pub slice_count: usize,
    pub ray_count: usize,
    pub mode: SliceMode,
}

impl Default for SliceConfig {
    fn default() -> Self {
        SliceConfig {
            slice_count: 32,
            ray_count: 64,
            mode: SliceMode::ParityRefined,
        }
    }
}

impl SliceConfig {
    pub fn validate(&self) -> Result<(), SliceError> {
        if self.slice_count < 2 {
            return Err(SliceError::Config(format!("slice_count {} < 2", self.slice_count)));
        }
        if self.ray_count < 8 {
            return Err(SliceError::Config(format!("ray_count {} < 8", self.ray_count)));
        }
        Ok(())
    }
}

/// A plane with an in-plane orthonormal basis `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicePlane {
    pub point: Vec3,
    pub normal: Vec3,
    pub u: Vec3,
    pub v: Vec3,
}

impl SlicePlane {
    pub fn new(point: Vec3, normal: Vec3) -> Self {
        let normal = normal.normalize();
        let seed = [Vec3::y(), Vec3::z(), Vec3::x()]
            .into_iter()
            .find(|e| e.dot(&normal).abs() < 0.9)
            .expect("one axis is far from any unit normal");
        let u = (seed - normal * seed.dot(&normal)).normalize();
        let v = normal.cross(&u);
        SlicePlane { point, normal, u, v }
    }

    /// Plane `x = coordinate` in frame coordinates, basis `(y, z)`.
    pub fn across_major_axis(coordinate: f64) -> Self {
        SlicePlane::new(Vec3::new(coordinate, 0.0, 0.0), Vec3::x())
    }

    pub fn direction(&self, angle: f64) -> Vec3 {
        self.u * angle.cos() + self.v * angle.sin()
    }

    pub fn directions(&self, count: usize) -> Vec<Vec3> {
        (0..count).map(|k| self.direction(TAU * k as f64 / count as f64)).collect()
    }

    /// In-plane coordinates of `p` relative to `origin`.
    pub fn project(&self, p: &Vec3, origin: &Vec3) -> (f64, f64) {
        let d = p - origin;
        (d.dot(&self.u), d.dot(&self.v))
    }

    /// Angle of `p` about `origin` in `[0, 2 pi)`.
    pub fn angle_of(&self, p: &Vec3, origin: &Vec3) -> f64 {
        let (x, y) = self.project(p, origin);
        y.atan2(x).rem_euclid(TAU)
    }
}

/// Surface points around one section, ordered by the ray that found them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointGroup {
    pub points: Vec<Vec3>,
    pub center: Vec3,
    pub parity_valid: bool,
}

impl PointGroup {
    fn new(points: Vec<Vec3>) -> Self {
        let center = crate::linalg::mean(&points).unwrap_or_else(Vec3::zeros);
        PointGroup {
            points,
            center,
            parity_valid: false,
        }
    }

    fn polygon(&self, plane: &SlicePlane) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| plane.project(p, &self.center)).collect()
    }

    /// Area enclosed by the points taken as a polygon in the slice plane.
    pub fn area(&self, plane: &SlicePlane) -> f64 {
        let poly = self.polygon(plane);
        let n = poly.len();
        let twice: f64 = (0..n)
            .map(|i| {
                let (x0, y0) = poly[i];
                let (x1, y1) = poly[(i + 1) % n];
                x0 * y1 - x1 * y0
            })
            .sum();
        0.5 * twice.abs()
    }

    /// Mean distance of the points from the center.
    pub fn radius(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.points.iter().map(|p| (p - self.center).norm()).sum::<f64>() / self.points.len() as f64
    }

    /// Even-odd point-in-polygon test in the slice plane.
    pub fn polygon_contains(&self, plane: &SlicePlane, p: &Vec3) -> bool {
        let poly = self.polygon(plane);
        let (px, py) = plane.project(p, &self.center);
        let mut inside = false;
        let n = poly.len();
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = poly[i];
            let (xj, yj) = poly[j];
            if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub axis_coordinate: f64,
    pub origin: Vec3,
    pub ray_count: usize,
    pub groups: Vec<PointGroup>,
}

/// Closedness and vertex-manifoldness, required for parity arguments.
pub fn check_closed(mesh: &Mesh) -> Result<(), SliceError> {
    let report = validate_topology(mesh);
    if !report.is_closed {
        return Err(SliceError::NotClosed {
            boundary: report.boundary_edge_count,
            non_manifold: report.non_manifold_edge_count,
        });
    }
    let pinched = crate::mesh::non_manifold_vertex_count(mesh);
    if pinched > 0 {
        return Err(SliceError::NonManifoldVertices(pinched));
    }
    Ok(())
}

fn group_parity(caster: &RayCaster, plane: &SlicePlane, group: &mut PointGroup, ray_count: usize) {
    let vote = caster.parity(&group.center, &plane.directions(ray_count), &plane.normal);
    group.parity_valid = vote.odd_fraction() >= CENTER_PARITY_FRACTION;
}

/// Interior intervals along one ray that do not contain its origin.
fn far_intervals(hits: &[Hit]) -> impl Iterator<Item = (Vec3, Vec3)> + '_ {
    let skip = hits.len() % 2;
    hits[skip..].chunks_exact(2).map(|pair| (pair[0].point, pair[1].point))
}

/// Nearest hits of the odd rays, re-cast from their mean while it stays
/// interior and keeps moving.
fn recentered_group(caster: &RayCaster, plane: &SlicePlane, directions: &[Vec3], casts: &[RayCast]) -> Option<PointGroup> {
    let nearest_odd = |casts: &[RayCast]| -> Vec<Vec3> {
        casts
            .iter()
            .filter(|c| c.hits.len() % 2 == 1)
            .map(|c| c.hits[0].point)
            .collect()
    };
    let points = nearest_odd(casts);
    if points.len() < 3 {
        return None;
    }
    let mut group = PointGroup::new(points);
    for _ in 0..RECENTER_ITERATIONS {
        let casts: Vec<RayCast> = directions
            .iter()
            .map(|d| caster.cast(&group.center, d, &plane.normal))
            .filter(|c| !c.grazed)
            .collect();
        let points = nearest_odd(&casts);
        if 2 * points.len() <= casts.len() || points.len() < 3 {
            break;
        }
        let next = PointGroup::new(points);
        let moved = (next.center - group.center).norm();
        let scale = group.radius();
        group = next;
        if moved <= 1e-9 * scale {
            break;
        }
    }
    Some(group)
}

/// Parity refinement from a candidate center.
///
/// A candidate whose rays mostly report odd hit counts is interior: its
/// group is the nearest hit of every odd ray (nearest hits of even rays are
/// discarded). Hit pairs beyond the first crossing (or all pairs, for an
/// exterior candidate) bound interior intervals of other sections; their
/// midpoints become new candidates, up to [`MAX_REFINE_DEPTH`] generations.
/// Candidates already enclosed by a found group are skipped. A new group is
/// re-cast from its own mean so that its center does not depend on where
/// inside the section the candidate fell.
pub fn refine_center(
    caster: &RayCaster,
    candidate: &Vec3,
    plane: &SlicePlane,
    ray_count: usize,
) -> Result<Vec<PointGroup>, SliceError> {
    let directions = plane.directions(ray_count);
    let mut groups: Vec<PointGroup> = Vec::new();
    let mut queue: VecDeque<(Vec3, usize)> = VecDeque::from([(*candidate, 0)]);
    let budget = 4 * ray_count;
    let mut processed = 0;

    while let Some((point, depth)) = queue.pop_front() {
        if groups.iter().any(|g| g.polygon_contains(plane, &point)) {
            continue;
        }
        processed += 1;
        if processed > budget {
            log::debug!("refinement budget exhausted with {} candidates queued", queue.len() + 1);
            break;
        }
        let casts: Vec<RayCast> = directions
            .iter()
            .map(|d| caster.cast(&point, d, &plane.normal))
            .filter(|c| !c.grazed)
            .collect();
        let odd = casts.iter().filter(|c| c.hits.len() % 2 == 1).count();
        let interior = odd > casts.len() - odd;
        let expected_parity = if interior { 1 } else { 0 };
        for cast in casts.iter().filter(|c| c.hits.len() % 2 == expected_parity) {
            if depth < MAX_REFINE_DEPTH {
                for (a, b) in far_intervals(&cast.hits) {
                    queue.push_back(((a + b) / 2.0, depth + 1));
                }
            }
        }
        if interior {
            if let Some(mut group) = recentered_group(caster, plane, &directions, &casts) {
                group_parity(caster, plane, &mut group, ray_count);
                let duplicate = groups.iter().any(|g| g.polygon_contains(plane, &group.center));
                if !duplicate {
                    groups.push(group);
                }
            }
        }
    }

    if groups.is_empty() {
        return Err(SliceError::NoInteriorFound);
    }
    Ok(groups)
}

/// Groups for one slice plane, ordered by the in-plane angle of their first
/// point about the plane's point.
pub fn slice_at(caster: &RayCaster, plane: &SlicePlane, ray_count: usize, mode: SliceMode) -> Vec<PointGroup> {
    let origin = plane.point;
    let mut groups = match mode {
        SliceMode::Nearest | SliceMode::All => {
            let mut points = Vec::new();
            for d in plane.directions(ray_count) {
                let cast = caster.cast(&origin, &d, &plane.normal);
                if cast.grazed {
                    continue;
                }
                match mode {
                    SliceMode::Nearest => points.extend(cast.hits.first().map(|h| h.point)),
                    _ => points.extend(cast.hits.iter().map(|h| h.point)),
                }
            }
            if points.len() < 3 {
                Vec::new()
            } else {
                let mut group = PointGroup::new(points);
                group_parity(caster, plane, &mut group, ray_count);
                vec![group]
            }
        }
        SliceMode::ParityRefined => refine_center(caster, &origin, plane, ray_count)
            .map(|groups| groups.into_iter().filter(|g| g.parity_valid).collect())
            .unwrap_or_default(),
    };
    groups.retain(|g| g.points.len() >= 3);
    groups.sort_by(|a, b| {
        plane
            .angle_of(&a.points[0], &origin)
            .total_cmp(&plane.angle_of(&b.points[0], &origin))
    });
    groups
}

/// Axis coordinates of `count` slices at the centers of equal bins over
/// `[min, max]`.
pub fn slice_positions(min: f64, max: f64, count: usize) -> Vec<f64> {
    let step = (max - min) / count as f64;
    (0..count).map(|i| min + (i as f64 + 0.5) * step).collect()
}

/// Slices a frame-aligned closed mesh perpendicular to its major (x) axis.
pub fn slice_mesh(mesh: &Mesh, config: &SliceConfig) -> Result<Vec<Slice>, SliceError> {
    config.validate()?;
    check_closed(mesh)?;
    let (min, max) = mesh.bounds();
    let caster = RayCaster::new(mesh);
    let slices = slice_positions(min.x, max.x, config.slice_count)
        .into_par_iter()
        .map(|x| {
            let plane = SlicePlane::across_major_axis(x);
            Slice {
                axis_coordinate: x,
                origin: plane.point,
                ray_count: config.ray_count,
                groups: slice_at(&caster, &plane, config.ray_count, config.mode),
            }
        })
        .collect();
    Ok(slices)
}
