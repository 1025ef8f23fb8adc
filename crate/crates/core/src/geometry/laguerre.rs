use rayon::prelude::*;

use super::cost::{cost, laguerre_halfplane};
use super::polygon::{clip_tagged, signed_area, REL_TOL};
use super::{ConvexPolygon, GeometryError, Point};

/// Finitely supported target measure `Σ ν_i δ_{y_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMeasure {
    points: Vec<Point>,
    masses: Vec<f64>,
}

impl TargetMeasure {
    pub fn new(points: Vec<Point>, masses: Vec<f64>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::InvalidTargets("no target points".into()));
        }
        if points.len() != masses.len() {
            return Err(GeometryError::InvalidTargets(format!(
                "{} points but {} masses",
                points.len(),
                masses.len()
            )));
        }
        if let Some(i) = masses.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(GeometryError::InvalidTargets(format!(
                "mass {i} is not positive: {}",
                masses[i]
            )));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(GeometryError::InvalidTargets(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(GeometryError::InvalidTargets("non-finite target point".into()));
        }
        let scale = super::polygon::bbox(&points)
            .map(|b| ((b[2] - b[0]).powi(2) + (b[3] - b[1]).powi(2)).sqrt())
            .filter(|&d| d > 0.0)
            .unwrap_or(1.0);
        // sort by x so the coincidence check only looks at a sliding window
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| points[a].x.total_cmp(&points[b].x));
        let tol = REL_TOL * scale;
        for (k, &i) in order.iter().enumerate() {
            for &j in &order[k + 1..] {
                if points[j].x - points[i].x > tol {
                    break;
                }
                if (points[i] - points[j]).norm() <= tol {
                    return Err(GeometryError::CoincidentTargets(i.min(j), i.max(j)));
                }
            }
        }
        Ok(Self { points, masses })
    }

    /// Equal masses `1/N` on the given points.
    pub fn uniform(points: Vec<Point>) -> Result<Self, GeometryError> {
        let n = points.len().max(1);
        let masses = vec![1.0 / n as f64; points.len()];
        Self::new(points, masses)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// What lies on the other side of a cell edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeTag {
    Neighbor(usize),
    DomainBoundary,
}

/// One Laguerre cell. Edge `k` runs from `vertices[k]` to `vertices[k + 1]`
/// and is tagged by `tags[k]`. An empty cell has no vertices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LaguerreCell {
    vertices: Vec<Point>,
    tags: Vec<EdgeTag>,
}

impl LaguerreCell {
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn tags(&self) -> &[EdgeTag] {
        &self.tags
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn polygon(&self) -> ConvexPolygon {
        ConvexPolygon::from_clipped(self.vertices.clone())
    }

    /// `(start, end, tag)` for every edge.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point, EdgeTag)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n], self.tags[k]))
    }
}

/// Power diagram of a convex domain for the quadratic cost.
#[derive(Debug, Clone, PartialEq)]
pub struct LaguerreDiagram {
    cells: Vec<LaguerreCell>,
    scale: f64,
}

impl LaguerreDiagram {
    pub fn cells(&self) -> &[LaguerreCell] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &LaguerreCell {
        &self.cells[i]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Diameter of the domain; the unit for every geometric tolerance.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Index of the cell whose polygon contains `x` (lowest index on shared
    /// boundaries), by point-in-polygon tests only.
    pub fn cell_containing(&self, x: Point, tol: f64) -> Option<usize> {
        self.cells
            .iter()
            .position(|c| !c.is_empty() && c.polygon().contains(x, tol))
    }
}

/// Builds `Lag_i(ψ) = X ∩ ⋂_{j≠i} {x : c(x, y_i) + ψ_i ≤ c(x, y_j) + ψ_j}`
/// by clipping the domain against every competing site.
pub fn laguerre_diagram(
    domain: &ConvexPolygon,
    targets: &TargetMeasure,
    psi: &[f64],
) -> Result<LaguerreDiagram, GeometryError> {
    if psi.len() != targets.len() {
        return Err(GeometryError::DimensionMismatch {
            potentials: psi.len(),
            targets: targets.len(),
        });
    }
    if domain.len() < 3 || domain.area() <= 0.0 {
        return Err(GeometryError::EmptyDomain);
    }
    if let Some(i) = psi.iter().position(|p| !p.is_finite()) {
        return Err(GeometryError::NonFinitePotential(i));
    }
    let scale = domain.diameter();
    let tol = REL_TOL * scale;
    let sites = targets.points();
    let psi_min = psi.iter().copied().fold(f64::INFINITY, f64::min);
    let cells = (0..sites.len())
        .into_par_iter()
        .map(|i| build_cell(domain, sites, psi, psi_min, i, tol))
        .collect();
    Ok(LaguerreDiagram { cells, scale })
}

const NEAR_BATCH: usize = 64;

fn build_cell(
    domain: &ConvexPolygon,
    sites: &[Point],
    psi: &[f64],
    psi_min: f64,
    i: usize,
    tol: f64,
) -> LaguerreCell {
    let yi = sites[i];
    // nearest competitors first keeps the working polygon small
    let mut order: Vec<(f64, usize)> = (0..sites.len())
        .filter(|&j| j != i)
        .map(|j| ((sites[j] - yi).norm(), j))
        .collect();
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    // most cells close after a few dozen neighbours, so only sort the rest on demand
    let head = NEAR_BATCH.min(order.len());
    if head < order.len() {
        order.select_nth_unstable_by(head, by_distance);
    }
    order[..head].sort_unstable_by(by_distance);
    let mut vertices = domain.vertices().to_vec();
    let mut tags = vec![EdgeTag::DomainBoundary; vertices.len()];
    let mut reach = max_distance(&vertices, yi);
    for k in 0..order.len() {
        if k == head {
            order[head..].sort_unstable_by(by_distance);
        }
        let (dist, j) = order[k];
        // every x in the cell has |x − y_j| ≥ dist − reach, so once that bound
        // beats the cell's own power no farther site can cut it
        if dist >= reach && (dist - reach).powi(2) + psi_min >= reach * reach + psi[i] {
            break;
        }
        let hp = laguerre_halfplane(yi, sites[j], psi[i], psi[j]);
        if vertices.iter().all(|v| hp.eval(*v) <= 0.0) {
            continue;
        }
        (vertices, tags) = clip_tagged(&vertices, &tags, &hp, EdgeTag::Neighbor(j), tol);
        if vertices.is_empty() {
            break;
        }
        reach = max_distance(&vertices, yi);
    }
    LaguerreCell { vertices, tags }
}

fn max_distance(vertices: &[Point], y: Point) -> f64 {
    vertices.iter().map(|v| (v - y).norm()).fold(0.0, f64::max)
}

/// `argmin_i c(x, y_i) + ψ_i`, ties going to the lowest index.
pub fn locate(
    domain: &ConvexPolygon,
    targets: &TargetMeasure,
    psi: &[f64],
    x: Point,
) -> Result<usize, GeometryError> {
    if psi.len() != targets.len() {
        return Err(GeometryError::DimensionMismatch {
            potentials: psi.len(),
            targets: targets.len(),
        });
    }
    if !domain.contains(x, REL_TOL * domain.diameter()) {
        return Err(GeometryError::OutsideDomain { x: x.x, y: x.y });
    }
    Ok(argmin_power(targets.points(), psi, x))
}

/// Unchecked core of [`locate`].
pub(crate) fn argmin_power(sites: &[Point], psi: &[f64], x: Point) -> usize {
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, (&y, &p)) in sites.iter().zip(psi).enumerate() {
        let v = cost(x, y) + p;
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    best
}
