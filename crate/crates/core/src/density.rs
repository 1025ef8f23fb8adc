//! Piecewise-linear source densities on triangulated convex domains, with
//! exact mass, second-moment and segment integrals over convex polygons.

use log::warn;
use thiserror::Error;

use crate::geometry::{clip_tagged, cross, ConvexPolygon, HalfPlane, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("density value at vertex {0} is negative or not finite")]
    NegativeValue(usize),
    #[error("density integrates to zero")]
    ZeroMass,
    #[error("segment leaves the domain")]
    SegmentOutsideDomain,
}

/// Affine restriction of the density to one triangle, stored relative to
/// its first corner.
#[derive(Debug, Clone)]
struct LinearPiece {
    corners: [Point; 3],
    value0: f64,
    grad: Point,
    bbox: [f64; 4],
    area: f64,
}

impl LinearPiece {
    fn new(corners: [Point; 3], values: [f64; 3]) -> Self {
        let e1 = corners[1] - corners[0];
        let e2 = corners[2] - corners[0];
        let det = cross(e1, e2);
        let dv1 = values[1] - values[0];
        let dv2 = values[2] - values[0];
        let grad = Point::new((dv1 * e2.y - dv2 * e1.y) / det, (e1.x * dv2 - e2.x * dv1) / det);
        let xs = corners.map(|p| p.x);
        let ys = corners.map(|p| p.y);
        let bbox = [
            xs.iter().copied().fold(f64::INFINITY, f64::min),
            ys.iter().copied().fold(f64::INFINITY, f64::min),
            xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ];
        Self { corners, value0: values[0], grad, bbox, area: 0.5 * det }
    }

    #[inline]
    fn eval(&self, x: Point) -> f64 {
        self.value0 + self.grad.dot(&(x - self.corners[0]))
    }

    /// Outward half-planes of the three edges.
    fn halfplanes(&self) -> [HalfPlane; 3] {
        let c = self.corners;
        [0, 1, 2].map(|k| {
            let a = c[k];
            let e = c[(k + 1) % 3] - a;
            HalfPlane::through(a, Point::new(e.y, -e.x))
        })
    }

    fn overlaps(&self, b: &[f64; 4]) -> bool {
        self.bbox[0] <= b[2] && b[0] <= self.bbox[2] && self.bbox[1] <= b[3] && b[1] <= self.bbox[3]
    }

    /// Smallest barycentric coordinate of `x`; non-negative inside.
    fn min_barycentric(&self, x: Point) -> f64 {
        let [a, b, c] = self.corners;
        let l0 = cross(b - x, c - x);
        let l1 = cross(c - x, a - x);
        let l2 = cross(a - x, b - x);
        l0.min(l1).min(l2) / (2.0 * self.area)
    }

    /// Part of a convex polygon inside this triangle.
    fn clip(&self, poly: &[Point], tol: f64) -> Vec<Point> {
        let mut v = poly.to_vec();
        let mut tags = vec![(); v.len()];
        for hp in self.halfplanes() {
            (v, tags) = clip_tagged(&v, &tags, &hp, (), tol);
            if v.is_empty() {
                break;
            }
        }
        v
    }
}

/// A nonnegative piecewise-linear probability density over a triangulation of
/// a convex polygon.
#[derive(Debug, Clone)]
pub struct TriDensity {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    values: Vec<f64>,
    hull: ConvexPolygon,
    raw_integral: f64,
    pieces: Vec<LinearPiece>,
    scale: f64,
}

impl TriDensity {
    /// Validates the mesh and rescales the values so the density integrates
    /// to one. A warning is logged when rescaling was needed.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        values: Vec<f64>,
        hull: ConvexPolygon,
    ) -> Result<Self, DensityError> {
        let mut density = Self::build(vertices, triangles, values, hull)?;
        let raw = density.raw_integral;
        if (raw - 1.0).abs() > 1e-9 {
            warn!("density integrates to {raw}; rescaling to a probability density");
            density.rescale(1.0 / raw);
        }
        Ok(density)
    }

    fn build(
        vertices: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        values: Vec<f64>,
        hull: ConvexPolygon,
    ) -> Result<Self, DensityError> {
        if hull.is_empty() {
            return Err(DensityError::InvalidMesh("empty hull".into()));
        }
        if values.len() != vertices.len() {
            return Err(DensityError::InvalidMesh(format!(
                "{} values for {} vertices",
                values.len(),
                vertices.len()
            )));
        }
        if triangles.is_empty() {
            return Err(DensityError::InvalidMesh("no triangles".into()));
        }
        if let Some(i) = values.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(DensityError::NegativeValue(i));
        }
        let scale = hull.diameter();
        let hull_area = hull.area();
        let mut pieces = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&i| i >= vertices.len()) {
                return Err(DensityError::InvalidMesh(format!(
                    "triangle {t} references a missing vertex"
                )));
            }
            let mut c = tri.map(|i| vertices[i]);
            let doubled = cross(c[1] - c[0], c[2] - c[0]);
            if doubled.abs() <= 1e-14 * scale * scale {
                return Err(DensityError::InvalidMesh(format!("triangle {t} is degenerate")));
            }
            if doubled < 0.0 {
                tri.swap(1, 2);
                c = tri.map(|i| vertices[i]);
            }
            if c.iter().any(|&p| !hull.contains(p, 1e-9 * scale)) {
                return Err(DensityError::InvalidMesh(format!(
                    "triangle {t} sticks out of the domain"
                )));
            }
            pieces.push(LinearPiece::new(c, tri.map(|i| values[i])));
        }
        let covered: f64 = pieces.iter().map(|p| p.area).sum();
        if (covered - hull_area).abs() > 1e-9 * hull_area {
            return Err(DensityError::InvalidMesh(format!(
                "triangles cover area {covered}, domain has area {hull_area}"
            )));
        }
        let raw_integral: f64 = pieces
            .iter()
            .map(|p| p.area * (p.value0 + p.eval(p.corners[1]) + p.eval(p.corners[2])) / 3.0)
            .sum();
        if raw_integral <= 0.0 {
            return Err(DensityError::ZeroMass);
        }
        Ok(Self { vertices, triangles, values, hull, raw_integral, pieces, scale })
    }

    fn rescale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
        for p in &mut self.pieces {
            p.value0 *= factor;
            p.grad *= factor;
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Counter-clockwise vertex index triples.
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Per-vertex values after normalization.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The domain `X`.
    pub fn hull(&self) -> &ConvexPolygon {
        &self.hull
    }

    /// Integral of the values as given, before normalization.
    pub fn raw_integral(&self) -> f64 {
        self.raw_integral
    }

    /// Diameter of the domain.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn triangle_corners(&self, t: usize) -> [Point; 3] {
        self.pieces[t].corners
    }

    pub fn triangle_values(&self, t: usize) -> [f64; 3] {
        self.triangles[t].map(|i| self.values[i])
    }

    pub fn triangle_mass(&self, t: usize) -> f64 {
        let p = &self.pieces[t];
        p.area * self.triangle_values(t).iter().sum::<f64>() / 3.0
    }

    /// Density at `x`, or `None` outside the domain.
    pub fn value_at(&self, x: Point) -> Option<f64> {
        let tol = 1e-12;
        self.pieces
            .iter()
            .filter(|p| {
                p.bbox[0] - tol <= x.x && x.x <= p.bbox[2] + tol && p.bbox[1] - tol <= x.y && x.y <= p.bbox[3] + tol
            })
            .map(|p| (p.min_barycentric(x), p))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .filter(|(b, _)| *b >= -tol)
            .map(|(_, p)| p.eval(x).max(0.0))
    }

    /// Pieces of `poly` cut by the triangulation, each with its linear density.
    fn for_each_piece(&self, poly: &ConvexPolygon, mut f: impl FnMut(&LinearPiece, &[Point])) {
        let Some(bb) = poly.bbox() else { return };
        let tol = 1e-12 * self.scale;
        for piece in self.pieces.iter().filter(|p| p.overlaps(&bb)) {
            let part = piece.clip(poly.vertices(), tol);
            if part.len() >= 3 {
                f(piece, &part);
            }
        }
    }

    /// `∫_poly ρ`, exact up to rounding.
    pub fn mass(&self, poly: &ConvexPolygon) -> f64 {
        let mut total = 0.0;
        self.for_each_piece(poly, |piece, part| {
            // a linear function integrates to area × its value at the centroid
            let o = part[0];
            let mut area = 0.0;
            let mut moment = Point::zeros();
            for k in 1..part.len() - 1 {
                let a = part[k] - o;
                let b = part[k + 1] - o;
                let t = 0.5 * cross(a, b);
                area += t;
                moment += t * (a + b) / 3.0;
            }
            if area > 0.0 {
                total += area * piece.eval(o + moment / area);
            }
        });
        total.max(0.0)
    }

    /// `∫_poly ‖x − site‖² ρ(x) dx`, exact up to rounding.
    pub fn cost_integral(&self, poly: &ConvexPolygon, site: Point) -> f64 {
        let mut total = 0.0;
        self.for_each_piece(poly, |piece, part| {
            let f = |x: Point| (x - site).norm_squared() * piece.eval(x);
            let o = part[0];
            for k in 1..part.len() - 1 {
                total += cubic_triangle_rule(o, part[k], part[k + 1], f);
            }
        });
        total.max(0.0)
    }

    /// `∫_[a,b] ρ dℋ¹`. The segment is split where it crosses triangle edges
    /// and each piece integrated by the trapezoid rule, which is exact for a
    /// linear integrand.
    pub fn line_integral(&self, a: Point, b: Point) -> Result<f64, DensityError> {
        let tol = 1e-9 * self.scale;
        if !self.hull.contains(a, tol) || !self.hull.contains(b, tol) {
            return Err(DensityError::SegmentOutsideDomain);
        }
        let len = (b - a).norm();
        if len == 0.0 {
            return Ok(0.0);
        }
        let dir = b - a;
        let bb = [a.x.min(b.x), a.y.min(b.y), a.x.max(b.x), a.y.max(b.y)];
        let clip_tol = 1e-12 * self.scale;
        let mut breaks = vec![0.0, 1.0];
        let mut hits = Vec::new();
        for piece in self.pieces.iter().filter(|p| p.overlaps(&bb)) {
            if let Some((t0, t1)) = clip_segment(a, dir, &piece.halfplanes(), clip_tol) {
                breaks.push(t0);
                breaks.push(t1);
                hits.push(piece);
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|x, y| (*x - *y).abs() * len <= clip_tol);
        let mut total = 0.0;
        for w in breaks.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let mid = a + 0.5 * (t0 + t1) * dir;
            let Some(piece) = hits
                .iter()
                .max_by(|p, q| p.min_barycentric(mid).total_cmp(&q.min_barycentric(mid)))
            else {
                return Err(DensityError::SegmentOutsideDomain);
            };
            let f0 = piece.eval(a + t0 * dir).max(0.0);
            let f1 = piece.eval(a + t1 * dir).max(0.0);
            total += (t1 - t0) * len * 0.5 * (f0 + f1);
        }
        Ok(total)
    }
}

/// Parameter range `[t0, t1] ⊂ [0, 1]` of `a + t·dir` inside all half-planes.
fn clip_segment(a: Point, dir: Point, planes: &[HalfPlane], tol: f64) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for hp in planes {
        // eval(a + t dir) = fa + t * slope
        let fa = hp.eval(a) / hp.normal().norm();
        let slope = hp.normal().dot(&dir) / hp.normal().norm();
        if slope.abs() <= f64::EPSILON * dir.norm() {
            if fa > tol {
                return None;
            }
            continue;
        }
        let t = -fa / slope;
        if slope > 0.0 {
            t1 = t1.min(t);
        } else {
            t0 = t0.max(t);
        }
    }
    (t1 > t0).then_some((t0, t1))
}

/// Degree-3 exact rule on a triangle: vertices 3/60, edge midpoints 8/60,
/// centroid 27/60.
fn cubic_triangle_rule(a: Point, b: Point, c: Point, f: impl Fn(Point) -> f64) -> f64 {
    let area = 0.5 * cross(b - a, c - a);
    if area <= 0.0 {
        return 0.0;
    }
    let verts = f(a) + f(b) + f(c);
    let mids = f(0.5 * (a + b)) + f(0.5 * (b + c)) + f(0.5 * (c + a));
    let cen = f((a + b + c) / 3.0);
    area * (3.0 * verts + 8.0 * mids + 27.0 * cen) / 60.0
}

/// Unit-free raw mesh of the square-frame density on `[0,3]²`: 16 grid
/// vertices, 18 triangles, value 1 on the outer boundary and 0 on the inner
/// square `[1,2]²`. Diagonals are laid out with 4-fold rotational symmetry
/// about the center. Each corner cell is cut along the diagonal that avoids
/// its inner corner, so it holds a triangle of constant density.
pub fn square_frame_mesh() -> (Vec<Point>, Vec<[usize; 3]>, Vec<f64>) {
    let idx = |i: usize, j: usize| j * 4 + i;
    let mut vertices = Vec::with_capacity(16);
    let mut values = Vec::with_capacity(16);
    for j in 0..4 {
        for i in 0..4 {
            vertices.push(Point::new(i as f64, j as f64));
            let on_rim = i == 0 || i == 3 || j == 0 || j == 3;
            values.push(if on_rim { 1.0 } else { 0.0 });
        }
    }
    let mut triangles = Vec::with_capacity(18);
    for j in 0..3 {
        for i in 0..3 {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            let diagonal_ac = matches!((i, j), (2, 0) | (0, 2) | (1, 0) | (1, 2) | (1, 1));
            if diagonal_ac {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    (vertices, triangles, values)
}

/// [`square_frame_mesh`] scaled to a probability density on `[0,3]²`.
pub fn square_frame_density() -> TriDensity {
    let (vertices, triangles, values) = square_frame_mesh();
    // raw integral: 4 corner cells × 5/6 + 4 edge cells × 1/2 = 16/3
    let values = values.into_iter().map(|v| v * 3.0 / 16.0).collect();
    let hull = ConvexPolygon::rectangle(0.0, 0.0, 3.0, 3.0).expect("static square");
    TriDensity::new(vertices, triangles, values, hull).expect("static mesh")
}

/// Constant density on an axis-aligned rectangle.
pub fn uniform_rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<TriDensity, DensityError> {
    let hull = ConvexPolygon::rectangle(x0, y0, x1, y1)
        .map_err(|e| DensityError::InvalidMesh(e.to_string()))?;
    let vertices = hull.vertices().to_vec();
    let value = 1.0 / hull.area();
    TriDensity::new(vertices, vec![[0, 1, 2], [0, 2, 3]], vec![value; 4], hull)
}
