use super::{GeometryError, Point};

/// Relative tolerance used for vertex de-duplication and convexity checks.
pub(crate) const REL_TOL: f64 = 1e-12;

/// A convex polygon with counter-clockwise vertices. The empty polygon is a
/// valid value and is what clipping returns when nothing survives.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
}

impl ConvexPolygon {
    /// Builds a validated polygon. Clockwise input is reversed.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(GeometryError::InvalidPolygon("non-finite coordinate".into()));
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        let scale = diameter(&vertices);
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).norm() <= REL_TOL * scale {
                return Err(GeometryError::InvalidPolygon(format!(
                    "duplicate consecutive vertices at index {i}"
                )));
            }
            if cross(b - a, c - b) < -REL_TOL * scale * scale {
                return Err(GeometryError::InvalidPolygon(format!(
                    "not convex at vertex {}",
                    (i + 1) % n
                )));
            }
        }
        let poly = Self { vertices };
        if poly.area() <= REL_TOL * scale * scale {
            return Err(GeometryError::InvalidPolygon("zero area".into()));
        }
        Ok(poly)
    }

    pub fn empty() -> Self {
        Self { vertices: Vec::new() }
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    /// Regular `n`-gon inscribed in the circle of the given radius, first vertex on the +x axis.
    pub fn regular(center: Point, radius: f64, n: usize) -> Result<Self, GeometryError> {
        let vertices = (0..n)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                center + radius * Point::new(t.cos(), t.sin())
            })
            .collect();
        Self::new(vertices)
    }

    /// Wraps vertices produced by clipping a valid polygon; no validation.
    pub(crate) fn from_clipped(vertices: Vec<Point>) -> Self {
        if vertices.len() < 3 {
            return Self::empty();
        }
        Self { vertices }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Area centroid; `None` for the empty or a zero-area polygon.
    pub fn centroid(&self) -> Option<Point> {
        let n = self.vertices.len();
        if n < 3 {
            return None;
        }
        let o = self.vertices[0];
        let mut acc = Point::zeros();
        let mut area = 0.0;
        for k in 1..n - 1 {
            let a = self.vertices[k] - o;
            let b = self.vertices[k + 1] - o;
            let t = 0.5 * cross(a, b);
            area += t;
            acc += t * (a + b) / 3.0;
        }
        (area > 0.0).then(|| o + acc / area)
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.vertices)
    }

    /// `[xmin, ymin, xmax, ymax]`, or `None` when empty.
    pub fn bbox(&self) -> Option<[f64; 4]> {
        bbox(&self.vertices)
    }

    /// Membership test with an absolute slack `tol` on every edge.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b - a;
            // distance of p to the left of edge a→b, in length units
            cross(e, p - a) / e.norm() >= -tol
        })
    }

    /// Edges as `(start, end)` pairs in counter-clockwise order.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

/// Closed half-plane `{x : normal · x ≤ offset}`.
///
/// Stored as a normal plus a point on the boundary line so that signed
/// distances can be evaluated without large cancellations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    normal: Point,
    anchor: Point,
}

impl HalfPlane {
    pub fn new(normal: Point, offset: f64) -> Self {
        let anchor = normal * (offset / normal.norm_squared());
        Self { normal, anchor }
    }

    /// Half-plane `{x : normal · (x − anchor) ≤ 0}`.
    pub fn through(anchor: Point, normal: Point) -> Self {
        Self { normal, anchor }
    }

    pub fn normal(&self) -> Point {
        self.normal
    }

    pub fn offset(&self) -> f64 {
        self.normal.dot(&self.anchor)
    }

    /// Positive outside, zero on the boundary, negative inside.
    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        self.normal.dot(&(x - self.anchor))
    }

    pub fn contains(&self, x: Point) -> bool {
        self.eval(x) <= 0.0
    }
}

/// Clips `subject` by a single half-plane (Sutherland–Hodgman step).
pub fn clip_polygon(subject: &ConvexPolygon, halfplane: &HalfPlane) -> ConvexPolygon {
    if subject.is_empty() {
        return ConvexPolygon::empty();
    }
    let tags = vec![(); subject.len()];
    let tol = REL_TOL * subject.diameter();
    let (v, _) = clip_tagged(subject.vertices(), &tags, halfplane, (), tol);
    ConvexPolygon::from_clipped(v)
}

/// Clips a convex polygon whose edge `k` (from `v[k]` to `v[k+1]`) carries
/// `tags[k]`. Edges created along the clip line get `new_tag`.
pub(crate) fn clip_tagged<T: Copy>(
    vertices: &[Point],
    tags: &[T],
    hp: &HalfPlane,
    new_tag: T,
    dedup_tol: f64,
) -> (Vec<Point>, Vec<T>) {
    let n = vertices.len();
    let dist: Vec<f64> = vertices.iter().map(|&v| hp.eval(v)).collect();
    if dist.iter().all(|&d| d <= 0.0) {
        return (vertices.to_vec(), tags.to_vec());
    }
    if dist.iter().all(|&d| d > 0.0) {
        return (Vec::new(), Vec::new());
    }
    let mut out_v = Vec::with_capacity(n + 1);
    let mut out_t = Vec::with_capacity(n + 1);
    for k in 0..n {
        let k1 = (k + 1) % n;
        let (d0, d1) = (dist[k], dist[k1]);
        let in0 = d0 <= 0.0;
        let in1 = d1 <= 0.0;
        if in0 {
            out_v.push(vertices[k]);
            out_t.push(tags[k]);
        }
        if in0 != in1 {
            let t = d0 / (d0 - d1);
            let p = vertices[k] + t * (vertices[k1] - vertices[k]);
            out_v.push(p);
            // leaving: the next edge runs along the clip line
            out_t.push(if in0 { new_tag } else { tags[k] });
        }
    }
    dedup(&mut out_v, &mut out_t, dedup_tol);
    if out_v.len() < 3 {
        out_v.clear();
        out_t.clear();
    }
    (out_v, out_t)
}

/// Removes consecutive (cyclic) near-duplicate vertices. The surviving vertex
/// inherits the outgoing tag of the removed one.
fn dedup<T: Copy>(v: &mut Vec<Point>, t: &mut Vec<T>, tol: f64) {
    let mut k = 0;
    while v.len() > 1 && k < v.len() {
        let k1 = (k + 1) % v.len();
        if (v[k1] - v[k]).norm() <= tol {
            t[k] = t[k1];
            v.remove(k1);
            t.remove(k1);
            if k1 < k {
                k -= 1;
            }
        } else {
            k += 1;
        }
    }
}

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

pub(crate) fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    let o = v[0];
    (1..n - 1).map(|k| cross(v[k] - o, v[k + 1] - o)).sum::<f64>() * 0.5
}

pub(crate) fn bbox(v: &[Point]) -> Option<[f64; 4]> {
    let first = v.first()?;
    let mut b = [first.x, first.y, first.x, first.y];
    for p in v {
        b[0] = b[0].min(p.x);
        b[1] = b[1].min(p.y);
        b[2] = b[2].max(p.x);
        b[3] = b[3].max(p.y);
    }
    Some(b)
}

pub(crate) fn diameter(v: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            d = d.max((v[i] - v[j]).norm());
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_square() -> ConvexPolygon {
        ConvexPolygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn clip_half_square() {
        let out = clip_polygon(&unit_square(), &HalfPlane::new(Point::new(1.0, 0.0), 0.5));
        assert_relative_eq!(out.area(), 0.5, epsilon = 1e-15);
        assert_eq!(out.len(), 4);
        assert!(out.vertices().iter().all(|v| v.x <= 0.5 + 1e-15));
    }

    #[test]
    fn clip_far_plane_keeps_square() {
        let sq = unit_square();
        let out = clip_polygon(&sq, &HalfPlane::new(Point::new(1.0, 0.0), 2.0));
        assert_eq!(out, sq);
    }

    #[test]
    fn clip_diagonal_gives_triangle() {
        let hp = HalfPlane::new(Point::new(1.0, 1.0), 0.5);
        let out = clip_polygon(&unit_square(), &hp);
        assert_eq!(out.len(), 3);
        assert_relative_eq!(out.area(), 0.125, epsilon = 1e-15);
        let expect = [Point::new(0.0, 0.0), Point::new(0.5, 0.0), Point::new(0.0, 0.5)];
        for e in expect {
            assert!(out.vertices().iter().any(|v| (v - e).norm() < 1e-12));
        }
        for v in out.vertices() {
            if v.x + v.y > 1e-9 {
                assert!(hp.eval(*v).abs() <= 1e-12, "intersection vertex off the line");
            }
        }
    }

    #[test]
    fn clip_everything_away() {
        let out = clip_polygon(&unit_square(), &HalfPlane::new(Point::new(1.0, 0.0), -1.0));
        assert!(out.is_empty());
        assert_eq!(out.area(), 0.0);
    }

    #[test]
    fn clip_through_vertex_has_no_duplicates() {
        // boundary passes exactly through (1,0) and (0,1)
        let out = clip_polygon(&unit_square(), &HalfPlane::new(Point::new(1.0, 1.0), 1.0));
        assert_eq!(out.len(), 3);
        assert_relative_eq!(out.area(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_polygons() {
        assert!(ConvexPolygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]).is_err());
        let dup = vec![
            Point::new(0.0, 0.0),
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        assert!(ConvexPolygon::new(dup).is_err());
        let dart = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(0.5, 0.5),
            Point::new(0.0, 2.0),
        ];
        assert!(ConvexPolygon::new(dart).is_err());
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let cw = vec![Point::new(0.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 0.0)];
        let p = ConvexPolygon::new(cw).unwrap();
        assert_relative_eq!(p.area(), 0.5);
    }

    #[test]
    fn centroid_and_contains() {
        let sq = unit_square();
        let c = sq.centroid().unwrap();
        assert_relative_eq!(c.x, 0.5, epsilon = 1e-15);
        assert_relative_eq!(c.y, 0.5, epsilon = 1e-15);
        assert!(sq.contains(Point::new(1.0, 0.3), 0.0));
        assert!(!sq.contains(Point::new(1.0 + 1e-6, 0.3), 1e-9));
    }
}
