//! The two places where the quadratic cost `c(x, y) = ‖x − y‖²` enters.

use super::{HalfPlane, Point};

/// Half-plane of points `x` with `c(x, yi) + psi_i ≤ c(x, yj) + psi_j`.
///
/// For the quadratic cost this reads
/// `2⟨x, yj − yi⟩ ≤ ‖yj‖² − ‖yi‖² + psi_j − psi_i`, anchored at the shifted
/// midpoint of `yi` and `yj`.
pub fn laguerre_halfplane(yi: Point, yj: Point, psi_i: f64, psi_j: f64) -> HalfPlane {
    let n = yj - yi;
    let mid = 0.5 * (yi + yj);
    let shift = 0.5 * (psi_j - psi_i) / n.norm_squared();
    HalfPlane::through(mid + shift * n, n)
}

/// `‖D_x c(x, y) − D_x c(x, z)‖`, which for the quadratic cost is the constant `2‖y − z‖`.
pub fn gradient_gap(y: Point, z: Point) -> f64 {
    2.0 * (y - z).norm()
}

#[inline]
pub fn cost(x: Point, y: Point) -> f64 {
    (x - y).norm_squared()
}
