#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdot_core::functional::eval_masses;
use sdot_core::{ConvexPolygon, Point, TargetMeasure, TriDensity};

/// Piecewise-linear density on `[0,1]²` over a `k×k` grid of squares, with
/// vertex values drawn from `[lo, hi]`.
pub fn random_grid_density(rng: &mut impl Rng, k: usize, lo: f64, hi: f64) -> TriDensity {
    let mut vertices = Vec::new();
    let mut values = Vec::new();
    for j in 0..=k {
        for i in 0..=k {
            vertices.push(Point::new(i as f64 / k as f64, j as f64 / k as f64));
            values.push(rng.random_range(lo..=hi));
        }
    }
    let at = |i: usize, j: usize| j * (k + 1) + i;
    let mut triangles = Vec::new();
    for j in 0..k {
        for i in 0..k {
            triangles.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            triangles.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    let hull = ConvexPolygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
    TriDensity::new(vertices, triangles, values, hull).unwrap()
}

pub struct Instance {
    pub density: TriDensity,
    pub targets: TargetMeasure,
    pub psi: Vec<f64>,
    pub masses: Vec<f64>,
}

/// `n` random sites in the unit square with small random potentials, redrawn
/// until every cell holds at least `floor` of the mass.
pub fn random_instance(seed: u64, n: usize, floor: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let density = random_grid_density(&mut rng, 3, 0.5, 1.5);
    loop {
        let points: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)))
            .collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        let total: f64 = raw.iter().sum();
        let targets = TargetMeasure::new(points, raw.iter().map(|m| m / total).collect()).unwrap();
        let psi: Vec<f64> = (0..n).map(|_| rng.random_range(-0.02..0.02)).collect();
        let masses = eval_masses(&density, &targets, &psi).unwrap();
        if masses.iter().all(|&m| m >= floor) {
            return Instance { density, targets, psi, masses };
        }
    }
}

/// The `n×n` grid `{0, …, n−1}²/(n−1)` scaled into the given rectangle.
pub fn grid_points(n: usize, rect: [f64; 4]) -> Vec<Point> {
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let s = i as f64 / (n - 1) as f64;
            let t = j as f64 / (n - 1) as f64;
            out.push(Point::new(rect[0] + s * (rect[2] - rect[0]), rect[1] + t * (rect[3] - rect[1])));
        }
    }
    out
}
