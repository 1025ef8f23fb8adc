//! Ground truth that does not go through the solver: Monte Carlo cell
//! masses, central finite differences, and a primal/dual gap on a grid.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::density::TriDensity;
use crate::functional::{eval_phi, FunctionalError};
use crate::geometry::{argmin_power, clip_polygon, cost, ConvexPolygon, HalfPlane, Point, TargetMeasure};

/// Samples are drawn in fixed-size chunks, each from its own ChaCha stream,
/// so results do not depend on how chunks are scheduled.
const CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSpec {
    pub seed: u64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub counts: Vec<u64>,
    /// Hit frequencies; they sum to one.
    pub estimates: Vec<f64>,
    /// Binomial standard errors `sqrt(p(1 − p)/n)`.
    pub stderr: Vec<f64>,
}

impl McEstimate {
    /// Largest `|estimate − reference| / stderr` over sites, with a floor on
    /// the standard error of one sample so that exact hits compare cleanly.
    pub fn max_sigma(&self, reference: &[f64]) -> f64 {
        let n: u64 = self.counts.iter().sum();
        let floor = 1.0 / n as f64;
        self.estimates
            .iter()
            .zip(&self.stderr)
            .zip(reference)
            .map(|((e, s), r)| (e - r).abs() / s.max(floor))
            .fold(0.0, f64::max)
    }
}

/// Draws points from `ρ` and counts which Laguerre cell each falls in.
///
/// A triangle is picked with probability proportional to its mass, a point
/// is drawn uniformly in it, and the point is kept with probability
/// `ρ(x) / max ρ|_T` (retrying inside the same triangle otherwise).
pub fn mc_masses(density: &TriDensity, targets: &TargetMeasure, psi: &[f64], rng: RngSpec) -> McEstimate {
    let n_sites = targets.len();
    let n_tri = density.triangles().len();
    let mut cumulative = Vec::with_capacity(n_tri);
    let mut acc = 0.0;
    for t in 0..n_tri {
        acc += density.triangle_mass(t);
        cumulative.push(acc);
    }
    let total = acc;
    let chunks = rng.sample_count.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut gen = ChaCha8Rng::seed_from_u64(rng.seed);
            gen.set_stream(c as u64);
            let len = CHUNK.min(rng.sample_count - c * CHUNK);
            let mut counts = vec![0u64; n_sites];
            for _ in 0..len {
                let u = gen.random::<f64>() * total;
                let t = cumulative.partition_point(|&m| m <= u).min(n_tri - 1);
                let x = sample_in_triangle(density, t, &mut gen);
                counts[argmin_power(targets.points(), psi, x)] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; n_sites],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let n = rng.sample_count as f64;
    let estimates: Vec<f64> = counts.iter().map(|&k| k as f64 / n).collect();
    let stderr = estimates.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect();
    McEstimate { counts, estimates, stderr }
}

fn sample_in_triangle(density: &TriDensity, t: usize, rng: &mut impl Rng) -> Point {
    let [a, b, c] = density.triangle_corners(t);
    let vals = density.triangle_values(t);
    let vmax = vals.iter().copied().fold(0.0, f64::max);
    loop {
        let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let w = 1.0 - u - v;
        let value = w * vals[0] + u * vals[1] + v * vals[2];
        if rng.random::<f64>() * vmax <= value {
            return a + u * (b - a) + v * (c - a);
        }
    }
}

/// Central differences of a scalar function.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, psi: &[f64], step: f64) -> Vec<f64> {
    let all: Vec<usize> = (0..psi.len()).collect();
    fd_partials(f, psi, step, &all)
}

/// Central differences along the listed coordinates only.
pub fn fd_partials(f: impl Fn(&[f64]) -> f64, psi: &[f64], step: f64, coords: &[usize]) -> Vec<f64> {
    let mut x = psi.to_vec();
    coords
        .iter()
        .map(|&i| {
            x[i] = psi[i] + step;
            let fp = f(&x);
            x[i] = psi[i] - step;
            let fm = f(&x);
            x[i] = psi[i];
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

/// Central-difference columns `∂g/∂ψ_j` for the listed `j`.
pub fn fd_columns(g: impl Fn(&[f64]) -> Vec<f64>, psi: &[f64], step: f64, cols: &[usize]) -> Vec<Vec<f64>> {
    let mut x = psi.to_vec();
    cols.iter()
        .map(|&j| {
            x[j] = psi[j] + step;
            let gp = g(&x);
            x[j] = psi[j] - step;
            let gm = g(&x);
            x[j] = psi[j];
            gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * step)).collect()
        })
        .collect()
}

/// Seeded unit vector with zero sum, for probing along the quotient by constants.
pub fn zero_sum_direction(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean = v.iter().sum::<f64>() / n as f64;
    let v: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v;
    }
    v.iter().map(|x| x / norm).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdJacobian {
    /// `raw[(i, j)] ≈ ∂g_i/∂ψ_j`.
    pub raw: DMatrix<f64>,
    /// `(raw + rawᵀ)/2`.
    pub symmetrized: DMatrix<f64>,
}

impl FdJacobian {
    pub fn asymmetry(&self) -> f64 {
        (&self.raw - self.raw.transpose()).abs().max()
    }
}

/// Central-difference Jacobian of a vector function, one column per coordinate.
pub fn fd_jacobian(g: impl Fn(&[f64]) -> Vec<f64>, psi: &[f64], step: f64) -> FdJacobian {
    let n = psi.len();
    let all: Vec<usize> = (0..n).collect();
    let cols = fd_columns(g, psi, step, &all);
    let raw = DMatrix::from_fn(n, n, |i, j| cols[j][i]);
    let symmetrized = 0.5 * (&raw + raw.transpose());
    FdJacobian { raw, symmetrized }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityCertificate {
    /// `Σ_k m_k c(x_k, T_ψ(x_k))` over grid cells.
    pub transport_cost: f64,
    pub phi_value: f64,
    /// `transport_cost − phi_value`.
    pub gap: f64,
}

/// Compares the cost of the map `T_ψ` on a `resolution²` grid discretization
/// of the source against `Φ(ψ)`. At an optimal `ψ` the two agree up to the
/// grid error.
pub fn duality_certificate(
    density: &TriDensity,
    targets: &TargetMeasure,
    psi: &[f64],
    resolution: usize,
) -> Result<DualityCertificate, FunctionalError> {
    let phi_value = eval_phi(density, targets, psi)?;
    let hull = density.hull();
    let bb = hull.bbox().expect("validated hull");
    let hx = (bb[2] - bb[0]) / resolution as f64;
    let hy = (bb[3] - bb[1]) / resolution as f64;
    let hull_planes: Vec<HalfPlane> = hull
        .edges()
        .map(|(a, b)| {
            let e = b - a;
            HalfPlane::through(a, Point::new(e.y, -e.x))
        })
        .collect();
    let transport_cost: f64 = (0..resolution)
        .into_par_iter()
        .map(|j| {
            let mut row = 0.0;
            for i in 0..resolution {
                let x0 = bb[0] + i as f64 * hx;
                let y0 = bb[1] + j as f64 * hy;
                let mut cell = ConvexPolygon::rectangle(x0, y0, x0 + hx, y0 + hy).expect("grid cell");
                for hp in &hull_planes {
                    cell = clip_polygon(&cell, hp);
                }
                let Some(center) = cell.centroid() else { continue };
                let m = density.mass(&cell);
                if m > 0.0 {
                    let y = targets.points()[argmin_power(targets.points(), psi, center)];
                    row += m * cost::cost(center, y);
                }
            }
            row
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(DualityCertificate { transport_cost, phi_value, gap: transport_cost - phi_value })
}
