//! Runtime checks of the concavity and convergence theory: the weighted
//! graph behind the Hessian, its Cheeger constant and spectral gap, rate
//! analysis of solver traces, and the radial annulus test density.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::density::{DensityError, TriDensity};
use crate::functional::HessianMatrix;
use crate::geometry::{ConvexPolygon, Point};
use crate::solver::SolveReport;

/// Largest graph for which the Cheeger constant is enumerated exactly.
pub const MAX_EXACT_CHEEGER: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("graph has {0} nodes; exact enumeration is limited to {MAX_EXACT_CHEEGER}")]
    TooLarge(usize),
    #[error("graph needs at least 2 nodes")]
    TooSmall,
    #[error("invalid weight matrix: {0}")]
    InvalidGraph(String),
    #[error("invalid radial profile: {0}")]
    InvalidProfile(String),
    #[error("need at least 3 residuals, got {0}")]
    TooShort(usize),
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// Undirected graph given by a symmetric nonnegative weight matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    weights: DMatrix<f64>,
}

impl WeightedGraph {
    pub fn new(weights: DMatrix<f64>) -> Result<Self, DiagnosticsError> {
        let n = weights.nrows();
        if weights.ncols() != n {
            return Err(DiagnosticsError::InvalidGraph("not square".into()));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(DiagnosticsError::InvalidGraph(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !(w >= 0.0) || w != weights[(j, i)] {
                    return Err(DiagnosticsError::InvalidGraph(format!(
                        "weight ({i}, {j}) is negative or asymmetric"
                    )));
                }
            }
        }
        Ok(Self { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// `d_y = Σ_{z≠y} w_yz`.
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weights.row(i).iter().sum()).collect()
    }

    pub fn edge_count(&self) -> usize {
        let n = self.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| self.weights[(i, j)] > 0.0).count()
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let d = self.degrees();
        let mut l = -self.weights.clone();
        for (i, di) in d.into_iter().enumerate() {
            l[(i, i)] = di;
        }
        l
    }

    /// `(|∂S|_w, |S|_w, |Y∖S|_w)` for the subset given by `in_s`.
    fn cut(&self, in_s: impl Fn(usize) -> bool, degrees: &[f64]) -> (f64, f64, f64) {
        let n = self.len();
        let (mut boundary, mut vol_in, mut vol_out) = (0.0, 0.0, 0.0);
        for (i, &d) in degrees.iter().enumerate() {
            if in_s(i) {
                vol_in += d;
                for j in (0..n).filter(|&j| !in_s(j)) {
                    boundary += self.weights[(i, j)];
                }
            } else {
                vol_out += d;
            }
        }
        (boundary, vol_in, vol_out)
    }
}

/// Graph with `w_yz = ∂²Φ/∂ψ_y∂ψ_z`, the off-diagonal facet weights of the Hessian.
pub fn graph_from_hessian(h: &HessianMatrix) -> WeightedGraph {
    let mut w = h.matrix().clone();
    for i in 0..w.nrows() {
        w[(i, i)] = 0.0;
    }
    WeightedGraph { weights: w }
}

fn ratio(boundary: f64, vol_in: f64, vol_out: f64) -> f64 {
    if boundary == 0.0 {
        0.0
    } else {
        boundary / vol_in.min(vol_out)
    }
}

/// `h(w) = min_S |∂S|_w / min(|S|_w, |Y∖S|_w)` by enumerating every
/// nontrivial cut. Returns 0 for a disconnected graph.
pub fn cheeger_constant(g: &WeightedGraph) -> Result<f64, DiagnosticsError> {
    let n = g.len();
    if n < 2 {
        return Err(DiagnosticsError::TooSmall);
    }
    if n > MAX_EXACT_CHEEGER {
        return Err(DiagnosticsError::TooLarge(n));
    }
    let degrees = g.degrees();
    // node n-1 stays outside S, so each cut is seen once
    let masks = 1u32..(1u32 << (n - 1));
    let h = masks
        .into_par_iter()
        .map(|mask| {
            let (b, vi, vo) = g.cut(|i| i < n - 1 && mask & (1 << i) != 0, &degrees);
            ratio(b, vi, vo)
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(h)
}

/// Upper bound on `h(w)` from `samples` random cuts, for graphs too large to enumerate.
pub fn cheeger_constant_sampled(g: &WeightedGraph, seed: u64, samples: usize) -> f64 {
    let n = g.len();
    let degrees = g.degrees();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    // singletons first: they are the cheapest informative cuts
    for v in 0..n {
        let (b, vi, vo) = g.cut(|i| i == v, &degrees);
        best = best.min(ratio(b, vi, vo));
    }
    for _ in 0..samples {
        let bits: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if bits.iter().all(|&b| b) || bits.iter().all(|&b| !b) {
            continue;
        }
        let (b, vi, vo) = g.cut(|i| bits[i], &degrees);
        best = best.min(ratio(b, vi, vo));
    }
    best
}

/// Second-smallest eigenvalue of a symmetric matrix.
pub fn second_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev.get(1).copied().unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheegerMethod {
    /// `h` enumerated over all cuts; the check is a proof for this graph.
    Verified,
    /// `h` only bounded from above by random cuts.
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheegerReport {
    pub lambda2: f64,
    pub cheeger: f64,
    pub min_degree: f64,
    /// `½ h² min_y d_y`.
    pub bound: f64,
    pub holds: bool,
    pub method: CheegerMethod,
}

fn cheeger_report(g: &WeightedGraph, h: f64, method: CheegerMethod) -> CheegerReport {
    let lambda2 = second_eigenvalue(&g.laplacian());
    let min_degree = g.degrees().into_iter().fold(f64::INFINITY, f64::min);
    let bound = 0.5 * h * h * min_degree;
    CheegerReport { lambda2, cheeger: h, min_degree, bound, holds: lambda2 >= bound - 1e-10, method }
}

/// Checks `λ₂(L) ≥ ½ h(w)² min_y d_y` with exact `h`.
pub fn verify_cheeger_inequality(g: &WeightedGraph) -> Result<CheegerReport, DiagnosticsError> {
    let h = cheeger_constant(g)?;
    Ok(cheeger_report(g, h, CheegerMethod::Verified))
}

/// Spot check for graphs above [`MAX_EXACT_CHEEGER`]: the sampled `h` is an
/// upper bound, so `holds` is sufficient but a failure is inconclusive.
pub fn spot_check_cheeger_inequality(g: &WeightedGraph, seed: u64, samples: usize) -> CheegerReport {
    let h = cheeger_constant_sampled(g, seed, samples);
    cheeger_report(g, h, CheegerMethod::Sampled)
}

/// Radial profile `ρ̄` on `[0, R]`, zero on `[0, r]` and concave on `[r, R]`.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialProfile {
    /// Triangle peaking at `(r + R)/2`, vanishing at `r` and `R`.
    Tent,
    /// Piecewise-linear through `(radius, value)` knots covering `[r, R]`.
    Tabulated(Vec<(f64, f64)>),
}

impl RadialProfile {
    fn eval(&self, s: f64, inner: f64, outer: f64) -> f64 {
        if s < inner || s > outer {
            return 0.0;
        }
        match self {
            Self::Tent => {
                let half = 0.5 * (outer - inner);
                let mid = inner + half;
                (1.0 - (s - mid).abs() / half).max(0.0) / half
            }
            Self::Tabulated(knots) => {
                let k = knots.partition_point(|(x, _)| *x < s).clamp(1, knots.len() - 1);
                let (x0, v0) = knots[k - 1];
                let (x1, v1) = knots[k];
                v0 + (v1 - v0) * (s - x0) / (x1 - x0)
            }
        }
    }

    fn validate(&self, inner: f64, outer: f64) -> Result<(), DiagnosticsError> {
        if let Self::Tabulated(knots) = self {
            if knots.len() < 2 {
                return Err(DiagnosticsError::InvalidProfile("need at least two knots".into()));
            }
            if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(DiagnosticsError::InvalidProfile("knots must be increasing".into()));
            }
            let (first, last) = (knots[0].0, knots[knots.len() - 1].0);
            if first > inner || last < outer {
                return Err(DiagnosticsError::InvalidProfile("knots must cover [r, R]".into()));
            }
        }
        let n = 256;
        let h = (outer - inner) / n as f64;
        let samples: Vec<f64> = (0..=n).map(|k| self.eval(inner + k as f64 * h, inner, outer)).collect();
        if samples[0].abs() > 1e-12 {
            return Err(DiagnosticsError::InvalidProfile(format!(
                "profile must vanish at r to be continuous, got {}",
                samples[0]
            )));
        }
        if samples.iter().any(|v| !(*v >= 0.0)) {
            return Err(DiagnosticsError::InvalidProfile("profile is negative".into()));
        }
        if samples.iter().all(|v| *v == 0.0) {
            return Err(DiagnosticsError::InvalidProfile("profile vanishes".into()));
        }
        if let Some(w) = samples.windows(3).find(|w| w[0] - 2.0 * w[1] + w[2] > 1e-9) {
            return Err(DiagnosticsError::InvalidProfile(format!(
                "not concave on [r, R]: second difference {}",
                w[0] - 2.0 * w[1] + w[2]
            )));
        }
        Ok(())
    }
}

/// Disc of radius `outer` (as a regular `resolution`-gon) meshed in
/// concentric rings, with vertex values `ρ̄(‖x‖)/(2π‖x‖)` so that the radial
/// marginal is `ρ̄`. Vertices with `‖x‖ ≤ inner` get zero, so the support is
/// the annulus `inner ≤ ‖x‖ ≤ outer`. The result is renormalized.
pub fn annulus_density(
    inner: f64,
    outer: f64,
    profile: &RadialProfile,
    resolution: usize,
) -> Result<TriDensity, DiagnosticsError> {
    if !(inner > 1e-9 * outer && inner < outer && outer.is_finite()) {
        return Err(DiagnosticsError::InvalidProfile(format!(
            "need 0 < r < R, got r = {inner}, R = {outer}"
        )));
    }
    if resolution < 8 {
        return Err(DiagnosticsError::InvalidProfile("resolution must be at least 8".into()));
    }
    profile.validate(inner, outer)?;

    let m = resolution;
    let rings = (resolution / 4).max(2);
    let angle = |j: usize| std::f64::consts::TAU * j as f64 / m as f64;
    let mut vertices = vec![Point::zeros()];
    let mut values = vec![0.0];
    for k in 0..=rings {
        let s = inner + (outer - inner) * k as f64 / rings as f64;
        let v = profile.eval(s, inner, outer) / (std::f64::consts::TAU * s);
        for j in 0..m {
            vertices.push(s * Point::new(angle(j).cos(), angle(j).sin()));
            values.push(if s <= inner { 0.0 } else { v });
        }
    }
    let at = |k: usize, j: usize| 1 + k * m + (j % m);
    let mut triangles = Vec::with_capacity(m * (2 * rings + 1));
    for j in 0..m {
        triangles.push([0, at(0, j), at(0, j + 1)]);
    }
    for k in 0..rings {
        for j in 0..m {
            triangles.push([at(k, j), at(k + 1, j), at(k + 1, j + 1)]);
            triangles.push([at(k, j), at(k + 1, j + 1), at(k, j + 1)]);
        }
    }
    let hull = ConvexPolygon::regular(Point::zeros(), outer, m)
        .map_err(|e| DiagnosticsError::InvalidProfile(e.to_string()))?;
    // values are a discretization of a probability density; rescale quietly
    let raw: f64 = triangles
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| vertices[i]);
            0.5 * crate::geometry::cross(b - a, c - a).abs() * t.iter().map(|&i| values[i]).sum::<f64>() / 3.0
        })
        .sum();
    if raw <= 0.0 {
        return Err(DiagnosticsError::InvalidProfile("mesh integrates to zero".into()));
    }
    let values = values.into_iter().map(|v| v / raw).collect();
    Ok(TriDensity::new(vertices, triangles, values, hull)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateAnalysis {
    /// `r_{k+1} / r_k`.
    pub ratios: Vec<f64>,
    /// Worst (largest) contraction ratio over the run.
    pub linear_phase_ratio: f64,
    /// `log₂(r_k / r_{k+1})`.
    pub log_gaps: Vec<f64>,
    /// The last log-gap is at least twice the one before it.
    pub quadratic_tail_detected: bool,
}

/// Per-step contraction and quadratic-tail detection on a residual sequence.
pub fn rate_analysis_residuals(residuals: &[f64]) -> Result<RateAnalysis, DiagnosticsError> {
    if residuals.len() < 3 {
        return Err(DiagnosticsError::TooShort(residuals.len()));
    }
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[1] / w[0]).collect();
    let linear_phase_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let log_gaps: Vec<f64> = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let [.., g1, g2] = log_gaps[..] else { unreachable!() };
    // 1e-9 bits absorbs rounding in log2 of exact powers
    let quadratic_tail_detected = g1 > 0.0 && g2 >= 2.0 * g1 - 1e-9;
    Ok(RateAnalysis { ratios, linear_phase_ratio, log_gaps, quadratic_tail_detected })
}

/// [`rate_analysis_residuals`] on a solver trace; the quadratic tail also
/// requires the last two steps to be full Newton steps.
pub fn rate_analysis(report: &SolveReport) -> Result<RateAnalysis, DiagnosticsError> {
    let mut a = rate_analysis_residuals(&report.residuals())?;
    let full_tail = report.iterations.iter().rev().take(2).all(|r| r.step_exponent == Some(0));
    a.quadratic_tail_detected &= full_tail;
    Ok(a)
}
