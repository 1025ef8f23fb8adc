//! Kantorovich's dual functional, its gradient (cell masses minus target
//! masses) and its Hessian for the quadratic cost.

use std::ops::Deref;

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::density::{DensityError, TriDensity};
use crate::geometry::{cost, laguerre_diagram, EdgeTag, GeometryError, LaguerreDiagram, TargetMeasure};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// Facets shorter than this fraction of the domain diameter carry no weight.
pub const MIN_FACET_REL: f64 = 1e-12;

/// One price per target point.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential(Vec<f64>);

impl Potential {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.0.iter().sum::<f64>() / self.0.len() as f64
        }
    }

    /// `ψ + c·𝟙`.
    pub fn shifted(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| v + c).collect())
    }

    /// Projection onto zero-sum potentials.
    pub fn centered(&self) -> Self {
        self.shifted(-self.mean())
    }

    /// `ψ + t·d`.
    pub fn step(&self, t: f64, d: &[f64]) -> Self {
        Self(self.0.iter().zip(d).map(|(p, q)| p + t * q).collect())
    }
}

impl Deref for Potential {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Potential {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// `D²Φ(ψ)`: nonnegative off-diagonal facet weights, diagonal equal to minus
/// the row sum. `−H` is a weighted graph Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianMatrix(DMatrix<f64>);

impl HessianMatrix {
    /// Checks symmetry, sign pattern and zero row sums at the given absolute tolerance.
    pub fn from_matrix(m: DMatrix<f64>, tol: f64) -> Option<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return None;
        }
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += m[(i, j)];
                if i != j && (m[(i, j)] < -tol || (m[(i, j)] - m[(j, i)]).abs() > tol) {
                    return None;
                }
            }
            if row.abs() > tol {
                return None;
            }
        }
        Some(Self(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `L = −H`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        -&self.0
    }
}

/// Everything the solver needs at one potential.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub diagram: LaguerreDiagram,
    /// `G_y(ψ) = ρ(Lag_y(ψ))`.
    pub masses: Vec<f64>,
}

impl Evaluation {
    pub fn new(density: &TriDensity, targets: &TargetMeasure, psi: &[f64]) -> Result<Self, FunctionalError> {
        let diagram = laguerre_diagram(density.hull(), targets, psi)?;
        let masses = masses_of(&diagram, density);
        Ok(Self { diagram, masses })
    }

    pub fn min_mass(&self) -> f64 {
        self.masses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `G(ψ) − μ`.
    pub fn residual(&self, targets: &TargetMeasure) -> Vec<f64> {
        self.masses.iter().zip(targets.masses()).map(|(g, m)| g - m).collect()
    }
}

pub fn masses_of(diagram: &LaguerreDiagram, density: &TriDensity) -> Vec<f64> {
    diagram
        .cells()
        .par_iter()
        .map(|c| if c.is_empty() { 0.0 } else { density.mass(&c.polygon()) })
        .collect()
}

/// `Φ(ψ) = Σ_y [∫_{Lag_y} c(x,y) ρ + ψ_y G_y] − Σ_y ψ_y ν_y`.
pub fn phi_of(
    diagram: &LaguerreDiagram,
    masses: &[f64],
    density: &TriDensity,
    targets: &TargetMeasure,
    psi: &[f64],
) -> f64 {
    let transport: Vec<f64> = diagram
        .cells()
        .par_iter()
        .zip(targets.points().par_iter())
        .map(|(c, &y)| if c.is_empty() { 0.0 } else { density.cost_integral(&c.polygon(), y) })
        .collect();
    let mut phi = 0.0;
    for i in 0..psi.len() {
        phi += transport[i] + psi[i] * (masses[i] - targets.masses()[i]);
    }
    phi
}

pub fn hessian_of(
    diagram: &LaguerreDiagram,
    density: &TriDensity,
    targets: &TargetMeasure,
) -> Result<HessianMatrix, FunctionalError> {
    let n = diagram.len();
    let min_len = MIN_FACET_REL * diagram.scale();
    let sites = targets.points();
    // every facet is taken from its lower-index cell only
    let per_cell: Vec<Vec<(usize, f64)>> = diagram
        .cells()
        .par_iter()
        .enumerate()
        .map(|(i, cell)| {
            let mut out = Vec::new();
            for (a, b, tag) in cell.edges() {
                let EdgeTag::Neighbor(j) = tag else { continue };
                if j <= i || (b - a).norm() < min_len {
                    continue;
                }
                let flux = density.line_integral(a, b)?;
                out.push((j, flux / cost::gradient_gap(sites[i], sites[j])));
            }
            Ok(out)
        })
        .collect::<Result<_, DensityError>>()?;
    let mut h = DMatrix::zeros(n, n);
    for (i, entries) in per_cell.into_iter().enumerate() {
        for (j, w) in entries {
            h[(i, j)] += w;
            h[(j, i)] += w;
        }
    }
    for i in 0..n {
        let row: f64 = h.row(i).iter().sum();
        h[(i, i)] = -row;
    }
    Ok(HessianMatrix(h))
}

/// The cell-mass vector `G(ψ)`.
pub fn eval_masses(
    density: &TriDensity,
    targets: &TargetMeasure,
    psi: &[f64],
) -> Result<Vec<f64>, FunctionalError> {
    Ok(Evaluation::new(density, targets, psi)?.masses)
}

/// Kantorovich's functional, with `ν` taken from the target measure.
pub fn eval_phi(density: &TriDensity, targets: &TargetMeasure, psi: &[f64]) -> Result<f64, FunctionalError> {
    let e = Evaluation::new(density, targets, psi)?;
    Ok(phi_of(&e.diagram, &e.masses, density, targets, psi))
}

/// Hessian of Φ. On the boundary of the set where all cells carry mass this
/// is only the one-sided facet matrix; Φ need not be twice differentiable there.
pub fn eval_hessian(
    density: &TriDensity,
    targets: &TargetMeasure,
    psi: &[f64],
) -> Result<HessianMatrix, FunctionalError> {
    let e = Evaluation::new(density, targets, psi)?;
    hessian_of(&e.diagram, density, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::uniform_rectangle;
    use crate::geometry::Point;
    use approx::assert_relative_eq;

    fn unit() -> TriDensity {
        uniform_rectangle(0.0, 0.0, 1.0, 1.0).unwrap()
    }

    fn two() -> TargetMeasure {
        TargetMeasure::uniform(vec![Point::new(0.25, 0.5), Point::new(0.75, 0.5)]).unwrap()
    }

    #[test]
    fn masses_examples() {
        let one = TargetMeasure::uniform(vec![Point::new(0.2, 0.2)]).unwrap();
        assert_relative_eq!(eval_masses(&unit(), &one, &[0.0]).unwrap()[0], 1.0, epsilon = 1e-15);
        let g = eval_masses(&unit(), &two(), &[0.0, 0.0]).unwrap();
        assert_relative_eq!(g[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(g[1], 0.5, epsilon = 1e-15);
        let g = eval_masses(&unit(), &two(), &[0.25, 0.0]).unwrap();
        assert_relative_eq!(g[0], 0.25, epsilon = 1e-14);
        assert_relative_eq!(g[1], 0.75, epsilon = 1e-14);
    }

    #[test]
    fn phi_single_site() {
        let one = TargetMeasure::uniform(vec![Point::new(0.5, 0.5)]).unwrap();
        for psi in [0.0, 3.7, -12.0] {
            assert_relative_eq!(eval_phi(&unit(), &one, &[psi]).unwrap(), 1.0 / 6.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn phi_shift_invariant() {
        let psi = [0.05, -0.02];
        let a = eval_phi(&unit(), &two(), &psi).unwrap();
        let b = eval_phi(&unit(), &two(), &[psi[0] + 17.3, psi[1] + 17.3]).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn hessian_two_sites() {
        let t = TargetMeasure::uniform(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]).unwrap();
        let h = eval_hessian(&unit(), &t, &[0.0, 0.0]).unwrap();
        let m = h.matrix();
        assert_relative_eq!(m[(0, 1)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(m[(1, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(m[(0, 0)], -0.5, epsilon = 1e-15);
        assert_relative_eq!(m[(1, 1)], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn hessian_single_site_is_zero() {
        let one = TargetMeasure::uniform(vec![Point::new(0.5, 0.5)]).unwrap();
        let h = eval_hessian(&unit(), &one, &[0.0]).unwrap();
        assert_eq!(h.matrix(), &DMatrix::zeros(1, 1));
    }

    #[test]
    fn empty_cell_row_is_zero() {
        let t = TargetMeasure::uniform(vec![
            Point::new(0.2, 0.5),
            Point::new(0.5, 0.5),
            Point::new(0.8, 0.5),
        ])
        .unwrap();
        let h = eval_hessian(&unit(), &t, &[0.0, 5.0, 0.0]).unwrap();
        for k in 0..3 {
            assert_eq!(h.matrix()[(1, k)], 0.0);
            assert_eq!(h.matrix()[(k, 1)], 0.0);
        }
        assert!(h.matrix()[(0, 2)] > 0.0);
    }

    #[test]
    fn hessian_validation() {
        let good = DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]);
        assert!(HessianMatrix::from_matrix(good, 1e-12).is_some());
        let bad = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!(HessianMatrix::from_matrix(bad, 1e-12).is_none());
    }
}
