//! The JSON problem file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sdot_core::{ConvexPolygon, Point, Potential, SolverConfig, TargetMeasure, TriDensity};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    /// Carries serde's `line N column M` suffix.
    #[error("malformed problem file: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("unsupported schema version {0:?}, expected \"1\"")]
    Schema(String),
    #[error("invalid problem: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: String,
    /// Convex domain, counter-clockwise. Must be exactly covered by the mesh.
    pub domain: Vec<[f64; 2]>,
    pub density: DensitySpec,
    pub targets: TargetSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Starting potential; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Nonnegative value per vertex; rescaled to total mass one.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Points { points: Vec<[f64; 2]>, masses: Masses },
    /// `n × n` uniform grid spanning `rect = [x0, y0, x1, y1]`, equal masses.
    Grid { n: usize, rect: [f64; 4] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Masses {
    Explicit(Vec<f64>),
    Named(MassKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassKeyword {
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub eta: f64,
    pub max_iter: usize,
    pub max_backtrack: u32,
    pub jiggle: bool,
    pub jiggle_seed: u64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let c = SolverConfig::default();
        Self {
            eta: c.eta,
            max_iter: c.max_iter,
            max_backtrack: c.max_backtrack,
            jiggle: c.jiggle,
            jiggle_seed: c.jiggle_seed,
        }
    }
}

impl From<&SolverSpec> for SolverConfig {
    fn from(s: &SolverSpec) -> Self {
        SolverConfig {
            eta: s.eta,
            max_iter: s.max_iter,
            max_backtrack: s.max_backtrack,
            jiggle: s.jiggle,
            jiggle_seed: s.jiggle_seed,
        }
    }
}

/// A validated problem, ready for the solver.
#[derive(Debug, Clone)]
pub struct Problem {
    pub density: TriDensity,
    pub targets: TargetMeasure,
    pub psi0: Potential,
    pub config: SolverConfig,
}

fn point(p: [f64; 2]) -> Point {
    Point::new(p[0], p[1])
}

/// The `n × n` grid `{0, …, n−1}² / (n−1)` mapped onto `rect`.
pub fn grid_points(n: usize, rect: [f64; 4]) -> Vec<Point> {
    let step = |k: usize| if n == 1 { 0.5 } else { k as f64 / (n - 1) as f64 };
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(Point::new(
                rect[0] + step(i) * (rect[2] - rect[0]),
                rect[1] + step(j) * (rect[3] - rect[1]),
            ));
        }
    }
    out
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        let file: Self = serde_json::from_str(text)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(ProblemError::Schema(file.schema_version));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, ProblemError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ProblemError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("problem files always serialize");
        s.push('\n');
        s
    }

    pub fn build(&self) -> Result<Problem, ProblemError> {
        let invalid = |e: &dyn std::fmt::Display| ProblemError::Invalid(e.to_string());
        let domain = ConvexPolygon::new(self.domain.iter().copied().map(point).collect())
            .map_err(|e| invalid(&format!("domain: {e}")))?;
        let density = TriDensity::new(
            self.density.vertices.iter().copied().map(point).collect(),
            self.density.triangles.clone(),
            self.density.values.clone(),
            domain,
        )
        .map_err(|e| invalid(&format!("density: {e}")))?;
        let targets = match &self.targets {
            TargetSpec::Points { points, masses } => {
                let pts: Vec<Point> = points.iter().copied().map(point).collect();
                match masses {
                    Masses::Named(MassKeyword::Uniform) => TargetMeasure::uniform(pts),
                    Masses::Explicit(m) => TargetMeasure::new(pts, m.clone()),
                }
            }
            TargetSpec::Grid { n, rect } => {
                if *n < 1 {
                    return Err(invalid(&"grid size must be at least 1"));
                }
                TargetMeasure::uniform(grid_points(*n, *rect))
            }
        }
        .map_err(|e| invalid(&format!("targets: {e}")))?;
        let psi0 = match &self.psi0 {
            Some(p) if p.len() != targets.len() => {
                return Err(invalid(&format!("psi0 has {} entries for {} targets", p.len(), targets.len())))
            }
            Some(p) => Potential::new(p.clone()),
            None => Potential::zeros(targets.len()),
        };
        Ok(Problem { density, targets, psi0, config: (&self.solver).into() })
    }
}
