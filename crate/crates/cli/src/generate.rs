//! Problem generators for `sdot gen`.

use std::collections::BTreeMap;

use thiserror::Error;

use sdot_core::density::{square_frame_mesh, uniform_rectangle};
use sdot_core::diagnostics::{annulus_density, RadialProfile};
use sdot_core::TriDensity;

use crate::problem::{DensitySpec, Masses, MassKeyword, ProblemFile, SolverSpec, TargetSpec, SCHEMA_VERSION};

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("unknown problem kind {0:?}; expected paper_fig, annulus or uniform_square")]
    UnknownKind(String),
    #[error("parameter {0:?} is not of the form key=value")]
    Malformed(String),
    #[error("unknown parameter {key:?} for {kind}")]
    UnknownParam { kind: &'static str, key: String },
    #[error("bad value for {key}: {value:?}")]
    BadValue { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

/// Default target grid for `paper_fig`: the unit square in the corner of the frame.
pub const PAPER_FIG_GRID: [f64; 4] = [0.0, 0.0, 1.0, 1.0];

struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    fn parse(kind: &'static str, raw: &[String], allowed: &[&str]) -> Result<Self, GenError> {
        let mut values = BTreeMap::new();
        for item in raw {
            let (k, v) = item.split_once('=').ok_or_else(|| GenError::Malformed(item.clone()))?;
            if !allowed.contains(&k) {
                return Err(GenError::UnknownParam { kind, key: k.to_string() });
            }
            values.insert(k.to_string(), v.to_string());
        }
        Ok(Self { values })
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, GenError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| GenError::BadValue { key: key.into(), value: v.clone() }),
        }
    }

    fn rect(&self, key: &str, default: [f64; 4]) -> Result<[f64; 4], GenError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => parse_rect(v).ok_or_else(|| GenError::BadValue { key: key.into(), value: v.clone() }),
        }
    }
}

/// `x0,y0,x1,y1`.
pub fn parse_rect(s: &str) -> Option<[f64; 4]> {
    let parts: Vec<f64> = s.split(',').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
    let r: [f64; 4] = parts.try_into().ok()?;
    (r[2] > r[0] && r[3] > r[1]).then_some(r)
}

fn density_spec(d: &TriDensity) -> DensitySpec {
    DensitySpec {
        vertices: d.vertices().iter().map(|p| [p.x, p.y]).collect(),
        triangles: d.triangles().to_vec(),
        values: d.values().to_vec(),
    }
}

fn problem(domain: Vec<[f64; 2]>, density: DensitySpec, targets: TargetSpec) -> ProblemFile {
    ProblemFile {
        schema_version: SCHEMA_VERSION.into(),
        domain,
        density,
        targets,
        solver: SolverSpec::default(),
        psi0: None,
    }
}

/// Builds a problem file. `grid_rect` overrides the target rectangle of `paper_fig`.
pub fn generate(kind: &str, params: &[String], grid_rect: Option<[f64; 4]>) -> Result<ProblemFile, GenError> {
    match kind {
        "paper_fig" => {
            let p = Params::parse("paper_fig", params, &["n", "grid_rect"])?;
            let n: usize = p.get("n", 30)?;
            if n < 2 {
                return Err(GenError::Invalid("paper_fig needs n >= 2".into()));
            }
            let rect = match grid_rect {
                Some(r) => r,
                None => p.rect("grid_rect", PAPER_FIG_GRID)?,
            };
            let (vertices, triangles, values) = square_frame_mesh();
            let density = DensitySpec {
                vertices: vertices.iter().map(|v| [v.x, v.y]).collect(),
                triangles,
                values,
            };
            let domain = vec![[0.0, 0.0], [3.0, 0.0], [3.0, 3.0], [0.0, 3.0]];
            Ok(problem(domain, density, TargetSpec::Grid { n, rect }))
        }
        "annulus" => {
            let p = Params::parse("annulus", params, &["r", "R", "n_targets", "resolution", "ring_radius", "offset"])?;
            let r: f64 = p.get("r", 1.0)?;
            let big_r: f64 = p.get("R", 2.0)?;
            let n: usize = p.get("n_targets", 20)?;
            let resolution: usize = p.get("resolution", 64)?;
            let ring_radius: f64 = p.get("ring_radius", 0.5 * (r + big_r))?;
            let offset: f64 = p.get("offset", 0.25 * r)?;
            if n < 1 {
                return Err(GenError::Invalid("annulus needs n_targets >= 1".into()));
            }
            let d = annulus_density(r, big_r, &RadialProfile::Tent, resolution)
                .map_err(|e| GenError::Invalid(e.to_string()))?;
            let points = (0..n)
                .map(|k| {
                    let a = std::f64::consts::TAU * k as f64 / n as f64;
                    [offset + ring_radius * a.cos(), ring_radius * a.sin()]
                })
                .collect();
            let domain = d.hull().vertices().iter().map(|v| [v.x, v.y]).collect();
            let targets = TargetSpec::Points { points, masses: Masses::Named(MassKeyword::Uniform) };
            Ok(problem(domain, density_spec(&d), targets))
        }
        "uniform_square" => {
            let p = Params::parse("uniform_square", params, &["n"])?;
            let n: usize = p.get("n", 2)?;
            if n < 1 {
                return Err(GenError::Invalid("uniform_square needs n >= 1".into()));
            }
            let d = uniform_rectangle(0.0, 0.0, 1.0, 1.0).map_err(|e| GenError::Invalid(e.to_string()))?;
            let points = (0..n).map(|i| [(i as f64 + 0.5) / n as f64, 0.5]).collect();
            let domain = d.hull().vertices().iter().map(|v| [v.x, v.y]).collect();
            let targets = TargetSpec::Points { points, masses: Masses::Named(MassKeyword::Uniform) };
            Ok(problem(domain, density_spec(&d), targets))
        }
        other => Err(GenError::UnknownKind(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn paper_fig_layout() {
        let p = generate("paper_fig", &args(&["n=30"]), None).unwrap();
        assert_eq!(p.density.triangles.len(), 18);
        assert_eq!(p.density.vertices.len(), 16);
        assert_eq!(p.targets, TargetSpec::Grid { n: 30, rect: PAPER_FIG_GRID });
        let built = p.build().unwrap();
        assert_eq!(built.targets.len(), 900);
        let full = generate("paper_fig", &args(&["n=4"]), Some([0.0, 0.0, 3.0, 3.0])).unwrap();
        assert_eq!(full.targets, TargetSpec::Grid { n: 4, rect: [0.0, 0.0, 3.0, 3.0] });
    }

    #[test]
    fn uniform_square_two_sites() {
        let p = generate("uniform_square", &args(&["n=2"]), None).unwrap();
        let b = p.build().unwrap();
        assert_eq!(b.targets.points()[0].x, 0.25);
        assert_eq!(b.targets.points()[1].x, 0.75);
    }

    #[test]
    fn annulus_builds() {
        let p = generate("annulus", &args(&["r=1", "R=2", "n_targets=20"]), None).unwrap();
        assert_eq!(p.build().unwrap().targets.len(), 20);
    }

    #[test]
    fn bad_requests() {
        assert_eq!(generate("torus", &[], None).unwrap_err(), GenError::UnknownKind("torus".into()));
        assert!(matches!(generate("paper_fig", &args(&["m=3"]), None), Err(GenError::UnknownParam { .. })));
        assert!(matches!(generate("paper_fig", &args(&["n"]), None), Err(GenError::Malformed(_))));
        assert!(matches!(generate("paper_fig", &args(&["n=x"]), None), Err(GenError::BadValue { .. })));
        assert!(matches!(generate("annulus", &args(&["r=0"]), None), Err(GenError::Invalid(_))));
        assert_eq!(parse_rect("0,0,1,1"), Some([0.0, 0.0, 1.0, 1.0]));
        assert_eq!(parse_rect("1,0,0,1"), None);
    }
}
