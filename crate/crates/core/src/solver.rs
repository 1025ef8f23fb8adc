//! Damped Newton iteration for `G(ψ) = μ`.
//!
//! Each step solves `L d = G(ψ) − μ` with `L = −D²Φ(ψ)` on zero-sum vectors,
//! then halves the step until the trial potential keeps every cell above the
//! mass floor `ε₀` (frozen at the start) and shrinks the residual by at least
//! the factor `1 − 2^{−(ℓ+1)}`.

use std::collections::VecDeque;

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::density::TriDensity;
use crate::functional::{hessian_of, phi_of, Evaluation, FunctionalError, HessianMatrix, Potential};
use crate::geometry::TargetMeasure;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error("Hessian graph is disconnected ({components} components)")]
    DisconnectedHessian { components: usize },
    #[error("residual sums to {0}, expected 0")]
    NonZeroSumResidual(f64),
    #[error("{0} potentials given for {1} targets")]
    DimensionMismatch(usize, usize),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop once the Euclidean norm of `G(ψ) − μ` drops below this.
    pub eta: f64,
    /// Cap on Newton steps.
    pub max_iter: usize,
    /// Largest step exponent tried by the line search.
    pub max_backtrack: u32,
    /// Retry a bad Voronoi start with small random potentials.
    pub jiggle: bool,
    pub jiggle_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { eta: 1e-9, max_iter: 100, max_backtrack: 40, jiggle: false, jiggle_seed: 0 }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if !(self.eta > 0.0) {
            return Err(SolverError::InvalidConfig(format!("eta must be positive, got {}", self.eta)));
        }
        if self.max_iter < 1 || self.max_backtrack < 1 {
            return Err(SolverError::InvalidConfig("iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    LineSearchFailed,
    BadInitial,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIter => "max_iter",
            Self::LineSearchFailed => "line_search_failed",
            Self::BadInitial => "bad_initial",
        }
    }
}

/// State at one accepted iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub residual_l2: f64,
    pub residual_inf: f64,
    /// `ℓ` of the step that produced this iterate; `None` for the start.
    pub step_exponent: Option<u32>,
    pub min_mass: f64,
    pub phi: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Zero-mean potential at the last accepted iterate.
    pub psi_final: Potential,
    pub iterations: Vec<IterationRecord>,
    pub status: SolveStatus,
    pub epsilon0: f64,
    /// Sites with an empty start cell when `status` is `BadInitial`.
    pub offending_sites: Vec<usize>,
    pub final_masses: Vec<f64>,
}

impl SolveReport {
    /// Number of Newton steps taken.
    pub fn steps(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }

    pub fn final_residual(&self) -> f64 {
        self.iterations.last().map_or(f64::INFINITY, |r| r.residual_l2)
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.residual_l2).collect()
    }

    /// Violations of the per-step acceptance rule, checked on the logged values.
    pub fn contract_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for w in self.iterations.windows(2) {
            let (prev, cur) = (&w[0], &w[1]);
            let Some(l) = cur.step_exponent else {
                out.push(format!("iterate {} has no step exponent", cur.iter));
                continue;
            };
            let factor = 1.0 - 0.5f64.powi(l as i32 + 1);
            if cur.residual_l2 > factor * prev.residual_l2 {
                out.push(format!(
                    "iterate {}: residual {} exceeds {} × {}",
                    cur.iter, cur.residual_l2, factor, prev.residual_l2
                ));
            }
            if cur.min_mass < self.epsilon0 {
                out.push(format!(
                    "iterate {}: min mass {} below floor {}",
                    cur.iter, cur.min_mass, self.epsilon0
                ));
            }
        }
        out
    }
}

/// `ε₀ = ½ min(min_y G_y(ψ₀), min_y μ_y)`; non-positive means an invalid start.
pub fn epsilon0(g0: &[f64], mu: &[f64]) -> f64 {
    let gmin = g0.iter().copied().fold(f64::INFINITY, f64::min);
    let mmin = mu.iter().copied().fold(f64::INFINITY, f64::min);
    0.5 * gmin.min(mmin)
}

/// Connected components of the graph with an edge wherever `w_ij > 0`.
pub(crate) fn component_count(weights: &DMatrix<f64>) -> usize {
    let n = weights.nrows();
    let mut seen = vec![false; n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        queue.push_back(s);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if !seen[j] && i != j && weights[(i, j)] > 0.0 {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    count
}

/// `d = L⁺ r` for `L = −H`, via a Cholesky factorization of `L + 𝟙𝟙ᵀ/N`.
/// The result has zero mean.
pub fn newton_direction(h: &HessianMatrix, residual: &[f64]) -> Result<Vec<f64>, SolverError> {
    let n = h.dim();
    if residual.len() != n {
        return Err(SolverError::DimensionMismatch(residual.len(), n));
    }
    let sum: f64 = residual.iter().sum();
    if sum.abs() > 1e-9 {
        return Err(SolverError::NonZeroSumResidual(sum));
    }
    let components = component_count(h.matrix());
    if components > 1 {
        return Err(SolverError::DisconnectedHessian { components });
    }
    let lap = h.laplacian();
    let shifted = lap.add_scalar(1.0 / n as f64);
    let chol = shifted
        .clone()
        .cholesky()
        .ok_or(SolverError::DisconnectedHessian { components })?;
    let r = DVector::from_column_slice(residual);
    let mut d = chol.solve(&r);
    // one step of iterative refinement
    let correction = chol.solve(&(&r - &shifted * &d));
    d += correction;
    let mean = d.mean();
    Ok(d.iter().map(|v| v - mean).collect())
}

fn norms(r: &[f64]) -> (f64, f64) {
    let l2 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let inf = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (l2, inf)
}

/// Runs the damped Newton iteration from `psi0`.
pub fn solve(
    density: &TriDensity,
    targets: &TargetMeasure,
    psi0: &Potential,
    config: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    solve_with_observer(density, targets, psi0, config, |_, _, _| {})
}

/// [`solve`], calling `observer(k, evaluation, ψ_k)` at every accepted iterate.
pub fn solve_with_observer(
    density: &TriDensity,
    targets: &TargetMeasure,
    psi0: &Potential,
    config: &SolverConfig,
    mut observer: impl FnMut(usize, &Evaluation, &Potential),
) -> Result<SolveReport, SolverError> {
    config.validate()?;
    if psi0.len() != targets.len() {
        return Err(SolverError::DimensionMismatch(psi0.len(), targets.len()));
    }
    let mu = targets.masses();
    let mut psi = psi0.centered();
    let mut eval = Evaluation::new(density, targets, &psi)?;
    let mut eps0 = epsilon0(&eval.masses, mu);

    if eps0 <= 0.0 && config.jiggle {
        let mut rng = ChaCha8Rng::seed_from_u64(config.jiggle_seed);
        let amplitude = 1e-3 * density.scale().powi(2);
        for attempt in 1..=5 {
            let trial: Potential = psi0
                .iter()
                .map(|p| p + attempt as f64 * amplitude * rng.random_range(-1.0..1.0))
                .collect::<Vec<_>>()
                .into();
            let trial = trial.centered();
            let e = Evaluation::new(density, targets, &trial)?;
            let eps = epsilon0(&e.masses, mu);
            debug!("jiggle attempt {attempt}: eps0 = {eps}");
            if eps > 0.0 {
                psi = trial;
                eval = e;
                eps0 = eps;
                break;
            }
        }
    }

    let record = |k: usize, eval: &Evaluation, psi: &Potential, step: Option<u32>| {
        let (l2, inf) = norms(&eval.residual(targets));
        IterationRecord {
            iter: k,
            residual_l2: l2,
            residual_inf: inf,
            step_exponent: step,
            min_mass: eval.min_mass(),
            phi: phi_of(&eval.diagram, &eval.masses, density, targets, psi),
        }
    };

    let mut iterations = vec![record(0, &eval, &psi, None)];
    observer(0, &eval, &psi);

    if eps0 <= 0.0 {
        let offending = eval
            .masses
            .iter()
            .enumerate()
            .filter(|(_, g)| **g <= 0.0)
            .map(|(i, _)| i)
            .collect();
        return Ok(SolveReport {
            psi_final: psi,
            iterations,
            status: SolveStatus::BadInitial,
            epsilon0: eps0,
            offending_sites: offending,
            final_masses: eval.masses,
        });
    }

    let status = loop {
        let k = iterations.len() - 1;
        let residual = eval.residual(targets);
        let current = iterations[k].residual_l2;
        if current < config.eta {
            break SolveStatus::Converged;
        }
        if k >= config.max_iter {
            break SolveStatus::MaxIter;
        }
        let hessian = hessian_of(&eval.diagram, density, targets)?;
        let direction = newton_direction(&hessian, &residual)?;

        let mut accepted = None;
        for l in 0..=config.max_backtrack {
            let t = 0.5f64.powi(l as i32);
            let trial = psi.step(t, &direction).centered();
            let trial_eval = Evaluation::new(density, targets, &trial)?;
            let (l2, _) = norms(&trial_eval.residual(targets));
            let factor = 1.0 - 0.5f64.powi(l as i32 + 1);
            if trial_eval.min_mass() >= eps0 && l2 <= factor * current {
                accepted = Some((l, trial, trial_eval));
                break;
            }
        }
        let Some((l, trial, trial_eval)) = accepted else {
            break SolveStatus::LineSearchFailed;
        };
        psi = trial;
        eval = trial_eval;
        let rec = record(k + 1, &eval, &psi, Some(l));
        debug!(
            "iter {}: |G-mu| = {:.3e}, l = {}, min mass = {:.3e}",
            rec.iter, rec.residual_l2, l, rec.min_mass
        );
        iterations.push(rec);
        observer(k + 1, &eval, &psi);
    };

    info!(
        "damped Newton finished: {} after {} steps, residual {:.3e}",
        status.as_str(),
        iterations.len() - 1,
        iterations.last().map_or(f64::NAN, |r| r.residual_l2)
    );
    Ok(SolveReport {
        psi_final: psi,
        iterations,
        status,
        epsilon0: eps0,
        offending_sites: Vec::new(),
        final_masses: eval.masses,
    })
}
