//! `sdot verify`: independent checks of the functional, its derivatives and
//! the solver output on one problem.

use std::fmt;

use statrs::distribution::{ContinuousCDF, Normal};

use sdot_core::diagnostics::{graph_from_hessian, verify_cheeger_inequality, MAX_EXACT_CHEEGER};
use sdot_core::functional::{eval_masses, eval_phi, hessian_of, Evaluation};
use sdot_core::oracle::{duality_certificate, fd_columns, fd_partials, mc_masses, zero_sum_direction, RngSpec};
use sdot_core::solver::{epsilon0, SolverError};
use sdot_core::{solve, SolveStatus};

use crate::problem::Problem;

/// Two-sided false-alarm rate of a single 3σ band.
const THREE_SIGMA_ALPHA: f64 = 0.0027;
pub const GRADIENT_TOL: f64 = 1e-5;
pub const HESSIAN_TOL: f64 = 1e-4;
pub const SYMMETRY_TOL: f64 = 1e-12;
pub const ROW_SUM_TOL: f64 = 1e-10;
pub const DUALITY_TOL: f64 = 5e-3;
pub const DUALITY_GRID: usize = 200;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub mc_samples: usize,
    /// Finite differences are taken along at most this many coordinates.
    pub fd_coords: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 42, mc_samples: 1_000_000, fd_coords: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::Skip => "SKIP",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub measured: String,
    pub limit: String,
    pub outcome: Outcome,
}

fn check(name: &'static str, measured: f64, limit: String, ok: bool) -> Check {
    Check { name, measured: format!("{measured:.3e}"), limit, outcome: if ok { Outcome::Pass } else { Outcome::Fail } }
}

#[derive(Debug)]
pub enum Verification {
    BadInitial { offending: Vec<usize> },
    Checked(Vec<Check>),
}

impl Verification {
    pub fn all_pass(&self) -> bool {
        match self {
            Self::BadInitial { .. } => false,
            Self::Checked(c) => c.iter().all(|c| c.outcome != Outcome::Fail),
        }
    }
}

pub fn render_table(checks: &[Check]) -> String {
    let w = checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<w$}  {:>10}  {:<28}  result\n", "check", "measured", "limit");
    for c in checks {
        out.push_str(&format!("{:<w$}  {:>10}  {:<28}  {}\n", c.name, c.measured, c.limit, c.outcome));
    }
    out
}

/// Evenly spread coordinates, at most `k` of them.
fn probe_coords(n: usize, k: usize) -> Vec<usize> {
    let k = k.min(n);
    (0..k).map(|i| i * n / k).collect()
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn verify(problem: &Problem, opts: &VerifyOptions) -> Result<Verification, SolverError> {
    let Problem { density, targets, psi0, config } = problem;
    let nu = targets.masses();
    let n = targets.len();
    let psi = psi0.values();
    let start = Evaluation::new(density, targets, psi)?;
    if epsilon0(&start.masses, nu) <= 0.0 {
        let offending = (0..n).filter(|&i| start.masses[i] <= 0.0).collect();
        return Ok(Verification::BadInitial { offending });
    }
    let mut checks = Vec::new();

    // gradient of Φ against finite differences
    let coords = probe_coords(n, opts.fd_coords);
    let phi = |p: &[f64]| eval_phi(density, targets, p).expect("valid potentials");
    let fd = fd_partials(phi, psi, 1e-5, &coords);
    let grad: Vec<f64> = start.masses.iter().zip(nu).map(|(g, m)| g - m).collect();
    let err = max_abs(coords.iter().zip(&fd).map(|(&i, d)| d - grad[i]));
    let scale = max_abs(grad.iter().copied()).max(max_abs(nu.iter().copied()));
    checks.push(check(
        "gradient vs finite differences",
        err / scale,
        format!("< {GRADIENT_TOL:e} (relative)"),
        err / scale < GRADIENT_TOL,
    ));

    // Hessian against finite differences of the masses
    let h = hessian_of(&start.diagram, density, targets)?;
    let m = h.matrix();
    let masses = |p: &[f64]| eval_masses(density, targets, p).expect("valid potentials");
    let cols = fd_columns(masses, psi, 1e-6, &coords);
    let err = coords
        .iter()
        .zip(&cols)
        .map(|(&j, col)| max_abs((0..n).map(|i| col[i] - m[(i, j)])))
        .fold(0.0, f64::max);
    checks.push(check("hessian vs finite differences", err, format!("< {HESSIAN_TOL:e}"), err < HESSIAN_TOL));
    let asym = (m - m.transpose()).abs().max();
    checks.push(check("hessian symmetry", asym, format!("<= {SYMMETRY_TOL:e}"), asym <= SYMMETRY_TOL));
    let rows = max_abs((0..n).map(|i| m.row(i).sum()));
    checks.push(check("hessian row sums", rows, format!("<= {ROW_SUM_TOL:e}"), rows <= ROW_SUM_TOL));

    // Monte Carlo masses; the band keeps a 3σ false-alarm rate over all sites
    let est = mc_masses(density, targets, psi, RngSpec { seed: opts.seed, sample_count: opts.mc_samples });
    let z = Normal::standard().inverse_cdf(1.0 - THREE_SIGMA_ALPHA / (2.0 * n as f64));
    let sigma = est.max_sigma(&start.masses);
    checks.push(check("masses vs Monte Carlo", sigma, format!("< {z:.2} sigma"), sigma < z));

    // Cheeger inequality on the facet graph
    if (2..=MAX_EXACT_CHEEGER).contains(&n) {
        match verify_cheeger_inequality(&graph_from_hessian(&h)) {
            Ok(r) => checks.push(Check {
                name: "cheeger margin lambda2 - bound",
                measured: format!("{:.3e}", r.lambda2 - r.bound),
                limit: ">= -1e-10 and lambda2 > 0".into(),
                outcome: if r.holds && r.lambda2 > 0.0 { Outcome::Pass } else { Outcome::Fail },
            }),
            Err(e) => checks.push(Check {
                name: "cheeger margin lambda2 - bound",
                measured: "-".into(),
                limit: e.to_string(),
                outcome: Outcome::Fail,
            }),
        }
    } else {
        checks.push(Check {
            name: "cheeger margin lambda2 - bound",
            measured: "-".into(),
            limit: format!("needs 2 <= N <= {MAX_EXACT_CHEEGER}"),
            outcome: Outcome::Skip,
        });
    }

    // solve, then compare primal and dual values at the optimum and off it
    let report = solve(density, targets, psi0, config)?;
    let converged = report.status == SolveStatus::Converged;
    checks.push(Check {
        name: "solver converges",
        measured: format!("{:.3e}", report.final_residual()),
        limit: format!("< {:e} ({} steps)", config.eta, report.steps()),
        outcome: if converged { Outcome::Pass } else { Outcome::Fail },
    });
    let violations = report.contract_violations().len();
    checks.push(Check {
        name: "per-step contract",
        measured: violations.to_string(),
        limit: "0 violations".into(),
        outcome: if violations == 0 { Outcome::Pass } else { Outcome::Fail },
    });
    if converged {
        let at_opt = duality_certificate(density, targets, &report.psi_final, DUALITY_GRID)?;
        checks.push(check(
            "duality gap at optimum",
            at_opt.gap.abs(),
            format!("<= {DUALITY_TOL:e} ({DUALITY_GRID}^2 grid)"),
            at_opt.gap.abs() <= DUALITY_TOL,
        ));
        let v = zero_sum_direction(n, opts.seed);
        let off = duality_certificate(density, targets, &report.psi_final.step(0.1, &v), DUALITY_GRID)?;
        checks.push(check(
            "duality gap grows off optimum",
            off.gap.abs(),
            format!("> {:.3e}", at_opt.gap.abs()),
            off.gap.abs() > at_opt.gap.abs(),
        ));
    }
    Ok(Verification::Checked(checks))
}
