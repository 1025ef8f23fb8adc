use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::{error, info};

use sdot_core::functional::Evaluation;
use sdot_core::solver::solve_with_observer;
use sdot_core::{SolveReport, SolveStatus};

use crate::generate::{generate, parse_rect};
use crate::output::{cells_geojson, frame_svg, psi_json, trace_csv, write_atomic};
use crate::problem::{Problem, ProblemFile};
use crate::verify::{render_table, verify, Verification, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_BAD_INITIAL: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "sdot", version, about = "Semi-discrete optimal transport by damped Newton")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem and write potentials, cells and the iteration trace.
    Run {
        problem: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write frame_{k}.svg for every iterate.
        #[arg(long)]
        svg_frames: bool,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Cross-check derivatives, masses and the solution with independent oracles.
    Verify {
        problem: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
    },
    /// Write a generated problem: paper_fig, annulus or uniform_square.
    Gen {
        kind: String,
        /// key=value parameters, e.g. n=30.
        params: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Target grid rectangle x0,y0,x1,y1 for paper_fig.
        #[arg(long, value_parser = parse_rect_arg, allow_hyphen_values = true)]
        grid_rect: Option<[f64; 4]>,
    },
}

fn parse_rect_arg(s: &str) -> Result<[f64; 4], String> {
    parse_rect(s).ok_or_else(|| format!("expected x0,y0,x1,y1 with x0 < x1 and y0 < y1, got {s:?}"))
}

/// Parses arguments and runs one command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::Run { problem, out, svg_frames, eta, max_iter } => {
            let Some(mut p) = load(&problem) else { return Ok(EXIT_INPUT) };
            if let Some(eta) = eta {
                p.config.eta = eta;
            }
            if let Some(k) = max_iter {
                p.config.max_iter = k;
            }
            run(&p, &out, svg_frames)
        }
        Command::Verify { problem, seed, mc_samples } => {
            let Some(p) = load(&problem) else { return Ok(EXIT_INPUT) };
            let opts = VerifyOptions { seed, mc_samples, ..VerifyOptions::default() };
            match verify(&p, &opts)? {
                Verification::BadInitial { offending } => {
                    eprintln!("bad initial potential: zero-mass cells at sites {offending:?}");
                    Ok(EXIT_BAD_INITIAL)
                }
                v @ Verification::Checked(_) => {
                    let Verification::Checked(checks) = &v else { unreachable!() };
                    print!("{}", render_table(checks));
                    Ok(if v.all_pass() { EXIT_OK } else { EXIT_CHECK_FAILED })
                }
            }
        }
        Command::Gen { kind, params, out, grid_rect } => match generate(&kind, &params, grid_rect) {
            Ok(file) => {
                write_atomic(&out, file.to_json().as_bytes()).with_context(|| format!("writing {}", out.display()))?;
                Ok(EXIT_OK)
            }
            Err(e) => {
                eprintln!("error: {e}");
                Ok(EXIT_INPUT)
            }
        },
    }
}

fn load(path: &Path) -> Option<Problem> {
    match ProblemFile::load(path).and_then(|f| f.build()) {
        Ok(p) => Some(p),
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            None
        }
    }
}

fn run(p: &Problem, out: &Path, svg_frames: bool) -> anyhow::Result<i32> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut frame_error = None;
    let domain = p.density.hull().clone();
    let report = solve_with_observer(&p.density, &p.targets, &p.psi0, &p.config, |k, eval, _| {
        if svg_frames && frame_error.is_none() {
            let path = out.join(format!("frame_{k}.svg"));
            if let Err(e) = write_atomic(&path, frame_svg(eval, &domain, k).as_bytes()) {
                frame_error = Some((path, e));
            }
        }
    });
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            error!("solver failed: {e}");
            eprintln!("error: solver failed: {e}");
            return Ok(EXIT_NOT_CONVERGED);
        }
    };
    if let Some((path, e)) = frame_error {
        return Err(e).with_context(|| format!("writing {}", path.display()));
    }
    write_outputs(p, &report, out)?;
    info!("{} after {} steps", report.status.as_str(), report.steps());
    Ok(match report.status {
        SolveStatus::Converged => {
            println!("converged in {} steps, residual {:.3e}", report.steps(), report.final_residual());
            EXIT_OK
        }
        SolveStatus::BadInitial => {
            eprintln!("bad initial potential: zero-mass cells at sites {:?}", report.offending_sites);
            EXIT_BAD_INITIAL
        }
        SolveStatus::MaxIter | SolveStatus::LineSearchFailed => {
            eprintln!(
                "did not converge ({}) after {} steps, residual {:.3e}",
                report.status.as_str(),
                report.steps(),
                report.final_residual()
            );
            EXIT_NOT_CONVERGED
        }
    })
}

fn write_outputs(p: &Problem, report: &SolveReport, out: &Path) -> anyhow::Result<()> {
    let write = |name: &str, body: String| {
        let path = out.join(name);
        write_atomic(&path, body.as_bytes()).with_context(|| format!("writing {}", path.display()))
    };
    let last = Evaluation::new(&p.density, &p.targets, &report.psi_final)?;
    write("psi.json", psi_json(report))?;
    write("cells.geojson", cells_geojson(&last, &p.targets))?;
    write("trace.csv", trace_csv(&report.iterations))?;
    Ok(())
}
