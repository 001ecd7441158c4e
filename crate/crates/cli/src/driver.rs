use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;

use serde::Serialize;

use gsp_core::baselines::{full_relative_residual, pgmres_solve, pminres_solve, scr_cg_solve, scr_fom_solve};
use gsp_core::craig::craig_solve;
use gsp_core::io::{load_problem, render_comparison_csv, render_comparison_text, write_history_csv, write_vector, ComparisonRow};
use gsp_core::nscraig::nscraig_solve;
use gsp_core::problems::{gen_random, gen_stokes_channel, schur_diagonal_preconditioner};
use gsp_core::{GspError, SaddleSystem, SolveResult, SolverConfig, SpdPreconditioner};

use crate::manifest::{PreconditionerChoice, ProblemSource, RunManifest, Solver};
use crate::Failure;

pub struct Instance {
    pub system: SaddleSystem,
    pub preconditioner: SpdPreconditioner,
}

pub fn build_instance(m: &RunManifest) -> Result<Instance, Failure> {
    let (system, shipped) = match &m.problem {
        ProblemSource::Random(spec) => (gen_random(spec)?, None),
        ProblemSource::Stokes(spec) => {
            let p = gen_stokes_channel(spec)?;
            (p.system, Some(p.preconditioner))
        }
        ProblemSource::Load { path } => {
            let p = load_problem(path)?;
            (p.system, p.preconditioner)
        }
    };
    let preconditioner = match (m.preconditioner, shipped) {
        (PreconditionerChoice::Identity, _) => SpdPreconditioner::identity(system.n()),
        (PreconditionerChoice::Auto, Some(n)) => n,
        _ => schur_diagonal_preconditioner(&system)?,
    };
    Ok(Instance { system, preconditioner })
}

/// Rejects solvers that need a symmetric (1,1) block before anything runs.
pub fn check_compatibility(m: &RunManifest, sys: &SaddleSystem) -> Result<(), Failure> {
    if sys.is_symmetric() {
        return Ok(());
    }
    let bad: Vec<&str> = m.solvers.iter().filter(|s| s.needs_symmetric()).map(|s| s.name()).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{} require(s) a symmetric M; this instance is nonsymmetric", bad.join(", "))))
    }
}

fn solve(s: Solver, sys: &SaddleSystem, n: &SpdPreconditioner, cfg: &SolverConfig) -> gsp_core::Result<SolveResult> {
    match s {
        Solver::Craig => craig_solve(sys, n, cfg),
        Solver::Nscraig => nscraig_solve(sys, n, cfg),
        Solver::ScrCg => scr_cg_solve(sys, n, cfg),
        Solver::ScrFom => scr_fom_solve(sys, n, cfg),
        Solver::Pminres => pminres_solve(sys, n, cfg),
        Solver::Pgmres => pgmres_solve(sys, n, cfg),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub solver: String,
    pub iterations: usize,
    pub seconds: f64,
    pub termination: String,
    pub converged: bool,
    /// The solver's own monitored quantity at the last step.
    pub res_rel: f64,
    /// ‖[0; b] − K z‖₂ / ‖b‖₂ on the full system.
    pub res_full: Option<f64>,
    pub err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Summary {
    pub fn line(&self) -> String {
        let mut s = format!(
            "{}: iterations={} seconds={:.4e} termination={} res_rel={:.4e}",
            self.solver, self.iterations, self.seconds, self.termination, self.res_rel
        );
        if let Some(r) = self.res_full {
            let _ = write!(s, " res_full={r:.4e}");
        }
        if let Some(e) = self.err {
            let _ = write!(s, " err={e:.4e}");
        }
        if let Some(m) = &self.message {
            let _ = write!(s, " ({m})");
        }
        s
    }

    fn row(&self) -> ComparisonRow {
        ComparisonRow {
            solver: self.solver.clone(),
            iterations: self.iterations,
            seconds: self.seconds,
            err: self.err,
            converged: self.converged,
        }
    }
}

pub struct Outcome {
    pub summaries: Vec<Summary>,
}

impl Outcome {
    pub fn all_converged(&self) -> bool {
        self.summaries.iter().all(|s| s.converged)
    }
}

/// Runs every listed solver in order and writes histories, solutions and
/// `summary.json` into the output directory.
pub fn execute(m: &RunManifest, inst: &Instance) -> Result<Outcome, Failure> {
    let sys = &inst.system;
    check_compatibility(m, sys)?;
    let oracle = if m.report_error {
        Some(sys.direct_solve()?)
    } else {
        None
    };
    fs::create_dir_all(&m.output_dir)?;
    let mut summaries = Vec::new();
    for &s in &m.solvers {
        let summary = match solve(s, sys, &inst.preconditioner, &m.config) {
            Ok(r) => {
                let name = s.name();
                write_history_csv(BufWriter::new(File::create(m.output_dir.join(format!("{name}_history.csv")))?), &r.history)?;
                write_vector(m.output_dir.join(format!("{name}_u.mtx")), &r.u)?;
                write_vector(m.output_dir.join(format!("{name}_p.mtx")), &r.p)?;
                Summary {
                    solver: name.into(),
                    iterations: r.iterations,
                    seconds: r.solve_seconds,
                    termination: r.termination.as_str().into(),
                    converged: r.termination.is_success(),
                    res_rel: r.final_relative_residual(),
                    res_full: full_relative_residual(sys, &r.u, &r.p).ok(),
                    err: oracle.as_ref().map(|(u, p)| sys.relative_error(&r.u, &r.p, (u, p))),
                    message: None,
                }
            }
            Err(e @ GspError::Breakdown { .. }) => Summary {
                solver: s.name().into(),
                iterations: 0,
                seconds: 0.0,
                termination: "breakdown".into(),
                converged: false,
                res_rel: f64::NAN,
                res_full: None,
                err: None,
                message: Some(e.to_string()),
            },
            Err(e) => return Err(e.into()),
        };
        println!("{}", summary.line());
        summaries.push(summary);
    }
    println!("factorization seconds={:.4e}", sys.factorization_seconds());
    let json = serde_json::to_string_pretty(&summaries).map_err(GspError::from)?;
    fs::write(m.output_dir.join("summary.json"), json + "\n")?;
    Ok(Outcome { summaries })
}

pub fn write_comparison(m: &RunManifest, out: &Outcome) -> Result<(), Failure> {
    let rows: Vec<ComparisonRow> = out.summaries.iter().map(Summary::row).collect();
    let text = render_comparison_text(&rows);
    print!("{text}");
    fs::write(m.output_dir.join("comparison.txt"), text)?;
    fs::write(m.output_dir.join("comparison.csv"), render_comparison_csv(&rows))?;
    Ok(())
}
