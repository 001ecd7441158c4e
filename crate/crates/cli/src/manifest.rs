use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gsp_core::problems::{RandomSpec, StokesSpec};
use gsp_core::SolverConfig;

/// Where the system comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemSource {
    Random(RandomSpec),
    Stokes(StokesSpec),
    /// A `problem.json` as written by `gsp gen`, relative to the run manifest.
    Load { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Craig,
    Nscraig,
    ScrCg,
    ScrFom,
    Pminres,
    Pgmres,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Self::Craig => "craig",
            Self::Nscraig => "nscraig",
            Self::ScrCg => "scr-cg",
            Self::ScrFom => "scr-fom",
            Self::Pminres => "pminres",
            Self::Pgmres => "pgmres",
        }
    }

    pub fn needs_symmetric(self) -> bool {
        matches!(self, Self::Craig | Self::ScrCg | Self::Pminres)
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Choice of the (2,2) preconditioner `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerChoice {
    /// The one shipped with the problem, else `diag(S)`.
    #[default]
    Auto,
    Identity,
    SchurDiagonal,
}

fn default_output() -> PathBuf {
    PathBuf::from("gsp-out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub problem: ProblemSource,
    pub solvers: Vec<Solver>,
    #[serde(default)]
    pub config: SolverConfig,
    /// Relative to the manifest's directory.
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub report_error: bool,
    #[serde(default)]
    pub preconditioner: PreconditionerChoice,
}

impl RunManifest {
    /// Reads the manifest and makes its paths absolute.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut m: Self = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { dir.join(p) };
        m.output_dir = resolve(&m.output_dir);
        if let ProblemSource::Load { path } = &mut m.problem {
            *path = resolve(path);
        }
        Ok(m)
    }

    pub fn check_solvers(&self, min: usize) -> Result<(), String> {
        if self.solvers.len() < min {
            return Err(format!("need at least {min} solver(s), got {}", self.solvers.len()));
        }
        for (i, s) in self.solvers.iter().enumerate() {
            if self.solvers[..i].contains(s) {
                return Err(format!("solver {s} listed twice"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_manifest() {
        let m: RunManifest = serde_json::from_str(
            r#"{"problem": {"kind": "random", "m": 10, "n": 4, "seed": 3}, "solvers": ["craig", "scr-cg"]}"#,
        )
        .unwrap();
        assert_eq!(m.solvers, vec![Solver::Craig, Solver::ScrCg]);
        assert_eq!(m.config, SolverConfig::default());
        assert_eq!(m.preconditioner, PreconditionerChoice::Auto);
        match m.problem {
            ProblemSource::Random(spec) => assert_eq!((spec.m, spec.n, spec.seed), (10, 4, 3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_solver_and_fields() {
        let bad = r#"{"problem": {"kind": "stokes"}, "solvers": ["lsqr"]}"#;
        assert!(serde_json::from_str::<RunManifest>(bad).is_err());
        let bad = r#"{"problem": {"kind": "stokes"}, "solvers": ["craig"], "tol": 1}"#;
        assert!(serde_json::from_str::<RunManifest>(bad).is_err());
    }

    #[test]
    fn duplicate_solvers_are_rejected() {
        let m: RunManifest =
            serde_json::from_str(r#"{"problem": {"kind": "stokes"}, "solvers": ["craig", "craig"]}"#).unwrap();
        assert!(m.check_solvers(1).is_err());
        assert!(m.check_solvers(3).is_err());
    }
}
