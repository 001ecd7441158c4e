//! Matrix Market files, problem manifests and convergence-history CSV.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{GspError, Result};
use crate::linops::{SparseMatrix, SpdPreconditioner};
use crate::system::{ConvergenceRecord, SaddleSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

fn parse_err(line: usize, msg: impl Into<String>) -> GspError {
    GspError::Parse { line, msg: msg.into() }
}

fn parse_header(line: &str, lineno: usize) -> Result<(Layout, Symmetry)> {
    let words: Vec<String> = line.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(lineno, format!("malformed header: {line:?}")));
    }
    let layout = match words[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(parse_err(lineno, format!("unknown format {other:?}"))),
    };
    match words[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(parse_err(lineno, format!("unsupported field {other:?}, only real data is accepted"))),
    }
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(parse_err(lineno, format!("unsupported symmetry {other:?}"))),
    };
    Ok((layout, symmetry))
}

fn parse_usize(tok: Option<&str>, lineno: usize, what: &str) -> Result<usize> {
    tok.ok_or_else(|| parse_err(lineno, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(lineno, format!("invalid {what}")))
}

fn parse_f64(tok: Option<&str>, lineno: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| parse_err(lineno, "missing value"))?;
    let v: f64 = tok.parse().map_err(|_| parse_err(lineno, format!("invalid value {tok:?}")))?;
    if v.is_nan() {
        return Err(parse_err(lineno, "NaN value"));
    }
    Ok(v)
}

/// Parses Matrix Market text (coordinate or array, real, general/symmetric/skew-symmetric).
pub fn parse_matrix_market(text: &str) -> Result<SparseMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (first_no, first) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let (layout, symmetry) = parse_header(first, first_no)?;
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_no, size_line) = body.next().ok_or_else(|| parse_err(first_no, "missing size line"))?;
    let mut toks = size_line.split_whitespace();
    let rows = parse_usize(toks.next(), size_no, "row count")?;
    let cols = parse_usize(toks.next(), size_no, "column count")?;
    if symmetry != Symmetry::General && rows != cols {
        return Err(parse_err(size_no, "symmetric storage requires a square matrix"));
    }

    let mut triplets = Vec::new();
    let push = |i: usize, j: usize, v: f64, triplets: &mut Vec<(usize, usize, f64)>| {
        triplets.push((i, j, v));
        if i != j {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => triplets.push((j, i, v)),
                Symmetry::SkewSymmetric => triplets.push((j, i, -v)),
            }
        }
    };

    match layout {
        Layout::Coordinate => {
            let nnz = parse_usize(toks.next(), size_no, "entry count")?;
            let mut seen = HashSet::with_capacity(nnz);
            let mut count = 0;
            for (no, line) in body {
                let mut t = line.split_whitespace();
                let i = parse_usize(t.next(), no, "row index")?;
                let j = parse_usize(t.next(), no, "column index")?;
                let v = parse_f64(t.next(), no)?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(no, format!("index ({i}, {j}) outside {rows}x{cols}")));
                }
                let key = if symmetry == Symmetry::General { (i, j) } else { (i.max(j), i.min(j)) };
                if !seen.insert(key) {
                    return Err(parse_err(no, format!("duplicate entry ({i}, {j})")));
                }
                if symmetry == Symmetry::SkewSymmetric && i == j {
                    return Err(parse_err(no, "skew-symmetric storage cannot hold diagonal entries"));
                }
                push(i - 1, j - 1, v, &mut triplets);
                count += 1;
            }
            if count != nnz {
                return Err(parse_err(size_no, format!("header announces {nnz} entries, found {count}")));
            }
        }
        Layout::Array => {
            let mut positions = Vec::new();
            for j in 0..cols {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => j,
                    Symmetry::SkewSymmetric => j + 1,
                };
                for i in start..rows {
                    positions.push((i, j));
                }
            }
            let mut it = positions.into_iter();
            let mut last = size_no;
            for (no, line) in body {
                for tok in line.split_whitespace() {
                    let (i, j) = it.next().ok_or_else(|| parse_err(no, "too many values"))?;
                    let v = parse_f64(Some(tok), no)?;
                    if v != 0.0 {
                        push(i, j, v, &mut triplets);
                    }
                }
                last = no;
            }
            if it.next().is_some() {
                return Err(parse_err(last, "too few values"));
            }
        }
    }
    SparseMatrix::from_triplets(rows, cols, &triplets)
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    parse_matrix_market(&fs::read_to_string(path)?)
}

/// Coordinate real general, 17 significant digits.
pub fn format_matrix_market(a: &SparseMatrix) -> String {
    let mut out = String::with_capacity(32 * a.nnz() + 64);
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", a.rows(), a.cols(), a.nnz());
    for (i, j, v) in a.triplets() {
        let _ = writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v);
    }
    out
}

pub fn write_matrix_market(path: impl AsRef<Path>, a: &SparseMatrix) -> Result<()> {
    fs::write(path, format_matrix_market(a))?;
    Ok(())
}

/// Vectors are stored as `n×1` array-format files.
pub fn write_vector(path: impl AsRef<Path>, x: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(26 * x.len() + 64);
    out.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} 1", x.len());
    for v in x {
        let _ = writeln!(out, "{v:.16e}");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads an `n×1` or `1×n` Matrix Market file as a vector.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let a = read_matrix_market(path)?;
    let dense = a.to_dense();
    match (a.rows(), a.cols()) {
        (_, 1) => Ok(dense.column(0).to_vec()),
        (1, _) => Ok(dense.row(0)),
        (r, c) => Err(GspError::DimensionMismatch(format!("expected a vector, found a {r}x{c} matrix"))),
    }
}

/// JSON manifest naming the block files of a saddle point system.
/// Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemManifest {
    pub m: PathBuf,
    pub a: PathBuf,
    pub c: PathBuf,
    pub b: PathBuf,
    pub symmetric: bool,
    /// Optional preconditioner `N` (Matrix Market, diagonal or SPD).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preconditioner: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub system: SaddleSystem,
    pub preconditioner: Option<SpdPreconditioner>,
}

pub fn load_problem(manifest_path: impl AsRef<Path>) -> Result<LoadedProblem> {
    let manifest_path = manifest_path.as_ref();
    let manifest: ProblemManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { dir.join(p) };
    let system = SaddleSystem::new(
        read_matrix_market(resolve(&manifest.m))?,
        read_matrix_market(resolve(&manifest.a))?,
        read_matrix_market(resolve(&manifest.c))?,
        read_vector(resolve(&manifest.b))?,
    )?;
    if manifest.symmetric && !system.is_symmetric() {
        return Err(GspError::InvalidInput(
            "manifest declares a symmetric M but the stored M is not symmetric".into(),
        ));
    }
    let preconditioner = match &manifest.preconditioner {
        Some(p) => Some(SpdPreconditioner::from_sparse(&read_matrix_market(resolve(p))?)?),
        None => None,
    };
    Ok(LoadedProblem { system, preconditioner })
}

/// Writes `M.mtx`, `A.mtx`, `C.mtx`, `b.mtx`, optionally `N.mtx`, and
/// `problem.json` into `dir`. Returns the manifest path.
pub fn save_problem(dir: impl AsRef<Path>, sys: &SaddleSystem, n_pre: Option<&SpdPreconditioner>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_matrix_market(dir.join("M.mtx"), sys.m_matrix())?;
    write_matrix_market(dir.join("A.mtx"), sys.a())?;
    write_matrix_market(dir.join("C.mtx"), sys.c())?;
    write_vector(dir.join("b.mtx"), sys.b())?;
    let preconditioner = match n_pre {
        Some(n) => {
            let sparse = match n.operator().diagonal_entries() {
                Some(d) => SparseMatrix::diagonal(d),
                None => SparseMatrix::from_dense(&n.to_dense(), 0.0),
            };
            write_matrix_market(dir.join("N.mtx"), &sparse)?;
            Some(PathBuf::from("N.mtx"))
        }
        None => None,
    };
    let manifest = ProblemManifest {
        m: "M.mtx".into(),
        a: "A.mtx".into(),
        c: "C.mtx".into(),
        b: "b.mtx".into(),
        symmetric: sys.is_symmetric(),
        preconditioner,
    };
    let path = dir.join("problem.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

pub const HISTORY_HEADER: &str = "k,res_rel,err_est,alpha,beta_next,scalar,wall_time_s";

fn field(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:e}")
    }
}

/// One CSV row per record. Floats use the shortest representation that
/// parses back to the same bits; NaN and missing values are empty fields.
pub fn write_history_csv<W: Write>(mut out: W, history: &[ConvergenceRecord]) -> Result<()> {
    writeln!(out, "{HISTORY_HEADER}")?;
    for r in history {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            field(r.relative_residual),
            r.error_estimate.map(field).unwrap_or_default(),
            field(r.alpha),
            field(r.beta_next),
            field(r.scalar),
            field(r.wall_time),
        )?;
    }
    Ok(())
}

pub fn read_history_csv(path: impl AsRef<Path>) -> Result<Vec<ConvergenceRecord>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != HISTORY_HEADER {
                return Err(parse_err(lineno, "unexpected history header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 7 {
            return Err(parse_err(lineno, format!("expected 7 fields, found {}", cells.len())));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| parse_err(lineno, format!("invalid number {s:?}")))
            }
        };
        let nan = |s: &str| num(s).map(|v| v.unwrap_or(f64::NAN));
        out.push(ConvergenceRecord {
            k: cells[0].parse().map_err(|_| parse_err(lineno, "invalid k"))?,
            relative_residual: nan(cells[1])?,
            error_estimate: num(cells[2])?,
            alpha: nan(cells[3])?,
            beta_next: nan(cells[4])?,
            scalar: nan(cells[5])?,
            wall_time: nan(cells[6])?,
        });
    }
    Ok(out)
}

/// One solver's line in a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub solver: String,
    pub iterations: usize,
    pub seconds: f64,
    /// `‖z⁽ᵏ⁾ − z*‖₂ / ‖z⁽⁰⁾ − z*‖₂`, when an oracle was computed.
    pub err: Option<f64>,
    pub converged: bool,
}

impl ComparisonRow {
    fn cells(&self) -> [String; 3] {
        if !self.converged {
            return ["-".into(), "-".into(), "-".into()];
        }
        [
            self.iterations.to_string(),
            format!("{:.4e}", self.seconds),
            self.err.map_or_else(|| "n/a".into(), |e| format!("{e:.4e}")),
        ]
    }
}

/// Plain-text table: one column per solver, rows `iterations`, `time`, `ERR`.
/// Runs that did not converge show `-`.
pub fn render_comparison_text(rows: &[ComparisonRow]) -> String {
    let cells: Vec<[String; 3]> = rows.iter().map(ComparisonRow::cells).collect();
    let labels = ["iterations", "time (s)", "ERR"];
    let label_w = labels.iter().map(|l| l.len()).max().unwrap_or(0);
    let widths: Vec<usize> = rows
        .iter()
        .zip(&cells)
        .map(|(r, c)| c.iter().map(String::len).chain([r.solver.len()]).max().unwrap_or(1))
        .collect();
    let mut out = format!("{:label_w$}", "");
    for (r, w) in rows.iter().zip(&widths) {
        let _ = write!(out, "  {:>w$}", r.solver);
    }
    out.push('\n');
    for (i, label) in labels.iter().enumerate() {
        let _ = write!(out, "{label:label_w$}");
        for (c, w) in cells.iter().zip(&widths) {
            let _ = write!(out, "  {:>w$}", c[i]);
        }
        out.push('\n');
    }
    out
}

/// CSV twin of [`render_comparison_text`]: `solver,iterations,time_s,err`.
pub fn render_comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("solver,iterations,time_s,err\n");
    for r in rows {
        if r.converged {
            let err = r.err.map(|e| format!("{e:e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{:e},{}", r.solver, r.iterations, r.seconds, err);
        } else {
            let _ = writeln!(out, "{},-,-,-", r.solver);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_round_trip() {
        let a = SparseMatrix::identity(2);
        assert_eq!(parse_matrix_market(&format_matrix_market(&a)).unwrap(), a);
    }

    #[test]
    fn awkward_values_round_trip() {
        let vals = [0.1, 1.0 / 3.0, -2.5e-300, 1.7976931348623157e308, 5e-324, std::f64::consts::PI];
        let trip: Vec<_> = vals.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        let a = SparseMatrix::from_triplets(6, 6, &trip).unwrap();
        let back = parse_matrix_market(&format_matrix_market(&a)).unwrap();
        for (x, y) in a.values().iter().zip(back.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn symmetric_lower_triangle_is_mirrored() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 3\n1 1 4\n2 1 2\n2 2 3\n";
        let a = parse_matrix_market(text).unwrap();
        assert_eq!(a.get(0, 1), 2.0);
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 1), 3.0);
    }

    #[test]
    fn array_format() {
        let text = "%%MatrixMarket matrix array real general\n2 2\n1\n3\n2\n4\n";
        let a = parse_matrix_market(text).unwrap();
        assert_eq!(a.get(0, 1), 2.0);
        assert_eq!(a.get(1, 0), 3.0);
    }

    #[test]
    fn rejects_bad_input() {
        let complex = "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n";
        assert!(matches!(parse_matrix_market(complex), Err(GspError::Parse { line: 1, .. })));
        let oob = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert!(matches!(parse_matrix_market(oob), Err(GspError::Parse { line: 3, .. })));
        let header = "%MatrixMarket matrix coordinate real general\n1 1 0\n";
        assert!(matches!(parse_matrix_market(header), Err(GspError::Parse { line: 1, .. })));
        let count = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(matches!(parse_matrix_market(count), Err(GspError::Parse { .. })));
        let dup = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 2.0\n";
        assert!(matches!(parse_matrix_market(dup), Err(GspError::Parse { line: 4, .. })));
    }

    #[test]
    fn history_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let recs = vec![
            ConvergenceRecord {
                k: 1,
                relative_residual: 0.1 + 0.2,
                error_estimate: None,
                alpha: 3f64.sqrt(),
                beta_next: 1e-17,
                scalar: -0.25,
                wall_time: 1.5e-6,
            },
            ConvergenceRecord {
                k: 2,
                relative_residual: 1.0 / 7.0,
                error_estimate: Some(-0.5),
                alpha: f64::NAN,
                beta_next: f64::NAN,
                scalar: f64::NAN,
                wall_time: 2e-6,
            },
        ];
        write_history_csv(fs::File::create(&path).unwrap(), &recs).unwrap();
        let back = read_history_csv(&path).unwrap();
        assert_eq!(back[0], recs[0]);
        assert_eq!(back[1].relative_residual.to_bits(), recs[1].relative_residual.to_bits());
        assert_eq!(back[1].error_estimate, Some(-0.5));
        assert!(back[1].alpha.is_nan());
    }

    #[test]
    fn comparison_marks_failures() {
        let rows = vec![
            ComparisonRow { solver: "craig".into(), iterations: 28, seconds: 0.01, err: Some(1e-7), converged: true },
            ComparisonRow { solver: "pminres".into(), iterations: 3000, seconds: 1.0, err: None, converged: false },
        ];
        let text = render_comparison_text(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].contains("craig") && lines[0].contains("pminres"));
        assert!(lines[1].starts_with("iterations") && lines[1].contains("28") && lines[1].trim_end().ends_with('-'));
        let csv = render_comparison_csv(&rows);
        assert_eq!(csv.lines().nth(2), Some("pminres,-,-,-"));
    }
}
