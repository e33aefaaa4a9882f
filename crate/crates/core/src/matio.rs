//! Loading and persisting pencils, nullspace bases, and result artifacts.
//!
//! Matrices travel as Matrix Market files (coordinate symmetric real,
//! 1-based); bases as Matrix Market dense arrays. Reports are JSON, traces
//! are CSV with header `step,vnorm,beta`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dense::{norm_one, rank_from_singular_values, svd};
use crate::error::{Error, Result};

/// Default relative tolerance for nullspace-basis residual checks.
pub const TAU_NULL: f64 = 1e-10;

/// Default relative tolerance for basis rank checks.
pub const TAU_RANK: f64 = 1e-10;

/// Symmetric matrix held as lower-triangle coordinate triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    /// (row, col, value) with row >= col, sorted, no duplicates.
    entries: Vec<(usize, usize, f64)>,
    pub name: String,
}

impl SymMatrix {
    /// Assembles triplets (0-based, either triangle) by summing duplicates.
    pub fn from_triplets<I>(name: impl Into<String>, n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfBounds { row: i, col: j, n });
            }
            let key = if i >= j { (i, j) } else { (j, i) };
            *map.entry(key).or_insert(0.0) += v;
        }
        Ok(SymMatrix {
            n,
            entries: map.into_iter().map(|((i, j), v)| (i, j, v)).collect(),
            name: name.into(),
        })
    }

    pub fn from_dense(name: impl Into<String>, a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        let mut entries = Vec::new();
        for j in 0..n {
            for i in j..n {
                if a[(i, j)] != 0.0 {
                    entries.push((i, j, a[(i, j)]));
                }
            }
        }
        SymMatrix {
            n,
            entries,
            name: name.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        a
    }

    /// 1-norm of the materialized symmetric matrix.
    pub fn norm_one(&self) -> f64 {
        let mut col_sums = vec![0.0f64; self.n];
        for &(i, j, v) in &self.entries {
            col_sums[j] += v.abs();
            if i != j {
                col_sums[i] += v.abs();
            }
        }
        col_sums.into_iter().fold(0.0, f64::max)
    }
}

/// Dense columns spanning a nullspace basis; full column rank is verified at
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisColumns {
    n: usize,
    columns: DMatrix<f64>,
}

impl BasisColumns {
    pub fn new(columns: DMatrix<f64>, tau_rank: f64) -> Result<Self> {
        let k = columns.ncols();
        if k > 0 {
            let (_, s, _) = svd(&columns);
            let rank = rank_from_singular_values(&s, tau_rank);
            if rank < k {
                return Err(Error::RankDeficient { rank, cols: k });
            }
        }
        Ok(BasisColumns {
            n: columns.nrows(),
            columns,
        })
    }

    pub fn empty(n: usize) -> Self {
        BasisColumns {
            n,
            columns: DMatrix::zeros(n, 0),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.ncols() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.columns
    }
}

/// The pencil (K, K_G) together with the nullspace bases Z_N and Z_C.
#[derive(Debug, Clone)]
pub struct ProblemBundle {
    pub k: SymMatrix,
    pub kg: SymMatrix,
    pub zn: BasisColumns,
    pub zc: BasisColumns,
}

impl ProblemBundle {
    pub fn new(k: SymMatrix, kg: SymMatrix, zn: BasisColumns, zc: BasisColumns) -> Result<Self> {
        let n = k.dim();
        for got in [kg.dim(), zn.dim(), zc.dim()] {
            if got != n {
                return Err(Error::DimensionMismatch { expected: n, got });
            }
        }
        Ok(ProblemBundle { k, kg, zn, zc })
    }

    pub fn dim(&self) -> usize {
        self.k.dim()
    }
}

// ---------------------------------------------------------------------------
// Matrix Market i/o
// ---------------------------------------------------------------------------

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l)))
}

struct MmHeader {
    coordinate: bool,
    symmetric: bool,
}

fn parse_header(path: &Path, line: &str) -> Result<MmHeader> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 5 || fields[0] != "%%MatrixMarket" || fields[1] != "matrix" {
        return Err(Error::UnsupportedHeader(format!(
            "{}: {line}",
            path.display()
        )));
    }
    let coordinate = match fields[2] {
        "coordinate" => true,
        "array" => false,
        other => {
            return Err(Error::UnsupportedHeader(format!(
                "unknown layout {other:?}"
            )))
        }
    };
    if fields[3] != "real" {
        return Err(Error::UnsupportedHeader(format!(
            "unsupported field type {:?}",
            fields[3]
        )));
    }
    let symmetric = match fields[4] {
        "symmetric" => true,
        "general" => false,
        other => {
            return Err(Error::UnsupportedHeader(format!(
                "unsupported symmetry {other:?}"
            )))
        }
    };
    Ok(MmHeader {
        coordinate,
        symmetric,
    })
}

fn parse_f64(path: &Path, lineno: usize, tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::parse(path, lineno, format!("bad float {tok:?}")))
}

fn parse_usize(path: &Path, lineno: usize, tok: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::parse(path, lineno, format!("bad integer {tok:?}")))
}

/// Reads a symmetric matrix from a Matrix Market file (coordinate symmetric,
/// or array symmetric). Duplicate coordinate entries are summed.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SymMatrix> {
    let path = path.as_ref();
    let mut lines = open_lines(path)?;
    let (lineno, first) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 0, "empty file"))?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let header = parse_header(path, &first)?;
    if !header.symmetric {
        return Err(Error::UnsupportedHeader(format!(
            "{}:{lineno}: matrix file must declare symmetric storage",
            path.display()
        )));
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut array_values: Vec<f64> = Vec::new();

    for (lineno, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if size.is_none() {
            if header.coordinate {
                if toks.len() != 3 {
                    return Err(Error::parse(
                        path,
                        lineno,
                        "size line needs `rows cols nnz`",
                    ));
                }
                let rows = parse_usize(path, lineno, toks[0])?;
                let cols = parse_usize(path, lineno, toks[1])?;
                let nnz = parse_usize(path, lineno, toks[2])?;
                if rows != cols {
                    return Err(Error::parse(
                        path,
                        lineno,
                        "symmetric matrix must be square",
                    ));
                }
                size = Some((rows, cols, nnz));
            } else {
                if toks.len() != 2 {
                    return Err(Error::parse(path, lineno, "size line needs `rows cols`"));
                }
                let rows = parse_usize(path, lineno, toks[0])?;
                let cols = parse_usize(path, lineno, toks[1])?;
                if rows != cols {
                    return Err(Error::parse(
                        path,
                        lineno,
                        "symmetric matrix must be square",
                    ));
                }
                size = Some((rows, cols, 0));
            }
            continue;
        }
        if header.coordinate {
            if toks.len() != 3 {
                return Err(Error::parse(path, lineno, "entry needs `row col value`"));
            }
            let i = parse_usize(path, lineno, toks[0])?;
            let j = parse_usize(path, lineno, toks[1])?;
            let v = parse_f64(path, lineno, toks[2])?;
            let n = size.unwrap().0;
            if i == 0 || j == 0 || i > n || j > n {
                return Err(Error::IndexOutOfBounds { row: i, col: j, n });
            }
            triplets.push((i - 1, j - 1, v));
        } else {
            for tok in toks {
                array_values.push(parse_f64(path, lineno, tok)?);
            }
        }
    }

    let (n, _, nnz) = size.ok_or_else(|| Error::parse(path, 0, "missing size line"))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if header.coordinate {
        if triplets.len() != nnz {
            return Err(Error::parse(
                path,
                0,
                format!("expected {nnz} entries, found {}", triplets.len()),
            ));
        }
        SymMatrix::from_triplets(name, n, triplets)
    } else {
        // array symmetric: lower triangle stored column-major
        let expected = n * (n + 1) / 2;
        if array_values.len() != expected {
            return Err(Error::parse(
                path,
                0,
                format!("expected {expected} values, found {}", array_values.len()),
            ));
        }
        let mut triplets = Vec::with_capacity(expected);
        let mut it = array_values.into_iter();
        for j in 0..n {
            for i in j..n {
                let v = it.next().unwrap();
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        SymMatrix::from_triplets(name, n, triplets)
    }
}

/// Writes a symmetric matrix in coordinate symmetric format with 17
/// significant digits (lossless for f64).
pub fn write_matrix_market(m: &SymMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "% {}", m.name)?;
        writeln!(w, "{} {} {}", m.n, m.n, m.entries.len())?;
        for &(i, j, v) in &m.entries {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

/// Reads a dense basis from a Matrix Market array file with `n` rows.
///
/// The column rank must equal the declared column count (checked with a
/// rank-revealing SVD at tolerance `tau_rank`).
pub fn read_basis(path: impl AsRef<Path>, n: usize, tau_rank: f64) -> Result<BasisColumns> {
    let path = path.as_ref();
    let mut lines = open_lines(path)?;
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 0, "empty file"))?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let header = parse_header(path, &first)?;
    if header.coordinate || header.symmetric {
        return Err(Error::UnsupportedHeader(format!(
            "{}: basis file must be a general dense array",
            path.display()
        )));
    }

    let mut size: Option<(usize, usize)> = None;
    let mut values: Vec<f64> = Vec::new();
    for (lineno, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        if size.is_none() {
            let toks: Vec<&str> = trimmed.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(Error::parse(path, lineno, "size line needs `rows cols`"));
            }
            size = Some((
                parse_usize(path, lineno, toks[0])?,
                parse_usize(path, lineno, toks[1])?,
            ));
            continue;
        }
        for tok in trimmed.split_whitespace() {
            values.push(parse_f64(path, lineno, tok)?);
        }
    }
    let (rows, cols) = size.ok_or_else(|| Error::parse(path, 0, "missing size line"))?;
    if rows != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rows,
        });
    }
    if values.len() != rows * cols {
        return Err(Error::parse(
            path,
            0,
            format!("expected {} values, found {}", rows * cols, values.len()),
        ));
    }
    // array format is column-major
    let columns = DMatrix::from_column_slice(rows, cols, &values);
    BasisColumns::new(columns, tau_rank)
}

/// Writes a basis as a Matrix Market dense array file.
pub fn write_basis(b: &BasisColumns, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix array real general")?;
        writeln!(w, "{} {}", b.dim(), b.ncols())?;
        for j in 0..b.ncols() {
            for i in 0..b.dim() {
                writeln!(w, "{:.16e}", b.matrix()[(i, j)])?;
            }
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Bundle validation
// ---------------------------------------------------------------------------

/// Residual ratios of one basis column against K (and K_G for Z_C columns).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisCheck {
    pub basis: String,
    pub column: usize,
    pub k_ratio: f64,
    pub kg_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleReport {
    pub tau_null: f64,
    pub checks: Vec<BasisCheck>,
    pub pass: bool,
    pub warnings: Vec<String>,
}

/// Checks ||K z|| / (||K||_1 ||z||) for every column z of [Z_N Z_C] and
/// ||K_G z|| / (||K_G||_1 ||z||) for every column of Z_C.
///
/// The K ratios gate the pass flag; K_G ratios only warn, matching the
/// accuracy practically attainable for geometric-stiffness bases.
pub fn validate_bundle(bundle: &ProblemBundle, tau_null: f64) -> BundleReport {
    let k = bundle.k.to_dense();
    let kg = bundle.kg.to_dense();
    let k_norm = norm_one(&k);
    let kg_norm = norm_one(&kg);
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    let mut pass = true;

    let ratio = |m: &DMatrix<f64>, norm: f64, z: &DVector<f64>| -> f64 {
        let zn = z.norm();
        if zn == 0.0 || norm == 0.0 {
            return 0.0;
        }
        (m * z).norm() / (norm * zn)
    };

    for (label, basis, check_kg) in [("Z_N", &bundle.zn, false), ("Z_C", &bundle.zc, true)] {
        for c in 0..basis.ncols() {
            let z = basis.matrix().column(c).into_owned();
            let k_ratio = ratio(&k, k_norm, &z);
            if k_ratio > tau_null {
                pass = false;
            }
            let kg_ratio = if check_kg {
                let r = ratio(&kg, kg_norm, &z);
                if r > tau_null {
                    warnings.push(format!(
                        "{label} column {c}: K_G residual ratio {r:.3e} exceeds {tau_null:.1e}"
                    ));
                }
                Some(r)
            } else {
                None
            };
            checks.push(BasisCheck {
                basis: label.to_string(),
                column: c,
                k_ratio,
                kg_ratio,
            });
        }
    }

    BundleReport {
        tau_null,
        checks,
        pass,
        warnings,
    }
}

// ---------------------------------------------------------------------------
// Reports and traces
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EigenpairRecord {
    pub lambda: f64,
    pub mu: f64,
    pub eta: f64,
    pub cos_angle: f64,
    pub errbound: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CountRecord {
    pub a: f64,
    pub b: f64,
    pub count: usize,
    pub method: String,
    /// (alpha, nu_minus(K - alpha K_G)) pairs used by the formulas.
    pub inertias_used: Vec<(f64, usize)>,
    pub small_block_nplus: usize,
    pub small_block_nminus: usize,
    pub common_null_dim: usize,
}

/// JSON result artifact written by the solve pipeline. The schema field is
/// versioned; floating point values round-trip losslessly.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolveReport {
    pub schema: u32,
    pub sigma: f64,
    pub tol: f64,
    pub method: String,
    pub seed: u64,
    pub iterations: usize,
    pub breakdown: Option<usize>,
    pub orth_residual: f64,
    pub eigenpairs: Vec<EigenpairRecord>,
    #[serde(default)]
    pub count: Option<CountRecord>,
    #[serde(default)]
    pub verdict: Option<String>,
}

impl SolveReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn write_report(report: &SolveReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = report.to_json()?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<SolveReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// One Lanczos iteration trace row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub vnorm: f64,
    pub beta: f64,
    pub converged: usize,
}

/// Writes trace rows as CSV with header `step,vnorm,beta`.
pub fn write_trace(rows: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "step,vnorm,beta")?;
        for row in rows {
            writeln!(w, "{},{:.16e},{:.16e}", row.step, row.vnorm, row.beta)?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write as _;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn read_single_entry_file() {
        let f = write_temp("%%MatrixMarket matrix coordinate real symmetric\n3 3 1\n1 1 1.0\n");
        let m = read_matrix_market(f.path()).unwrap();
        let d = m.to_dense();
        assert_eq!(
            d,
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0]))
        );
    }

    #[test]
    fn read_diagonal_file() {
        let f = write_temp(
            "%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n1 1 2.0\n2 2 -1.0\n",
        );
        let m = read_matrix_market(f.path()).unwrap();
        assert_eq!(
            m.to_dense(),
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -1.0, 0.0]))
        );
    }

    #[test]
    fn symmetry_completion() {
        let f = write_temp("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n2 1 1.0\n");
        let m = read_matrix_market(f.path()).unwrap();
        assert_eq!(
            m.to_dense(),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
        );
    }

    #[test]
    fn reads_dense_symmetric_array_format() {
        // lower triangle stored column-major: [[1, 2], [2, 5]]
        let f = write_temp("%%MatrixMarket matrix array real symmetric\n2 2\n1.0\n2.0\n5.0\n");
        let m = read_matrix_market(f.path()).unwrap();
        assert_eq!(
            m.to_dense(),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 5.0])
        );
    }

    #[test]
    fn duplicates_are_summed() {
        let f = write_temp(
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 1.0\n1 1 2.5\n2 1 1.0\n",
        );
        let m = read_matrix_market(f.path()).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.to_dense()[(0, 0)], 3.5);
    }

    #[test]
    fn rejects_general_header_and_bad_indices() {
        let f = write_temp("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1.0\n");
        assert!(matches!(
            read_matrix_market(f.path()),
            Err(Error::UnsupportedHeader(_))
        ));
        let f = write_temp("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n");
        assert!(matches!(
            read_matrix_market(f.path()),
            Err(Error::IndexOutOfBounds { .. })
        ));
        let f = write_temp("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\nx 1 1.0\n");
        assert!(matches!(
            read_matrix_market(f.path()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn basis_roundtrip_and_rank_check() {
        // e3 column
        let f = write_temp("%%MatrixMarket matrix array real general\n3 1\n0\n0\n1\n");
        let b = read_basis(f.path(), 3, TAU_RANK).unwrap();
        assert_eq!(b.ncols(), 1);
        assert_eq!(b.matrix()[(2, 0)], 1.0);

        // two identical columns: rank deficient
        let f = write_temp("%%MatrixMarket matrix array real general\n3 2\n0\n0\n1\n0\n0\n1\n");
        assert!(matches!(
            read_basis(f.path(), 3, TAU_RANK),
            Err(Error::RankDeficient { .. })
        ));

        // e2, e3 columns
        let f = write_temp("%%MatrixMarket matrix array real general\n3 2\n0\n1\n0\n0\n0\n1\n");
        let b = read_basis(f.path(), 3, TAU_RANK).unwrap();
        assert_eq!(b.ncols(), 2);

        // wrong dimension
        let f = write_temp("%%MatrixMarket matrix array real general\n2 1\n1\n0\n");
        assert!(matches!(
            read_basis(f.path(), 3, TAU_RANK),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn validate_bundle_trivial_cases() {
        let k = SymMatrix::from_triplets("K", 3, [(0usize, 0usize, 1.0f64)]).unwrap();
        let kg = SymMatrix::from_triplets("KG", 3, [(0, 0, 2.0), (1, 1, -1.0)]).unwrap();
        // Z = [e2 e3]: all ratios zero, pass
        let zn = BasisColumns::new(DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]), TAU_RANK)
            .unwrap();
        let zc = BasisColumns::new(DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]), TAU_RANK)
            .unwrap();
        let bundle = ProblemBundle::new(k.clone(), kg.clone(), zn, zc).unwrap();
        let report = validate_bundle(&bundle, 1e-10);
        assert!(report.pass);
        assert!(report.checks.iter().all(|c| c.k_ratio == 0.0));

        // Z = [e1]: ratio 1/||K||_1 = 1, fail
        let zn = BasisColumns::new(DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]), TAU_RANK)
            .unwrap();
        let bundle = ProblemBundle::new(k, kg, zn, BasisColumns::empty(3)).unwrap();
        let report = validate_bundle(&bundle, 1e-10);
        assert!(!report.pass);
        assert!((report.checks[0].k_ratio - 1.0).abs() < 1e-15);
    }

    #[test]
    fn report_roundtrip_preserves_values() {
        let report = SolveReport {
            schema: 1,
            sigma: 1.0,
            tol: 1e-6,
            method: "augmented".into(),
            seed: 7,
            iterations: 1,
            breakdown: Some(1),
            orth_residual: 3.25e-16,
            eigenpairs: vec![EigenpairRecord {
                lambda: 0.5,
                mu: -1.0,
                eta: 1e-16,
                cos_angle: 0.0,
                errbound: 0.0,
                converged: true,
            }],
            count: None,
            verdict: Some("MATCH".into()),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        write_report(&report, &path).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(report, back);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("0.5"));
        assert!(text.contains("1e-16"));
    }

    #[test]
    fn empty_report_is_valid() {
        let report = SolveReport {
            schema: 1,
            sigma: -0.6,
            tol: 1e-6,
            method: "reduced".into(),
            seed: 0,
            iterations: 0,
            breakdown: None,
            orth_residual: 0.0,
            eigenpairs: vec![],
            count: None,
            verdict: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.json");
        write_report(&report, &path).unwrap();
        assert_eq!(read_report(&path).unwrap().eigenpairs.len(), 0);
    }

    #[test]
    fn trace_rows_and_header() {
        let rows: Vec<TraceRow> = (1..=40)
            .map(|j| TraceRow {
                step: j,
                vnorm: j as f64,
                beta: 1.0 / j as f64,
                converged: 0,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,vnorm,beta");
        assert_eq!(lines.len(), 41);
    }

    proptest! {
        /// write -> read reproduces the matrix bit-exactly.
        #[test]
        fn matrix_market_roundtrip(
            seed_entries in proptest::collection::vec(
                (0usize..6, 0usize..6, -1e6f64..1e6f64), 0..20)
        ) {
            let m = SymMatrix::from_triplets("t", 6, seed_entries).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.mtx");
            write_matrix_market(&m, &path).unwrap();
            let back = read_matrix_market(&path).unwrap();
            prop_assert_eq!(m.dim(), back.dim());
            prop_assert_eq!(m.entries(), back.entries());
        }

        /// basis write -> read is exact as well.
        #[test]
        fn basis_roundtrip(values in proptest::collection::vec(-1e3f64..1e3, 8)) {
            let mut m = DMatrix::from_column_slice(4, 2, &values);
            // keep it full rank
            m[(0, 0)] += 10.0;
            m[(1, 1)] += 10.0;
            let b = BasisColumns::new(m, TAU_RANK).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("b.mtx");
            write_basis(&b, &path).unwrap();
            let back = read_basis(&path, 4, TAU_RANK).unwrap();
            prop_assert_eq!(b.matrix(), back.matrix());
        }
    }
}
