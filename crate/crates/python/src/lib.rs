//! Python bindings for the buckling-eigen solver: load or generate a pencil,
//! run the shift-invert Lanczos solve, count eigenvalues on intervals, and
//! inspect the canonical form.

use buckling_eigen::canonical;
use buckling_eigen::counting::{self, Verdict};
use buckling_eigen::error::Error;
use buckling_eigen::lanczos::{self, LanczosOptions, Target};
use buckling_eigen::matio::{read_basis, read_matrix_market, BasisColumns, ProblemBundle};
use buckling_eigen::problems;
use buckling_eigen::transform::{
    build_operator, default_scaling, lambda_to_mu as map_lambda_to_mu,
    mu_to_lambda as map_mu_to_lambda, DensePencil, MatvecMethod, OperatorConfig,
    RegularizedInnerProduct,
};
use nalgebra::DVector;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Parse { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_method(name: &str) -> PyResult<MatvecMethod> {
    name.parse().map_err(to_py_err)
}

/// A buckling pencil (K, K_G) with its nullspace bases.
#[pyclass]
struct Pencil {
    bundle: ProblemBundle,
    dense: DensePencil,
    /// Planted eigenvalues when the pencil came from a generator.
    truth: Option<Vec<f64>>,
}

impl Pencil {
    fn from_bundle(bundle: ProblemBundle, truth: Option<Vec<f64>>) -> PyResult<Self> {
        let dense = DensePencil::from_bundle(&bundle).map_err(to_py_err)?;
        Ok(Pencil {
            bundle,
            dense,
            truth,
        })
    }
}

/// Result of a solve: converged pairs first (nearest the shift), quality
/// metrics alongside.
#[pyclass]
struct SolveResult {
    #[pyo3(get)]
    eigenvalues: Vec<f64>,
    #[pyo3(get)]
    mus: Vec<f64>,
    #[pyo3(get)]
    etas: Vec<f64>,
    #[pyo3(get)]
    cos_angles: Vec<f64>,
    #[pyo3(get)]
    converged: Vec<bool>,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    breakdown: Option<usize>,
    #[pyo3(get)]
    orth_residual: f64,
    #[pyo3(get)]
    count: Option<usize>,
    #[pyo3(get)]
    verdict: Option<String>,
}

#[pymethods]
impl SolveResult {
    /// Converged eigenvalues only.
    fn converged_eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .zip(self.converged.iter())
            .filter(|(_, &c)| c)
            .map(|(l, _)| *l)
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveResult(converged={}, iterations={}, verdict={})",
            self.converged.iter().filter(|&&c| c).count(),
            self.iterations,
            self.verdict.as_deref().unwrap_or("None"),
        )
    }
}

#[pymethods]
impl Pencil {
    /// Loads a pencil from Matrix Market files.
    #[staticmethod]
    #[pyo3(signature = (k, kg, zn=None, zc=None))]
    fn load(k: &str, kg: &str, zn: Option<&str>, zc: Option<&str>) -> PyResult<Self> {
        let k = read_matrix_market(k).map_err(to_py_err)?;
        let kg = read_matrix_market(kg).map_err(to_py_err)?;
        let n = k.dim();
        let tau = buckling_eigen::matio::TAU_RANK;
        let zn = match zn {
            Some(path) => read_basis(path, n, tau).map_err(to_py_err)?,
            None => BasisColumns::empty(n),
        };
        let zc = match zc {
            Some(path) => read_basis(path, n, tau).map_err(to_py_err)?,
            None => BasisColumns::empty(n),
        };
        let bundle = ProblemBundle::new(k, kg, zn, zc).map_err(to_py_err)?;
        Pencil::from_bundle(bundle, None)
    }

    /// The regular test pencil with eigenvalues (-1)^k * k.
    #[staticmethod]
    #[pyo3(signature = (n, m, seed=0))]
    fn example1(n: usize, m: usize, seed: u64) -> PyResult<Self> {
        let gp = problems::gen_example1(n, m, seed).map_err(to_py_err)?;
        let truth = gp.truth.iter().map(|(l, _)| *l).collect();
        Pencil::from_bundle(gp.bundle, Some(truth))
    }

    /// A singular pencil with planted finite eigenvalues 1/lambda1[i].
    #[staticmethod]
    #[pyo3(signature = (n1, n2, n3, lambda1, lambda2, seed=0))]
    fn singular(
        n1: usize,
        n2: usize,
        n3: usize,
        lambda1: Vec<f64>,
        lambda2: Vec<f64>,
        seed: u64,
    ) -> PyResult<Self> {
        let gp = problems::gen_singular(n1, n2, n3, &lambda1, &lambda2, seed).map_err(to_py_err)?;
        let truth = gp.truth.iter().map(|(l, _)| *l).collect();
        Pencil::from_bundle(gp.bundle, Some(truth))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.dense.dim()
    }

    #[getter]
    fn common_null_dim(&self) -> usize {
        self.dense.n3()
    }

    #[getter]
    fn truth(&self) -> Option<Vec<f64>> {
        self.truth.clone()
    }

    /// Residual-ratio check of the nullspace bases; true when every column
    /// passes at the given tolerance.
    #[pyo3(signature = (tau=1e-10))]
    fn validate(&self, tau: f64) -> bool {
        buckling_eigen::matio::validate_bundle(&self.bundle, tau).pass
    }

    /// Shift-invert Lanczos solve. With an interval, the expected count is
    /// established first and the verdict reports MATCH / MISSING / SURPLUS.
    #[pyo3(signature = (sigma, nev=6, interval=None, tol=1e-6, maxit=300, method="reduced", seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        sigma: f64,
        nev: usize,
        interval: Option<(f64, f64)>,
        tol: f64,
        maxit: usize,
        method: &str,
        seed: u64,
    ) -> PyResult<SolveResult> {
        if sigma == 0.0 {
            return Err(PyValueError::new_err("the shift must be nonzero"));
        }
        let method = parse_method(method)?;
        let cfg = OperatorConfig::default();
        let op = build_operator(&self.dense, sigma, method, &cfg).map_err(to_py_err)?;
        let (hn, hc) = default_scaling(&self.dense).map_err(to_py_err)?;
        let m = RegularizedInnerProduct::new(&self.dense, hn, hc).map_err(to_py_err)?;

        let count_report = match interval {
            Some((a, b)) => Some(count_any(&self.dense, a, b, method, &cfg).map_err(to_py_err)?),
            None => None,
        };
        let target = match (&count_report, interval) {
            (Some(report), Some((a, b))) => Target::Interval {
                a,
                b,
                expected: report.count,
            },
            _ => Target::NearestPairs(nev),
        };

        use rand::RngExt;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x0 = DVector::from_fn(self.dense.dim(), |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let result = lanczos::run(
            &self.dense,
            &op,
            &m,
            &x0,
            target,
            &LanczosOptions {
                tol,
                maxit,
                check_invariants: false,
            },
        )
        .map_err(to_py_err)?;

        let verdict = count_report
            .as_ref()
            .map(|report| counting::validate(report, &result.pairs, None));
        Ok(SolveResult {
            eigenvalues: result.pairs.iter().map(|p| p.lambda).collect(),
            mus: result.pairs.iter().map(|p| p.mu).collect(),
            etas: result.pairs.iter().map(|p| p.eta).collect(),
            cos_angles: result.pairs.iter().map(|p| p.cos_angle).collect(),
            converged: result.pairs.iter().map(|p| p.converged).collect(),
            iterations: result.iterations,
            breakdown: result.breakdown,
            orth_residual: result.orth_residual,
            count: count_report.map(|r| r.count),
            verdict: verdict.map(|v| match v {
                Verdict::Match => "MATCH".to_string(),
                other => other.to_string(),
            }),
        })
    }

    /// Number of pencil eigenvalues in (a, b) by matrix inertias.
    #[pyo3(signature = (a, b, method="reduced"))]
    fn count(&self, a: f64, b: f64, method: &str) -> PyResult<usize> {
        let method = parse_method(method)?;
        let cfg = OperatorConfig::default();
        Ok(count_any(&self.dense, a, b, method, &cfg)
            .map_err(to_py_err)?
            .count)
    }

    /// Canonical block dimensions and diagonal values; reverse=True reduces
    /// K_G - lambda# K (the semi-definite direction for buckling pencils).
    #[pyo3(signature = (reverse=true, tau=1e-10))]
    fn canonical(
        &self,
        reverse: bool,
        tau: f64,
        py: Python<'_>,
    ) -> PyResult<Py<pyo3::types::PyDict>> {
        let (a, b) = if reverse {
            (&self.dense.kg, &self.dense.k)
        } else {
            (&self.dense.k, &self.dense.kg)
        };
        let cf = canonical::reduce(a, b, tau).map_err(to_py_err)?;
        let (ra, rb) = cf.block_residuals(a, b);
        let dict = pyo3::types::PyDict::new(py);
        dict.set_item("n0", cf.n0)?;
        dict.set_item("n1", cf.n1)?;
        dict.set_item("n2", cf.n2)?;
        dict.set_item("n3", cf.n3)?;
        dict.set_item("lambda1", cf.lambda1.iter().cloned().collect::<Vec<f64>>())?;
        dict.set_item("lambda2", cf.lambda2.iter().cloned().collect::<Vec<f64>>())?;
        dict.set_item("residual_a", ra)?;
        dict.set_item("residual_b", rb)?;
        dict.set_item(
            "simultaneously_diagonalizable",
            canonical::is_simultaneously_diagonalizable(&cf),
        )?;
        Ok(dict.unbind())
    }

    fn __repr__(&self) -> String {
        format!(
            "Pencil(n={}, common_null_dim={})",
            self.dense.dim(),
            self.dense.n3()
        )
    }
}

fn count_any(
    pencil: &DensePencil,
    a: f64,
    b: f64,
    method: MatvecMethod,
    cfg: &OperatorConfig,
) -> Result<counting::CountReport, Error> {
    if a == 0.0 && b > 0.0 {
        counting::count_half_interval(pencil, b, method, cfg)
    } else if b == 0.0 && a < 0.0 {
        counting::count_half_interval(pencil, a, method, cfg)
    } else {
        counting::count_interval(pencil, a, b, method, cfg)
    }
}

/// lambda = sigma * mu / (mu - 1).
#[pyfunction]
fn mu_to_lambda(mu: f64, sigma: f64) -> PyResult<f64> {
    map_mu_to_lambda(mu, sigma).map_err(to_py_err)
}

/// mu = lambda / (lambda - sigma).
#[pyfunction]
fn lambda_to_mu(lambda: f64, sigma: f64) -> PyResult<f64> {
    map_lambda_to_mu(lambda, sigma).map_err(to_py_err)
}

#[pymodule]
fn buckling_eigen_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Pencil>()?;
    m.add_class::<SolveResult>()?;
    m.add_function(wrap_pyfunction!(mu_to_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_to_mu, m)?)?;
    Ok(())
}
