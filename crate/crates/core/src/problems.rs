//! Synthetic pencil generators with planted spectra, and the norm-growth
//! demonstration contrasting the K semi-inner product with the regularized
//! M inner product.

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::{sym_tridiag_eig, symmetrize};
use crate::error::{Error, Result};
use crate::lanczos::{self, LanczosOptions, LanczosState, RitzPair, Target};
use crate::matio::{BasisColumns, ProblemBundle, SymMatrix, TraceRow, TAU_RANK};
use crate::transform::{build_method1, DensePencil, OperatorConfig, RegularizedInnerProduct};

/// A generated pencil together with its planted ground truth.
#[derive(Debug, Clone)]
pub struct GeneratedPencil {
    pub bundle: ProblemBundle,
    /// Planted finite nonzero eigenpairs (lambda, x), x normalized and
    /// orthogonal to the common nullspace.
    pub truth: Vec<(f64, DVector<f64>)>,
    /// Eigenvalues at infinity of the generated pencil.
    pub infinite_count: usize,
    /// Zero eigenvalues (nullspace of K outside the common nullspace).
    pub zero_count: usize,
    pub common_null_dim: usize,
    pub seed: u64,
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Haar-ish random orthogonal matrix: QR of a Gaussian matrix with the sign
/// of the R diagonal fixed.
fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| gauss(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// The regular test pencil: K = Q Lambda Q^T with Lambda = diag(1..n-m, 0..0)
/// and K_G = Q Phi Q^T with Phi = diag((-1)^k). The planted eigenvalues are
/// lambda_k = (-1)^k * k with the columns of Q as eigenvectors; the last m
/// columns of Q span the nullspace of K.
pub fn gen_example1(n: usize, m: usize, seed: u64) -> Result<GeneratedPencil> {
    if m == 0 || m >= n {
        return Err(Error::InvalidParameter(format!(
            "gen_example1 requires 1 <= m < n, got n = {n}, m = {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_orthogonal(n, &mut rng);
    let lambda = DVector::from_fn(n, |i, _| if i < n - m { (i + 1) as f64 } else { 0.0 });
    let phi = DVector::from_fn(n, |i, _| if (i + 1) % 2 == 0 { 1.0 } else { -1.0 });
    let mut k = &q * DMatrix::from_diagonal(&lambda) * q.transpose();
    let mut kg = &q * DMatrix::from_diagonal(&phi) * q.transpose();
    symmetrize(&mut k);
    symmetrize(&mut kg);

    let mut truth = Vec::with_capacity(n - m);
    for i in 0..(n - m) {
        let kk = (i + 1) as f64;
        let sign = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
        truth.push((sign * kk, q.column(i).into_owned()));
    }
    let zn = q.columns(n - m, m).into_owned();

    let bundle = ProblemBundle::new(
        SymMatrix::from_dense("K", &k),
        SymMatrix::from_dense("KG", &kg),
        BasisColumns::new(zn, TAU_RANK)?,
        BasisColumns::empty(n),
    )?;
    Ok(GeneratedPencil {
        bundle,
        truth,
        infinite_count: 0,
        zero_count: m,
        common_null_dim: 0,
        seed,
    })
}

/// Builds the singular pencil K = W^{-T} diag(I, 0, 0) W^{-1},
/// K_G = W^{-T} diag(Lambda1#, Lambda2#, 0) W^{-1} for an explicit transform
/// whose first two column blocks are orthogonal to the third.
fn assemble_singular(
    n1: usize,
    n2: usize,
    n3: usize,
    lambda1_sharp: &[f64],
    lambda2_sharp: &[f64],
    w: &DMatrix<f64>,
    w_inv: &DMatrix<f64>,
    seed: u64,
) -> Result<GeneratedPencil> {
    let n = n1 + n2 + n3;
    let d_k = DVector::from_fn(n, |i, _| if i < n1 { 1.0 } else { 0.0 });
    let d_kg = DVector::from_fn(n, |i, _| {
        if i < n1 {
            lambda1_sharp[i]
        } else if i < n1 + n2 {
            lambda2_sharp[i - n1]
        } else {
            0.0
        }
    });
    let mut k = w_inv.transpose() * DMatrix::from_diagonal(&d_k) * w_inv;
    let mut kg = w_inv.transpose() * DMatrix::from_diagonal(&d_kg) * w_inv;
    symmetrize(&mut k);
    symmetrize(&mut kg);

    let mut truth = Vec::new();
    let mut infinite_count = 0;
    for i in 0..n1 {
        let ls = lambda1_sharp[i];
        if ls == 0.0 {
            infinite_count += 1;
        } else {
            let mut x = w.column(i).into_owned();
            x /= x.norm();
            truth.push((1.0 / ls, x));
        }
    }

    let zn = w.columns(n1, n2).into_owned();
    let zc = crate::transform::orthonormal_columns(&w.columns(n1 + n2, n3).into_owned());
    let bundle = ProblemBundle::new(
        SymMatrix::from_dense("K", &k),
        SymMatrix::from_dense("KG", &kg),
        BasisColumns::new(zn, TAU_RANK)?,
        BasisColumns::new(zc, TAU_RANK)?,
    )?;
    Ok(GeneratedPencil {
        bundle,
        truth,
        infinite_count,
        zero_count: n2,
        common_null_dim: n3,
        seed,
    })
}

/// Generates a singular pencil with planted finite eigenvalues
/// 1 / lambda1_sharp[i], a zero class of size n2, and a common nullspace of
/// dimension n3. The transform W is well-conditioned by construction and its
/// leading blocks are orthogonal to the common-nullspace block.
pub fn gen_singular(
    n1: usize,
    n2: usize,
    n3: usize,
    lambda1_sharp: &[f64],
    lambda2_sharp: &[f64],
    seed: u64,
) -> Result<GeneratedPencil> {
    if lambda1_sharp.len() != n1 {
        return Err(Error::InvalidParameter(format!(
            "lambda1 length {} != n1 = {n1}",
            lambda1_sharp.len()
        )));
    }
    if lambda2_sharp.len() != n2 {
        return Err(Error::InvalidParameter(format!(
            "lambda2 length {} != n2 = {n2}",
            lambda2_sharp.len()
        )));
    }
    if lambda2_sharp.iter().any(|&v| v == 0.0) {
        return Err(Error::InvalidParameter(
            "lambda2 entries must be nonzero".into(),
        ));
    }
    let n = n1 + n2 + n3;
    if n == 0 {
        return Err(Error::InvalidParameter("empty pencil".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // W = [Q_perp Z | Q_3 D]: the column blocks W1, W2 live in the orthogonal
    // complement of W3, so the canonical constraint holds exactly and the
    // condition number stays close to that of Z.
    let q = random_orthogonal(n, &mut rng);
    let q_perp = q.columns(0, n1 + n2).into_owned();
    let q3 = q.columns(n1 + n2, n3).into_owned();
    let mut z = DMatrix::from_fn(n1 + n2, n1 + n2, |_, _| gauss(&mut rng));
    let zf = z.norm().max(f64::MIN_POSITIVE);
    z.scale_mut(0.1 / zf);
    z += DMatrix::identity(n1 + n2, n1 + n2);
    let scales = DVector::from_fn(n3, |_, _| 0.5 + 1.5 * rng.random::<f64>());

    let mut w = DMatrix::zeros(n, n);
    w.view_mut((0, 0), (n, n1 + n2)).copy_from(&(&q_perp * &z));
    for j in 0..n3 {
        w.set_column(n1 + n2 + j, &(q3.column(j) * scales[j]));
    }
    // W^{-1} = blockdiag(Z^{-1}, D^{-1}) [Q_perp Q_3]^T
    let z_inv = z
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("singular transform draw".into()))?;
    let mut w_inv = DMatrix::zeros(n, n);
    w_inv
        .view_mut((0, 0), (n1 + n2, n))
        .copy_from(&(&z_inv * q_perp.transpose()));
    for j in 0..n3 {
        w_inv.set_row(n1 + n2 + j, &(q3.column(j).transpose() / scales[j]));
    }

    assemble_singular(n1, n2, n3, lambda1_sharp, lambda2_sharp, &w, &w_inv, seed)
}

// ---------------------------------------------------------------------------
// Norm-growth demonstration
// ---------------------------------------------------------------------------

/// Inner product driving the demo iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoInner {
    /// The K semi-inner product (the failure mode under study).
    K,
    /// The regularized M inner product.
    M,
}

impl std::str::FromStr for DemoInner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" | "K" => Ok(DemoInner::K),
            "m" | "M" => Ok(DemoInner::M),
            other => Err(Error::InvalidParameter(format!(
                "unknown inner product {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoTrace {
    pub rows: Vec<TraceRow>,
    pub final_pairs: Vec<RitzPair>,
    /// Notable events (semi-norm pathologies, restart application).
    pub events: Vec<String>,
    pub max_vnorm: f64,
}

/// Runs `steps` Lanczos iterations on the regular test pencil with the shift
/// sigma, in either inner product, optionally applying one implicit restart
/// (single zero-shift QR purge) at the given step. Records per-step Lanczos
/// vector norms for the growth comparison.
pub fn demo_norm_growth(
    n: usize,
    m: usize,
    sigma: f64,
    steps: usize,
    inner: DemoInner,
    restart: Option<usize>,
    seed: u64,
) -> Result<DemoTrace> {
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be positive".into()));
    }
    let gp = gen_example1(n, m, seed)?;
    let pencil = DensePencil::from_bundle(&gp.bundle)?;
    let cfg = OperatorConfig::default();
    let op = build_method1(&pencil, sigma, &cfg)?;
    let x0 = DVector::from_element(n, 1.0);

    match inner {
        DemoInner::M => {
            if restart.is_some() {
                return Err(Error::InvalidParameter(
                    "the restart comparison applies to the K-inner run".into(),
                ));
            }
            let m_ip = RegularizedInnerProduct::new(
                &pencil,
                DMatrix::identity(m, m),
                DMatrix::zeros(0, 0),
            )?;
            let result = lanczos::run(
                &pencil,
                &op,
                &m_ip,
                &x0,
                Target::NearestPairs(usize::MAX),
                &LanczosOptions {
                    maxit: steps,
                    ..Default::default()
                },
            )?;
            let max_vnorm = result.trace.iter().map(|r| r.vnorm).fold(0.0f64, f64::max);
            Ok(DemoTrace {
                rows: result.trace,
                final_pairs: result.pairs,
                events: Vec::new(),
                max_vnorm,
            })
        }
        DemoInner::K => k_inner_demo(&gp, &pencil, &op, &x0, steps, restart),
    }
}

fn tridiag_norm(alphas: &[f64], betas: &[f64]) -> f64 {
    let j = alphas.len();
    let mut best = 0.0f64;
    for i in 0..j {
        let lower = if i > 0 { betas[i].abs() } else { 0.0 };
        let upper = if i + 1 < j { betas[i + 1].abs() } else { 0.0 };
        best = best.max(lower + alphas[i].abs() + upper);
    }
    best
}

fn k_inner_demo(
    gp: &GeneratedPencil,
    pencil: &DensePencil,
    op: &crate::transform::ShiftInvertOperator,
    x0: &DVector<f64>,
    steps: usize,
    restart: Option<usize>,
) -> Result<DemoTrace> {
    let n = pencil.dim();
    let k = &pencil.k;
    let zn = gp.bundle.zn.matrix();
    let sigma = op.sigma();
    let tol = lanczos::DEFAULT_TOL;
    let mut events = Vec::new();

    // semi-norm with the documented handling of nonpositive squares
    let semi_norm_sq = |r: &mut DVector<f64>,
                        p: &mut DVector<f64>,
                        step: usize,
                        events: &mut Vec<String>|
     -> f64 {
        let mut val = p.dot(r);
        if val <= 0.0 {
            let noise = (n as f64) * f64::EPSILON * pencil.k_norm1 * r.norm_squared();
            if val.abs() < noise {
                // flush the nullspace component and retry
                let coeff = zn.transpose() * &*r;
                *r -= zn * coeff;
                *p = k * &*r;
                val = p.dot(r);
                events.push(format!("step {step}: flushed nullspace component"));
            }
            if val <= 0.0 {
                events.push(format!("step {step}: nonpositive K semi-norm {val:e}"));
                val = val.abs();
            }
        }
        val
    };

    let mut vectors: Vec<DVector<f64>> = Vec::new();
    let mut kvs: Vec<DVector<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut rows: Vec<TraceRow> = Vec::new();

    let mut r = op.apply(x0);
    let mut p = k * &r;
    let b0 = semi_norm_sq(&mut r, &mut p, 0, &mut events);
    let beta0 = b0.max(0.0).sqrt();
    if beta0 <= f64::EPSILON.sqrt() {
        return Err(Error::BreakdownBeta {
            step: 0,
            beta: beta0,
        });
    }
    betas.push(beta0);

    let mut performed = 0usize;
    let mut restart_pending = restart;
    while performed < steps {
        performed += 1;
        let beta_prev = *betas.last().expect("beta history");
        let v = &r / beta_prev;
        let kv = &p / beta_prev;
        vectors.push(v.clone());
        kvs.push(kv);
        let j = vectors.len();

        r = op.apply(&v);
        if j >= 2 {
            r -= &vectors[j - 2] * beta_prev;
        }
        p = k * &r;
        let alpha = v.dot(&p);
        r -= &v * alpha;
        for _ in 0..2 {
            for i in 0..j {
                let c = kvs[i].dot(&r);
                r -= &vectors[i] * c;
            }
        }
        p = k * &r;
        let bsq = semi_norm_sq(&mut r, &mut p, performed, &mut events);
        let beta = bsq.max(0.0).sqrt();
        alphas.push(alpha);
        betas.push(beta);

        // converged count for the trace
        let (theta, s) = sym_tridiag_eig(&alphas, &betas[1..j])?;
        let conv = (0..j)
            .filter(|&i| {
                let mu = theta[i];
                let denom = (mu - 1.0) * (mu - 1.0);
                mu.abs() >= tol
                    && denom > 0.0
                    && sigma.abs() / denom * beta.abs() * s[(j - 1, i)].abs() < tol
            })
            .count();
        rows.push(TraceRow {
            step: performed,
            vnorm: v.norm(),
            beta,
            converged: conv,
        });

        if beta <= f64::EPSILON.sqrt() * tridiag_norm(&alphas, &betas).max(1.0) {
            events.push(format!("step {performed}: breakdown, beta = {beta:e}"));
            break;
        }

        if restart_pending == Some(vectors.len()) && vectors.len() >= 2 && performed < steps {
            restart_pending = None;
            purge_zero_shift(&mut vectors, &mut kvs, &mut alphas, &mut betas, &mut r);
            p = k * &r;
            let bsq = semi_norm_sq(&mut r, &mut p, performed, &mut events);
            let beta = bsq.max(0.0).sqrt();
            betas.push(beta);
            events.push(format!(
                "implicit restart (zero-shift purge) after step {performed}"
            ));
            if beta <= f64::EPSILON.sqrt() {
                break;
            }
        }
    }

    let state = LanczosState {
        vectors,
        m_vectors: kvs,
        alphas,
        betas,
    };
    let final_pairs = lanczos::ritz_extract(pencil, op, &state, tol)?;
    let max_vnorm = rows.iter().map(|r| r.vnorm).fold(0.0f64, f64::max);
    Ok(DemoTrace {
        rows,
        final_pairs,
        events,
        max_vnorm,
    })
}

/// One implicit QR step with shift zero on T_j, applied to the basis, then
/// truncated by one column: the minimal purge step of an implicitly
/// restarted Lanczos iteration.
fn purge_zero_shift(
    vectors: &mut Vec<DVector<f64>>,
    kvs: &mut Vec<DVector<f64>>,
    alphas: &mut Vec<f64>,
    betas: &mut Vec<f64>,
    r: &mut DVector<f64>,
) {
    let j = alphas.len();
    debug_assert!(j >= 2);
    let mut t = DMatrix::zeros(j, j);
    for i in 0..j {
        t[(i, i)] = alphas[i];
    }
    for i in 1..j {
        t[(i, i - 1)] = betas[i];
        t[(i - 1, i)] = betas[i];
    }
    let qr = t.clone().qr();
    let q = qr.q();
    let mut tp = q.transpose() * &t * &q;
    symmetrize(&mut tp);

    let n = vectors[0].len();
    let mut vmat = DMatrix::zeros(n, j);
    let mut kvmat = DMatrix::zeros(n, j);
    for (c, (v, kv)) in vectors.iter().zip(kvs.iter()).enumerate() {
        vmat.set_column(c, v);
        kvmat.set_column(c, kv);
    }
    let vnew = &vmat * &q;
    let kvnew = &kvmat * &q;

    let sub = tp[(j - 1, j - 2)];
    let qlast = q[(j - 1, j - 2)];
    let r_new = vnew.column(j - 1) * sub + &*r * qlast;

    vectors.clear();
    kvs.clear();
    for c in 0..j - 1 {
        vectors.push(vnew.column(c).into_owned());
        kvs.push(kvnew.column(c).into_owned());
    }
    let beta0 = betas[0];
    alphas.clear();
    alphas.extend((0..j - 1).map(|i| tp[(i, i)]));
    betas.clear();
    betas.push(beta0);
    betas.extend((1..j - 1).map(|i| tp[(i, i - 1)]));
    *r = r_new;
}
