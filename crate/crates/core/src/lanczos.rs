//! Shift-invert Lanczos iteration in the M inner product with full
//! reorthogonalization: three-term recurrence on the transformed operator C,
//! per-step convergence testing on the projected tridiagonal matrix, and
//! Ritz-pair extraction with quality metrics (relative residual eta, angle
//! to the common nullspace).

use nalgebra::{DMatrix, DVector};

use crate::dense::sym_tridiag_eig;
use crate::error::{Error, Result};
use crate::matio::TraceRow;
use crate::transform::{mu_to_lambda, DensePencil, RegularizedInnerProduct, ShiftInvertOperator};

/// Default convergence tolerance for the two-part criterion.
pub const DEFAULT_TOL: f64 = 1e-6;

/// Default iteration cap.
pub const DEFAULT_MAXIT: usize = 300;

/// What the iteration is asked to deliver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// Stop once this many pairs (nearest the shift first) have converged.
    NearestPairs(usize),
    /// Stop once `expected` converged pairs lie inside (a, b).
    Interval { a: f64, b: f64, expected: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub tol: f64,
    pub maxit: usize,
    /// Verify M-orthonormality and the governing equation at every step
    /// (costly; meant for validation runs).
    pub check_invariants: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: DEFAULT_TOL,
            maxit: DEFAULT_MAXIT,
            check_invariants: false,
        }
    }
}

/// Basis and recurrence coefficients accumulated by the iteration.
#[derive(Debug, Clone, Default)]
pub struct LanczosState {
    /// M-orthonormal Lanczos vectors v_1 .. v_{j+1} (j+1 present unless the
    /// iteration broke down).
    pub vectors: Vec<DVector<f64>>,
    /// Cached M v_i matching `vectors`.
    pub m_vectors: Vec<DVector<f64>>,
    /// alpha_1 .. alpha_j.
    pub alphas: Vec<f64>,
    /// beta_0 .. beta_j (beta_0 normalizes the start vector).
    pub betas: Vec<f64>,
}

impl LanczosState {
    pub fn steps(&self) -> usize {
        self.alphas.len()
    }

    /// Row-sum estimate of ||T_j||.
    pub fn t_norm(&self) -> f64 {
        let j = self.alphas.len();
        let mut best = 0.0f64;
        for i in 0..j {
            let lower = if i > 0 { self.betas[i].abs() } else { 0.0 };
            let upper = if i + 1 < j {
                self.betas[i + 1].abs()
            } else {
                0.0
            };
            best = best.max(lower + self.alphas[i].abs() + upper);
        }
        best
    }

    /// ||V^T M V - I||_F from the cached M-products.
    pub fn orth_residual(&self) -> f64 {
        let m = self.vectors.len();
        let mut sum = 0.0f64;
        for i in 0..m {
            for l in 0..m {
                let g = self.vectors[i].dot(&self.m_vectors[l]);
                let want = if i == l { 1.0 } else { 0.0 };
                sum += (g - want) * (g - want);
            }
        }
        sum.sqrt()
    }
}

/// One approximate eigenpair.
#[derive(Debug, Clone)]
pub struct RitzPair {
    /// Ritz value of C.
    pub mu: f64,
    /// Mapped pencil eigenvalue.
    pub lambda: f64,
    /// Ritz vector V_j s (M-normalized).
    pub x: DVector<f64>,
    /// Relative residual of the pencil eigenpair.
    pub eta: f64,
    /// Cosine of the angle to the common nullspace.
    pub cos_angle: f64,
    /// |sigma| / (mu - 1)^2 * |beta_j| * |e_j^T s|.
    pub errbound: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    /// Ritz pairs with |mu| >= tol (the zero class is excluded), nearest the
    /// shift first.
    pub pairs: Vec<RitzPair>,
    pub iterations: usize,
    /// Step at which beta collapsed (invariant subspace), if any.
    pub breakdown: Option<usize>,
    pub hit_maxit: bool,
    pub trace: Vec<TraceRow>,
    pub state: LanczosState,
    /// ||V^T M V - I||_F at exit.
    pub orth_residual: f64,
    /// Maxima over per-step checks; populated when `check_invariants` is on.
    pub max_orth_residual: Option<f64>,
    pub max_gov_residual: Option<f64>,
    pub converged_count: usize,
}

impl LanczosResult {
    pub fn converged_pairs(&self) -> impl Iterator<Item = &RitzPair> {
        self.pairs.iter().filter(|p| p.converged)
    }
}

/// Relative residual norm of a pencil eigenpair:
/// ||K x - lambda K_G x|| / ((||K||_1 + |lambda| ||K_G||_1) ||x||).
pub fn residual_eta(pencil: &DensePencil, lambda: f64, x: &DVector<f64>) -> f64 {
    let xn = x.norm();
    assert!(xn > 0.0, "eta of the zero vector");
    let r = &pencil.k * x - (&pencil.kg * x) * lambda;
    r.norm() / ((pencil.k_norm1 + lambda.abs() * pencil.kg_norm1) * xn)
}

/// cos of the Euclidean angle between x and the span of the orthonormal
/// columns `zc_ortho`.
pub fn angle_to_nullspace(x: &DVector<f64>, zc_ortho: &DMatrix<f64>) -> f64 {
    if zc_ortho.ncols() == 0 {
        return 0.0;
    }
    let xn = x.norm();
    if xn == 0.0 {
        return 0.0;
    }
    (zc_ortho.transpose() * x).norm() / xn
}

fn errbound(sigma: f64, mu: f64, beta_j: f64, last_component: f64) -> f64 {
    let denom = (mu - 1.0) * (mu - 1.0);
    if denom == 0.0 {
        return f64::INFINITY;
    }
    sigma.abs() / denom * beta_j.abs() * last_component.abs()
}

/// The two-part convergence test: |mu| >= tol excludes the zero class, and
/// the residual bound in the transformed metric must sit below tol.
fn convergence_flags(
    theta: &DVector<f64>,
    s: &DMatrix<f64>,
    beta_j: f64,
    sigma: f64,
    tol: f64,
) -> Vec<bool> {
    let j = theta.len();
    (0..j)
        .map(|i| {
            let mu = theta[i];
            mu.abs() >= tol && errbound(sigma, mu, beta_j, s[(j - 1, i)]) < tol
        })
        .collect()
}

fn count_in_target(theta: &DVector<f64>, flags: &[bool], sigma: f64, target: &Target) -> usize {
    match target {
        Target::NearestPairs(_) => flags.iter().filter(|&&f| f).count(),
        Target::Interval { a, b, .. } => theta
            .iter()
            .zip(flags.iter())
            .filter(|&(&mu, &f)| {
                if !f || mu == 1.0 {
                    return false;
                }
                let lambda = sigma * mu / (mu - 1.0);
                lambda > *a && lambda < *b
            })
            .count(),
    }
}

fn requested(target: &Target) -> usize {
    match target {
        Target::NearestPairs(k) => *k,
        Target::Interval { expected, .. } => *expected,
    }
}

/// Runs the shift-invert Lanczos iteration. The actual starting vector is
/// C x0, which purges the common-nullspace and zero-class components.
pub fn run(
    pencil: &DensePencil,
    op: &ShiftInvertOperator,
    m: &RegularizedInnerProduct,
    x0: &DVector<f64>,
    target: Target,
    opts: &LanczosOptions,
) -> Result<LanczosResult> {
    let n = pencil.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if x0.norm() == 0.0 {
        return Err(Error::InvalidParameter("x0 must be nonzero".into()));
    }
    let maxit = opts.maxit.max(1);
    let sigma = op.sigma();

    let mut state = LanczosState::default();
    let mut trace: Vec<TraceRow> = Vec::new();

    // start vector
    let mut r = op.apply(x0);
    let mut p = m.apply(&r);
    let beta0_sq = p.dot(&r);
    let x0_m = m.dot(x0, x0).max(0.0).sqrt();
    check_square_norm(beta0_sq, &r, &p)?;
    let beta0 = beta0_sq.max(0.0).sqrt();
    if beta0 <= f64::EPSILON.sqrt() * x0_m.max(f64::MIN_POSITIVE) {
        // C x0 vanished: x0 carried no component outside the nullspace
        return Err(Error::BreakdownBeta {
            step: 0,
            beta: beta0,
        });
    }
    state.betas.push(beta0);

    let mut breakdown = None;
    let mut hit_maxit = false;
    let mut converged_flags: Vec<bool>;
    let mut max_orth = 0.0f64;
    let mut max_gov = 0.0f64;

    loop {
        let j = state.alphas.len() + 1;
        let beta_prev = state.betas[j - 1];
        let v_j = &r / beta_prev;
        let mv_j = &p / beta_prev;
        state.vectors.push(v_j.clone());
        state.m_vectors.push(mv_j);

        r = op.apply(&v_j);
        if j >= 2 {
            r -= &state.vectors[j - 2] * beta_prev;
        }
        p = m.apply(&r);
        let alpha_j = state.vectors[j - 1].dot(&p);
        r -= &state.vectors[j - 1] * alpha_j;

        // full reorthogonalization, two classical Gram-Schmidt passes
        for _ in 0..2 {
            for i in 0..j {
                let c = state.m_vectors[i].dot(&r);
                r -= &state.vectors[i] * c;
            }
        }
        p = m.apply(&r);
        let beta_sq = p.dot(&r);
        check_square_norm(beta_sq, &r, &p)?;
        let beta_j = beta_sq.max(0.0).sqrt();
        state.alphas.push(alpha_j);
        state.betas.push(beta_j);

        let broke = beta_j <= f64::EPSILON.sqrt() * state.t_norm().max(1.0);
        if broke {
            breakdown = Some(j);
        }

        // convergence test on T_j
        let (theta, s) = sym_tridiag_eig(&state.alphas, &state.betas[1..j])?;
        let eff_beta = if broke { 0.0 } else { beta_j };
        converged_flags = convergence_flags(&theta, &s, eff_beta, sigma, opts.tol);
        let in_target = count_in_target(&theta, &converged_flags, sigma, &target);

        trace.push(TraceRow {
            step: j,
            vnorm: state.vectors[j - 1].norm(),
            beta: beta_j,
            converged: in_target,
        });

        let done = broke || in_target >= requested(&target) || j >= maxit;
        if done && !broke {
            // complete the basis so the governing equation holds verbatim
            state.vectors.push(&r / beta_j);
            state.m_vectors.push(&p / beta_j);
            if j >= maxit && in_target < requested(&target) {
                hit_maxit = true;
            }
        }

        if opts.check_invariants {
            max_orth = max_orth.max(state.orth_residual());
            // mid-iteration the trailing residual vector stands in for
            // beta_j v_{j+1}
            let tail = (state.vectors.len() == j).then_some(&r);
            max_gov = max_gov.max(governing_residual_impl(op, &state, tail));
        }

        if done {
            break;
        }
    }

    let pairs = ritz_extract(pencil, op, &state, opts.tol)?;
    let converged_count = converged_flags.iter().filter(|&&f| f).count();
    let orth_residual = state.orth_residual();
    Ok(LanczosResult {
        pairs,
        iterations: state.alphas.len(),
        breakdown,
        hit_maxit,
        trace,
        orth_residual,
        max_orth_residual: opts.check_invariants.then_some(max_orth),
        max_gov_residual: opts.check_invariants.then_some(max_gov),
        converged_count,
        state,
    })
}

fn check_square_norm(value: f64, r: &DVector<f64>, p: &DVector<f64>) -> Result<()> {
    if value < 0.0 {
        let noise = 64.0 * f64::EPSILON * r.norm() * p.norm();
        if value.abs() > noise {
            return Err(Error::NonpositiveNorm { value });
        }
    }
    Ok(())
}

/// Largest columnwise residual of the governing equation
/// C V_j = V_j T_j + beta_j v_{j+1} e_j^T, scaled by 1 + ||T_j||.
pub fn governing_residual(op: &ShiftInvertOperator, state: &LanczosState) -> f64 {
    governing_residual_impl(op, state, None)
}

fn governing_residual_impl(
    op: &ShiftInvertOperator,
    state: &LanczosState,
    tail: Option<&DVector<f64>>,
) -> f64 {
    let j = state.alphas.len();
    if j == 0 {
        return 0.0;
    }
    let scale = 1.0 + state.t_norm();
    let mut worst = 0.0f64;
    for i in 0..j {
        let mut want = &state.vectors[i] * state.alphas[i];
        if i > 0 {
            want += &state.vectors[i - 1] * state.betas[i];
        }
        if i + 1 < j {
            want += &state.vectors[i + 1] * state.betas[i + 1];
        } else if state.vectors.len() > j {
            want += &state.vectors[j] * state.betas[j];
        } else if let Some(r) = tail {
            // r = beta_j v_{j+1} before normalization
            want += r;
        }
        let got = op.apply(&state.vectors[i]);
        worst = worst.max((got - want).norm());
    }
    worst / scale
}

/// Ritz pairs from the current state: eigenpairs of T_j mapped back through
/// the spectral transformation, with residual and nullspace-angle metrics.
/// Ritz values inside the zero-exclusion band |mu| < tol are dropped.
pub fn ritz_extract(
    pencil: &DensePencil,
    op: &ShiftInvertOperator,
    state: &LanczosState,
    tol: f64,
) -> Result<Vec<RitzPair>> {
    let j = state.alphas.len();
    if j == 0 {
        return Ok(Vec::new());
    }
    let sigma = op.sigma();
    let (theta, s) = sym_tridiag_eig(&state.alphas, &state.betas[1..j])?;
    let beta_j = if state.breakdown_beta_is_zero(j) {
        0.0
    } else {
        state.betas[j]
    };
    let mut pairs = Vec::new();
    for i in 0..j {
        let mu = theta[i];
        if mu.abs() < tol {
            // zero class: nullspace of K and the common nullspace
            continue;
        }
        let lambda = match mu_to_lambda(mu, sigma) {
            Ok(l) => l,
            // mu exactly at the pole maps to the infinite class
            Err(_) => continue,
        };
        let mut x = DVector::zeros(pencil.dim());
        for l in 0..j {
            x += &state.vectors[l] * s[(l, i)];
        }
        let eb = errbound(sigma, mu, beta_j, s[(j - 1, i)]);
        let converged = mu.abs() >= tol && eb < tol;
        pairs.push(RitzPair {
            mu,
            lambda,
            eta: residual_eta(pencil, lambda, &x),
            cos_angle: angle_to_nullspace(&x, op.zc_ortho()),
            errbound: eb,
            converged,
            x,
        });
    }
    // nearest the shift first: largest |mu|
    pairs.sort_by(|a, b| b.mu.abs().partial_cmp(&a.mu.abs()).expect("finite mu"));
    Ok(pairs)
}

impl LanczosState {
    fn breakdown_beta_is_zero(&self, j: usize) -> bool {
        // the basis is one vector short exactly when the iteration broke down
        self.vectors.len() == j && self.betas.len() == j + 1
    }
}
