//! The generalized buckling spectral transformation C = (K - sigma*K_G)^+ K
//! applied as an operator, the regularized inner product M, and the
//! mu <-> lambda eigenvalue maps.
//!
//! Two interchangeable realizations of u = C v:
//! * `Augmented`: solve the bordered system
//!   [[K - sigma*K_G, Z_C], [Z_C^T, 0]] [u; y] = [K v; 0].
//! * `Reduced`: permute the constraint rows last, solve with the leading
//!   nonsingular principal submatrix S11, then project onto the orthogonal
//!   complement of the common nullspace.
//!
//! Both factorizations yield nu_minus as a byproduct, which the counting
//! module consumes.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::dense::{ldlt, norm_one, symmetrize, LdltFactor, TAU_PIVOT, TAU_ZERO};
use crate::error::{Error, Result};
use crate::matio::ProblemBundle;

/// Default bound on ||Z_C^T u|| / ||u|| after an operator application.
pub const TAU_PROJ: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatvecMethod {
    /// Method 1: bordered (augmented) system.
    Augmented,
    /// Method 2: nonsingular principal submatrix plus projection.
    Reduced,
}

impl fmt::Display for MatvecMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatvecMethod::Augmented => write!(f, "augmented"),
            MatvecMethod::Reduced => write!(f, "reduced"),
        }
    }
}

impl FromStr for MatvecMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "augmented" | "method1" => Ok(MatvecMethod::Augmented),
            "reduced" | "method2" => Ok(MatvecMethod::Reduced),
            other => Err(Error::InvalidParameter(format!(
                "unknown matvec method {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OperatorConfig {
    pub tau_pivot: f64,
    pub tau_zero: f64,
    pub tau_proj: f64,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            tau_pivot: TAU_PIVOT,
            tau_zero: TAU_ZERO,
            tau_proj: TAU_PROJ,
        }
    }
}

/// Dense working form of a problem bundle: materialized matrices, the
/// orthonormalized common-nullspace basis, and the 1-norms entering the
/// residual metric.
#[derive(Debug, Clone)]
pub struct DensePencil {
    pub k: DMatrix<f64>,
    pub kg: DMatrix<f64>,
    pub zn: DMatrix<f64>,
    pub zc: DMatrix<f64>,
    /// Thin-QR orthonormalization of `zc` (same span).
    pub zc_ortho: DMatrix<f64>,
    pub k_norm1: f64,
    pub kg_norm1: f64,
}

impl DensePencil {
    pub fn new(
        k: DMatrix<f64>,
        kg: DMatrix<f64>,
        zn: DMatrix<f64>,
        zc: DMatrix<f64>,
    ) -> Result<Self> {
        let n = k.nrows();
        for got in [k.ncols(), kg.nrows(), kg.ncols(), zn.nrows(), zc.nrows()] {
            if got != n {
                return Err(Error::DimensionMismatch { expected: n, got });
            }
        }
        let zc_ortho = orthonormal_columns(&zc);
        let k_norm1 = norm_one(&k);
        let kg_norm1 = norm_one(&kg);
        Ok(DensePencil {
            k,
            kg,
            zn,
            zc,
            zc_ortho,
            k_norm1,
            kg_norm1,
        })
    }

    pub fn from_bundle(bundle: &ProblemBundle) -> Result<Self> {
        DensePencil::new(
            bundle.k.to_dense(),
            bundle.kg.to_dense(),
            bundle.zn.matrix().clone(),
            bundle.zc.matrix().clone(),
        )
    }

    pub fn dim(&self) -> usize {
        self.k.nrows()
    }

    /// Dimension of the common nullspace.
    pub fn n3(&self) -> usize {
        self.zc.ncols()
    }
}

/// Thin-QR orthonormal basis with the same span as the given columns.
pub fn orthonormal_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    let qr = m.clone().qr();
    qr.q()
}

/// The bordered matrix [[K - alpha*K_G, Z_C], [Z_C^T, 0]].
pub fn augmented_matrix(
    k: &DMatrix<f64>,
    kg: &DMatrix<f64>,
    alpha: f64,
    zc: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = k.nrows();
    let n3 = zc.ncols();
    let mut shifted = k - kg * alpha;
    symmetrize(&mut shifted);
    let mut a = DMatrix::zeros(n + n3, n + n3);
    a.view_mut((0, 0), (n, n)).copy_from(&shifted);
    a.view_mut((0, n), (n, n3)).copy_from(zc);
    a.view_mut((n, 0), (n3, n)).copy_from(&zc.transpose());
    a
}

/// Greedily selects the constraint rows whose trailing block Y2 of P^T Z_C
/// is as well-conditioned as possible (pivoted Gram-Schmidt on the rows,
/// maximizing the retained volume).
pub fn select_constraint_rows(zc: &DMatrix<f64>) -> Result<Vec<usize>> {
    let n = zc.nrows();
    let n3 = zc.ncols();
    if n3 == 0 {
        return Ok(Vec::new());
    }
    let mut rows: Vec<DVector<f64>> = (0..n).map(|i| zc.row(i).transpose()).collect();
    let scale = rows.iter().map(|r| r.norm()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Err(Error::PermutationFailure);
    }
    let mut selected = Vec::with_capacity(n3);
    let mut taken = vec![false; n];
    for _ in 0..n3 {
        let mut best = usize::MAX;
        let mut best_norm = 0.0f64;
        for i in 0..n {
            if !taken[i] {
                let nrm = rows[i].norm();
                if nrm > best_norm {
                    best_norm = nrm;
                    best = i;
                }
            }
        }
        if best == usize::MAX || best_norm <= 1e-12 * scale {
            // a full-rank Z_C always yields n3 independent rows
            return Err(Error::PermutationFailure);
        }
        taken[best] = true;
        selected.push(best);
        let dir = rows[best].clone() / best_norm;
        for i in 0..n {
            if !taken[i] {
                let c = rows[i].dot(&dir);
                rows[i] -= &dir * c;
            }
        }
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Factorized application of u = (K - sigma*K_G)^+ (K v).
#[derive(Debug, Clone)]
pub struct ShiftInvertOperator {
    sigma: f64,
    method: MatvecMethod,
    factor: LdltFactor,
    /// Row permutation for the reduced method: perm[i] = original index at
    /// permuted position i. Identity-equivalent (empty) for the augmented
    /// method.
    perm: Vec<usize>,
    k: DMatrix<f64>,
    zc_ortho: DMatrix<f64>,
    n: usize,
    n3: usize,
    inertia_neg: usize,
    tau_proj: f64,
}

/// Builds the augmented-system operator (Method 1).
pub fn build_method1(
    pencil: &DensePencil,
    sigma: f64,
    cfg: &OperatorConfig,
) -> Result<ShiftInvertOperator> {
    if sigma == 0.0 {
        return Err(Error::ShiftIsZero);
    }
    let n = pencil.dim();
    let n3 = pencil.n3();
    let a_sigma = augmented_matrix(&pencil.k, &pencil.kg, sigma, &pencil.zc_ortho);
    let factor = ldlt(&a_sigma, cfg.tau_pivot, cfg.tau_zero);
    if factor.is_singular() {
        return Err(Error::SingularShift { sigma });
    }
    let inertia_neg = factor.inertia().nminus;
    Ok(ShiftInvertOperator {
        sigma,
        method: MatvecMethod::Augmented,
        factor,
        perm: Vec::new(),
        k: pencil.k.clone(),
        zc_ortho: pencil.zc_ortho.clone(),
        n,
        n3,
        inertia_neg,
        tau_proj: cfg.tau_proj,
    })
}

/// Builds the reduced-submatrix operator (Method 2).
pub fn build_method2(
    pencil: &DensePencil,
    sigma: f64,
    cfg: &OperatorConfig,
) -> Result<ShiftInvertOperator> {
    if sigma == 0.0 {
        return Err(Error::ShiftIsZero);
    }
    let n = pencil.dim();
    let n3 = pencil.n3();
    let selected = select_constraint_rows(&pencil.zc_ortho)?;

    // trailing block Y2 of the permuted basis must be nonsingular
    if n3 > 0 {
        let mut y2 = DMatrix::zeros(n3, n3);
        for (r, &i) in selected.iter().enumerate() {
            y2.set_row(r, &pencil.zc_ortho.row(i));
        }
        let (_, sv, _) = crate::dense::svd(&y2);
        let smax = sv[0];
        let smin = sv[sv.len() - 1];
        if smax == 0.0 || smin <= 1e-12 * smax {
            return Err(Error::PermutationFailure);
        }
    }

    let mut perm: Vec<usize> = (0..n).filter(|i| !selected.contains(i)).collect();
    perm.extend(selected.iter().copied());

    let mut shifted = &pencil.k - &pencil.kg * sigma;
    symmetrize(&mut shifted);
    let m = n - n3;
    let s11 = DMatrix::from_fn(m, m, |i, j| shifted[(perm[i], perm[j])]);
    let factor = ldlt(&s11, cfg.tau_pivot, cfg.tau_zero);
    if factor.is_singular() {
        return Err(Error::SingularShift { sigma });
    }
    let inertia_neg = factor.inertia().nminus;
    Ok(ShiftInvertOperator {
        sigma,
        method: MatvecMethod::Reduced,
        factor,
        perm,
        k: pencil.k.clone(),
        zc_ortho: pencil.zc_ortho.clone(),
        n,
        n3,
        inertia_neg,
        tau_proj: cfg.tau_proj,
    })
}

/// Builds the operator for the requested method.
pub fn build_operator(
    pencil: &DensePencil,
    sigma: f64,
    method: MatvecMethod,
    cfg: &OperatorConfig,
) -> Result<ShiftInvertOperator> {
    match method {
        MatvecMethod::Augmented => build_method1(pencil, sigma, cfg),
        MatvecMethod::Reduced => build_method2(pencil, sigma, cfg),
    }
}

impl ShiftInvertOperator {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn method(&self) -> MatvecMethod {
        self.method
    }

    /// nu_minus of the factorized matrix (A_sigma or S11), the counting
    /// byproduct.
    pub fn inertia_neg(&self) -> usize {
        self.inertia_neg
    }

    /// Magnitude of the weakest pivot accepted by the factorization; a small
    /// value flags a shift close to the spectrum.
    pub fn min_pivot(&self) -> f64 {
        self.factor.min_pivot()
    }

    pub fn zc_ortho(&self) -> &DMatrix<f64> {
        &self.zc_ortho
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn tau_proj(&self) -> f64 {
        self.tau_proj
    }

    /// u = C v.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply_full(v).0
    }

    /// u = C v together with the consistency diagnostic: the norm of the
    /// auxiliary variable y (augmented) or of the constraint component
    /// removed by the projection (reduced). Exact arithmetic drives both
    /// to zero.
    pub fn apply_full(&self, v: &DVector<f64>) -> (DVector<f64>, f64) {
        assert_eq!(v.len(), self.n, "operator input dimension");
        let kv = &self.k * v;
        match self.method {
            MatvecMethod::Augmented => {
                let mut rhs = DVector::zeros(self.n + self.n3);
                rhs.rows_mut(0, self.n).copy_from(&kv);
                let sol = self
                    .factor
                    .solve(&rhs)
                    .expect("operator factor verified nonsingular at build");
                let u = sol.rows(0, self.n).into_owned();
                let aux = sol.rows(self.n, self.n3).norm();
                (u, aux)
            }
            MatvecMethod::Reduced => {
                let m = self.n - self.n3;
                let c1 = DVector::from_fn(m, |i, _| kv[self.perm[i]]);
                let w1 = self
                    .factor
                    .solve(&c1)
                    .expect("operator factor verified nonsingular at build");
                let mut up = DVector::zeros(self.n);
                for i in 0..m {
                    up[self.perm[i]] = w1[i];
                }
                if self.n3 == 0 {
                    return (up, 0.0);
                }
                let coeff = self.zc_ortho.transpose() * &up;
                let u = &up - &self.zc_ortho * &coeff;
                (u, coeff.norm())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Regularized inner product
// ---------------------------------------------------------------------------

/// M = K + (K_G Z_N) H_N (K_G Z_N)^T + Z_C H_C Z_C^T, applied in low-rank
/// form without forming M.
#[derive(Debug, Clone)]
pub struct RegularizedInnerProduct {
    k: DMatrix<f64>,
    /// Precomputed K_G * Z_N.
    un: DMatrix<f64>,
    hn: DMatrix<f64>,
    zc: DMatrix<f64>,
    hc: DMatrix<f64>,
}

impl RegularizedInnerProduct {
    /// `hn` and `hc` must be positive definite (checked by Cholesky).
    pub fn new(pencil: &DensePencil, hn: DMatrix<f64>, hc: DMatrix<f64>) -> Result<Self> {
        let m = pencil.zn.ncols();
        let n3 = pencil.zc.ncols();
        if hn.nrows() != m || hn.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: hn.nrows(),
            });
        }
        if hc.nrows() != n3 || hc.ncols() != n3 {
            return Err(Error::DimensionMismatch {
                expected: n3,
                got: hc.nrows(),
            });
        }
        for h in [&hn, &hc] {
            if h.ncols() > 0 && nalgebra::linalg::Cholesky::new(h.clone()).is_none() {
                return Err(Error::NotPositiveDefinite);
            }
        }
        Ok(RegularizedInnerProduct {
            k: pencil.k.clone(),
            un: &pencil.kg * &pencil.zn,
            hn,
            zc: pencil.zc.clone(),
            hc,
        })
    }

    pub fn dim(&self) -> usize {
        self.k.nrows()
    }

    /// M x = K x + U_N H_N (U_N^T x) + Z_C H_C (Z_C^T x).
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = &self.k * x;
        if self.un.ncols() > 0 {
            y += &self.un * (&self.hn * (self.un.transpose() * x));
        }
        if self.zc.ncols() > 0 {
            y += &self.zc * (&self.hc * (self.zc.transpose() * x));
        }
        y
    }

    /// x^T M y.
    pub fn dot(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.apply(y).dot(x)
    }
}

/// The scaling used in practice: H_N = omega * diag(1 / ||(K_G Z_N)_i||^2)
/// normalizing the update columns, H_C = omega * I, with omega = ||K||_1.
pub fn default_scaling(pencil: &DensePencil) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let omega = if pencil.k_norm1 > 0.0 {
        pencil.k_norm1
    } else {
        1.0
    };
    let un = &pencil.kg * &pencil.zn;
    let m = un.ncols();
    let mut hn = DMatrix::zeros(m, m);
    for i in 0..m {
        let nrm2 = un.column(i).norm_squared();
        if nrm2 == 0.0 {
            // the column annihilates under K_G: it belongs in Z_C, not Z_N
            return Err(Error::ZeroScalingColumn { index: i });
        }
        hn[(i, i)] = omega / nrm2;
    }
    let hc = DMatrix::identity(pencil.n3(), pencil.n3()) * omega;
    Ok((hn, hc))
}

// ---------------------------------------------------------------------------
// Eigenvalue maps
// ---------------------------------------------------------------------------

/// lambda = sigma * mu / (mu - 1).
pub fn mu_to_lambda(mu: f64, sigma: f64) -> Result<f64> {
    if mu == 1.0 {
        return Err(Error::MapPole {
            what: "mu = 1 (infinite-eigenvalue class)".into(),
        });
    }
    Ok(sigma * mu / (mu - 1.0))
}

/// mu = lambda / (lambda - sigma).
pub fn lambda_to_mu(lambda: f64, sigma: f64) -> Result<f64> {
    if lambda == sigma {
        return Err(Error::MapPole {
            what: "lambda = sigma".into(),
        });
    }
    Ok(lambda / (lambda - sigma))
}
