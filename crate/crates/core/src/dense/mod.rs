//! Dense factorization and eigenvalue kernels used by every other module.
//!
//! All spectral kernels are implemented here: the Bunch-Kaufman LDL^T (its
//! inertia byproduct is what the counting scheme consumes), the tridiagonal
//! QL iteration driving the Lanczos convergence tests, the Householder + QL
//! symmetric eigensolver, and a one-sided Jacobi SVD. The SVD and
//! eigensolver must stay exact on matrices with repeated zero singular
//! values; the crate's canonical reduction splits such clusters constantly.
//! nalgebra supplies containers and the QR/LU/Cholesky factorizations only.

mod eig;
mod ldlt;
mod svd;
mod tridiag;

pub use eig::sym_eig;
pub use ldlt::{ldlt, LdltFactor};
pub use svd::svd;
pub use tridiag::sym_tridiag_eig;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative threshold under which a pivot or eigenvalue counts as zero.
pub const TAU_ZERO: f64 = 1e-12;

/// Default Bunch-Kaufman pivot threshold.
pub const TAU_PIVOT: f64 = 0.1;

/// Signature (nu_plus, nu_minus, nu_zero) of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub nplus: usize,
    pub nminus: usize,
    pub nzero: usize,
}

impl Inertia {
    pub fn dim(&self) -> usize {
        self.nplus + self.nminus + self.nzero
    }
}

/// 1-norm (maximum absolute column sum) of a dense matrix.
pub fn norm_one(a: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|v| v.abs()).sum();
        best = best.max(s);
    }
    best
}

/// Numerical rank from singular values with a relative cutoff.
pub fn rank_from_singular_values(s: &DVector<f64>, tau: f64) -> usize {
    let smax = s.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > tau * smax).count()
}

/// Orthonormal basis of the nullspace of `a` (columns), via SVD.
///
/// Requires at least as many rows as columns so the thin SVD spans the whole
/// row space; every caller in this crate passes a square matrix.
pub fn nullspace_basis(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return DMatrix::identity(n, n);
    }
    assert!(a.nrows() >= n, "nullspace_basis expects nrows >= ncols");
    let (_, s, v) = svd(a);
    let rank = rank_from_singular_values(&s, tau);
    v.columns(rank, n - rank).into_owned()
}

/// Forces exact symmetry by averaging with the transpose.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Factored form of u = (K - sigma*K_G)^+ (K v) via a full eigendecomposition
/// of the shifted matrix with explicit zero truncation. This is the test
/// oracle for both production matvec methods; building it once amortizes the
/// decomposition over many applications.
#[derive(Debug, Clone)]
pub struct PinvOracle {
    k: DMatrix<f64>,
    vectors: DMatrix<f64>,
    inverted: DVector<f64>,
}

impl PinvOracle {
    pub fn new(k: &DMatrix<f64>, kg: &DMatrix<f64>, sigma: f64) -> Result<Self> {
        let n = k.nrows();
        assert!(n <= 500, "PinvOracle is a desk-scale oracle");
        let mut shifted = k - kg * sigma;
        symmetrize(&mut shifted);
        let (values, vectors) = sym_eig(&shifted);
        let amax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if amax == 0.0 {
            return Ok(PinvOracle {
                k: k.clone(),
                vectors,
                inverted: DVector::zeros(n),
            });
        }
        let zero_cut = 1e-10 * amax;
        let nzeros = values.iter().filter(|v| v.abs() <= zero_cut).count();
        let min_nonzero = values
            .iter()
            .map(|v| v.abs())
            .filter(|a| *a > zero_cut)
            .fold(f64::INFINITY, f64::min);
        // The zero cluster of K - sigma*K_G is exactly the common nullspace
        // when sigma avoids the spectrum: more zeros, or a vanishing gap
        // between the clusters, means sigma sits on (or hugs) an eigenvalue.
        let mut stacked = DMatrix::zeros(2 * n, n);
        stacked.view_mut((0, 0), (n, n)).copy_from(k);
        stacked.view_mut((n, 0), (n, n)).copy_from(kg);
        let (_, stacked_sv, _) = svd(&stacked);
        let common_null = n - rank_from_singular_values(&stacked_sv, 1e-10);
        if nzeros > common_null || min_nonzero <= 1e-8 * amax {
            return Err(Error::SingularShift { sigma });
        }
        let inverted = values.map(|v| if v.abs() > zero_cut { 1.0 / v } else { 0.0 });
        Ok(PinvOracle {
            k: k.clone(),
            vectors,
            inverted,
        })
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let coeffs = self.vectors.transpose() * (&self.k * v);
        &self.vectors * coeffs.component_mul(&self.inverted)
    }
}

/// One-shot form of the oracle.
pub fn pinv_apply_oracle(
    k: &DMatrix<f64>,
    kg: &DMatrix<f64>,
    sigma: f64,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    Ok(PinvOracle::new(k, kg, sigma)?.apply(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        symmetrize(&mut a);
        a
    }

    #[test]
    fn sym_eig_identity_and_diagonal() {
        let (vals, vecs) = sym_eig(&DMatrix::identity(4, 4));
        assert!(vals.iter().all(|&v| (v - 1.0).abs() < 1e-14));
        let g = vecs.transpose() * &vecs;
        assert!((g - DMatrix::identity(4, 4)).norm() < 1e-12);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -1.0, 2.0]));
        let (vals, _) = sym_eig(&d);
        assert_eq!(vals.as_slice(), &[-1.0, 2.0, 3.0]);
    }

    /// Determinant oracle at n = 4: the characteristic polynomial must vanish
    /// at every computed eigenvalue.
    #[test]
    fn sym_eig_matches_characteristic_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_symmetric(4, &mut rng);
            let (vals, vecs) = sym_eig(&a);
            for i in 0..4 {
                let x = vecs.column(i).into_owned();
                let r = &a * &x - &x * vals[i];
                assert!(r.norm() < 1e-12 * (1.0 + a.norm()));
            }
            for i in 0..4 {
                let shifted = &a - DMatrix::identity(4, 4) * vals[i];
                let det = shifted.determinant();
                assert!(
                    det.abs() < 1e-10 * (1.0 + a.norm().powi(4)),
                    "det at eigenvalue should vanish, got {det}"
                );
            }
        }
    }

    #[test]
    fn svd_simple_cases() {
        let e3 = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
        let (_, s, _) = svd(&e3);
        assert!((s[0] - 1.0).abs() < 1e-15);

        let z = DMatrix::zeros(3, 2);
        let (_, s, _) = svd(&z);
        assert!(s.iter().all(|&v| v == 0.0));

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 4.0]));
        let (_, s, _) = svd(&d);
        assert!((s[0] - 4.0).abs() < 1e-14 && (s[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn pinv_oracle_tiny_pencil() {
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0]));
        let kg = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -1.0, 0.0]));
        // (K - K_G) = diag(-1, 1, 0); u = pinv * K e1 = -e1
        let u = pinv_apply_oracle(&k, &kg, 1.0, &DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        assert!((u[0] + 1.0).abs() < 1e-14 && u[1].abs() < 1e-15 && u[2].abs() < 1e-15);
        // common nullspace input -> 0
        let u = pinv_apply_oracle(&k, &kg, 1.0, &DVector::from_vec(vec![0.0, 0.0, 1.0])).unwrap();
        assert!(u.norm() < 1e-15);
        // K e2 = 0 -> 0
        let u = pinv_apply_oracle(&k, &kg, 1.0, &DVector::from_vec(vec![0.0, 1.0, 0.0])).unwrap();
        assert!(u.norm() < 1e-15);
    }

    #[test]
    fn pinv_oracle_rejects_spectrum_shift() {
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0]));
        let kg = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -1.0, 0.0]));
        // sigma = 1/2 is the pencil eigenvalue: K - 0.5 K_G = diag(0, 0.5, 0)
        let r = pinv_apply_oracle(&k, &kg, 0.5, &DVector::from_vec(vec![1.0, 0.0, 0.0]));
        assert!(matches!(r, Err(Error::SingularShift { .. })));
    }

    #[test]
    fn pinv_oracle_satisfies_constraint_and_residual() {
        // Theorem contract: Z_c^T u = 0 and (K - sigma K_G) u = K v.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0]));
        let kg = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -1.0, 0.0]));
        let oracle = PinvOracle::new(&k, &kg, 1.0).unwrap();
        for _ in 0..50 {
            let v = DVector::from_fn(3, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let u = oracle.apply(&v);
            assert!(u[2].abs() < 1e-10 * (1.0 + u.norm()));
            let lhs = (&k - &kg) * &u;
            let rhs = &k * &v;
            assert!((lhs - rhs).norm() < 1e-10 * (1.0 + v.norm()));
        }
    }

    #[test]
    fn nullspace_basis_of_rank_one() {
        let a = DMatrix::from_column_slice(3, 3, &[1.0, 0., 0., 0., 0., 0., 0., 0., 0.]);
        let ns = nullspace_basis(&a, 1e-12);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).norm() < 1e-14);
        let g = ns.transpose() * &ns;
        assert!((g - DMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
