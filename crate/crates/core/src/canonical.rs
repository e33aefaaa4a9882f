//! Constructive canonical form of a symmetric semi-definite pencil
//! A - lambda*B (A symmetric, B symmetric positive semi-definite).
//!
//! Applied to the reversed buckling pencil (A = K_G, B = K) it exposes the
//! full eigenstructure: block dimensions, finite eigenvalues, the infinite
//! and zero classes, and the common nullspace. It is the dense ground truth
//! the iterative solver is tested against; intended for n up to a few
//! hundred.

use nalgebra::{DMatrix, DVector};

use crate::dense::{nullspace_basis, rank_from_singular_values, svd, sym_eig, symmetrize};
use crate::error::{Error, Result};

/// Default relative rank cutoff inside the reduction.
pub const TAU_RANK: f64 = 1e-10;

/// Intermediate five-block form: W0^T B W0 = diag(I_n0, I_n1, 0, 0, 0) and
/// W0^T A W0 carrying the nonsingular diagonal coupling block Sigma between
/// the first and fourth block and the nonsingular diagonal Lambda2 block.
#[derive(Debug, Clone)]
pub struct FixHeibergerForm {
    pub w0: DMatrix<f64>,
    pub n0: usize,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    /// Coupling singular values (length n0).
    pub sigma: DVector<f64>,
    /// Nonzero eigenvalues of A restricted to the nullspace of B (length n2).
    pub lambda2: DVector<f64>,
}

/// Canonical form W^T A W = blockdiag(S, Lambda1, Lambda2, 0),
/// W^T B W = blockdiag(Omega, I_n1, 0, 0), with S = I_n0 (x) [[0,1],[1,0]]
/// and Omega = I_n0 (x) [[1,0],[0,0]].
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    pub w: DMatrix<f64>,
    pub n0: usize,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub lambda1: DVector<f64>,
    pub lambda2: DVector<f64>,
}

/// Finite eigenpairs of the original pencil K - lambda*K_G recovered from the
/// canonical form of its reversal, plus the sizes of the degenerate classes.
#[derive(Debug, Clone)]
pub struct PencilEigenpairs {
    /// (lambda, x) with lambda finite and nonzero, x orthogonal to the common
    /// nullspace.
    pub finite: Vec<(f64, DVector<f64>)>,
    /// Eigenvalues at infinity (K_G-null directions outside the common
    /// nullspace).
    pub infinite_count: usize,
    /// Zero eigenvalues (K-null directions outside the common nullspace).
    pub zero_count: usize,
    pub common_null_dim: usize,
}

fn check_square_pair(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.nrows(),
        });
    }
    Ok(n)
}

/// Orthonormal complement of the span of the leading `k` columns of the
/// orthonormal matrix `q` within R^m.
fn orthonormal_complement(q: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let m = q.nrows();
    if k == 0 {
        return DMatrix::identity(m, m);
    }
    let q0 = q.columns(0, k);
    let projector = &q0 * q0.transpose();
    // eigenvalues are 0 or 1; any mid-range cutoff separates them
    nullspace_basis(&projector, 0.5)
}

/// First stage of the reduction (the classical simultaneous-reduction form).
pub fn fix_heiberger_reduce(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tau_rank: f64,
) -> Result<FixHeibergerForm> {
    let n = check_square_pair(a, b)?;

    // diagonalize B, split range and nullspace
    let (omega, u) = sym_eig(b);
    let bmax = omega.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(&neg) = omega
        .iter()
        .find(|&&v| v < -tau_rank * bmax.max(f64::MIN_POSITIVE))
    {
        return Err(Error::NotPositiveSemiDefinite { eigenvalue: neg });
    }
    let rank_b = omega.iter().filter(|&&v| v > tau_rank * bmax).count();

    // eigenvalues ascend, so the range directions are the trailing columns
    let mut x1 = DMatrix::zeros(n, rank_b);
    for (dst, src) in ((n - rank_b)..n).enumerate() {
        let scale = 1.0 / omega[src].sqrt();
        x1.set_column(dst, &(u.column(src) * scale));
    }
    let mut x2 = DMatrix::zeros(n, n - rank_b);
    for (dst, src) in (0..(n - rank_b)).enumerate() {
        x2.set_column(dst, &u.column(src));
    }

    // scale on which A-side rank decisions are made
    let mut a22t = x2.transpose() * a * &x2;
    symmetrize(&mut a22t);
    let a12t = x1.transpose() * a * &x2;
    let mut a11t = x1.transpose() * a * &x1;
    symmetrize(&mut a11t);
    let a_scale = a11t
        .norm()
        .max(a22t.norm())
        .max(a12t.norm())
        .max(f64::MIN_POSITIVE);
    let cut = tau_rank * a_scale;

    // diagonalize A on the nullspace of B; keep eigenvalues beyond the cutoff
    let (lam_all, q2) = sym_eig(&a22t);
    let mut order: Vec<usize> = (0..lam_all.len()).collect();
    order.sort_by(|&i, &j| {
        lam_all[j]
            .abs()
            .partial_cmp(&lam_all[i].abs())
            .expect("non-finite eigenvalue")
    });
    let n2 = order.iter().filter(|&&i| lam_all[i].abs() > cut).count();
    let lambda2 = DVector::from_iterator(n2, order.iter().take(n2).map(|&i| lam_all[i]));
    let mut x2a = DMatrix::zeros(n, n2);
    for (dst, &src) in order.iter().take(n2).enumerate() {
        x2a.set_column(dst, &(&x2 * q2.column(src)));
    }
    let nb_rest = (n - rank_b) - n2;
    let mut x2b = DMatrix::zeros(n, nb_rest);
    for (dst, &src) in order.iter().skip(n2).enumerate() {
        x2b.set_column(dst, &(&x2 * q2.column(src)));
    }

    // reveal the coupling block between the B-range part and what is left of
    // the B-nullspace
    let g = x1.transpose() * a * &x2b;
    let (n0, sigma, x1a, x1b, x2ba, x2bb) = if rank_b == 0 || nb_rest == 0 {
        (
            0,
            DVector::zeros(0),
            DMatrix::zeros(n, 0),
            x1.clone(),
            DMatrix::zeros(n, 0),
            x2b.clone(),
        )
    } else {
        let (ug, sg, vg) = svd(&g);
        let n0 = sg.iter().filter(|&&v| v > cut).count();
        let sigma = DVector::from_iterator(n0, sg.iter().take(n0).cloned());
        let u0 = ug.columns(0, n0).into_owned();
        let v0 = vg.columns(0, n0).into_owned();
        let u_perp = orthonormal_complement(&ug, n0);
        let v_perp = orthonormal_complement(&vg, n0);
        (
            n0,
            sigma,
            &x1 * &u0,
            &x1 * u_perp,
            &x2b * &v0,
            &x2b * v_perp,
        )
    };

    let n1 = rank_b - n0;
    let n3 = nb_rest - n0;
    let mut w0 = DMatrix::zeros(n, n);
    let mut col = 0;
    for block in [&x1a, &x1b, &x2a, &x2ba, &x2bb] {
        for j in 0..block.ncols() {
            w0.set_column(col, &block.column(j));
            col += 1;
        }
    }
    debug_assert_eq!(col, n);

    Ok(FixHeibergerForm {
        w0,
        n0,
        n1,
        n2,
        n3,
        sigma,
        lambda2,
    })
}

/// Full reduction to the canonical form, chaining the explicit elimination
/// steps after the first-stage form.
pub fn reduce(a: &DMatrix<f64>, b: &DMatrix<f64>, tau_rank: f64) -> Result<CanonicalForm> {
    let n = check_square_pair(a, b)?;
    let fh = fix_heiberger_reduce(a, b, tau_rank)?;
    let (n0, n1, n2, n3) = (fh.n0, fh.n1, fh.n2, fh.n3);

    // block offsets in the five-block layout [n0, n1, n2, n0, n3]
    let o1 = 0;
    let o2 = n0;
    let o3 = n0 + n1;
    let o4 = n0 + n1 + n2;
    let o5 = 2 * n0 + n1 + n2;

    let mut w = fh.w0.clone();
    let mut a_cur = w.transpose() * a * &w;
    symmetrize(&mut a_cur);

    // eliminate the A blocks coupling to the Sigma rows
    if n0 > 0 {
        let mut w1 = DMatrix::identity(n, n);
        for (width, src_off) in [(n0, o1), (n1, o2), (n2, o3)] {
            for j in 0..width {
                for i in 0..n0 {
                    let factor = if src_off == o1 { 0.5 } else { 1.0 };
                    w1[(o4 + i, src_off + j)] =
                        -factor * a_cur[(o1 + i, src_off + j)] / fh.sigma[i];
                }
            }
        }
        w = &w * &w1;
        a_cur = w1.transpose() * a_cur * &w1;
        symmetrize(&mut a_cur);
    }

    // eliminate the coupling between the Lambda2 block and the B-range block
    if n1 > 0 && n2 > 0 {
        let mut w2 = DMatrix::identity(n, n);
        for i in 0..n2 {
            for j in 0..n1 {
                w2[(o3 + i, o2 + j)] = -a_cur[(o2 + j, o3 + i)] / fh.lambda2[i];
            }
        }
        w = &w * &w2;
        a_cur = w2.transpose() * a_cur * &w2;
        symmetrize(&mut a_cur);
    }

    // P3: reorder blocks [1, 2, 3, 4, 5] -> [1, 4, 2, 3, 5]
    let mut p3 = Vec::with_capacity(n);
    p3.extend(o1..o1 + n0);
    p3.extend(o4..o4 + n0);
    p3.extend(o2..o2 + n1);
    p3.extend(o3..o3 + n2);
    p3.extend(o5..o5 + n3);
    w = gather_columns(&w, &p3);
    a_cur = gather_symmetric(&a_cur, &p3);

    // offsets in the reordered layout [n0, n0, n1, n2, n3]
    let q2_off = n0;
    let q3_off = 2 * n0;

    // W4 = diag(I, Sigma^{-1}, Q1, I, I) with C11 = Q1 Lambda1 Q1^T
    let mut c11 = a_cur.view((q3_off, q3_off), (n1, n1)).into_owned();
    symmetrize(&mut c11);
    let (lambda1, q1) = sym_eig(&c11);
    let mut w4 = DMatrix::identity(n, n);
    for i in 0..n0 {
        w4[(q2_off + i, q2_off + i)] = 1.0 / fh.sigma[i];
    }
    for i in 0..n1 {
        for j in 0..n1 {
            w4[(q3_off + i, q3_off + j)] = q1[(i, j)];
        }
    }
    w = &w * &w4;

    // P5 interleaves the two n0 blocks into 2x2 coupling cells
    let mut p5: Vec<usize> = Vec::with_capacity(n);
    for t in 0..n0 {
        p5.push(t);
        p5.push(n0 + t);
    }
    p5.extend(2 * n0..n);
    let w = gather_columns(&w, &p5);

    Ok(CanonicalForm {
        w,
        n0,
        n1,
        n2,
        n3,
        lambda1,
        lambda2: fh.lambda2,
    })
}

fn gather_columns(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), perm.len());
    for (dst, &src) in perm.iter().enumerate() {
        out.set_column(dst, &m.column(src));
    }
    out
}

fn gather_symmetric(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(perm.len(), perm.len(), |i, j| m[(perm[i], perm[j])])
}

impl CanonicalForm {
    pub fn dim(&self) -> usize {
        2 * self.n0 + self.n1 + self.n2 + self.n3
    }

    pub fn has_coupling(&self) -> bool {
        self.n0 > 0
    }

    /// The canonical A-side block matrix.
    pub fn canonical_a(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for t in 0..self.n0 {
            m[(2 * t, 2 * t + 1)] = 1.0;
            m[(2 * t + 1, 2 * t)] = 1.0;
        }
        let off = 2 * self.n0;
        for i in 0..self.n1 {
            m[(off + i, off + i)] = self.lambda1[i];
        }
        let off = off + self.n1;
        for i in 0..self.n2 {
            m[(off + i, off + i)] = self.lambda2[i];
        }
        m
    }

    /// The canonical B-side block matrix.
    pub fn canonical_b(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for t in 0..self.n0 {
            m[(2 * t, 2 * t)] = 1.0;
        }
        let off = 2 * self.n0;
        for i in 0..self.n1 {
            m[(off + i, off + i)] = 1.0;
        }
        m
    }

    /// Relative Frobenius residuals of the two congruences.
    pub fn block_residuals(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> (f64, f64) {
        let ra = (self.w.transpose() * a * &self.w - self.canonical_a()).norm()
            / a.norm().max(f64::MIN_POSITIVE);
        let rb = (self.w.transpose() * b * &self.w - self.canonical_b()).norm()
            / b.norm().max(f64::MIN_POSITIVE);
        (ra, rb)
    }

    /// Finite-eigenvalue columns W1 (only meaningful when n0 = 0).
    pub fn w1(&self) -> DMatrix<f64> {
        self.w.columns(2 * self.n0, self.n1).into_owned()
    }

    pub fn w2(&self) -> DMatrix<f64> {
        self.w.columns(2 * self.n0 + self.n1, self.n2).into_owned()
    }

    /// Common-nullspace columns W3.
    pub fn w3(&self) -> DMatrix<f64> {
        self.w
            .columns(2 * self.n0 + self.n1 + self.n2, self.n3)
            .into_owned()
    }
}

/// Whether the reduced pencil is simultaneously diagonalizable (n0 = 0).
pub fn is_simultaneously_diagonalizable(cf: &CanonicalForm) -> bool {
    cf.n0 == 0
}

/// Replaces the W1 and W2 columns by their components orthogonal to
/// span(W3). A and B annihilate span(W3), so the congruence blocks are
/// unchanged; afterwards W3^T W1 = W3^T W2 = 0.
pub fn enforce_constraint(cf: &CanonicalForm) -> Result<CanonicalForm> {
    if cf.n0 > 0 {
        return Err(Error::CouplingPresent { n0: cf.n0 });
    }
    if cf.n3 == 0 || cf.n1 + cf.n2 == 0 {
        return Ok(cf.clone());
    }
    let w3 = cf.w3();
    let qr = w3.qr();
    let q3 = qr.q();
    let mut w = cf.w.clone();
    for j in 0..(cf.n1 + cf.n2) {
        let col = w.column(j).into_owned();
        let coeff = q3.transpose() * &col;
        w.set_column(j, &(col - &q3 * coeff));
    }
    Ok(CanonicalForm { w, ..cf.clone() })
}

/// Recovers eigenpairs of the pencil K - lambda*K_G from the canonical form
/// of its reversal (reduce with A = K_G, B = K).
///
/// Nonzero entries of Lambda1 map to finite eigenvalues lambda = 1/lambda^#
/// with the matching W1 column as eigenvector; zero entries form the
/// infinite-eigenvalue class and are only counted.
pub fn eigenpairs_from_canonical(
    cf_reversed: &CanonicalForm,
    tau_zero: f64,
) -> Result<PencilEigenpairs> {
    let cf = enforce_constraint(cf_reversed)?;
    let scale = cf
        .lambda1
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let cut = tau_zero * scale;
    let w1 = cf.w1();
    let mut finite = Vec::new();
    let mut infinite_count = 0;
    for i in 0..cf.n1 {
        let ls = cf.lambda1[i];
        if ls.abs() <= cut {
            infinite_count += 1;
        } else {
            let mut x = w1.column(i).into_owned();
            let norm = x.norm();
            if norm > 0.0 {
                x /= norm;
            }
            finite.push((1.0 / ls, x));
        }
    }
    Ok(PencilEigenpairs {
        finite,
        infinite_count,
        zero_count: cf.n2,
        common_null_dim: cf.n3,
    })
}

/// Block dimensions computed independently from SVD ranks (the dimension
/// formulas), used as an oracle for the constructive reduction.
pub fn independent_dimensions(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tau_rank: f64,
) -> Result<(usize, usize, usize, usize)> {
    let n = check_square_pair(a, b)?;
    let (_, sb, _) = svd(b);
    let rank_b = rank_from_singular_values(&sb, tau_rank);
    let dim_nb = n - rank_b;
    let nb = nullspace_basis(b, tau_rank);
    let mut on_null = nb.transpose() * a * &nb;
    symmetrize(&mut on_null);
    let n2 = if dim_nb == 0 {
        0
    } else {
        let (_, s, _) = svd(&on_null);
        let amax = svd(a).1.max().max(f64::MIN_POSITIVE);
        s.iter().filter(|&&v| v > tau_rank * amax).count()
    };
    let mut stacked = DMatrix::zeros(2 * n, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(a);
    stacked.view_mut((n, 0), (n, n)).copy_from(b);
    let (_, ss, _) = svd(&stacked);
    let n3 = n - rank_from_singular_values(&ss, tau_rank);
    if dim_nb < n2 + n3 {
        return Err(Error::InvalidParameter(
            "inconsistent rank decisions in dimension formulas".into(),
        ));
    }
    let n0 = dim_nb - n2 - n3;
    let n1 = rank_b - n0;
    Ok((n0, n1, n2, n3))
}
