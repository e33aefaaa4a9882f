//! One-sided Jacobi singular value decomposition.
//!
//! Chosen over a bidiagonalization approach for its accuracy on the
//! rank-deficient matrices this crate keeps feeding it: the rotations are
//! applied to actual columns, so U Sigma V^T reconstructs the input to
//! machine precision even when singular values vanish exactly.

use nalgebra::{DMatrix, DVector};

const MAX_SWEEPS: usize = 100;

/// Thin SVD a = U diag(s) V^T with k = min(m, n) columns, singular values in
/// nonincreasing order. U and V have orthonormal columns; columns paired
/// with zero singular values are completed orthonormally.
pub fn svd(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return (
            DMatrix::zeros(m, k),
            DVector::zeros(k),
            DMatrix::zeros(n, k),
        );
    }
    if m < n {
        let (u, s, v) = svd(&a.transpose());
        return (v, s, u);
    }

    let mut work = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let mut sweeps = 0;
    loop {
        let mut off = 0.0f64;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let col_p = work.column(p);
                let col_q = work.column(q);
                let alpha = col_p.norm_squared();
                let beta = col_q.norm_squared();
                let gamma = col_p.dot(&col_q);
                if alpha == 0.0 || beta == 0.0 || gamma == 0.0 {
                    continue;
                }
                let rel = gamma.abs() / (alpha * beta).sqrt();
                off = off.max(rel);
                if rel <= 1e-15 {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut work, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        sweeps += 1;
        if off <= 1e-15 || n == 1 {
            break;
        }
        assert!(sweeps < MAX_SWEEPS, "Jacobi SVD did not converge");
    }

    // singular values and left vectors from the rotated columns
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| work.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).expect("finite norm"));
    let s = DVector::from_iterator(n, order.iter().map(|&j| norms[j]));
    let mut u = DMatrix::zeros(m, n);
    let mut v_sorted = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        if norms[src] > 0.0 {
            u.set_column(dst, &(work.column(src) / norms[src]));
        }
        v_sorted.set_column(dst, &v.column(src));
    }
    complete_zero_columns(&mut u, &s);
    (u, s, v_sorted)
}

fn rotate_columns(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let a = m[(i, p)];
        let b = m[(i, q)];
        m[(i, p)] = c * a - s * b;
        m[(i, q)] = s * a + c * b;
    }
}

/// Fills the columns belonging to zero singular values with an orthonormal
/// completion of the nonzero ones (Gram-Schmidt over coordinate candidates).
fn complete_zero_columns(u: &mut DMatrix<f64>, s: &DVector<f64>) {
    let m = u.nrows();
    let k = u.ncols();
    let filled = s.iter().filter(|&&v| v > 0.0).count();
    if filled == k {
        return;
    }
    let mut have = filled;
    let mut candidate = 0usize;
    while have < k && candidate < m {
        let mut col = DVector::zeros(m);
        col[candidate] = 1.0;
        candidate += 1;
        for _ in 0..2 {
            for j in 0..have {
                let c = u.column(j).dot(&col);
                col -= u.column(j) * c;
            }
        }
        let nrm = col.norm();
        if nrm > 1e-8 {
            u.set_column(have, &(col / nrm));
            have += 1;
        }
    }
    debug_assert_eq!(have, k, "orthonormal completion exhausted candidates");
}
