//! Symmetric tridiagonal eigensolver: implicit-shift QL iteration with
//! accumulated rotations (EISPACK tql2 lineage).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 64;

/// Full eigendecomposition of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta`.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvector columns.
pub fn sym_tridiag_eig(alpha: &[f64], beta: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = alpha.len();
    if n > 0 && beta.len() + 1 != n {
        return Err(Error::DimensionMismatch {
            expected: n.saturating_sub(1),
            got: beta.len(),
        });
    }
    if n == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }

    let mut d: Vec<f64> = alpha.to_vec();
    let mut e: Vec<f64> = beta.to_vec();
    e.push(0.0);
    let mut z = DMatrix::<f64>::identity(n, n);
    ql_implicit(&mut d, &mut e, &mut z)?;

    // ascending order, vectors permuted alongside
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("non-finite eigenvalue"));
    let values = DVector::from_iterator(n, order.iter().map(|&i| d[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &z.column(src));
    }
    Ok((values, vectors))
}

/// Implicit-shift QL sweeps on (d, e) with the rotations accumulated into the
/// columns of `z`. `e[i]` couples indices i and i+1; `e[n-1]` is a sentinel.
/// On return `d` holds the (unsorted) eigenvalues and `z * diag(d) * z^T`
/// reconstructs `z_in * T * z_in^T`.
pub(crate) fn ql_implicit(d: &mut [f64], e: &mut [f64], z: &mut DMatrix<f64>) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return Err(Error::NoConvergence(format!(
                    "tridiagonal QL exceeded {MAX_SWEEPS} sweeps at index {l}"
                )));
            }
            // implicit Wilkinson-style shift
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0f64;
            let mut c = 1.0f64;
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // rotation annihilated early; deflate and retry
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[(k, i + 1)];
                    z[(k, i + 1)] = s * z[(k, i)] + c * f;
                    z[(k, i)] = c * z[(k, i)] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
