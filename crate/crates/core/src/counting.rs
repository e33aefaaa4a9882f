//! Inertia-based counting of pencil eigenvalues in intervals, used to
//! validate the Lanczos output.
//!
//! For a nonzero alpha off the spectrum,
//!   n(alpha, 0) = nu_minus(K - alpha K_G) - nu_minus(Z_N^T K_G Z_N) for alpha < 0,
//!   n(0, alpha) = nu_minus(K - alpha K_G) - nu_plus(Z_N^T K_G Z_N)  for alpha > 0,
//! and nu_minus(K - alpha K_G) itself comes out of the factorizations the
//! matvec operators already perform: nu_minus(A_alpha) - dim(Z_c) for the
//! augmented matrix, or nu_minus(S11_alpha) for the reduced submatrix.
//! The two routes must agree as integers. General intervals compose the
//! half-interval counts; the formulas count finite nonzero eigenvalues only.

use std::fmt;

use crate::dense::{ldlt, symmetrize, Inertia};
use crate::error::{Error, Result};
use crate::lanczos::RitzPair;
use crate::transform::{build_operator, DensePencil, MatvecMethod, OperatorConfig};

/// Comparison of a count against the converged Ritz pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Match,
    /// The count exceeds the distinct converged eigenvalues found.
    Missing(usize),
    /// More distinct converged eigenvalues than the count.
    Surplus(usize),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Match => write!(f, "MATCH"),
            Verdict::Missing(k) => write!(f, "MISSING({k})"),
            Verdict::Surplus(k) => write!(f, "SURPLUS({k})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CountReport {
    pub a: f64,
    pub b: f64,
    pub count: usize,
    pub method: MatvecMethod,
    /// (alpha, nu_minus(K - alpha K_G)) values entering the formulas.
    pub inertias_used: Vec<(f64, usize)>,
    /// Inertia of Z_N^T K_G Z_N.
    pub small_inertia: Inertia,
    pub common_null_dim: usize,
}

/// Inertia of the projected block Z_N^T K_G Z_N. The block is nonsingular
/// for consistent bases; a zero eigenvalue signals that a Z_N column belongs
/// to the common nullspace.
pub fn small_inertia(pencil: &DensePencil, cfg: &OperatorConfig) -> Result<Inertia> {
    let m = pencil.zn.ncols();
    if m == 0 {
        return Ok(Inertia::default());
    }
    let mut block = pencil.zn.transpose() * &pencil.kg * &pencil.zn;
    symmetrize(&mut block);
    let factor = ldlt(&block, cfg.tau_pivot, cfg.tau_zero);
    let inertia = factor.inertia();
    if inertia.nzero > 0 {
        return Err(Error::SingularProjectedBlock);
    }
    Ok(inertia)
}

/// nu_minus(K - alpha K_G) obtained through the factorization byproduct of
/// the chosen matvec method.
pub fn nu_minus_shifted(
    pencil: &DensePencil,
    alpha: f64,
    method: MatvecMethod,
    cfg: &OperatorConfig,
) -> Result<usize> {
    let op = build_operator(pencil, alpha, method, cfg).map_err(|e| match e {
        Error::SingularShift { .. } => Error::AlphaOnSpectrum { alpha },
        other => other,
    })?;
    Ok(match method {
        MatvecMethod::Augmented => op.inertia_neg() - pencil.n3(),
        MatvecMethod::Reduced => op.inertia_neg(),
    })
}

/// n(alpha, 0) for alpha < 0, or n(0, alpha) for alpha > 0.
pub fn count_half_interval(
    pencil: &DensePencil,
    alpha: f64,
    method: MatvecMethod,
    cfg: &OperatorConfig,
) -> Result<CountReport> {
    if alpha == 0.0 {
        return Err(Error::ShiftIsZero);
    }
    let nu = nu_minus_shifted(pencil, alpha, method, cfg)?;
    let small = small_inertia(pencil, cfg)?;
    let correction = if alpha < 0.0 {
        small.nminus
    } else {
        small.nplus
    };
    let count = nu.checked_sub(correction).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "negative count at alpha = {alpha}: nu_minus {nu} < correction {correction}"
        ))
    })?;
    let (a, b) = if alpha < 0.0 {
        (alpha, 0.0)
    } else {
        (0.0, alpha)
    };
    Ok(CountReport {
        a,
        b,
        count,
        method,
        inertias_used: vec![(alpha, nu)],
        small_inertia: small,
        common_null_dim: pencil.n3(),
    })
}

/// Number of finite nonzero eigenvalues of the pencil in (a, b). Zero must
/// not be an endpoint and neither endpoint may sit on the spectrum.
pub fn count_interval(
    pencil: &DensePencil,
    a: f64,
    b: f64,
    method: MatvecMethod,
    cfg: &OperatorConfig,
) -> Result<CountReport> {
    if a >= b {
        return Err(Error::InvalidParameter(format!(
            "degenerate interval ({a}, {b})"
        )));
    }
    if a == 0.0 || b == 0.0 {
        return Err(Error::ShiftIsZero);
    }
    let small = small_inertia(pencil, cfg)?;
    let mut inertias_used = Vec::new();
    let count = if a < 0.0 && b > 0.0 {
        let left = count_half_interval(pencil, a, method, cfg)?;
        let right = count_half_interval(pencil, b, method, cfg)?;
        inertias_used.extend(left.inertias_used);
        inertias_used.extend(right.inertias_used);
        left.count + right.count
    } else if a > 0.0 {
        let outer = count_half_interval(pencil, b, method, cfg)?;
        let inner = count_half_interval(pencil, a, method, cfg)?;
        inertias_used.extend(inner.inertias_used.iter().copied());
        inertias_used.extend(outer.inertias_used.iter().copied());
        outer.count.checked_sub(inner.count).ok_or_else(|| {
            Error::InvalidParameter(format!("inconsistent counts on (0, {a}) and (0, {b})"))
        })?
    } else {
        let outer = count_half_interval(pencil, a, method, cfg)?;
        let inner = count_half_interval(pencil, b, method, cfg)?;
        inertias_used.extend(outer.inertias_used.iter().copied());
        inertias_used.extend(inner.inertias_used.iter().copied());
        outer.count.checked_sub(inner.count).ok_or_else(|| {
            Error::InvalidParameter(format!("inconsistent counts on ({a}, 0) and ({b}, 0)"))
        })?
    };
    Ok(CountReport {
        a,
        b,
        count,
        method,
        inertias_used,
        small_inertia: small,
        common_null_dim: pencil.n3(),
    })
}

/// Compares the count against the distinct converged eigenvalues inside the
/// interval. Ritz values closer than `tau_cluster` (default
/// 1e-8 * max(|a|, |b|)) are treated as duplicates of one eigenvalue.
pub fn validate(report: &CountReport, pairs: &[RitzPair], tau_cluster: Option<f64>) -> Verdict {
    let tau = tau_cluster.unwrap_or(1e-8 * report.a.abs().max(report.b.abs()));
    let mut inside: Vec<f64> = pairs
        .iter()
        .filter(|p| p.converged && p.lambda > report.a && p.lambda < report.b)
        .map(|p| p.lambda)
        .collect();
    inside.sort_by(|x, y| x.partial_cmp(y).expect("finite lambda"));
    let mut found = 0usize;
    let mut last: Option<f64> = None;
    for lambda in inside {
        if last.map_or(true, |prev| lambda - prev > tau) {
            found += 1;
        }
        last = Some(lambda);
    }
    match found.cmp(&report.count) {
        std::cmp::Ordering::Equal => Verdict::Match,
        std::cmp::Ordering::Less => Verdict::Missing(report.count - found),
        std::cmp::Ordering::Greater => Verdict::Surplus(found - report.count),
    }
}

/// Dense eigenvalues of the bordered matrix built with the raw (not
/// orthonormalized) constraint basis; test support for the structural
/// identity eig(A_alpha) = eig-nonzero(K - alpha K_G) union (+-singular
/// values of Z_C).
pub fn augmented_eigenvalues(pencil: &DensePencil, alpha: f64) -> Result<nalgebra::DVector<f64>> {
    let a = crate::transform::augmented_matrix(&pencil.k, &pencil.kg, alpha, &pencil.zc);
    let (vals, _) = crate::dense::sym_eig(&a);
    Ok(vals)
}
