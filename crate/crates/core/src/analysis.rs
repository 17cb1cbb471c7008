//! Support-recovery diagnostics: incoherence-style margin conditions on
//! the design covariance, selection-error metrics, and per-covariate
//! selection frequencies across replicated paths.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::groups::GroupSet;
use crate::linalg::{self, DenseMatrix};
use crate::norm::{self, NormOptions};
use crate::solver::PathResult;

/// Margin of one group outside the weak support: the norm of the
/// covariance-propagated dual block minus the group weight. Negative
/// means the group is repelled from the support.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupMargin {
    pub group: usize,
    pub margin: f64,
}

/// Outcome of the margin conditions at a target coefficient vector.
///
/// For every group g outside the weak support Ḡ the margin is
/// μ_g = ‖Σ_{gJ̄} Σ_{J̄J̄}⁻¹ α_{J̄}‖ − d_g, with α the canonical dual
/// point of the penalty at w*. All margins ≤ 0 is necessary for the
/// penalized estimator to recover the group support asymptotically;
/// all margins strictly below −strict_tol is the sufficient variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub margins: Vec<GroupMargin>,
    pub c1_holds: bool,
    pub c2_holds: bool,
    /// Covariates covered by the weak group support.
    pub j_bar: Vec<usize>,
    /// Weak group support (groups excluded from the margin checks).
    pub g_bar: Vec<usize>,
    /// Groups carrying mass in the computed decomposition.
    pub strong: Vec<usize>,
    /// Whether the full covariance is positive definite, not just its
    /// restriction to the covered covariates.
    pub sigma_pd_full: bool,
    /// Whether supp(w*) equals the covered covariate set, an assumption
    /// of the recovery guarantees that this checker only reports.
    pub support_matches_j_bar: bool,
    pub strict_tol: f64,
}

/// Σ = XᵀX/n for a design matrix.
pub fn covariance_from_design(x: &DenseMatrix) -> DenseMatrix {
    let (n, p) = (x.nrows(), x.ncols());
    let mut sigma = DenseMatrix::zeros(p, p);
    let n_f = n.max(1) as f64;
    for i in 0..p {
        for j in i..p {
            let v = x.col_dot(i, x.col(j)) / n_f;
            sigma.set(i, j, v);
            sigma.set(j, i, v);
        }
    }
    sigma
}

/// Evaluates the margin conditions for `w_star` under covariance
/// `sigma`.
///
/// The weak support and the canonical dual point are computed from the
/// penalty's own optimizer; the covariance restricted to the covered
/// covariates must be positive definite (no regularized inverse is
/// attempted).
///
/// # Errors
///
/// [`Error::SingularCovariance`] when Σ_{J̄J̄} is not positive definite,
/// [`Error::NormNotConverged`] from the penalty evaluation.
pub fn consistency_conditions(
    sigma: &DenseMatrix,
    w_star: &[f64],
    gs: &GroupSet,
    strict_tol: f64,
) -> Result<ConsistencyReport> {
    let p = gs.p();
    if sigma.nrows() != p || sigma.ncols() != p {
        return Err(Error::invalid(
            "sigma",
            format!("expected {p}x{p}, got {}x{}", sigma.nrows(), sigma.ncols()),
        ));
    }
    if w_star.len() != p {
        return Err(Error::invalid(
            "w_star",
            format!("expected length {p}, got {}", w_star.len()),
        ));
    }
    if !strict_tol.is_finite() || strict_tol < 0.0 {
        return Err(Error::invalid("strict_tol", "must be finite and >= 0"));
    }

    let res = norm::omega(w_star, gs, &NormOptions::default())?;
    let support = norm::group_support(&res, gs, norm::DEFAULT_TOL_V, norm::DEFAULT_TOL_ALPHA);
    let g_bar = support.weak.clone();
    let j_bar = support.support_weak.clone();

    let w_support: Vec<usize> = (0..p).filter(|&i| w_star[i] != 0.0).collect();
    let support_matches_j_bar = w_support == j_bar;

    let full_rows: Vec<Vec<f64>> = (0..p).map(|i| sigma.row(i)).collect();
    let sigma_pd_full = linalg::cholesky(&full_rows).is_some();

    let sub: Vec<Vec<f64>> = j_bar
        .iter()
        .map(|&i| j_bar.iter().map(|&j| sigma.get(i, j)).collect())
        .collect();
    let factor = linalg::cholesky(&sub).ok_or(Error::SingularCovariance)?;
    let alpha_j: Vec<f64> = j_bar.iter().map(|&i| res.alpha[i]).collect();
    let z = linalg::cholesky_solve(&factor, &alpha_j);

    let in_g_bar: BTreeSet<usize> = g_bar.iter().copied().collect();
    let mut margins = Vec::new();
    for g in 0..gs.m() {
        if in_g_bar.contains(&g) {
            continue;
        }
        let propagated: f64 = gs
            .group(g)
            .iter()
            .map(|&i| {
                let row_dot: f64 = j_bar
                    .iter()
                    .zip(&z)
                    .map(|(&j, &zj)| sigma.get(i, j) * zj)
                    .sum();
                row_dot * row_dot
            })
            .sum::<f64>()
            .sqrt();
        margins.push(GroupMargin {
            group: g,
            margin: propagated - gs.weight(g),
        });
    }
    let c1_holds = margins.iter().all(|m| m.margin <= 0.0);
    let c2_holds = margins.iter().all(|m| m.margin < -strict_tol);
    Ok(ConsistencyReport {
        margins,
        c1_holds,
        c2_holds,
        j_bar,
        g_bar,
        strong: support.strong,
        sigma_pd_full,
        support_matches_j_bar,
        strict_tol,
    })
}

/// Balanced selection error: the average of the miss rate on the true
/// support and the false-alarm rate off it. Empty denominators
/// contribute zero.
pub fn recovery_error(selected: &[usize], true_support: &[usize], p: usize) -> Result<f64> {
    for &i in selected.iter().chain(true_support) {
        if i >= p {
            return Err(Error::IndexOutOfRange { index: i + 1, p });
        }
    }
    let sel: BTreeSet<usize> = selected.iter().copied().collect();
    let truth: BTreeSet<usize> = true_support.iter().copied().collect();
    let missed = truth.difference(&sel).count();
    let spurious = sel.difference(&truth).count();
    let miss_rate = if truth.is_empty() {
        0.0
    } else {
        missed as f64 / truth.len() as f64
    };
    let off = p - truth.len();
    let false_alarm = if off == 0 {
        0.0
    } else {
        spurious as f64 / off as f64
    };
    Ok(0.5 * (miss_rate + false_alarm))
}

/// Fraction of replicates selecting each covariate at each grid point.
/// Returns a p × grid matrix as rows per covariate.
///
/// # Errors
///
/// [`Error::GridMismatch`] unless every path shares one λ grid.
pub fn selection_frequency(paths: &[PathResult], p: usize) -> Result<Vec<Vec<f64>>> {
    let first = paths
        .first()
        .ok_or_else(|| Error::invalid("paths", "at least one path required"))?;
    let grid = &first.grid;
    for (r, path) in paths.iter().enumerate() {
        if path.grid != *grid {
            return Err(Error::GridMismatch(format!(
                "path {} has a different grid than path 1",
                r + 1
            )));
        }
        if path.fits.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "path {} has {} fits for {} grid points",
                r + 1,
                path.fits.len(),
                grid.len()
            )));
        }
    }
    let mut freq = vec![vec![0.0; grid.len()]; p];
    for path in paths {
        for (k, fit) in path.fits.iter().enumerate() {
            if fit.w.len() != p {
                return Err(Error::GridMismatch(format!(
                    "fit has {} coefficients, expected {p}",
                    fit.w.len()
                )));
            }
            for (i, &wi) in fit.w.iter().enumerate() {
                if wi != 0.0 {
                    freq[i][k] += 1.0;
                }
            }
        }
    }
    let r = paths.len() as f64;
    for row in freq.iter_mut() {
        for v in row.iter_mut() {
            *v /= r;
        }
    }
    Ok(freq)
}
