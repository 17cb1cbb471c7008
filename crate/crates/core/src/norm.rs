//! The overlap norm itself: evaluation, dual norm, latent
//! decompositions, duality certificates, group supports, and the
//! decomposition-uniqueness test.
//!
//! Ω(w) is the smallest weighted sum Σ_g d_g‖v^g‖ over all ways of
//! writing w = Σ_g v^g with each v^g supported on its group. It is
//! evaluated through the equivalent smooth program
//!
//! ```text
//!   Ω(w) = ½ min_{λ ≥ 0}  Σ_i w_i²/ζ_i + Σ_g d_g² λ_g,   ζ_i = Σ_{g∋i} λ_g,
//! ```
//!
//! minimized by cyclic coordinate descent; each coordinate has a
//! monotone derivative and is solved by safeguarded Newton. Sweeps are
//! interleaved with a damped Newton step on the joint stationarity
//! system of the currently positive λ, which removes the slow tail the
//! coordinate scheme alone exhibits when groups overlap heavily. A
//! primal decomposition and a dual point come out of the same λ, so
//! every returned value carries a computable duality gap.

use crate::error::{Error, Result};
use crate::groups::{GroupSet, IncidenceMatrix};
use crate::linalg;

#[derive(Debug, Clone)]
pub struct NormOptions {
    /// Stop once the duality gap falls at or below this.
    pub tol: f64,
    /// Maximum number of full coordinate sweeps.
    pub max_iter: usize,
    /// Optional starting point for λ (length m, nonnegative). The default
    /// start is λ_g = ‖w_g‖/d_g, the exact solution for disjoint groups.
    pub init: Option<Vec<f64>>,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            tol: 1e-9,
            max_iter: 50_000,
            init: None,
        }
    }
}

/// Outcome of a norm evaluation.
///
/// `decomposition[g]` holds the latent block v^g compactly, aligned with
/// the sorted members of group g, so entries outside the group are zero
/// by construction. `value` is the primal objective Σ_g d_g‖v^g‖ and
/// `gap = value − αᵀw` with the feasible dual point `alpha`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct NormResult {
    pub value: f64,
    pub lambda: Vec<f64>,
    pub decomposition: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
    pub w: Vec<f64>,
}

impl NormResult {
    /// ‖v^g‖ for group `gid`.
    pub fn block_norm(&self, gid: usize) -> f64 {
        linalg::norm2(&self.decomposition[gid])
    }

    /// Expands the compact block for `gid` to a full length-p vector.
    pub fn block_full(&self, gid: usize, gs: &GroupSet) -> Vec<f64> {
        let mut out = vec![0.0; self.w.len()];
        for (&i, &v) in gs.group(gid).iter().zip(&self.decomposition[gid]) {
            out[i] = v;
        }
        out
    }

    pub fn converged(&self, tol: f64) -> bool {
        self.gap <= tol
    }
}

/// Relative block-mass threshold below which a group is not counted in
/// the strong support.
pub const DEFAULT_TOL_V: f64 = 1e-6;

/// Relative dual-saturation slack for membership in the weak support.
pub const DEFAULT_TOL_ALPHA: f64 = 1e-4;

/// Estimated group supports of a vector under the norm.
///
/// `strong` collects groups carrying mass in the computed optimal
/// decomposition; `weak` collects groups whose dual norm is saturated.
/// The strong set is always included in the weak set. Note the weak set
/// is a thresholded estimate read off one canonical dual point; it
/// cannot distinguish saturation that holds for every dual solution
/// from saturation that merely holds for this one.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GroupSupport {
    pub strong: Vec<usize>,
    pub weak: Vec<usize>,
    pub support_strong: Vec<usize>,
    pub support_weak: Vec<usize>,
}

/// Dual norm Ω*(α) = max_g ‖α_g‖ / d_g.
pub fn omega_dual(alpha: &[f64], gs: &GroupSet) -> f64 {
    assert_eq!(alpha.len(), gs.p(), "alpha length must equal p");
    (0..gs.m())
        .map(|g| gs.group_norm(g, alpha) / gs.weight(g))
        .fold(0.0, f64::max)
}

/// Evaluates Ω(w) by cyclic coordinate minimization over λ.
///
/// Groups wholly outside the support of `w` take λ_g = 0 immediately
/// (the 0/0 = 0 convention makes them costless). Each visited coordinate
/// minimizes a strictly convex 1-D function whose derivative
/// d_g² − Σ_{i∈g} w_i²/(λ_g + s_i)² is increasing, with s_i the coverage
/// contributed by the other groups; the minimizer is 0 exactly when that
/// derivative is already nonnegative at 0⁺.
///
/// # Errors
///
/// [`Error::NormNotConverged`] with the best iterate seen when the gap
/// tolerance is not met within `max_iter` sweeps.
pub fn omega(w: &[f64], gs: &GroupSet, opts: &NormOptions) -> Result<NormResult> {
    if w.len() != gs.p() {
        return Err(Error::invalid(
            "w",
            format!("expected length {}, got {}", gs.p(), w.len()),
        ));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("w", "entries must be finite"));
    }
    let m = gs.m();
    if w.iter().all(|&v| v == 0.0) {
        return Ok(NormResult {
            value: 0.0,
            lambda: vec![0.0; m],
            decomposition: (0..m).map(|g| vec![0.0; gs.group(g).len()]).collect(),
            alpha: vec![0.0; w.len()],
            gap: 0.0,
            iterations: 0,
        w: w.to_vec(),
        });
    }

    let block_norms: Vec<f64> = (0..m).map(|g| gs.group_norm(g, w)).collect();
    let mut lambda: Vec<f64> = match &opts.init {
        Some(l0) => {
            if l0.len() != m {
                return Err(Error::invalid(
                    "init",
                    format!("expected length {m}, got {}", l0.len()),
                ));
            }
            if l0.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid("init", "entries must be finite and >= 0"));
            }
            l0.clone()
        }
        None => (0..m).map(|g| block_norms[g] / gs.weight(g)).collect(),
    };
    // λ for groups with no mass is optimal at zero regardless of the rest.
    for g in 0..m {
        if block_norms[g] == 0.0 {
            lambda[g] = 0.0;
        }
    }

    let support: Vec<usize> = (0..gs.p()).filter(|&i| w[i] != 0.0).collect();
    let mut zeta = vec![0.0; gs.p()];
    let mut best: Option<NormResult> = None;
    for sweep in 1..=opts.max_iter {
        // Fresh accumulation every sweep keeps ζ free of update drift.
        for z in zeta.iter_mut() {
            *z = 0.0;
        }
        for g in 0..m {
            if lambda[g] > 0.0 {
                for &i in gs.group(g) {
                    zeta[i] += lambda[g];
                }
            }
        }
        for g in 0..m {
            if block_norms[g] == 0.0 {
                continue;
            }
            let members = gs.group(g);
            let old = lambda[g];
            // Complementary coverage and squared weights for the 1-D solve.
            let items: Vec<(f64, f64)> = members
                .iter()
                .filter(|&&i| w[i] != 0.0)
                .map(|&i| (w[i] * w[i], (zeta[i] - old).max(0.0)))
                .collect();
            let d = gs.weight(g);
            let new = minimize_coordinate(&items, d * d, block_norms[g] / d, old);
            if new != old {
                for &i in members {
                    zeta[i] += new - old;
                }
                lambda[g] = new;
            }
        }

        if sweep >= 3 {
            newton_refine(w, &support, gs, &mut lambda, &mut zeta);
        }

        let (result, gap_ok) = certify(w, gs, &lambda, &zeta, sweep, opts.tol);
        let replace = match &best {
            Some(b) => result.gap < b.gap,
            None => true,
        };
        if replace {
            best = Some(result);
        }
        if gap_ok {
            return Ok(best.unwrap());
        }
    }
    Err(Error::NormNotConverged(Box::new(best.unwrap())))
}

/// Attempts one damped Newton step on the active-set stationarity system.
///
/// Heavy overlap leaves coordinate descent creeping along near-flat
/// directions where mass shuffles between groups with almost no change
/// in the objective. On the groups with positive λ the optimality
/// conditions form the smooth system F_g = d_g² − Σ_{i∈g} w_i²/ζ_i² = 0
/// with symmetric positive semidefinite Jacobian
/// J_{gh} = 2 Σ_{i∈g∩h} w_i²/ζ_i³, so a ridge-stabilized Newton step
/// with backtracking cuts straight across those flats. The step is kept
/// only when it strictly lowers the variational objective, keeping the
/// overall iteration monotone; multipliers pushed negative are clipped,
/// which lets the step retire groups from the active set.
fn newton_refine(
    w: &[f64],
    support: &[usize],
    gs: &GroupSet,
    lambda: &mut [f64],
    zeta: &mut [f64],
) -> bool {
    let lam_max = lambda.iter().fold(0.0f64, |m, &l| m.max(l));
    if lam_max <= 0.0 {
        return false;
    }
    // Multipliers at roundoff scale would only poison the Jacobian; they
    // stay where they are and keep being handled by the sweeps.
    let floor = 1e-10 * lam_max;
    let active: Vec<usize> = (0..gs.m()).filter(|&g| lambda[g] > floor).collect();
    let k = active.len();
    if k == 0 || k > 512 {
        return false;
    }
    let objective = |zt: &[f64], lam: &[f64]| -> f64 {
        let mut s = 0.0;
        for &i in support {
            s += w[i] * w[i] / zt[i];
        }
        for (pos, &g) in active.iter().enumerate() {
            let d = gs.weight(g);
            s += d * d * lam[pos];
        }
        0.5 * s
    };
    let lam_cur: Vec<f64> = active.iter().map(|&g| lambda[g]).collect();
    let f_cur = objective(zeta, &lam_cur);

    // Coverage owed to the multipliers below the floor, kept fixed here.
    let mut zeta_rest = vec![0.0; w.len()];
    for (g, &lg) in lambda.iter().enumerate() {
        if lg > 0.0 && lg <= floor {
            for &i in gs.group(g) {
                zeta_rest[i] += lg;
            }
        }
    }

    let mut cover: Vec<Vec<usize>> = vec![Vec::new(); w.len()];
    for (pos, &g) in active.iter().enumerate() {
        for &i in gs.group(g) {
            if w[i] != 0.0 {
                cover[i].push(pos);
            }
        }
    }
    let mut rhs = vec![0.0; k];
    for (pos, &g) in active.iter().enumerate() {
        let d = gs.weight(g);
        let mut s = d * d;
        for &i in gs.group(g) {
            if w[i] != 0.0 {
                s -= w[i] * w[i] / (zeta[i] * zeta[i]);
            }
        }
        rhs[pos] = -s;
    }
    let mut jac = vec![vec![0.0; k]; k];
    for &i in support {
        let c = 2.0 * w[i] * w[i] / (zeta[i] * zeta[i] * zeta[i]);
        let cov = &cover[i];
        for (x, &a) in cov.iter().enumerate() {
            jac[a][a] += c;
            for &b in &cov[x + 1..] {
                jac[a][b] += c;
                jac[b][a] += c;
            }
        }
    }
    let diag_max = (0..k).fold(0.0f64, |m, a| m.max(jac[a][a]));
    if diag_max <= 0.0 || !diag_max.is_finite() {
        return false;
    }
    // Levenberg-style damping: the Jacobian is singular along
    // coverage-preserving directions, so the ridge must shrink with the
    // residual for the step to stay bounded away from optimality yet
    // converge superlinearly near it.
    let res_norm = linalg::norm2(&rhs);
    let ridge = (1e-12 * diag_max).max(res_norm / (linalg::norm2(&lam_cur) + 1e-30));
    for (a, row) in jac.iter_mut().enumerate() {
        row[a] += ridge;
    }
    let step = match linalg::solve_linear(jac, rhs, 1e-14) {
        Some(s) => s,
        None => return false,
    };

    let mut trial = vec![0.0; k];
    let mut zeta_trial = vec![0.0; w.len()];
    let mut s = 1.0;
    for _ in 0..30 {
        for pos in 0..k {
            trial[pos] = (lam_cur[pos] + s * step[pos]).max(0.0);
        }
        zeta_trial.copy_from_slice(&zeta_rest);
        for (pos, &g) in active.iter().enumerate() {
            if trial[pos] > 0.0 {
                for &i in gs.group(g) {
                    zeta_trial[i] += trial[pos];
                }
            }
        }
        if support.iter().all(|&i| zeta_trial[i] > 0.0) {
            let f_trial = objective(&zeta_trial, &trial);
            if f_trial < f_cur {
                for (pos, &g) in active.iter().enumerate() {
                    lambda[g] = trial[pos];
                }
                zeta.copy_from_slice(&zeta_trial);
                return true;
            }
        }
        s *= 0.5;
    }
    false
}

/// Builds the primal/dual pair certified by the current λ and reports
/// whether the duality gap meets `tol`.
fn certify(
    w: &[f64],
    gs: &GroupSet,
    lambda: &[f64],
    zeta: &[f64],
    iterations: usize,
    tol: f64,
) -> (NormResult, bool) {
    let m = gs.m();
    let mut decomposition = Vec::with_capacity(m);
    let mut primal = 0.0;
    for g in 0..m {
        let members = gs.group(g);
        let block: Vec<f64> = if lambda[g] == 0.0 {
            vec![0.0; members.len()]
        } else {
            members
                .iter()
                .map(|&i| {
                    if w[i] == 0.0 {
                        0.0
                    } else {
                        lambda[g] / zeta[i] * w[i]
                    }
                })
                .collect()
        };
        primal += gs.weight(g) * linalg::norm2(&block);
        decomposition.push(block);
    }
    let mut alpha: Vec<f64> = w
        .iter()
        .zip(zeta)
        .map(|(&wi, &zi)| if wi == 0.0 || zi == 0.0 { 0.0 } else { wi / zi })
        .collect();
    let dual_norm = omega_dual(&alpha, gs);
    if dual_norm > 1.0 {
        for a in alpha.iter_mut() {
            *a /= dual_norm;
        }
    }
    let dual_value = linalg::dot(&alpha, w);
    let gap = (primal - dual_value).max(0.0);
    let result = NormResult {
        value: primal,
        lambda: lambda.to_vec(),
        decomposition,
        alpha,
        gap,
        iterations,
        w: w.to_vec(),
    };
    let ok = gap <= tol;
    (result, ok)
}

/// Minimizes d²·λ + Σ w_i²/(λ + s_i) over λ ≥ 0 via its derivative.
///
/// The derivative f'(λ) = d² − Σ w_i²/(λ+s_i)² is increasing and concave,
/// and f'(‖w_g‖/d) ≥ 0, so the root (when one exists) lies in
/// [0, ‖w_g‖/d]. Newton steps are safeguarded by the shrinking bracket.
fn minimize_coordinate(items: &[(f64, f64)], d2: f64, hi_cap: f64, warm: f64) -> f64 {
    if items.is_empty() {
        return 0.0;
    }
    let deriv = |x: f64| -> f64 {
        let mut s = d2;
        for &(w2, si) in items {
            let t = x + si;
            if t <= 0.0 {
                return f64::NEG_INFINITY;
            }
            s -= w2 / (t * t);
        }
        s
    };
    if deriv(0.0) >= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0f64;
    let mut hi = hi_cap.max(f64::MIN_POSITIVE);
    // Guard against rounding at the cap itself.
    while deriv(hi) < 0.0 {
        hi *= 2.0;
    }
    let tol_d = 1e-12 * d2.max(1.0);
    let mut x = if warm > lo && warm < hi { warm } else { 0.5 * hi };
    for _ in 0..100 {
        let fd = deriv(x);
        if fd.abs() <= tol_d {
            return x;
        }
        if fd < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut fdd = 0.0;
        for &(w2, si) in items {
            let t = x + si;
            fdd += 2.0 * w2 / (t * t * t);
        }
        let next = x - fd / fdd;
        x = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.max(1.0) {
            return x;
        }
    }
    x
}

/// Small fixed topologies with known closed forms, used as oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Groups {1,2} and {2,3} over p = 3.
    TwoOverlapping,
    /// All three pairs over p = 3.
    Cycle3,
    /// The 4-cycle 1-2, 1-3, 2-4, 3-4 over p = 4.
    Cycle4,
}

impl Topology {
    pub fn p(self) -> usize {
        match self {
            Topology::TwoOverlapping | Topology::Cycle3 => 3,
            Topology::Cycle4 => 4,
        }
    }

    /// The unit-weight group set realizing this topology.
    pub fn group_set(self) -> GroupSet {
        let groups = match self {
            Topology::TwoOverlapping => vec![vec![0, 1], vec![1, 2]],
            Topology::Cycle3 => vec![vec![0, 1], vec![0, 2], vec![1, 2]],
            Topology::Cycle4 => vec![vec![0, 1], vec![0, 2], vec![1, 3], vec![2, 3]],
        };
        let weights = vec![1.0; groups.len()];
        crate::groups::build_group_set(self.p(), groups, weights)
            .expect("fixed topologies are valid")
    }
}

/// Exact norm value for the fixed unit-weight topologies.
///
/// Derivations: with groups {1,2},{2,3} the norm is ‖(w₂, |w₁|+|w₃|)‖.
/// On the 3-cycle it is ‖w‖₁/√2 on the balanced region where no single
/// |w_i| exceeds the sum of the others, and otherwise the best of the
/// three "one coordinate vs the rest" splits. On the 4-cycle it is
/// ‖(|w₁|+|w₄|, |w₂|+|w₃|)‖, pairing the two diagonals.
pub fn omega_oracle(w: &[f64], topology: Topology) -> Result<f64> {
    if w.len() != topology.p() {
        return Err(Error::TopologyMismatch(format!(
            "expected p = {}, got length {}",
            topology.p(),
            w.len()
        )));
    }
    let a: Vec<f64> = w.iter().map(|v| v.abs()).collect();
    Ok(match topology {
        Topology::TwoOverlapping => (a[0] + a[2]).hypot(a[1]),
        Topology::Cycle3 => {
            let total: f64 = a.iter().sum();
            let balanced = a.iter().all(|&ai| ai <= total - ai);
            if balanced {
                total / 2.0f64.sqrt()
            } else {
                (0..3)
                    .map(|i| a[i].hypot(total - a[i]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
        Topology::Cycle4 => (a[0] + a[3]).hypot(a[1] + a[2]),
    })
}

/// Splits `w` into per-group blocks proportionally to coverage:
/// v^g_i = (λ_g / ζ_i)·w_i on the members of g. Blocks are returned
/// compactly, aligned with each group's sorted members.
///
/// # Errors
///
/// [`Error::UncoveredMass`] when some w_i ≠ 0 has ζ_i = 0, in which case
/// no decomposition with this λ reproduces w.
pub fn decomposition_from_lambda(
    w: &[f64],
    lambda: &[f64],
    gs: &GroupSet,
) -> Result<Vec<Vec<f64>>> {
    if w.len() != gs.p() {
        return Err(Error::invalid(
            "w",
            format!("expected length {}, got {}", gs.p(), w.len()),
        ));
    }
    if lambda.len() != gs.m() {
        return Err(Error::invalid(
            "lambda",
            format!("expected length {}, got {}", gs.m(), lambda.len()),
        ));
    }
    let mut zeta = vec![0.0; gs.p()];
    for (g, &lg) in lambda.iter().enumerate() {
        for &i in gs.group(g) {
            zeta[i] += lg;
        }
    }
    for (i, (&wi, &zi)) in w.iter().zip(&zeta).enumerate() {
        if wi != 0.0 && zi == 0.0 {
            return Err(Error::UncoveredMass(i + 1));
        }
    }
    Ok((0..gs.m())
        .map(|g| {
            gs.group(g)
                .iter()
                .map(|&i| {
                    if w[i] == 0.0 || lambda[g] == 0.0 {
                        0.0
                    } else {
                        lambda[g] / zeta[i] * w[i]
                    }
                })
                .collect()
        })
        .collect())
}

/// Reads the strong and weak group supports off a converged evaluation.
///
/// Strong membership asks for block mass above `tol_v·‖w‖`; weak
/// membership asks the dual block norm to reach d_g up to the relative
/// slack `tol_alpha`. Any strong group is forced into the weak set, so
/// the containment invariant holds even at thresholding boundaries.
pub fn group_support(
    res: &NormResult,
    gs: &GroupSet,
    tol_v: f64,
    tol_alpha: f64,
) -> GroupSupport {
    let w_norm = linalg::norm2(&res.w);
    let mut strong = Vec::new();
    let mut weak = Vec::new();
    for g in 0..gs.m() {
        let in_strong = res.block_norm(g) > tol_v * w_norm;
        if in_strong {
            strong.push(g);
        }
        if in_strong || gs.group_norm(g, &res.alpha) >= gs.weight(g) * (1.0 - tol_alpha) {
            weak.push(g);
        }
    }
    let union = |ids: &[usize]| -> Vec<usize> {
        let mut mask = vec![false; gs.p()];
        for &g in ids {
            for &i in gs.group(g) {
                mask[i] = true;
            }
        }
        mask.iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    };
    let support_strong = union(&strong);
    let support_weak = union(&weak);
    GroupSupport {
        strong,
        weak,
        support_strong,
        support_weak,
    }
}

/// Tests whether the optimal decomposition is unique.
///
/// Uniqueness holds exactly when the incidence sub-matrix over
/// (support covariates) × (strong groups) has a trivial kernel as a map
/// on the group multipliers, i.e. its rank equals the number of strong
/// groups. A kernel direction perturbs the multipliers without changing
/// any per-covariate total, producing a family of optimal
/// decompositions; conversely a trivial kernel makes the reduced
/// objective strictly convex.
pub fn is_decomposition_unique(
    w_support: &[usize],
    strong: &[usize],
    gs: &GroupSet,
) -> bool {
    if w_support.is_empty() || strong.is_empty() {
        return true;
    }
    let inc = IncidenceMatrix::from_group_set(gs);
    let rows = inc.sub_rows(w_support, strong);
    linalg::row_rank(rows, 1e-10) == strong.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::build_group_set;

    fn almost(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a}");
    }

    #[test]
    fn dual_norm_takes_group_maximum() {
        let gs = Topology::TwoOverlapping.group_set();
        almost(omega_dual(&[3.0, 4.0, 0.0], &gs), 5.0, 1e-15);
        almost(omega_dual(&[0.0, 0.0, 0.0], &gs), 0.0, 0.0);
        let cycle = Topology::Cycle3.group_set();
        almost(omega_dual(&[1.0, 1.0, 1.0], &cycle), 2.0f64.sqrt(), 1e-15);
    }

    #[test]
    fn norm_matches_closed_form_on_two_overlapping() {
        let gs = Topology::TwoOverlapping.group_set();
        let res = omega(&[1.0, 0.0, 1.0], &gs, &NormOptions::default()).unwrap();
        almost(res.value, 2.0, 1e-9);
        assert!(res.gap <= 1e-9);
    }

    #[test]
    fn norm_matches_closed_form_on_cycles() {
        let res3 = omega(
            &[1.0, 1.0, 1.0],
            &Topology::Cycle3.group_set(),
            &NormOptions::default(),
        )
        .unwrap();
        almost(res3.value, 3.0 / 2.0f64.sqrt(), 1e-8);
        let res4 = omega(
            &[1.0, 2.0, 3.0, 4.0],
            &Topology::Cycle4.group_set(),
            &NormOptions::default(),
        )
        .unwrap();
        almost(res4.value, 50.0f64.sqrt(), 1e-8);
    }

    #[test]
    fn oracle_branch_values() {
        // (2,1,1) sits on the balanced boundary; both branches give 2√2.
        almost(
            omega_oracle(&[2.0, 1.0, 1.0], Topology::Cycle3).unwrap(),
            2.0 * 2.0f64.sqrt(),
            1e-12,
        );
        almost(
            omega_oracle(&[3.0, 1.0, 1.0], Topology::Cycle3).unwrap(),
            13.0f64.sqrt(),
            1e-12,
        );
        almost(
            omega_oracle(&[0.0, 5.0, 0.0], Topology::TwoOverlapping).unwrap(),
            5.0,
            0.0,
        );
        assert!(matches!(
            omega_oracle(&[1.0, 1.0], Topology::Cycle3),
            Err(Error::TopologyMismatch(_))
        ));
    }

    #[test]
    fn zero_vector_evaluates_immediately() {
        let gs = Topology::Cycle3.group_set();
        let res = omega(&[0.0; 3], &gs, &NormOptions::default()).unwrap();
        assert_eq!(res.value, 0.0);
        assert_eq!(res.gap, 0.0);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn decomposition_blocks_follow_coverage_ratios() {
        let gs = Topology::TwoOverlapping.group_set();
        let v = decomposition_from_lambda(&[1.0, 2.0, 1.0], &[1.0, 1.0], &gs).unwrap();
        assert_eq!(v[0], vec![1.0, 1.0]);
        assert_eq!(v[1], vec![1.0, 1.0]);
        let v = decomposition_from_lambda(&[1.0, 1.0, 0.0], &[1.0, 0.0], &gs).unwrap();
        assert_eq!(v[0], vec![1.0, 1.0]);
        assert_eq!(v[1], vec![0.0, 0.0]);
        assert!(matches!(
            decomposition_from_lambda(&[1.0, 0.0, 0.0], &[0.0, 0.0], &gs),
            Err(Error::UncoveredMass(1))
        ));
    }

    #[test]
    fn decomposition_sums_back_to_w() {
        let gs = Topology::Cycle4.group_set();
        let w = [1.0, 2.0, 3.0, 4.0];
        let res = omega(&w, &gs, &NormOptions::default()).unwrap();
        let mut total = vec![0.0; 4];
        for g in 0..gs.m() {
            for (&i, &v) in gs.group(g).iter().zip(&res.decomposition[g]) {
                total[i] += v;
            }
        }
        for (t, expect) in total.iter().zip(&w) {
            almost(*t, *expect, 1e-9);
        }
    }

    #[test]
    fn supports_on_the_balanced_interior() {
        let gs = Topology::Cycle3.group_set();
        let res = omega(&[1.0, 1.0, 1.0], &gs, &NormOptions::default()).unwrap();
        let sup = group_support(&res, &gs, 1e-6, 1e-4);
        assert_eq!(sup.strong, vec![0, 1, 2]);
        assert_eq!(sup.weak, vec![0, 1, 2]);
        assert_eq!(sup.support_strong, vec![0, 1, 2]);
    }

    #[test]
    fn supports_split_on_the_balanced_boundary() {
        let gs = Topology::Cycle3.group_set();
        let res = omega(&[2.0, 1.0, 1.0], &gs, &NormOptions::default()).unwrap();
        let sup = group_support(&res, &gs, 1e-6, 1e-4);
        // Groups in canonical order: {0,1}, {0,2}, {1,2}. Mass flows
        // through the two groups containing the heavy coordinate, but the
        // dual saturates all three.
        assert_eq!(sup.strong, vec![0, 1]);
        assert_eq!(sup.weak, vec![0, 1, 2]);
        assert_eq!(sup.support_strong, vec![0, 1, 2]);
        assert_eq!(sup.support_weak, vec![0, 1, 2]);
    }

    #[test]
    fn supports_of_zero_vector_are_empty() {
        let gs = Topology::Cycle3.group_set();
        let res = omega(&[0.0; 3], &gs, &NormOptions::default()).unwrap();
        let sup = group_support(&res, &gs, 1e-6, 1e-4);
        assert!(sup.strong.is_empty());
        assert!(sup.weak.is_empty());
    }

    #[test]
    fn uniqueness_rank_criterion_cases() {
        let cycle4 = Topology::Cycle4.group_set();
        assert!(!is_decomposition_unique(
            &[0, 1, 2, 3],
            &[0, 1, 2, 3],
            &cycle4
        ));
        let partition =
            build_group_set(4, vec![vec![0, 1], vec![2, 3]], vec![1.0, 1.0]).unwrap();
        assert!(is_decomposition_unique(&[0, 1, 2, 3], &[0, 1], &partition));
        // Both groups active with mass on both private covariates: the
        // shared covariate's split is forced, so the decomposition is
        // unique (the closed form for this pair says the same).
        let two = Topology::TwoOverlapping.group_set();
        assert!(is_decomposition_unique(&[0, 1, 2], &[0, 1], &two));
        assert!(is_decomposition_unique(&[], &[], &two));
    }

    #[test]
    fn invariants_hold_on_every_converged_result() {
        let gs = Topology::Cycle4.group_set();
        let w = [0.5, -1.5, 2.5, 0.25];
        let res = omega(&w, &gs, &NormOptions::default()).unwrap();
        assert!(omega_dual(&res.alpha, &gs) <= 1.0 + 1e-10);
        almost(res.value - linalg::dot(&res.alpha, &res.w), res.gap, 1e-15);
        let primal: f64 = (0..gs.m())
            .map(|g| gs.weight(g) * res.block_norm(g))
            .sum();
        assert!(res.value <= primal + 1e-15 && primal <= res.value + res.gap + 1e-15);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        /// Random covering group set over p covariates, plus a weight range.
        fn arb_group_set() -> impl Strategy<Value = GroupSet> {
            (2usize..=8)
                .prop_flat_map(|p| {
                    let group = proptest::collection::vec(0usize..p, 1..=p);
                    (
                        Just(p),
                        proptest::collection::vec(group, 1..=6),
                        proptest::collection::vec(0.25f64..4.0, 7),
                    )
                })
                .prop_map(|(p, mut raw, weights)| {
                    // Guarantee coverage with one extra group over everything.
                    raw.push((0..p).collect());
                    let mut uniq: Vec<Vec<usize>> = Vec::new();
                    for mut g in raw {
                        g.sort_unstable();
                        g.dedup();
                        if !uniq.contains(&g) {
                            uniq.push(g);
                        }
                    }
                    let ws: Vec<f64> = uniq
                        .iter()
                        .enumerate()
                        .map(|(i, _)| weights[i % weights.len()])
                        .collect();
                    build_group_set(p, uniq, ws).unwrap()
                })
        }

        fn arb_vector(p: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-2.0f64..2.0, p)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn positive_homogeneity(gs in arb_group_set(), c in -4.0f64..4.0) {
                let w: Vec<f64> = (0..gs.p()).map(|i| (i as f64 * 0.7).sin() + 0.1).collect();
                let base = omega(&w, &gs, &NormOptions::default()).unwrap().value;
                let scaled: Vec<f64> = w.iter().map(|v| c * v).collect();
                let val = omega(&scaled, &gs, &NormOptions::default()).unwrap().value;
                prop_assert!((val - c.abs() * base).abs() <= 1e-8,
                    "Ω(cw) = {val}, |c|Ω(w) = {}", c.abs() * base);
            }

            #[test]
            fn triangle_inequality(gs in arb_group_set(), seed in 0u64..1000) {
                let p = gs.p();
                let w1: Vec<f64> = (0..p).map(|i| ((seed + i as u64) as f64 * 0.39).sin()).collect();
                let w2: Vec<f64> = (0..p).map(|i| ((seed + i as u64) as f64 * 0.71).cos()).collect();
                let sum: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
                let o1 = omega(&w1, &gs, &NormOptions::default()).unwrap().value;
                let o2 = omega(&w2, &gs, &NormOptions::default()).unwrap().value;
                let os = omega(&sum, &gs, &NormOptions::default()).unwrap().value;
                prop_assert!(os <= o1 + o2 + 1e-8);
            }

            #[test]
            fn definiteness_and_dual_feasibility(gs in arb_group_set(), w in arb_vector(8)) {
                let w = &w[..gs.p()];
                let res = omega(w, &gs, &NormOptions::default()).unwrap();
                let max_abs = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let d_min = gs.weights().iter().fold(f64::INFINITY, |m, &d| m.min(d));
                // Each unit of mass costs at least the cheapest weight.
                prop_assert!(res.value + 1e-9 >= d_min * max_abs);
                prop_assert!(omega_dual(&res.alpha, &gs) <= 1.0 + 1e-10);
                prop_assert!((res.value - linalg::dot(&res.alpha, w) - res.gap).abs() <= 1e-12);
            }

            #[test]
            fn partition_reduces_to_weighted_group_lasso(
                cuts in proptest::collection::vec(1usize..11, 0..3),
                seed in 0u64..1000,
            ) {
                let p = 12usize;
                let mut bounds: Vec<usize> = cuts.into_iter().filter(|&c| c < p).collect();
                bounds.push(0);
                bounds.push(p);
                bounds.sort_unstable();
                bounds.dedup();
                let mut groups = Vec::new();
                for pair in bounds.windows(2) {
                    groups.push((pair[0]..pair[1]).collect::<Vec<usize>>());
                }
                let weights: Vec<f64> = (0..groups.len()).map(|i| 0.5 + (i as f64) * 0.3).collect();
                let gs = build_group_set(p, groups, weights).unwrap();
                let w: Vec<f64> = (0..p).map(|i| ((seed + i as u64) as f64 * 0.37).sin()).collect();
                let direct: f64 = (0..gs.m()).map(|g| gs.weight(g) * gs.group_norm(g, &w)).sum();
                let res = omega(&w, &gs, &NormOptions::default()).unwrap();
                prop_assert!((res.value - direct).abs() <= 1e-10,
                    "partition mismatch: {} vs {}", res.value, direct);
            }

            #[test]
            fn nesting_monotone_in_weak_support(seed in 0u64..500) {
                // Nested pair {0,1} ⊂ {0,1,2} with d outer ≤ d inner.
                let gs = build_group_set(
                    3,
                    vec![vec![0, 1], vec![0, 1, 2]],
                    vec![1.0, 0.9],
                ).unwrap();
                let w: Vec<f64> = (0..3).map(|i| ((seed + i as u64) as f64 * 0.53).sin() * 1.5).collect();
                let res = omega(&w, &gs, &NormOptions::default()).unwrap();
                let sup = group_support(&res, &gs, 1e-6, 1e-4);
                if sup.weak.contains(&0) {
                    prop_assert!(sup.weak.contains(&1));
                }
            }

            #[test]
            fn gauge_of_disk_hull_is_at_most_one(gs in arb_group_set(), seed in 0u64..1000) {
                // Convex combination of per-group disk points has norm ≤ 1.
                let p = gs.p();
                let mut w = vec![0.0; p];
                let m = gs.m();
                let mut coefs: Vec<f64> = (0..m)
                    .map(|g| ((seed + g as u64) as f64 * 0.61).sin().abs() + 1e-3)
                    .collect();
                let total: f64 = coefs.iter().sum();
                for c in coefs.iter_mut() {
                    *c /= total;
                }
                for g in 0..m {
                    let members = gs.group(g);
                    let mut point: Vec<f64> = members
                        .iter()
                        .map(|&i| ((seed + (i + 3 * g) as u64) as f64 * 0.83).cos())
                        .collect();
                    let nrm = linalg::norm2(&point);
                    if nrm > 0.0 {
                        let scale = 1.0 / (gs.weight(g) * nrm);
                        for v in point.iter_mut() {
                            *v *= scale;
                        }
                    }
                    for (&i, &v) in members.iter().zip(&point) {
                        w[i] += coefs[g] * v;
                    }
                }
                let res = omega(&w, &gs, &NormOptions::default()).unwrap();
                prop_assert!(res.value <= 1.0 + 1e-8, "gauge {} > 1", res.value);
            }
        }
    }
}
