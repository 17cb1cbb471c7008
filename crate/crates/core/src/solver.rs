//! Penalized empirical-risk minimization: min over w of L(w) + λΩ(w).
//!
//! The overlap penalty is handled by working in the duplicated covariate
//! space: each group owns a private copy of its covariates, the penalty
//! becomes an ordinary (disjoint) group Lasso there, and the original w
//! is the sum of the latent blocks. Optimization is block coordinate
//! descent over a working set that grows by KKT violation scans, the
//! standard active-set pattern for sparse paths.
//!
//! The duplicated design is only an index map; no column is ever copied.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::groups::GroupSet;
use crate::linalg::{self, DenseMatrix};

/// Loss functions over predictions t = Xw + b and targets y.
///
/// All derivatives are with respect to predictions and carry the 1/n
/// factor, so a group gradient is just X_gᵀ times the returned vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// (1/2n)·Σ (y_i − t_i)²
    Squared,
    /// (1/n)·Σ log(1 + exp(−y_i t_i)) with y ∈ {−1, +1}
    Logistic,
    /// Logistic with each class reweighted by the other class's
    /// frequency, so both classes contribute equally.
    BalancedLogistic,
}

impl Loss {
    pub fn validate_targets(&self, y: &[f64]) -> Result<()> {
        if y.is_empty() {
            return Err(Error::invalid("y", "at least one observation required"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("y", "targets must be finite"));
        }
        match self {
            Loss::Squared => Ok(()),
            Loss::Logistic | Loss::BalancedLogistic => {
                if y.iter().all(|&v| v == 1.0 || v == -1.0) {
                    Ok(())
                } else {
                    Err(Error::invalid("y", "logistic losses need targets in {-1, +1}"))
                }
            }
        }
    }

    /// Per-example weights; only the balanced variant deviates from 1.
    fn example_weights(&self, y: &[f64]) -> Option<Vec<f64>> {
        match self {
            Loss::BalancedLogistic => {
                let n = y.len() as f64;
                let pos = y.iter().filter(|&&v| v > 0.0).count() as f64;
                let (wp, wn) = ((n - pos) / n, pos / n);
                Some(y.iter().map(|&v| if v > 0.0 { wp } else { wn }).collect())
            }
            _ => None,
        }
    }

    pub fn value(&self, preds: &[f64], y: &[f64]) -> f64 {
        let n = y.len() as f64;
        match self {
            Loss::Squared => {
                preds
                    .iter()
                    .zip(y)
                    .map(|(&t, &yi)| (yi - t) * (yi - t))
                    .sum::<f64>()
                    / (2.0 * n)
            }
            Loss::Logistic => {
                preds
                    .iter()
                    .zip(y)
                    .map(|(&t, &yi)| log1p_exp(-yi * t))
                    .sum::<f64>()
                    / n
            }
            Loss::BalancedLogistic => {
                let wts = self.example_weights(y).unwrap();
                preds
                    .iter()
                    .zip(y)
                    .zip(&wts)
                    .map(|((&t, &yi), &wi)| wi * log1p_exp(-yi * t))
                    .sum::<f64>()
                    / n
            }
        }
    }

    /// dL/dt, including the 1/n factor, written into `out`.
    pub fn grad_pred(&self, preds: &[f64], y: &[f64], out: &mut Vec<f64>) {
        let n = y.len() as f64;
        out.clear();
        match self {
            Loss::Squared => {
                out.extend(preds.iter().zip(y).map(|(&t, &yi)| (t - yi) / n));
            }
            Loss::Logistic => {
                out.extend(
                    preds
                        .iter()
                        .zip(y)
                        .map(|(&t, &yi)| -yi * sigmoid(-yi * t) / n),
                );
            }
            Loss::BalancedLogistic => {
                let wts = self.example_weights(y).unwrap();
                out.extend(
                    preds
                        .iter()
                        .zip(y)
                        .zip(&wts)
                        .map(|((&t, &yi), &wi)| -wi * yi * sigmoid(-yi * t) / n),
                );
            }
        }
    }

    /// Upper bound on d²L/dt² per example (times n), used to scale block
    /// step sizes.
    fn curvature_cap(&self, y: &[f64]) -> f64 {
        match self {
            Loss::Squared => 1.0,
            Loss::Logistic => 0.25,
            Loss::BalancedLogistic => {
                let wts = self.example_weights(y).unwrap();
                0.25 * wts.iter().fold(0.0f64, |m, &w| m.max(w))
            }
        }
    }

    /// Minimizes the loss over a constant offset added to `preds`.
    /// Squared loss has a closed form; the logistic losses use Newton
    /// steps on the (strictly convex) 1-D problem.
    fn optimal_offset_shift(&self, preds: &[f64], y: &[f64]) -> f64 {
        match self {
            Loss::Squared => {
                let n = y.len() as f64;
                preds.iter().zip(y).map(|(&t, &yi)| yi - t).sum::<f64>() / n
            }
            Loss::Logistic | Loss::BalancedLogistic => {
                let wts = self.example_weights(y);
                let unit = vec![1.0; y.len()];
                let wts = wts.as_deref().unwrap_or(&unit);
                let mut shift = 0.0f64;
                for _ in 0..100 {
                    let mut g = 0.0;
                    let mut h = 0.0;
                    for ((&t, &yi), &wi) in preds.iter().zip(y).zip(wts) {
                        let s = sigmoid(-yi * (t + shift));
                        g += -wi * yi * s;
                        h += wi * s * (1.0 - s);
                    }
                    if h <= 1e-12 {
                        break;
                    }
                    let step = g / h;
                    shift -= step;
                    // One-class data pushes the offset to infinity; stop at
                    // log-odds beyond any practical resolution.
                    shift = shift.clamp(-40.0, 40.0);
                    if step.abs() <= 1e-13 * (1.0 + shift.abs()) {
                        break;
                    }
                }
                shift
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log1p_exp(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Index map describing the duplicated design: one column block per
/// group, block g holding the columns of X restricted to g's members.
/// Total width is Σ_g |g|; nothing is materialized.
pub struct DuplicatedDesign<'a> {
    x: &'a DenseMatrix,
    gs: &'a GroupSet,
    offsets: Vec<usize>,
    width: usize,
}

impl<'a> DuplicatedDesign<'a> {
    pub fn new(x: &'a DenseMatrix, gs: &'a GroupSet) -> Result<Self> {
        if x.ncols() != gs.p() {
            return Err(Error::invalid(
                "x",
                format!("{} columns but p = {}", x.ncols(), gs.p()),
            ));
        }
        let mut offsets = Vec::with_capacity(gs.m());
        let mut width = 0;
        for g in 0..gs.m() {
            offsets.push(width);
            width += gs.group(g).len();
        }
        Ok(DuplicatedDesign {
            x,
            gs,
            offsets,
            width,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Start of group `g`'s column block in the duplicated indexing.
    pub fn block_offset(&self, g: usize) -> usize {
        self.offsets[g]
    }

    /// Maps a duplicated column index back to (group, original covariate).
    pub fn resolve(&self, dup_col: usize) -> (usize, usize) {
        let g = match self.offsets.binary_search(&dup_col) {
            Ok(g) => g,
            Err(ins) => ins - 1,
        };
        (g, self.gs.group(g)[dup_col - self.offsets[g]])
    }

    /// The original column backing duplicated column `dup_col`.
    pub fn column(&self, dup_col: usize) -> &[f64] {
        let (_, cov) = self.resolve(dup_col);
        self.x.col(cov)
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Relative KKT tolerance declaring convergence.
    pub kkt_tol: f64,
    /// Maximum working-set expansion rounds.
    pub max_outer: usize,
    /// Maximum coordinate sweeps per expansion round.
    pub max_inner: usize,
    /// Fit an unpenalized offset alongside w.
    pub intercept: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            kkt_tol: 1e-6,
            max_outer: 100,
            max_inner: 1000,
            intercept: false,
        }
    }
}

/// A fitted model at one value of λ.
///
/// `v_dup` is the sparse duplicated latent vector: one entry per group
/// that carries mass, holding the block aligned with the group's sorted
/// members. `w` is always the column-wise sum of those blocks, and
/// `active` is the working set (which may include groups whose block
/// collapsed back to zero).
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct FitResult {
    pub w: Vec<f64>,
    pub v_dup: Vec<(usize, Vec<f64>)>,
    pub active: Vec<usize>,
    pub intercept: f64,
    pub lambda: f64,
    pub kkt_residual: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    /// Groups whose latent block is nonzero.
    pub fn selected_groups(&self) -> Vec<usize> {
        self.v_dup
            .iter()
            .filter(|(_, block)| block.iter().any(|&v| v != 0.0))
            .map(|(g, _)| *g)
            .collect()
    }

    /// Covariates with nonzero coefficient.
    pub fn selected_covariates(&self) -> Vec<usize> {
        self.w
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| (v != 0.0).then_some(i))
            .collect()
    }
}

/// Largest λ with a zero solution: the dual norm of the loss gradient at
/// w = 0 (with the offset already at its unpenalized optimum when
/// `intercept` is set; λ at or above this keeps every block at zero).
pub fn lambda_max(
    x: &DenseMatrix,
    y: &[f64],
    loss: Loss,
    gs: &GroupSet,
    intercept: bool,
) -> Result<f64> {
    loss.validate_targets(y)?;
    check_shapes(x, y, gs)?;
    let mut preds = vec![0.0; y.len()];
    if intercept {
        let b = loss.optimal_offset_shift(&preds, y);
        for t in preds.iter_mut() {
            *t = b;
        }
    }
    let mut gp = Vec::new();
    loss.grad_pred(&preds, y, &mut gp);
    let mut best = 0.0f64;
    for g in 0..gs.m() {
        let norm: f64 = gs
            .group(g)
            .iter()
            .map(|&j| {
                let d = x.col_dot(j, &gp);
                d * d
            })
            .sum::<f64>()
            .sqrt();
        best = best.max(norm / gs.weight(g));
    }
    Ok(best)
}

fn check_shapes(x: &DenseMatrix, y: &[f64], gs: &GroupSet) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::invalid(
            "x",
            format!("{} rows but {} targets", x.nrows(), y.len()),
        ));
    }
    if x.ncols() != gs.p() {
        return Err(Error::invalid(
            "x",
            format!("{} columns but p = {}", x.ncols(), gs.p()),
        ));
    }
    Ok(())
}

struct FitState<'a> {
    x: &'a DenseMatrix,
    y: &'a [f64],
    loss: Loss,
    gs: &'a GroupSet,
    lambda: f64,
    intercept_on: bool,
    /// Latent blocks; None = group not in working set or zeroed.
    v: Vec<Option<Vec<f64>>>,
    active: Vec<usize>,
    w: Vec<f64>,
    b: f64,
    preds: Vec<f64>,
    /// Cached block step constants.
    lip: Vec<Option<f64>>,
    grad_buf: Vec<f64>,
    scratch_preds: Vec<f64>,
    sweeps: usize,
}

impl<'a> FitState<'a> {
    fn new(
        x: &'a DenseMatrix,
        y: &'a [f64],
        loss: Loss,
        gs: &'a GroupSet,
        lambda: f64,
        intercept_on: bool,
        warm: Option<&FitResult>,
    ) -> Result<Self> {
        let mut state = FitState {
            x,
            y,
            loss,
            gs,
            lambda,
            intercept_on,
            v: vec![None; gs.m()],
            active: Vec::new(),
            w: vec![0.0; gs.p()],
            b: 0.0,
            preds: vec![0.0; y.len()],
            lip: vec![None; gs.m()],
            grad_buf: Vec::with_capacity(y.len()),
            scratch_preds: vec![0.0; y.len()],
            sweeps: 0,
        };
        if let Some(prev) = warm {
            for (g, block) in &prev.v_dup {
                if block.iter().any(|&v| v != 0.0) {
                    state.ensure_active(*g)?;
                    state.v[*g] = Some(block.clone());
                }
            }
            state.b = if intercept_on { prev.intercept } else { 0.0 };
            state.rebuild_w_and_preds();
        }
        if intercept_on {
            state.update_intercept();
        }
        Ok(state)
    }

    fn rebuild_w_and_preds(&mut self) {
        for v in self.w.iter_mut() {
            *v = 0.0;
        }
        for g in 0..self.gs.m() {
            if let Some(block) = &self.v[g] {
                for (&i, &u) in self.gs.group(g).iter().zip(block) {
                    self.w[i] += u;
                }
            }
        }
        self.preds = self.x.matvec(&self.w);
        for t in self.preds.iter_mut() {
            *t += self.b;
        }
    }

    fn ensure_active(&mut self, g: usize) -> Result<()> {
        if self.v[g].is_some() || self.active.contains(&g) {
            self.lip_for(g)?;
            return Ok(());
        }
        self.lip_for(g)?;
        let pos = self.active.partition_point(|&a| a < g);
        self.active.insert(pos, g);
        self.v[g] = Some(vec![0.0; self.gs.group(g).len()]);
        Ok(())
    }

    /// Step constant for block g: curvature cap times the top eigenvalue
    /// of the block Gram matrix (1/n)·X_gᵀX_g.
    fn lip_for(&mut self, g: usize) -> Result<f64> {
        if let Some(l) = self.lip[g] {
            return Ok(l);
        }
        let members = self.gs.group(g);
        let n = self.y.len() as f64;
        let k = members.len();
        let mut gram = vec![vec![0.0; k]; k];
        for (a, &ia) in members.iter().enumerate() {
            for (b, &ib) in members.iter().enumerate().skip(a) {
                let val = self.x.col_dot(ia, self.x.col(ib)) / n;
                gram[a][b] = val;
                gram[b][a] = val;
            }
        }
        let eig = linalg::eig_max_sym(&gram);
        if eig <= 0.0 {
            return Err(Error::DegenerateDesign { group: g + 1 });
        }
        let l = self.loss.curvature_cap(self.y) * eig * (1.0 + 1e-9);
        self.lip[g] = Some(l);
        Ok(l)
    }

    fn update_intercept(&mut self) {
        let shift = self.loss.optimal_offset_shift(&self.preds, self.y);
        if shift != 0.0 {
            self.b += shift;
            for t in self.preds.iter_mut() {
                *t += shift;
            }
        }
    }

    /// Worst KKT residual over the working set only; cheap enough to run
    /// every sweep even when the full group system is large.
    fn active_kkt_residual(&mut self) -> f64 {
        let loss = self.loss;
        loss.grad_pred(&self.preds, self.y, &mut self.grad_buf);
        let mut worst = 0.0f64;
        for &g in &self.active {
            let members = self.gs.group(g);
            let grad: Vec<f64> = members
                .iter()
                .map(|&j| self.x.col_dot(j, &self.grad_buf))
                .collect();
            let lam_d = self.lambda * self.gs.weight(g);
            let block = self.v[g].as_ref().expect("active block present");
            let block_norm = linalg::norm2(block);
            let resid = if block_norm > 0.0 {
                grad.iter()
                    .zip(block)
                    .map(|(&gi, &ui)| {
                        let r = gi + lam_d * ui / block_norm;
                        r * r
                    })
                    .sum::<f64>()
                    .sqrt()
                    / lam_d
            } else {
                (linalg::norm2(&grad) / lam_d - 1.0).max(0.0)
            };
            worst = worst.max(resid);
        }
        worst
    }

    fn objective(&self) -> f64 {
        let mut pen = 0.0;
        for g in 0..self.gs.m() {
            if let Some(block) = &self.v[g] {
                pen += self.gs.weight(g) * linalg::norm2(block);
            }
        }
        self.loss.value(&self.preds, self.y) + self.lambda * pen
    }

    /// One visit to block g: exact zero test, then proximal-gradient
    /// steps until the block's own KKT residual is a tenth of the global
    /// tolerance or the step budget runs out.
    fn update_block(&mut self, g: usize, kkt_tol: f64) -> Result<()> {
        let members: Vec<usize> = self.gs.group(g).to_vec();
        let d = self.gs.weight(g);
        let lam_d = self.lambda * d;
        let mut u = self.v[g].clone().unwrap_or_else(|| vec![0.0; members.len()]);
        let has_mass = u.iter().any(|&v| v != 0.0);

        // Zero test against the gradient with this block removed.
        self.scratch_preds.copy_from_slice(&self.preds);
        if has_mass {
            for (&i, &ui) in members.iter().zip(&u) {
                if ui != 0.0 {
                    let col = self.x.col(i);
                    for (t, &xv) in self.scratch_preds.iter_mut().zip(col) {
                        *t -= ui * xv;
                    }
                }
            }
        }
        let loss = self.loss;
        loss.grad_pred(&self.scratch_preds, self.y, &mut self.grad_buf);
        let grad0: Vec<f64> = members
            .iter()
            .map(|&j| self.x.col_dot(j, &self.grad_buf))
            .collect();
        if linalg::norm2(&grad0) <= lam_d {
            if has_mass {
                for (&i, &ui) in members.iter().zip(&u) {
                    self.w[i] -= ui;
                }
                self.preds.copy_from_slice(&self.scratch_preds);
                self.v[g] = Some(vec![0.0; members.len()]);
            }
            return Ok(());
        }

        let lip = self.lip_for(g)?;
        let block_tol = kkt_tol / 10.0;
        for _ in 0..200 {
            loss.grad_pred(&self.preds, self.y, &mut self.grad_buf);
            let grad: Vec<f64> = members
                .iter()
                .map(|&j| self.x.col_dot(j, &self.grad_buf))
                .collect();
            let u_norm = linalg::norm2(&u);
            if u_norm > 0.0 {
                let resid: f64 = grad
                    .iter()
                    .zip(&u)
                    .map(|(&gi, &ui)| {
                        let r = gi + lam_d * ui / u_norm;
                        r * r
                    })
                    .sum::<f64>()
                    .sqrt();
                if resid <= block_tol * lam_d {
                    break;
                }
            }
            // Forward-backward step: gradient descent then block shrinkage.
            let z: Vec<f64> = u.iter().zip(&grad).map(|(&ui, &gi)| ui - gi / lip).collect();
            let z_norm = linalg::norm2(&z);
            let shrink = if z_norm > 0.0 {
                (1.0 - lam_d / (lip * z_norm)).max(0.0)
            } else {
                0.0
            };
            let mut moved = false;
            for (idx, &i) in members.iter().enumerate() {
                let new_u = shrink * z[idx];
                let delta = new_u - u[idx];
                if delta != 0.0 {
                    moved = true;
                    self.w[i] += delta;
                    let col = self.x.col(i);
                    for (t, &xv) in self.preds.iter_mut().zip(col) {
                        *t += delta * xv;
                    }
                    u[idx] = new_u;
                }
            }
            if !moved {
                break;
            }
        }
        self.v[g] = Some(u);
        Ok(())
    }

    /// Per-group KKT residuals at the current iterate; both cases are
    /// normalized by λd_g so the tolerance is dimensionless.
    fn kkt_residuals(&mut self) -> Vec<f64> {
        let loss = self.loss;
        loss.grad_pred(&self.preds, self.y, &mut self.grad_buf);
        let mut out = Vec::with_capacity(self.gs.m());
        for g in 0..self.gs.m() {
            let members = self.gs.group(g);
            let grad: Vec<f64> = members
                .iter()
                .map(|&j| self.x.col_dot(j, &self.grad_buf))
                .collect();
            let lam_d = self.lambda * self.gs.weight(g);
            let block = self.v[g].as_ref();
            let block_norm = block.map(|b| linalg::norm2(b)).unwrap_or(0.0);
            let resid = if block_norm > 0.0 {
                let b = block.unwrap();
                grad.iter()
                    .zip(b)
                    .map(|(&gi, &ui)| {
                        let r = gi + lam_d * ui / block_norm;
                        r * r
                    })
                    .sum::<f64>()
                    .sqrt()
                    / lam_d
            } else {
                (linalg::norm2(&grad) / lam_d - 1.0).max(0.0)
            };
            out.push(resid);
        }
        out
    }

    fn into_result(mut self, converged: bool) -> FitResult {
        let residuals = self.kkt_residuals();
        let kkt_residual = residuals.iter().fold(0.0f64, |m, &r| m.max(r));
        let objective = self.objective();
        let mut v_dup = Vec::new();
        for g in 0..self.gs.m() {
            if let Some(block) = &self.v[g] {
                v_dup.push((g, block.clone()));
            }
        }
        FitResult {
            w: self.w,
            v_dup,
            active: self.active,
            intercept: self.b,
            lambda: self.lambda,
            kkt_residual,
            objective,
            iterations: self.sweeps,
            converged,
        }
    }
}

/// Fits min L(w) + λ·Σ_g d_g‖v^g‖ over latent blocks by working-set
/// block coordinate descent.
///
/// Outer rounds scan every group and add all groups violating the
/// inactive optimality condition ‖∇_g L‖/d_g ≤ λ(1+kkt_tol); inner
/// sweeps cycle over the working set until every active block meets its
/// own condition. The fit is converged when a scan adds nothing and the
/// active residuals are within tolerance.
///
/// # Errors
///
/// [`Error::FitNotConverged`] carrying the best iterate when the budgets
/// run out, [`Error::DegenerateDesign`] when a group with all-zero
/// design columns is forced active (only possible via warm starts).
pub fn fit(
    x: &DenseMatrix,
    y: &[f64],
    loss: Loss,
    gs: &GroupSet,
    lambda: f64,
    opts: &FitOptions,
    warm: Option<&FitResult>,
) -> Result<FitResult> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::invalid("lambda", format!("must be > 0, got {lambda}")));
    }
    loss.validate_targets(y)?;
    check_shapes(x, y, gs)?;

    let mut st = FitState::new(x, y, loss, gs, lambda, opts.intercept, warm)?;
    let mut prev_obj = st.objective();
    for _outer in 0..opts.max_outer {
        // Inner: settle the current working set.
        if !st.active.is_empty() {
            let mut inner_done = false;
            for _ in 0..opts.max_inner {
                st.sweeps += 1;
                let order = st.active.clone();
                for g in order {
                    st.update_block(g, opts.kkt_tol)?;
                }
                if st.intercept_on {
                    st.update_intercept();
                }
                let obj = st.objective();
                debug_assert!(
                    obj <= prev_obj + 1e-9 * (1.0 + prev_obj.abs()),
                    "objective increased within a sweep: {prev_obj} -> {obj}"
                );
                prev_obj = obj;
                if st.active_kkt_residual() <= opts.kkt_tol {
                    inner_done = true;
                    break;
                }
            }
            if !inner_done {
                return Err(Error::FitNotConverged(Box::new(
                    st.into_result(false),
                )));
            }
        } else if st.intercept_on {
            st.update_intercept();
            prev_obj = st.objective();
        }

        // Scan for violations among everything not yet active.
        let mut new_groups = Vec::new();
        {
            let loss = st.loss;
            loss.grad_pred(&st.preds, st.y, &mut st.grad_buf);
            for g in 0..gs.m() {
                if st.v[g].is_some() {
                    continue;
                }
                let norm: f64 = gs
                    .group(g)
                    .iter()
                    .map(|&j| {
                        let d = st.x.col_dot(j, &st.grad_buf);
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt();
                if norm / gs.weight(g) > lambda * (1.0 + opts.kkt_tol) {
                    new_groups.push(g);
                }
            }
        }
        if new_groups.is_empty() {
            return Ok(st.into_result(true));
        }
        for g in new_groups {
            st.ensure_active(g)?;
        }
    }
    Err(Error::FitNotConverged(Box::new(
        st.into_result(false),
    )))
}

/// Proximal operator of λΩ: argmin ½‖w − y‖² + λΩ(w).
///
/// Runs `fit` on the identity design with the squared loss; the loss
/// normalization 1/(2n) is absorbed by scaling λ down by p, which leaves
/// the argmin unchanged. The reported objective is on the ½‖w−y‖² scale.
pub fn prox(y: &[f64], gs: &GroupSet, lambda: f64, opts: &FitOptions) -> Result<FitResult> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid("lambda", format!("must be >= 0, got {lambda}")));
    }
    let p = gs.p();
    if y.len() != p {
        return Err(Error::invalid(
            "y",
            format!("expected length {p}, got {}", y.len()),
        ));
    }
    if lambda == 0.0 {
        // Nothing to shrink; decompose y itself for the latent blocks.
        let norm_res = crate::norm::omega(y, gs, &crate::norm::NormOptions::default())?;
        let v_dup: Vec<(usize, Vec<f64>)> = norm_res
            .decomposition
            .iter()
            .enumerate()
            .map(|(g, b)| (g, b.clone()))
            .collect();
        return Ok(FitResult {
            w: y.to_vec(),
            active: v_dup.iter().map(|(g, _)| *g).collect(),
            v_dup,
            intercept: 0.0,
            lambda: 0.0,
            kkt_residual: 0.0,
            objective: 0.0,
            iterations: norm_res.iterations,
            converged: true,
        });
    }
    let eye = DenseMatrix::identity(p);
    let mut fit_opts = opts.clone();
    fit_opts.intercept = false;
    let mut res = fit(&eye, y, Loss::Squared, gs, lambda / p as f64, &fit_opts, None)?;
    res.lambda = lambda;
    let half_sq: f64 = res
        .w
        .iter()
        .zip(y)
        .map(|(&wi, &yi)| (wi - yi) * (wi - yi))
        .sum::<f64>()
        / 2.0;
    let pen: f64 = res
        .v_dup
        .iter()
        .map(|(g, block)| gs.weight(*g) * linalg::norm2(block))
        .sum();
    res.objective = half_sq + lambda * pen;
    Ok(res)
}

/// How to lay out a decreasing λ grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// Geometric from λ_max down to ratio_min·λ_max.
    Geometric { n_points: usize, ratio_min: f64 },
    /// Geometric between two absolute endpoints, max down to min.
    Absolute { max: f64, min: f64, n_points: usize },
}

impl GridSpec {
    pub fn build(&self, lambda_max: f64) -> Result<Vec<f64>> {
        match *self {
            GridSpec::Geometric { n_points, ratio_min } => {
                if n_points < 2 {
                    return Err(Error::invalid("n_points", "need at least 2 grid points"));
                }
                if !(0.0 < ratio_min && ratio_min <= 1.0) {
                    return Err(Error::invalid("ratio_min", "must be in (0, 1]"));
                }
                Ok((0..n_points)
                    .map(|k| lambda_max * ratio_min.powf(k as f64 / (n_points - 1) as f64))
                    .collect())
            }
            GridSpec::Absolute { max, min, n_points } => {
                if n_points < 2 {
                    return Err(Error::invalid("n_points", "need at least 2 grid points"));
                }
                if !(min > 0.0 && min <= max) {
                    return Err(Error::invalid("min", "need 0 < min <= max"));
                }
                let ratio = min / max;
                Ok((0..n_points)
                    .map(|k| max * ratio.powf(k as f64 / (n_points - 1) as f64))
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct PathResult {
    pub grid: Vec<f64>,
    pub fits: Vec<FitResult>,
    pub lambda_max: f64,
}

/// Regularization path with warm starts along a decreasing grid.
pub fn path(
    x: &DenseMatrix,
    y: &[f64],
    loss: Loss,
    gs: &GroupSet,
    grid_spec: &GridSpec,
    opts: &FitOptions,
) -> Result<PathResult> {
    let lmax = lambda_max(x, y, loss, gs, opts.intercept)?;
    let grid = grid_spec.build(lmax)?;
    path_on_grid(x, y, loss, gs, &grid, lmax, opts)
}

/// Same as [`path`] but on a caller-supplied decreasing grid, so several
/// designs can share one grid exactly.
pub fn path_on_grid(
    x: &DenseMatrix,
    y: &[f64],
    loss: Loss,
    gs: &GroupSet,
    grid: &[f64],
    lambda_max_value: f64,
    opts: &FitOptions,
) -> Result<PathResult> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "empty grid"));
    }
    if grid.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("grid", "grid must be non-increasing"));
    }
    let mut fits: Vec<FitResult> = Vec::with_capacity(grid.len());
    for &lam in grid {
        let warm = fits.last();
        let res = fit(x, y, loss, gs, lam, opts, warm)?;
        fits.push(res);
    }
    Ok(PathResult {
        grid: grid.to_vec(),
        fits,
        lambda_max: lambda_max_value,
    })
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct KktReport {
    pub per_group: Vec<f64>,
    pub max: f64,
}

/// Recomputes per-group optimality violations for a finished fit.
///
/// Active blocks report ‖∇_g L + λd_g·v^g/‖v^g‖‖/(λd_g); inactive ones
/// report the positive part of ‖∇_g L‖/(λd_g) − 1.
pub fn kkt_check(
    fit: &FitResult,
    x: &DenseMatrix,
    y: &[f64],
    loss: Loss,
    gs: &GroupSet,
    lambda: f64,
) -> Result<KktReport> {
    loss.validate_targets(y)?;
    check_shapes(x, y, gs)?;
    let mut preds = x.matvec(&fit.w);
    for t in preds.iter_mut() {
        *t += fit.intercept;
    }
    let mut gp = Vec::new();
    loss.grad_pred(&preds, y, &mut gp);
    let blocks: std::collections::BTreeMap<usize, &Vec<f64>> =
        fit.v_dup.iter().map(|(g, b)| (*g, b)).collect();
    let mut per_group = Vec::with_capacity(gs.m());
    for g in 0..gs.m() {
        let grad: Vec<f64> = gs
            .group(g)
            .iter()
            .map(|&j| x.col_dot(j, &gp))
            .collect();
        let lam_d = lambda * gs.weight(g);
        let block_norm = blocks
            .get(&g)
            .map(|b| linalg::norm2(b))
            .unwrap_or(0.0);
        let resid = if block_norm > 0.0 {
            let b = blocks[&g];
            grad.iter()
                .zip(b.iter())
                .map(|(&gi, &ui)| {
                    let r = gi + lam_d * ui / block_norm;
                    r * r
                })
                .sum::<f64>()
                .sqrt()
                / lam_d
        } else {
            (linalg::norm2(&grad) / lam_d - 1.0).max(0.0)
        };
        per_group.push(resid);
    }
    let max = per_group.iter().fold(0.0f64, |m, &r| m.max(r));
    Ok(KktReport { per_group, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{build_group_set, groups_from_chain_windows};

    fn almost(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a}");
    }

    #[test]
    fn duplicated_design_index_map() {
        let x = DenseMatrix::identity(3);
        let gs = build_group_set(3, vec![vec![0, 1], vec![1, 2]], vec![1.0, 1.0]).unwrap();
        let dd = DuplicatedDesign::new(&x, &gs).unwrap();
        assert_eq!(dd.width(), 4);
        assert_eq!(dd.block_offset(1), 2);
        assert_eq!(dd.resolve(1), (0, 1));
        assert_eq!(dd.resolve(2), (1, 1));
        assert_eq!(dd.column(3), x.col(2));
        // A partition just permutes the columns.
        let part = build_group_set(3, vec![vec![2], vec![0, 1]], vec![1.0, 1.0]).unwrap();
        let dd = DuplicatedDesign::new(&x, &part).unwrap();
        assert_eq!(dd.width(), 3);
        // Singletons give the identity layout.
        let singles = groups_from_chain_windows(3, 1).unwrap();
        let dd = DuplicatedDesign::new(&x, &singles).unwrap();
        assert_eq!(dd.width(), 3);
        assert_eq!(dd.resolve(2), (2, 2));
    }

    #[test]
    fn lambda_max_identity_design() {
        let x = DenseMatrix::identity(4);
        let y = vec![3.0, -1.0, 2.0, 0.5];
        let gs = build_group_set(4, vec![vec![0, 1], vec![2, 3]], vec![1.0, 2.0]).unwrap();
        let lm = lambda_max(&x, &y, Loss::Squared, &gs, false).unwrap();
        let expect = (10.0f64.sqrt() / 4.0).max(4.25f64.sqrt() / 8.0);
        almost(lm, expect, 1e-12);
        let zeros = vec![0.0; 4];
        assert_eq!(lambda_max(&x, &zeros, Loss::Squared, &gs, false).unwrap(), 0.0);
        // Singletons, d = 1: max |x_iᵀy|/n.
        let singles = groups_from_chain_windows(4, 1).unwrap();
        let lm = lambda_max(&x, &y, Loss::Squared, &singles, false).unwrap();
        almost(lm, 0.75, 1e-12);
    }

    #[test]
    fn fit_at_lambda_max_is_exactly_zero() {
        let x = DenseMatrix::from_rows(&[
            vec![1.0, 0.3, -0.2],
            vec![-0.4, 1.1, 0.6],
            vec![0.2, -0.5, 0.9],
            vec![0.7, 0.1, -1.2],
        ]);
        let y = vec![1.0, -2.0, 0.5, 1.5];
        let gs = build_group_set(3, vec![vec![0, 1], vec![1, 2]], vec![1.0, 1.0]).unwrap();
        let lm = lambda_max(&x, &y, Loss::Squared, &gs, false).unwrap();
        let res = fit(&x, &y, Loss::Squared, &gs, lm * 1.0001, &FitOptions::default(), None).unwrap();
        assert!(res.w.iter().all(|&v| v == 0.0));
        assert!(res.active.is_empty());
        assert!(res.converged);
    }

    #[test]
    fn identity_design_soft_thresholds() {
        // Singleton groups with L(w) = ½‖y − w‖² via the prox scaling.
        let y = vec![2.0, -0.5, 1.2, -3.0];
        let gs = groups_from_chain_windows(4, 1).unwrap();
        let res = prox(&y, &gs, 1.0, &FitOptions::default()).unwrap();
        let expect = [1.0, 0.0, 0.2, -2.0];
        for (got, want) in res.w.iter().zip(expect) {
            almost(*got, want, 1e-8);
        }
        assert!(res.converged);
    }

    #[test]
    fn orthonormal_partition_block_soft_thresholds() {
        // X with orthonormal block columns scaled so X_gᵀX_g/n = I.
        let n = 4usize;
        let s = (n as f64).sqrt();
        let x = DenseMatrix::from_rows(&[
            vec![s / 2.0, s / 2.0, s / 2.0, s / 2.0],
            vec![s / 2.0, -s / 2.0, s / 2.0, -s / 2.0],
            vec![s / 2.0, s / 2.0, -s / 2.0, -s / 2.0],
            vec![s / 2.0, -s / 2.0, -s / 2.0, s / 2.0],
        ]);
        let y = vec![2.0, 0.0, 1.0, -1.0];
        let gs = build_group_set(4, vec![vec![0, 1], vec![2, 3]], vec![1.0, 1.5]).unwrap();
        let lambda = 0.3;
        let res = fit(&x, &y, Loss::Squared, &gs, lambda, &FitOptions::default(), None).unwrap();
        let n_f = n as f64;
        for g in 0..2 {
            let z: Vec<f64> = gs
                .group(g)
                .iter()
                .map(|&j| x.col_dot(j, &y) / n_f)
                .collect();
            let z_norm = linalg::norm2(&z);
            let shrink = (1.0 - lambda * gs.weight(g) / z_norm).max(0.0);
            for (&j, &zj) in gs.group(g).iter().zip(&z) {
                almost(res.w[j], shrink * zj, 1e-7);
            }
        }
    }

    #[test]
    fn prox_edge_cases() {
        let gs = build_group_set(3, vec![vec![0, 1, 2]], vec![2.0]).unwrap();
        let y = vec![3.0, 0.0, 4.0];
        // Single group covering everything: pure block soft-threshold.
        let res = prox(&y, &gs, 1.0, &FitOptions::default()).unwrap();
        let shrink = 1.0 - 2.0 / 5.0;
        for (got, want) in res.w.iter().zip(y.iter().map(|&v| shrink * v)) {
            almost(*got, want, 1e-8);
        }
        let res0 = prox(&y, &gs, 0.0, &FitOptions::default()).unwrap();
        assert_eq!(res0.w, y);
        // Shrinkage beyond the norm kills everything.
        let res_all = prox(&y, &gs, 11.0, &FitOptions::default()).unwrap();
        assert!(res_all.w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn prox_single_active_group_case() {
        let gs = build_group_set(3, vec![vec![0, 1], vec![1, 2]], vec![1.0, 1.0]).unwrap();
        let t = 2.0;
        let lam = 0.5;
        let res = prox(&[t, 0.0, 0.0], &gs, lam, &FitOptions::default()).unwrap();
        almost(res.w[0], t - lam, 1e-8);
        almost(res.w[1], 0.0, 1e-8);
        almost(res.w[2], 0.0, 1e-8);
    }

    #[test]
    fn kkt_check_flags_zero_below_lambda_max() {
        let x = DenseMatrix::identity(3);
        let y = vec![1.0, 2.0, -1.0];
        let gs = groups_from_chain_windows(3, 1).unwrap();
        let lm = lambda_max(&x, &y, Loss::Squared, &gs, false).unwrap();
        let zero_fit = FitResult {
            w: vec![0.0; 3],
            v_dup: vec![],
            active: vec![],
            intercept: 0.0,
            lambda: lm / 2.0,
            kkt_residual: 0.0,
            objective: 0.0,
            iterations: 0,
            converged: false,
        };
        let report = kkt_check(&zero_fit, &x, &y, Loss::Squared, &gs, lm / 2.0).unwrap();
        assert!(report.max > 0.0);
        // And at the optimum the report is clean.
        let good = fit(&x, &y, Loss::Squared, &gs, lm / 2.0, &FitOptions::default(), None).unwrap();
        let report = kkt_check(&good, &x, &y, Loss::Squared, &gs, lm / 2.0).unwrap();
        assert!(report.max <= 1e-6, "max residual {}", report.max);
    }

    #[test]
    fn logistic_fit_converges_and_satisfies_kkt() {
        let x = DenseMatrix::from_rows(&[
            vec![1.2, 0.1],
            vec![0.9, -0.3],
            vec![-1.1, 0.2],
            vec![-0.8, 0.5],
            vec![1.5, -0.9],
            vec![-1.3, -0.4],
        ]);
        let y = vec![1.0, 1.0, -1.0, -1.0, 1.0, -1.0];
        let gs = groups_from_chain_windows(2, 1).unwrap();
        for loss in [Loss::Logistic, Loss::BalancedLogistic] {
            let opts = FitOptions {
                intercept: true,
                ..FitOptions::default()
            };
            let lm = lambda_max(&x, &y, loss, &gs, true).unwrap();
            let res = fit(&x, &y, loss, &gs, lm * 0.3, &opts, None).unwrap();
            assert!(res.converged);
            assert!(res.kkt_residual <= 1e-6);
            assert!(!res.selected_covariates().is_empty());
        }
    }

    #[test]
    fn logistic_targets_validated() {
        let x = DenseMatrix::identity(2);
        let y = vec![1.0, 0.0];
        let gs = groups_from_chain_windows(2, 1).unwrap();
        assert!(matches!(
            fit(&x, &y, Loss::Logistic, &gs, 0.1, &FitOptions::default(), None),
            Err(Error::InvalidParam { name: "y", .. })
        ));
    }

    #[test]
    fn path_grids_and_warm_starts() {
        let x = DenseMatrix::from_rows(&[
            vec![0.5, 1.0, -0.3],
            vec![1.5, -0.2, 0.8],
            vec![-0.7, 0.4, 1.1],
            vec![0.2, -1.0, 0.6],
            vec![0.9, 0.3, -0.5],
        ]);
        let y = vec![1.0, 2.0, -0.5, 0.3, 1.1];
        let gs = build_group_set(3, vec![vec![0, 1], vec![1, 2]], vec![1.0, 1.0]).unwrap();
        let spec = GridSpec::Geometric {
            n_points: 8,
            ratio_min: 1e-2,
        };
        let pr = path(&x, &y, Loss::Squared, &gs, &spec, &FitOptions::default()).unwrap();
        assert_eq!(pr.grid.len(), 8);
        assert!(pr.fits[0].w.iter().all(|&v| v == 0.0));
        assert!(pr.grid.windows(2).all(|w| w[1] < w[0]));
        assert!(pr.fits.iter().all(|f| f.kkt_residual <= 1e-6));
        // Degenerate two-point grid pinned at λ_max.
        let flat = GridSpec::Geometric {
            n_points: 2,
            ratio_min: 1.0,
        };
        let pr = path(&x, &y, Loss::Squared, &gs, &flat, &FitOptions::default()).unwrap();
        assert!(pr.fits.iter().all(|f| f.w.iter().all(|&v| v == 0.0)));
        // Absolute grid endpoints are hit exactly.
        let abs = GridSpec::Absolute {
            max: 8.0,
            min: 2.0f64.powi(-7),
            n_points: 51,
        };
        let grid = abs.build(pr.lambda_max).unwrap();
        assert_eq!(grid.len(), 51);
        almost(grid[0], 8.0, 1e-12);
        almost(grid[50], 2.0f64.powi(-7), 1e-12);
    }

    #[test]
    fn warm_start_reuses_support() {
        let x = DenseMatrix::from_rows(&[
            vec![1.0, 0.2, 0.1, -0.4],
            vec![0.3, 1.1, -0.2, 0.5],
            vec![-0.6, 0.4, 0.9, 0.2],
            vec![0.8, -0.3, 0.4, 1.0],
            vec![0.1, 0.9, -0.7, 0.3],
            vec![-0.2, 0.5, 1.2, -0.8],
        ]);
        let y = vec![2.0, 1.0, -1.0, 0.5, 1.5, -0.7];
        let gs = build_group_set(4, vec![vec![0, 1], vec![2, 3]], vec![1.0, 1.0]).unwrap();
        let lm = lambda_max(&x, &y, Loss::Squared, &gs, false).unwrap();
        let first = fit(&x, &y, Loss::Squared, &gs, lm * 0.5, &FitOptions::default(), None).unwrap();
        let warm = fit(
            &x,
            &y,
            Loss::Squared,
            &gs,
            lm * 0.4,
            &FitOptions::default(),
            Some(&first),
        )
        .unwrap();
        let cold = fit(&x, &y, Loss::Squared, &gs, lm * 0.4, &FitOptions::default(), None).unwrap();
        for (a, b) in warm.w.iter().zip(&cold.w) {
            almost(*a, *b, 1e-6);
        }
        assert!(warm.iterations <= cold.iterations + 5);
    }

    #[test]
    fn w_is_sum_of_latent_blocks() {
        let x = DenseMatrix::from_rows(&[
            vec![1.0, 0.4, -0.2],
            vec![0.2, 1.3, 0.5],
            vec![-0.5, 0.2, 1.1],
            vec![0.6, -0.8, 0.3],
        ]);
        let y = vec![1.2, -0.4, 0.9, 0.1];
        let gs = build_group_set(3, vec![vec![0, 1], vec![1, 2]], vec![1.0, 1.0]).unwrap();
        let lm = lambda_max(&x, &y, Loss::Squared, &gs, false).unwrap();
        let res = fit(&x, &y, Loss::Squared, &gs, lm * 0.2, &FitOptions::default(), None).unwrap();
        let mut total = vec![0.0; 3];
        for (g, block) in &res.v_dup {
            for (&i, &u) in gs.group(*g).iter().zip(block) {
                total[i] += u;
            }
        }
        for (a, b) in total.iter().zip(&res.w) {
            almost(*a, *b, 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let n = 6;
        let preds: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() * 1.5).collect();
        let y_sq: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos() * 2.0).collect();
        let y_cls: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        for (loss, y) in [
            (Loss::Squared, &y_sq),
            (Loss::Logistic, &y_cls),
            (Loss::BalancedLogistic, &y_cls),
        ] {
            let mut grad = Vec::new();
            loss.grad_pred(&preds, y, &mut grad);
            let h = 1e-6;
            for i in 0..n {
                let mut up = preds.clone();
                let mut dn = preds.clone();
                up[i] += h;
                dn[i] -= h;
                let fd = (loss.value(&up, y) - loss.value(&dn, y)) / (2.0 * h);
                let denom = fd.abs().max(1e-8);
                assert!(
                    (grad[i] - fd).abs() / denom <= 1e-5,
                    "{loss:?} coordinate {i}: analytic {} vs fd {fd}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn degenerate_block_is_rejected_when_forced() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.0]]);
        let y = vec![1.0, 0.4];
        let gs = groups_from_chain_windows(2, 1).unwrap();
        let forced = FitResult {
            w: vec![0.0, 0.1],
            v_dup: vec![(1, vec![0.1])],
            active: vec![1],
            intercept: 0.0,
            lambda: 0.1,
            kkt_residual: 0.0,
            objective: 0.0,
            iterations: 0,
            converged: false,
        };
        assert!(matches!(
            fit(&x, &y, Loss::Squared, &gs, 0.1, &FitOptions::default(), Some(&forced)),
            Err(Error::DegenerateDesign { group: 2 })
        ));
    }
}
