//! Small dense linear-algebra helpers.
//!
//! Problem sizes here are desk scale (hundreds of rows and columns), so
//! everything is plain Gaussian elimination, power iteration, and a dense
//! tableau simplex. Matrices are stored column-major because the solver's
//! hot loop gathers whole columns by group.

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DenseMatrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from row-major data; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows == 0 { 0 } else { rows[0].len() };
        let mut m = DenseMatrix::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nrows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    /// `X w` for a full-length coefficient vector.
    pub fn matvec(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.ncols);
        let mut out = vec![0.0; self.nrows];
        for (j, &wj) in w.iter().enumerate() {
            if wj != 0.0 {
                for (o, &x) in out.iter_mut().zip(self.col(j)) {
                    *o += wj * x;
                }
            }
        }
        out
    }

    /// Dot product of column `j` with `v`.
    pub fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        dot(self.col(j), v)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.ncols).map(|j| self.get(i, j)).collect()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// `a` is row-major and consumed. Returns `None` when a pivot falls below
/// `pivot_tol` relative to the largest entry of its column block.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, pivot_tol: f64) -> Option<Vec<f64>> {
    let n = a.len();
    assert_eq!(b.len(), n);
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(1.0);
    for k in 0..n {
        let (pivot_row, pivot_val) = (k..n)
            .map(|i| (i, a[i][k].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot_val <= pivot_tol * scale {
            return None;
        }
        a.swap(k, pivot_row);
        b.swap(k, pivot_row);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    Some(x)
}

/// Row rank by elimination with an absolute pivot threshold.
pub fn row_rank(mut rows: Vec<Vec<f64>>, pivot_tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let ncols = rows[0].len();
    let mut rank = 0;
    let mut pivot_col = 0;
    while rank < rows.len() && pivot_col < ncols {
        let best = (rank..rows.len()).max_by(|&i, &j| {
            rows[i][pivot_col].abs().total_cmp(&rows[j][pivot_col].abs())
        });
        match best {
            Some(r) if rows[r][pivot_col].abs() > pivot_tol => {
                rows.swap(rank, r);
                for i in 0..rows.len() {
                    if i != rank && rows[i][pivot_col].abs() > 0.0 {
                        let f = rows[i][pivot_col] / rows[rank][pivot_col];
                        for c in pivot_col..ncols {
                            let upd = rows[rank][c] * f;
                            rows[i][c] -= upd;
                        }
                    }
                }
                rank += 1;
                pivot_col += 1;
            }
            _ => pivot_col += 1,
        }
    }
    rank
}

/// Cholesky factorization of a symmetric positive definite matrix.
/// Returns the lower triangle L with A = LLᵀ, or None when a pivot
/// drops below a scale-relative floor (not positive definite).
pub fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let scale = a
        .iter()
        .enumerate()
        .map(|(i, row)| row[i].abs())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut diag = a[j][j];
        for k in 0..j {
            diag -= l[j][k] * l[j][k];
        }
        if diag <= 1e-12 * scale {
            return None;
        }
        let root = diag.sqrt();
        l[j][j] = root;
        for i in (j + 1)..n {
            let mut off = a[i][j];
            for k in 0..j {
                off -= l[i][k] * l[j][k];
            }
            l[i][j] = off / root;
        }
    }
    Some(l)
}

/// Solves LLᵀx = b given the Cholesky factor L.
pub fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= l[i][k] * x[k];
        }
        x[i] /= l[i][i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            x[i] -= l[k][i] * x[k];
        }
        x[i] /= l[i][i];
    }
    x
}

/// Largest eigenvalue of a small symmetric positive semidefinite matrix,
/// by power iteration from a deterministic start.
pub fn eig_max_sym(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    // Frobenius-scaled fallback guards the all-zero case.
    let frob: f64 = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if frob == 0.0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    // Perturb to avoid starting orthogonal to the top eigenvector.
    if n > 1 {
        v[0] += 1e-3;
    }
    let mut lambda = 0.0f64;
    for _ in 0..500 {
        let mut av = vec![0.0; n];
        for i in 0..n {
            av[i] = dot(&a[i], &v);
        }
        let nrm = norm2(&av);
        if nrm == 0.0 {
            return 0.0;
        }
        for x in av.iter_mut() {
            *x /= nrm;
        }
        let new_lambda = {
            let mut av2 = vec![0.0; n];
            for i in 0..n {
                av2[i] = dot(&a[i], &av);
            }
            dot(&av, &av2)
        };
        let done = (new_lambda - lambda).abs() <= 1e-13 * new_lambda.abs().max(1.0);
        lambda = new_lambda;
        v = av;
        if done {
            break;
        }
    }
    lambda
}

/// Outcome of a linear program in standard form.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

/// Solves `min c'x  s.t.  A x = b, x >= 0` with a two-phase tableau
/// simplex using Bland's rule, so it terminates on degenerate problems.
pub fn simplex(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> LpOutcome {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m);
    for row in a {
        assert_eq!(row.len(), n);
    }
    const EPS: f64 = 1e-10;

    // Tableau over original variables plus m artificials.
    let total = n + m;
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs = b.to_vec();
    for i in 0..m {
        let mut row = vec![0.0; total];
        let flip = if rhs[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            row[j] = flip * a[i][j];
        }
        rhs[i] *= flip;
        row[n + i] = 1.0;
        t.push(row);
    }
    let mut basis: Vec<usize> = (n..total).collect();

    let run_phase = |t: &mut Vec<Vec<f64>>,
                     rhs: &mut Vec<f64>,
                     basis: &mut Vec<usize>,
                     cost: &[f64],
                     allowed: usize|
     -> Option<()> {
        loop {
            // Reduced costs under the current basis.
            let mut y = vec![0.0; t.len()];
            for (i, &bi) in basis.iter().enumerate() {
                y[i] = cost[bi];
            }
            let mut entering = None;
            for j in 0..allowed {
                if basis.contains(&j) {
                    continue;
                }
                let mut red = cost[j];
                for i in 0..t.len() {
                    red -= y[i] * t[i][j];
                }
                if red < -EPS {
                    entering = Some(j);
                    break; // Bland: lowest index wins
                }
            }
            let Some(e) = entering else {
                return Some(());
            };
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..t.len() {
                if t[i][e] > EPS {
                    let ratio = rhs[i] / t[i][e];
                    let better = ratio < best_ratio - EPS
                        || (ratio < best_ratio + EPS
                            && leave.is_some_and(|l| basis[i] < basis[l]));
                    if leave.is_none() || better {
                        best_ratio = ratio.min(best_ratio);
                        leave = Some(i);
                    }
                }
            }
            let Some(l) = leave else {
                return None; // unbounded in the entering direction
            };
            // Pivot on (l, e).
            let piv = t[l][e];
            for v in t[l].iter_mut() {
                *v /= piv;
            }
            rhs[l] /= piv;
            for i in 0..t.len() {
                if i != l && t[i][e].abs() > 0.0 {
                    let f = t[i][e];
                    let (src, dst) = if i < l {
                        let (a, b) = t.split_at_mut(l);
                        (&b[0], &mut a[i])
                    } else {
                        let (a, b) = t.split_at_mut(i);
                        (&a[l], &mut b[0])
                    };
                    for (d, s) in dst.iter_mut().zip(src.iter()) {
                        *d -= f * s;
                    }
                    rhs[i] -= f * rhs[l];
                }
            }
            basis[l] = e;
        }
    };

    // Phase 1: drive artificials to zero.
    let mut phase1_cost = vec![0.0; total];
    for cj in phase1_cost.iter_mut().skip(n) {
        *cj = 1.0;
    }
    if run_phase(&mut t, &mut rhs, &mut basis, &phase1_cost, total).is_none() {
        // Phase 1 objective is bounded below by zero, so this cannot happen.
        return LpOutcome::Infeasible;
    }
    let phase1_val: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &bi)| bi >= n)
        .map(|(i, _)| rhs[i])
        .sum();
    if phase1_val > 1e-8 {
        return LpOutcome::Infeasible;
    }
    // Pivot any artificial still in the basis out on a nonzero original column,
    // or drop its (redundant) row.
    let mut drop_rows = Vec::new();
    for i in 0..t.len() {
        if basis[i] >= n {
            let mut pivoted = false;
            for j in 0..n {
                if t[i][j].abs() > EPS {
                    let piv = t[i][j];
                    for v in t[i].iter_mut() {
                        *v /= piv;
                    }
                    rhs[i] /= piv;
                    for k in 0..t.len() {
                        if k != i && t[k][j].abs() > 0.0 {
                            let f = t[k][j];
                            let row_i = t[i].clone();
                            for (d, s) in t[k].iter_mut().zip(row_i.iter()) {
                                *d -= f * s;
                            }
                            rhs[k] -= f * rhs[i];
                        }
                    }
                    basis[i] = j;
                    pivoted = true;
                    break;
                }
            }
            if !pivoted {
                drop_rows.push(i);
            }
        }
    }
    for &i in drop_rows.iter().rev() {
        t.remove(i);
        rhs.remove(i);
        basis.remove(i);
    }

    // Phase 2 over original columns only.
    let mut phase2_cost = vec![0.0; total];
    phase2_cost[..n].copy_from_slice(c);
    if run_phase(&mut t, &mut rhs, &mut basis, &phase2_cost, n).is_none() {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (i, &bi) in basis.iter().enumerate() {
        if bi < n {
            x[bi] = rhs[i];
        }
    }
    let value = dot(c, &x);
    LpOutcome::Optimal { x, value }
}
