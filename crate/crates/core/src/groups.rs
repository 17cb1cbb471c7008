//! Group collections over covariates, weight schemes, and the
//! weight-design diagnostics (redundancy, domination, the strict
//! per-size growth condition).
//!
//! Indices are 0-based throughout the API. File formats and error
//! messages use the 1-based convention described in [`crate::io`].

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{self, LpOutcome};

/// A validated collection of (possibly overlapping) covariate groups
/// with strictly positive weights.
///
/// Groups are stored with sorted members and in canonical order: by
/// size first, then lexicographically. Construction enforces that the
/// groups cover every covariate, so the induced penalty is finite
/// everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSet {
    p: usize,
    groups: Vec<Vec<usize>>,
    weights: Vec<f64>,
    covering: Vec<Vec<usize>>,
}

impl GroupSet {
    /// Number of covariates.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of groups.
    pub fn m(&self) -> usize {
        self.groups.len()
    }

    /// Members of group `gid`, sorted ascending.
    pub fn group(&self, gid: usize) -> &[usize] {
        &self.groups[gid]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn weight(&self, gid: usize) -> f64 {
        self.weights[gid]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Ids of the groups containing covariate `i`.
    pub fn covering(&self, i: usize) -> &[usize] {
        &self.covering[i]
    }

    /// Euclidean norm of `w` restricted to group `gid`.
    pub fn group_norm(&self, gid: usize, w: &[f64]) -> f64 {
        self.groups[gid]
            .iter()
            .map(|&i| w[i] * w[i])
            .sum::<f64>()
            .sqrt()
    }

    /// Gathers the entries of `w` on group `gid`, in member order.
    pub fn gather(&self, gid: usize, w: &[f64]) -> Vec<f64> {
        self.groups[gid].iter().map(|&i| w[i]).collect()
    }

    /// Drops every group larger than `max_size` and revalidates.
    ///
    /// Fails with [`Error::UncoveredCovariate`] when the removal leaves
    /// some covariate in no group. There is no default cutoff anywhere in
    /// the crate; callers opt in explicitly.
    pub fn retain_max_size(&self, max_size: usize) -> Result<GroupSet> {
        let mut groups = Vec::new();
        let mut weights = Vec::new();
        for (g, w) in self.groups.iter().zip(&self.weights) {
            if g.len() <= max_size {
                groups.push(g.clone());
                weights.push(*w);
            }
        }
        build_group_set(self.p, groups, weights)
    }

    /// Total width of the duplicated design, Σ_g |g|.
    pub fn duplicated_width(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }
}

/// Weight as a function of group size.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightScheme {
    /// d_k = 1.
    Uniform,
    /// d_k = √k.
    SqrtSize,
    /// d_k = k^(1/4).
    QuarticRoot,
    /// d_k = √(k + c·√k) for a nonnegative c. c = 0 recovers √k and the
    /// c → ∞ limit scales like k^(1/4).
    CScheme { c: f64 },
}

impl WeightScheme {
    /// Weight assigned to a group of size `k` (k ≥ 1).
    pub fn weight(&self, k: usize) -> f64 {
        let kf = k as f64;
        match self {
            WeightScheme::Uniform => 1.0,
            WeightScheme::SqrtSize => kf.sqrt(),
            WeightScheme::QuarticRoot => kf.powf(0.25),
            WeightScheme::CScheme { c } => (kf + c * kf.sqrt()).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let WeightScheme::CScheme { c } = self {
            if !c.is_finite() || *c < 0.0 {
                return Err(Error::invalid("c", format!("must be finite and >= 0, got {c}")));
            }
        }
        Ok(())
    }

    /// Short label used in report tables and file names.
    pub fn label(&self) -> String {
        match self {
            WeightScheme::Uniform => "uniform".into(),
            WeightScheme::SqrtSize => "sqrt_size".into(),
            WeightScheme::QuarticRoot => "quartic_root".into(),
            WeightScheme::CScheme { c } => format!("c_{c}"),
        }
    }
}

/// Binary covariate-by-group membership matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    p: usize,
    m: usize,
    data: Vec<u8>,
}

impl IncidenceMatrix {
    pub fn from_group_set(gs: &GroupSet) -> Self {
        let (p, m) = (gs.p(), gs.m());
        let mut data = vec![0u8; p * m];
        for (gid, g) in gs.groups().iter().enumerate() {
            for &i in g {
                data[i * m + gid] = 1;
            }
        }
        IncidenceMatrix { p, m, data }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn contains(&self, i: usize, gid: usize) -> bool {
        self.data[i * self.m + gid] == 1
    }

    /// Extracts the sub-matrix over the given covariate rows and group
    /// columns as float rows, for rank computations.
    pub fn sub_rows(&self, rows: &[usize], cols: &[usize]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|&i| {
                cols.iter()
                    .map(|&g| if self.contains(i, g) { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    }
}

/// Validates and canonicalizes a group collection.
///
/// Groups arrive as arbitrary index lists; they are sorted, checked
/// against `p`, and reordered canonically (size, then lexicographic).
/// Weights follow their groups through the reordering.
///
/// # Errors
///
/// [`Error::UncoveredCovariate`] when some covariate is in no group,
/// [`Error::NonpositiveWeight`] for a weight ≤ 0,
/// [`Error::DuplicateGroup`] when two groups have identical members,
/// plus range/emptiness checks. Positions in errors are 1-based and
/// refer to the input order.
pub fn build_group_set(p: usize, groups: Vec<Vec<usize>>, weights: Vec<f64>) -> Result<GroupSet> {
    if p == 0 {
        return Err(Error::invalid("p", "covariate count must be positive"));
    }
    if groups.len() != weights.len() {
        return Err(Error::invalid(
            "weights",
            format!("{} groups but {} weights", groups.len(), weights.len()),
        ));
    }
    if groups.is_empty() {
        return Err(Error::invalid("groups", "at least one group is required"));
    }

    let mut sorted: Vec<Vec<usize>> = Vec::with_capacity(groups.len());
    for (pos, mut g) in groups.into_iter().enumerate() {
        if g.is_empty() {
            return Err(Error::EmptyGroup(pos + 1));
        }
        g.sort_unstable();
        g.dedup();
        if let Some(&bad) = g.iter().find(|&&i| i >= p) {
            return Err(Error::IndexOutOfRange { index: bad + 1, p });
        }
        sorted.push(g);
    }
    for (pos, w) in weights.iter().enumerate() {
        if !w.is_finite() || *w <= 0.0 {
            return Err(Error::NonpositiveWeight {
                group: pos + 1,
                weight: *w,
            });
        }
    }
    // Duplicate detection against input positions, before canonical reorder.
    let mut seen: BTreeMap<&[usize], usize> = BTreeMap::new();
    for (pos, g) in sorted.iter().enumerate() {
        if let Some(&first) = seen.get(g.as_slice()) {
            return Err(Error::DuplicateGroup {
                first: first + 1,
                second: pos + 1,
            });
        }
        seen.insert(g.as_slice(), pos);
    }

    let mut order: Vec<usize> = (0..sorted.len()).collect();
    order.sort_by(|&a, &b| {
        (sorted[a].len(), &sorted[a]).cmp(&(sorted[b].len(), &sorted[b]))
    });
    let groups: Vec<Vec<usize>> = order.iter().map(|&i| sorted[i].clone()).collect();
    let weights: Vec<f64> = order.iter().map(|&i| weights[i]).collect();

    let mut covering = vec![Vec::new(); p];
    for (gid, g) in groups.iter().enumerate() {
        for &i in g {
            covering[i].push(gid);
        }
    }
    if let Some(i) = covering.iter().position(|c| c.is_empty()) {
        return Err(Error::UncoveredCovariate(i + 1));
    }

    Ok(GroupSet {
        p,
        groups,
        weights,
        covering,
    })
}

/// Replaces every weight by `scheme(|g|)`.
pub fn apply_weight_scheme(gs: &GroupSet, scheme: WeightScheme) -> Result<GroupSet> {
    scheme.validate()?;
    Ok(GroupSet {
        p: gs.p,
        groups: gs.groups.clone(),
        weights: gs.groups.iter().map(|g| scheme.weight(g.len())).collect(),
        covering: gs.covering.clone(),
    })
}

/// One size-2 group per edge, unit weights.
///
/// Vertices touched by no edge make the penalty infinite, so isolated
/// vertices are rejected.
pub fn groups_from_edges(p: usize, edges: &[(usize, usize)]) -> Result<GroupSet> {
    if edges.is_empty() {
        return Err(Error::UncoveredCovariate(1));
    }
    for &(u, v) in edges {
        if u == v {
            return Err(Error::InvalidEdge { u: u + 1, v: v + 1 });
        }
    }
    let groups: Vec<Vec<usize>> = edges.iter().map(|&(u, v)| vec![u, v]).collect();
    let weights = vec![1.0; groups.len()];
    build_group_set(p, groups, weights)
}

/// All contiguous windows of length `k` over the chain `0..p`, unit weights.
/// `k = 1` yields the all-singletons group set.
pub fn groups_from_chain_windows(p: usize, k: usize) -> Result<GroupSet> {
    if k == 0 || k > p {
        return Err(Error::invalid(
            "k",
            format!("window length must be in 1..={p}, got {k}"),
        ));
    }
    let groups: Vec<Vec<usize>> = (0..=p - k).map(|i| (i..i + k).collect()).collect();
    let weights = vec![1.0; groups.len()];
    build_group_set(p, groups, weights)
}

/// All contiguous windows of every length from 1 to `kmax`, unit weights.
pub fn groups_from_chain_windows_upto(p: usize, kmax: usize) -> Result<GroupSet> {
    if kmax == 0 || kmax > p {
        return Err(Error::invalid(
            "kmax",
            format!("max window length must be in 1..={p}, got {kmax}"),
        ));
    }
    let mut groups = Vec::new();
    for k in 1..=kmax {
        for i in 0..=p - k {
            groups.push((i..i + k).collect::<Vec<usize>>());
        }
    }
    let weights = vec![1.0; groups.len()];
    build_group_set(p, groups, weights)
}

/// Per-size verdict on the strict sandwich `d_{k-1} < d_k < √(k/(k-1))·d_{k-1}`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConditionCEntry {
    pub size: usize,
    pub lower_strict: bool,
    pub upper_strict: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConditionCReport {
    pub entries: Vec<ConditionCEntry>,
    pub all_hold: bool,
}

/// Checks, for each size k ≥ 2 present in the map, that the weight grows
/// strictly but slower than √(k/(k-1)) times the previous weight. Sizes
/// must be contiguous from 1.
pub fn check_condition_c(d_by_size: &BTreeMap<usize, f64>) -> Result<ConditionCReport> {
    let k_max = match d_by_size.keys().next_back() {
        Some(&k) => k,
        None => return Err(Error::MissingSize(1)),
    };
    for k in 1..=k_max {
        match d_by_size.get(&k) {
            None => return Err(Error::MissingSize(k)),
            Some(d) if !d.is_finite() || *d <= 0.0 => {
                return Err(Error::NonpositiveWeight {
                    group: k,
                    weight: *d,
                })
            }
            _ => {}
        }
    }
    let mut entries = Vec::new();
    for k in 2..=k_max {
        let prev = d_by_size[&(k - 1)];
        let cur = d_by_size[&k];
        let cap = (k as f64 / (k as f64 - 1.0)).sqrt() * prev;
        entries.push(ConditionCEntry {
            size: k,
            lower_strict: cur > prev,
            upper_strict: cur < cap,
        });
    }
    let all_hold = entries.iter().all(|e| e.lower_strict && e.upper_strict);
    Ok(ConditionCReport { entries, all_hold })
}

/// Sufficient test for a group being redundant: `H` covers `g` and the
/// squared weight of `g` strictly exceeds the summed squared weights of
/// `H`. A `false` only means this particular certificate does not apply.
pub fn is_redundant_sufficient(gs: &GroupSet, g: usize, h_ids: &[usize]) -> Result<bool> {
    let target = gs.group(g);
    let mut covered = vec![false; gs.p()];
    for &h in h_ids {
        for &i in gs.group(h) {
            covered[i] = true;
        }
    }
    if target.iter().any(|&i| !covered[i]) {
        return Err(Error::CoverViolation);
    }
    let sum_sq: f64 = h_ids.iter().map(|&h| gs.weight(h).powi(2)).sum();
    Ok(gs.weight(g).powi(2) > sum_sq)
}

/// Critical weight below which a group beats any |g|−1 of its unit-cost
/// singletons: d1·√(g_size − 1).
pub fn domination_threshold_singletons(g_size: usize, d1: f64) -> Result<f64> {
    if g_size < 2 {
        return Err(Error::invalid("g_size", "need at least 2 covariates"));
    }
    if !d1.is_finite() || d1 <= 0.0 {
        return Err(Error::invalid("d1", "singleton weight must be positive"));
    }
    Ok(d1 * ((g_size - 1) as f64).sqrt())
}

/// Smallest attainable ‖α_g‖ over dual points that saturate every group
/// in `H` exactly, i.e. min ‖α_g‖ subject to ‖α_h‖ = d_h for all h ∈ H.
///
/// Squaring coordinates turns this into a linear program over x_i = α_i² ≥ 0
/// with one equality per member of `H`. Small instances are solved exactly
/// by enumerating basic feasible solutions; larger ones fall back to a
/// Bland-rule simplex. Comparing the result against the weight of `g`
/// decides whether `g` can ever enter a weak support saturated by `H`.
pub fn domination_value_p(gs: &GroupSet, g: usize, h_ids: &[usize]) -> Result<f64> {
    if h_ids.is_empty() {
        return Err(Error::invalid("H", "need at least one constraining group"));
    }
    let target = gs.group(g);
    for &h in h_ids {
        if !gs.group(h).iter().all(|i| target.contains(i)) {
            return Err(Error::invalid(
                "H",
                format!("group {} is not contained in the dominated group", h + 1),
            ));
        }
    }
    // Variables are the squared dual coordinates over g's members.
    let cols: Vec<usize> = target.to_vec();
    let col_of = |i: usize| cols.binary_search(&i).unwrap();
    let a: Vec<Vec<f64>> = h_ids
        .iter()
        .map(|&h| {
            let mut row = vec![0.0; cols.len()];
            for &i in gs.group(h) {
                row[col_of(i)] = 1.0;
            }
            row
        })
        .collect();
    let b: Vec<f64> = h_ids.iter().map(|&h| gs.weight(h).powi(2)).collect();
    let c = vec![1.0; cols.len()];

    let value = if h_ids.len() <= 12
        && binomial(cols.len(), h_ids.len().min(cols.len())) <= 100_000
    {
        lp_min_by_vertex_enumeration(&a, &b, &c)?
    } else {
        match linalg::simplex(&a, &b, &c) {
            LpOutcome::Optimal { value, .. } => value,
            LpOutcome::Infeasible => return Err(Error::Infeasible),
            // Objective is a sum of nonnegative variables, bounded below.
            LpOutcome::Unbounded => unreachable!("nonnegative objective cannot be unbounded"),
        }
    };
    Ok(value.max(0.0).sqrt())
}

/// Exact minimum of `c'x` over `{Ax = b, x >= 0}` by checking every basic
/// solution. Rows of `A` may be dependent; inconsistency is reported as
/// infeasibility.
fn lp_min_by_vertex_enumeration(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<f64> {
    const TOL: f64 = 1e-9;
    let n = c.len();
    // Row-reduce [A | b] to find an independent subsystem.
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    let mut rank = 0;
    for col in 0..n {
        let pivot = (rank..aug.len()).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()));
        match pivot {
            Some(r) if aug[r][col].abs() > TOL => {
                aug.swap(rank, r);
                for i in 0..aug.len() {
                    if i != rank {
                        let f = aug[i][col] / aug[rank][col];
                        if f != 0.0 {
                            for k in col..=n {
                                let upd = aug[rank][k] * f;
                                aug[i][k] -= upd;
                            }
                        }
                    }
                }
                rank += 1;
            }
            _ => {}
        }
    }
    // A zero row with nonzero right-hand side has no solution.
    for row in aug.iter().skip(rank) {
        if row[n].abs() > TOL {
            return Err(Error::Infeasible);
        }
    }
    let reduced: Vec<Vec<f64>> = aug[..rank].iter().map(|r| r[..n].to_vec()).collect();
    let rhs: Vec<f64> = aug[..rank].iter().map(|r| r[n]).collect();

    let mut best: Option<f64> = None;
    let mut combo: Vec<usize> = (0..rank).collect();
    if rank == 0 {
        // No binding constraints; the origin is optimal.
        return Ok(0.0);
    }
    loop {
        let square: Vec<Vec<f64>> = reduced
            .iter()
            .map(|row| combo.iter().map(|&j| row[j]).collect())
            .collect();
        if let Some(xb) = linalg::solve_linear(square, rhs.clone(), 1e-12) {
            if xb.iter().all(|&v| v >= -TOL) {
                let obj: f64 = combo.iter().zip(&xb).map(|(&j, &v)| c[j] * v.max(0.0)).sum();
                if best.is_none_or(|cur| obj < cur) {
                    best = Some(obj);
                }
            }
        }
        // Next lexicographic combination of `rank` columns out of n.
        let mut i = rank;
        loop {
            if i == 0 {
                return best.ok_or(Error::Infeasible);
            }
            i -= 1;
            if combo[i] != i + n - rank {
                combo[i] += 1;
                for k in i + 1..rank {
                    combo[k] = combo[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    let mut num: u128 = 1;
    for i in 0..k {
        num = num.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if num > 1 << 100 {
            return u128::MAX;
        }
    }
    num
}
