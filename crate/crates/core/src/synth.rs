//! Synthetic benchmark generators and replicated experiment drivers:
//! chain-of-overlapping-groups designs, sliding-window group systems,
//! recovery and weight-scheme comparisons with cross-validated λ
//! selection, and a Monte Carlo probability used to sanity-check the
//! support behavior of the penalty under noise.

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{recovery_error, selection_frequency};
use crate::error::{Error, Result};
use crate::groups::{
    apply_weight_scheme, groups_from_chain_windows, groups_from_chain_windows_upto,
    build_group_set, GroupSet, WeightScheme,
};
use crate::linalg::DenseMatrix;
use crate::solver::{self, FitOptions, GridSpec, Loss, PathResult};

/// How the group system is laid out over the covariates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupLayout {
    /// `n_groups` consecutive blocks of `group_size` covariates, each
    /// sharing `overlap` covariates with the previous block.
    OverlapChain {
        group_size: usize,
        overlap: usize,
        n_groups: usize,
    },
    /// All contiguous windows of length `k`.
    Windows { k: usize },
    /// All contiguous windows of every length from 1 to `kmax`.
    WindowsUpto { kmax: usize },
}

impl GroupLayout {
    /// Builds the group system over `p` covariates with unit weights.
    pub fn group_set(&self, p: usize) -> Result<GroupSet> {
        match *self {
            GroupLayout::OverlapChain {
                group_size,
                overlap,
                n_groups,
            } => {
                if group_size == 0 || n_groups == 0 {
                    return Err(Error::invalid("layout", "empty chain layout"));
                }
                if overlap >= group_size {
                    return Err(Error::invalid(
                        "overlap",
                        format!("must be below group_size {group_size}, got {overlap}"),
                    ));
                }
                let stride = group_size - overlap;
                let expect_p = (n_groups - 1) * stride + group_size;
                if p != expect_p {
                    return Err(Error::invalid(
                        "p",
                        format!("chain layout covers {expect_p} covariates, got p = {p}"),
                    ));
                }
                let groups: Vec<Vec<usize>> = (0..n_groups)
                    .map(|g| (g * stride..g * stride + group_size).collect())
                    .collect();
                let weights = vec![1.0; n_groups];
                build_group_set(p, groups, weights)
            }
            GroupLayout::Windows { k } => groups_from_chain_windows(p, k),
            GroupLayout::WindowsUpto { kmax } => groups_from_chain_windows_upto(p, kmax),
        }
    }
}

/// Where the true coefficients live, in 1-based human-facing indexing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupportSpec {
    /// Union of the listed groups (1-based ids in canonical order).
    Groups { ids: Vec<usize> },
    /// Union of inclusive 1-based covariate intervals.
    Intervals { ranges: Vec<[usize; 2]> },
}

impl SupportSpec {
    /// Resolves to sorted 0-based covariate indices.
    pub fn resolve(&self, gs: &GroupSet) -> Result<Vec<usize>> {
        let mut out: Vec<usize> = match self {
            SupportSpec::Groups { ids } => {
                let mut cov = Vec::new();
                for &id in ids {
                    if id == 0 || id > gs.m() {
                        return Err(Error::invalid(
                            "support",
                            format!("group id {id} outside 1..={}", gs.m()),
                        ));
                    }
                    cov.extend_from_slice(gs.group(id - 1));
                }
                cov
            }
            SupportSpec::Intervals { ranges } => {
                let mut cov = Vec::new();
                for r in ranges {
                    let [lo, hi] = *r;
                    if lo == 0 || lo > hi || hi > gs.p() {
                        return Err(Error::invalid(
                            "support",
                            format!("interval [{lo}, {hi}] outside 1..={}", gs.p()),
                        ));
                    }
                    cov.extend(lo - 1..hi);
                }
                cov
            }
        };
        out.sort_unstable();
        out.dedup();
        if out.is_empty() {
            return Err(Error::invalid("support", "resolved support is empty"));
        }
        Ok(out)
    }
}

/// Noise level rule for the generated responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseRule {
    Fixed { sigma: f64 },
    /// σ = |mean of the noiseless training responses|.
    AbsMeanSignal,
}

/// Full description of one synthetic problem family.
///
/// Coefficients on the support and the offset are standard normal; the
/// design is i.i.d. standard normal. All draws for replicate r come
/// from a stream keyed by (seed, r), so adding replicates never
/// reshuffles earlier ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub p: usize,
    pub layout: GroupLayout,
    pub support: SupportSpec,
    pub n: usize,
    pub noise: NoiseRule,
    pub seed: u64,
}

/// One generated training set.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DenseMatrix,
    pub y: Vec<f64>,
    pub w_true: Vec<f64>,
    pub b_true: f64,
    pub sigma: f64,
    /// Sorted 0-based true support.
    pub support: Vec<usize>,
    /// Layout groups with unit weights.
    pub groups: GroupSet,
}

/// Held-out rows drawn from the same replicate stream.
#[derive(Debug, Clone)]
pub struct TestSet {
    pub x: DenseMatrix,
    pub y: Vec<f64>,
}

fn replicate_rng(master_seed: u64, replicate: usize) -> ChaCha12Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&(replicate as u64).to_le_bytes());
    seed[16..24].copy_from_slice(b"synthrep");
    ChaCha12Rng::from_seed(seed)
}

fn draw_matrix(rng: &mut ChaCha12Rng, n: usize, p: usize) -> DenseMatrix {
    let mut x = DenseMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x.set(i, j, rng.sample(StandardNormal));
        }
    }
    x
}

/// Generates replicate `replicate` of `spec`, with `n_test` held-out
/// rows (zero for none). Draw order is fixed: support coefficients,
/// offset, training design row-major, training noise, then the test
/// rows and their noise, so the training data does not depend on
/// `n_test`.
pub fn generate_replicate(
    spec: &SynthSpec,
    replicate: usize,
    n_test: usize,
) -> Result<(Dataset, Option<TestSet>)> {
    if spec.n == 0 {
        return Err(Error::invalid("n", "at least one training row required"));
    }
    if let NoiseRule::Fixed { sigma } = spec.noise {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::invalid("sigma", "must be finite and >= 0"));
        }
    }
    let groups = spec.layout.group_set(spec.p)?;
    let support = spec.support.resolve(&groups)?;
    let mut rng = replicate_rng(spec.seed, replicate);

    let mut w_true = vec![0.0; spec.p];
    for &i in &support {
        w_true[i] = rng.sample(StandardNormal);
    }
    let b_true: f64 = rng.sample(StandardNormal);
    let x = draw_matrix(&mut rng, spec.n, spec.p);
    let eps: Vec<f64> = (0..spec.n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();

    let mut signal = x.matvec(&w_true);
    for t in signal.iter_mut() {
        *t += b_true;
    }
    let sigma = match spec.noise {
        NoiseRule::Fixed { sigma } => sigma,
        NoiseRule::AbsMeanSignal => {
            (signal.iter().sum::<f64>() / spec.n as f64).abs()
        }
    };
    let y: Vec<f64> = signal.iter().zip(&eps).map(|(&s, &e)| s + sigma * e).collect();

    let test = if n_test > 0 {
        let xt = draw_matrix(&mut rng, n_test, spec.p);
        let mut signal_t = xt.matvec(&w_true);
        for t in signal_t.iter_mut() {
            *t += b_true;
        }
        let yt: Vec<f64> = signal_t
            .iter()
            .map(|&s| s + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Some(TestSet { x: xt, y: yt })
    } else {
        None
    };

    Ok((
        Dataset {
            x,
            y,
            w_true,
            b_true,
            sigma,
            support,
            groups,
        },
        test,
    ))
}

/// First replicate, no test set.
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    Ok(generate_replicate(spec, 0, 0)?.0)
}

/// Experiment driver knobs.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub n_replicates: usize,
    pub n_test: usize,
    /// Folds for the within-replicate cross-validated λ choice.
    pub cv_folds: usize,
    pub fit: FitOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            n_replicates: 1,
            n_test: 100,
            cv_folds: 5,
            fit: FitOptions {
                intercept: true,
                ..FitOptions::default()
            },
        }
    }
}

/// Everything recorded for one replicate, per grid point unless noted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    /// Selected covariates (0-based) at each λ.
    pub selected: Vec<Vec<usize>>,
    /// Groups with a nonzero latent block at each λ.
    pub group_supports: Vec<Vec<usize>>,
    pub recovery_errors: Vec<f64>,
    pub exact_pattern: Vec<bool>,
    pub test_mse: Vec<f64>,
    pub lambda_star: f64,
    pub lambda_star_index: usize,
    pub mse_star: f64,
    pub model_size_star: usize,
    pub rec_err_star: f64,
    pub rec_err_min: f64,
}

/// Replicate means; λ* is aggregated geometrically since the grid is.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub mse_star: f64,
    pub lambda_star: f64,
    pub model_size: f64,
    pub rec_err_star: f64,
    pub rec_err_min: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub grid: Vec<f64>,
    pub lambda_max: f64,
    /// Sorted 0-based true support shared by all replicates.
    pub true_support: Vec<usize>,
    pub replicates: Vec<ReplicateRecord>,
    /// p × grid selection frequencies.
    pub frequencies: Vec<Vec<f64>>,
    /// Fraction of replicates whose selection equals the true support,
    /// per grid point.
    pub exact_pattern_frequency: Vec<f64>,
    pub summary: ExperimentSummary,
}

fn cv_fold_indices(n: usize, folds: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); folds];
    for i in 0..n {
        out[i % folds].push(i);
    }
    out
}

fn rows_subset(x: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    let rows_data: Vec<Vec<f64>> = rows.iter().map(|&i| x.row(i)).collect();
    DenseMatrix::from_rows(&rows_data)
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter()
        .zip(y)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64
}

fn predict(x: &DenseMatrix, w: &[f64], b: f64) -> Vec<f64> {
    let mut out = x.matvec(w);
    for t in out.iter_mut() {
        *t += b;
    }
    out
}

fn replicate_run(
    spec: &SynthSpec,
    gs: &GroupSet,
    grid: &[f64],
    lambda_max_shared: f64,
    opts: &RunOptions,
    replicate: usize,
) -> Result<(ReplicateRecord, PathResult)> {
    let (ds, test) = generate_replicate(spec, replicate, opts.n_test)?;
    let test = test.expect("n_test validated positive");
    let path = solver::path_on_grid(
        &ds.x,
        &ds.y,
        Loss::Squared,
        gs,
        grid,
        lambda_max_shared,
        &opts.fit,
    )?;

    let k_points = grid.len();
    let mut selected = Vec::with_capacity(k_points);
    let mut group_supports = Vec::with_capacity(k_points);
    let mut recovery_errors = Vec::with_capacity(k_points);
    let mut exact_pattern = Vec::with_capacity(k_points);
    let mut test_mse = Vec::with_capacity(k_points);
    for f in &path.fits {
        let sel = f.selected_covariates();
        recovery_errors.push(recovery_error(&sel, &ds.support, spec.p)?);
        exact_pattern.push(sel == ds.support);
        group_supports.push(f.selected_groups());
        test_mse.push(mse(&predict(&test.x, &f.w, f.intercept), &test.y));
        selected.push(sel);
    }

    // Cross-validated λ: mean held-out MSE per grid point over folds.
    let folds = cv_fold_indices(spec.n, opts.cv_folds);
    let mut cv_mse = vec![0.0; k_points];
    for fold in &folds {
        let keep: Vec<usize> = (0..spec.n).filter(|i| !fold.contains(i)).collect();
        let x_tr = rows_subset(&ds.x, &keep);
        let y_tr: Vec<f64> = keep.iter().map(|&i| ds.y[i]).collect();
        let x_ho = rows_subset(&ds.x, fold);
        let y_ho: Vec<f64> = fold.iter().map(|&i| ds.y[i]).collect();
        let fold_path = solver::path_on_grid(
            &x_tr,
            &y_tr,
            Loss::Squared,
            gs,
            grid,
            lambda_max_shared,
            &opts.fit,
        )?;
        for (k, f) in fold_path.fits.iter().enumerate() {
            cv_mse[k] += mse(&predict(&x_ho, &f.w, f.intercept), &y_ho) / folds.len() as f64;
        }
    }
    let lambda_star_index = cv_mse
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);

    let rec_err_min = recovery_errors.iter().copied().fold(f64::INFINITY, f64::min);
    let record = ReplicateRecord {
        replicate,
        lambda_star: grid[lambda_star_index],
        lambda_star_index,
        mse_star: test_mse[lambda_star_index],
        model_size_star: selected[lambda_star_index].len(),
        rec_err_star: recovery_errors[lambda_star_index],
        rec_err_min,
        selected,
        group_supports,
        recovery_errors,
        exact_pattern,
        test_mse,
    };
    Ok((record, path))
}

fn run_with_groups(
    spec: &SynthSpec,
    gs: &GroupSet,
    grid_spec: &GridSpec,
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    if opts.n_replicates == 0 {
        return Err(Error::invalid("n_replicates", "need at least one replicate"));
    }
    if opts.n_test == 0 {
        return Err(Error::invalid("n_test", "need at least one test row"));
    }
    if opts.cv_folds < 2 || opts.cv_folds > spec.n {
        return Err(Error::invalid(
            "cv_folds",
            format!("need 2..=n folds, got {} with n = {}", opts.cv_folds, spec.n),
        ));
    }
    let truth = spec.support.resolve(gs)?;

    // The grid must be shared across replicates for frequencies to be
    // comparable, so relative grids hang off the largest λ_max seen.
    let lambda_max_shared = (0..opts.n_replicates)
        .into_par_iter()
        .map(|r| {
            let (ds, _) = generate_replicate(spec, r, 0)?;
            solver::lambda_max(&ds.x, &ds.y, Loss::Squared, gs, opts.fit.intercept)
        })
        .try_reduce(|| 0.0f64, |a, b| Ok(a.max(b)))?;
    let grid = grid_spec.build(lambda_max_shared)?;

    let mut runs: Vec<(ReplicateRecord, PathResult)> = (0..opts.n_replicates)
        .into_par_iter()
        .map(|r| replicate_run(spec, gs, &grid, lambda_max_shared, opts, r))
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|(rec, _)| rec.replicate);

    let paths: Vec<PathResult> = runs.iter().map(|(_, p)| p.clone()).collect();
    let frequencies = selection_frequency(&paths, spec.p)?;
    let records: Vec<ReplicateRecord> = runs.into_iter().map(|(rec, _)| rec).collect();

    let r_f = records.len() as f64;
    let exact_pattern_frequency: Vec<f64> = (0..grid.len())
        .map(|k| records.iter().filter(|r| r.exact_pattern[k]).count() as f64 / r_f)
        .collect();
    let summary = ExperimentSummary {
        mse_star: records.iter().map(|r| r.mse_star).sum::<f64>() / r_f,
        lambda_star: (records.iter().map(|r| r.lambda_star.ln()).sum::<f64>() / r_f).exp(),
        model_size: records.iter().map(|r| r.model_size_star as f64).sum::<f64>() / r_f,
        rec_err_star: records.iter().map(|r| r.rec_err_star).sum::<f64>() / r_f,
        rec_err_min: records.iter().map(|r| r.rec_err_min).sum::<f64>() / r_f,
    };
    Ok(ExperimentReport {
        grid,
        lambda_max: lambda_max_shared,
        true_support: truth,
        replicates: records,
        frequencies,
        exact_pattern_frequency,
        summary,
    })
}

/// Replicated support-recovery experiment with the layout's own groups
/// (unit weights).
pub fn run_recovery_experiment(
    spec: &SynthSpec,
    grid_spec: &GridSpec,
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    let gs = spec.layout.group_set(spec.p)?;
    run_with_groups(spec, &gs, grid_spec, opts)
}

/// The recovery experiment repeated once per weighting scheme on
/// identical data, returning (scheme label, report) pairs.
pub fn run_weight_experiment(
    spec: &SynthSpec,
    schemes: &[WeightScheme],
    grid_spec: &GridSpec,
    opts: &RunOptions,
) -> Result<Vec<(String, ExperimentReport)>> {
    if schemes.is_empty() {
        return Err(Error::invalid("schemes", "at least one scheme required"));
    }
    let base = spec.layout.group_set(spec.p)?;
    let mut out = Vec::with_capacity(schemes.len());
    for scheme in schemes {
        let gs = apply_weight_scheme(&base, *scheme)?;
        let report = run_with_groups(spec, &gs, grid_spec, opts)?;
        out.push((scheme.label(), report));
    }
    Ok(out)
}

fn absolute_sum_event(e1: f64, e2: f64, e3: f64) -> bool {
    e1.abs() + e2.abs() < e3.abs()
}

/// Monte Carlo estimate of P(|ε₁| + |ε₂| < |ε₃|) for independent
/// standard normals: the chance that noise alone hands one group's
/// entire mass to its neighbors, dropping it from the support.
pub fn support_drop_probability(n_samples: u64, seed: u64) -> f64 {
    assert!(n_samples >= 1, "need at least one sample");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..n_samples {
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let e3: f64 = rng.sample(StandardNormal);
        if absolute_sum_event(e1, e2, e3) {
            hits += 1;
        }
    }
    hits as f64 / n_samples as f64
}
