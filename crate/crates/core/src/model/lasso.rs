use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::DocumentTermMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    pub folds: usize,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    /// Stop when the largest curvature-weighted squared coefficient move in
    /// a sweep falls below `tol` times the target variance.
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
    /// Skip cross-validation and fit at this penalty.
    pub lambda: Option<f64>,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            folds: 10,
            n_lambda: 100,
            lambda_min_ratio: 1e-4,
            tol: 1e-7,
            max_sweeps: 100_000,
            seed: 20_240_601,
            lambda: None,
        }
    }
}

struct Prepared {
    entries: Vec<(usize, f64)>,
    sum: f64,
    mean: f64,
    scale: f64,
    /// (1/n)·Σ z², with z the centered and scaled column.
    curvature: f64,
}

/// Coordinate descent for
/// `(1/2n)‖y − b0 − Zβ‖² + λ‖β‖₁`
/// with an unpenalized intercept and implicitly centered sparse columns.
/// Columns flagged for standardization are scaled to unit population
/// variance; the others are only centered.
pub struct CdSolver {
    n: usize,
    cols: Vec<Prepared>,
    y_mean: f64,
    y_sd: f64,
    beta: Vec<f64>,
    // r = r_raw + shift, where r_raw = yc − Σ (β_j / s_j) x_j.
    r_raw: Vec<f64>,
    r_raw_sum: f64,
    shift: f64,
    sweeps: usize,
}

impl CdSolver {
    pub fn new(columns: Vec<Vec<(usize, f64)>>, standardize: &[bool], y: &[f64]) -> Result<Self> {
        let n = y.len();
        if standardize.len() != columns.len() {
            return Err(Error::validation("standardize flags do not match columns"));
        }
        if n < 2 {
            return Err(Error::validation("lasso needs at least two rows"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite lasso target"));
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let y_var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        if !(y_var > 0.0) {
            return Err(Error::DegenerateTarget);
        }
        let cols = columns
            .into_iter()
            .zip(standardize)
            .map(|(entries, &std)| {
                if entries.iter().any(|&(r, v)| r >= n || !v.is_finite()) {
                    return Err(Error::validation("design column out of range or non-finite"));
                }
                let sum: f64 = entries.iter().map(|e| e.1).sum();
                let mean = sum / n as f64;
                let ss: f64 = entries.iter().map(|e| e.1 * e.1).sum();
                let var = (ss / n as f64 - mean * mean).max(0.0);
                let scale = if std && var > 0.0 { var.sqrt() } else { 1.0 };
                Ok(Prepared { entries, sum, mean, scale, curvature: var / (scale * scale) })
            })
            .collect::<Result<Vec<_>>>()?;
        let r_raw: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let r_raw_sum = r_raw.iter().sum();
        Ok(CdSolver {
            n,
            beta: vec![0.0; cols.len()],
            cols,
            y_mean,
            y_sd: y_var.sqrt(),
            r_raw,
            r_raw_sum,
            shift: 0.0,
            sweeps: 0,
        })
    }

    fn usable(&self, j: usize) -> bool {
        self.cols[j].curvature > 1e-14
    }

    /// (1/n)·z_jᵀ r
    fn gradient(&self, j: usize) -> f64 {
        let c = &self.cols[j];
        let xr: f64 = c.entries.iter().map(|&(i, v)| v * self.r_raw[i]).sum::<f64>() + self.shift * c.sum;
        let r_sum = self.r_raw_sum + self.n as f64 * self.shift;
        (xr - c.mean * r_sum) / (c.scale * self.n as f64)
    }

    fn update(&mut self, j: usize, new: f64) {
        let delta = new - self.beta[j];
        if delta == 0.0 {
            return;
        }
        let c = &self.cols[j];
        let d = delta / c.scale;
        for &(i, v) in &c.entries {
            self.r_raw[i] -= d * v;
        }
        self.r_raw_sum -= d * c.sum;
        self.shift += d * c.mean;
        self.beta[j] = new;
    }

    pub fn lambda_max(&self) -> f64 {
        (0..self.cols.len())
            .filter(|&j| self.usable(j))
            .map(|j| self.gradient(j).abs())
            .fold(0.0, f64::max)
    }

    pub fn objective(&self, lambda: f64) -> f64 {
        let rss: f64 = self.r_raw.iter().map(|r| (r + self.shift).powi(2)).sum();
        rss / (2.0 * self.n as f64) + lambda * self.beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    fn sweep(&mut self, lambda: f64, set: &[usize]) -> f64 {
        let mut max_change = 0.0_f64;
        for &j in set {
            let curv = self.cols[j].curvature;
            let rho = self.gradient(j) + curv * self.beta[j];
            let new = soft_threshold(rho, lambda) / curv;
            max_change = max_change.max(curv * (new - self.beta[j]).powi(2));
            self.update(j, new);
        }
        max_change
    }

    /// Minimizes at `lambda`, warm-starting from the current coefficients.
    /// Sweeps the active set to convergence, then confirms with a full
    /// sweep. Errors if the objective rises in any sweep.
    pub fn solve(&mut self, lambda: f64, tol: f64, max_sweeps: usize) -> Result<()> {
        let all: Vec<usize> = (0..self.cols.len()).filter(|&j| self.usable(j)).collect();
        let threshold = tol * self.y_sd * self.y_sd;
        let mut before = self.objective(lambda);
        let mut sweeps = 0;
        let check = |s: &mut CdSolver, sweeps: usize, before: &mut f64| -> Result<()> {
            let after = s.objective(lambda);
            if after > *before + 1e-12 * before.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::ObjectiveIncrease { sweep: sweeps, before: *before, after });
            }
            *before = after;
            Ok(())
        };
        loop {
            let change = self.sweep(lambda, &all);
            sweeps += 1;
            check(self, sweeps, &mut before)?;
            if change <= threshold {
                break;
            }
            let active: Vec<usize> = all.iter().copied().filter(|&j| self.beta[j] != 0.0).collect();
            loop {
                if sweeps >= max_sweeps {
                    return Err(Error::NonConvergence { sweeps, lambda, max_change: change });
                }
                let c = self.sweep(lambda, &active);
                sweeps += 1;
                check(self, sweeps, &mut before)?;
                if c <= threshold {
                    break;
                }
            }
            if sweeps >= max_sweeps {
                return Err(Error::NonConvergence { sweeps, lambda, max_change: change });
            }
        }
        self.sweeps += sweeps;
        Ok(())
    }

    /// Intercept and coefficients on the original column scale.
    pub fn coefficients(&self) -> (f64, Vec<f64>) {
        let coef: Vec<f64> = self.beta.iter().zip(&self.cols).map(|(b, c)| b / c.scale).collect();
        let b0 = self.y_mean - coef.iter().zip(&self.cols).map(|(b, c)| b * c.mean).sum::<f64>();
        (b0, coef)
    }

    pub fn total_sweeps(&self) -> usize {
        self.sweeps
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Lasso on dense columns at a fixed penalty; returns (intercept,
/// coefficients) on the original scale.
pub fn lasso_dense(
    columns: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    standardize: bool,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let sparse: Vec<Vec<(usize, f64)>> = columns
        .iter()
        .map(|c| c.iter().copied().enumerate().filter(|e| e.1 != 0.0).collect())
        .collect();
    let mut s = CdSolver::new(sparse, &vec![standardize; columns.len()], y)?;
    s.solve(lambda, tol, 1_000_000)?;
    Ok(s.coefficients())
}

/// Log-spaced penalties from `lambda_max` down to `lambda_max·ratio`.
pub fn lambda_grid(lambda_max: f64, n: usize, ratio: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lambda_max];
    }
    let (hi, lo) = (lambda_max.ln(), (lambda_max * ratio).ln());
    (0..n).map(|k| (hi + (lo - hi) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Token columns plus one dummy per sector, in that order.
struct Design {
    columns: Vec<Vec<(usize, f64)>>,
    standardize: Vec<bool>,
    sectors: Vec<String>,
}

fn design_for(dtm: &DocumentTermMatrix, rows: &[usize], sectors: &[String]) -> Design {
    let sub = dtm.select_rows(rows);
    let mut columns: Vec<Vec<(usize, f64)>> = sub
        .columns()
        .into_iter()
        .map(|c| c.into_iter().map(|(r, v)| (r, f64::from(v))).collect())
        .collect();
    let mut standardize = vec![true; columns.len()];
    for s in sectors {
        columns.push(
            sub.sector_of_row.iter().enumerate().filter(|(_, x)| *x == s).map(|(r, _)| (r, 1.0)).collect(),
        );
        standardize.push(false);
    }
    Design { columns, standardize, sectors: sectors.to_vec() }
}

fn sorted_sectors(dtm: &DocumentTermMatrix, rows: &[usize]) -> Vec<String> {
    let mut s: Vec<String> = rows.iter().map(|&r| dtm.sector_of_row[r].clone()).collect();
    s.sort();
    s.dedup();
    s
}

/// Fitted text model: per-sector intercepts and token coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub vocabulary: Vec<String>,
    pub coefficients: Vec<f64>,
    pub sector_intercepts: BTreeMap<String, f64>,
    pub lambda: f64,
    pub lambda_max: f64,
    pub r_squared: f64,
    pub n_obs: usize,
    pub seed: u64,
    pub cv_mse: Vec<(f64, f64)>,
}

impl LassoFit {
    pub fn nonzero(&self) -> Vec<(&str, f64)> {
        self.vocabulary
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, &b)| b != 0.0)
            .map(|(t, &b)| (t.as_str(), b))
            .collect()
    }

    /// Intercept used for a sector. An unseen sector gets the mean of the
    /// fitted intercepts; the flag says so.
    pub fn intercept_for(&self, sector: &str) -> (f64, bool) {
        match self.sector_intercepts.get(sector) {
            Some(&v) => (v, false),
            None => {
                let n = self.sector_intercepts.len().max(1) as f64;
                (self.sector_intercepts.values().sum::<f64>() / n, true)
            }
        }
    }
}

fn fit_rows(
    dtm: &DocumentTermMatrix,
    y: &[f64],
    rows: &[usize],
    sectors: &[String],
    lambdas: &[f64],
    opts: &LassoOptions,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let d = design_for(dtm, rows, sectors);
    let target: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
    let mut solver = CdSolver::new(d.columns, &d.standardize, &target)?;
    let mut path = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        solver.solve(l, opts.tol, opts.max_sweeps)?;
        path.push(solver.coefficients());
    }
    Ok(path)
}

fn predict(dtm: &DocumentTermMatrix, r: usize, sectors: &[String], b0: f64, coef: &[f64]) -> f64 {
    let p = dtm.n_cols();
    let (idx, cnt) = dtm.row(r);
    let mut v = b0 + idx.iter().zip(cnt).map(|(&j, &c)| coef[j] * f64::from(c)).sum::<f64>();
    if let Ok(k) = sectors.binary_search(&dtm.sector_of_row[r]) {
        v += coef[p + k];
    }
    v
}

/// Deterministic fold label per row from a seeded permutation.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &r) in perm.iter().enumerate() {
        fold[r] = pos % folds;
    }
    fold
}

/// Lasso of `target` on the matrix's token counts plus sector dummies,
/// with the penalty picked by K-fold cross-validation (minimum mean
/// out-of-fold MSE). Token columns are standardized inside the fit;
/// sector dummies are penalized like every other regressor.
pub fn fit_lasso(dtm: &DocumentTermMatrix, target: &[f64], opts: &LassoOptions) -> Result<LassoFit> {
    let n = dtm.n_rows();
    if target.len() != n {
        return Err(Error::validation(format!("{} targets for {n} rows", target.len())));
    }
    if opts.lambda.is_none() && n < opts.folds.max(2) {
        return Err(Error::validation(format!("{n} rows is fewer than {} folds", opts.folds)));
    }
    let rows: Vec<usize> = (0..n).collect();
    let sectors = sorted_sectors(dtm, &rows);
    let d = design_for(dtm, &rows, &sectors);
    let lambda_max = CdSolver::new(d.columns, &d.standardize, target)?.lambda_max();

    let (lambda, cv_mse) = match opts.lambda {
        Some(l) => (l, Vec::new()),
        None => {
            let grid = lambda_grid(lambda_max.max(f64::MIN_POSITIVE), opts.n_lambda, opts.lambda_min_ratio);
            let fold = fold_assignment(n, opts.folds, opts.seed);
            let per_fold: Vec<Vec<f64>> = (0..opts.folds)
                .into_par_iter()
                .map(|k| {
                    let train: Vec<usize> = rows.iter().copied().filter(|&r| fold[r] != k).collect();
                    let test: Vec<usize> = rows.iter().copied().filter(|&r| fold[r] == k).collect();
                    let path = fit_rows(dtm, target, &train, &sectors, &grid, opts)?;
                    Ok(path
                        .iter()
                        .map(|(b0, coef)| {
                            test.iter()
                                .map(|&r| (target[r] - predict(dtm, r, &sectors, *b0, coef)).powi(2))
                                .sum::<f64>()
                        })
                        .collect())
                })
                .collect::<Result<_>>()?;
            let cv: Vec<(f64, f64)> = grid
                .iter()
                .enumerate()
                .map(|(i, &l)| (l, per_fold.iter().map(|f| f[i]).sum::<f64>() / n as f64))
                .collect();
            let best = cv.iter().enumerate().fold(0, |b, (i, c)| if c.1 < cv[b].1 { i } else { b });
            let path: Vec<f64> = grid[..=best].to_vec();
            (*path.last().unwrap(), cv)
        }
    };

    // Refit on all rows along the grid down to the chosen penalty.
    let path: Vec<f64> = if opts.lambda.is_none() {
        cv_mse.iter().map(|c| c.0).take_while(|&l| l >= lambda).collect()
    } else {
        vec![lambda]
    };
    let (b0, coef) = fit_rows(dtm, target, &rows, &sectors, &path, opts)?.pop().unwrap();
    let p = dtm.n_cols();
    let resid: Vec<f64> = rows.iter().map(|&r| target[r] - predict(dtm, r, &sectors, b0, &coef)).collect();
    let sector_intercepts = d
        .sectors
        .iter()
        .enumerate()
        .map(|(k, s)| (s.clone(), b0 + coef[p + k]))
        .collect();
    Ok(LassoFit {
        vocabulary: dtm.vocabulary.clone(),
        coefficients: coef[..p].to_vec(),
        sector_intercepts,
        lambda,
        lambda_max,
        r_squared: r_squared(target, &resid),
        n_obs: n,
        seed: opts.seed,
        cv_mse,
    })
}

/// `1 − var(residual)/var(target)`.
pub fn r_squared(target: &[f64], residual: &[f64]) -> f64 {
    1.0 - crate::stats::variance(residual) / crate::stats::variance(target)
}

/// Sector intercept plus the token contribution. Tokens outside the fit's
/// vocabulary count as zero. The flag marks an unseen sector.
pub fn implied_pvlgd(fit: &LassoFit, counts: &[(String, u32)], sector: &str) -> (f64, bool) {
    let (mut v, flagged) = fit.intercept_for(sector);
    let index: BTreeMap<&str, usize> =
        fit.vocabulary.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    for (t, c) in counts {
        if let Some(&j) = index.get(t.as_str()) {
            v += fit.coefficients[j] * f64::from(*c);
        }
    }
    (v, flagged)
}

/// Implied PVLGD for every row of a matrix, matched to the fit by token.
pub fn implied_for_rows(fit: &LassoFit, dtm: &DocumentTermMatrix) -> Vec<(f64, bool)> {
    let index: BTreeMap<&str, usize> =
        fit.vocabulary.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let map: Vec<Option<usize>> = dtm.vocabulary.iter().map(|t| index.get(t.as_str()).copied()).collect();
    (0..dtm.n_rows())
        .map(|r| {
            let (mut v, flagged) = fit.intercept_for(&dtm.sector_of_row[r]);
            let (idx, cnt) = dtm.row(r);
            for (&j, &c) in idx.iter().zip(cnt) {
                if let Some(k) = map[j] {
                    v += fit.coefficients[k] * f64::from(c);
                }
            }
            (v, flagged)
        })
        .collect()
}

/// Positive means the market prices more credit risk than the call's
/// language implies.
pub fn credit_score(actual_pvlgd: f64, implied_pvlgd: f64) -> f64 {
    actual_pvlgd - implied_pvlgd
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Document;

    fn ols(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let p = cols.len() + 1;
        let x = nalgebra::DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
        let yv = nalgebra::DVector::from_column_slice(y);
        let b = (x.transpose() * &x).lu().solve(&(x.transpose() * yv)).unwrap();
        b.iter().copied().collect()
    }

    fn small_problem() -> (Vec<Vec<f64>>, Vec<f64>) {
        let cols: Vec<Vec<f64>> =
            (0..3).map(|j| (0..40).map(|i| ((i * (j + 2) + j * 5) % 9) as f64 + 0.1 * j as f64).collect()).collect();
        let y: Vec<f64> =
            (0..40).map(|i| 1.0 + 0.5 * cols[0][i] - 0.3 * cols[2][i] + ((i * 7) % 5) as f64 * 0.1).collect();
        (cols, y)
    }

    #[test]
    fn zero_penalty_is_ols() {
        let (cols, y) = small_problem();
        let (b0, b) = lasso_dense(&cols, &y, 0.0, true, 1e-26).unwrap();
        let o = ols(&cols, &y);
        assert!((b0 - o[0]).abs() < 1e-6);
        for j in 0..3 {
            assert!((b[j] - o[j + 1]).abs() < 1e-6);
        }
    }

    #[test]
    fn penalty_above_lambda_max_zeroes_everything() {
        let (cols, y) = small_problem();
        let sparse: Vec<Vec<(usize, f64)>> =
            cols.iter().map(|c| c.iter().copied().enumerate().collect()).collect();
        let lmax = CdSolver::new(sparse, &[true; 3], &y).unwrap().lambda_max();
        let (b0, b) = lasso_dense(&cols, &y, lmax, true, 1e-24).unwrap();
        assert!(b.iter().all(|&v| v == 0.0));
        assert!((b0 - crate::stats::mean(&y)).abs() < 1e-12);
        let (_, b) = lasso_dense(&cols, &y, lmax * 0.99, true, 1e-24).unwrap();
        assert!(b.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn grid_is_log_spaced() {
        let g = lambda_grid(2.0, 100, 1e-4);
        assert_eq!(g.len(), 100);
        assert!((g[0] - 2.0).abs() < 1e-12);
        assert!((g[99] - 2e-4).abs() < 1e-15);
        assert!((g[1] / g[0] - g[50] / g[49]).abs() < 1e-12);
    }

    #[test]
    fn folds_depend_only_on_seed() {
        assert_eq!(fold_assignment(57, 10, 3), fold_assignment(57, 10, 3));
        assert_ne!(fold_assignment(57, 10, 3), fold_assignment(57, 10, 4));
        let f = fold_assignment(57, 10, 3);
        for k in 0..10 {
            let size = f.iter().filter(|&&x| x == k).count();
            assert!(size == 5 || size == 6);
        }
    }

    fn toy_dtm(n: usize) -> (DocumentTermMatrix, Vec<f64>) {
        let docs: Vec<Document> = (0..n)
            .map(|i| {
                let a = (i % 5) as u32;
                let b = ((i * 3) % 4) as u32;
                let mut counts = Vec::new();
                if a > 0 {
                    counts.push(("debt".to_string(), a));
                }
                if b > 0 {
                    counts.push(("loan".to_string(), b));
                }
                Document { id: format!("c{i}"), sector: ["x", "y"][i % 2].into(), counts }
            })
            .collect();
        let vocab = vec!["debt".to_string(), "loan".to_string()];
        let m = DocumentTermMatrix::project(&docs, &vocab);
        let y: Vec<f64> = (0..n)
            .map(|i| 10.0 + 2.0 * (i % 5) as f64 + if i % 2 == 1 { 3.0 } else { 0.0 })
            .collect();
        (m, y)
    }

    #[test]
    fn planted_fit_and_scores() {
        let (m, y) = toy_dtm(80);
        let fit = fit_lasso(&m, &y, &LassoOptions::default()).unwrap();
        assert!(fit.r_squared > 0.999, "{}", fit.r_squared);
        let implied = implied_for_rows(&fit, &m);
        let resid: Vec<f64> = y.iter().zip(&implied).map(|(a, b)| a - b.0).collect();
        assert!((r_squared(&y, &resid) - fit.r_squared).abs() < 1e-12);
        let (v, flagged) = implied_pvlgd(&fit, &[], "x");
        assert_eq!(v, fit.sector_intercepts["x"]);
        assert!(!flagged);
        let (_, flagged) = implied_pvlgd(&fit, &[], "unknown");
        assert!(flagged);
        let again = fit_lasso(&m, &y, &LassoOptions::default()).unwrap();
        assert_eq!(again.lambda, fit.lambda);
    }

    #[test]
    fn credit_score_examples() {
        assert_eq!(credit_score(10.0, 10.0), 0.0);
        assert!((credit_score(19.155, 17.529) - 1.626).abs() < 1e-12);
        assert!((credit_score(2.303, 7.323) + 5.020).abs() < 1e-12);
    }

    #[test]
    fn constant_target_errors() {
        let (m, _) = toy_dtm(30);
        assert!(matches!(fit_lasso(&m, &[1.0; 30], &LassoOptions::default()), Err(Error::DegenerateTarget)));
    }
}
