//! Recursive correlation ranking of tokens against PVLGD, and the sector
//! concentration filter.
//!
//! Each step picks the unselected token whose counts have the largest
//! absolute correlation with the current residual, then replaces the
//! residual by the residual of a univariate regression on that token.
//! Only orthogonality to the token just picked is guaranteed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::DocumentTermMatrix;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankedTokens {
    pub tokens: Vec<String>,
    pub step_intercepts: Vec<f64>,
    pub step_slopes: Vec<f64>,
    pub step_correlations: Vec<f64>,
    pub concentration: Vec<f64>,
}

impl RankedTokens {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn push(&mut self, step: &Step, concentration: f64) {
        self.tokens.push(step.token.clone());
        self.step_intercepts.push(step.intercept);
        self.step_slopes.push(step.slope);
        self.step_correlations.push(step.correlation);
        self.concentration.push(concentration);
    }

    fn keep(&self, idx: &[usize]) -> Self {
        RankedTokens {
            tokens: idx.iter().map(|&i| self.tokens[i].clone()).collect(),
            step_intercepts: idx.iter().map(|&i| self.step_intercepts[i]).collect(),
            step_slopes: idx.iter().map(|&i| self.step_slopes[i]).collect(),
            step_correlations: idx.iter().map(|&i| self.step_correlations[i]).collect(),
            concentration: idx.iter().map(|&i| self.concentration[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub column: usize,
    pub token: String,
    pub intercept: f64,
    pub slope: f64,
    pub correlation: f64,
}

struct Column {
    entries: Vec<(usize, f64)>,
    mean: f64,
    sxx: f64,
}

/// Stepwise state of the ranking, so callers can stop as soon as they have
/// enough tokens that pass some later test.
pub struct ForwardSelector<'a> {
    dtm: &'a DocumentTermMatrix,
    columns: Vec<Column>,
    residual: Vec<f64>,
    selected: Vec<bool>,
}

impl<'a> ForwardSelector<'a> {
    pub fn new(dtm: &'a DocumentTermMatrix, pvlgd: &[f64]) -> Result<Self> {
        let n = dtm.n_rows();
        if pvlgd.len() != n {
            return Err(Error::validation(format!("{} targets for {n} matrix rows", pvlgd.len())));
        }
        if pvlgd.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite PVLGD target"));
        }
        if n < 2 || pvlgd.iter().all(|&v| v == pvlgd[0]) {
            return Err(Error::DegenerateTarget);
        }
        let columns = dtm
            .columns()
            .into_iter()
            .map(|col| {
                let entries: Vec<(usize, f64)> = col.into_iter().map(|(r, c)| (r, f64::from(c))).collect();
                let sum: f64 = entries.iter().map(|e| e.1).sum();
                let mean = sum / n as f64;
                let sxx = entries.iter().map(|e| e.1 * e.1).sum::<f64>() - n as f64 * mean * mean;
                Column { entries, mean, sxx }
            })
            .collect();
        Ok(ForwardSelector {
            dtm,
            columns,
            residual: pvlgd.to_vec(),
            selected: vec![false; dtm.n_cols()],
        })
    }

    fn usable(&self, j: usize) -> bool {
        let c = &self.columns[j];
        // Constant columns (including all-zero ones) have no correlation.
        !self.selected[j] && c.sxx > 1e-12 * (1.0 + c.mean * c.mean) * self.residual.len() as f64
    }

    /// Next token, or `None` once no usable column remains or the residual
    /// is exactly constant.
    pub fn next_step(&mut self) -> Option<Step> {
        let n = self.residual.len() as f64;
        let rmean = self.residual.iter().sum::<f64>() / n;
        let syy: f64 = self.residual.iter().map(|r| (r - rmean) * (r - rmean)).sum();
        if syy <= 0.0 {
            return None;
        }
        let residual = &self.residual;
        let scores: Vec<Option<(f64, f64)>> = (0..self.columns.len())
            .into_par_iter()
            .map(|j| {
                if !self.usable(j) {
                    return None;
                }
                let c = &self.columns[j];
                let sxy = c.entries.iter().map(|&(r, x)| x * residual[r]).sum::<f64>() - n * c.mean * rmean;
                Some((sxy / (c.sxx * syy).sqrt(), sxy))
            })
            .collect();
        let mut best: Option<usize> = None;
        for (j, s) in scores.iter().enumerate() {
            let Some((corr, _)) = s else { continue };
            best = match best {
                None => Some(j),
                Some(b) => {
                    let bc = scores[b].unwrap().0.abs();
                    let a = corr.abs();
                    if a > bc || (a == bc && self.dtm.vocabulary[j] < self.dtm.vocabulary[b]) {
                        Some(j)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let j = best?;
        let (correlation, sxy) = scores[j].unwrap();
        let col = &self.columns[j];
        let slope = sxy / col.sxx;
        let intercept = rmean - slope * col.mean;
        let mut fitted = vec![intercept; self.residual.len()];
        for &(r, x) in &col.entries {
            fitted[r] += slope * x;
        }
        for (r, f) in self.residual.iter_mut().zip(fitted) {
            *r -= f;
        }
        self.selected[j] = true;
        Some(Step { column: j, token: self.dtm.vocabulary[j].clone(), intercept, slope, correlation })
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }
}

/// First `n_fs` tokens of the recursive ranking.
pub fn forward_select(dtm: &DocumentTermMatrix, pvlgd: &[f64], n_fs: usize) -> Result<RankedTokens> {
    if n_fs > dtm.n_cols() {
        return Err(Error::validation(format!(
            "n_fs = {n_fs} exceeds vocabulary size {}",
            dtm.n_cols()
        )));
    }
    let conc = sector_concentration(dtm);
    let mut sel = ForwardSelector::new(dtm, pvlgd)?;
    let mut out = RankedTokens::default();
    while out.len() < n_fs {
        let Some(step) = sel.next_step() else { break };
        out.push(&step, conc.values[step.column]);
    }
    if out.len() < n_fs {
        log::warn!("ranking stopped at {} of {n_fs} tokens (no usable columns left)", out.len());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concentration {
    pub values: Vec<f64>,
    /// Columns with zero total count; their value is reported as 1.
    pub undefined: Vec<usize>,
}

/// Largest single-sector share of each token's total count.
pub fn sector_concentration(dtm: &DocumentTermMatrix) -> Concentration {
    let mut sectors: Vec<&str> = dtm.sector_of_row.iter().map(String::as_str).collect();
    sectors.sort_unstable();
    sectors.dedup();
    let mut by_sector = vec![vec![0u64; sectors.len()]; dtm.n_cols()];
    for r in 0..dtm.n_rows() {
        let k = sectors.binary_search(&dtm.sector_of_row[r].as_str()).unwrap();
        let (idx, cnt) = dtm.row(r);
        for (&j, &c) in idx.iter().zip(cnt) {
            by_sector[j][k] += u64::from(c);
        }
    }
    let mut undefined = Vec::new();
    let values = by_sector
        .iter()
        .enumerate()
        .map(|(j, counts)| {
            let total: u64 = counts.iter().sum();
            if total == 0 {
                undefined.push(j);
                return 1.0;
            }
            *counts.iter().max().unwrap() as f64 / total as f64
        })
        .collect();
    if !undefined.is_empty() {
        log::warn!("{} tokens have zero total count; concentration set to 1", undefined.len());
    }
    Concentration { values, undefined }
}

/// Drops tokens with concentration strictly above `t_c`, keeping rank
/// order, and truncates to `n_fs`.
pub fn apply_concentration_filter(ranked: &RankedTokens, t_c: f64, n_fs: usize) -> RankedTokens {
    let keep: Vec<usize> = (0..ranked.len()).filter(|&i| ranked.concentration[i] <= t_c).take(n_fs).collect();
    if keep.len() < n_fs {
        log::warn!("only {} of {n_fs} tokens pass the concentration filter at t_c = {t_c}", keep.len());
    }
    ranked.keep(&keep)
}

/// Ranks stepwise and filters as it goes until `n_fs` tokens survive or the
/// vocabulary runs out. Same result as ranking everything and then calling
/// [`apply_concentration_filter`], without ranking more than needed.
pub fn select_tokens(dtm: &DocumentTermMatrix, pvlgd: &[f64], n_fs: usize, t_c: f64) -> Result<RankedTokens> {
    let conc = sector_concentration(dtm);
    let mut sel = ForwardSelector::new(dtm, pvlgd)?;
    let mut out = RankedTokens::default();
    while out.len() < n_fs {
        let Some(step) = sel.next_step() else { break };
        let c = conc.values[step.column];
        if c <= t_c {
            out.push(&step, c);
        }
    }
    if out.len() < n_fs {
        log::warn!("only {} of {n_fs} tokens selected at t_c = {t_c}", out.len());
    }
    Ok(out)
}
