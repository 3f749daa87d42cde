//! Monthly maximal-mispricing portfolios, the three-month holding ring,
//! returns, Sharpe ratios and event studies.

mod backtest;
mod simplex;

pub use backtest::{
    backtest, eligible_universe, formation_months, run_strategy, BacktestConfig, BacktestResult, FormationRecord,
    FormationStatus, MonthlyPanel, RatingGroup, ScoreObservation, HOLDING_MONTHS,
};
pub use simplex::{Constraint, LinearProgram, Relation, Solution};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::time::Month;

pub const STRUCTURE_TOL: f64 = 1e-9;

/// Per-name bounds `l < 0 < u` and aggregate bounds `L < 0 < U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub l: f64,
    pub u: f64,
    #[serde(rename = "L")]
    pub lower_total: f64,
    #[serde(rename = "U")]
    pub upper_total: f64,
}

impl Bounds {
    pub fn new(l: f64, u: f64, lower_total: f64, upper_total: f64) -> Result<Self> {
        let b = Bounds { l, u, lower_total, upper_total };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l < 0.0 && 0.0 < self.u && self.lower_total < 0.0 && 0.0 < self.upper_total) {
            return Err(Error::validation(format!("bounds need l < 0 < u and L < 0 < U, got {self:?}")));
        }
        Ok(())
    }

    /// Whether `w` satisfies every constraint, zero-PVLGD included.
    pub fn admits(&self, w: &[f64], pvlgd: &[f64], tol: f64) -> bool {
        let long: f64 = w.iter().filter(|&&x| x > 0.0).sum();
        let short: f64 = w.iter().filter(|&&x| x < 0.0).sum();
        let exposure: f64 = w.iter().zip(pvlgd).map(|(a, b)| a * b).sum();
        let scale: f64 = w.iter().zip(pvlgd).map(|(a, b)| (a * b).abs()).sum::<f64>().max(1.0);
        w.iter().all(|&x| x >= self.l - tol && x <= self.u + tol)
            && long <= self.upper_total + tol
            && short >= self.lower_total - tol
            && exposure.abs() <= tol * scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioProblem {
    pub credit_scores: Vec<f64>,
    pub pvlgds: Vec<f64>,
    pub bounds: Bounds,
}

impl PortfolioProblem {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.credit_scores.len() != self.pvlgds.len() {
            return Err(Error::validation("scores and PVLGDs differ in length"));
        }
        if self.pvlgds.len() < 2 {
            return Err(Error::validation("a portfolio needs at least two names"));
        }
        if let Some(p) = self.pvlgds.iter().find(|p| !(**p > 0.0)) {
            return Err(Error::validation(format!("PVLGD must be positive, got {p}")));
        }
        Ok(())
    }

    pub fn objective(&self, w: &[f64]) -> f64 {
        w.iter().zip(&self.credit_scores).map(|(a, b)| a * b).sum()
    }
}

/// Maximizes `Σ w·CS` subject to zero total PVLGD, per-name bounds and the
/// long/short totals, with `w = w⁺ − w⁻` split into nonnegative parts.
pub fn solve_monthly_lp(problem: &PortfolioProblem) -> Result<Vec<f64>> {
    problem.validate()?;
    let n = problem.pvlgds.len();
    let b = problem.bounds;
    let mut objective = problem.credit_scores.clone();
    objective.extend(problem.credit_scores.iter().map(|c| -c));
    let mut upper = vec![b.u; n];
    upper.extend(std::iter::repeat(-b.l).take(n));
    let mut pv = problem.pvlgds.clone();
    pv.extend(problem.pvlgds.iter().map(|p| -p));
    let ones_long: Vec<f64> = (0..2 * n).map(|j| if j < n { 1.0 } else { 0.0 }).collect();
    let ones_short: Vec<f64> = (0..2 * n).map(|j| if j < n { 0.0 } else { 1.0 }).collect();
    let lp = LinearProgram {
        objective,
        upper,
        constraints: vec![
            Constraint { coefs: pv, relation: Relation::Eq, rhs: 0.0 },
            Constraint { coefs: ones_long, relation: Relation::Le, rhs: b.upper_total },
            Constraint { coefs: ones_short, relation: Relation::Le, rhs: -b.lower_total },
        ],
    };
    let sol = lp.solve()?;
    Ok((0..n)
        .map(|i| {
            let w = sol.x[i] - sol.x[n + i];
            if w.abs() < 1e-12 {
                0.0
            } else {
                w
            }
        })
        .collect())
}

/// Counts of weights at `u`, at `l`, and strictly between them (nonzero).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WeightStructure {
    pub n_u: usize,
    pub n_l: usize,
    pub n_o: usize,
}

pub fn classify_weight_structure(weights: &[f64], l: f64, u: f64, tol: f64) -> WeightStructure {
    let mut s = WeightStructure::default();
    for &w in weights {
        if (w - u).abs() <= tol {
            s.n_u += 1;
        } else if (w - l).abs() <= tol {
            s.n_l += 1;
        } else if w.abs() > tol {
            s.n_o += 1;
        }
    }
    s
}

/// Weights keyed by entity, formed at the end of one month.
pub type Holdings = BTreeMap<String, f64>;

/// `Σ w (PV_t − PV_{t−1})` for one sub-portfolio.
pub fn sub_portfolio_change(
    holdings: &Holdings,
    pvlgd: &MonthlyPanel,
    month: Month,
) -> Result<f64> {
    let mut total = 0.0;
    for (name, w) in holdings {
        if *w == 0.0 {
            continue;
        }
        let now = pvlgd.get(name, month);
        let prev = pvlgd.get(name, month.offset(-1));
        match (now, prev) {
            (Some(a), Some(b)) => total += w * (a - b),
            _ => return Err(Error::Missing(format!("PVLGD for held name {name} around {month}"))),
        }
    }
    Ok(total)
}

/// The three live sub-portfolios, newest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub subs: [(Month, Holdings); 3],
}

impl Ring {
    /// First formation: all three slots hold the initial portfolio.
    pub fn new(month: Month, holdings: Holdings) -> Self {
        Ring { subs: [(month, holdings.clone()), (month, holdings.clone()), (month, holdings)] }
    }

    /// Pushes the month's portfolio and returns the dropped one.
    pub fn push(&mut self, month: Month, holdings: Holdings) -> (Month, Holdings) {
        let dropped = self.subs[2].clone();
        self.subs.rotate_right(1);
        self.subs[0] = (month, holdings);
        dropped
    }

    /// `R_t = −(1/3)·Σ ΔPV^{sub}/100`.
    pub fn monthly_return(&self, pvlgd: &MonthlyPanel, month: Month) -> Result<f64> {
        let mut total = 0.0;
        for (_, h) in &self.subs {
            total += sub_portfolio_change(h, pvlgd, month)?;
        }
        Ok(-(total / 3.0) / 100.0)
    }
}

/// `[Π(1 + R_t)]^{12/T} − 1`.
pub fn annualized_return(returns: &[f64]) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::validation("annualized return of an empty series"));
    }
    if let Some(r) = returns.iter().find(|r| **r <= -1.0) {
        return Err(Error::validation(format!("monthly return {r} is at or below −100%")));
    }
    let log: f64 = returns.iter().map(|r| r.ln_1p()).sum();
    Ok((log * 12.0 / returns.len() as f64).exp_m1())
}

/// `mean/stdev·√12` with the sample standard deviation.
pub fn sharpe_ratio(returns: &[f64]) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::validation("Sharpe ratio needs at least two returns"));
    }
    let sd = stats::stdev(returns);
    if !(sd > 0.0) {
        return Err(Error::validation("Sharpe ratio of a zero-variance series"));
    }
    Ok(stats::mean(returns) / sd * 12f64.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStudy {
    /// Quarter offsets −window..=window.
    pub offsets: Vec<i32>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n_events: usize,
}

/// Average PVLGD path around events, each normalized by its event-quarter
/// level. Quarter `k` is read at month `event + 3k`; events lacking any of
/// the `2·window + 1` quarters are dropped. The band is mean ± 1.96·sd/√n.
pub fn event_study(pvlgd: &MonthlyPanel, events: &[(String, Month)], window: i32) -> EventStudy {
    let offsets: Vec<i32> = (-window..=window).collect();
    let paths: Vec<Vec<f64>> = events
        .iter()
        .filter_map(|(name, m)| {
            let base = pvlgd.get(name, *m).filter(|v| *v > 0.0)?;
            offsets.iter().map(|k| pvlgd.get(name, m.offset(3 * k)).map(|v| v / base)).collect()
        })
        .collect();
    let n = paths.len();
    let mut out = EventStudy { offsets, mean: Vec::new(), lower: Vec::new(), upper: Vec::new(), n_events: n };
    if n == 0 {
        out.offsets.clear();
        return out;
    }
    for k in 0..out.offsets.len() {
        let col: Vec<f64> = paths.iter().map(|p| p[k]).collect();
        let m = stats::mean(&col);
        let half = if n > 1 { 1.96 * stats::stdev(&col) / (n as f64).sqrt() } else { 0.0 };
        out.mean.push(m);
        out.lower.push(m - half);
        out.upper.push(m + half);
    }
    out
}
