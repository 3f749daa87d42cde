use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::{
    annualized_return, classify_weight_structure, sharpe_ratio, solve_monthly_lp, Bounds, Holdings,
    PortfolioProblem, Ring, WeightStructure, STRUCTURE_TOL,
};
use crate::error::{Error, Result};
use crate::time::Month;

/// Months of forward PVLGD a name needs to enter a portfolio.
pub const HOLDING_MONTHS: i32 = 3;

/// Month-end PVLGD per entity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonthlyPanel {
    values: HashMap<String, BTreeMap<Month, f64>>,
}

impl MonthlyPanel {
    pub fn insert(&mut self, entity: &str, month: Month, value: f64) {
        self.values.entry(entity.to_string()).or_default().insert(month, value);
    }

    pub fn get(&self, entity: &str, month: Month) -> Option<f64> {
        self.values.get(entity)?.get(&month).copied()
    }

    pub fn entities(&self) -> impl Iterator<Item = &String> {
        self.values.keys()
    }

    pub fn months(&self) -> Option<(Month, Month)> {
        let first = self.values.values().filter_map(|m| m.keys().next()).min()?;
        let last = self.values.values().filter_map(|m| m.keys().next_back()).max()?;
        Some((*first, *last))
    }

    /// PVLGD present in every month `t..=t+3`.
    pub fn covers(&self, entity: &str, month: Month) -> bool {
        (0..=HOLDING_MONTHS).all(|k| self.get(entity, month.offset(k)).is_some_and(|v| v > 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatingGroup {
    /// Rating score 1..=4 (BBB or better).
    Ig,
    Hy,
    All,
}

impl RatingGroup {
    pub fn contains(self, rating: Option<u8>) -> bool {
        match self {
            RatingGroup::All => true,
            RatingGroup::Ig => rating.is_some_and(|r| r <= 4),
            RatingGroup::Hy => !rating.is_some_and(|r| r <= 4),
        }
    }

    /// Default aggregate bounds.
    pub fn default_totals(self) -> (f64, f64) {
        match self {
            RatingGroup::Ig => (-4.0, 4.0),
            RatingGroup::Hy | RatingGroup::All => (-2.0, 2.0),
        }
    }
}

/// One scored call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreObservation {
    pub entity_id: String,
    pub date: NaiveDate,
    pub credit_score: f64,
    /// Rating score just before the call, 1 (AAA) .. 9.
    pub rating: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub rating_group: RatingGroup,
    pub l: f64,
    pub u: f64,
    #[serde(rename = "L")]
    pub lower_total: f64,
    #[serde(rename = "U")]
    pub upper_total: f64,
}

impl BacktestConfig {
    pub fn bounds(&self) -> Result<Bounds> {
        Bounds::new(self.l, self.u, self.lower_total, self.upper_total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormationStatus {
    Optimal,
    /// No feasible portfolio; the previous sub-portfolio was carried forward.
    RolledForward,
    /// No feasible portfolio, and the previous one lacks PVLGD for the full
    /// holding period; the slot holds nothing.
    Flat,
    /// No feasible portfolio and nothing to carry forward.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationRecord {
    pub month: Month,
    pub status: FormationStatus,
    pub n_names: usize,
    pub structure: WeightStructure,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub returns: Vec<(Month, f64)>,
    pub formations: Vec<FormationRecord>,
    pub annualized_return: Option<f64>,
    pub sharpe: Option<f64>,
    /// Weights formed each month (carried-forward months repeat).
    #[serde(skip)]
    pub holdings: BTreeMap<Month, Holdings>,
}

impl BacktestResult {
    pub fn return_values(&self) -> Vec<f64> {
        self.returns.iter().map(|r| r.1).collect()
    }
}

/// Names tradable at the end of `month`: a scored call in `month−2..=month`
/// within the rating group, and PVLGD through `month+3`. The latest call
/// supplies the score. Sorted by entity.
pub fn eligible_universe(
    scores: &[ScoreObservation],
    pvlgd: &MonthlyPanel,
    month: Month,
    group: RatingGroup,
) -> Vec<(String, f64, f64)> {
    let mut latest: BTreeMap<&str, &ScoreObservation> = BTreeMap::new();
    for s in scores {
        let m = Month::of(s.date);
        if m > month || m < month.offset(-2) {
            continue;
        }
        let slot = latest.entry(s.entity_id.as_str()).or_insert(s);
        if s.date > slot.date {
            *slot = s;
        }
    }
    latest
        .into_iter()
        .filter(|(e, s)| group.contains(s.rating) && pvlgd.covers(e, month) && s.credit_score.is_finite())
        .map(|(e, s)| (e.to_string(), s.credit_score, pvlgd.get(e, month).unwrap()))
        .collect()
}

/// Months at which portfolios can be formed: every month with at least one
/// scored call in range and three forward months of PVLGD in the panel.
pub fn formation_months(scores: &[ScoreObservation], pvlgd: &MonthlyPanel) -> Vec<Month> {
    let Some(first) = scores.iter().map(|s| Month::of(s.date)).min() else { return Vec::new() };
    let Some((_, last)) = pvlgd.months() else { return Vec::new() };
    let end = last.offset(-HOLDING_MONTHS);
    (0..=end.since(first)).map(|k| first.offset(k)).collect()
}

/// Runs the three-sub-portfolio ring over `months`, forming each month's
/// portfolio with `form`. `None` from `form` marks an infeasible month.
pub fn run_strategy<F>(months: &[Month], pvlgd: &MonthlyPanel, bounds: Bounds, mut form: F) -> Result<BacktestResult>
where
    F: FnMut(Month) -> Result<Option<(Holdings, usize, Option<f64>)>>,
{
    let mut ring: Option<Ring> = None;
    let mut result = BacktestResult {
        returns: Vec::new(),
        formations: Vec::new(),
        annualized_return: None,
        sharpe: None,
        holdings: BTreeMap::new(),
    };
    for &m in months {
        let formed = form(m)?;
        let (status, holdings, n_names, objective) = match (formed, &ring) {
            (Some((h, n, obj)), _) => (FormationStatus::Optimal, Some(h), n, obj),
            (None, Some(r)) => {
                let prev = &r.subs[0].1;
                if prev.keys().all(|e| pvlgd.covers(e, m)) {
                    warn!("no feasible portfolio at {m}; carrying the previous sub-portfolio forward");
                    (FormationStatus::RolledForward, Some(prev.clone()), 0, None)
                } else {
                    warn!("no feasible portfolio at {m}; previous sub-portfolio expires, holding nothing");
                    (FormationStatus::Flat, Some(Holdings::new()), 0, None)
                }
            }
            (None, None) => {
                info!("no feasible portfolio at {m}; strategy not started");
                (FormationStatus::Skipped, None, 0, None)
            }
        };
        let structure = holdings.as_ref().map_or_else(WeightStructure::default, |h| {
            let w: Vec<f64> = h.values().copied().collect();
            classify_weight_structure(&w, bounds.l, bounds.u, STRUCTURE_TOL)
        });
        result.formations.push(FormationRecord { month: m, status, n_names, structure, objective });
        let Some(h) = holdings else { continue };
        result.holdings.insert(m, h.clone());
        match ring.as_mut() {
            Some(r) => {
                r.push(m, h);
            }
            None => ring = Some(Ring::new(m, h)),
        }
        let t = m.offset(1);
        let r = ring.as_ref().unwrap().monthly_return(pvlgd, t)?;
        result.returns.push((t, r));
    }
    let values = result.return_values();
    result.annualized_return = annualized_return(&values).ok();
    result.sharpe = sharpe_ratio(&values).ok();
    Ok(result)
}

/// The credit-score strategy: each month, the maximal-mispricing portfolio
/// over the eligible universe.
pub fn backtest(config: &BacktestConfig, scores: &[ScoreObservation], pvlgd: &MonthlyPanel) -> Result<BacktestResult> {
    let bounds = config.bounds()?;
    let months = formation_months(scores, pvlgd);
    run_strategy(&months, pvlgd, bounds, |m| {
        let universe = eligible_universe(scores, pvlgd, m, config.rating_group);
        if universe.len() < 2 {
            return Ok(None);
        }
        let problem = PortfolioProblem {
            credit_scores: universe.iter().map(|u| u.1).collect(),
            pvlgds: universe.iter().map(|u| u.2).collect(),
            bounds,
        };
        match solve_monthly_lp(&problem) {
            Ok(w) => {
                let obj = problem.objective(&w);
                let h = universe.iter().zip(&w).filter(|(_, w)| **w != 0.0).map(|(u, w)| (u.0.clone(), *w)).collect();
                Ok(Some((h, universe.len(), Some(obj))))
            }
            Err(Error::Infeasible) => Ok(None),
            Err(e) => Err(e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(m: Month) -> NaiveDate {
        m.first_day()
    }

    #[test]
    fn universe_rules() {
        let m = Month::new(2020, 6).unwrap();
        let mut pv = MonthlyPanel::default();
        for e in ["a", "b", "c"] {
            for k in -1..=3 {
                pv.insert(e, m.offset(k), 5.0);
            }
        }
        pv.insert("d", m, 5.0);
        let obs = |e: &str, mm: Month, cs: f64, r: u8| ScoreObservation {
            entity_id: e.into(),
            date: d(mm),
            credit_score: cs,
            rating: Some(r),
        };
        let scores = vec![
            obs("a", m.offset(-2), 1.0, 3),
            obs("a", m, 2.0, 3),
            obs("b", m.offset(-3), 1.0, 3),
            obs("c", m.offset(-1), 1.0, 6),
            obs("d", m, 1.0, 3),
        ];
        let ig = eligible_universe(&scores, &pv, m, RatingGroup::Ig);
        assert_eq!(ig, vec![("a".to_string(), 2.0, 5.0)]);
        let hy = eligible_universe(&scores, &pv, m, RatingGroup::Hy);
        assert_eq!(hy.len(), 1);
        assert_eq!(eligible_universe(&scores, &pv, m, RatingGroup::All).len(), 2);
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let start = Month::new(2019, 1).unwrap();
        let mut pv = MonthlyPanel::default();
        let mut scores = Vec::new();
        for (i, e) in ["a", "b", "c", "d"].iter().enumerate() {
            for k in 0..12 {
                pv.insert(e, start.offset(k), 2.0 + i as f64);
                scores.push(ScoreObservation {
                    entity_id: e.to_string(),
                    date: d(start.offset(k)),
                    credit_score: i as f64 - 1.5,
                    rating: Some(5),
                });
            }
        }
        let cfg = BacktestConfig { rating_group: RatingGroup::Hy, l: -1.0, u: 1.0, lower_total: -2.0, upper_total: 2.0 };
        let r = backtest(&cfg, &scores, &pv).unwrap();
        assert_eq!(r.returns.len(), 9);
        assert!(r.returns.iter().all(|x| x.1 == 0.0));
        assert_eq!(r.annualized_return, Some(0.0));
        assert!(r.formations.iter().all(|f| f.status == FormationStatus::Optimal));
    }

    #[test]
    fn adding_zero_weight_name_changes_nothing() {
        let m = Month::new(2020, 1).unwrap();
        let mut pv = MonthlyPanel::default();
        pv.insert("a", m, 10.0);
        pv.insert("a", m.offset(1), 8.0);
        let h: Holdings = [("a".to_string(), 0.5)].into_iter().collect();
        let mut h2 = h.clone();
        h2.insert("ghost".into(), 0.0);
        let r1 = Ring::new(m, h).monthly_return(&pv, m.offset(1)).unwrap();
        let r2 = Ring::new(m, h2).monthly_return(&pv, m.offset(1)).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn infeasible_month_rolls_forward() {
        let start = Month::new(2019, 1).unwrap();
        let mut pv = MonthlyPanel::default();
        for e in ["a", "b"] {
            for k in 0..8 {
                pv.insert(e, start.offset(k), 5.0 + f64::from(k));
            }
        }
        let bounds = Bounds::new(-1.0, 1.0, -2.0, 2.0).unwrap();
        let months: Vec<Month> = (0..4).map(|k| start.offset(k)).collect();
        let h: Holdings = [("a".to_string(), 1.0), ("b".to_string(), -1.0)].into_iter().collect();
        let r = run_strategy(&months, &pv, bounds, |m| {
            Ok(if m == start || m == start.offset(2) { Some((h.clone(), 2, None)) } else { None })
        })
        .unwrap();
        let status: Vec<FormationStatus> = r.formations.iter().map(|f| f.status).collect();
        assert_eq!(
            status,
            vec![
                FormationStatus::Optimal,
                FormationStatus::RolledForward,
                FormationStatus::Optimal,
                FormationStatus::RolledForward
            ]
        );
        assert_eq!(r.returns.len(), 4);
        let r = run_strategy(&months, &pv, bounds, |m| Ok((m != start).then(|| (h.clone(), 2, None)))).unwrap();
        assert_eq!(r.formations[0].status, FormationStatus::Skipped);
        assert_eq!(r.returns.len(), 3);
    }
}
