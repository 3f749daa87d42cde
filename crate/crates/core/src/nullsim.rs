//! Structure-matched random portfolios under the no-predictability null,
//! empirical p-values, and the correlated-Bernoulli joint test.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::portfolio::{
    run_strategy, BacktestResult, Bounds, FormationStatus, Holdings, MonthlyPanel, RatingGroup, ScoreObservation,
    WeightStructure,
};
use crate::time::Month;

/// Plain draws before the switching procedure starts.
pub const MAX_ATTEMPTS: usize = 100;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent generator for one (trial, month) cell.
pub fn substream(seed: u64, trial: u64, month: i64) -> ChaCha8Rng {
    let h = splitmix64(splitmix64(splitmix64(seed) ^ trial) ^ month as u64);
    ChaCha8Rng::seed_from_u64(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleRoute {
    Direct,
    Switched,
    Dropped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPortfolio {
    pub weights: Vec<f64>,
    pub route: SampleRoute,
    /// Counts at `u` and `l` as drawn (before any drop).
    pub target: (usize, usize),
}

fn pv_sum(pv: &[f64], set: &[usize]) -> f64 {
    set.iter().map(|&i| pv[i]).sum()
}

/// Tries to complete `(S_u, S_l)` with one balancing name. Returns the
/// weights when the result meets every constraint.
fn complete(pv: &[f64], su: &[usize], sl: &[usize], b: &Bounds, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let target = -(b.u * pv_sum(pv, su) + b.l * pv_sum(pv, sl));
    let taken: HashSet<usize> = su.iter().chain(sl).copied().collect();
    let admissible: Vec<usize> = (0..pv.len())
        .filter(|i| !taken.contains(i) && b.l * pv[*i] <= target && target <= b.u * pv[*i])
        .collect();
    let &pick = admissible.choose(rng)?;
    let mut w = vec![0.0; pv.len()];
    for &i in su {
        w[i] = b.u;
    }
    for &i in sl {
        w[i] = b.l;
    }
    w[pick] = target / pv[pick];
    let long: f64 = w.iter().filter(|x| **x > 0.0).sum();
    let short: f64 = w.iter().filter(|x| **x < 0.0).sum();
    (long <= b.upper_total + 1e-12 && short >= b.lower_total - 1e-12).then_some(w)
}

fn extreme(pv: &[f64], set: &[usize], largest: bool, skip: &HashSet<usize>) -> Option<usize> {
    let it = set.iter().copied().filter(|i| !skip.contains(i));
    if largest {
        it.max_by(|a, b| pv[*a].total_cmp(&pv[*b]).then(b.cmp(a)))
    } else {
        it.min_by(|a, b| pv[*a].total_cmp(&pv[*b]).then(a.cmp(b)))
    }
}

/// Random portfolio with `n_u` weights at `u`, `n_l` at `l`, and one
/// balancing weight that zeroes total PVLGD.
///
/// After `MAX_ATTEMPTS` failed draws, the last draw is repaired by swapping
/// the extreme-PVLGD members of `S_u` and `S_l` (one atomic swap per step);
/// if that cycles, extreme names are dropped one at a time.
pub fn sample_null_portfolio(
    pvlgds: &[f64],
    structure: (usize, usize),
    bounds: &Bounds,
    rng: &mut ChaCha8Rng,
) -> Result<SampledPortfolio> {
    let (n_u, n_l) = structure;
    let n = pvlgds.len();
    if n_u + n_l + 1 > n {
        return Err(Error::Sampling(format!("universe of {n} names cannot hold structure ({n_u}, {n_l}) plus a balancing name")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let (mut su, mut sl) = (Vec::new(), Vec::new());
    for _ in 0..MAX_ATTEMPTS {
        idx.shuffle(rng);
        su = idx[..n_u].to_vec();
        sl = idx[n_u..n_u + n_l].to_vec();
        if let Some(w) = complete(pvlgds, &su, &sl, bounds, rng) {
            return Ok(SampledPortfolio { weights: w, route: SampleRoute::Direct, target: structure });
        }
    }

    let mut seen: HashSet<(BTreeSet<usize>, BTreeSet<usize>)> = HashSet::new();
    let mut moved: HashSet<usize> = HashSet::new();
    loop {
        let sig = (su.iter().copied().collect(), sl.iter().copied().collect());
        if !seen.insert(sig) {
            break;
        }
        let excess = bounds.u * pv_sum(pvlgds, &su) + bounds.l * pv_sum(pvlgds, &sl);
        // Positive excess: largest of S_u for smallest of S_l; negative: the reverse.
        let (a, c) = if excess > 0.0 {
            (extreme(pvlgds, &su, true, &moved), extreme(pvlgds, &sl, false, &moved))
        } else {
            (extreme(pvlgds, &su, false, &moved), extreme(pvlgds, &sl, true, &moved))
        };
        let (Some(a), Some(c)) = (a, c) else { break };
        let ia = su.iter().position(|&x| x == a).unwrap();
        let ic = sl.iter().position(|&x| x == c).unwrap();
        su[ia] = c;
        sl[ic] = a;
        moved.insert(a);
        moved.insert(c);
        if let Some(w) = complete(pvlgds, &su, &sl, bounds, rng) {
            return Ok(SampledPortfolio { weights: w, route: SampleRoute::Switched, target: structure });
        }
    }

    loop {
        let excess = bounds.u * pv_sum(pvlgds, &su) + bounds.l * pv_sum(pvlgds, &sl);
        let none = HashSet::new();
        let from_u = if su.is_empty() {
            false
        } else if sl.is_empty() {
            true
        } else {
            excess > 0.0
        };
        let set = if from_u { &mut su } else { &mut sl };
        let Some(x) = extreme(pvlgds, set, true, &none) else {
            return Err(Error::Sampling("no feasible null portfolio after dropping every name".into()));
        };
        set.retain(|&i| i != x);
        if let Some(w) = complete(pvlgds, &su, &sl, bounds, rng) {
            return Ok(SampledPortfolio { weights: w, route: SampleRoute::Dropped, target: structure });
        }
    }
}

/// Names available to the null at `month`: PVLGD through `month+3`, in the
/// rating group by the latest rating seen up to `month`. Sorted by entity.
pub fn null_universe(
    scores: &[ScoreObservation],
    pvlgd: &MonthlyPanel,
    month: Month,
    group: RatingGroup,
) -> Vec<(String, f64)> {
    let mut rating: BTreeMap<&str, (chrono::NaiveDate, Option<u8>)> = BTreeMap::new();
    for s in scores.iter().filter(|s| Month::of(s.date) <= month) {
        let slot = rating.entry(&s.entity_id).or_insert((s.date, s.rating));
        if s.date >= slot.0 {
            *slot = (s.date, s.rating);
        }
    }
    let mut names: Vec<&String> = pvlgd.entities().collect();
    names.sort();
    names
        .into_iter()
        .filter(|e| pvlgd.covers(e, month))
        .filter(|e| match group {
            RatingGroup::All => true,
            g => g.contains(rating.get(e.as_str()).and_then(|r| r.1)),
        })
        .map(|e| (e.clone(), pvlgd.get(e, month).unwrap()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullConfig {
    pub trials: usize,
    pub seed: u64,
}

impl Default for NullConfig {
    fn default() -> Self {
        NullConfig { trials: 100, seed: 20_240_601 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullTrial {
    pub trial: usize,
    pub seed: u64,
    pub annualized_return: Option<f64>,
    pub sharpe: Option<f64>,
    /// Per formation month: (target structure, sampled structure, route).
    pub structures: Vec<(Month, WeightStructure, WeightStructure, SampleRoute)>,
    #[serde(skip)]
    pub result: Option<BacktestResult>,
}

/// Replays the strategy's formation calendar with random portfolios of the
/// same `(n_u, n_l)` each month.
pub fn simulate_null(
    config: &NullConfig,
    actual: &BacktestResult,
    bounds: Bounds,
    group: RatingGroup,
    scores: &[ScoreObservation],
    pvlgd: &MonthlyPanel,
) -> Result<Vec<NullTrial>> {
    let months: Vec<Month> = actual.formations.iter().map(|f| f.month).collect();
    let plan: BTreeMap<Month, (FormationStatus, WeightStructure)> =
        actual.formations.iter().map(|f| (f.month, (f.status, f.structure))).collect();
    let universes: BTreeMap<Month, Vec<(String, f64)>> = months
        .iter()
        .filter(|m| plan[m].0 == FormationStatus::Optimal)
        .map(|&m| (m, null_universe(scores, pvlgd, m, group)))
        .collect();
    (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut structures = Vec::new();
            let result = run_strategy(&months, pvlgd, bounds, |m| {
                let (status, target) = plan[&m];
                if status != FormationStatus::Optimal {
                    return Ok(None);
                }
                let universe = &universes[&m];
                let pv: Vec<f64> = universe.iter().map(|u| u.1).collect();
                let mut rng = substream(config.seed, trial as u64, i64::from(m.index()));
                let s = sample_null_portfolio(&pv, (target.n_u, target.n_l), &bounds, &mut rng)
                    .map_err(|e| Error::Sampling(format!("trial {trial}, month {m}: {e}")))?;
                let got = crate::portfolio::classify_weight_structure(&s.weights, bounds.l, bounds.u, 1e-9);
                structures.push((m, target, got, s.route));
                let h: Holdings = universe
                    .iter()
                    .zip(&s.weights)
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(u, w)| (u.0.clone(), *w))
                    .collect();
                Ok(Some((h, universe.len(), None)))
            })?;
            Ok(NullTrial {
                trial,
                seed: config.seed,
                annualized_return: result.annualized_return,
                sharpe: result.sharpe,
                structures,
                result: Some(result),
            })
        })
        .collect()
}

/// Share of null draws at or above `actual`.
pub fn empirical_p_value(actual: f64, null: &[f64]) -> f64 {
    if null.is_empty() {
        return f64::NAN;
    }
    null.iter().filter(|x| **x >= actual).count() as f64 / null.len() as f64
}

/// `***`, `**`, `*` at the 1%, 5% and 10% levels.
pub fn stars(p: f64) -> &'static str {
    if p <= 0.01 {
        "***"
    } else if p <= 0.05 {
        "**"
    } else if p <= 0.10 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTestConfig {
    pub n_variables: usize,
    pub threshold: f64,
    pub draws_per_c: usize,
    pub c_step: f64,
}

impl Default for JointTestConfig {
    fn default() -> Self {
        JointTestConfig { n_variables: 15, threshold: 1.645, draws_per_c: 50_000, c_step: 0.05 }
    }
}

impl JointTestConfig {
    /// Threshold `Φ⁻¹(1 − p)` rounded to three decimals, as tabulated.
    pub fn with_success_prob(mut self, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::validation(format!("success probability {p} outside (0, 1)")));
        }
        let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - p);
        self.threshold = (z * 1000.0).round() / 1000.0;
        Ok(self)
    }

    pub fn c_grid(&self) -> Vec<f64> {
        let steps = (1.0 / self.c_step).round() as usize;
        (0..=steps).map(|i| (i as f64 * self.c_step).min(1.0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTestResult {
    pub k: usize,
    pub p_max: f64,
    pub c_argmax: f64,
    pub by_c: Vec<(f64, f64)>,
}

/// `P(exactly k of n indicators 1{√c·F + √(1−c)·S_i ≥ z} fire)`, estimated
/// per `c` on the grid; the maximum over `c` is reported.
pub fn correlated_bernoulli_pmax(k: usize, config: &JointTestConfig, rng: &mut ChaCha8Rng) -> Result<JointTestResult> {
    if k > config.n_variables {
        return Err(Error::validation(format!("k = {k} exceeds n = {}", config.n_variables)));
    }
    let mut by_c = Vec::new();
    for c in config.c_grid() {
        let (a, b) = (c.sqrt(), (1.0 - c).sqrt());
        let mut hits = 0usize;
        for _ in 0..config.draws_per_c {
            let f: f64 = rng.sample(StandardNormal);
            let fired = (0..config.n_variables)
                .filter(|_| a * f + b * rng.sample::<f64, _>(StandardNormal) >= config.threshold)
                .count();
            hits += usize::from(fired == k);
        }
        by_c.push((c, hits as f64 / config.draws_per_c as f64));
    }
    let &(c_argmax, p_max) = by_c.iter().max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.total_cmp(&x.0))).unwrap();
    Ok(JointTestResult { k, p_max, c_argmax, by_c })
}

/// Exact binomial `P(X = k)` for `X ~ Bin(n, p)`.
pub fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    let mut coef = 1.0;
    for i in 0..k {
        coef *= (n - i) as f64 / (i + 1) as f64;
    }
    coef * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// Mean pairwise correlation between weight vectors.
pub fn mean_pairwise_correlation(vectors: &[Vec<f64>]) -> Option<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            if let Some(r) = crate::stats::correlation(&vectors[i], &vectors[j]) {
                total += r;
                count += 1;
            }
        }
    }
    (count > 0).then(|| total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(l: f64, u: f64, lt: f64, ut: f64) -> Bounds {
        Bounds::new(l, u, lt, ut).unwrap()
    }

    #[test]
    fn balancing_weight_zeroes_exposure() {
        let pv = [10.0, 10.0, 5.0];
        let bounds = b(-2.0, 0.5, -2.0, 1.0);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = sample_null_portfolio(&pv, (1, 0), &bounds, &mut rng).unwrap();
            let exposure: f64 = s.weights.iter().zip(&pv).map(|(w, p)| w * p).sum();
            assert!(exposure.abs() < 1e-12);
            assert!(bounds.admits(&s.weights, &pv, 1e-12));
        }
    }

    #[test]
    fn equal_pvlgds_balance_by_counts() {
        let pv = vec![4.0; 20];
        let bounds = b(-0.5, 0.6, -10.0, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_null_portfolio(&pv, (2, 2), &bounds, &mut rng).unwrap();
        let balancing: Vec<f64> = s.weights.iter().copied().filter(|w| *w != 0.6 && *w != -0.5 && *w != 0.0).collect();
        assert_eq!(balancing.len(), 1);
        assert!((balancing[0] + (2.0 * 0.6 + 2.0 * -0.5)).abs() < 1e-12);
    }

    #[test]
    fn universe_too_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_null_portfolio(&[1.0, 2.0], (1, 1), &b(-1.0, 1.0, -2.0, 2.0), &mut rng).is_err());
    }

    #[test]
    fn switching_repairs_lopsided_draws() {
        // Two huge names and many small ones: a draw that puts a huge name in
        // S_u cannot be balanced by a small name within the bounds.
        let mut pv = vec![100.0, 100.0];
        pv.extend(std::iter::repeat(1.0).take(8));
        let bounds = b(-1.0, 1.0, -20.0, 20.0);
        let mut routes = HashSet::new();
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = sample_null_portfolio(&pv, (2, 1), &bounds, &mut rng).unwrap();
            let e: f64 = s.weights.iter().zip(&pv).map(|(w, p)| w * p).sum();
            assert!(e.abs() < 1e-9);
            assert!(bounds.admits(&s.weights, &pv, 1e-12));
            routes.insert(s.route);
        }
        assert!(routes.contains(&SampleRoute::Direct));
    }

    #[test]
    fn drop_route_when_nothing_balances() {
        // Every draw leaves exposure that no single name can offset.
        let pv = [1.0, 1.0, 1.0, 50.0];
        let bounds = b(-0.01, 1.0, -5.0, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = sample_null_portfolio(&pv, (3, 0), &bounds, &mut rng).unwrap();
        let e: f64 = s.weights.iter().zip(&pv).map(|(w, p)| w * p).sum();
        assert!(e.abs() < 1e-12);
        assert_eq!(s.route, SampleRoute::Dropped);
        assert!(bounds.admits(&s.weights, &pv, 1e-12));
    }

    #[test]
    fn substreams_are_deterministic_and_distinct() {
        let a: u64 = substream(1, 2, 3).gen();
        let b: u64 = substream(1, 2, 3).gen();
        let c: u64 = substream(1, 3, 2).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn p_values() {
        let null: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(empirical_p_value(1000.0, &null), 0.0);
        assert!((empirical_p_value(49.5, &null) - 0.5).abs() < 1e-12);
        let p = empirical_p_value(98.5, &null);
        assert_eq!(p, 0.01);
        assert_eq!(stars(p), "***");
        assert_eq!(stars(0.05), "**");
        assert_eq!(stars(0.08), "*");
        assert_eq!(stars(0.2), "");
    }

    #[test]
    fn binomial_at_zero_correlation() {
        assert!((binomial_pmf(15, 1, 0.05) - 15.0 * 0.05 * 0.95f64.powi(14)).abs() < 1e-15);
        let cfg = JointTestConfig { c_step: 1.0, draws_per_c: 50_000, ..JointTestConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = correlated_bernoulli_pmax(1, &cfg, &mut rng).unwrap();
        let p = 1.0 - Normal::new(0.0, 1.0).unwrap().cdf(1.645);
        let exact = binomial_pmf(15, 1, p);
        let se = (exact * (1.0 - exact) / 50_000.0).sqrt();
        assert!((r.by_c[0].1 - exact).abs() < 3.0 * se);
    }

    #[test]
    fn threshold_from_probability() {
        let c = JointTestConfig::default().with_success_prob(0.05).unwrap();
        assert_eq!(c.threshold, 1.645);
        assert_eq!(JointTestConfig::default().c_grid().len(), 21);
    }
}
