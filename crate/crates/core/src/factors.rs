//! Control factors, information variables, deciles and the panel
//! normalizations (winsorization, IQR scaling).
//!
//! Every factor for month `t` reads only data dated at or before the end of
//! `t`; fundamentals are read as of `t − 3`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::stats;
use crate::text::split_sentences;
use crate::time::Month;

/// Months between a fundamentals data date and its first use.
pub const FUNDAMENTALS_LAG_MONTHS: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CdsFactors {
    pub chg_1: Option<f64>,
    pub chg_26: Option<f64>,
    pub rv_credit: Option<f64>,
    pub illiq: Option<f64>,
}

/// Last observation of each month.
pub fn month_end(daily: &[(NaiveDate, f64)]) -> BTreeMap<Month, f64> {
    let mut sorted = daily.to_vec();
    sorted.sort_by_key(|d| d.0);
    sorted.into_iter().map(|(d, v)| (Month::of(d), v)).collect()
}

/// `−cov(Δlog PV_s, Δlog PV_{s−1})` over one month of daily values in date
/// order. Missing with fewer than 10 pairs of consecutive changes or any
/// non-positive value.
pub fn illiq(daily: &[f64]) -> Option<f64> {
    if daily.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let changes: Vec<f64> = daily.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    if changes.len() < 11 {
        return None;
    }
    let now: Vec<f64> = changes[1..].to_vec();
    let lag: Vec<f64> = changes[..changes.len() - 1].to_vec();
    Some(-stats::covariance(&now, &lag))
}

/// Reversal, momentum, realized volatility and illiquidity per month.
///
/// - `chg_1 = PV_{t−1} − PV_{t−2}`
/// - `chg_26 = PV_{t−2} − PV_{t−6}`
/// - `rv_credit`: sample stdev of the 12 monthly changes ending at `t`
pub fn cds_factors(daily: &[(NaiveDate, f64)]) -> BTreeMap<Month, CdsFactors> {
    let mut sorted = daily.to_vec();
    sorted.sort_by_key(|d| d.0);
    let pv = month_end(&sorted);
    let mut by_month: BTreeMap<Month, Vec<f64>> = BTreeMap::new();
    for (d, v) in &sorted {
        by_month.entry(Month::of(*d)).or_default().push(*v);
    }
    let at = |m: Month| pv.get(&m).copied();
    pv.keys()
        .map(|&t| {
            let diff = |a: i32, b: i32| Some(at(t.offset(-a))? - at(t.offset(-b))?);
            let changes: Option<Vec<f64>> = (0..12).map(|k| diff(k, k + 1)).collect();
            let f = CdsFactors {
                chg_1: diff(1, 2),
                chg_26: diff(2, 6),
                rv_credit: changes.map(|c| stats::stdev(&c)),
                illiq: by_month.get(&t).and_then(|d| illiq(d)),
            };
            (t, f)
        })
        .collect()
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0 && num.is_finite() && den.is_finite()).then(|| num / den)
}

pub fn eq_ret_1(prices: &BTreeMap<Month, f64>, t: Month) -> Option<f64> {
    let (p1, p2) = (prices.get(&t.offset(-1))?, prices.get(&t.offset(-2))?);
    ratio(p1 - p2, *p2)
}

pub fn eq_ret_26(prices: &BTreeMap<Month, f64>, t: Month) -> Option<f64> {
    let (p2, p6) = (prices.get(&t.offset(-2))?, prices.get(&t.offset(-6))?);
    ratio(p2 - p6, *p6)
}

/// `ln(shrout·prc)`.
pub fn size(shares: f64, price: f64) -> Option<f64> {
    let cap = shares * price;
    (cap > 0.0).then(|| cap.ln())
}

/// `(atq − ltq)/(shrout·prc)`, as printed (no logarithm).
pub fn ratio_bm(atq: f64, ltq: f64, shares: f64, price: f64) -> Option<f64> {
    ratio(atq - ltq, shares * price)
}

/// `(ibadjq − dvpq + txdiq)/ceqq`; missing when book equity is zero.
pub fn profit(ibadjq: f64, dvpq: f64, txdiq: f64, ceqq: f64) -> Option<f64> {
    ratio(ibadjq - dvpq + txdiq, ceqq)
}

pub fn earn_yield(epsfiq: f64, price: f64) -> Option<f64> {
    ratio(epsfiq, price)
}

/// `(epsfiq_t − epsfiq_{t−12})/prc_t`, scaled by price as printed.
pub fn sue(eps_now: f64, eps_year_ago: f64, price: f64) -> Option<f64> {
    ratio(eps_now - eps_year_ago, price)
}

/// Merton-form distance to default with the naive asset volatility
/// `σ_V = E/(E+D)·σ_E + D/(E+D)·(0.05 + 0.25σ_E)`.
pub fn dist_default(e: f64, d: f64, r: f64, sigma_e: f64, horizon: f64) -> Option<f64> {
    if !(e > 0.0 && d > 0.0 && sigma_e > 0.0 && horizon > 0.0) {
        return None;
    }
    let v = e + d;
    let sigma_v = e / v * sigma_e + d / v * (0.05 + 0.25 * sigma_e);
    Some(((v / d).ln() + (r - sigma_v * sigma_v / 2.0) * horizon) / (sigma_v * horizon.sqrt()))
}

/// Pooled forecast dispersion from monthly (mean, stdev, count) triples:
/// returns `(Σn, Std/Avg)`. Stdevs are population moments of each month's
/// forecasts.
pub fn analyst_dispersion(months: &[(f64, f64, f64)]) -> (f64, Option<f64>) {
    let n: f64 = months.iter().map(|m| m.2).sum();
    if !(n > 0.0) {
        return (0.0, None);
    }
    let avg = months.iter().map(|&(p, _, k)| p * k).sum::<f64>() / n;
    let avg2 = months.iter().map(|&(p, s, k)| (p * p + s * s) * k).sum::<f64>() / n;
    let std = (avg2 - avg * avg).max(0.0).sqrt();
    (n, ratio(std, avg))
}

/// `0.39·words/sentences + 11.8·syllables/words − 15.59`.
pub fn fk_grade(words: usize, sentences: usize, syllables: usize) -> Option<f64> {
    if words == 0 || sentences == 0 {
        return None;
    }
    let (w, s, y) = (words as f64, sentences as f64, syllables as f64);
    Some(0.39 * w / s + 11.8 * y / w - 15.59)
}

/// Maximal vowel groups (`y` counts as a vowel), minus one for a silent
/// trailing `e`, at least one.
pub fn count_syllables(word: &str) -> usize {
    let w: Vec<char> = word.to_lowercase().chars().filter(|c| c.is_alphabetic()).collect();
    if w.is_empty() {
        return 0;
    }
    let vowel = |c: char| "aeiouy".contains(c);
    let mut groups = 0;
    let mut prev = false;
    for &c in &w {
        let v = vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    let n = w.len();
    if n > 2 && w[n - 1] == 'e' && !vowel(w[n - 2]) && !(w[n - 2] == 'l' && !vowel(w[n - 3])) {
        groups -= 1;
    }
    groups.max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TextStats {
    pub words: usize,
    pub sentences: usize,
    pub syllables: usize,
}

impl TextStats {
    pub fn of(text: &str) -> Self {
        let words: Vec<&str> = text
            .split(|c: char| !c.is_alphanumeric() && c != '\'')
            .filter(|w| w.chars().any(char::is_alphabetic))
            .collect();
        TextStats {
            words: words.len(),
            sentences: split_sentences(text).len(),
            syllables: words.iter().map(|w| count_syllables(w)).sum(),
        }
    }

    pub fn fk_grade(&self) -> Option<f64> {
        fk_grade(self.words, self.sentences, self.syllables)
    }
}

/// Decile of `value` against a comparison set: `⌈10·rank/(m+1)⌉` clipped to
/// 1..=10, with rank one plus the number of comparisons strictly below.
pub fn decile(value: f64, comparison: &[f64]) -> Option<u8> {
    let m = comparison.len();
    if m == 0 || !value.is_finite() {
        return None;
    }
    let rank = 1 + comparison.iter().filter(|&&c| c < value).count();
    let d = (10 * rank).div_ceil(m + 1);
    Some(d.clamp(1, 10) as u8)
}

/// Subtracts the mean over all non-missing entries.
pub fn demean(values: &[Option<f64>]) -> Vec<Option<f64>> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let mean = stats::mean(&present);
    values.iter().map(|v| v.map(|x| x - mean)).collect()
}

/// Clamps to the column's percentile bounds, computed once over all
/// non-missing values.
pub fn winsorize(values: &[Option<f64>], lower: f64, upper: f64) -> Vec<Option<f64>> {
    let mut present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return values.to_vec();
    }
    present.sort_by(f64::total_cmp);
    let lo = stats::percentile_sorted(&present, lower);
    let hi = stats::percentile_sorted(&present, upper);
    values.iter().map(|v| v.map(|x| x.clamp(lo, hi))).collect()
}

/// `(x − median)/IQR`.
pub fn iqr_standardize(values: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    let mut present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::validation("IQR of an empty column"));
    }
    present.sort_by(f64::total_cmp);
    let med = stats::percentile_sorted(&present, 0.5);
    let iqr = stats::percentile_sorted(&present, 0.75) - stats::percentile_sorted(&present, 0.25);
    if !(iqr > 0.0) {
        return Err(Error::validation("interquartile range is zero"));
    }
    Ok(values.iter().map(|v| v.map(|x| (x - med) / iqr)).collect())
}

/// Letter rating to 1 (AAA) .. 9 (C or D); modifiers are ignored.
pub fn rating_score(rating: &str) -> Option<u8> {
    let r = rating.trim().trim_end_matches(['+', '-']).to_ascii_uppercase();
    Some(match r.as_str() {
        "AAA" => 1,
        "AA" => 2,
        "A" => 3,
        "BBB" => 4,
        "BB" => 5,
        "B" => 6,
        "CCC" => 7,
        "CC" => 8,
        "C" | "D" => 9,
        _ => return None,
    })
}

/// First month in which fundamentals with this data date may be used.
pub fn availability_month(data_date: NaiveDate) -> Month {
    Month::of(data_date).offset(FUNDAMENTALS_LAG_MONTHS)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Fundamentals {
    pub data_date: Option<NaiveDate>,
    pub fields: HashMap<String, f64>,
}

impl Fundamentals {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.fields.get(name).copied().filter(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquityMonth {
    pub price: f64,
    pub shares: f64,
    pub ret: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalystMonth {
    pub mean: f64,
    pub std: f64,
    pub count: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallInfo {
    pub entity_id: String,
    pub month: Month,
    pub stats: TextStats,
}

/// Everything the factor panel is built from, keyed by entity.
#[derive(Debug, Clone, Default)]
pub struct FactorInputs {
    pub daily_pvlgd: HashMap<String, Vec<(NaiveDate, f64)>>,
    pub equity: HashMap<String, BTreeMap<Month, EquityMonth>>,
    pub fundamentals: HashMap<String, Vec<Fundamentals>>,
    pub analysts: HashMap<String, BTreeMap<Month, AnalystMonth>>,
    /// Rating changes by month; the latest on or before a month applies.
    pub ratings: HashMap<String, BTreeMap<Month, u8>>,
    pub calls: Vec<CallInfo>,
    /// Pass-through columns (CompDepth, LEV, IV, RF, ...).
    pub extras: Option<Frame>,
}

/// Fundamentals usable in month `t`: the latest report available by `t`
/// whose data date lies in the quarter ending at `t − 3`. Older reports are
/// not carried forward.
pub fn fundamentals_for(reports: &[Fundamentals], t: Month) -> Option<&Fundamentals> {
    reports
        .iter()
        .filter(|f| {
            f.data_date.is_some_and(|d| {
                let a = availability_month(d);
                a <= t && a > t.offset(-3)
            })
        })
        .max_by_key(|f| f.data_date)
}

pub const FACTOR_COLUMNS: &[&str] = &[
    "PVLGD",
    "CDSChg_1",
    "CDSChg_26",
    "RVCredit",
    "ILLIQ",
    "Rating",
    "EqRet_1",
    "EqRet_26",
    "Size",
    "RatioBM",
    "Profit",
    "EarnYield",
    "DistDefault",
    "SUE",
    "NumAnlst",
    "DispAnlst",
    "FKGrade",
    "TransLen",
    "HasCall",
];

fn trailing_equity(eq: &BTreeMap<Month, EquityMonth>, t: Month) -> Option<(f64, f64)> {
    let rets: Option<Vec<f64>> = (0..12).map(|k| eq.get(&t.offset(-k)).and_then(|e| e.ret)).collect();
    let rets = rets?;
    let r = rets.iter().map(|x| 1.0 + x).product::<f64>() - 1.0;
    Some((r, stats::stdev(&rets) * 12f64.sqrt()))
}

/// Builds the entity-month factor panel. Rows are every month with a
/// month-end PVLGD. Decile columns `D_*` are demeaned over the whole panel.
pub fn build_factor_panel(inputs: &FactorInputs) -> Result<Frame> {
    let mut entities: Vec<&String> = inputs.daily_pvlgd.keys().collect();
    entities.sort();
    let mut keys: Vec<(String, Month)> = Vec::new();
    let mut cds: Vec<(f64, CdsFactors)> = Vec::new();
    for e in &entities {
        let daily = &inputs.daily_pvlgd[*e];
        let pv = month_end(daily);
        for (m, f) in cds_factors(daily) {
            keys.push(((*e).clone(), m));
            cds.push((pv[&m], f));
        }
    }
    let n = keys.len();
    let mut cols: BTreeMap<&str, Vec<Option<f64>>> =
        FACTOR_COLUMNS.iter().map(|c| (*c, vec![None; n])).collect();

    // Calls per (entity, month): the last call of the month supplies the
    // call-level variables.
    let mut call_at: HashMap<(&str, Month), &CallInfo> = HashMap::new();
    for c in &inputs.calls {
        call_at.insert((c.entity_id.as_str(), c.month), c);
    }
    let mut calls_by_month: BTreeMap<Month, Vec<&CallInfo>> = BTreeMap::new();
    for c in &inputs.calls {
        calls_by_month.entry(c.month).or_default().push(c);
    }

    let mut num_anlst: HashMap<(String, Month), (f64, Option<f64>)> = HashMap::new();
    let analyst_at = |e: &str, t: Month| -> (f64, Option<f64>) {
        let Some(a) = inputs.analysts.get(e) else { return (0.0, None) };
        let months: Vec<(f64, f64, f64)> = (1..=12)
            .filter_map(|k| a.get(&t.offset(-k)).map(|x| (x.mean, x.std, x.count)))
            .collect();
        analyst_dispersion(&months)
    };

    for (i, (e, t)) in keys.iter().enumerate() {
        let (pv, f) = cds[i];
        let set = |cols: &mut BTreeMap<&str, Vec<Option<f64>>>, c: &str, v: Option<f64>| {
            cols.get_mut(c).unwrap()[i] = v;
        };
        set(&mut cols, "PVLGD", Some(pv));
        set(&mut cols, "CDSChg_1", f.chg_1);
        set(&mut cols, "CDSChg_26", f.chg_26);
        set(&mut cols, "RVCredit", f.rv_credit);
        set(&mut cols, "ILLIQ", f.illiq);
        let rating = inputs.ratings.get(e).and_then(|r| r.range(..=*t).next_back()).map(|(_, &r)| f64::from(r));
        set(&mut cols, "Rating", rating);

        let eq = inputs.equity.get(e);
        let prices: BTreeMap<Month, f64> =
            eq.map(|m| m.iter().map(|(k, v)| (*k, v.price)).collect()).unwrap_or_default();
        set(&mut cols, "EqRet_1", eq_ret_1(&prices, *t));
        set(&mut cols, "EqRet_26", eq_ret_26(&prices, *t));
        let now = eq.and_then(|m| m.get(t));
        set(&mut cols, "Size", now.and_then(|x| size(x.shares, x.price)));

        let reports = inputs.fundamentals.get(e).map(Vec::as_slice).unwrap_or(&[]);
        let fund = fundamentals_for(reports, *t);
        let fund_year_ago = fundamentals_for(reports, t.offset(-12));
        if let (Some(x), Some(fd)) = (now, fund) {
            let g = |k: &str| fd.get(k);
            set(&mut cols, "RatioBM", g("atq").zip(g("ltq")).and_then(|(a, l)| ratio_bm(a, l, x.shares, x.price)));
            set(&mut cols, "EarnYield", g("epsfiq").and_then(|v| earn_yield(v, x.price)));
            let dd = match (g("dlcq"), g("dlttq"), eq.and_then(|m| trailing_equity(m, *t))) {
                (Some(dl), Some(dt), Some((r, sig))) => {
                    dist_default(x.shares * x.price, dl + 0.5 * dt, r, sig, 1.0)
                }
                _ => None,
            };
            set(&mut cols, "DistDefault", dd);
            let sue_v = match (g("epsfiq"), fund_year_ago.and_then(|f| f.get("epsfiq"))) {
                (Some(a), Some(b)) => sue(a, b, x.price),
                _ => None,
            };
            set(&mut cols, "SUE", sue_v);
        }
        if let Some(fd) = fund {
            let p = match (fd.get("ibadjq"), fd.get("dvpq"), fd.get("txdiq"), fd.get("ceqq")) {
                (Some(a), Some(b), Some(c), Some(d)) => profit(a, b, c, d),
                _ => None,
            };
            set(&mut cols, "Profit", p);
        }

        let (na, disp) = analyst_at(e, *t);
        num_anlst.insert((e.clone(), *t), (na, disp));
        set(&mut cols, "NumAnlst", Some(na));
        set(&mut cols, "DispAnlst", disp);

        if let Some(c) = call_at.get(&(e.as_str(), *t)) {
            set(&mut cols, "TransLen", Some(c.stats.words as f64));
            set(&mut cols, "FKGrade", c.stats.fk_grade());
            set(&mut cols, "HasCall", Some(1.0));
        } else {
            set(&mut cols, "HasCall", Some(0.0));
        }
    }

    // Deciles. Call-level variables compare against calls in months
    // t−12..t−1; analyst variables against firms with a call in t−12..t,
    // valued at t.
    let mut d_cols: BTreeMap<&str, Vec<Option<f64>>> = ["D_TransLen", "D_FKGrade", "D_NumAnlst", "D_DispAnlst"]
        .into_iter()
        .map(|c| (c, vec![None; n]))
        .collect();
    for (i, (e, t)) in keys.iter().enumerate() {
        let Some(c) = call_at.get(&(e.as_str(), *t)) else { continue };
        let past: Vec<&CallInfo> =
            (1..=12).flat_map(|k| calls_by_month.get(&t.offset(-k)).into_iter().flatten().copied()).collect();
        let lens: Vec<f64> = past.iter().map(|p| p.stats.words as f64).collect();
        let fks: Vec<f64> = past.iter().filter_map(|p| p.stats.fk_grade()).collect();
        d_cols.get_mut("D_TransLen").unwrap()[i] = decile(c.stats.words as f64, &lens).map(f64::from);
        d_cols.get_mut("D_FKGrade").unwrap()[i] =
            c.stats.fk_grade().and_then(|v| decile(v, &fks)).map(f64::from);

        let firms: BTreeSet<&str> = (0..=12)
            .flat_map(|k| calls_by_month.get(&t.offset(-k)).into_iter().flatten())
            .map(|p| p.entity_id.as_str())
            .collect();
        let mut nums = Vec::new();
        let mut disps = Vec::new();
        for f in firms {
            let (na, d) = num_anlst.get(&(f.to_string(), *t)).copied().unwrap_or_else(|| analyst_at(f, *t));
            nums.push(na);
            disps.extend(d);
        }
        let (na, disp) = num_anlst[&(e.clone(), *t)];
        d_cols.get_mut("D_NumAnlst").unwrap()[i] = decile(na, &nums).map(f64::from);
        d_cols.get_mut("D_DispAnlst").unwrap()[i] = disp.and_then(|v| decile(v, &disps)).map(f64::from);
    }

    let mut frame = Frame::new(keys.iter().map(|k| k.0.clone()).collect(), keys.iter().map(|k| k.1).collect())?;
    for c in FACTOR_COLUMNS {
        frame.set_column(*c, cols.remove(c).unwrap())?;
    }
    for (c, v) in d_cols {
        frame.set_column(c, demean(&v))?;
    }
    if let Some(extra) = &inputs.extras {
        let names: Vec<String> = extra.column_names().to_vec();
        for name in &names {
            validate_passthrough(name, extra.require(name)?)?;
        }
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        frame.left_join(extra, &refs)?;
    }
    Ok(frame)
}

fn validate_passthrough(name: &str, values: &[Option<f64>]) -> Result<()> {
    let bad = |ok: &dyn Fn(f64) -> bool| values.iter().flatten().any(|&v| !ok(v));
    let invalid = match name {
        "LEV" => bad(&|v| (0.0..=1.0).contains(&v)),
        "IV" | "CompDepth" => bad(&|v| v >= 0.0),
        _ => bad(&|v| v.is_finite()),
    };
    if invalid {
        return Err(Error::validation(format!("pass-through column {name} has out-of-range values")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn business_series(months: i32, f: impl Fn(usize) -> f64) -> Vec<(NaiveDate, f64)> {
        let mut out = Vec::new();
        let start = Month::new(2015, 1).unwrap();
        let mut k = 0;
        for i in 0..months {
            for day in crate::time::business_days_in(start.offset(i)) {
                out.push((day, f(k)));
                k += 1;
            }
        }
        out
    }

    #[test]
    fn constant_series_gives_zeros() {
        let f = cds_factors(&business_series(14, |_| 10.0));
        let last = f.values().last().unwrap();
        assert_eq!(last.chg_1, Some(0.0));
        assert_eq!(last.chg_26, Some(0.0));
        assert_eq!(last.rv_credit, Some(0.0));
        assert_eq!(last.illiq, Some(0.0));
    }

    #[test]
    fn short_month_illiq_is_missing() {
        assert!(illiq(&[1.0; 9]).is_none());
        assert!(illiq(&[1.0; 11]).is_none());
        assert_eq!(illiq(&[1.0; 12]), Some(0.0));
    }

    #[test]
    fn alternating_log_series() {
        let delta = 0.01;
        let values: Vec<f64> = (0..21).map(|i| (if i % 2 == 0 { 0.0 } else { delta } as f64).exp() * 5.0).collect();
        let m = 20.0_f64;
        let expected = delta * delta * m / (m - 1.0);
        assert!((illiq(&values).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn monthly_changes_use_month_ends() {
        let daily: Vec<(NaiveDate, f64)> =
            (1..=8).map(|m| (d(2020, m, 28), m as f64 * m as f64)).collect();
        let f = cds_factors(&daily);
        let aug = f[&Month::new(2020, 8).unwrap()];
        assert_eq!(aug.chg_1, Some(49.0 - 36.0));
        assert_eq!(aug.chg_26, Some(36.0 - 4.0));
        assert_eq!(aug.rv_credit, None);
    }

    #[test]
    fn equity_examples() {
        let flat: BTreeMap<Month, f64> = (0..8).map(|k| (Month::new(2020, 1).unwrap().offset(k), 20.0)).collect();
        let t = Month::new(2020, 8).unwrap();
        assert_eq!(eq_ret_26(&flat, t), Some(0.0));
        assert_eq!(eq_ret_1(&flat, t), Some(0.0));
        assert_eq!(size(100.0, 20.0), Some(2000f64.ln()));
        assert_eq!(sue(1.2, 1.2, 30.0), Some(0.0));
        assert_eq!(profit(1.0, 0.0, 0.0, 0.0), None);
        assert_eq!(ratio_bm(50.0, 30.0, 10.0, 4.0), Some(0.5));
        assert_eq!(earn_yield(2.0, 40.0), Some(0.05));
    }

    #[test]
    fn distance_to_default() {
        let sigma_e = 0.4;
        let sigma_v = 0.5 * sigma_e + 0.5 * (0.05 + 0.25 * sigma_e);
        let dd = dist_default(1.0, 1.0, sigma_v * sigma_v / 2.0, sigma_e, 1.0).unwrap();
        assert!((dd - 2f64.ln() / sigma_v).abs() < 1e-14);
        assert!(dist_default(1.0, 0.0, 0.1, 0.3, 1.0).is_none());
        // Large equity volatility: DD/σ_E tends to −a/2 with
        // a = E/(E+D) + 0.25·D/(E+D).
        let (e, dbt) = (3.0, 1.0);
        let a = e / (e + dbt) + 0.25 * dbt / (e + dbt);
        let big = 1e6;
        let ratio = dist_default(e, dbt, 0.05, big, 1.0).unwrap() / big;
        assert!((ratio + a / 2.0).abs() < 1e-5);
        let far = dist_default(1e6, 1.0, 0.0, 0.3, 1.0).unwrap();
        let sv = (1e6 / (1e6 + 1.0)) * 0.3 + (1.0 / (1e6 + 1.0)) * (0.05 + 0.075);
        assert!((far - ((1e6 + 1.0f64).ln() - sv * sv / 2.0) / sv).abs() < 1e-9);
    }

    #[test]
    fn dispersion_examples() {
        assert_eq!(analyst_dispersion(&[(10.0, 0.0, 1.0)]), (1.0, Some(0.0)));
        let (_, d) = analyst_dispersion(&[(10.0, 0.0, 1.0), (20.0, 0.0, 1.0)]);
        assert!((d.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let (_, d) = analyst_dispersion(&vec![(10.0, 2.0, 3.0); 12]);
        assert!((d.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(analyst_dispersion(&[]), (0.0, None));
    }

    #[test]
    fn pooled_dispersion_matches_raw_forecasts() {
        let groups: Vec<Vec<f64>> = vec![vec![10.0, 12.0, 11.0], vec![9.0], vec![14.0, 13.0]];
        let triples: Vec<(f64, f64, f64)> = groups
            .iter()
            .map(|g| {
                let m = stats::mean(g);
                let var = g.iter().map(|x| (x - m).powi(2)).sum::<f64>() / g.len() as f64;
                (m, var.sqrt(), g.len() as f64)
            })
            .collect();
        let all: Vec<f64> = groups.concat();
        let m = stats::mean(&all);
        let sd = (all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / all.len() as f64).sqrt();
        let (n, d) = analyst_dispersion(&triples);
        assert_eq!(n, 6.0);
        assert!((d.unwrap() - sd / m).abs() < 1e-14);
    }

    #[test]
    fn fk_examples() {
        assert!((fk_grade(100, 10, 150).unwrap() - 6.01).abs() < 1e-12);
        assert_eq!(fk_grade(200, 20, 300), fk_grade(100, 10, 150));
        assert!((fk_grade(1, 1, 1).unwrap() + 3.4).abs() < 1e-12);
        assert!(fk_grade(0, 1, 0).is_none());
    }

    #[test]
    fn syllable_heuristic() {
        assert_eq!(count_syllables("cat"), 1);
        assert_eq!(count_syllables("make"), 1);
        assert_eq!(count_syllables("the"), 1);
        assert_eq!(count_syllables("liquidity"), 4);
        assert_eq!(count_syllables("table"), 2);
        let s = TextStats::of("Debt fell. Cash rose!");
        assert_eq!((s.words, s.sentences, s.syllables), (4, 2, 4));
    }

    #[test]
    fn decile_examples() {
        let comp: Vec<f64> = (1..=9).map(f64::from).collect();
        assert_eq!(decile(0.0, &comp), Some(1));
        assert_eq!(decile(5.0, &comp), Some(5));
        assert_eq!(decile(100.0, &comp), Some(10));
        let even: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!(matches!(decile(5.5, &even), Some(5) | Some(6)));
        assert_eq!(decile(1.0, &[]), None);
        let demeaned = demean(&[Some(1.0), Some(10.0), None]);
        assert_eq!(demeaned, vec![Some(-4.5), Some(4.5), None]);
    }

    #[test]
    fn winsorize_examples() {
        let xs: Vec<Option<f64>> = (1..=100).map(|v| Some(f64::from(v))).collect();
        let w = winsorize(&xs, 0.01, 0.99);
        assert!((w[0].unwrap() - 1.99).abs() < 1e-12);
        assert!((w[99].unwrap() - 99.01).abs() < 1e-12);
        let med = |v: &[Option<f64>]| stats::median(&v.iter().flatten().copied().collect::<Vec<_>>());
        assert_eq!(med(&w), med(&xs));
        let same = vec![Some(3.0); 5];
        assert_eq!(winsorize(&same, 0.01, 0.99), same);
        assert_eq!(winsorize(&[None, Some(1.0)], 0.01, 0.99), vec![None, Some(1.0)]);
    }

    #[test]
    fn iqr_examples() {
        let xs: Vec<Option<f64>> = (0..101).map(|v| Some(f64::from(v))).collect();
        let z = iqr_standardize(&xs).unwrap();
        let vals: Vec<f64> = z.iter().flatten().copied().collect();
        assert!((stats::percentile(&vals, 0.75) - stats::percentile(&vals, 0.25) - 1.0).abs() < 1e-12);
        let shifted: Vec<Option<f64>> = xs.iter().map(|v| v.map(|x| 3.0 * x - 7.0)).collect();
        let z2 = iqr_standardize(&shifted).unwrap();
        for (a, b) in z.iter().zip(&z2) {
            assert!((a.unwrap() - b.unwrap()).abs() < 1e-12);
        }
        assert!(iqr_standardize(&[Some(1.0), Some(1.0), Some(1.0)]).is_err());
    }

    #[test]
    fn iqr_of_normal_sample() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<Option<f64>> = (0..200_000).map(|_| Some(StandardNormal.sample(&mut rng))).collect();
        let z: Vec<f64> = iqr_standardize(&xs).unwrap().into_iter().flatten().collect();
        assert!((stats::stdev(&z) - 1.0 / 1.349).abs() < 0.01);
    }

    #[test]
    fn ratings_and_lag() {
        assert_eq!(rating_score("BBB-"), Some(4));
        assert_eq!(rating_score("aa+"), Some(2));
        assert_eq!(rating_score("NR"), None);
        assert_eq!(availability_month(d(2015, 3, 31)), Month::new(2015, 6).unwrap());
        let reports = vec![
            Fundamentals { data_date: Some(d(2015, 3, 31)), fields: HashMap::new() },
            Fundamentals { data_date: Some(d(2014, 9, 30)), fields: HashMap::new() },
        ];
        let june = Month::new(2015, 6).unwrap();
        assert_eq!(fundamentals_for(&reports, june).unwrap().data_date, Some(d(2015, 3, 31)));
        assert!(fundamentals_for(&reports, june.offset(-1)).is_none());
        assert!(fundamentals_for(&reports, june.offset(3)).is_none());
    }

    proptest! {
        #[test]
        fn decile_is_monotone_and_order_free(
            mut comp in proptest::collection::vec(-100.0f64..100.0, 1..60),
            a in -120.0f64..120.0,
            b in -120.0f64..120.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let dl = decile(lo, &comp).unwrap();
            let dh = decile(hi, &comp).unwrap();
            prop_assert!(dl <= dh);
            prop_assert!((1..=10).contains(&dl));
            comp.reverse();
            prop_assert_eq!(decile(lo, &comp).unwrap(), dl);
        }
    }
}
