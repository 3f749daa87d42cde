//! Constant-intensity CDS pricing.
//!
//! Survival to time `t` is `exp(-h t)`. For a contract with coupon dates
//! `t_1 < ... < t_C` (`t_0 = 0`), flat continuously compounded rate `r` and
//! loss given default `L` per 100 face:
//!
//! ```text
//! PV01     = (1/100) * sum_i exp(-(r + h) t_i) (t_i - t_{i-1})
//! PVLGD    = sum_i (exp(-h t_{i-1}) - exp(-h t_i)) exp(-r t_i) L
//! spread   = PVLGD / PV01            (basis points)
//! ```
//!
//! Observed spreads are mapped back to intensities by linear interpolation
//! over a precomputed par-spread table on a fixed intensity grid.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, OnceLock};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractSpec {
    pub maturity_years: f64,
    pub coupon_interval_years: f64,
    /// Dollars lost per 100 of face on default.
    pub loss_given_default: f64,
    /// Flat rate, continuously compounded, per annum.
    pub risk_free_rate: f64,
}

impl Default for ContractSpec {
    fn default() -> Self {
        ContractSpec {
            maturity_years: 5.0,
            coupon_interval_years: 0.25,
            loss_given_default: 60.0,
            risk_free_rate: 0.0226,
        }
    }
}

impl ContractSpec {
    pub fn with_rate(risk_free_rate: f64) -> Self {
        ContractSpec { risk_free_rate, ..Default::default() }
    }

    /// Number of coupons `C = maturity / interval`; must be a positive integer.
    pub fn coupon_count(&self) -> Result<usize> {
        if !(self.maturity_years > 0.0) || !(self.coupon_interval_years > 0.0) {
            return Err(Error::validation("maturity and coupon interval must be positive"));
        }
        if !(0.0..=100.0).contains(&self.loss_given_default) {
            return Err(Error::validation(format!(
                "loss given default {} outside [0, 100]",
                self.loss_given_default
            )));
        }
        if !self.risk_free_rate.is_finite() {
            return Err(Error::validation("risk-free rate must be finite"));
        }
        let ratio = self.maturity_years / self.coupon_interval_years;
        let count = ratio.round();
        if count < 1.0 || (ratio - count).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::validation(format!(
                "maturity {} is not a whole number of {}-year coupon periods",
                self.maturity_years, self.coupon_interval_years
            )));
        }
        Ok(count as usize)
    }

    /// Coupon dates `t_1..t_C`, in years.
    pub fn coupon_times(&self) -> Result<Vec<f64>> {
        let c = self.coupon_count()?;
        Ok((1..=c).map(|i| i as f64 * self.coupon_interval_years).collect())
    }

    fn cache_key(&self) -> [u64; 4] {
        [
            self.risk_free_rate.to_bits(),
            self.loss_given_default.to_bits(),
            self.maturity_years.to_bits(),
            self.coupon_interval_years.to_bits(),
        ]
    }
}

fn check_intensity(h: f64) -> Result<()> {
    if h.is_nan() || h < 0.0 {
        return Err(Error::validation(format!("intensity must be non-negative, got {h}")));
    }
    Ok(())
}

pub fn survival_prob(h: f64, t: f64) -> Result<f64> {
    check_intensity(h)?;
    if t.is_nan() || t < 0.0 {
        return Err(Error::validation(format!("time must be non-negative, got {t}")));
    }
    Ok((-h * t).exp())
}

pub fn pv01(h: f64, spec: &ContractSpec) -> Result<f64> {
    check_intensity(h)?;
    let times = spec.coupon_times()?;
    let r = spec.risk_free_rate;
    let mut prev = 0.0;
    let mut total = 0.0;
    for &t in &times {
        total += (-(r + h) * t).exp() * (t - prev);
        prev = t;
    }
    Ok(total / 100.0)
}

pub fn pvlgd_from_intensity(h: f64, spec: &ContractSpec) -> Result<f64> {
    check_intensity(h)?;
    let times = spec.coupon_times()?;
    let r = spec.risk_free_rate;
    let mut prev_survival = 1.0;
    let mut total = 0.0;
    for &t in &times {
        let survival = (-h * t).exp();
        total += (prev_survival - survival) * (-r * t).exp();
        prev_survival = survival;
    }
    Ok(total * spec.loss_given_default)
}

/// Par spread in basis points.
pub fn par_spread(h: f64, spec: &ContractSpec) -> Result<f64> {
    let protection = pvlgd_from_intensity(h, spec)?;
    if protection == 0.0 {
        return Ok(0.0);
    }
    Ok(protection / pv01(h, spec)?)
}

/// Strictly increasing intensity knots starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityGrid {
    knots: Vec<f64>,
}

impl IntensityGrid {
    /// 0 to 0.20 by 0.0025, 0.24 to 4 by 0.04, then 4.04 upward by 0.5,
    /// closed with a knot at 200.
    pub fn standard() -> Self {
        let mut knots: Vec<f64> = (0..=80).map(|k| k as f64 * 0.0025).collect();
        knots.extend((0..=94).map(|k| 0.24 + k as f64 * 0.04));
        knots.extend((0..).map(|k| 4.04 + k as f64 * 0.5).take_while(|&h| h <= 200.0));
        if *knots.last().unwrap() < 200.0 {
            knots.push(200.0);
        }
        IntensityGrid { knots }
    }

    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.first() != Some(&0.0) {
            return Err(Error::validation("intensity grid must start at 0"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::validation("intensity grid must be strictly increasing"));
        }
        Ok(IntensityGrid { knots })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        for k in &self.knots {
            k.to_bits().hash(&mut hasher);
        }
        hasher.finish()
    }
}

impl Default for IntensityGrid {
    fn default() -> Self {
        IntensityGrid::standard()
    }
}

/// Par spreads evaluated at every grid knot for one contract.
#[derive(Debug, Clone)]
pub struct SpreadTable {
    spec: ContractSpec,
    knots: Vec<f64>,
    spreads: Vec<f64>,
}

type CacheKey = ([u64; 4], u64);

fn table_cache() -> &'static Mutex<HashMap<CacheKey, Arc<SpreadTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<SpreadTable>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

impl SpreadTable {
    pub fn new(spec: &ContractSpec, grid: &IntensityGrid) -> Result<Self> {
        spec.coupon_count()?;
        let spreads = grid
            .knots
            .iter()
            .map(|&h| par_spread(h, spec))
            .collect::<Result<Vec<_>>>()?;
        if spreads.windows(2).any(|w| !(w[1] > w[0])) || spreads.iter().any(|s| !s.is_finite()) {
            return Err(Error::validation("par spread is not strictly increasing over the grid"));
        }
        Ok(SpreadTable { spec: *spec, knots: grid.knots.clone(), spreads })
    }

    /// Shared table for `(spec, grid)`, built on first use.
    pub fn cached(spec: &ContractSpec, grid: &IntensityGrid) -> Result<Arc<SpreadTable>> {
        let key = (spec.cache_key(), grid.fingerprint());
        if let Some(t) = table_cache().lock().unwrap().get(&key) {
            return Ok(Arc::clone(t));
        }
        let table = Arc::new(SpreadTable::new(spec, grid)?);
        let mut cache = table_cache().lock().unwrap();
        Ok(Arc::clone(cache.entry(key).or_insert(table)))
    }

    pub fn spec(&self) -> &ContractSpec {
        &self.spec
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn spreads(&self) -> &[f64] {
        &self.spreads
    }

    /// Largest spread the table can invert.
    pub fn ceiling_bp(&self) -> f64 {
        *self.spreads.last().unwrap()
    }

    /// Index `k` of the bracketing segment `[knot_k, knot_{k+1}]` for `spread_bp`.
    pub fn segment(&self, spread_bp: f64) -> Result<usize> {
        if spread_bp.is_nan() || spread_bp < 0.0 {
            return Err(Error::validation(format!("spread must be non-negative, got {spread_bp}")));
        }
        if spread_bp > self.ceiling_bp() {
            return Err(Error::SpreadOutOfRange { spread_bp, ceiling_bp: self.ceiling_bp() });
        }
        let upper = self.spreads.partition_point(|&s| s < spread_bp);
        Ok(upper.saturating_sub(1).min(self.spreads.len() - 2))
    }

    pub fn intensity(&self, spread_bp: f64) -> Result<f64> {
        let k = self.segment(spread_bp)?;
        let (s0, s1) = (self.spreads[k], self.spreads[k + 1]);
        let (h0, h1) = (self.knots[k], self.knots[k + 1]);
        if spread_bp == s0 {
            return Ok(h0);
        }
        if spread_bp == s1 {
            return Ok(h1);
        }
        let w = (spread_bp - s0) / (s1 - s0);
        Ok(h0 + w * (h1 - h0))
    }

    /// Width of the bracketing segment in spread space.
    pub fn local_spread_step(&self, spread_bp: f64) -> Result<f64> {
        let k = self.segment(spread_bp)?;
        Ok(self.spreads[k + 1] - self.spreads[k])
    }

    /// Width of the bracketing segment in intensity space.
    pub fn local_intensity_step(&self, spread_bp: f64) -> Result<f64> {
        let k = self.segment(spread_bp)?;
        Ok(self.knots[k + 1] - self.knots[k])
    }
}

pub fn intensity_from_spread(spread_bp: f64, spec: &ContractSpec, grid: &IntensityGrid) -> Result<f64> {
    SpreadTable::cached(spec, grid)?.intensity(spread_bp)
}

pub fn pvlgd_from_spread(spread_bp: f64, spec: &ContractSpec, grid: &IntensityGrid) -> Result<f64> {
    let h = intensity_from_spread(spread_bp, spec, grid)?;
    pvlgd_from_intensity(h, spec)
}

/// Intensity whose exact PVLGD equals `pvlgd`, by bisection. Used to build
/// spreads consistent with a target PVLGD path.
pub fn intensity_from_pvlgd(pvlgd: f64, spec: &ContractSpec) -> Result<f64> {
    // Supremum as h grows: all default mass lands in the first period.
    let ceiling = spec.loss_given_default * (-spec.risk_free_rate * spec.coupon_interval_years).exp();
    if pvlgd.is_nan() || pvlgd < 0.0 || pvlgd >= ceiling {
        return Err(Error::validation(format!("PVLGD {pvlgd} outside [0, {ceiling})")));
    }
    if pvlgd == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while pvlgd_from_intensity(hi, spec)? < pvlgd {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::validation("PVLGD too close to its ceiling"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pvlgd_from_intensity(mid, spec)? < pvlgd {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One entity-date CDS observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdsQuote {
    pub entity_id: String,
    pub date: NaiveDate,
    pub spread_bp: f64,
    pub pvlgd: f64,
    pub intensity: f64,
}

impl CdsQuote {
    pub fn price(
        entity_id: impl Into<String>,
        date: NaiveDate,
        spread_bp: f64,
        table: &SpreadTable,
    ) -> Result<Self> {
        let intensity = table.intensity(spread_bp)?;
        let pvlgd = pvlgd_from_intensity(intensity, table.spec())?;
        Ok(CdsQuote { entity_id: entity_id.into(), date, spread_bp, pvlgd, intensity })
    }
}
