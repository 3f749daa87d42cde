//! Pipeline configuration and its validation against the model menus.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LassoOptions, Lookback, ModelConfig};
use crate::panel::RegressionSpec;
use crate::portfolio::{BacktestConfig, RatingGroup};
use crate::time::Month;

pub const TOP_N_MENU: &[usize] = &[2000, 5000];
pub const T_C_MENU: &[f64] = &[1.0 / 3.0, 0.5, 1.0];
pub const N_FS_MENU: &[usize] = &[250, 500, 1000];
pub const LOOKBACK_MENU: &[Lookback] =
    &[Lookback::Months(24), Lookback::Months(36), Lookback::Months(60), Lookback::Expanding];
pub const UPDATE_MENU: &[u32] = &[1, 12];

/// Tolerance when matching a configured `t_c` to the menu, so `0.3333`
/// reads as one third.
const T_C_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperGrid {
    pub top_n: Vec<usize>,
    pub t_c: Vec<f64>,
    pub n_fs: Vec<usize>,
    pub lookback: Vec<Lookback>,
    pub update_months: Vec<u32>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            top_n: TOP_N_MENU.to_vec(),
            t_c: T_C_MENU.to_vec(),
            n_fs: N_FS_MENU.to_vec(),
            lookback: LOOKBACK_MENU.to_vec(),
            update_months: UPDATE_MENU.to_vec(),
        }
    }
}

fn snap_t_c(v: f64) -> Option<f64> {
    T_C_MENU.iter().copied().find(|m| (m - v).abs() <= T_C_TOL)
}

fn check_menu<T: PartialEq + std::fmt::Debug>(name: &str, values: &[T], menu: &[T]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::validation(format!("{name} grid is empty")));
    }
    for v in values {
        if !menu.contains(v) {
            return Err(Error::validation(format!("{name} = {v:?} is not one of {menu:?}")));
        }
    }
    Ok(())
}

impl HyperGrid {
    pub fn validate(&self) -> Result<()> {
        check_menu("top_n", &self.top_n, TOP_N_MENU)?;
        check_menu("n_fs", &self.n_fs, N_FS_MENU)?;
        check_menu("lookback", &self.lookback, LOOKBACK_MENU)?;
        check_menu("update_months", &self.update_months, UPDATE_MENU)?;
        if self.t_c.is_empty() {
            return Err(Error::validation("t_c grid is empty"));
        }
        for &t in &self.t_c {
            if snap_t_c(t).is_none() {
                return Err(Error::validation(format!("t_c = {t} is not one of 1/3, 1/2, 1")));
            }
        }
        Ok(())
    }

    /// Every rolling configuration, in grid order.
    pub fn models(&self) -> Vec<ModelConfig> {
        let mut out = Vec::new();
        for &top_n in &self.top_n {
            for &t in &self.t_c {
                let t_c = snap_t_c(t).unwrap_or(t);
                for &n_fs in &self.n_fs {
                    for &lookback in &self.lookback {
                        for &update_months in &self.update_months {
                            out.push(ModelConfig { top_n, t_c, n_fs, lookback, update_months });
                        }
                    }
                }
            }
        }
        out
    }

    /// Distinct `(N, t_c, N_FS)` combinations for full-sample fits. Lookback
    /// and update frequency do not apply and are set to expanding / 12.
    pub fn full_sample_models(&self) -> Vec<ModelConfig> {
        let mut seen = BTreeSet::new();
        self.models()
            .into_iter()
            .filter(|m| seen.insert((m.top_n, (m.t_c * 1e6).round() as i64, m.n_fs)))
            .map(|m| ModelConfig { lookback: Lookback::Expanding, update_months: 12, ..m })
            .collect()
    }
}

/// Declared input files. Only `transcripts` and `cds` are required.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub transcripts: PathBuf,
    pub cds: PathBuf,
    #[serde(default)]
    pub id_map: Option<PathBuf>,
    #[serde(default)]
    pub equity: Option<PathBuf>,
    #[serde(default)]
    pub fundamentals: Option<PathBuf>,
    #[serde(default)]
    pub analysts: Option<PathBuf>,
    #[serde(default)]
    pub ratings: Option<PathBuf>,
    #[serde(default)]
    pub extras: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordListPaths {
    #[serde(default)]
    pub credit_words: Option<PathBuf>,
    #[serde(default)]
    pub excluded_phrases: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub lasso: u64,
    pub null: u64,
    /// Seed for the negative-control shuffle of call texts.
    pub shuffle: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { lasso: 20_240_601, null: 20_240_601, shuffle: 7 }
    }
}

/// One `(l, u)` pair of single-name weight bounds. Totals default by
/// rating group when absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsPair {
    pub l: f64,
    pub u: f64,
    #[serde(default, rename = "L")]
    pub lower_total: Option<f64>,
    #[serde(default, rename = "U")]
    pub upper_total: Option<f64>,
}

impl BoundsPair {
    pub fn backtest_config(&self, group: RatingGroup) -> BacktestConfig {
        let (dl, du) = group.default_totals();
        BacktestConfig {
            rating_group: group,
            l: self.l,
            u: self.u,
            lower_total: self.lower_total.unwrap_or(dl),
            upper_total: self.upper_total.unwrap_or(du),
        }
    }
}

fn default_bounds() -> Vec<BoundsPair> {
    [(-0.1, 0.1), (-0.5, 0.5)]
        .into_iter()
        .map(|(l, u)| BoundsPair { l, u, lower_total: None, upper_total: None })
        .collect()
}

fn default_groups() -> Vec<RatingGroup> {
    vec![RatingGroup::Ig, RatingGroup::Hy]
}

fn default_rate() -> f64 {
    0.0226
}

fn default_radius() -> usize {
    5
}

fn default_ngram() -> usize {
    3
}

fn default_trials() -> usize {
    100
}

/// The 12-month-ahead PVLGD change on the level and the credit score.
pub fn default_regressions() -> Vec<RegressionSpec> {
    let mut spec = RegressionSpec::new("D12.PVLGD", &["PVLGD", "CS"]);
    spec.name = "forecast_12".into();
    vec![spec]
}

/// A whole pipeline run as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: InputPaths,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub grid: HyperGrid,
    /// First updating month of the rolling fits; defaults to the first
    /// call month plus the shortest fixed lookback.
    #[serde(default)]
    pub first_training_month: Option<Month>,
    #[serde(default = "default_bounds")]
    pub bounds: Vec<BoundsPair>,
    #[serde(default = "default_groups")]
    pub rating_groups: Vec<RatingGroup>,
    #[serde(default)]
    pub word_lists: WordListPaths,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_rate")]
    pub risk_free_rate: f64,
    #[serde(default = "default_radius")]
    pub window_radius: usize,
    #[serde(default = "default_ngram")]
    pub ngram_max: usize,
    #[serde(default = "default_trials")]
    pub null_trials: usize,
    /// Calls from these sectors are dropped before modelling.
    #[serde(default)]
    pub exclude_sectors: Vec<String>,
    #[serde(default = "default_regressions")]
    pub regressions: Vec<RegressionSpec>,
    /// Negative control: permute call texts across calls before fitting.
    #[serde(default)]
    pub shuffle_text: bool,
    /// Skip the portfolio and null-simulation stages.
    #[serde(default)]
    pub skip_backtest: bool,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.bounds.is_empty() {
            return Err(Error::validation("bounds grid is empty"));
        }
        if self.rating_groups.is_empty() {
            return Err(Error::validation("no rating groups"));
        }
        for b in &self.bounds {
            for g in &self.rating_groups {
                b.backtest_config(*g).bounds()?;
            }
        }
        if !(0.0..1.0).contains(&self.risk_free_rate) {
            return Err(Error::validation(format!("risk-free rate {} outside [0, 1)", self.risk_free_rate)));
        }
        if !(1..=3).contains(&self.ngram_max) {
            return Err(Error::validation("ngram_max must be 1, 2 or 3"));
        }
        for r in &self.regressions {
            r.validate()?;
        }
        Ok(())
    }

    pub fn lasso_options(&self) -> LassoOptions {
        LassoOptions { seed: self.seeds.lasso, ..LassoOptions::default() }
    }
}
