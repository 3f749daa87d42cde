use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lasso::{credit_score, fit_lasso, implied_for_rows, LassoFit, LassoOptions};
use crate::error::{Error, Result};
use crate::selection::{select_tokens, RankedTokens};
use crate::text::{Document, DocumentTermMatrix};
use crate::time::Month;

/// Serialized as a month count or the string `"expanding"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lookback {
    Months(u32),
    Expanding,
}

impl Serialize for Lookback {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Lookback::Months(m) => s.serialize_u32(*m),
            Lookback::Expanding => s.serialize_str("expanding"),
        }
    }
}

impl<'de> Deserialize<'de> for Lookback {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Months(u32),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Months(m) => Ok(Lookback::Months(m)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl fmt::Display for Lookback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lookback::Months(m) => write!(f, "{m}"),
            Lookback::Expanding => f.write_str("expanding"),
        }
    }
}

impl std::str::FromStr for Lookback {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "expanding" => Ok(Lookback::Expanding),
            other => other
                .parse()
                .map(Lookback::Months)
                .map_err(|_| Error::validation(format!("lookback {s:?} is neither a month count nor 'expanding'"))),
        }
    }
}

/// One text-model specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub top_n: usize,
    pub t_c: f64,
    pub n_fs: usize,
    pub lookback: Lookback,
    pub update_months: u32,
}

impl ModelConfig {
    pub fn id(&self) -> String {
        let tc = if (self.t_c - 1.0 / 3.0).abs() < 1e-9 { "1/3".to_string() } else { format!("{}", self.t_c) };
        format!("N{}-tc{}-fs{}-lb{}-f{}", self.top_n, tc, self.n_fs, self.lookback, self.update_months)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    pub models: Vec<ModelConfig>,
    pub first_training_month: Month,
    pub lasso: LassoOptions,
}

/// Calls with their counts and aligned PVLGD targets, kept sorted by
/// (month, call id) so that any prefix in time is a stable slice.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TextPanel {
    docs: Vec<Document>,
    entity: Vec<String>,
    date: Vec<NaiveDate>,
    month: Vec<Month>,
    pvlgd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub doc: Document,
    pub entity_id: String,
    pub date: NaiveDate,
    pub pvlgd: f64,
}

impl TextPanel {
    pub fn new(mut rows: Vec<PanelRow>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| !r.pvlgd.is_finite()) {
            return Err(Error::validation(format!("call {} has a non-finite PVLGD", r.doc.id)));
        }
        rows.sort_by(|a, b| Month::of(a.date).cmp(&Month::of(b.date)).then_with(|| a.doc.id.cmp(&b.doc.id)));
        if let Some(w) = rows.windows(2).find(|w| w[0].doc.id == w[1].doc.id) {
            return Err(Error::validation(format!("duplicate call id {}", w[0].doc.id)));
        }
        let mut p = TextPanel::default();
        for r in rows {
            p.month.push(Month::of(r.date));
            p.entity.push(r.entity_id);
            p.date.push(r.date);
            p.pvlgd.push(r.pvlgd);
            p.docs.push(r.doc);
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn months(&self) -> &[Month] {
        &self.month
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn pvlgd(&self) -> &[f64] {
        &self.pvlgd
    }

    pub fn first_month(&self) -> Option<Month> {
        self.month.first().copied()
    }

    pub fn last_month(&self) -> Option<Month> {
        self.month.last().copied()
    }

    fn range(&self, start: Month, end: Month) -> std::ops::Range<usize> {
        let a = self.month.partition_point(|&m| m < start);
        let b = self.month.partition_point(|&m| m < end);
        a..b.max(a)
    }

    /// Rows with month in `[start, end)`. Training only ever sees such a
    /// slice.
    pub fn slice(&self, start: Month, end: Month) -> TextPanel {
        let r = self.range(start, end);
        TextPanel {
            docs: self.docs[r.clone()].to_vec(),
            entity: self.entity[r.clone()].to_vec(),
            date: self.date[r.clone()].to_vec(),
            month: self.month[r.clone()].to_vec(),
            pvlgd: self.pvlgd[r].to_vec(),
        }
    }

    pub fn retain(&self, keep: impl Fn(usize) -> bool) -> TextPanel {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        TextPanel {
            docs: idx.iter().map(|&i| self.docs[i].clone()).collect(),
            entity: idx.iter().map(|&i| self.entity[i].clone()).collect(),
            date: idx.iter().map(|&i| self.date[i]).collect(),
            month: idx.iter().map(|&i| self.month[i]).collect(),
            pvlgd: idx.iter().map(|&i| self.pvlgd[i]).collect(),
        }
    }

    pub fn entity(&self, i: usize) -> &str {
        &self.entity[i]
    }
}

/// A fitted model together with the window it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub model_id: String,
    pub config_index: usize,
    pub config: ModelConfig,
    pub train_start: Month,
    /// Exclusive.
    pub train_end: Month,
    /// Exclusive end of the months this fit scores.
    pub predict_end: Month,
    pub selected: RankedTokens,
    pub fit: LassoFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub entity_id: String,
    pub call_id: String,
    pub date: NaiveDate,
    pub month: Month,
    pub actual_pvlgd: f64,
    pub implied_pvlgd: f64,
    pub credit_score: f64,
    pub model_id: String,
    pub unknown_sector: bool,
}

/// Trains one configuration on a panel slice.
pub fn train(panel: &TextPanel, config: &ModelConfig, lasso: &LassoOptions) -> Result<(RankedTokens, LassoFit)> {
    let full = DocumentTermMatrix::build(&panel.docs, config.top_n);
    let ranked = select_tokens(&full, &panel.pvlgd, config.n_fs, config.t_c)?;
    let design = full.restrict_columns(&ranked.tokens);
    let fit = fit_lasso(&design, &panel.pvlgd, lasso)?;
    Ok((ranked, fit))
}

/// Scores every call in `panel` with one fitted model.
pub fn score_panel(panel: &TextPanel, fit: &LassoFit, model_id: &str) -> Vec<ScoreRow> {
    let m = DocumentTermMatrix::project(&panel.docs, &fit.vocabulary);
    implied_for_rows(fit, &m)
        .into_iter()
        .enumerate()
        .map(|(i, (implied, unknown))| ScoreRow {
            entity_id: panel.entity[i].clone(),
            call_id: panel.docs[i].id.clone(),
            date: panel.date[i],
            month: panel.month[i],
            actual_pvlgd: panel.pvlgd[i],
            implied_pvlgd: implied,
            credit_score: credit_score(panel.pvlgd[i], implied),
            model_id: model_id.to_string(),
            unknown_sector: unknown,
        })
        .collect()
}

/// Full-sample fit and in-sample scores for one configuration.
pub fn fit_full_sample(
    panel: &TextPanel,
    config: &ModelConfig,
    lasso: &LassoOptions,
) -> Result<(WindowFit, Vec<ScoreRow>)> {
    let (start, end) = match (panel.first_month(), panel.last_month()) {
        (Some(a), Some(b)) => (a, b.offset(1)),
        _ => return Err(Error::validation("empty panel")),
    };
    let (selected, fit) = train(panel, config, lasso)?;
    let id = config.id();
    let scores = score_panel(panel, &fit, &id);
    let wf = WindowFit {
        model_id: id,
        config_index: 0,
        config: config.clone(),
        train_start: start,
        train_end: end,
        predict_end: end,
        selected,
        fit,
    };
    Ok((wf, scores))
}

/// Start of the training window for updating month `s`. Fixed lookbacks
/// are clipped at the sample start, which is how a long lookback
/// bootstraps from a shorter one early in the sample.
pub fn window_start(lookback: Lookback, s: Month, sample_start: Month) -> Month {
    match lookback {
        Lookback::Expanding => sample_start,
        Lookback::Months(lb) => s.offset(-(lb as i32)).max(sample_start),
    }
}

/// `s0, s0+f, s0+2f, ...` up to and including `last`.
pub fn updating_months(s0: Month, f: u32, last: Month) -> Vec<Month> {
    let f = f.max(1) as i32;
    (0..).map(|k| s0.offset(k * f)).take_while(|&m| m <= last).collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RollingOutput {
    pub fits: Vec<WindowFit>,
    pub scores: Vec<ScoreRow>,
    pub skipped: Vec<(String, Month, String)>,
}

/// Rolling out-of-sample protocol: every configuration is retrained at
/// each of its updating months on `[window_start, s)` and scores calls in
/// `[s, s+f)`.
pub fn fit_rolling(panel: &TextPanel, cfg: &RollingConfig) -> Result<RollingOutput> {
    let (sample_start, last) = match (panel.first_month(), panel.last_month()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::validation("empty panel")),
    };
    if cfg.models.is_empty() {
        return Err(Error::validation("no model configurations"));
    }
    let jobs: Vec<(usize, Month)> = cfg
        .models
        .iter()
        .enumerate()
        .flat_map(|(k, m)| {
            updating_months(cfg.first_training_month, m.update_months, last).into_iter().map(move |s| (k, s))
        })
        .collect();
    let min_rows = 10 * cfg.lasso.folds;
    let results: Vec<Result<std::result::Result<(WindowFit, Vec<ScoreRow>), (String, Month, String)>>> = jobs
        .par_iter()
        .map(|&(k, s)| {
            let config = &cfg.models[k];
            let id = config.id();
            let start = window_start(config.lookback, s, sample_start);
            let training = panel.slice(start, s);
            if training.len() < min_rows {
                let why = format!("{} training rows, need {min_rows}", training.len());
                log::info!("skipping {id} at {s}: {why}");
                return Ok(Err((id, s, why)));
            }
            let (selected, fit) = match train(&training, config, &cfg.lasso) {
                Ok(v) => v,
                Err(Error::DegenerateTarget) => return Ok(Err((id, s, "constant target".into()))),
                Err(e) => return Err(e),
            };
            let predict_end = s.offset(config.update_months as i32);
            let scores = score_panel(&panel.slice(s, predict_end), &fit, &id);
            Ok(Ok((
                WindowFit {
                    model_id: id,
                    config_index: k,
                    config: config.clone(),
                    train_start: start,
                    train_end: s,
                    predict_end,
                    selected,
                    fit,
                },
                scores,
            )))
        })
        .collect();
    let mut out = RollingOutput::default();
    for r in results {
        match r? {
            Ok((wf, scores)) => {
                out.fits.push(wf);
                out.scores.extend(scores);
            }
            Err(skip) => out.skipped.push(skip),
        }
    }
    Ok(out)
}

/// The fit used for month `s`: among fits whose prediction window covers
/// `s`, the one with the highest training R², ties to the earlier
/// configuration.
pub fn select_best_model(fits: &[WindowFit], s: Month) -> Result<&WindowFit> {
    fits.iter()
        .filter(|f| f.train_end <= s && s < f.predict_end)
        .fold(None, |best: Option<&WindowFit>, f| match best {
            Some(b)
                if b.fit.r_squared > f.fit.r_squared
                    || (b.fit.r_squared == f.fit.r_squared && b.config_index <= f.config_index) =>
            {
                Some(b)
            }
            _ => Some(f),
        })
        .ok_or_else(|| Error::Missing(format!("no fitted model covers {s}")))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CreditScoreSeries {
    pub rows: Vec<ScoreRow>,
    /// Selected model per covered month.
    pub choice: BTreeMap<Month, String>,
    pub gaps: Vec<Month>,
}

/// Month-by-month concatenation: month `s` takes its rows only from the
/// fit chosen for `s`.
pub fn aggregate_scores(out: &RollingOutput, first: Month, last: Month) -> CreditScoreSeries {
    let mut series = CreditScoreSeries::default();
    let mut m = first;
    while m <= last {
        match select_best_model(&out.fits, m) {
            Ok(best) => {
                let chosen = (best.model_id.as_str(), best.train_end);
                series.choice.insert(m, best.model_id.clone());
                let before = series.rows.len();
                series.rows.extend(
                    out.scores
                        .iter()
                        .filter(|r| r.month == m && r.model_id == chosen.0 && window_of(out, r) == Some(chosen.1))
                        .cloned(),
                );
                if series.rows.len() == before {
                    series.gaps.push(m);
                }
            }
            Err(_) => series.gaps.push(m),
        }
        m = m.offset(1);
    }
    series
}

// Score rows do not carry their window, but for one model id exactly one
// window covers a given month.
fn window_of(out: &RollingOutput, row: &ScoreRow) -> Option<Month> {
    out.fits
        .iter()
        .find(|f| f.model_id == row.model_id && f.train_end <= row.month && row.month < f.predict_end)
        .map(|f| f.train_end)
}

/// Scores CSV: `entity_id,date,actual_pvlgd,implied_pvlgd,credit_score,model_id`.
pub fn write_scores<W: Write>(rows: &[ScoreRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["entity_id", "date", "actual_pvlgd", "implied_pvlgd", "credit_score", "model_id"])?;
    for r in rows {
        w.write_record([
            r.entity_id.clone(),
            r.date.to_string(),
            r.actual_pvlgd.to_string(),
            r.implied_pvlgd.to_string(),
            r.credit_score.to_string(),
            r.model_id.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::Io { path: "<scores>".into(), source: e })?;
    Ok(())
}

/// Serialized model: only nonzero coefficients are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub model_id: String,
    pub hyperparams: ModelConfig,
    pub train_start: Month,
    pub train_end: Month,
    pub lambda: f64,
    pub r_squared: f64,
    pub n_obs: usize,
    pub cv_seed: u64,
    pub intercepts: BTreeMap<String, f64>,
    pub coefficients: BTreeMap<String, f64>,
}

impl From<&WindowFit> for ModelFile {
    fn from(w: &WindowFit) -> Self {
        ModelFile {
            model_id: w.model_id.clone(),
            hyperparams: w.config.clone(),
            train_start: w.train_start,
            train_end: w.train_end,
            lambda: w.fit.lambda,
            r_squared: w.fit.r_squared,
            n_obs: w.fit.n_obs,
            cv_seed: w.fit.seed,
            intercepts: w.fit.sector_intercepts.clone(),
            coefficients: w.fit.nonzero().into_iter().map(|(t, b)| (t.to_string(), b)).collect(),
        }
    }
}

impl ModelFile {
    pub fn to_fit(&self) -> LassoFit {
        LassoFit {
            vocabulary: self.coefficients.keys().cloned().collect(),
            coefficients: self.coefficients.values().copied().collect(),
            sector_intercepts: self.intercepts.clone(),
            lambda: self.lambda,
            lambda_max: f64::NAN,
            r_squared: self.r_squared,
            n_obs: self.n_obs,
            seed: self.cv_seed,
            cv_mse: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(y: i32, mo: u32) -> Month {
        Month::new(y, mo).unwrap()
    }

    #[test]
    fn schedule_and_windows() {
        let s0 = m(2010, 1);
        assert_eq!(updating_months(s0, 12, m(2012, 6)), vec![s0, m(2011, 1), m(2012, 1)]);
        assert_eq!(updating_months(s0, 1, m(2010, 3)).len(), 3);
        let start = m(2008, 1);
        assert_eq!(window_start(Lookback::Expanding, m(2012, 5), start), start);
        assert_eq!(window_start(Lookback::Months(60), m(2011, 1), start), start);
        assert_eq!(window_start(Lookback::Months(24), m(2011, 1), start), m(2009, 1));
    }

    #[test]
    fn lookback_parses() {
        assert_eq!("expanding".parse::<Lookback>().unwrap(), Lookback::Expanding);
        assert_eq!("36".parse::<Lookback>().unwrap(), Lookback::Months(36));
        assert!("x".parse::<Lookback>().is_err());
    }

    fn dummy_fit(id: &str, k: usize, r2: f64, end: Month, f: i32) -> WindowFit {
        WindowFit {
            model_id: id.into(),
            config_index: k,
            config: ModelConfig {
                top_n: 2000,
                t_c: 1.0,
                n_fs: 250,
                lookback: Lookback::Months(36),
                update_months: f as u32,
            },
            train_start: end.offset(-36),
            train_end: end,
            predict_end: end.offset(f),
            selected: RankedTokens::default(),
            fit: LassoFit {
                vocabulary: vec![],
                coefficients: vec![],
                sector_intercepts: BTreeMap::new(),
                lambda: 0.0,
                lambda_max: 0.0,
                r_squared: r2,
                n_obs: 0,
                seed: 0,
                cv_mse: vec![],
            },
        }
    }

    #[test]
    fn best_model_by_r_squared() {
        let a = dummy_fit("a", 0, 0.60, m(2018, 1), 12);
        let b = dummy_fit("b", 1, 0.55, m(2018, 1), 12);
        assert_eq!(select_best_model(&[a.clone(), b.clone()], m(2018, 9)).unwrap().model_id, "a");
        let tie = dummy_fit("c", 1, 0.60, m(2018, 1), 12);
        assert_eq!(select_best_model(&[tie, a.clone()], m(2018, 9)).unwrap().model_id, "a");
        assert!(select_best_model(&[a], m(2019, 1)).is_err());
    }

    #[test]
    fn yearly_fit_covering_september() {
        let fits = vec![dummy_fit("y", 0, 0.5, m(2017, 1), 12), dummy_fit("y", 0, 0.5, m(2018, 1), 12)];
        let best = select_best_model(&fits, m(2018, 9)).unwrap();
        assert_eq!(best.train_end, m(2018, 1));
        assert_eq!(best.train_end.offset(-1), m(2017, 12));
    }
}
