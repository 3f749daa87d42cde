//! The end-to-end run: ingestion, alignment, text models, factors,
//! regressions, portfolios and null simulations.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::align::{align_call_to_cds, parse_timestamp};
use super::config::PipelineConfig;
use super::ids::IdMap;
use super::io::{self, Manifest};
use crate::error::{Error, Result};
use crate::factors::{build_factor_panel, month_end, CallInfo, FactorInputs, TextStats};
use crate::frame::Frame;
use crate::model::{
    aggregate_scores, fit_full_sample, fit_rolling, write_scores, ModelFile, PanelRow, RollingConfig, ScoreRow,
    TextPanel,
};
use crate::model::Lookback;
use crate::nullsim::{empirical_p_value, simulate_null, stars, NullConfig};
use crate::panel::{run_specs, RegressionResult};
use crate::portfolio::{backtest, MonthlyPanel, RatingGroup, ScoreObservation};
use crate::pricing::{ContractSpec, IntensityGrid, SpreadTable};
use crate::text::{process_transcripts, Transcript, WordLists};
use crate::time::Month;

/// One call after identifier resolution and quote matching. Unmatched
/// calls keep their row with an empty date and a status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedCall {
    pub call_id: String,
    pub source_id: String,
    pub entity_id: String,
    pub sector: String,
    pub timestamp: String,
    pub cds_date: Option<NaiveDate>,
    pub pvlgd: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullSampleSummary {
    pub model_id: String,
    pub r_squared: f64,
    pub lambda: f64,
    pub nonzero: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestSummary {
    pub rating_group: RatingGroup,
    pub l: f64,
    pub u: f64,
    #[serde(rename = "L")]
    pub lower_total: f64,
    #[serde(rename = "U")]
    pub upper_total: f64,
    pub months: usize,
    pub annualized_return: Option<f64>,
    pub sharpe: Option<f64>,
    pub null_mean: Option<f64>,
    pub null_sd: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub inputs_read: Vec<(String, PathBuf)>,
    pub quotes_priced: usize,
    pub quotes_dropped: usize,
    pub calls_total: usize,
    pub calls_matched: usize,
    pub calls_unmapped: usize,
    pub calls_unmatched: usize,
    pub calls_excluded: usize,
    pub full_sample: Vec<FullSampleSummary>,
    pub rolling_fits: usize,
    pub rolling_skipped: usize,
    pub rolling_scores: usize,
    pub regressions: Vec<RegressionResult>,
    pub regression_errors: Vec<(String, String)>,
    pub backtests: Vec<BacktestSummary>,
    pub outputs: Vec<PathBuf>,
}

struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Outputs<'_> {
    fn create(&mut self, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
        let path = self.dir.join(name);
        let f = std::fs::File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        self.written.push(path);
        Ok(std::io::BufWriter::new(f))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.flush().map_err(|e| Error::Io { path: self.dir.join(name), source: e })
    }

    fn rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.create(name)?);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::Io { path: self.dir.join(name), source: e })
    }
}

/// Default first updating month: the first call month plus the shortest
/// fixed lookback in the grid (24 months when only expanding windows are
/// configured).
fn default_first_training(cfg: &PipelineConfig, first_call: Month) -> Month {
    let lb = cfg
        .grid
        .lookback
        .iter()
        .filter_map(|l| match l {
            Lookback::Months(m) => Some(*m),
            Lookback::Expanding => None,
        })
        .min()
        .unwrap_or(24);
    first_call.offset(lb as i32)
}

/// Latest call score per entity-month.
fn score_column(frame: &Frame, scores: &[ScoreRow]) -> Vec<Option<f64>> {
    let mut latest: HashMap<(&str, Month), &ScoreRow> = HashMap::new();
    for s in scores {
        let slot = latest.entry((s.entity_id.as_str(), s.month)).or_insert(s);
        if (s.date, &s.call_id) > (slot.date, &slot.call_id) {
            *slot = s;
        }
    }
    (0..frame.len())
        .map(|i| latest.get(&(frame.entity[i].as_str(), frame.month[i])).map(|s| s.credit_score))
        .collect()
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let mut manifest = Manifest::from_config(cfg);
    manifest.check()?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::Io { path: cfg.output_dir.clone(), source: e })?;
    let mut out = Outputs { dir: &cfg.output_dir, written: Vec::new() };
    let mut report = PipelineReport::default();

    let lists = {
        let defaults = WordLists::default();
        let credit = match manifest.is_declared("credit_words") {
            true => WordLists::parse_list(&manifest.read_to_string("credit_words")?),
            false => defaults.credit_words().to_vec(),
        };
        let excluded = match manifest.is_declared("excluded_phrases") {
            true => WordLists::parse_list(&manifest.read_to_string("excluded_phrases")?),
            false => defaults.excluded_phrases().to_vec(),
        };
        WordLists::new(credit, excluded)?
    };

    // CDS quotes to daily PVLGD.
    let table = SpreadTable::cached(&ContractSpec::with_rate(cfg.risk_free_rate), &IntensityGrid::standard())?;
    let cds_rows = io::read_cds(manifest.open("cds")?)?;
    let (quotes, dropped) = io::price_cds(&cds_rows, &table);
    for (row, why) in &dropped {
        log::warn!("dropping quote {} {}: {why}", row.entity_id, row.date);
    }
    report.quotes_priced = quotes.len();
    report.quotes_dropped = dropped.len();
    let daily = io::daily_series(quotes.iter().map(|q| (q.entity_id.clone(), q.date, q.pvlgd)));

    // Calls: identifiers, sector filter, quote matching.
    let id_map = match manifest.is_declared("id_map") {
        true => Some(IdMap::new(io::read_id_map(manifest.open("id_map")?)?)?),
        false => None,
    };
    let transcripts = io::read_transcripts(manifest.open("transcripts")?)?;
    report.calls_total = transcripts.len();
    let mut aligned = Vec::with_capacity(transcripts.len());
    let mut kept: Vec<(Transcript, NaiveDate, f64)> = Vec::new();
    for t in &transcripts {
        let ts = parse_timestamp(&t.timestamp)?;
        let mut row = AlignedCall {
            call_id: t.call_id.clone(),
            source_id: t.entity_id.clone(),
            entity_id: String::new(),
            sector: t.sector.clone(),
            timestamp: t.timestamp.clone(),
            cds_date: None,
            pvlgd: None,
            status: String::new(),
        };
        let entity = match &id_map {
            Some(map) => map.resolve(&t.entity_id, ts.date_naive())?,
            None => Some(t.entity_id.clone()),
        };
        let Some(entity) = entity else {
            log::info!("call {}: no mapping for {} on {}", t.call_id, t.entity_id, ts.date_naive());
            report.calls_unmapped += 1;
            row.status = "unmapped".into();
            aligned.push(row);
            continue;
        };
        row.entity_id = entity.clone();
        if cfg.exclude_sectors.contains(&t.sector) {
            report.calls_excluded += 1;
            row.status = "excluded_sector".into();
            aligned.push(row);
            continue;
        }
        let series = daily.get(&entity);
        match align_call_to_cds(&ts, |d| series.is_some_and(|s| s.contains_key(&d))) {
            Some(d) => {
                let pv = series.unwrap()[&d];
                row.cds_date = Some(d);
                row.pvlgd = Some(pv);
                row.status = "matched".into();
                report.calls_matched += 1;
                kept.push((Transcript { entity_id: entity, ..t.clone() }, d, pv));
            }
            None => {
                log::info!("call {}: no quote for {entity} within the search window", t.call_id);
                report.calls_unmatched += 1;
                row.status = "unmatched".into();
            }
        }
        aligned.push(row);
    }
    out.rows("aligned_calls.csv", &aligned)?;
    if kept.is_empty() {
        return Err(Error::validation("no call could be matched to a CDS quote"));
    }

    // Text panel.
    let kept_transcripts: Vec<Transcript> = kept.iter().map(|k| k.0.clone()).collect();
    let mut docs = process_transcripts(&kept_transcripts, &lists, cfg.window_radius, cfg.ngram_max);
    if cfg.shuffle_text {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.shuffle);
        let mut counts: Vec<_> = docs.iter().map(|d| d.counts.clone()).collect();
        counts.shuffle(&mut rng);
        for (d, c) in docs.iter_mut().zip(counts) {
            d.counts = c;
        }
    }
    let rows: Vec<PanelRow> = docs
        .into_iter()
        .zip(&kept)
        .map(|(doc, (t, d, pv))| PanelRow { doc, entity_id: t.entity_id.clone(), date: *d, pvlgd: *pv })
        .collect();
    let panel = TextPanel::new(rows)?;
    let lasso = cfg.lasso_options();

    // Full-sample fits; the best in-sample R² supplies CS_full.
    let mut best_full: Option<(f64, Vec<ScoreRow>, ModelFile)> = None;
    for model in cfg.grid.full_sample_models() {
        let (wf, scores) = fit_full_sample(&panel, &model, &lasso)?;
        report.full_sample.push(FullSampleSummary {
            model_id: wf.model_id.clone(),
            r_squared: wf.fit.r_squared,
            lambda: wf.fit.lambda,
            nonzero: wf.fit.nonzero().len(),
        });
        if best_full.as_ref().map_or(true, |b| wf.fit.r_squared > b.0) {
            best_full = Some((wf.fit.r_squared, scores, ModelFile::from(&wf)));
        }
    }
    let (_, full_scores, full_model) = best_full.expect("grid is non-empty");
    out.json("full_sample_model.json", &full_model)?;
    write_scores(&full_scores, out.create("full_sample_scores.csv")?)?;

    // Rolling out-of-sample fits.
    let first_call = panel.first_month().expect("panel is non-empty");
    let last_call = panel.last_month().expect("panel is non-empty");
    let first_training = cfg.first_training_month.unwrap_or_else(|| default_first_training(cfg, first_call));
    let rolling_cfg = RollingConfig { models: cfg.grid.models(), first_training_month: first_training, lasso };
    let rolling = fit_rolling(&panel, &rolling_cfg)?;
    report.rolling_fits = rolling.fits.len();
    report.rolling_skipped = rolling.skipped.len();
    let series = aggregate_scores(&rolling, first_training, last_call);
    report.rolling_scores = series.rows.len();
    write_scores(&series.rows, out.create("rolling_scores.csv")?)?;
    let fits: Vec<ModelFile> = rolling.fits.iter().map(ModelFile::from).collect();
    out.json("rolling_models.json", &fits)?;
    out.json("model_choice.json", &series.choice)?;

    // Factor panel.
    let rating_history = match manifest.is_declared("ratings") {
        true => io::read_ratings(manifest.open("ratings")?)?,
        false => HashMap::new(),
    };
    let inputs = FactorInputs {
        daily_pvlgd: daily.iter().map(|(e, s)| (e.clone(), s.iter().map(|(d, v)| (*d, *v)).collect())).collect(),
        equity: match manifest.is_declared("equity") {
            true => io::read_equity(manifest.open("equity")?)?,
            false => HashMap::new(),
        },
        fundamentals: match manifest.is_declared("fundamentals") {
            true => io::read_fundamentals(manifest.open("fundamentals")?)?,
            false => HashMap::new(),
        },
        analysts: match manifest.is_declared("analysts") {
            true => io::read_analysts(manifest.open("analysts")?)?,
            false => HashMap::new(),
        },
        ratings: io::monthly_ratings(&rating_history),
        calls: kept
            .iter()
            .map(|(t, d, _)| CallInfo { entity_id: t.entity_id.clone(), month: Month::of(*d), stats: TextStats::of(&t.text) })
            .collect(),
        extras: match manifest.is_declared("extras") {
            true => Some(Frame::read_csv(manifest.open("extras")?)?),
            false => None,
        },
    };
    let mut frame = build_factor_panel(&inputs)?;
    let cs = score_column(&frame, &series.rows);
    frame.set_column("CS", cs)?;
    let cs_full = score_column(&frame, &full_scores);
    frame.set_column("CS_full", cs_full)?;
    frame.write_csv(out.create("factors.csv")?)?;

    // Regressions.
    for (spec, res) in cfg.regressions.iter().zip(run_specs(&cfg.regressions, &frame)) {
        match res {
            Ok(r) => {
                let name = if spec.name.is_empty() { "regression".to_string() } else { spec.name.clone() };
                r.write_csv(out.create(&format!("regression_{name}.csv"))?)?;
                report.regressions.push(r);
            }
            Err(e) => {
                log::warn!("regression {:?} failed: {e}", spec.name);
                report.regression_errors.push((spec.name.clone(), e.to_string()));
            }
        }
    }

    // Portfolios and null distributions.
    if !cfg.skip_backtest {
        let mut pv_panel = MonthlyPanel::default();
        for (e, s) in &inputs.daily_pvlgd {
            for (m, v) in month_end(s) {
                pv_panel.insert(e, m, v);
            }
        }
        let observations: Vec<ScoreObservation> = series
            .rows
            .iter()
            .map(|s| ScoreObservation {
                entity_id: s.entity_id.clone(),
                date: s.date,
                credit_score: s.credit_score,
                rating: io::rating_on(rating_history.get(&s.entity_id), s.date),
            })
            .collect();
        for group in &cfg.rating_groups {
            for pair in &cfg.bounds {
                let bc = pair.backtest_config(*group);
                let tag = format!("{}_{}_{}", serde_json::to_value(group)?.as_str().unwrap_or("group"), bc.l, bc.u);
                let result = backtest(&bc, &observations, &pv_panel)?;
                let mut summary = BacktestSummary {
                    rating_group: *group,
                    l: bc.l,
                    u: bc.u,
                    lower_total: bc.lower_total,
                    upper_total: bc.upper_total,
                    months: result.returns.len(),
                    annualized_return: result.annualized_return,
                    sharpe: result.sharpe,
                    null_mean: None,
                    null_sd: None,
                    p_value: None,
                    stars: String::new(),
                };
                if cfg.null_trials > 0 && result.annualized_return.is_some() {
                    let nc = NullConfig { trials: cfg.null_trials, seed: cfg.seeds.null };
                    let trials = simulate_null(&nc, &result, bc.bounds()?, *group, &observations, &pv_panel)?;
                    let null: Vec<f64> = trials.iter().filter_map(|t| t.annualized_return).collect();
                    if let (Some(actual), false) = (result.annualized_return, null.is_empty()) {
                        let p = empirical_p_value(actual, &null);
                        summary.null_mean = Some(crate::stats::mean(&null));
                        summary.null_sd = (null.len() > 1).then(|| crate::stats::stdev(&null));
                        summary.p_value = Some(p);
                        summary.stars = stars(p).to_string();
                    }
                    let rows: Vec<(usize, Option<f64>, Option<f64>)> =
                        trials.iter().map(|t| (t.trial, t.annualized_return, t.sharpe)).collect();
                    let mut w = csv::Writer::from_writer(out.create(&format!("null_{tag}.csv"))?);
                    w.write_record(["trial", "annualized_return", "sharpe"])?;
                    for (k, a, s) in rows {
                        let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
                        w.write_record([k.to_string(), f(a), f(s)])?;
                    }
                    w.flush().map_err(|e| Error::Io { path: cfg.output_dir.join(format!("null_{tag}.csv")), source: e })?;
                }
                out.json(&format!("backtest_{tag}.json"), &result)?;
                report.backtests.push(summary);
            }
        }
    }

    report.inputs_read = manifest.opened().to_vec();
    out.written.push(cfg.output_dir.join("report.json"));
    report.outputs = out.written.clone();
    out.json("report.json", &report)?;
    Ok(report)
}
