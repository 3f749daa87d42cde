//! CSV ingestion and the input manifest.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::ids::IdMapping;
use crate::error::{Error, Result};
use crate::factors::{rating_score, AnalystMonth, EquityMonth, Fundamentals};
use crate::frame::parse_cell;
use crate::model::ScoreRow;
use crate::pricing::{CdsQuote, SpreadTable};
use crate::text::Transcript;
use crate::time::{parse_date, Month};

/// Named input files a run may read. Opening anything else fails.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    declared: BTreeMap<String, PathBuf>,
    opened: Vec<(String, PathBuf)>,
}

impl Manifest {
    pub fn declare(&mut self, name: &str, path: impl Into<PathBuf>) {
        self.declared.insert(name.to_string(), path.into());
    }

    pub fn from_config(cfg: &PipelineConfig) -> Self {
        let mut m = Manifest::default();
        let i = &cfg.inputs;
        m.declare("transcripts", &i.transcripts);
        m.declare("cds", &i.cds);
        let optional = [
            ("id_map", &i.id_map),
            ("equity", &i.equity),
            ("fundamentals", &i.fundamentals),
            ("analysts", &i.analysts),
            ("ratings", &i.ratings),
            ("extras", &i.extras),
            ("credit_words", &cfg.word_lists.credit_words),
            ("excluded_phrases", &cfg.word_lists.excluded_phrases),
        ];
        for (name, p) in optional {
            if let Some(p) = p {
                m.declare(name, p);
            }
        }
        m
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.declared.contains_key(name)
    }

    pub fn path(&self, name: &str) -> Option<&Path> {
        self.declared.get(name).map(PathBuf::as_path)
    }

    /// Every declared file must exist before a run starts.
    pub fn check(&self) -> Result<()> {
        for (name, p) in &self.declared {
            if !p.is_file() {
                return Err(Error::validation(format!("declared input {name} ({}) does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn open(&mut self, name: &str) -> Result<BufReader<File>> {
        let path = self
            .declared
            .get(name)
            .ok_or_else(|| Error::validation(format!("input {name:?} is not declared in the manifest")))?
            .clone();
        let f = File::open(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        self.opened.push((name.to_string(), path));
        Ok(BufReader::new(f))
    }

    pub fn read_to_string(&mut self, name: &str) -> Result<String> {
        let mut text = String::new();
        let path = self.path(name).map(Path::to_path_buf).unwrap_or_default();
        self.open(name)?.read_to_string(&mut text).map_err(|e| Error::Io { path, source: e })?;
        Ok(text)
    }

    /// Files opened so far, in order.
    pub fn opened(&self) -> &[(String, PathBuf)] {
        &self.opened
    }
}

pub fn open_file(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(r: R) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|x| x.map_err(Error::from)).collect()
}

pub fn read_transcripts<R: Read>(r: R) -> Result<Vec<Transcript>> {
    read_rows(r)
}

pub fn read_id_map<R: Read>(r: R) -> Result<Vec<IdMapping>> {
    read_rows(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdsRow {
    pub entity_id: String,
    pub date: NaiveDate,
    pub spread_bp: f64,
}

pub fn read_cds<R: Read>(r: R) -> Result<Vec<CdsRow>> {
    read_rows(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvlgdRow {
    pub entity_id: String,
    pub date: NaiveDate,
    pub pvlgd: f64,
}

pub fn read_pvlgd<R: Read>(r: R) -> Result<Vec<PvlgdRow>> {
    read_rows(r)
}

pub type DailySeries = HashMap<String, BTreeMap<NaiveDate, f64>>;

/// Prices every quote. Quotes that cannot be priced are dropped and
/// returned alongside the reason.
pub fn price_cds(rows: &[CdsRow], table: &SpreadTable) -> (Vec<CdsQuote>, Vec<(CdsRow, String)>) {
    let mut ok = Vec::with_capacity(rows.len());
    let mut bad = Vec::new();
    for r in rows {
        match CdsQuote::price(&r.entity_id, r.date, r.spread_bp, table) {
            Ok(q) => ok.push(q),
            Err(e) => bad.push((r.clone(), e.to_string())),
        }
    }
    (ok, bad)
}

pub fn daily_series(quotes: impl IntoIterator<Item = (String, NaiveDate, f64)>) -> DailySeries {
    let mut out: DailySeries = HashMap::new();
    for (e, d, v) in quotes {
        out.entry(e).or_default().insert(d, v);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquityRow {
    pub entity_id: String,
    pub month: Month,
    pub price: f64,
    pub shares: f64,
    pub ret: Option<f64>,
}

pub fn read_equity<R: Read>(r: R) -> Result<HashMap<String, BTreeMap<Month, EquityMonth>>> {
    let mut out: HashMap<String, BTreeMap<Month, EquityMonth>> = HashMap::new();
    for row in read_rows::<EquityRow, _>(r)? {
        out.entry(row.entity_id)
            .or_default()
            .insert(row.month, EquityMonth { price: row.price, shares: row.shares, ret: row.ret });
    }
    Ok(out)
}

/// `entity_id,data_date,<field>...`; empty cells are left out.
pub fn read_fundamentals<R: Read>(r: R) -> Result<HashMap<String, Vec<Fundamentals>>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "entity_id" || &headers[1] != "data_date" {
        return Err(Error::validation("fundamentals CSV must start with entity_id,data_date"));
    }
    let mut out: HashMap<String, Vec<Fundamentals>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let data_date = if rec[1].trim().is_empty() { None } else { Some(parse_date(&rec[1])?) };
        let mut fields = HashMap::new();
        for (j, name) in headers.iter().enumerate().skip(2) {
            if let Some(v) = parse_cell(rec.get(j).unwrap_or(""))? {
                fields.insert(name.to_string(), v);
            }
        }
        out.entry(rec[0].to_string()).or_default().push(Fundamentals { data_date, fields });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalystRow {
    pub entity_id: String,
    pub month: Month,
    pub mean: f64,
    pub std: f64,
    pub count: f64,
}

pub fn read_analysts<R: Read>(r: R) -> Result<HashMap<String, BTreeMap<Month, AnalystMonth>>> {
    let mut out: HashMap<String, BTreeMap<Month, AnalystMonth>> = HashMap::new();
    for row in read_rows::<AnalystRow, _>(r)? {
        out.entry(row.entity_id)
            .or_default()
            .insert(row.month, AnalystMonth { mean: row.mean, std: row.std, count: row.count });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRow {
    pub entity_id: String,
    pub date: NaiveDate,
    pub rating: String,
}

/// Rating changes by entity and date. Letters outside AAA..D are treated
/// as unrated.
pub fn read_ratings<R: Read>(r: R) -> Result<HashMap<String, BTreeMap<NaiveDate, Option<u8>>>> {
    let mut out: HashMap<String, BTreeMap<NaiveDate, Option<u8>>> = HashMap::new();
    for row in read_rows::<RatingRow, _>(r)? {
        out.entry(row.entity_id).or_default().insert(row.date, rating_score(&row.rating));
    }
    Ok(out)
}

/// Latest rating on or before `date`.
pub fn rating_on(history: Option<&BTreeMap<NaiveDate, Option<u8>>>, date: NaiveDate) -> Option<u8> {
    history.and_then(|h| h.range(..=date).next_back()).and_then(|(_, r)| *r)
}

/// Month-keyed view for the factor panel: the rating in force at the end
/// of each month with a change. Months ending unrated are left out, so
/// the factor panel carries the earlier rating through them.
pub fn monthly_ratings(history: &HashMap<String, BTreeMap<NaiveDate, Option<u8>>>) -> HashMap<String, BTreeMap<Month, u8>> {
    let mut out: HashMap<String, BTreeMap<Month, u8>> = HashMap::new();
    for (e, h) in history {
        let months: std::collections::BTreeSet<Month> = h.keys().map(|d| Month::of(*d)).collect();
        let map = out.entry(e.clone()).or_default();
        for m in months {
            if let Some(r) = rating_on(Some(h), m.last_day()) {
                map.insert(m, r);
            } else {
                map.remove(&m);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScoreCsvRow {
    entity_id: String,
    date: NaiveDate,
    actual_pvlgd: f64,
    implied_pvlgd: f64,
    credit_score: f64,
    model_id: String,
}

/// Reads the scores CSV written by [`crate::model::write_scores`]. Call ids
/// are not part of that file and come back as `entity_id:date`.
pub fn read_scores<R: Read>(r: R) -> Result<Vec<ScoreRow>> {
    Ok(read_rows::<ScoreCsvRow, _>(r)?
        .into_iter()
        .map(|s| ScoreRow {
            call_id: format!("{}:{}", s.entity_id, s.date),
            month: Month::of(s.date),
            entity_id: s.entity_id,
            date: s.date,
            actual_pvlgd: s.actual_pvlgd,
            implied_pvlgd: s.implied_pvlgd,
            credit_score: s.credit_score,
            model_id: s.model_id,
            unknown_sector: false,
        })
        .collect())
}
