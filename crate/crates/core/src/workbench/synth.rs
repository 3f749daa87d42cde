//! Seeded synthetic universe with a planted text model.
//!
//! Each entity has a slow fundamental credit level `f` (in PVLGD units)
//! and a mean-reverting mispricing `m`. The market PVLGD is
//! `f + sector offset + m`; call text only sees `f`. Signal tokens occur
//! `a_j + b_j f` times per call, so a linear text model recovers `f`, and
//! the credit score (actual minus implied) recovers `m`, which forecasts
//! future PVLGD changes with a negative sign.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveTime};
use chrono_tz::America::New_York;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::config::{HyperGrid, InputPaths, PipelineConfig};
use super::ids::IdMapping;
use super::io::{AnalystRow, CdsRow, EquityRow, RatingRow};
use crate::error::{Error, Result};
use crate::model::Lookback;
use crate::pricing::{intensity_from_pvlgd, par_spread, ContractSpec};
use crate::text::{normalize_tokens, Transcript, WordLists};
use crate::time::{business_days_in, Month};

const CONSONANTS: &[u8] = b"bdfgklmnprtvz";
const VOWELS: &[u8] = b"aiou";
const SENTENCE_WORDS: usize = 12;
const PVLGD_RANGE: (f64, f64) = (0.2, 50.0);
const FUNDAMENTAL_RANGE: (f64, f64) = (1.0, 45.0);
const CALL_HOURS: &[u32] = &[8, 9, 10, 11, 13, 14, 15, 16, 17, 18];
const RATING_LETTERS: &[&str] = &["AAA", "AA", "A", "BBB", "BB", "B", "CCC", "CC", "C"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_entities: usize,
    pub n_months: usize,
    pub vocab_size: usize,
    pub start: Month,
    pub n_sectors: usize,
    pub signal_tokens: usize,
    /// Scale of count noise on signal tokens; 0 makes them exact.
    pub noise: f64,
    pub mispricing_sd: f64,
    pub mispricing_ar: f64,
    pub fundamental_step: f64,
    pub daily_sd: f64,
    pub risk_free_rate: f64,
}

impl SynthConfig {
    pub fn new(seed: u64, n_entities: usize, n_months: usize, vocab_size: usize) -> Self {
        SynthConfig {
            seed,
            n_entities,
            n_months,
            vocab_size,
            start: Month::new(2010, 1).unwrap(),
            n_sectors: 5,
            signal_tokens: 40,
            noise: 0.0,
            mispricing_sd: 1.0,
            mispricing_ar: 0.7,
            fundamental_step: 0.3,
            daily_sd: 0.05,
            risk_free_rate: 0.0226,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_entities == 0 || self.n_months == 0 || self.vocab_size == 0 || self.n_sectors == 0 {
            return Err(Error::validation("synthetic universe sizes must be positive"));
        }
        if self.signal_tokens == 0 || self.signal_tokens > self.vocab_size {
            return Err(Error::validation("signal_tokens must lie in 1..=vocab_size"));
        }
        if !(0.0..1.0).contains(&self.mispricing_ar) {
            return Err(Error::validation("mispricing_ar must lie in [0, 1)"));
        }
        for (name, v) in [
            ("noise", self.noise),
            ("mispricing_sd", self.mispricing_sd),
            ("fundamental_step", self.fundamental_step),
            ("daily_sd", self.daily_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

/// Expected count `intercept + slope · f` per call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLoading {
    pub word: String,
    pub intercept: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentRow {
    pub entity_id: String,
    pub month: Month,
    pub fundamental: f64,
    pub mispricing: f64,
    pub pvlgd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub sectors: BTreeMap<String, String>,
    pub sector_offsets: BTreeMap<String, f64>,
    pub loadings: Vec<TokenLoading>,
    /// Filler words and their Poisson rates per call.
    pub filler: Vec<(String, f64)>,
    pub latent: Vec<LatentRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalRow {
    pub entity_id: String,
    pub data_date: NaiveDate,
    pub fields: Vec<(&'static str, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticUniverse {
    pub transcripts: Vec<Transcript>,
    pub id_map: Vec<IdMapping>,
    pub cds: Vec<CdsRow>,
    pub equity: Vec<EquityRow>,
    pub fundamentals: Vec<FundamentalRow>,
    pub analysts: Vec<AnalystRow>,
    pub ratings: Vec<RatingRow>,
    pub truth: GroundTruth,
}

fn pseudo_words(n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let lists = WordLists::default();
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.gen_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
            w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
        }
        let tokens = normalize_tokens(&w);
        if tokens != [w.clone()] || lists.is_credit_sentence(&tokens) || !seen.insert(w.clone()) {
            continue;
        }
        out.push(w);
    }
    out
}

fn rating_for(f: f64) -> u8 {
    match f {
        x if x < 4.0 => 2,
        x if x < 8.0 => 3,
        x if x < 14.0 => 4,
        x if x < 22.0 => 5,
        x if x < 32.0 => 6,
        _ => 7,
    }
}

fn count(lambda: f64, noise: f64, rng: &mut ChaCha8Rng) -> usize {
    let lambda = lambda.max(0.0);
    let jitter = if noise > 0.0 { noise * lambda.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal) } else { 0.0 };
    (lambda + jitter).round().max(0.0) as usize
}

pub fn generate_synthetic_universe(cfg: &SynthConfig) -> Result<SyntheticUniverse> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spec = ContractSpec::with_rate(cfg.risk_free_rate);
    let n_sig = cfg.signal_tokens;

    let words = pseudo_words(cfg.vocab_size, &mut rng);
    let loadings: Vec<TokenLoading> = words[..n_sig]
        .iter()
        .enumerate()
        .map(|(j, w)| {
            let slope = rng.gen_range(0.2..0.6) * if j % 2 == 0 { 1.0 } else { -1.0 };
            let base = rng.gen_range(1.0..4.0);
            let intercept = if slope > 0.0 { base } else { base - slope * FUNDAMENTAL_RANGE.1 };
            TokenLoading { word: w.clone(), intercept, slope }
        })
        .collect();
    let filler: Vec<(String, f64)> = words[n_sig..].iter().map(|w| (w.clone(), rng.gen_range(0.2..2.0))).collect();

    let sector_names: Vec<String> = (1..=cfg.n_sectors).map(|k| format!("S{k}")).collect();
    let sector_offsets: BTreeMap<String, f64> = sector_names
        .iter()
        .enumerate()
        .map(|(k, s)| (s.clone(), k as f64 - (cfg.n_sectors as f64 - 1.0) / 2.0))
        .collect();

    let first = cfg.start;
    let last = cfg.start.offset(cfg.n_months as i32 - 1);
    let innov = Normal::new(0.0, cfg.mispricing_sd * (1.0 - cfg.mispricing_ar.powi(2)).sqrt()).unwrap();
    let m0 = Normal::new(0.0, cfg.mispricing_sd).unwrap();
    let step = Normal::new(0.0, cfg.fundamental_step).unwrap();
    let daily = Normal::new(0.0, cfg.daily_sd).unwrap();
    let ret_noise = Normal::new(0.0, 0.06).unwrap();

    let mut out = SyntheticUniverse {
        transcripts: Vec::new(),
        id_map: Vec::new(),
        cds: Vec::new(),
        equity: Vec::new(),
        fundamentals: Vec::new(),
        analysts: Vec::new(),
        ratings: Vec::new(),
        truth: GroundTruth {
            config: cfg.clone(),
            sectors: BTreeMap::new(),
            sector_offsets: sector_offsets.clone(),
            loadings: loadings.clone(),
            filler: filler.clone(),
            latent: Vec::new(),
        },
    };

    for i in 0..cfg.n_entities {
        let entity = format!("E{i:03}");
        let source = format!("TR{i:03}");
        let sector = &sector_names[i % cfg.n_sectors];
        out.truth.sectors.insert(entity.clone(), sector.clone());
        out.id_map.push(IdMapping {
            source_id: source.clone(),
            target_id: entity.clone(),
            valid_from: first.first_day(),
            valid_to: last.last_day(),
        });

        let mut f: f64 = rng.gen_range(3.0..30.0);
        let mut m = m0.sample(&mut rng);
        let mut price: f64 = rng.gen_range(20.0..100.0);
        let shares: f64 = rng.gen_range(50.0..500.0);
        let assets = shares * price * rng.gen_range(1.5..3.0);
        let mut last_rating = None;
        let mut prev_f = f;
        for k in 0..cfg.n_months {
            let month = first.offset(k as i32);
            if k > 0 {
                f = (f + step.sample(&mut rng)).clamp(FUNDAMENTAL_RANGE.0, FUNDAMENTAL_RANGE.1);
                m = cfg.mispricing_ar * m + innov.sample(&mut rng);
            }
            let pv = (f + sector_offsets[sector] + m).clamp(PVLGD_RANGE.0, PVLGD_RANGE.1);
            out.truth.latent.push(LatentRow {
                entity_id: entity.clone(),
                month,
                fundamental: f,
                mispricing: m,
                pvlgd: pv,
            });
            for d in business_days_in(month) {
                let v = (pv + daily.sample(&mut rng)).clamp(PVLGD_RANGE.0, PVLGD_RANGE.1);
                let h = intensity_from_pvlgd(v, &spec)?;
                out.cds.push(CdsRow { entity_id: entity.clone(), date: d, spread_bp: par_spread(h, &spec)? });
            }

            // Equity falls when credit worsens.
            let r = 0.005 - 0.01 * (f - prev_f) + ret_noise.sample(&mut rng);
            let ret = if k == 0 { None } else { Some(r.exp() - 1.0) };
            if k > 0 {
                price *= r.exp();
            }
            out.equity.push(EquityRow { entity_id: entity.clone(), month, price, shares, ret });
            prev_f = f;

            let leverage = (0.3 + 0.012 * f).min(0.95);
            let liabilities = assets * leverage;
            let income = 0.02 * assets * (1.0 - f / 40.0) + rng.gen_range(-0.002..0.002) * assets;
            let eps = income / shares;
            if month.month() % 3 == 0 {
                out.fundamentals.push(FundamentalRow {
                    entity_id: entity.clone(),
                    data_date: month.last_day(),
                    fields: vec![
                        ("atq", assets),
                        ("ltq", liabilities),
                        ("ceqq", assets - liabilities),
                        ("dlcq", 0.1 * liabilities),
                        ("dlttq", 0.5 * liabilities),
                        ("ibadjq", income),
                        ("dvpq", 0.0),
                        ("txdiq", 0.002 * assets),
                        ("epsfiq", eps),
                    ],
                });
            }
            out.analysts.push(AnalystRow {
                entity_id: entity.clone(),
                month,
                mean: eps * rng.gen_range(0.9..1.1),
                std: (0.01 + 0.002 * f) * rng.gen_range(0.5..1.5),
                count: f64::from(rng.gen_range(3u32..15)),
            });
            let rating = rating_for(f);
            if last_rating != Some(rating) {
                out.ratings.push(RatingRow {
                    entity_id: entity.clone(),
                    date: month.first_day(),
                    rating: RATING_LETTERS[rating as usize - 1].to_string(),
                });
                last_rating = Some(rating);
            }

            if (k + i) % 3 == 0 {
                let days = business_days_in(month);
                let day = days[rng.gen_range(0..days.len())];
                let hour = CALL_HOURS[rng.gen_range(0..CALL_HOURS.len())];
                let minute = if rng.gen_bool(0.5) { 0 } else { 30 };
                let local = day.and_time(NaiveTime::from_hms_opt(hour, minute, 0).unwrap());
                let ts = local
                    .and_local_timezone(New_York)
                    .earliest()
                    .ok_or_else(|| Error::validation(format!("no market time for {local}")))?;
                let mut bag: Vec<&str> = Vec::new();
                for l in &loadings {
                    let c = count(l.intercept + l.slope * f, cfg.noise, &mut rng);
                    bag.extend(std::iter::repeat(l.word.as_str()).take(c));
                }
                for (w, rate) in &filler {
                    let c = Poisson::new(*rate).unwrap().sample(&mut rng) as usize;
                    bag.extend(std::iter::repeat(w.as_str()).take(c));
                }
                bag.shuffle(&mut rng);
                let text: Vec<String> =
                    bag.chunks(SENTENCE_WORDS).map(|c| format!("Debt {}.", c.join(" "))).collect();
                out.transcripts.push(Transcript {
                    call_id: format!("C{i:03}-{month}"),
                    entity_id: source.clone(),
                    timestamp: ts.to_rfc3339(),
                    sector: sector.clone(),
                    text: text.join(" "),
                });
            }
        }
    }
    Ok(out)
}

/// Where [`SyntheticUniverse::write`] put each file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundlePaths {
    pub transcripts: PathBuf,
    pub id_map: PathBuf,
    pub cds: PathBuf,
    pub equity: PathBuf,
    pub fundamentals: PathBuf,
    pub analysts: PathBuf,
    pub ratings: PathBuf,
    pub truth: PathBuf,
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::Io { path: path.into(), source: e })
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Io { path: path.into(), source: e })
}

impl SyntheticUniverse {
    pub fn write(&self, dir: &Path) -> Result<BundlePaths> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
        let p = BundlePaths {
            transcripts: dir.join("transcripts.csv"),
            id_map: dir.join("id_map.csv"),
            cds: dir.join("cds.csv"),
            equity: dir.join("equity.csv"),
            fundamentals: dir.join("fundamentals.csv"),
            analysts: dir.join("analysts.csv"),
            ratings: dir.join("ratings.csv"),
            truth: dir.join("truth.json"),
        };
        write_rows(&p.transcripts, &self.transcripts)?;
        write_rows(&p.id_map, &self.id_map)?;
        write_rows(&p.cds, &self.cds)?;
        write_rows(&p.equity, &self.equity)?;
        write_rows(&p.analysts, &self.analysts)?;
        write_rows(&p.ratings, &self.ratings)?;

        let mut w = csv::Writer::from_writer(create(&p.fundamentals)?);
        let names: Vec<&str> = self.fundamentals.first().map(|r| r.fields.iter().map(|f| f.0).collect()).unwrap_or_default();
        let mut header = vec!["entity_id", "data_date"];
        header.extend(&names);
        w.write_record(&header)?;
        for r in &self.fundamentals {
            let mut rec = vec![r.entity_id.clone(), r.data_date.to_string()];
            rec.extend(r.fields.iter().map(|f| f.1.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Io { path: p.fundamentals.clone(), source: e })?;

        let mut t = create(&p.truth)?;
        serde_json::to_writer_pretty(&mut t, &self.truth)?;
        t.flush().map_err(|e| Error::Io { path: p.truth.clone(), source: e })?;
        Ok(p)
    }
}

impl BundlePaths {
    /// A pipeline config over this bundle with a single text model
    /// (N 2000, t_c 1, N_FS 250, 24-month lookback, yearly updates).
    pub fn pipeline_config(&self, output_dir: &Path, risk_free_rate: f64) -> PipelineConfig {
        let mut cfg: PipelineConfig = serde_json::from_value(serde_json::json!({
            "inputs": {"transcripts": self.transcripts, "cds": self.cds},
            "output_dir": output_dir,
        }))
        .expect("minimal config deserializes");
        cfg.inputs = InputPaths {
            transcripts: self.transcripts.clone(),
            cds: self.cds.clone(),
            id_map: Some(self.id_map.clone()),
            equity: Some(self.equity.clone()),
            fundamentals: Some(self.fundamentals.clone()),
            analysts: Some(self.analysts.clone()),
            ratings: Some(self.ratings.clone()),
            extras: None,
        };
        cfg.grid = HyperGrid {
            top_n: vec![2000],
            t_c: vec![1.0],
            n_fs: vec![250],
            lookback: vec![Lookback::Months(24)],
            update_months: vec![12],
        };
        cfg.risk_free_rate = risk_free_rate;
        cfg
    }
}
