use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use credtext::factors::{build_factor_panel, CallInfo, FactorInputs, TextStats};
use credtext::frame::Frame;
use credtext::model::{
    aggregate_scores, fit_full_sample, fit_rolling, score_panel, write_scores, LassoOptions, Lookback, ModelConfig,
    ModelFile, PanelRow, RollingConfig, TextPanel,
};
use credtext::nullsim::{
    correlated_bernoulli_pmax, empirical_p_value, simulate_null, stars, JointTestConfig, NullConfig,
};
use credtext::panel::{run_spec, RegressionSpec};
use credtext::portfolio::{backtest, BacktestConfig, MonthlyPanel, ScoreObservation};
use credtext::pricing::{pv01, pvlgd_from_intensity, ContractSpec, IntensityGrid, SpreadTable};
use credtext::selection::select_tokens;
use credtext::text::{process_transcripts, Document, DocumentTermMatrix, WordLists};
use credtext::workbench::io::{self, open_file};
use credtext::workbench::{
    generate_synthetic_universe, run_pipeline, PipelineConfig, SynthConfig, N_FS_MENU, T_C_MENU,
};
use credtext::{Error, Month, Result};

#[derive(Parser)]
#[command(name = "credtext", version, about = "Credit signals from earnings-call text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// PVLGD, intensity and PV01 for one spread or a CSV of quotes.
    Price(PriceArgs),
    /// Credit-window n-gram counts as a sparse document-term matrix.
    Tokenize(TokenizeArgs),
    /// Recursive token ranking with the sector-concentration filter.
    Select(SelectArgs),
    /// Lasso text model, full sample or rolling.
    Fit(FitArgs),
    /// Scores calls with a saved model.
    Score(ScoreArgs),
    /// Entity-month factor panel.
    Factors(FactorsArgs),
    /// Panel regression from a JSON spec.
    Regress(RegressArgs),
    /// Long-short backtest of credit scores.
    Backtest(BacktestArgs),
    /// Null distribution of structure-matched random portfolios.
    Simulate(SimulateArgs),
    /// Maximal p-value of k successes among correlated Bernoulli tests.
    Jointtest(JointArgs),
    /// Seeded synthetic input bundle with ground truth.
    Synth(SynthArgs),
    /// Whole chain from a pipeline config.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct ContractArgs {
    #[arg(long, default_value_t = 0.0226)]
    rate: f64,
    #[arg(long, default_value_t = 60.0)]
    lgd: f64,
    #[arg(long, default_value_t = 5.0)]
    maturity: f64,
    #[arg(long, default_value_t = 0.25)]
    interval: f64,
}

impl ContractArgs {
    fn spec(&self) -> ContractSpec {
        ContractSpec {
            maturity_years: self.maturity,
            coupon_interval_years: self.interval,
            loss_given_default: self.lgd,
            risk_free_rate: self.rate,
        }
    }
}

#[derive(Args)]
struct PriceArgs {
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    spread_bp: Option<f64>,
    /// CSV with entity_id,date,spread_bp.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    contract: ContractArgs,
}

#[derive(Args)]
struct TokenizeArgs {
    #[arg(long)]
    transcripts: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    credit_words: Option<PathBuf>,
    #[arg(long)]
    excluded_phrases: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    radius: usize,
    #[arg(long, default_value_t = 3)]
    ngram_max: usize,
    /// Keep only the most frequent tokens; all by default.
    #[arg(long)]
    top_n: Option<usize>,
}

#[derive(Args)]
struct DtmArgs {
    /// Directory written by `tokenize`.
    #[arg(long)]
    dtm: PathBuf,
}

impl DtmArgs {
    fn load(&self) -> Result<DocumentTermMatrix> {
        DocumentTermMatrix::read_parts(
            open_file(&self.dtm.join("rows.csv"))?,
            open_file(&self.dtm.join("vocabulary.csv"))?,
            open_file(&self.dtm.join("dtm.csv"))?,
        )
    }
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    dtm: DtmArgs,
    /// CSV with call_id,pvlgd.
    #[arg(long)]
    pvlgd: PathBuf,
    #[arg(long, default_value_t = 250)]
    n_fs: usize,
    #[arg(long, default_value_t = 1.0)]
    tc: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    dtm: DtmArgs,
    /// CSV with call_id,entity_id,date,pvlgd.
    #[arg(long)]
    targets: PathBuf,
    #[arg(long, default_value_t = 2000)]
    top_n: usize,
    #[arg(long, default_value_t = 1.0)]
    tc: f64,
    #[arg(long, default_value_t = 250)]
    n_fs: usize,
    #[arg(long)]
    rolling: bool,
    #[arg(long, default_value = "expanding")]
    lookback: Lookback,
    #[arg(long, default_value_t = 12)]
    update: u32,
    /// First updating month (YYYY-MM) of a rolling fit.
    #[arg(long)]
    first_training: Option<Month>,
    #[arg(long, default_value_t = 20_240_601)]
    seed: u64,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    scores: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    dtm: DtmArgs,
    #[arg(long)]
    targets: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FactorsArgs {
    /// Daily PVLGD CSV: entity_id,date,pvlgd.
    #[arg(long)]
    pvlgd: PathBuf,
    #[arg(long)]
    equity: Option<PathBuf>,
    #[arg(long)]
    fundamentals: Option<PathBuf>,
    #[arg(long)]
    analysts: Option<PathBuf>,
    #[arg(long)]
    ratings: Option<PathBuf>,
    /// Transcripts for call-level text statistics; entity ids as in the
    /// PVLGD file.
    #[arg(long)]
    transcripts: Option<PathBuf>,
    #[arg(long)]
    extras: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RegressArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Factor panel CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct StrategyArgs {
    #[arg(long)]
    scores: PathBuf,
    /// Monthly PVLGD CSV: entity_id,month,pvlgd.
    #[arg(long)]
    pvlgd: PathBuf,
    /// Strategy JSON: {rating_group, l, u, L, U}.
    #[arg(long)]
    config: PathBuf,
    /// Rating history, entity_id,date,rating; names without one are unrated.
    #[arg(long)]
    ratings: Option<PathBuf>,
}

impl StrategyArgs {
    fn load(&self) -> Result<(BacktestConfig, Vec<ScoreObservation>, MonthlyPanel)> {
        let cfg: BacktestConfig = serde_json::from_reader(open_file(&self.config)?)?;
        cfg.bounds()?;
        let history = match &self.ratings {
            Some(p) => io::read_ratings(open_file(p)?)?,
            None => HashMap::new(),
        };
        let obs = io::read_scores(open_file(&self.scores)?)?
            .into_iter()
            .map(|s| ScoreObservation {
                rating: io::rating_on(history.get(&s.entity_id), s.date),
                entity_id: s.entity_id,
                date: s.date,
                credit_score: s.credit_score,
            })
            .collect();
        #[derive(Deserialize)]
        struct Row {
            entity_id: String,
            month: Month,
            pvlgd: f64,
        }
        let mut panel = MonthlyPanel::default();
        for r in csv::Reader::from_reader(open_file(&self.pvlgd)?).deserialize::<Row>() {
            let r = r?;
            panel.insert(&r.entity_id, r.month, r.pvlgd);
        }
        Ok((cfg, obs, panel))
    }
}

#[derive(Args)]
struct BacktestArgs {
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Returns CSV (month,R_t).
    #[arg(long)]
    returns: PathBuf,
    /// Summary JSON.
    #[arg(long)]
    summary: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    strategy: StrategyArgs,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 20_240_601)]
    seed: u64,
    /// Null-distribution CSV.
    #[arg(long)]
    output: PathBuf,
    /// Significance summary JSON.
    #[arg(long)]
    summary: PathBuf,
}

#[derive(Args)]
struct JointArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 15)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    p: f64,
    #[arg(long, default_value_t = 50_000)]
    draws: usize,
    #[arg(long, default_value_t = 20_240_601)]
    seed: u64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20_240_601)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    entities: usize,
    #[arg(long, default_value_t = 60)]
    months: usize,
    #[arg(long, default_value_t = 500)]
    vocab: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.flush().map_err(|e| Error::Io { path: path.into(), source: e })
}

fn price(a: &PriceArgs) -> Result<()> {
    let spec = a.contract.spec();
    let table = SpreadTable::cached(&spec, &IntensityGrid::standard())?;
    if let Some(s) = a.spread_bp {
        let h = table.intensity(s)?;
        let rec = serde_json::json!({
            "spread_bp": s,
            "intensity": h,
            "pv01": pv01(h, &spec)?,
            "pvlgd": pvlgd_from_intensity(h, &spec)?,
        });
        let mut w = sink(a.output.as_deref())?;
        writeln!(w, "{rec}").map_err(|e| Error::Io { path: "<stdout>".into(), source: e })?;
        return Ok(());
    }
    let rows = io::read_cds(open_file(a.input.as_deref().expect("clap requires one of the two"))?)?;
    let mut w = csv::Writer::from_writer(sink(a.output.as_deref())?);
    w.write_record(["entity_id", "date", "spread_bp", "intensity", "pvlgd"])?;
    for r in rows {
        let h = table.intensity(r.spread_bp)?;
        w.write_record([
            r.entity_id,
            r.date.to_string(),
            r.spread_bp.to_string(),
            h.to_string(),
            pvlgd_from_intensity(h, &spec)?.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Io { path: "<output>".into(), source: e })
}

fn tokenize(a: &TokenizeArgs) -> Result<()> {
    let lists = WordLists::load(a.credit_words.as_deref(), a.excluded_phrases.as_deref())?;
    let transcripts = io::read_transcripts(open_file(&a.transcripts)?)?;
    let docs = process_transcripts(&transcripts, &lists, a.radius, a.ngram_max);
    let dtm = DocumentTermMatrix::build(&docs, a.top_n.unwrap_or(usize::MAX));
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::Io { path: a.out_dir.clone(), source: e })?;
    dtm.write_triplets(create(&a.out_dir.join("dtm.csv"))?)?;
    dtm.write_vocabulary(create(&a.out_dir.join("vocabulary.csv"))?)?;
    dtm.write_rows(create(&a.out_dir.join("rows.csv"))?)?;
    log::info!("{} calls, {} tokens, {} nonzeros", dtm.n_rows(), dtm.n_cols(), dtm.nnz());
    Ok(())
}

fn check_menus(n_fs: usize, tc: f64) -> Result<f64> {
    if !N_FS_MENU.contains(&n_fs) {
        return Err(Error::validation(format!("--n-fs {n_fs} is not one of {N_FS_MENU:?}")));
    }
    T_C_MENU
        .iter()
        .copied()
        .find(|m| (m - tc).abs() <= 1e-3)
        .ok_or_else(|| Error::validation(format!("--tc {tc} is not one of 1/3, 1/2, 1")))
}

fn select(a: &SelectArgs) -> Result<()> {
    let tc = check_menus(a.n_fs, a.tc)?;
    let dtm = a.dtm.load()?;
    #[derive(Deserialize)]
    struct Row {
        call_id: String,
        pvlgd: f64,
    }
    let targets: HashMap<String, f64> = csv::Reader::from_reader(open_file(&a.pvlgd)?)
        .deserialize::<Row>()
        .map(|r| r.map(|r| (r.call_id, r.pvlgd)))
        .collect::<std::result::Result<_, _>>()?;
    let y: Vec<f64> = dtm
        .rows
        .iter()
        .map(|id| targets.get(id).copied().ok_or_else(|| Error::Missing(format!("no PVLGD for call {id}"))))
        .collect::<Result<_>>()?;
    let ranked = select_tokens(&dtm, &y, a.n_fs, tc)?;
    let mut w = csv::Writer::from_writer(sink(a.output.as_deref())?);
    w.write_record(["token", "rank", "slope", "correlation", "concentration"])?;
    for i in 0..ranked.len() {
        w.write_record([
            ranked.tokens[i].clone(),
            (i + 1).to_string(),
            ranked.step_slopes[i].to_string(),
            ranked.step_correlations[i].to_string(),
            ranked.concentration[i].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Io { path: "<output>".into(), source: e })
}

#[derive(Deserialize)]
struct TargetRow {
    call_id: String,
    entity_id: String,
    date: NaiveDate,
    pvlgd: f64,
}

/// Rebuilds a text panel from a saved matrix and call targets. Calls
/// without a target are skipped.
fn text_panel(dtm: &DocumentTermMatrix, targets: &Path) -> Result<TextPanel> {
    let targets: HashMap<String, TargetRow> = csv::Reader::from_reader(open_file(targets)?)
        .deserialize::<TargetRow>()
        .map(|r| r.map(|r| (r.call_id.clone(), r)))
        .collect::<std::result::Result<_, _>>()?;
    let mut rows = Vec::new();
    for r in 0..dtm.n_rows() {
        let Some(t) = targets.get(&dtm.rows[r]) else {
            log::warn!("call {} has no target; skipped", dtm.rows[r]);
            continue;
        };
        let (idx, cnt) = dtm.row(r);
        let doc = Document {
            id: dtm.rows[r].clone(),
            sector: dtm.sector_of_row[r].clone(),
            counts: idx.iter().zip(cnt).map(|(&j, &c)| (dtm.vocabulary[j].clone(), c)).collect(),
        };
        rows.push(PanelRow { doc, entity_id: t.entity_id.clone(), date: t.date, pvlgd: t.pvlgd });
    }
    TextPanel::new(rows)
}

fn fit(a: &FitArgs) -> Result<()> {
    let tc = check_menus(a.n_fs, a.tc)?;
    let grid = credtext::workbench::HyperGrid {
        top_n: vec![a.top_n],
        t_c: vec![tc],
        n_fs: vec![a.n_fs],
        lookback: vec![a.lookback],
        update_months: vec![a.update],
    };
    grid.validate()?;
    let panel = text_panel(&a.dtm.load()?, &a.targets)?;
    let lasso = LassoOptions { seed: a.seed, ..LassoOptions::default() };
    let config = ModelConfig { top_n: a.top_n, t_c: tc, n_fs: a.n_fs, lookback: a.lookback, update_months: a.update };
    if !a.rolling {
        let (wf, scores) = fit_full_sample(&panel, &config, &lasso)?;
        write_json(&a.model, &ModelFile::from(&wf))?;
        return write_scores(&scores, create(&a.scores)?);
    }
    let first = panel.first_month().ok_or_else(|| Error::validation("no calls"))?;
    let last = panel.last_month().unwrap_or(first);
    let start = a.first_training.unwrap_or_else(|| first.offset(24));
    let out = fit_rolling(&panel, &RollingConfig { models: vec![config], first_training_month: start, lasso })?;
    let series = aggregate_scores(&out, start, last);
    let models: Vec<ModelFile> = out.fits.iter().map(ModelFile::from).collect();
    write_json(&a.model, &models)?;
    write_scores(&series.rows, create(&a.scores)?)
}

fn score(a: &ScoreArgs) -> Result<()> {
    let model: ModelFile = serde_json::from_reader(open_file(&a.model)?)?;
    let panel = text_panel(&a.dtm.load()?, &a.targets)?;
    let rows = score_panel(&panel, &model.to_fit(), &model.model_id);
    write_scores(&rows, sink(a.output.as_deref())?)
}

fn factors(a: &FactorsArgs) -> Result<()> {
    let daily = io::read_pvlgd(open_file(&a.pvlgd)?)?;
    let mut inputs = FactorInputs::default();
    for r in daily {
        inputs.daily_pvlgd.entry(r.entity_id).or_default().push((r.date, r.pvlgd));
    }
    if let Some(p) = &a.equity {
        inputs.equity = io::read_equity(open_file(p)?)?;
    }
    if let Some(p) = &a.fundamentals {
        inputs.fundamentals = io::read_fundamentals(open_file(p)?)?;
    }
    if let Some(p) = &a.analysts {
        inputs.analysts = io::read_analysts(open_file(p)?)?;
    }
    if let Some(p) = &a.ratings {
        inputs.ratings = io::monthly_ratings(&io::read_ratings(open_file(p)?)?);
    }
    if let Some(p) = &a.transcripts {
        for t in io::read_transcripts(open_file(p)?)? {
            let ts = credtext::workbench::parse_timestamp(&t.timestamp)?;
            inputs.calls.push(CallInfo {
                entity_id: t.entity_id,
                month: Month::of(ts.date_naive()),
                stats: TextStats::of(&t.text),
            });
        }
    }
    if let Some(p) = &a.extras {
        inputs.extras = Some(Frame::read_csv(open_file(p)?)?);
    }
    build_factor_panel(&inputs)?.write_csv(sink(a.output.as_deref())?)
}

fn regress(a: &RegressArgs) -> Result<()> {
    let spec: RegressionSpec = serde_json::from_reader(open_file(&a.spec)?)?;
    let data = Frame::read_csv(open_file(&a.data)?)?;
    run_spec(&spec, &data)?.write_csv(sink(a.output.as_deref())?)
}

fn run_backtest(a: &BacktestArgs) -> Result<()> {
    let (cfg, obs, panel) = a.strategy.load()?;
    let result = backtest(&cfg, &obs, &panel)?;
    let mut w = csv::Writer::from_writer(create(&a.returns)?);
    w.write_record(["month", "R_t"])?;
    for (m, r) in &result.returns {
        w.write_record([m.to_string(), r.to_string()])?;
    }
    w.flush().map_err(|e| Error::Io { path: a.returns.clone(), source: e })?;
    let summary = serde_json::json!({
        "config": cfg,
        "annualized_return": result.annualized_return,
        "sharpe": result.sharpe,
        "formations": result.formations,
    });
    write_json(&a.summary, &summary)
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let (cfg, obs, panel) = a.strategy.load()?;
    let actual = backtest(&cfg, &obs, &panel)?;
    let nc = NullConfig { trials: a.trials, seed: a.seed };
    let trials = simulate_null(&nc, &actual, cfg.bounds()?, cfg.rating_group, &obs, &panel)?;
    let mut w = csv::Writer::from_writer(create(&a.output)?);
    w.write_record(["trial", "annualized_return", "sharpe"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for t in &trials {
        w.write_record([t.trial.to_string(), opt(t.annualized_return), opt(t.sharpe)])?;
    }
    w.flush().map_err(|e| Error::Io { path: a.output.clone(), source: e })?;
    let null: Vec<f64> = trials.iter().filter_map(|t| t.annualized_return).collect();
    let null_sr: Vec<f64> = trials.iter().filter_map(|t| t.sharpe).collect();
    let p = actual.annualized_return.filter(|_| !null.is_empty()).map(|r| empirical_p_value(r, &null));
    let p_sr = actual.sharpe.filter(|_| !null_sr.is_empty()).map(|r| empirical_p_value(r, &null_sr));
    let summary = serde_json::json!({
        "config": cfg,
        "trials": a.trials,
        "seed": a.seed,
        "annualized_return": actual.annualized_return,
        "sharpe": actual.sharpe,
        "null_mean": (!null.is_empty()).then(|| credtext::stats::mean(&null)),
        "null_sd": (null.len() > 1).then(|| credtext::stats::stdev(&null)),
        "p_value": p,
        "stars": p.map(stars).unwrap_or(""),
        "sharpe_p_value": p_sr,
        "sharpe_stars": p_sr.map(stars).unwrap_or(""),
    });
    write_json(&a.summary, &summary)
}

fn jointtest(a: &JointArgs) -> Result<()> {
    let cfg = JointTestConfig { n_variables: a.n, draws_per_c: a.draws, ..JointTestConfig::default() }
        .with_success_prob(a.p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let r = correlated_bernoulli_pmax(a.k, &cfg, &mut rng)?;
    println!("{}", serde_json::json!({"k": r.k, "n": a.n, "p": a.p, "p_max": r.p_max, "c_argmax": r.c_argmax}));
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut cfg = SynthConfig::new(a.seed, a.entities, a.months, a.vocab);
    cfg.noise = a.noise;
    let universe = generate_synthetic_universe(&cfg)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::Io { path: a.out_dir.clone(), source: e })?;
    // Absolute paths so the config works from any directory.
    let dir = std::fs::canonicalize(&a.out_dir).map_err(|e| Error::Io { path: a.out_dir.clone(), source: e })?;
    let paths = universe.write(&dir)?;
    let pipeline = paths.pipeline_config(&dir.join("run"), cfg.risk_free_rate);
    write_json(&a.out_dir.join("pipeline.json"), &pipeline)
}

fn pipeline(a: &PipelineArgs) -> Result<()> {
    let cfg = PipelineConfig::load(&a.config)?;
    let report = run_pipeline(&cfg)?;
    for s in &report.full_sample {
        println!("full sample {}: R² {:.4}, {} tokens", s.model_id, s.r_squared, s.nonzero);
    }
    for r in &report.regressions {
        for c in &r.coefficients {
            println!("{} {}: {:.4} (t {:.2})", r.name, c.regressor, c.coef, c.t);
        }
    }
    for b in &report.backtests {
        let pct = |x: Option<f64>| x.map(|v| format!("{:.3}%", 100.0 * v)).unwrap_or_else(|| "n/a".into());
        println!("{:?} ({}, {}): {}{}", b.rating_group, b.l, b.u, pct(b.annualized_return), b.stars);
    }
    println!("outputs in {}", cfg.output_dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Price(a) => price(a),
        Command::Tokenize(a) => tokenize(a),
        Command::Select(a) => select(a),
        Command::Fit(a) => fit(a),
        Command::Score(a) => score(a),
        Command::Factors(a) => factors(a),
        Command::Regress(a) => regress(a),
        Command::Backtest(a) => run_backtest(a),
        Command::Simulate(a) => simulate(a),
        Command::Jointtest(a) => jointtest(a),
        Command::Synth(a) => synth(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
