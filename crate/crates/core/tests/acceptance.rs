//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if a criterion outside `KNOWN_FAILURES` fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use credtext::model::{fit_rolling, lasso_dense, CdSolver, Lookback, ModelConfig, PanelRow, RollingConfig, TextPanel};
use credtext::nullsim::{binomial_pmf, correlated_bernoulli_pmax, sample_null_portfolio, JointTestConfig};
use credtext::portfolio::{
    classify_weight_structure, solve_monthly_lp, Bounds, Holdings, MonthlyPanel, PortfolioProblem, Ring,
};
use credtext::pricing::{intensity_from_spread, par_spread, pvlgd_from_spread, ContractSpec, IntensityGrid, SpreadTable};
use credtext::selection::forward_select;
use credtext::text::{process_transcripts, Document, DocumentTermMatrix, WordLists};
use credtext::workbench::{generate_synthetic_universe, run_pipeline, SynthConfig};
use credtext::Month;

/// Criteria that fail for reasons recorded in the decisions ledger. They
/// still print FAIL.
const KNOWN_FAILURES: &[u8] = &[3];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn pvlgd_golden_table() -> Outcome {
    let spec = ContractSpec::with_rate(0.0226);
    let grid = IntensityGrid::standard();
    let rows = [
        (100.0, 4.517, 0.017),
        (200.0, 8.665, 0.033),
        (500.0, 19.192, 0.082),
        (600.0, 22.150, 0.099),
        (2500.0, 49.619, 0.396),
        (2600.0, 50.208, 0.411),
    ];
    let mut worst = (0.0f64, 0.0f64);
    let mut pass = true;
    for (s, pv, h) in rows {
        let got_pv = pvlgd_from_spread(s, &spec, &grid).unwrap();
        let got_h = intensity_from_spread(s, &spec, &grid).unwrap();
        let tol = if s <= 600.0 { 0.01 } else { 0.05 };
        pass &= (got_pv - pv).abs() <= tol && (got_h - h).abs() <= 0.001;
        worst = (worst.0.max((got_pv - pv).abs()), worst.1.max((got_h - h).abs()));
    }
    outcome(pass, format!("max |ΔPVLGD| {:.4}, max |Δh| {:.5}", worst.0, worst.1))
}

fn spread_round_trip() -> Outcome {
    let spec = ContractSpec::with_rate(0.0226);
    let table = SpreadTable::cached(&spec, &IntensityGrid::standard()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut pass = true;
    for _ in 0..1000 {
        let s = rng.gen_range(1.0..5000.0);
        let h = table.intensity(s).unwrap();
        let back = par_spread(h, &spec).unwrap();
        let step = table.local_spread_step(s).unwrap();
        pass &= (back - s).abs() <= step;
        worst = worst.max((back - s).abs() / step);
    }
    outcome(pass, format!("worst error {:.3e} local steps", worst))
}

fn joint_test_calibration() -> Outcome {
    let cfg = JointTestConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, reference) in [(1usize, 0.3658), (2, 0.1348)] {
        let r = correlated_bernoulli_pmax(k, &cfg, &mut rng).unwrap();
        let at0 = r.by_c[0].1;
        let exact = binomial_pmf(15, k, 0.05);
        pass &= (at0 - reference).abs() <= 0.007 && (at0 - exact).abs() <= 0.007;
        parts.push(format!("k={k} c=0 {:.2}% (exact {:.2}%)", 100.0 * at0, 100.0 * exact));
    }
    for (k, reference) in [(10usize, 0.0045), (9, 0.0053), (3, 0.0389), (4, 0.0205)] {
        let r = correlated_bernoulli_pmax(k, &cfg, &mut rng).unwrap();
        let ok = (r.p_max - reference).abs() <= 0.005;
        pass &= ok;
        parts.push(format!(
            "k={k} max {:.2}% at c={:.2} vs {:.2}%{}",
            100.0 * r.p_max,
            r.c_argmax,
            100.0 * reference,
            if ok { "" } else { " (out of tolerance)" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn lp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let step = 0.02;
    let grid: Vec<f64> = (0..=100).map(|k| -1.0 + step * f64::from(k)).collect();
    let mut pass = true;
    let mut worst_gap = 0.0f64;
    for _ in 0..200 {
        let cs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pv: Vec<f64> = (0..4).map(|_| rng.gen_range(1.0..20.0)).collect();
        let b = Bounds::new(-1.0, 1.0, -2.0, 2.0).unwrap();
        let p = PortfolioProblem { credit_scores: cs.clone(), pvlgds: pv.clone(), bounds: b };
        let w = solve_monthly_lp(&p).unwrap();
        let lp_obj = p.objective(&w);
        // Brute force over three free weights; the fourth is pinned by the
        // zero-PVLGD constraint.
        let mut best = f64::NEG_INFINITY;
        for &a in &grid {
            for &c in &grid {
                for &d in &grid {
                    let cand = [a, c, d, -(a * pv[0] + c * pv[1] + d * pv[2]) / pv[3]];
                    if b.admits(&cand, &pv, 1e-9) {
                        best = best.max(p.objective(&cand));
                    }
                }
            }
        }
        let resolution = step * cs.iter().map(|c| c.abs()).sum::<f64>() * (1.0 + pv.iter().cloned().fold(0.0, f64::max));
        pass &= b.admits(&w, &pv, 1e-8) && lp_obj >= best - 1e-9 && lp_obj - best <= resolution;
        worst_gap = worst_gap.max(lp_obj - best);
    }

    let p = PortfolioProblem {
        credit_scores: vec![1.0, 1.0, -1.0],
        pvlgds: vec![10.0, 10.0, 5.0],
        bounds: Bounds::new(-2.0, 0.5, -2.0, 1.0).unwrap(),
    };
    let w = solve_monthly_lp(&p).unwrap();
    let weights_ok = w.iter().zip([0.5, 0.5, -2.0]).all(|(a, b)| (a - b).abs() < 1e-9);
    let t0 = Month::new(2020, 1).unwrap();
    let mut panel = MonthlyPanel::default();
    for (e, a, b) in [("a", 10.0, 8.0), ("b", 10.0, 8.0), ("c", 5.0, 4.5)] {
        panel.insert(e, t0, a);
        panel.insert(e, t0.offset(1), b);
    }
    let h: Holdings = ["a", "b", "c"].iter().zip(&w).map(|(k, v)| (k.to_string(), *v)).collect();
    let ret = Ring::new(t0, h).monthly_return(&panel, t0.offset(1)).unwrap();
    pass &= weights_ok && (ret - 0.01).abs() < 1e-9;
    outcome(pass, format!("200 problems, max LP − grid gap {worst_gap:.4}; worked example w = {w:?}, return {:.4}", ret))
}

fn oracle_ranking(x: &[Vec<f64>], y: &[f64]) -> Vec<usize> {
    let n = y.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let mut e = y.to_vec();
    let mut left: Vec<usize> = (0..x.len()).collect();
    let mut order = Vec::new();
    while !left.is_empty() {
        let me = mean(&e);
        let corr = |j: usize| {
            let mx = mean(&x[j]);
            let sxy: f64 = x[j].iter().zip(&e).map(|(a, b)| (a - mx) * (b - me)).sum();
            let sxx: f64 = x[j].iter().map(|a| (a - mx).powi(2)).sum();
            let syy: f64 = e.iter().map(|b| (b - me).powi(2)).sum();
            if sxx == 0.0 {
                0.0
            } else {
                sxy / (sxx * syy).sqrt()
            }
        };
        let (pos, &j) = left
            .iter()
            .enumerate()
            .max_by(|a, b| corr(*a.1).abs().total_cmp(&corr(*b.1).abs()))
            .unwrap();
        let mx = mean(&x[j]);
        let sxy: f64 = x[j].iter().zip(&e).map(|(a, b)| (a - mx) * (b - me)).sum();
        let sxx: f64 = x[j].iter().map(|a| (a - mx).powi(2)).sum();
        let slope = sxy / sxx;
        let intercept = me - slope * mx;
        for (r, xi) in e.iter_mut().zip(&x[j]) {
            *r -= intercept + slope * xi;
        }
        order.push(j);
        left.remove(pos);
    }
    order
}

fn forward_selection_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..20 {
        let rates: Vec<f64> = (0..10).map(|_| rng.gen_range(0.5..6.0)).collect();
        let x: Vec<Vec<f64>> =
            rates.iter().map(|r| (0..50).map(|_| Poisson::new(*r).unwrap().sample(&mut rng)).collect()).collect();
        let y: Vec<f64> = (0..50)
            .map(|i| (0..10).map(|j| rng.gen_range(-1.0..1.0) * x[j][i]).sum::<f64>() + rng.gen_range(-2.0..2.0))
            .collect();
        let docs: Vec<Document> = (0..50)
            .map(|i| Document {
                id: format!("d{i:02}"),
                sector: "S".into(),
                counts: (0..10).filter(|&j| x[j][i] > 0.0).map(|j| (format!("t{j}"), x[j][i] as u32)).collect(),
            })
            .collect();
        let dtm = DocumentTermMatrix::build(&docs, 10);
        let ranked = forward_select(&dtm, &y, 10).unwrap();
        let oracle: Vec<String> = oracle_ranking(&x, &y).into_iter().map(|j| format!("t{j}")).collect();
        if ranked.tokens != oracle {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of 20 panels disagree"))
}

/// Proximal gradient with an unpenalized intercept on the same objective
/// `(1/2n)‖y − b0 − Xβ‖² + λ‖β‖₁`.
fn ista(x: &[Vec<f64>], y: &[f64], lambda: f64) -> (f64, Vec<f64>) {
    let n = y.len() as f64;
    let p = x.len();
    // Step from a power-iteration bound on the centered Gram matrix.
    let means: Vec<f64> = x.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let xc: Vec<Vec<f64>> = x.iter().zip(&means).map(|(c, m)| c.iter().map(|v| v - m).collect()).collect();
    let ym = y.iter().sum::<f64>() / n;
    let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let gram = |v: &[f64]| -> Vec<f64> {
        let xv: Vec<f64> = (0..y.len()).map(|i| (0..p).map(|j| xc[j][i] * v[j]).sum()).collect();
        (0..p).map(|j| xc[j].iter().zip(&xv).map(|(a, b)| a * b).sum::<f64>() / n).collect()
    };
    let mut v = vec![1.0; p];
    let mut eig = 1.0;
    for _ in 0..200 {
        let g = gram(&v);
        eig = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        v = g.iter().map(|a| a / eig).collect();
    }
    let t = 1.0 / (eig * 1.01);
    let mut beta = vec![0.0; p];
    let mut z = beta.clone();
    let mut mom = 1.0f64;
    for _ in 0..200_000 {
        let r: Vec<f64> = (0..y.len()).map(|i| yc[i] - (0..p).map(|j| xc[j][i] * z[j]).sum::<f64>()).collect();
        let grad: Vec<f64> = (0..p).map(|j| -xc[j].iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / n).collect();
        let next: Vec<f64> = (0..p)
            .map(|j| {
                let u = z[j] - t * grad[j];
                u.signum() * (u.abs() - t * lambda).max(0.0)
            })
            .collect();
        let mom_next = (1.0 + (1.0 + 4.0 * mom * mom).sqrt()) / 2.0;
        z = (0..p).map(|j| next[j] + (mom - 1.0) / mom_next * (next[j] - beta[j])).collect();
        let moved = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        beta = next;
        mom = mom_next;
        if moved < 1e-13 {
            break;
        }
    }
    let b0 = ym - beta.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    (b0, beta)
}

fn lasso_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x: Vec<Vec<f64>> = (0..5).map(|j| (0..50).map(|_| rng.gen_range(0.0..3.0) * (1.0 + j as f64)).collect()).collect();
    let truth = [1.5, -0.8, 0.0, 0.3, 0.0];
    let y: Vec<f64> =
        (0..50).map(|i| 2.0 + (0..5).map(|j| truth[j] * x[j][i]).sum::<f64>() + rng.gen_range(-1.0..1.0)).collect();
    let sparse: Vec<Vec<(usize, f64)>> = x.iter().map(|c| c.iter().copied().enumerate().collect()).collect();
    let lmax = CdSolver::new(sparse, &[false; 5], &y).unwrap().lambda_max();
    let mut worst = 0.0f64;
    for k in 0..10 {
        let lambda = lmax * 0.6f64.powi(k + 1);
        let (_, cd) = lasso_dense(&x, &y, lambda, false, 1e-24).unwrap();
        let (_, pg) = ista(&x, &y, lambda);
        worst = worst.max(cd.iter().zip(&pg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let zero = [lmax, 1.5 * lmax]
        .iter()
        .all(|&l| lasso_dense(&x, &y, l, false, 1e-24).unwrap().1.iter().all(|b| *b == 0.0));
    outcome(worst <= 1e-4 && zero, format!("max coefficient gap {worst:.2e}; all-zero at λ ≥ λ_max: {zero}"))
}

fn planted_pipeline() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let universe = generate_synthetic_universe(&SynthConfig::new(20_240_601, 100, 60, 500)).unwrap();
    let paths = universe.write(&dir.path().join("bundle")).unwrap();
    let mut cfg = paths.pipeline_config(&dir.path().join("run"), 0.0226);
    cfg.null_trials = 20;
    let planted = run_pipeline(&cfg).unwrap();
    cfg.output_dir = dir.path().join("shuffled");
    cfg.shuffle_text = true;
    cfg.skip_backtest = true;
    let shuffled = run_pipeline(&cfg).unwrap();

    let r2 = planted.full_sample[0].r_squared;
    let cs = |r: &credtext::workbench::PipelineReport| r.regressions[0].get("CS").cloned().unwrap();
    let (a, b) = (cs(&planted), cs(&shuffled));
    let pass = r2 > 0.9 && a.coef < 0.0 && a.t < -1.96 && b.t.abs() < 1.96;
    outcome(
        pass,
        format!(
            "full-sample R² {r2:.4}; CS coef {:.3} (t {:.2}, N {}); shuffled CS coef {:.3} (t {:.2})",
            a.coef, a.t, planted.regressions[0].n_obs, b.coef, b.t
        ),
    )
}

fn null_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let bounds = Bounds::new(-0.1, 0.1, -2.0, 2.0).unwrap();
    let mut dev = 0.0;
    let mut worst_pv = 0.0f64;
    let mut bounds_ok = true;
    let n = 1000;
    for _ in 0..n {
        let pv: Vec<f64> = (0..50).map(|_| rng.gen_range(1.0..40.0)).collect();
        let cs: Vec<f64> = (0..50).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let p = PortfolioProblem { credit_scores: cs, pvlgds: pv.clone(), bounds };
        let w = solve_monthly_lp(&p).unwrap();
        let target = classify_weight_structure(&w, bounds.l, bounds.u, 1e-9);
        let s = sample_null_portfolio(&pv, (target.n_u, target.n_l), &bounds, &mut rng).unwrap();
        let got = classify_weight_structure(&s.weights, bounds.l, bounds.u, 1e-9);
        dev += (got.n_u.abs_diff(target.n_u) + got.n_l.abs_diff(target.n_l)) as f64;
        let net: f64 = s.weights.iter().zip(&pv).map(|(a, b)| a * b).sum();
        worst_pv = worst_pv.max(net.abs());
        // Single-name bounds must hold exactly; totals up to summation
        // rounding.
        let long: f64 = s.weights.iter().filter(|x| **x > 0.0).sum();
        let short: f64 = s.weights.iter().filter(|x| **x < 0.0).sum();
        let ok = s.weights.iter().all(|x| *x >= bounds.l && *x <= bounds.u)
            && long <= bounds.upper_total + 1e-12
            && short >= bounds.lower_total - 1e-12;
        bounds_ok &= ok;
    }
    let avg = dev / n as f64;
    outcome(
        worst_pv <= 1e-8 && bounds_ok && avg <= 0.05,
        format!("max |Σ w·PVLGD| {worst_pv:.2e}; bounds hold: {bounds_ok}; mean structure deviation {avg:.4}"),
    )
}

fn lookahead_panel(
    universe: &credtext::workbench::SyntheticUniverse,
    cut: Option<Month>,
    perturb: u64,
) -> TextPanel {
    let lists = WordLists::default();
    let docs = process_transcripts(&universe.transcripts, &lists, 5, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(perturb);
    let rows = universe
        .transcripts
        .iter()
        .zip(docs)
        .filter_map(|(t, mut doc)| {
            let date: NaiveDate = credtext::workbench::parse_timestamp(&t.timestamp).unwrap().date_naive();
            let m = Month::of(date);
            let late = cut.is_some_and(|c| m >= c);
            if late && perturb == 0 {
                return None;
            }
            let entity = t.entity_id.replace("TR", "E");
            let base = universe
                .truth
                .latent
                .iter()
                .find(|r| r.entity_id == entity && r.month == m)
                .map(|r| r.pvlgd)
                .unwrap();
            let pvlgd = if late {
                for c in doc.counts.iter_mut() {
                    c.1 += rng.gen_range(0..3);
                }
                base * rng.gen_range(0.5..2.0)
            } else {
                base
            };
            Some(PanelRow { doc, entity_id: entity, date, pvlgd })
        })
        .collect();
    TextPanel::new(rows).unwrap()
}

fn no_lookahead() -> Outcome {
    let mut sc = SynthConfig::new(9, 60, 48, 300);
    sc.noise = 1.0;
    let universe = generate_synthetic_universe(&sc).unwrap();
    let cut = sc.start.offset(40);
    let base = lookahead_panel(&universe, Some(cut), 0);
    let extended = lookahead_panel(&universe, Some(cut), 99);
    let cfg = RollingConfig {
        models: vec![ModelConfig { top_n: 2000, t_c: 1.0, n_fs: 250, lookback: Lookback::Months(24), update_months: 12 }],
        first_training_month: sc.start.offset(24),
        lasso: Default::default(),
    };
    let a = match fit_rolling(&base, &cfg) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("rolling fit failed: {e}")),
    };
    let b = match fit_rolling(&extended, &cfg) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("rolling fit failed: {e}")),
    };
    let key = |f: &credtext::model::WindowFit| (f.model_id.clone(), f.train_end);
    let later: BTreeMap<_, _> = b.fits.iter().map(|f| (key(f), f)).collect();
    let fits_same = !a.fits.is_empty()
        && a.fits.iter().all(|f| {
            later.get(&key(f)).is_some_and(|g| {
                g.fit.coefficients.iter().map(|x| x.to_bits()).eq(f.fit.coefficients.iter().map(|x| x.to_bits()))
                    && g.fit.vocabulary == f.fit.vocabulary
                    && g.fit.lambda.to_bits() == f.fit.lambda.to_bits()
                    && g.selected == f.selected
            })
        });
    let early = |rows: &[credtext::model::ScoreRow]| -> Vec<(String, u64, u64)> {
        let mut v: Vec<_> = rows
            .iter()
            .filter(|r| r.month < cut)
            .map(|r| (format!("{}|{}", r.call_id, r.model_id), r.implied_pvlgd.to_bits(), r.credit_score.to_bits()))
            .collect();
        v.sort();
        v
    };
    let (sa, sb) = (early(&a.scores), early(&b.scores));
    let scores_same = !sa.is_empty() && sa == sb;
    outcome(
        fits_same && scores_same,
        format!("{} fits and {} scores before the cut compared; fits identical: {fits_same}; scores identical: {scores_same}", a.fits.len(), sa.len()),
    )
}

fn main() {
    let criteria: Vec<(u8, &str, Duration, fn() -> Outcome)> = vec![
        (1, "PVLGD golden table", Duration::from_secs(1), pvlgd_golden_table),
        (2, "spread round trip", Duration::from_secs(5), spread_round_trip),
        (3, "joint-test calibration", Duration::from_secs(120), joint_test_calibration),
        (4, "LP oracle", Duration::from_secs(60), lp_oracle),
        (5, "forward-selection oracle", Duration::from_secs(10), forward_selection_oracle),
        (6, "lasso oracle", Duration::from_secs(30), lasso_oracle),
        (7, "planted-model pipeline", Duration::from_secs(300), planted_pipeline),
        (8, "null-simulation structure", Duration::from_secs(60), null_structure),
        (9, "no lookahead", Duration::from_secs(60), no_lookahead),
    ];
    let mut unexpected = Vec::new();
    for (id, name, budget, run) in criteria {
        let t0 = Instant::now();
        let o = run();
        let elapsed = t0.elapsed();
        let pass = o.pass && elapsed <= budget;
        let timing = format!("{:.2}s of {}s", elapsed.as_secs_f64(), budget.as_secs());
        println!("{} [{id}] {name}: {} ({timing})", if pass { "PASS" } else { "FAIL" }, o.detail);
        if !pass && !KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
