use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cluster::{clustered_se, one_way, within_transform};
use super::ols::{design, ols_fit};
use crate::error::{Error, Result};
use crate::factors::{iqr_standardize, winsorize};
use crate::frame::Frame;
use crate::stats;

/// Horizon of the forward risk measures, in months.
pub const RISK_HORIZON: i32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dim {
    Firm,
    Month,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Standardization {
    #[default]
    None,
    Iqr,
}

fn default_clusters() -> Vec<Dim> {
    vec![Dim::Firm, Dim::Month]
}

fn default_winsor() -> Option<(f64, f64)> {
    Some((0.01, 0.99))
}

/// A regression over the factor panel.
///
/// Column names of the form `D{ℓ}.X` are built on demand as `X_{t+ℓ} − X_t`;
/// `RiskVol`, `RiskMaxIncr` and `RiskCumSum` are built from `PVLGD`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    #[serde(default)]
    pub name: String,
    pub dependent: String,
    pub regressors: Vec<String>,
    #[serde(default)]
    pub interactions: Vec<(String, String)>,
    #[serde(default = "default_clusters")]
    pub cluster_dims: Vec<Dim>,
    #[serde(default)]
    pub fixed_effects: Vec<Dim>,
    #[serde(default)]
    pub standardization: Standardization,
    /// Percentile bounds, applied to the dependent and every regressor.
    #[serde(default = "default_winsor")]
    pub winsorize: Option<(f64, f64)>,
    /// Extra columns that must be present for a row to enter the sample, so
    /// nested specs can share one sample.
    #[serde(default)]
    pub sample_columns: Vec<String>,
}

impl RegressionSpec {
    pub fn new(dependent: &str, regressors: &[&str]) -> Self {
        RegressionSpec {
            name: String::new(),
            dependent: dependent.into(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            interactions: Vec::new(),
            cluster_dims: default_clusters(),
            fixed_effects: Vec::new(),
            standardization: Standardization::None,
            winsorize: default_winsor(),
            sample_columns: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (a, b) in &self.interactions {
            for c in [a, b] {
                if !self.regressors.contains(c) {
                    return Err(Error::validation(format!("interaction component {c} is not a regressor")));
                }
            }
        }
        if self.cluster_dims.is_empty() || self.cluster_dims.len() > 2 {
            return Err(Error::validation("cluster_dims must name firm, month, or both"));
        }
        let set: BTreeSet<&Dim> = self.cluster_dims.iter().collect();
        if set.len() != self.cluster_dims.len() {
            return Err(Error::validation("duplicate cluster dimension"));
        }
        Ok(())
    }

    fn used_columns(&self) -> Vec<&str> {
        let mut out = vec![self.dependent.as_str()];
        out.extend(self.regressors.iter().map(String::as_str));
        out.extend(self.sample_columns.iter().map(String::as_str));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub regressor: String,
    pub coef: f64,
    pub se: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub name: String,
    pub coefficients: Vec<Coefficient>,
    pub r_squared: f64,
    pub n_obs: usize,
    pub n_firm_clusters: usize,
    pub n_month_clusters: usize,
    /// Rows dropped for a missing value, per used column.
    pub missing: Vec<(String, usize)>,
    /// Regressors whose two-way variance was floored.
    pub floored: Vec<String>,
    pub note: String,
}

impl RegressionResult {
    pub fn get(&self, regressor: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.regressor == regressor)
    }

    /// `regressor,coef,se,t` rows followed by an R² and N footer.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::Io { path: "<output>".into(), source: e };
        writeln!(w, "regressor,coef,se,t").map_err(io)?;
        for c in &self.coefficients {
            writeln!(w, "{},{},{},{}", c.regressor, c.coef, c.se, c.t).map_err(io)?;
        }
        writeln!(w, "R2,{}", self.r_squared).map_err(io)?;
        writeln!(w, "N,{}", self.n_obs).map_err(io)?;
        writeln!(w, "# {}", self.note).map_err(io)?;
        Ok(())
    }
}

impl fmt::Display for RegressionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.coefficients {
            writeln!(f, "{:<24} {:>12.5} ({:>7.2})", c.regressor, c.coef, c.t)?;
        }
        write!(f, "R2 {:.4}  N {}", self.r_squared, self.n_obs)
    }
}

/// `X_{t+ℓ} − X_t` per entity.
pub fn lead_change(frame: &Frame, column: &str, horizon: i32) -> Result<Vec<Option<f64>>> {
    let x = frame.require(column)?;
    let index = frame.key_index();
    Ok((0..frame.len())
        .map(|i| {
            let j = *index.get(&(frame.entity[i].clone(), frame.month[i].offset(horizon)))?;
            Some(x[j]? - x[i]?)
        })
        .collect())
}

/// Forward risk over months `t+1..=t+12`: stdev of monthly changes, largest
/// monthly change, and largest cumulative change from `t`.
pub fn risk_measures(frame: &Frame, column: &str) -> Result<[Vec<Option<f64>>; 3]> {
    let x = frame.require(column)?;
    let index = frame.key_index();
    let mut out = [vec![None; frame.len()], vec![None; frame.len()], vec![None; frame.len()]];
    for i in 0..frame.len() {
        let path: Option<Vec<f64>> = (0..=RISK_HORIZON)
            .map(|k| {
                let j = *index.get(&(frame.entity[i].clone(), frame.month[i].offset(k)))?;
                x[j]
            })
            .collect();
        let Some(path) = path else { continue };
        let changes: Vec<f64> = path.windows(2).map(|w| w[1] - w[0]).collect();
        out[0][i] = Some(stats::stdev(&changes));
        out[1][i] = changes.iter().copied().reduce(f64::max);
        out[2][i] = path[1..].iter().map(|p| p - path[0]).reduce(f64::max);
    }
    Ok(out)
}

fn parse_lead(name: &str) -> Option<(i32, &str)> {
    let rest = name.strip_prefix('D')?;
    let (h, col) = rest.split_once('.')?;
    Some((h.parse().ok()?, col))
}

/// Adds any derived column the spec names but the frame lacks.
pub fn derive_columns(frame: &mut Frame, spec: &RegressionSpec) -> Result<()> {
    for name in spec.used_columns() {
        if frame.column(name).is_some() {
            continue;
        }
        if let Some((h, col)) = parse_lead(name) {
            let v = lead_change(frame, col, h)?;
            frame.set_column(name, v)?;
        } else if matches!(name, "RiskVol" | "RiskMaxIncr" | "RiskCumSum") {
            let [vol, incr, cum] = risk_measures(frame, "PVLGD")?;
            frame.set_column("RiskVol", vol)?;
            frame.set_column("RiskMaxIncr", incr)?;
            frame.set_column("RiskCumSum", cum)?;
        }
    }
    Ok(())
}

/// Fits one spec: listwise deletion, winsorization, optional IQR scaling,
/// interactions, optional within transform, OLS, clustered errors.
pub fn run_spec(spec: &RegressionSpec, data: &Frame) -> Result<RegressionResult> {
    spec.validate()?;
    let mut frame = data.clone();
    derive_columns(&mut frame, spec)?;
    let used = spec.used_columns();
    let cols: Vec<&[Option<f64>]> = used.iter().map(|c| frame.require(c)).collect::<Result<_>>()?;
    let missing: Vec<(String, usize)> =
        used.iter().zip(&cols).map(|(n, c)| (n.to_string(), c.iter().filter(|v| v.is_none()).count())).collect();
    let rows: Vec<usize> = (0..frame.len()).filter(|&i| cols.iter().all(|c| c[i].is_some())).collect();
    if rows.is_empty() {
        return Err(Error::validation(format!("spec {:?} has an empty effective sample", spec.name)));
    }

    let mut prepared: Vec<Vec<f64>> = Vec::new();
    for c in &cols[..1 + spec.regressors.len()] {
        let mut v: Vec<Option<f64>> = rows.iter().map(|&i| c[i]).collect();
        if let Some((lo, hi)) = spec.winsorize {
            v = winsorize(&v, lo, hi);
        }
        if spec.standardization == Standardization::Iqr {
            v = iqr_standardize(&v)?;
        }
        prepared.push(v.into_iter().map(Option::unwrap).collect());
    }
    let mut names: Vec<String> = spec.regressors.clone();
    for (a, b) in &spec.interactions {
        let ia = 1 + spec.regressors.iter().position(|r| r == a).unwrap();
        let ib = 1 + spec.regressors.iter().position(|r| r == b).unwrap();
        let prod = prepared[ia].iter().zip(&prepared[ib]).map(|(x, y)| x * y).collect();
        prepared.push(prod);
        names.push(format!("{a}×{b}"));
    }

    let firm: Vec<&str> = rows.iter().map(|&i| frame.entity[i].as_str()).collect();
    let month: Vec<i32> = rows.iter().map(|&i| frame.month[i].index()).collect();
    let fe_firm = spec.fixed_effects.contains(&Dim::Firm);
    let fe_month = spec.fixed_effects.contains(&Dim::Month);
    let intercept = !(fe_firm || fe_month);
    if !intercept {
        within_transform(
            &mut prepared,
            fe_firm.then_some(firm.as_slice()),
            fe_month.then_some(month.as_slice()),
        )?;
    } else {
        names.insert(0, "const".into());
    }
    let y = prepared.remove(0);
    let fit = ols_fit(&y, design(&prepared, intercept), names.clone(), true)?;
    let k = fit.n_params();

    let (se, n_firm, n_month, floored) = match spec.cluster_dims.as_slice() {
        [_, _] => {
            let c = clustered_se(&fit, &firm, &month, k)?;
            (c.se, c.n_firm, c.n_month, c.floored)
        }
        [d] => {
            let ids: Vec<usize> = match d {
                Dim::Firm => dense_ids(&firm),
                Dim::Month => dense_ids(&month),
            };
            let g = ids.iter().max().map_or(0, |m| m + 1);
            if g < 2 {
                return Err(Error::validation("clustering needs at least two clusters"));
            }
            let v = one_way(&fit, &ids, g, k);
            let se = (0..k).map(|j| v[(j, j)].sqrt()).collect();
            let (nf, nm) = if *d == Dim::Firm { (g, 0) } else { (0, g) };
            (se, nf, nm, Vec::new())
        }
        _ => unreachable!(),
    };
    let coefficients = names
        .iter()
        .zip(&fit.coefficients)
        .zip(&se)
        .map(|((n, &b), &s)| Coefficient { regressor: n.clone(), coef: b, se: s, t: b / s })
        .collect();
    let note = if intercept {
        "no absorbed effects; K counts the intercept".to_string()
    } else {
        format!(
            "within transform over {:?}; R2 is within; K counts slope regressors only, absorbed effects are not counted",
            spec.fixed_effects
        )
    };
    Ok(RegressionResult {
        name: spec.name.clone(),
        coefficients,
        r_squared: fit.r_squared,
        n_obs: fit.n_obs(),
        n_firm_clusters: n_firm,
        n_month_clusters: n_month,
        missing,
        floored: floored.into_iter().map(|j| names[j].clone()).collect(),
        note,
    })
}

fn dense_ids<T: std::hash::Hash + Eq>(ids: &[T]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    ids.iter()
        .map(|id| {
            let next = map.len();
            *map.entry(id).or_insert(next)
        })
        .collect()
}

/// Independent specs in parallel.
pub fn run_specs(specs: &[RegressionSpec], data: &Frame) -> Vec<Result<RegressionResult>> {
    specs.par_iter().map(|s| run_spec(s, data)).collect()
}
