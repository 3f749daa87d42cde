//! Pooled panel regressions with two-way clustered standard errors and
//! optional two-way fixed effects.

mod cluster;
mod ols;
mod spec;

pub use cluster::{clustered_se, one_way, within_transform, ClusteredSe, WITHIN_MAX_ITER, WITHIN_TOL};
pub use ols::{collinear_columns, design, ols_fit, OlsFit};
pub use spec::{
    derive_columns, lead_change, risk_measures, run_spec, run_specs, Coefficient, Dim, RegressionResult,
    RegressionSpec, Standardization, RISK_HORIZON,
};
