//! Credit-relevant information in earnings-call text.
//!
//! The crate covers the whole chain from CDS quotes to a traded signal:
//!
//! - [`pricing`]: par spread, default intensity, PV01 and PVLGD for a
//!   standard quarterly-coupon CDS.
//! - [`text`]: sentence splitting, credit-window extraction, token
//!   normalization and sparse n-gram document-term matrices.
//! - [`selection`]: recursive residual-correlation token ranking and the
//!   sector-concentration filter.
//! - [`model`]: lasso text-to-PVLGD mapping, credit scores, and the rolling
//!   out-of-sample protocol.
//! - [`factors`]: control factors, information variables and deciles.
//! - [`panel`]: OLS with two-way clustered standard errors and fixed effects.
//! - [`portfolio`]: the monthly mispricing LP, sub-portfolio ring, returns
//!   and event studies.
//! - [`nullsim`]: structure-matched random portfolios and the correlated
//!   Bernoulli joint test.
//! - [`workbench`]: ingestion, alignment rules, synthetic data and the
//!   end-to-end pipeline.

pub mod error;
pub mod frame;
pub mod time;
pub mod stats;

pub mod pricing;
pub mod text;
pub mod selection;
pub mod model;
pub mod factors;
pub mod panel;
pub mod portfolio;
pub mod nullsim;
pub mod workbench;

pub use error::{Error, Result};
pub use time::Month;
