//! Lasso mapping from call text to PVLGD, credit scores, and the rolling
//! out-of-sample protocol.

mod lasso;
mod rolling;

pub use lasso::{
    credit_score, fit_lasso, fold_assignment, implied_for_rows, implied_pvlgd, lambda_grid, lasso_dense, r_squared,
    CdSolver, LassoFit, LassoOptions,
};
pub use rolling::{
    aggregate_scores, fit_full_sample, fit_rolling, score_panel, select_best_model, train, updating_months,
    window_start, write_scores, CreditScoreSeries, Lookback, ModelConfig, ModelFile, PanelRow, RollingConfig,
    RollingOutput, ScoreRow, TextPanel, WindowFit,
};
