//! Ingestion, identifier mapping, timing rules, configuration, synthetic
//! data and the end-to-end pipeline.

mod align;
mod config;
mod ids;
pub mod io;
mod pipeline;
mod synth;

pub use align::{align_call_to_cds, parse_timestamp, MARKET_CLOSE_HOUR, QUOTE_SEARCH_DAYS};
pub use config::{
    default_regressions, BoundsPair, HyperGrid, InputPaths, PipelineConfig, Seeds, WordListPaths, LOOKBACK_MENU,
    N_FS_MENU, TOP_N_MENU, T_C_MENU, UPDATE_MENU,
};
pub use ids::{overlapping_mappings, resolve_id, IdMap, IdMapping};
pub use io::Manifest;
pub use pipeline::{run_pipeline, AlignedCall, BacktestSummary, FullSampleSummary, PipelineReport};
pub use synth::{
    generate_synthetic_universe, BundlePaths, FundamentalRow, GroundTruth, LatentRow, SynthConfig, SyntheticUniverse,
    TokenLoading,
};

use crate::time::Month;

/// First month in which fundamentals with this data date may be joined.
pub fn lag_fundamentals(data_date: chrono::NaiveDate) -> Month {
    crate::factors::availability_month(data_date)
}
