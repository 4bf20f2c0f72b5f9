//! Run metrics, two-sample statistics, ECDFs and carbon arithmetic.

mod carbon;
mod ecdf;
mod report;
mod summary;
mod wilcoxon;

pub use carbon::{carbon_estimate, CarbonModel};
pub use ecdf::{ecdf, EcdfCurve};
pub use report::{block_sync_instants, compute_report, threshold_count, SimReport};
pub use summary::{summarize_experiment, Arm, ComparisonReport, Metric, MetricComparison, PairedRun};
pub use wilcoxon::{wilcoxon_rank_sum, wilcoxon_signed_rank, RankSumTest, SignedRankTest};
