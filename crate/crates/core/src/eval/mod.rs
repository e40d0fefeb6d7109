//! Metrics, attention analysis, prediction uncertainty and keyword
//! aggregation. Everything here is a pure function of its inputs.

mod attention;
mod keywords;
mod metrics;
mod uncertainty;

pub use attention::{
    attention_summary, histogram, histogram_csv, shares_csv, slot_means, AttentionAxis,
    AttentionSummary, GroupAttention, HistBin, BIN_WIDTH, NEG_SLOT, POS_SLOT, SLOT_NAMES,
};
pub use keywords::{keyword_frequencies, stopwords, template_blocklist};
pub use metrics::{auc, compute_metrics, mae, rmse, MetricReport};
pub use uncertainty::{improvement_vs_uncertainty, min_max, ols_line, uncertainty_scores, LineFit};
