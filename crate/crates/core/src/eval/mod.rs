//! Descriptive statistics of scores per stage group, trend predicates,
//! comparison against external scorers, and the report bundle.

mod compare;
mod report;
mod stats;
mod trend;

pub use compare::{compare_methods, spearman, Comparison, ExternalScoreSet, ScorerSection, SpearmanEntry};
pub use report::{
    build_timelines, emit_report, render_boxplot_svg, render_timeline_svg, slug, PatientTimeline, Report,
    ReportBundle, TimelinePoint, QUANTILE_CONVENTION, WHISKER_RULE,
};
pub use stats::{box_stats, group_scores, quantile_sorted, BoxStats, GroupStats, GroupedScores};
pub use trend::{
    trend_check, Comparison as TrendComparison, PredicateId, PredicateResult, PredicateStatus, Reading, TrendConfig,
    TrendReport, TrendSummary,
};
