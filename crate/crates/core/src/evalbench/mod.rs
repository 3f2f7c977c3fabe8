//! Throughput, resource and accuracy measurement for any detector.

mod fps;
mod matching;
mod procstats;
mod report;

pub use fps::{bench_fps, summarize, FpsStats, WARMUP_FRAMES};
pub use matching::{evaluate_dataset, match_detections, rates, MatchCounts, Rates, DEFAULT_MATCH_IOU};
pub use procstats::{read_process, sample_process_stats, ProcReading, ProcSample, ProcessSampler, SampleSeries};
pub use report::{
    emit_report, published_reference_for, parse_csv_reports, parse_json_reports, EvalReport, PublishedReference, ReportFormat,
    COLUMNS, PUBLISHED_REFERENCES, REFERENCE_COLUMNS,
};
