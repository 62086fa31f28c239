//! End-to-end experiments behind the command-line interface.

mod commands;
mod config;
pub mod report;

pub use commands::{
    adjust_cohort, cmd_adjust, cmd_evidence, cmd_naive, cmd_replicate, cmd_simulate, evidence_rows, gated_parameters,
    naive_fit, replicate_cohort, summarize_samples, AdjustOutcome, CellResult, ReplicationReport, ReplicationTable,
    ODDS_RATIO,
};
pub use config::{EvidenceConfig, ExperimentConfig, ReportFormat};
