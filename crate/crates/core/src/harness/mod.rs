//! Configuration, orchestration and report emission for the experiments.

mod config;
mod report;
mod run;

pub use config::{EvalSettings, Method, TrainConfig, DEFAULT_CONFIG};
pub use report::{
    read_report_csv, tradeoff, write_curves_csv, write_report_csv, MethodResult, ReportRow, RunReport, SweepPoint,
    SweepReport, TradeOff, REPORT_COLUMNS, TRADEOFF_TOLERANCE,
};
pub use run::{
    create_run_dir, db_cell, format_rows, prepare, run_method, run_sweep, run_train, score, write_divergence, write_inputs,
    write_method_artifacts, write_sweep_report, write_train_report, write_verify_report, MethodRun, Prepared,
    AUDIT_SIZE,
};
