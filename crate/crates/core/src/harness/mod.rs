//! Experiment runner: data generation, per-(variant, seed) training cells,
//! sweeps, and CSV/markdown/SVG reports rebuilt from the cell logs.

mod config;
mod report;
mod run;

pub use config::{DataConfig, ExperimentConfig, SweepParam, Variant};
pub use report::{
    emit_any, emit_report, emit_sweep_report, Aggregate, AnyReport, CurvePoint, RunReport, SweepPoint, SweepReport,
    VariantSummary, VariantTest, REFERENCE,
};
pub use run::{
    cell_dir, evaluate_checkpoints, prepare_data, read_data, run_cell, run_experiment, run_sweep, sweep_point_dir,
    write_data, CellManifest, CellResult, CellStatus, EpochLine, ExperimentManifest, PreparedData, RunOptions,
    SweepManifest,
};
