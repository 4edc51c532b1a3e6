//! Experiment grids: plan files, the cell runner with its manifest, and
//! directory-level analysis.

mod analyze;
mod plan;
mod run;

pub use analyze::{analyze_dir, AnalysisFiles};
pub use plan::{Algorithm, ExperimentPlan};
pub use run::{
    plan_cells, problem_label, read_manifest, run_cell, run_plan, virtual_eval_ms, Cell, Manifest,
    PlanSummary, MANIFEST,
};
