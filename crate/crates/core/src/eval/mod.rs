//! Evaluation harness: threshold-similarity F1 against the ground-truth
//! NBM, benchmark matrix orchestration with resumable per-cell persistence,
//! and report emission (tables, plots, histograms, JSON summary).

pub mod f1;
pub mod matrix;
pub mod plot;
pub mod report;

pub use f1::{f1_score, f1_vs_ground_truth, EvalError, EvaluationReport};
pub use matrix::{
    run_matrix, window_labels, write_scores_csv, CellOutcome, MatrixConfig, MatrixError, MethodId,
    MethodRun, TurbineData,
};
pub use plot::{histogram2d_svg, score_plot_svg};
pub use report::{delta_csv, emit_report, results_csv, summary_json};
