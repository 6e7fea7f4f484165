//! The prospective and retrospective pipelines, urgent-arrival
//! generation, schedule comparison and what-if insertion.

pub mod arrivals;
pub mod diff;
pub mod prospective;
pub mod retrospective;
pub mod whatif;

pub use arrivals::{generate_arrivals, ArrivalGeneratorConfig, ArrivalTemplate};
pub use diff::{diff_schedules, Attribution, ChangeKind, DiffRecord, ScheduleDiff, DEFAULT_DRIFT_TOLERANCE};
pub use prospective::{duration_robustness, prospective_analysis, ProspectiveReport, VerdictThresholds, Verdicts};
pub use retrospective::{
    counterfactual_strategy_eval, retrospective_analysis, PerformanceComparison, RetrospectiveReport,
};
pub use whatif::{what_if, WhatIfOutcome, WhatIfRequest, DEFAULT_WHATIF_SURGEON};
