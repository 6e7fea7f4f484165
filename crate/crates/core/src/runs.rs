//! Executes a bundle in one of the three run modes shared by the CLI and
//! the service.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{prospective_analysis, retrospective_analysis, ProspectiveReport, RetrospectiveReport};
use crate::error::{Error, Result};
use crate::io::{Report, ScenarioBundle};
use crate::kpi::{aggregate_replications, compute_kpis, GanttSegment, KpiReport, ReplicationSummary};
use crate::scenario::ScheduleKind;
use crate::sim::{run_replications, simulate, DurationMode, SimOptions, SimulationTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Simulate,
    Prospective,
    Retrospective,
}

impl RunMode {
    pub fn token(self) -> &'static str {
        match self {
            RunMode::Simulate => "simulate",
            RunMode::Prospective => "prospective",
            RunMode::Retrospective => "retrospective",
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        [RunMode::Simulate, RunMode::Prospective, RunMode::Retrospective]
            .into_iter()
            .find(|m| m.token() == s)
            .ok_or_else(|| format!("unknown mode {s:?} (expected simulate, prospective or retrospective)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RunResult {
    Simulate {
        /// Replication 0.
        trace: SimulationTrace,
        kpis: KpiReport,
        summary: ReplicationSummary,
    },
    Prospective {
        report: ProspectiveReport,
        /// Timeline of the deterministic step-2 replay.
        gantt: Vec<GanttSegment>,
    },
    Retrospective {
        report: RetrospectiveReport,
        /// Timeline of the performed day.
        gantt: Vec<GanttSegment>,
    },
}

impl RunResult {
    pub fn mode(&self) -> RunMode {
        match self {
            RunResult::Simulate { .. } => RunMode::Simulate,
            RunResult::Prospective { .. } => RunMode::Prospective,
            RunResult::Retrospective { .. } => RunMode::Retrospective,
        }
    }

    /// The headline single-day KPIs of the run.
    pub fn kpis(&self) -> &KpiReport {
        match self {
            RunResult::Simulate { kpis, .. } => kpis,
            RunResult::Prospective { report, .. } => &report.step2,
            RunResult::Retrospective { report, .. } => &report.step2.performed,
        }
    }

    pub fn gantt(&self) -> &[GanttSegment] {
        match self {
            RunResult::Simulate { trace, .. } => &trace.segments,
            RunResult::Prospective { gantt, .. } | RunResult::Retrospective { gantt, .. } => gantt,
        }
    }

    /// The full result document.
    pub fn report(&self) -> Report<'_> {
        match self {
            RunResult::Simulate { summary, .. } => Report::Summary(summary),
            RunResult::Prospective { report, .. } => Report::Prospective(report),
            RunResult::Retrospective { report, .. } => Report::Retrospective(report),
        }
    }
}

pub fn execute(bundle: &ScenarioBundle, mode: RunMode) -> Result<RunResult> {
    let scenario = &bundle.scenario;
    match mode {
        RunMode::Simulate => {
            let traces = run_replications(scenario, &bundle.options)?;
            let reports: Vec<KpiReport> = traces
                .iter()
                .map(|t| compute_kpis(t, &scenario.rooms, &bundle.targets))
                .collect();
            let summary = aggregate_replications(&reports, &bundle.targets)
                .ok_or_else(|| Error::InvalidOptions("replications must be >= 1".into()))?;
            let trace = traces.into_iter().next().expect("at least one replication");
            Ok(RunResult::Simulate {
                trace,
                kpis: reports[0].clone(),
                summary,
            })
        }
        RunMode::Prospective => {
            let arrivals = bundle
                .arrivals
                .as_ref()
                .ok_or_else(|| Error::PreconditionFailed("prospective analysis needs an arrival model".into()))?;
            let report = prospective_analysis(
                scenario,
                &bundle.options,
                arrivals,
                &bundle.targets,
                &bundle.analysis.thresholds,
            )?;
            let replay = SimOptions {
                schedule_kind: ScheduleKind::Provisional,
                duration_mode: DurationMode::PlannedDeterministic,
                inject_arrivals: None,
                ..bundle.options.clone()
            };
            let gantt = simulate(scenario, &replay, 0)?.segments;
            Ok(RunResult::Prospective { report, gantt })
        }
        RunMode::Retrospective => {
            let provisional = bundle.provisional.as_ref().ok_or_else(|| {
                Error::PreconditionFailed("retrospective analysis needs the provisional schedule".into())
            })?;
            let report = retrospective_analysis(
                provisional,
                scenario,
                &bundle.analysis.strategies,
                &bundle.targets,
                bundle.analysis.drift_tolerance_minutes,
            )?;
            let gantt = simulate(scenario, &SimOptions::performed(), 0)?.segments;
            Ok(RunResult::Retrospective { report, gantt })
        }
    }
}
