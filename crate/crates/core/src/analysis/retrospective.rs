use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::diff::{diff_schedules, ScheduleDiff};
use crate::error::{Error, Result};
use crate::kpi::{compute_kpis, KpiReport, KpiTargets};
use crate::scenario::{constraint_audit, Scenario, ScheduleKind, Violation};
use crate::sim::{simulate, SimOptions};
use crate::strategy::Strategy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceComparison {
    pub performed: KpiReport,
    pub counterfactual_by_strategy: BTreeMap<Strategy, KpiReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrospectiveReport {
    /// Resource constraints over the realized timeline.
    pub step1: Vec<Violation>,
    pub step2: PerformanceComparison,
    pub step3: ScheduleDiff,
}

fn require_performed(scenario: &Scenario) -> Result<()> {
    if scenario.schedule_kind != ScheduleKind::Performed {
        return Err(Error::PreconditionFailed(format!(
            "scenario {} is not a performed schedule",
            scenario.scenario_id
        )));
    }
    Ok(())
}

/// KPIs of the performed day replayed with each non-elective case placed
/// by `strategy` at its ready time instead of where it actually went.
/// Elective cases are replayed exactly as realized.
pub fn counterfactual_strategy_eval(
    performed: &Scenario,
    strategies: &[Strategy],
    targets: &KpiTargets,
) -> Result<BTreeMap<Strategy, KpiReport>> {
    require_performed(performed)?;
    strategies
        .iter()
        .map(|&strategy| {
            let options = SimOptions {
                strategy,
                ..SimOptions::performed()
            };
            let trace = simulate(performed, &options, 0)?;
            Ok((strategy, compute_kpis(&trace, &performed.rooms, targets)))
        })
        .collect()
}

/// Runs the three retrospective steps. Steps 2 and 3 are computed even
/// when step 1 finds the realized timeline in breach of a constraint.
pub fn retrospective_analysis(
    provisional: &Scenario,
    performed: &Scenario,
    strategies: &[Strategy],
    targets: &KpiTargets,
    tolerance_minutes: f64,
) -> Result<RetrospectiveReport> {
    require_performed(performed)?;
    if let Some(problem) = targets.check() {
        return Err(Error::InvalidOptions(problem));
    }
    let step1 = constraint_audit(performed)?;
    let replay = simulate(performed, &SimOptions::performed(), 0)?;
    let step2 = PerformanceComparison {
        performed: compute_kpis(&replay, &performed.rooms, targets),
        counterfactual_by_strategy: counterfactual_strategy_eval(performed, strategies, targets)?,
    };
    let step3 = diff_schedules(provisional, performed, tolerance_minutes)?;
    Ok(RetrospectiveReport { step1, step2, step3 })
}
