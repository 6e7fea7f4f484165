use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::arrivals::ArrivalGeneratorConfig;
use crate::error::{Error, Result};
use crate::kpi::{aggregate_replications, compute_kpis, KpiReport, KpiTargets, ReplicationSummary};
use crate::scenario::{feasibility_check, validate_scenario, Scenario, ScheduleKind, Violation};
use crate::sim::{run_replications, simulate, DurationMode, SimOptions};
use crate::strategy::Strategy;

/// Thresholds behind the robustness and resilience verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerdictThresholds {
    /// Minimum share of stochastic replications meeting each KPI target.
    pub min_hit_probability: f64,
    /// Largest tolerated drop in mean utilization, as a fraction of shift time.
    pub utilization_margin: f64,
    /// Largest tolerated rise in mean overtime, as a fraction of shift time.
    pub overtime_margin: f64,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        VerdictThresholds {
            min_hit_probability: 0.8,
            utilization_margin: 0.10,
            overtime_margin: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub feasible: bool,
    pub robust: bool,
    pub resilient_by_strategy: BTreeMap<Strategy, bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProspectiveReport {
    /// Feasibility of the plan at nominal durations.
    pub step1: Vec<Violation>,
    /// Deterministic replay at planned durations.
    pub step2: KpiReport,
    /// Stochastic durations, no generated arrivals.
    pub step3: ReplicationSummary,
    /// Planned durations plus generated arrivals, per strategy.
    pub step4: BTreeMap<Strategy, ReplicationSummary>,
    /// Stochastic durations plus generated arrivals, per strategy.
    pub step5: BTreeMap<Strategy, ReplicationSummary>,
    pub verdicts: Verdicts,
}

/// Runs the five prospective steps on a provisional schedule.
///
/// `options` supplies the replication count, seed, and the handling of
/// non-elective cases already listed; its duration mode, arrival injection
/// and strategy are overridden step by step. Steps 2 to 5 are computed even
/// when step 1 finds the plan infeasible.
pub fn prospective_analysis(
    scenario: &Scenario,
    options: &SimOptions,
    arrivals: &ArrivalGeneratorConfig,
    targets: &KpiTargets,
    thresholds: &VerdictThresholds,
) -> Result<ProspectiveReport> {
    if scenario.schedule_kind != ScheduleKind::Provisional {
        return Err(Error::PreconditionFailed(
            "prospective analysis needs a provisional schedule".into(),
        ));
    }
    options.check()?;
    if let Some(problem) = arrivals.check() {
        return Err(Error::InvalidOptions(problem));
    }
    if let Some(problem) = targets.check() {
        return Err(Error::InvalidOptions(problem));
    }

    let structural = validate_scenario(scenario);
    let step1 = if structural.iter().any(Violation::is_error) {
        structural
    } else {
        feasibility_check(&scenario.nominal())?
    };

    let base = SimOptions {
        schedule_kind: ScheduleKind::Provisional,
        duration_mode: DurationMode::PlannedDeterministic,
        inject_arrivals: None,
        ..options.clone()
    };
    let step2 = compute_kpis(&simulate(scenario, &base, 0)?, &scenario.rooms, targets);

    let step3 = duration_robustness(scenario, &base, targets)?;

    let mut step4 = BTreeMap::new();
    let mut step5 = BTreeMap::new();
    for strategy in Strategy::HEURISTICS {
        let disrupted = SimOptions {
            strategy,
            inject_arrivals: Some(arrivals.clone()),
            replications: arrivals.arrival_replications,
            ..base.clone()
        };
        step4.insert(strategy, summarize(scenario, &disrupted, targets)?);
        let both = SimOptions {
            duration_mode: DurationMode::Stochastic,
            replications: options.replications,
            ..disrupted
        };
        step5.insert(strategy, summarize(scenario, &both, targets)?);
    }

    let hit = |s: &ReplicationSummary| {
        s.utilization.target_hit_probability.unwrap_or(0.0) >= thresholds.min_hit_probability
            && s.overtime.target_hit_probability.unwrap_or(0.0) >= thresholds.min_hit_probability
    };
    let resilient_by_strategy = step4
        .iter()
        .map(|(&strategy, s)| {
            let util_drop = step2.utilization - s.utilization.mean;
            let over_rise = s.overtime.mean - step2.overtime;
            (
                strategy,
                util_drop < thresholds.utilization_margin && over_rise < thresholds.overtime_margin,
            )
        })
        .collect();
    let verdicts = Verdicts {
        feasible: !step1.iter().any(Violation::is_error),
        robust: hit(&step3),
        resilient_by_strategy,
    };

    Ok(ProspectiveReport {
        step1,
        step2,
        step3,
        step4,
        step5,
        verdicts,
    })
}

/// Step 3 on its own: stochastic durations over `options.replications`
/// runs of the plan, without generated arrivals.
pub fn duration_robustness(
    scenario: &Scenario,
    options: &SimOptions,
    targets: &KpiTargets,
) -> Result<ReplicationSummary> {
    options.check()?;
    let stochastic = SimOptions {
        schedule_kind: ScheduleKind::Provisional,
        duration_mode: DurationMode::Stochastic,
        inject_arrivals: None,
        ..options.clone()
    };
    summarize(scenario, &stochastic, targets)
}

fn summarize(scenario: &Scenario, options: &SimOptions, targets: &KpiTargets) -> Result<ReplicationSummary> {
    let reports: Vec<KpiReport> = run_replications(scenario, options)?
        .iter()
        .map(|t| compute_kpis(t, &scenario.rooms, targets))
        .collect();
    aggregate_replications(&reports, targets).ok_or_else(|| Error::InvalidOptions("replications must be >= 1".into()))
}
