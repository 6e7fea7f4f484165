use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kpi::{compute_kpis, GanttSegment, KpiReport, KpiTargets};
use crate::scenario::{validate_scenario, PhaseDurations, Scenario, ScheduleKind, SurgicalCase, Violation};
use crate::sim::{simulate, DurationMode, SimOptions};
use crate::strategy::Strategy;
use crate::time::TimePoint;

pub const DEFAULT_WHATIF_SURGEON: &str = "ON-CALL";

/// A hypothetical urgent case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfRequest {
    pub arrival_time: TimePoint,
    pub preoperative_minutes: f64,
    pub phases: PhaseDurations,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surgeon_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfOutcome {
    /// The case as it would be appended to the scenario.
    pub case: SurgicalCase,
    pub chosen_room: String,
    pub start_time: TimePoint,
    pub kpi_before: KpiReport,
    pub kpi_after: KpiReport,
    pub gantt_after: Vec<GanttSegment>,
}

/// First `WHATIF-<n>` id not already taken.
fn fresh_id(scenario: &Scenario) -> String {
    (1..)
        .map(|n| format!("WHATIF-{n}"))
        .find(|id| scenario.case(id).is_none())
        .expect("unbounded")
}

/// Places one hypothetical non-elective case into a provisional day at
/// planned durations and reports the room chosen by `request.strategy`
/// and the KPIs before and after. The scenario is not modified.
pub fn what_if(
    scenario: &Scenario,
    options: &SimOptions,
    targets: &KpiTargets,
    request: &WhatIfRequest,
) -> Result<WhatIfOutcome> {
    if scenario.schedule_kind != ScheduleKind::Provisional {
        return Err(Error::PreconditionFailed(
            "what-if insertion needs a provisional schedule".into(),
        ));
    }
    if !(request.preoperative_minutes.is_finite() && request.preoperative_minutes >= 0.0) {
        return Err(Error::InvalidOptions("preoperative_minutes must be >= 0".into()));
    }
    let case_id = request.case_id.clone().unwrap_or_else(|| fresh_id(scenario));
    if scenario.case(&case_id).is_some() {
        return Err(Error::DuplicateCaseId(case_id));
    }
    let surgeon = request
        .surgeon_id
        .clone()
        .unwrap_or_else(|| DEFAULT_WHATIF_SURGEON.into());
    let case = SurgicalCase::non_elective(
        case_id.clone(),
        surgeon,
        request.arrival_time,
        request.preoperative_minutes,
        request.phases.clone(),
    );

    let mut after = scenario.clone();
    after.cases.push(case.clone());
    after.register_case_surgeons();
    if let Some(v) = validate_scenario(&after).into_iter().find(Violation::is_error) {
        return Err(Error::InvalidOptions(v.message));
    }

    let run = SimOptions {
        schedule_kind: ScheduleKind::Provisional,
        duration_mode: DurationMode::PlannedDeterministic,
        inject_arrivals: None,
        strategy: request.strategy,
        replications: 1,
        ..options.clone()
    };
    let before = simulate(scenario, &run, 0)?;
    let trace = simulate(&after, &run, 0)?;
    let placed = trace.outcome(&case_id).ok_or_else(|| Error::UnassignableCase {
        case_id: case_id.clone(),
        reason: "not placed".into(),
    })?;
    Ok(WhatIfOutcome {
        chosen_room: placed.room_id.clone(),
        start_time: placed.start_time,
        kpi_before: compute_kpis(&before, &scenario.rooms, targets),
        kpi_after: compute_kpis(&trace, &after.rooms, targets),
        gantt_after: trace.segments.clone(),
        case,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ResourceConfig, RoomShift};

    const TIMES: [f64; 4] = [10.0, 5.0, 60.0, 15.0];

    fn day() -> Scenario {
        let mut s = Scenario {
            scenario_id: "W".into(),
            rooms: vec![
                RoomShift::new("R1", TimePoint::hm(8, 0), TimePoint::hm(16, 0)),
                RoomShift::new("R2", TimePoint::hm(8, 0), TimePoint::hm(16, 0)),
            ],
            resources: ResourceConfig::default(),
            cases: vec![SurgicalCase::elective(
                "C1",
                "S1",
                "R1",
                0,
                TimePoint::hm(8, 0),
                PhaseDurations::deterministic([10.0, 5.0, 300.0, 15.0]),
            )],
            schedule_kind: ScheduleKind::Provisional,
        };
        s.register_case_surgeons();
        s
    }

    fn request(strategy: Strategy) -> WhatIfRequest {
        WhatIfRequest {
            arrival_time: TimePoint::hm(9, 0),
            preoperative_minutes: 30.0,
            phases: PhaseDurations::deterministic(TIMES),
            strategy,
            case_id: None,
            surgeon_id: None,
        }
    }

    #[test]
    fn first_fit_takes_the_idle_room() {
        let s = day();
        let out = what_if(
            &s,
            &SimOptions::provisional(),
            &KpiTargets::default(),
            &request(Strategy::FirstFit),
        )
        .unwrap();
        assert_eq!(out.chosen_room, "R2");
        assert_eq!(out.start_time, TimePoint::hm(9, 30));
        assert_eq!(out.case.case_id, "WHATIF-1");
        assert!(out.kpi_after.utilization > out.kpi_before.utilization);
        assert_eq!(s, day());
    }

    #[test]
    fn repeated_calls_agree() {
        let s = day();
        let a = what_if(
            &s,
            &SimOptions::provisional(),
            &KpiTargets::default(),
            &request(Strategy::BestFit),
        )
        .unwrap();
        let b = what_if(
            &s,
            &SimOptions::provisional(),
            &KpiTargets::default(),
            &request(Strategy::BestFit),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        let s = day();
        let mut r = request(Strategy::FirstFit);
        r.case_id = Some("C1".into());
        assert_eq!(
            what_if(&s, &SimOptions::provisional(), &KpiTargets::default(), &r)
                .unwrap_err()
                .code(),
            "DUPLICATE_CASE_ID"
        );
        let mut r = request(Strategy::FirstFit);
        r.preoperative_minutes = -1.0;
        assert_eq!(
            what_if(&s, &SimOptions::provisional(), &KpiTargets::default(), &r)
                .unwrap_err()
                .code(),
            "INVALID_OPTIONS"
        );
        let mut performed = day();
        performed.schedule_kind = ScheduleKind::Performed;
        assert_eq!(
            what_if(
                &performed,
                &SimOptions::provisional(),
                &KpiTargets::default(),
                &request(Strategy::FirstFit)
            )
            .unwrap_err()
            .code(),
            "PRECONDITION_FAILED"
        );
    }
}
