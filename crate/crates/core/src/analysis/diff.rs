//! Provisional-versus-performed comparison with offline/online attribution.
//!
//! A case's placement is read from the planned fields of a provisional
//! schedule and from the realized fields of a performed one. Start drift is
//! judged against a counterfactual replay: the provisional sequence, with
//! planned starts honored, run on the durations that were actually
//! recorded. Drift that the replay predicts is pure propagation of duration
//! variability and is not reported.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{PhaseDurations, Scenario, ScheduleKind, SurgicalCase};
use crate::sim::{simulate, SimOptions};
use crate::time::TimePoint;

pub const DEFAULT_DRIFT_TOLERANCE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChangeKind {
    Added,
    Removed,
    RoomChanged,
    Resequenced,
    StartDrift,
}

impl ChangeKind {
    pub fn token(self) -> &'static str {
        match self {
            ChangeKind::Added => "ADDED",
            ChangeKind::Removed => "REMOVED",
            ChangeKind::RoomChanged => "ROOM_CHANGED",
            ChangeKind::Resequenced => "RESEQUENCED",
            ChangeKind::StartDrift => "START_DRIFT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribution {
    OfflineDecision,
    OnlineDecision,
    DurationVariability,
}

impl Attribution {
    pub fn token(self) -> &'static str {
        match self {
            Attribution::OfflineDecision => "offline_decision",
            Attribution::OnlineDecision => "online_decision",
            Attribution::DurationVariability => "duration_variability",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffRecord {
    pub case_id: String,
    pub change: ChangeKind,
    pub provisional_value: Option<String>,
    pub performed_value: Option<String>,
    pub attribution: Attribution,
    /// Observed minus counterfactual start, for START_DRIFT.
    pub drift_minutes: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDiff {
    pub records: Vec<DiffRecord>,
}

impl ScheduleDiff {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct Placement<'a> {
    room: &'a str,
    start: Option<f64>,
    order: (f64, f64),
}

struct Side<'a> {
    kind: ScheduleKind,
    cases: BTreeMap<&'a str, (&'a SurgicalCase, Option<Placement<'a>>)>,
}

fn side(scenario: &Scenario) -> Result<Side<'_>> {
    let mut cases = BTreeMap::new();
    for case in &scenario.cases {
        let placement = match scenario.schedule_kind {
            ScheduleKind::Performed => {
                // Only executed cases belong to the performed day.
                let Some(room) = case.realized_room.as_deref() else {
                    continue;
                };
                let start = case.realized_start.map(TimePoint::minutes);
                Some(Placement {
                    room,
                    start,
                    order: (start.unwrap_or(f64::INFINITY), 0.0),
                })
            }
            ScheduleKind::Provisional => case.planned_room.as_deref().map(|room| {
                let start = case.planned_start.map(TimePoint::minutes);
                Placement {
                    room,
                    start,
                    order: (
                        case.sequence_index.map_or(f64::INFINITY, f64::from),
                        start.unwrap_or(f64::INFINITY),
                    ),
                }
            }),
        };
        if cases.insert(case.case_id.as_str(), (case, placement)).is_some() {
            return Err(Error::DuplicateCaseId(case.case_id.clone()));
        }
    }
    Ok(Side {
        kind: scenario.schedule_kind,
        cases,
    })
}

fn durations(case: &SurgicalCase, kind: ScheduleKind) -> PhaseDurations {
    let times = match kind {
        ScheduleKind::Performed => case.phases.realized.complete().unwrap_or(case.phases.planned()),
        ScheduleKind::Provisional => case.phases.planned(),
    };
    PhaseDurations::deterministic(times)
}

/// Indices (into `ranks`) of one longest strictly increasing subsequence.
fn longest_increasing(ranks: &[usize]) -> Vec<usize> {
    let mut tails: Vec<usize> = Vec::new();
    let mut prev = vec![None; ranks.len()];
    for (i, &r) in ranks.iter().enumerate() {
        let pos = tails.partition_point(|&t| ranks[t] < r);
        if pos > 0 {
            prev[i] = Some(tails[pos - 1]);
        }
        if pos == tails.len() {
            tails.push(i);
        } else {
            tails[pos] = i;
        }
    }
    let mut out = Vec::with_capacity(tails.len());
    let mut cur = tails.last().copied();
    while let Some(i) = cur {
        out.push(i);
        cur = prev[i];
    }
    out.reverse();
    out
}

fn fmt_time(minutes: f64) -> String {
    TimePoint::from_minutes(minutes).to_string()
}

/// Classifies every disparity between `provisional` and `performed`.
///
/// Records are sorted by case id, then change kind.
pub fn diff_schedules(provisional: &Scenario, performed: &Scenario, tolerance_minutes: f64) -> Result<ScheduleDiff> {
    if !(tolerance_minutes.is_finite() && tolerance_minutes >= 0.0) {
        return Err(Error::InvalidOptions(format!(
            "drift tolerance {tolerance_minutes} must be >= 0"
        )));
    }
    let plan = side(provisional)?;
    let done = side(performed)?;
    let mut records = Vec::new();

    for (&id, &(case, placement)) in &done.cases {
        match plan.cases.get(id) {
            Some((other, _)) if other.case_type != case.case_type => {
                return Err(Error::DuplicateCaseId(id.to_string()));
            }
            Some(_) => {}
            None => records.push(DiffRecord {
                case_id: id.to_string(),
                change: ChangeKind::Added,
                provisional_value: None,
                performed_value: Some(
                    placement.map_or_else(|| case.case_type.token().to_string(), |p| p.room.to_string()),
                ),
                attribution: if case.is_elective() {
                    Attribution::OfflineDecision
                } else {
                    Attribution::OnlineDecision
                },
                drift_minutes: None,
            }),
        }
    }
    for (&id, &(case, placement)) in &plan.cases {
        if !done.cases.contains_key(id) {
            records.push(DiffRecord {
                case_id: id.to_string(),
                change: ChangeKind::Removed,
                provisional_value: Some(
                    placement.map_or_else(|| case.case_type.token().to_string(), |p| p.room.to_string()),
                ),
                performed_value: None,
                attribution: Attribution::OnlineDecision,
                drift_minutes: None,
            });
        }
    }

    // Shared, placed cases grouped by room when the room is unchanged.
    let mut same_room: BTreeMap<&str, Vec<(&str, Placement, Placement)>> = BTreeMap::new();
    for (&id, &(_, planned)) in &plan.cases {
        let (Some(planned), Some(&(_, Some(actual)))) = (planned, done.cases.get(id)) else {
            continue;
        };
        if planned.room != actual.room {
            records.push(DiffRecord {
                case_id: id.to_string(),
                change: ChangeKind::RoomChanged,
                provisional_value: Some(planned.room.to_string()),
                performed_value: Some(actual.room.to_string()),
                attribution: Attribution::OnlineDecision,
                drift_minutes: None,
            });
        } else {
            same_room.entry(planned.room).or_default().push((id, planned, actual));
        }
    }

    let mut in_order = Vec::new();
    for group in same_room.values_mut() {
        group.sort_by(|a, b| {
            a.1.order
                .0
                .total_cmp(&b.1.order.0)
                .then(a.1.order.1.total_cmp(&b.1.order.1))
                .then(a.0.cmp(b.0))
        });
        let mut by_actual: Vec<usize> = (0..group.len()).collect();
        by_actual.sort_by(|&a, &b| {
            let (x, y) = (group[a].2.order, group[b].2.order);
            x.0.total_cmp(&y.0)
                .then(x.1.total_cmp(&y.1))
                .then(group[a].0.cmp(group[b].0))
        });
        let mut actual_rank = vec![0; group.len()];
        for (rank, &i) in by_actual.iter().enumerate() {
            actual_rank[i] = rank;
        }
        let kept = longest_increasing(&actual_rank);
        let mut keep = vec![false; group.len()];
        for i in kept {
            keep[i] = true;
        }
        for (i, &(id, planned, actual)) in group.iter().enumerate() {
            if keep[i] {
                in_order.push((id, planned, actual));
            } else {
                records.push(DiffRecord {
                    case_id: id.to_string(),
                    change: ChangeKind::Resequenced,
                    provisional_value: Some(i.to_string()),
                    performed_value: Some(actual_rank[i].to_string()),
                    attribution: Attribution::OnlineDecision,
                    drift_minutes: None,
                });
            }
        }
    }

    if !in_order.is_empty() {
        let predicted = counterfactual_starts(provisional, &plan, &done)?;
        let observed = observed_starts(performed, &done)?;
        for (id, _, _) in in_order {
            let (Some(&cf), Some(&seen)) = (predicted.get(id), observed.get(id)) else {
                continue;
            };
            let drift = seen - cf;
            if drift.abs() > tolerance_minutes {
                records.push(DiffRecord {
                    case_id: id.to_string(),
                    change: ChangeKind::StartDrift,
                    provisional_value: Some(fmt_time(cf)),
                    performed_value: Some(fmt_time(seen)),
                    attribution: Attribution::OnlineDecision,
                    drift_minutes: Some(drift),
                });
            }
        }
    }

    records.sort_by(|a, b| a.case_id.cmp(&b.case_id).then(a.change.cmp(&b.change)));
    Ok(ScheduleDiff { records })
}

/// Starts predicted by replaying the provisional sequence of the shared
/// elective cases on their performed durations.
fn counterfactual_starts(provisional: &Scenario, plan: &Side, done: &Side) -> Result<HashMap<String, f64>> {
    let mut per_room: BTreeMap<&str, Vec<(&SurgicalCase, Placement, &SurgicalCase)>> = BTreeMap::new();
    for (&id, &(case, planned)) in &plan.cases {
        let (Some(planned), Some(&(actual, _))) = (planned, done.cases.get(id)) else {
            continue;
        };
        if case.is_elective() && planned.start.is_some() {
            per_room.entry(planned.room).or_default().push((case, planned, actual));
        }
    }
    let mut cases = Vec::new();
    for (room, mut group) in per_room {
        group.sort_by(|a, b| {
            a.1.order
                .0
                .total_cmp(&b.1.order.0)
                .then(a.1.order.1.total_cmp(&b.1.order.1))
                .then(a.0.case_id.cmp(&b.0.case_id))
        });
        for (seq, (case, planned, actual)) in group.into_iter().enumerate() {
            let start = TimePoint::from_minutes(planned.start.unwrap_or_default());
            cases.push(SurgicalCase::elective(
                case.case_id.clone(),
                case.surgeon_id.clone(),
                room,
                seq as u32,
                start,
                durations(actual, done.kind),
            ));
        }
    }
    let scenario = Scenario {
        scenario_id: format!("{}-counterfactual", provisional.scenario_id),
        rooms: provisional.rooms.clone(),
        resources: provisional.resources.clone(),
        cases,
        schedule_kind: ScheduleKind::Provisional,
    };
    let trace = simulate(&scenario, &SimOptions::provisional(), 0)?;
    Ok(trace
        .outcomes
        .into_iter()
        .map(|o| (o.case_id, o.start_time.minutes()))
        .collect())
}

/// Recorded starts of a performed day, or the planned replay of a
/// provisional one.
fn observed_starts(performed: &Scenario, done: &Side) -> Result<HashMap<String, f64>> {
    if done.kind == ScheduleKind::Performed {
        return Ok(done
            .cases
            .iter()
            .filter_map(|(&id, (_, p))| p.and_then(|p| p.start).map(|s| (id.to_string(), s)))
            .collect());
    }
    let options = SimOptions {
        keep_initial_non_elective: false,
        ..SimOptions::provisional()
    };
    let trace = simulate(&performed.nominal(), &options, 0)?;
    Ok(trace
        .outcomes
        .into_iter()
        .map(|o| (o.case_id, o.start_time.minutes()))
        .collect())
}
