//! Structural validation and interval-based constraint checks.
//!
//! All intervals are closed-open: a case ending at 09:30 and another
//! starting at 09:30 in the same room do not overlap.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::{CaseType, Phase, PhaseTimes, Scenario, ScheduleKind};
use crate::error::{Error, Result};
use crate::time::TimePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    RoomOverlap,
    SurgeonConflict,
    AnesthCapacityExceeded,
    OutsideShift,
    MissingField,
    SequenceGap,
    DanglingReference,
    DuplicateId,
    InvalidValue,
}

impl ViolationKind {
    pub fn token(self) -> &'static str {
        match self {
            ViolationKind::RoomOverlap => "ROOM_OVERLAP",
            ViolationKind::SurgeonConflict => "SURGEON_CONFLICT",
            ViolationKind::AnesthCapacityExceeded => "ANESTH_CAPACITY_EXCEEDED",
            ViolationKind::OutsideShift => "OUTSIDE_SHIFT",
            ViolationKind::MissingField => "MISSING_FIELD",
            ViolationKind::SequenceGap => "SEQUENCE_GAP",
            ViolationKind::DanglingReference => "DANGLING_REFERENCE",
            ViolationKind::DuplicateId => "DUPLICATE_ID",
            ViolationKind::InvalidValue => "INVALID_VALUE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: TimePoint,
    pub end: TimePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub severity: Severity,
    pub case_ids: Vec<String>,
    pub room_id: Option<String>,
    /// Absent for purely structural violations.
    pub window: Option<Window>,
    pub message: String,
}

impl Violation {
    fn structural(kind: ViolationKind, case_ids: Vec<String>, room_id: Option<String>, message: String) -> Self {
        Violation {
            kind,
            severity: Severity::Error,
            case_ids,
            room_id,
            window: None,
            message,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

fn sort_violations(violations: &mut [Violation]) {
    violations.sort_by(|a, b| {
        let wa = a.window.map(|w| (w.start.minutes(), w.end.minutes()));
        let wb = b.window.map(|w| (w.start.minutes(), w.end.minutes()));
        a.kind
            .cmp(&b.kind)
            .then_with(|| wa.partial_cmp(&wb).unwrap_or(std::cmp::Ordering::Equal))
            .then_with(|| a.room_id.cmp(&b.room_id))
            .then_with(|| a.case_ids.cmp(&b.case_ids))
    });
}

/// Structural problems: missing fields, bad references, sequence gaps,
/// duplicate ids and out-of-range values. Empty iff well-formed.
pub fn validate_scenario(scenario: &Scenario) -> Vec<Violation> {
    use ViolationKind::*;
    let mut out = Vec::new();

    let mut room_ids = HashSet::new();
    for room in &scenario.rooms {
        if !room_ids.insert(room.room_id.as_str()) {
            out.push(Violation::structural(
                DuplicateId,
                vec![],
                Some(room.room_id.clone()),
                format!("room {} listed twice", room.room_id),
            ));
        }
        if room.shift_start >= room.shift_end {
            out.push(Violation::structural(
                InvalidValue,
                vec![],
                Some(room.room_id.clone()),
                format!(
                    "room {} shift {}-{} is empty",
                    room.room_id, room.shift_start, room.shift_end
                ),
            ));
        }
    }

    let mut case_ids = HashSet::new();
    let mut sequences: BTreeMap<&str, Vec<(u32, &str)>> = BTreeMap::new();
    for case in &scenario.cases {
        let id = case.case_id.clone();
        if !case_ids.insert(case.case_id.as_str()) {
            out.push(Violation::structural(
                DuplicateId,
                vec![id.clone()],
                None,
                format!("case {id} listed twice"),
            ));
        }

        for phase in Phase::ALL {
            if let Some(problem) = case.phases.spec(phase).check() {
                out.push(Violation::structural(
                    InvalidValue,
                    vec![id.clone()],
                    None,
                    format!("case {id} {}: {problem}", phase.csv_token()),
                ));
            }
            if let Some(v) = case.phases.realized.get(phase) {
                if !(v.is_finite() && v >= 0.0) {
                    out.push(Violation::structural(
                        InvalidValue,
                        vec![id.clone()],
                        None,
                        format!("case {id} realized {} = {v} must be >= 0", phase.csv_token()),
                    ));
                }
            }
        }
        if let Some(p) = case.preoperative_duration {
            if !(p.is_finite() && p >= 0.0) {
                out.push(Violation::structural(
                    InvalidValue,
                    vec![id.clone()],
                    None,
                    format!("case {id} preoperative duration {p} must be >= 0"),
                ));
            }
        }

        let mut missing = Vec::new();
        match case.case_type {
            CaseType::NonElective => {
                if case.arrival_time.is_none() {
                    missing.push("arrival_time");
                }
                if case.preoperative_duration.is_none() {
                    missing.push("preoperative_duration");
                }
            }
            CaseType::Elective if scenario.schedule_kind == ScheduleKind::Provisional => {
                if case.planned_room.is_none() {
                    missing.push("planned_room");
                }
                if case.planned_start.is_none() {
                    missing.push("planned_start");
                }
                if case.sequence_index.is_none() {
                    missing.push("sequence_index");
                }
            }
            CaseType::Elective => {}
        }
        if !missing.is_empty() {
            out.push(Violation::structural(
                MissingField,
                vec![id.clone()],
                None,
                format!("case {id} is missing {}", missing.join(", ")),
            ));
        }

        for (label, room) in [
            ("planned_room", &case.planned_room),
            ("realized_room", &case.realized_room),
        ] {
            if let Some(room) = room {
                if scenario.room(room).is_none() {
                    out.push(Violation::structural(
                        DanglingReference,
                        vec![id.clone()],
                        Some(room.clone()),
                        format!("case {id} {label} {room} is not a known room"),
                    ));
                }
            }
        }
        if !scenario.resources.surgeons.contains(&case.surgeon_id) {
            out.push(Violation::structural(
                DanglingReference,
                vec![id.clone()],
                None,
                format!("case {id} surgeon {} is not in the surgeon pool", case.surgeon_id),
            ));
        }

        if let (Some(room), Some(seq)) = (&case.planned_room, case.sequence_index) {
            sequences
                .entry(room.as_str())
                .or_default()
                .push((seq, case.case_id.as_str()));
        }
    }

    for (room, mut seq) in sequences {
        seq.sort();
        let contiguous = seq.iter().enumerate().all(|(i, &(s, _))| s as usize == i);
        if !contiguous {
            let indices: Vec<String> = seq.iter().map(|(s, _)| s.to_string()).collect();
            let mut ids: Vec<String> = seq.iter().map(|(_, c)| c.to_string()).collect();
            ids.sort();
            out.push(Violation::structural(
                SequenceGap,
                ids,
                Some(room.to_string()),
                format!(
                    "room {room} sequence indices {{{}}} are not 0..{}",
                    indices.join(", "),
                    seq.len()
                ),
            ));
        }
    }

    sort_violations(&mut out);
    out
}

/// One case placed on the timeline.
struct PlacedCase<'a> {
    case_id: &'a str,
    room_id: &'a str,
    surgeon_id: &'a str,
    start: f64,
    phases: PhaseTimes,
}

impl PlacedCase<'_> {
    fn end(&self) -> f64 {
        self.start + self.phases.iter().sum::<f64>()
    }

    fn anesth_interval(&self) -> (f64, f64) {
        (self.start, self.start + self.phases[0])
    }

    fn procedure_interval(&self) -> (f64, f64) {
        let s = self.start + self.phases[0] + self.phases[1];
        (s, s + self.phases[2])
    }
}

/// Checks the planned timeline of a deterministic provisional schedule.
pub fn feasibility_check(scenario: &Scenario) -> Result<Vec<Violation>> {
    if scenario.schedule_kind != ScheduleKind::Provisional {
        return Err(Error::PreconditionFailed(
            "feasibility check needs a provisional schedule".into(),
        ));
    }
    if !scenario.all_deterministic() {
        return Err(Error::PreconditionFailed(
            "feasibility check needs deterministic phase durations".into(),
        ));
    }
    require_well_formed(scenario)?;

    let placed: Vec<PlacedCase> = scenario
        .cases
        .iter()
        .filter(|c| c.is_elective())
        .filter_map(|c| {
            Some(PlacedCase {
                case_id: &c.case_id,
                room_id: c.planned_room.as_deref()?,
                surgeon_id: &c.surgeon_id,
                start: c.planned_start?.minutes(),
                phases: c.phases.planned(),
            })
        })
        .collect();
    Ok(interval_checks(scenario, &placed, Severity::Warning))
}

/// Checks the recorded timeline of a performed schedule. Overtime is
/// reported for information only.
pub fn constraint_audit(scenario: &Scenario) -> Result<Vec<Violation>> {
    if scenario.schedule_kind != ScheduleKind::Performed {
        return Err(Error::PreconditionFailed(
            "constraint audit needs a performed schedule".into(),
        ));
    }
    require_well_formed(scenario)?;

    let mut placed = Vec::new();
    for case in &scenario.cases {
        let Some(room) = case.realized_room.as_deref() else {
            continue;
        };
        let start = case.realized_start.ok_or_else(|| {
            Error::PreconditionFailed(format!("executed case {} has no realized_start", case.case_id))
        })?;
        let phases = case.phases.realized.complete().ok_or_else(|| {
            Error::PreconditionFailed(format!("executed case {} lacks realized phase durations", case.case_id))
        })?;
        placed.push(PlacedCase {
            case_id: &case.case_id,
            room_id: room,
            surgeon_id: &case.surgeon_id,
            start: start.minutes(),
            phases,
        });
    }
    Ok(interval_checks(scenario, &placed, Severity::Info))
}

fn require_well_formed(scenario: &Scenario) -> Result<()> {
    let structural = validate_scenario(scenario);
    if let Some(first) = structural.first() {
        return Err(Error::PreconditionFailed(format!(
            "scenario is not well-formed ({} violation(s), first: {})",
            structural.len(),
            first.message
        )));
    }
    Ok(())
}

fn window(start: f64, end: f64) -> Option<Window> {
    Some(Window {
        start: TimePoint::from_minutes(start),
        end: TimePoint::from_minutes(end),
    })
}

fn pair_ids(a: &str, b: &str) -> Vec<String> {
    let mut ids = vec![a.to_string(), b.to_string()];
    ids.sort();
    ids
}

fn interval_checks(scenario: &Scenario, placed: &[PlacedCase], shift_severity: Severity) -> Vec<Violation> {
    use ViolationKind::*;
    let mut out = Vec::new();

    let mut by_room: BTreeMap<&str, Vec<&PlacedCase>> = BTreeMap::new();
    for p in placed {
        by_room.entry(p.room_id).or_default().push(p);
    }
    for (room, cases) in &by_room {
        for (i, a) in cases.iter().enumerate() {
            for b in &cases[i + 1..] {
                let lo = a.start.max(b.start);
                let hi = a.end().min(b.end());
                if hi > lo {
                    out.push(Violation {
                        kind: RoomOverlap,
                        severity: Severity::Error,
                        case_ids: pair_ids(a.case_id, b.case_id),
                        room_id: Some(room.to_string()),
                        window: window(lo, hi),
                        message: format!("cases {} and {} overlap in room {room}", a.case_id, b.case_id),
                    });
                }
            }
        }
    }

    if scenario.resources.enforce_surgeon_exclusivity {
        let mut by_surgeon: BTreeMap<&str, Vec<&PlacedCase>> = BTreeMap::new();
        for p in placed {
            by_surgeon.entry(p.surgeon_id).or_default().push(p);
        }
        for (surgeon, cases) in &by_surgeon {
            for (i, a) in cases.iter().enumerate() {
                for b in &cases[i + 1..] {
                    if a.room_id == b.room_id {
                        continue;
                    }
                    let (sa, ea) = a.procedure_interval();
                    let (sb, eb) = b.procedure_interval();
                    let lo = sa.max(sb);
                    let hi = ea.min(eb);
                    if hi > lo {
                        out.push(Violation {
                            kind: SurgeonConflict,
                            severity: Severity::Error,
                            case_ids: pair_ids(a.case_id, b.case_id),
                            room_id: None,
                            window: window(lo, hi),
                            message: format!(
                                "surgeon {surgeon} operates {} ({}) and {} ({}) at once",
                                a.case_id, a.room_id, b.case_id, b.room_id
                            ),
                        });
                    }
                }
            }
        }
    }

    if scenario.resources.enforce_anesth_capacity {
        out.extend(anesth_excess(placed, scenario.resources.anesthesiologist_count));
    }

    for p in placed {
        let Some(room) = scenario.room(p.room_id) else {
            continue;
        };
        let (start, end) = (p.start, p.end());
        let (shift_start, shift_end) = (room.shift_start.minutes(), room.shift_end.minutes());
        if start < shift_start && end > start {
            out.push(Violation {
                kind: OutsideShift,
                severity: shift_severity,
                case_ids: vec![p.case_id.to_string()],
                room_id: Some(p.room_id.to_string()),
                window: window(start, end.min(shift_start)),
                message: format!(
                    "case {} starts before room {} opens at {}",
                    p.case_id, p.room_id, room.shift_start
                ),
            });
        }
        if end > shift_end {
            out.push(Violation {
                kind: OutsideShift,
                severity: shift_severity,
                case_ids: vec![p.case_id.to_string()],
                room_id: Some(p.room_id.to_string()),
                window: window(start.max(shift_end), end),
                message: format!(
                    "case {} runs {:.1} min past the shift end of room {}",
                    p.case_id,
                    end - shift_end,
                    p.room_id
                ),
            });
        }
    }

    sort_violations(&mut out);
    out
}

/// Sweep over anesthesia setups; one violation per maximal window where
/// the concurrent count exceeds capacity.
fn anesth_excess(placed: &[PlacedCase], capacity: u32) -> Vec<Violation> {
    // (time, delta, case) with ends sorted before starts at equal times.
    let mut events: Vec<(f64, i32, &str)> = Vec::new();
    for p in placed {
        let (s, e) = p.anesth_interval();
        if e > s {
            events.push((s, 1, p.case_id));
            events.push((e, -1, p.case_id));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(b.2)));

    let mut out = Vec::new();
    let mut active: BTreeSet<&str> = BTreeSet::new();
    let mut open: Option<(f64, BTreeSet<&str>)> = None;
    let mut i = 0;
    while i < events.len() {
        let t = events[i].0;
        while i < events.len() && events[i].0 == t {
            let (_, delta, id) = events[i];
            if delta > 0 {
                active.insert(id);
            } else {
                active.remove(id);
            }
            i += 1;
        }
        let over = active.len() > capacity as usize;
        match (&mut open, over) {
            (None, true) => open = Some((t, active.clone())),
            (Some((_, ids)), true) => ids.extend(active.iter().copied()),
            (Some((start, ids)), false) => {
                let ids: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
                out.push(Violation {
                    kind: ViolationKind::AnesthCapacityExceeded,
                    severity: Severity::Error,
                    message: format!("more than {capacity} anesthesia setup(s) at once: {}", ids.join(", ")),
                    case_ids: ids,
                    room_id: None,
                    window: window(*start, t),
                });
                open = None;
            }
            (None, false) => {}
        }
    }
    out
}
