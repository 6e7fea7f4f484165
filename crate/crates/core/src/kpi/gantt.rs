use serde::{Deserialize, Serialize};

use crate::scenario::{Phase, RoomShift};
use crate::sim::{CaseOutcome, SimulationTrace};
use crate::time::TimePoint;

/// Room state shown on the Gantt chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GanttState {
    SetupWithAnesth,
    SetupWithoutAnesth,
    Procedure,
    Reversal,
    Idle,
    OffSchedule,
}

impl GanttState {
    pub const ALL: [GanttState; 6] = [
        GanttState::SetupWithAnesth,
        GanttState::SetupWithoutAnesth,
        GanttState::Procedure,
        GanttState::Reversal,
        GanttState::Idle,
        GanttState::OffSchedule,
    ];

    pub fn token(self) -> &'static str {
        match self {
            GanttState::SetupWithAnesth => "SETUP_WITH_ANESTH",
            GanttState::SetupWithoutAnesth => "SETUP_WITHOUT_ANESTH",
            GanttState::Procedure => "PROCEDURE",
            GanttState::Reversal => "REVERSAL",
            GanttState::Idle => "IDLE",
            GanttState::OffSchedule => "OFF_SCHEDULE",
        }
    }

    pub fn is_case_phase(self) -> bool {
        !matches!(self, GanttState::Idle | GanttState::OffSchedule)
    }
}

impl From<Phase> for GanttState {
    fn from(phase: Phase) -> Self {
        match phase {
            Phase::SetupWithAnesth => GanttState::SetupWithAnesth,
            Phase::SetupWithoutAnesth => GanttState::SetupWithoutAnesth,
            Phase::Procedure => GanttState::Procedure,
            Phase::Reversal => GanttState::Reversal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanttSegment {
    pub room_id: String,
    pub state: GanttState,
    pub start: TimePoint,
    pub end: TimePoint,
    pub case_id: Option<String>,
    pub non_elective_flag: bool,
}

pub fn build_gantt(trace: &SimulationTrace, rooms: &[RoomShift]) -> Vec<GanttSegment> {
    build_gantt_from_outcomes(&trace.outcomes, rooms)
}

/// Tiles each room's horizon `[shift_start, max(shift_end, last activity))`
/// with case phases, filling in-shift gaps with `IDLE` and post-shift gaps
/// with `OFF_SCHEDULE`. Zero-length segments are dropped; a phase crossing
/// the shift end is kept whole.
pub fn build_gantt_from_outcomes(outcomes: &[CaseOutcome], rooms: &[RoomShift]) -> Vec<GanttSegment> {
    let mut out = Vec::new();
    for room in rooms {
        let mut phases: Vec<GanttSegment> = outcomes
            .iter()
            .filter(|o| o.room_id == room.room_id)
            .flat_map(|o| {
                Phase::ALL.into_iter().filter_map(move |p| {
                    let (start, end) = o.phase_interval(p);
                    (end > start).then(|| GanttSegment {
                        room_id: room.room_id.clone(),
                        state: p.into(),
                        start,
                        end,
                        case_id: Some(o.case_id.clone()),
                        non_elective_flag: o.non_elective,
                    })
                })
            })
            .collect();
        phases.sort_by(|a, b| a.start.total_cmp(&b.start));

        let mut cursor = room.shift_start;
        for seg in phases {
            if seg.start > cursor {
                fill_gap(&mut out, room, cursor, seg.start);
            }
            cursor = cursor.max(seg.end);
            out.push(seg);
        }
        fill_gap(&mut out, room, cursor, room.shift_end.max(cursor));
    }
    out
}

fn fill_gap(out: &mut Vec<GanttSegment>, room: &RoomShift, from: TimePoint, to: TimePoint) {
    let mut push = |state, start: TimePoint, end: TimePoint| {
        if end > start {
            out.push(GanttSegment {
                room_id: room.room_id.clone(),
                state,
                start,
                end,
                case_id: None,
                non_elective_flag: false,
            });
        }
    };
    push(GanttState::Idle, from, to.min(room.shift_end));
    push(GanttState::OffSchedule, from.max(room.shift_end), to);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(room: &str, id: &str, start: f64, phases: [f64; 4]) -> CaseOutcome {
        let mut b = [TimePoint::from_minutes(start); 5];
        let mut t = start;
        for i in 0..4 {
            t += phases[i];
            b[i + 1] = TimePoint::from_minutes(t);
        }
        CaseOutcome {
            case_id: id.into(),
            room_id: room.into(),
            non_elective: false,
            ready_time: b[0],
            start_time: b[0],
            end_time: b[4],
            phase_boundaries: b,
            waiting_minutes: 0.0,
        }
    }

    fn room() -> RoomShift {
        RoomShift::new("R1", TimePoint::hm(8, 0), TimePoint::hm(16, 0))
    }

    fn spans(segs: &[GanttSegment]) -> Vec<(&'static str, f64, f64)> {
        segs.iter()
            .map(|s| (s.state.token(), s.start.minutes(), s.end.minutes()))
            .collect()
    }

    #[test]
    fn empty_room_is_idle_all_shift() {
        let g = build_gantt_from_outcomes(&[], &[room()]);
        assert_eq!(spans(&g), vec![("IDLE", 480.0, 960.0)]);
    }

    #[test]
    fn s1_gantt() {
        let outcomes = [
            outcome("R1", "C1", 480.0, [10.0, 5.0, 60.0, 15.0]),
            outcome("R1", "C2", 570.0, [10.0, 5.0, 120.0, 15.0]),
        ];
        let g = build_gantt_from_outcomes(&outcomes, &[room()]);
        assert_eq!(
            spans(&g),
            vec![
                ("SETUP_WITH_ANESTH", 480.0, 490.0),
                ("SETUP_WITHOUT_ANESTH", 490.0, 495.0),
                ("PROCEDURE", 495.0, 555.0),
                ("REVERSAL", 555.0, 570.0),
                ("SETUP_WITH_ANESTH", 570.0, 580.0),
                ("SETUP_WITHOUT_ANESTH", 580.0, 585.0),
                ("PROCEDURE", 585.0, 705.0),
                ("REVERSAL", 705.0, 720.0),
                ("IDLE", 720.0, 960.0),
            ]
        );
    }

    #[test]
    fn activity_past_shift_end_has_no_off_schedule() {
        // Gap 15:00-15:20, then a case running to 16:40.
        let outcomes = [
            outcome("R1", "C1", 480.0, [0.0, 0.0, 420.0, 0.0]),
            outcome("R1", "C2", 920.0, [10.0, 0.0, 60.0, 10.0]),
        ];
        let g = build_gantt_from_outcomes(&outcomes, &[room()]);
        assert_eq!(
            spans(&g),
            vec![
                ("PROCEDURE", 480.0, 900.0),
                ("IDLE", 900.0, 920.0),
                ("SETUP_WITH_ANESTH", 920.0, 930.0),
                ("PROCEDURE", 930.0, 990.0),
                ("REVERSAL", 990.0, 1000.0),
            ]
        );
    }

    #[test]
    fn post_shift_gap_is_off_schedule() {
        let outcomes = [outcome("R1", "U1", 1020.0, [0.0, 0.0, 60.0, 0.0])];
        let g = build_gantt_from_outcomes(&outcomes, &[room()]);
        assert_eq!(
            spans(&g),
            vec![
                ("IDLE", 480.0, 960.0),
                ("OFF_SCHEDULE", 960.0, 1020.0),
                ("PROCEDURE", 1020.0, 1080.0)
            ]
        );
    }
}
