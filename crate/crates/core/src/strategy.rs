//! Room selection for a non-elective case at its ready time.
//!
//! Every rule breaks ties by the lowest room priority index, so the
//! result never depends on the order the candidates are listed in.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::SurgicalCase;
use crate::time::TimePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    RealLife,
    FirstFit,
    BestFit,
    WorstFit,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::RealLife,
        Strategy::FirstFit,
        Strategy::BestFit,
        Strategy::WorstFit,
    ];

    /// The strategies that decide by rule rather than by replaying a record.
    pub const HEURISTICS: [Strategy; 3] = [Strategy::FirstFit, Strategy::BestFit, Strategy::WorstFit];

    pub fn token(self) -> &'static str {
        match self {
            Strategy::RealLife => "real_life",
            Strategy::FirstFit => "first_fit",
            Strategy::BestFit => "best_fit",
            Strategy::WorstFit => "worst_fit",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.token() == s)
            .ok_or_else(|| format!("unknown strategy {s:?} (expected real_life, first_fit, best_fit or worst_fit)"))
    }
}

/// What a strategy sees of one room.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomStateSnapshot {
    pub room_id: String,
    pub priority_index: usize,
    /// When the room finishes everything already committed to it.
    pub free_at: TimePoint,
    pub shift_end: TimePoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEvaluation {
    pub room_id: String,
    pub priority_index: usize,
    pub free_at: TimePoint,
    pub est: TimePoint,
    pub completion: TimePoint,
    /// `shift_end - completion`; negative when the case cannot finish in shift.
    pub slack: f64,
}

pub fn evaluate_candidates(
    rooms: &[RoomStateSnapshot],
    ready: TimePoint,
    total_busy: f64,
) -> Result<Vec<CandidateEvaluation>> {
    if rooms.is_empty() {
        return Err(Error::EmptyRoomSet);
    }
    let mut evals: Vec<CandidateEvaluation> = rooms
        .iter()
        .map(|room| {
            let est = ready.max(room.free_at);
            let completion = est + total_busy;
            CandidateEvaluation {
                room_id: room.room_id.clone(),
                priority_index: room.priority_index,
                free_at: room.free_at,
                est,
                completion,
                slack: room.shift_end - completion,
            }
        })
        .collect();
    evals.sort_by_key(|e| e.priority_index);
    Ok(evals)
}

/// Lowest-index room already idle at `ready`; otherwise the earliest start.
pub fn assign_first_fit(evals: &[CandidateEvaluation], ready: TimePoint) -> Result<&str> {
    let idle = evals
        .iter()
        .filter(|e| e.free_at <= ready)
        .min_by_key(|e| e.priority_index);
    let chosen = match idle {
        Some(e) => Some(e),
        None => evals
            .iter()
            .min_by(|a, b| a.est.total_cmp(&b.est).then(a.priority_index.cmp(&b.priority_index))),
    };
    chosen.map(|e| e.room_id.as_str()).ok_or(Error::EmptyRoomSet)
}

/// Tightest non-negative slack.
pub fn assign_best_fit(evals: &[CandidateEvaluation]) -> Result<&str> {
    let fitting = evals.iter().filter(|e| e.slack >= 0.0).min_by(|a, b| {
        a.slack
            .total_cmp(&b.slack)
            .then(a.priority_index.cmp(&b.priority_index))
    });
    fitting
        .or_else(|| earliest_completion(evals))
        .map(|e| e.room_id.as_str())
        .ok_or(Error::EmptyRoomSet)
}

/// Loosest non-negative slack.
pub fn assign_worst_fit(evals: &[CandidateEvaluation]) -> Result<&str> {
    let fitting = evals.iter().filter(|e| e.slack >= 0.0).min_by(|a, b| {
        b.slack
            .total_cmp(&a.slack)
            .then(a.priority_index.cmp(&b.priority_index))
    });
    fitting
        .or_else(|| earliest_completion(evals))
        .map(|e| e.room_id.as_str())
        .ok_or(Error::EmptyRoomSet)
}

/// Shared fallback when no room can absorb the case within its shift, which
/// is why best fit and worst fit agree in that regime.
fn earliest_completion(evals: &[CandidateEvaluation]) -> Option<&CandidateEvaluation> {
    evals.iter().min_by(|a, b| {
        a.completion
            .total_cmp(&b.completion)
            .then(a.priority_index.cmp(&b.priority_index))
    })
}

pub fn assign_real_life(case: &SurgicalCase) -> Result<&str> {
    case.realized_room.as_deref().ok_or_else(|| Error::UnassignableCase {
        case_id: case.case_id.clone(),
        reason: "real_life strategy needs a realized room".into(),
    })
}

/// Applies `strategy` to pick a room id for `case`.
pub fn choose_room(
    strategy: Strategy,
    case: &SurgicalCase,
    rooms: &[RoomStateSnapshot],
    ready: TimePoint,
    total_busy: f64,
) -> Result<String> {
    if strategy == Strategy::RealLife {
        return assign_real_life(case).map(str::to_string);
    }
    let evals = evaluate_candidates(rooms, ready, total_busy)?;
    let room = match strategy {
        Strategy::FirstFit => assign_first_fit(&evals, ready)?,
        Strategy::BestFit => assign_best_fit(&evals)?,
        Strategy::WorstFit => assign_worst_fit(&evals)?,
        Strategy::RealLife => unreachable!(),
    };
    Ok(room.to_string())
}
