//! Static state of the twin: rooms and their shifts, resource pools, and
//! the case list of one surgical day.

mod check;

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::time::TimePoint;

pub use check::{constraint_audit, feasibility_check, validate_scenario, Severity, Violation, ViolationKind, Window};

/// Distribution of one phase duration, in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DurationSpec {
    Deterministic {
        #[serde(rename = "p1")]
        value: f64,
    },
    /// Parameters of the underlying normal.
    #[serde(rename = "lognormal")]
    LogNormal {
        #[serde(rename = "p1")]
        mu: f64,
        #[serde(rename = "p2")]
        sigma: f64,
    },
    Triangular {
        #[serde(rename = "p1")]
        min: f64,
        #[serde(rename = "p2")]
        mode: f64,
        #[serde(rename = "p3")]
        max: f64,
    },
}

impl DurationSpec {
    pub fn fixed(value: f64) -> Self {
        DurationSpec::Deterministic { value }
    }

    pub fn kind_token(&self) -> &'static str {
        match self {
            DurationSpec::Deterministic { .. } => "deterministic",
            DurationSpec::LogNormal { .. } => "lognormal",
            DurationSpec::Triangular { .. } => "triangular",
        }
    }

    /// The `(p1, p2, p3)` column triple; unused slots are `None`.
    pub fn params(&self) -> (f64, Option<f64>, Option<f64>) {
        match *self {
            DurationSpec::Deterministic { value } => (value, None, None),
            DurationSpec::LogNormal { mu, sigma } => (mu, Some(sigma), None),
            DurationSpec::Triangular { min, mode, max } => (min, Some(mode), Some(max)),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, DurationSpec::Deterministic { .. })
    }

    /// Returns a description of the broken invariant, if any.
    pub fn check(&self) -> Option<String> {
        match *self {
            DurationSpec::Deterministic { value } if !(value.is_finite() && value >= 0.0) => {
                Some(format!("deterministic duration {value} must be >= 0"))
            }
            DurationSpec::LogNormal { mu, sigma } if !(mu.is_finite() && sigma.is_finite() && sigma >= 0.0) => Some(
                format!("lognormal(mu={mu}, sigma={sigma}) needs finite mu and sigma >= 0"),
            ),
            DurationSpec::Triangular { min, mode, max }
                if !(min.is_finite() && max.is_finite() && 0.0 <= min && min <= mode && mode <= max) =>
            {
                Some(format!(
                    "triangular({min}, {mode}, {max}) needs 0 <= min <= mode <= max"
                ))
            }
            _ => None,
        }
    }

    /// Analytic mean of the distribution.
    pub fn mean(&self) -> f64 {
        match *self {
            DurationSpec::Deterministic { value } => value,
            DurationSpec::LogNormal { mu, sigma } => (mu + sigma * sigma / 2.0).exp(),
            DurationSpec::Triangular { min, mode, max } => {
                if min == max {
                    min
                } else {
                    (min + mode + max) / 3.0
                }
            }
        }
    }

    /// Nominal value used by planned-deterministic runs: the point value
    /// for deterministic specs, the analytic mean otherwise.
    pub fn planned(&self) -> f64 {
        self.mean()
    }

    /// One draw, clamped at zero. Deterministic specs consume no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let draw = match *self {
            DurationSpec::Deterministic { value } => value,
            DurationSpec::LogNormal { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                (mu + sigma * z).exp()
            }
            DurationSpec::Triangular { min, mode, max } => {
                let u: f64 = rng.random();
                triangular_quantile(min, mode, max, u)
            }
        };
        draw.max(0.0)
    }
}

/// Inverse CDF of the triangular distribution.
fn triangular_quantile(min: f64, mode: f64, max: f64, u: f64) -> f64 {
    let width = max - min;
    if width <= 0.0 {
        return min;
    }
    let split = (mode - min) / width;
    if u < split {
        min + (u * width * (mode - min)).sqrt()
    } else {
        max - ((1.0 - u) * width * (max - mode)).sqrt()
    }
}

/// The four case phases, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    SetupWithAnesth,
    SetupWithoutAnesth,
    Procedure,
    Reversal,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::SetupWithAnesth,
        Phase::SetupWithoutAnesth,
        Phase::Procedure,
        Phase::Reversal,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Short token used in `durations.csv`.
    pub fn csv_token(self) -> &'static str {
        match self {
            Phase::SetupWithAnesth => "SWA",
            Phase::SetupWithoutAnesth => "SWOA",
            Phase::Procedure => "PROC",
            Phase::Reversal => "REV",
        }
    }

    pub fn from_csv_token(s: &str) -> Option<Phase> {
        Phase::ALL.into_iter().find(|p| p.csv_token() == s)
    }
}

/// Concrete minutes for the four phases, indexed by [`Phase::index`].
pub type PhaseTimes = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDurations {
    pub setup_with_anesth: DurationSpec,
    pub setup_without_anesth: DurationSpec,
    pub procedure: DurationSpec,
    pub reversal: DurationSpec,
    #[serde(default, skip_serializing_if = "RealizedPhases::is_empty")]
    pub realized: RealizedPhases,
}

/// Recorded phase lengths of a performed case.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RealizedPhases {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setup_with_anesth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setup_without_anesth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub procedure: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reversal: Option<f64>,
}

impl RealizedPhases {
    pub fn is_empty(&self) -> bool {
        Phase::ALL.iter().all(|&p| self.get(p).is_none())
    }

    pub fn get(&self, phase: Phase) -> Option<f64> {
        match phase {
            Phase::SetupWithAnesth => self.setup_with_anesth,
            Phase::SetupWithoutAnesth => self.setup_without_anesth,
            Phase::Procedure => self.procedure,
            Phase::Reversal => self.reversal,
        }
    }

    pub fn set(&mut self, phase: Phase, value: Option<f64>) {
        let slot = match phase {
            Phase::SetupWithAnesth => &mut self.setup_with_anesth,
            Phase::SetupWithoutAnesth => &mut self.setup_without_anesth,
            Phase::Procedure => &mut self.procedure,
            Phase::Reversal => &mut self.reversal,
        };
        *slot = value;
    }

    /// All four values, if every one is recorded.
    pub fn complete(&self) -> Option<PhaseTimes> {
        Some([
            self.setup_with_anesth?,
            self.setup_without_anesth?,
            self.procedure?,
            self.reversal?,
        ])
    }
}

impl PhaseDurations {
    pub fn deterministic(times: PhaseTimes) -> Self {
        PhaseDurations {
            setup_with_anesth: DurationSpec::fixed(times[0]),
            setup_without_anesth: DurationSpec::fixed(times[1]),
            procedure: DurationSpec::fixed(times[2]),
            reversal: DurationSpec::fixed(times[3]),
            realized: RealizedPhases::default(),
        }
    }

    pub fn spec(&self, phase: Phase) -> &DurationSpec {
        match phase {
            Phase::SetupWithAnesth => &self.setup_with_anesth,
            Phase::SetupWithoutAnesth => &self.setup_without_anesth,
            Phase::Procedure => &self.procedure,
            Phase::Reversal => &self.reversal,
        }
    }

    pub fn spec_mut(&mut self, phase: Phase) -> &mut DurationSpec {
        match phase {
            Phase::SetupWithAnesth => &mut self.setup_with_anesth,
            Phase::SetupWithoutAnesth => &mut self.setup_without_anesth,
            Phase::Procedure => &mut self.procedure,
            Phase::Reversal => &mut self.reversal,
        }
    }

    pub fn all_deterministic(&self) -> bool {
        Phase::ALL.iter().all(|&p| self.spec(p).is_deterministic())
    }

    pub fn planned(&self) -> PhaseTimes {
        Phase::ALL.map(|p| self.spec(p).planned())
    }

    pub fn planned_total(&self) -> f64 {
        self.planned().iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomShift {
    pub room_id: String,
    pub shift_start: TimePoint,
    pub shift_end: TimePoint,
}

impl RoomShift {
    pub fn new(room_id: impl Into<String>, shift_start: TimePoint, shift_end: TimePoint) -> Self {
        RoomShift {
            room_id: room_id.into(),
            shift_start,
            shift_end,
        }
    }

    pub fn length(&self) -> f64 {
        self.shift_end - self.shift_start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceConfig {
    pub anesthesiologist_count: u32,
    pub surgeons: BTreeSet<String>,
    pub enforce_anesth_capacity: bool,
    pub enforce_surgeon_exclusivity: bool,
}

impl Default for ResourceConfig {
    fn default() -> Self {
        ResourceConfig {
            anesthesiologist_count: 0,
            surgeons: BTreeSet::new(),
            enforce_anesth_capacity: false,
            enforce_surgeon_exclusivity: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseType {
    Elective,
    NonElective,
}

impl CaseType {
    pub fn token(self) -> &'static str {
        match self {
            CaseType::Elective => "elective",
            CaseType::NonElective => "non_elective",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Provisional,
    Performed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurgicalCase {
    pub case_id: String,
    pub case_type: CaseType,
    pub surgeon_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planned_room: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_index: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planned_start: Option<TimePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_time: Option<TimePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preoperative_duration: Option<f64>,
    pub phases: PhaseDurations,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realized_room: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realized_start: Option<TimePoint>,
}

impl SurgicalCase {
    /// A planned elective case.
    pub fn elective(
        case_id: impl Into<String>,
        surgeon_id: impl Into<String>,
        room: impl Into<String>,
        sequence_index: u32,
        planned_start: TimePoint,
        phases: PhaseDurations,
    ) -> Self {
        SurgicalCase {
            case_id: case_id.into(),
            case_type: CaseType::Elective,
            surgeon_id: surgeon_id.into(),
            planned_room: Some(room.into()),
            sequence_index: Some(sequence_index),
            planned_start: Some(planned_start),
            arrival_time: None,
            preoperative_duration: None,
            phases,
            realized_room: None,
            realized_start: None,
        }
    }

    /// An urgent case arriving during the day.
    pub fn non_elective(
        case_id: impl Into<String>,
        surgeon_id: impl Into<String>,
        arrival_time: TimePoint,
        preoperative_duration: f64,
        phases: PhaseDurations,
    ) -> Self {
        SurgicalCase {
            case_id: case_id.into(),
            case_type: CaseType::NonElective,
            surgeon_id: surgeon_id.into(),
            planned_room: None,
            sequence_index: None,
            planned_start: None,
            arrival_time: Some(arrival_time),
            preoperative_duration: Some(preoperative_duration),
            phases,
            realized_room: None,
            realized_start: None,
        }
    }

    pub fn is_elective(&self) -> bool {
        self.case_type == CaseType::Elective
    }

    /// Records the realized placement and phase lengths.
    pub fn with_realized(mut self, room: impl Into<String>, start: TimePoint, times: PhaseTimes) -> Self {
        self.realized_room = Some(room.into());
        self.realized_start = Some(start);
        for phase in Phase::ALL {
            self.phases.realized.set(phase, Some(times[phase.index()]));
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_id: String,
    /// Index order is room priority order.
    pub rooms: Vec<RoomShift>,
    pub resources: ResourceConfig,
    pub cases: Vec<SurgicalCase>,
    pub schedule_kind: ScheduleKind,
}

impl Scenario {
    pub fn room_index(&self, room_id: &str) -> Option<usize> {
        self.rooms.iter().position(|r| r.room_id == room_id)
    }

    pub fn room(&self, room_id: &str) -> Option<&RoomShift> {
        self.rooms.iter().find(|r| r.room_id == room_id)
    }

    pub fn case(&self, case_id: &str) -> Option<&SurgicalCase> {
        self.cases.iter().find(|c| c.case_id == case_id)
    }

    pub fn all_deterministic(&self) -> bool {
        self.cases.iter().all(|c| c.phases.all_deterministic())
    }

    /// Copy with every stochastic phase spec replaced by its planned value.
    pub fn nominal(&self) -> Scenario {
        let mut out = self.clone();
        for case in &mut out.cases {
            for phase in Phase::ALL {
                let spec = case.phases.spec_mut(phase);
                *spec = DurationSpec::fixed(spec.planned());
            }
        }
        out
    }

    /// Adds every surgeon referenced by a case to the resource pool.
    pub fn register_case_surgeons(&mut self) {
        for case in &self.cases {
            self.resources.surgeons.insert(case.surgeon_id.clone());
        }
    }
}
