//! Event-calendar simulation of one surgical day.
//!
//! Each room works through a FIFO queue. Elective cases are queued up front
//! (by sequence index for provisional schedules, by realized start for
//! performed ones); non-elective cases are placed by the configured
//! [`Strategy`] at their ready time and appended to the end of the chosen
//! room's queue. A case starts at the earliest instant where it is
//! released, the room is free, an anesthesiologist is available for its
//! setup-with-anesthesia phase, and its surgeon is free for the whole
//! procedure phase. Phases then run back to back without preemption.
//!
//! Ties between events at the same instant are broken by event class
//! (arrivals first), room priority index, then case id.
//!
//! # Random streams
//!
//! Replication `i` of a run seeded with `base_seed` draws phase durations
//! from ChaCha8 seeded with `base_seed` on stream `2i`, and generated
//! arrivals from stream `2i + 1`. Replications are therefore independent
//! and each one can be re-run on its own.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::arrivals::{generate_arrivals, ArrivalGeneratorConfig};
use crate::error::{Error, Result};
use crate::kpi::{build_gantt_from_outcomes, GanttSegment};
use crate::scenario::{CaseType, Phase, PhaseDurations, PhaseTimes, Scenario, ScheduleKind, SurgicalCase};
use crate::strategy::{choose_room, RoomStateSnapshot, Strategy};
use crate::time::TimePoint;

/// Latest admissible case start: midnight plus eight hours.
pub const START_HORIZON: f64 = 24.0 * 60.0 + 8.0 * 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationMode {
    PlannedDeterministic,
    RealizedDeterministic,
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub schedule_kind: ScheduleKind,
    pub duration_mode: DurationMode,
    #[serde(default = "yes")]
    pub honor_planned_starts: bool,
    #[serde(default = "yes")]
    pub keep_initial_non_elective: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject_arrivals: Option<ArrivalGeneratorConfig>,
    pub strategy: Strategy,
    #[serde(default = "one")]
    pub replications: u32,
    #[serde(default)]
    pub base_seed: u64,
}

fn yes() -> bool {
    true
}

fn one() -> u32 {
    1
}

impl SimOptions {
    /// Deterministic replay of a provisional plan.
    pub fn provisional() -> Self {
        SimOptions {
            schedule_kind: ScheduleKind::Provisional,
            duration_mode: DurationMode::PlannedDeterministic,
            honor_planned_starts: true,
            keep_initial_non_elective: true,
            inject_arrivals: None,
            strategy: Strategy::FirstFit,
            replications: 1,
            base_seed: 0,
        }
    }

    /// Replay of a performed schedule with recorded durations and placements.
    pub fn performed() -> Self {
        SimOptions {
            schedule_kind: ScheduleKind::Performed,
            duration_mode: DurationMode::RealizedDeterministic,
            strategy: Strategy::RealLife,
            ..SimOptions::provisional()
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidOptions("replications must be >= 1".into()));
        }
        if let Some(problem) = self.inject_arrivals.as_ref().and_then(|a| a.check()) {
            return Err(Error::InvalidOptions(problem));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub case_id: String,
    pub room_id: String,
    pub non_elective: bool,
    pub ready_time: TimePoint,
    pub start_time: TimePoint,
    pub end_time: TimePoint,
    /// Start, the three inner phase boundaries, end.
    pub phase_boundaries: [TimePoint; 5],
    pub waiting_minutes: f64,
}

impl CaseOutcome {
    pub fn phase_interval(&self, phase: Phase) -> (TimePoint, TimePoint) {
        let i = phase.index();
        (self.phase_boundaries[i], self.phase_boundaries[i + 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub segments: Vec<GanttSegment>,
    pub outcomes: Vec<CaseOutcome>,
    pub replication_index: u32,
    pub seed_used: u64,
    pub horizon_end: TimePoint,
}

impl SimulationTrace {
    pub fn outcome(&self, case_id: &str) -> Option<&CaseOutcome> {
        self.outcomes.iter().find(|o| o.case_id == case_id)
    }
}

/// When `case` may be considered ready: arrival plus preoperative delay
/// for urgent cases; for electives the planned start (provisional, when
/// planned starts are honored), the realized start (performed replay), or
/// the opening of the planned room.
pub fn ready_time(case: &SurgicalCase, scenario: &Scenario, options: &SimOptions) -> Result<TimePoint> {
    let missing = |field| Error::MissingField {
        case_id: case.case_id.clone(),
        field,
    };
    match case.case_type {
        CaseType::NonElective => {
            let arrival = case.arrival_time.ok_or_else(|| missing("arrival_time"))?;
            let preop = case
                .preoperative_duration
                .ok_or_else(|| missing("preoperative_duration"))?;
            Ok(arrival + preop)
        }
        CaseType::Elective if options.schedule_kind == ScheduleKind::Performed => {
            case.realized_start.ok_or_else(|| missing("realized_start"))
        }
        CaseType::Elective if options.honor_planned_starts => {
            case.planned_start.ok_or_else(|| missing("planned_start"))
        }
        CaseType::Elective => {
            let room = case.planned_room.as_deref().ok_or_else(|| missing("planned_room"))?;
            scenario
                .room(room)
                .map(|r| r.shift_start)
                .ok_or_else(|| missing("planned_room"))
        }
    }
}

/// Phase lengths for one case under `mode`.
pub fn sample_phase_durations<R: Rng + ?Sized>(
    phases: &PhaseDurations,
    mode: DurationMode,
    rng: &mut R,
) -> Result<PhaseTimes> {
    match mode {
        DurationMode::PlannedDeterministic => Ok(phases.planned()),
        DurationMode::RealizedDeterministic => phases.realized.complete().ok_or_else(|| {
            Error::PreconditionFailed("realized durations requested but not all phases are recorded".into())
        }),
        DurationMode::Stochastic => Ok(Phase::ALL.map(|p| phases.spec(p).sample(rng))),
    }
}

/// Random stream for replication `index`; `lane` 0 is durations, 1 arrivals.
pub fn replication_rng(base_seed: u64, index: u32, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(2 * u64::from(index) + lane);
    rng
}

struct SimCase<'a> {
    source: &'a SurgicalCase,
    ready: f64,
    release: f64,
    phases: PhaseTimes,
    total: f64,
}

struct RoomState {
    queue: VecDeque<usize>,
    free: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventClass {
    Arrival,
    RoomCheck,
}

/// Calendar entry, ordered by (time, class, room, case id).
struct Queued {
    time: f64,
    class: EventClass,
    room: usize,
    case_id: String,
    case: usize,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.class.cmp(&other.class))
            .then(self.room.cmp(&other.room))
            .then_with(|| self.case_id.cmp(&other.case_id))
    }
}

struct Engine<'a> {
    scenario: &'a Scenario,
    options: &'a SimOptions,
    cases: Vec<SimCase<'a>>,
    rooms: Vec<RoomState>,
    calendar: BinaryHeap<Reverse<Queued>>,
    anesth: Vec<(f64, f64)>,
    surgeons: HashMap<&'a str, Vec<(f64, f64)>>,
    outcomes: Vec<(usize, CaseOutcome)>,
}

impl<'a> Engine<'a> {
    fn push(&mut self, time: f64, class: EventClass, room: usize, case: usize) {
        let case_id = self.cases[case].source.case_id.clone();
        self.calendar.push(Reverse(Queued {
            time,
            class,
            room,
            case_id,
            case,
        }));
    }

    fn run(mut self) -> Result<Vec<(usize, CaseOutcome)>> {
        while let Some(Reverse(ev)) = self.calendar.pop() {
            match ev.class {
                EventClass::Arrival => self.arrive(ev.case, ev.time)?,
                EventClass::RoomCheck => self.check_room(ev.room, ev.time)?,
            }
        }
        if let Some(room) = self.rooms.iter().find(|r| !r.queue.is_empty()) {
            let case = &self.cases[room.queue[0]];
            return Err(Error::UnassignableCase {
                case_id: case.source.case_id.clone(),
                reason: "case never started".into(),
            });
        }
        Ok(self.outcomes)
    }

    fn snapshots(&self) -> Vec<RoomStateSnapshot> {
        self.scenario
            .rooms
            .iter()
            .zip(&self.rooms)
            .enumerate()
            .map(|(i, (shift, state))| {
                let free = state.queue.iter().fold(state.free, |free, &c| {
                    let case = &self.cases[c];
                    free.max(case.release) + case.total
                });
                RoomStateSnapshot {
                    room_id: shift.room_id.clone(),
                    priority_index: i,
                    free_at: TimePoint::from_minutes(free),
                    shift_end: shift.shift_end,
                }
            })
            .collect()
    }

    fn arrive(&mut self, case: usize, now: f64) -> Result<()> {
        let snapshots = self.snapshots();
        let sim_case = &self.cases[case];
        let room_id = choose_room(
            self.options.strategy,
            sim_case.source,
            &snapshots,
            TimePoint::from_minutes(sim_case.ready),
            sim_case.total,
        )?;
        let room = self
            .scenario
            .room_index(&room_id)
            .ok_or_else(|| Error::UnassignableCase {
                case_id: sim_case.source.case_id.clone(),
                reason: format!("room {room_id} does not exist"),
            })?;
        self.rooms[room].queue.push_back(case);
        let check = now.max(self.rooms[room].free);
        self.push(check, EventClass::RoomCheck, room, case);
        Ok(())
    }

    fn check_room(&mut self, room: usize, now: f64) -> Result<()> {
        let state = &self.rooms[room];
        let Some(&head) = state.queue.front() else {
            return Ok(());
        };
        if state.free > now {
            return Ok(());
        }
        let case = &self.cases[head];
        let earliest = now.max(case.release).max(state.free);
        if earliest > now {
            self.push(earliest, EventClass::RoomCheck, room, head);
            return Ok(());
        }
        let start = self.earliest_resource_time(head, now)?;
        if start > START_HORIZON {
            return Err(Error::UnassignableCase {
                case_id: case.source.case_id.clone(),
                reason: format!("cannot start before {}", TimePoint::from_minutes(START_HORIZON)),
            });
        }
        if start > now {
            self.push(start, EventClass::RoomCheck, room, head);
            return Ok(());
        }
        self.start_case(room, head, now);
        Ok(())
    }

    /// Earliest `t >= now` at which the case's anesthesia setup and
    /// procedure fit around the commitments made so far.
    fn earliest_resource_time(&self, case: usize, now: f64) -> Result<f64> {
        let c = &self.cases[case];
        let res = &self.scenario.resources;
        let [swa, swoa, proc, _] = c.phases;
        let needs_anesth = res.enforce_anesth_capacity && swa > 0.0;
        let surgeon_slots = if res.enforce_surgeon_exclusivity && proc > 0.0 {
            self.surgeons.get(c.source.surgeon_id.as_str())
        } else {
            None
        };
        if !needs_anesth && surgeon_slots.is_none() {
            return Ok(now);
        }

        let offset = swa + swoa;
        let mut candidates = vec![now];
        if needs_anesth {
            candidates.extend(self.anesth.iter().map(|&(_, e)| e).filter(|&e| e > now));
        }
        if let Some(slots) = surgeon_slots {
            candidates.extend(
                slots
                    .iter()
                    .map(|&(_, e)| {
                        let t = e - offset;
                        if t + offset < e {
                            t.next_up()
                        } else {
                            t
                        }
                    })
                    .filter(|&t| t > now),
            );
        }
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();

        let capacity = res.anesthesiologist_count as usize;
        for t in candidates {
            let anesth_ok = !needs_anesth || max_concurrency(&self.anesth, t, t + swa) < capacity;
            let surgeon_ok = surgeon_slots.is_none_or(|slots| {
                let (ps, pe) = (t + offset, t + offset + proc);
                slots.iter().all(|&(s, e)| e <= ps || s >= pe)
            });
            if anesth_ok && surgeon_ok {
                return Ok(t);
            }
        }
        Err(Error::UnassignableCase {
            case_id: c.source.case_id.clone(),
            reason: "no anesthesiologist can ever cover its setup".into(),
        })
    }

    fn start_case(&mut self, room: usize, case: usize, start: f64) {
        let c = &self.cases[case];
        let mut bounds = [TimePoint::from_minutes(start); 5];
        let mut t = start;
        for (i, d) in c.phases.iter().enumerate() {
            t += d;
            bounds[i + 1] = TimePoint::from_minutes(t);
        }
        let end = t;
        let [swa, swoa, proc, _] = c.phases;
        if swa > 0.0 {
            self.anesth.push((start, start + swa));
        }
        if proc > 0.0 {
            let ps = start + swa + swoa;
            self.surgeons
                .entry(c.source.surgeon_id.as_str())
                .or_default()
                .push((ps, ps + proc));
        }
        let outcome = CaseOutcome {
            case_id: c.source.case_id.clone(),
            room_id: self.scenario.rooms[room].room_id.clone(),
            non_elective: c.source.case_type == CaseType::NonElective,
            ready_time: TimePoint::from_minutes(c.ready),
            start_time: bounds[0],
            end_time: bounds[4],
            phase_boundaries: bounds,
            waiting_minutes: start - c.ready,
        };
        self.outcomes.push((room, outcome));

        let state = &mut self.rooms[room];
        state.queue.pop_front();
        state.free = end;
        self.push(end, EventClass::RoomCheck, room, case);
    }
}

/// Largest number of intervals simultaneously active within `[from, to)`.
fn max_concurrency(intervals: &[(f64, f64)], from: f64, to: f64) -> usize {
    let active: Vec<(f64, f64)> = intervals.iter().copied().filter(|&(s, e)| s < to && e > from).collect();
    let points = std::iter::once(from).chain(active.iter().map(|&(s, _)| s).filter(|&s| s > from));
    points
        .map(|p| active.iter().filter(|&&(s, e)| s <= p && p < e).count())
        .max()
        .unwrap_or(0)
}

/// Simulates replication `replication_index` of `scenario` under `options`.
pub fn simulate(scenario: &Scenario, options: &SimOptions, replication_index: u32) -> Result<SimulationTrace> {
    options.check()?;
    let mut duration_rng = replication_rng(options.base_seed, replication_index, 0);
    let mut arrival_rng = replication_rng(options.base_seed, replication_index, 1);

    let injected: Vec<SurgicalCase> = options
        .inject_arrivals
        .as_ref()
        .map(|cfg| generate_arrivals(cfg, &mut arrival_rng))
        .unwrap_or_default();
    let known: HashSet<&str> = scenario.cases.iter().map(|c| c.case_id.as_str()).collect();
    if let Some(clash) = injected.iter().find(|c| known.contains(c.case_id.as_str())) {
        return Err(Error::DuplicateCaseId(clash.case_id.clone()));
    }

    let performed = options.schedule_kind == ScheduleKind::Performed;
    let mut cases = Vec::new();
    let mut queued: Vec<Vec<(f64, u32, usize)>> = vec![Vec::new(); scenario.rooms.len()];
    let mut arrivals = Vec::new();

    // Draw durations for every listed case in list order so the stream
    // consumption does not depend on which cases end up executing.
    let mut listed = Vec::with_capacity(scenario.cases.len());
    for case in &scenario.cases {
        listed.push(
            sample_phase_durations(&case.phases, options.duration_mode, &mut duration_rng).map_err(|e| match e {
                Error::PreconditionFailed(msg) => Error::PreconditionFailed(format!("case {}: {msg}", case.case_id)),
                other => other,
            }),
        );
    }
    let injected_times: Vec<PhaseTimes> = injected
        .iter()
        .map(|case| match options.duration_mode {
            // Generated cases have no record; replay them at planned values.
            DurationMode::RealizedDeterministic => case.phases.planned(),
            mode => sample_phase_durations(&case.phases, mode, &mut duration_rng).unwrap_or(case.phases.planned()),
        })
        .collect();

    let missing = |case: &SurgicalCase, field| Error::MissingField {
        case_id: case.case_id.clone(),
        field,
    };
    for (case, times) in scenario.cases.iter().zip(listed) {
        let elective = case.is_elective();
        if !elective && !options.keep_initial_non_elective {
            continue;
        }
        if elective && performed && case.realized_room.is_none() {
            // Not executed on the day.
            continue;
        }
        let phases = times?;
        let ready = ready_time(case, scenario, options)?;
        let mut release = ready.minutes();
        if !elective && performed && options.strategy == Strategy::RealLife {
            if let Some(rs) = case.realized_start {
                release = release.max(rs.minutes());
            }
        }
        let idx = cases.len();
        cases.push(SimCase {
            source: case,
            ready: ready.minutes(),
            release,
            total: phases.iter().sum(),
            phases,
        });
        if elective {
            let (room_id, order) = if performed {
                (
                    case.realized_room
                        .as_deref()
                        .ok_or_else(|| missing(case, "realized_room"))?,
                    (release, 0),
                )
            } else {
                (
                    case.planned_room
                        .as_deref()
                        .ok_or_else(|| missing(case, "planned_room"))?,
                    (0.0, case.sequence_index.ok_or_else(|| missing(case, "sequence_index"))?),
                )
            };
            let room = scenario
                .room_index(room_id)
                .ok_or_else(|| missing(case, "planned_room"))?;
            queued[room].push((order.0, order.1, idx));
        } else {
            arrivals.push(idx);
        }
    }
    for (case, phases) in injected.iter().zip(injected_times) {
        let ready = ready_time(case, scenario, options)?;
        arrivals.push(cases.len());
        cases.push(SimCase {
            source: case,
            ready: ready.minutes(),
            release: ready.minutes(),
            total: phases.iter().sum(),
            phases,
        });
    }

    let rooms = scenario
        .rooms
        .iter()
        .zip(queued)
        .map(|(shift, mut q)| {
            q.sort_by(|a, b| {
                a.0.total_cmp(&b.0)
                    .then(a.1.cmp(&b.1))
                    .then_with(|| cases[a.2].source.case_id.cmp(&cases[b.2].source.case_id))
            });
            RoomState {
                queue: q.into_iter().map(|(_, _, i)| i).collect(),
                free: shift.shift_start.minutes(),
            }
        })
        .collect();

    let mut engine = Engine {
        scenario,
        options,
        cases,
        rooms,
        calendar: BinaryHeap::new(),
        anesth: Vec::new(),
        surgeons: HashMap::new(),
        outcomes: Vec::new(),
    };
    for room in 0..scenario.rooms.len() {
        if let Some(&head) = engine.rooms[room].queue.front() {
            let time = engine.rooms[room].free;
            engine.push(time, EventClass::RoomCheck, room, head);
        }
    }
    for &case in &arrivals {
        let time = engine.cases[case].ready;
        engine.push(time, EventClass::Arrival, 0, case);
    }

    let mut outcomes = engine.run()?;
    outcomes.sort_by(|(ra, a), (rb, b)| {
        ra.cmp(rb)
            .then(a.start_time.total_cmp(&b.start_time))
            .then_with(|| a.case_id.cmp(&b.case_id))
    });
    let outcomes: Vec<CaseOutcome> = outcomes.into_iter().map(|(_, o)| o).collect();
    let segments = build_gantt_from_outcomes(&outcomes, &scenario.rooms);
    let horizon_end = scenario
        .rooms
        .iter()
        .map(|r| r.shift_end)
        .chain(segments.iter().map(|s| s.end))
        .fold(TimePoint::MIDNIGHT, TimePoint::max);
    Ok(SimulationTrace {
        segments,
        outcomes,
        replication_index,
        seed_used: options.base_seed,
        horizon_end,
    })
}

/// Runs replications `0..options.replications`, in parallel, returned in
/// index order.
pub fn run_replications(scenario: &Scenario, options: &SimOptions) -> Result<Vec<SimulationTrace>> {
    options.check()?;
    (0..options.replications)
        .into_par_iter()
        .map(|i| simulate(scenario, options, i))
        .collect()
}
