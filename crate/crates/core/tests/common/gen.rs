#![allow(dead_code)]

use or_twin::analysis::{ArrivalGeneratorConfig, ArrivalTemplate};
use or_twin::io::ScenarioBundle;
use or_twin::scenario::{
    CaseType, DurationSpec, Phase, PhaseDurations, ResourceConfig, RoomShift, Scenario, ScheduleKind, SurgicalCase,
};
use or_twin::sim::{simulate, SimOptions};
use or_twin::TimePoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn t(m: f64) -> TimePoint {
    TimePoint::from_minutes(m)
}

/// Whole or half minutes, so every value survives the text formats.
pub fn minutes<R: Rng>(rng: &mut R, lo: u32, hi: u32) -> f64 {
    f64::from(rng.random_range(lo * 2..=hi * 2)) / 2.0
}

pub fn spec<R: Rng>(rng: &mut R, lo: u32, hi: u32) -> DurationSpec {
    let base = minutes(rng, lo, hi);
    match rng.random_range(0..3) {
        0 => DurationSpec::fixed(base),
        1 => DurationSpec::LogNormal {
            mu: base.max(1.0).ln(),
            sigma: f64::from(rng.random_range(0..30)) / 100.0,
        },
        _ => {
            let spread = minutes(rng, 0, lo.max(1));
            DurationSpec::Triangular {
                min: (base - spread).max(0.0),
                mode: base,
                max: base + minutes(rng, 0, 20),
            }
        }
    }
}

pub fn phases<R: Rng>(rng: &mut R, deterministic: bool) -> PhaseDurations {
    let ranges = [(0, 20), (0, 10), (10, 120), (0, 15)];
    let mut out = PhaseDurations::deterministic([0.0; 4]);
    for phase in Phase::ALL {
        let (lo, hi) = ranges[phase.index()];
        *out.spec_mut(phase) = if deterministic {
            DurationSpec::fixed(minutes(rng, lo, hi))
        } else {
            spec(rng, lo, hi)
        };
    }
    out
}

pub struct Shape {
    pub rooms: std::ops::RangeInclusive<usize>,
    pub electives_per_room: std::ops::RangeInclusive<usize>,
    pub non_electives: std::ops::RangeInclusive<usize>,
    pub deterministic: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            rooms: 1..=5,
            electives_per_room: 0..=5,
            non_electives: 0..=4,
            deterministic: false,
        }
    }
}

/// A structurally valid provisional day.
pub fn provisional<R: Rng>(rng: &mut R, shape: &Shape) -> Scenario {
    let n_rooms = rng.random_range(shape.rooms.clone());
    let rooms: Vec<RoomShift> = (0..n_rooms)
        .map(|i| {
            let start = f64::from(rng.random_range(12..=18)) * 30.0;
            let len = f64::from(rng.random_range(8..=20)) * 30.0;
            RoomShift::new(format!("R{}", i + 1), t(start), t(start + len))
        })
        .collect();
    let surgeons: Vec<String> = (1..=6).map(|i| format!("S{i}")).collect();
    let mut cases = Vec::new();
    for room in &rooms {
        let mut clock = room.shift_start.minutes();
        for seq in 0..rng.random_range(shape.electives_per_room.clone()) {
            let p = phases(rng, shape.deterministic);
            clock += minutes(rng, 0, 30);
            let id = format!("E{:03}", cases.len());
            let surgeon = surgeons[rng.random_range(0..surgeons.len())].clone();
            cases.push(SurgicalCase::elective(
                id,
                surgeon,
                room.room_id.clone(),
                seq as u32,
                t(clock),
                p.clone(),
            ));
            clock += p.planned_total();
        }
    }
    for _ in 0..rng.random_range(shape.non_electives.clone()) {
        let room = &rooms[rng.random_range(0..rooms.len())];
        let arrival = room.shift_start.minutes() + minutes(rng, 0, 600);
        let id = format!("N{:03}", cases.len());
        let surgeon = surgeons[rng.random_range(0..surgeons.len())].clone();
        let p = phases(rng, shape.deterministic);
        cases.push(SurgicalCase::non_elective(
            id,
            surgeon,
            t(arrival),
            minutes(rng, 0, 120),
            p,
        ));
    }
    let mut scenario = Scenario {
        scenario_id: format!("gen-{}", rng.random::<u32>()),
        rooms,
        resources: ResourceConfig {
            anesthesiologist_count: rng.random_range(1..=4),
            surgeons: Default::default(),
            enforce_anesth_capacity: rng.random_bool(0.7),
            enforce_surgeon_exclusivity: rng.random_bool(0.8),
        },
        cases,
        schedule_kind: ScheduleKind::Provisional,
    };
    scenario.register_case_surgeons();
    scenario
}

/// The performed record of executing `plan` in one stochastic replication:
/// placements and durations as simulated.
pub fn performed_from(plan: &Scenario, seed: u64) -> Scenario {
    let options = SimOptions {
        duration_mode: or_twin::sim::DurationMode::Stochastic,
        base_seed: seed,
        ..SimOptions::provisional()
    };
    let trace = simulate(plan, &options, 0).expect("generated plans simulate");
    let mut out = plan.clone();
    out.schedule_kind = ScheduleKind::Performed;
    for case in &mut out.cases {
        if let Some(o) = trace.outcome(&case.case_id) {
            let b = o.phase_boundaries;
            let times = [0, 1, 2, 3].map(|i| b[i + 1] - b[i]);
            *case = case.clone().with_realized(o.room_id.clone(), o.start_time, times);
        }
    }
    out
}

pub fn arrivals<R: Rng>(rng: &mut R, scenario: &Scenario) -> ArrivalGeneratorConfig {
    let open = scenario
        .rooms
        .iter()
        .map(|r| r.shift_start)
        .fold(t(1e9), TimePoint::min);
    let close = scenario.rooms.iter().map(|r| r.shift_end).fold(t(0.0), TimePoint::max);
    ArrivalGeneratorConfig {
        rate_per_hour: f64::from(rng.random_range(0..=4)) / 8.0,
        window: (open, close),
        templates: (0..rng.random_range(1..=3))
            .map(|i| ArrivalTemplate {
                weight: f64::from(rng.random_range(1..=4)),
                preoperative: spec(rng, 0, 90),
                phases: phases(rng, false),
                surgeon_id: format!("S{}", i + 1),
            })
            .collect(),
        arrival_replications: 1,
    }
}

pub fn is_elective(case: &SurgicalCase) -> bool {
    case.case_type == CaseType::Elective
}

/// A random bundle; odd seeds carry a performed day with its plan.
pub fn bundle(seed: u64) -> ScenarioBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plan = provisional(&mut rng, &Shape::default());
    let mut bundle = if seed.is_multiple_of(2) {
        ScenarioBundle::new(plan.clone())
    } else {
        let mut b = ScenarioBundle::new(performed_from(&plan, seed));
        b.provisional = Some(plan.clone());
        b
    };
    bundle.options.base_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    bundle.options.replications = 1 + (seed % 7) as u32;
    if seed.is_multiple_of(3) {
        bundle.arrivals = Some(arrivals(&mut rng, &plan));
        bundle.options.inject_arrivals = bundle.arrivals.clone();
    }
    bundle.targets.waiting_max_minutes = (seed.is_multiple_of(4)).then_some(45.5);
    bundle
}
