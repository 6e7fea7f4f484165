use serde::{Deserialize, Serialize};

use crate::scenario::RoomShift;
use crate::sim::SimulationTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KpiTargets {
    /// Pass iff utilization >= this fraction.
    pub utilization_target: f64,
    /// Pass iff overtime <= this fraction.
    pub overtime_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waiting_max_minutes: Option<f64>,
}

impl Default for KpiTargets {
    fn default() -> Self {
        KpiTargets {
            utilization_target: 0.85,
            overtime_max: 0.05,
            waiting_max_minutes: None,
        }
    }
}

impl KpiTargets {
    pub fn check(&self) -> Option<String> {
        if !(self.utilization_target > 0.0 && self.utilization_target <= 1.0) {
            return Some(format!(
                "utilization target {} must be in (0, 1]",
                self.utilization_target
            ));
        }
        if self.overtime_max.is_nan() || self.overtime_max < 0.0 {
            return Some(format!("overtime max {} must be >= 0", self.overtime_max));
        }
        None
    }

    pub fn utilization_pass(&self, utilization: f64) -> bool {
        utilization >= self.utilization_target
    }

    pub fn overtime_pass(&self, overtime: f64) -> bool {
        overtime <= self.overtime_max
    }

    pub fn waiting_pass(&self, mean_waiting: f64) -> Option<bool> {
        self.waiting_max_minutes.map(|max| mean_waiting <= max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomKpi {
    pub room_id: String,
    pub busy_in_shift: f64,
    pub overtime_minutes: f64,
    pub shift_minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub utilization: f64,
    pub overtime: f64,
    pub mean_waiting_minutes: f64,
    pub max_waiting_minutes: f64,
    /// In room priority order.
    pub per_room: Vec<RoomKpi>,
    pub utilization_pass: bool,
    pub overtime_pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waiting_pass: Option<bool>,
}

impl KpiReport {
    /// A report carrying only headline values, with pass flags derived
    /// from `targets`.
    pub fn from_values(utilization: f64, overtime: f64, targets: &KpiTargets) -> Self {
        KpiReport {
            utilization,
            overtime,
            mean_waiting_minutes: 0.0,
            max_waiting_minutes: 0.0,
            per_room: Vec::new(),
            utilization_pass: targets.utilization_pass(utilization),
            overtime_pass: targets.overtime_pass(overtime),
            waiting_pass: targets.waiting_pass(0.0),
        }
    }
}

pub fn compute_kpis(trace: &SimulationTrace, rooms: &[RoomShift], targets: &KpiTargets) -> KpiReport {
    let per_room: Vec<RoomKpi> = rooms
        .iter()
        .map(|room| {
            let (shift_start, shift_end) = (room.shift_start.minutes(), room.shift_end.minutes());
            let mut busy = 0.0;
            let mut last_end: Option<f64> = None;
            for o in trace.outcomes.iter().filter(|o| o.room_id == room.room_id) {
                let (s, e) = (o.start_time.minutes(), o.end_time.minutes());
                busy += (e.min(shift_end) - s.max(shift_start)).max(0.0);
                if e > s {
                    last_end = Some(last_end.map_or(e, |l: f64| l.max(e)));
                }
            }
            RoomKpi {
                room_id: room.room_id.clone(),
                busy_in_shift: busy,
                overtime_minutes: last_end.map_or(0.0, |e| (e - shift_end).max(0.0)),
                shift_minutes: room.length(),
            }
        })
        .collect();

    let total_shift: f64 = per_room.iter().map(|r| r.shift_minutes).sum();
    let ratio = |x: f64| if total_shift > 0.0 { x / total_shift } else { 0.0 };
    let utilization = ratio(per_room.iter().map(|r| r.busy_in_shift).sum());
    let overtime = ratio(per_room.iter().map(|r| r.overtime_minutes).sum());

    let waits: Vec<f64> = trace.outcomes.iter().map(|o| o.waiting_minutes.max(0.0)).collect();
    let mean_waiting_minutes = mean(&waits);
    let max_waiting_minutes = waits.iter().copied().fold(0.0, f64::max);

    KpiReport {
        utilization,
        overtime,
        mean_waiting_minutes,
        max_waiting_minutes,
        per_room,
        utilization_pass: targets.utilization_pass(utilization),
        overtime_pass: targets.overtime_pass(overtime),
        waiting_pass: targets.waiting_pass(mean_waiting_minutes),
    }
}

/// Mean computed around the first sample, so identical inputs give that
/// value back exactly.
fn mean(xs: &[f64]) -> f64 {
    let Some(&first) = xs.first() else {
        return 0.0;
    };
    first + xs.iter().map(|x| x - first).sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiStats {
    pub mean: f64,
    pub sample_stdev: f64,
    pub min: f64,
    pub max: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub ci95_halfwidth: f64,
    /// Fraction of replications meeting the target, when one is configured.
    pub target_hit_probability: Option<f64>,
}

impl KpiStats {
    fn of(values: &[f64], hits: Option<usize>) -> Self {
        let n = values.len();
        let mean = mean(values);
        let sample_stdev = if n > 1 {
            (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        KpiStats {
            mean,
            sample_stdev,
            min: sorted[0],
            max: sorted[n - 1],
            q05: nearest_rank(&sorted, 5),
            q50: nearest_rank(&sorted, 50),
            q95: nearest_rank(&sorted, 95),
            ci95_halfwidth: 1.96 * sample_stdev / (n as f64).sqrt(),
            target_hit_probability: hits.map(|h| h as f64 / n as f64),
        }
    }
}

/// Nearest-rank percentile: the value at rank `ceil(pct * n / 100)`.
fn nearest_rank(sorted: &[f64], pct: usize) -> f64 {
    let rank = (pct * sorted.len()).div_ceil(100).max(1);
    sorted[rank - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub n: usize,
    pub utilization: KpiStats,
    pub overtime: KpiStats,
    pub mean_waiting_minutes: KpiStats,
    pub max_waiting_minutes: KpiStats,
}

/// Summary statistics over replications. Returns `None` for an empty list.
pub fn aggregate_replications(reports: &[KpiReport], targets: &KpiTargets) -> Option<ReplicationSummary> {
    if reports.is_empty() {
        return None;
    }
    let column = |f: fn(&KpiReport) -> f64| reports.iter().map(f).collect::<Vec<f64>>();
    let util = column(|r| r.utilization);
    let over = column(|r| r.overtime);
    let mean_wait = column(|r| r.mean_waiting_minutes);
    let max_wait = column(|r| r.max_waiting_minutes);

    let util_hits = util.iter().filter(|&&u| targets.utilization_pass(u)).count();
    let over_hits = over.iter().filter(|&&o| targets.overtime_pass(o)).count();
    let wait_hits = targets.waiting_max_minutes.map(|_| {
        mean_wait
            .iter()
            .filter(|&&w| targets.waiting_pass(w) == Some(true))
            .count()
    });

    Some(ReplicationSummary {
        n: reports.len(),
        utilization: KpiStats::of(&util, Some(util_hits)),
        overtime: KpiStats::of(&over, Some(over_hits)),
        mean_waiting_minutes: KpiStats::of(&mean_wait, wait_hits),
        max_waiting_minutes: KpiStats::of(&max_wait, None),
    })
}
