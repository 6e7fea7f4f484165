//! Gantt tiling, KPI evaluation against targets, and cross-replication
//! summaries.
//!
//! | KPI | Definition |
//! |-----|------------|
//! | Utilization | case-phase time inside shifts / total shift time |
//! | Overtime | sum over rooms of `max(0, last case end - shift end)` / total shift time |
//! | Waiting | `start - ready` per case; mean and max |

mod gantt;
mod report;

pub use gantt::{build_gantt, build_gantt_from_outcomes, GanttSegment, GanttState};
pub use report::{aggregate_replications, compute_kpis, KpiReport, KpiStats, KpiTargets, ReplicationSummary, RoomKpi};
