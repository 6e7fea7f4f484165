//! Canonical, byte-stable serialization of results.
//!
//! JSON output uses two-space indentation and a fixed key order per type.
//! Real numbers are written with exactly four decimals, times as `HH:MM`
//! (with one decimal of minutes when not on a whole minute). CSV output is
//! a segment table for Gantt lists and a `path,value` listing otherwise.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::analysis::{
    DiffRecord, PerformanceComparison, ProspectiveReport, RetrospectiveReport, ScheduleDiff, Verdicts, WhatIfOutcome,
};
use crate::error::IngestError;
use crate::kpi::{GanttSegment, KpiReport, KpiStats, ReplicationSummary, RoomKpi};
use crate::scenario::{Violation, Window};
use crate::sim::{CaseOutcome, SimulationTrace};
use crate::time::TimePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Csv,
}

impl FromStr for ExportFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(IngestError::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Value tree with a fixed key order.
#[derive(Debug, Clone, PartialEq)]
pub enum Canon {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Time(TimePoint),
    Str(String),
    List(Vec<Canon>),
    Obj(Vec<(&'static str, Canon)>),
}

impl Canon {
    fn scalar(&self) -> Option<String> {
        Some(match self {
            Canon::Null => "null".into(),
            Canon::Bool(b) => b.to_string(),
            Canon::Int(i) => i.to_string(),
            Canon::Num(x) => num(*x),
            Canon::Time(t) => quote(&t.to_string()),
            Canon::Str(s) => quote(s),
            Canon::List(_) | Canon::Obj(_) => return None,
        })
    }

    fn write_json(&self, out: &mut String, depth: usize) {
        let pad = |out: &mut String, d: usize| out.extend(std::iter::repeat_n("  ", d));
        match self {
            Canon::List(items) if items.is_empty() => out.push_str("[]"),
            Canon::Obj(fields) if fields.is_empty() => out.push_str("{}"),
            Canon::List(items) => {
                out.push_str("[\n");
                for (i, item) in items.iter().enumerate() {
                    pad(out, depth + 1);
                    item.write_json(out, depth + 1);
                    out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
                }
                pad(out, depth);
                out.push(']');
            }
            Canon::Obj(fields) => {
                out.push_str("{\n");
                for (i, (key, value)) in fields.iter().enumerate() {
                    pad(out, depth + 1);
                    let _ = write!(out, "{}: ", quote(key));
                    value.write_json(out, depth + 1);
                    out.push_str(if i + 1 < fields.len() { ",\n" } else { "\n" });
                }
                pad(out, depth);
                out.push('}');
            }
            scalar => out.push_str(&scalar.scalar().unwrap_or_default()),
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = String::new();
        self.write_json(&mut out, 0);
        out
    }

    fn flatten(&self, path: &str, rows: &mut Vec<(String, String)>) {
        let join = |key: &str| {
            if path.is_empty() {
                key.to_string()
            } else {
                format!("{path}.{key}")
            }
        };
        match self {
            Canon::List(items) => {
                for (i, item) in items.iter().enumerate() {
                    item.flatten(&join(&i.to_string()), rows);
                }
            }
            Canon::Obj(fields) => {
                for (key, value) in fields {
                    value.flatten(&join(key), rows);
                }
            }
            Canon::Null => rows.push((path.to_string(), String::new())),
            Canon::Time(t) => rows.push((path.to_string(), t.to_string())),
            Canon::Str(s) => rows.push((path.to_string(), s.clone())),
            scalar => rows.push((path.to_string(), scalar.scalar().unwrap_or_default())),
        }
    }
}

fn num(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

pub trait ToCanon {
    fn to_canon(&self) -> Canon;
}

impl<T: ToCanon> ToCanon for [T] {
    fn to_canon(&self) -> Canon {
        Canon::List(self.iter().map(ToCanon::to_canon).collect())
    }
}

impl<T: ToCanon> ToCanon for Vec<T> {
    fn to_canon(&self) -> Canon {
        self.as_slice().to_canon()
    }
}

impl<K: std::fmt::Display, V: ToCanon> ToCanon for std::collections::BTreeMap<K, V> {
    fn to_canon(&self) -> Canon {
        Canon::List(
            self.iter()
                .map(|(k, v)| Canon::Obj(vec![("key", Canon::Str(k.to_string())), ("value", v.to_canon())]))
                .collect(),
        )
    }
}

impl ToCanon for bool {
    fn to_canon(&self) -> Canon {
        Canon::Bool(*self)
    }
}

fn opt<T>(value: Option<T>, f: impl FnOnce(T) -> Canon) -> Canon {
    value.map_or(Canon::Null, f)
}

fn s(value: &str) -> Canon {
    Canon::Str(value.to_string())
}

impl ToCanon for RoomKpi {
    fn to_canon(&self) -> Canon {
        Canon::Obj(vec![
            ("room_id", s(&self.room_id)),
            ("busy_in_shift", Canon::Num(self.busy_in_shift)),
            ("overtime_minutes", Canon::Num(self.overtime_minutes)),
            ("shift_minutes", Canon::Num(self.shift_minutes)),
        ])
    }
}

impl ToCanon for KpiReport {
    fn to_canon(&self) -> Canon {
        Canon::Obj(vec![
            ("utilization", Canon::Num(self.utilization)),
            ("overtime", Canon::Num(self.overtime)),
            ("mean_waiting_minutes", Canon::Num(self.mean_waiting_minutes)),
            ("max_waiting_minutes", Canon::Num(self.max_waiting_minutes)),
            ("utilization_pass", Canon::Bool(self.utilization_pass)),
            ("overtime_pass", Canon::Bool(self.overtime_pass)),
            ("waiting_pass", opt(self.waiting_pass, Canon::Bool)),
            ("per_room", self.per_room.to_canon()),
        ])
    }
}

impl ToCanon for KpiStats {
    fn to_canon(&self) -> Canon {
        Canon::Obj(vec![
            ("mean", Canon::Num(self.mean)),
            ("sample_stdev", Canon::Num(self.sample_stdev)),
            ("min", Canon::Num(self.min)),
            ("max", Canon::Num(self.max)),
            ("q05", Canon::Num(self.q05)),
            ("q50", Canon::Num(self.q50)),
            ("q95", Canon::Num(self.q95)),
            ("ci95_halfwidth", Canon::Num(self.ci95_halfwidth)),
            ("target_hit_probability", opt(self.target_hit_probability, Canon::Num)),
        ])
    }
}

impl ToCanon for ReplicationSummary {
    fn to_canon(&self) -> Canon {
        Canon::Obj(vec![
            ("n", Canon::Int(self.n as i64)),
            ("utilization", self.utilization.to_canon()),
            ("overtime", self.overtime.to_canon()),
            ("mean_waiting_minutes", self.mean_waiting_minutes.to_canon()),
            ("max_waiting_minutes", self.max_waiting_minutes.to_canon()),
        ])
    }
}

impl ToCanon for GanttSegment {
    fn to_canon(&self) -> Canon {
        Canon::Obj(vec![
            ("room_id", s(&self.room_id)),
            ("state", s(self.state.token())),
            ("start", Canon::Time(self.start)),
            ("end", Canon::Time(self.end)),
            ("case_id", opt(self.case_id.as_deref(), s)),
            ("non_elective_flag", Canon::Bool(self.non_elective_flag)),
        ])
    }
}

impl ToCanon for CaseOutcome {
    fn to_canon(&self) -> Canon {
        Canon::Obj(vec![
            ("case_id", s(&self.case_id)),
            ("room_id", s(&self.room_id)),
            ("non_elective", Canon::Bool(self.non_elective)),
            ("ready_time", Canon::Time(self.ready_time)),
            ("start_time", Canon::Time(self.start_time)),
            ("end_time", Canon::Time(self.end_time)),
            (
                "phase_boundaries",
                Canon::List(self.phase_boundaries.iter().copied().map(Canon::Time).collect()),
            ),
            ("waiting_minutes", Canon::Num(self.waiting_minutes)),
        ])
    }
}

impl ToCanon for SimulationTrace {
    fn to_canon(&self) -> Canon {
        Canon::Obj(vec![
            ("replication_index", Canon::Int(i64::from(self.replication_index))),
            // Seeds above i64::MAX are written as text to stay exact.
            ("seed_used", Canon::Str(self.seed_used.to_string())),
            ("horizon_end", Canon::Time(self.horizon_end)),
            ("outcomes", self.outcomes.to_canon()),
            ("segments", self.segments.to_canon()),
        ])
    }
}

impl ToCanon for Window {
    fn to_canon(&self) -> Canon {
        Canon::Obj(vec![("start", Canon::Time(self.start)), ("end", Canon::Time(self.end))])
    }
}

impl ToCanon for Violation {
    fn to_canon(&self) -> Canon {
        let severity = match self.severity {
            crate::scenario::Severity::Error => "error",
            crate::scenario::Severity::Warning => "warning",
            crate::scenario::Severity::Info => "info",
        };
        Canon::Obj(vec![
            ("kind", s(self.kind.token())),
            ("severity", s(severity)),
            ("case_ids", Canon::List(self.case_ids.iter().map(|c| s(c)).collect())),
            ("room_id", opt(self.room_id.as_deref(), s)),
            ("window", opt(self.window.as_ref(), ToCanon::to_canon)),
            ("message", s(&self.message)),
        ])
    }
}

impl ToCanon for DiffRecord {
    fn to_canon(&self) -> Canon {
        Canon::Obj(vec![
            ("case_id", s(&self.case_id)),
            ("change", s(self.change.token())),
            ("provisional_value", opt(self.provisional_value.as_deref(), s)),
            ("performed_value", opt(self.performed_value.as_deref(), s)),
            ("attribution", s(self.attribution.token())),
            ("drift_minutes", opt(self.drift_minutes, Canon::Num)),
        ])
    }
}

impl ToCanon for ScheduleDiff {
    fn to_canon(&self) -> Canon {
        Canon::Obj(vec![("records", self.records.to_canon())])
    }
}

impl ToCanon for Verdicts {
    fn to_canon(&self) -> Canon {
        Canon::Obj(vec![
            ("feasible", Canon::Bool(self.feasible)),
            ("robust", Canon::Bool(self.robust)),
            ("resilient_by_strategy", self.resilient_by_strategy.to_canon()),
        ])
    }
}

impl ToCanon for ProspectiveReport {
    fn to_canon(&self) -> Canon {
        Canon::Obj(vec![
            ("step1", self.step1.to_canon()),
            ("step2", self.step2.to_canon()),
            ("step3", self.step3.to_canon()),
            ("step4", self.step4.to_canon()),
            ("step5", self.step5.to_canon()),
            ("verdicts", self.verdicts.to_canon()),
        ])
    }
}

impl ToCanon for PerformanceComparison {
    fn to_canon(&self) -> Canon {
        Canon::Obj(vec![
            ("performed", self.performed.to_canon()),
            ("counterfactual_by_strategy", self.counterfactual_by_strategy.to_canon()),
        ])
    }
}

impl ToCanon for RetrospectiveReport {
    fn to_canon(&self) -> Canon {
        Canon::Obj(vec![
            ("step1", self.step1.to_canon()),
            ("step2", self.step2.to_canon()),
            ("step3", self.step3.to_canon()),
        ])
    }
}

impl ToCanon for WhatIfOutcome {
    fn to_canon(&self) -> Canon {
        Canon::Obj(vec![
            ("case_id", s(&self.case.case_id)),
            ("chosen_room", s(&self.chosen_room)),
            ("start_time", Canon::Time(self.start_time)),
            ("kpi_before", self.kpi_before.to_canon()),
            ("kpi_after", self.kpi_after.to_canon()),
            ("gantt_after", self.gantt_after.to_canon()),
        ])
    }
}

/// A document accepted by [`export_report`].
#[derive(Debug, Clone, Copy)]
pub enum Report<'a> {
    Prospective(&'a ProspectiveReport),
    Retrospective(&'a RetrospectiveReport),
    Kpi(&'a KpiReport),
    Summary(&'a ReplicationSummary),
    Gantt(&'a [GanttSegment]),
    Trace(&'a SimulationTrace),
    Violations(&'a [Violation]),
    WhatIf(&'a WhatIfOutcome),
}

impl Report<'_> {
    fn canon(&self) -> Canon {
        match self {
            Report::Prospective(r) => r.to_canon(),
            Report::Retrospective(r) => r.to_canon(),
            Report::Kpi(r) => r.to_canon(),
            Report::Summary(r) => r.to_canon(),
            Report::Gantt(r) => r.to_canon(),
            Report::Trace(r) => r.to_canon(),
            Report::Violations(r) => r.to_canon(),
            Report::WhatIf(r) => r.to_canon(),
        }
    }
}

fn csv_document(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(header).expect("in-memory write");
    for row in rows {
        out.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(out.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Serializes `report` canonically. Identical inputs give identical bytes.
pub fn export_report(report: Report<'_>, format: ExportFormat) -> String {
    match (format, report) {
        (ExportFormat::Json, r) => r.canon().to_json(),
        (ExportFormat::Csv, Report::Gantt(segments)) => csv_document(
            &["room_id", "state", "start", "end", "case_id", "non_elective_flag"],
            segments.iter().map(|g| {
                vec![
                    g.room_id.clone(),
                    g.state.token().to_string(),
                    g.start.to_string(),
                    g.end.to_string(),
                    g.case_id.clone().unwrap_or_default(),
                    g.non_elective_flag.to_string(),
                ]
            }),
        ),
        (ExportFormat::Csv, r) => {
            let mut rows = Vec::new();
            r.canon().flatten("", &mut rows);
            csv_document(&["path", "value"], rows.into_iter().map(|(p, v)| vec![p, v]))
        }
    }
}

/// [`export_report`] with the format given by name.
pub fn export_report_as(report: Report<'_>, format: &str) -> Result<String, IngestError> {
    Ok(export_report(report, format.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kpi::KpiTargets;

    #[test]
    fn table_one_payload() {
        let r = KpiReport::from_values(0.773, 0.096, &KpiTargets::default());
        let doc = export_report(Report::Kpi(&r), ExportFormat::Json);
        assert!(doc.contains("\"utilization\": 0.7730"), "{doc}");
        assert!(doc.contains("\"overtime\": 0.0960"), "{doc}");
        assert!(doc.contains("\"utilization_pass\": false"));
        assert_eq!(doc, export_report(Report::Kpi(&r), ExportFormat::Json));
    }

    #[test]
    fn empty_gantt() {
        assert_eq!(export_report(Report::Gantt(&[]), ExportFormat::Json), "[]");
        assert_eq!(
            export_report(Report::Gantt(&[]), ExportFormat::Csv),
            "room_id,state,start,end,case_id,non_elective_flag\n"
        );
    }

    #[test]
    fn unknown_format() {
        let err = export_report_as(Report::Gantt(&[]), "xml").unwrap_err();
        assert_eq!(err.code(), "UNSUPPORTED_FORMAT");
    }

    #[test]
    fn times_and_numbers() {
        let seg = GanttSegment {
            room_id: "R1".into(),
            state: crate::kpi::GanttState::Idle,
            start: TimePoint::from_minutes(480.0),
            end: TimePoint::from_minutes(1480.25),
            case_id: None,
            non_elective_flag: false,
        };
        let doc = export_report(Report::Gantt(std::slice::from_ref(&seg)), ExportFormat::Json);
        assert!(doc.contains("\"start\": \"08:00\""));
        assert!(doc.contains("\"end\": \"24:40.3\""), "{doc}");
        assert!(doc.contains("\"case_id\": null"));
        assert_eq!(num(-0.0), "0.0000");
        assert_eq!(num(1.0 / 3.0), "0.3333");
    }

    #[test]
    fn csv_listing_of_a_report() {
        let r = KpiReport::from_values(0.5, 0.0, &KpiTargets::default());
        let doc = export_report(Report::Kpi(&r), ExportFormat::Csv);
        assert!(
            doc.starts_with("path,value\nutilization,0.5000\novertime,0.0000\n"),
            "{doc}"
        );
    }
}
