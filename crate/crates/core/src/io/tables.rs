//! The three-table CSV format.
//!
//! ```text
//! rooms.csv      room_id,shift_start,shift_end
//! cases.csv      case_id,case_type,surgeon_id,planned_room,sequence_index,planned_start,
//!                arrival_time,preoperative_minutes,realized_room,realized_start
//! durations.csv  case_id,phase,kind,p1,p2,p3,realized_minutes
//! ```
//!
//! Blank cells mean "absent". Times are `HH:MM` with optional fractional
//! minutes; hours may exceed 23 for post-midnight work.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};

use crate::error::IngestError;
use crate::scenario::{CaseType, DurationSpec, Phase, PhaseDurations, RoomShift, Scenario, SurgicalCase};
use crate::time::TimePoint;

pub const ROOMS_HEADER: [&str; 3] = ["room_id", "shift_start", "shift_end"];
pub const CASES_HEADER: [&str; 10] = [
    "case_id",
    "case_type",
    "surgeon_id",
    "planned_room",
    "sequence_index",
    "planned_start",
    "arrival_time",
    "preoperative_minutes",
    "realized_room",
    "realized_start",
];
pub const DURATIONS_HEADER: [&str; 7] = ["case_id", "phase", "kind", "p1", "p2", "p3", "realized_minutes"];

/// Rooms and cases as read from the tables, before scenario assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub rooms: Vec<RoomShift>,
    pub cases: Vec<SurgicalCase>,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TablePaths {
    pub rooms: PathBuf,
    pub cases: PathBuf,
    pub durations: PathBuf,
}

impl TablePaths {
    /// `rooms.csv`, `cases.csv` and `durations.csv` inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        TablePaths {
            rooms: dir.join("rooms.csv"),
            cases: dir.join("cases.csv"),
            durations: dir.join("durations.csv"),
        }
    }

    pub fn resolve(&self, base: &Path) -> Self {
        TablePaths {
            rooms: base.join(&self.rooms),
            cases: base.join(&self.cases),
            durations: base.join(&self.durations),
        }
    }
}

struct Sheet {
    file: PathBuf,
    reader: csv::Reader<File>,
    columns: Vec<usize>,
    header: &'static [&'static str],
}

impl Sheet {
    fn open(path: &Path, header: &'static [&'static str]) -> Result<Sheet, IngestError> {
        let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
        let mut reader = ReaderBuilder::new().trim(Trim::All).from_reader(file);
        let found = reader.headers().map_err(|e| csv_error(path, &e))?.clone();
        let columns = header
            .iter()
            .map(|&name| {
                found.iter().position(|h| h == name).ok_or_else(|| IngestError::Parse {
                    file: path.to_path_buf(),
                    row: 1,
                    column: name.to_string(),
                    message: "missing header column".into(),
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Sheet {
            file: path.to_path_buf(),
            reader,
            columns,
            header,
        })
    }

    fn rows(&mut self) -> Result<Vec<Row>, IngestError> {
        let mut out = Vec::new();
        for record in self.reader.records() {
            let record = record.map_err(|e| csv_error(&self.file, &e))?;
            let line = record.position().map_or(0, |p| p.line());
            out.push(Row {
                file: self.file.clone(),
                line,
                cells: self
                    .columns
                    .iter()
                    .zip(self.header)
                    .map(|(&i, &name)| (name, cell(&record, i)))
                    .collect(),
            });
        }
        Ok(out)
    }
}

fn cell(record: &StringRecord, i: usize) -> Option<String> {
    record.get(i).filter(|s| !s.is_empty()).map(str::to_string)
}

fn csv_error(path: &Path, err: &csv::Error) -> IngestError {
    IngestError::Parse {
        file: path.to_path_buf(),
        row: err.position().map_or(0, |p| p.line()),
        column: String::new(),
        message: err.to_string(),
    }
}

struct Row {
    file: PathBuf,
    line: u64,
    cells: Vec<(&'static str, Option<String>)>,
}

impl Row {
    fn get(&self, column: &str) -> Option<&str> {
        self.cells
            .iter()
            .find(|(name, _)| *name == column)
            .and_then(|(_, v)| v.as_deref())
    }

    fn error(&self, column: &str, message: impl Into<String>) -> IngestError {
        IngestError::Parse {
            file: self.file.clone(),
            row: self.line,
            column: column.to_string(),
            message: message.into(),
        }
    }

    fn required(&self, column: &str) -> Result<&str, IngestError> {
        self.get(column).ok_or_else(|| self.error(column, "value required"))
    }

    fn parse<T: FromStr>(&self, column: &str) -> Result<Option<T>, IngestError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(column)
            .map(|v| v.parse::<T>().map_err(|e| self.error(column, format!("{v:?}: {e}"))))
            .transpose()
    }

    fn number(&self, column: &str) -> Result<Option<f64>, IngestError> {
        let value = self.parse::<f64>(column)?;
        match value {
            Some(v) if !v.is_finite() => Err(self.error(column, "number must be finite")),
            other => Ok(other),
        }
    }

    fn time(&self, column: &str) -> Result<Option<TimePoint>, IngestError> {
        self.parse::<TimePoint>(column)
    }

    fn referential(&self, message: impl Into<String>) -> IngestError {
        IngestError::Referential {
            file: self.file.clone(),
            row: self.line,
            message: message.into(),
        }
    }
}

fn case_type(row: &Row) -> Result<CaseType, IngestError> {
    match row.required("case_type")? {
        "elective" => Ok(CaseType::Elective),
        "non_elective" => Ok(CaseType::NonElective),
        other => Err(row.error("case_type", format!("{other:?}: expected elective or non_elective"))),
    }
}

fn duration_spec(row: &Row) -> Result<DurationSpec, IngestError> {
    let p = |column| row.number(column);
    let need = |column| p(column)?.ok_or_else(|| row.error(column, "value required"));
    let forbid = |column| match p(column)? {
        Some(_) => Err(row.error(column, "not used by this kind; leave blank")),
        None => Ok(()),
    };
    match row.required("kind")? {
        "deterministic" => {
            forbid("p2")?;
            forbid("p3")?;
            Ok(DurationSpec::Deterministic { value: need("p1")? })
        }
        "lognormal" => {
            forbid("p3")?;
            Ok(DurationSpec::LogNormal {
                mu: need("p1")?,
                sigma: need("p2")?,
            })
        }
        "triangular" => Ok(DurationSpec::Triangular {
            min: need("p1")?,
            mode: need("p2")?,
            max: need("p3")?,
        }),
        other => Err(row.error(
            "kind",
            format!("{other:?}: expected deterministic, lognormal or triangular"),
        )),
    }
}

/// Reads and joins the three tables. Structural checks beyond parsing and
/// referential integrity are left to [`crate::scenario::validate_scenario`].
pub fn read_tables(paths: &TablePaths) -> Result<Tables, IngestError> {
    let mut rooms = Vec::new();
    let mut room_rows: HashMap<String, u64> = HashMap::new();
    for row in Sheet::open(&paths.rooms, &ROOMS_HEADER)?.rows()? {
        let room_id = row.required("room_id")?.to_string();
        let shift_start = row
            .time("shift_start")?
            .ok_or_else(|| row.error("shift_start", "value required"))?;
        let shift_end = row
            .time("shift_end")?
            .ok_or_else(|| row.error("shift_end", "value required"))?;
        if room_rows.insert(room_id.clone(), row.line).is_some() {
            return Err(IngestError::DuplicateKey {
                file: row.file.clone(),
                row: row.line,
                key: room_id,
            });
        }
        rooms.push(RoomShift::new(room_id, shift_start, shift_end));
    }

    let mut cases = Vec::new();
    let mut case_rows: HashMap<String, (usize, Row)> = HashMap::new();
    for row in Sheet::open(&paths.cases, &CASES_HEADER)?.rows()? {
        let case_id = row.required("case_id")?.to_string();
        let room_ref = |column: &str| -> Result<Option<String>, IngestError> {
            match row.get(column) {
                Some(room) if !room_rows.contains_key(room) => {
                    Err(row.referential(format!("{column} {room:?} is not in {}", paths.rooms.display())))
                }
                other => Ok(other.map(str::to_string)),
            }
        };
        let case = SurgicalCase {
            case_id: case_id.clone(),
            case_type: case_type(&row)?,
            surgeon_id: row.required("surgeon_id")?.to_string(),
            planned_room: room_ref("planned_room")?,
            sequence_index: row.parse::<u32>("sequence_index")?,
            planned_start: row.time("planned_start")?,
            arrival_time: row.time("arrival_time")?,
            preoperative_duration: row.number("preoperative_minutes")?,
            phases: PhaseDurations::deterministic([0.0; 4]),
            realized_room: room_ref("realized_room")?,
            realized_start: row.time("realized_start")?,
        };
        if case_rows.contains_key(&case_id) {
            return Err(IngestError::DuplicateKey {
                file: row.file.clone(),
                row: row.line,
                key: case_id,
            });
        }
        case_rows.insert(case_id, (cases.len(), row));
        cases.push(case);
    }

    let mut seen: BTreeMap<(usize, Phase), u64> = BTreeMap::new();
    for row in Sheet::open(&paths.durations, &DURATIONS_HEADER)?.rows()? {
        let case_id = row.required("case_id")?;
        let Some(&(index, _)) = case_rows.get(case_id) else {
            return Err(row.referential(format!("case_id {case_id:?} is not in {}", paths.cases.display())));
        };
        let token = row.required("phase")?;
        let phase = Phase::from_csv_token(token)
            .ok_or_else(|| row.error("phase", format!("{token:?}: expected SWA, SWOA, PROC or REV")))?;
        if seen.insert((index, phase), row.line).is_some() {
            return Err(IngestError::DuplicateKey {
                file: row.file.clone(),
                row: row.line,
                key: format!("{case_id}/{token}"),
            });
        }
        let phases = &mut cases[index].phases;
        *phases.spec_mut(phase) = duration_spec(&row)?;
        phases.realized.set(phase, row.number("realized_minutes")?);
    }

    for (index, case) in cases.iter().enumerate() {
        if let Some(phase) = Phase::ALL.into_iter().find(|&p| !seen.contains_key(&(index, p))) {
            let row = &case_rows[&case.case_id].1;
            return Err(row.referential(format!(
                "case {} has no {} row in {}",
                case.case_id,
                phase.csv_token(),
                paths.durations.display()
            )));
        }
    }
    Ok(Tables { rooms, cases })
}

fn text<T: ToString>(value: Option<T>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

fn exact(time: Option<TimePoint>) -> String {
    time.map(TimePoint::to_exact_string).unwrap_or_default()
}

fn writer_error(path: &Path, err: csv::Error) -> IngestError {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => IngestError::io(path, e),
        other => IngestError::Parse {
            file: path.to_path_buf(),
            row: 0,
            column: String::new(),
            message: format!("{other:?}"),
        },
    }
}

fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), IngestError> {
    let mut out = WriterBuilder::new().from_writer(Vec::new());
    out.write_record(header).map_err(|e| writer_error(path, e))?;
    for row in rows {
        out.write_record(&row).map_err(|e| writer_error(path, e))?;
    }
    let bytes = out.into_inner().map_err(|e| IngestError::io(path, e.into_error()))?;
    super::write_atomic(path, &bytes)
}

/// Writes `scenario` as the three tables. Values are written losslessly,
/// so reading them back yields the same rooms and cases.
pub fn write_tables(paths: &TablePaths, scenario: &Scenario) -> Result<(), IngestError> {
    let rooms = scenario
        .rooms
        .iter()
        .map(|r| {
            vec![
                r.room_id.clone(),
                r.shift_start.to_exact_string(),
                r.shift_end.to_exact_string(),
            ]
        })
        .collect();
    write_table(&paths.rooms, &ROOMS_HEADER, rooms)?;

    let cases = scenario
        .cases
        .iter()
        .map(|c| {
            vec![
                c.case_id.clone(),
                c.case_type.token().to_string(),
                c.surgeon_id.clone(),
                text(c.planned_room.as_deref()),
                text(c.sequence_index),
                exact(c.planned_start),
                exact(c.arrival_time),
                text(c.preoperative_duration),
                text(c.realized_room.as_deref()),
                exact(c.realized_start),
            ]
        })
        .collect();
    write_table(&paths.cases, &CASES_HEADER, cases)?;

    let mut durations = Vec::new();
    for c in &scenario.cases {
        for phase in Phase::ALL {
            let spec = c.phases.spec(phase);
            let (p1, p2, p3) = spec.params();
            durations.push(vec![
                c.case_id.clone(),
                phase.csv_token().to_string(),
                spec.kind_token().to_string(),
                p1.to_string(),
                text(p2),
                text(p3),
                text(c.phases.realized.get(phase)),
            ]);
        }
    }
    write_table(&paths.durations, &DURATIONS_HEADER, durations)
}
