//! Digital twin of an operating-room day.
//!
//! The crate simulates execution of a surgical schedule under duration
//! uncertainty and urgent arrivals, scores it against KPI targets, compares
//! room-selection strategies for non-elective cases, and runs the
//! prospective and retrospective analysis pipelines on top of that.
//!
//! Module map:
//!
//! - [`scenario`]: rooms, resources, cases, validation and constraint checks
//! - [`sim`]: the event-calendar engine and replication runner
//! - [`strategy`]: first/best/worst fit and real-life room selection
//! - [`kpi`]: Gantt tiling, KPI reports, replication summaries
//! - [`analysis`]: arrival generation, prospective and retrospective pipelines, schedule diffs
//! - [`io`]: three-table CSV ingestion, JSON bundles, canonical report export
//! - [`runs`]: simulate, prospective and retrospective runs of a bundle
//! - [`service`]: HTTP facade

pub mod analysis;
pub mod error;
pub mod io;
pub mod kpi;
pub mod runs;
pub mod scenario;
pub mod service;
pub mod sim;
pub mod strategy;
pub mod time;

pub use error::{Error, IngestError, Result};
pub use time::TimePoint;
