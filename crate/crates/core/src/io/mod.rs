//! File formats: the three input tables, configuration and scenario
//! bundles, and canonical result documents.

mod bundle;
mod export;
mod tables;

use std::io::Write;
use std::path::Path;

use crate::error::IngestError;

pub use bundle::{
    load_bundle, load_project, load_scenario, read_project, save_bundle, AnalysisSettings, ConfigFile, OptionsConfig,
    Project, ResourcesConfig, ScenarioBundle, ServiceConfig, SourcePaths, FORMAT_VERSION,
};
pub use export::{export_report, export_report_as, Canon, ExportFormat, Report, ToCanon};
pub use tables::{read_tables, write_tables, TablePaths, Tables, CASES_HEADER, DURATIONS_HEADER, ROOMS_HEADER};

/// Writes `bytes` to a temporary file beside `path` and renames it into
/// place, so readers see either the old or the new content.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IngestError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IngestError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| IngestError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| IngestError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| IngestError::io(path, e.error))?;
    Ok(())
}
