//! Scenario bundles and the project configuration file.
//!
//! A configuration file names the three tables (paths relative to the file)
//! and carries the simulation options, KPI targets, arrival generator and
//! seed:
//!
//! ```json
//! {
//!   "format_version": "1",
//!   "scenario_id": "day-1",
//!   "schedule_kind": "performed",
//!   "tables": { "rooms": "rooms.csv", "cases": "cases.csv", "durations": "durations.csv" },
//!   "provisional_tables": { "rooms": "rooms.csv", "cases": "plan.csv", "durations": "plan_durations.csv" },
//!   "resources": { "anesthesiologist_count": 3, "enforce_anesth_capacity": true },
//!   "options": { "strategy": "first_fit", "replications": 100 },
//!   "targets": { "utilization_target": 0.85, "overtime_max": 0.05 },
//!   "arrivals": { "rate_per_hour": 0.5, "window": ["08:00", "16:00"], "templates": [] },
//!   "seed": 0
//! }
//! ```
//!
//! A file holding a serialized [`ScenarioBundle`] is accepted wherever a
//! configuration file is.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::tables::{read_tables, TablePaths, Tables};
use super::write_atomic;
use crate::analysis::{ArrivalGeneratorConfig, VerdictThresholds, DEFAULT_DRIFT_TOLERANCE};
use crate::error::IngestError;
use crate::kpi::KpiTargets;
use crate::scenario::{validate_scenario, ResourceConfig, Scenario, ScheduleKind, Violation};
use crate::sim::{DurationMode, SimOptions};
use crate::strategy::Strategy;

pub const FORMAT_VERSION: &str = "1";

/// Settings of the two pipelines beyond the simulation options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisSettings {
    pub thresholds: VerdictThresholds,
    pub drift_tolerance_minutes: f64,
    /// Strategies compared by the retrospective counterfactual.
    pub strategies: Vec<Strategy>,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            thresholds: VerdictThresholds::default(),
            drift_tolerance_minutes: DEFAULT_DRIFT_TOLERANCE,
            strategies: Strategy::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourcePaths {
    pub tables: TablePaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provisional_tables: Option<TablePaths>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBundle {
    pub format_version: String,
    pub scenario: Scenario,
    /// Plan the performed `scenario` is compared against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provisional: Option<Scenario>,
    pub options: SimOptions,
    #[serde(default)]
    pub targets: KpiTargets,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrivals: Option<ArrivalGeneratorConfig>,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<SourcePaths>,
}

impl ScenarioBundle {
    /// A bundle with default options for the scenario's schedule kind.
    pub fn new(scenario: Scenario) -> Self {
        let options = match scenario.schedule_kind {
            ScheduleKind::Provisional => SimOptions::provisional(),
            ScheduleKind::Performed => SimOptions::performed(),
        };
        ScenarioBundle {
            format_version: FORMAT_VERSION.into(),
            scenario,
            provisional: None,
            options,
            targets: KpiTargets::default(),
            arrivals: None,
            analysis: AnalysisSettings::default(),
            sources: None,
        }
    }

    /// Structural violations of the scenario and of the provisional plan.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = validate_scenario(&self.scenario);
        if let Some(plan) = &self.provisional {
            out.extend(validate_scenario(plan));
        }
        out
    }

    /// Rejects a wrong format version, invalid options, or a scenario with
    /// error-level structural violations.
    pub fn check(&self) -> Result<(), IngestError> {
        if self.format_version != FORMAT_VERSION {
            return Err(IngestError::FormatVersion(self.format_version.clone()));
        }
        let option_problem = self
            .options
            .check()
            .err()
            .map(|e| e.to_string())
            .or_else(|| self.targets.check())
            .or_else(|| self.arrivals.as_ref().and_then(ArrivalGeneratorConfig::check));
        if let Some(problem) = option_problem {
            return Err(IngestError::Options(problem));
        }
        let errors: Vec<Violation> = self.violations().into_iter().filter(Violation::is_error).collect();
        if !errors.is_empty() {
            return Err(IngestError::Invalid(errors));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self, IngestError> {
        let bundle: ScenarioBundle = serde_json::from_str(text).map_err(|e| IngestError::Json {
            path: origin.to_path_buf(),
            source: e,
        })?;
        if bundle.format_version != FORMAT_VERSION {
            return Err(IngestError::FormatVersion(bundle.format_version));
        }
        Ok(bundle)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcesConfig {
    #[serde(default)]
    pub anesthesiologist_count: Option<u32>,
    /// Defaults to every surgeon referenced by a case or arrival template.
    #[serde(default)]
    pub surgeons: Option<BTreeSet<String>>,
    #[serde(default)]
    pub enforce_anesth_capacity: Option<bool>,
    #[serde(default)]
    pub enforce_surgeon_exclusivity: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsConfig {
    #[serde(default)]
    pub duration_mode: Option<DurationMode>,
    #[serde(default)]
    pub honor_planned_starts: Option<bool>,
    #[serde(default)]
    pub keep_initial_non_elective: Option<bool>,
    /// Whether simulation runs add arrivals drawn from the `arrivals` block.
    #[serde(default)]
    pub inject_arrivals: Option<bool>,
    #[serde(default)]
    pub strategy: Option<Strategy>,
    #[serde(default)]
    pub replications: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen: String,
    /// Directory of the scenario and run store.
    pub data_dir: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("or-twin-data"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub format_version: String,
    #[serde(default)]
    pub scenario_id: Option<String>,
    /// Inferred from the presence of realized rooms when absent.
    #[serde(default)]
    pub schedule_kind: Option<ScheduleKind>,
    #[serde(default)]
    pub tables: Option<TablePaths>,
    #[serde(default)]
    pub provisional_tables: Option<TablePaths>,
    #[serde(default)]
    pub resources: ResourcesConfig,
    #[serde(default)]
    pub options: OptionsConfig,
    #[serde(default)]
    pub targets: KpiTargets,
    #[serde(default)]
    pub arrivals: Option<ArrivalGeneratorConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    #[serde(default)]
    pub service: ServiceConfig,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        let config: ConfigFile = serde_json::from_str(&text).map_err(|e| IngestError::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        if config.format_version != FORMAT_VERSION {
            return Err(IngestError::FormatVersion(config.format_version));
        }
        Ok(config)
    }

    fn resources(&self, cases: &[&Tables]) -> ResourceConfig {
        let defaults = ResourceConfig::default();
        let surgeons = self.resources.surgeons.clone().unwrap_or_else(|| {
            cases
                .iter()
                .flat_map(|t| t.cases.iter().map(|c| c.surgeon_id.clone()))
                .chain(self.arrivals.iter().flat_map(|a| a.surgeons().map(str::to_string)))
                .collect()
        });
        ResourceConfig {
            anesthesiologist_count: self
                .resources
                .anesthesiologist_count
                .unwrap_or(defaults.anesthesiologist_count),
            surgeons,
            enforce_anesth_capacity: self
                .resources
                .enforce_anesth_capacity
                .unwrap_or(defaults.enforce_anesth_capacity),
            enforce_surgeon_exclusivity: self
                .resources
                .enforce_surgeon_exclusivity
                .unwrap_or(defaults.enforce_surgeon_exclusivity),
        }
    }

    fn options(&self, kind: ScheduleKind) -> SimOptions {
        let base = match kind {
            ScheduleKind::Provisional => SimOptions::provisional(),
            ScheduleKind::Performed => SimOptions::performed(),
        };
        let o = &self.options;
        SimOptions {
            schedule_kind: kind,
            duration_mode: o.duration_mode.unwrap_or(base.duration_mode),
            honor_planned_starts: o.honor_planned_starts.unwrap_or(base.honor_planned_starts),
            keep_initial_non_elective: o.keep_initial_non_elective.unwrap_or(base.keep_initial_non_elective),
            inject_arrivals: if o.inject_arrivals.unwrap_or(false) {
                self.arrivals.clone()
            } else {
                None
            },
            strategy: o.strategy.unwrap_or(base.strategy),
            replications: o.replications.unwrap_or(base.replications),
            base_seed: self.seed.unwrap_or(base.base_seed),
        }
    }

    /// Assembles a bundle from tables already read. Not validated.
    pub fn assemble(
        &self,
        tables: Tables,
        provisional: Option<Tables>,
        sources: Option<SourcePaths>,
    ) -> ScenarioBundle {
        let resources = self.resources(
            &[Some(&tables), provisional.as_ref()]
                .into_iter()
                .flatten()
                .collect::<Vec<_>>(),
        );
        let id = self.scenario_id.clone().unwrap_or_else(|| "scenario".into());
        let kind = self.schedule_kind.unwrap_or_else(|| infer_kind(&tables));
        let plan = provisional.map(|t| Scenario {
            scenario_id: format!("{id}-provisional"),
            rooms: t.rooms,
            resources: resources.clone(),
            cases: t.cases,
            schedule_kind: ScheduleKind::Provisional,
        });
        ScenarioBundle {
            format_version: FORMAT_VERSION.into(),
            options: self.options(kind),
            scenario: Scenario {
                scenario_id: id,
                rooms: tables.rooms,
                resources,
                cases: tables.cases,
                schedule_kind: kind,
            },
            provisional: plan,
            targets: self.targets,
            arrivals: self.arrivals.clone(),
            analysis: self.analysis.clone(),
            sources,
        }
    }
}

fn infer_kind(tables: &Tables) -> ScheduleKind {
    if tables.cases.iter().any(|c| c.realized_room.is_some()) {
        ScheduleKind::Performed
    } else {
        ScheduleKind::Provisional
    }
}

fn default_config() -> ConfigFile {
    ConfigFile {
        format_version: FORMAT_VERSION.into(),
        scenario_id: None,
        schedule_kind: None,
        tables: None,
        provisional_tables: None,
        resources: ResourcesConfig::default(),
        options: OptionsConfig::default(),
        targets: KpiTargets::default(),
        arrivals: None,
        seed: None,
        analysis: AnalysisSettings::default(),
        service: ServiceConfig::default(),
    }
}

/// Loads the three tables with an optional configuration file and returns
/// a validated bundle. Table paths inside the configuration are ignored.
pub fn load_scenario(tables: &TablePaths, config: Option<&Path>) -> Result<ScenarioBundle, IngestError> {
    let cfg = match config {
        Some(path) => ConfigFile::read(path)?,
        None => default_config(),
    };
    let base = config.and_then(Path::parent).unwrap_or(Path::new(""));
    let plan_paths = cfg.provisional_tables.as_ref().map(|p| p.resolve(base));
    let plan = plan_paths.as_ref().map(read_tables).transpose()?;
    let bundle = cfg.assemble(
        read_tables(tables)?,
        plan,
        Some(SourcePaths {
            tables: tables.clone(),
            provisional_tables: plan_paths,
            config: config.map(Path::to_path_buf),
        }),
    );
    bundle.check()?;
    Ok(bundle)
}

/// A loaded project: the bundle plus service settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub bundle: ScenarioBundle,
    pub service: ServiceConfig,
}

/// Reads either a configuration file naming its tables or a serialized
/// bundle, and returns the bundle unvalidated.
pub fn read_project(path: &Path) -> Result<Project, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| IngestError::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    if value.get("scenario").is_some() {
        return Ok(Project {
            bundle: ScenarioBundle::from_json(&text, path)?,
            service: ServiceConfig::default(),
        });
    }
    let cfg = ConfigFile::read(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let tables = cfg
        .tables
        .as_ref()
        .map(|t| t.resolve(base))
        .ok_or_else(|| IngestError::Options(format!("{}: no \"tables\" entry", path.display())))?;
    let plan_paths = cfg.provisional_tables.as_ref().map(|p| p.resolve(base));
    let plan = plan_paths.as_ref().map(read_tables).transpose()?;
    let bundle = cfg.assemble(
        read_tables(&tables)?,
        plan,
        Some(SourcePaths {
            tables,
            provisional_tables: plan_paths,
            config: Some(path.to_path_buf()),
        }),
    );
    Ok(Project {
        bundle,
        service: cfg.service,
    })
}

/// [`read_project`] followed by [`ScenarioBundle::check`].
pub fn load_project(path: &Path) -> Result<Project, IngestError> {
    let project = read_project(path)?;
    project.bundle.check()?;
    Ok(project)
}

pub fn load_bundle(path: &Path) -> Result<ScenarioBundle, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    ScenarioBundle::from_json(&text, path)
}

pub fn save_bundle(path: &Path, bundle: &ScenarioBundle) -> Result<(), IngestError> {
    write_atomic(path, bundle.to_json().as_bytes())
}
