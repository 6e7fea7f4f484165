//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 unreadable or malformed input,
//! 3 domain violation, 4 runtime failure (including failure to write
//! results).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use or_twin::analysis::{what_if, WhatIfRequest};
use or_twin::io::{
    export_report, load_project, load_scenario, write_atomic, ExportFormat, Project, Report, ScenarioBundle, TablePaths,
};
use or_twin::runs::{execute, RunMode, RunResult};
use or_twin::scenario::{
    constraint_audit, feasibility_check, validate_scenario, PhaseDurations, ScheduleKind, Violation,
};
use or_twin::service;
use or_twin::strategy::Strategy;
use or_twin::{Error, IngestError, TimePoint};

/// Prints to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(
    name = "or-twin",
    version,
    about = "Operating-room day simulation and schedule analysis"
)]
struct Cli {
    /// Configuration file or saved bundle.
    #[arg(long, global = true, env = "OR_TWIN_CONFIG")]
    config: Option<PathBuf>,
    /// Directory receiving every output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed; overrides the configuration. Defaults to 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replications. Defaults to available parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the three input tables and print every violation.
    Validate {
        rooms: PathBuf,
        cases: PathBuf,
        durations: PathBuf,
    },
    /// Simulate the configured day; writes trace, gantt, kpis and summary.
    Simulate,
    /// Run the five-step prospective analysis.
    Prospective,
    /// Run the three-step retrospective analysis.
    Retrospective,
    /// Place one hypothetical urgent case and print the KPI change.
    Whatif {
        /// Arrival time, HH:MM.
        #[arg(long)]
        arrival: TimePoint,
        /// Preoperative minutes between arrival and readiness.
        #[arg(long)]
        preop: f64,
        /// first_fit, best_fit or worst_fit.
        #[arg(long)]
        strategy: Strategy,
        /// SWA,SWOA,PROC,REV minutes. Defaults to the first arrival template.
        #[arg(long, value_delimiter = ',')]
        phases: Option<Vec<f64>>,
    },
    /// Run the HTTP service.
    Serve,
}

enum Failure {
    Usage(String),
    Parse(String),
    Domain(String),
    Runtime(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Domain(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Parse(m) | Failure::Domain(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        let msg = format!("{}: {e}", e.code());
        match e {
            IngestError::Invalid(violations) => Failure::Domain(
                std::iter::once(msg)
                    .chain(
                        violations
                            .iter()
                            .map(|v| format!("  {}: {}", v.kind.token(), v.message)),
                    )
                    .collect::<Vec<_>>()
                    .join("\n"),
            ),
            _ => Failure::Parse(msg),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = format!("{}: {e}", e.code());
        match e {
            Error::InvalidOptions(_) => Failure::Parse(msg),
            _ => Failure::Domain(msg),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let default_level = if matches!(cli.command, Command::Serve) {
        "info"
    } else {
        "warn"
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level)),
        )
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    match &cli.command {
        Command::Validate {
            rooms,
            cases,
            durations,
        } => validate(&cli, rooms, cases, durations),
        Command::Simulate => batch(&cli, RunMode::Simulate),
        Command::Prospective => batch(&cli, RunMode::Prospective),
        Command::Retrospective => batch(&cli, RunMode::Retrospective),
        Command::Whatif {
            arrival,
            preop,
            strategy,
            phases,
        } => whatif(&cli, *arrival, *preop, *strategy, phases.as_deref()),
        Command::Serve => serve(&cli),
    }
}

fn project(cli: &Cli) -> Result<Project, Failure> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Failure::Usage("--config (or OR_TWIN_CONFIG) is required".into()))?;
    let mut project = load_project(path)?;
    if let Some(seed) = cli.seed {
        project.bundle.options.base_seed = seed;
    }
    Ok(project)
}

fn out_dir(cli: &Cli) -> Result<&Path, Failure> {
    let dir = cli
        .out
        .as_deref()
        .ok_or_else(|| Failure::Usage("--out is required".into()))?;
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, body: &str) -> Outcome {
    let mut bytes = body.as_bytes().to_vec();
    bytes.push(b'\n');
    write_atomic(&dir.join(name), &bytes).map_err(|e| Failure::Runtime(e.to_string()))
}

fn validate(cli: &Cli, rooms: &Path, cases: &Path, durations: &Path) -> Outcome {
    let paths = TablePaths {
        rooms: rooms.to_path_buf(),
        cases: cases.to_path_buf(),
        durations: durations.to_path_buf(),
    };
    let violations: Vec<Violation> = match load_scenario(&paths, cli.config.as_deref()) {
        Ok(bundle) => {
            let scenario = &bundle.scenario;
            let mut found = validate_scenario(scenario);
            found.extend(match scenario.schedule_kind {
                ScheduleKind::Provisional => feasibility_check(&scenario.nominal())?,
                ScheduleKind::Performed => constraint_audit(scenario)?,
            });
            found
        }
        Err(IngestError::Invalid(v)) => v,
        Err(e) => return Err(e.into()),
    };
    let doc = export_report(Report::Violations(&violations), ExportFormat::Json);
    say!("{doc}");
    if let Some(dir) = cli.out.as_deref() {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
        write(dir, "violations.json", &doc)?;
    }
    let errors = violations.iter().filter(|v| v.is_error()).count();
    if errors > 0 {
        return Err(Failure::Domain(format!("{errors} error-level violation(s)")));
    }
    Ok(())
}

fn batch(cli: &Cli, mode: RunMode) -> Outcome {
    let project = project(cli)?;
    let dir = out_dir(cli)?;
    let result = execute(&project.bundle, mode)?;
    let json = |r: Report<'_>| export_report(r, ExportFormat::Json);
    write(dir, "kpis.json", &json(Report::Kpi(result.kpis())))?;
    write(dir, "gantt.json", &json(Report::Gantt(result.gantt())))?;
    write(
        dir,
        "gantt.csv",
        export_report(Report::Gantt(result.gantt()), ExportFormat::Csv).trim_end(),
    )?;
    match &result {
        RunResult::Simulate { trace, summary, .. } => {
            write(dir, "trace.json", &json(Report::Trace(trace)))?;
            write(dir, "summary.json", &json(Report::Summary(summary)))?;
        }
        RunResult::Prospective { report, .. } => {
            write(dir, "prospective.json", &json(Report::Prospective(report)))?;
            write(
                dir,
                "prospective.csv",
                export_report(Report::Prospective(report), ExportFormat::Csv).trim_end(),
            )?;
        }
        RunResult::Retrospective { report, .. } => {
            write(dir, "retrospective.json", &json(Report::Retrospective(report)))?;
            write(
                dir,
                "retrospective.csv",
                export_report(Report::Retrospective(report), ExportFormat::Csv).trim_end(),
            )?;
        }
    }
    let kpis = result.kpis();
    say!(
        "{mode}: utilization {:.4}, overtime {:.4}; results in {}",
        kpis.utilization,
        kpis.overtime,
        dir.display()
    );
    Ok(())
}

fn template_phases(bundle: &ScenarioBundle) -> Option<PhaseDurations> {
    bundle
        .arrivals
        .as_ref()
        .and_then(|a| a.templates.first())
        .map(|t| t.phases.clone())
}

fn whatif(cli: &Cli, arrival: TimePoint, preop: f64, strategy: Strategy, phases: Option<&[f64]>) -> Outcome {
    let project = project(cli)?;
    let bundle = &project.bundle;
    let phases = match phases {
        Some(&[a, b, c, d]) => PhaseDurations::deterministic([a, b, c, d]),
        Some(_) => return Err(Failure::Usage("--phases takes four values".into())),
        None => template_phases(bundle).ok_or_else(|| {
            Failure::Usage("--phases is required when the configuration has no arrival template".into())
        })?,
    };
    let request = WhatIfRequest {
        arrival_time: arrival,
        preoperative_minutes: preop,
        phases,
        strategy,
        case_id: None,
        surgeon_id: None,
    };
    let out = what_if(&bundle.scenario, &bundle.options, &bundle.targets, &request)?;
    let (before, after) = (&out.kpi_before, &out.kpi_after);
    say!("case {}", out.case.case_id);
    say!("chosen_room {}", out.chosen_room);
    say!("start_time {}", out.start_time);
    say!(
        "utilization {:.4} -> {:.4} ({:+.4})",
        before.utilization,
        after.utilization,
        after.utilization - before.utilization
    );
    say!(
        "overtime {:.4} -> {:.4} ({:+.4})",
        before.overtime,
        after.overtime,
        after.overtime - before.overtime
    );
    if let Some(dir) = cli.out.as_deref() {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
        write(
            dir,
            "whatif.json",
            &export_report(Report::WhatIf(&out), ExportFormat::Json),
        )?;
    }
    Ok(())
}

fn serve(cli: &Cli) -> Outcome {
    let project = project(cli)?;
    project.bundle.check()?;
    let config = service::effective_config(&project.service);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
    runtime
        .block_on(service::serve(&config, Some(&project.bundle)))
        .map_err(|e| Failure::Runtime(e.to_string()))
}
