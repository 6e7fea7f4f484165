mod common;

use std::fs;
use std::path::Path;

use common::{fixture, gen};
use or_twin::io::{load_bundle, load_scenario, read_tables, save_bundle, write_tables, TablePaths};
use or_twin::scenario::validate_scenario;
use or_twin::IngestError;

fn copy_fixture(name: &str, dir: &Path) -> TablePaths {
    for file in ["rooms.csv", "cases.csv", "durations.csv"] {
        fs::copy(fixture(name).join(file), dir.join(file)).unwrap();
    }
    TablePaths::in_dir(dir)
}

fn append(path: &Path, line: &str) {
    let mut text = fs::read_to_string(path).unwrap();
    text.push_str(line);
    text.push('\n');
    fs::write(path, text).unwrap();
}

#[test]
fn bundled_fixture_loads() {
    let dir = fixture("overtime_day");
    let bundle = load_scenario(&TablePaths::in_dir(&dir), Some(&dir.join("config.json"))).unwrap();
    assert_eq!(bundle.scenario.cases.len(), 22);
    assert_eq!(bundle.scenario.rooms.len(), 6);
    assert!(validate_scenario(&bundle.scenario).is_empty());
    assert_eq!(bundle.scenario.rooms[0].shift_start.minutes(), 480.0);
    assert_eq!(bundle.options.base_seed, 0);
    assert_eq!(bundle.provisional.as_ref().unwrap().cases.len(), 20);
}

#[test]
fn unknown_case_in_durations_is_referential() {
    let tmp = tempfile::tempdir().unwrap();
    let paths = copy_fixture("open_slot", tmp.path());
    append(&paths.durations, "GHOST,SWA,deterministic,10,,,");
    let err = read_tables(&paths).unwrap_err();
    assert_eq!(err.code(), "REFERENTIAL_ERROR");
    match err {
        IngestError::Referential { row, message, .. } => {
            assert_eq!(row, 22);
            assert!(message.contains("GHOST"));
        }
        other => panic!("{other}"),
    }
}

#[test]
fn unknown_room_is_referential() {
    let tmp = tempfile::tempdir().unwrap();
    let paths = copy_fixture("open_slot", tmp.path());
    append(&paths.cases, "X1,elective,S1,R9,0,09:00,,,,");
    assert_eq!(read_tables(&paths).unwrap_err().code(), "REFERENTIAL_ERROR");
}

#[test]
fn parse_errors_carry_file_row_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    let paths = copy_fixture("open_slot", tmp.path());
    append(&paths.rooms, "R4,8h00,16:00");
    match read_tables(&paths).unwrap_err() {
        IngestError::Parse { file, row, column, .. } => {
            assert_eq!(file, paths.rooms);
            assert_eq!(row, 5);
            assert_eq!(column, "shift_start");
        }
        other => panic!("{other}"),
    }

    let paths = copy_fixture("open_slot", tmp.path());
    append(&paths.durations, "E1,PREP,deterministic,10,,,");
    match read_tables(&paths).unwrap_err() {
        IngestError::Parse { column, .. } => assert_eq!(column, "phase"),
        other => panic!("{other}"),
    }

    let paths = copy_fixture("open_slot", tmp.path());
    append(&paths.cases, "X1,urgent,S1,,,,,,,");
    match read_tables(&paths).unwrap_err() {
        IngestError::Parse { column, .. } => assert_eq!(column, "case_type"),
        other => panic!("{other}"),
    }
}

#[test]
fn duplicates_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let paths = copy_fixture("open_slot", tmp.path());
    append(&paths.rooms, "R1,08:00,16:00");
    let err = read_tables(&paths).unwrap_err();
    assert_eq!(err.code(), "DUPLICATE_KEY");

    let paths = copy_fixture("open_slot", tmp.path());
    append(&paths.durations, "E1,SWA,deterministic,10,,,");
    assert_eq!(read_tables(&paths).unwrap_err().code(), "DUPLICATE_KEY");
}

#[test]
fn missing_phase_row_is_referential() {
    let tmp = tempfile::tempdir().unwrap();
    let paths = copy_fixture("open_slot", tmp.path());
    let text = fs::read_to_string(&paths.durations).unwrap();
    let kept: Vec<&str> = text.lines().filter(|l| !l.starts_with("E2,REV")).collect();
    fs::write(&paths.durations, kept.join("\n")).unwrap();
    assert_eq!(read_tables(&paths).unwrap_err().code(), "REFERENTIAL_ERROR");
}

#[test]
fn invalid_scenarios_are_not_loaded() {
    let tmp = tempfile::tempdir().unwrap();
    let paths = copy_fixture("open_slot", tmp.path());
    // Sequence index 2 with no 1 in R3.
    let text = fs::read_to_string(&paths.cases)
        .unwrap()
        .replace("E4,elective,S3,R3,1", "E4,elective,S3,R3,2");
    fs::write(&paths.cases, text).unwrap();
    match load_scenario(&paths, None).unwrap_err() {
        IngestError::Invalid(v) => assert_eq!(v[0].kind.token(), "SEQUENCE_GAP"),
        other => panic!("{other}"),
    }
}

#[test]
fn bad_format_version_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let paths = copy_fixture("open_slot", tmp.path());
    let cfg = tmp.path().join("config.json");
    fs::write(&cfg, r#"{"format_version": "2"}"#).unwrap();
    assert!(matches!(
        load_scenario(&paths, Some(&cfg)),
        Err(IngestError::FormatVersion(_))
    ));
}

#[test]
fn json_bundles_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    for seed in 0..100 {
        let bundle = gen::bundle(seed);
        let path = tmp.path().join("bundle.json");
        save_bundle(&path, &bundle).unwrap();
        assert_eq!(load_bundle(&path).unwrap(), bundle, "seed {seed}");
    }
}

#[test]
fn csv_and_json_agree() {
    let tmp = tempfile::tempdir().unwrap();
    for seed in 0..100 {
        let bundle = gen::bundle(seed);
        let paths = TablePaths::in_dir(tmp.path());
        write_tables(&paths, &bundle.scenario).unwrap();
        let tables = read_tables(&paths).unwrap();
        assert_eq!(tables.rooms, bundle.scenario.rooms, "seed {seed}");
        assert_eq!(tables.cases, bundle.scenario.cases, "seed {seed}");
    }
}

#[test]
fn config_and_bundle_forms_load_the_same_scenario() {
    let cfg = fixture("overtime_day").join("config.json");
    let from_config = or_twin::io::load_project(&cfg).unwrap().bundle;
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bundle.json");
    save_bundle(&path, &from_config).unwrap();
    let from_bundle = or_twin::io::load_project(&path).unwrap().bundle;
    assert_eq!(from_bundle.scenario, from_config.scenario);
    assert_eq!(from_bundle, from_config);
}
