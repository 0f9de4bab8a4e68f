use std::io::Cursor;

use qshared_cli::{read_csv, write_csv, CliError, IngestOptions, ResponderPolicy};
use qshared_core::simulator::{generate_smart, Scenario};
use qshared_core::ModelSpec;

fn worked_rows() -> String {
    let rows = [
        "id,Y1,Y2,Y3,Y_primary,A1,A2,A3,O1,O2,O3,R1,R2",
        "1,1.5448,2.857,2.230,1.544,-1,-1,-1,-1,-1,-1,1,1",
        "2,-0.4734,-0.688,-0.724,-0.580,1,1,1,1,1,1,0,1",
        "3,0.4853,-0.327,-0.741,0.485,1,1,-1,-1,-1,1,1,1",
        "4,-0.4224,0.547,-0.377,-0.084,1,-1,1,-1,1,-1,0,0",
    ];
    rows.join("\n") + "\n"
}

fn truncate() -> IngestOptions {
    IngestOptions { responders: ResponderPolicy::Truncate, ..IngestOptions::default() }
}

#[test]
fn worked_rows_truncate_to_their_values() {
    let d = read_csv(Cursor::new(worked_rows()), &truncate()).unwrap();
    assert_eq!(d.len(), 4);
    assert_eq!(d.num_stages(), 3);
    assert_eq!((d.coding().t1(), d.coding().t2()), (-1.0, 1.0));
    let t = d.trajectories();
    assert_eq!(t.iter().map(|t| t.stages_reached()).collect::<Vec<_>>(), [1, 2, 1, 3]);

    assert_eq!(t[0].patient_id, "1");
    assert_eq!(t[0].stage_outcomes, [Some(1.5448)]);
    assert_eq!(t[0].primary_outcome, 1.544);
    assert_eq!(t[0].treatments, [-1.0]);
    assert_eq!(t[0].covariates, [vec![-1.0]]);
    assert_eq!(t[0].responders, [true]);

    assert_eq!(t[1].stage_outcomes, [Some(-0.4734), Some(-0.688)]);
    assert_eq!(t[1].primary_outcome, -0.580);
    assert_eq!(t[1].treatments, [1.0, 1.0]);
    assert_eq!(t[1].covariates, [vec![1.0], vec![1.0]]);
    assert_eq!(t[1].responders, [false, true]);

    assert_eq!(t[2].stage_outcomes, [Some(0.4853)]);
    assert_eq!(t[2].primary_outcome, 0.485);
    assert_eq!(t[2].treatments, [1.0]);
    assert_eq!(t[2].covariates, [vec![-1.0]]);

    assert_eq!(t[3].stage_outcomes, [Some(-0.4224), Some(0.547), Some(-0.377)]);
    assert_eq!(t[3].primary_outcome, -0.084);
    assert_eq!(t[3].treatments, [1.0, -1.0, 1.0]);
    assert_eq!(t[3].covariates, [vec![-1.0], vec![1.0], vec![-1.0]]);
    assert_eq!(t[3].responders, [false, false]);
}

#[test]
fn worked_rows_are_rejected_by_default() {
    match read_csv(Cursor::new(worked_rows()), &IngestOptions::default()) {
        Err(CliError::Invariant { row, patient, .. }) => assert_eq!((row, patient.as_str()), (1, "1")),
        other => panic!("expected an invariant violation, got {other:?}"),
    }
}

#[test]
fn empty_file_is_a_schema_error() {
    let err = read_csv(Cursor::new(""), &IngestOptions::default()).unwrap_err();
    assert!(matches!(err, CliError::Schema(_)), "{err:?}");
    assert_eq!(err.exit_code(), qshared_cli::EXIT_VALIDATION);
}

#[test]
fn responder_with_second_stage_treatment_names_the_row() {
    let csv = "Y1,Y2,Y3,Y_primary,A1,A2,A3,O1,O2,O3,R1,R2\n\
               0.1,0.2,0.3,0.2,1,-1,1,1,-1,1,0,0\n\
               0.5,,,0.5,-1,1,,1,,,1,\n";
    match read_csv(Cursor::new(csv), &IngestOptions::default()) {
        Err(CliError::Invariant { row, message, .. }) => {
            assert_eq!(row, 2);
            assert!(message.contains("A2"), "{message}");
        }
        other => panic!("expected an invariant violation, got {other:?}"),
    }
}

#[test]
fn missing_column_is_named() {
    let csv = "Y1,Y2,Y3,Y_primary,A1,A2,A3,O1,O2,R1,R2\n";
    let err = read_csv(Cursor::new(csv), &IngestOptions::default()).unwrap_err();
    assert!(err.to_string().contains("`O3`"), "{err}");
}

#[test]
fn unparsable_cell_names_row_and_column() {
    let csv = "Y1,Y_primary,A1,O1\n0.1,0.1,1,1\n0.2,abc,-1,1\n";
    match read_csv(Cursor::new(csv), &IngestOptions::default()) {
        Err(CliError::Parse { row, column, .. }) => assert_eq!((row, column.as_str()), (2, "Y_primary")),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn responder_flag_must_be_binary() {
    let csv = "Y1,Y2,Y_primary,A1,A2,O1,O2,R1\n0.1,0.2,0.1,1,1,1,1,2\n";
    let err = read_csv(Cursor::new(csv), &IngestOptions::default()).unwrap_err();
    assert!(matches!(err, CliError::Parse { ref column, .. } if column == "R1"), "{err:?}");
}

#[test]
fn simulated_data_round_trips() {
    let data = generate_smart(&Scenario { n: 120, ..Scenario::reference() }).unwrap();
    let mut buf = Vec::new();
    write_csv(&data, &[], &mut buf).unwrap();
    let back = read_csv(Cursor::new(buf), &IngestOptions::default()).unwrap();
    assert_eq!(back, data);
}

#[test]
fn named_covariates_follow_the_spec() {
    let spec = ModelSpec::from_path(concat!(env!("CARGO_MANIFEST_DIR"), "/../../specs/depression3.toml")).unwrap();
    assert_eq!(spec.covariate_names(), ["start.QIDS", "slope.QIDS", "side.effect"]);
    assert_eq!(spec.shared_names().len(), 5);
    let opts = IngestOptions {
        covariates: spec.covariate_names().to_vec(),
        optional: qshared_cli::unused_covariates(&spec),
        ..IngestOptions::default()
    };
    assert_eq!(opts.optional, [(1, 2)]);
    let csv = "id,Y1,Y2,Y3,Y_primary,A1,A2,A3,\
               start.QIDS_1,slope.QIDS_1,start.QIDS_2,slope.QIDS_2,side.effect_2,\
               start.QIDS_3,slope.QIDS_3,side.effect_3,R1,R2\n\
               a,-12,,,-12,1,,,14,0.5,,,,,,,1,\n\
               b,-15,-11,,-13,-1,1,,16,-0.2,15,0.1,1,,,,0,1\n";
    let d = read_csv(Cursor::new(csv), &opts).unwrap();
    let b = &d.trajectories()[1];
    assert_eq!(b.covariates, [vec![16.0, -0.2, 0.0], vec![15.0, 0.1, 1.0]]);
    assert!(read_csv(Cursor::new(csv), &IngestOptions { optional: vec![], ..opts }).is_err());
}
