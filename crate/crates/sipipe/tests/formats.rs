use std::io::Cursor;

use sipipe::config::{parse_candidates, parse_pipeline, serialize_candidates, serialize_pipeline, shuffled_folds};
use sipipe::data::{read_dataset, LoadOptions};
use sipipe::AppError;
use sipipe_core::graph::{example_op1, example_op2};
use sipipe_core::{Error, PipelineGraph};

fn load(text: &str) -> Result<sipipe::data::LoadedData, AppError> {
    read_dataset(Cursor::new(text.to_string()), &LoadOptions::default())
}

#[test]
fn missing_responses_are_masked() {
    let data = load("a,b,y\n1,2,1.0\n3,4,NaN\n5,6,2.0\n7,8,3.0\n").unwrap();
    let ds = &data.dataset;
    assert_eq!((ds.n(), ds.n_observed()), (4, 3));
    assert_eq!(ds.missing(), &[false, true, false, false]);
    assert_eq!(ds.y_obs(), &[1.0, 2.0, 3.0]);
    assert_eq!(data.feature_names, vec!["a", "b"]);
    assert_eq!(ds.x().row(1), &[3.0, 4.0]);
}

#[test]
fn complete_file_has_no_mask() {
    let data = load("a,y\n1,1\n2,2\n").unwrap();
    assert!(data.dataset.missing().iter().all(|m| !m));
}

#[test]
fn missing_token_is_case_sensitive_and_configurable() {
    assert!(matches!(load("a,y\n1,nan\n2,2\n"), Err(AppError::Malformed { .. })));
    let opts = LoadOptions { missing_token: "NA".into(), target: None };
    let data = read_dataset(Cursor::new("a,y\n1,NA\n2,2\n"), &opts).unwrap();
    assert_eq!(data.dataset.missing(), &[true, false]);
}

#[test]
fn bad_cell_names_row_and_column() {
    match load("a,b,y\n1,2,3\n4,abc,5\n") {
        Err(AppError::Malformed { row, column, .. }) => {
            assert_eq!(row, 3);
            assert_eq!(column, "b");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(load("a,y\n1,2\n3\n"), Err(AppError::Csv(_))));
    assert!(matches!(load("a,y\nNaN,2\n"), Err(AppError::Malformed { .. })));
}

#[test]
fn target_column_override() {
    let opts = LoadOptions { missing_token: "NaN".into(), target: Some("y".into()) };
    let data = read_dataset(Cursor::new("y,a,b\n1,2,3\nNaN,5,6\n"), &opts).unwrap();
    assert_eq!(data.feature_names, vec!["a", "b"]);
    assert_eq!(data.dataset.x().row(1), &[5.0, 6.0]);
    assert_eq!(data.dataset.y_obs(), &[1.0]);
}

#[test]
fn empty_inputs() {
    assert!(matches!(load("a,y\n"), Err(AppError::Core(Error::EmptyData(_)))));
    assert!(matches!(load("a,y\n1,NaN\n"), Err(AppError::Core(Error::EmptyData(_)))));
    assert!(matches!(load("y\n1\n"), Err(AppError::Core(Error::EmptyData(_)))));
}

#[test]
fn pipeline_round_trip_is_a_fixed_point() {
    for g in [example_op1(), example_op2()] {
        let once = serialize_pipeline(&g);
        let back = parse_pipeline(&once).unwrap();
        assert_eq!(back, g);
        assert_eq!(serialize_pipeline(&back), once);
    }
}

#[test]
fn op1_from_text() {
    let text = r#"{"nodes":[
        {"id":0,"kind":"source"},
        {"id":1,"kind":"mvi","method":"mean"},
        {"id":2,"kind":"od","method":"soft_ipod","param":0.02},
        {"id":3,"kind":"fs","method":"marginal","param":5},
        {"id":4,"kind":"fs","method":"stepwise","param":3},
        {"id":5,"kind":"fs","method":"lasso","param":0.08},
        {"id":6,"kind":"combine","method":"union"},
        {"id":7,"kind":"sink"}],
      "edges":[[0,1],[1,2],[2,3],[3,4],[3,5],[4,6],[5,6],[6,7]]}"#;
    let g: PipelineGraph = parse_pipeline(text).unwrap();
    assert_eq!(g, example_op1());
    assert_eq!(g.nodes().len(), 8);
}

#[test]
fn graph_errors_surface() {
    let cyc = r#"{"nodes":[{"id":0,"kind":"source"},{"id":1,"kind":"fs","method":"lasso","param":0.1},
        {"id":2,"kind":"fs","method":"lasso","param":0.1},{"id":3,"kind":"sink"}],
        "edges":[[0,1],[1,2],[2,1],[2,3]]}"#;
    assert!(matches!(parse_pipeline(cyc), Err(AppError::Core(Error::Cycle { .. }))));
    let unknown = r#"{"nodes":[{"id":0,"kind":"source"},{"id":1,"kind":"fs","method":"ridge","param":0.1},
        {"id":2,"kind":"sink"}],"edges":[[0,1],[1,2]]}"#;
    assert!(matches!(parse_pipeline(unknown), Err(AppError::Schema(_))));
    let late_mvi = r#"{"nodes":[{"id":0,"kind":"source"},{"id":1,"kind":"fs","method":"lasso","param":0.1},
        {"id":2,"kind":"mvi","method":"mean"},{"id":3,"kind":"sink"}],"edges":[[0,1],[1,2],[2,3]]}"#;
    assert!(matches!(parse_pipeline(late_mvi), Err(AppError::Core(Error::Placement(_)))));
    let extra_key = r#"{"nodes":[{"id":0,"kind":"source","colour":1},{"id":1,"kind":"sink"}],"edges":[[0,1]]}"#;
    assert!(matches!(parse_pipeline(extra_key), Err(AppError::Json(_))));
}

#[test]
fn candidates_round_trip_and_fold_layout() {
    let text = include_str!("fixtures/cv8.json");
    let cfg = parse_candidates(text).unwrap();
    assert_eq!(cfg.pipelines.len(), 8);
    assert_eq!(parse_candidates(&serialize_candidates(&cfg)).unwrap(), cfg);
    let folds = shuffled_folds(11, 2, 5).unwrap();
    assert_eq!(folds.folds[0].1.len(), 6);
    assert_eq!(folds.folds[1].1.len(), 5);
    assert_eq!(shuffled_folds(11, 2, 5).unwrap(), folds);
    let mut all: Vec<usize> = folds.folds.iter().flat_map(|f| f.1.clone()).collect();
    all.sort_unstable();
    assert_eq!(all, (0..11).collect::<Vec<_>>());
}
