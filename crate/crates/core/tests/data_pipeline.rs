use std::io::Cursor;

use permsel_core::dataset::{self, read_csv, split, split_sizes, write_csv, TargetColumn};
use permsel_core::{Dataset, Dataset32, Dataset64, Target, Task};

fn isolet_like() -> Dataset64 {
    let (rows, width) = (600, 617);
    let columns = (0..width)
        .map(|f| (0..rows).map(|r| ((r * 31 + f * 7) % 97) as f64 / 97.0).collect())
        .collect();
    let classes = (0..rows).map(|r| usize::from(r % 5 == 0)).collect();
    Dataset::new(
        (0..width).map(|f| format!("f{f}")).collect(),
        columns,
        Target::Classes(classes),
        vec!["a".into(), "b".into()],
    )
    .unwrap()
}

#[test]
fn isolet_scale_partition() {
    let d = isolet_like();
    assert_eq!((d.n_rows(), d.n_features(), d.class_count()), (600, 617, 2));
    assert_eq!(split_sizes(600), (360, 120, 120));
    for stratified in [false, true] {
        let p = split(&d, 11, stratified).unwrap();
        assert_eq!((p.train.len(), p.validation.len(), p.test.len()), (360, 120, 120));
    }
}

#[test]
fn csv_round_trip_keeps_values_and_labels() {
    let text = "a,b,label\n1.5,2,yes\n-3,0.25,no\n7,8,yes\n";
    let d: Dataset64 = read_csv(Cursor::new(text), Task::Classification, &TargetColumn::Last).unwrap();
    assert_eq!(d.class_names(), ["yes", "no"]);
    let mut buf = Vec::new();
    write_csv(&d, &mut buf).unwrap();
    let back: Dataset64 = read_csv(Cursor::new(buf), Task::Classification, &TargetColumn::Last).unwrap();
    assert_eq!(back.columns(), d.columns());
    assert_eq!(back.target(), d.target());
    assert_eq!(back.feature_names(), d.feature_names());
}

#[test]
fn target_column_by_name_and_file_io() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "y,x1,x2\n1.0,2,3\n2.0,3,4\n3.5,4,5\n").unwrap();
    let d: Dataset32 = dataset::load_csv_with(&path, Task::Regression, &"y".parse().unwrap()).unwrap();
    assert_eq!(d.feature_names(), ["x1", "x2"]);
    assert_eq!(d.target().as_values().unwrap(), &[1.0f32, 2.0, 3.5]);
    let out = dir.path().join("out.csv");
    dataset::save_csv(&d, &out).unwrap();
    let again: Dataset32 = dataset::load_csv(&out, Task::Regression).unwrap();
    assert_eq!(again.target(), d.target());
}

#[test]
fn missing_value_is_reported_with_position() {
    let text = "a,b,y\n1,2,3\n4,?,6\n";
    let err = read_csv::<f64, _>(Cursor::new(text), Task::Regression, &TargetColumn::Last).unwrap_err();
    assert!(matches!(err, dataset::DatasetError::MissingValue { row: 1, col: 1 }), "{err:?}");
}
