//! Sanity checks on the two bundled UCI datasets: shapes, class balance, and
//! label mapping must match the published descriptions.

use optcomb::dataset::{load_dataset, ColumnSchema, LabelColumn};
use std::path::PathBuf;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

#[test]
fn heart_statlog_loads_with_expected_shape() {
    // 270 instances, 13 features; label 2 = disease present (positive class,
    // 120 instances), label 1 = absent (150 instances).
    let schema = ColumnSchema {
        label_column: LabelColumn::Last,
        positive_label: "2".into(),
        negative_label: "1".into(),
        has_header: false,
    };
    let ds = load_dataset(&data_dir().join("heart.dat"), &schema).unwrap();
    assert_eq!(ds.n(), 270);
    assert_eq!(ds.num_features(), 13);
    let (pos, neg) = ds.class_counts();
    assert_eq!((pos, neg), (120, 150));
    // Spot-check the first row: 70.0 1.0 4.0 130.0 322.0 ... label 2.
    assert_eq!(ds.features.get(0, 0), 70.0);
    assert_eq!(ds.features.get(0, 3), 130.0);
    assert_eq!(ds.targets[0], 1);
}

#[test]
fn german_numeric_loads_with_expected_shape() {
    // 1000 instances, 24 numeric features; label 2 = bad credit (positive
    // class, 300 instances), label 1 = good (700 instances).
    let schema = ColumnSchema {
        label_column: LabelColumn::Last,
        positive_label: "2".into(),
        negative_label: "1".into(),
        has_header: false,
    };
    let ds = load_dataset(&data_dir().join("german.data-numeric"), &schema).unwrap();
    assert_eq!(ds.n(), 1000);
    assert_eq!(ds.num_features(), 24);
    let (pos, neg) = ds.class_counts();
    assert_eq!((pos, neg), (300, 700));
    // Spot-check the first row: duration 6, age 67, label 1 (good).
    assert_eq!(ds.features.get(0, 1), 6.0);
    assert_eq!(ds.features.get(0, 9), 67.0);
    assert_eq!(ds.targets[0], -1);
}
