use std::path::Path;

use mogp_core::dataset::{stratified_split, DatasetManifest};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn manifest() -> DatasetManifest {
    DatasetManifest::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/datasets.toml")).unwrap()
}

#[test]
fn bundled_datasets_have_expected_shape() {
    let m = manifest();
    // (name, rows, positives, features)
    let expected = [
        ("Ion", 351, 126, 34),
        ("Spect", 267, 55, 22),
        ("Yeast2", 1484, 163, 8),
        ("Abal1", 731, 42, 8),
        ("Abal2", 4174, 32, 8),
    ];
    for (name, rows, pos, features) in expected {
        let d = m.get(name).unwrap().load().unwrap();
        assert_eq!(d.name(), name);
        assert_eq!(
            (d.len(), d.positive_count(), d.feature_count()),
            (rows, pos, features),
            "{name}"
        );
    }
}

#[test]
fn missing_dataset_is_a_load_error() {
    let m = manifest();
    let entry = m.get("yeast1").unwrap();
    let err = entry.load().unwrap_err().to_string();
    assert!(err.contains("yeast_mit.csv"), "{err}");
}

#[test]
fn splits_preserve_class_ratio() {
    let d = manifest().get("Spect").unwrap().load().unwrap();
    let (train, test) = stratified_split(&d, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(train.len() + test.len(), 267);
    assert_eq!(train.positive_count(), 28);
    assert_eq!(test.positive_count(), 27);
    assert_eq!(train.negative_count(), 106);
}
