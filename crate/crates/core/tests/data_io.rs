//! Dataset and result file round trips.

use ifa_core::dataset::{self, Dataset, Task};
use ifa_core::engine::{RunResult, StrategyKind};
use ifa_core::models::{Model, ModelKind, ModelSpec, Predictor};
use ifa_core::results;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn csv_round_trip_is_bit_exact(
        rows in prop::collection::vec(prop::collection::vec(-1e6..1e6f64, 3), 1..20),
        targets_seed in any::<u64>(),
    ) {
        let n = rows.len();
        let targets: Vec<f64> = (0..n).map(|i| ((targets_seed >> (i % 60)) & 1) as f64 * 1.5 - 0.25).collect();
        let data = Dataset::from_rows(rows, targets, Task::Regression).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        data.write_csv(&path, "y").unwrap();
        let back = dataset::load_csv(&path, "y", &["x0", "x1", "x2"], Task::Regression).unwrap();
        prop_assert_eq!(back.features(), data.features());
        prop_assert_eq!(back.targets(), data.targets());
    }

    #[test]
    fn run_files_round_trip(
        series in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..30),
        seed in any::<u64>(),
        strategy in prop::sample::select(StrategyKind::ALL.to_vec()),
    ) {
        let n = series.len();
        let run = RunResult {
            strategy,
            seed,
            dataset: String::new(),
            metric_series: series,
            cumulative_samples: (0..n).map(|t| t * 11).collect(),
            queries: Vec::new(),
        };
        prop_assert_eq!(results::run_from_csv(&results::run_to_csv(&run), "").unwrap(), run);
    }
}

#[test]
fn split_sizes_and_determinism() {
    let (data, _, _) = dataset::generate_linear(0, 506, 1, 3).unwrap();
    let (train, test) = dataset::split_shuffle(&data, 9, 0.5).unwrap();
    assert_eq!((train.n_rows(), test.n_rows()), (253, 253));
    let (train2, _) = dataset::split_shuffle(&data, 9, 0.5).unwrap();
    assert_eq!(train, train2);
    let (train3, _) = dataset::split_shuffle(&data, 10, 0.5).unwrap();
    assert_ne!(train, train3);
}

#[test]
fn models_fit_deterministically() {
    let (train, _, _) = dataset::generate_logistic(4, 60, 10, 3).unwrap();
    let (reg, _, _) = dataset::generate_linear(4, 60, 10, 3).unwrap();
    for kind in ModelKind::ALL {
        let data = if kind == ModelKind::LinearRegression { &reg } else { &train };
        let spec = ModelSpec { seed: 3, ..ModelSpec::default_for(kind) };
        let a = Model::fit(&spec, data).unwrap();
        let b = Model::fit(&spec, data).unwrap();
        for row in data.features() {
            assert_eq!(a.output(row).to_bits(), b.output(row).to_bits(), "{kind:?}");
        }
    }
}

#[test]
fn missing_rows_are_dropped_and_counted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    std::fs::write(&path, "a,b,y\n1,2,0\n,3,1\n4,NA,1\n5,6,1\n").unwrap();
    let (d, dropped) = dataset::load_csv_counted(&path, "y", &["a", "b"], Task::Classification).unwrap();
    assert_eq!((d.n_rows(), dropped), (2, 2));
}
