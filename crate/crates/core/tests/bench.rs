use std::fs;

use kdesample::bench::{emit_report, run_experiment, CellOutcome, ConfigMap, DataSource, DatasetConfig, ExperimentConfig, Metric, Report, ReportFormat, SamplerSpec};
use kdesample::classifiers::ClassifierConfig;
use kdesample::dataset::Seed;
use kdesample::samplers::Strategy;
use kdesample::synthgen::{DonutSpec, GeneratorSpec};

const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/donut_raw_kde.md");

fn donut_config() -> ExperimentConfig {
    let spec = GeneratorSpec::Donut(DonutSpec {
        n_total: 300,
        minority_fraction: 0.2,
        seed: Seed(7),
        ..DonutSpec::default()
    });
    let mut cfg = ExperimentConfig::new(
        vec![DatasetConfig {
            name: "donut".into(),
            source: DataSource::Generated { spec },
        }],
        Seed(7),
    );
    cfg.samplers = vec![SamplerSpec::Resample(Strategy::Kde)];
    cfg.classifiers = vec![ClassifierConfig::Knn { k: 5 }];
    cfg
}

#[test]
fn cell_and_observation_counts() {
    let report = run_experiment(&donut_config()).unwrap();
    assert_eq!(report.cells.len(), 2);
    let csv = emit_report(&report, ReportFormat::Csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "dataset,sampler,classifier,metric,rep_index,value");
    // 2 cells x 2 replications x 3 metrics
    assert_eq!(lines.len() - 1, 12);
    assert_eq!(lines.iter().filter(|l| l.contains(",gmean,")).count(), 4);
}

#[test]
fn means_are_replication_averages() {
    let report = run_experiment(&donut_config()).unwrap();
    for cell in &report.cells {
        let CellOutcome::Ok { metrics } = &cell.outcome else { panic!("{cell:?}") };
        for m in metrics {
            let avg = m.values.iter().sum::<f64>() / m.values.len() as f64;
            assert!((m.mean - avg).abs() <= 1e-12);
            assert_eq!(m.values.len(), 2);
        }
    }
}

#[test]
fn empty_report_gives_header_only_csv() {
    let report = Report::new(donut_config(), Vec::new());
    assert_eq!(
        emit_report(&report, ReportFormat::Csv).unwrap(),
        "dataset,sampler,classifier,metric,rep_index,value\n"
    );
    assert!(report.best.is_empty());
}

#[test]
fn best_markers_cover_ties() {
    let mut report = run_experiment(&donut_config()).unwrap();
    // force a tie on every metric
    let raw = report.cells[0].outcome.clone();
    report.cells[1].outcome = raw;
    let report = Report::new(report.config, report.cells);
    assert!(report.best.iter().all(|b| b.samplers == ["raw", "kde"]));
    let md = emit_report(&report, ReportFormat::Markdown).unwrap();
    let row = md.lines().find(|l| l.starts_with("| donut | auc |")).unwrap();
    assert_eq!(row.matches("**").count(), 4);
}

#[test]
fn markdown_matches_golden() {
    let report = run_experiment(&donut_config()).unwrap();
    let md = emit_report(&report, ReportFormat::Markdown).unwrap();
    assert_eq!(md, fs::read_to_string(GOLDEN).unwrap());
}

#[test]
fn config_file_paths_resolve_against_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("data")).unwrap();
    fs::copy(
        concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/ecoli.csv"),
        dir.path().join("data/ecoli.csv"),
    )
    .unwrap();
    let text = "datasets = ecoli\n\
                dataset.ecoli.csv = data/ecoli.csv\n\
                dataset.ecoli.label = class\n\
                dataset.ecoli.positive = imU\n\
                samplers = smote\n\
                metrics = gmean\n\
                replications = 1\n";
    let mut map = ConfigMap::parse(text).unwrap();
    map.resolve_paths(dir.path());
    let report = run_experiment(&map.to_config().unwrap()).unwrap();
    assert_eq!(report.cells.len(), 2);
    assert!(report.cells.iter().all(|c| c.mean(Metric::GMean).is_some()));
}
