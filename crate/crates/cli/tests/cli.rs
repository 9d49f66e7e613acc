use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const ECOLI: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/ecoli.csv");

fn kdesample(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdesample"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn class_counts(path: &Path) -> (usize, usize) {
    let text = fs::read_to_string(path).unwrap();
    let mut counts = (0, 0);
    for line in text.lines().skip(1) {
        match line.rsplit(',').next() {
            Some("0") => counts.0 += 1,
            Some("1") => counts.1 += 1,
            other => panic!("unexpected label {other:?}"),
        }
    }
    counts
}

#[test]
fn gen_then_resample_balances() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d.csv");
    let b = dir.path().join("b.csv");
    let out = kdesample(&["gen", "donut", "--n", "125", "--minority-frac", "0.2", "--seed", "7", "-o", d.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(class_counts(&d), (100, 25));

    let out = kdesample(&["resample", d.to_str().unwrap(), "--strategy", "kde", "--seed", "7", "-o", b.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(class_counts(&b), (100, 100));
    assert!(out.stdout.is_empty());
}

#[test]
fn gen_writes_csv_to_stdout() {
    let out = kdesample(&["gen", "separable", "--n-majority", "50", "--n-minority", "10", "--seed", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("x,y,label"));
    assert_eq!(text.lines().count(), 61);
}

#[test]
fn eval_prints_labeled_metrics() {
    let out = kdesample(&["eval", ECOLI, "--label", "class", "--positive", "imU", "--strategy", "kde", "--classifier", "knn", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap_or_else(|| panic!("no {key} in {text}"))
            .parse()
            .unwrap()
    };
    for key in ["gmean=", "f1=", "auc="] {
        assert!((0.0..=1.0).contains(&value(key)));
    }
}

#[test]
fn bench_is_reproducible_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(ECOLI, dir.path().join("ecoli.csv")).unwrap();
    let cfg = dir.path().join("bench.cfg");
    fs::write(
        &cfg,
        "# ecoli with kNN\n\
         datasets = ecoli, sim\n\
         dataset.ecoli.csv = ecoli.csv\n\
         dataset.ecoli.label = class\n\
         dataset.ecoli.positive = imU\n\
         dataset.sim.generator = donut\n\
         dataset.sim.n_total = 200\n\
         samplers = smote, kde\n\
         metrics = gmean, f1\n",
    )
    .unwrap();
    let run = |out_dir: &Path| {
        let out = kdesample(&[
            "bench",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "1",
            "--format",
            "json",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&a), run(&b));
    for name in ["observations.csv", "summary.csv", "report.json", "report.md"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let obs = fs::read_to_string(a.join("observations.csv")).unwrap();
    // 2 datasets x 3 samplers x 1 classifier x 2 metrics x 2 replications
    assert_eq!(obs.lines().count(), 1 + 24);

    // flags override the file
    let out = kdesample(&["bench", "--config", cfg.to_str().unwrap(), "--set", "replications=1", "--format", "csv"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1 + 12);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(kdesample(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(kdesample(&["gen", "donut", "--bogus"]).status.code(), Some(2));
    assert_eq!(kdesample(&["resample", ECOLI, "--strategy", "magic"]).status.code(), Some(2));
    let out = kdesample(&["bench", "--set", "datasets=x", "--set", "dataset.x.generator=donut", "--set", "colour=blue"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn runtime_errors_exit_1() {
    let out = kdesample(&["resample", "/nonexistent.csv", "--strategy", "ros"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
}

#[test]
fn shipped_configs_run() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    for name in ["ecoli_knn.cfg", "simulated.cfg"] {
        let path = format!("{root}/{name}");
        // one replication of a cheap classifier keeps this quick
        let out = kdesample(&["bench", "--config", &path, "--replications", "1", "--classifiers", "knn"]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8(out.stdout).unwrap().contains("| raw |"));
    }
}
