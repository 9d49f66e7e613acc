use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kdesample::bench::{self, emit_report, ConfigMap, EvalOptions, ReportFormat, SamplerSpec};
use kdesample::classifiers::{ClassifierConfig, MlpConfig};
use kdesample::dataset::{load_csv, stratified_split, write_csv, ColumnRef, Dataset, LabelSpec, Seed};
use kdesample::samplers::{resample, ResampleRequest, Strategy};
use kdesample::synthgen::{CubeSpec, DonutSpec, GeneratorSpec, SeparableSpec};
use kdesample::Error;

/// Oversampling imbalanced data with kernel density estimates.
#[derive(Parser)]
#[command(name = "kdesample", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic imbalanced dataset as CSV.
    Gen(GenArgs),
    /// Rebalance the training data in a CSV file.
    Resample(ResampleArgs),
    /// Train one classifier on (resampled) data and score it.
    Eval(EvalArgs),
    /// Run a full benchmark from a configuration file and flags.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Donut,
    Cube,
    Separable,
}

#[derive(Args)]
struct GenArgs {
    kind: GenKind,
    /// Total size (donut only).
    #[arg(long)]
    n: Option<usize>,
    /// Minority share of the total (donut only).
    #[arg(long)]
    minority_frac: Option<f64>,
    #[arg(long)]
    n_majority: Option<usize>,
    #[arg(long)]
    n_minority: Option<usize>,
    /// Width of the overlap strip (separable only).
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LabelArgs {
    /// Label column, by name or 0-based index.
    #[arg(long, default_value = "label")]
    label: String,
    /// Raw value of the label column that marks the minority class.
    #[arg(long, default_value = "1")]
    positive: String,
}

impl LabelArgs {
    fn spec(&self) -> LabelSpec {
        LabelSpec::new(ColumnRef::parse(&self.label), self.positive.clone())
    }
}

#[derive(Args)]
struct ResampleArgs {
    input: PathBuf,
    #[arg(long)]
    strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Majority:minority ratio to reach.
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    /// Neighborhood size; the strategy default when omitted.
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    labels: LabelArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierKind {
    Knn,
    Mlp,
}

#[derive(Args)]
struct EvalArgs {
    /// Training data, or the full data when --test is absent.
    input: PathBuf,
    /// Separate test set; otherwise a stratified split of INPUT is used.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Resampling strategy, or `raw` for none.
    #[arg(long, default_value = "raw")]
    strategy: SamplerSpec,
    #[arg(long, value_enum, default_value = "knn")]
    classifier: ClassifierKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.3)]
    test_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    /// Sampler neighborhood size; the strategy default when omitted.
    #[arg(long)]
    k: Option<usize>,
    /// Neighbors of the kNN classifier.
    #[arg(long, default_value_t = 5)]
    knn_k: usize,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    no_standardize: bool,
    #[command(flatten)]
    labels: LabelArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samplers: Option<String>,
    #[arg(long)]
    classifiers: Option<String>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    metrics: Option<String>,
    /// Run cells one at a time.
    #[arg(long)]
    serial: bool,
    /// Override any configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Format written to stdout.
    #[arg(long, default_value = "markdown")]
    format: String,
    /// Also write observations.csv, summary.csv, report.json and report.md here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn write_output(path: Option<&Path>, text: &str) -> kdesample::Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn csv_text(ds: &Dataset) -> kdesample::Result<String> {
    let mut buf = Vec::new();
    write_csv(ds, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Data(e.to_string()))
}

fn run_gen(args: GenArgs) -> kdesample::Result<()> {
    let seed = Seed(args.seed);
    let spec = match args.kind {
        GenKind::Donut => {
            let d = DonutSpec::default();
            GeneratorSpec::Donut(DonutSpec {
                n_total: args.n.unwrap_or(d.n_total),
                minority_fraction: args.minority_frac.unwrap_or(d.minority_fraction),
                seed,
                ..d
            })
        }
        GenKind::Cube => {
            let d = CubeSpec::default();
            GeneratorSpec::Cube(CubeSpec {
                n_majority: args.n_majority.unwrap_or(d.n_majority),
                n_minority: args.n_minority.unwrap_or(d.n_minority),
                seed,
                ..d
            })
        }
        GenKind::Separable => {
            let d = SeparableSpec::default();
            GeneratorSpec::Separable(SeparableSpec {
                n_majority: args.n_majority.unwrap_or(d.n_majority),
                n_minority: args.n_minority.unwrap_or(d.n_minority),
                overlap_margin: args.margin.unwrap_or(d.overlap_margin),
                seed,
            })
        }
    };
    let ds = spec.generate()?;
    let (maj, min) = ds.class_counts();
    log::info!("generated {maj} majority and {min} minority rows");
    write_output(args.output.as_deref(), &csv_text(&ds)?)
}

fn run_resample(args: ResampleArgs) -> kdesample::Result<()> {
    let ds = load_csv(&args.input, &args.labels.spec())?;
    let mut req = ResampleRequest::new(args.strategy, Seed(args.seed)).with_target_ratio(args.ratio);
    if let Some(k) = args.k {
        req = req.with_k(k);
    }
    let out = resample(&ds, &req)?;
    let (maj, min) = out.dataset.class_counts();
    eprintln!(
        "{}: {} -> {} rows ({maj} majority, {min} minority)",
        args.strategy,
        ds.n_rows(),
        out.dataset.n_rows()
    );
    write_output(args.output.as_deref(), &csv_text(&out.dataset)?)
}

fn run_eval(args: EvalArgs) -> kdesample::Result<()> {
    let spec = args.labels.spec();
    let seed = Seed(args.seed);
    let data = load_csv(&args.input, &spec)?;
    let (train, test) = match &args.test {
        Some(p) => (data, load_csv(p, &spec)?),
        None => stratified_split(&data, args.test_fraction, seed)?,
    };
    let classifier = match args.classifier {
        ClassifierKind::Knn => ClassifierConfig::Knn { k: args.knn_k },
        ClassifierKind::Mlp => {
            let d = MlpConfig::default();
            ClassifierConfig::Mlp(MlpConfig {
                epochs: args.epochs.unwrap_or(d.epochs),
                ..d
            })
        }
    };
    let mut opts = EvalOptions::new(args.strategy);
    opts.target_ratio = args.ratio;
    opts.standardize = !args.no_standardize;
    if let Some(k) = args.k {
        opts.k_neighbors = k;
    }
    let e = bench::evaluate(&train, &test, &classifier, &opts, seed)?;
    let mut out = io::stdout().lock();
    writeln!(out, "gmean={}", e.g_mean)?;
    writeln!(out, "f1={}", e.f1.value)?;
    writeln!(out, "auc={}", e.auc)?;
    if e.f1.degenerate {
        log::warn!("no true positives; F1 reported as 0");
    }
    Ok(())
}

fn run_bench(args: BenchArgs) -> kdesample::Result<()> {
    let format: ReportFormat = args.format.parse()?;
    let mut map = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let mut map = ConfigMap::parse(&text)?;
            map.resolve_paths(path.parent().unwrap_or(Path::new(".")));
            map
        }
        None => ConfigMap::default(),
    };
    let mut flags = ConfigMap::default();
    if let Some(s) = args.seed {
        flags.set("seed", &s.to_string());
    }
    if let Some(v) = &args.samplers {
        flags.set("samplers", v);
    }
    if let Some(v) = &args.classifiers {
        flags.set("classifiers", v);
    }
    if let Some(v) = args.replications {
        flags.set("replications", &v.to_string());
    }
    if let Some(v) = &args.metrics {
        flags.set("metrics", v);
    }
    if args.serial {
        flags.set("parallel", "false");
    }
    for pair in &args.set {
        flags.set_pair(pair)?;
    }
    map.merge(&flags);
    let cfg = map.to_config()?;
    let report = bench::run_experiment(&cfg)?;

    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir)?;
        for (name, fmt) in [
            ("observations.csv", ReportFormat::Csv),
            ("summary.csv", ReportFormat::SummaryCsv),
            ("report.json", ReportFormat::Json),
            ("report.md", ReportFormat::Markdown),
        ] {
            fs::write(dir.join(name), emit_report(&report, fmt)?)?;
        }
    }
    write_output(None, &emit_report(&report, format)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => run_gen(a),
        Command::Resample(a) => run_resample(a),
        Command::Eval(a) => run_eval(a),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // a closed stdout (e.g. piping into `head`) is not an error
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Argument(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
