//! `qnnlab` command line: representation and gradient checks, the training
//! experiments and MNIST ingestion.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::json;

use qnnlab::data::{ingest_mnist, remove_ambiguous, IngestCounts, LabeledDataset, DEFAULT_THRESHOLD};
use qnnlab::experiments::{
    grad_check, repr_check, run_batch_on, run_digits_on, run_hamiltonian, run_majority, run_parity, BatchConfig,
    DigitsConfig, GradCheckConfig, HamiltonianConfig, MajorityConfig, MnistSource, ParityConfig, ReprConfig, ReprKind,
};

use output::RunDir;

/// Counts for digits 3 and 6 reported alongside ingestion results, for
/// comparison with other downsampling choices.
const REFERENCE_COUNTS: [(&str, u64); 4] = [
    ("distinct +1 strings", 797),
    ("distinct -1 strings", 617),
    ("ambiguous strings", 197),
    ("retained samples", 6031),
];

#[derive(Parser)]
#[command(
    name = "qnnlab",
    version,
    about = "Quantum neural network experiments on a state-vector simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile an exact label circuit and check it on every input.
    ReprCheck(ReprArgs),
    /// Learn a subset parity by SGD.
    TrainParity(ParityArgs),
    /// Learn a subset majority by SGD.
    TrainMajority(MajorityArgs),
    /// SGD on downsampled MNIST digit pairs.
    TrainDigits(DigitsArgs),
    /// Gradient descent on superposition batches of MNIST digits.
    TrainBatch(BatchArgs),
    /// Learn the sign of an Ising energy on random product states.
    TrainHamiltonian(HamiltonianArgs),
    /// Compare analytic, finite-difference and Hadamard-test gradients.
    GradCheck(GradArgs),
    /// Downsample an MNIST digit pair to 16-bit strings.
    IngestMnist(IngestArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ReprArgs {
    #[command(flatten)]
    common: Common,
    /// parity, majority or truth-table.
    #[arg(long)]
    kind: Option<ReprKind>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated 1-based subset.
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<usize>>,
    #[arg(long)]
    beta: Option<f64>,
    /// Truth table as hex (bit x of the integer is b(x)).
    #[arg(long)]
    table: Option<String>,
}

#[derive(Args)]
struct ParityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<usize>>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Hadamard-test shots per gradient term (0: exact gradients).
    #[arg(long)]
    shots: Option<u64>,
    /// Label-noise rate for the training labels.
    #[arg(long)]
    noise: Option<f64>,
    /// Cap on the length of one update (0.3 by default with noise).
    #[arg(long)]
    max_step: Option<f64>,
    /// Stop once the clean error is at most this (0.01 by default with noise).
    #[arg(long)]
    target_error: Option<f64>,
    /// Circuit JSON to train instead of the built-in one.
    #[arg(long)]
    circuit: Option<PathBuf>,
}

#[derive(Args)]
struct MajorityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<usize>>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Hadamard-test shots per gradient term (0: exact gradients).
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    circuit: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    /// MNIST directory with the IDX files, or a dataset text file.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// The two digits, labeled +1 and -1.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    digits: Option<Vec<u8>>,
    /// Pooled-cell threshold as a fraction of full intensity.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct DigitsArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Hadamard-test shots per gradient term (0: exact gradients).
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    circuit: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    circuit: Option<PathBuf>,
}

#[derive(Args)]
struct HamiltonianArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Hadamard-test shots per gradient term (0: exact gradients).
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    train_states: Option<usize>,
    #[arg(long)]
    test_states: Option<usize>,
    /// Add two rounds of XX and ZX layers.
    #[arg(long)]
    extra_layers: bool,
    /// Edge list ("i j J" per line) instead of a random 3-regular graph.
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Args)]
struct GradArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    circuits: Option<usize>,
    #[arg(long)]
    fd_eps: Option<f64>,
    /// Also estimate every component from this many Hadamard-test shots.
    #[arg(long)]
    shots: Option<u64>,
    /// Largest number of data qubits.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn out_dir(common: &Common, name: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| Path::new("runs").join(name))
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::ReprCheck(a) => repr(a),
        Command::TrainParity(a) => parity(a),
        Command::TrainMajority(a) => majority(a),
        Command::TrainDigits(a) => digits(a),
        Command::TrainBatch(a) => batch(a),
        Command::TrainHamiltonian(a) => hamiltonian(a),
        Command::GradCheck(a) => grad(a),
        Command::IngestMnist(a) => ingest(a),
    }
}

fn repr(a: ReprArgs) -> Result<bool> {
    let mut cfg: ReprConfig = load_config(a.common.config.as_deref())?;
    set(&mut cfg.kind, a.kind);
    set(&mut cfg.n, a.n);
    set(&mut cfg.seed, a.common.seed);
    if a.subset.is_some() {
        cfg.subset = a.subset;
    }
    if a.beta.is_some() {
        cfg.beta = a.beta;
    }
    if a.table.is_some() {
        cfg.table = a.table;
    }
    let report = repr_check(&cfg)?;
    let passed = report.passed();
    println!(
        "{}: {} inputs, {} gates, max deviation {:.3e}, categorical error {} -> {}",
        report.description,
        report.inputs_checked,
        report.gates,
        report.max_deviation,
        report.categorical_error,
        verdict(passed)
    );
    let dir = RunDir::create(&out_dir(&a.common, "repr-check"))?;
    dir.summary(&json!({ "config": cfg, "report": report, "passed": passed }))?;
    Ok(passed)
}

fn parity(a: ParityArgs) -> Result<bool> {
    let mut cfg: ParityConfig = load_config(a.common.config.as_deref())?;
    set(&mut cfg.n, a.n);
    set(&mut cfg.learning_rate, a.rate);
    set(&mut cfg.noise, a.noise);
    set(&mut cfg.shots, a.shots);
    set(&mut cfg.seed, a.common.seed);
    if a.subset.is_some() {
        cfg.subset = a.subset;
    }
    if a.steps.is_some() {
        cfg.max_steps = a.steps;
    }
    if a.circuit.is_some() {
        cfg.circuit = a.circuit;
    }
    if cfg.noise > 0.0 {
        cfg.max_step = a.max_step.or(cfg.max_step).or(Some(0.3));
        cfg.target_error = a.target_error.unwrap_or(cfg.target_error.max(0.01));
    } else {
        cfg.max_step = a.max_step.or(cfg.max_step);
        set(&mut cfg.target_error, a.target_error);
    }
    let dir = RunDir::create(&out_dir(&a.common, "train-parity"))?;
    let mut metrics = dir.metrics()?;
    let report = run_parity(&cfg, &mut |r| metrics.write(r))?;
    metrics.finish()?;
    let passed = report.steps_to_target.is_some();
    println!(
        "parity of {:?}: clean error {} after {} steps (target {} {}) -> {}",
        report.subset,
        report.final_clean_error,
        report.steps_run,
        cfg.target_error,
        match report.steps_to_target {
            Some(s) => format!("reached by step {s}"),
            None => "not reached".into(),
        },
        verdict(passed)
    );
    dir.circuit(&report.circuit)?;
    dir.params(&report.params)?;
    dir.summary(&json!({ "config": cfg, "report": report, "passed": passed }))?;
    Ok(passed)
}

fn majority(a: MajorityArgs) -> Result<bool> {
    let mut cfg: MajorityConfig = load_config(a.common.config.as_deref())?;
    set(&mut cfg.n, a.n);
    set(&mut cfg.learning_rate, a.rate);
    set(&mut cfg.shots, a.shots);
    set(&mut cfg.seed, a.common.seed);
    if a.subset.is_some() {
        cfg.subset = a.subset;
    }
    if a.beta.is_some() {
        cfg.beta = a.beta;
    }
    if a.steps.is_some() {
        cfg.max_steps = a.steps;
    }
    if a.circuit.is_some() {
        cfg.circuit = a.circuit;
    }
    let dir = RunDir::create(&out_dir(&a.common, "train-majority"))?;
    let mut metrics = dir.metrics()?;
    let report = run_majority(&cfg, &mut |r| metrics.write(r))?;
    metrics.finish()?;
    let passed = report.steps_to_target.is_some();
    println!(
        "majority of {:?}: categorical error {} after {} steps -> {}",
        report.subset,
        report.final_clean_error,
        report.steps_run,
        verdict(passed)
    );
    dir.circuit(&report.circuit)?;
    dir.params(&report.params)?;
    dir.summary(&json!({ "config": cfg, "report": report, "passed": passed }))?;
    Ok(passed)
}

/// Applies `--dataset/--digits/--threshold` to a source and loads the clean
/// dataset with its counts.
fn load_digits(source: &mut MnistSource, data: &DataArgs) -> Result<(LabeledDataset, IngestCounts)> {
    if let Some(d) = &data.digits {
        let [a, b] = d[..] else {
            bail!("--digits takes exactly two digits, e.g. 3,6");
        };
        source.digit_a = a;
        source.digit_b = b;
    }
    set(&mut source.threshold, data.threshold);
    match &data.dataset {
        Some(p) if p.is_file() => {
            let raw = LabeledDataset::load(p)?;
            let counts = IngestCounts::of(&raw);
            Ok((remove_ambiguous(&raw), counts))
        }
        Some(p) => {
            source.images = p.join("train-images-idx3-ubyte");
            source.labels = p.join("train-labels-idx1-ubyte");
            Ok(source.load()?)
        }
        None => Ok(source.load()?),
    }
}

fn digits(a: DigitsArgs) -> Result<bool> {
    let mut cfg: DigitsConfig = load_config(a.common.config.as_deref())?;
    set(&mut cfg.learning_rate, a.rate);
    set(&mut cfg.shots, a.shots);
    set(&mut cfg.seed, a.common.seed);
    if a.steps.is_some() {
        cfg.max_steps = a.steps;
    }
    if a.circuit.is_some() {
        cfg.circuit = a.circuit;
    }
    let (ds, counts) = load_digits(&mut cfg.source, &a.data)?;
    let dir = RunDir::create(&out_dir(&a.common, "train-digits"))?;
    let mut metrics = dir.metrics()?;
    let report = run_digits_on(&ds, counts, &cfg, &mut |r| metrics.write(r))?;
    metrics.finish()?;
    let passed = report.train_error <= 0.05;
    println!(
        "digits {} vs {}: {} params, {} steps, train error {:.4} (from {:.4}), risk {:.4} -> {}",
        cfg.source.digit_a,
        cfg.source.digit_b,
        report.num_params,
        report.steps_run,
        report.train_error,
        report.initial_train_error,
        report.train_risk,
        verdict(passed)
    );
    dir.circuit(&report.circuit)?;
    dir.params(&report.params)?;
    dir.summary(&json!({ "config": cfg, "report": report, "passed": passed }))?;
    Ok(passed)
}

fn batch(a: BatchArgs) -> Result<bool> {
    let mut cfg: BatchConfig = load_config(a.common.config.as_deref())?;
    set(&mut cfg.learning_rate, a.rate);
    set(&mut cfg.max_steps, a.steps);
    set(&mut cfg.seed, a.common.seed);
    if a.circuit.is_some() {
        cfg.circuit = a.circuit;
    }
    let (ds, counts) = load_digits(&mut cfg.source, &a.data)?;
    let dir = RunDir::create(&out_dir(&a.common, "train-batch"))?;
    let mut metrics = dir.metrics()?;
    let report = run_batch_on(&ds, counts, &cfg, &mut |r| metrics.write(r))?;
    metrics.finish()?;
    let passed = report.final_risk <= 0.6 && report.train_error <= 0.10;
    println!(
        "batch: {} params (diagonal: {}), risk {:.4} -> {:.4} in {} steps, train error {:.4} -> {}",
        report.num_params,
        report.diagonal,
        report.initial_risk,
        report.final_risk,
        report.steps_run,
        report.train_error,
        verdict(passed)
    );
    dir.circuit(&report.circuit)?;
    dir.params(&report.params)?;
    dir.summary(&json!({ "config": cfg, "report": report, "passed": passed }))?;
    Ok(passed)
}

fn hamiltonian(a: HamiltonianArgs) -> Result<bool> {
    let mut cfg: HamiltonianConfig = load_config(a.common.config.as_deref())?;
    set(&mut cfg.n, a.n);
    set(&mut cfg.learning_rate, a.rate);
    set(&mut cfg.max_steps, a.steps);
    set(&mut cfg.train_states, a.train_states);
    set(&mut cfg.test_states, a.test_states);
    set(&mut cfg.shots, a.shots);
    set(&mut cfg.seed, a.common.seed);
    cfg.extra_layers |= a.extra_layers;
    if a.graph.is_some() {
        cfg.graph = a.graph;
    }
    let dir = RunDir::create(&out_dir(&a.common, "train-hamiltonian"))?;
    let mut metrics = dir.metrics()?;
    let report = run_hamiltonian(&cfg, &mut |r| metrics.write(r))?;
    metrics.finish()?;
    let passed = report.test_accuracy >= 0.95;
    println!(
        "hamiltonian ({} terms): {} params, test accuracy {:.3} (from {:.3}), train accuracy {:.3} -> {}",
        report.edges.len(),
        report.num_params,
        report.test_accuracy,
        report.initial_test_accuracy,
        report.train_accuracy,
        verdict(passed)
    );
    dir.circuit(&report.circuit)?;
    dir.params(&report.params)?;
    dir.text("hamiltonian.txt", &report.hamiltonian.to_edge_list())?;
    dir.summary(&json!({ "config": cfg, "report": report, "passed": passed }))?;
    Ok(passed)
}

fn grad(a: GradArgs) -> Result<bool> {
    let mut cfg: GradCheckConfig = load_config(a.common.config.as_deref())?;
    set(&mut cfg.circuits, a.circuits);
    set(&mut cfg.fd_epsilon, a.fd_eps);
    set(&mut cfg.shots, a.shots);
    set(&mut cfg.max_data_qubits, a.n);
    set(&mut cfg.seed, a.common.seed);
    let report = grad_check(&cfg)?;
    let passed = report.passed();
    println!(
        "{} circuits, {} components: |analytic - fd| <= {:.3e}, |analytic - hadamard| <= {:.3e}, max |g_k| {:.3} -> {}",
        report.circuits,
        report.components,
        report.max_analytic_vs_fd,
        report.max_analytic_vs_hadamard,
        report.max_component,
        verdict(passed)
    );
    if let Some(s) = report.max_analytic_vs_sampled {
        println!("{} shots per component: |analytic - estimate| <= {s:.3e}", cfg.shots);
    }
    let dir = RunDir::create(&out_dir(&a.common, "grad-check"))?;
    dir.summary(&json!({ "config": cfg, "report": report, "passed": passed }))?;
    Ok(passed)
}

fn ingest(a: IngestArgs) -> Result<bool> {
    let mut source = MnistSource::default();
    if let Some(p) = &a.data.dataset {
        source.images = p.join("train-images-idx3-ubyte");
        source.labels = p.join("train-labels-idx1-ubyte");
    }
    if let Some(d) = &a.data.digits {
        let [x, y] = d[..] else {
            bail!("--digits takes exactly two digits, e.g. 3,6");
        };
        source.digit_a = x;
        source.digit_b = y;
    }
    let threshold = a.data.threshold.unwrap_or(DEFAULT_THRESHOLD);
    let raw = ingest_mnist(
        &source.images,
        &source.labels,
        source.digit_a,
        source.digit_b,
        threshold,
    )?;
    let counts = IngestCounts::of(&raw);
    let clean = remove_ambiguous(&raw);
    let dir = RunDir::create(&out_dir(&a.common, "ingest-mnist"))?;
    raw.save(dir.path().join("dataset_raw.txt"))?;
    clean.save(dir.path().join("dataset.txt"))?;
    println!(
        "digits {} (+1) vs {} (-1), threshold {threshold}",
        source.digit_a, source.digit_b
    );
    println!("images kept        {}", counts.images_kept);
    let ours = [
        counts.distinct_plus as u64,
        counts.distinct_minus as u64,
        counts.ambiguous_strings as u64,
        counts.retained_samples,
    ];
    for ((name, reference), value) in REFERENCE_COUNTS.iter().zip(ours) {
        println!("{name:<20} {value:>6}   (reference for 3 vs 6: {reference})");
    }
    println!("retained strings   {}", counts.retained_distinct);
    dir.summary(&json!({
        "digits": [source.digit_a, source.digit_b],
        "threshold": threshold,
        "counts": counts,
    }))?;
    Ok(true)
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}
