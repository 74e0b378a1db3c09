//! End-to-end pipelines shared by the command line, the Python bindings and
//! the acceptance tests.

use std::f64::consts::PI;
use std::ops::ControlFlow;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_layered_readout_circuit, build_random_circuit, Circuit, GateKind, LayerKind, Placement};
use crate::compiler::{
    compile_label_circuit, hamiltonian_label, hamiltonian_label_circuit, majority_beta, majority_label, parity_label,
    reed_muller_transform, subset_majority_circuit, subset_parity_circuit, BooleanTruthTable, IsingHamiltonian,
    SubsetSpec,
};
use crate::data::{
    build_superposition, exhaustive_dataset, ingest_mnist, random_product_state, random_regular_graph,
    remove_ambiguous, IngestCounts, LabeledDataset, LabeledStates, SuperpositionSpec, Weighting, DEFAULT_THRESHOLD,
};
use crate::error::{invalid, QnnError, Result};
use crate::objective::{grad_finite_difference_input, grad_hadamard_test, loss_and_gradient, Input};
use crate::sim::{PauliAxis, PauliString, QuantumState};
use crate::trainer::{
    categorical_error, categorical_error_states, train_batch_risk, train_on_set, train_stochastic, GradientMode,
    MetricsRecord, TrainConfig, TrainOutcome,
};

fn gradient_mode(shots: u64) -> GradientMode {
    if shots == 0 {
        GradientMode::Analytic
    } else {
        GradientMode::HadamardShots
    }
}

/// Independent generator for one purpose (`stream`) under a run seed.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const STREAM_INIT: u64 = 1;
const STREAM_TASK: u64 = 2;
const STREAM_TEST: u64 = 3;

/// Uniform draws from `range`.
pub fn random_params<R: Rng + ?Sized>(count: usize, range: (f64, f64), rng: &mut R) -> Vec<f64> {
    (0..count).map(|_| rng.gen_range(range.0..range.1)).collect()
}

/// Receives every metrics record as training proceeds.
pub type MetricsSink<'a> = dyn FnMut(&MetricsRecord) + 'a;

/// Ignores all records.
pub fn discard(_: &MetricsRecord) {}

/// The circuit stored at `path` when given, otherwise the built-in one.
fn trainee(path: Option<&PathBuf>, n: usize, builtin: impl FnOnce() -> Result<Circuit>) -> Result<Circuit> {
    let Some(path) = path else {
        return builtin();
    };
    let c = Circuit::load(path)?;
    if c.num_data_qubits() != n {
        return Err(invalid(format!(
            "circuit {} has {} data qubits, the task has {n}",
            path.display(),
            c.num_data_qubits()
        )));
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParityConfig {
    pub n: usize,
    /// 1-based members; a seeded random non-empty subset when absent.
    pub subset: Option<Vec<usize>>,
    pub learning_rate: f64,
    /// Defaults to `10 · 2^n`.
    pub max_steps: Option<usize>,
    pub noise: f64,
    pub seed: u64,
    pub init_range: (f64, f64),
    /// How often the exhaustive clean-label check runs; defaults to `max(1, 2^n / 64)`.
    pub eval_every: Option<usize>,
    /// Stop once the clean-label error is at most this.
    pub target_error: f64,
    pub max_step: Option<f64>,
    /// Circuit JSON to train instead of the built-in one.
    pub circuit: Option<PathBuf>,
    /// Hadamard-test shots per gradient term; 0 trains on exact gradients.
    pub shots: u64,
}

impl Default for ParityConfig {
    fn default() -> Self {
        Self {
            n: 8,
            subset: None,
            learning_rate: 0.5,
            max_steps: None,
            noise: 0.0,
            seed: 0,
            init_range: (0.0, PI),
            eval_every: None,
            target_error: 0.0,
            max_step: None,
            circuit: None,
            shots: 0,
        }
    }
}

/// Outcome of a run that stops as soon as the exhaustive clean-label error
/// reaches its target.
#[derive(Clone, Debug, Serialize)]
pub struct LearningReport {
    pub subset: Vec<usize>,
    pub num_params: usize,
    pub init: Vec<f64>,
    pub params: Vec<f64>,
    /// Step at which the target was first observed, if ever.
    pub steps_to_target: Option<usize>,
    pub steps_run: usize,
    pub final_clean_error: f64,
    pub wall_seconds: f64,
    #[serde(skip)]
    pub circuit: Circuit,
    #[serde(skip)]
    pub trace: Vec<MetricsRecord>,
}

fn random_subset<R: Rng + ?Sized>(n: usize, odd: bool, rng: &mut R) -> Result<SubsetSpec> {
    loop {
        let members: Vec<usize> = (1..=n).filter(|_| rng.gen::<bool>()).collect();
        if !members.is_empty() && (!odd || members.len() % 2 == 1) {
            return SubsetSpec::new(n, members);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn learn_until(
    circuit: Circuit,
    subset: &SubsetSpec,
    clean: &LabeledDataset,
    init: Vec<f64>,
    cfg: &TrainConfig,
    eval_every: usize,
    target_error: f64,
    sink: &mut MetricsSink<'_>,
) -> Result<LearningReport> {
    let start = Instant::now();
    let mut reached = None;
    let mut failure = None;
    let outcome = {
        let mut observer = |r: &MetricsRecord, params: &[f64]| {
            sink(r);
            if r.step.is_multiple_of(eval_every) || r.step == cfg.max_steps {
                match categorical_error(&circuit, params, clean) {
                    Ok(e) if e <= target_error => {
                        reached = Some(r.step);
                        return ControlFlow::Break(());
                    }
                    Ok(_) => {}
                    Err(e) => {
                        failure = Some(e);
                        return ControlFlow::Break(());
                    }
                }
            }
            ControlFlow::Continue(())
        };
        train_stochastic(&circuit, &init, clean, cfg, &mut observer)?
    };
    if let Some(e) = failure {
        return Err(e);
    }
    let final_clean_error = categorical_error(&circuit, &outcome.params, clean)?;
    Ok(LearningReport {
        subset: subset.members().to_vec(),
        num_params: circuit.num_params(),
        init,
        steps_run: outcome.trace.len(),
        params: outcome.params,
        steps_to_target: reached,
        final_clean_error,
        wall_seconds: start.elapsed().as_secs_f64(),
        circuit,
        trace: outcome.trace,
    })
}

/// Learns a subset parity with SGD on the exhaustive dataset. Label noise,
/// when set, corrupts the training labels only; the stopping test uses the
/// clean labels and aims for zero error.
pub fn run_parity(cfg: &ParityConfig, sink: &mut MetricsSink<'_>) -> Result<LearningReport> {
    let n = cfg.n;
    let subset = match &cfg.subset {
        Some(m) => SubsetSpec::new(n, m.clone())?,
        None => random_subset(n, false, &mut seeded_rng(cfg.seed, STREAM_TASK))?,
    };
    let circuit = trainee(cfg.circuit.as_ref(), n, || subset_parity_circuit(&subset, true))?;
    let clean = exhaustive_dataset(n, |z| Ok(parity_label(&subset, z)))?;
    let init = random_params(
        circuit.num_params(),
        cfg.init_range,
        &mut seeded_rng(cfg.seed, STREAM_INIT),
    );
    let tc = TrainConfig {
        learning_rate: cfg.learning_rate,
        gradient_mode: gradient_mode(cfg.shots),
        shots: cfg.shots,
        max_steps: cfg.max_steps.unwrap_or(10 << n),
        seed: cfg.seed,
        label_noise_rate: cfg.noise,
        max_step: cfg.max_step,
        ..Default::default()
    };
    let eval_every = cfg.eval_every.unwrap_or(((1usize << n) / 64).max(1));
    learn_until(circuit, &subset, &clean, init, &tc, eval_every, cfg.target_error, sink)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MajorityConfig {
    pub n: usize,
    /// Odd 1-based subset; a seeded random odd subset when absent.
    pub subset: Option<Vec<usize>>,
    /// Defaults to `0.9π/n`.
    pub beta: Option<f64>,
    pub learning_rate: f64,
    pub max_steps: Option<usize>,
    pub seed: u64,
    pub init_range: (f64, f64),
    pub eval_every: Option<usize>,
    pub circuit: Option<PathBuf>,
    /// Hadamard-test shots per gradient term; 0 trains on exact gradients.
    pub shots: u64,
}

impl Default for MajorityConfig {
    fn default() -> Self {
        Self {
            n: 7,
            subset: None,
            beta: None,
            learning_rate: 0.5,
            max_steps: None,
            seed: 0,
            init_range: (-1.0, 1.0),
            eval_every: None,
            circuit: None,
            shots: 0,
        }
    }
}

/// Learns subset majority with the `exp(iβ/2 Σθ_j Z_j X_r)` circuit.
pub fn run_majority(cfg: &MajorityConfig, sink: &mut MetricsSink<'_>) -> Result<LearningReport> {
    let n = cfg.n;
    let subset = match &cfg.subset {
        Some(m) => SubsetSpec::new(n, m.clone())?,
        None => random_subset(n, true, &mut seeded_rng(cfg.seed, STREAM_TASK))?,
    };
    let beta = cfg.beta.unwrap_or_else(|| majority_beta(n));
    let circuit = trainee(cfg.circuit.as_ref(), n, || subset_majority_circuit(&subset, beta, true))?;
    let clean = exhaustive_dataset(n, |z| majority_label(&subset, z))?;
    let init = random_params(
        circuit.num_params(),
        cfg.init_range,
        &mut seeded_rng(cfg.seed, STREAM_INIT),
    );
    let tc = TrainConfig {
        learning_rate: cfg.learning_rate,
        gradient_mode: gradient_mode(cfg.shots),
        shots: cfg.shots,
        max_steps: cfg.max_steps.unwrap_or(10 << n),
        seed: cfg.seed,
        ..Default::default()
    };
    let eval_every = cfg.eval_every.unwrap_or(((1usize << n) / 64).max(1));
    learn_until(circuit, &subset, &clean, init, &tc, eval_every, 0.0, sink)
}

/// Where the MNIST IDX files live and which digits to separate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MnistSource {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub digit_a: u8,
    pub digit_b: u8,
    /// Pooled-cell brightness cut, as a fraction of full intensity.
    pub threshold: f64,
}

impl Default for MnistSource {
    fn default() -> Self {
        Self {
            images: PathBuf::from("data/mnist/train-images-idx3-ubyte"),
            labels: PathBuf::from("data/mnist/train-labels-idx1-ubyte"),
            digit_a: 3,
            digit_b: 6,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl MnistSource {
    /// Ingests and removes ambiguous strings.
    pub fn load(&self) -> Result<(LabeledDataset, IngestCounts)> {
        for p in [&self.images, &self.labels] {
            if !p.exists() {
                return Err(invalid(format!("dataset file {} not found", p.display())));
            }
        }
        let raw = ingest_mnist(&self.images, &self.labels, self.digit_a, self.digit_b, self.threshold)?;
        let counts = IngestCounts::of(&raw);
        Ok((remove_ambiguous(&raw), counts))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DigitsConfig {
    pub source: MnistSource,
    pub layers: Vec<LayerKind>,
    pub learning_rate: f64,
    /// Defaults to one pass: the number of retained images.
    pub max_steps: Option<usize>,
    pub seed: u64,
    pub init_range: (f64, f64),
    pub error_window: usize,
    /// Replaces `layers` with a stored circuit.
    pub circuit: Option<PathBuf>,
    /// Hadamard-test shots per gradient term; 0 trains on exact gradients.
    pub shots: u64,
}

impl Default for DigitsConfig {
    fn default() -> Self {
        use LayerKind::*;
        Self {
            source: MnistSource::default(),
            layers: vec![Zx, Xx, Zx, Xx, Zx, Xx],
            learning_rate: 0.05,
            max_steps: None,
            seed: 0,
            init_range: (0.0, 2.0 * PI),
            error_window: 500,
            circuit: None,
            shots: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DigitsReport {
    pub counts: IngestCounts,
    pub num_params: usize,
    pub steps_run: usize,
    pub initial_train_error: f64,
    pub train_error: f64,
    pub train_risk: f64,
    pub wall_seconds: f64,
    pub params: Vec<f64>,
    #[serde(skip)]
    pub circuit: Circuit,
    #[serde(skip)]
    pub trace: Vec<MetricsRecord>,
}

/// Mean multiplicity-weighted sample loss on a dataset.
fn risk(c: &Circuit, params: &[f64], ds: &LabeledDataset) -> Result<f64> {
    crate::objective::empirical_risk(c, params, ds)
}

/// SGD on per-image samples of two MNIST digits, 4×4 downsampled.
pub fn run_digits(cfg: &DigitsConfig, sink: &mut MetricsSink<'_>) -> Result<DigitsReport> {
    let (ds, counts) = cfg.source.load()?;
    run_digits_on(&ds, counts, cfg, sink)
}

pub fn run_digits_on(
    ds: &LabeledDataset,
    counts: IngestCounts,
    cfg: &DigitsConfig,
    sink: &mut MetricsSink<'_>,
) -> Result<DigitsReport> {
    let start = Instant::now();
    if ds.is_empty() {
        return Err(QnnError::EmptyDataset);
    }
    let circuit = trainee(cfg.circuit.as_ref(), ds.n(), || {
        build_layered_readout_circuit(ds.n(), &cfg.layers)
    })?;
    let init = random_params(
        circuit.num_params(),
        cfg.init_range,
        &mut seeded_rng(cfg.seed, STREAM_INIT),
    );
    let tc = TrainConfig {
        learning_rate: cfg.learning_rate,
        gradient_mode: gradient_mode(cfg.shots),
        shots: cfg.shots,
        max_steps: cfg.max_steps.unwrap_or(ds.total_multiplicity() as usize),
        seed: cfg.seed,
        error_window: cfg.error_window,
        ..Default::default()
    };
    let initial_train_error = categorical_error(&circuit, &init, ds)?;
    let outcome = train_stochastic(&circuit, &init, ds, &tc, &mut |r, _| {
        sink(r);
        ControlFlow::Continue(())
    })?;
    Ok(DigitsReport {
        counts,
        num_params: circuit.num_params(),
        steps_run: outcome.trace.len(),
        initial_train_error,
        train_error: categorical_error(&circuit, &outcome.params, ds)?,
        train_risk: risk(&circuit, &outcome.params, ds)?,
        wall_seconds: start.elapsed().as_secs_f64(),
        params: outcome.params,
        circuit,
        trace: outcome.trace,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchConfig {
    pub source: MnistSource,
    pub layers: Vec<LayerKind>,
    pub learning_rate: f64,
    pub max_steps: usize,
    pub seed: u64,
    pub init_range: (f64, f64),
    pub weighting: Weighting,
    /// Evaluate the per-sample error every this many steps (and at the end).
    pub eval_every: usize,
    pub circuit: Option<PathBuf>,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            source: MnistSource::default(),
            layers: vec![LayerKind::Zx, LayerKind::Zzx],
            learning_rate: 0.05,
            max_steps: 100,
            seed: 0,
            init_range: (-0.1, 0.1),
            weighting: Weighting::Frequency,
            eval_every: 10,
            circuit: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BatchReport {
    pub counts: IngestCounts,
    pub num_params: usize,
    pub diagonal: bool,
    pub initial_risk: f64,
    pub final_risk: f64,
    pub train_error: f64,
    pub steps_run: usize,
    /// Risk evaluations spent, two state passes each.
    pub risk_evaluations: usize,
    pub wall_seconds: f64,
    pub params: Vec<f64>,
    #[serde(skip)]
    pub circuit: Circuit,
    #[serde(skip)]
    pub trace: Vec<MetricsRecord>,
}

/// Gradient descent on the superposition-state risk for two MNIST digits.
pub fn run_batch(cfg: &BatchConfig, sink: &mut MetricsSink<'_>) -> Result<BatchReport> {
    let (ds, counts) = cfg.source.load()?;
    run_batch_on(&ds, counts, cfg, sink)
}

pub fn run_batch_on(
    ds: &LabeledDataset,
    counts: IngestCounts,
    cfg: &BatchConfig,
    sink: &mut MetricsSink<'_>,
) -> Result<BatchReport> {
    let start = Instant::now();
    let spec = SuperpositionSpec {
        weighting: cfg.weighting,
        ..Default::default()
    };
    let plus = build_superposition(ds, 1, &spec)?;
    let minus = build_superposition(ds, -1, &spec)?;
    let circuit = trainee(cfg.circuit.as_ref(), ds.n(), || {
        build_layered_readout_circuit(ds.n(), &cfg.layers)
    })?;
    let init = random_params(
        circuit.num_params(),
        cfg.init_range,
        &mut seeded_rng(cfg.seed, STREAM_INIT),
    );
    let tc = TrainConfig {
        learning_rate: cfg.learning_rate,
        max_steps: cfg.max_steps,
        seed: cfg.seed,
        ..Default::default()
    };
    let initial_risk = crate::objective::batch_risk(&circuit, &init, &plus, &minus)?;
    let every = cfg.eval_every.max(1);
    let max_steps = cfg.max_steps;
    let step = std::cell::Cell::new(0usize);
    let eval = |params: &[f64]| -> Result<f64> {
        step.set(step.get() + 1);
        if step.get().is_multiple_of(every) || step.get() == max_steps {
            categorical_error(&circuit, params, ds)
        } else {
            Ok(f64::NAN)
        }
    };
    let outcome = train_batch_risk(&circuit, &init, &plus, &minus, &tc, Some(&eval), &mut |r, _| {
        let mut r = r.clone();
        if r.categorical_error.is_some_and(f64::is_nan) {
            r.categorical_error = None;
        }
        sink(&r);
        ControlFlow::Continue(())
    })?;
    let final_risk = outcome.trace.last().map_or(initial_risk, |r| r.loss_or_risk);
    Ok(BatchReport {
        counts,
        num_params: circuit.num_params(),
        diagonal: circuit.is_data_diagonal(),
        initial_risk,
        final_risk,
        train_error: categorical_error(&circuit, &outcome.params, ds)?,
        steps_run: outcome.trace.len(),
        risk_evaluations: outcome.trace.len() + 1,
        wall_seconds: start.elapsed().as_secs_f64(),
        params: outcome.params,
        circuit,
        trace: outcome
            .trace
            .into_iter()
            .map(|mut r| {
                if r.categorical_error.is_some_and(f64::is_nan) {
                    r.categorical_error = None;
                }
                r
            })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HamiltonianConfig {
    pub n: usize,
    pub degree: usize,
    pub train_states: usize,
    pub test_states: usize,
    /// SGD presentations, drawn with replacement from the training states.
    pub max_steps: usize,
    /// Adds two rounds of `X_j X_r` and `Z_j X_r` layers after the edge gates.
    pub extra_layers: bool,
    pub learning_rate: f64,
    pub seed: u64,
    pub init_range: (f64, f64),
    /// Caps the Euclidean length of each update.
    pub max_step: Option<f64>,
    /// Edge list (`i j J` per line) to use instead of a seeded random graph.
    pub graph: Option<PathBuf>,
    /// Hadamard-test shots per gradient term; 0 trains on exact gradients.
    pub shots: u64,
}

impl Default for HamiltonianConfig {
    fn default() -> Self {
        Self {
            n: 8,
            degree: 3,
            train_states: 1000,
            test_states: 500,
            max_steps: 3000,
            extra_layers: false,
            learning_rate: 0.002,
            seed: 0,
            init_range: (-0.01, 0.01),
            max_step: None,
            graph: None,
            shots: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HamiltonianReport {
    pub edges: Vec<(usize, usize, i8)>,
    pub num_params: usize,
    pub initial_test_accuracy: f64,
    pub test_accuracy: f64,
    pub train_accuracy: f64,
    pub skipped_ambiguous: usize,
    pub wall_seconds: f64,
    pub params: Vec<f64>,
    #[serde(skip)]
    pub hamiltonian: IsingHamiltonian,
    #[serde(skip)]
    pub circuit: Circuit,
    #[serde(skip)]
    pub trace: Vec<MetricsRecord>,
}

/// Draws `count` labeled product states, skipping exact ties.
pub fn labeled_product_states<R: Rng + ?Sized>(
    h: &IsingHamiltonian,
    count: usize,
    rng: &mut R,
) -> Result<(LabeledStates, usize)> {
    let mut set = LabeledStates::default();
    let mut skipped = 0;
    while set.len() < count {
        let p = random_product_state(h.n(), rng)?;
        match hamiltonian_label(h, &p.state) {
            Ok(l) => set.push(p.state, l)?,
            Err(QnnError::AmbiguousLabel(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((set, skipped))
}

/// The trainable circuit for the Hamiltonian task.
pub fn hamiltonian_trainee(h: &IsingHamiltonian, extra_layers: bool) -> Result<Circuit> {
    let mut c = hamiltonian_label_circuit(h, true, 0.0)?;
    if extra_layers {
        let r = h.n() + 1;
        for _ in 0..2 {
            for axis in [PauliAxis::X, PauliAxis::Z] {
                for j in 1..=h.n() {
                    c.push_new_param(PauliString::new(vec![(j, axis), (r, PauliAxis::X)])?, 1.0)?;
                }
            }
        }
    }
    Ok(c)
}

/// SGD over random product states labeled by `sign⟨H⟩`, one step per
/// training state (drawn with replacement).
pub fn run_hamiltonian(cfg: &HamiltonianConfig, sink: &mut MetricsSink<'_>) -> Result<HamiltonianReport> {
    let start = Instant::now();
    let mut task = seeded_rng(cfg.seed, STREAM_TASK);
    let h = match &cfg.graph {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            IsingHamiltonian::parse_edge_list(cfg.n, &text)?
        }
        None => random_regular_graph(cfg.n, cfg.degree, &mut task)?.with_random_couplings(&mut task)?,
    };
    let (train, skip_a) = labeled_product_states(&h, cfg.train_states, &mut task)?;
    let (test, skip_b) = labeled_product_states(&h, cfg.test_states, &mut seeded_rng(cfg.seed, STREAM_TEST))?;
    let circuit = hamiltonian_trainee(&h, cfg.extra_layers)?;
    let init = random_params(
        circuit.num_params(),
        cfg.init_range,
        &mut seeded_rng(cfg.seed, STREAM_INIT),
    );
    let initial_test_accuracy = 1.0 - categorical_error_states(&circuit, &init, &test)?;
    let tc = TrainConfig {
        learning_rate: cfg.learning_rate,
        gradient_mode: gradient_mode(cfg.shots),
        shots: cfg.shots,
        max_steps: cfg.max_steps,
        seed: cfg.seed,
        max_step: cfg.max_step,
        ..Default::default()
    };
    let outcome = train_on_set(&circuit, &init, &train, &tc, &mut |r, _| {
        sink(r);
        ControlFlow::Continue(())
    })?;
    Ok(HamiltonianReport {
        edges: h.edges().to_vec(),
        num_params: circuit.num_params(),
        initial_test_accuracy,
        test_accuracy: 1.0 - categorical_error_states(&circuit, &outcome.params, &test)?,
        train_accuracy: 1.0 - categorical_error_states(&circuit, &outcome.params, &train)?,
        skipped_ambiguous: skip_a + skip_b,
        wall_seconds: start.elapsed().as_secs_f64(),
        params: outcome.params,
        hamiltonian: h,
        circuit,
        trace: outcome.trace,
    })
}

/// Which label family a representation check compiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReprKind {
    Parity,
    Majority,
    TruthTable,
}

impl std::str::FromStr for ReprKind {
    type Err = QnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parity" => Ok(ReprKind::Parity),
            "majority" => Ok(ReprKind::Majority),
            "truth-table" | "table" => Ok(ReprKind::TruthTable),
            _ => Err(invalid(format!("unknown label kind `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReprConfig {
    pub n: usize,
    pub kind: ReprKind,
    pub subset: Option<Vec<usize>>,
    pub beta: Option<f64>,
    /// Truth table in hex; random (seeded) when absent.
    pub table: Option<String>,
    pub seed: u64,
}

impl Default for ReprConfig {
    fn default() -> Self {
        Self {
            n: 4,
            kind: ReprKind::Parity,
            subset: None,
            beta: None,
            table: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReprReport {
    pub kind: ReprKind,
    pub n: usize,
    pub description: String,
    pub inputs_checked: usize,
    /// Largest `|prediction − l(z)|` (parity, tables) or `|prediction − sin(β Σ a_j z_j)|` (majority).
    pub max_deviation: f64,
    pub categorical_error: f64,
    pub gates: usize,
}

impl ReprReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= 1e-10 && self.categorical_error == 0.0
    }
}

/// Compiles the exact circuit for a label and checks it on every input.
pub fn repr_check(cfg: &ReprConfig) -> Result<ReprReport> {
    let n = cfg.n;
    if n == 0 || n > 10 {
        return Err(invalid("representation checks need 1 <= n <= 10"));
    }
    let mut rng = seeded_rng(cfg.seed, STREAM_TASK);
    let (circuit, description, expected): (Circuit, String, Box<dyn Fn(&[i8]) -> Result<(f64, i8)>>) = match cfg.kind {
        ReprKind::Parity => {
            let s = match &cfg.subset {
                Some(m) => SubsetSpec::new(n, m.clone())?,
                None => SubsetSpec::full(n),
            };
            let c = subset_parity_circuit(&s, false)?;
            let d = format!("parity of {:?}", s.members());
            (
                c,
                d,
                Box::new(move |z| {
                    let l = parity_label(&s, z);
                    Ok((l as f64, l))
                }),
            )
        }
        ReprKind::Majority => {
            let s = match &cfg.subset {
                Some(m) => SubsetSpec::new(n, m.clone())?,
                None => SubsetSpec::full(n),
            };
            let beta = cfg.beta.unwrap_or_else(|| majority_beta(n));
            let c = subset_majority_circuit(&s, beta, false)?;
            let d = format!("majority of {:?} at beta {beta}", s.members());
            (
                c,
                d,
                Box::new(move |z| {
                    let sum: f64 = s.members().iter().map(|&j| z[j - 1] as f64).sum();
                    Ok(((beta * sum).sin(), majority_label(&s, z)?))
                }),
            )
        }
        ReprKind::TruthTable => {
            let t = match &cfg.table {
                Some(hex) => BooleanTruthTable::from_hex(n, hex)?,
                None => BooleanTruthTable::random(n, &mut rng)?,
            };
            let rm = reed_muller_transform(&t);
            let c = compile_label_circuit(&rm)?;
            let d = format!("truth table 0x{} ({} monomials)", t.to_hex(), rm.monomials().len());
            (
                c,
                d,
                Box::new(move |z| {
                    let l = crate::compiler::truth_table_label(&t, z)?;
                    Ok((l as f64, l))
                }),
            )
        }
    };
    let mut max_deviation: f64 = 0.0;
    let mut wrong = 0usize;
    for x in 0..1usize << n {
        let z = crate::sim::index_to_bits(x, n);
        let input = circuit.basis_input(&z)?;
        let p = circuit.predict(&[], &input)?;
        let (value, label) = expected(&z)?;
        max_deviation = max_deviation.max((p - value).abs());
        if crate::trainer::predicted_label(p) != label {
            wrong += 1;
        }
    }
    Ok(ReprReport {
        kind: cfg.kind.clone(),
        n,
        description,
        inputs_checked: 1 << n,
        max_deviation,
        categorical_error: wrong as f64 / (1usize << n) as f64,
        gates: circuit.gates().len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub circuits: usize,
    pub max_data_qubits: usize,
    pub max_gates: usize,
    pub fd_epsilon: f64,
    pub seed: u64,
    /// Also place random controls on some gates.
    pub with_controls: bool,
    /// When positive, also estimates each component from this many
    /// Hadamard-test shots (reported, not thresholded).
    pub shots: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            circuits: 100,
            max_data_qubits: 7,
            max_gates: 50,
            fd_epsilon: 1e-4,
            seed: 0,
            with_controls: true,
            shots: 0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct GradCheckReport {
    pub circuits: usize,
    pub components: usize,
    pub max_analytic_vs_fd: f64,
    pub max_analytic_vs_hadamard: f64,
    pub max_component: f64,
    /// Largest deviation of the shot-based estimate, when requested.
    pub max_analytic_vs_sampled: Option<f64>,
}

impl GradCheckReport {
    pub const FD_TOLERANCE: f64 = 1e-6;
    pub const HADAMARD_TOLERANCE: f64 = 1e-10;

    pub fn passed(&self) -> bool {
        self.max_analytic_vs_fd <= Self::FD_TOLERANCE
            && self.max_analytic_vs_hadamard <= Self::HADAMARD_TOLERANCE
            && self.max_component <= 2.0
    }
}

/// Random circuit with random input state and label for gradient checks.
pub fn random_gradient_case<R: Rng + ?Sized>(
    cfg: &GradCheckConfig,
    rng: &mut R,
) -> Result<(Circuit, Vec<f64>, QuantumState, f64)> {
    let n = rng.gen_range(1..=cfg.max_data_qubits);
    let len = rng.gen_range(1..=cfg.max_gates);
    let base = build_random_circuit(n, len, &GateKind::ALL, Placement::Anywhere, rng)?;
    let c = if cfg.with_controls {
        let mut c = Circuit::new(n + 1, base.num_params())?;
        for g in base.gates() {
            let free: Vec<usize> = (1..=n + 1).filter(|&q| g.pauli().axis_on(q).is_none()).collect();
            let controls = if !free.is_empty() && rng.gen_bool(0.25) {
                vec![free[rng.gen_range(0..free.len())]]
            } else {
                vec![]
            };
            c.push(g.clone().with_controls(controls)?)?;
        }
        c
    } else {
        base
    };
    let params = random_params(c.num_params(), (-PI, PI), rng);
    let amps = (0..1usize << (n + 1))
        .map(|_| num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let state = QuantumState::from_unnormalized(amps)?;
    let label = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    Ok((c, params, state, label))
}

/// Compares the analytic gradient with symmetric differences and the exact
/// Hadamard-test value on random circuits.
pub fn grad_check(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = seeded_rng(cfg.seed, STREAM_TASK);
    let mut report = GradCheckReport {
        circuits: cfg.circuits,
        ..Default::default()
    };
    for _ in 0..cfg.circuits {
        let (c, params, state, label) = random_gradient_case(cfg, &mut rng)?;
        let input = Input::State(&state);
        let (_, analytic) = loss_and_gradient(&c, &params, input, label)?;
        let fd = grad_finite_difference_input(&c, &params, input, label, cfg.fd_epsilon)?;
        for k in 0..c.num_params() {
            let h = grad_hadamard_test(&c, &params, input, label, k, 0, &mut rng)?;
            let a = analytic.components()[k];
            report.max_analytic_vs_fd = report.max_analytic_vs_fd.max((a - fd.components()[k]).abs());
            report.max_analytic_vs_hadamard = report.max_analytic_vs_hadamard.max((a - h.gradient).abs());
            report.max_component = report.max_component.max(a.abs());
            report.components += 1;
            if cfg.shots > 0 {
                let est = grad_hadamard_test(&c, &params, input, label, k, cfg.shots, &mut rng)?;
                let worst = report
                    .max_analytic_vs_sampled
                    .unwrap_or(0.0)
                    .max((a - est.gradient).abs());
                report.max_analytic_vs_sampled = Some(worst);
            }
        }
    }
    Ok(report)
}

/// `max_x |⟨Y⟩ − Σ_x |ψ_x|² sin(2β E(x))|` over `count` random product states.
pub fn hamiltonian_identity_deviation<R: Rng + ?Sized>(
    h: &IsingHamiltonian,
    beta: f64,
    count: usize,
    rng: &mut R,
) -> Result<f64> {
    let c = hamiltonian_label_circuit(h, false, beta)?;
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let p = random_product_state(h.n(), rng)?;
        let pred = c.predict(&[], &p.state)?;
        let oracle: f64 = p
            .state
            .amplitudes()
            .iter()
            .enumerate()
            .take(1 << h.n())
            .map(|(x, a)| a.norm_sqr() * (2.0 * beta * h.basis_energy(x)).sin())
            .sum();
        worst = worst.max((pred - oracle).abs());
    }
    Ok(worst)
}

/// Stochastic training without an observer.
pub fn train_dataset(c: &Circuit, init: &[f64], ds: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_stochastic(c, init, ds, cfg, &mut crate::trainer::keep_going)
}
