//! Stochastic descent on the sample loss and full descent on the batch risk.

use std::collections::VecDeque;
use std::io::Write;
use std::ops::ControlFlow;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::data::{LabeledDataset, LabeledSample, LabeledStates};
use crate::error::{invalid, QnnError, Result};
use crate::objective::{
    batch_risk_gradient, grad_finite_difference_input, grad_hadamard_test, loss, loss_and_gradient, predict,
    GradientVector, Input,
};
use crate::sim::{sample_pauli_measurement, sample_successes};

/// How each step's gradient (and, for shots, its loss) is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    #[default]
    Analytic,
    FiniteDifference,
    HadamardShots,
}

impl std::str::FromStr for GradientMode {
    type Err = QnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(GradientMode::Analytic),
            "finite-difference" | "fd" => Ok(GradientMode::FiniteDifference),
            "hadamard-shots" | "hadamard" => Ok(GradientMode::HadamardShots),
            _ => Err(invalid(format!("unknown gradient mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    pub gradient_mode: GradientMode,
    /// Shots per estimate in `HadamardShots` mode; 0 uses exact probabilities.
    pub shots: u64,
    pub fd_epsilon: f64,
    pub seed: u64,
    pub gradient_floor: f64,
    pub label_noise_rate: f64,
    /// Trailing window for the running categorical error.
    pub error_window: usize,
    pub record_params: bool,
    /// Optional bound on the Euclidean length of one update.
    pub max_step: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            max_steps: 1000,
            gradient_mode: GradientMode::Analytic,
            shots: 0,
            fd_epsilon: 1e-4,
            seed: 0,
            gradient_floor: 1e-12,
            label_noise_rate: 0.0,
            error_window: 100,
            record_params: false,
            max_step: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        if !(self.fd_epsilon > 0.0) {
            return Err(invalid("finite-difference epsilon must be positive"));
        }
        if !(0.0..1.0).contains(&self.label_noise_rate) {
            return Err(invalid("label noise rate must lie in [0, 1)"));
        }
        if !(self.gradient_floor >= 0.0) {
            return Err(invalid("gradient floor must be non-negative"));
        }
        if self.max_step.is_some_and(|m| !(m > 0.0)) {
            return Err(invalid("max step must be positive"));
        }
        if self.error_window == 0 {
            return Err(invalid("error window must be at least 1"));
        }
        Ok(())
    }
}

/// One row of a training trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub step: usize,
    /// Pre-update sample loss (stochastic) or batch risk (batch).
    pub loss_or_risk: f64,
    pub categorical_error: Option<f64>,
    pub grad_norm: f64,
    pub stalled: bool,
    #[serde(skip)]
    pub params: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: Vec<f64>,
    pub trace: Vec<MetricsRecord>,
}

/// Result of one update.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub params: Vec<f64>,
    pub loss: f64,
    pub prediction: f64,
    pub grad_norm: f64,
    pub stalled: bool,
}

/// `θ − r (loss/|g|²) g`, or no move when `|g|²` is below the floor. With
/// `max_step`, longer updates are shortened to that length.
pub fn update_rule(
    params: &[f64],
    loss: f64,
    grad: &GradientVector,
    rate: f64,
    floor: f64,
    max_step: Option<f64>,
) -> (Vec<f64>, bool) {
    let norm_sqr = grad.norm_sqr();
    if norm_sqr < floor || norm_sqr == 0.0 {
        return (params.to_vec(), true);
    }
    let mut factor = rate * loss / norm_sqr;
    if let Some(cap) = max_step {
        factor = factor.min(cap / norm_sqr.sqrt());
    }
    let next = params
        .iter()
        .zip(grad.components())
        .map(|(p, g)| p - factor * g)
        .collect();
    (next, false)
}

fn loss_and_grad_for_mode<R: Rng + ?Sized>(
    c: &Circuit,
    params: &[f64],
    input: Input<'_>,
    label: f64,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(f64, f64, GradientVector)> {
    match cfg.gradient_mode {
        GradientMode::Analytic => {
            let (l, g) = loss_and_gradient(c, params, input, label)?;
            Ok((l, label * (1.0 - l), g))
        }
        GradientMode::FiniteDifference => {
            let l = loss(c, params, input, label)?;
            let g = grad_finite_difference_input(c, params, input, label, cfg.fd_epsilon)?;
            Ok((l, label * (1.0 - l), g))
        }
        GradientMode::HadamardShots => {
            let exact_pred = predict(c, params, input)?;
            let pred = if cfg.shots == 0 {
                exact_pred
            } else {
                let mut out = match input {
                    Input::Bits(bits) => c.basis_input(bits)?,
                    Input::State(s) => s.clone(),
                };
                c.apply(params, &mut out)?;
                sample_pauli_measurement(&out, &c.readout_observable(), cfg.shots, rng)?.mean
            };
            let grad = (0..c.num_params())
                .map(|k| grad_hadamard_test(c, params, input, label, k, cfg.shots, rng).map(|h| h.gradient))
                .collect::<Result<Vec<_>>>()?;
            Ok((1.0 - label * pred, pred, GradientVector(grad)))
        }
    }
}

/// One descent step on a labeled input.
pub fn sgd_step_input<R: Rng + ?Sized>(
    c: &Circuit,
    params: &[f64],
    input: Input<'_>,
    label: i8,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<StepOutcome> {
    let (l, prediction, grad) = loss_and_grad_for_mode(c, params, input, label as f64, cfg, rng)?;
    let (next, stalled) = update_rule(params, l, &grad, cfg.learning_rate, cfg.gradient_floor, cfg.max_step);
    Ok(StepOutcome {
        params: next,
        loss: l,
        prediction,
        grad_norm: grad.norm_sqr().sqrt(),
        stalled,
    })
}

pub fn sgd_step<R: Rng + ?Sized>(
    c: &Circuit,
    params: &[f64],
    s: &LabeledSample,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<StepOutcome> {
    sgd_step_input(c, params, Input::Bits(&s.bits), s.label, cfg, rng)
}

/// Flips each copy of each sample independently with probability `rate`.
pub fn inject_label_noise<R: Rng + ?Sized>(ds: &LabeledDataset, rate: f64, rng: &mut R) -> Result<LabeledDataset> {
    if !(0.0..1.0).contains(&rate) {
        return Err(invalid("label noise rate must lie in [0, 1)"));
    }
    if rate == 0.0 {
        return Ok(ds.clone());
    }
    let mut out = Vec::with_capacity(ds.len());
    for s in ds.samples() {
        let flipped = sample_successes(rate, s.multiplicity as u64, rng) as u32;
        if flipped < s.multiplicity {
            out.push(LabeledSample::new(s.bits.clone(), s.label, s.multiplicity - flipped)?);
        }
        if flipped > 0 {
            out.push(LabeledSample::new(s.bits.clone(), -s.label, flipped)?);
        }
    }
    LabeledDataset::from_samples(ds.n(), out)
}

/// Prediction sign with ties resolved to `+1`.
pub fn predicted_label(prediction: f64) -> i8 {
    if prediction >= 0.0 {
        1
    } else {
        -1
    }
}

/// Multiplicity-weighted fraction of misclassified samples.
pub fn categorical_error(c: &Circuit, params: &[f64], ds: &LabeledDataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(QnnError::EmptyDataset);
    }
    let mut wrong = 0u64;
    for s in ds.samples() {
        if predicted_label(c.predict_bits(params, &s.bits)?) != s.label {
            wrong += s.multiplicity as u64;
        }
    }
    Ok(wrong as f64 / ds.total_multiplicity() as f64)
}

pub fn categorical_error_states(c: &Circuit, params: &[f64], set: &LabeledStates) -> Result<f64> {
    if set.is_empty() {
        return Err(QnnError::EmptyDataset);
    }
    let mut wrong = 0usize;
    for (state, &label) in set.states.iter().zip(&set.labels) {
        if predicted_label(c.predict(params, state)?) != label {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / set.len() as f64)
}

/// Something the stochastic trainer can draw labeled inputs from.
pub trait TrainingSet {
    fn len(&self) -> usize;
    fn weight(&self, i: usize) -> f64;
    fn input(&self, i: usize) -> Input<'_>;
    fn label(&self, i: usize) -> i8;
}

impl TrainingSet for LabeledDataset {
    fn len(&self) -> usize {
        LabeledDataset::len(self)
    }

    fn weight(&self, i: usize) -> f64 {
        self.samples()[i].multiplicity as f64
    }

    fn input(&self, i: usize) -> Input<'_> {
        Input::Bits(&self.samples()[i].bits)
    }

    fn label(&self, i: usize) -> i8 {
        self.samples()[i].label
    }
}

impl TrainingSet for LabeledStates {
    fn len(&self) -> usize {
        LabeledStates::len(self)
    }

    fn weight(&self, _: usize) -> f64 {
        1.0
    }

    fn input(&self, i: usize) -> Input<'_> {
        Input::State(&self.states[i])
    }

    fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }
}

/// Observers see every record with the post-step parameters and may stop the run.
pub type Observer<'a> = dyn FnMut(&MetricsRecord, &[f64]) -> ControlFlow<()> + 'a;

/// Draws labeled inputs with replacement (probability proportional to
/// multiplicity) and applies [`sgd_step_input`] to each, for up to
/// `cfg.max_steps` steps. Label noise, if configured, must already be in
/// `set`; see [`train_stochastic`] for datasets.
pub fn train_on_set<S: TrainingSet + ?Sized>(
    c: &Circuit,
    init: &[f64],
    set: &S,
    cfg: &TrainConfig,
    observer: &mut Observer<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    c.check_params(init)?;
    if set.len() == 0 {
        return Err(QnnError::EmptyDataset);
    }
    let weights: Vec<f64> = (0..set.len()).map(|i| set.weight(i)).collect();
    let picker = WeightedIndex::new(&weights).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init.to_vec();
    let mut trace = Vec::with_capacity(cfg.max_steps.min(1 << 20));
    let mut window = VecDeque::with_capacity(cfg.error_window);
    let mut wrong_in_window = 0usize;
    for step in 1..=cfg.max_steps {
        let i = picker.sample(&mut rng);
        let label = set.label(i);
        let out = sgd_step_input(c, &params, set.input(i), label, cfg, &mut rng)?;
        let wrong = predicted_label(out.prediction) != label;
        window.push_back(wrong);
        wrong_in_window += wrong as usize;
        if window.len() > cfg.error_window {
            wrong_in_window -= window.pop_front().unwrap() as usize;
        }
        params = out.params;
        let record = MetricsRecord {
            step,
            loss_or_risk: out.loss,
            categorical_error: Some(wrong_in_window as f64 / window.len() as f64),
            grad_norm: out.grad_norm,
            stalled: out.stalled,
            params: cfg.record_params.then(|| params.clone()),
        };
        let flow = observer(&record, &params);
        trace.push(record);
        if flow.is_break() {
            break;
        }
    }
    Ok(TrainOutcome { params, trace })
}

/// Stochastic training on a classical dataset. Label noise at
/// `cfg.label_noise_rate` is injected once up front from a stream seeded by
/// `cfg.seed`.
pub fn train_stochastic(
    c: &Circuit,
    init: &[f64],
    ds: &LabeledDataset,
    cfg: &TrainConfig,
    observer: &mut Observer<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(QnnError::EmptyDataset);
    }
    if cfg.label_noise_rate > 0.0 {
        let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x006e_6f69_7365);
        let noisy = inject_label_noise(ds, cfg.label_noise_rate, &mut noise_rng)?;
        train_on_set(c, init, &noisy, cfg, observer)
    } else {
        train_on_set(c, init, ds, cfg, observer)
    }
}

/// Observer that never stops.
pub fn keep_going(_: &MetricsRecord, _: &[f64]) -> ControlFlow<()> {
    ControlFlow::Continue(())
}

/// Gradient descent `θ ← θ − r ∇R` on the batch risk. A step that would raise
/// the risk is rejected and `r` halved, so the recorded risk never increases.
/// The run stops early once `r` falls below `1e-12` or the gradient
/// vanishes. `eval` supplies the categorical-error column when given.
pub fn train_batch_risk(
    c: &Circuit,
    init: &[f64],
    plus: &crate::sim::QuantumState,
    minus: &crate::sim::QuantumState,
    cfg: &TrainConfig,
    eval: Option<&dyn Fn(&[f64]) -> Result<f64>>,
    observer: &mut Observer<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    c.check_params(init)?;
    c.check_state(plus)?;
    c.check_state(minus)?;
    let mut params = init.to_vec();
    let mut rate = cfg.learning_rate;
    let (mut risk, mut grad) = batch_risk_gradient(c, &params, plus, minus)?;
    let mut trace = Vec::new();
    for step in 1..=cfg.max_steps {
        let norm_sqr = grad.norm_sqr();
        let stalled = norm_sqr < cfg.gradient_floor || norm_sqr == 0.0 || rate < 1e-12;
        if !stalled {
            let candidate: Vec<f64> = params
                .iter()
                .zip(grad.components())
                .map(|(p, g)| p - rate * g)
                .collect();
            let (r2, g2) = batch_risk_gradient(c, &candidate, plus, minus)?;
            if r2 <= risk {
                params = candidate;
                risk = r2;
                grad = g2;
            } else {
                rate /= 2.0;
            }
        }
        let record = MetricsRecord {
            step,
            loss_or_risk: risk,
            categorical_error: eval.map(|f| f(&params)).transpose()?,
            grad_norm: grad.norm_sqr().sqrt(),
            stalled,
            params: cfg.record_params.then(|| params.clone()),
        };
        let flow = observer(&record, &params);
        trace.push(record);
        if flow.is_break() || stalled {
            break;
        }
    }
    Ok(TrainOutcome { params, trace })
}

#[derive(Serialize)]
struct CsvRow {
    step: usize,
    loss_or_risk: f64,
    categorical_error: Option<f64>,
    grad_norm: f64,
    stalled_flag: u8,
}

/// Streams metrics as CSV, flushing after every row.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(out),
        }
    }

    pub fn write(&mut self, r: &MetricsRecord) -> Result<()> {
        self.inner
            .serialize(CsvRow {
                step: r.step,
                loss_or_risk: r.loss_or_risk,
                categorical_error: r.categorical_error,
                grad_norm: r.grad_norm,
                stalled_flag: r.stalled as u8,
            })
            .map_err(|e| invalid(format!("csv: {e}")))?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner.into_inner().map_err(|e| invalid(format!("csv: {e}")))
    }
}
