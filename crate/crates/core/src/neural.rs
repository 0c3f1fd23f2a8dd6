//! Feedforward clusterer, AdamW and the mini-batch training loop.
//!
//! The network maps features to k logits; a row-wise softmax turns them into
//! a [`SoftAssignment`]. Training ascends the logrank objective
//! (`L − λP`) by running AdamW on its negation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, Standardizer};
use crate::error::{Error, Result};
use crate::loss::{objective_from_logits, LossConfig, LossValue, SoftAssignment};
use crate::survival::SurvivalRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation.
    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Input width, hidden widths, then k.
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub hidden_activation: Activation,
    /// Seeds parameter initialization.
    pub seed: u64,
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>, seed: u64) -> Self {
        Self {
            layer_sizes,
            hidden_activation: Activation::Relu,
            seed,
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.hidden_activation = activation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::invalid("network needs an input size and at least one layer"));
        }
        if self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        if self.outputs() < 2 {
            return Err(Error::invalid("output layer must have k >= 2 units"));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().expect("non-empty layer sizes")
    }

    pub fn layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }
}

/// All weights and biases in one flat buffer.
///
/// Layer `l` occupies `out × in` weights (row-major, one row per output unit)
/// followed by `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub spec: NetworkSpec,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    offset: usize,
}

impl LayerShape {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    fn biases(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.inputs * self.outputs;
        start..start + self.outputs
    }
}

fn layer_shapes(spec: &NetworkSpec) -> Vec<LayerShape> {
    let mut offset = 0;
    spec.layer_sizes
        .windows(2)
        .map(|w| {
            let shape = LayerShape {
                inputs: w[0],
                outputs: w[1],
                offset,
            };
            offset += w[1] * (w[0] + 1);
            shape
        })
        .collect()
}

impl NetworkParams {
    /// Uniform `±1/sqrt(fan_in)` initialization for weights and biases.
    pub fn init(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut values = vec![0.0; spec.parameter_count()];
        for shape in layer_shapes(spec) {
            let bound = 1.0 / (shape.inputs as f64).sqrt();
            for v in &mut values[shape.offset..shape.biases().end] {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(Self {
            spec: spec.clone(),
            values,
        })
    }

    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec: spec.clone(),
            values: vec![0.0; spec.parameter_count()],
        })
    }

    pub fn from_flat(spec: &NetworkSpec, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.parameter_count() {
            return Err(Error::invalid(format!(
                "network expects {} parameters, got {}",
                spec.parameter_count(),
                values.len()
            )));
        }
        Ok(Self {
            spec: spec.clone(),
            values,
        })
    }

    pub fn k(&self) -> usize {
        self.spec.outputs()
    }

    /// Mutable weight matrix (row-major, `outputs × inputs`) of layer `l`.
    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let shape = layer_shapes(&self.spec)[l];
        &mut self.values[shape.weights()]
    }

    pub fn biases_mut(&mut self, l: usize) -> &mut [f64] {
        let shape = layer_shapes(&self.spec)[l];
        &mut self.values[shape.biases()]
    }

    /// Reorders the output units so that new output `c` is old output
    /// `order[c]`.
    pub fn permute_outputs(&mut self, order: &[usize]) {
        let shape = *layer_shapes(&self.spec).last().expect("at least one layer");
        assert_eq!(order.len(), shape.outputs);
        let old = self.values.clone();
        for (c, &src) in order.iter().enumerate() {
            let dst_w = shape.offset + c * shape.inputs;
            let src_w = shape.offset + src * shape.inputs;
            self.values[dst_w..dst_w + shape.inputs]
                .copy_from_slice(&old[src_w..src_w + shape.inputs]);
            self.values[shape.biases().start + c] = old[shape.biases().start + src];
        }
    }

    /// Logits for every row of `features`.
    pub fn logits(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(self.forward_cached(features)?.logits)
    }

    fn check_input(&self, features: &FeatureMatrix) -> Result<()> {
        if features.cols() != self.spec.inputs() {
            return Err(Error::invalid(format!(
                "network expects {} features, got {}",
                self.spec.inputs(),
                features.cols()
            )));
        }
        Ok(())
    }

    fn forward_cached(&self, features: &FeatureMatrix) -> Result<ForwardCache> {
        self.check_input(features)?;
        let n = features.rows();
        let shapes = layer_shapes(&self.spec);
        let act = self.spec.hidden_activation;
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(shapes.len());
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(shapes.len());
        let mut current = features.as_slice().to_vec();
        for (l, shape) in shapes.iter().enumerate() {
            let w = &self.values[shape.weights()];
            let b = &self.values[shape.biases()];
            let mut z = vec![0.0; n * shape.outputs];
            for s in 0..n {
                let x = &current[s * shape.inputs..(s + 1) * shape.inputs];
                for o in 0..shape.outputs {
                    let row = &w[o * shape.inputs..(o + 1) * shape.inputs];
                    z[s * shape.outputs + o] =
                        b[o] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
                }
            }
            let next = if l + 1 < shapes.len() {
                z.iter().map(|&v| act.apply(v)).collect()
            } else {
                z.clone()
            };
            inputs.push(std::mem::replace(&mut current, next));
            pre.push(z);
        }
        Ok(ForwardCache {
            n,
            inputs,
            pre,
            logits: current,
        })
    }

    /// Gradient of a scalar with respect to every parameter, given its
    /// gradient with respect to the logits.
    fn backward(&self, cache: &ForwardCache, grad_logits: &[f64]) -> Vec<f64> {
        let shapes = layer_shapes(&self.spec);
        let act = self.spec.hidden_activation;
        let n = cache.n;
        let mut grad = vec![0.0; self.values.len()];
        let mut delta = grad_logits.to_vec();
        for l in (0..shapes.len()).rev() {
            let shape = shapes[l];
            let input = &cache.inputs[l];
            let w = &self.values[shape.weights()];
            {
                let (gw, gb) = grad[shape.offset..shape.biases().end]
                    .split_at_mut(shape.inputs * shape.outputs);
                for s in 0..n {
                    let x = &input[s * shape.inputs..(s + 1) * shape.inputs];
                    for o in 0..shape.outputs {
                        let d = delta[s * shape.outputs + o];
                        if d == 0.0 {
                            continue;
                        }
                        gb[o] += d;
                        let row = &mut gw[o * shape.inputs..(o + 1) * shape.inputs];
                        for (g, xi) in row.iter_mut().zip(x) {
                            *g += d * xi;
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            let prev_pre = &cache.pre[l - 1];
            let mut next = vec![0.0; n * shape.inputs];
            for s in 0..n {
                for o in 0..shape.outputs {
                    let d = delta[s * shape.outputs + o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &w[o * shape.inputs..(o + 1) * shape.inputs];
                    for (i, wi) in row.iter().enumerate() {
                        next[s * shape.inputs + i] += d * wi;
                    }
                }
            }
            for (v, z) in next.iter_mut().zip(prev_pre) {
                *v *= act.derivative(*z);
            }
            delta = next;
        }
        grad
    }
}

struct ForwardCache {
    n: usize,
    /// Input to each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each layer.
    pre: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

/// Softmax class probabilities for every subject.
pub fn forward(params: &NetworkParams, features: &FeatureMatrix) -> Result<SoftAssignment> {
    let logits = params.logits(features)?;
    SoftAssignment::from_logits(features.rows(), params.k(), &logits)
}

/// Hard cluster labels: argmax of [`forward`], ties to the lowest index.
pub fn predict_labels(params: &NetworkParams, features: &FeatureMatrix) -> Result<Vec<usize>> {
    Ok(forward(params, features)?.argmax())
}

/// Objective on the whole set and its gradient with respect to the
/// parameters (gradient of `total`, i.e. the ascent direction).
pub fn objective_and_parameter_gradient(
    params: &NetworkParams,
    features: &FeatureMatrix,
    records: &[SurvivalRecord],
    loss: &LossConfig,
) -> Result<(LossValue, Vec<f64>)> {
    if features.rows() != records.len() {
        return Err(Error::invalid("feature rows and records differ in length"));
    }
    let cache = params.forward_cached(features)?;
    let obj = objective_from_logits(cache.n, params.k(), &cache.logits, records, loss)?;
    let grad = params.backward(&cache, &obj.grad_logits);
    Ok((obj.value, grad))
}

/// Objective of the network's assignment on a full dataset.
pub fn evaluate_objective(
    params: &NetworkParams,
    features: &FeatureMatrix,
    records: &[SurvivalRecord],
    loss: &LossConfig,
) -> Result<LossValue> {
    let soft = forward(params, features)?;
    crate::loss::total_objective(&soft, records, loss)
}

// ── Optimizer ───────────────────────────────────────────────────────────────

/// Adam with decoupled weight decay: each step first shrinks every
/// parameter by `1 − lr·weight_decay`, then applies the bias-corrected
/// adaptive update.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: i32,
}

impl AdamW {
    pub fn new(parameters: usize, learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay,
            first: vec![0.0; parameters],
            second: vec![0.0; parameters],
            steps: 0,
        }
    }

    /// One descent step on `params` along `grad` (a gradient to minimize).
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.first.len());
        assert_eq!(grad.len(), params.len());
        self.steps += 1;
        let decay = 1.0 - self.learning_rate * self.weight_decay;
        let bc1 = 1.0 - self.beta1.powi(self.steps);
        let bc2_sqrt = (1.0 - self.beta2.powi(self.steps)).sqrt();
        let step_size = self.learning_rate / bc1;
        for i in 0..params.len() {
            let g = grad[i];
            self.first[i] = self.beta1 * self.first[i] + (1.0 - self.beta1) * g;
            self.second[i] = self.beta2 * self.second[i] + (1.0 - self.beta2) * g * g;
            params[i] *= decay;
            let denom = self.second[i].sqrt() / bc2_sqrt + self.epsilon;
            params[i] -= step_size * self.first[i] / denom;
        }
    }
}

// ── Training ────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    /// Drives mini-batch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 32,
            weight_decay: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be finite and >= 0"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid("batch_size must be at least 2"));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::invalid("weight_decay must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Full-dataset objective after an epoch (epoch 0 is before training).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub statistic: f64,
    pub penalty: f64,
}

impl EpochRecord {
    fn from_value(epoch: usize, v: &LossValue) -> Self {
        Self {
            epoch,
            objective: v.total,
            statistic: v.statistic,
            penalty: v.penalty,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub initial: EpochRecord,
    /// One entry per epoch.
    pub history: Vec<EpochRecord>,
    /// Mini-batches skipped for lack of events or a singular covariance.
    pub skipped_batches: usize,
}

/// Splits a shuffled order into mini-batches. A short trailing batch is kept
/// only with at least two subjects and one event, otherwise it joins the
/// previous batch.
pub fn plan_batches(
    order: &[usize],
    batch_size: usize,
    records: &[SurvivalRecord],
) -> Vec<Vec<usize>> {
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 {
        let last = batches.last().expect("non-empty");
        let keep = last.len() == batch_size
            || (last.len() >= 2 && last.iter().any(|&i| records[i].event));
        if !keep {
            let tail = batches.pop().expect("non-empty");
            batches.last_mut().expect("non-empty").extend(tail);
        }
    }
    // subject order inside a batch does not change the objective; sorting
    // makes the floating-point summation order canonical
    batches.iter_mut().for_each(|b| b.sort_unstable());
    batches
}

/// Trains a fresh network by mini-batch AdamW ascent on the logrank
/// objective. Deterministic for a given spec, config and data.
pub fn train(
    spec: &NetworkSpec,
    records: &[SurvivalRecord],
    features: &FeatureMatrix,
    config: &TrainConfig,
    loss: &LossConfig,
) -> Result<TrainOutcome> {
    let params = NetworkParams::init(spec)?;
    train_from(params, records, features, config, loss)
}

/// As [`train`] but starting from the given parameters.
pub fn train_from(
    mut params: NetworkParams,
    records: &[SurvivalRecord],
    features: &FeatureMatrix,
    config: &TrainConfig,
    loss: &LossConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    loss.validate(params.k())?;
    crate::survival::validate_records(records)?;
    if features.rows() != records.len() {
        return Err(Error::invalid(format!(
            "{} feature rows but {} records",
            features.rows(),
            records.len()
        )));
    }
    if records.len() < config.batch_size {
        return Err(Error::invalid(format!(
            "need at least batch_size={} subjects, got {}",
            config.batch_size,
            records.len()
        )));
    }
    if !records.iter().any(|r| r.event) {
        return Err(Error::no_events());
    }

    let initial = EpochRecord::from_value(0, &evaluate_objective(&params, features, records, loss)?);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = AdamW::new(params.values.len(), config.learning_rate, config.weight_decay);
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut skipped = 0;

    for epoch in 1..=config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng);
        for batch in plan_batches(&order, config.batch_size, records) {
            let batch_features = features.select(&batch);
            let batch_records: Vec<SurvivalRecord> = batch.iter().map(|&i| records[i]).collect();
            let (value, grad) = match objective_and_parameter_gradient(
                &params,
                &batch_features,
                &batch_records,
                loss,
            ) {
                Ok(r) => r,
                Err(Error::SingularVariance) => {
                    skipped += 1;
                    log::debug!("epoch {epoch}: skipped batch with singular covariance");
                    continue;
                }
                Err(e) => return Err(e),
            };
            if value.events == 0 {
                skipped += 1;
                log::debug!("epoch {epoch}: skipped batch without events");
                continue;
            }
            let descent: Vec<f64> = grad.iter().map(|g| -g).collect();
            optimizer.step(&mut params.values, &descent);
        }
        let value = evaluate_objective(&params, features, records, loss)?;
        log::debug!(
            "epoch {epoch}: objective {:.4} (statistic {:.4}, penalty {:.4})",
            value.total,
            value.statistic,
            value.penalty
        );
        history.push(EpochRecord::from_value(epoch, &value));
    }
    if skipped > 0 {
        log::info!("skipped {skipped} mini-batches without usable logrank information");
    }
    Ok(TrainOutcome {
        params,
        initial,
        history,
        skipped_batches: skipped,
    })
}

// ── Checkpoints ─────────────────────────────────────────────────────────────

pub const CHECKPOINT_FORMAT: &str = "survclust-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized model: architecture, flat parameters, the seed that produced
/// them and the feature standardization fitted on the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub spec: NetworkSpec,
    pub seed: u64,
    pub standardizer: Option<Standardizer>,
    pub parameters: Vec<f64>,
    #[serde(default)]
    pub config_hash: Option<String>,
}

impl Checkpoint {
    pub fn new(params: &NetworkParams, seed: u64, standardizer: Option<Standardizer>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            spec: params.spec.clone(),
            seed,
            standardizer,
            parameters: params.values.clone(),
            config_hash: None,
        }
    }

    pub fn params(&self) -> Result<NetworkParams> {
        NetworkParams::from_flat(&self.spec, self.parameters.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Data(format!("not a checkpoint: format `{}`", ckpt.format)));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        ckpt.params()?;
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data(n: usize) -> (FeatureMatrix, Vec<SurvivalRecord>) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let records = rows
            .iter()
            .map(|r| {
                let t = (1.0 + r[0]).exp() * rng.random_range(0.1..1.0);
                SurvivalRecord::new(t, rng.random_bool(0.8)).unwrap()
            })
            .collect();
        (FeatureMatrix::from_rows(&rows).unwrap(), records)
    }

    #[test]
    fn zero_network_is_uniform() {
        let spec = NetworkSpec::new(vec![3, 4, 3], 0);
        let p = NetworkParams::zeros(&spec).unwrap();
        let (x, _) = toy_data(5);
        let s = forward(&p, &x).unwrap();
        assert!(s.as_slice().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(predict_labels(&p, &x).unwrap(), vec![0; 5]);
    }

    #[test]
    fn single_linear_layer_is_monotone() {
        let spec = NetworkSpec::new(vec![1, 2], 0);
        let mut p = NetworkParams::zeros(&spec).unwrap();
        p.weights_mut(0).copy_from_slice(&[1.0, -1.0]);
        let x = FeatureMatrix::from_rows(&[vec![-1.0], vec![0.0], vec![2.0]]).unwrap();
        let s = forward(&p, &x).unwrap();
        let col0: Vec<f64> = s.rows().map(|r| r[0]).collect();
        assert!(col0.windows(2).all(|w| w[0] < w[1]));
        assert!((col0[0] - 1.0 / (1.0 + 2f64.exp())).abs() < 1e-15);
    }

    #[test]
    fn forward_is_deterministic() {
        let spec = NetworkSpec::new(vec![3, 8, 3], 42);
        let (x, _) = toy_data(10);
        let a = forward(&NetworkParams::init(&spec).unwrap(), &x).unwrap();
        let b = forward(&NetworkParams::init(&spec).unwrap(), &x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_errors() {
        assert!(NetworkSpec::new(vec![3], 0).validate().is_err());
        assert!(NetworkSpec::new(vec![3, 1], 0).validate().is_err());
        assert!(NetworkSpec::new(vec![3, 0, 2], 0).validate().is_err());
        let p = NetworkParams::zeros(&NetworkSpec::new(vec![2, 3], 0)).unwrap();
        let x = FeatureMatrix::zeros(4, 3);
        assert!(matches!(forward(&p, &x), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn adamw_decay_is_decoupled() {
        let mut opt = AdamW::new(2, 0.1, 0.5);
        let mut p = vec![2.0, -4.0];
        opt.step(&mut p, &[0.0, 0.0]);
        assert_eq!(p, vec![2.0 * 0.95, -4.0 * 0.95]);
    }

    #[test]
    fn adamw_first_step_moves_by_learning_rate() {
        let mut opt = AdamW::new(1, 0.01, 0.0);
        let mut p = vec![1.0];
        opt.step(&mut p, &[3.0]);
        assert!((p[0] - (1.0 - 0.01 * 3.0 / (3.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_leaves_params_bitwise() {
        let (x, r) = toy_data(40);
        let spec = NetworkSpec::new(vec![3, 6, 3], 3);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            batch_size: 8,
            weight_decay: 0.3,
            seed: 1,
        };
        let out = train(&spec, &r, &x, &cfg, &LossConfig::default()).unwrap();
        assert_eq!(out.params, NetworkParams::init(&spec).unwrap());
        assert_eq!(out.history.len(), 3);
    }

    #[test]
    fn training_is_deterministic() {
        let (x, r) = toy_data(60);
        let spec = NetworkSpec::new(vec![3, 5, 2], 9);
        let cfg = TrainConfig {
            epochs: 4,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let a = train(&spec, &r, &x, &cfg, &LossConfig::default()).unwrap();
        let b = train(&spec, &r, &x, &cfg, &LossConfig::default()).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn full_batch_equals_manual_loop() {
        let (x, r) = toy_data(30);
        let spec = NetworkSpec::new(vec![3, 4, 3], 5);
        let loss = LossConfig::default();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 30,
            ..TrainConfig::default()
        };
        let trained = train(&spec, &r, &x, &cfg, &loss).unwrap();

        let mut p = NetworkParams::init(&spec).unwrap();
        let mut opt = AdamW::new(p.values.len(), cfg.learning_rate, cfg.weight_decay);
        for _ in 0..3 {
            let (_, g) = objective_and_parameter_gradient(&p, &x, &r, &loss).unwrap();
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            opt.step(&mut p.values, &neg);
        }
        assert_eq!(trained.params, p);
    }

    #[test]
    fn all_censored_is_rejected() {
        let (x, r) = toy_data(10);
        let r: Vec<_> = r.iter().map(|s| SurvivalRecord::censored(s.time)).collect();
        let spec = NetworkSpec::new(vec![3, 2], 0);
        let cfg = TrainConfig {
            batch_size: 4,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&spec, &r, &x, &cfg, &LossConfig::default()),
            Err(Error::NoEvents { .. })
        ));
    }

    #[test]
    fn trailing_batch_folding() {
        let recs: Vec<SurvivalRecord> = (0..7)
            .map(|i| SurvivalRecord::new(i as f64, i != 6).unwrap())
            .collect();
        let order: Vec<usize> = (0..7).collect();
        // trailing [6] has a single censored subject -> folded
        let b = plan_batches(&order, 3, &recs);
        assert_eq!(b, vec![vec![0, 1, 2], vec![3, 4, 5, 6]]);
        // trailing [4, 5] has an event -> kept
        let b = plan_batches(&order[..6], 4, &recs);
        assert_eq!(b, vec![vec![0, 1, 2, 3], vec![4, 5]]);
    }

    #[test]
    fn permute_outputs_reorders_probabilities() {
        let spec = NetworkSpec::new(vec![3, 4, 3], 8);
        let p = NetworkParams::init(&spec).unwrap();
        let (x, _) = toy_data(6);
        let before = forward(&p, &x).unwrap();
        let mut q = p.clone();
        q.permute_outputs(&[2, 0, 1]);
        let after = forward(&q, &x).unwrap();
        let expected = before.reorder_columns(&[2, 0, 1]);
        for (a, b) in after.as_slice().iter().zip(expected.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let spec = NetworkSpec::new(vec![3, 16, 3], 77).with_activation(Activation::Tanh);
        let p = NetworkParams::init(&spec).unwrap();
        let ckpt = Checkpoint::new(&p, 77, None);
        let back = Checkpoint::from_json(&ckpt.to_json().unwrap()).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.params().unwrap(), p);
        assert!(Checkpoint::from_json("{\"format\":\"x\"}").is_err());
    }
}
