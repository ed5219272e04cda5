//! Built-in local trainer: multinomial logistic regression or a one-hidden-layer
//! tanh MLP, trained with mini-batch SGD on mean cross-entropy, optionally with
//! the FedProx proximal penalty `(μ/2)‖w − w_global‖²`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_rng, Stream};

/// Layer sizes. `hidden_dim == 0` selects the linear (softmax regression) model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
}

impl ModelShape {
    pub fn linear(input_dim: usize, n_classes: usize) -> Self {
        Self {
            input_dim,
            hidden_dim: 0,
            n_classes,
        }
    }

    pub fn n_params(&self) -> usize {
        let (d, h, c) = (self.input_dim, self.hidden_dim, self.n_classes);
        if h == 0 {
            d * c + c
        } else {
            h * d + h + c * h + c
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.n_classes == 0 {
            return Err(Error::Shape(format!(
                "input_dim and n_classes must be positive (got {} and {})",
                self.input_dim, self.n_classes
            )));
        }
        Ok(())
    }
}

/// Flat parameter vector plus the shape it encodes.
///
/// Layout (row-major): linear `[W (c×d), b (c)]`; MLP
/// `[W1 (h×d), b1 (h), W2 (c×h), b2 (c)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub values: Vec<f64>,
    pub shape: ModelShape,
}

impl ModelParams {
    pub fn new(values: Vec<f64>, shape: ModelShape) -> Result<Self> {
        shape.validate()?;
        if values.len() != shape.n_params() {
            return Err(Error::Shape(format!(
                "{} values for a shape needing {}",
                values.len(),
                shape.n_params()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("model parameters must be finite".into()));
        }
        Ok(Self { values, shape })
    }

    pub fn zeros(shape: ModelShape) -> Self {
        Self {
            values: vec![0.0; shape.n_params()],
            shape,
        }
    }

    fn check_same_shape(&self, other: &ModelParams) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(())
    }
}

/// One client's samples; features are row-major `n_samples × input_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDataset {
    pub client_id: usize,
    pub input_dim: usize,
    pub n_classes: usize,
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
}

impl LocalDataset {
    pub fn new(client_id: usize, input_dim: usize, n_classes: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.len() != labels.len() * input_dim {
            return Err(Error::Shape(format!(
                "{} feature values for {} samples of dimension {input_dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Invalid(format!("label {bad} out of range for {n_classes} classes")));
        }
        Ok(Self {
            client_id,
            input_dim,
            n_classes,
            features,
            labels,
        })
    }

    pub fn empty(client_id: usize, input_dim: usize, n_classes: usize) -> Self {
        Self {
            client_id,
            input_dim,
            n_classes,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn push(&mut self, row: &[f64], label: usize) {
        debug_assert_eq!(row.len(), self.input_dim);
        self.features.extend_from_slice(row);
        self.labels.push(label);
    }

    fn check_model(&self, shape: &ModelShape) -> Result<()> {
        if shape.input_dim != self.input_dim || shape.n_classes < self.n_classes {
            return Err(Error::Shape(format!(
                "model {:?} cannot consume data with input_dim {} and {} classes",
                shape, self.input_dim, self.n_classes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub epochs: u32,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// FedProx μ; 0 disables the proximal term.
    pub prox_mu: f64,
    pub seed: u64,
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid(format!("learning rate {} is invalid", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch size must be >= 1".into()));
        }
        if !(self.prox_mu >= 0.0 && self.prox_mu.is_finite()) {
            return Err(Error::Invalid(format!("prox_mu {} is invalid", self.prox_mu)));
        }
        Ok(())
    }
}

/// Deterministic initialization: weights ~ U(−1/√fan_in, 1/√fan_in), biases 0.
pub fn init_model<R: Rng>(shape: ModelShape, rng: &mut R) -> Result<ModelParams> {
    shape.validate()?;
    let (d, h, c) = (shape.input_dim, shape.hidden_dim, shape.n_classes);
    let mut values = Vec::with_capacity(shape.n_params());
    let weights = |rows: usize, fan_in: usize, values: &mut Vec<f64>, rng: &mut R| {
        let a = 1.0 / (fan_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-a, a).expect("finite bound");
        values.extend((0..rows * fan_in).map(|_| dist.sample(rng)));
        values.extend(std::iter::repeat_n(0.0, rows));
    };
    if h == 0 {
        weights(c, d, &mut values, rng);
    } else {
        weights(h, d, &mut values, rng);
        weights(c, h, &mut values, rng);
    }
    Ok(ModelParams { values, shape })
}

/// [`init_model`] keyed by a seed.
pub fn init_model_seeded(shape: ModelShape, seed: u64) -> Result<ModelParams> {
    init_model(shape, &mut derive_rng(seed, Stream::ModelInit, 0, 0))
}

/// Scratch space for one forward/backward pass.
struct Workspace {
    hidden: Vec<f64>,
    logits: Vec<f64>,
    dhidden: Vec<f64>,
}

impl Workspace {
    fn new(shape: &ModelShape) -> Self {
        Self {
            hidden: vec![0.0; shape.hidden_dim],
            logits: vec![0.0; shape.n_classes],
            dhidden: vec![0.0; shape.hidden_dim],
        }
    }
}

fn forward(params: &ModelParams, x: &[f64], ws: &mut Workspace) {
    let ModelShape { input_dim: d, hidden_dim: h, n_classes: c } = params.shape;
    let v = &params.values;
    if h == 0 {
        let (w, b) = v.split_at(c * d);
        for k in 0..c {
            let row = &w[k * d..(k + 1) * d];
            ws.logits[k] = b[k] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    } else {
        let (w1, rest) = v.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(c * h);
        for j in 0..h {
            let row = &w1[j * d..(j + 1) * d];
            ws.hidden[j] = (b1[j] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).tanh();
        }
        for k in 0..c {
            let row = &w2[k * h..(k + 1) * h];
            ws.logits[k] = b2[k] + row.iter().zip(&ws.hidden).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// Replaces logits with softmax probabilities; returns log-sum-exp.
fn softmax_in_place(logits: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    for z in logits.iter_mut() {
        *z /= sum;
    }
    max + sum.ln()
}

/// Mean cross-entropy over `indices` plus the proximal term; the gradient is
/// written into `grad` (overwritten).
fn batch_loss_grad(
    params: &ModelParams,
    data: &LocalDataset,
    indices: &[usize],
    prox: Option<(&ModelParams, f64)>,
    grad: &mut [f64],
    ws: &mut Workspace,
) -> f64 {
    let ModelShape { input_dim: d, hidden_dim: h, n_classes: c } = params.shape;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let scale = 1.0 / indices.len() as f64;
    let mut loss = 0.0;
    for &i in indices {
        let x = data.row(i);
        let y = data.labels[i];
        forward(params, x, ws);
        let z_y = ws.logits[y];
        let lse = softmax_in_place(&mut ws.logits);
        loss += lse - z_y;
        // ws.logits now holds probabilities; turn them into dL/dlogits.
        ws.logits[y] -= 1.0;
        for p in ws.logits.iter_mut() {
            *p *= scale;
        }
        if h == 0 {
            let (gw, gb) = grad.split_at_mut(c * d);
            for k in 0..c {
                let dl = ws.logits[k];
                for (g, xj) in gw[k * d..(k + 1) * d].iter_mut().zip(x) {
                    *g += dl * xj;
                }
                gb[k] += dl;
            }
        } else {
            let w2 = &params.values[h * d + h..h * d + h + c * h];
            let (gw1, rest) = grad.split_at_mut(h * d);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(c * h);
            ws.dhidden.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..c {
                let dl = ws.logits[k];
                let row = &w2[k * h..(k + 1) * h];
                for j in 0..h {
                    gw2[k * h + j] += dl * ws.hidden[j];
                    ws.dhidden[j] += dl * row[j];
                }
                gb2[k] += dl;
            }
            for j in 0..h {
                let dz = ws.dhidden[j] * (1.0 - ws.hidden[j] * ws.hidden[j]);
                for (g, xj) in gw1[j * d..(j + 1) * d].iter_mut().zip(x) {
                    *g += dz * xj;
                }
                gb1[j] += dz;
            }
        }
    }
    loss *= scale;
    if let Some((global, mu)) = prox {
        let mut sq = 0.0;
        for ((g, w), w0) in grad.iter_mut().zip(&params.values).zip(&global.values) {
            let diff = w - w0;
            sq += diff * diff;
            *g += mu * diff;
        }
        loss += 0.5 * mu * sq;
    }
    loss
}

fn prox_term(global_ref: Option<&ModelParams>, prox_mu: f64) -> Result<Option<(&ModelParams, f64)>> {
    if prox_mu == 0.0 {
        return Ok(None);
    }
    match global_ref {
        Some(g) => Ok(Some((g, prox_mu))),
        None => Err(Error::Invalid("prox_mu > 0 requires a global reference model".into())),
    }
}

/// Full-dataset objective and its exact gradient.
pub fn loss_and_grad(
    params: &ModelParams,
    data: &LocalDataset,
    global_ref: Option<&ModelParams>,
    prox_mu: f64,
) -> Result<(f64, Vec<f64>)> {
    data.check_model(&params.shape)?;
    if data.is_empty() {
        return Err(Error::Invalid(format!("client {} has no samples", data.client_id)));
    }
    if let Some(g) = global_ref {
        params.check_same_shape(g)?;
    }
    let prox = prox_term(global_ref, prox_mu)?;
    let mut grad = vec![0.0; params.values.len()];
    let indices: Vec<usize> = (0..data.len()).collect();
    let loss = batch_loss_grad(params, data, &indices, prox, &mut grad, &mut Workspace::new(&params.shape));
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    /// Full-dataset objective after the last epoch.
    pub final_loss: f64,
    pub n_samples: usize,
}

/// Runs `spec.epochs` shuffled passes of mini-batch SGD starting from `start`
/// (which doubles as the proximal anchor).
pub fn local_train(start: &ModelParams, data: &LocalDataset, spec: &TrainSpec) -> Result<(ModelParams, TrainStats)> {
    spec.validate()?;
    data.check_model(&start.shape)?;
    if data.is_empty() {
        return Err(Error::Invalid(format!("client {} has no samples", data.client_id)));
    }
    let prox = prox_term(Some(start), spec.prox_mu)?;
    let mut params = start.clone();
    let mut grad = vec![0.0; params.values.len()];
    let mut ws = Workspace::new(&params.shape);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..spec.epochs {
        let mut rng = derive_rng(spec.seed, Stream::BatchShuffle, epoch as u64, 0);
        order.shuffle(&mut rng);
        for batch in order.chunks(spec.batch_size) {
            batch_loss_grad(&params, data, batch, prox, &mut grad, &mut ws);
            for (w, g) in params.values.iter_mut().zip(&grad) {
                *w -= spec.learning_rate * g;
            }
        }
    }
    order.sort_unstable();
    let final_loss = batch_loss_grad(&params, data, &order, prox, &mut grad, &mut ws);
    Ok((
        params,
        TrainStats {
            final_loss,
            n_samples: data.len(),
        },
    ))
}

/// Argmax class; ties go to the lowest index.
pub fn predict(params: &ModelParams, x: &[f64]) -> usize {
    let mut ws = Workspace::new(&params.shape);
    forward(params, x, &mut ws);
    argmax(&ws.logits)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub balanced_accuracy: f64,
}

/// Accuracy, macro-F1 over all `n_classes` (a class with no support and no
/// predictions scores F1 = 0) and balanced accuracy (mean recall over classes
/// present in `labels`).
pub fn classification_metrics(labels: &[usize], predictions: &[usize], n_classes: usize) -> EvalMetrics {
    debug_assert_eq!(labels.len(), predictions.len());
    let mut tp = vec![0usize; n_classes];
    let mut support = vec![0usize; n_classes];
    let mut predicted = vec![0usize; n_classes];
    for (&y, &p) in labels.iter().zip(predictions) {
        support[y] += 1;
        predicted[p] += 1;
        if y == p {
            tp[y] += 1;
        }
    }
    let correct: usize = tp.iter().sum();
    let mut f1_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut present = 0usize;
    for k in 0..n_classes {
        let denom = support[k] + predicted[k];
        if denom > 0 {
            f1_sum += 2.0 * tp[k] as f64 / denom as f64;
        }
        if support[k] > 0 {
            recall_sum += tp[k] as f64 / support[k] as f64;
            present += 1;
        }
    }
    EvalMetrics {
        accuracy: correct as f64 / labels.len() as f64,
        macro_f1: f1_sum / n_classes as f64,
        balanced_accuracy: recall_sum / present as f64,
    }
}

pub fn evaluate(params: &ModelParams, data: &LocalDataset) -> Result<EvalMetrics> {
    data.check_model(&params.shape)?;
    if data.is_empty() {
        return Err(Error::Invalid("cannot evaluate on an empty dataset".into()));
    }
    let mut ws = Workspace::new(&params.shape);
    let predictions: Vec<usize> = (0..data.len())
        .map(|i| {
            forward(params, data.row(i), &mut ws);
            argmax(&ws.logits)
        })
        .collect();
    Ok(classification_metrics(&data.labels, &predictions, params.shape.n_classes))
}
