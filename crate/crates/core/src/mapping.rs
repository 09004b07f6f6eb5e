//! Posterior-to-language mapping classifiers.
//!
//! A one-hidden-layer perceptron maps a language-posterior vector (one
//! entry per language known to an upstream identifier) onto the two
//! languages of a pair. It is trained either on monolingual utterances
//! labelled by their language or on code-switched utterances labelled by a
//! principle's verdicts.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Side};
use crate::error::{Error, Result};
use crate::metrics::f1_macro;
use crate::principles::{Annotation, MlLabel, Principle};
use crate::seed::derive_seed;

const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorRecord {
    pub id: String,
    pub vector: Vec<f64>,
}

/// Posterior vectors of a fixed dimension, keyed by utterance id.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSet {
    dim: usize,
    records: Vec<PosteriorRecord>,
    index: HashMap<String, usize>,
}

impl PosteriorSet {
    pub fn new(records: Vec<PosteriorRecord>) -> Result<Self> {
        let dim = records
            .first()
            .map(|r| r.vector.len())
            .ok_or_else(|| Error::EmptyInput("posterior set".into()))?;
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            validate_posterior(&r.vector, dim).map_err(|e| match e {
                Error::DimensionMismatch { .. } => e,
                other => Error::InvalidArgument(format!("posterior `{}`: {other}", r.id)),
            })?;
            if index.insert(r.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(PosteriorSet {
            dim,
            records,
            index,
        })
    }

    /// Parses CSV with header `id,p_0,...,p_{D-1}`.
    pub fn from_csv(text: &str, source: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let width = reader.headers()?.len();
        if width < 2 {
            return Err(Error::parse(
                source,
                1,
                "expected `id` plus at least one posterior column",
            ));
        }
        let mut records = Vec::new();
        for (n, row) in reader.records().enumerate() {
            let line = n + 2;
            let row = row.map_err(|e| Error::parse(source, line, e.to_string()))?;
            let id = row.get(0).unwrap_or_default().to_string();
            let vector = row
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(source, line, e.to_string()))?;
            validate_posterior(&vector, width - 1)
                .map_err(|e| Error::parse(source, line, e.to_string()))?;
            records.push(PosteriorRecord { id, vector });
        }
        PosteriorSet::new(records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, &path.display().to_string())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string()];
        header.extend((0..self.dim).map(|i| format!("p_{i}")));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.id.clone()];
            row.extend(r.vector.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        crate::error::finish_csv(w)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[PosteriorRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index
            .get(id)
            .map(|&i| self.records[i].vector.as_slice())
    }
}

fn validate_posterior(vector: &[f64], dim: usize) -> Result<()> {
    if vector.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: vector.len(),
        });
    }
    if vector.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidArgument(
            "posterior entries must be finite and non-negative".into(),
        ));
    }
    let sum: f64 = vector.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "posterior sums to {sum}, not 1"
        )));
    }
    Ok(())
}

/// Where the labels of a training set come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    MonolingualLid,
    P11,
    P12,
    P2,
}

impl Provenance {
    fn principle(self) -> Option<Principle> {
        match self {
            Provenance::MonolingualLid => None,
            Provenance::P11 => Some(Principle::P11),
            Provenance::P12 => Some(Principle::P12),
            Provenance::P2 => Some(Principle::P2),
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['.', '-'], "_").as_str() {
            "lid" | "monolingual_lid" | "mono" => Ok(Provenance::MonolingualLid),
            "p11" => Ok(Provenance::P11),
            "p12" => Ok(Provenance::P12),
            "p2" => Ok(Provenance::P2),
            _ => Err(Error::InvalidArgument(format!(
                "unknown label source `{s}`"
            ))),
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::MonolingualLid => "monolingual_lid",
            Provenance::P11 => "p11",
            Provenance::P12 => "p12",
            Provenance::P2 => "p2",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub provenance: Provenance,
    pub ids: Vec<String>,
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<Side>,
}

impl LabeledDataset {
    pub fn new(
        provenance: Provenance,
        ids: Vec<String>,
        inputs: Vec<Vec<f64>>,
        labels: Vec<Side>,
    ) -> Result<Self> {
        if ids.len() != inputs.len() || ids.len() != labels.len() {
            return Err(Error::InvalidArgument(
                "dataset columns differ in length".into(),
            ));
        }
        Ok(LabeledDataset {
            provenance,
            ids,
            inputs,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.inputs.first().map(Vec::len)
    }

    fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            provenance: self.provenance,
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Builds a training set. Monolingual provenance keeps every monolingual
/// utterance labelled by its language; principle provenance keeps the
/// code-switched utterances with a determined verdict.
pub fn assemble_dataset(
    corpus: &Corpus,
    posteriors: &PosteriorSet,
    provenance: Provenance,
    verdicts: &[Annotation],
) -> Result<LabeledDataset> {
    let mut selected: Vec<(String, Side)> = Vec::new();
    match provenance.principle() {
        None => {
            for u in corpus.monolingual() {
                let side = u.kind.monolingual_side().expect("monolingual");
                selected.push((u.id.clone(), side));
            }
        }
        Some(principle) => {
            for a in verdicts {
                if a.verdict.principle != principle {
                    return Err(Error::InvalidArgument(format!(
                        "verdict for `{}` comes from {}, expected {principle}",
                        a.id, a.verdict.principle
                    )));
                }
                let u = corpus.get(&a.id).ok_or_else(|| {
                    Error::InvalidArgument(format!("verdict for unknown utterance `{}`", a.id))
                })?;
                if !u.is_code_switched() {
                    continue;
                }
                if let Some(side) = a.verdict.label.side() {
                    selected.push((a.id.clone(), side));
                }
            }
        }
    }
    let mut ids = Vec::with_capacity(selected.len());
    let mut inputs = Vec::with_capacity(selected.len());
    let mut labels = Vec::with_capacity(selected.len());
    for (id, side) in selected {
        let x = posteriors
            .get(&id)
            .ok_or_else(|| Error::MissingPosterior(id.clone()))?;
        inputs.push(x.to_vec());
        ids.push(id);
        labels.push(side);
    }
    LabeledDataset::new(provenance, ids, inputs, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Stop after this many consecutive rises of the validation loss.
    pub patience: usize,
    /// Share of each class held out for early stopping; 0 disables it.
    pub validation_fraction: f64,
    pub class_weighting: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 32,
            epochs: 500,
            learning_rate: 0.05,
            patience: 10,
            validation_fraction: 0.1,
            class_weighting: true,
            seed: 0,
        }
    }
}

/// `input → hidden (ReLU) → 2 (softmax)` perceptron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingModel {
    pub input_dim: usize,
    pub hidden: usize,
    pub seed: u64,
    /// Row-major `hidden × input_dim`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Row-major `2 × hidden`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Side,
    pub probabilities: [f64; 2],
}

struct Activations {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    probs: [f64; 2],
}

impl MappingModel {
    /// Uniform initialization in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |fan_in: usize, fan_out: usize, n: usize| -> Vec<f64> {
            let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..n).map(|_| rng.gen_range(-r..=r)).collect()
        };
        let w1 = uniform(input_dim, hidden, hidden * input_dim);
        let w2 = uniform(hidden, 2, 2 * hidden);
        MappingModel {
            input_dim,
            hidden,
            seed,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; 2],
        }
    }

    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        MappingModel {
            input_dim,
            hidden,
            seed: 0,
            w1: vec![0.0; hidden * input_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; 2 * hidden],
            b2: vec![0.0; 2],
        }
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameters flattened in the order `w1, b1, w2, b2`.
    pub fn params(&self) -> Vec<f64> {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .into_iter()
            .flat_map(|v| v.iter().copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut rest = params;
        for v in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let (head, tail) = rest.split_at(v.len());
            v.copy_from_slice(head);
            rest = tail;
        }
    }

    fn forward(&self, x: &[f64]) -> Activations {
        let d = self.input_dim;
        let pre: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * d..(j + 1) * d];
                self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        let hidden: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
        let logits: [f64; 2] = std::array::from_fn(|k| {
            let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
            self.b2[k] + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>()
        });
        Activations {
            pre,
            hidden,
            probs: softmax(logits),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        let probs = self.forward(x).probs;
        let label = if probs[0] >= probs[1] {
            Side::L1
        } else {
            Side::L2
        };
        Ok(Prediction {
            label,
            probabilities: probs,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: MappingModel = serde_json::from_str(text)?;
        let ok = model.w1.len() == model.hidden * model.input_dim
            && model.b1.len() == model.hidden
            && model.w2.len() == 2 * model.hidden
            && model.b2.len() == 2;
        if !ok {
            return Err(Error::InvalidArgument(
                "model parameter shapes are inconsistent".into(),
            ));
        }
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("model parameter".into()));
        }
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e = logits.map(|z| (z - m).exp());
    let s = e[0] + e[1];
    e.map(|v| v / s)
}

pub fn predict(model: &MappingModel, posterior: &[f64]) -> Result<Prediction> {
    model.predict(posterior)
}

/// Inverse-frequency weights `n / (classes present · n_class)`.
pub fn class_weights(labels: &[Side]) -> Vec<f64> {
    let mut counts = [0usize; 2];
    for l in labels {
        counts[l.index()] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count() as f64;
    let n = labels.len() as f64;
    labels
        .iter()
        .map(|l| n / (present * counts[l.index()] as f64))
        .collect()
}

/// Weighted mean negative log-likelihood and its gradient with respect to
/// `model.params()`.
pub fn loss_and_gradient(
    model: &MappingModel,
    inputs: &[Vec<f64>],
    labels: &[Side],
    weights: &[f64],
) -> (f64, Vec<f64>) {
    let (d, h) = (model.input_dim, model.hidden);
    let total_weight: f64 = weights.iter().sum();
    let mut grad = vec![0.0; model.param_count()];
    let (gw1, rest) = grad.split_at_mut(h * d);
    let (gb1, rest) = rest.split_at_mut(h);
    let (gw2, gb2) = rest.split_at_mut(2 * h);
    let mut loss = 0.0;
    let mut delta_hidden = vec![0.0; h];
    for ((x, &y), &w) in inputs.iter().zip(labels).zip(weights) {
        let act = model.forward(x);
        let scale = w / total_weight;
        loss -= scale * act.probs[y.index()].ln();
        let delta_out: [f64; 2] = std::array::from_fn(|k| {
            let target = if k == y.index() { 1.0 } else { 0.0 };
            scale * (act.probs[k] - target)
        });
        for k in 0..2 {
            gb2[k] += delta_out[k];
            for j in 0..h {
                gw2[k * h + j] += delta_out[k] * act.hidden[j];
            }
        }
        for j in 0..h {
            delta_hidden[j] = if act.pre[j] > 0.0 {
                delta_out[0] * model.w2[j] + delta_out[1] * model.w2[h + j]
            } else {
                0.0
            };
            gb1[j] += delta_hidden[j];
            let row = &mut gw1[j * d..(j + 1) * d];
            for (g, v) in row.iter_mut().zip(x) {
                *g += delta_hidden[j] * v;
            }
        }
    }
    (loss, grad)
}

fn sample_weights(labels: &[Side], weighting: bool) -> Vec<f64> {
    if weighting {
        class_weights(labels)
    } else {
        vec![1.0; labels.len()]
    }
}

/// Maximum relative difference between the analytic gradient and central
/// finite differences (step `1e-5`) over all parameters.
pub fn gradient_check(model: &MappingModel, inputs: &[Vec<f64>], labels: &[Side]) -> Result<f64> {
    Ok(gradient_check_detail(model, inputs, labels)?.max_relative_error)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_relative_error: f64,
}

pub fn gradient_check_detail(
    model: &MappingModel,
    inputs: &[Vec<f64>],
    labels: &[Side],
) -> Result<GradientCheck> {
    const STEP: f64 = 1e-5;
    if inputs.is_empty() {
        return Err(Error::EmptyInput("gradient check batch".into()));
    }
    let weights = class_weights(labels);
    let (_, analytic) = loss_and_gradient(model, inputs, labels, &weights);
    let base = model.params();
    let mut probe = model.clone();
    let mut params = base.clone();
    let mut numeric = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        params[i] = base[i] + STEP;
        probe.set_params(&params);
        let (plus, _) = loss_and_gradient(&probe, inputs, labels, &weights);
        params[i] = base[i] - STEP;
        probe.set_params(&params);
        let (minus, _) = loss_and_gradient(&probe, inputs, labels, &weights);
        params[i] = base[i];
        numeric.push((plus - minus) / (2.0 * STEP));
    }
    let max_relative_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-7))
        .fold(0.0, f64::max);
    Ok(GradientCheck {
        analytic,
        numeric,
        max_relative_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Stratified split of `0..labels.len()` into (train, validation).
fn stratified_holdout(
    labels: &[Side],
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for side in [Side::L1, Side::L2] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == side).collect();
        idx.shuffle(rng);
        let take = (idx.len() as f64 * fraction).floor() as usize;
        // keep at least one training example of the class
        let take = take.min(idx.len().saturating_sub(1));
        valid.extend_from_slice(&idx[..take]);
        train.extend_from_slice(&idx[take..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    (train, valid)
}

/// Full-batch gradient descent on the weighted negative log-likelihood.
pub fn train_mapping(
    dataset: &LabeledDataset,
    config: &TrainConfig,
) -> Result<(MappingModel, TrainReport)> {
    if dataset.len() < 2 {
        return Err(Error::InvalidArgument(
            "training needs at least two samples".into(),
        ));
    }
    if !(dataset.labels.contains(&Side::L1) && dataset.labels.contains(&Side::L2)) {
        return Err(Error::SingleClass);
    }
    if config.hidden == 0 || config.learning_rate.is_nan() || config.learning_rate <= 0.0 {
        return Err(Error::InvalidArgument(
            "hidden size and learning rate must be positive".into(),
        ));
    }
    let dim = dataset.dim().expect("non-empty");
    if let Some(bad) = dataset.inputs.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x5eed));
    let (train_idx, valid_idx) = if config.validation_fraction > 0.0 {
        stratified_holdout(&dataset.labels, config.validation_fraction, &mut rng)
    } else {
        ((0..dataset.len()).collect(), Vec::new())
    };
    let train = dataset.subset(&train_idx);
    let valid = dataset.subset(&valid_idx);
    let train_w = sample_weights(&train.labels, config.class_weighting);
    let valid_w = sample_weights(&valid.labels, config.class_weighting);

    let mut model = MappingModel::init(dim, config.hidden, config.seed);
    let mut report = TrainReport {
        train_loss: Vec::with_capacity(config.epochs),
        validation_loss: Vec::new(),
        epochs_run: 0,
        stopped_early: false,
        best_epoch: 0,
    };
    let mut params = model.params();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut rises = 0;
    for epoch in 0..config.epochs {
        let (loss, grad) = loss_and_gradient(&model, &train.inputs, &train.labels, &train_w);
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        report.train_loss.push(loss);
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= config.learning_rate * g;
        }
        model.set_params(&params);
        report.epochs_run = epoch + 1;

        if !valid.is_empty() {
            let (vloss, _) = loss_and_gradient(&model, &valid.inputs, &valid.labels, &valid_w);
            if let Some(&prev) = report.validation_loss.last() {
                rises = if vloss > prev { rises + 1 } else { 0 };
            }
            report.validation_loss.push(vloss);
            if best.as_ref().is_none_or(|(b, _)| vloss < *b) {
                best = Some((vloss, params.clone()));
                report.best_epoch = epoch + 1;
            }
            if rises >= config.patience {
                report.stopped_early = true;
                break;
            }
        } else {
            report.best_epoch = epoch + 1;
        }
    }
    if let Some((_, p)) = best {
        model.set_params(&p);
    }
    Ok((model, report))
}

pub fn accuracy(model: &MappingModel, dataset: &LabeledDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("accuracy dataset".into()));
    }
    let mut correct = 0;
    for (x, &y) in dataset.inputs.iter().zip(&dataset.labels) {
        correct += usize::from(model.predict(x)?.label == y);
    }
    Ok(correct as f64 / dataset.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[Side], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(
            "cross-validation needs k >= 2".into(),
        ));
    }
    if k > labels.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds dataset size {}",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    for side in [Side::L1, Side::L2] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == side).collect();
        if idx.len() < k {
            return Err(Error::InvalidArgument(format!(
                "class {side:?} has {} samples, too few for {k} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            folds[j % k].push(i);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Stratified k-fold cross-validation reporting F1-macro per fold.
pub fn cross_validate(
    dataset: &LabeledDataset,
    k: usize,
    config: &TrainConfig,
) -> Result<CvReport> {
    let folds = stratified_folds(&dataset.labels, k, config.seed)?;
    let fold_f1 = (0..k)
        .into_par_iter()
        .map(|f| {
            let test_idx = &folds[f];
            let train_idx: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            let fold_config = TrainConfig {
                seed: derive_seed(config.seed, f as u64 + 1),
                ..*config
            };
            let (model, _) = train_mapping(&dataset.subset(&train_idx), &fold_config)?;
            let test = dataset.subset(test_idx);
            let pred = test
                .inputs
                .iter()
                .map(|x| model.predict(x).map(|p| MlLabel::from(p.label)))
                .collect::<Result<Vec<_>>>()?;
            f1_macro(&pred, &test.labels)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_f1 = fold_f1.iter().sum::<f64>() / k as f64;
    Ok(CvReport {
        k,
        fold_f1,
        mean_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LabeledDataset {
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 40.0;
            inputs.push(vec![0.9 - t, 0.1 + t]);
            labels.push(Side::L1);
            inputs.push(vec![0.1 + t / 4.0, 0.9 - t / 4.0]);
            labels.push(Side::L2);
        }
        let ids = (0..inputs.len()).map(|i| i.to_string()).collect();
        LabeledDataset::new(Provenance::MonolingualLid, ids, inputs, labels).unwrap()
    }

    #[test]
    fn posterior_csv_validation() {
        let ok = "id,p_0,p_1\na,0.25,0.75\n";
        let set = PosteriorSet::from_csv(ok, "t").unwrap();
        assert_eq!(set.dim(), 2);
        assert_eq!(set.get("a").unwrap(), &[0.25, 0.75]);
        assert!(PosteriorSet::from_csv("id,p_0,p_1\na,0.5,0.6\n", "t").is_err());
        assert!(PosteriorSet::from_csv("id,p_0,p_1\na,-0.5,1.5\n", "t").is_err());
        assert!(PosteriorSet::from_csv("id,p_0,p_1\na,1.0\n", "t").is_err());
        let back = PosteriorSet::from_csv(&set.to_csv().unwrap(), "t").unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn separable_training_reaches_full_accuracy() {
        let data = toy();
        let (model, report) = train_mapping(&data, &TrainConfig::default()).unwrap();
        assert_eq!(accuracy(&model, &data).unwrap(), 1.0);
        assert!(report.epochs_run <= 500);
    }

    #[test]
    fn single_class_rejected() {
        let mut data = toy();
        data.labels.iter_mut().for_each(|l| *l = Side::L1);
        assert!(matches!(
            train_mapping(&data, &TrainConfig::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy();
        let config = TrainConfig {
            seed: 42,
            ..TrainConfig::default()
        };
        let (a, _) = train_mapping(&data, &config).unwrap();
        let (b, _) = train_mapping(&data, &config).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn symmetric_model_ties_to_l1() {
        let model = MappingModel::zeros(3, 4);
        let p = model.predict(&[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(p.probabilities, [0.5, 0.5]);
        assert_eq!(p.label, Side::L1);
        assert!(matches!(
            model.predict(&[1.0]),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 1
            })
        ));
    }

    #[test]
    fn duplicate_samples_do_not_change_gradient() {
        let model = MappingModel::init(3, 5, 9);
        let x = vec![vec![0.2, 0.3, 0.5]];
        let y = vec![Side::L2];
        let (_, g1) = loss_and_gradient(&model, &x, &y, &class_weights(&y));
        let xx = vec![x[0].clone(), x[0].clone()];
        let yy = vec![Side::L2, Side::L2];
        let (_, g2) = loss_and_gradient(&model, &xx, &yy, &class_weights(&yy));
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn folds_need_both_classes() {
        let labels = vec![Side::L1, Side::L1, Side::L2];
        assert!(stratified_folds(&labels, 3, 0).is_err());
        assert!(stratified_folds(&labels, 4, 0).is_err());
        let labels = vec![Side::L1, Side::L2, Side::L1, Side::L2];
        let folds = stratified_folds(&labels, 2, 0).unwrap();
        for f in folds {
            assert!(f.iter().any(|&i| labels[i] == Side::L1));
            assert!(f.iter().any(|&i| labels[i] == Side::L2));
        }
    }
}
