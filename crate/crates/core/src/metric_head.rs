//! Prototype-based metric classification head.
//!
//! Each class t owns a fixed anchor vector m_t (one-hot scaled by C, never
//! trained). Class probabilities are a softmax over negative squared
//! distances to the anchors; the EDS score sums those squared distances and
//! is low for embeddings near the center of the embedding space, which is
//! the unknown-object signal. A small two-layer perceptron stands in for a
//! deep backbone and maps per-box feature vectors to embeddings (kind
//! `Metric`) or logits (kind `SoftmaxClassifier`, the no-metric ablation).

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Embedding vector; dimension always equals the number of classes.
pub type Embedding = Vec<f64>;

/// The fixed class anchors. Anchor t is C at position t and 0 elsewhere,
/// where C is the number of classes; anchors are constants, not parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prototypes {
    classes: Vec<String>,
}

impl Prototypes {
    pub fn new(classes: Vec<String>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::format("prototype set needs at least one class"));
        }
        for (i, c) in classes.iter().enumerate() {
            if classes[..i].contains(c) {
                return Err(Error::format(format!("duplicate class label {c:?}")));
            }
        }
        Ok(Prototypes { classes })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn label(&self, t: usize) -> &str {
        &self.classes[t]
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    /// Anchor vector m_t.
    pub fn vector(&self, t: usize) -> Result<Embedding> {
        let c = self.num_classes();
        if t >= c {
            return Err(Error::ClassOutOfRange {
                index: t,
                num_classes: c,
            });
        }
        let mut v = vec![0.0; c];
        v[t] = c as f64;
        Ok(v)
    }

    /// Mean of the anchors: the point minimizing the distance sum, all
    /// components 1, with EDS exactly half that of any anchor.
    pub fn centroid(&self) -> Embedding {
        vec![1.0; self.num_classes()]
    }

    /// Squared Euclidean distance from `e` to anchor t, via the expansion
    /// `|e|^2 - 2*C*e[t] + C^2` (the anchor has a single nonzero entry).
    pub fn squared_distance(&self, e: &[f64], t: usize) -> Result<f64> {
        let c = self.num_classes();
        if t >= c {
            return Err(Error::ClassOutOfRange {
                index: t,
                num_classes: c,
            });
        }
        self.check_dim(e)?;
        let cf = c as f64;
        let norm2: f64 = e.iter().map(|v| v * v).sum();
        Ok((norm2 - 2.0 * cf * e[t] + cf * cf).max(0.0))
    }

    fn check_dim(&self, e: &[f64]) -> Result<()> {
        if e.len() != self.num_classes() {
            return Err(Error::DimensionMismatch {
                expected: self.num_classes(),
                got: e.len(),
            });
        }
        Ok(())
    }

    fn squared_distances(&self, e: &[f64]) -> Result<Vec<f64>> {
        (0..self.num_classes())
            .map(|t| self.squared_distance(e, t))
            .collect()
    }
}

/// Numerically stable softmax (max-subtraction).
fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / sum).collect()
}

/// Probability of each class: softmax over negative squared anchor
/// distances. Every entry is strictly positive for finite inputs.
pub fn class_probabilities(e: &[f64], protos: &Prototypes) -> Result<Vec<f64>> {
    let d2 = protos.squared_distances(e)?;
    let neg: Vec<f64> = d2.iter().map(|v| -v).collect();
    Ok(softmax(&neg))
}

/// Max-probability confidence score of the closed-set detector.
pub fn naive_confidence(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::EmptyProbabilities);
    }
    Ok(p.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// Negative log probability of the true class `y` (0-based).
pub fn metric_loss(e: &[f64], y: usize, protos: &Prototypes) -> Result<f64> {
    let d2 = protos.squared_distances(e)?;
    if y >= d2.len() {
        return Err(Error::ClassOutOfRange {
            index: y,
            num_classes: d2.len(),
        });
    }
    // -log p_y = d2[y] + log sum_k exp(-d2[k]), stabilized around the min.
    let m = d2.iter().cloned().fold(f64::INFINITY, f64::min);
    let lse: f64 = d2.iter().map(|&v| (-(v - m)).exp()).sum::<f64>().ln() - m;
    Ok((d2[y] + lse).max(0.0))
}

/// Analytic gradient of `metric_loss` with respect to `e`:
/// 2(e - m_y) - sum_k p_k * 2(e - m_k), which collapses to
/// 2*C*(p - onehot(y)) for one-hot anchors scaled by C.
pub fn loss_gradient(e: &[f64], y: usize, protos: &Prototypes) -> Result<Vec<f64>> {
    let c = protos.num_classes();
    if y >= c {
        return Err(Error::ClassOutOfRange {
            index: y,
            num_classes: c,
        });
    }
    let p = class_probabilities(e, protos)?;
    let cf = c as f64;
    Ok((0..c)
        .map(|k| 2.0 * cf * (p[k] - if k == y { 1.0 } else { 0.0 }))
        .collect())
}

/// Euclidean distance sum: total squared distance from `e` to every anchor.
pub fn eds(e: &[f64], protos: &Prototypes) -> Result<f64> {
    Ok(protos.squared_distances(e)?.iter().sum())
}

/// Class probabilities for a head output of the given kind: anchor-distance
/// softmax for `Metric` embeddings, plain softmax for classifier logits.
pub fn kind_probabilities(kind: HeadKind, out: &[f64], protos: &Prototypes) -> Result<Vec<f64>> {
    match kind {
        HeadKind::Metric => class_probabilities(out, protos),
        HeadKind::SoftmaxClassifier => {
            protos.check_dim(out)?;
            Ok(softmax(out))
        }
    }
}

/// Head flavor: metric embeddings against fixed anchors, or a plain softmax
/// classifier over logits (ablation baseline).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Metric,
    SoftmaxClassifier,
}

/// Two-layer perceptron `features(F) -> hidden(H, rectified) -> output(C)`.
/// Weights are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadModel {
    pub kind: HeadKind,
    pub classes: Vec<String>,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl HeadModel {
    /// Seeded initialization: weights uniform in +-sqrt(6/(fan_in+fan_out)),
    /// biases zero.
    pub fn init(
        kind: HeadKind,
        classes: Vec<String>,
        feature_dim: usize,
        hidden_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        let protos = Prototypes::new(classes)?;
        let classes = protos.classes().to_vec();
        let c = classes.len();
        if feature_dim == 0 || hidden_dim == 0 {
            return Err(Error::format("feature and hidden dimensions must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layer = |rows: usize, cols: usize| -> Vec<f64> {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            (0..rows * cols)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect()
        };
        Ok(HeadModel {
            kind,
            w1: layer(hidden_dim, feature_dim),
            b1: vec![0.0; hidden_dim],
            w2: layer(c, hidden_dim),
            b2: vec![0.0; c],
            classes,
            feature_dim,
            hidden_dim,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn prototypes(&self) -> Prototypes {
        Prototypes::new(self.classes.clone()).expect("model classes already validated")
    }

    /// Check weight shapes against the declared dimensions.
    pub fn validate(&self) -> Result<()> {
        let (f, h, c) = (self.feature_dim, self.hidden_dim, self.num_classes());
        let shapes = [
            (self.w1.len(), h * f, "w1"),
            (self.b1.len(), h, "b1"),
            (self.w2.len(), c * h, "w2"),
            (self.b2.len(), c, "b2"),
        ];
        for (got, expected, name) in shapes {
            if got != expected {
                return Err(Error::format(format!(
                    "model {name} has {got} entries, expected {expected}"
                )));
            }
        }
        let all = self
            .w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::format("model weights contain non-finite values"));
        }
        if self.classes.is_empty() {
            return Err(Error::format("model has no classes"));
        }
        Ok(())
    }

    fn hidden(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                got: x.len(),
            });
        }
        Ok((0..self.hidden_dim)
            .map(|i| {
                let row = &self.w1[i * self.feature_dim..(i + 1) * self.feature_dim];
                let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[i];
                z.max(0.0)
            })
            .collect())
    }

    /// Forward pass. Returns the embedding (kind `Metric`) or the logit
    /// vector (kind `SoftmaxClassifier`); dimension is the class count.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h = self.hidden(x)?;
        let c = self.num_classes();
        Ok((0..c)
            .map(|i| {
                let row = &self.w2[i * self.hidden_dim..(i + 1) * self.hidden_dim];
                row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + self.b2[i]
            })
            .collect())
    }

    /// Class probabilities for an output vector of this head's kind.
    pub fn output_probabilities(&self, out: &[f64], protos: &Prototypes) -> Result<Vec<f64>> {
        kind_probabilities(self.kind, out, protos)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)
            .map_err(|e| Error::format_at(path, e.to_string()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let model: HeadModel = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::format_at(path, e.to_string()))?;
        model.validate().map_err(|e| match e {
            Error::Format { msg, .. } => Error::format_at(path, msg),
            other => other,
        })?;
        Ok(model)
    }
}

/// One labeled feature vector; `label` is a 0-based class index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSample {
    pub features: Vec<f64>,
    pub label: usize,
}

/// Adam hyperparameters and schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Full passes over the data; 0 returns the seeded initialization.
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_dim: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.003,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 80,
            batch_size: 32,
            hidden_dim: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |v: f64| v > 0.0 && v < 1.0;
        if !rate_ok(self.learning_rate) || !rate_ok(self.beta1) || !rate_ok(self.beta2) {
            return Err(Error::format("learning rate and moment decays must be in (0,1)"));
        }
        if self.epsilon <= 0.0 || self.batch_size == 0 || self.hidden_dim == 0 {
            return Err(Error::format("epsilon, batch size, hidden width must be positive"));
        }
        Ok(())
    }
}

/// Trained model plus the mean loss of each epoch (measured before each
/// batch's update, averaged over samples).
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: HeadModel,
    pub epoch_losses: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Train a head of the given kind from scratch. Deterministic for a fixed
/// `cfg.seed`: initialization and epoch shuffles share one seeded generator.
pub fn train(
    samples: &[TrainSample],
    classes: &[String],
    kind: HeadKind,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::NoTrainingSamples);
    }
    let c = classes.len();
    let f = samples[0].features.len();
    for s in samples {
        if s.features.len() != f {
            return Err(Error::DimensionMismatch {
                expected: f,
                got: s.features.len(),
            });
        }
        if s.label >= c {
            return Err(Error::ClassOutOfRange {
                index: s.label,
                num_classes: c,
            });
        }
    }
    let mut model = HeadModel::init(kind, classes.to_vec(), f, cfg.hidden_dim, cfg.seed)?;
    let protos = model.prototypes();
    let h = cfg.hidden_dim;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut opt_w1 = Adam::new(model.w1.len());
    let mut opt_b1 = Adam::new(model.b1.len());
    let mut opt_w2 = Adam::new(model.w2.len());
    let mut opt_b2 = Adam::new(model.b2.len());
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        // Fisher-Yates with the session generator keeps runs reproducible.
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut gw1 = vec![0.0; model.w1.len()];
            let mut gb1 = vec![0.0; model.b1.len()];
            let mut gw2 = vec![0.0; model.w2.len()];
            let mut gb2 = vec![0.0; model.b2.len()];
            for &idx in batch {
                let s = &samples[idx];
                let hid = model.hidden(&s.features)?;
                let out = {
                    let mut o = vec![0.0; c];
                    for (i, oi) in o.iter_mut().enumerate() {
                        let row = &model.w2[i * h..(i + 1) * h];
                        *oi = row.iter().zip(&hid).map(|(w, v)| w * v).sum::<f64>()
                            + model.b2[i];
                    }
                    o
                };
                let (loss, gout) = match kind {
                    HeadKind::Metric => {
                        let loss = metric_loss(&out, s.label, &protos)?;
                        (loss, loss_gradient(&out, s.label, &protos)?)
                    }
                    HeadKind::SoftmaxClassifier => {
                        let p = softmax(&out);
                        let loss = -p[s.label].max(f64::MIN_POSITIVE).ln();
                        let g = (0..c)
                            .map(|k| p[k] - if k == s.label { 1.0 } else { 0.0 })
                            .collect();
                        (loss, g)
                    }
                };
                loss_sum += loss;
                for i in 0..c {
                    for j in 0..h {
                        gw2[i * h + j] += gout[i] * hid[j];
                    }
                    gb2[i] += gout[i];
                }
                for j in 0..h {
                    if hid[j] <= 0.0 {
                        continue; // rectifier gate: no gradient through dead units
                    }
                    let dz: f64 = (0..c).map(|i| gout[i] * model.w2[i * h + j]).sum();
                    for k in 0..f {
                        gw1[j * f + k] += dz * s.features[k];
                    }
                    gb1[j] += dz;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for g in [&mut gw1, &mut gb1, &mut gw2, &mut gb2] {
                for v in g.iter_mut() {
                    *v *= scale;
                }
            }
            opt_w1.step(&mut model.w1, &gw1, cfg);
            opt_b1.step(&mut model.b1, &gb1, cfg);
            opt_w2.step(&mut model.w2, &gw2, cfg);
            opt_b2.step(&mut model.b2, &gb2, cfg);
        }
        epoch_losses.push(loss_sum / samples.len() as f64);
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}
