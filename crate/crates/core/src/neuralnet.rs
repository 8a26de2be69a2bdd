//! Fully connected regressor from adjacency encodings to QAOA angles.
//!
//! One hidden ReLU layer, affine output of width `2p`. Training minimizes the
//! sum of per-sample Euclidean residual norms with Adam and early stopping on a
//! held-out split.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{encode_upper_triangle, Ensemble};
use crate::pipeline::LabeledInstance;
use crate::seed;

pub const SCHEMA: &str = "mlp-v1";
pub const DEFAULT_HIDDEN: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub samples: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub best_validation_loss: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub n: usize,
    pub p: usize,
    pub ensemble: Ensemble,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct MlpModel {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
    pub meta: ModelMeta,
}

/// On-disk layout, with redundant dimensions kept for validation.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema: String,
    n: usize,
    p: usize,
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    activation: String,
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    meta: ModelMeta,
}

impl From<MlpModel> for ModelFile {
    fn from(m: MlpModel) -> Self {
        ModelFile {
            schema: SCHEMA.into(),
            n: m.meta.n,
            p: m.meta.p,
            input_dim: m.input_dim(),
            hidden_dim: m.hidden_dim(),
            output_dim: m.output_dim(),
            activation: "relu".into(),
            w1: m.w1,
            b1: m.b1,
            w2: m.w2,
            b2: m.b2,
            meta: m.meta,
        }
    }
}

impl TryFrom<ModelFile> for MlpModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.schema != SCHEMA {
            return Err(Error::Validation(format!("unsupported schema `{}`", f.schema)));
        }
        if f.activation != "relu" {
            return Err(Error::Validation(format!("unsupported activation `{}`", f.activation)));
        }
        if f.n != f.meta.n || f.p != f.meta.p {
            return Err(Error::Validation("top-level n/p disagree with meta".into()));
        }
        if f.input_dim != f.n * f.n.saturating_sub(1) / 2 || f.output_dim != 2 * f.p {
            return Err(Error::Validation(format!(
                "input_dim {} / output_dim {} inconsistent with n={} p={}",
                f.input_dim, f.output_dim, f.n, f.p
            )));
        }
        let m = MlpModel {
            w1: f.w1,
            b1: f.b1,
            w2: f.w2,
            b2: f.b2,
            meta: f.meta,
        };
        m.validate(f.input_dim, f.hidden_dim, f.output_dim)?;
        Ok(m)
    }
}

fn check_matrix(name: &str, m: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    if m.len() != rows {
        return Err(Error::Validation(format!(
            "{name} has {} rows, expected {rows}",
            m.len()
        )));
    }
    if let Some((i, r)) = m.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::Validation(format!(
            "{name} row {i} has {} columns, expected {cols}",
            r.len()
        )));
    }
    Ok(())
}

impl MlpModel {
    /// All-zero model for `n`-node graphs and `p` layers.
    pub fn zeros(input_dim: usize, hidden_dim: usize, p: usize) -> Self {
        let n = nodes_for_input(input_dim);
        MlpModel {
            w1: vec![vec![0.0; input_dim]; hidden_dim],
            b1: vec![0.0; hidden_dim],
            w2: vec![vec![0.0; hidden_dim]; 2 * p],
            b2: vec![0.0; 2 * p],
            meta: ModelMeta {
                n,
                p,
                ensemble: Ensemble::Manual,
                training: None,
            },
        }
    }

    /// Uniform `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` weights and biases.
    pub fn init_uniform(n: usize, p: usize, hidden_dim: usize, ensemble: Ensemble, rng: &mut impl Rng) -> Self {
        let input_dim = n * (n - 1) / 2;
        let mut m = MlpModel::zeros(input_dim, hidden_dim, p);
        m.meta.ensemble = ensemble;
        let a1 = 1.0 / (input_dim as f64).sqrt();
        let a2 = 1.0 / (hidden_dim as f64).sqrt();
        for row in &mut m.w1 {
            row.iter_mut().for_each(|w| *w = rng.gen_range(-a1..a1));
        }
        m.b1.iter_mut().for_each(|b| *b = rng.gen_range(-a1..a1));
        for row in &mut m.w2 {
            row.iter_mut().for_each(|w| *w = rng.gen_range(-a2..a2));
        }
        m.b2.iter_mut().for_each(|b| *b = rng.gen_range(-a2..a2));
        m
    }

    pub fn input_dim(&self) -> usize {
        self.w1.first().map_or(0, Vec::len)
    }

    pub fn hidden_dim(&self) -> usize {
        self.b1.len()
    }

    pub fn output_dim(&self) -> usize {
        self.b2.len()
    }

    pub fn validate(&self, input_dim: usize, hidden_dim: usize, output_dim: usize) -> Result<()> {
        check_matrix("w1", &self.w1, hidden_dim, input_dim)?;
        check_matrix("w2", &self.w2, output_dim, hidden_dim)?;
        if self.b1.len() != hidden_dim || self.b2.len() != output_dim {
            return Err(Error::Validation("bias length inconsistent with layer width".into()));
        }
        let finite = self
            .w1
            .iter()
            .chain(&self.w2)
            .flatten()
            .chain(&self.b1)
            .chain(&self.b2)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Validation("non-finite weight".into()));
        }
        Ok(())
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }

    fn output(&self, h: &[f64]) -> Vec<f64> {
        self.w2
            .iter()
            .zip(&self.b2)
            .map(|(row, b)| row.iter().zip(h).map(|(w, h)| w * h).sum::<f64>() + b)
            .collect()
    }

    /// `w2 relu(w1 x + b1) + b2`
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "model input",
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let h: Vec<f64> = self.hidden(x).into_iter().map(|v| v.max(0.0)).collect();
        Ok(self.output(&h))
    }

    fn num_params(&self) -> usize {
        let (i, h, o) = (self.input_dim(), self.hidden_dim(), self.output_dim());
        h * i + h + o * h + o
    }

    /// Parameters in the order `w1 (row-major), b1, w2 (row-major), b2`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        self.w1.iter().for_each(|r| v.extend(r));
        v.extend(&self.b1);
        self.w2.iter().for_each(|r| v.extend(r));
        v.extend(&self.b2);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut it = flat.iter().copied();
        for w in self.w1.iter_mut().flatten().chain(&mut self.b1) {
            *w = it.next().unwrap();
        }
        for w in self.w2.iter_mut().flatten().chain(&mut self.b2) {
            *w = it.next().unwrap();
        }
    }

    /// Hex SHA-256 of the serialized model.
    pub fn checksum(&self) -> String {
        let json = serde_json::to_vec(self).expect("model serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn nodes_for_input(input_dim: usize) -> usize {
    // smallest n with n(n-1)/2 == input_dim, or 0 if there is none
    (2..=64).find(|n| n * (n - 1) / 2 == input_dim).unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Sum of Euclidean residual norms.
    #[default]
    L2Norm,
    /// Sum of squared residual norms.
    SquaredL2,
}

/// One training example: encoded graph and its `[beta.., gamma..]` label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Sample {
    pub fn from_instance(r: &LabeledInstance) -> Self {
        Sample {
            x: encode_upper_triangle(&r.graph),
            y: r.beta.iter().chain(&r.gamma).copied().collect(),
        }
    }
}

fn residual_loss(out: &[f64], y: &[f64], kind: LossKind) -> f64 {
    let sq: f64 = out.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    match kind {
        LossKind::L2Norm => sq.sqrt(),
        LossKind::SquaredL2 => sq,
    }
}

fn check_batch(model: &MlpModel, batch: &[Sample]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    for s in batch {
        if s.y.len() != model.output_dim() {
            return Err(Error::DimensionMismatch {
                what: "target",
                expected: model.output_dim(),
                found: s.y.len(),
            });
        }
        if s.x.len() != model.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "model input",
                expected: model.input_dim(),
                found: s.x.len(),
            });
        }
    }
    Ok(())
}

/// Mean over the batch of `||f(x) - y||_2`.
pub fn l2_loss(model: &MlpModel, batch: &[Sample]) -> Result<f64> {
    loss(model, batch, LossKind::L2Norm)
}

pub fn loss(model: &MlpModel, batch: &[Sample], kind: LossKind) -> Result<f64> {
    check_batch(model, batch)?;
    let mut total = 0.0;
    for s in batch {
        total += residual_loss(&model.forward(&s.x)?, &s.y, kind);
    }
    Ok(total / batch.len() as f64)
}

/// Mean batch loss and its gradient with respect to [`MlpModel::to_flat`].
/// Samples with an exactly zero residual contribute no gradient under the
/// unsquared norm, where the loss is not differentiable.
pub fn loss_and_gradient(model: &MlpModel, batch: &[Sample], kind: LossKind) -> Result<(f64, Vec<f64>)> {
    check_batch(model, batch)?;
    let (ni, nh, no) = (model.input_dim(), model.hidden_dim(), model.output_dim());
    let mut grad = vec![0.0; model.num_params()];
    let (w1_off, b1_off, w2_off, b2_off) = (0, nh * ni, nh * ni + nh, nh * ni + nh + no * nh);
    let mut total = 0.0;
    let scale = 1.0 / batch.len() as f64;
    let mut dh = vec![0.0; nh];
    for s in batch {
        let pre = model.hidden(&s.x);
        let h: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
        let out = model.output(&h);
        let r: Vec<f64> = out.iter().zip(&s.y).map(|(a, b)| a - b).collect();
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dout: Vec<f64> = match kind {
            LossKind::L2Norm => {
                total += norm;
                if norm == 0.0 {
                    continue;
                }
                r.iter().map(|v| v / norm * scale).collect()
            }
            LossKind::SquaredL2 => {
                total += norm * norm;
                r.iter().map(|v| 2.0 * v * scale).collect()
            }
        };
        dh.iter_mut().for_each(|v| *v = 0.0);
        for (k, &d) in dout.iter().enumerate() {
            grad[b2_off + k] += d;
            let row = &mut grad[w2_off + k * nh..w2_off + (k + 1) * nh];
            for j in 0..nh {
                row[j] += d * h[j];
                dh[j] += d * model.w2[k][j];
            }
        }
        for j in 0..nh {
            if pre[j] <= 0.0 {
                continue;
            }
            let d = dh[j];
            grad[b1_off + j] += d;
            let row = &mut grad[w1_off + j * ni..w1_off + (j + 1) * ni];
            for (g, x) in row.iter_mut().zip(&s.x) {
                *g += d * x;
            }
        }
    }
    Ok((total * scale, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub validation_fraction: f64,
    pub patience: usize,
    pub seed: u64,
    pub hidden_dim: usize,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 200,
            validation_fraction: 0.1,
            patience: 20,
            seed: 0,
            hidden_dim: DEFAULT_HIDDEN,
            loss: LossKind::L2Norm,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidArgument("training counts must be positive".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Index 0 holds the losses of the untrained model.
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub checksum: String,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(dim: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + Self::EPS);
        }
    }
}

/// Trains a predictor on labels of a single `(n, p)` setup and returns the
/// model with the lowest validation loss.
pub fn train(dataset: &[LabeledInstance], cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    if dataset.len() < 10 {
        return Err(Error::InvalidDataset(format!(
            "need at least 10 labeled instances, got {}",
            dataset.len()
        )));
    }
    let (n, p) = (dataset[0].graph.n(), dataset[0].p);
    if let Some(bad) = dataset
        .iter()
        .find(|r| r.graph.n() != n || r.p != p || r.beta.len() != p || r.gamma.len() != p)
    {
        return Err(Error::InvalidDataset(format!(
            "instance `{}` has shape (n={}, p={}), expected (n={n}, p={p})",
            bad.instance_id,
            bad.graph.n(),
            bad.p
        )));
    }

    let mut samples: Vec<Sample> = dataset.iter().map(Sample::from_instance).collect();
    samples.shuffle(&mut seed::stream(cfg.seed, "nn-split", 0));
    let n_val = ((cfg.validation_fraction * samples.len() as f64).round() as usize).clamp(1, samples.len() - 1);
    let val = samples.split_off(samples.len() - n_val);
    let mut train_set = samples;

    let mut model = MlpModel::init_uniform(
        n,
        p,
        cfg.hidden_dim,
        dataset[0].graph.ensemble(),
        &mut seed::stream(cfg.seed, "nn-init", 0),
    );
    let mut flat = model.to_flat();
    let mut adam = Adam::new(flat.len(), cfg.learning_rate);

    let mut report = TrainReport {
        train_loss: vec![loss(&model, &train_set, cfg.loss)?],
        validation_loss: vec![loss(&model, &val, cfg.loss)?],
        best_epoch: 0,
        stopped_epoch: 0,
        checksum: String::new(),
    };
    let mut best = (report.validation_loss[0], model.clone());

    for epoch in 1..=cfg.max_epochs {
        train_set.shuffle(&mut seed::stream(cfg.seed, "nn-epoch", epoch as u64));
        for batch in train_set.chunks(cfg.batch_size) {
            let (_, grad) = loss_and_gradient(&model, batch, cfg.loss)?;
            adam.step(&mut flat, &grad);
            model.set_flat(&flat);
        }
        let tl = loss(&model, &train_set, cfg.loss)?;
        let vl = loss(&model, &val, cfg.loss)?;
        if !tl.is_finite() || !vl.is_finite() {
            return Err(Error::Validation(format!("training diverged at epoch {epoch}")));
        }
        report.train_loss.push(tl);
        report.validation_loss.push(vl);
        report.stopped_epoch = epoch;
        if vl < best.0 {
            best = (vl, model.clone());
            report.best_epoch = epoch;
        } else if epoch - report.best_epoch >= cfg.patience {
            log::debug!("early stop at epoch {epoch}, best epoch {}", report.best_epoch);
            break;
        }
    }

    let mut model = best.1;
    model.meta.training = Some(TrainSummary {
        samples: dataset.len(),
        train_size: train_set.len(),
        validation_size: val.len(),
        best_epoch: report.best_epoch,
        stopped_epoch: report.stopped_epoch,
        best_validation_loss: best.0,
        seed: cfg.seed,
    });
    report.checksum = model.checksum();
    Ok((model, report))
}

pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(model)?;
    crate::config::write_atomic(path, json.as_bytes())
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, &path.display().to_string())
}

pub fn parse_model(text: &str, origin: &str) -> Result<MlpModel> {
    serde_json::from_str(text).map_err(|e| {
        // serde reports try_from failures as `data` errors
        if e.is_data() && e.to_string().starts_with("validation failed") {
            Error::Validation(strip_location(&e.to_string()))
        } else {
            Error::Parse {
                path: origin.to_string(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            }
        }
    })
}

fn strip_location(msg: &str) -> String {
    let msg = msg.strip_prefix("validation failed: ").unwrap_or(msg);
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> MlpModel {
        let mut m = MlpModel::zeros(1, 2, 1);
        // 2-2-2 fixture needs input_dim 2; build it by hand
        m.w1 = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        m.w2 = vec![vec![1.0, 1.0], vec![1.0, -1.0]];
        m.b2 = vec![0.5, 0.0];
        m
    }

    #[test]
    fn forward_fixtures() {
        let z = MlpModel::zeros(6, 100, 2);
        assert_eq!(z.forward(&[1.0; 6]).unwrap(), vec![0.0; 4]);
        let m = tiny();
        assert_eq!(m.forward(&[1.0, -2.0]).unwrap(), vec![1.5, 1.0]);
        assert_eq!(m.forward(&[1.0, -2.0]).unwrap(), m.forward(&[1.0, -2.0]).unwrap());
        assert!(matches!(m.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn loss_fixtures() {
        let z = MlpModel::zeros(1, 3, 1);
        let batch = [Sample {
            x: vec![1.0],
            y: vec![3.0, 4.0],
        }];
        assert_eq!(l2_loss(&z, &batch).unwrap(), 5.0);
        let exact = [Sample {
            x: vec![0.0],
            y: vec![0.0, 0.0],
        }];
        assert_eq!(l2_loss(&z, &exact).unwrap(), 0.0);
        assert!(l2_loss(&z, &[]).is_err());
    }

    fn random_model(seed: u64) -> MlpModel {
        MlpModel::init_uniform(4, 2, 7, Ensemble::Manual, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn random_batch(seed: u64, count: usize) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| Sample {
                x: (0..6).map(|_| rng.gen_range(0..2) as f64).collect(),
                y: (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            })
            .collect()
    }

    #[test]
    fn backprop_matches_finite_differences() {
        for kind in [LossKind::L2Norm, LossKind::SquaredL2] {
            let model = random_model(1);
            let batch = random_batch(2, 5);
            let (_, grad) = loss_and_gradient(&model, &batch, kind).unwrap();
            let base = model.to_flat();
            let h = 1e-6;
            let mut probe = model.clone();
            for k in 0..base.len() {
                let mut x = base.clone();
                x[k] += h;
                probe.set_flat(&x);
                let up = loss(&probe, &batch, kind).unwrap();
                x[k] -= 2.0 * h;
                probe.set_flat(&x);
                let down = loss(&probe, &batch, kind).unwrap();
                let fd = (up - down) / (2.0 * h);
                let err = (fd - grad[k]).abs() / grad[k].abs().max(fd.abs()).max(1e-3);
                assert!(err < 1e-4, "{kind:?} param {k}: fd {fd} backprop {}", grad[k]);
            }
        }
    }

    #[test]
    fn flat_round_trip() {
        let m = random_model(3);
        let mut z = MlpModel::zeros(6, 7, 2);
        z.set_flat(&m.to_flat());
        assert_eq!(z.w1, m.w1);
        assert_eq!(z.b2, m.b2);
    }

    #[test]
    fn serialization_is_exact() {
        let m = random_model(4);
        let text = serde_json::to_string(&m).unwrap();
        let back = parse_model(&text, "mem").unwrap();
        assert_eq!(back, m);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert_eq!(back.forward(&x).unwrap(), m.forward(&x).unwrap());
        }
    }

    #[test]
    fn malformed_model_files() {
        let m = random_model(5);
        let text = serde_json::to_string_pretty(&m).unwrap();
        match parse_model(&text[..text.len() / 2], "cut.json") {
            Err(Error::Parse { line, path, .. }) => {
                assert!(line > 0);
                assert_eq!(path, "cut.json");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["w1"].as_array_mut().unwrap().pop();
        match parse_model(&v.to_string(), "rows.json") {
            Err(Error::Validation(msg)) => assert!(msg.contains("w1"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["schema"] = "mlp-v0".into();
        assert!(matches!(
            parse_model(&v.to_string(), "s.json"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn file_layout() {
        let v: serde_json::Value = serde_json::to_value(random_model(6)).unwrap();
        for key in [
            "schema",
            "n",
            "p",
            "input_dim",
            "hidden_dim",
            "output_dim",
            "activation",
            "w1",
            "b1",
            "w2",
            "b2",
            "meta",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["schema"], "mlp-v1");
        assert_eq!(v["activation"], "relu");
        assert_eq!(v["input_dim"], 6);
        assert_eq!(v["output_dim"], 4);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                validation_fraction: 0.0,
                ..Default::default()
            },
            TrainConfig {
                validation_fraction: 1.0,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                learning_rate: -1.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    /// Random graphs labeled with a smooth function of their density.
    fn synthetic(count: usize, n: usize, p: usize, seed: u64) -> Vec<LabeledInstance> {
        let ens = crate::pipeline::EnsembleSpec::Random {
            prob_lo: 0.3,
            prob_hi: 0.9,
        };
        crate::pipeline::sample_graphs(&ens, n, count, seed, "synthetic", "syn")
            .unwrap()
            .into_iter()
            .enumerate()
            .map(|(i, graph)| {
                let q = graph.edge_prob();
                LabeledInstance {
                    dataset_id: "syn".into(),
                    instance_id: format!("syn-{i}"),
                    p,
                    beta: (0..p).map(|l| 0.5 - 0.2 * q - 0.05 * l as f64).collect(),
                    gamma: (0..p).map(|l| 0.3 + 0.4 * q + 0.1 * l as f64).collect(),
                    graph,
                    final_cost: 0.0,
                    approx_ratio: 1.0,
                    init_method: crate::initializers::InitMethod::Tqa,
                    optimizer_iters: 0,
                    cost_evals: 0,
                    grad_evals: 0,
                    converged: true,
                }
            })
            .collect()
    }

    fn overfit_fixture() -> Vec<LabeledInstance> {
        crate::pipeline::build_dataset(&crate::pipeline::DatasetConfig {
            dataset_id: "overfit".into(),
            n: 6,
            p: 1,
            count: 10,
            master_seed: 14,
            ..Default::default()
        })
        .unwrap()
        .records
    }

    #[test]
    fn overfit_fixture_first_epochs_non_increasing() {
        let cfg = TrainConfig {
            max_epochs: 10,
            patience: 10,
            ..Default::default()
        };
        let (_, report) = train(&overfit_fixture(), &cfg).unwrap();
        assert_eq!(report.train_loss.len(), 11);
        for w in report.train_loss.windows(2) {
            assert!(w[1] <= w[0], "{:?}", report.train_loss);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = synthetic(40, 6, 2, 3);
        let cfg = TrainConfig {
            max_epochs: 15,
            seed: 9,
            ..Default::default()
        };
        let (m1, r1) = train(&data, &cfg).unwrap();
        let (m2, r2) = train(&data, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(m1, m2);
        let (_, r3) = train(&data, &TrainConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(r1.train_loss, r3.train_loss);
    }

    #[test]
    fn returns_best_validation_model() {
        let data = synthetic(60, 6, 2, 4);
        let cfg = TrainConfig {
            max_epochs: 80,
            patience: 5,
            seed: 2,
            ..Default::default()
        };
        let (model, report) = train(&data, &cfg).unwrap();
        assert!(report.stopped_epoch <= cfg.max_epochs);
        assert!(report.validation_loss[report.best_epoch] <= report.validation_loss[0]);
        let best = report.validation_loss.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(report.validation_loss[report.best_epoch], best);
        let summary = model.meta.training.as_ref().unwrap();
        assert_eq!(summary.best_validation_loss, best);
        assert_eq!(summary.validation_size, 6);
        assert_eq!(report.checksum, model.checksum());
        assert!(report
            .train_loss
            .iter()
            .chain(&report.validation_loss)
            .all(|&v| v >= 0.0));
    }

    #[test]
    fn trained_predictions_differ_across_graphs() {
        let data = synthetic(100, 10, 2, 5);
        let (model, _) = train(
            &data,
            &TrainConfig {
                max_epochs: 30,
                seed: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let ens = crate::pipeline::EnsembleSpec::Random {
            prob_lo: 0.3,
            prob_hi: 0.9,
        };
        let gs = crate::pipeline::sample_graphs(&ens, 10, 2, 77, "test", "t").unwrap();
        let a = model.forward(&encode_upper_triangle(&gs[0])).unwrap();
        let b = model.forward(&encode_upper_triangle(&gs[1])).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn rejects_bad_datasets() {
        let data = synthetic(12, 6, 2, 6);
        assert!(matches!(
            train(&data[..9], &TrainConfig::default()),
            Err(Error::InvalidDataset(_))
        ));
        let mut mixed = data.clone();
        mixed.extend(synthetic(2, 7, 2, 7));
        assert!(matches!(
            train(&mixed, &TrainConfig::default()),
            Err(Error::InvalidDataset(_))
        ));
        let mut deep = data;
        deep.extend(synthetic(1, 6, 3, 8));
        assert!(matches!(
            train(&deep, &TrainConfig::default()),
            Err(Error::InvalidDataset(_))
        ));
    }
}
