//! Small differentiable encoder + linear softmax head with hand-written gradients.
//!
//! Forward: `x -> encoder -> [calibrate] -> pool -> W phi + b -> softmax CE`.
//! The calibration mask of each sample is computed in the forward pass and held
//! fixed in the backward pass; anchors never receive gradients.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::anchors::AnchorSet;
use crate::calibrate::{calibrate, calibrate_adjoint, CalibrationConfig};
use crate::container::{meta_parse, Container};
use crate::error::{Result, SscfError};
use crate::matrix::Matrix;
use crate::spectral::{rfft_adjoint, rfft_matrix, FeatureMap, SpectralConfig};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub c_out: usize,
    pub c_in: usize,
    pub width: usize,
    pub stride: usize,
    /// `c_out x c_in x width`, row-major.
    pub kernels: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn new(c_out: usize, c_in: usize, width: usize, stride: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / ((c_in * width) as f64).sqrt();
        Conv1d {
            c_out,
            c_in,
            width,
            stride,
            kernels: (0..c_out * c_in * width).map(|_| rng.gen_range(-bound..bound)).collect(),
            bias: (0..c_out).map(|_| rng.gen_range(0.0..bound)).collect(),
        }
    }

    #[inline]
    fn k(&self, o: usize, i: usize, j: usize) -> f64 {
        self.kernels[(o * self.c_in + i) * self.width + j]
    }

    pub fn out_len(&self, t: usize) -> Option<usize> {
        (t >= self.width).then(|| (t - self.width) / self.stride + 1)
    }

    /// Pre-activation `b + sum K * x` (valid cross-correlation).
    pub fn pre_activation(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.c_in {
            return Err(SscfError::ShapeMismatch(format!(
                "conv expects {} input channels, got {}",
                self.c_in,
                x.rows()
            )));
        }
        let len = self.out_len(x.cols()).ok_or_else(|| {
            SscfError::ShapeMismatch(format!("input length {} < kernel width {}", x.cols(), self.width))
        })?;
        let mut out = Matrix::zeros(self.c_out, len);
        for o in 0..self.c_out {
            let row = out.row_mut(o);
            row.iter_mut().for_each(|v| *v = self.bias[o]);
            for i in 0..self.c_in {
                let xi = x.row(i);
                let ker = &self.kernels[(o * self.c_in + i) * self.width..][..self.width];
                for (t, v) in row.iter_mut().enumerate() {
                    let s = t * self.stride;
                    *v += ker.iter().zip(&xi[s..s + self.width]).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum EncoderParams {
    Identity { channels: usize },
    /// Conv1d followed by ReLU.
    Conv1d(Conv1d),
}

impl EncoderParams {
    pub fn n_params(&self) -> usize {
        match self {
            EncoderParams::Identity { .. } => 0,
            EncoderParams::Conv1d(c) => c.kernels.len() + c.bias.len(),
        }
    }

    pub fn out_channels(&self) -> usize {
        match self {
            EncoderParams::Identity { channels } => *channels,
            EncoderParams::Conv1d(c) => c.c_out,
        }
    }

    pub fn out_len(&self, t: usize) -> Option<usize> {
        match self {
            EncoderParams::Identity { .. } => Some(t),
            EncoderParams::Conv1d(c) => c.out_len(t),
        }
    }
}

/// Encoder forward pass; also returns the conv pre-activation when there is one.
fn encode_with_cache(params: &EncoderParams, x: &Matrix) -> Result<(Matrix, Option<Matrix>)> {
    match params {
        EncoderParams::Identity { channels } => {
            if x.rows() != *channels {
                return Err(SscfError::ShapeMismatch(format!(
                    "identity encoder expects {channels} channels, got {}",
                    x.rows()
                )));
            }
            Ok((x.clone(), None))
        }
        EncoderParams::Conv1d(conv) => {
            let pre = conv.pre_activation(x)?;
            Ok((pre.map(|v| v.max(0.0)), Some(pre)))
        }
    }
}

pub fn encode(params: &EncoderParams, x: &Matrix) -> Result<FeatureMap> {
    FeatureMap::new(encode_with_cache(params, x)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Per-channel time average: `C` features.
    GlobalMean,
    /// Per-channel, per-bin power `|rfft(y)|^2 / L^2`: `C (L/2+1)` features.
    SpectralPower,
}

impl Pooling {
    pub fn features(self, channels: usize, len: usize) -> usize {
        match self {
            Pooling::GlobalMean => channels,
            Pooling::SpectralPower => channels * (len / 2 + 1),
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::GlobalMean => "global_mean",
            Pooling::SpectralPower => "spectral_power",
        })
    }
}

impl FromStr for Pooling {
    type Err = SscfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global_mean" => Ok(Pooling::GlobalMean),
            "spectral_power" => Ok(Pooling::SpectralPower),
            other => Err(SscfError::Validation(format!("unknown pooling '{other}'"))),
        }
    }
}

fn pool(pooling: Pooling, y: &Matrix) -> Vec<f64> {
    match pooling {
        Pooling::GlobalMean => y
            .row_iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect(),
        Pooling::SpectralPower => {
            let norm = 1.0 / (y.cols() as f64).powi(2);
            rfft_matrix(y).as_slice().iter().map(|z| z.norm_sqr() * norm).collect()
        }
    }
}

fn pool_backward(pooling: Pooling, y: &Matrix, grad: &[f64]) -> Matrix {
    let (c, len) = y.shape();
    match pooling {
        Pooling::GlobalMean => {
            let mut out = Matrix::zeros(c, len);
            for (ch, g) in grad.iter().enumerate() {
                let v = g / len as f64;
                out.row_mut(ch).iter_mut().for_each(|o| *o = v);
            }
            out
        }
        Pooling::SpectralPower => {
            let norm = 2.0 / (len as f64).powi(2);
            let mut spec = rfft_matrix(y);
            for c in 0..spec.channels() {
                let bins = spec.bins();
                for (z, g) in spec.channel_mut(c).iter_mut().zip(&grad[c * bins..(c + 1) * bins]) {
                    *z = Complex64::new(z.re * g * norm, z.im * g * norm);
                }
            }
            rfft_adjoint(&spec)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub pooling: Pooling,
    pub classes: usize,
    /// `classes x features`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl ClassifierParams {
    /// Small random weights, zero bias.
    pub fn new(pooling: Pooling, channels: usize, len: usize, classes: usize, seed: u64) -> Result<Self> {
        if classes < 2 {
            return Err(SscfError::Validation(format!("need at least 2 classes, got {classes}")));
        }
        let features = pooling.features(channels, len);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = (0..classes * features).map(|_| rng.gen_range(-0.01..0.01)).collect();
        Ok(ClassifierParams {
            pooling,
            classes,
            weights: Matrix::from_vec(classes, features, w)?,
            bias: vec![0.0; classes],
        })
    }

    pub fn zeros(pooling: Pooling, channels: usize, len: usize, classes: usize) -> Self {
        let features = pooling.features(channels, len);
        ClassifierParams {
            pooling,
            classes,
            weights: Matrix::zeros(classes, features),
            bias: vec![0.0; classes],
        }
    }

    fn logits(&self, phi: &[f64]) -> Result<Vec<f64>> {
        if phi.len() != self.weights.cols() {
            return Err(SscfError::ShapeMismatch(format!(
                "{} pooled features but head expects {}",
                phi.len(),
                self.weights.cols()
            )));
        }
        Ok((0..self.classes)
            .map(|c| self.bias[c] + self.weights.row(c).iter().zip(phi).map(|(w, f)| w * f).sum::<f64>())
            .collect())
    }
}

/// Anchors and configs for the calibration stage between encoder and head.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationStage<'a> {
    pub anchors: &'a AnchorSet,
    pub spectral: &'a SpectralConfig,
    pub calibration: &'a CalibrationConfig,
}

#[derive(Debug, Clone)]
struct SampleCache {
    x: Matrix,
    pre: Option<Matrix>,
    y: Matrix,
    mask: Option<Matrix>,
    phi: Vec<f64>,
    probs: Vec<f64>,
    label: usize,
}

/// Loss, logits and everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub loss: f64,
    pub logits: Vec<Vec<f64>>,
    /// Matched stratum per sample (None without calibration).
    pub strata: Vec<Option<usize>>,
    cache: Vec<SampleCache>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Flattened like [`EncoderParams`]: kernels then bias. Empty for identity.
    pub encoder: Vec<f64>,
    pub weights: Matrix,
    pub bias: Vec<f64>,
    /// Gradient with respect to each raw input series.
    pub inputs: Vec<Matrix>,
}

impl Gradients {
    /// Parameter gradients in [`Model::flat_params`] order.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.encoder.clone();
        v.extend_from_slice(self.weights.as_slice());
        v.extend_from_slice(&self.bias);
        v
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

#[derive(Debug, Clone)]
pub struct Model {
    pub encoder: EncoderParams,
    pub classifier: ClassifierParams,
    last: Option<ForwardPass>,
}

impl Model {
    pub fn new(encoder: EncoderParams, classifier: ClassifierParams) -> Self {
        Model {
            encoder,
            classifier,
            last: None,
        }
    }

    pub fn n_params(&self) -> usize {
        self.encoder.n_params() + self.classifier.weights.as_slice().len() + self.classifier.bias.len()
    }

    /// Encoder parameters (kernels, bias), then head weights, then head bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        if let EncoderParams::Conv1d(c) = &self.encoder {
            v.extend_from_slice(&c.kernels);
            v.extend_from_slice(&c.bias);
        }
        v.extend_from_slice(self.classifier.weights.as_slice());
        v.extend_from_slice(&self.classifier.bias);
        v
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(SscfError::ShapeMismatch(format!(
                "{} values for {} parameters",
                params.len(),
                self.n_params()
            )));
        }
        let mut rest = params;
        if let EncoderParams::Conv1d(c) = &mut self.encoder {
            let (k, r) = rest.split_at(c.kernels.len());
            c.kernels.copy_from_slice(k);
            let (b, r) = r.split_at(c.bias.len());
            c.bias.copy_from_slice(b);
            rest = r;
        }
        let (w, b) = rest.split_at(self.classifier.weights.as_slice().len());
        self.classifier.weights.as_mut_slice().copy_from_slice(w);
        self.classifier.bias.copy_from_slice(b);
        Ok(())
    }

    /// Logits for one series (no loss, no cache).
    pub fn predict_logits(&self, x: &Matrix, stage: Option<CalibrationStage<'_>>) -> Result<(Vec<f64>, Option<usize>)> {
        let (h, _) = encode_with_cache(&self.encoder, x)?;
        let (y, k) = match stage {
            Some(s) => {
                let out = calibrate(&FeatureMap::new(h)?, s.anchors, s.spectral, s.calibration)?;
                (out.data.into_matrix(), Some(out.matched_stratum))
            }
            None => (h, None),
        };
        Ok((self.classifier.logits(&pool(self.classifier.pooling, &y))?, k))
    }

    pub fn predict(&self, x: &Matrix, stage: Option<CalibrationStage<'_>>) -> Result<usize> {
        let (logits, _) = self.predict_logits(x, stage)?;
        Ok(argmax(&logits))
    }

    /// Mean softmax cross-entropy over the batch; caches what [`Model::backward`] needs.
    pub fn forward_loss(&mut self, batch: &[(&Matrix, usize)], stage: Option<CalibrationStage<'_>>) -> Result<f64> {
        let pass = forward_loss(&self.encoder, &self.classifier, stage, batch)?;
        let loss = pass.loss;
        self.last = Some(pass);
        Ok(loss)
    }

    pub fn last_forward(&self) -> Option<&ForwardPass> {
        self.last.as_ref()
    }

    /// Gradients of the most recent [`Model::forward_loss`].
    pub fn backward(&self) -> Result<Gradients> {
        let pass = self
            .last
            .as_ref()
            .ok_or_else(|| SscfError::State("backward called before forward_loss".into()))?;
        backward(&self.encoder, &self.classifier, pass)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = json!({ "encoder": self.encoder, "pooling": self.classifier.pooling, "classes": self.classifier.classes });
        let mut c = Container::new("checkpoint", CHECKPOINT_FORMAT_VERSION, meta);
        let (rows, cols) = self.classifier.weights.shape();
        c.push("weights", vec![rows, cols], self.classifier.weights.as_slice().to_vec());
        c.push("bias", vec![self.classifier.bias.len()], self.classifier.bias.clone());
        c.save(path)
    }

    pub fn load(path: &Path) -> Result<Model> {
        let c = Container::load(path)?;
        c.expect("checkpoint", CHECKPOINT_FORMAT_VERSION)?;
        let encoder: EncoderParams = meta_parse(&c.meta, "encoder")?;
        let pooling: Pooling = meta_parse(&c.meta, "pooling")?;
        let classes: usize = meta_parse(&c.meta, "classes")?;
        let (info, w) = c.array("weights")?;
        if info.shape.len() != 2 || info.shape[0] != classes {
            return Err(SscfError::Format("bad weight shape".into()));
        }
        let weights = Matrix::from_vec(info.shape[0], info.shape[1], w.clone())?;
        let (_, bias) = c.array("bias")?;
        if bias.len() != classes {
            return Err(SscfError::Format("bad bias length".into()));
        }
        Ok(Model::new(
            encoder,
            ClassifierParams {
                pooling,
                classes,
                weights,
                bias: bias.clone(),
            },
        ))
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn forward_loss(
    enc: &EncoderParams,
    clf: &ClassifierParams,
    stage: Option<CalibrationStage<'_>>,
    batch: &[(&Matrix, usize)],
) -> Result<ForwardPass> {
    if batch.is_empty() {
        return Err(SscfError::InvalidInput("empty batch".into()));
    }
    let mut cache = Vec::with_capacity(batch.len());
    let mut logits_all = Vec::with_capacity(batch.len());
    let mut strata = Vec::with_capacity(batch.len());
    let mut loss = 0.0;
    for &(x, label) in batch {
        if label >= clf.classes {
            return Err(SscfError::LabelOutOfRange {
                label,
                classes: clf.classes,
            });
        }
        let (h, pre) = encode_with_cache(enc, x)?;
        let (y, mask, k) = match stage {
            Some(s) => {
                let out = calibrate(&FeatureMap::new(h)?, s.anchors, s.spectral, s.calibration)?;
                (out.data.into_matrix(), Some(out.mask), Some(out.matched_stratum))
            }
            None => (h, None, None),
        };
        let phi = pool(clf.pooling, &y);
        let logits = clf.logits(&phi)?;
        let logp = log_softmax(&logits);
        loss -= logp[label];
        cache.push(SampleCache {
            x: x.clone(),
            pre,
            y,
            mask,
            phi,
            probs: logp.iter().map(|l| l.exp()).collect(),
            label,
        });
        logits_all.push(logits);
        strata.push(k);
    }
    Ok(ForwardPass {
        loss: loss / batch.len() as f64,
        logits: logits_all,
        strata,
        cache,
    })
}

pub fn backward(enc: &EncoderParams, clf: &ClassifierParams, pass: &ForwardPass) -> Result<Gradients> {
    let n = pass.cache.len() as f64;
    let mut g_w = Matrix::zeros(clf.classes, clf.weights.cols());
    let mut g_b = vec![0.0; clf.classes];
    let mut g_enc = vec![0.0; enc.n_params()];
    let mut g_inputs = Vec::with_capacity(pass.cache.len());

    for s in &pass.cache {
        let dlogits: Vec<f64> = s
            .probs
            .iter()
            .enumerate()
            .map(|(c, p)| (p - if c == s.label { 1.0 } else { 0.0 }) / n)
            .collect();
        for (c, &d) in dlogits.iter().enumerate() {
            g_b[c] += d;
            for (g, f) in g_w.row_mut(c).iter_mut().zip(&s.phi) {
                *g += d * f;
            }
        }
        let mut dphi = vec![0.0; s.phi.len()];
        for (c, &d) in dlogits.iter().enumerate() {
            for (g, w) in dphi.iter_mut().zip(clf.weights.row(c)) {
                *g += d * w;
            }
        }
        let dy = pool_backward(clf.pooling, &s.y, &dphi);
        let dh = match &s.mask {
            Some(mask) => calibrate_adjoint(&dy, mask)?,
            None => dy,
        };
        let dx = match enc {
            EncoderParams::Identity { .. } => dh,
            EncoderParams::Conv1d(conv) => {
                let pre = s.pre.as_ref().ok_or_else(|| SscfError::State("missing conv cache".into()))?;
                conv_backward(conv, &s.x, pre, &dh, &mut g_enc)
            }
        };
        g_inputs.push(dx);
    }
    Ok(Gradients {
        encoder: g_enc,
        weights: g_w,
        bias: g_b,
        inputs: g_inputs,
    })
}

fn conv_backward(conv: &Conv1d, x: &Matrix, pre: &Matrix, dh: &Matrix, g_enc: &mut [f64]) -> Matrix {
    let (g_k, g_b) = g_enc.split_at_mut(conv.kernels.len());
    let mut dx = Matrix::zeros(x.rows(), x.cols());
    for o in 0..conv.c_out {
        let dpre: Vec<f64> = dh
            .row(o)
            .iter()
            .zip(pre.row(o))
            .map(|(&g, &p)| if p > 0.0 { g } else { 0.0 })
            .collect();
        g_b[o] += dpre.iter().sum::<f64>();
        for i in 0..conv.c_in {
            let xi = x.row(i);
            for j in 0..conv.width {
                let idx = (o * conv.c_in + i) * conv.width + j;
                let kv = conv.k(o, i, j);
                let mut acc = 0.0;
                for (t, &d) in dpre.iter().enumerate() {
                    let pos = t * conv.stride + j;
                    acc += d * xi[pos];
                    dx.as_mut_slice()[i * x.cols() + pos] += d * kv;
                }
                g_k[idx] += acc;
            }
        }
    }
    dx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = SscfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(SscfError::Validation(format!("unknown optimizer '{other}'"))),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

/// `theta <- theta - lr * grad`.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(SscfError::ShapeMismatch(format!(
            "{} params vs {} grads",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64, t: u32, m: Vec<f64>, v: Vec<f64> },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                t: 0,
                m: vec![0.0; n_params],
                v: vec![0.0; n_params],
            },
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        match self {
            Optimizer::Sgd { lr } => sgd_step(params, grads, *lr),
            Optimizer::Adam { lr, beta1, beta2, eps, t, m, v } => {
                if params.len() != grads.len() || params.len() != m.len() {
                    return Err(SscfError::ShapeMismatch(format!(
                        "{} params vs {} grads vs {} moments",
                        params.len(),
                        grads.len(),
                        m.len()
                    )));
                }
                *t += 1;
                let bc1 = 1.0 - beta1.powi(*t as i32);
                let bc2 = 1.0 - beta2.powi(*t as i32);
                for i in 0..params.len() {
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * grads[i];
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * grads[i] * grads[i];
                    let mh = m[i] / bc1;
                    let vh = v[i] / bc2;
                    params[i] -= *lr * mh / (vh.sqrt() + *eps);
                }
                Ok(())
            }
        }
    }

    /// Runs `model.backward()` and applies the update.
    pub fn apply(&mut self, model: &mut Model) -> Result<()> {
        let grads = model.backward()?.flat();
        let mut params = model.flat_params();
        self.step(&mut params, &grads)?;
        model.set_flat_params(&params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_conv() -> Conv1d {
        Conv1d {
            c_out: 1,
            c_in: 1,
            width: 1,
            stride: 1,
            kernels: vec![1.0],
            bias: vec![0.0],
        }
    }

    #[test]
    fn encoder_examples() {
        let x = Matrix::from_rows(&[vec![0.5, 1.0, 2.0, 0.1]]).unwrap();
        let id = EncoderParams::Identity { channels: 1 };
        assert_eq!(encode(&id, &x).unwrap().matrix(), &x);
        let unit = EncoderParams::Conv1d(toy_conv());
        assert_eq!(encode(&unit, &x).unwrap().matrix(), &x);
        assert!(encode(&EncoderParams::Identity { channels: 2 }, &x).is_err());
    }

    #[test]
    fn conv_matches_sliding_window_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let conv = Conv1d::new(1, 1, 3, 1, 5);
        let out = encode(&EncoderParams::Conv1d(conv.clone()), &Matrix::from_rows(&[x.clone()]).unwrap()).unwrap();
        assert_eq!(out.len(), 6);
        for t in 0..6 {
            let mut e = conv.bias[0];
            for j in 0..3 {
                e += conv.kernels[j] * x[t + j];
            }
            assert!((out.matrix().get(0, t) - e.max(0.0)).abs() < 1e-15);
        }
        let strided = Conv1d { stride: 2, ..conv };
        assert_eq!(strided.out_len(8), Some(3));
        assert_eq!(strided.out_len(2), None);
    }

    #[test]
    fn uniform_logits_give_log_classes() {
        let clf = ClassifierParams::zeros(Pooling::GlobalMean, 2, 8, 4);
        let x = Matrix::filled(2, 8, 0.3);
        let pass = forward_loss(&EncoderParams::Identity { channels: 2 }, &clf, None, &[(&x, 1), (&x, 3)]).unwrap();
        assert!((pass.loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_margin_drives_loss_to_zero() {
        let mut clf = ClassifierParams::zeros(Pooling::GlobalMean, 1, 4, 2);
        clf.bias = vec![500.0, -500.0];
        let x = Matrix::filled(1, 4, 1.0);
        let pass = forward_loss(&EncoderParams::Identity { channels: 1 }, &clf, None, &[(&x, 0)]).unwrap();
        assert!(pass.loss < 1e-12);
    }

    #[test]
    fn loss_matches_scalar_recomputation() {
        let enc = EncoderParams::Identity { channels: 2 };
        let mut clf = ClassifierParams::zeros(Pooling::GlobalMean, 2, 4, 3);
        clf.weights = Matrix::from_rows(&[vec![1.0, -1.0], vec![0.5, 2.0], vec![-0.3, 0.1]]).unwrap();
        clf.bias = vec![0.1, 0.0, -0.2];
        let x1 = Matrix::from_rows(&[vec![1.0, 2.0, 3.0, 2.0], vec![0.0, 0.0, 1.0, 1.0]]).unwrap();
        let x2 = Matrix::from_rows(&[vec![-1.0, 0.0, 1.0, 0.0], vec![2.0, 2.0, 2.0, 2.0]]).unwrap();
        let pass = forward_loss(&enc, &clf, None, &[(&x1, 0), (&x2, 2)]).unwrap();
        // x1 means: 2.0, 0.5; x2 means: 0.0, 2.0
        let l1 = [0.1 + 2.0 - 0.5, 0.0 + 1.0 + 1.0, -0.2 - 0.6 + 0.05];
        let l2 = [0.1 + 0.0 - 2.0, 0.0 + 0.0 + 4.0, -0.2 + 0.0 + 0.2];
        let ce = |l: [f64; 3], y: usize| -> f64 {
            let s: f64 = l.iter().map(|v| v.exp()).sum();
            -(l[y].exp() / s).ln()
        };
        let expected = 0.5 * (ce(l1, 0) + ce(l2, 2));
        assert!((pass.loss - expected).abs() < 1e-12);
        assert!(forward_loss(&enc, &clf, None, &[(&x1, 3)]).is_err());
    }

    #[test]
    fn backward_needs_forward() {
        let m = Model::new(EncoderParams::Identity { channels: 1 }, ClassifierParams::zeros(Pooling::GlobalMean, 1, 4, 2));
        assert!(matches!(m.backward(), Err(SscfError::State(_))));
    }

    #[test]
    fn bias_gradient_is_mean_softmax_minus_onehot() {
        let mut m = Model::new(EncoderParams::Identity { channels: 1 }, ClassifierParams::zeros(Pooling::GlobalMean, 1, 4, 2));
        let a = Matrix::filled(1, 4, 1.0);
        let b = Matrix::filled(1, 4, -1.0);
        m.forward_loss(&[(&a, 0), (&b, 1)], None).unwrap();
        let g = m.backward().unwrap();
        assert!(g.encoder.is_empty());
        // zero weights: probs 0.5 each; mean(p - onehot) = 0 per class
        assert!(g.bias.iter().all(|v| v.abs() < 1e-15));
        m.forward_loss(&[(&a, 0)], None).unwrap();
        let g = m.backward().unwrap();
        assert!((g.bias[0] + 0.5).abs() < 1e-15 && (g.bias[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sgd_and_adam_steps() {
        let mut p = vec![1.0];
        sgd_step(&mut p, &[0.5], 0.1).unwrap();
        assert!((p[0] - 0.95).abs() < 1e-15);
        let mut z = vec![3.0, -2.0];
        sgd_step(&mut z, &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(z, vec![3.0, -2.0]);
        assert!(sgd_step(&mut z, &[0.0], 0.1).is_err());

        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, 1);
        let mut q = vec![1.0];
        opt.step(&mut q, &[0.3]).unwrap();
        // m = 0.03, v = 9e-5; m/(1-0.9)=0.3; v/(1-0.999)=0.09; step = 0.3/(0.3+1e-8)
        let expected = 1.0 - 0.01 * 0.3 / (0.09f64.sqrt() + 1e-8);
        assert!((q[0] - expected).abs() < 1e-15);
    }
}
