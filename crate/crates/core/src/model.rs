//! Late-fusion prediction network: one MLP encoder per modality, encoder
//! outputs concatenated and fed through a fusion MLP and a linear head.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Label, Modality, Sample};
use crate::diff::{Graph, NodeId, Tensor};
use crate::error::{config_err, shape_err, Error, Result};
use crate::rng::{streams, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Regression,
    Classification { classes: usize },
}

impl Head {
    pub fn outputs(self) -> usize {
        match self {
            Head::Regression => 1,
            Head::Classification { classes } => classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Input feature dimension per modality, indexed by [`Modality::index`].
    pub dims: [usize; 3],
    pub encoder_hidden: [Vec<usize>; 3],
    pub fusion_hidden: Vec<usize>,
    pub head: Head,
    pub activation: Activation,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for m in Modality::ALL {
            if self.dims[m.index()] == 0 {
                return Err(config_err(format!("{} dimension must be >= 1", m.name())));
            }
            if self.encoder_hidden[m.index()].contains(&0) {
                return Err(config_err(format!("{} encoder has a zero-width layer", m.name())));
            }
        }
        if self.fusion_hidden.contains(&0) {
            return Err(config_err("fusion head has a zero-width layer"));
        }
        if let Head::Classification { classes } = self.head {
            if classes < 2 {
                return Err(config_err("classification needs at least 2 classes"));
            }
        }
        Ok(())
    }

    /// `(name, fan_in, fan_out)` for every dense layer, in parameter order.
    fn layers(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        let mut fused = 0;
        for m in Modality::ALL {
            let mut width = self.dims[m.index()];
            for (i, &h) in self.encoder_hidden[m.index()].iter().enumerate() {
                out.push((format!("{}.enc{}", m.name(), i), width, h));
                width = h;
            }
            fused += width;
        }
        let mut width = fused;
        for (i, &h) in self.fusion_hidden.iter().enumerate() {
            out.push((format!("fusion{}", i), width, h));
            width = h;
        }
        out.push((String::from("head"), width, self.head.outputs()));
        out
    }
}

/// Named parameter tensors in a fixed enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    entries: Vec<(String, Tensor)>,
}

impl Parameters {
    pub fn new(entries: Vec<(String, Tensor)>) -> Self {
        Parameters { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.entries.iter().map(|(_, t)| t)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<(String, Tensor)> {
        self.entries
    }

    /// Total number of scalar values.
    pub fn numel(&self) -> usize {
        self.tensors().map(Tensor::numel).sum()
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Parameters { entries: self.entries.iter().map(|(n, t)| (n.clone(), Tensor::zeros(t.shape()))).collect() }
    }

    /// Errors unless `other` enumerates the same names with the same shapes.
    pub fn check_aligned(&self, other: &Parameters) -> Result<()> {
        if self.len() != other.len() {
            return Err(shape_err("parameters", format!("{} tensors vs {}", self.len(), other.len())));
        }
        for ((na, ta), (nb, tb)) in self.entries.iter().zip(&other.entries) {
            if na != nb || ta.shape() != tb.shape() {
                return Err(shape_err("parameters", format!("{na}{:?} vs {nb}{:?}", ta.shape(), tb.shape())));
            }
        }
        Ok(())
    }

    /// Elementwise combination of two aligned parameter sets.
    pub fn zip_map(&self, other: &Parameters, f: impl Fn(f64, f64) -> f64) -> Result<Parameters> {
        self.check_aligned(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|((n, a), (_, b))| {
                let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
                Tensor::new(a.shape().to_vec(), data).map(|t| (n.clone(), t))
            })
            .collect::<Result<_>>()?;
        Ok(Parameters { entries })
    }

    pub fn max_abs_diff(&self, other: &Parameters) -> Result<f64> {
        let d = self.zip_map(other, |a, b| (a - b).abs())?;
        Ok(d.tensors().flat_map(|t| t.data().iter().copied()).fold(0.0, f64::max))
    }
}

/// Stacked modality features for a batch of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// `[n, T_m]` per modality.
    pub features: [Tensor; 3],
    pub targets: Targets,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Scores(Vec<f64>),
    Classes(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Scores(v) => v.len(),
            Targets::Classes(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Batch {
    /// Stacks samples; all must share dimensions and label kind.
    pub fn from_samples(samples: &[Sample]) -> Result<Batch> {
        let first = samples.first().ok_or(Error::EmptyInput("batch"))?;
        let mut features: [Vec<&[f64]>; 3] = Default::default();
        for s in samples {
            for m in Modality::ALL {
                features[m.index()].push(s.features[m.index()].as_slice());
            }
        }
        let [a, v, l] = features;
        let features = [Tensor::from_rows(&a)?, Tensor::from_rows(&v)?, Tensor::from_rows(&l)?];
        let targets = match first.label {
            Label::Score(_) => Targets::Scores(
                samples
                    .iter()
                    .map(|s| match s.label {
                        Label::Score(y) => Ok(y),
                        Label::Class(_) => Err(config_err("mixed label kinds in batch")),
                    })
                    .collect::<Result<_>>()?,
            ),
            Label::Class(_) => Targets::Classes(
                samples
                    .iter()
                    .map(|s| match s.label {
                        Label::Class(c) => Ok(c),
                        Label::Score(_) => Err(config_err("mixed label kinds in batch")),
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(Batch { features, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// The prediction model `f(X; θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    config: ModelConfig,
}

impl FusionModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(FusionModel { config })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Uniform weights in `[-s, s]`, `s = sqrt(6 / (fan_in + fan_out))`, and
    /// zero biases. Weights are stored `[fan_in, fan_out]`.
    pub fn init_params(&self, seed: u64) -> Parameters {
        let mut rng = Rng::with_stream(seed, streams::INIT);
        let mut entries = Vec::new();
        for (name, fan_in, fan_out) in self.config.layers() {
            let s = glorot_bound(fan_in, fan_out);
            let w: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.uniform(-s, s)).collect();
            entries.push((format!("{name}.weight"), Tensor::new(vec![fan_in, fan_out], w).expect("weight shape")));
            entries.push((format!("{name}.bias"), Tensor::zeros(&[fan_out])));
        }
        Parameters { entries }
    }

    /// Records the forward pass; `params` are the leaves holding θ in
    /// enumeration order. Output is `[n, 1]` (regression) or `[n, C]`.
    pub fn forward(&self, g: &mut Graph, params: &[NodeId], batch: &Batch) -> Result<NodeId> {
        let layers = self.config.layers();
        if params.len() != 2 * layers.len() {
            return Err(shape_err(
                "forward",
                format!("expected {} parameter tensors, got {}", 2 * layers.len(), params.len()),
            ));
        }
        let n = batch.len();
        if n == 0 {
            return Err(Error::EmptyInput("forward"));
        }
        let mut layer = 0;
        let mut dense = |g: &mut Graph, x: NodeId, activate: bool| -> Result<NodeId> {
            let (w, b) = (params[2 * layer], params[2 * layer + 1]);
            layer += 1;
            let xw = g.matmul(x, w)?;
            let y = g.add(xw, b)?;
            if !activate {
                return Ok(y);
            }
            match self.config.activation {
                Activation::Relu => g.relu(y),
                Activation::Tanh => g.tanh(y),
            }
        };
        let mut encoded = Vec::with_capacity(3);
        for m in Modality::ALL {
            let x = &batch.features[m.index()];
            if x.shape() != [n, self.config.dims[m.index()]] {
                return Err(shape_err(
                    "forward",
                    format!("{} features {:?}, expected [{}, {}]", m.name(), x.shape(), n, self.config.dims[m.index()]),
                ));
            }
            let mut h = g.leaf(x.clone())?;
            for _ in &self.config.encoder_hidden[m.index()] {
                h = dense(g, h, true)?;
            }
            encoded.push(h);
        }
        let mut h = g.concat(&encoded)?;
        for _ in &self.config.fusion_hidden {
            h = dense(g, h, true)?;
        }
        dense(g, h, false)
    }

    /// Mean squared error (regression) or mean softmax cross-entropy.
    pub fn loss(&self, g: &mut Graph, predictions: NodeId, targets: &Targets) -> Result<NodeId> {
        head_loss(g, predictions, targets, self.config.head)
    }

    fn bind(&self, g: &mut Graph, params: &Parameters) -> Result<Vec<NodeId>> {
        params.tensors().map(|t| g.leaf(t.clone())).collect()
    }

    /// Predictions as a plain tensor.
    pub fn predict(&self, params: &Parameters, batch: &Batch) -> Result<Tensor> {
        let mut g = Graph::new();
        let ids = self.bind(&mut g, params)?;
        let out = self.forward(&mut g, &ids, batch)?;
        Ok(g.value(out).clone())
    }

    pub fn loss_value(&self, params: &Parameters, batch: &Batch) -> Result<f64> {
        let mut g = Graph::new();
        let ids = self.bind(&mut g, params)?;
        let out = self.forward(&mut g, &ids, batch)?;
        let loss = self.loss(&mut g, out, &batch.targets)?;
        g.value(loss).item()
    }

    /// Loss and its gradient with respect to every parameter tensor.
    pub fn loss_and_grad(&self, params: &Parameters, batch: &Batch) -> Result<(f64, Parameters)> {
        let mut g = Graph::new();
        let ids = self.bind(&mut g, params)?;
        let out = self.forward(&mut g, &ids, batch)?;
        let loss = self.loss(&mut g, out, &batch.targets)?;
        let value = g.value(loss).item()?;
        let mut grads = g.backward(loss)?;
        let entries = params.iter().zip(&ids).map(|((name, _), id)| (String::from(name), grads.take(*id))).collect();
        Ok((value, Parameters::new(entries)))
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

/// Task loss for a head, usable on any prediction node.
pub fn head_loss(g: &mut Graph, predictions: NodeId, targets: &Targets, head: Head) -> Result<NodeId> {
    let shape = g.value(predictions).shape().to_vec();
    let n = targets.len();
    if n == 0 {
        return Err(Error::EmptyInput("loss"));
    }
    if shape.first() != Some(&n) || shape.len() != 2 || shape[1] != head.outputs() {
        return Err(Error::LengthMismatch { expected: n * head.outputs(), found: g.value(predictions).numel() });
    }
    match (head, targets) {
        (Head::Regression, Targets::Scores(y)) => {
            let labels = g.leaf(Tensor::new(vec![n, 1], y.clone())?)?;
            let diff = g.sub(predictions, labels)?;
            let sq = g.square(diff)?;
            g.mean(sq)
        }
        (Head::Classification { classes }, Targets::Classes(y)) => {
            let mut onehot = vec![0.0; n * classes];
            for (i, &c) in y.iter().enumerate() {
                if c >= classes {
                    return Err(Error::LabelOutOfRange { label: c, classes });
                }
                onehot[i * classes + c] = 1.0;
            }
            let onehot = g.leaf(Tensor::new(vec![n, classes], onehot)?)?;
            let p = g.softmax(predictions)?;
            let logp = g.log(p)?;
            let picked = g.mul(logp, onehot)?;
            let total = g.sum(picked)?;
            g.scale(total, -1.0 / n as f64)
        }
        _ => Err(config_err("label kind does not match the model head")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(head: Head) -> ModelConfig {
        ModelConfig {
            dims: [4, 3, 5],
            encoder_hidden: [vec![3], vec![2], vec![4]],
            fusion_hidden: vec![3],
            head,
            activation: Activation::Tanh,
        }
    }

    fn sample(seed: f64, label: Label) -> Sample {
        Sample {
            features: [
                (0..4).map(|i| libm::sin(seed + i as f64)).collect(),
                (0..3).map(|i| libm::cos(seed * 0.5 + i as f64)).collect(),
                (0..5).map(|i| 0.1 * (seed - i as f64)).collect(),
            ],
            label,
        }
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let m = FusionModel::new(config(Head::Regression)).unwrap();
        let a = m.init_params(9);
        assert_eq!(a, m.init_params(9));
        assert_ne!(a, m.init_params(10));
        for (name, t) in a.iter() {
            if name.ends_with(".bias") {
                assert!(t.data().iter().all(|&v| v == 0.0));
            } else {
                let [fi, fo] = t.shape() else { panic!() };
                let s = glorot_bound(*fi, *fo);
                assert!(t.data().iter().all(|v| v.abs() <= s));
            }
        }
    }

    #[test]
    fn glorot_bound_by_hand() {
        assert_eq!(glorot_bound(4, 2), 1.0);
    }

    #[test]
    fn parameter_order_is_fixed() {
        let m = FusionModel::new(config(Head::Regression)).unwrap();
        let params = m.init_params(1);
        let names: Vec<&str> = params.iter().map(|(n, _)| n).collect();
        assert_eq!(
            names,
            [
                "audio.enc0.weight",
                "audio.enc0.bias",
                "video.enc0.weight",
                "video.enc0.bias",
                "language.enc0.weight",
                "language.enc0.bias",
                "fusion0.weight",
                "fusion0.bias",
                "head.weight",
                "head.bias",
            ]
        );
    }

    #[test]
    fn zero_weights_predict_zero() {
        let m = FusionModel::new(config(Head::Regression)).unwrap();
        let p = m.init_params(3).zeros_like();
        let batch = Batch::from_samples(&[sample(1.0, Label::Score(0.3)), sample(2.0, Label::Score(-0.1))]).unwrap();
        let y = m.predict(&p, &batch).unwrap();
        assert_eq!(y.shape(), &[2, 1]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_sample_gives_identical_outputs() {
        let m = FusionModel::new(config(Head::Classification { classes: 3 })).unwrap();
        let p = m.init_params(5);
        let s = sample(0.7, Label::Class(1));
        let one = m.predict(&p, &Batch::from_samples(core::slice::from_ref(&s)).unwrap()).unwrap();
        let two = m.predict(&p, &Batch::from_samples(&[s.clone(), s]).unwrap()).unwrap();
        assert_eq!(one.shape(), &[1, 3]);
        assert_eq!(&two.data()[..3], one.data());
        assert_eq!(&two.data()[3..], one.data());
    }

    #[test]
    fn mse_by_hand() {
        let mut g = Graph::new();
        let pred = g.leaf(Tensor::new(vec![2, 1], vec![1.0, 3.0]).unwrap()).unwrap();
        let l = head_loss(&mut g, pred, &Targets::Scores(vec![0.0, 0.0]), Head::Regression).unwrap();
        assert_eq!(g.value(l).item().unwrap(), 5.0);
        let mut g = Graph::new();
        let pred = g.leaf(Tensor::new(vec![2, 1], vec![0.25, -1.5]).unwrap()).unwrap();
        let l = head_loss(&mut g, pred, &Targets::Scores(vec![0.25, -1.5]), Head::Regression).unwrap();
        assert_eq!(g.value(l).item().unwrap(), 0.0);
    }

    #[test]
    fn uniform_logits_cross_entropy_is_log_c() {
        let mut g = Graph::new();
        let pred = g.leaf(Tensor::filled(&[3, 4], 0.7)).unwrap();
        let head = Head::Classification { classes: 4 };
        let l = head_loss(&mut g, pred, &Targets::Classes(vec![0, 3, 2]), head).unwrap();
        assert!((g.value(l).item().unwrap() - libm::log(4.0)).abs() < 1e-12);
    }

    #[test]
    fn label_out_of_range() {
        let mut g = Graph::new();
        let pred = g.leaf(Tensor::zeros(&[1, 2])).unwrap();
        let head = Head::Classification { classes: 2 };
        assert_eq!(
            head_loss(&mut g, pred, &Targets::Classes(vec![2]), head),
            Err(Error::LabelOutOfRange { label: 2, classes: 2 })
        );
    }

    #[test]
    fn rejects_bad_configs_and_shapes() {
        let mut c = config(Head::Classification { classes: 1 });
        assert!(FusionModel::new(c.clone()).is_err());
        c.head = Head::Regression;
        c.dims[1] = 0;
        assert!(FusionModel::new(c).is_err());

        let m = FusionModel::new(config(Head::Regression)).unwrap();
        let p = m.init_params(1);
        let mut s = sample(1.0, Label::Score(0.0));
        s.features[0].push(1.0);
        let batch = Batch::from_samples(&[s]).unwrap();
        assert!(matches!(m.predict(&p, &batch), Err(Error::ShapeMismatch { .. })));
    }
}
