//! The four parameterized networks: feature extractor, classifier, domain
//! discriminator and task semantic adaptor, all plain MLPs.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Graph, Var};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Relu,
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    Sigmoid,
    Softmax,
}

/// Layer widths (input first, output last) and activations of an MLP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    pub fn new(
        layer_widths: Vec<usize>,
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        let spec = MlpSpec {
            layer_widths,
            hidden_activation,
            output_activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "an MLP needs at least two widths, got {:?}",
                self.layer_widths
            )));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "MLP widths must be positive, got {:?}",
                self.layer_widths
            )));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().expect("validated widths")
    }
}

/// One affine layer: `x · weight + bias`, weight is `[fan_in, fan_out]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = glorot_bound(fan_in, fan_out);
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                Dense {
                    weight: Tensor::matrix(fan_in, fan_out, data).expect("positive widths"),
                    bias: Tensor::zeros(&[1, fan_out]),
                }
            })
            .collect();
        Ok(Mlp { spec, layers })
    }

    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_widths
            .windows(2)
            .map(|w| Dense {
                weight: Tensor::zeros(&[w[0], w[1]]),
                bias: Tensor::zeros(&[1, w[1]]),
            })
            .collect();
        Ok(Mlp { spec, layers })
    }

    /// Parameter tensors in `[w0, b0, w1, b1, ...]` order.
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    /// `(name, tensor)` pairs, names like `0.weight`.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("{i}.weight"), &l.weight));
            out.push((format!("{i}.bias"), &l.bias));
        }
        out
    }

    /// Records the parameters as graph leaves.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundMlp {
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut biases = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (w, b) = if trainable {
                (g.param(l.weight.clone()), g.param(l.bias.clone()))
            } else {
                (g.constant(l.weight.clone()), g.constant(l.bias.clone()))
            };
            weights.push(w);
            biases.push(b);
        }
        BoundMlp {
            spec: self.spec.clone(),
            weights,
            biases,
        }
    }

    /// Graph-free forward pass.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let out = bound.forward(&mut g, xv)?;
        Ok(g.value(out).clone())
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

/// An [`Mlp`] whose parameters live in a [`Graph`].
#[derive(Clone, Debug)]
pub struct BoundMlp {
    pub spec: MlpSpec,
    pub weights: Vec<Var>,
    pub biases: Vec<Var>,
}

impl BoundMlp {
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let width = g.value(x).cols();
        if width != self.spec.input_width() {
            return Err(Error::ShapeMismatch {
                op: "mlp input",
                left: g.value(x).shape().to_vec(),
                right: vec![self.spec.input_width()],
            });
        }
        let last = self.weights.len() - 1;
        let mut h = x;
        for (i, (&w, &b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = g.matmul(h, w)?;
            let z = g.add_row(z, b)?;
            h = if i < last {
                match self.spec.hidden_activation {
                    HiddenActivation::Relu => g.relu(z),
                    HiddenActivation::Tanh => g.tanh(z),
                }
            } else {
                match self.spec.output_activation {
                    OutputActivation::Identity => z,
                    OutputActivation::Sigmoid => g.sigmoid(z),
                    OutputActivation::Softmax => g.softmax_rows(z),
                }
            };
        }
        Ok(h)
    }

    /// Gradients in `[w0, b0, w1, b1, ...]` order, zeros where none flowed.
    pub fn gradients(&self, g: &Graph, grads: &Gradients) -> Vec<Tensor> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(&w, &b)| [grads.get_or_zeros(w, g.value(w)), grads.get_or_zeros(b, g.value(b))])
            .collect()
    }
}

/// Shapes of all four networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpecs {
    pub feature: MlpSpec,
    pub classifier: MlpSpec,
    pub discriminator: MlpSpec,
    pub adaptor: MlpSpec,
}

impl NetworkSpecs {
    /// Default shapes: extractor `d→64→32` (relu, sigmoid), classifier
    /// `32→classes` (softmax), discriminator `32→32→1` (relu, sigmoid),
    /// adaptor `in→128→64→1` (relu, identity).
    pub fn default_for(input_dim: usize, num_classes: usize, adaptor_input: usize) -> Self {
        NetworkSpecs::with_widths(input_dim, &[64], 32, num_classes, &[32], adaptor_input, &[128, 64])
    }

    pub fn with_widths(
        input_dim: usize,
        feature_hidden: &[usize],
        feature_dim: usize,
        num_classes: usize,
        discriminator_hidden: &[usize],
        adaptor_input: usize,
        adaptor_hidden: &[usize],
    ) -> Self {
        let chain = |first: usize, mid: &[usize], last: usize| {
            let mut w = vec![first];
            w.extend_from_slice(mid);
            w.push(last);
            w
        };
        NetworkSpecs {
            feature: MlpSpec {
                layer_widths: chain(input_dim, feature_hidden, feature_dim),
                hidden_activation: HiddenActivation::Relu,
                // bounded features keep every Gram entry, and so the adaptor score, bounded
                output_activation: OutputActivation::Sigmoid,
            },
            classifier: MlpSpec {
                layer_widths: vec![feature_dim, num_classes],
                hidden_activation: HiddenActivation::Relu,
                output_activation: OutputActivation::Softmax,
            },
            discriminator: MlpSpec {
                layer_widths: chain(feature_dim, discriminator_hidden, 1),
                hidden_activation: HiddenActivation::Relu,
                output_activation: OutputActivation::Sigmoid,
            },
            adaptor: MlpSpec {
                layer_widths: chain(adaptor_input, adaptor_hidden, 1),
                hidden_activation: HiddenActivation::Relu,
                output_activation: OutputActivation::Identity,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for s in [&self.feature, &self.classifier, &self.discriminator, &self.adaptor] {
            s.validate()?;
        }
        let h = self.feature.output_width();
        if self.classifier.input_width() != h || self.discriminator.input_width() != h {
            return Err(Error::InvalidConfig(format!(
                "feature width {h} must equal classifier input {} and discriminator input {}",
                self.classifier.input_width(),
                self.discriminator.input_width()
            )));
        }
        if self.discriminator.output_width() != 1 || self.adaptor.output_width() != 1 {
            return Err(Error::InvalidConfig(String::from(
                "discriminator and adaptor must have a single output",
            )));
        }
        if self.classifier.output_width() < 2 {
            return Err(Error::InvalidConfig(String::from(
                "classifier needs at least two classes",
            )));
        }
        Ok(())
    }
}

/// Feature extractor `phi`, classifier `psi` and discriminator `omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub phi: Mlp,
    pub psi: Mlp,
    pub omega: Mlp,
}

/// Task semantic adaptor `theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptorParams {
    pub theta: Mlp,
}

impl NetworkParams {
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.phi
            .tensors()
            .chain(self.psi.tensors())
            .chain(self.omega.tensors())
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.phi
            .tensors_mut()
            .chain(self.psi.tensors_mut())
            .chain(self.omega.tensors_mut())
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundNetworks {
        BoundNetworks {
            phi: self.phi.bind(g, trainable),
            psi: self.psi.bind(g, trainable),
            omega: self.omega.bind(g, trainable),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(Tensor::is_finite)
    }

    /// Deep copy for the per-epoch assist model.
    pub fn clone_params(&self) -> NetworkParams {
        self.clone()
    }

    pub fn forward_feature(&self, x: &Tensor) -> Result<Tensor> {
        self.phi.forward(x)
    }

    pub fn forward_classifier(&self, features: &Tensor) -> Result<Tensor> {
        self.psi.forward(features)
    }

    pub fn forward_discriminator(&self, features: &Tensor) -> Result<Tensor> {
        self.omega.forward(features)
    }
}

#[derive(Clone, Debug)]
pub struct BoundNetworks {
    pub phi: BoundMlp,
    pub psi: BoundMlp,
    pub omega: BoundMlp,
}

impl BoundNetworks {
    /// Gradients for every tensor of [`NetworkParams::tensors`], same order.
    pub fn gradients(&self, g: &Graph, grads: &Gradients) -> Vec<Tensor> {
        let mut out = self.phi.gradients(g, grads);
        out.extend(self.psi.gradients(g, grads));
        out.extend(self.omega.gradients(g, grads));
        out
    }
}

/// Initializes all four networks from `seed`.
pub fn init_networks(specs: &NetworkSpecs, seed: u64) -> Result<(NetworkParams, AdaptorParams)> {
    specs.validate()?;
    let mut r = rng::stream(seed, rng::Stream::Init);
    let params = NetworkParams {
        phi: Mlp::init(specs.feature.clone(), &mut r)?,
        psi: Mlp::init(specs.classifier.clone(), &mut r)?,
        omega: Mlp::init(specs.discriminator.clone(), &mut r)?,
    };
    let adaptor = AdaptorParams {
        theta: Mlp::init(specs.adaptor.clone(), &mut r)?,
    };
    Ok((params, adaptor))
}
