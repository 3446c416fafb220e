use serde::{Deserialize, Serialize};

use super::layers::{ConvGeometry, Layer, PoolGeometry};
use super::{softmax_rows, validate_batch, BlackBoxModel, DifferentiableModel, LossGradients};
use crate::data::ImageShape;
use crate::error::{invalid, Result};
use crate::math::{Matrix, SeededRng};

/// Rows per internal forward chunk; bounds the im2col buffers of conv nets.
const FORWARD_CHUNK: usize = 128;

/// Layer layout of a built-in classifier. Hidden layers use ReLU, the output
/// layer softmax. Convolutions are 3×3 with same-padding, each followed by
/// 2×2 max pooling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ArchitectureSpec {
    Linear {
        input_dim: usize,
        num_classes: usize,
    },
    Mlp {
        input_dim: usize,
        hidden: Vec<usize>,
        num_classes: usize,
    },
    Cnn {
        input_shape: ImageShape,
        conv_channels: Vec<usize>,
        fc_hidden: Vec<usize>,
        num_classes: usize,
    },
}

impl ArchitectureSpec {
    /// Named presets: `linear`, `mlp` (one 256-unit hidden layer),
    /// `cnn3` (conv16-conv32-fc) and `cnn5` (conv16-conv32-conv64-fc128-fc).
    pub fn preset(name: &str, input_shape: ImageShape, num_classes: usize) -> Result<Self> {
        let input_dim = input_shape.len();
        Ok(match name {
            "linear" => Self::Linear {
                input_dim,
                num_classes,
            },
            "mlp" => Self::Mlp {
                input_dim,
                hidden: vec![256],
                num_classes,
            },
            "cnn3" => Self::Cnn {
                input_shape,
                conv_channels: vec![16, 32],
                fc_hidden: vec![],
                num_classes,
            },
            "cnn5" => Self::Cnn {
                input_shape,
                conv_channels: vec![16, 32, 64],
                fc_hidden: vec![128],
                num_classes,
            },
            other => return invalid(format!("unknown architecture preset {other:?}")),
        })
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Self::Linear { input_dim, .. } | Self::Mlp { input_dim, .. } => *input_dim,
            Self::Cnn { input_shape, .. } => input_shape.len(),
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Self::Linear { num_classes, .. }
            | Self::Mlp { num_classes, .. }
            | Self::Cnn { num_classes, .. } => *num_classes,
        }
    }

    /// Short human label such as `mlp[256]` or `cnn[16,32|]`.
    pub fn label(&self) -> String {
        let join = |v: &[usize]| {
            v.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            Self::Linear { .. } => "linear".to_string(),
            Self::Mlp { hidden, .. } => format!("mlp[{}]", join(hidden)),
            Self::Cnn {
                conv_channels,
                fc_hidden,
                ..
            } => format!("cnn[{}|{}]", join(conv_channels), join(fc_hidden)),
        }
    }

    /// Layers with zero-initialized parameters.
    fn skeleton(&self) -> Result<Vec<Layer>> {
        if self.input_dim() == 0 || self.num_classes() == 0 {
            return invalid("architecture needs a nonzero input dimension and class count");
        }
        let dense = |i: usize, o: usize| Layer::Dense {
            weight: Matrix::zeros(o, i),
            bias: Matrix::zeros(1, o),
        };
        let mut layers = Vec::new();
        let mut width = self.input_dim();
        let (mut fc, classes) = match self {
            Self::Linear { num_classes, .. } => (vec![], *num_classes),
            Self::Mlp {
                hidden,
                num_classes,
                ..
            } => (hidden.clone(), *num_classes),
            Self::Cnn {
                input_shape,
                conv_channels,
                fc_hidden,
                num_classes,
            } => {
                let (mut c, mut h, mut w) =
                    (input_shape.channels, input_shape.height, input_shape.width);
                for &oc in conv_channels {
                    if h < 2 || w < 2 || oc == 0 {
                        return invalid(format!("cannot pool a {h}x{w} map into {oc} channels"));
                    }
                    let geom = ConvGeometry {
                        in_channels: c,
                        out_channels: oc,
                        height: h,
                        width: w,
                    };
                    layers.push(Layer::Conv {
                        geom,
                        weight: Matrix::zeros(oc, c * 9),
                        bias: Matrix::zeros(1, oc),
                    });
                    layers.push(Layer::Relu);
                    let pool = PoolGeometry {
                        channels: oc,
                        height: h,
                        width: w,
                    };
                    layers.push(Layer::MaxPool(pool));
                    c = oc;
                    h = pool.out_height();
                    w = pool.out_width();
                }
                width = c * h * w;
                (fc_hidden.clone(), *num_classes)
            }
        };
        for h in fc.drain(..) {
            if h == 0 {
                return invalid("hidden layer of width 0");
            }
            layers.push(dense(width, h));
            layers.push(Layer::Relu);
            width = h;
        }
        layers.push(dense(width, classes));
        Ok(layers)
    }
}

/// Feed-forward classifier built from an [`ArchitectureSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    id: String,
    spec: ArchitectureSpec,
    layers: Vec<Layer>,
}

struct ForwardCache {
    /// Input of each layer, then the logits.
    activations: Vec<Matrix>,
}

impl Network {
    /// He-normal weights and zero biases; the linear architecture starts at
    /// all zeros (the uniform predictor), drawing nothing from `rng`.
    pub fn new(id: impl Into<String>, spec: ArchitectureSpec, rng: &mut SeededRng) -> Result<Self> {
        let mut layers = spec.skeleton()?;
        if matches!(spec, ArchitectureSpec::Linear { .. }) {
            return Ok(Self {
                id: id.into(),
                spec,
                layers,
            });
        }
        for layer in &mut layers {
            if let Layer::Dense { weight, .. } | Layer::Conv { weight, .. } = layer {
                let fan_in = weight.cols() as f64;
                let std = (2.0 / fan_in).sqrt();
                for v in weight.as_mut_slice() {
                    *v = std * rng.standard_normal();
                }
            }
        }
        Ok(Self {
            id: id.into(),
            spec,
            layers,
        })
    }

    /// Rebuilds a network from stored parameter tensors (checkpoint order).
    pub fn from_parameters(
        id: impl Into<String>,
        spec: ArchitectureSpec,
        params: Vec<Matrix>,
    ) -> Result<Self> {
        let mut layers = spec.skeleton()?;
        let expected: Vec<(usize, usize)> = layers
            .iter()
            .flat_map(|l| l.parameters())
            .map(Matrix::shape)
            .collect();
        let got: Vec<(usize, usize)> = params.iter().map(Matrix::shape).collect();
        if expected != got {
            return invalid(format!(
                "parameter shapes {got:?} do not match architecture {expected:?}"
            ));
        }
        let mut source = params.into_iter();
        for slot in layers.iter_mut().flat_map(|l| l.parameters_mut()) {
            *slot = source.next().expect("lengths checked");
        }
        Ok(Self {
            id: id.into(),
            spec,
            layers,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn set_id(&mut self, id: impl Into<String>) {
        self.id = id.into();
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    /// Pre-softmax outputs.
    pub fn logits(&self, batch: &Matrix) -> Result<Matrix> {
        validate_batch(batch, self.spec.input_dim())?;
        if batch.rows() <= FORWARD_CHUNK {
            return Ok(self.forward_logits(batch));
        }
        let parts: Vec<Matrix> = (0..batch.rows())
            .step_by(FORWARD_CHUNK)
            .map(|s| {
                self.forward_logits(&batch.row_range(s, (s + FORWARD_CHUNK).min(batch.rows())))
            })
            .collect();
        Matrix::vstack(&parts)
    }

    fn forward_logits(&self, x: &Matrix) -> Matrix {
        let mut a = x.clone();
        for layer in &self.layers {
            a = layer.forward(&a);
        }
        a
    }

    fn forward_cached(&self, x: &Matrix) -> ForwardCache {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let next = layer.forward(activations.last().expect("nonempty"));
            activations.push(next);
        }
        ForwardCache { activations }
    }

    /// Backpropagates `dlogits`; returns the input gradient and, if asked,
    /// parameter gradients in [`DifferentiableModel::parameters`] order.
    fn backward(
        &self,
        cache: &ForwardCache,
        dlogits: Matrix,
        want_params: bool,
    ) -> (Matrix, Vec<Matrix>) {
        let mut grad = dlogits;
        let mut per_layer: Vec<Vec<Matrix>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (dx, dp) = layer.backward(&cache.activations[i], &grad, want_params);
            per_layer.push(dp);
            grad = dx;
        }
        per_layer.reverse();
        (grad, per_layer.into_iter().flatten().collect())
    }

    fn softmax_delta(&self, logits: &Matrix, labels: &[usize], scale: f64) -> (Matrix, Matrix) {
        let probs = softmax_rows(logits);
        let mut delta = probs.clone();
        for (r, &l) in labels.iter().enumerate() {
            let row = delta.row_mut(r);
            row[l] -= 1.0;
            if scale != 1.0 {
                row.iter_mut().for_each(|v| *v *= scale);
            }
        }
        (probs, delta)
    }
}

impl BlackBoxModel for Network {
    fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    fn num_classes(&self) -> usize {
        self.spec.num_classes()
    }

    fn model_id(&self) -> String {
        self.id.clone()
    }

    fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(softmax_rows(&self.logits(batch)?))
    }
}

impl DifferentiableModel for Network {
    fn input_gradient(&self, batch: &Matrix, labels: &[usize]) -> Result<Matrix> {
        super::validate_labeled(batch, labels, self.input_dim(), self.num_classes())?;
        let chunk_gradient = |start: usize, end: usize| {
            let cache = self.forward_cached(&batch.row_range(start, end));
            let logits = cache.activations.last().expect("logits");
            let (_, delta) = self.softmax_delta(logits, &labels[start..end], 1.0);
            self.backward(&cache, delta, false).0
        };
        if batch.rows() <= FORWARD_CHUNK {
            return Ok(chunk_gradient(0, batch.rows()));
        }
        let parts: Vec<Matrix> = (0..batch.rows())
            .step_by(FORWARD_CHUNK)
            .map(|s| chunk_gradient(s, (s + FORWARD_CHUNK).min(batch.rows())))
            .collect();
        Matrix::vstack(&parts)
    }

    fn loss_and_gradients(&self, batch: &Matrix, labels: &[usize]) -> Result<LossGradients> {
        super::validate_labeled(batch, labels, self.input_dim(), self.num_classes())?;
        let cache = self.forward_cached(batch);
        let scale = 1.0 / batch.rows().max(1) as f64;
        let (probs, delta) =
            self.softmax_delta(cache.activations.last().expect("logits"), labels, scale);
        let loss = super::cross_entropy_loss(&probs, labels)?;
        let (_, parameter_gradients) = self.backward(&cache, delta, true);
        Ok(LossGradients {
            loss,
            probabilities: probs,
            parameter_gradients,
        })
    }

    fn parameters(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(Layer::parameters).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers
            .iter_mut()
            .flat_map(Layer::parameters_mut)
            .collect()
    }
}

/// Softmax-linear classifier `softmax(W x + b)` with `W` of shape `c × d`.
pub fn linear_oracle_model(weights: &Matrix, bias: &[f64]) -> Result<Network> {
    let (c, d) = weights.shape();
    if bias.len() != c {
        return invalid(format!("bias has {} entries for {c} classes", bias.len()));
    }
    Network::from_parameters(
        "linear-oracle",
        ArchitectureSpec::Linear {
            input_dim: d,
            num_classes: c,
        },
        vec![weights.clone(), Matrix::row_vector(bias)?],
    )
}
