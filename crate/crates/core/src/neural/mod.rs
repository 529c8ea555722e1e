//! Feed-forward and convolutional regressors with hand-written kernels.

mod adam;
mod network;
mod saliency;
mod spectrogram;
mod tensor;
mod train;

pub use adam::AdamState;
pub use network::{Layer, Network, Trace};
pub use saliency::{find_peaks, input_gradient, saliency, SaliencyMap, PEAK_SEPARATION_NM};
pub use spectrogram::{columns_to_points, render_spectrogram, resample_linear, SpectrogramRecipe, RECIPE_VERSION};
pub use tensor::{gemm, Tensor, Trans};
pub use train::{train, EpochLog, EpochRecord, TrainConfig, Trained};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    /// L1 coefficient on the third hidden layer's weights.
    pub l1: f64,
    /// L2 coefficient on the third hidden layer's weights.
    pub l2: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden: vec![500, 200, 50], l1: 1e-5, l2: 1e-5, seed: 42 }
    }
}

impl MlpConfig {
    pub fn build(&self, n_inputs: usize) -> Result<Network> {
        if self.hidden.contains(&0) || n_inputs == 0 {
            return Err(Error::InvalidParams("layer widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut layers = Vec::new();
        let mut width = n_inputs;
        for &h in &self.hidden {
            layers.push(Layer::dense(&mut rng, width, h));
            layers.push(Layer::Relu);
            width = h;
        }
        layers.push(Layer::dense(&mut rng, width, 1));
        Network::new(vec![n_inputs], layers)
    }

    pub fn regularization(&self) -> Regularization {
        Regularization { param: (self.hidden.len() >= 3).then_some(4), l1: self.l1, l2: self.l2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub conv_channels: Vec<usize>,
    pub pool: usize,
    pub dense: usize,
    pub recipe: SpectrogramRecipe,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self { conv_channels: vec![32, 64, 128], pool: 3, dense: 50, recipe: SpectrogramRecipe::default(), seed: 42 }
    }
}

impl CnnConfig {
    pub fn input_shape(&self) -> Vec<usize> {
        vec![self.recipe.rows, self.recipe.cols, 1]
    }

    pub fn build(&self) -> Result<Network> {
        if self.conv_channels.contains(&0) || self.dense == 0 || self.pool == 0 {
            return Err(Error::InvalidParams("layer widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut layers = Vec::new();
        let mut shape = self.input_shape();
        for &c in &self.conv_channels {
            let conv = Layer::conv(&mut rng, shape[2], c);
            shape = conv.output_shape(&shape)?;
            layers.push(conv);
            layers.push(Layer::Relu);
            let pool = Layer::MaxPool { size: self.pool };
            shape = pool.output_shape(&shape)?;
            layers.push(pool);
        }
        let flat: usize = shape.iter().product();
        layers.push(Layer::Flatten);
        layers.push(Layer::dense(&mut rng, flat, self.dense));
        layers.push(Layer::Relu);
        layers.push(Layer::dense(&mut rng, self.dense, 1));
        Network::new(self.input_shape(), layers)
    }
}

/// Elastic-net penalty on one parameter tensor (by position in
/// [`Network::params`]).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Regularization {
    pub param: Option<usize>,
    pub l1: f64,
    pub l2: f64,
}

impl Regularization {
    pub fn none() -> Self {
        Self::default()
    }

    /// Penalty value, adding its gradient into `grads`.
    pub fn apply(&self, net: &Network, grads: &mut [Tensor]) -> f64 {
        let Some(i) = self.param else { return 0.0 };
        let w = net.params()[i];
        let mut penalty = 0.0;
        for (g, &v) in grads[i].data.iter_mut().zip(&w.data) {
            penalty += self.l1 * v.abs() + self.l2 * v * v;
            let sign = if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            };
            *g += self.l1 * sign + 2.0 * self.l2 * v;
        }
        penalty
    }
}

#[derive(Debug, Clone)]
pub struct LossGrads {
    /// `data_loss + penalty`.
    pub loss: f64,
    /// Mean squared error over the batch.
    pub data_loss: f64,
    pub penalty: f64,
    pub grads: Vec<Tensor>,
}

/// Run `x` through the network and accumulate the gradient of
/// `Σ (ŷ − y)² / batch_total` into `grads`. Returns the sum of squared
/// residuals.
pub fn accumulate_mse(net: &Network, x: &Tensor, y: &[f64], batch_total: usize, grads: &mut [Tensor]) -> Result<f64> {
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch { left: x.rows(), right: y.len() });
    }
    let (out, trace) = net.forward_trace(x)?;
    let mut dout = Tensor::zeros(&out.shape);
    let mut sse = 0.0;
    for ((d, &p), &t) in dout.data.iter_mut().zip(&out.data).zip(y) {
        let r = p - t;
        sse += r * r;
        *d = 2.0 * r / batch_total as f64;
    }
    net.backward(trace, dout, grads, false);
    Ok(sse)
}

/// MSE plus regularization, with gradients for every parameter.
pub fn loss_and_grads(net: &Network, reg: &Regularization, x: &Tensor, y: &[f64]) -> Result<LossGrads> {
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut grads = net.zero_grads();
    let sse = accumulate_mse(net, x, y, y.len(), &mut grads)?;
    let data_loss = sse / y.len() as f64;
    let penalty = reg.apply(net, &mut grads);
    let loss = data_loss + penalty;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok(LossGrads { loss, data_loss, penalty, grads })
}

/// Network output for a `[batch, n_inputs]` tensor.
pub fn mlp_forward(net: &Network, x: &Tensor) -> Result<Vec<f64>> {
    net.forward(x).map(|t| t.data)
}

/// Network output for a `[batch, rows, cols, 1]` image tensor.
pub fn cnn_forward(net: &Network, img: &Tensor) -> Result<Vec<f64>> {
    net.forward(img).map(|t| t.data)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Architecture {
    Mlp(MlpConfig),
    Cnn(CnnConfig),
}

impl Architecture {
    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Mlp(_) => "mlp",
            Architecture::Cnn(_) => "cnn",
        }
    }
}

/// A trained network together with its input and target scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralModel {
    pub arch: Architecture,
    pub net: Network,
    /// Number of spectral points per input row.
    pub n_points: usize,
    /// Per-feature centering (MLP only; empty for CNN).
    pub x_mean: Vec<f64>,
    /// Single global divisor applied after centering (MLP only).
    pub x_scale: f64,
    pub y_mean: f64,
    pub y_std: f64,
}

/// Samples per forward chunk when predicting.
fn chunk_size(arch: &Architecture) -> usize {
    match arch {
        Architecture::Mlp(_) => 256,
        Architecture::Cnn(_) => 4,
    }
}

impl NeuralModel {
    pub fn n_features(&self) -> usize {
        self.n_points
    }

    /// Network input tensor for the given rows of a spectra matrix.
    pub fn prepare(&self, x: &DMatrix<f64>, rows: &[usize]) -> Result<Tensor> {
        if x.ncols() != self.n_points {
            return Err(Error::WidthMismatch { expected: self.n_points, found: x.ncols() });
        }
        match &self.arch {
            Architecture::Mlp(_) => {
                let mut data = Vec::with_capacity(rows.len() * self.n_points);
                for &r in rows {
                    data.extend(x.row(r).iter().zip(&self.x_mean).map(|(v, m)| (v - m) / self.x_scale));
                }
                Tensor::new(vec![rows.len(), self.n_points], data)
            }
            Architecture::Cnn(cfg) => {
                let mut data = Vec::with_capacity(rows.len() * cfg.recipe.rows * cfg.recipe.cols);
                for &r in rows {
                    let values: Vec<f64> = x.row(r).iter().copied().collect();
                    data.extend(cfg.recipe.render(&values)?);
                }
                let mut shape = vec![rows.len()];
                shape.extend(cfg.input_shape());
                Tensor::new(shape, data)
            }
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let all: Vec<usize> = (0..x.nrows()).collect();
        self.predict_rows(x, &all)
    }

    pub fn predict_rows(&self, x: &DMatrix<f64>, rows: &[usize]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(chunk_size(&self.arch)) {
            let t = self.prepare(x, chunk)?;
            out.extend(self.net.forward(&t)?.data.iter().map(|v| v * self.y_std + self.y_mean));
        }
        Ok(out)
    }
}
