//! A 1D V-Net written from scratch: strided-convolution encoder, transposed
//! convolution decoder, residual blocks and long skip connections.

mod layers;
mod net;

pub use layers::{softplus, softplus_grad, Layer, LayerKind, Padding, Scalar, Tensor};
pub use net::{ForwardCache, VNet};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Softplus,
    /// Makes the network linear; used to check gradients against the
    /// transpose of the linear map.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VNetConfig {
    pub window: usize,
    pub levels: usize,
    pub depth: usize,
    pub kernel: usize,
    pub in_channels: usize,
    pub padding: Padding,
    pub activation: Activation,
}

impl Default for VNetConfig {
    fn default() -> Self {
        VNetConfig {
            window: 512,
            levels: 5,
            depth: 4,
            kernel: 11,
            in_channels: 4,
            padding: Padding::Replicate,
            activation: Activation::Softplus,
        }
    }
}

impl VNetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.levels < 2 {
            return bad(format!("levels must be >= 2, got {}", self.levels));
        }
        if self.depth < 1 || self.in_channels < 1 {
            return bad("depth and in_channels must be >= 1".into());
        }
        if self.kernel % 2 == 0 {
            return bad(format!("kernel size must be odd, got {}", self.kernel));
        }
        let f = 1usize << (self.levels - 1);
        if self.window == 0 || self.window % f != 0 {
            return bad(format!("window {} is not divisible by {f}", self.window));
        }
        Ok(())
    }

    /// Channel count at level `k` (0 is the initial block).
    pub fn channels(&self, level: usize) -> usize {
        self.depth << level
    }

    /// Layer shapes in canonical order: initial block, then per descent
    /// (down, conv, conv), per ascent from the deepest level (up, conv, conv),
    /// then the kernel-1 output layer.
    pub fn layer_shapes(&self) -> Vec<(LayerKind, usize, usize)> {
        let conv = LayerKind::Conv { kernel: self.kernel };
        let d = self.depth;
        let mut out = vec![(conv, self.in_channels, d), (conv, d, d)];
        for k in 1..self.levels {
            let (a, b) = (self.channels(k - 1), self.channels(k));
            out.extend([(LayerKind::Down, a, b), (conv, b, b), (conv, b, b)]);
        }
        for k in (1..self.levels).rev() {
            let (a, b) = (self.channels(k), self.channels(k - 1));
            out.extend([(LayerKind::Up, a, b), (conv, b, b), (conv, b, b)]);
        }
        out.push((LayerKind::Conv { kernel: 1 }, d, 1));
        out
    }
}

/// Number of weights and biases of the network.
pub fn param_count(config: &VNetConfig) -> usize {
    config
        .layer_shapes()
        .iter()
        .map(|&(kind, cin, cout)| Layer::<f64>::weight_len(kind, cin, cout) + cout)
        .sum()
}

/// All layers of the network in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct VNetParams<T> {
    pub config: VNetConfig,
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> VNetParams<T> {
    pub fn zeros(config: &VNetConfig) -> Self {
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(kind, cin, cout)| Layer::zeros(kind, cin, cout))
            .collect();
        VNetParams { config: *config, layers }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// Flat copy in canonical order (per layer: weights, then biases).
    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn from_flat(config: &VNetConfig, flat: &[T]) -> Result<Self> {
        let mut p = Self::zeros(config);
        if flat.len() != p.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters given, network has {}",
                flat.len(),
                p.param_count()
            )));
        }
        let mut pos = 0;
        for l in &mut p.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&flat[pos..pos + nw]);
            pos += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&flat[pos..pos + nb]);
            pos += nb;
        }
        Ok(p)
    }

    /// Mutable views of every weight and bias block, in canonical order.
    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut Vec<T>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b])
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Vec<T>> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b])
    }

    pub fn fill_zero(&mut self) {
        self.blocks_mut().for_each(|b| b.fill(T::zero()));
    }

    /// `self += other`, block by block.
    pub fn add_assign(&mut self, other: &VNetParams<T>) {
        for (a, b) in self.blocks_mut().zip(other.blocks()) {
            a.iter_mut().zip(b).for_each(|(x, &y)| *x = *x + y);
        }
    }

    pub fn scale(&mut self, s: T) {
        self.blocks_mut().for_each(|b| b.iter_mut().for_each(|x| *x = *x * s));
    }

    pub fn cast<U: Scalar>(&self) -> VNetParams<U> {
        VNetParams {
            config: self.config,
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    kind: l.kind,
                    cin: l.cin,
                    cout: l.cout,
                    w: l.w.iter().map(|v| U::of(v.as_f64())).collect(),
                    b: l.b.iter().map(|v| U::of(v.as_f64())).collect(),
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Uniform fan-in initialization `U[-a, a]`, `a = sqrt(1 / (k cin))`, for
/// ordinary and strided convolutions; constant `1 / cin` kernels for the
/// transposed convolutions; zero biases.
pub fn init_params(config: &VNetConfig, seed: u64) -> Result<VNetParams<f64>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = VNetParams::<f64>::zeros(config);
    for l in &mut p.layers {
        match l.kind {
            LayerKind::Up => l.w.fill(1.0 / l.cin as f64),
            kind => {
                let k = match kind {
                    LayerKind::Conv { kernel } => kernel,
                    _ => 2,
                };
                let a = (1.0 / (k * l.cin) as f64).sqrt();
                l.w.iter_mut().for_each(|w| *w = rng.random_range(-a..=a));
            }
        }
    }
    Ok(p)
}
