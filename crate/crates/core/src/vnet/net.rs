//! Forward evaluation and reverse-mode gradients of the whole network.

use rayon::prelude::*;

use super::layers::{softplus, softplus_grad, Scalar, Tensor};
use super::{Activation, VNetParams};
use crate::closures::WindowModel;
use crate::processing::Signal;
use crate::{Error, Result};

/// Intermediate values of one forward pass, indexed by layer.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    inputs: Vec<Tensor<T>>,
    /// Pre-activations of the layers followed by an activation.
    pre: Vec<Option<Tensor<T>>>,
}

fn activate<T: Scalar>(z: &Tensor<T>, act: Activation) -> Tensor<T> {
    match act {
        Activation::Softplus => Tensor::from_vec(z.channels, z.len, z.data.iter().map(|&v| softplus(v)).collect()),
        Activation::Identity => z.clone(),
    }
}

/// `g * act'(z)` in place.
fn activation_back<T: Scalar>(g: &mut Tensor<T>, z: &Tensor<T>, act: Activation) {
    if act == Activation::Softplus {
        g.data.iter_mut().zip(&z.data).for_each(|(g, &z)| *g = *g * softplus_grad(z));
    }
}

impl<T: Scalar> VNetParams<T> {
    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let c = &self.config;
        if x.channels != c.in_channels || x.len != c.window {
            return Err(Error::Shape(format!(
                "network expects {}x{} input, got {}x{}",
                c.in_channels, c.window, x.channels, x.len
            )));
        }
        Ok(())
    }

    /// Output of the network for one window, without keeping intermediates.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Vec<T>> {
        Ok(self.run(x, None)?.data)
    }

    /// Output and the cache needed by [`VNetParams::backward`].
    pub fn forward(&self, x: &Tensor<T>) -> Result<(Vec<T>, ForwardCache<T>)> {
        let mut cache = ForwardCache { inputs: Vec::with_capacity(self.layers.len()), pre: Vec::with_capacity(self.layers.len()) };
        let y = self.run(x, Some(&mut cache))?;
        Ok((y.data, cache))
    }

    fn run(&self, x: &Tensor<T>, mut cache: Option<&mut ForwardCache<T>>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let cfg = &self.config;
        let pad = cfg.padding;
        let act = cfg.activation;
        let mut li = 0usize;
        // Applies layer `li` (with activation if `activated`), recording its
        // input and pre-activation.
        let mut apply = |input: &Tensor<T>, activated: bool, cache: &mut Option<&mut ForwardCache<T>>| -> Tensor<T> {
            let z = self.layers[li].forward(input, pad);
            li += 1;
            let out = if activated { activate(&z, act) } else { z.clone() };
            if let Some(c) = cache.as_deref_mut() {
                c.inputs.push(input.clone());
                c.pre.push(activated.then_some(z));
            }
            out
        };

        let h = apply(x, true, &mut cache);
        let mut cur = apply(&h, true, &mut cache);
        let mut skips = Vec::with_capacity(cfg.levels);
        for _ in 1..cfg.levels {
            skips.push(cur.clone());
            let hd = apply(&cur, false, &mut cache);
            let a = apply(&hd, true, &mut cache);
            let mut b = apply(&a, true, &mut cache);
            b.add_assign(&hd);
            cur = b;
        }
        for _ in 1..cfg.levels {
            let mut hu = apply(&cur, false, &mut cache);
            hu.add_assign(&skips.pop().expect("one skip per level"));
            let a = apply(&hu, true, &mut cache);
            let mut b = apply(&a, true, &mut cache);
            b.add_assign(&hu);
            cur = b;
        }
        Ok(apply(&cur, false, &mut cache))
    }

    /// Accumulates into `grad` the gradient of `sum(y * dy)` with respect to
    /// every parameter and returns the gradient with respect to the input.
    pub fn backward(&self, cache: &ForwardCache<T>, dy: &[T], grad: &mut VNetParams<T>) -> Result<Tensor<T>> {
        let cfg = &self.config;
        if cache.inputs.len() != self.layers.len() || grad.layers.len() != self.layers.len() {
            return Err(Error::Shape("cache or gradient does not match the network".into()));
        }
        if dy.len() != cfg.window {
            return Err(Error::Shape(format!("output gradient has {} values, expected {}", dy.len(), cfg.window)));
        }
        let pad = cfg.padding;
        let act = cfg.activation;
        let back = |li: usize, g: &Tensor<T>, grad: &mut VNetParams<T>| -> Tensor<T> {
            self.layers[li]
                .backward(&cache.inputs[li], g, pad, &mut grad.layers[li], true)
                .expect("input gradient requested")
        };
        // Back through an activated layer: multiply by act'(z) first.
        let back_act = |li: usize, mut g: Tensor<T>, grad: &mut VNetParams<T>| -> Tensor<T> {
            activation_back(&mut g, cache.pre[li].as_ref().expect("activated layer"), act);
            back(li, &g, grad)
        };

        let nl = self.layers.len();
        let mut li = nl - 1;
        let mut dcur = back(li, &Tensor::from_vec(1, cfg.window, dy.to_vec()), grad);
        let mut dskips: Vec<Option<Tensor<T>>> = vec![None; cfg.levels];

        // ascents, last one first; ascent j (0-based) consumed skip levels-2-j
        for j in (0..cfg.levels - 1).rev() {
            li -= 3;
            let (up, c1, c2) = (li, li + 1, li + 2);
            // cur = hu + act(z2), z2 = c2(a), a = act(z1), z1 = c1(hu)
            let da = back_act(c2, dcur.clone(), grad);
            let mut dhu = back_act(c1, da, grad);
            dhu.add_assign(&dcur);
            dskips[cfg.levels - 2 - j] = Some(dhu.clone());
            dcur = back(up, &dhu, grad);
        }
        // descents, deepest first; descent k consumed skip k-1 as its input
        for k in (1..cfg.levels).rev() {
            li -= 3;
            let (down, c1, c2) = (li, li + 1, li + 2);
            let da = back_act(c2, dcur.clone(), grad);
            let mut dhd = back_act(c1, da, grad);
            dhd.add_assign(&dcur);
            dcur = back(down, &dhd, grad);
            if let Some(ds) = dskips[k - 1].take() {
                dcur.add_assign(&ds);
            }
        }
        debug_assert_eq!(li, 2);
        let dh = back_act(1, dcur, grad);
        Ok(back_act(0, dh, grad))
    }
}

/// The network as a window model, evaluated in precision `T`.
#[derive(Debug, Clone)]
pub struct VNet<T> {
    pub params: VNetParams<T>,
}

impl<T: Scalar> VNet<T> {
    pub fn new(params: VNetParams<T>) -> Self {
        VNet { params }
    }

    pub fn predict_signal(&self, window: &Signal) -> Result<Vec<f64>> {
        let x = Tensor::from_vec(window.channels, window.len, window.data.iter().map(|&v| T::of(v)).collect());
        Ok(self.params.predict(&x)?.into_iter().map(|v| v.as_f64()).collect())
    }
}

impl<T: Scalar> WindowModel for VNet<T> {
    fn window_size(&self) -> usize {
        self.params.config.window
    }

    fn predict_windows(&self, windows: &[Signal]) -> Result<Vec<Vec<f64>>> {
        windows.par_iter().map(|w| self.predict_signal(w)).collect()
    }
}
