//! Fully connected networks with hand-written backpropagation.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Relu => x.max(S::zero()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative_from_output<S: Scalar>(self, y: S) -> S {
        match self {
            Activation::Relu => {
                if y > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Tanh => S::one() - y * y,
        }
    }
}

/// Weights are stored input-major (`in x out`) so a batch forward pass is a
/// single `x . W` product.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<S> {
    pub weight: Array2<S>,
    pub bias: Array1<S>,
}

/// Gradients (or Adam moments) with the same shapes as a network.
#[derive(Clone, Debug, PartialEq)]
pub struct Grads<S> {
    pub layers: Vec<Dense<S>>,
}

impl<S: Scalar> Grads<S> {
    pub fn zeros_like(net: &DenseNet<S>) -> Self {
        Grads {
            layers: net
                .layers
                .iter()
                .map(|l| Dense {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn flat(&self) -> Vec<S> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }
}

/// Multilayer perceptron: hidden layers use `activation`, the output layer
/// is linear.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet<S> {
    pub layers: Vec<Dense<S>>,
    pub activation: Activation,
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardCache<S> {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<S>>,
}

impl<S: Scalar> DenseNet<S> {
    /// Uniform fan-in initialisation, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`
    /// for weights and biases; the output layer is additionally scaled by
    /// `output_scale`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activation: Activation, output_scale: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "a network needs input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let bound = 1.0 / (w[0] as f64).sqrt() * if i == last { output_scale } else { 1.0 };
                let mut draw = || S::lit(rng.random_range(-bound..=bound));
                Dense {
                    weight: Array2::from_shape_simple_fn((w[0], w[1]), &mut draw),
                    bias: Array1::from_shape_simple_fn(w[1], &mut draw),
                }
            })
            .collect();
        Self { layers, activation }
    }

    /// All parameters zero; every output is exactly zero.
    pub fn zeros(sizes: &[usize], activation: Activation) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Dense {
                weight: Array2::zeros((w[0], w[1])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Self { layers, activation }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].weight.nrows()];
        s.extend(self.layers.iter().map(|l| l.weight.ncols()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").weight.ncols()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: ArrayView2<'_, S>) -> Array2<S> {
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            h = h.dot(&l.weight) + &l.bias;
            if i < last {
                let act = self.activation;
                h.mapv_inplace(|v| act.apply(v));
            }
        }
        h
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, S>) -> (Array2<S>, ForwardCache<S>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let out = h.dot(&l.weight) + &l.bias;
            inputs.push(h);
            h = out;
            if i < last {
                let act = self.activation;
                h.mapv_inplace(|v| act.apply(v));
            }
        }
        (h, ForwardCache { inputs })
    }

    /// Backpropagates `grad_out` (d loss / d output). Returns parameter
    /// gradients and d loss / d input.
    pub fn backward(&self, cache: &ForwardCache<S>, grad_out: Array2<S>) -> (Grads<S>, Array2<S>) {
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut g = grad_out;
        for (i, l) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[i];
            let weight = input.t().dot(&g);
            let bias = g.sum_axis(Axis(0));
            let mut grad_in = g.dot(&l.weight.t());
            if i > 0 {
                // `input` is the activation output of the previous layer.
                let act = self.activation;
                Zip::from(&mut grad_in)
                    .and(input)
                    .for_each(|gi, &y| *gi = *gi * act.derivative_from_output(y));
            }
            layers.push(Dense { weight, bias });
            g = grad_in;
        }
        layers.reverse();
        (Grads { layers }, g)
    }

    pub fn params_flat(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[S]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Structural(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weight
                .iter_mut()
                .for_each(|w| *w = it.next().expect("length checked"));
            l.bias.iter_mut().for_each(|b| *b = it.next().expect("length checked"));
        }
        Ok(())
    }

    /// `self <- (1 - tau) * self + tau * online`, elementwise.
    pub fn polyak_from(&mut self, online: &DenseNet<S>, tau: S) -> Result<()> {
        if self.sizes() != online.sizes() {
            return Err(Error::Structural(format!(
                "polyak between networks of shapes {:?} and {:?}",
                self.sizes(),
                online.sizes()
            )));
        }
        let keep = S::one() - tau;
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            Zip::from(&mut t.weight)
                .and(&o.weight)
                .for_each(|t, &o| *t = keep * *t + tau * o);
            Zip::from(&mut t.bias)
                .and(&o.bias)
                .for_each(|t, &o| *t = keep * *t + tau * o);
        }
        Ok(())
    }
}
