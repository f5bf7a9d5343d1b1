use ndarray::Zip;

use super::nn::{DenseNet, Grads};
use crate::scalar::Scalar;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moments for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<S> {
    pub m: Grads<S>,
    pub v: Grads<S>,
    pub t: u64,
}

impl<S: Scalar> Adam<S> {
    pub fn new(net: &DenseNet<S>) -> Self {
        Self {
            m: Grads::zeros_like(net),
            v: Grads::zeros_like(net),
            t: 0,
        }
    }

    /// One descent step on `net` along `grads`.
    pub fn step(&mut self, net: &mut DenseNet<S>, grads: &Grads<S>, lr: S) {
        self.t += 1;
        let (b1, b2, eps) = (S::lit(BETA1), S::lit(BETA2), S::lit(EPSILON));
        let c1 = S::one() - b1.powi(self.t as i32);
        let c2 = S::one() - b2.powi(self.t as i32);
        let update = |p: &mut S, m: &mut S, v: &mut S, g: &S| {
            *m = b1 * *m + (S::one() - b1) * *g;
            *v = b2 * *v + (S::one() - b2) * *g * *g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (((layer, m), v), g) in net
            .layers
            .iter_mut()
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
            .zip(&grads.layers)
        {
            Zip::from(&mut layer.weight)
                .and(&mut m.weight)
                .and(&mut v.weight)
                .and(&g.weight)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(update);
        }
    }
}

/// Adam for a single scalar parameter (the entropy temperature).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScalarAdam {
    pub m: f64,
    pub v: f64,
    pub t: u64,
}

impl ScalarAdam {
    pub fn step(&mut self, p: &mut f64, g: f64, lr: f64) {
        self.t += 1;
        self.m = BETA1 * self.m + (1.0 - BETA1) * g;
        self.v = BETA2 * self.v + (1.0 - BETA2) * g * g;
        let m_hat = self.m / (1.0 - BETA1.powi(self.t as i32));
        let v_hat = self.v / (1.0 - BETA2.powi(self.t as i32));
        *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
}
