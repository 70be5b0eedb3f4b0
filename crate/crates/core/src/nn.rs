//! Small dense networks with hand-written reverse mode and Adam.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative given the pre-activation `x` and the output `y`.
    pub fn derivative<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Identity => T::one(),
        }
    }
}

/// Fully connected layer, `y = act(W x + b)` with `W` stored row-major
/// as `[n_out][n_in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub n_in: usize,
    pub n_out: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(n_in: usize, n_out: usize, activation: Activation) -> Self {
        Self {
            n_in,
            n_out,
            weight: vec![T::zero(); n_in * n_out],
            bias: vec![T::zero(); n_out],
            activation,
        }
    }

    /// Uniform fan-in initialisation with bound `sqrt(6 / n_in)`; zero bias.
    pub fn he_uniform<R: Rng + ?Sized>(
        n_in: usize,
        n_out: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let bound = (6.0 / n_in as f64).sqrt();
        let weight = (0..n_in * n_out)
            .map(|_| T::lit(rng.random_range(-bound..bound)))
            .collect();
        Self {
            weight,
            ..Self::zeros(n_in, n_out, activation)
        }
    }

    fn pre_activation(&self, x: &[T]) -> Vec<T> {
        let mut z = self.bias.clone();
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &self.weight[o * self.n_in..(o + 1) * self.n_in];
            let mut acc = T::zero();
            for (w, xi) in row.iter().zip(x) {
                acc += *w * *xi;
            }
            *zo += acc;
        }
        z
    }
}

/// Activations saved by a forward pass, needed for `backward`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape<T> {
    /// `inputs[l]` is the input to layer `l`; the last entry is the output.
    inputs: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn output(&self) -> &[T] {
        self.inputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Parameter gradients, one `(weight, bias)` pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![T::zero(); l.weight.len()], vec![T::zero(); l.bias.len()]))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.iter_mut().zip(ow).for_each(|(a, b)| *a += *b);
            b.iter_mut().zip(ob).for_each(|(a, b)| *a += *b);
        }
    }

    pub fn scale(&mut self, k: T) {
        for v in self.iter_mut() {
            *v *= k;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers
            .iter_mut()
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn congruent_with(&self, net: &Mlp<T>) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|((w, b), l)| w.len() == l.weight.len() && b.len() == l.bias.len())
    }
}

/// Layer sizes and activations, enough to rebuild an `Mlp` shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub sizes: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
}

impl Architecture {
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        Self {
            sizes: sizes.to_vec(),
            hidden,
            output,
        }
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 2 == self.sizes.len() {
            self.output
        } else {
            self.hidden
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Mlp<T> {
    pub fn zeros(arch: &Architecture) -> Self {
        assert!(arch.sizes.len() >= 2, "an mlp needs an input and an output size");
        let layers = arch
            .sizes
            .windows(2)
            .enumerate()
            .map(|(l, s)| Dense::zeros(s[0], s[1], arch.activation(l)))
            .collect();
        Self { layers }
    }

    pub fn he_uniform<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Self {
        assert!(arch.sizes.len() >= 2, "an mlp needs an input and an output size");
        let layers = arch
            .sizes
            .windows(2)
            .enumerate()
            .map(|(l, s)| Dense::he_uniform(s[0], s[1], arch.activation(l), rng))
            .collect();
        Self { layers }
    }

    pub fn architecture(&self) -> Architecture {
        let mut sizes = vec![self.n_in()];
        sizes.extend(self.layers.iter().map(|l| l.n_out));
        let output = self
            .layers
            .last()
            .map(|l| l.activation)
            .unwrap_or(Activation::Identity);
        let hidden = if self.layers.len() > 1 {
            self.layers[0].activation
        } else {
            output
        };
        Architecture {
            sizes,
            hidden,
            output,
        }
    }

    pub fn n_in(&self) -> usize {
        self.layers.first().map(|l| l.n_in).unwrap_or(0)
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().map(|l| l.n_out).unwrap_or(0)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &T> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.n_in == b.n_in && a.n_out == b.n_out)
    }

    /// Element-wise conversion to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    n_in: l.n_in,
                    n_out: l.n_out,
                    weight: l.weight.iter().map(|w| U::lit(w.as_f64())).collect(),
                    bias: l.bias.iter().map(|b| U::lit(b.as_f64())).collect(),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.n_in() {
            return Err(Error::Dimension {
                expected: self.n_in(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer.pre_activation(&h);
            h.iter_mut().for_each(|v| *v = layer.activation.apply(*v));
        }
        Ok(h)
    }

    pub fn forward_tape(&self, x: &[T]) -> Result<Tape<T>> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        inputs.push(x.to_vec());
        for layer in &self.layers {
            let z = layer.pre_activation(inputs.last().unwrap());
            let y = z.iter().map(|v| layer.activation.apply(*v)).collect();
            pre.push(z);
            inputs.push(y);
        }
        Ok(Tape { inputs, pre })
    }

    /// Gradients of `upstream · output` with respect to every parameter and
    /// to the input.
    pub fn backward(&self, tape: &Tape<T>, upstream: &[T]) -> Result<(Gradients<T>, Vec<T>)> {
        if upstream.len() != self.n_out() {
            return Err(Error::Dimension {
                expected: self.n_out(),
                got: upstream.len(),
            });
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta = upstream.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let z = &tape.pre[l];
            let y = &tape.inputs[l + 1];
            for (o, d) in delta.iter_mut().enumerate() {
                *d *= layer.activation.derivative(z[o], y[o]);
            }
            let x = &tape.inputs[l];
            let (gw, gb) = &mut grads.layers[l];
            let mut dx = vec![T::zero(); layer.n_in];
            for o in 0..layer.n_out {
                let d = delta[o];
                gb[o] += d;
                if d == T::zero() {
                    continue;
                }
                let row = o * layer.n_in;
                for i in 0..layer.n_in {
                    gw[row + i] += d * x[i];
                    dx[i] += d * layer.weight[row + i];
                }
            }
            delta = dx;
        }
        Ok((grads, delta))
    }

    /// `self ← rho·online + (1 − rho)·self`
    pub fn soft_update_from(&mut self, online: &Self, rho: T) -> Result<()> {
        if !self.same_shape(online) {
            return Err(Error::Config(
                "soft update between differently shaped networks".into(),
            ));
        }
        let keep = T::one() - rho;
        for (t, o) in self.params_mut().zip(online.params()) {
            *t = rho * *o + keep * *t;
        }
        Ok(())
    }
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse<T: Scalar>(pred: &[T], target: &[T]) -> (T, Vec<T>) {
    let n = T::lit(pred.len() as f64);
    let mut loss = T::zero();
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let r = *p - *t;
            loss += r * r;
            T::lit(2.0) * r / n
        })
        .collect();
    (loss / n, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub params: AdamParams,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(net: &Mlp<T>, params: AdamParams) -> Self {
        let n = net.num_params();
        Self {
            params,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    /// One bias-corrected Adam update. Non-finite gradients abort without
    /// touching the network.
    pub fn step(&mut self, net: &mut Mlp<T>, grads: &Gradients<T>) -> Result<()> {
        if !grads.congruent_with(net) || self.m.len() != net.num_params() {
            return Err(Error::Dimension {
                expected: net.num_params(),
                got: grads.iter().count(),
            });
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
        self.t += 1;
        let p = self.params;
        let (b1, b2) = (T::lit(p.beta1), T::lit(p.beta2));
        let c1 = T::one() - T::lit(p.beta1.powi(self.t as i32));
        let c2 = T::one() - T::lit(p.beta2.powi(self.t as i32));
        let lr = T::lit(p.lr);
        let eps = T::lit(p.eps);
        for (((w, g), m), v) in net
            .params_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = b1 * *m + (T::one() - b1) * *g;
            *v = b2 * *v + (T::one() - b2) * *g * *g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
