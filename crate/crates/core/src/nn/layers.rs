//! Parameterized building blocks shared by the cost, policy and value models.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::params::{ParamId, Params};
use super::real::Real;
use super::tensor::Tensor;
use super::NnError;

/// Affine map `x W + b` with `W: [in, out]`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn new<F: Real, R: Rng + ?Sized>(
        params: &mut Params<F>,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Self {
        let w = params.add_fan_in_uniform(format!("{name}.w"), &[inputs, outputs], inputs, rng);
        let b = params.add(format!("{name}.b"), Tensor::zeros(&[outputs]));
        Linear {
            w,
            b,
            inputs,
            outputs,
        }
    }

    pub fn forward<F: Real>(&self, g: &mut Graph<F>, p: &Params<F>, x: Var) -> Result<Var, NnError> {
        let w = g.param(p, self.w);
        let b = g.param(p, self.b);
        g.linear(x, w, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Gelu,
    Relu,
}

impl Activation {
    pub fn apply<F: Real>(self, g: &mut Graph<F>, x: Var) -> Var {
        match self {
            Activation::Gelu => g.gelu(x),
            Activation::Relu => g.relu(x),
        }
    }
}

/// Stack of linear layers with an activation between them (none after the last).
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

impl Mlp {
    pub fn new<F: Real, R: Rng + ?Sized>(
        params: &mut Params<F>,
        name: &str,
        sizes: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(params, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Mlp { layers, activation }
    }

    /// Applies every layer; `activate_last` also activates the final output.
    pub fn forward<F: Real>(
        &self,
        g: &mut Graph<F>,
        p: &Params<F>,
        mut x: Var,
        activate_last: bool,
    ) -> Result<Var, NnError> {
        let n = self.layers.len();
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(g, p, x)?;
            if i + 1 < n || activate_last {
                x = self.activation.apply(g, x);
            }
        }
        Ok(x)
    }

    pub fn last(&self) -> &Linear {
        self.layers.last().expect("mlp has at least one layer")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new<F: Real>(params: &mut Params<F>, name: &str, dim: usize) -> Self {
        LayerNorm {
            gamma: params.add(format!("{name}.gamma"), Tensor::full(&[dim], F::ONE)),
            beta: params.add(format!("{name}.beta"), Tensor::zeros(&[dim])),
        }
    }

    pub fn forward<F: Real>(&self, g: &mut Graph<F>, p: &Params<F>, x: Var) -> Result<Var, NnError> {
        let gamma = g.param(p, self.gamma);
        let beta = g.param(p, self.beta);
        g.layer_norm(x, gamma, beta)
    }
}

/// Multi-head scaled dot-product self-attention over every position.
#[derive(Debug, Clone, Copy)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
    pub dim: usize,
}

impl MultiHeadAttention {
    pub fn new<F: Real, R: Rng + ?Sized>(
        params: &mut Params<F>,
        name: &str,
        dim: usize,
        heads: usize,
        rng: &mut R,
    ) -> Self {
        assert!(dim % heads == 0, "model width must split evenly across heads");
        let query = Linear::new(params, &format!("{name}.q"), dim, dim, rng);
        let key = Linear::new(params, &format!("{name}.k"), dim, dim, rng);
        // Keys start as a copy of the queries, so the initial scores x·WWᵀ·y
        // favour similar tokens instead of being pure noise.
        *params.get_mut(key.w) = params.get(query.w).clone();
        MultiHeadAttention {
            query,
            key,
            value: Linear::new(params, &format!("{name}.v"), dim, dim, rng),
            output: Linear::new(params, &format!("{name}.o"), dim, dim, rng),
            heads,
            dim,
        }
    }

    /// `x: [batch, positions, dim]` to the same shape.
    pub fn forward<F: Real>(&self, g: &mut Graph<F>, p: &Params<F>, x: Var) -> Result<Var, NnError> {
        let shape = g.shape(x).to_vec();
        if shape.len() != 3 || shape[2] != self.dim {
            return Err(NnError::Shape(format!(
                "attention input {shape:?}, expected [batch, positions, {}]",
                self.dim
            )));
        }
        let (batch, pos, h) = (shape[0], shape[1], self.heads);
        let dh = self.dim / h;
        let split = |g: &mut Graph<F>, v: Var| -> Result<Var, NnError> {
            let v = g.reshape(v, &[batch, pos, h, dh])?;
            let v = g.permute0213(v)?;
            g.reshape(v, &[batch * h, pos, dh])
        };
        let q = self.query.forward(g, p, x)?;
        let q = split(g, q)?;
        let k = self.key.forward(g, p, x)?;
        let k = split(g, k)?;
        let v = self.value.forward(g, p, x)?;
        let v = split(g, v)?;
        let scores = g.batch_matmul(q, k, true)?;
        let scores = g.scale(scores, 1.0 / (dh as f64).sqrt());
        let weights = g.softmax(scores);
        let mixed = g.batch_matmul(weights, v, false)?;
        let mixed = g.reshape(mixed, &[batch, h, pos, dh])?;
        let mixed = g.permute0213(mixed)?;
        let mixed = g.reshape(mixed, &[batch, pos, self.dim])?;
        self.output.forward(g, p, mixed)
    }
}

/// Pre-norm transformer encoder block: attention and feed-forward sublayers,
/// each wrapped in a residual connection.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub norm1: LayerNorm,
    pub attention: MultiHeadAttention,
    pub norm2: LayerNorm,
    pub ff: Mlp,
}

impl EncoderLayer {
    pub fn new<F: Real, R: Rng + ?Sized>(
        params: &mut Params<F>,
        name: &str,
        dim: usize,
        heads: usize,
        ff_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        EncoderLayer {
            norm1: LayerNorm::new(params, &format!("{name}.ln1"), dim),
            attention: MultiHeadAttention::new(params, &format!("{name}.attn"), dim, heads, rng),
            norm2: LayerNorm::new(params, &format!("{name}.ln2"), dim),
            ff: Mlp::new(params, &format!("{name}.ff"), &[dim, ff_dim, dim], activation, rng),
        }
    }

    pub fn forward<F: Real>(&self, g: &mut Graph<F>, p: &Params<F>, x: Var) -> Result<Var, NnError> {
        let h = self.norm1.forward(g, p, x)?;
        let h = self.attention.forward(g, p, h)?;
        let x = g.add(x, h)?;
        let h = self.norm2.forward(g, p, x)?;
        let h = self.ff.forward(g, p, h, false)?;
        g.add(x, h)
    }
}

/// One-hot rows for integer codes, shape `[codes.len() / width, width * classes]`.
pub fn one_hot<F: Real>(codes: &[u8], width: usize, classes: usize) -> Tensor<F> {
    let rows = codes.len() / width;
    let mut data = vec![F::ZERO; rows * width * classes];
    for (i, &c) in codes.iter().enumerate() {
        data[i * classes + c as usize] = F::ONE;
    }
    Tensor::new(&[rows, width * classes], data).expect("one-hot shape")
}
