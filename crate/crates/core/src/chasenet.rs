//! Learned state-pair cost estimator and its training procedures.
//!
//! A [`CostModel`] maps a pair `(start, target)` of cube states to a positive
//! estimate of the number of quarter turns separating them. Two
//! architectures share one interface:
//!
//! * `Fc`: two MLP heads over one-hot stickers (24 × 6 per state); their
//!   feature vectors are concatenated and reduced to a scalar by a trunk MLP.
//!   By default each head reads the whole pair; a head can also be limited
//!   to its own state, which learns far more slowly because only the trunk
//!   can then compare the two states.
//! * `Attention`: the 48 stickers of both states become tokens (colour plus a
//!   start/target segment bit) with a learned embedding per slot, run through
//!   a pre-norm transformer encoder, mean-pooled and projected to a scalar.
//!
//! The raw scalar goes through `softplus(x) + floor`, so every prediction is
//! strictly positive and its logarithm is always defined.
//!
//! Warmup labels come from random walks: starting at a uniformly random
//! state, the pair `(start, state after i twists)` is labelled `i`. The label
//! upper-bounds the true distance because walks can backtrack.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cube::{index_to_state, CubeState, ScrambleSampler, StateIndex, COLORS, NUM_STATES, STICKERS};
use crate::nn::{
    assign_by_name, load_checkpoint, one_hot, save_checkpoint, Activation, Adam, AdamConfig,
    EncoderLayer, Graph, LayerNorm, Linear, Mlp, NnError, ParamId, Params, Real, Tensor, Var,
};

/// Width of the one-hot encoding of a single state.
pub const STATE_FEATURES: usize = STICKERS * COLORS;
/// Width of the one-hot encoding of a pair.
pub const PAIR_FEATURES: usize = 2 * STATE_FEATURES;
/// Number of sticker tokens per pair.
pub const PAIR_TOKENS: usize = 2 * STICKERS;

#[derive(Debug, Error)]
pub enum ChaseNetError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("checkpoint metadata: {0}")]
    Meta(String),
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Fc,
    Attention,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fc" => Ok(Variant::Fc),
            "attention" => Ok(Variant::Attention),
            other => Err(format!("unknown variant {other:?} (expected fc or attention)")),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Fc => "fc",
            Variant::Attention => "attention",
        })
    }
}

/// What each FC head reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HeadInput {
    /// Both heads see the full 288-wide pair encoding.
    #[default]
    Pair,
    /// The start head sees only the start state, the target head only the target.
    State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChaseNetConfig {
    pub variant: Variant,
    pub activation: Activation,
    pub fc_head_input: HeadInput,
    /// Head widths of the FC variant (input width is implied by `fc_head_input`).
    pub fc_head: Vec<usize>,
    /// Trunk widths after concatenation (the scalar output layer is implied).
    pub fc_trunk: Vec<usize>,
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub ff_dim: usize,
    /// Added after softplus so predictions stay strictly positive.
    pub output_floor: f64,
}

impl Default for ChaseNetConfig {
    fn default() -> Self {
        ChaseNetConfig {
            variant: Variant::Fc,
            activation: Activation::Relu,
            fc_head_input: HeadInput::Pair,
            fc_head: vec![256, 128],
            fc_trunk: vec![128],
            d_model: 64,
            heads: 4,
            layers: 2,
            ff_dim: 128,
            output_floor: 1e-2,
        }
    }
}

impl ChaseNetConfig {
    pub fn with_variant(variant: Variant) -> Self {
        ChaseNetConfig {
            variant,
            ..Self::default()
        }
    }
}

/// Network input for a batch of pairs.
#[derive(Debug, Clone, PartialEq)]
pub enum PairEncoding {
    /// `[n, 288]`: one-hot start stickers followed by one-hot target stickers.
    OneHot(Vec<u8>),
    /// `n × 48` token ids: `colour + 6 · segment` (segment 0 = start).
    Tokens(Vec<usize>),
}

/// Encoding of a single pair for the given architecture.
pub fn encode_pair(start: &CubeState, target: &CubeState, variant: Variant) -> PairEncoding {
    match variant {
        Variant::Fc => {
            let mut v = vec![0u8; PAIR_FEATURES];
            for (half, s) in [start, target].into_iter().enumerate() {
                for (i, &c) in s.stickers().iter().enumerate() {
                    v[half * STATE_FEATURES + i * COLORS + c as usize] = 1;
                }
            }
            PairEncoding::OneHot(v)
        }
        Variant::Attention => PairEncoding::Tokens(pair_tokens(start, target).to_vec()),
    }
}

fn pair_tokens(start: &CubeState, target: &CubeState) -> [usize; PAIR_TOKENS] {
    let mut t = [0usize; PAIR_TOKENS];
    for (i, &c) in start.stickers().iter().enumerate() {
        t[i] = c as usize;
    }
    for (i, &c) in target.stickers().iter().enumerate() {
        t[STICKERS + i] = COLORS + c as usize;
    }
    t
}

#[derive(Debug, Clone)]
enum Arch {
    Fc {
        start_head: Mlp,
        target_head: Mlp,
        trunk: Mlp,
    },
    Attention {
        tokens: ParamId,
        positions: ParamId,
        layers: Vec<EncoderLayer>,
        norm: LayerNorm,
        head: Linear,
    },
}

/// Cost estimator `C(start, target) > 0`.
#[derive(Debug, Clone)]
pub struct CostModel<F> {
    pub config: ChaseNetConfig,
    pub params: Params<F>,
    arch: Arch,
}

/// Unit-variance uniform initialisation for embedding tables.
fn unit_uniform<F: Real, R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor<F> {
    let bound = 3f64.sqrt();
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| F::from_f64(rng.gen_range(-bound..bound))).collect()).expect("shape matches")
}

impl<F: Real> CostModel<F> {
    pub fn new<R: Rng + ?Sized>(config: ChaseNetConfig, rng: &mut R) -> Self {
        let mut params = Params::new();
        let act = config.activation;
        let arch = match config.variant {
            Variant::Fc => {
                let mut head = vec![match config.fc_head_input {
                    HeadInput::Pair => PAIR_FEATURES,
                    HeadInput::State => STATE_FEATURES,
                }];
                head.extend(&config.fc_head);
                let feat = *head.last().expect("head has an input width");
                let start_head = Mlp::new(&mut params, "start", &head, act, rng);
                let target_head = Mlp::new(&mut params, "target", &head, act, rng);
                let mut trunk = vec![2 * feat];
                trunk.extend(&config.fc_trunk);
                trunk.push(1);
                let trunk = Mlp::new(&mut params, "trunk", &trunk, act, rng);
                Arch::Fc {
                    start_head,
                    target_head,
                    trunk,
                }
            }
            Variant::Attention => {
                let d = config.d_model;
                let tokens = params.add("embed.tokens", unit_uniform(&[2 * COLORS, d], rng));
                // Start and target copies of a sticker slot begin with the same
                // embedding, so attention can pair them up from the first step.
                let mut pos = unit_uniform::<F, R>(&[STICKERS, d], rng).into_data();
                pos.extend_from_within(..);
                let positions = params.add(
                    "embed.positions",
                    Tensor::new(&[PAIR_TOKENS, d], pos).expect("two copies of the slot table"),
                );
                let layers = (0..config.layers)
                    .map(|i| {
                        EncoderLayer::new(&mut params, &format!("enc{i}"), d, config.heads, config.ff_dim, act, rng)
                    })
                    .collect();
                let norm = LayerNorm::new(&mut params, "final_ln", d);
                let head = Linear::new(&mut params, "head", d, 1, rng);
                Arch::Attention {
                    tokens,
                    positions,
                    layers,
                    norm,
                    head,
                }
            }
        };
        CostModel { config, params, arch }
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    /// Sets the output bias so that a network whose other output weights
    /// are near zero predicts `value`. Starting at the mean label skips the
    /// long plateau where training only moves the bias.
    pub fn init_output(&mut self, value: f64) {
        let bias = match &self.arch {
            Arch::Fc { trunk, .. } => trunk.last().b,
            Arch::Attention { head, .. } => head.b,
        };
        let target = (value - self.config.output_floor).max(1e-3);
        // Inverse softplus.
        let raw = target + (-(-target).exp_m1()).ln();
        self.params.get_mut(bias).data_mut().fill(F::from_f64(raw));
    }

    /// Raw network output before the positivity transform, `[n]`.
    fn logits(&self, g: &mut Graph<F>, p: &Params<F>, pairs: &[(CubeState, CubeState)]) -> Result<Var, NnError> {
        let n = pairs.len();
        match &self.arch {
            Arch::Fc {
                start_head,
                target_head,
                trunk,
            } => {
                let (xs, xt) = match self.config.fc_head_input {
                    HeadInput::Pair => {
                        let mut both = Vec::with_capacity(2 * n * STICKERS);
                        for (s, t) in pairs {
                            both.extend_from_slice(s.stickers());
                            both.extend_from_slice(t.stickers());
                        }
                        let x = g.input(one_hot(&both, 2 * STICKERS, COLORS));
                        (x, x)
                    }
                    HeadInput::State => {
                        let mut starts = Vec::with_capacity(n * STICKERS);
                        let mut targets = Vec::with_capacity(n * STICKERS);
                        for (s, t) in pairs {
                            starts.extend_from_slice(s.stickers());
                            targets.extend_from_slice(t.stickers());
                        }
                        (
                            g.input(one_hot(&starts, STICKERS, COLORS)),
                            g.input(one_hot(&targets, STICKERS, COLORS)),
                        )
                    }
                };
                let hs = start_head.forward(g, p, xs, true)?;
                let ht = target_head.forward(g, p, xt, true)?;
                let h = g.concat(hs, ht)?;
                let out = trunk.forward(g, p, h, false)?;
                g.reshape(out, &[n])
            }
            Arch::Attention {
                tokens,
                positions,
                layers,
                norm,
                head,
            } => {
                let d = self.config.d_model;
                let mut ids = Vec::with_capacity(n * PAIR_TOKENS);
                for (s, t) in pairs {
                    ids.extend_from_slice(&pair_tokens(s, t));
                }
                let slots: Vec<usize> = (0..n).flat_map(|_| 0..PAIR_TOKENS).collect();
                let tok_table = g.param(p, *tokens);
                let pos_table = g.param(p, *positions);
                let te = g.embedding(tok_table, &ids)?;
                let pe = g.embedding(pos_table, &slots)?;
                let x = g.add(te, pe)?;
                let mut x = g.reshape(x, &[n, PAIR_TOKENS, d])?;
                for layer in layers {
                    x = layer.forward(g, p, x)?;
                }
                let x = norm.forward(g, p, x)?;
                let pooled = g.mean_axis1(x)?;
                let out = head.forward(g, p, pooled)?;
                g.reshape(out, &[n])
            }
        }
    }

    /// Positive cost predictions `[n]` recorded on `g`.
    pub fn forward(&self, g: &mut Graph<F>, p: &Params<F>, pairs: &[(CubeState, CubeState)]) -> Result<Var, NnError> {
        let raw = self.logits(g, p, pairs)?;
        let sp = g.softplus(raw);
        Ok(g.add_scalar(sp, self.config.output_floor))
    }

    /// Batched inference.
    pub fn predict(&self, pairs: &[(CubeState, CubeState)]) -> Vec<f64> {
        let chunk = match self.config.variant {
            Variant::Fc => 2048,
            Variant::Attention => 256,
        };
        let mut out = Vec::with_capacity(pairs.len());
        for part in pairs.chunks(chunk) {
            let mut g = Graph::new();
            let y = self
                .forward(&mut g, &self.params, part)
                .expect("cost model shapes are fixed by construction");
            out.extend(g.value(y).data().iter().map(|v| v.to_f64()));
        }
        out
    }

    pub fn predict_cost(&self, start: &CubeState, target: &CubeState) -> f64 {
        self.predict(&[(*start, *target)])[0]
    }

    /// Mean squared error of the model on `samples`, recorded on `g`.
    pub fn loss(&self, g: &mut Graph<F>, p: &Params<F>, samples: &[PairSample]) -> Result<Var, NnError> {
        let pairs: Vec<(CubeState, CubeState)> = samples.iter().map(|s| (s.start, s.end)).collect();
        let pred = self.forward(g, p, &pairs)?;
        let y = g.input(Tensor::new(
            &[samples.len()],
            samples.iter().map(|s| F::from_f64(s.twists as f64)).collect(),
        )?);
        let diff = g.sub(pred, y)?;
        let sq = g.square(diff);
        Ok(g.mean(sq))
    }

    /// One optimizer step on a minibatch; returns the pre-step loss.
    pub fn train_batch(&mut self, adam: &mut Adam, samples: &[PairSample]) -> Result<f64, NnError> {
        let mut g = Graph::new();
        let loss = self.loss(&mut g, &self.params, samples)?;
        let value = g.value(loss).item().to_f64();
        let grads = g.backward(loss)?.param_grads(&self.params);
        adam.step(&mut self.params, &grads)?;
        Ok(value)
    }

    /// Loss over a whole dataset without updating.
    pub fn dataset_loss(&self, samples: &[PairSample]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let pairs: Vec<(CubeState, CubeState)> = samples.iter().map(|s| (s.start, s.end)).collect();
        let pred = self.predict(&pairs);
        let y: Vec<f64> = samples.iter().map(|s| s.twists as f64).collect();
        regression_loss(&pred, &y).expect("equal lengths")
    }

    pub fn meta(&self) -> String {
        toml::to_string(&self.config).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), ChaseNetError> {
        Ok(save_checkpoint(path, &self.params, &self.meta())?)
    }

    pub fn load(path: &Path) -> Result<Self, ChaseNetError> {
        let (loaded, meta) = load_checkpoint::<F>(path)?;
        let config: ChaseNetConfig = toml::from_str(&meta).map_err(|e| ChaseNetError::Meta(e.to_string()))?;
        let mut model = CostModel::new(config, &mut rand::rngs::mock::StepRng::new(0, 1));
        assign_by_name(&mut model.params, &loaded)?;
        Ok(model)
    }

    /// Same weights in another precision.
    pub fn cast<G: Real>(&self) -> CostModel<G> {
        CostModel {
            config: self.config.clone(),
            params: self.params.cast(),
            arch: self.arch.clone(),
        }
    }
}

pub fn predict_cost<F: Real>(m: &CostModel<F>, start: &CubeState, target: &CubeState) -> f64 {
    m.predict_cost(start, target)
}

/// Mean of squared residuals.
pub fn regression_loss(pred: &[f64], y: &[f64]) -> Result<f64, ChaseNetError> {
    if pred.len() != y.len() {
        return Err(ChaseNetError::LengthMismatch(pred.len(), y.len()));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

/// A labelled pair from one trajectory: `end` was reached from `start` by
/// `twists` actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSample {
    pub start: CubeState,
    pub end: CubeState,
    pub twists: u32,
}

/// Uniformly random reachable state.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R) -> CubeState {
    let i = rng.gen_range(0..NUM_STATES as u32);
    index_to_state(StateIndex::new(i).expect("sampled in range"))
}

/// One warmup trajectory: a random start followed by `k` constrained twists,
/// labelling each visited state with its twist count.
pub fn trajectory_pairs<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<PairSample> {
    let start = random_state(rng);
    let mut sampler = ScrambleSampler::new();
    let mut current = start;
    (1..=k)
        .map(|i| {
            current = current.apply(sampler.next(rng));
            PairSample {
                start,
                end: current,
                twists: i as u32,
            }
        })
        .collect()
}

/// Whole trajectories until at least `size` samples are collected.
pub fn warmup_dataset<R: Rng + ?Sized>(rng: &mut R, size: usize, k: usize) -> Vec<PairSample> {
    let mut d = Vec::with_capacity(size + k);
    while d.len() < size {
        d.extend(trajectory_pairs(rng, k));
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WarmupConfig {
    /// Outer iterations; each draws a fresh dataset.
    pub iters: usize,
    /// Minimum samples per dataset.
    pub dataset_size: usize,
    /// Twists per trajectory.
    pub twists: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Learning rate at the last iteration relative to `adam.lr`, reached by
    /// cosine decay; 1 keeps it constant.
    pub final_lr_scale: f64,
}

impl WarmupConfig {
    /// Mean of the labels `1..=twists`.
    pub fn mean_label(&self) -> f64 {
        (self.twists as f64 + 1.0) / 2.0
    }
}

impl Default for WarmupConfig {
    fn default() -> Self {
        WarmupConfig {
            iters: 1000,
            dataset_size: 4096,
            twists: 20,
            batch_size: 256,
            adam: AdamConfig::default(),
            final_lr_scale: 0.05,
        }
    }
}

/// One shuffled pass over `data` in minibatches; returns the mean batch loss.
pub fn train_epoch<F: Real, R: Rng + ?Sized>(
    model: &mut CostModel<F>,
    adam: &mut Adam,
    data: &mut [PairSample],
    batch_size: usize,
    rng: &mut R,
) -> Result<f64, NnError> {
    if data.is_empty() {
        return Ok(0.0);
    }
    data.shuffle(rng);
    let mut total = 0.0;
    let mut batches = 0;
    for batch in data.chunks(batch_size.max(1)) {
        total += model.train_batch(adam, batch)?;
        batches += 1;
    }
    Ok(total / batches as f64)
}

/// Warmup state that can be advanced one iteration at a time.
pub struct Warmup<F, R> {
    pub model: CostModel<F>,
    pub adam: Adam,
    pub config: WarmupConfig,
    pub losses: Vec<f64>,
    rng: R,
}

impl<F: Real, R: Rng> Warmup<F, R> {
    pub fn new(model: CostModel<F>, config: WarmupConfig, rng: R) -> Self {
        let adam = Adam::new(config.adam, &model.params);
        Warmup {
            model,
            adam,
            config,
            losses: Vec::new(),
            rng,
        }
    }

    /// Draws a fresh dataset and trains one pass on it; returns its mean loss.
    pub fn step(&mut self) -> Result<f64, NnError> {
        self.adam.config.lr = self.config.adam.lr * self.lr_scale(self.losses.len());
        let mut data = warmup_dataset(&mut self.rng, self.config.dataset_size, self.config.twists);
        let loss = train_epoch(&mut self.model, &mut self.adam, &mut data, self.config.batch_size, &mut self.rng)?;
        self.losses.push(loss);
        Ok(loss)
    }

    /// Cosine interpolation from 1 at iteration 0 to `final_lr_scale` at the last.
    pub fn lr_scale(&self, iteration: usize) -> f64 {
        let last = self.config.iters.saturating_sub(1).max(1) as f64;
        let t = (iteration as f64 / last).min(1.0);
        let f = self.config.final_lr_scale;
        f + (1.0 - f) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
    }

    pub fn run(mut self, mut observe: impl FnMut(usize, f64)) -> Result<(CostModel<F>, Vec<f64>), NnError> {
        for j in 0..self.config.iters {
            let loss = self.step()?;
            observe(j, loss);
        }
        Ok((self.model, self.losses))
    }
}

/// Runs the full warmup schedule from a freshly initialized model.
pub fn warmup<F: Real, R: Rng>(
    net: ChaseNetConfig,
    config: WarmupConfig,
    mut rng: R,
    observe: impl FnMut(usize, f64),
) -> Result<(CostModel<F>, Vec<f64>), NnError> {
    let mut model = CostModel::new(net, &mut rng);
    model.init_output(config.mean_label());
    Warmup::new(model, config, rng).run(observe)
}

/// Continued training on policy-generated pairs at a reduced learning rate.
pub struct Finetuner {
    pub adam: Adam,
    pub batch_size: usize,
}

impl Finetuner {
    pub fn new<F: Real>(model: &CostModel<F>, adam: AdamConfig, batch_size: usize) -> Self {
        Finetuner {
            adam: Adam::new(adam, &model.params),
            batch_size,
        }
    }

    /// One pass over `data`; a no-op for an empty set.
    pub fn finetune<F: Real, R: Rng + ?Sized>(
        &mut self,
        model: &mut CostModel<F>,
        data: &mut [PairSample],
        rng: &mut R,
    ) -> Result<Option<f64>, NnError> {
        if data.is_empty() {
            return Ok(None);
        }
        train_epoch(model, &mut self.adam, data, self.batch_size, rng).map(Some)
    }
}
