//! PPO actor-critic training against the learned-cost environment, and the
//! greedy no-search solver used at evaluation time.
//!
//! Episodes run in lockstep across `envs` parallel environments so that the
//! policy, critic and cost model see one batched forward per step. An
//! iteration collects whole episodes until the buffer holds at least
//! `buffer` transitions, fine-tunes the cost model on the pairs those
//! episodes produced, then runs the clipped-surrogate update.

use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chasenet::{ChaseNetError, CostModel, Finetuner, PairSample};
use crate::cube::{Action, CubeState, COLORS, NUM_ACTIONS, STICKERS};
use crate::env::{self, EnvConfig, EnvError, Transition};
use crate::nn::{
    assign_by_name, clip_grad_norm, load_checkpoint, one_hot, save_checkpoint, Activation, Adam, AdamConfig,
    Graph, Mlp, NnError, Params, Real, Tensor, Var,
};

#[derive(Debug, Error)]
pub enum ActorError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Cost(#[from] ChaseNetError),
    #[error("episode is incomplete: last transition is not terminal")]
    IncompleteEpisode,
    #[error("{0} values for {1} transitions")]
    ValueCount(usize, usize),
    #[error("checkpoint metadata: {0}")]
    Meta(String),
}

/// Input width of the policy and critic: one-hot stickers.
pub const STATE_INPUT: usize = STICKERS * COLORS;

pub fn state_features<F: Real>(states: &[CubeState]) -> Tensor<F> {
    let codes: Vec<u8> = states.iter().flat_map(|s| s.stickers().iter().copied()).collect();
    let mut t = one_hot(&codes, STICKERS, COLORS);
    if states.is_empty() {
        t = Tensor::zeros(&[0, STATE_INPUT]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            hidden: vec![512, 256],
            activation: Activation::Relu,
        }
    }
}

fn build_mlp<F: Real, R: Rng + ?Sized>(
    params: &mut Params<F>,
    name: &str,
    cfg: &NetConfig,
    outputs: usize,
    rng: &mut R,
) -> Mlp {
    let mut sizes = vec![STATE_INPUT];
    sizes.extend(&cfg.hidden);
    sizes.push(outputs);
    let mlp = Mlp::new(params, name, &sizes, cfg.activation, rng);
    // A zero output layer starts the policy uniform and the critic at zero.
    let last = *mlp.last();
    params.get_mut(last.w).data_mut().fill(F::ZERO);
    mlp
}

fn read_net<F: Real>(path: &Path, kind: &str) -> Result<(Params<F>, String), ActorError> {
    let (params, meta) = load_checkpoint::<F>(path)?;
    let (head, body) = meta.split_once('\n').unwrap_or((meta.as_str(), ""));
    if head != format!("# {kind}") {
        return Err(ActorError::Meta(format!("expected a {kind} checkpoint, found {head:?}")));
    }
    Ok((params, body.to_string()))
}

/// `p(a | s)` over the six generators.
#[derive(Debug, Clone)]
pub struct PolicyModel<F> {
    pub config: NetConfig,
    pub params: Params<F>,
    mlp: Mlp,
}

impl<F: Real> PolicyModel<F> {
    pub fn new<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Self {
        let mut params = Params::new();
        let mlp = build_mlp(&mut params, "policy", &config, NUM_ACTIONS, rng);
        PolicyModel { config, params, mlp }
    }

    /// Unnormalized action scores `[n, 6]`.
    pub fn logits(&self, g: &mut Graph<F>, p: &Params<F>, states: &[CubeState]) -> Result<Var, NnError> {
        let x = g.input(state_features(states));
        self.mlp.forward(g, p, x, false)
    }

    /// Log-probabilities for a batch of states.
    pub fn log_probs(&self, states: &[CubeState]) -> Vec<[f64; NUM_ACTIONS]> {
        if states.is_empty() {
            return vec![];
        }
        let mut g = Graph::new();
        let z = self.logits(&mut g, &self.params, states).expect("policy shapes are fixed");
        let lp = g.log_softmax(z);
        rows(g.value(lp))
    }

    pub fn logit_rows(&self, states: &[CubeState]) -> Vec<[f64; NUM_ACTIONS]> {
        if states.is_empty() {
            return vec![];
        }
        let mut g = Graph::new();
        let z = self.logits(&mut g, &self.params, states).expect("policy shapes are fixed");
        rows(g.value(z))
    }

    pub fn forward(&self, s: &CubeState) -> [f64; NUM_ACTIONS] {
        self.log_probs(std::slice::from_ref(s))[0].map(f64::exp)
    }

    pub fn save(&self, path: &Path) -> Result<(), ActorError> {
        let meta = format!("# policy\n{}", toml::to_string(&self.config).expect("config serializes"));
        Ok(save_checkpoint(path, &self.params, &meta)?)
    }

    pub fn load(path: &Path) -> Result<Self, ActorError> {
        let (loaded, meta) = read_net::<F>(path, "policy")?;
        let config: NetConfig = toml::from_str(&meta).map_err(|e| ActorError::Meta(e.to_string()))?;
        let mut model = PolicyModel::new(config, &mut rand::rngs::mock::StepRng::new(0, 1));
        assign_by_name(&mut model.params, &loaded)?;
        Ok(model)
    }
}

fn rows<F: Real>(t: &Tensor<F>) -> Vec<[f64; NUM_ACTIONS]> {
    t.data()
        .chunks_exact(NUM_ACTIONS)
        .map(|r| std::array::from_fn(|i| r[i].to_f64()))
        .collect()
}

pub fn policy_forward<F: Real>(theta: &PolicyModel<F>, s: &CubeState) -> [f64; NUM_ACTIONS] {
    theta.forward(s)
}

/// State-value estimate `V(s)`. The raw network output is multiplied by
/// `value_scale` so that returns in the hundreds need no large weights.
#[derive(Debug, Clone)]
pub struct CriticModel<F> {
    pub config: NetConfig,
    pub value_scale: f64,
    pub params: Params<F>,
    mlp: Mlp,
}

impl<F: Real> CriticModel<F> {
    pub fn new<R: Rng + ?Sized>(config: NetConfig, value_scale: f64, rng: &mut R) -> Self {
        let mut params = Params::new();
        let mlp = build_mlp(&mut params, "critic", &config, 1, rng);
        CriticModel {
            config,
            value_scale,
            params,
            mlp,
        }
    }

    /// Values `[n]` recorded on `g`.
    pub fn forward(&self, g: &mut Graph<F>, p: &Params<F>, states: &[CubeState]) -> Result<Var, NnError> {
        let x = g.input(state_features(states));
        let v = self.mlp.forward(g, p, x, false)?;
        let v = g.scale(v, self.value_scale);
        g.reshape(v, &[states.len()])
    }

    pub fn values(&self, states: &[CubeState]) -> Vec<f64> {
        if states.is_empty() {
            return vec![];
        }
        let mut g = Graph::new();
        let v = self.forward(&mut g, &self.params, states).expect("critic shapes are fixed");
        g.value(v).to_f64_vec()
    }

    pub fn save(&self, path: &Path) -> Result<(), ActorError> {
        #[derive(Serialize)]
        struct Meta<'a> {
            value_scale: f64,
            net: &'a NetConfig,
        }
        let body = toml::to_string(&Meta {
            value_scale: self.value_scale,
            net: &self.config,
        })
        .expect("config serializes");
        Ok(save_checkpoint(path, &self.params, &format!("# critic\n{body}"))?)
    }

    pub fn load(path: &Path) -> Result<Self, ActorError> {
        #[derive(Deserialize)]
        struct Meta {
            value_scale: f64,
            net: NetConfig,
        }
        let (loaded, meta) = read_net::<F>(path, "critic")?;
        let meta: Meta = toml::from_str(&meta).map_err(|e| ActorError::Meta(e.to_string()))?;
        let mut model = CriticModel::new(meta.net, meta.value_scale, &mut rand::rngs::mock::StepRng::new(0, 1));
        assign_by_name(&mut model.params, &loaded)?;
        Ok(model)
    }
}

/// Clip target of the surrogate: `(1 + eps) A` for `A >= 0`, else `(1 - eps) A`.
pub fn clip_target(eps: f64, a: f64) -> f64 {
    if a >= 0.0 {
        (1.0 + eps) * a
    } else {
        (1.0 - eps) * a
    }
}

/// Per-sample clipped surrogate `min(ratio * A, g(eps, A))`.
pub fn ppo_objective(ratio: f64, a: f64, eps: f64) -> f64 {
    (ratio * a).min(clip_target(eps, a))
}

/// Whole episodes of transitions, stored contiguously.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    episodes: usize,
}

impl RolloutBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    /// Appends a finished episode. Advantages from an earlier computation
    /// are discarded since they no longer cover the buffer.
    pub fn push_episode(&mut self, episode: &[Transition]) -> Result<(), ActorError> {
        match episode.last() {
            Some(t) if t.done => {}
            _ => return Err(ActorError::IncompleteEpisode),
        }
        if episode[..episode.len() - 1].iter().any(|t| t.done) {
            return Err(ActorError::IncompleteEpisode);
        }
        self.transitions.extend_from_slice(episode);
        self.episodes += 1;
        self.advantages.clear();
        self.returns.clear();
        Ok(())
    }

    pub fn compute_advantages(&mut self, values: &[f64], gamma: f64, lambda: f64) -> Result<(), ActorError> {
        let (adv, ret) = gae_advantages(&self.transitions, values, gamma, lambda)?;
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }

    pub fn clear(&mut self) {
        self.transitions.clear();
        self.advantages.clear();
        self.returns.clear();
        self.episodes = 0;
    }
}

/// Generalized advantage estimates over consecutive episodes; `values[i]`
/// is `V(transitions[i].state)`. Terminal transitions bootstrap with 0.
pub fn gae_advantages(
    transitions: &[Transition],
    values: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), ActorError> {
    if values.len() != transitions.len() {
        return Err(ActorError::ValueCount(values.len(), transitions.len()));
    }
    if transitions.last().is_some_and(|t| !t.done) {
        return Err(ActorError::IncompleteEpisode);
    }
    let n = transitions.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for i in (0..n).rev() {
        let t = &transitions[i];
        let (next_value, carry) = if t.done { (0.0, 0.0) } else { (values[i + 1], running) };
        let delta = t.reward + gamma * next_value - values[i];
        running = delta + gamma * lambda * carry;
        adv[i] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub iters: usize,
    /// Minimum transitions per update.
    pub buffer: usize,
    pub eps: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    /// Environments stepped in lockstep.
    pub envs: usize,
    pub value_scale: f64,
    pub policy: NetConfig,
    pub critic: NetConfig,
    pub adam: AdamConfig,
    /// Fine-tune the cost model on pairs from each iteration's episodes.
    pub finetune: bool,
    pub finetune_adam: AdamConfig,
    pub finetune_batch: usize,
    /// Episodes in the rolling success-rate window.
    pub success_window: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            iters: 1000,
            buffer: 2048,
            eps: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            epochs: 4,
            minibatch: 256,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            envs: 64,
            value_scale: 100.0,
            policy: NetConfig::default(),
            critic: NetConfig::default(),
            adam: AdamConfig {
                lr: 3e-4,
                ..AdamConfig::default()
            },
            finetune: true,
            finetune_adam: AdamConfig {
                lr: 1e-4,
                ..AdamConfig::default()
            },
            finetune_batch: 256,
            success_window: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    pub episodes: usize,
    pub transitions: usize,
    /// Mean undiscounted episode return.
    pub mean_reward: f64,
    /// Solved fraction of the most recent `success_window` episodes.
    pub success_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub finetune_loss: Option<f64>,
}

struct LossParts {
    total: Var,
    policy: Var,
    value: Var,
    entropy: Var,
}

/// PPO learner state; `iteration` advances one collect-and-update cycle.
pub struct Trainer<F, R> {
    pub policy: PolicyModel<F>,
    pub critic: CriticModel<F>,
    pub cost: CostModel<F>,
    pub env: EnvConfig,
    pub config: PpoConfig,
    policy_adam: Adam,
    critic_adam: Adam,
    finetuner: Finetuner,
    window: VecDeque<bool>,
    iteration: usize,
    rng: R,
}

impl<F: Real, R: Rng> Trainer<F, R> {
    pub fn new(cost: CostModel<F>, env: EnvConfig, config: PpoConfig, mut rng: R) -> Self {
        let policy = PolicyModel::new(config.policy.clone(), &mut rng);
        let critic = CriticModel::new(config.critic.clone(), config.value_scale, &mut rng);
        let finetuner = Finetuner::new(&cost, config.finetune_adam, config.finetune_batch);
        Trainer {
            policy_adam: Adam::new(config.adam, &policy.params),
            critic_adam: Adam::new(config.adam, &critic.params),
            policy,
            critic,
            cost,
            env,
            config,
            finetuner,
            window: VecDeque::new(),
            iteration: 0,
            rng,
        }
    }

    fn sample(&mut self, lp: &[f64; NUM_ACTIONS]) -> usize {
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        for (i, l) in lp.iter().enumerate() {
            acc += l.exp();
            if u < acc {
                return i;
            }
        }
        // Rounding left a sliver above the cumulative sum.
        NUM_ACTIONS - 1
    }

    /// Runs episodes until at least `buffer` transitions are stored. Only
    /// whole episodes enter the buffer, so the last round may overshoot.
    pub fn collect(&mut self) -> Result<(RolloutBuffer, Vec<PairSample>, Vec<(f64, bool)>), ActorError> {
        let mut buf = RolloutBuffer::new();
        let mut pairs = Vec::new();
        let mut outcomes = Vec::new();
        let lanes = self.config.envs.max(1);
        let mut active: Vec<(CubeState, Vec<Transition>)> = Vec::new();
        loop {
            let pending: usize = active.iter().map(|(_, ep)| ep.len()).sum();
            if buf.len() + pending < self.config.buffer {
                while active.len() < lanes {
                    active.push((env::reset(&mut self.rng, &self.env), Vec::new()));
                }
            }
            if active.is_empty() {
                break;
            }
            let states: Vec<CubeState> = active.iter().map(|(s, ep)| ep.last().map_or(*s, |t| t.next)).collect();
            let lps = self.policy.log_probs(&states);
            let mut requests = Vec::with_capacity(states.len());
            for (i, lp) in lps.iter().enumerate() {
                let a = self.sample(lp);
                requests.push((states[i], Action::ALL[a], active[i].1.len() + 1, lp[a]));
            }
            let steps = env::step_batch(&requests, &self.cost, &self.env)?;
            let mut still = Vec::with_capacity(active.len());
            for ((start, mut ep), t) in active.into_iter().zip(steps) {
                ep.push(t);
                if t.done {
                    buf.push_episode(&ep)?;
                    outcomes.push((ep.iter().map(|t| t.reward).sum(), t.solved()));
                    pairs.extend(ep.iter().enumerate().map(|(i, t)| PairSample {
                        start,
                        end: t.next,
                        twists: i as u32 + 1,
                    }));
                } else {
                    still.push((start, ep));
                }
            }
            active = still;
        }
        Ok((buf, pairs, outcomes))
    }

    fn loss_graph(
        &self,
        g: &mut Graph<F>,
        pp: &Params<F>,
        cp: &Params<F>,
        buf: &RolloutBuffer,
        idx: &[usize],
        adv: &[f64],
    ) -> Result<LossParts, NnError> {
        let n = idx.len();
        let states: Vec<CubeState> = idx.iter().map(|&i| buf.transitions[i].state).collect();
        let actions: Vec<usize> = idx.iter().map(|&i| buf.transitions[i].action.index()).collect();
        let col = |v: Vec<f64>| Tensor::<F>::from_f64(&[n], &v).expect("column shape");

        let z = self.policy.logits(g, pp, &states)?;
        let lp = g.log_softmax(z);
        let lp_a = g.pick(lp, &actions)?;
        let old = g.input(col(idx.iter().map(|&i| buf.transitions[i].log_prob).collect()));
        let diff = g.sub(lp_a, old)?;
        let ratio = g.exp(diff);
        let a = g.input(col(idx.iter().map(|&i| adv[i]).collect()));
        let ra = g.mul(ratio, a)?;
        let bound = g.input(col(idx.iter().map(|&i| clip_target(self.config.eps, adv[i])).collect()));
        let surrogate = g.min(ra, bound)?;
        let surrogate = g.mean(surrogate);
        let policy = g.scale(surrogate, -1.0);

        let p = g.softmax(z);
        let plogp = g.mul(p, lp)?;
        let neg_h = g.sum_last(plogp);
        let neg_h = g.mean(neg_h);
        let entropy = g.scale(neg_h, -1.0);

        let v = self.critic.forward(g, cp, &states)?;
        let ret = g.input(col(idx.iter().map(|&i| buf.returns[i]).collect()));
        let err = g.sub(v, ret)?;
        let sq = g.square(err);
        let value = g.mean(sq);

        // The critic is trained on returns scaled to unit size.
        let s2 = 1.0 / (self.config.value_scale * self.config.value_scale);
        let wv = g.scale(value, self.config.value_coef * s2);
        let wh = g.scale(neg_h, self.config.entropy_coef);
        let total = g.add(policy, wv)?;
        let total = g.add(total, wh)?;
        Ok(LossParts {
            total,
            policy,
            value,
            entropy,
        })
    }

    /// Clipped-surrogate epochs over `buf`; returns mean (policy, value, entropy) terms.
    pub fn update(&mut self, buf: &mut RolloutBuffer) -> Result<(f64, f64, f64), ActorError> {
        let states: Vec<CubeState> = buf.transitions.iter().map(|t| t.state).collect();
        let values = self.critic.values(&states);
        buf.compute_advantages(&values, self.config.gamma, self.config.lambda)?;
        let adv = normalize(&buf.advantages);
        let mut order: Vec<usize> = (0..buf.len()).collect();
        let (mut lp, mut lv, mut le, mut count) = (0.0, 0.0, 0.0, 0usize);
        for _ in 0..self.config.epochs {
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut self.rng);
            for idx in order.chunks(self.config.minibatch.max(1)) {
                let mut g = Graph::new();
                let parts = self.loss_graph(&mut g, &self.policy.params, &self.critic.params, buf, idx, &adv)?;
                lp += g.value(parts.policy).item().to_f64();
                lv += g.value(parts.value).item().to_f64();
                le += g.value(parts.entropy).item().to_f64();
                count += 1;
                let grads = g.backward(parts.total)?;
                let mut gp = grads.param_grads(&self.policy.params);
                let mut gc = grads.param_grads(&self.critic.params);
                clip_grad_norm(&mut gp, self.config.max_grad_norm);
                clip_grad_norm(&mut gc, self.config.max_grad_norm);
                self.policy_adam.step(&mut self.policy.params, &gp)?;
                self.critic_adam.step(&mut self.critic.params, &gc)?;
            }
        }
        buf.clear();
        let c = count.max(1) as f64;
        Ok((lp / c, lv / c, le / c))
    }

    pub fn iteration(&mut self) -> Result<IterationStats, ActorError> {
        let (mut buf, mut pairs, outcomes) = self.collect()?;
        let transitions = buf.len();
        let finetune_loss = if self.config.finetune {
            self.finetuner.finetune(&mut self.cost, &mut pairs, &mut self.rng)?
        } else {
            None
        };
        let (policy_loss, value_loss, entropy) = self.update(&mut buf)?;
        for &(_, solved) in &outcomes {
            self.window.push_back(solved);
            if self.window.len() > self.config.success_window.max(1) {
                self.window.pop_front();
            }
        }
        let stats = IterationStats {
            iteration: self.iteration,
            episodes: outcomes.len(),
            transitions,
            mean_reward: outcomes.iter().map(|o| o.0).sum::<f64>() / outcomes.len().max(1) as f64,
            success_rate: self.window.iter().filter(|&&s| s).count() as f64 / self.window.len().max(1) as f64,
            policy_loss,
            value_loss,
            entropy,
            finetune_loss,
        };
        self.iteration += 1;
        Ok(stats)
    }

    pub fn iterations_done(&self) -> usize {
        self.iteration
    }
}

fn normalize(x: &[f64]) -> Vec<f64> {
    let n = x.len().max(1) as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt().max(1e-8);
    x.iter().map(|v| (v - mean) / sd).collect()
}

/// Runs `config.iters` iterations; `observe` sees each iteration's stats and the trainer.
pub fn train<F: Real, R: Rng>(
    cost: CostModel<F>,
    env: EnvConfig,
    config: PpoConfig,
    rng: R,
    mut observe: impl FnMut(&IterationStats, &Trainer<F, R>),
) -> Result<(PolicyModel<F>, CriticModel<F>, CostModel<F>, Vec<IterationStats>), ActorError> {
    let mut trainer = Trainer::new(cost, env, config, rng);
    let mut history = Vec::new();
    for _ in 0..trainer.config.iters {
        let stats = trainer.iteration()?;
        observe(&stats, &trainer);
        history.push(stats);
    }
    Ok((trainer.policy, trainer.critic, trainer.cost, history))
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate() {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

/// Follows the policy's most likely action until solved or `cap` moves.
pub fn greedy_rollout<F: Real>(theta: &PolicyModel<F>, s0: &CubeState, cap: usize) -> (bool, Vec<Action>) {
    greedy_rollouts(theta, std::slice::from_ref(s0), cap).pop().expect("one result")
}

/// Batched greedy rollouts; results are in input order.
pub fn greedy_rollouts<F: Real>(theta: &PolicyModel<F>, starts: &[CubeState], cap: usize) -> Vec<(bool, Vec<Action>)> {
    let mut current: Vec<CubeState> = starts.to_vec();
    let mut moves: Vec<Vec<Action>> = vec![Vec::new(); starts.len()];
    let mut open: Vec<usize> = (0..starts.len()).filter(|&i| !current[i].is_solved()).collect();
    for _ in 0..cap {
        if open.is_empty() {
            break;
        }
        let states: Vec<CubeState> = open.iter().map(|&i| current[i]).collect();
        let logits = theta.logit_rows(&states);
        for (&i, z) in open.iter().zip(&logits) {
            let a = Action::ALL[argmax(z)];
            current[i] = current[i].apply(a);
            moves[i].push(a);
        }
        open.retain(|&i| !current[i].is_solved());
    }
    current.iter().zip(moves).map(|(s, m)| (s.is_solved(), m)).collect()
}
