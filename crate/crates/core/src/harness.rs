//! Run configuration, metrics logging, evaluation and the end-to-end pipeline.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actor::{self, greedy_rollouts, ActorError, CriticModel, PolicyModel, PpoConfig, Trainer};
use crate::chasenet::{warmup_dataset, ChaseNetConfig, ChaseNetError, CostModel, Warmup, WarmupConfig};
use crate::cube::{random_scramble, Action, CubeState};
use crate::env::EnvConfig;
use crate::nn::{NnError, Real};
use crate::oracle::{OracleError, OracleTable};
use crate::seed::rng_for;
use crate::stats::spearman;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Cost(#[from] ChaseNetError),
    #[error(transparent)]
    Actor(#[from] ActorError),
    #[error("metrics row ({0}, {1}) is out of order")]
    Order(Phase, usize),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<HarnessError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub n_tests: usize,
    pub cap: usize,
    pub depth_min: usize,
    pub depth_max: usize,
    pub spearman_pairs: usize,
    /// Trajectory length of the held-out Spearman pairs.
    pub spearman_twists: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_tests: 1000,
            cap: 30,
            depth_min: 1,
            depth_max: 30,
            spearman_pairs: 10_000,
            spearman_twists: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub precision: Precision,
    pub oracle_path: PathBuf,
    pub chasenet: ChaseNetConfig,
    pub warmup: WarmupConfig,
    pub env: EnvConfig,
    pub actor: PpoConfig,
    pub eval: EvalConfig,
    /// Policy checkpoint cadence in PPO iterations; 0 keeps only the final one.
    pub checkpoint_every: usize,
    /// Include the wall-clock column in `events.csv`.
    pub wall_time: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            precision: Precision::F32,
            oracle_path: PathBuf::from("oracle.bin"),
            chasenet: ChaseNetConfig::default(),
            warmup: WarmupConfig::default(),
            env: EnvConfig::default(),
            actor: PpoConfig::default(),
            eval: EvalConfig::default(),
            checkpoint_every: 100,
            wall_time: true,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let eps = self.actor.eps;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(HarnessError::Config(format!("actor.eps must lie in (0, 1), got {eps}")));
        }
        self.env.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.eval.depth_min > self.eval.depth_max || self.eval.cap == 0 {
            return Err(HarnessError::Config("eval depth range must be non-empty and cap positive".into()));
        }
        if self.chasenet.d_model % self.chasenet.heads.max(1) != 0 || self.chasenet.heads == 0 {
            return Err(HarnessError::Config("chasenet.d_model must be a multiple of chasenet.heads".into()));
        }
        if self.actor.buffer == 0 || self.actor.minibatch == 0 || self.warmup.batch_size == 0 {
            return Err(HarnessError::Config("buffer and batch sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Oracle,
    Warmup,
    Train,
    Eval,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Oracle => "oracle",
            Phase::Warmup => "warmup",
            Phase::Train => "train",
            Phase::Eval => "eval",
        })
    }
}

pub fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Append-only `(phase, iteration, name, value, unix_ms)` rows, flushed as
/// they are written. Without wall time the last column is written as 0 so
/// files from identical runs compare equal byte for byte.
pub struct MetricsLog {
    writer: csv::Writer<fs::File>,
    last: Option<(Phase, usize)>,
    wall_time: bool,
}

impl MetricsLog {
    pub fn create(path: &Path, wall_time: bool) -> Result<Self, HarnessError> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["phase", "iteration", "name", "value", "unix_ms"])?;
        writer.flush()?;
        Ok(MetricsLog {
            writer,
            last: None,
            wall_time,
        })
    }

    pub fn record(&mut self, phase: Phase, iteration: usize, name: &str, value: f64) -> Result<(), HarnessError> {
        if self.last.is_some_and(|last| (phase, iteration) < last) {
            return Err(HarnessError::Order(phase, iteration));
        }
        self.last = Some((phase, iteration));
        let ms = if self.wall_time { unix_ms() } else { 0 };
        self.writer.write_record([
            phase.to_string(),
            iteration.to_string(),
            name.to_string(),
            value.to_string(),
            ms.to_string(),
        ])?;
        self.writer.flush()?;
        Ok(())
    }
}

/// One greedy evaluation case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub case: usize,
    pub depth: usize,
    pub solved: bool,
    pub moves: usize,
    pub solution: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessReport {
    pub rate: f64,
    pub cases: Vec<CaseResult>,
    /// depth → (solved, total)
    pub by_depth: BTreeMap<usize, (usize, usize)>,
}

impl SuccessReport {
    pub fn write_cases(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path)?;
        for c in &self.cases {
            w.serialize(c)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn depth_rate(&self, depth: usize) -> Option<f64> {
        self.by_depth.get(&depth).map(|&(s, t)| s as f64 / t as f64)
    }
}

/// Test scramble `case`: its own seeded stream, disjoint from training streams.
pub fn test_scramble(seed: u64, case: usize, depth_min: usize, depth_max: usize) -> (usize, CubeState) {
    let mut rng = rng_for(seed, "eval-scramble", case as u64);
    let depth = rng.gen_range(depth_min..=depth_max);
    (depth, random_scramble(&mut rng, depth).resulting_state)
}

/// Greedy rollouts on explicit start states, labelled with `depths`.
pub fn evaluate_states<F: Real>(
    theta: &PolicyModel<F>,
    starts: &[CubeState],
    depths: &[usize],
    cap: usize,
) -> SuccessReport {
    let mut cases = Vec::with_capacity(starts.len());
    let mut by_depth: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (chunk_no, chunk) in starts.chunks(4096).enumerate() {
        for (j, (solved, moves)) in greedy_rollouts(theta, chunk, cap).into_iter().enumerate() {
            let case = chunk_no * 4096 + j;
            let depth = depths[case];
            let e = by_depth.entry(depth).or_default();
            e.0 += solved as usize;
            e.1 += 1;
            cases.push(CaseResult {
                case,
                depth,
                solved,
                moves: moves.len(),
                solution: crate::cube::format_actions(&moves),
            });
        }
    }
    let solved = cases.iter().filter(|c| c.solved).count();
    SuccessReport {
        rate: solved as f64 / cases.len().max(1) as f64,
        cases,
        by_depth,
    }
}

pub fn evaluate_success_rate<F: Real>(
    theta: &PolicyModel<F>,
    n_tests: usize,
    depth_min: usize,
    depth_max: usize,
    cap: usize,
    seed: u64,
) -> SuccessReport {
    let (depths, starts): (Vec<usize>, Vec<CubeState>) =
        (0..n_tests).map(|i| test_scramble(seed, i, depth_min, depth_max)).unzip();
    evaluate_states(theta, &starts, &depths, cap)
}

/// The six states one quarter turn from solved.
pub fn depth_one_states() -> Vec<CubeState> {
    Action::ALL.iter().map(|&a| CubeState::solved().apply(a)).collect()
}

/// `n` random states at exact oracle distance 2.
pub fn depth_two_states(oracle: &OracleTable, n: usize, seed: u64) -> Vec<CubeState> {
    let mut rng = rng_for(seed, "eval-depth2", 0);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let s = random_scramble(&mut rng, 2).resulting_state;
        if oracle.cost(&s).expect("scrambles are reachable") == 2 {
            out.push(s);
        }
    }
    out
}

/// Held-out pairs drawn like warmup data, from a stream no training phase uses.
pub fn spearman_pairs(n_pairs: usize, twists: usize, seed: u64) -> Vec<(CubeState, CubeState)> {
    let mut rng = rng_for(seed, "eval-spearman", 0);
    warmup_dataset(&mut rng, n_pairs, twists)
        .into_iter()
        .take(n_pairs)
        .map(|p| (p.start, p.end))
        .collect()
}

pub fn evaluate_spearman<F: Real>(
    m: &CostModel<F>,
    oracle: &OracleTable,
    n_pairs: usize,
    twists: usize,
    seed: u64,
) -> Result<f64, HarnessError> {
    let pairs = spearman_pairs(n_pairs, twists, seed);
    let pred = m.predict(&pairs);
    spearman_against_oracle(&pred, &pairs, oracle)
}

pub fn spearman_against_oracle(
    pred: &[f64],
    pairs: &[(CubeState, CubeState)],
    oracle: &OracleTable,
) -> Result<f64, HarnessError> {
    let truth: Vec<f64> = pairs
        .iter()
        .map(|(s, t)| oracle.pair_cost(s, t).map(f64::from))
        .collect::<Result<_, _>>()
        .map_err(OracleError::from)?;
    spearman(pred, &truth).map_err(|e| HarnessError::Config(e.to_string()))
}

pub fn write_loss_csv(path: &Path, losses: &[f64]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "mean_loss"])?;
    for (i, l) in losses.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `(iteration, mean_reward, success_rate)` rows, appended as training runs.
pub struct TrainMetrics {
    writer: csv::Writer<fs::File>,
}

impl TrainMetrics {
    pub fn create(path: &Path) -> Result<Self, HarnessError> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["iteration", "mean_reward", "success_rate"])?;
        writer.flush()?;
        Ok(TrainMetrics { writer })
    }

    pub fn push(&mut self, s: &actor::IterationStats) -> Result<(), HarnessError> {
        self.writer.write_record([
            s.iteration.to_string(),
            s.mean_reward.to_string(),
            s.success_rate.to_string(),
        ])?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Warmup with per-iteration logging; returns the model and its loss series.
pub fn run_warmup<F: Real>(
    net: &ChaseNetConfig,
    cfg: &WarmupConfig,
    seed: u64,
    mut log: impl FnMut(usize, f64) -> Result<(), HarnessError>,
) -> Result<(CostModel<F>, Vec<f64>), HarnessError> {
    let mut init = rng_for(seed, "chasenet-init", 0);
    let mut model = CostModel::new(net.clone(), &mut init);
    model.init_output(cfg.mean_label());
    let mut w = Warmup::new(model, cfg.clone(), rng_for(seed, "warmup", 0));
    for j in 0..cfg.iters {
        let loss = w.step()?;
        log(j, loss)?;
    }
    Ok((w.model, w.losses))
}

/// PPO training with per-iteration logging and periodic policy checkpoints.
pub fn run_training<F: Real>(
    cost: CostModel<F>,
    env: &EnvConfig,
    ppo: &PpoConfig,
    seed: u64,
    checkpoint_every: usize,
    out_dir: &Path,
    mut log: impl FnMut(&actor::IterationStats) -> Result<(), HarnessError>,
) -> Result<Trainer<F, rand_chacha::ChaCha8Rng>, HarnessError> {
    fs::create_dir_all(out_dir)?;
    let mut trainer = Trainer::new(cost, env.clone(), ppo.clone(), rng_for(seed, "train", 0));
    let mut metrics = TrainMetrics::create(&out_dir.join("metrics.csv"))?;
    for it in 0..ppo.iters {
        let stats = trainer.iteration()?;
        metrics.push(&stats)?;
        log(&stats)?;
        if checkpoint_every > 0 && (it + 1) % checkpoint_every == 0 && it + 1 < ppo.iters {
            trainer.policy.save(&out_dir.join(format!("policy-{:06}.ckpt", it + 1)))?;
        }
    }
    save_trained(&trainer.policy, &trainer.critic, &trainer.cost, out_dir)?;
    Ok(trainer)
}

pub fn save_trained<F: Real>(
    policy: &PolicyModel<F>,
    critic: &CriticModel<F>,
    cost: &CostModel<F>,
    dir: &Path,
) -> Result<(), HarnessError> {
    policy.save(&dir.join("policy.ckpt"))?;
    critic.save(&dir.join("critic.ckpt"))?;
    cost.save(&dir.join("cost_finetuned.ckpt"))?;
    Ok(())
}

fn stage<T>(name: &'static str, r: Result<T, HarnessError>) -> Result<T, HarnessError> {
    r.map_err(|e| HarnessError::Stage {
        stage: name,
        source: Box::new(e),
    })
}

/// A fresh directory `run-<unix seconds>-s<seed>` under `root`.
pub fn new_run_dir(root: &Path, seed: u64) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(root)?;
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    for n in 0.. {
        let name = if n == 0 {
            format!("run-{secs}-s{seed}")
        } else {
            format!("run-{secs}-s{seed}-{n}")
        };
        let dir = root.join(name);
        if fs::create_dir(&dir).is_ok() {
            return Ok(dir);
        }
    }
    unreachable!("unbounded search always finds a free name")
}

/// Final results of a pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub spearman: f64,
    pub success_rate: f64,
    pub depth_one_rate: f64,
    pub depth_two_rate: f64,
}

/// Oracle → warmup → train → eval inside `dir`. With `eval_only`, the
/// checkpoints already in `dir` are evaluated and nothing is trained.
pub fn run_pipeline(cfg: &RunConfig, dir: &Path, eval_only: bool) -> Result<RunSummary, HarnessError> {
    match cfg.precision {
        Precision::F32 => run_pipeline_as::<f32>(cfg, dir, eval_only),
        Precision::F64 => run_pipeline_as::<f64>(cfg, dir, eval_only),
    }
}

fn run_pipeline_as<F: Real>(cfg: &RunConfig, dir: &Path, eval_only: bool) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    if !eval_only {
        fs::write(dir.join("config.toml"), cfg.to_toml())?;
        fs::write(dir.join("seed.txt"), format!("{}\n", cfg.seed))?;
        fs::write(dir.join("version.txt"), format!("{} {}\n", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")))?;
    }
    let events_name = if eval_only { "events-eval.csv" } else { "events.csv" };
    let mut log = MetricsLog::create(&dir.join(events_name), cfg.wall_time)?;

    let oracle = stage("oracle", OracleTable::load_or_build(&cfg.oracle_path).map_err(HarnessError::from))?;
    stage("oracle", log.record(Phase::Oracle, 0, "reachable", oracle.reachable() as f64))?;
    stage("oracle", log.record(Phase::Oracle, 0, "max_depth", oracle.max_depth() as f64))?;

    let (cost, policy) = if eval_only {
        let cost = stage("eval", CostModel::<F>::load(&dir.join("cost.ckpt")).map_err(HarnessError::from))?;
        let policy = stage("eval", PolicyModel::<F>::load(&dir.join("policy.ckpt")).map_err(HarnessError::from))?;
        (cost, policy)
    } else {
        let (cost, losses) = stage(
            "warmup",
            run_warmup::<F>(&cfg.chasenet, &cfg.warmup, cfg.seed, |j, l| {
                log.record(Phase::Warmup, j, "mean_loss", l)
            }),
        )?;
        stage("warmup", write_loss_csv(&dir.join("loss.csv"), &losses))?;
        stage("warmup", cost.save(&dir.join("cost.ckpt")).map_err(HarnessError::from))?;
        let trainer = stage(
            "train",
            run_training(cost.clone(), &cfg.env, &cfg.actor, cfg.seed, cfg.checkpoint_every, dir, |s| {
                log.record(Phase::Train, s.iteration, "mean_reward", s.mean_reward)?;
                log.record(Phase::Train, s.iteration, "success_rate", s.success_rate)?;
                log.record(Phase::Train, s.iteration, "policy_loss", s.policy_loss)?;
                log.record(Phase::Train, s.iteration, "value_loss", s.value_loss)?;
                log.record(Phase::Train, s.iteration, "entropy", s.entropy)?;
                if let Some(f) = s.finetune_loss {
                    log.record(Phase::Train, s.iteration, "finetune_loss", f)?;
                }
                Ok(())
            }),
        )?;
        (cost, trainer.policy)
    };

    let e = &cfg.eval;
    let rho = stage(
        "eval",
        evaluate_spearman(&cost, &oracle, e.spearman_pairs, e.spearman_twists, cfg.seed),
    )?;
    let report = evaluate_success_rate(&policy, e.n_tests, e.depth_min, e.depth_max, e.cap, cfg.seed);
    stage("eval", report.write_cases(&dir.join("eval_cases.csv")))?;
    let d1 = evaluate_states(&policy, &depth_one_states(), &[1; 6], e.cap);
    let d2_states = depth_two_states(&oracle, 100, cfg.seed);
    let d2 = evaluate_states(&policy, &d2_states, &vec![2; d2_states.len()], e.cap);
    stage("eval", log.record(Phase::Eval, 0, "spearman", rho))?;
    stage("eval", log.record(Phase::Eval, 0, "success_rate", report.rate))?;
    stage("eval", log.record(Phase::Eval, 0, "depth1_rate", d1.rate))?;
    stage("eval", log.record(Phase::Eval, 0, "depth2_rate", d2.rate))?;
    for (depth, (s, t)) in &report.by_depth {
        stage("eval", log.record(Phase::Eval, 0, &format!("success_depth_{depth}"), *s as f64 / *t as f64))?;
    }
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        spearman: rho,
        success_rate: report.rate,
        depth_one_rate: d1.rate,
        depth_two_rate: d2.rate,
    })
}
