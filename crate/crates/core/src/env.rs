//! Episodic cube environment with a learned-cost shaped reward.
//!
//! A non-goal step is rewarded `-log_b C(s', solved)`, where `C` is the
//! cost model's estimate. Reaching the solved state instead yields the fixed
//! goal reward. The goal test runs first: with the positivity floor at 0.01
//! the shaped reward can reach about +25, so it must never be consulted for
//! a solved state.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chasenet::CostModel;
use crate::cube::{random_scramble, Action, CubeState};
use crate::nn::Real;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("predicted cost must be positive, got {0}")]
    NonPositiveCost(f64),
    #[error("invalid env config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub log_base: f64,
    pub goal_reward: f64,
    pub max_steps: usize,
    /// Inclusive scramble depth range used by `reset`.
    pub depth_min: usize,
    pub depth_max: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            log_base: 1.2,
            goal_reward: 100.0,
            max_steps: 30,
            depth_min: 1,
            depth_max: 30,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.log_base > 1.0) {
            return Err(EnvError::Config(format!("log_base must exceed 1, got {}", self.log_base)));
        }
        if self.max_steps == 0 {
            return Err(EnvError::Config("max_steps must be at least 1".into()));
        }
        if self.depth_min > self.depth_max {
            return Err(EnvError::Config(format!(
                "empty depth range [{}, {}]",
                self.depth_min, self.depth_max
            )));
        }
        Ok(())
    }
}

/// Anything that can score `(state, target)` pairs with a positive cost.
pub trait CostEstimator {
    fn costs(&self, pairs: &[(CubeState, CubeState)]) -> Vec<f64>;
}

impl<F: Real> CostEstimator for CostModel<F> {
    fn costs(&self, pairs: &[(CubeState, CubeState)]) -> Vec<f64> {
        self.predict(pairs)
    }
}

impl<T: Fn(&CubeState, &CubeState) -> f64> CostEstimator for T {
    fn costs(&self, pairs: &[(CubeState, CubeState)]) -> Vec<f64> {
        pairs.iter().map(|(s, t)| self(s, t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: CubeState,
    pub action: Action,
    pub reward: f64,
    pub next: CubeState,
    pub done: bool,
    /// Log-probability of `action` under the policy that chose it.
    pub log_prob: f64,
}

impl Transition {
    pub fn solved(&self) -> bool {
        self.next.is_solved()
    }
}

/// Scramble of uniformly drawn depth from the solved state.
pub fn reset<R: Rng + ?Sized>(rng: &mut R, cfg: &EnvConfig) -> CubeState {
    let depth = rng.gen_range(cfg.depth_min..=cfg.depth_max);
    random_scramble(rng, depth).resulting_state
}

pub fn shaped_reward(c: f64, cfg: &EnvConfig) -> Result<f64, EnvError> {
    if !(c > 0.0) {
        return Err(EnvError::NonPositiveCost(c));
    }
    Ok(-c.ln() / cfg.log_base.ln())
}

/// `step_index` counts from 1 for the first action of an episode.
pub fn step<C: CostEstimator + ?Sized>(
    s: &CubeState,
    a: Action,
    model: &C,
    cfg: &EnvConfig,
    step_index: usize,
    log_prob: f64,
) -> Result<Transition, EnvError> {
    let mut out = step_batch(&[(*s, a, step_index, log_prob)], model, cfg)?;
    Ok(out.pop().expect("one transition per request"))
}

/// Steps several independent episodes with one batched cost query.
/// Each request is `(state, action, step_index, log_prob)`.
pub fn step_batch<C: CostEstimator + ?Sized>(
    requests: &[(CubeState, Action, usize, f64)],
    model: &C,
    cfg: &EnvConfig,
) -> Result<Vec<Transition>, EnvError> {
    let solved = CubeState::solved();
    let nexts: Vec<CubeState> = requests.iter().map(|(s, a, _, _)| s.apply(*a)).collect();
    let queries: Vec<(CubeState, CubeState)> = nexts
        .iter()
        .filter(|n| !n.is_solved())
        .map(|n| (*n, solved))
        .collect();
    let mut costs = model.costs(&queries).into_iter();
    requests
        .iter()
        .zip(&nexts)
        .map(|(&(state, action, step_index, log_prob), &next)| {
            let goal = next.is_solved();
            let reward = if goal {
                cfg.goal_reward
            } else {
                shaped_reward(costs.next().expect("one cost per non-goal state"), cfg)?
            };
            Ok(Transition {
                state,
                action,
                reward,
                next,
                done: goal || step_index >= cfg.max_steps,
                log_prob,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::build_oracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shaped_reward_values() {
        let cfg = EnvConfig::default();
        assert_eq!(shaped_reward(1.0, &cfg).unwrap(), 0.0);
        assert!((shaped_reward(1.2, &cfg).unwrap() + 1.0).abs() < 1e-12);
        assert!((shaped_reward(100.0, &cfg).unwrap() + 25.258_506_273_026_68).abs() < 1e-9);
        assert_eq!(shaped_reward(0.0, &cfg), Err(EnvError::NonPositiveCost(0.0)));
        assert!(shaped_reward(-1.0, &cfg).is_err());
        assert!(shaped_reward(f64::NAN, &cfg).is_err());
        assert!(shaped_reward(2.0, &cfg).unwrap() > shaped_reward(2.5, &cfg).unwrap());
    }

    #[test]
    fn goal_branch_wins_even_for_tiny_costs() {
        let cfg = EnvConfig::default();
        let tiny = |_: &CubeState, _: &CubeState| 0.01;
        let s = CubeState::solved().apply(Action::R);
        let t = step(&s, Action::RPrime, &tiny, &cfg, 1, -1.0).unwrap();
        assert_eq!(t.reward, 100.0);
        assert!(t.done && t.solved());
        let t = step(&s, Action::R, &tiny, &cfg, 1, -1.0).unwrap();
        assert!((t.reward - 0.01f64.ln() / -1.2f64.ln()).abs() < 1e-12);
        assert!(!t.done);
    }

    #[test]
    fn cap_ends_episode() {
        let cfg = EnvConfig {
            max_steps: 3,
            ..EnvConfig::default()
        };
        let one = |_: &CubeState, _: &CubeState| 1.0;
        let s = CubeState::solved();
        assert!(!step(&s, Action::U, &one, &cfg, 2, 0.0).unwrap().done);
        let t = step(&s, Action::U, &one, &cfg, 3, 0.0).unwrap();
        assert!(t.done && !t.solved());
        assert_eq!(t.reward, 0.0);
    }

    #[test]
    fn batch_matches_single_steps() {
        let cfg = EnvConfig::default();
        let o = build_oracle();
        let cost = |s: &CubeState, t: &CubeState| o.pair_cost(s, t).unwrap() as f64 + 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut reqs = vec![(CubeState::solved().apply(Action::F), Action::FPrime, 1, -0.3)];
        for i in 0..20 {
            reqs.push((reset(&mut rng, &cfg), Action::ALL[i % 6], i + 1, -1.7));
        }
        let batch = step_batch(&reqs, &cost, &cfg).unwrap();
        for (r, t) in reqs.iter().zip(&batch) {
            assert_eq!(*t, step(&r.0, r.1, &cost, &cfg, r.2, r.3).unwrap());
        }
        assert_eq!(batch[0].reward, 100.0);
    }

    #[test]
    fn resets_are_reproducible_and_respect_depth() {
        let zero = EnvConfig {
            depth_min: 0,
            depth_max: 0,
            ..EnvConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(reset(&mut rng, &zero).is_solved());
        let cfg = EnvConfig::default();
        let a: Vec<_> = (0..50).map(|_| reset(&mut ChaCha8Rng::seed_from_u64(9), &cfg)).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
    }

    fn reset_tv(lo: usize, hi: usize) -> f64 {
        let cfg = EnvConfig {
            depth_min: lo,
            depth_max: hi,
            ..EnvConfig::default()
        };
        let o = build_oracle();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mut counts = vec![0usize; o.histogram().len()];
        for _ in 0..n {
            counts[o.cost(&reset(&mut rng, &cfg)).unwrap() as usize] += 1;
        }
        let total: u32 = o.histogram().iter().sum();
        counts
            .iter()
            .zip(o.histogram())
            .map(|(&c, &h)| (c as f64 / n as f64 - h as f64 / total as f64).abs())
            .sum::<f64>()
            / 2.0
    }

    #[test]
    fn long_resets_approach_the_depth_histogram() {
        // Walks of 20 to 30 twists are still visibly short of mixed (about
        // 0.14); by 30 to 40 the gap is under 0.1.
        let near = reset_tv(20, 30);
        let far = reset_tv(30, 40);
        assert!(far < 0.1, "total variation {far}");
        assert!(near > far);
    }

    #[test]
    fn config_validation() {
        assert!(EnvConfig::default().validate().is_ok());
        let bad = EnvConfig {
            log_base: 1.0,
            ..EnvConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = EnvConfig {
            depth_min: 5,
            depth_max: 4,
            ..EnvConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
