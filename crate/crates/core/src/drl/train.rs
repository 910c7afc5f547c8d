use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::buffer::{selective_insert, Experience, ReplayBuffer, SelectiveWindow};
use super::policy::{ActorCriticPolicy, Algorithm, PolicyConfig, Targets};
use crate::classifiers::{decide, Classifier};
use crate::dataset::{smote_oversample, Dataset};
use crate::error::{check_len, Error, Result};
use crate::evaluation::rolling_curve;
use crate::mdp::{project, reward, transition, DeciderProfile, Explanation, RewardConfig};
use crate::seed;

/// Window used when smoothing learning curves.
pub const CURVE_WINDOW: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// Episodes `E`.
    pub episodes: usize,
    /// Step cap per episode `T`.
    pub inner_iterations: usize,
    /// Minibatch size `N`.
    pub batch_size: usize,
    /// Buffer only the best transition of every `w` steps.
    pub selective_buffering: bool,
    pub selective_window: usize,
    /// Draw episode start states from a SMOTE-balanced copy of the data.
    pub smote: bool,
    pub smote_k: usize,
    /// Random transitions buffered before learning; defaults to `N`.
    pub cold_start_count: Option<usize>,
    /// Defaults to `E · T`.
    pub buffer_capacity: Option<usize>,
    pub policy: PolicyConfig,
    pub reward: RewardConfig,
    /// Decider profile; when set every action is projected onto its trusted
    /// features.
    pub hitl: Option<DeciderProfile>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Td3,
            episodes: 1000,
            inner_iterations: 300,
            batch_size: 64,
            selective_buffering: false,
            selective_window: 5,
            smote: false,
            smote_k: 5,
            cold_start_count: None,
            buffer_capacity: None,
            policy: PolicyConfig::default(),
            reward: RewardConfig::default(),
            hitl: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Plain DDPG or TD3.
    pub fn plain(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }

    /// Selective buffering plus SMOTE-balanced sampling.
    pub fn hex(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            selective_buffering: true,
            smote: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("episodes", self.episodes),
            ("inner_iterations", self.inner_iterations),
            ("batch_size", self.batch_size),
            ("selective_window", self.selective_window),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.buffer_capacity == Some(0) {
            return Err(Error::Config("buffer_capacity must be at least 1".into()));
        }
        self.policy.validate()?;
        self.reward.validate()
    }

    pub fn capacity(&self) -> usize {
        self.buffer_capacity
            .unwrap_or_else(|| self.episodes.saturating_mul(self.inner_iterations))
            .max(1)
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Mean per-step reward of every episode.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub rewards: Vec<f64>,
}

impl LearningCurve {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn smoothed(&self, window: usize) -> Vec<f64> {
        rolling_curve(&self.rewards, window)
    }

    /// Rolling mean over the first full window and over the last one.
    pub fn first_and_last_window(&self, window: usize) -> (f64, f64) {
        let w = window.min(self.rewards.len()).max(1);
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        (mean(&self.rewards[..w]), mean(&self.rewards[self.rewards.len() - w..]))
    }

    /// Columns `episode,raw_reward,rolling_mean`.
    pub fn to_csv(&self, window: usize) -> String {
        let mut out = String::from("episode,raw_reward,rolling_mean\n");
        for (i, (r, m)) in self.rewards.iter().zip(self.smoothed(window)).enumerate() {
            out.push_str(&format!("{i},{r},{m}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: &Path, window: usize) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv(window).as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// What the training loop reports after each critic update.
pub struct UpdateEvent<'a> {
    pub episode: usize,
    /// Global environment step, counted from 1.
    pub step: usize,
    pub targets: &'a Targets,
    pub critic_losses: &'a [f64],
    pub actor_updated: bool,
}

pub fn synthesize_policy<C: Classifier + ?Sized>(
    model: &C,
    data: &Dataset,
    config: &TrainConfig,
) -> Result<(ActorCriticPolicy, LearningCurve)> {
    synthesize_policy_with_observer(model, data, config, |_| {})
}

/// Runs the episode loop. Each episode starts from a sampled instance and
/// ends after `T` steps or as soon as the instance changes class. Every step
/// updates the critic(s); DDPG also updates actor and targets every step,
/// TD3 on even global steps.
pub fn synthesize_policy_with_observer<C, F>(
    model: &C,
    data: &Dataset,
    config: &TrainConfig,
    mut observer: F,
) -> Result<(ActorCriticPolicy, LearningCurve)>
where
    C: Classifier + ?Sized,
    F: FnMut(&UpdateEvent<'_>),
{
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let p = data.dim();
    check_len(model.input_dim(), p)?;
    if let Some(profile) = &config.hitl {
        check_len(p, profile.dim())?;
    }
    let omega = config.reward.omega;

    let pool = if config.smote && data.has_both_classes() {
        smote_oversample(data, config.smote_k, seed::derive(config.seed, "smote"))?
    } else {
        data.clone()
    };

    let mut init_rng = seed::stream(config.seed, "init");
    let mut state_rng = seed::stream(config.seed, "states");
    let mut noise_rng = seed::stream(config.seed, "noise");
    let mut batch_rng = seed::stream(config.seed, "batch");

    let mut policy = ActorCriticPolicy::new(config.algorithm, p, config.policy.clone(), config.hitl.clone(), &mut init_rng)?;
    policy.config_hash = config.hash();
    let mut buffer = ReplayBuffer::new(config.capacity())?;
    let mut window = SelectiveWindow::new(config.selective_window)?;

    // cold start: uniformly random feasible actions
    for _ in 0..config.cold_start_count.unwrap_or(config.batch_size) {
        let x = &pool.features[state_rng.random_range(0..pool.len())];
        let raw: Vec<f64> = x.iter().map(|&v| init_rng.random_range(-v..=1.0 - v)).collect();
        let z = project(&raw, x, config.hitl.as_ref());
        let r = reward(x, &z, model, &config.reward)?;
        buffer.insert(Experience {
            x_next: transition(x, &z),
            x: x.clone(),
            z,
            reward: r,
        });
    }

    let mut curve = LearningCurve::default();
    let mut step = 0usize;
    for episode in 0..config.episodes {
        let start = pool.features[state_rng.random_range(0..pool.len())].clone();
        let start_class = decide(model.probability(&start), omega);
        let mut x = start;
        let mut total = 0.0;
        let mut taken = 0usize;
        for _ in 0..config.inner_iterations {
            let z = policy.explore(&x, &mut noise_rng)?;
            let r = reward(&x, &z, model, &config.reward)?;
            let x_next = transition(&x, &z);
            let flipped = decide(model.probability(&x_next), omega) != start_class;
            let e = Experience {
                x: std::mem::take(&mut x),
                z,
                reward: r,
                x_next: x_next.clone(),
            };
            if config.selective_buffering {
                selective_insert(&mut buffer, e, &mut window);
            } else {
                buffer.insert(e);
            }
            step += 1;
            total += r;
            taken += 1;

            if !buffer.is_empty() {
                let batch = buffer.sample(config.batch_size, &mut batch_rng)?;
                let targets = policy.critic_targets(&batch, &mut noise_rng)?;
                let losses = policy.critic_update(&batch, &targets.combined)?;
                if losses.iter().any(|l| !l.is_finite()) {
                    return Err(Error::NonFinite {
                        what: "critic loss",
                        episode,
                        step,
                    });
                }
                let actor_turn = config.algorithm == Algorithm::Ddpg || step % 2 == 0;
                if actor_turn {
                    policy.actor_update(&batch)?;
                    policy.soft_update()?;
                    if !policy.actor.is_finite() {
                        return Err(Error::NonFinite {
                            what: "actor parameter",
                            episode,
                            step,
                        });
                    }
                }
                observer(&UpdateEvent {
                    episode,
                    step,
                    targets: &targets,
                    critic_losses: &losses,
                    actor_updated: actor_turn,
                });
            }

            x = x_next;
            if flipped {
                break;
            }
        }
        curve.rewards.push(total / taken as f64);
    }
    Ok((policy, curve))
}

/// Deterministic explanation `z = project(π(x))`, `x′ = x + z`.
pub fn explain<C: Classifier + ?Sized>(policy: &ActorCriticPolicy, x: &[f64], model: &C) -> Result<Explanation> {
    check_len(policy.dim(), model.input_dim())?;
    let z = policy.act(x)?;
    Ok(Explanation {
        x_prime: transition(x, &z),
        z,
    })
}
