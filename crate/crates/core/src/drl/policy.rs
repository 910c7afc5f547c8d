use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::buffer::Experience;
use crate::densenet::{Activation, AdamState, DenseNet};
use crate::error::{check_len, Error, Result};
use crate::mdp::{project, DeciderProfile};

pub const POLICY_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ddpg,
    Td3,
}

impl Algorithm {
    pub fn critic_count(self) -> usize {
        match self {
            Algorithm::Ddpg => 1,
            Algorithm::Td3 => 2,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Ddpg => "ddpg",
            Algorithm::Td3 => "td3",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ddpg" => Ok(Algorithm::Ddpg),
            "td3" => Ok(Algorithm::Td3),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Network sizes and optimiser settings shared by actor and critics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub gamma: f64,
    pub tau: f64,
    /// Standard deviation of the per-dimension Gaussian exploration noise.
    pub exploration_sigma: f64,
    pub hidden_units: usize,
    pub actor_learning_rate: f64,
    pub critic_learning_rate: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            exploration_sigma: 0.1,
            hidden_units: 50,
            actor_learning_rate: AdamState::DEFAULT_LEARNING_RATE,
            critic_learning_rate: AdamState::DEFAULT_LEARNING_RATE,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if !(self.exploration_sigma >= 0.0 && self.exploration_sigma.is_finite()) {
            return Err(Error::Config("exploration_sigma must be non-negative".into()));
        }
        if self.hidden_units == 0 {
            return Err(Error::Config("hidden_units must be positive".into()));
        }
        for lr in [self.actor_learning_rate, self.critic_learning_rate] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("learning rate must be non-negative, got {lr}")));
            }
        }
        Ok(())
    }
}

/// Bootstrapped critic targets for one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Targets {
    /// The targets every critic regresses on (the minimum over critics for TD3).
    pub combined: Vec<f64>,
    /// `r + γ Q′_k(x′, a′)` for each target critic `k`.
    pub per_critic: Vec<Vec<f64>>,
}

/// Actor, critic(s), their target copies and optimiser state.
#[derive(Clone, Debug)]
pub struct ActorCriticPolicy {
    pub algorithm: Algorithm,
    pub config: PolicyConfig,
    pub profile: Option<DeciderProfile>,
    pub actor: DenseNet,
    pub critics: Vec<DenseNet>,
    pub target_actor: DenseNet,
    pub target_critics: Vec<DenseNet>,
    actor_adam: AdamState,
    critic_adams: Vec<AdamState>,
    /// Digest of the training configuration, recorded in saved policies.
    pub config_hash: String,
}

impl ActorCriticPolicy {
    /// Actor `p → h → h → p` (relu, tanh output) and critic(s)
    /// `2p → h → h → 1` (relu, linear output), targets initialised as copies.
    /// Output layers start in `±OUTPUT_INIT_BOUND` so early actions and
    /// values are near zero.
    pub fn new<R: Rng + ?Sized>(
        algorithm: Algorithm,
        p: usize,
        config: PolicyConfig,
        profile: Option<DeciderProfile>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_units;
        let mut actor = DenseNet::mlp(p, &[h, h], p, Activation::Relu, Activation::Tanh, rng)?;
        shrink_output_layer(&mut actor, rng);
        let mut critics = (0..algorithm.critic_count())
            .map(|_| DenseNet::mlp(2 * p, &[h, h], 1, Activation::Relu, Activation::Identity, rng))
            .collect::<Result<Vec<_>>>()?;
        for c in &mut critics {
            shrink_output_layer(c, rng);
        }
        Self::from_networks(algorithm, actor, critics, config, profile)
    }

    /// Wraps explicit networks; targets start as exact copies.
    pub fn from_networks(
        algorithm: Algorithm,
        actor: DenseNet,
        critics: Vec<DenseNet>,
        config: PolicyConfig,
        profile: Option<DeciderProfile>,
    ) -> Result<Self> {
        config.validate()?;
        check_len(algorithm.critic_count(), critics.len())?;
        let p = actor.input_dim();
        check_len(p, actor.output_dim())?;
        for c in &critics {
            check_len(2 * p, c.input_dim())?;
            check_len(1, c.output_dim())?;
        }
        if let Some(profile) = &profile {
            check_len(p, profile.dim())?;
        }
        let actor_adam = AdamState::new(actor.num_params(), config.actor_learning_rate);
        let critic_adams = critics
            .iter()
            .map(|c| AdamState::new(c.num_params(), config.critic_learning_rate))
            .collect();
        Ok(Self {
            algorithm,
            profile,
            target_actor: actor.clone(),
            target_critics: critics.clone(),
            actor,
            critics,
            actor_adam,
            critic_adams,
            config,
            config_hash: String::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.actor.input_dim()
    }

    /// Feasible deterministic action `project(π(x))`.
    pub fn act(&self, x: &[f64]) -> Result<Vec<f64>> {
        let raw = scale_to_box(self.actor.forward(x)?, x);
        Ok(project(&raw, x, self.profile.as_ref()))
    }

    /// Feasible exploratory action `project(π(x) + N(0, σ²))`.
    pub fn explore<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let raw = scale_to_box(self.actor.forward(x)?, x);
        Ok(self.noisy_projection(raw, x, rng))
    }

    fn noisy_projection<R: Rng + ?Sized>(&self, mut raw: Vec<f64>, x: &[f64], rng: &mut R) -> Vec<f64> {
        if self.config.exploration_sigma > 0.0 {
            let noise = Normal::new(0.0, self.config.exploration_sigma).expect("sigma validated");
            for v in &mut raw {
                *v += noise.sample(rng);
            }
        }
        project(&raw, x, self.profile.as_ref())
    }

    /// Value of critic `k` for state `x` and action `z`.
    pub fn q(&self, k: usize, x: &[f64], z: &[f64]) -> f64 {
        self.critics[k].eval(&concat(x, z))[0]
    }

    /// `y = r + γ Q′(x′, π̌′(x′))`, with the minimum over both target critics
    /// for TD3. `π̌′` is the target actor plus exploration noise, projected.
    pub fn critic_targets<R: Rng + ?Sized>(&self, batch: &[&Experience], rng: &mut R) -> Result<Targets> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let gamma = self.config.gamma;
        let mut per_critic = vec![Vec::with_capacity(batch.len()); self.target_critics.len()];
        let mut combined = Vec::with_capacity(batch.len());
        for e in batch {
            let raw = scale_to_box(self.target_actor.forward(&e.x_next)?, &e.x_next);
            let a = self.noisy_projection(raw, &e.x_next, rng);
            let input = concat(&e.x_next, &a);
            let mut lowest = f64::INFINITY;
            for (k, critic) in self.target_critics.iter().enumerate() {
                let q = critic.eval(&input)[0];
                per_critic[k].push(e.reward + gamma * q);
                lowest = lowest.min(q);
            }
            combined.push(e.reward + gamma * lowest);
        }
        Ok(Targets { combined, per_critic })
    }

    /// Noise-free targets from the online networks, `r + γ min_k Q_k(x′, π(x′))`.
    pub fn deterministic_targets(&self, batch: &[&Experience]) -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|e| {
                let a = self.act(&e.x_next)?;
                let q = (0..self.critics.len())
                    .map(|k| self.q(k, &e.x_next, &a))
                    .fold(f64::INFINITY, f64::min);
                Ok(e.reward + self.config.gamma * q)
            })
            .collect()
    }

    /// Mean squared error of each critic against `targets`.
    pub fn critic_losses(&self, batch: &[&Experience], targets: &[f64]) -> Result<Vec<f64>> {
        check_len(batch.len(), targets.len())?;
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = batch.len() as f64;
        Ok((0..self.critics.len())
            .map(|k| {
                batch
                    .iter()
                    .zip(targets)
                    .map(|(e, y)| (self.q(k, &e.x, &e.z) - y).powi(2))
                    .sum::<f64>()
                    / n
            })
            .collect())
    }

    /// Gradient of critic `k`'s loss with respect to its parameters.
    pub fn critic_gradient(&self, k: usize, batch: &[&Experience], targets: &[f64]) -> Vec<f64> {
        let critic = &self.critics[k];
        let n = batch.len() as f64;
        let mut grads = vec![0.0; critic.num_params()];
        for (e, y) in batch.iter().zip(targets) {
            let input = concat(&e.x, &e.z);
            let q = critic.eval(&input)[0];
            critic.accumulate_gradient(&input, &[2.0 * (q - y) / n], &mut grads);
        }
        grads
    }

    /// One Adam step per critic on the squared error against `targets`.
    /// Returns each critic's loss before the step.
    pub fn critic_update(&mut self, batch: &[&Experience], targets: &[f64]) -> Result<Vec<f64>> {
        let losses = self.critic_losses(batch, targets)?;
        for k in 0..self.critics.len() {
            let grads = self.critic_gradient(k, batch, targets);
            self.critic_adams[k].step_net(&mut self.critics[k], &grads)?;
        }
        Ok(losses)
    }

    /// Mean of `Q_1(x, mask(π(x)))` over the batch.
    pub fn actor_objective(&self, batch: &[&Experience]) -> f64 {
        let n = batch.len() as f64;
        batch
            .iter()
            .map(|e| {
                let mut a = scale_to_box(self.actor.eval(&e.x), &e.x);
                if let Some(profile) = &self.profile {
                    profile.mask(&mut a);
                }
                self.q(0, &e.x, &a)
            })
            .sum::<f64>()
            / n
    }

    /// Gradient of [`Self::actor_objective`] with respect to the actor's
    /// parameters.
    pub fn actor_gradient(&self, batch: &[&Experience]) -> Vec<f64> {
        let p = self.dim();
        let n = batch.len() as f64;
        let critic = &self.critics[0];
        let mut grads = vec![0.0; self.actor.num_params()];
        let mut scratch = vec![0.0; critic.num_params()];
        for e in batch {
            let out = self.actor.eval(&e.x);
            let mut a = scale_to_box(out.clone(), &e.x);
            if let Some(profile) = &self.profile {
                profile.mask(&mut a);
            }
            let input_grad = critic.accumulate_gradient(&concat(&e.x, &a), &[1.0 / n], &mut scratch);
            let mut dz = input_grad[p..].to_vec();
            if let Some(profile) = &self.profile {
                profile.mask(&mut dz);
            }
            for ((g, o), x) in dz.iter_mut().zip(&out).zip(&e.x) {
                *g *= if *o >= 0.0 { 1.0 - x } else { *x };
            }
            self.actor.accumulate_gradient(&e.x, &dz, &mut grads);
        }
        grads
    }

    /// One Adam step of the actor up the critic's value.
    pub fn actor_update(&mut self, batch: &[&Experience]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let ascent: Vec<f64> = self.actor_gradient(batch).iter().map(|g| -g).collect();
        self.actor_adam.step_net(&mut self.actor, &ascent)
    }

    /// `θ′ ← τ θ + (1 − τ) θ′` for the actor and every critic.
    pub fn soft_update(&mut self) -> Result<()> {
        let tau = self.config.tau;
        self.target_actor.soft_update_from(&self.actor, tau)?;
        for (t, c) in self.target_critics.iter_mut().zip(&self.critics) {
            t.soft_update_from(c, tau)?;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.critics.iter().all(DenseNet::is_finite)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = PolicyFile {
            format_version: POLICY_FORMAT_VERSION,
            algorithm: self.algorithm,
            config: self.config.clone(),
            config_hash: self.config_hash.clone(),
            hitl: self.profile.is_some(),
            trusted: self.profile.as_ref().map(|p| p.trusted().to_vec()),
            actor: self.actor.clone(),
            critics: self.critics.clone(),
            target_actor: self.target_actor.clone(),
            target_critics: self.target_critics.clone(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: PolicyFile = serde_json::from_str(&text)?;
        if file.format_version != POLICY_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: file.format_version,
                expected: POLICY_FORMAT_VERSION,
            });
        }
        let profile = file.trusted.map(DeciderProfile::new).transpose()?;
        let mut policy = Self::from_networks(file.algorithm, file.actor, file.critics, file.config, profile)?;
        check_len(policy.critics.len(), file.target_critics.len())?;
        policy.target_actor = file.target_actor;
        policy.target_critics = file.target_critics;
        policy.config_hash = file.config_hash;
        Ok(policy)
    }
}

/// On-disk policy: manifest fields plus every network.
#[derive(Serialize, Deserialize)]
struct PolicyFile {
    format_version: u32,
    algorithm: Algorithm,
    config: PolicyConfig,
    config_hash: String,
    hitl: bool,
    #[serde(default)]
    trusted: Option<Vec<bool>>,
    actor: DenseNet,
    critics: Vec<DenseNet>,
    target_actor: DenseNet,
    target_critics: Vec<DenseNet>,
}

pub const OUTPUT_INIT_BOUND: f64 = 3e-3;

fn shrink_output_layer<R: Rng + ?Sized>(net: &mut DenseNet, rng: &mut R) {
    let last = net.shapes().len() - 1;
    for v in net.layer_params_mut(last) {
        *v = rng.random_range(-OUTPUT_INIT_BOUND..=OUTPUT_INIT_BOUND);
    }
}

/// Maps each actor output in `[-1, 1]` onto `[-x_j, 1 - x_j]`, keeping 0 at 0.
pub fn scale_to_box(mut a: Vec<f64>, x: &[f64]) -> Vec<f64> {
    for (v, xj) in a.iter_mut().zip(x) {
        *v *= if *v >= 0.0 { 1.0 - xj } else { *xj };
    }
    a
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}
