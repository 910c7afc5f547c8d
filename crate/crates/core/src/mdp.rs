//! The explanation MDP: states are instances in `[0,1]^p`, actions are
//! perturbations that keep the instance inside the box, and the reward pulls
//! the perturbed instance just across the decision boundary.

use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{decide, Classifier, DEFAULT_OMEGA};
use crate::error::{check_len, Error, Result};

/// Entries with `|z_j|` at or below this count as unused in the sparsity term.
pub const ZERO_DEADBAND: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    /// Weight of the squared distance to the boundary target.
    pub alpha: f64,
    /// Bonus for changing class.
    pub beta: f64,
    /// How far past `omega` the target sits.
    pub epsilon_magnitude: f64,
    pub omega: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: 4.0,
            beta: 10.0,
            epsilon_magnitude: 0.01,
            omega: DEFAULT_OMEGA,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("epsilon_magnitude", self.epsilon_magnitude),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::Config(format!("omega must lie in (0, 1), got {}", self.omega)));
        }
        Ok(())
    }
}

/// Signed offset of the reward target: above `omega` when the instance is
/// currently class 0, below it when class 1.
pub fn epsilon_x(current_class: u8, config: &RewardConfig) -> f64 {
    if current_class == 0 {
        config.epsilon_magnitude
    } else {
        -config.epsilon_magnitude
    }
}

/// Number of entries outside the deadband.
pub fn l0_norm(z: &[f64]) -> usize {
    z.iter().filter(|v| v.abs() > ZERO_DEADBAND).count()
}

pub fn l2_norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// The four reward terms, kept apart for inspection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardTerms {
    /// `−α (f(x′) − (ω + ε))²`
    pub boundary: f64,
    /// `β (Ω(f(x′)) − Ω(f(x)))²`
    pub flip: f64,
    /// `−‖z‖₂`
    pub magnitude: f64,
    /// `−|z|₀ / p`
    pub sparsity: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.boundary + self.flip + self.magnitude + self.sparsity
    }
}

pub fn reward_terms<C: Classifier + ?Sized>(
    x: &[f64],
    z: &[f64],
    model: &C,
    config: &RewardConfig,
) -> Result<RewardTerms> {
    check_len(model.input_dim(), x.len())?;
    check_len(x.len(), z.len())?;
    let next = checked_transition(x, z)?;
    let omega = config.omega;
    let p_now = model.probability(x);
    let p_next = model.probability(&next);
    let class_now = decide(p_now, omega);
    let class_next = decide(p_next, omega);
    let target = omega + epsilon_x(class_now, config);
    let flip = f64::from(class_next) - f64::from(class_now);
    Ok(RewardTerms {
        boundary: -config.alpha * (p_next - target).powi(2),
        flip: config.beta * flip * flip,
        magnitude: -l2_norm(z),
        sparsity: -(l0_norm(z) as f64) / x.len() as f64,
    })
}

/// Reward of taking the (already projected) action `z` at `x`.
pub fn reward<C: Classifier + ?Sized>(x: &[f64], z: &[f64], model: &C, config: &RewardConfig) -> Result<f64> {
    Ok(reward_terms(x, z, model, config)?.total())
}

/// `x + z`, clamped to the unit box to absorb rounding at the bounds.
pub fn transition(x: &[f64], z: &[f64]) -> Vec<f64> {
    x.iter().zip(z).map(|(a, b)| (a + b).clamp(0.0, 1.0)).collect()
}

fn checked_transition(x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    for (j, (a, b)) in x.iter().zip(z).enumerate() {
        let v = a + b;
        if !(-1e-12..=1.0 + 1e-12).contains(&v) {
            return Err(Error::Infeasible { feature: j, value: v });
        }
    }
    Ok(transition(x, z))
}

/// Clamps `z` into `[−x, 1 − x]` and, under a decider profile, zeroes every
/// untrusted coordinate.
pub fn project(z: &[f64], x: &[f64], profile: Option<&DeciderProfile>) -> Vec<f64> {
    let mut out: Vec<f64> = z
        .iter()
        .zip(x)
        .map(|(&v, &xi)| if v.is_nan() { 0.0 } else { v.clamp(-xi, 1.0 - xi) })
        .collect();
    if let Some(profile) = profile {
        profile.mask(&mut out);
    }
    out
}

/// Number of features the action uses (`z_j ≠ 0`) that the decider does not
/// trust.
pub fn disagreement_score(z: &[f64], profile: &DeciderProfile) -> usize {
    z.iter()
        .zip(&profile.trusted)
        .filter(|(v, trusted)| **v != 0.0 && !**trusted)
        .count()
}

/// An action together with the point it leads to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub z: Vec<f64>,
    pub x_prime: Vec<f64>,
}

/// Which features a decider accepts in an explanation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeciderProfile {
    trusted: Vec<bool>,
}

impl DeciderProfile {
    pub fn new(trusted: Vec<bool>) -> Result<Self> {
        if !trusted.iter().any(|&t| t) {
            return Err(Error::Config("decider profile must trust at least one feature".into()));
        }
        Ok(Self { trusted })
    }

    pub fn all_trusted(p: usize) -> Self {
        Self { trusted: vec![true; p] }
    }

    pub fn from_untrusted(p: usize, untrusted: &[usize]) -> Result<Self> {
        let mut trusted = vec![true; p];
        for &j in untrusted {
            *trusted.get_mut(j).ok_or(Error::Shape { expected: p, actual: j + 1 })? = false;
        }
        Self::new(trusted)
    }

    /// Marks `round(p · uap)` features as untrusted, chosen uniformly. At
    /// least one feature always stays trusted.
    pub fn random<R: Rng + ?Sized>(p: usize, uap: f64, rng: &mut R) -> Result<Self> {
        if !(uap > 0.0 && uap < 1.0) {
            return Err(Error::Config(format!("UAP must lie in (0, 1), got {uap}")));
        }
        let count = untrusted_count(p, uap);
        Self::from_untrusted(p, &sample(rng, p, count).into_vec())
    }

    pub fn dim(&self) -> usize {
        self.trusted.len()
    }

    pub fn trusted(&self) -> &[bool] {
        &self.trusted
    }

    pub fn is_trusted(&self, j: usize) -> bool {
        self.trusted[j]
    }

    pub fn untrusted(&self) -> Vec<usize> {
        (0..self.trusted.len()).filter(|&j| !self.trusted[j]).collect()
    }

    /// Zeroes untrusted coordinates in place.
    pub fn mask(&self, z: &mut [f64]) {
        for (v, &t) in z.iter_mut().zip(&self.trusted) {
            if !t {
                *v = 0.0;
            }
        }
    }

    /// Reads a JSON array of trusted features, given by name or by index.
    pub fn load(path: &Path, feature_names: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, feature_names)
    }

    pub fn from_json(text: &str, feature_names: &[String]) -> Result<Self> {
        let entries: Vec<serde_json::Value> = serde_json::from_str(text)?;
        let p = feature_names.len();
        let mut trusted = vec![false; p];
        for entry in entries {
            let j = match &entry {
                serde_json::Value::Number(n) => n
                    .as_u64()
                    .map(|v| v as usize)
                    .filter(|&v| v < p)
                    .ok_or_else(|| Error::Config(format!("feature index {n} out of range for p = {p}")))?,
                serde_json::Value::String(name) => feature_names
                    .iter()
                    .position(|f| f == name)
                    .ok_or_else(|| Error::MissingColumn(name.clone()))?,
                other => return Err(Error::Config(format!("unexpected profile entry {other}"))),
            };
            trusted[j] = true;
        }
        Self::new(trusted)
    }

    /// Trusted feature names as a JSON array.
    pub fn to_json(&self, feature_names: &[String]) -> String {
        let names: Vec<&str> = (0..self.dim())
            .filter(|&j| self.trusted[j])
            .map(|j| feature_names.get(j).map_or("?", String::as_str))
            .collect();
        serde_json::to_string(&names).expect("string array serializes")
    }
}

/// `round(p · uap)`, capped so that one feature stays trusted.
pub fn untrusted_count(p: usize, uap: f64) -> usize {
    ((p as f64 * uap).round() as usize).min(p.saturating_sub(1))
}
