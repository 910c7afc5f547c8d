//! Degeneracy of replay buffers and policies.
//!
//! A buffer snapshot is degenerate relative to an earlier one when, judged by
//! the same frozen policy and critic, its mean bootstrapped target is lower.
//! A policy is degenerate relative to an earlier one when its actions on the
//! earlier states are valued lower. The scalar machinery below checks, by
//! brute force, that fitting a policy to a degenerate buffer yields a
//! degenerate policy.

use rand::Rng;

use super::buffer::Experience;
use super::policy::ActorCriticPolicy;
use crate::error::{Error, Result};

/// `y_l > y_l′`.
pub fn detect_instance_degeneracy(y_l: f64, y_lprime: f64) -> bool {
    y_l > y_lprime
}

/// Mean noise-free target of each snapshot under the frozen era-`l` policy;
/// degenerate when the later snapshot scores strictly lower.
pub fn detect_buffer_degeneracy(
    snapshot_l: &[Experience],
    snapshot_lprime: &[Experience],
    frozen: &ActorCriticPolicy,
) -> Result<bool> {
    let mean_l = mean_target(snapshot_l, frozen)?;
    let mean_lprime = mean_target(snapshot_lprime, frozen)?;
    Ok(mean_l > mean_lprime)
}

fn mean_target(snapshot: &[Experience], policy: &ActorCriticPolicy) -> Result<f64> {
    if snapshot.is_empty() {
        return Err(Error::EmptySnapshot);
    }
    let refs: Vec<&Experience> = snapshot.iter().collect();
    let y = policy.deterministic_targets(&refs)?;
    Ok(y.iter().sum::<f64>() / y.len() as f64)
}

/// `z = clamp(slope · x + intercept, −x, 1 − x)` on a scalar state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearPolicy {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearPolicy {
    pub fn act(&self, x: f64) -> f64 {
        (self.slope * x + self.intercept).clamp(-x, 1.0 - x)
    }
}

/// `Q(x, z) = action_weight · z + state_weight · x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearCritic {
    pub action_weight: f64,
    pub state_weight: f64,
}

impl LinearCritic {
    pub fn value(&self, x: f64, z: f64) -> f64 {
        self.action_weight * z + self.state_weight * x
    }
}

/// Two scalar buffer snapshots sharing one critic and one target policy.
#[derive(Clone, Debug)]
pub struct ScalarSetup {
    pub critic: LinearCritic,
    /// Policy used for the bootstrap action in the regression targets.
    pub target_policy: LinearPolicy,
    pub gamma: f64,
    pub snapshot_l: Vec<Experience>,
    pub snapshot_lprime: Vec<Experience>,
}

impl ScalarSetup {
    /// Random setup whose later snapshot repeats the earlier transitions with
    /// every reward lowered by the same amount `shift` (negative raises them).
    pub fn random<R: Rng + ?Sized>(rng: &mut R, size: usize, shift: f64) -> Self {
        let critic = LinearCritic {
            action_weight: rng.random_range(0.5..2.0),
            state_weight: rng.random_range(-1.0..1.0),
        };
        let target_policy = LinearPolicy {
            slope: rng.random_range(-0.3..0.3),
            intercept: rng.random_range(-0.1..0.1),
        };
        let gamma = 0.9;
        // rewards chosen so a linear policy inside the grid fits the targets
        let ideal = LinearPolicy {
            slope: rng.random_range(-0.3..0.3),
            intercept: rng.random_range(-0.05..0.05),
        };
        let snapshot_l: Vec<Experience> = (0..size)
            .map(|_| {
                let x = rng.random_range(0.4..0.6);
                let z = rng.random_range(-0.3..0.3);
                let x_next = x + z;
                let bootstrap = critic.value(x_next, target_policy.act(x_next));
                let y = critic.value(x, ideal.act(x)) + rng.random_range(-0.02..0.02);
                Experience {
                    x: vec![x],
                    z: vec![z],
                    reward: y - gamma * bootstrap,
                    x_next: vec![x_next],
                }
            })
            .collect();
        let snapshot_lprime = snapshot_l
            .iter()
            .map(|e| Experience {
                reward: e.reward - shift,
                ..e.clone()
            })
            .collect();
        Self {
            critic,
            target_policy,
            gamma,
            snapshot_l,
            snapshot_lprime,
        }
    }

    fn targets(&self, snapshot: &[Experience], bootstrap: &LinearPolicy) -> Vec<f64> {
        snapshot
            .iter()
            .map(|e| {
                let x_next = e.x_next[0];
                e.reward + self.gamma * self.critic.value(x_next, bootstrap.act(x_next))
            })
            .collect()
    }

    /// Mean squared critic error of `policy` against the snapshot's targets.
    pub fn loss(&self, policy: &LinearPolicy, snapshot: &[Experience]) -> f64 {
        let y = self.targets(snapshot, &self.target_policy);
        snapshot
            .iter()
            .zip(&y)
            .map(|(e, y)| {
                let x = e.x[0];
                (self.critic.value(x, policy.act(x)) - y).powi(2)
            })
            .sum::<f64>()
            / snapshot.len() as f64
    }

    /// Loss minimiser over a dense grid of slopes and intercepts in `[−1, 1]`.
    pub fn minimizer(&self, snapshot: &[Experience], steps: usize) -> LinearPolicy {
        let grid = |i: usize| -1.0 + 2.0 * i as f64 / steps as f64;
        let mut best = (f64::INFINITY, LinearPolicy { slope: 0.0, intercept: 0.0 });
        for i in 0..=steps {
            for j in 0..=steps {
                let candidate = LinearPolicy {
                    slope: grid(i),
                    intercept: grid(j),
                };
                let l = self.loss(&candidate, snapshot);
                if l < best.0 {
                    best = (l, candidate);
                }
            }
        }
        best.1
    }

    /// Mean critic value of `policy`'s actions on the earlier snapshot's states.
    pub fn policy_value(&self, policy: &LinearPolicy) -> f64 {
        self.snapshot_l
            .iter()
            .map(|e| self.critic.value(e.x[0], policy.act(e.x[0])))
            .sum::<f64>()
            / self.snapshot_l.len() as f64
    }

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn evaluate(&self, grid_steps: usize) -> Result<ImplicationCase> {
        if self.snapshot_l.is_empty() || self.snapshot_lprime.is_empty() {
            return Err(Error::EmptySnapshot);
        }
        let pi_l = self.minimizer(&self.snapshot_l, grid_steps);
        let pi_lprime = self.minimizer(&self.snapshot_lprime, grid_steps);
        let y_l = Self::mean(&self.targets(&self.snapshot_l, &pi_l));
        let y_lprime = Self::mean(&self.targets(&self.snapshot_lprime, &pi_l));
        let value_l = self.policy_value(&pi_l);
        let value_lprime = self.policy_value(&pi_lprime);
        Ok(ImplicationCase {
            buffer_degenerate: y_l > y_lprime,
            policy_degenerate: value_l > value_lprime,
            value_l,
            value_lprime,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImplicationCase {
    pub buffer_degenerate: bool,
    pub policy_degenerate: bool,
    pub value_l: f64,
    pub value_lprime: f64,
}

impl ImplicationCase {
    pub fn violates(&self) -> bool {
        self.buffer_degenerate && !self.policy_degenerate
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegeneracyReport {
    pub cases: Vec<ImplicationCase>,
    /// Indices of setups where the buffer was degenerate but the fitted
    /// policy was not.
    pub counterexamples: Vec<usize>,
}

impl DegeneracyReport {
    pub fn violations(&self) -> usize {
        self.counterexamples.len()
    }

    pub fn degenerate_buffers(&self) -> usize {
        self.cases.iter().filter(|c| c.buffer_degenerate).count()
    }
}

/// Fits the grid-search minimiser to both snapshots of every setup and
/// checks that a degenerate buffer always yields a degenerate policy.
pub fn check_degeneracy_implication(setups: &[ScalarSetup], grid_steps: usize) -> Result<DegeneracyReport> {
    let cases = setups.iter().map(|s| s.evaluate(grid_steps)).collect::<Result<Vec<_>>>()?;
    let counterexamples = cases
        .iter()
        .enumerate()
        .filter(|(_, c)| c.violates())
        .map(|(i, _)| i)
        .collect();
    Ok(DegeneracyReport { cases, counterexamples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densenet::{Activation, DenseNet};
    use crate::drl::policy::{Algorithm, PolicyConfig};
    use crate::seed;

    #[test]
    fn instance_degeneracy_is_strict() {
        assert!(!detect_instance_degeneracy(1.5, 1.5));
        assert!(detect_instance_degeneracy(2.0, 1.0));
        assert!(!detect_instance_degeneracy(1.0, 2.0));
    }

    fn frozen() -> ActorCriticPolicy {
        // π(x) = tanh(0.5 x), Q(x, z) = x + 2 z
        let actor = DenseNet::from_layers(vec![(vec![vec![0.5]], vec![0.0], Activation::Tanh)]).unwrap();
        let critic = DenseNet::from_layers(vec![(vec![vec![1.0, 2.0]], vec![0.0], Activation::Identity)]).unwrap();
        let cfg = PolicyConfig {
            gamma: 0.9,
            exploration_sigma: 0.0,
            ..PolicyConfig::default()
        };
        ActorCriticPolicy::from_networks(Algorithm::Ddpg, actor, vec![critic], cfg, None).unwrap()
    }

    fn tuple(x: f64, z: f64, r: f64) -> Experience {
        Experience {
            x: vec![x],
            z: vec![z],
            reward: r,
            x_next: vec![x + z],
        }
    }

    #[test]
    fn buffer_degeneracy_detector() {
        let policy = frozen();
        let early = vec![tuple(0.3, 0.2, 1.0), tuple(0.6, -0.1, 0.5)];
        assert!(!detect_buffer_degeneracy(&early, &early, &policy).unwrap());
        // lower rewards, next states farther from the boundary
        let late = vec![tuple(0.3, -0.2, 0.2), tuple(0.6, -0.4, -0.5)];
        assert!(detect_buffer_degeneracy(&early, &late, &policy).unwrap());
        assert!(matches!(detect_buffer_degeneracy(&[], &late, &policy), Err(Error::EmptySnapshot)));
    }

    #[test]
    fn single_tuple_snapshots_reduce_to_instances() {
        let policy = frozen();
        let (a, b) = (tuple(0.3, 0.2, 1.0), tuple(0.4, 0.1, 0.7));
        let ya = policy.deterministic_targets(&[&a]).unwrap()[0];
        let yb = policy.deterministic_targets(&[&b]).unwrap()[0];
        // x′ = 0.5 in both; targets differ by the rewards only
        assert!((ya - yb - 0.3).abs() < 1e-12);
        assert_eq!(
            detect_buffer_degeneracy(&[a], &[b], &policy).unwrap(),
            detect_instance_degeneracy(ya, yb)
        );
    }

    #[test]
    fn identical_snapshots_are_not_degenerate() {
        let mut rng = seed::stream(1, "t");
        let setup = ScalarSetup::random(&mut rng, 12, 0.0);
        let case = setup.evaluate(100).unwrap();
        assert!(!case.buffer_degenerate && !case.policy_degenerate);
    }

    #[test]
    fn improving_buffers_are_vacuous() {
        let mut rng = seed::stream(2, "t");
        let setups: Vec<ScalarSetup> = (0..5).map(|_| ScalarSetup::random(&mut rng, 12, -0.1)).collect();
        let report = check_degeneracy_implication(&setups, 100).unwrap();
        assert_eq!(report.degenerate_buffers(), 0);
        assert_eq!(report.violations(), 0);
    }

    #[test]
    fn degenerate_buffers_give_degenerate_policies() {
        let mut rng = seed::stream(3, "t");
        let setups: Vec<ScalarSetup> = (0..5).map(|_| ScalarSetup::random(&mut rng, 12, 0.1)).collect();
        let report = check_degeneracy_implication(&setups, 100).unwrap();
        assert_eq!(report.degenerate_buffers(), 5);
        assert_eq!(report.violations(), 0, "{report:?}");
    }
}
