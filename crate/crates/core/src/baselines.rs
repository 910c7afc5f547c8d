//! Growing Spheres: a sampling search for the nearest point of the other
//! class, followed by greedy sparsification.
//!
//! Candidates are drawn uniformly from spherical layers around `x` (clamped
//! to the unit box). The search first halves the radius until the ball holds
//! no enemy, then grows outward one layer at a time until a layer holds one.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classifiers::{decide, Classifier};
use crate::error::{check_len, Error, Result};
use crate::mdp::Explanation;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowConfig {
    /// Samples per layer.
    pub n_in_layer: usize,
    pub first_radius: f64,
    pub decrease_radius: f64,
    /// Maximum number of outward layers before giving up.
    pub max_grow_steps: usize,
    pub seed: u64,
}

impl Default for GrowConfig {
    fn default() -> Self {
        Self {
            n_in_layer: 200,
            first_radius: 1.1,
            decrease_radius: 2.0,
            max_grow_steps: 50,
            seed: 0,
        }
    }
}

impl GrowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_in_layer == 0 || self.max_grow_steps == 0 {
            return Err(Error::Config("n_in_layer and max_grow_steps must be positive".into()));
        }
        if !(self.first_radius > 0.0) {
            return Err(Error::Config("first_radius must be positive".into()));
        }
        if !(self.decrease_radius > 1.0) {
            return Err(Error::Config("decrease_radius must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GrowOutcome {
    Found(Explanation),
    /// No point of the other class turned up within the layer cap.
    NotFound,
}

impl GrowOutcome {
    pub fn found(self) -> Option<Explanation> {
        match self {
            GrowOutcome::Found(e) => Some(e),
            GrowOutcome::NotFound => None,
        }
    }
}

const MAX_SHRINK_STEPS: usize = 60;

pub fn growing_spheres_explain<C: Classifier + ?Sized>(model: &C, x: &[f64], config: &GrowConfig) -> Result<GrowOutcome> {
    config.validate()?;
    check_len(model.input_dim(), x.len())?;
    let omega = model.omega();
    let own = decide(model.probability(x), omega);
    let is_enemy = |c: &[f64]| decide(model.probability(c), omega) != own;
    let mut rng = seed::stream(config.seed, "grow");

    let mut radius = config.first_radius;
    let mut layer = sample_layer(x, 0.0, radius, config.n_in_layer, &mut rng);
    let mut shrinks = 0;
    while layer.iter().any(|c| is_enemy(c)) && shrinks < MAX_SHRINK_STEPS {
        radius /= config.decrease_radius;
        layer = sample_layer(x, 0.0, radius, config.n_in_layer, &mut rng);
        shrinks += 1;
    }

    let step = (config.decrease_radius - 1.0) * radius / 5.0;
    let (mut inner, mut outer) = (radius, radius + step);
    let mut enemies = Vec::new();
    for _ in 0..config.max_grow_steps {
        enemies = sample_layer(x, inner, outer, config.n_in_layer, &mut rng)
            .into_iter()
            .filter(|c| is_enemy(c))
            .collect();
        if !enemies.is_empty() {
            break;
        }
        inner = outer;
        outer += step;
    }
    let Some(mut best) = enemies.into_iter().min_by(|a, b| sq_dist(a, x).total_cmp(&sq_dist(b, x))) else {
        return Ok(GrowOutcome::NotFound);
    };

    // undo the smallest moves first, keeping each only if the class stays flipped
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| (best[a] - x[a]).abs().total_cmp(&(best[b] - x[b]).abs()).then(a.cmp(&b)));
    for j in order {
        if best[j] == x[j] {
            continue;
        }
        let kept = best[j];
        best[j] = x[j];
        if !is_enemy(&best) {
            best[j] = kept;
        }
    }
    let z = best.iter().zip(x).map(|(b, a)| b - a).collect();
    Ok(GrowOutcome::Found(Explanation { z, x_prime: best }))
}

/// `n` points uniform in the shell `inner ≤ ‖c − x‖ ≤ outer`, clamped to the box.
fn sample_layer<R: Rng + ?Sized>(x: &[f64], inner: f64, outer: f64, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let p = x.len() as i32;
    let (lo, hi) = (inner.powi(p), outer.powi(p));
    (0..n)
        .map(|_| {
            let dir: Vec<f64> = x.iter().map(|_| StandardNormal.sample(rng)).collect();
            let norm = dir.iter().map(|d: &f64| d * d).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let u: f64 = rng.random();
            let r = (lo + u * (hi - lo)).powf(1.0 / p as f64);
            x.iter().zip(&dir).map(|(a, d)| (a + r * d / norm).clamp(0.0, 1.0)).collect()
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
