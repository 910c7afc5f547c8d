//! CART with the Gini criterion, class-weighted, and a bagged forest of them.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        probability: f64,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes in an arena; the root is `nodes[0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(probability: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { probability }],
        }
    }

    pub fn stump(feature: usize, threshold: f64, left: f64, right: f64) -> Self {
        Self {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { probability: left },
                Node::Leaf { probability: right },
            ],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { probability } => return probability,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub(crate) fn validate(&self, dim: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Config("tree without nodes".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { probability } if !(0.0..=1.0).contains(&probability) => {
                    return Err(Error::Config(format!("leaf {i} probability {probability} outside [0,1]")));
                }
                Node::Split {
                    feature,
                    left,
                    right,
                    ..
                } if feature >= dim || left <= i || right <= i || left >= self.nodes.len() || right >= self.nodes.len() => {
                    return Err(Error::Config(format!("malformed split node {i}")));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` means all of them.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl TreeParams {
    pub fn single(max_depth: usize, min_leaf: usize) -> Self {
        Self {
            max_depth,
            min_leaf,
            max_features: None,
            seed: 0,
        }
    }
}

/// Misclassification weights `[w0, w1]`: the positive class is weighted by
/// the negative share of the data and vice versa.
pub fn class_weights(labels: &[u8]) -> [f64; 2] {
    let n = labels.len() as f64;
    let neg = labels.iter().filter(|&&y| y == 0).count() as f64;
    let w1 = neg / n;
    [1.0 - w1, w1]
}

pub fn fit_tree(data: &Dataset, params: &TreeParams) -> Tree {
    let indices: Vec<usize> = (0..data.len()).collect();
    let weights = class_weights(&data.labels);
    grow(data, indices, weights, params)
}

/// Bagged CART: bootstrap rows per tree and `round(sqrt(p))` candidate
/// features per split.
pub fn fit_forest(data: &Dataset, n_trees: usize, max_depth: usize, min_leaf: usize, root_seed: u64) -> Vec<Tree> {
    let weights = class_weights(&data.labels);
    let mtry = ((data.dim() as f64).sqrt().round() as usize).max(1);
    (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = seed::derive_indexed(root_seed, "forest", t as u64);
            let mut rng = seed::Rng::seed_from_u64(tree_seed);
            let rows: Vec<usize> = (0..data.len()).map(|_| rng.random_range(0..data.len())).collect();
            let params = TreeParams {
                max_depth,
                min_leaf,
                max_features: Some(mtry),
                seed: tree_seed,
            };
            grow(data, rows, weights, &params)
        })
        .collect()
}

struct Split {
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

fn weighted_counts(data: &Dataset, rows: &[usize], w: [f64; 2]) -> (f64, f64) {
    rows.iter().fold((0.0, 0.0), |(a, b), &i| {
        if data.labels[i] == 1 {
            (a, b + w[1])
        } else {
            (a + w[0], b)
        }
    })
}

/// Weighted Gini impurity times node weight: `2ab / (a + b)`.
fn gini_mass(a: f64, b: f64) -> f64 {
    let t = a + b;
    if t <= 0.0 {
        0.0
    } else {
        2.0 * a * b / t
    }
}

fn grow(data: &Dataset, root_rows: Vec<usize>, w: [f64; 2], params: &TreeParams) -> Tree {
    let mut rng = seed::Rng::seed_from_u64(params.seed);
    let mut nodes: Vec<Node> = Vec::new();
    // (node slot, rows, depth)
    let mut stack = vec![(0usize, root_rows, 0usize)];
    nodes.push(Node::Leaf { probability: 0.0 });
    while let Some((slot, rows, depth)) = stack.pop() {
        let (w0, w1) = weighted_counts(data, &rows, w);
        let probability = if w0 + w1 > 0.0 { w1 / (w0 + w1) } else { 0.5 };
        let splittable = depth < params.max_depth
            && rows.len() >= 2 * params.min_leaf.max(1)
            && w0 > 0.0
            && w1 > 0.0;
        let split = if splittable {
            best_split(data, &rows, w, params, &mut rng)
        } else {
            None
        };
        match split {
            None => nodes[slot] = Node::Leaf { probability },
            Some(s) => {
                let left = nodes.len();
                let right = left + 1;
                nodes.push(Node::Leaf { probability: 0.0 });
                nodes.push(Node::Leaf { probability: 0.0 });
                nodes[slot] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right,
                };
                stack.push((right, s.right, depth + 1));
                stack.push((left, s.left, depth + 1));
            }
        }
    }
    Tree { nodes }
}

fn best_split<R: Rng>(
    data: &Dataset,
    rows: &[usize],
    w: [f64; 2],
    params: &TreeParams,
    rng: &mut R,
) -> Option<Split> {
    let p = data.dim();
    let features: Vec<usize> = match params.max_features {
        Some(m) if m < p => {
            let mut f = sample(rng, p, m).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..p).collect(),
    };
    let min_leaf = params.min_leaf.max(1);
    let (tw0, tw1) = weighted_counts(data, rows, w);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut sorted = rows.to_vec();
    for &f in &features {
        sorted.sort_by(|&a, &b| data.features[a][f].total_cmp(&data.features[b][f]));
        let (mut l0, mut l1) = (0.0, 0.0);
        for k in 1..sorted.len() {
            let prev = sorted[k - 1];
            if data.labels[prev] == 1 {
                l1 += w[1];
            } else {
                l0 += w[0];
            }
            let a = data.features[prev][f];
            let b = data.features[sorted[k]][f];
            if k < min_leaf || sorted.len() - k < min_leaf || a >= b {
                continue;
            }
            let mass = gini_mass(l0, l1) + gini_mass(tw0 - l0, tw1 - l1);
            if best.is_none_or(|(m, _, _)| mass < m) {
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some((mass, f, threshold));
            }
        }
    }
    let (_, feature, threshold) = best?;
    let (left, right) = rows.iter().partition(|&&i| data.features[i][feature] <= threshold);
    Some(Split {
        feature,
        threshold,
        left,
        right,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_boundary, BoundaryKind};

    #[test]
    fn depth_five_carves_xor_quadrants() {
        for seed in 1..=8 {
            let d = synth_boundary(BoundaryKind::Xor, 400, 2, seed).unwrap();
            let tree = fit_tree(&d, &TreeParams::single(5, 2));
            let correct = d
                .features
                .iter()
                .zip(&d.labels)
                .filter(|(x, &y)| (tree.predict(x) >= 0.5) as u8 == y)
                .count();
            let acc = correct as f64 / d.len() as f64;
            assert!(acc >= 0.95, "seed {seed}: xor accuracy {acc}");
            assert!(tree.depth() <= 5);
        }
    }

    #[test]
    fn class_weights_follow_negative_share() {
        let w = class_weights(&[0, 0, 0, 1]);
        assert_eq!(w, [0.25, 0.75]);
    }

    #[test]
    fn leaves_respect_min_leaf() {
        let d = synth_boundary(BoundaryKind::Radial, 120, 2, 4).unwrap();
        let params = TreeParams::single(30, 2);
        let tree = fit_tree(&d, &params);
        // count rows landing in each leaf
        let mut counts = vec![0usize; tree.nodes.len()];
        for x in &d.features {
            let mut i = 0;
            while let Node::Split { feature, threshold, left, right } = tree.nodes[i] {
                i = if x[feature] <= threshold { left } else { right };
            }
            counts[i] += 1;
        }
        for (i, n) in tree.nodes.iter().enumerate() {
            if matches!(n, Node::Leaf { .. }) {
                assert!(counts[i] >= 2, "leaf {i} holds {}", counts[i]);
            }
        }
        tree.validate(2).unwrap();
    }

    #[test]
    fn forest_is_seed_deterministic() {
        let d = synth_boundary(BoundaryKind::Linear, 80, 3, 9).unwrap();
        let a = fit_forest(&d, 5, 5, 2, 17);
        let b = fit_forest(&d, 5, 5, 2, 17);
        assert_eq!(a, b);
    }
}
