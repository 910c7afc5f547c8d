//! Kernel SVM trained with the stochastic sub-gradient (Pegasos) method on a
//! class-weighted hinge loss, then Platt-calibrated on validation scores.
//!
//! A constant `+1` is added to every kernel so the decision function carries
//! an implicit bias term.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::platt::platt_calibrate;
use super::{ClassifierConfig, ClassifierModel, ModelBody};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    /// `exp(-gamma ‖a − b‖²)` with `gamma = 1/p`.
    Rbf,
    /// `(a·b / p + 1)²`.
    Polynomial,
}

impl Kernel {
    fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        let p = a.len() as f64;
        let k = match self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / p).exp()
            }
            Kernel::Polynomial => (dot(a, b) / p + 1.0).powi(2),
        };
        k + 1.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub support: Vec<Vec<f64>>,
    /// Signed dual coefficients, already divided by `λ·T`.
    pub coefficients: Vec<f64>,
    /// Collapsed primal weights (with the bias last) for the linear kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primal: Option<Vec<f64>>,
}

impl SvmModel {
    pub fn input_dim(&self) -> usize {
        match &self.primal {
            Some(w) => w.len() - 1,
            None => self.support.first().map_or(0, Vec::len),
        }
    }

    pub fn decision_value(&self, x: &[f64]) -> f64 {
        if let Some(w) = &self.primal {
            let p = x.len();
            return dot(&w[..p], x) + w[p];
        }
        self.support
            .iter()
            .zip(&self.coefficients)
            .map(|(s, c)| c * self.kernel.eval(s, x))
            .sum()
    }
}

/// Positive-class penalty `n / #neg`; the negative class gets its inverse.
pub fn svm_class_penalties(labels: &[u8]) -> [f64; 2] {
    let n = labels.len() as f64;
    let neg = labels.iter().filter(|&&y| y == 0).count() as f64;
    let pos_penalty = n / neg;
    [1.0 / pos_penalty, pos_penalty]
}

pub(super) fn train(
    train: &Dataset,
    validation: &Dataset,
    kernel: Kernel,
    cfg: &ClassifierConfig,
) -> Result<ClassifierModel> {
    let n = train.len();
    let lambda = cfg.svm_lambda.unwrap_or(1.0 / n as f64);
    let penalties = svm_class_penalties(&train.labels);
    let signs: Vec<f64> = train.labels.iter().map(|&y| if y == 1 { 1.0 } else { -1.0 }).collect();
    let mut rng = seed::stream(cfg.seed, &format!("svm-{kernel:?}"));

    // Cache the Gram matrix when it is small enough to be worth it.
    let gram: Option<Vec<f64>> = (n <= 3000).then(|| {
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let k = kernel.eval(&train.features[i], &train.features[j]);
                g[i * n + j] = k;
                g[j * n + i] = k;
            }
        }
        g
    });
    let k = |i: usize, j: usize| -> f64 {
        match &gram {
            Some(g) => g[i * n + j],
            None => kernel.eval(&train.features[i], &train.features[j]),
        }
    };

    let iterations = cfg.svm_epochs.max(1) * n;
    let mut alpha = vec![0.0; n];
    // running margin numerators: Σ_j α_j y_j K(x_j, x_i)
    let mut field = vec![0.0; n];
    for t in 1..=iterations {
        let i = rng.random_range(0..n);
        let margin = signs[i] * field[i] / (lambda * t as f64);
        if margin < 1.0 {
            let c = penalties[train.labels[i] as usize];
            alpha[i] += c;
            let delta = c * signs[i];
            for (j, f) in field.iter_mut().enumerate() {
                *f += delta * k(i, j);
            }
        }
    }

    let scale = 1.0 / (lambda * iterations as f64);
    let mut support = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..n {
        if alpha[i] > 0.0 {
            support.push(train.features[i].clone());
            coefficients.push(alpha[i] * signs[i] * scale);
        }
    }
    let primal = (kernel == Kernel::Linear).then(|| {
        let p = train.dim();
        let mut w = vec![0.0; p + 1];
        for (s, c) in support.iter().zip(&coefficients) {
            for (wj, sj) in w.iter_mut().zip(s) {
                *wj += c * sj;
            }
            w[p] += c;
        }
        w
    });
    let svm = SvmModel {
        kernel,
        support,
        coefficients,
        primal,
    };
    let scores: Vec<f64> = validation.features.iter().map(|x| svm.decision_value(x)).collect();
    let platt = if validation.has_both_classes() {
        platt_calibrate(&scores, &validation.labels)?
    } else {
        let train_scores: Vec<f64> = train.features.iter().map(|x| svm.decision_value(x)).collect();
        platt_calibrate(&train_scores, &train.labels)?
    };
    let mut model = ClassifierModel::new(train.dim(), ModelBody::Svm { svm });
    model.platt = Some(platt);
    Ok(model)
}
