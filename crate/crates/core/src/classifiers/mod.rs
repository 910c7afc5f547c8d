//! The environment models: anything that maps an instance in `[0,1]^p` to a
//! class-1 probability, together with the threshold rule that turns that
//! probability into a class.
//!
//! Five learners are provided (logistic regression, a one-hidden-layer
//! network, CART, a random forest and a Platt-calibrated SVM). They all sit
//! behind [`ClassifierModel`], and everything downstream (reward, policy
//! synthesis, baselines, evaluation) only talks to the [`Classifier`] trait.

mod logistic;
pub mod metrics;
pub mod platt;
mod svm;
pub mod tree;

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::densenet::{sigmoid, DenseNet};
use crate::error::{check_len, Error, Result};

pub use logistic::LogisticTraining;
pub use platt::Platt;
pub use svm::{Kernel, SvmModel};
pub use tree::{Node, Tree};

/// The decision threshold used throughout the experiments.
pub const DEFAULT_OMEGA: f64 = 0.5;

/// Thresholds a probability: class 0 strictly below `omega`, class 1 otherwise.
#[inline]
pub fn decide(probability: f64, omega: f64) -> u8 {
    if probability < omega {
        0
    } else {
        1
    }
}

/// A binary probabilistic classifier seen as an environment.
pub trait Classifier: Send + Sync {
    fn input_dim(&self) -> usize;

    fn omega(&self) -> f64;

    /// Class-1 probability. The caller guarantees `x.len() == input_dim()`.
    fn probability(&self, x: &[f64]) -> f64;

    fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        check_len(self.input_dim(), x.len())?;
        Ok(self.probability(x))
    }

    fn classify(&self, x: &[f64]) -> Result<u8> {
        Ok(decide(self.predict_proba(x)?, self.omega()))
    }

    /// Unchecked variant of [`Classifier::classify`].
    fn class_of(&self, x: &[f64]) -> u8 {
        decide(self.probability(x), self.omega())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[serde(alias = "lr")]
    LogisticRegression,
    #[serde(alias = "nn")]
    NeuralNet,
    #[serde(alias = "dt")]
    DecisionTree,
    #[serde(alias = "rf")]
    RandomForest,
    Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::LogisticRegression,
        ModelKind::NeuralNet,
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::Svm,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::LogisticRegression => "lr",
            ModelKind::NeuralNet => "nn",
            ModelKind::DecisionTree => "dt",
            ModelKind::RandomForest => "rf",
            ModelKind::Svm => "svm",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "logistic" | "logistic_regression" => Ok(ModelKind::LogisticRegression),
            "nn" | "mlp" | "neural_net" => Ok(ModelKind::NeuralNet),
            "dt" | "tree" | "decision_tree" => Ok(ModelKind::DecisionTree),
            "rf" | "forest" | "random_forest" => Ok(ModelKind::RandomForest),
            "svm" => Ok(ModelKind::Svm),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelBody {
    /// Single identity layer producing a logit.
    LogisticRegression { net: DenseNet },
    /// Hidden relu layer then an identity logit.
    NeuralNet { net: DenseNet },
    DecisionTree { tree: Tree },
    RandomForest { trees: Vec<Tree> },
    Svm { svm: SvmModel },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub input_dim: usize,
    pub omega: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platt: Option<Platt>,
    pub body: ModelBody,
}

impl ClassifierModel {
    pub fn new(input_dim: usize, body: ModelBody) -> Self {
        Self {
            input_dim,
            omega: DEFAULT_OMEGA,
            platt: None,
            body,
        }
    }

    pub fn with_omega(mut self, omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::Config(format!("omega must lie in (0, 1), got {omega}")));
        }
        self.omega = omega;
        Ok(self)
    }

    /// Logistic regression with explicit coefficients.
    pub fn logistic(weights: Vec<f64>, bias: f64) -> Result<Self> {
        let p = weights.len();
        let net = DenseNet::from_layers(vec![(
            vec![weights],
            vec![bias],
            crate::densenet::Activation::Identity,
        )])?;
        Ok(Self::new(p, ModelBody::LogisticRegression { net }))
    }

    /// A model that returns `probability` everywhere (a single-leaf tree).
    pub fn constant(input_dim: usize, probability: f64) -> Self {
        Self::new(
            input_dim,
            ModelBody::DecisionTree {
                tree: Tree::leaf(probability),
            },
        )
    }

    pub fn kind(&self) -> ModelKind {
        match self.body {
            ModelBody::LogisticRegression { .. } => ModelKind::LogisticRegression,
            ModelBody::NeuralNet { .. } => ModelKind::NeuralNet,
            ModelBody::DecisionTree { .. } => ModelKind::DecisionTree,
            ModelBody::RandomForest { .. } => ModelKind::RandomForest,
            ModelBody::Svm { .. } => ModelKind::Svm,
        }
    }

    /// Uncalibrated output: a logit for the networks, a leaf probability for
    /// trees, the signed margin for the SVM.
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        match &self.body {
            ModelBody::LogisticRegression { net } | ModelBody::NeuralNet { net } => net.eval(x)[0],
            ModelBody::DecisionTree { tree } => tree.predict(x),
            ModelBody::RandomForest { trees } => {
                trees.iter().map(|t| t.predict(x)).sum::<f64>() / trees.len() as f64
            }
            ModelBody::Svm { svm } => svm.decision_value(x),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_str(&text)?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::Config(format!("omega must lie in (0, 1), got {}", self.omega)));
        }
        match &self.body {
            ModelBody::LogisticRegression { net } | ModelBody::NeuralNet { net } => {
                check_len(self.input_dim, net.input_dim())
            }
            ModelBody::DecisionTree { tree } => tree.validate(self.input_dim),
            ModelBody::RandomForest { trees } => {
                if trees.is_empty() {
                    return Err(Error::Config("forest without trees".into()));
                }
                trees.iter().try_for_each(|t| t.validate(self.input_dim))
            }
            ModelBody::Svm { svm } => check_len(self.input_dim, svm.input_dim()),
        }
    }
}

impl Classifier for ClassifierModel {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn omega(&self) -> f64 {
        self.omega
    }

    fn probability(&self, x: &[f64]) -> f64 {
        let s = self.raw_score(x);
        let p = match (&self.body, &self.platt) {
            (_, Some(platt)) => platt.probability(s),
            (ModelBody::LogisticRegression { .. } | ModelBody::NeuralNet { .. }, None) => sigmoid(s),
            (ModelBody::Svm { .. }, None) => sigmoid(s),
            (_, None) => s,
        };
        p.clamp(0.0, 1.0)
    }
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn omega(&self) -> f64 {
        (**self).omega()
    }
    fn probability(&self, x: &[f64]) -> f64 {
        (**self).probability(x)
    }
}

/// Hyperparameter grids and optimiser settings for [`train_classifier`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub hidden_sizes: Vec<usize>,
    pub max_depths: Vec<usize>,
    pub min_leaf: usize,
    pub forest_sizes: Vec<usize>,
    pub kernels: Vec<Kernel>,
    pub svm_epochs: usize,
    pub svm_lambda: Option<f64>,
    pub omega: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 64,
            max_epochs: 4000,
            patience: 200,
            hidden_sizes: vec![3, 5, 10, 25, 50, 100],
            max_depths: vec![5, 10, 30, 50],
            min_leaf: 2,
            forest_sizes: vec![50, 100, 200, 400, 600],
            kernels: vec![Kernel::Linear, Kernel::Rbf, Kernel::Polynomial],
            svm_epochs: 20,
            svm_lambda: None,
            omega: DEFAULT_OMEGA,
            seed: 0,
        }
    }
}

/// Fits a model of `kind` on `train`, choosing hyperparameters by validation
/// AUC (ties go to the smaller model, which comes first in each grid).
pub fn train_classifier(
    kind: ModelKind,
    train: &Dataset,
    validation: &Dataset,
    config: &ClassifierConfig,
) -> Result<ClassifierModel> {
    for d in [train, validation] {
        if d.is_empty() {
            return Err(Error::EmptyDataset);
        }
    }
    if !train.has_both_classes() {
        return Err(Error::SingleClass);
    }
    check_len(train.dim(), validation.dim())?;

    let candidates: Vec<ClassifierModel> = match kind {
        ModelKind::LogisticRegression => {
            vec![logistic::train(train, validation, None, &config.logistic_training())?]
        }
        ModelKind::NeuralNet => config
            .hidden_sizes
            .iter()
            .map(|&h| logistic::train(train, validation, Some(h), &config.logistic_training()))
            .collect::<Result<_>>()?,
        ModelKind::DecisionTree => config
            .max_depths
            .iter()
            .map(|&depth| {
                let tree = tree::fit_tree(train, &tree::TreeParams::single(depth, config.min_leaf));
                ClassifierModel::new(train.dim(), ModelBody::DecisionTree { tree })
            })
            .collect(),
        ModelKind::RandomForest => {
            let mut out = Vec::new();
            for &depth in &config.max_depths {
                for &n in &config.forest_sizes {
                    let trees = tree::fit_forest(train, n, depth, config.min_leaf, config.seed);
                    out.push(ClassifierModel::new(train.dim(), ModelBody::RandomForest { trees }));
                }
            }
            out
        }
        ModelKind::Svm => config
            .kernels
            .iter()
            .map(|&k| svm::train(train, validation, k, config))
            .collect::<Result<_>>()?,
    };

    let mut best: Option<(f64, ClassifierModel)> = None;
    for candidate in candidates {
        let scores: Vec<f64> = validation.features.iter().map(|x| candidate.probability(x)).collect();
        let auc = metrics::auc(&scores, &validation.labels);
        let auc = if auc.is_nan() { 0.5 } else { auc };
        if best.as_ref().is_none_or(|(b, _)| auc > *b) {
            best = Some((auc, candidate));
        }
    }
    let (_, model) = best.ok_or_else(|| Error::Config(format!("empty hyperparameter grid for {kind}")))?;
    model.with_omega(config.omega)
}

impl ClassifierConfig {
    fn logistic_training(&self) -> LogisticTraining {
        LogisticTraining {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
        }
    }
}
