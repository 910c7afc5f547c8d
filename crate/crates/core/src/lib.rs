//! Explanation-producing policies for binary classifiers.
//!
//! A classifier `f` with threshold `ω` is treated as an environment. An
//! actor-critic agent learns a policy that maps an instance `x ∈ [0,1]^p` to a
//! perturbation `z` such that `x + z` lands just across the decision
//! boundary; `z` is the explanation. Optional decider profiles restrict which
//! features an explanation may touch.

pub mod baselines;
pub mod classifiers;
pub mod dataset;
pub mod densenet;
pub mod drl;
pub mod error;
pub mod evaluation;
pub mod mdp;
pub mod seed;

pub use classifiers::{decide, Classifier, ClassifierModel, ModelKind};
pub use dataset::{BoundaryKind, Dataset, SplitSpec};
pub use densenet::{Activation, AdamState, DenseNet};
pub use drl::{synthesize_policy, ActorCriticPolicy, Algorithm, TrainConfig};
pub use error::{Error, Result};
pub use evaluation::{dbd, uep, Explainer, Scenario};
pub use mdp::{DeciderProfile, Explanation, RewardConfig};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/classifiers.md")]
    mod classifiers {}
    #[doc = include_str!("../../../book/src/mdp.md")]
    mod mdp {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
