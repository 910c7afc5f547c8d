use rand::seq::SliceRandom;

use super::{ClassifierModel, ModelBody};
use crate::dataset::Dataset;
use crate::densenet::{sigmoid, Activation, AdamState, DenseNet, LayerShape};
use crate::error::Result;
use crate::seed;

#[derive(Clone, Debug)]
pub struct LogisticTraining {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

fn mean_log_loss(net: &DenseNet, data: &Dataset) -> f64 {
    let total: f64 = data
        .features
        .iter()
        .zip(&data.labels)
        .map(|(x, &y)| {
            let logit = net.eval(x)[0];
            // log(1 + e^{-|l|}) + max(l, 0) - y·l
            let l = logit;
            (1.0 + (-l.abs()).exp()).ln() + l.max(0.0) - y as f64 * l
        })
        .sum();
    total / data.len() as f64
}

/// Minibatch Adam on the log loss with early stopping on the validation
/// loss. `hidden = None` gives logistic regression.
pub(super) fn train(
    train: &Dataset,
    validation: &Dataset,
    hidden: Option<usize>,
    cfg: &LogisticTraining,
) -> Result<ClassifierModel> {
    let p = train.dim();
    let label = match hidden {
        None => "logistic".to_string(),
        Some(h) => format!("mlp-{h}"),
    };
    let mut rng = seed::stream(cfg.seed, &label);
    let mut net = match hidden {
        None => DenseNet::zeros(vec![LayerShape::new(p, 1, Activation::Identity)])?,
        Some(h) => DenseNet::mlp(p, &[h], 1, Activation::Relu, Activation::Identity, &mut rng)?,
    };
    let mut adam = AdamState::new(net.num_params(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grads = vec![0.0; net.num_params()];

    let mut best_loss = mean_log_loss(&net, validation);
    let mut best = net.clone();
    let mut since_best = 0;
    for _epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size.max(1)) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let x = &train.features[i];
                let residual = sigmoid(net.eval(x)[0]) - train.labels[i] as f64;
                net.accumulate_gradient(x, &[residual * scale], &mut grads);
            }
            adam.step_net(&mut net, &grads)?;
        }
        let loss = mean_log_loss(&net, validation);
        if loss < best_loss {
            best_loss = loss;
            best = net.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let body = match hidden {
        None => ModelBody::LogisticRegression { net: best },
        Some(_) => ModelBody::NeuralNet { net: best },
    };
    Ok(ClassifierModel::new(p, body))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::Classifier;
    use crate::dataset::{synth_boundary, BoundaryKind, SplitSpec};

    #[test]
    fn separable_blobs_reach_high_accuracy() {
        let d = synth_boundary(BoundaryKind::Linear, 300, 2, 5).unwrap();
        let (tr, va, _) = d.split(&SplitSpec::new(1)).unwrap();
        let cfg = LogisticTraining {
            learning_rate: 0.01,
            batch_size: 64,
            max_epochs: 1000,
            patience: 200,
            seed: 1,
        };
        let m = train(&tr, &va, None, &cfg).unwrap();
        let correct = tr
            .features
            .iter()
            .zip(&tr.labels)
            .filter(|(x, &y)| m.class_of(x) == y)
            .count();
        let acc = correct as f64 / tr.len() as f64;
        assert!(acc >= 0.95, "training accuracy {acc}");
    }
}
