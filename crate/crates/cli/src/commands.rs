use std::path::{Path, PathBuf};

use anyhow::Context;
use log::info;

use hexplain::baselines::{growing_spheres_explain, GrowConfig};
use hexplain::classifiers::metrics::{accuracy, auc};
use hexplain::classifiers::train_classifier as fit;
use hexplain::drl::{explain as policy_explain, synthesize_policy, CURVE_WINDOW};
use hexplain::evaluation::{
    aggregate_trials, explanation_ranking, learning_curve_grid_svg, ranking_bar_svg, rolling_curve, run_scenario,
    write_json, write_records_csv, AggregateRow, CurvePanel, EvalReport, ModelEntry, ScenarioConfig,
};
use hexplain::{ActorCriticPolicy, Classifier, ClassifierModel, Dataset, DeciderProfile, Explanation, SplitSpec};

use crate::config::RunConfig;
use crate::UsageError;

fn split(cfg: &RunConfig) -> anyhow::Result<(Dataset, Dataset, Dataset)> {
    Ok(cfg.dataset()?.split(&SplitSpec::new(cfg.seed))?)
}

fn load_model(path: &Path) -> anyhow::Result<ClassifierModel> {
    if !path.exists() {
        return Err(UsageError(format!("model file {} does not exist", path.display())).into());
    }
    ClassifierModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn check_dims(model: &ClassifierModel, data: &Dataset) -> anyhow::Result<()> {
    if model.input_dim() != data.dim() {
        return Err(UsageError(format!(
            "model expects {} features but the data has {}",
            model.input_dim(),
            data.dim()
        ))
        .into());
    }
    Ok(())
}

pub fn train_classifier(cfg: &RunConfig, output: Option<PathBuf>) -> anyhow::Result<()> {
    let (train, validation, test) = split(cfg)?;
    let classifier_cfg = hexplain::classifiers::ClassifierConfig {
        seed: cfg.seed,
        ..cfg.classifier_config.clone()
    };
    info!("training {} on {} rows", cfg.classifier, train.len());
    let model = fit(cfg.classifier, &train, &validation, &classifier_cfg)?;
    let path = match output {
        Some(p) => p,
        None => cfg.ensure_out_dir()?.join("model.json"),
    };
    model.save(&path)?;
    println!("model {} -> {}", cfg.classifier, path.display());
    println!("{:<11} {:>6} {:>9} {:>7}", "split", "rows", "accuracy", "auc");
    for (name, d) in [("train", &train), ("validation", &validation), ("test", &test)] {
        let scores: Vec<f64> = d.features.iter().map(|x| model.probability(x)).collect();
        let predictions: Vec<u8> = d.features.iter().map(|x| model.class_of(x)).collect();
        println!(
            "{name:<11} {:>6} {:>9.4} {:>7.4}",
            d.len(),
            accuracy(&predictions, &d.labels),
            auc(&scores, &d.labels)
        );
    }
    Ok(())
}

pub fn synthesize(cfg: &RunConfig, model_path: &Path, decider: Option<&Path>) -> anyhow::Result<()> {
    let model = load_model(model_path)?;
    let (_, validation, _) = split(cfg)?;
    check_dims(&model, &validation)?;
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = cfg.seed;
    if let Some(path) = decider {
        train_cfg.hitl = Some(DeciderProfile::load(path, &validation.feature_names)?);
    }
    train_cfg.validate()?;
    info!(
        "synthesizing {} policy: {} episodes x {} steps",
        train_cfg.algorithm, train_cfg.episodes, train_cfg.inner_iterations
    );
    let (policy, curve) = synthesize_policy(&model, &validation, &train_cfg)?;
    let out = cfg.ensure_out_dir()?;
    let policy_path = out.join("policy.json");
    let curve_path = out.join("learning_curve.csv");
    policy.save(&policy_path)?;
    curve.write_csv(&curve_path, CURVE_WINDOW)?;
    let (first, last) = curve.first_and_last_window(CURVE_WINDOW);
    println!("policy -> {}", policy_path.display());
    println!("learning curve -> {}", curve_path.display());
    println!("mean reward: first window {first:.4}, last window {last:.4}");
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

pub fn explain(
    cfg: &RunConfig,
    model_path: &Path,
    policy_path: Option<&Path>,
    instances: usize,
    top_q: usize,
    svg: bool,
) -> anyhow::Result<()> {
    let model = load_model(model_path)?;
    let (_, _, test) = split(cfg)?;
    check_dims(&model, &test)?;
    let policy = match policy_path {
        Some(path) => {
            if !path.exists() {
                return Err(UsageError(format!("policy file {} does not exist", path.display())).into());
            }
            let p = ActorCriticPolicy::load(path).with_context(|| format!("loading policy {}", path.display()))?;
            if p.dim() != test.dim() {
                return Err(UsageError(format!("policy expects {} features but the data has {}", p.dim(), test.dim())).into());
            }
            Some(p)
        }
        None => None,
    };
    let q = top_q.min(test.dim());
    let out = cfg.ensure_out_dir()?;
    let csv_path = out.join("explanations.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["instance", "found", "f_x", "f_x_prime", "dbd", "z", "x_prime", "ranking"])?;
    let n = instances.min(test.len());
    for i in 0..n {
        let x = &test.features[i];
        let explanation = match &policy {
            Some(p) => Some(policy_explain(p, x, &model)?),
            None => {
                let grow = GrowConfig {
                    seed: hexplain::seed::derive_indexed(cfg.seed, "grow", i as u64),
                    ..cfg.grow.clone()
                };
                growing_spheres_explain(&model, x, &grow)?.found()
            }
        };
        let found = explanation.is_some();
        let Explanation { z, x_prime } = explanation.unwrap_or_else(|| Explanation {
            z: vec![0.0; x.len()],
            x_prime: x.clone(),
        });
        let ranking = explanation_ranking(&z, &test.feature_names, q);
        let f_prime = model.probability(&x_prime);
        w.write_record([
            i.to_string(),
            found.to_string(),
            model.probability(x).to_string(),
            f_prime.to_string(),
            (f_prime - model.omega()).abs().to_string(),
            fmt_vec(&z),
            fmt_vec(&x_prime),
            ranking.iter().map(|(name, v)| format!("{name}:{v}")).collect::<Vec<_>>().join(";"),
        ])?;
        if svg {
            let path = out.join(format!("explanation-{i}.svg"));
            std::fs::write(&path, ranking_bar_svg(&format!("instance {i}"), &ranking))
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    w.flush()?;
    println!("{n} explanations -> {}", csv_path.display());
    Ok(())
}

fn print_aggregates(rows: &[AggregateRow]) {
    println!(
        "{:<13} {:<6} {:<9} {:>5} {:>6} {:>9} {:>9} {:>11}",
        "scenario", "model", "explainer", "uap", "trials", "mean_dbd", "mean_uep", "mean_reward"
    );
    for r in rows {
        println!(
            "{:<13} {:<6} {:<9} {:>5} {:>6} {:>9.4} {:>9} {:>11.4}",
            r.scenario.to_string(),
            r.model,
            r.explainer.to_string(),
            r.uap.map_or("-".into(), |u| format!("{u}")),
            r.trials,
            r.mean_dbd,
            r.mean_uep.map_or("-".into(), |u| format!("{u:.4}")),
            r.mean_reward
        );
    }
}

pub fn evaluate(cfg: &RunConfig) -> anyhow::Result<()> {
    if cfg.models.is_empty() || cfg.explainers.is_empty() {
        return Err(UsageError("evaluate needs at least one model and one explainer".into()).into());
    }
    let (train, validation, test) = split(cfg)?;
    let classifier_cfg = hexplain::classifiers::ClassifierConfig {
        seed: cfg.seed,
        ..cfg.classifier_config.clone()
    };
    let mut models = Vec::new();
    for &kind in &cfg.models {
        info!("training {kind}");
        models.push((kind, fit(kind, &train, &validation, &classifier_cfg)?));
    }
    let entries: Vec<ModelEntry<'_>> = models
        .iter()
        .map(|(kind, model)| ModelEntry {
            name: kind.short_name().to_string(),
            model,
            train: &validation,
            test: &test,
        })
        .collect();
    let scenario_cfg = ScenarioConfig {
        trials: cfg.trials,
        instances: cfg.instances,
        uaps: cfg.uaps.clone(),
        train: cfg.train.clone(),
        grow: cfg.grow.clone(),
        seed: cfg.seed,
    };
    cfg.train.validate()?;
    cfg.grow.validate()?;
    let reports = run_scenario(cfg.scenario, &entries, &cfg.explainers, &scenario_cfg)?;
    let out = cfg.ensure_out_dir()?;
    write_records_csv(&reports, &out.join("records.csv"))?;
    write_json(&reports, &out.join("reports.json"))?;
    let rows = aggregate_trials(&reports);
    write_json(&rows, &out.join("aggregates.json"))?;
    print_aggregates(&rows);
    Ok(())
}

pub fn report(cfg: &RunConfig, input: Option<PathBuf>, window: usize) -> anyhow::Result<()> {
    if window == 0 {
        return Err(UsageError("--window must be at least 1".into()).into());
    }
    let path = input.unwrap_or_else(|| cfg.out_dir.join("reports.json"));
    if !path.exists() {
        return Err(UsageError(format!("report file {} does not exist", path.display())).into());
    }
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let reports: Vec<EvalReport> =
        serde_json::from_str(&text).map_err(|e| UsageError(format!("{} is not a report file: {e}", path.display())))?;
    let rows = aggregate_trials(&reports);
    let out = cfg.ensure_out_dir()?;
    write_json(&rows, &out.join("aggregates.json"))?;

    // one panel per model and learned explainer, one line per trial and UAP
    let mut panels: Vec<CurvePanel> = Vec::new();
    for r in reports.iter().filter(|r| r.learning_curve.is_some()) {
        let title = format!("{} / {}", r.model, r.explainer);
        let label = match r.uap {
            Some(u) => format!("trial {} uap {u}", r.trial),
            None => format!("trial {}", r.trial),
        };
        let series = rolling_curve(&r.learning_curve.as_ref().expect("filtered").rewards, window);
        match panels.iter_mut().find(|p| p.title == title) {
            Some(p) => p.series.push((label, series)),
            None => panels.push(CurvePanel {
                title,
                series: vec![(label, series)],
            }),
        }
    }
    if !panels.is_empty() {
        let svg_path = out.join("learning_curves.svg");
        std::fs::write(&svg_path, learning_curve_grid_svg(&panels, 2)).with_context(|| format!("writing {}", svg_path.display()))?;
        info!("learning curves -> {}", svg_path.display());
    }
    print_aggregates(&rows);
    Ok(())
}
