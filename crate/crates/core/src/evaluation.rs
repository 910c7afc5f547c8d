//! Explanation quality metrics, experiment scenarios and report output.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{growing_spheres_explain, GrowConfig, GrowOutcome};
use crate::classifiers::{Classifier, ClassifierModel};
use crate::dataset::Dataset;
use crate::drl::{explain, synthesize_policy, Algorithm, LearningCurve, TrainConfig};
use crate::error::{check_len, Error, Result};
use crate::mdp::{reward, untrusted_count, DeciderProfile, Explanation};
use crate::seed;

/// Decision boundary deviance `|f(x′) − ω|`.
pub fn dbd<C: Classifier + ?Sized>(model: &C, x_prime: &[f64]) -> Result<f64> {
    Ok((model.predict_proba(x_prime)? - model.omega()).abs())
}

/// Share of the untrusted features that the explanation uses (`z_j ≠ 0`).
/// The profile must mark `round(p · uap)` features untrusted.
pub fn uep(z: &[f64], profile: &DeciderProfile, uap: f64) -> Result<f64> {
    check_len(profile.dim(), z.len())?;
    if !(uap > 0.0 && uap <= 1.0) {
        return Err(Error::Config(format!("UEP is undefined for UAP = {uap}")));
    }
    let untrusted = profile.untrusted();
    let expected = untrusted_count(z.len(), uap);
    if untrusted.len() != expected {
        return Err(Error::Config(format!(
            "profile has {} untrusted features but UAP {uap} implies {expected}",
            untrusted.len()
        )));
    }
    if untrusted.is_empty() {
        return Ok(0.0);
    }
    let used = untrusted.iter().filter(|&&j| z[j] != 0.0).count();
    Ok(used as f64 / untrusted.len() as f64)
}

/// The `q` largest non-zero entries of `z` by magnitude, ties broken by
/// feature index.
pub fn explanation_ranking(z: &[f64], feature_names: &[String], q: usize) -> Vec<(String, f64)> {
    let mut idx: Vec<usize> = (0..z.len()).filter(|&j| z[j] != 0.0).collect();
    idx.sort_by(|&a, &b| z[b].abs().total_cmp(&z[a].abs()).then(a.cmp(&b)));
    idx.into_iter()
        .take(q)
        .map(|j| (feature_names.get(j).cloned().unwrap_or_else(|| format!("f{j}")), z[j]))
        .collect()
}

/// Trailing mean over the last `min(window, i + 1)` points.
pub fn rolling_curve(series: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for i in 0..series.len() {
        sum += series[i];
        if i >= w {
            sum -= series[i - w];
        }
        let n = (i + 1).min(w);
        // recompute short windows exactly to avoid drift in the running sum
        let mean = if i < w { sum / n as f64 } else { series[i + 1 - w..=i].iter().sum::<f64>() / w as f64 };
        out.push(mean);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Explainer {
    Ddpg,
    Td3,
    HexDdpg,
    HexTd3,
    Grow,
}

impl Explainer {
    pub const ALL: [Explainer; 5] = [
        Explainer::Ddpg,
        Explainer::Td3,
        Explainer::HexDdpg,
        Explainer::HexTd3,
        Explainer::Grow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Explainer::Ddpg => "ddpg",
            Explainer::Td3 => "td3",
            Explainer::HexDdpg => "hex-ddpg",
            Explainer::HexTd3 => "hex-td3",
            Explainer::Grow => "grow",
        }
    }

    pub fn is_hex(self) -> bool {
        matches!(self, Explainer::HexDdpg | Explainer::HexTd3)
    }

    /// Training configuration for the learned explainers, derived from `base`
    /// (episodes, network sizes, ...) with the variant's switches applied.
    pub fn train_config(self, base: &TrainConfig, profile: Option<&DeciderProfile>, seed: u64) -> Option<TrainConfig> {
        let algorithm = match self {
            Explainer::Ddpg | Explainer::HexDdpg => Algorithm::Ddpg,
            Explainer::Td3 | Explainer::HexTd3 => Algorithm::Td3,
            Explainer::Grow => return None,
        };
        Some(TrainConfig {
            algorithm,
            selective_buffering: self.is_hex(),
            smote: self.is_hex(),
            hitl: if self.is_hex() { profile.cloned() } else { None },
            seed,
            ..base.clone()
        })
    }
}

impl fmt::Display for Explainer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Explainer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Explainer::ALL
            .into_iter()
            .find(|e| e.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown explainer `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    DeciderFree,
    Hitl,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::DeciderFree => "decider-free",
            Scenario::Hitl => "hitl",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "decider-free" | "free" => Ok(Scenario::DeciderFree),
            "hitl" => Ok(Scenario::Hitl),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

/// One explained test instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub instance: usize,
    pub z: Vec<f64>,
    pub x_prime: Vec<f64>,
    /// `f(x′)`.
    pub probability: f64,
    pub dbd: f64,
    /// Present only when a decider profile is in force.
    pub uep: Option<f64>,
    pub reward: f64,
    /// False when the explainer produced nothing and `z = 0` was recorded.
    pub found: bool,
}

/// Records and means for one (trial, model, explainer, UAP) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: Scenario,
    pub explainer: Explainer,
    pub model: String,
    pub uap: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub records: Vec<EvalRecord>,
    pub mean_dbd: f64,
    pub mean_uep: Option<f64>,
    pub mean_reward: f64,
    pub learning_curve: Option<LearningCurve>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl EvalReport {
    /// Recomputes the means from the records.
    pub fn aggregate(&mut self) {
        self.mean_dbd = mean(self.records.iter().map(|r| r.dbd));
        self.mean_reward = mean(self.records.iter().map(|r| r.reward));
        self.mean_uep = if self.records.iter().all(|r| r.uep.is_some()) && !self.records.is_empty() {
            Some(mean(self.records.iter().filter_map(|r| r.uep)))
        } else {
            None
        };
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub trials: usize,
    /// Held-out instances explained per trial.
    pub instances: usize,
    pub uaps: Vec<f64>,
    pub train: TrainConfig,
    pub grow: GrowConfig,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            trials: 10,
            instances: 100,
            uaps: vec![0.1, 0.5, 0.9],
            train: TrainConfig::default(),
            grow: GrowConfig::default(),
            seed: 0,
        }
    }
}

/// Explains `x` with a trained policy or Growing Spheres and scores the result.
fn score<C: Classifier + ?Sized>(
    model: &C,
    instance: usize,
    x: &[f64],
    explanation: Option<Explanation>,
    profile: Option<(&DeciderProfile, f64)>,
    train: &TrainConfig,
) -> Result<EvalRecord> {
    let found = explanation.is_some();
    let Explanation { z, x_prime } = explanation.unwrap_or_else(|| Explanation {
        z: vec![0.0; x.len()],
        x_prime: x.to_vec(),
    });
    let probability = model.predict_proba(&x_prime)?;
    Ok(EvalRecord {
        instance,
        dbd: (probability - model.omega()).abs(),
        uep: profile.map(|(p, uap)| uep(&z, p, uap)).transpose()?,
        reward: reward(x, &z, model, &train.reward)?,
        probability,
        z,
        x_prime,
        found,
    })
}

/// One model under evaluation.
pub struct ModelEntry<'a> {
    pub name: String,
    pub model: &'a ClassifierModel,
    pub train: &'a Dataset,
    pub test: &'a Dataset,
}

/// Runs every trial of `scenario` for each model × explainer. Under HITL
/// each trial draws one untrusted-feature set per UAP, shared by all
/// explainers. Reports come back ordered by trial, UAP, model, explainer.
pub fn run_scenario(
    scenario: Scenario,
    models: &[ModelEntry<'_>],
    explainers: &[Explainer],
    config: &ScenarioConfig,
) -> Result<Vec<EvalReport>> {
    if models.is_empty() || explainers.is_empty() {
        return Err(Error::Config("scenario needs at least one model and one explainer".into()));
    }
    if config.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    for m in models {
        check_len(m.model.input_dim(), m.train.dim())?;
        check_len(m.model.input_dim(), m.test.dim())?;
        if m.test.is_empty() || m.train.is_empty() {
            return Err(Error::EmptyDataset);
        }
    }
    let uaps: Vec<Option<f64>> = match scenario {
        Scenario::DeciderFree => vec![None],
        Scenario::Hitl => {
            if config.uaps.is_empty() {
                return Err(Error::Config("HITL scenario needs at least one UAP".into()));
            }
            config.uaps.iter().map(|&u| Some(u)).collect()
        }
    };

    struct Job<'m> {
        trial: usize,
        uap: Option<f64>,
        profiles: Vec<Option<DeciderProfile>>,
        entry: &'m ModelEntry<'m>,
        model_index: usize,
        explainer: Explainer,
    }
    let mut jobs = Vec::new();
    for trial in 0..config.trials {
        for (u, &uap) in uaps.iter().enumerate() {
            for (mi, entry) in models.iter().enumerate() {
                let profile = match uap {
                    Some(uap) => {
                        let mut rng = seed::stream_indexed(config.seed, &format!("profile-{u}"), trial as u64);
                        Some(DeciderProfile::random(entry.model.input_dim(), uap, &mut rng)?)
                    }
                    None => None,
                };
                for &explainer in explainers {
                    jobs.push(Job {
                        trial,
                        uap,
                        profiles: vec![profile.clone()],
                        entry,
                        model_index: mi,
                        explainer,
                    });
                }
            }
        }
    }

    jobs.par_iter()
        .map(|job| {
            let entry = job.entry;
            let profile = job.profiles[0].as_ref();
            let trial_seed = seed::derive_indexed(config.seed, "trial", job.trial as u64);
            let cell_seed = seed::derive_indexed(trial_seed, &format!("model-{}", job.model_index), 0);
            let n = config.instances.min(entry.test.len());
            let scored = profile.zip(job.uap);
            let (records, curve) = match job.explainer.train_config(&config.train, profile, cell_seed) {
                Some(train_cfg) => {
                    let (policy, curve) = synthesize_policy(entry.model, entry.train, &train_cfg)?;
                    let records = (0..n)
                        .map(|i| {
                            let x = &entry.test.features[i];
                            let e = explain(&policy, x, entry.model)?;
                            score(entry.model, i, x, Some(e), scored, &config.train)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    (records, Some(curve))
                }
                None => {
                    let records = (0..n)
                        .map(|i| {
                            let x = &entry.test.features[i];
                            let grow = GrowConfig {
                                seed: seed::derive_indexed(cell_seed, "grow", i as u64),
                                ..config.grow.clone()
                            };
                            let outcome = growing_spheres_explain(entry.model, x, &grow)?;
                            let e = match outcome {
                                GrowOutcome::Found(e) => Some(e),
                                GrowOutcome::NotFound => None,
                            };
                            score(entry.model, i, x, e, scored, &config.train)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    (records, None)
                }
            };
            let mut report = EvalReport {
                scenario,
                explainer: job.explainer,
                model: entry.name.clone(),
                uap: job.uap,
                trial: job.trial,
                seed: cell_seed,
                records,
                mean_dbd: 0.0,
                mean_uep: None,
                mean_reward: 0.0,
                learning_curve: curve,
            };
            report.aggregate();
            Ok(report)
        })
        .collect()
}

/// Means over trials for one (scenario, model, explainer, UAP) group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scenario: Scenario,
    pub model: String,
    pub explainer: Explainer,
    pub uap: Option<f64>,
    pub trials: usize,
    pub mean_dbd: f64,
    pub mean_uep: Option<f64>,
    pub mean_reward: f64,
}

/// Unweighted means of the per-trial means, one row per group in order of
/// first appearance.
pub fn aggregate_trials(reports: &[EvalReport]) -> Vec<AggregateRow> {
    let mut keys: Vec<(Scenario, String, Explainer, Option<u64>)> = Vec::new();
    for r in reports {
        let key = (r.scenario, r.model.clone(), r.explainer, r.uap.map(f64::to_bits));
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(scenario, model, explainer, uap_bits)| {
            let group: Vec<&EvalReport> = reports
                .iter()
                .filter(|r| r.scenario == scenario && r.model == model && r.explainer == explainer && r.uap.map(f64::to_bits) == uap_bits)
                .collect();
            let mean_uep = if group.iter().all(|r| r.mean_uep.is_some()) {
                Some(mean(group.iter().filter_map(|r| r.mean_uep)))
            } else {
                None
            };
            AggregateRow {
                scenario,
                model,
                explainer,
                uap: uap_bits.map(f64::from_bits),
                trials: group.len(),
                mean_dbd: mean(group.iter().map(|r| r.mean_dbd)),
                mean_uep,
                mean_reward: mean(group.iter().map(|r| r.mean_reward)),
            }
        })
        .collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

/// Per-instance rows; vectors are `;`-separated within a cell.
pub fn write_records_csv(reports: &[EvalReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "scenario", "model", "explainer", "uap", "trial", "instance", "found", "f_x_prime", "dbd", "uep", "reward", "z", "x_prime",
    ])?;
    for r in reports {
        for rec in &r.records {
            w.write_record([
                r.scenario.to_string(),
                r.model.clone(),
                r.explainer.to_string(),
                r.uap.map_or(String::new(), |u| u.to_string()),
                r.trial.to_string(),
                rec.instance.to_string(),
                rec.found.to_string(),
                rec.probability.to_string(),
                rec.dbd.to_string(),
                rec.uep.map_or(String::new(), |u| u.to_string()),
                rec.reward.to_string(),
                join(&rec.z),
                join(&rec.x_prime),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

const PALETTE: [&str; 6] = ["#1b6ca8", "#d1495b", "#edae49", "#00798c", "#66a182", "#8d6a9f"];

/// One panel of a learning-curve grid.
pub struct CurvePanel {
    pub title: String,
    pub series: Vec<(String, Vec<f64>)>,
}

/// Panels laid out `columns` wide, each with its own y range and a legend.
pub fn learning_curve_grid_svg(panels: &[CurvePanel], columns: usize) -> String {
    let (pw, ph) = (360.0, 240.0);
    let cols = columns.max(1).min(panels.len().max(1));
    let rows = panels.len().div_ceil(cols).max(1);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="11">"#,
        pw * cols as f64,
        ph * rows as f64
    );
    for (k, panel) in panels.iter().enumerate() {
        let (ox, oy) = ((k % cols) as f64 * pw, (k / cols) as f64 * ph);
        let (left, top, w, h) = (ox + 50.0, oy + 24.0, pw - 70.0, ph - 60.0);
        let all = panel.series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite());
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (lo, hi) = if lo.is_finite() { if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) } } else { (0.0, 1.0) };
        let len = panel.series.iter().map(|(_, v)| v.len()).max().unwrap_or(1).max(2);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-weight="bold">{}</text>"#, left, oy + 14.0, escape(&panel.title));
        let _ = writeln!(s, r##"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="#888"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#, left - 4.0, top + 8.0, hi);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#, left - 4.0, top + h, lo);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">episode</text>"#, left + w / 2.0, top + h + 16.0);
        for (i, (name, values)) in panel.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let points: Vec<String> = values
                .iter()
                .enumerate()
                .filter(|(_, v)| v.is_finite())
                .map(|(t, v)| {
                    let px = left + w * t as f64 / (len - 1) as f64;
                    let py = top + h * (1.0 - (v - lo) / (hi - lo));
                    format!("{px:.2},{py:.2}")
                })
                .collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, points.join(" "));
            let ly = top + h + 30.0;
            let lx = left + i as f64 * 90.0;
            let _ = writeln!(s, r#"<rect x="{lx}" y="{}" width="10" height="3" fill="{color}"/>"#, ly - 4.0);
            let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, lx + 14.0, escape(name));
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Horizontal bars for a ranked explanation, signed around a zero axis.
pub fn ranking_bar_svg(title: &str, ranking: &[(String, f64)]) -> String {
    let (w, bar_h, label_w) = (480.0, 22.0, 140.0);
    let h = 40.0 + bar_h * ranking.len() as f64;
    let max = ranking.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max).max(1e-12);
    let half = (w - label_w - 20.0) / 2.0;
    let axis = label_w + half;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<text x="8" y="16" font-weight="bold">{}</text>"#, escape(title));
    let _ = writeln!(s, r##"<line x1="{axis}" y1="26" x2="{axis}" y2="{}" stroke="#444"/>"##, h - 6.0);
    for (i, (name, v)) in ranking.iter().enumerate() {
        let y = 30.0 + i as f64 * bar_h;
        let len = half * v.abs() / max;
        let (x, color) = if *v >= 0.0 { (axis, PALETTE[0]) } else { (axis - len, PALETTE[1]) };
        let _ = writeln!(s, r#"<text x="8" y="{}">{}</text>"#, y + 14.0, escape(name));
        let _ = writeln!(s, r#"<rect class="bar" x="{x:.2}" y="{y}" width="{len:.2}" height="{}" fill="{color}"/>"#, bar_h - 6.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{v:+.3}</text>"#, w - 8.0 - 40.0, y + 14.0);
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_boundary, BoundaryKind, SplitSpec};
    use crate::drl::PolicyConfig;

    #[test]
    fn dbd_examples() {
        let at = ClassifierModel::constant(1, 0.5);
        assert_eq!(dbd(&at, &[0.3]).unwrap(), 0.0);
        assert_eq!(dbd(&ClassifierModel::constant(1, 0.0), &[0.3]).unwrap(), 0.5);
        assert!((dbd(&ClassifierModel::constant(1, 0.62), &[0.3]).unwrap() - 0.12).abs() < 1e-12);
    }

    #[test]
    fn uep_examples() {
        let profile = DeciderProfile::from_untrusted(10, &[0, 2, 4, 6, 8]).unwrap();
        let mut z = vec![0.0; 10];
        z[1] = 0.3;
        assert_eq!(uep(&z, &profile, 0.5).unwrap(), 0.0);
        z[0] = -0.1;
        z[6] = 0.2;
        assert!((uep(&z, &profile, 0.5).unwrap() - 0.4).abs() < 1e-12);
        let all: Vec<f64> = (0..10).map(|j| if j % 2 == 0 { 0.1 } else { 0.0 }).collect();
        assert_eq!(uep(&all, &profile, 0.5).unwrap(), 1.0);
        assert!(uep(&z, &profile, 0.0).is_err());
        assert!(uep(&z, &profile, 0.1).is_err());
    }

    #[test]
    fn ranking_examples() {
        let names: Vec<String> = ["f0", "f1", "f2"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            explanation_ranking(&[0.0, -0.5, 0.2], &names, 2),
            vec![("f1".to_string(), -0.5), ("f2".to_string(), 0.2)]
        );
        assert!(explanation_ranking(&[0.0; 3], &names, 3).is_empty());
        let full = explanation_ranking(&[0.1, -0.3, 0.2], &names, 3);
        let order: Vec<&str> = full.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(order, vec!["f1", "f2", "f0"]);
        // equal magnitudes fall back to index order
        let tie = explanation_ranking(&[0.2, -0.2, 0.0], &names, 3);
        assert_eq!(tie[0].0, "f0");
    }

    #[test]
    fn rolling_examples() {
        let s = [3.0, -1.0, 4.0, 1.5];
        assert_eq!(rolling_curve(&s, 1), s.to_vec());
        assert_eq!(rolling_curve(&[2.0; 5], 3), vec![2.0; 5]);
        assert_eq!(rolling_curve(&[0.0, 10.0], 2), vec![0.0, 5.0]);
        assert_eq!(rolling_curve(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.0, 1.5, 2.5, 3.5]);
    }

    fn tiny_config(trials: usize, instances: usize) -> ScenarioConfig {
        ScenarioConfig {
            trials,
            instances,
            train: TrainConfig {
                episodes: 3,
                inner_iterations: 4,
                batch_size: 8,
                policy: PolicyConfig {
                    hidden_units: 6,
                    ..PolicyConfig::default()
                },
                ..TrainConfig::default()
            },
            grow: GrowConfig {
                n_in_layer: 40,
                ..GrowConfig::default()
            },
            ..ScenarioConfig::default()
        }
    }

    fn setup() -> (ClassifierModel, Dataset, Dataset) {
        let d = synth_boundary(BoundaryKind::Linear, 80, 4, 1).unwrap();
        let (train, _, test) = d.split(&SplitSpec::new(1)).unwrap();
        (ClassifierModel::logistic(vec![5.0, 5.0, 0.0, 0.0], -5.0).unwrap(), train, test)
    }

    #[test]
    fn report_bookkeeping() {
        let (m, train, test) = setup();
        let entry = ModelEntry {
            name: "lr".into(),
            model: &m,
            train: &train,
            test: &test,
        };
        let reports = run_scenario(Scenario::DeciderFree, &[entry], &[Explainer::HexTd3], &tiny_config(1, 5)).unwrap();
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert_eq!(r.records.len(), 5);
        let recomputed = r.records.iter().map(|x| x.dbd).sum::<f64>() / 5.0;
        assert!((r.mean_dbd - recomputed).abs() < 1e-12);
        assert_eq!(r.mean_uep, None);
        assert_eq!(r.learning_curve.as_ref().unwrap().len(), 3);
    }

    #[test]
    fn hitl_hex_has_zero_uep_and_runs_repeat() {
        let (m, train, test) = setup();
        let entries = || {
            vec![ModelEntry {
                name: "lr".into(),
                model: &m,
                train: &train,
                test: &test,
            }]
        };
        let explainers = [Explainer::HexDdpg, Explainer::Td3, Explainer::Grow];
        let cfg = tiny_config(2, 4);
        let a = run_scenario(Scenario::Hitl, &entries(), &explainers, &cfg).unwrap();
        assert_eq!(a.len(), 2 * 3 * 3);
        for r in &a {
            if r.explainer.is_hex() {
                assert_eq!(r.mean_uep, Some(0.0));
            }
        }
        let b = run_scenario(Scenario::Hitl, &entries(), &explainers, &cfg).unwrap();
        assert_eq!(a, b);

        let rows = aggregate_trials(&a);
        assert_eq!(rows.len(), 9);
        for row in &rows {
            assert_eq!(row.trials, 2);
            let group: Vec<&EvalReport> = a.iter().filter(|r| r.explainer == row.explainer && r.uap == row.uap).collect();
            let m = group.iter().map(|r| r.mean_dbd).sum::<f64>() / 2.0;
            assert!((row.mean_dbd - m).abs() < 1e-12);
        }
    }

    #[test]
    fn reports_need_models() {
        assert!(run_scenario(Scenario::DeciderFree, &[], &[Explainer::Grow], &tiny_config(1, 1)).is_err());
    }

    #[test]
    fn svg_outputs_are_well_formed() {
        let ranking = vec![("a".to_string(), 0.4), ("b".to_string(), -0.2)];
        let svg = ranking_bar_svg("x <1>", &ranking);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("class=\"bar\"").count(), 2);
        assert!(svg.contains("x &lt;1&gt;"));
        let grid = learning_curve_grid_svg(
            &[CurvePanel {
                title: "lr".into(),
                series: vec![("td3".into(), vec![0.0, 1.0, 0.5])],
            }],
            2,
        );
        assert_eq!(grid.matches("<polyline").count(), 1);
    }

    #[test]
    fn records_csv_has_one_row_per_instance() {
        let (m, train, test) = setup();
        let entry = ModelEntry {
            name: "lr".into(),
            model: &m,
            train: &train,
            test: &test,
        };
        let reports = run_scenario(Scenario::DeciderFree, &[entry], &[Explainer::Grow], &tiny_config(1, 3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        write_records_csv(&reports, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
    }
}
