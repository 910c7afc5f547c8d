use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use hexplain::baselines::GrowConfig;
use hexplain::classifiers::ClassifierConfig;
use hexplain::dataset::{load_csv, synth_boundary};
use hexplain::evaluation::{Explainer, Scenario};
use hexplain::{BoundaryKind, Dataset, ModelKind, TrainConfig};

use crate::UsageError;

pub const OUT_DIR_ENV: &str = "HEXPLAIN_OUT_DIR";

/// Everything a command may need. Loaded from a TOML or JSON file, then
/// overridden field by field from command-line flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// CSV with a header row; exclusive with `synthetic`.
    pub data: Option<PathBuf>,
    pub label_column: String,
    /// `kind:n:p[:seed]`, e.g. `linear:400:2`.
    pub synthetic: Option<String>,
    pub classifier: ModelKind,
    /// Models compared by `evaluate`.
    pub models: Vec<ModelKind>,
    pub classifier_config: ClassifierConfig,
    pub explainers: Vec<Explainer>,
    pub train: TrainConfig,
    pub grow: GrowConfig,
    pub scenario: Scenario,
    pub uaps: Vec<f64>,
    pub trials: usize,
    pub instances: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            label_column: "label".into(),
            synthetic: None,
            classifier: ModelKind::LogisticRegression,
            models: vec![ModelKind::LogisticRegression],
            classifier_config: ClassifierConfig::default(),
            explainers: vec![Explainer::HexTd3, Explainer::Grow],
            train: TrainConfig::default(),
            grow: GrowConfig::default(),
            scenario: Scenario::DeciderFree,
            uaps: vec![0.1, 0.5, 0.9],
            trials: 10,
            instances: 100,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let parsed = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| e.to_string()),
            _ => toml::from_str(&text).map_err(|e| e.to_string()),
        };
        parsed.map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())).into())
    }

    /// Reads the CSV or generates the synthetic set named in the config.
    pub fn dataset(&self) -> anyhow::Result<Dataset> {
        match (&self.data, &self.synthetic) {
            (Some(_), Some(_)) => Err(UsageError("give either a data file or a synthetic spec, not both".into()).into()),
            (None, None) => Err(UsageError("no data: pass --data FILE or --synthetic KIND:N:P".into()).into()),
            (Some(path), None) => Ok(load_csv(path, &self.label_column)?),
            (None, Some(spec)) => {
                let (kind, n, p, seed) = parse_synthetic(spec)?;
                Ok(synth_boundary(kind, n, p, seed.unwrap_or(self.seed))?)
            }
        }
    }

    pub fn ensure_out_dir(&self) -> anyhow::Result<&Path> {
        std::fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        Ok(&self.out_dir)
    }
}

fn parse_synthetic(spec: &str) -> anyhow::Result<(BoundaryKind, usize, usize, Option<u64>)> {
    let bad = || UsageError(format!("synthetic spec `{spec}` must look like linear:400:2 or xor:400:5:7"));
    let parts: Vec<&str> = spec.split(':').collect();
    if !(3..=4).contains(&parts.len()) {
        return Err(bad().into());
    }
    let kind: BoundaryKind = parts[0].parse().map_err(|_| bad())?;
    let n = parts[1].parse().map_err(|_| bad())?;
    let p = parts[2].parse().map_err(|_| bad())?;
    let seed = parts.get(3).map(|s| s.parse()).transpose().map_err(|_| bad())?;
    Ok((kind, n, p, seed))
}
