//! `hexplain` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use hexplain::evaluation::{Explainer, Scenario};
use hexplain::{Algorithm, ModelKind};

use config::{RunConfig, OUT_DIR_ENV};

/// Bad arguments or configuration; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "hexplain", version, about = "Explain binary classifiers with learned perturbation policies")]
struct Cli {
    /// TOML or JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for every artifact a command writes.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    /// Root seed for data splits, training and sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Repeat for more log detail on stderr.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    /// Generated data instead of a file, as KIND:N:P[:SEED] with KIND one of linear, radial, xor.
    #[arg(long)]
    synthetic: Option<String>,
}

#[derive(Args, Debug, Default)]
struct TrainArgs {
    #[arg(long)]
    algorithm: Option<Algorithm>,
    /// Selective buffering plus SMOTE-balanced start states.
    #[arg(long)]
    hex: bool,
    #[arg(long)]
    selective: bool,
    #[arg(long)]
    smote: bool,
    #[arg(long)]
    episodes: Option<usize>,
    /// Step cap per episode.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Selective buffering window.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Exploration noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a classifier and save it as JSON.
    TrainClassifier {
        #[command(flatten)]
        data: DataArgs,
        /// lr, nn, dt, rf or svm.
        #[arg(long)]
        kind: Option<ModelKind>,
        /// Model file; defaults to OUT_DIR/model.json.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Learn an explanation policy for a saved classifier.
    Synthesize {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        /// Decider profile JSON listing untrusted features by name or index.
        #[arg(long)]
        decider: Option<PathBuf>,
    },
    /// Explain held-out instances with a saved policy or Growing Spheres.
    Explain {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        /// Required unless `--explainer grow`.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ExplainWith::Policy)]
        explainer: ExplainWith,
        /// Number of test-partition rows to explain.
        #[arg(long, default_value_t = 10)]
        instances: usize,
        /// Features shown per ranking.
        #[arg(long, default_value_t = 5)]
        top_q: usize,
        /// Also write one bar chart per instance.
        #[arg(long)]
        svg: bool,
    },
    /// Run the decider-free or HITL comparison across models and explainers.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<ModelKind>>,
        #[arg(long, value_delimiter = ',')]
        explainers: Option<Vec<Explainer>>,
        #[arg(long)]
        scenario: Option<Scenario>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        uaps: Option<Vec<f64>>,
    },
    /// Summarise saved evaluation reports into tables and plots.
    Report {
        /// Defaults to OUT_DIR/reports.json.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Rolling window for the learning-curve plot.
        #[arg(long, default_value_t = hexplain::drl::CURVE_WINDOW)]
        window: usize,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ExplainWith {
    Policy,
    Grow,
}

impl DataArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(d) = &self.data {
            cfg.data = Some(d.clone());
            cfg.synthetic = None;
        }
        if let Some(s) = &self.synthetic {
            cfg.synthetic = Some(s.clone());
            if self.data.is_none() {
                cfg.data = None;
            }
        }
        if let Some(l) = &self.label_column {
            cfg.label_column = l.clone();
        }
    }
}

impl TrainArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let t = &mut cfg.train;
        if let Some(a) = self.algorithm {
            t.algorithm = a;
        }
        if self.hex {
            t.selective_buffering = true;
            t.smote = true;
        }
        t.selective_buffering |= self.selective;
        t.smote |= self.smote;
        if let Some(v) = self.episodes {
            t.episodes = v;
        }
        if let Some(v) = self.steps {
            t.inner_iterations = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.window {
            t.selective_window = v;
        }
        if let Some(v) = self.gamma {
            t.policy.gamma = v;
        }
        if let Some(v) = self.tau {
            t.policy.tau = v;
        }
        if let Some(v) = self.sigma {
            t.policy.exploration_sigma = v;
        }
        if let Some(v) = self.hidden {
            t.policy.hidden_units = v;
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use hexplain::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::NonFinite { .. } | E::EmptyBatch | E::EmptySnapshot | E::Infeasible { .. } | E::Network(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = cli.out_dir {
        cfg.out_dir = dir;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
        cfg.classifier_config.seed = seed;
        cfg.grow.seed = seed;
    }
    match cli.command {
        Command::TrainClassifier { data, kind, output } => {
            data.apply(&mut cfg);
            if let Some(k) = kind {
                cfg.classifier = k;
            }
            commands::train_classifier(&cfg, output)
        }
        Command::Synthesize {
            data,
            model,
            train,
            decider,
        } => {
            data.apply(&mut cfg);
            train.apply(&mut cfg);
            commands::synthesize(&cfg, &model, decider.as_deref())
        }
        Command::Explain {
            data,
            model,
            policy,
            explainer,
            instances,
            top_q,
            svg,
        } => {
            data.apply(&mut cfg);
            let policy = match (explainer, policy) {
                (ExplainWith::Grow, _) => None,
                (ExplainWith::Policy, Some(p)) => Some(p),
                (ExplainWith::Policy, None) => {
                    return Err(UsageError("--policy is required unless --explainer grow".into()).into())
                }
            };
            commands::explain(&cfg, &model, policy.as_deref(), instances, top_q, svg)
        }
        Command::Evaluate {
            data,
            train,
            models,
            explainers,
            scenario,
            trials,
            instances,
            uaps,
        } => {
            data.apply(&mut cfg);
            train.apply(&mut cfg);
            if let Some(m) = models {
                cfg.models = m;
            }
            if let Some(e) = explainers {
                cfg.explainers = e;
            }
            if let Some(s) = scenario {
                cfg.scenario = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(n) = instances {
                cfg.instances = n;
            }
            if let Some(u) = uaps {
                cfg.uaps = u;
            }
            commands::evaluate(&cfg)
        }
        Command::Report { input, window } => commands::report(&cfg, input, window),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
