//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::time::{Duration, Instant};

use rand::Rng;

use hexplain::baselines::{growing_spheres_explain, GrowConfig, GrowOutcome};
use hexplain::classifiers::{train_classifier, ClassifierConfig};
use hexplain::dataset::{smote_oversample, synth_boundary};
use hexplain::densenet::LayerShape;
use hexplain::drl::{
    check_degeneracy_implication, explain, selective_insert, synthesize_policy_with_observer, ActorCriticPolicy, Algorithm,
    Experience, LearningCurve, ReplayBuffer, ScalarSetup, SelectiveWindow, TrainConfig, CURVE_WINDOW,
};
use hexplain::mdp::{disagreement_score, project, reward};
use hexplain::{seed, Activation, BoundaryKind, Classifier, ClassifierModel, Dataset, DeciderProfile, DenseNet, ModelKind, RewardConfig, SplitSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    out.detail.push_str(&format!("; {:.2}s", elapsed.as_secs_f64()));
    if let Some(limit) = limit {
        if elapsed > limit {
            out.pass = false;
            out.detail.push_str(&format!(" exceeds {}s", limit.as_secs()));
        }
    }
    out
}

// ---------------------------------------------------------------- 1

fn gradient_fidelity() -> Outcome {
    let acts = [Activation::Tanh, Activation::Sigmoid, Activation::Relu, Activation::Identity];
    let mut worst = 0.0f64;
    let nets = 24;
    for n in 0..nets {
        let mut rng = seed::stream_indexed(1, "net", n);
        let depth = rng.random_range(1..=3);
        let mut dims = vec![rng.random_range(1..=4)];
        for _ in 0..depth {
            dims.push(rng.random_range(1..=5));
        }
        let shapes: Vec<LayerShape> = dims
            .windows(2)
            .map(|w| LayerShape::new(w[0], w[1], acts[rng.random_range(0..acts.len())]))
            .collect();
        let mut net = DenseNet::random(shapes, &mut rng).unwrap();
        let input: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out_grad: Vec<f64> = (0..net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (grads, input_grad) = net.backward(&input, &out_grad).unwrap();

        let objective = |net: &DenseNet, input: &[f64]| -> f64 {
            net.forward(input).unwrap().iter().zip(&out_grad).map(|(o, g)| o * g).sum()
        };
        let h = 1e-6;
        let mut compare = |analytic: f64, numeric: f64| {
            let scale = analytic.abs().max(numeric.abs());
            // both near zero: compare absolutely
            let err = if scale < 1e-6 { (analytic - numeric).abs() } else { (analytic - numeric).abs() / scale };
            worst = worst.max(err);
        };
        for i in 0..net.num_params() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = objective(&net, &input);
            net.params_mut()[i] = orig - h;
            let down = objective(&net, &input);
            net.params_mut()[i] = orig;
            compare(grads[i], (up - down) / (2.0 * h));
        }
        for j in 0..input.len() {
            let mut shifted = input.clone();
            shifted[j] += h;
            let up = objective(&net, &shifted);
            shifted[j] -= 2.0 * h;
            let down = objective(&net, &shifted);
            compare(input_grad[j], (up - down) / (2.0 * h));
        }
    }
    Outcome {
        pass: worst <= 1e-4,
        detail: format!("{nets} nets, worst relative error {worst:.2e}"),
    }
}

// ---------------------------------------------------------------- 2

fn projection_exactness() -> Outcome {
    let mut rng = seed::stream(2, "fuzz");
    let mut violations = 0;
    let trials = 10_000;
    for _ in 0..trials {
        let p = rng.random_range(2..=12);
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..=1.0)).collect();
        let z: Vec<f64> = (0..p)
            .map(|_| match rng.random_range(0..10) {
                0 => f64::NAN,
                1 => rng.random_range(-50.0..50.0),
                _ => rng.random_range(-1.5..1.5),
            })
            .collect();
        let uap = rng.random_range(0.05..0.95);
        let profile = DeciderProfile::random(p, uap, &mut rng).unwrap();
        let projected = project(&z, &x, Some(&profile));
        let in_box = x.iter().zip(&projected).all(|(a, b)| (0.0..=1.0).contains(&(a + b)));
        if !in_box || disagreement_score(&projected, &profile) != 0 {
            violations += 1;
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{trials} fuzzed triples, {violations} violations"),
    }
}

// ---------------------------------------------------------------- 3

fn reward_oracle() -> Outcome {
    let mut rng = seed::stream(3, "pairs");
    let mut worst = 0.0f64;
    let pairs = 1000;
    for _ in 0..pairs {
        let p = rng.random_range(1..=8);
        let w: Vec<f64> = (0..p).map(|_| rng.random_range(-6.0..6.0)).collect();
        let b = rng.random_range(-3.0..3.0);
        let model = ClassifierModel::logistic(w.clone(), b).unwrap();
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..=1.0)).collect();
        let z: Vec<f64> = x
            .iter()
            .map(|&v| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-v..=1.0 - v) })
            .collect();
        let got = reward(&x, &z, &model, &RewardConfig::default()).unwrap();

        // straight-line evaluation with α = 4, β = 10, ε = ±0.01, ω = 0.5
        let f = |v: &[f64]| {
            let mut s = b;
            for j in 0..p {
                s += w[j] * v[j];
            }
            1.0 / (1.0 + (-s).exp())
        };
        let mut x_next = Vec::new();
        for j in 0..p {
            x_next.push(x[j] + z[j]);
        }
        let f_now = f(&x);
        let f_next = f(&x_next);
        let class_now = if f_now < 0.5 { 0.0 } else { 1.0 };
        let class_next = if f_next < 0.5 { 0.0 } else { 1.0 };
        let eps = if class_now == 0.0 { 0.01 } else { -0.01 };
        let mut l2 = 0.0;
        let mut l0 = 0.0;
        for &v in &z {
            l2 += v * v;
            if v != 0.0 {
                l0 += 1.0;
            }
        }
        let expected = -4.0 * (f_next - (0.5 + eps)) * (f_next - (0.5 + eps))
            + 10.0 * (class_next - class_now) * (class_next - class_now)
            - l2.sqrt()
            - l0 / p as f64;
        worst = worst.max((got - expected).abs());
    }
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("{pairs} pairs, max |difference| {worst:.2e}"),
    }
}

// ---------------------------------------------------------------- 4, 5, 6, 9, 10 share one environment

const SEEDS: [u64; 3] = [0, 1, 2];
const TEST_INSTANCES: usize = 50;

struct Environment {
    model: ClassifierModel,
    train: Dataset,
    test: Dataset,
}

fn environment() -> Environment {
    let data = synth_boundary(BoundaryKind::Linear, 400, 2, 0).unwrap();
    let (train, validation, test) = data.split(&SplitSpec::new(0)).unwrap();
    let model = train_classifier(ModelKind::LogisticRegression, &train, &validation, &ClassifierConfig::default()).unwrap();
    Environment { model, train, test }
}

fn learning_config(hex: bool, seed: u64) -> TrainConfig {
    let mut cfg = if hex {
        TrainConfig::hex(Algorithm::Td3)
    } else {
        TrainConfig::plain(Algorithm::Td3)
    };
    cfg.episodes = 200;
    cfg.inner_iterations = 50;
    cfg.policy.tau = 0.05;
    cfg.seed = seed;
    cfg
}

struct Run {
    policy: ActorCriticPolicy,
    curve: LearningCurve,
    /// Batches checked for the twin-critic minimum, and how many broke it.
    td3_batches: usize,
    td3_violations: usize,
}

fn run(env: &Environment, cfg: &TrainConfig) -> Run {
    let mut td3_batches = 0;
    let mut td3_violations = 0;
    let (policy, curve) = synthesize_policy_with_observer(&env.model, &env.train, cfg, |event| {
        td3_batches += 1;
        let broken = event.targets.combined.iter().enumerate().any(|(i, y)| {
            event.targets.per_critic.iter().any(|single| *y > single[i])
        });
        if broken {
            td3_violations += 1;
        }
    })
    .unwrap();
    Run {
        policy,
        curve,
        td3_batches,
        td3_violations,
    }
}

fn mean_dbd(env: &Environment, policy: &ActorCriticPolicy) -> f64 {
    let n = TEST_INSTANCES.min(env.test.len());
    (0..n)
        .map(|i| {
            let e = explain(policy, &env.test.features[i], &env.model).unwrap();
            hexplain::dbd(&env.model, &e.x_prime).unwrap()
        })
        .sum::<f64>()
        / n as f64
}

fn random_action_dbd(env: &Environment) -> f64 {
    let mut rng = seed::stream(4, "random-actions");
    let n = TEST_INSTANCES.min(env.test.len());
    (0..n)
        .map(|i| {
            let x = &env.test.features[i];
            let x_prime: Vec<f64> = x.iter().map(|&v| v + rng.random_range(-v..=1.0 - v)).collect();
            hexplain::dbd(&env.model, &x_prime).unwrap()
        })
        .sum::<f64>()
        / n as f64
}

fn learning(env: &Environment, hex_runs: &[Run]) -> Outcome {
    let mut improved = 0;
    let mut details = Vec::new();
    let mut dbd_sum = 0.0;
    for (seed, r) in SEEDS.iter().zip(hex_runs) {
        let (first, last) = r.curve.first_and_last_window(CURVE_WINDOW);
        if last > first {
            improved += 1;
        }
        let d = mean_dbd(env, &r.policy);
        dbd_sum += d;
        details.push(format!("seed {seed}: window {first:.3} -> {last:.3}, DBD {d:.3}"));
    }
    let dbd = dbd_sum / hex_runs.len() as f64;
    let random = random_action_dbd(env);
    let pass = improved == SEEDS.len() && dbd <= 0.20 && dbd <= 0.5 * random;
    Outcome {
        pass,
        detail: format!(
            "(a) {improved}/{} improved; (b) mean DBD {dbd:.3} vs random {random:.3} [{}]",
            SEEDS.len(),
            details.join("; ")
        ),
    }
}

fn td3_minimum(hex_runs: &[Run]) -> Outcome {
    let batches: usize = hex_runs.iter().map(|r| r.td3_batches).sum();
    let violations: usize = hex_runs.iter().map(|r| r.td3_violations).sum();
    Outcome {
        pass: violations == 0 && batches > 0,
        detail: format!("{batches} batches, {violations} with a target above a single-critic target"),
    }
}

fn selective_trace(w: usize, rewards: &[f64]) -> Vec<f64> {
    let mut buffer = ReplayBuffer::new(64).unwrap();
    let mut tracker = SelectiveWindow::new(w).unwrap();
    for &r in rewards {
        let e = Experience {
            x: vec![0.5],
            z: vec![0.0],
            reward: r,
            x_next: vec![0.5],
        };
        selective_insert(&mut buffer, e, &mut tracker);
    }
    buffer.entries().iter().map(|e| e.reward).collect()
}

fn selective_buffering(hex_runs: &[Run], plain_runs: &[Run]) -> Outcome {
    let script = [1.0, 5.0, 2.0, -1.0, -2.0, -3.0, 0.5, 4.0, 4.0, 7.0, -6.0, 3.0, 2.5, 9.0, 1.0];
    let mut trace_failures = Vec::new();
    for w in [1, 3, 5] {
        let expected: Vec<f64> = script
            .chunks_exact(w)
            .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        if selective_trace(w, &script) != expected {
            trace_failures.push(w);
        }
    }
    let bad_window = selective_trace(3, &[-1.0, -2.0, -3.0]) == vec![-1.0];
    let mut wins = 0;
    let mut details = Vec::new();
    for (seed, (h, p)) in SEEDS.iter().zip(hex_runs.iter().zip(plain_runs)) {
        let (_, hex_last) = h.curve.first_and_last_window(CURVE_WINDOW);
        let (_, plain_last) = p.curve.first_and_last_window(CURVE_WINDOW);
        if hex_last >= plain_last {
            wins += 1;
        }
        details.push(format!("seed {seed}: {hex_last:.3} vs {plain_last:.3}"));
    }
    Outcome {
        pass: trace_failures.is_empty() && bad_window && wins >= 2,
        detail: format!(
            "traces w=1,3,5 {}; HEX >= plain in {wins}/{} seeds [{}]",
            if trace_failures.is_empty() && bad_window { "exact" } else { "WRONG" },
            SEEDS.len(),
            details.join("; ")
        ),
    }
}

// ---------------------------------------------------------------- 7

fn degeneracy() -> Outcome {
    let mut rng = seed::stream(7, "fixtures");
    let setups: Vec<ScalarSetup> = (0..20).map(|_| ScalarSetup::random(&mut rng, 40, 0.1)).collect();
    let report = check_degeneracy_implication(&setups, 201).unwrap();
    Outcome {
        pass: report.degenerate_buffers() == 20 && report.violations() == 0,
        detail: format!(
            "{} of 20 fixtures buffer-degenerate, {} violations",
            report.degenerate_buffers(),
            report.violations()
        ),
    }
}

// ---------------------------------------------------------------- 8

fn smote() -> Outcome {
    let mut rng = seed::stream(8, "points");
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for i in 0..13 {
        features.push(vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]);
        labels.push(u8::from(i >= 10));
    }
    let data = Dataset::with_default_names(features, labels).unwrap();
    let out = smote_oversample(&data, 5, 8).unwrap();
    let minority: Vec<&Vec<f64>> = (0..data.len()).filter(|&i| data.labels[i] == 1).map(|i| &data.features[i]).collect();
    let originals_kept = out.features[..data.len()] == data.features[..];
    let synthetic = &out.features[data.len()..];
    let synthetic_labels_ok = out.labels[data.len()..].iter().all(|&l| l == 1);
    let on_segment = |s: &[f64]| {
        minority.iter().any(|a| {
            minority.iter().any(|b| {
                let d: Vec<f64> = a.iter().zip(b.iter()).map(|(u, v)| v - u).collect();
                let dd: f64 = d.iter().map(|v| v * v).sum();
                let t = if dd == 0.0 {
                    0.0
                } else {
                    s.iter().zip(a.iter()).zip(&d).map(|((s, a), d)| (s - a) * d).sum::<f64>() / dd
                };
                (-1e-9..=1.0 + 1e-9).contains(&t)
                    && s.iter().zip(a.iter()).zip(&d).all(|((s, a), d)| (s - (a + t * d)).abs() <= 1e-9)
            })
        })
    };
    let convex = synthetic.iter().filter(|s| on_segment(s)).count();
    let counts = out.class_counts();
    Outcome {
        pass: counts == [10, 10] && originals_kept && synthetic_labels_ok && convex == synthetic.len(),
        detail: format!("counts {counts:?}, {convex}/{} synthetic rows on a minority segment", synthetic.len()),
    }
}

// ---------------------------------------------------------------- 9

fn growing_spheres(env: &Environment) -> Outcome {
    let mut found = 0;
    let mut flipped = 0;
    for (i, x) in env.test.features.iter().enumerate() {
        let cfg = GrowConfig {
            seed: i as u64,
            ..GrowConfig::default()
        };
        if let GrowOutcome::Found(e) = growing_spheres_explain(&env.model, x, &cfg).unwrap() {
            found += 1;
            if env.model.classify(&e.x_prime).unwrap() != env.model.classify(x).unwrap() {
                flipped += 1;
            }
        }
    }
    let constant = ClassifierModel::constant(2, 0.8);
    let not_found = growing_spheres_explain(&constant, &[0.4, 0.6], &GrowConfig::default()).unwrap() == GrowOutcome::NotFound;
    Outcome {
        pass: found > 0 && flipped == found && not_found,
        detail: format!(
            "{flipped}/{found} returned explanations flip the class ({} instances); constant classifier {}",
            env.test.len(),
            if not_found { "not found" } else { "FOUND" }
        ),
    }
}

// ---------------------------------------------------------------- 10

fn determinism(env: &Environment, first: &Run) -> Outcome {
    let again = run(env, &learning_config(true, SEEDS[0]));
    let dir = tempfile::tempdir().unwrap();
    let files = |r: &Run, tag: &str| {
        let curve = dir.path().join(format!("curve-{tag}.csv"));
        let policy = dir.path().join(format!("policy-{tag}.json"));
        r.curve.write_csv(&curve, CURVE_WINDOW).unwrap();
        r.policy.save(&policy).unwrap();
        (std::fs::read(curve).unwrap(), std::fs::read(policy).unwrap())
    };
    let (c1, p1) = files(first, "a");
    let (c2, p2) = files(&again, "b");
    Outcome {
        pass: c1 == c2 && p1 == p2,
        detail: format!(
            "learning curve CSV {}, policy file {}",
            if c1 == c2 { "identical" } else { "DIFFERS" },
            if p1 == p2 { "identical" } else { "DIFFERS" }
        ),
    }
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "gradient fidelity", timed(Some(Duration::from_secs(10)), gradient_fidelity)));
    results.push((2, "projection and 0-distrust exactness", timed(Some(Duration::from_secs(5)), projection_exactness)));
    results.push((3, "reward oracle", timed(Some(Duration::from_secs(5)), reward_oracle)));

    let env = environment();
    let start = Instant::now();
    let hex_runs: Vec<Run> = SEEDS.iter().map(|&s| run(&env, &learning_config(true, s))).collect();
    let hex_time = start.elapsed();
    results.push((
        4,
        "learning at desk scale",
        timed(Some(Duration::from_secs(300).saturating_sub(hex_time)), || learning(&env, &hex_runs)),
    ));
    results.push((5, "TD3 minimum target", timed(None, || td3_minimum(&hex_runs))));
    let plain_runs: Vec<Run> = SEEDS.iter().map(|&s| run(&env, &learning_config(false, s))).collect();
    results.push((6, "selective buffering", timed(None, || selective_buffering(&hex_runs, &plain_runs))));
    results.push((7, "degeneracy implication", timed(Some(Duration::from_secs(30)), degeneracy)));
    results.push((8, "SMOTE", timed(Some(Duration::from_secs(1)), smote)));
    results.push((9, "Growing Spheres", timed(Some(Duration::from_secs(30)), || growing_spheres(&env))));
    results.push((10, "determinism", timed(None, || determinism(&env, &hex_runs[0]))));

    println!();
    println!("training: 3 HEX-TD3 runs in {:.2}s", hex_time.as_secs_f64());
    let mut failed = 0;
    for (n, name, out) in &results {
        println!("criterion {n:>2} {}: {name}: {}", if out.pass { "PASS" } else { "FAIL" }, out.detail);
        if !out.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
