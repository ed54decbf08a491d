//! The randomized trial protocol: sample (task, hardware) contexts, run
//! every selector, score against ground truth.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{acceleration_ratio, macro_f1, mean_rank, selection_accuracy, TrialOutcome};
use super::synth::{generate_synthetic, SynthData, SynthSpec};
use crate::domain::{Budget, HardwareProfile, PerformanceTensor, TaskProfile};
use crate::embedding::{Embedder, EmbeddingProviderSpec, EmbeddingSpace, PromptStyle};
use crate::error::{Error, Result};
use crate::selection::select;
use crate::selectors::{fit, oracle, FittedSelector, MethodRanker, OracleTruth, SelectorKind, SelectorSpec, TrainingData};

/// Contexts to evaluate on, with their noiseless runtimes.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub tasks: Vec<TaskProfile>,
    pub hardware: Vec<HardwareProfile>,
    /// Axes aligned with `tasks` and `hardware`.
    pub truth: PerformanceTensor,
    /// Either `unseen` (held-out tasks) or `seen` (training tasks).
    pub label: String,
}

impl EvalSet {
    pub fn held_out(data: &SynthData) -> Self {
        EvalSet {
            tasks: data.eval_tasks.clone(),
            hardware: data.hardware.clone(),
            truth: data.eval_truth.clone(),
            label: "unseen".into(),
        }
    }

    pub fn training(data: &SynthData) -> Result<Self> {
        let tasks = data
            .train_truth
            .tasks()
            .iter()
            .map(|id| data.store.task(id).cloned().ok_or_else(|| Error::UnknownId { kind: "task", id: id.clone() }))
            .collect::<Result<_>>()?;
        Ok(EvalSet {
            tasks,
            hardware: data.hardware.clone(),
            truth: data.train_truth.clone(),
            label: "seen".into(),
        })
    }
}

/// Uniformly sampled `(task index, hardware index)` pairs.
pub fn sample_trials(n_tasks: usize, n_hardware: usize, trials: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| (rng.random_range(0..n_tasks), rng.random_range(0..n_hardware)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorMetrics {
    pub accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    pub acceleration_ratio: Option<f64>,
    pub mean_rank: Option<f64>,
    pub n_trials: usize,
    pub failures: usize,
    /// Whether trials used held-out (`unseen`) or training (`seen`) tasks.
    pub evaluated_on: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failure_examples: Vec<String>,
}

/// Everything produced by one protocol run for one selector.
#[derive(Debug, Clone)]
pub struct SelectorRun {
    pub metrics: SelectorMetrics,
    pub outcomes: Vec<TrialOutcome>,
    pub fit_seconds: f64,
    pub select_seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ProtocolReport {
    pub runs: BTreeMap<String, SelectorRun>,
}

impl ProtocolReport {
    /// The deterministic JSON report: selector → metrics.
    pub fn metrics(&self) -> BTreeMap<String, SelectorMetrics> {
        self.runs.iter().map(|(k, v)| (k.clone(), v.metrics.clone())).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.metrics())?)
    }

    pub fn get(&self, name: &str) -> Option<&SelectorMetrics> {
        self.runs.get(name).map(|r| &r.metrics)
    }

    /// Rank histogram: `selector,rank,count,fraction`.
    pub fn write_rank_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["selector", "rank", "count", "fraction"])?;
        for (name, run) in &self.runs {
            let m = run.outcomes.first().map_or(0, |o| o.predicted_ranking.len());
            let mut hist = vec![0usize; m + 1];
            for o in &run.outcomes {
                hist[o.rank_of_true_best()?] += 1;
            }
            let n = run.outcomes.len().max(1) as f64;
            for (rank, count) in hist.iter().enumerate().skip(1) {
                out.write_record([name.clone(), rank.to_string(), count.to_string(), format!("{:.6}", *count as f64 / n)])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Accuracy versus cost: `selector,accuracy,acceleration_ratio,mean_rank,fit_seconds,select_ms_per_trial`.
    pub fn write_tradeoff_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["selector", "accuracy", "acceleration_ratio", "mean_rank", "fit_seconds", "select_ms_per_trial"])?;
        let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
        for (name, run) in &self.runs {
            let per_trial = 1e3 * run.select_seconds / run.metrics.n_trials.max(1) as f64;
            out.write_record([
                name.clone(),
                fmt(run.metrics.accuracy),
                fmt(run.metrics.acceleration_ratio),
                fmt(run.metrics.mean_rank),
                format!("{:.6}", run.fit_seconds),
                format!("{per_trial:.6}"),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs every contender on the sampled trials. Per-trial failures are
/// counted and excluded from the means.
pub fn run_protocol(
    contenders: &[(String, &dyn MethodRanker, f64)],
    set: &EvalSet,
    trials: &[(usize, usize)],
    budget: Budget,
) -> Result<ProtocolReport> {
    let methods = set.truth.methods().to_vec();
    let mut report = ProtocolReport::default();
    for (name, ranker, fit_seconds) in contenders {
        let mut outcomes = Vec::with_capacity(trials.len());
        let mut failures = Vec::new();
        let start = Instant::now();
        for &(ti, hi) in trials {
            let task = &set.tasks[ti];
            let hw = &set.hardware[hi];
            let truth: Vec<_> = methods
                .iter()
                .enumerate()
                .filter_map(|(j, m)| set.truth.get(ti, j, hi).map(|v| (*m, v)))
                .collect();
            let outcome = select(*ranker, task, hw, budget)
                .and_then(|r| TrialOutcome::new(&task.id, &hw.id, r.method, &r.ranking, truth));
            match outcome {
                Ok(o) => outcomes.push(o),
                Err(e) => failures.push(format!("{} on {}: {e}", task.id, hw.id)),
            }
        }
        let select_seconds = start.elapsed().as_secs_f64();
        let some = |r: Result<f64>| r.ok();
        let metrics = SelectorMetrics {
            accuracy: some(selection_accuracy(&outcomes)),
            macro_f1: some(macro_f1(&outcomes)),
            acceleration_ratio: some(acceleration_ratio(&outcomes)),
            mean_rank: some(mean_rank(&outcomes)),
            n_trials: trials.len(),
            failures: failures.len(),
            evaluated_on: set.label.clone(),
            failure_examples: failures.iter().take(3).cloned().collect(),
        };
        if !failures.is_empty() {
            log::warn!("{name}: {} of {} trials failed (first: {})", failures.len(), trials.len(), failures[0]);
        }
        report.runs.insert(
            name.clone(),
            SelectorRun {
                metrics,
                outcomes,
                fit_seconds: *fit_seconds,
                select_seconds,
            },
        );
    }
    Ok(report)
}

/// End-to-end evaluation on calibrated synthetic data.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub synth: SynthSpec,
    pub provider: EmbeddingProviderSpec,
    pub style: PromptStyle,
    pub rank: usize,
    pub selectors: Vec<SelectorSpec>,
    pub include_oracle: bool,
    pub trials: usize,
    pub trial_seed: u64,
    pub budget: Budget,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            synth: SynthSpec::default(),
            provider: EmbeddingProviderSpec::default(),
            style: PromptStyle::Rich,
            rank: 64,
            selectors: SelectorKind::COMPARED
                .iter()
                .map(|k| SelectorSpec::default_for(*k).expect("learned kinds have defaults"))
                .collect(),
            include_oracle: true,
            trials: 1000,
            trial_seed: 7,
            budget: Budget::unlimited(),
        }
    }
}

/// Fitted selectors for one embedding configuration, keyed by name.
pub struct FittedSet {
    pub space: EmbeddingSpace,
    pub selectors: Vec<(String, FittedSelector, f64)>,
}

pub fn fit_selectors(
    data: &SynthData,
    specs: &[SelectorSpec],
    include_oracle: Option<&SynthSpec>,
    style: PromptStyle,
    rank: usize,
    embedder: Arc<Embedder>,
) -> Result<FittedSet> {
    let training = TrainingData::from_store(&data.store)?;
    let space = training.fit_space(style, rank, embedder)?;
    let mut selectors = Vec::new();
    for spec in specs {
        let start = Instant::now();
        let sel = fit(spec, &training, &space)?;
        selectors.push((spec.kind().to_string(), sel, start.elapsed().as_secs_f64()));
    }
    if let Some(synth) = include_oracle {
        selectors.push((
            SelectorKind::Oracle.to_string(),
            oracle(OracleTruth::Synthetic(synth.clone()), training.tensor.methods().to_vec()),
            0.0,
        ));
    }
    Ok(FittedSet { space, selectors })
}

/// Evaluation set for a style: one-hot cannot embed held-out tasks, so its
/// arm is scored on training tasks.
pub fn eval_set_for(data: &SynthData, style: PromptStyle) -> Result<EvalSet> {
    if style == PromptStyle::OneHot {
        EvalSet::training(data)
    } else {
        Ok(EvalSet::held_out(data))
    }
}

pub fn evaluate_fitted(fitted: &FittedSet, set: &EvalSet, trials: &[(usize, usize)], budget: Budget) -> Result<ProtocolReport> {
    let contenders: Vec<(String, &dyn MethodRanker, f64)> = fitted
        .selectors
        .iter()
        .map(|(n, s, t)| (n.clone(), s as &dyn MethodRanker, *t))
        .collect();
    run_protocol(&contenders, set, trials, budget)
}

pub fn evaluate_synthetic(cfg: &EvalConfig) -> Result<ProtocolReport> {
    let data = generate_synthetic(&cfg.synth)?;
    let embedder = Arc::new(Embedder::new(cfg.provider.clone())?);
    let fitted = fit_selectors(
        &data,
        &cfg.selectors,
        cfg.include_oracle.then_some(&cfg.synth),
        cfg.style,
        cfg.rank,
        embedder,
    )?;
    let set = eval_set_for(&data, cfg.style)?;
    let trials = sample_trials(set.tasks.len(), set.hardware.len(), cfg.trials, cfg.trial_seed);
    evaluate_fitted(&fitted, &set, &trials, cfg.budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{MethodConfig, RankedMethod};
    use crate::selectors::rank_scores;

    fn tiny_set() -> EvalSet {
        let tasks: Vec<TaskProfile> = (0..4)
            .map(|i| TaskProfile {
                id: format!("t{i}"),
                description: "d".into(),
                batch_size: 16,
                prompt_count: 1,
                source_tag: "s".into(),
                model: "m".into(),
            })
            .collect();
        let hw = vec![HardwareProfile {
            id: "h".into(),
            gpu_class: "L4".into(),
            gpu_count: 1,
            memory_gb: 24.0,
            price_per_hour: 1.0,
            description: "h".into(),
        }];
        let methods = MethodConfig::NAMED.to_vec();
        let mut truth = PerformanceTensor::new(tasks.iter().map(|t| t.id.clone()).collect(), methods.clone(), vec!["h".into()]);
        for i in 0..4 {
            for j in 0..methods.len() {
                truth.set(i, j, 0, Some(1.0 + ((i * 3 + j * 7) % 5) as f64)).unwrap();
            }
        }
        EvalSet {
            tasks,
            hardware: hw,
            truth,
            label: "unseen".into(),
        }
    }

    #[test]
    fn oracle_scores_perfectly() {
        let set = tiny_set();
        let truth = set.truth.clone();
        let oracle = oracle(OracleTruth::Tensor(truth.clone()), truth.methods().to_vec());
        let trials = sample_trials(4, 1, 10_000, 3);
        let report = run_protocol(&[("oracle".into(), &oracle, 0.0)], &set, &trials, Budget::unlimited()).unwrap();
        let m = report.get("oracle").unwrap();
        assert_eq!(m.accuracy, Some(1.0));
        assert_eq!(m.mean_rank, Some(1.0));
        let expected: f64 = trials
            .iter()
            .map(|&(i, _)| {
                let row: Vec<f64> = (0..5).map(|j| truth.get(i, j, 0).unwrap()).collect();
                row.iter().sum::<f64>() / 5.0 / row.iter().cloned().fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / trials.len() as f64;
        assert!((m.acceleration_ratio.unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn uniform_random_selector_accuracy() {
        let set = tiny_set();
        let counter = std::cell::Cell::new(0u64);
        let ranker = |_: &TaskProfile, _: &HardwareProfile| -> Result<Vec<RankedMethod>> {
            let mut rng = ChaCha8Rng::seed_from_u64(counter.get());
            counter.set(counter.get() + 1);
            Ok(rank_scores(MethodConfig::NAMED.iter().map(|m| (*m, rng.random::<f64>()))))
        };
        let trials = sample_trials(4, 1, 10_000, 11);
        let report = run_protocol(&[("random".into(), &ranker, 0.0)], &set, &trials, Budget::unlimited()).unwrap();
        let acc = report.get("random").unwrap().accuracy.unwrap();
        assert!((acc - 0.2).abs() <= 0.02, "{acc}");
    }

    #[test]
    fn failures_are_counted() {
        let set = tiny_set();
        let failing = |_: &TaskProfile, _: &HardwareProfile| -> Result<Vec<RankedMethod>> {
            Err(Error::UnknownId {
                kind: "task",
                id: "x".into(),
            })
        };
        let trials = sample_trials(4, 1, 5, 0);
        let report = run_protocol(&[("f".into(), &failing, 0.0)], &set, &trials, Budget::unlimited()).unwrap();
        let m = report.get("f").unwrap();
        assert_eq!((m.failures, m.accuracy), (5, None));
    }

    #[test]
    fn csv_headers() {
        let set = tiny_set();
        let oracle = oracle(OracleTruth::Tensor(set.truth.clone()), set.truth.methods().to_vec());
        let trials = sample_trials(4, 1, 20, 0);
        let report = run_protocol(&[("oracle".into(), &oracle, 0.0)], &set, &trials, Budget::unlimited()).unwrap();
        let mut buf = Vec::new();
        report.write_rank_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("selector,rank,count,fraction\noracle,1,20,1.000000\n"), "{text}");
        let mut buf = Vec::new();
        report.write_tradeoff_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("selector,accuracy,acceleration_ratio"));
    }
}
