//! Calibrated synthetic runtime generator.
//!
//! The noiseless runtime of a (task, method, hardware) triple factors as
//!
//! ```text
//! none(batch) · model_scale · corpus_scale · effect(method, batch)
//!     · affinity(model, method) · corpus_pc(method) · hw(hardware, method)
//! ```
//!
//! with method effects interpolated piecewise-linearly in
//! (log2 batch, ln multiplier). Measured records average `repeats` noisy
//! runs with multiplicative Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{HardwareProfile, MethodConfig, PerformanceRecord, PerformanceTensor, TaskProfile};
use crate::error::{Error, Result};
use crate::perfdb::RecordStore;

/// Reference-hardware latencies (seconds) of one served model on a chat
/// corpus at batch sizes 16 and 256, per method.
pub const ANCHOR_BATCHES: [u32; 2] = [16, 256];
pub const ANCHOR_NONE: [f64; 2] = [1435.27, 1424.99];
pub const ANCHOR_CHUNKED_PREFILL: [f64; 2] = [128.70, 114.44];
pub const ANCHOR_CONTINUOUS_BATCHING: [f64; 2] = [146.44, 107.40];
pub const ANCHOR_PREFIX_CACHING: [f64; 2] = [101.10, 68.46];
pub const ANCHOR_ALL: [f64; 2] = [96.21, 80.65];

/// Improvement over continuous batching at batch 1024, in percent, for
/// (chunked prefill, prefix caching, all) per model family. Negative values
/// are slowdowns.
pub const LARGE_BATCH_GAINS: [(&str, [f64; 3]); 4] = [
    ("baichuan", [3.82, 37.63, 7.96]),
    ("qwen", [4.15, -10.66, -7.20]),
    ("phi", [-0.90, -56.79, -11.39]),
    ("llama", [5.40, -4.03, 0.33]),
];

/// Mean 8-GPU / 4-GPU runtime ratio used to fit the GPU-count exponent.
pub const EIGHT_OVER_FOUR_GPU_RATIO: f64 = 0.96777;

/// Run-to-run standard deviation as a fraction of runtime, per method, and
/// their mean.
pub const NOISE_CHUNKED_PREFILL: f64 = 0.0444;
pub const NOISE_CONTINUOUS_BATCHING: f64 = 0.1106;
pub const NOISE_PREFIX_CACHING: f64 = 0.1530;
pub const NOISE_ALL: f64 = 0.0715;
pub const NOISE_MEAN: f64 = 0.0949;

const GPU_OVERHEAD: f64 = 0.02;
const REFERENCE_GPUS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    /// `(batch, value)` anchors with strictly increasing batch.
    pub points: Vec<(u32, f64)>,
}

impl Curve {
    pub fn constant(v: f64) -> Self {
        Curve { points: vec![(1, v)] }
    }

    /// Piecewise-linear in (log2 batch, ln value), extended linearly past
    /// both ends.
    pub fn eval(&self, batch: u32) -> f64 {
        let p = &self.points;
        if p.len() == 1 {
            return p[0].1;
        }
        let x = (batch as f64).log2();
        // Interior anchors strictly below `x`, clamped to the end segments.
        let below = p[1..p.len() - 1].iter().filter(|&&(b, _)| (b as f64).log2() < x).count();
        let seg = below.min(p.len() - 2);
        let (b0, v0) = p[seg];
        let (b1, v1) = p[seg + 1];
        let (x0, x1) = ((b0 as f64).log2(), (b1 as f64).log2());
        let t = (x - x0) / (x1 - x0);
        (v0.ln() + t * (v1.ln() - v0.ln())).exp()
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::invalid(format!("{what}: empty curve")));
        }
        if self.points.iter().any(|&(b, v)| b == 0 || !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("{what}: curve values and batches must be positive")));
        }
        if self.points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid(format!("{what}: batches must increase strictly")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEffect {
    pub method: MethodConfig,
    /// Runtime multiplier relative to no acceleration.
    pub curve: Curve,
    /// Relative weight of this method's run-to-run noise.
    pub noise_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFamily {
    pub key: String,
    /// Name reported in task profiles.
    pub name: String,
    pub base_scale: f64,
    /// Per-method multipliers; methods not listed use 1.
    pub affinity: Vec<(MethodConfig, f64)>,
}

impl ModelFamily {
    fn affinity(&self, m: MethodConfig) -> f64 {
        self.affinity.iter().find(|(k, _)| *k == m).map_or(1.0, |(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub tag: String,
    pub description: String,
    pub scale: f64,
    /// Extra multiplier for any method with prefix caching enabled.
    pub prefix_factor: f64,
    pub prompt_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareClass {
    pub gpu_class: String,
    pub gpu_count: u32,
    pub memory_gb: f64,
    /// Runtime multiplier relative to the reference device.
    pub speed: f64,
    pub price_per_hour: f64,
}

impl HardwareClass {
    pub fn profile(&self) -> HardwareProfile {
        HardwareProfile {
            id: HardwareProfile::canonical_id(&self.gpu_class, self.gpu_count),
            gpu_class: self.gpu_class.clone(),
            gpu_count: self.gpu_count,
            memory_gb: self.memory_gb,
            price_per_hour: self.price_per_hour,
            description: format!("{} NVIDIA {} GPUs with {} GB each", self.gpu_count, self.gpu_class, self.memory_gb),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    /// Runtime without acceleration on the reference setup.
    pub none_curve: Curve,
    pub effects: Vec<MethodEffect>,
    pub models: Vec<ModelFamily>,
    pub corpora: Vec<Corpus>,
    pub batch_grid: Vec<u32>,
    pub hardware: Vec<HardwareClass>,
    pub gpu_exponent: f64,
    pub reference_memory_gb: f64,
    /// Prefix-caching slowdown per unit of memory pressure.
    pub prefix_memory_penalty: f64,
    /// Chunked-prefill speedup per unit of memory pressure.
    pub chunked_memory_relief: f64,
    pub noise_fraction: f64,
    pub repeats: usize,
    pub n_train_tasks: usize,
    pub n_eval_tasks: usize,
}

/// GPU-count exponent `e` such that `2^-e · (1 + overhead) = ratio`.
pub fn fit_gpu_exponent(ratio: f64) -> f64 {
    -((ratio / (1.0 + GPU_OVERHEAD)).log2())
}

fn anchor_ratio(values: [f64; 2]) -> Curve {
    Curve {
        points: vec![
            (ANCHOR_BATCHES[0], values[0] / ANCHOR_NONE[0]),
            (ANCHOR_BATCHES[1], values[1] / ANCHOR_NONE[1]),
        ],
    }
}

impl Default for SynthSpec {
    fn default() -> Self {
        let cb = anchor_ratio(ANCHOR_CONTINUOUS_BATCHING);
        let cb_large = cb.eval(1024);
        let llama = LARGE_BATCH_GAINS[3].1;
        let with_large = |values: [f64; 2], gain: f64| {
            let mut c = anchor_ratio(values);
            c.points.push((1024, cb_large * (1.0 - gain / 100.0)));
            c
        };
        let effects = vec![
            MethodEffect {
                method: MethodConfig::NONE,
                curve: Curve::constant(1.0),
                noise_weight: 1.0,
            },
            MethodEffect {
                method: MethodConfig::CHUNKED_PREFILL,
                curve: with_large(ANCHOR_CHUNKED_PREFILL, llama[0]),
                noise_weight: NOISE_CHUNKED_PREFILL / NOISE_MEAN,
            },
            MethodEffect {
                method: MethodConfig::CONTINUOUS_BATCHING,
                curve: cb,
                noise_weight: NOISE_CONTINUOUS_BATCHING / NOISE_MEAN,
            },
            MethodEffect {
                method: MethodConfig::PREFIX_CACHING,
                curve: with_large(ANCHOR_PREFIX_CACHING, llama[1]),
                noise_weight: NOISE_PREFIX_CACHING / NOISE_MEAN,
            },
            MethodEffect {
                method: MethodConfig::ALL,
                curve: with_large(ANCHOR_ALL, llama[2]),
                noise_weight: NOISE_ALL / NOISE_MEAN,
            },
        ];
        // Affinities rescale the reference family's large-batch ratios to
        // each family's own.
        let affinity = |gains: [f64; 3]| {
            [MethodConfig::CHUNKED_PREFILL, MethodConfig::PREFIX_CACHING, MethodConfig::ALL]
                .into_iter()
                .enumerate()
                .map(|(i, m)| (m, (1.0 - gains[i] / 100.0) / (1.0 - llama[i] / 100.0)))
                .collect::<Vec<_>>()
        };
        let family = |key: &str, name: &str, base_scale: f64| {
            let gains = LARGE_BATCH_GAINS.iter().find(|(k, _)| *k == key).expect("known family").1;
            ModelFamily {
                key: key.into(),
                name: name.into(),
                base_scale,
                affinity: if key == "llama" { Vec::new() } else { affinity(gains) },
            }
        };
        SynthSpec {
            seed: 7,
            none_curve: Curve {
                points: vec![(ANCHOR_BATCHES[0], ANCHOR_NONE[0]), (ANCHOR_BATCHES[1], ANCHOR_NONE[1])],
            },
            effects,
            models: vec![
                family("llama", "Meta-Llama-3.1-8B-Instruct", 1.0),
                family("baichuan", "Baichuan2-7B-Chat", 0.9),
                family("qwen", "Qwen2.5-7B-Instruct", 0.95),
                family("phi", "phi-2", 0.42),
            ],
            corpora: vec![
                Corpus {
                    tag: "sharegpt".into(),
                    description: "Multi-turn user and assistant conversations where later turns repeat the \
                                  earlier dialogue as a shared prefix."
                        .into(),
                    scale: 1.0,
                    prefix_factor: 1.0,
                    prompt_count: 1000,
                },
                Corpus {
                    tag: "reasoning-v1-20m".into(),
                    description: "Single-turn reasoning questions answered with long step-by-step generated \
                                  solutions and little prompt overlap."
                        .into(),
                    scale: 1.35,
                    prefix_factor: 1.1,
                    prompt_count: 1000,
                },
            ],
            batch_grid: vec![16, 64, 256, 1024],
            hardware: vec![
                HardwareClass {
                    gpu_class: "T4".into(),
                    gpu_count: 4,
                    memory_gb: 16.0,
                    speed: 2.4,
                    price_per_hour: 1.40,
                },
                HardwareClass {
                    gpu_class: "L4".into(),
                    gpu_count: 4,
                    memory_gb: 24.0,
                    speed: 1.0,
                    price_per_hour: 2.80,
                },
                HardwareClass {
                    gpu_class: "A100".into(),
                    gpu_count: 8,
                    memory_gb: 40.0,
                    speed: 0.42,
                    price_per_hour: 23.20,
                },
            ],
            gpu_exponent: fit_gpu_exponent(EIGHT_OVER_FOUR_GPU_RATIO),
            reference_memory_gb: 24.0,
            prefix_memory_penalty: 0.3,
            chunked_memory_relief: 0.1,
            noise_fraction: NOISE_MEAN,
            repeats: 3,
            n_train_tasks: 200,
            n_eval_tasks: 100,
        }
    }
}

/// One cell of the (model, corpus, batch) grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskKind {
    pub model: usize,
    pub corpus: usize,
    pub batch: usize,
}

/// Output of [`generate_synthetic`].
#[derive(Debug, Clone)]
pub struct SynthData {
    /// Noisy measurements of the training tasks, with task and hardware
    /// profiles.
    pub store: RecordStore,
    /// Noiseless runtimes of the training tasks.
    pub train_truth: PerformanceTensor,
    /// Held-out tasks and their noiseless runtimes.
    pub eval_tasks: Vec<TaskProfile>,
    pub eval_truth: PerformanceTensor,
    pub hardware: Vec<HardwareProfile>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.3).contains(&self.noise_fraction) {
            return Err(Error::invalid(format!("noise_fraction {} outside [0, 0.3]", self.noise_fraction)));
        }
        self.none_curve.validate("none curve")?;
        if self.effects.is_empty() || self.models.is_empty() || self.corpora.is_empty() || self.hardware.is_empty() {
            return Err(Error::invalid("synthetic spec needs methods, models, corpora and hardware"));
        }
        if self.batch_grid.is_empty() || self.batch_grid.contains(&0) {
            return Err(Error::invalid("batch grid must be non-empty and positive"));
        }
        for e in &self.effects {
            e.curve.validate(&format!("effect {}", e.method))?;
            if !(e.noise_weight >= 0.0 && e.noise_weight.is_finite()) {
                return Err(Error::invalid(format!("effect {}: bad noise weight", e.method)));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        if !self.effects.iter().all(|e| seen.insert(e.method)) {
            return Err(Error::invalid("duplicate method effect"));
        }
        for m in &self.models {
            if !(m.base_scale > 0.0 && m.base_scale.is_finite()) || m.affinity.iter().any(|(_, a)| !(*a > 0.0 && a.is_finite())) {
                return Err(Error::invalid(format!("model {}: scales must be positive", m.key)));
            }
        }
        for c in &self.corpora {
            if !(c.scale > 0.0 && c.prefix_factor > 0.0 && c.prompt_count > 0) {
                return Err(Error::invalid(format!("corpus {}: scales must be positive", c.tag)));
            }
        }
        for h in &self.hardware {
            if !(h.speed > 0.0 && h.memory_gb > 0.0 && h.gpu_count > 0 && h.price_per_hour >= 0.0) {
                return Err(Error::invalid(format!("hardware {}: invalid parameters", h.gpu_class)));
            }
        }
        if !self.gpu_exponent.is_finite() || !(self.reference_memory_gb > 0.0) {
            return Err(Error::invalid("gpu exponent and reference memory must be valid"));
        }
        if self.repeats == 0 || self.n_train_tasks == 0 || self.n_eval_tasks == 0 {
            return Err(Error::invalid("repeats and task counts must be >= 1"));
        }
        Ok(())
    }

    pub fn methods(&self) -> Vec<MethodConfig> {
        let mut m: Vec<MethodConfig> = self.effects.iter().map(|e| e.method).collect();
        m.sort();
        m
    }

    pub fn hardware_profiles(&self) -> Vec<HardwareProfile> {
        self.hardware.iter().map(HardwareClass::profile).collect()
    }

    pub fn kinds(&self) -> Vec<TaskKind> {
        let mut out = Vec::new();
        for model in 0..self.models.len() {
            for corpus in 0..self.corpora.len() {
                for batch in 0..self.batch_grid.len() {
                    out.push(TaskKind { model, corpus, batch });
                }
            }
        }
        out
    }

    pub fn task_profile(&self, id: String, kind: TaskKind) -> TaskProfile {
        let corpus = &self.corpora[kind.corpus];
        TaskProfile {
            id,
            description: corpus.description.clone(),
            batch_size: self.batch_grid[kind.batch],
            prompt_count: corpus.prompt_count,
            source_tag: corpus.tag.clone(),
            model: self.models[kind.model].name.clone(),
        }
    }

    fn effect(&self, m: MethodConfig) -> Result<&MethodEffect> {
        self.effects.iter().find(|e| e.method == m).ok_or_else(|| Error::UnknownId {
            kind: "method",
            id: m.to_string(),
        })
    }

    /// Runtime multiplier of the hardware relative to the reference device.
    pub fn hardware_factor(&self, hw: &HardwareProfile, speed: f64, m: MethodConfig) -> f64 {
        let g = hw.gpu_count as f64 / REFERENCE_GPUS;
        let mut f = speed * g.powf(-self.gpu_exponent) * (1.0 + GPU_OVERHEAD * g.log2());
        let pressure = (self.reference_memory_gb / hw.memory_gb - 1.0).max(0.0);
        if m.prefix_caching {
            f *= 1.0 + self.prefix_memory_penalty * pressure;
        }
        if m.chunked_prefill {
            f *= 1.0 - self.chunked_memory_relief * pressure;
        }
        f
    }

    /// Noiseless runtime for a task profile produced by this spec.
    pub fn true_runtime(&self, task: &TaskProfile, method: MethodConfig, hw: &HardwareProfile) -> Result<f64> {
        let model = self.models.iter().find(|m| m.name == task.model).ok_or_else(|| Error::UnknownId {
            kind: "model",
            id: task.model.clone(),
        })?;
        // Callers that only know the description (service requests) match on it.
        let corpus = self
            .corpora
            .iter()
            .find(|c| c.tag == task.source_tag)
            .or_else(|| self.corpora.iter().find(|c| c.description == task.description))
            .ok_or_else(|| Error::UnknownId {
            kind: "corpus",
            id: task.source_tag.clone(),
        })?;
        let speed = self
            .hardware
            .iter()
            .find(|h| h.gpu_class.eq_ignore_ascii_case(&hw.gpu_class))
            .map(|h| h.speed)
            .ok_or_else(|| Error::UnknownId {
                kind: "hardware",
                id: hw.gpu_class.clone(),
            })?;
        let b = task.batch_size;
        let mut r = self.none_curve.eval(b) * model.base_scale * corpus.scale;
        r *= self.effect(method)?.curve.eval(b) * model.affinity(method);
        if method.prefix_caching {
            r *= corpus.prefix_factor;
        }
        Ok(r * self.hardware_factor(hw, speed, method))
    }

    fn truth_tensor(&self, tasks: &[TaskProfile], methods: &[MethodConfig], hw: &[HardwareProfile]) -> Result<PerformanceTensor> {
        let mut t = PerformanceTensor::new(
            tasks.iter().map(|t| t.id.clone()).collect(),
            methods.to_vec(),
            hw.iter().map(|h| h.id.clone()).collect(),
        );
        for (i, task) in tasks.iter().enumerate() {
            for (j, m) in methods.iter().enumerate() {
                for (k, h) in hw.iter().enumerate() {
                    t.set(i, j, k, Some(self.true_runtime(task, *m, h)?))?;
                }
            }
        }
        Ok(t)
    }
}

/// Generates training measurements and a held-out evaluation set.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let kinds = spec.kinds();
    let methods = spec.methods();
    let hardware = spec.hardware_profiles();

    let train_tasks: Vec<TaskProfile> = (0..spec.n_train_tasks)
        .map(|i| spec.task_profile(format!("train-{i:04}"), kinds[i % kinds.len()]))
        .collect();
    let mut kind_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    kind_rng.set_stream(1);
    let eval_tasks: Vec<TaskProfile> = (0..spec.n_eval_tasks)
        .map(|i| spec.task_profile(format!("eval-{i:04}"), kinds[kind_rng.random_range(0..kinds.len())]))
        .collect();

    let train_truth = spec.truth_tensor(&train_tasks, &methods, &hardware)?;
    let eval_truth = spec.truth_tensor(&eval_tasks, &methods, &hardware)?;

    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(2);
    let mut store = RecordStore::new();
    for h in &hardware {
        store.insert_hardware(h.clone())?;
    }
    for t in &train_tasks {
        store.insert_task(t.clone())?;
    }
    for (i, task) in train_tasks.iter().enumerate() {
        for (j, m) in methods.iter().enumerate() {
            let sigma = spec.noise_fraction * spec.effect(*m)?.noise_weight;
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
            for (k, h) in hardware.iter().enumerate() {
                let truth = train_truth.get(i, j, k).expect("truth tensor is complete");
                let runs: Vec<f64> = (0..spec.repeats)
                    // Floor keeps heavy negative draws from producing
                    // non-positive runtimes.
                    .map(|_| truth * (1.0 + normal.sample(&mut noise_rng)).max(0.05))
                    .collect();
                let mean = runs.iter().sum::<f64>() / runs.len() as f64;
                let mut rec = PerformanceRecord::new(task.id.clone(), *m, h.id.clone(), mean);
                if runs.len() > 1 {
                    let var = runs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (runs.len() - 1) as f64;
                    rec.runtime_std_s = Some(var.sqrt());
                }
                store.insert(rec)?;
            }
        }
    }
    Ok(SynthData {
        store,
        train_truth,
        eval_tasks,
        eval_truth,
        hardware,
    })
}
