//! Core value types: workloads, acceleration methods, hardware, runtime
//! records, and the task × method × hardware performance tensor.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A workload: a prompt set served by one LLM at a fixed batch size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskProfile {
    pub id: String,
    pub description: String,
    pub batch_size: u32,
    pub prompt_count: u32,
    /// Corpus the prompts resemble (e.g. `sharegpt`).
    pub source_tag: String,
    /// Name of the served LLM.
    pub model: String,
}

impl TaskProfile {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid(format!("task {}: batch_size must be >= 1", self.id)));
        }
        if self.prompt_count == 0 {
            return Err(Error::invalid(format!("task {}: prompt_count must be >= 1", self.id)));
        }
        if self.description.trim().is_empty() {
            return Err(Error::invalid(format!("task {}: empty description", self.id)));
        }
        Ok(())
    }
}

/// One combination of the three serving-engine acceleration flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodConfig {
    pub prefix_caching: bool,
    pub chunked_prefill: bool,
    pub continuous_batching: bool,
}

impl MethodConfig {
    pub const NONE: MethodConfig = MethodConfig::new(false, false, false);
    pub const CHUNKED_PREFILL: MethodConfig = MethodConfig::new(false, true, false);
    pub const CONTINUOUS_BATCHING: MethodConfig = MethodConfig::new(false, false, true);
    pub const PREFIX_CACHING: MethodConfig = MethodConfig::new(true, false, false);
    pub const ALL: MethodConfig = MethodConfig::new(true, true, true);

    /// The five configurations that have a conventional name.
    pub const NAMED: [MethodConfig; 5] = [
        MethodConfig::NONE,
        MethodConfig::CHUNKED_PREFILL,
        MethodConfig::CONTINUOUS_BATCHING,
        MethodConfig::PREFIX_CACHING,
        MethodConfig::ALL,
    ];

    pub const fn new(prefix_caching: bool, chunked_prefill: bool, continuous_batching: bool) -> Self {
        MethodConfig {
            prefix_caching,
            chunked_prefill,
            continuous_batching,
        }
    }

    /// Bijective code in `0..8`: prefix caching is bit 2, chunked prefill
    /// bit 1, continuous batching bit 0.
    pub fn index(self) -> usize {
        (self.prefix_caching as usize) << 2
            | (self.chunked_prefill as usize) << 1
            | self.continuous_batching as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        (index < 8).then(|| MethodConfig::new(index & 4 != 0, index & 2 != 0, index & 1 != 0))
    }

    /// All eight flag combinations in index order.
    pub fn universe() -> impl Iterator<Item = MethodConfig> {
        (0..8).map(|i| MethodConfig::from_index(i).unwrap())
    }

    pub fn flags(self) -> [bool; 3] {
        [self.prefix_caching, self.chunked_prefill, self.continuous_batching]
    }

    /// Conventional name for the five named configurations, `None` otherwise.
    pub fn alias(self) -> Option<&'static str> {
        match self.index() {
            0 => Some("None"),
            2 => Some("Chunked Prefill"),
            1 => Some("Continuous Batching"),
            4 => Some("Prefix Caching"),
            7 => Some("All"),
            _ => None,
        }
    }

    /// Parses an alias (case/separator-insensitive) or a `+`-joined flag list.
    pub fn parse(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric() || *c == '+')
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "none" => return Ok(MethodConfig::NONE),
            "all" => return Ok(MethodConfig::ALL),
            _ => {}
        }
        let mut m = MethodConfig::NONE;
        for part in norm.split('+') {
            match part {
                "prefixcaching" | "pc" => m.prefix_caching = true,
                "chunkedprefill" | "cp" => m.chunked_prefill = true,
                "continuousbatching" | "cb" => m.continuous_batching = true,
                _ => return Err(Error::invalid(format!("unknown method `{s}`"))),
            }
        }
        Ok(m)
    }
}

impl PartialOrd for MethodConfig {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MethodConfig {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.index().cmp(&other.index())
    }
}

impl fmt::Display for MethodConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(alias) = self.alias() {
            return f.write_str(alias);
        }
        let mut parts = Vec::new();
        if self.prefix_caching {
            parts.push("Prefix Caching");
        }
        if self.chunked_prefill {
            parts.push("Chunked Prefill");
        }
        if self.continuous_batching {
            parts.push("Continuous Batching");
        }
        f.write_str(&parts.join(" + "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareProfile {
    pub id: String,
    pub gpu_class: String,
    pub gpu_count: u32,
    /// Memory per GPU.
    pub memory_gb: f64,
    pub price_per_hour: f64,
    pub description: String,
}

impl HardwareProfile {
    pub fn validate(&self) -> Result<()> {
        if self.gpu_count == 0 {
            return Err(Error::invalid(format!("hardware {}: gpu_count must be >= 1", self.id)));
        }
        if !(self.memory_gb > 0.0 && self.memory_gb.is_finite()) {
            return Err(Error::invalid(format!("hardware {}: memory_gb must be positive", self.id)));
        }
        if !(self.price_per_hour >= 0.0 && self.price_per_hour.is_finite()) {
            return Err(Error::invalid(format!(
                "hardware {}: price_per_hour must be non-negative",
                self.id
            )));
        }
        Ok(())
    }

    /// Canonical id for a GPU class and count, e.g. `l4x4`.
    pub fn canonical_id(gpu_class: &str, gpu_count: u32) -> String {
        format!("{}x{}", gpu_class.to_ascii_lowercase(), gpu_count)
    }

    /// Per-GPU memory of well-known accelerator classes.
    pub fn known_memory_gb(gpu_class: &str) -> Option<f64> {
        match gpu_class.to_ascii_uppercase().as_str() {
            "T4" => Some(16.0),
            "L4" => Some(24.0),
            "A10" | "A10G" => Some(24.0),
            "A100" => Some(40.0),
            "H100" => Some(80.0),
            "H200" => Some(141.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Runtime,
}

/// One measured (task, method, hardware) runtime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub task: String,
    pub method: MethodConfig,
    pub hardware: String,
    pub runtime_s: f64,
    pub runtime_std_s: Option<f64>,
    pub metric_name: MetricName,
}

impl PerformanceRecord {
    pub fn new(task: impl Into<String>, method: MethodConfig, hardware: impl Into<String>, runtime_s: f64) -> Self {
        PerformanceRecord {
            task: task.into(),
            method,
            hardware: hardware.into(),
            runtime_s,
            runtime_std_s: None,
            metric_name: MetricName::Runtime,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.runtime_s > 0.0 && self.runtime_s.is_finite()) {
            return Err(Error::invalid(format!("runtime_s must be positive, got {}", self.runtime_s)));
        }
        if let Some(std) = self.runtime_std_s {
            if !(std >= 0.0 && std.is_finite()) {
                return Err(Error::invalid(format!("runtime_std_s must be non-negative, got {std}")));
            }
        }
        Ok(())
    }

    pub fn key(&self) -> RecordKey {
        RecordKey {
            task: self.task.clone(),
            method: self.method,
            hardware: self.hardware.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey {
    pub task: String,
    pub method: MethodConfig,
    pub hardware: String,
}

impl fmt::Display for RecordKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.task, self.method, self.hardware)
    }
}

/// Dense n × m × h runtime array with optional (missing) cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceTensor {
    tasks: Vec<String>,
    methods: Vec<MethodConfig>,
    hardware: Vec<String>,
    values: Vec<Option<f64>>,
}

impl PerformanceTensor {
    pub fn new(tasks: Vec<String>, methods: Vec<MethodConfig>, hardware: Vec<String>) -> Self {
        let len = tasks.len() * methods.len() * hardware.len();
        PerformanceTensor {
            tasks,
            methods,
            hardware,
            values: vec![None; len],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.tasks.len(), self.methods.len(), self.hardware.len())
    }

    pub fn tasks(&self) -> &[String] {
        &self.tasks
    }

    pub fn methods(&self) -> &[MethodConfig] {
        &self.methods
    }

    pub fn hardware(&self) -> &[String] {
        &self.hardware
    }

    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        let (_, m, h) = self.shape();
        (i * m + j) * h + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        self.values[self.offset(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: Option<f64>) -> Result<()> {
        if let Some(v) = value {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("tensor values must be positive, got {v}")));
            }
        }
        let off = self.offset(i, j, k);
        self.values[off] = value;
        Ok(())
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t == id)
    }

    pub fn method_position(&self, method: MethodConfig) -> Option<usize> {
        self.methods.iter().position(|m| *m == method)
    }

    pub fn hardware_index(&self, id: &str) -> Option<usize> {
        self.hardware.iter().position(|h| h == id)
    }

    /// Runtime lookup by ids.
    pub fn lookup(&self, task: &str, method: MethodConfig, hardware: &str) -> Option<f64> {
        let i = self.task_index(task)?;
        let j = self.method_position(method)?;
        let k = self.hardware_index(hardware)?;
        self.get(i, j, k)
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Iterates over present cells as `(i, j, k, runtime)`.
    pub fn present_cells(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let (_, m, h) = self.shape();
        self.values.iter().enumerate().filter_map(move |(off, v)| {
            v.map(|v| (off / (m * h), (off / h) % m, off % h, v))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingProvenance {
    Provider,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Data,
    Model,
    Hardware,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityKind::Data => "data",
            EntityKind::Model => "model",
            EntityKind::Hardware => "hardware",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub provenance: EmbeddingProvenance,
    pub entity_kind: EntityKind,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, provenance: EmbeddingProvenance, entity_kind: EntityKind) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("embedding must have at least one entry"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding contains non-finite entries"));
        }
        Ok(EmbeddingVector {
            values,
            provenance,
            entity_kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget(f64);

impl Budget {
    pub fn new(limit: f64) -> Result<Self> {
        if !(limit >= 0.0) {
            return Err(Error::invalid(format!("budget must be non-negative, got {limit}")));
        }
        Ok(Budget(limit))
    }

    pub fn unlimited() -> Self {
        Budget(f64::INFINITY)
    }

    pub fn limit(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuntimeSource {
    Predicted,
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub amount: f64,
    pub runtime_source: RuntimeSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedMethod {
    pub method: MethodConfig,
    pub predicted_runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: MethodConfig,
    pub predicted_runtime_s: f64,
    pub cost: CostEstimate,
    pub feasible_set_size: usize,
    pub ranking: Vec<RankedMethod>,
}
