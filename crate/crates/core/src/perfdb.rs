//! Historical performance records: ingestion (JSONL / CSV), persistence and
//! assembly of the performance tensor used for training.
//!
//! Record lines follow the flat wire schema
//! `{"task", "prefix_caching", "chunked_prefill", "continuous_batching",
//! "hardware", "runtime_s", "runtime_std_s"?}`. JSONL ingestion additionally
//! accepts profile lines tagged `"kind": "task"` or `"kind": "hardware"` so
//! that workload and hardware descriptions can travel with their records.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{
    HardwareProfile, MethodConfig, MetricName, PerformanceRecord, PerformanceTensor, RecordKey, TaskProfile,
};
use crate::error::{Error, Result};

pub const STORE_FORMAT: &str = "metainf-records";
pub const STORE_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 7] = [
    "task",
    "prefix_caching",
    "chunked_prefill",
    "continuous_batching",
    "hardware",
    "runtime_s",
    "runtime_std_s",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Jsonl,
    Csv,
}

impl RecordFormat {
    /// Guesses the format from a file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => RecordFormat::Csv,
            _ => RecordFormat::Jsonl,
        }
    }
}

/// Flat on-the-wire shape of a [`PerformanceRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireRecord {
    pub task: String,
    pub prefix_caching: bool,
    pub chunked_prefill: bool,
    pub continuous_batching: bool,
    pub hardware: String,
    pub runtime_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_std_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_name: Option<MetricName>,
}

impl From<&PerformanceRecord> for WireRecord {
    fn from(r: &PerformanceRecord) -> Self {
        WireRecord {
            task: r.task.clone(),
            prefix_caching: r.method.prefix_caching,
            chunked_prefill: r.method.chunked_prefill,
            continuous_batching: r.method.continuous_batching,
            hardware: r.hardware.clone(),
            runtime_s: r.runtime_s,
            runtime_std_s: r.runtime_std_s,
            metric_name: None,
        }
    }
}

impl From<WireRecord> for PerformanceRecord {
    fn from(w: WireRecord) -> Self {
        PerformanceRecord {
            task: w.task,
            method: MethodConfig::new(w.prefix_caching, w.chunked_prefill, w.continuous_batching),
            hardware: w.hardware,
            runtime_s: w.runtime_s,
            runtime_std_s: w.runtime_std_s,
            metric_name: w.metric_name.unwrap_or(MetricName::Runtime),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ProfileLine {
    Task(TaskProfile),
    Hardware(HardwareProfile),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum StoreLine {
    Task(TaskProfile),
    Hardware(HardwareProfile),
    Record(WireRecord),
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreHeader {
    format: String,
    version: u32,
}

/// Parsed content of one ingestion batch.
#[derive(Debug, Default)]
struct Batch {
    tasks: Vec<TaskProfile>,
    hardware: Vec<HardwareProfile>,
    records: Vec<PerformanceRecord>,
}

/// Append-only record collection indexed by (task, method, hardware).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordStore {
    records: Vec<PerformanceRecord>,
    index: HashMap<RecordKey, usize>,
    tasks: BTreeMap<String, TaskProfile>,
    hardware: BTreeMap<String, HardwareProfile>,
}

impl RecordStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[PerformanceRecord] {
        &self.records
    }

    pub fn get(&self, key: &RecordKey) -> Option<&PerformanceRecord> {
        self.index.get(key).map(|&i| &self.records[i])
    }

    pub fn task(&self, id: &str) -> Option<&TaskProfile> {
        self.tasks.get(id)
    }

    pub fn hardware(&self, id: &str) -> Option<&HardwareProfile> {
        self.hardware.get(id)
    }

    pub fn task_profiles(&self) -> impl Iterator<Item = &TaskProfile> {
        self.tasks.values()
    }

    pub fn hardware_profiles(&self) -> impl Iterator<Item = &HardwareProfile> {
        self.hardware.values()
    }

    /// Task profile for `id`, or a minimal stand-in when records arrived
    /// without a description.
    pub fn task_or_placeholder(&self, id: &str) -> TaskProfile {
        self.tasks.get(id).cloned().unwrap_or_else(|| TaskProfile {
            id: id.to_string(),
            description: id.to_string(),
            batch_size: 1,
            prompt_count: 1,
            source_tag: "unknown".into(),
            model: "unknown".into(),
        })
    }

    /// Hardware profile for `id`; unknown ids of the form `<class>x<count>`
    /// are expanded using the built-in GPU memory table, at price 0.
    pub fn hardware_or_placeholder(&self, id: &str) -> HardwareProfile {
        if let Some(h) = self.hardware.get(id) {
            return h.clone();
        }
        let (class, count) = match id.rsplit_once('x') {
            Some((c, n)) if !c.is_empty() => match n.parse::<u32>() {
                Ok(n) if n > 0 => (c.to_ascii_uppercase(), n),
                _ => (id.to_string(), 1),
            },
            _ => (id.to_string(), 1),
        };
        HardwareProfile {
            id: id.to_string(),
            memory_gb: HardwareProfile::known_memory_gb(&class).unwrap_or(24.0),
            gpu_class: class,
            gpu_count: count,
            price_per_hour: 0.0,
            description: id.to_string(),
        }
    }

    pub fn insert_task(&mut self, task: TaskProfile) -> Result<()> {
        self.apply(Batch {
            tasks: vec![task],
            ..Batch::default()
        })
    }

    pub fn insert_hardware(&mut self, hw: HardwareProfile) -> Result<()> {
        self.apply(Batch {
            hardware: vec![hw],
            ..Batch::default()
        })
    }

    pub fn insert(&mut self, record: PerformanceRecord) -> Result<()> {
        self.apply(Batch {
            records: vec![record],
            ..Batch::default()
        })
    }

    /// Ingests a stream of serialized records and returns the number of
    /// records read. The batch is applied atomically: any malformed line or
    /// conflicting key leaves the store untouched.
    pub fn ingest<R: Read>(&mut self, reader: R, format: RecordFormat) -> Result<usize> {
        let batch = match format {
            RecordFormat::Jsonl => parse_jsonl(reader)?,
            RecordFormat::Csv => parse_csv(reader)?,
        };
        let count = batch.records.len();
        self.apply(batch)?;
        Ok(count)
    }

    pub fn ingest_path(&mut self, path: &Path) -> Result<usize> {
        let file = File::open(path)?;
        self.ingest(file, RecordFormat::from_path(path))
    }

    fn apply(&mut self, batch: Batch) -> Result<()> {
        // Validate everything against the store and within the batch first.
        let mut pending: HashMap<RecordKey, f64> = HashMap::new();
        for r in &batch.records {
            r.validate()?;
            let key = r.key();
            let existing = self.get(&key).map(|e| e.runtime_s).or_else(|| pending.get(&key).copied());
            match existing {
                Some(stored) if stored.to_bits() != r.runtime_s.to_bits() => {
                    return Err(Error::Conflict {
                        key: key.to_string(),
                        stored,
                        incoming: r.runtime_s,
                    })
                }
                _ => {
                    pending.insert(key, r.runtime_s);
                }
            }
        }
        let mut pending_tasks: HashMap<&str, &TaskProfile> = HashMap::new();
        for t in &batch.tasks {
            t.validate()?;
            if let Some(prev) = self.tasks.get(&t.id).or_else(|| pending_tasks.get(t.id.as_str()).copied()) {
                if prev != t {
                    return Err(Error::invalid(format!("conflicting profiles for task `{}`", t.id)));
                }
            }
            pending_tasks.insert(&t.id, t);
        }
        let mut pending_hw: HashMap<&str, &HardwareProfile> = HashMap::new();
        for h in &batch.hardware {
            h.validate()?;
            if let Some(prev) = self.hardware.get(&h.id).or_else(|| pending_hw.get(h.id.as_str()).copied()) {
                if prev != h {
                    return Err(Error::invalid(format!("conflicting profiles for hardware `{}`", h.id)));
                }
            }
            pending_hw.insert(&h.id, h);
        }

        for t in batch.tasks {
            self.tasks.insert(t.id.clone(), t);
        }
        for h in batch.hardware {
            self.hardware.insert(h.id.clone(), h);
        }
        for r in batch.records {
            let key = r.key();
            if self.index.contains_key(&key) {
                continue;
            }
            self.index.insert(key, self.records.len());
            self.records.push(r);
        }
        Ok(())
    }

    /// Builds the task × method × hardware tensor. Axes are sorted: task ids
    /// and hardware ids lexicographically, methods by their index.
    pub fn assemble_tensor(&self) -> Result<PerformanceTensor> {
        if self.records.is_empty() {
            return Err(Error::EmptyStore);
        }
        let tasks: BTreeSet<&str> = self.records.iter().map(|r| r.task.as_str()).collect();
        let methods: BTreeSet<MethodConfig> = self.records.iter().map(|r| r.method).collect();
        let hardware: BTreeSet<&str> = self.records.iter().map(|r| r.hardware.as_str()).collect();

        let task_pos: HashMap<&str, usize> = tasks.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        let method_pos: HashMap<MethodConfig, usize> = methods.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        let hw_pos: HashMap<&str, usize> = hardware.iter().enumerate().map(|(i, h)| (*h, i)).collect();

        let mut tensor = PerformanceTensor::new(
            tasks.iter().map(|s| s.to_string()).collect(),
            methods.iter().copied().collect(),
            hardware.iter().map(|s| s.to_string()).collect(),
        );
        for r in &self.records {
            tensor.set(
                task_pos[r.task.as_str()],
                method_pos[&r.method],
                hw_pos[r.hardware.as_str()],
                Some(r.runtime_s),
            )?;
        }
        Ok(tensor)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = StoreHeader {
            format: STORE_FORMAT.into(),
            version: STORE_VERSION,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for t in self.tasks.values() {
            serde_json::to_writer(&mut w, &StoreLine::Task(t.clone()))?;
            w.write_all(b"\n")?;
        }
        for h in self.hardware.values() {
            serde_json::to_writer(&mut w, &StoreLine::Hardware(h.clone()))?;
            w.write_all(b"\n")?;
        }
        for r in &self.records {
            serde_json::to_writer(&mut w, &StoreLine::Record(r.into()))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header_line = lines.next().ok_or(Error::Malformed {
            line: 1,
            message: "missing store header".into(),
        })??;
        let header: StoreHeader = serde_json::from_str(&header_line).map_err(|e| Error::Malformed {
            line: 1,
            message: format!("bad store header: {e}"),
        })?;
        if header.format != STORE_FORMAT {
            return Err(Error::Malformed {
                line: 1,
                message: format!("unexpected format `{}`", header.format),
            });
        }
        if header.version != STORE_VERSION {
            return Err(Error::Version {
                found: header.version,
                expected: STORE_VERSION,
            });
        }
        let mut batch = Batch::default();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: StoreLine = serde_json::from_str(&line).map_err(|e| Error::Malformed {
                line: n + 2,
                message: e.to_string(),
            })?;
            match parsed {
                StoreLine::Task(t) => batch.tasks.push(t),
                StoreLine::Hardware(h) => batch.hardware.push(h),
                StoreLine::Record(r) => batch.records.push(r.into()),
            }
        }
        let mut store = RecordStore::new();
        store.apply(batch)?;
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let file = File::create(&tmp)?;
            self.write_to(BufWriter::new(file))?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }

    /// True when the file starts with a store header rather than a record line.
    pub fn is_store_file(path: &Path) -> Result<bool> {
        let mut first = String::new();
        BufReader::new(File::open(path)?).read_line(&mut first)?;
        Ok(serde_json::from_str::<StoreHeader>(first.trim()).is_ok())
    }

    /// Merges another store into this one under the usual conflict rules.
    pub fn merge(&mut self, other: &RecordStore) -> Result<usize> {
        self.apply(Batch {
            tasks: other.tasks.values().cloned().collect(),
            hardware: other.hardware.values().cloned().collect(),
            records: other.records.clone(),
        })?;
        Ok(other.records.len())
    }
}

fn parse_jsonl<R: Read>(reader: R) -> Result<Batch> {
    let mut batch = Batch::default();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |e: serde_json::Error| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        };
        let value: serde_json::Value = serde_json::from_str(&line).map_err(malformed)?;
        if value.get("kind").is_some() {
            match serde_json::from_value::<ProfileLine>(value).map_err(malformed)? {
                ProfileLine::Task(t) => batch.tasks.push(t),
                ProfileLine::Hardware(h) => batch.hardware.push(h),
            }
        } else {
            let wire: WireRecord = serde_json::from_value(value).map_err(malformed)?;
            let record = PerformanceRecord::from(wire);
            record.validate().map_err(|e| Error::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
            batch.records.push(record);
        }
    }
    Ok(batch)
}

fn parse_csv<R: Read>(reader: R) -> Result<Batch> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let got: Vec<&str> = headers.iter().collect();
    let expected_short = &CSV_HEADER[..6];
    if got != CSV_HEADER && got != expected_short {
        return Err(Error::Malformed {
            line: 1,
            message: format!("expected header `{}`", CSV_HEADER.join(",")),
        });
    }
    let mut batch = Batch::default();
    for row in rdr.deserialize::<WireRecord>() {
        let row = row.map_err(|e| Error::Malformed {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let record = PerformanceRecord::from(row);
        record.validate().map_err(|e| Error::Malformed {
            line: batch.records.len() + 2,
            message: e.to_string(),
        })?;
        batch.records.push(record);
    }
    Ok(batch)
}
