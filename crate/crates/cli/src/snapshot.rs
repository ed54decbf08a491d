//! Trained selector snapshots: what `train` writes and what `select` and
//! the service read.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use metainf_core::embedding::{Embedder, PromptStyle};
use metainf_core::eval::SynthSpec;
use metainf_core::perfdb::RecordStore;
use metainf_core::selection::select;
use metainf_core::selectors::{self, OracleTruth, SelectorKind, SelectorSpec, TrainingData};
use metainf_core::{Budget, Error, HardwareProfile, SelectionResult, TaskProfile};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SNAPSHOT_FORMAT: &str = "metainf-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub format: String,
    pub version: u32,
    /// Content hash of the fitted selector.
    pub model_version: String,
    pub train_rows: usize,
    pub style: PromptStyle,
    pub rank: usize,
    /// Profiles of the hardware seen in training.
    pub hardware: Vec<HardwareProfile>,
    pub selector: selectors::FittedSelector,
}

/// Which selector to fit and how to embed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub selector: SelectorKind,
    pub style: PromptStyle,
    pub rank: usize,
}

fn content_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

impl Snapshot {
    fn seal(selector: selectors::FittedSelector, train_rows: usize, opts: TrainOptions, hardware: Vec<HardwareProfile>) -> CliResult<Self> {
        let model_version = content_hash(selector.to_json()?.as_bytes());
        Ok(Snapshot {
            format: SNAPSHOT_FORMAT.into(),
            version: SNAPSHOT_VERSION,
            model_version,
            train_rows,
            style: opts.style,
            rank: opts.rank,
            hardware,
            selector,
        })
    }

    /// Fits a selector on every record in `store`.
    ///
    /// The oracle has no training step; it scores with the noiseless
    /// runtimes of the default synthetic generator.
    pub fn train(store: &RecordStore, opts: TrainOptions, embedder: Arc<Embedder>) -> CliResult<Self> {
        if opts.selector == SelectorKind::Oracle {
            let synth = SynthSpec::default();
            let sel = selectors::oracle(OracleTruth::Synthetic(synth.clone()), synth.methods());
            return Snapshot::seal(sel, 0, opts, synth.hardware_profiles());
        }
        let data = TrainingData::from_store(store)?;
        let space = data.fit_space(opts.style, opts.rank, embedder)?;
        let spec = SelectorSpec::default_for(opts.selector)?;
        let sel = selectors::fit(&spec, &data, &space)?;
        let rows = data.tensor.present_cells().count();
        log::info!("trained {} on {rows} records ({} tasks)", opts.selector, data.tasks.len());
        Snapshot::seal(sel, rows, opts, data.hardware)
    }

    pub fn path(dir: &Path) -> PathBuf {
        dir.join(SNAPSHOT_FILE)
    }

    /// Writes to a temporary file and renames it into place.
    pub fn save(&self, dir: &Path) -> CliResult<()> {
        std::fs::create_dir_all(dir)?;
        let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        std::fs::write(&tmp, serde_json::to_vec(self)?)?;
        std::fs::rename(&tmp, Snapshot::path(dir))?;
        Ok(())
    }

    /// Loads the snapshot in `dir`; `None` if there is none yet.
    pub fn load(dir: &Path) -> CliResult<Option<Self>> {
        let path = Snapshot::path(dir);
        if !path.exists() {
            return Ok(None);
        }
        let snap: Snapshot = serde_json::from_slice(&std::fs::read(&path)?)?;
        if snap.format != SNAPSHOT_FORMAT {
            return Err(Error::InvalidInput(format!("{} is not a snapshot", path.display())).into());
        }
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Version {
                found: snap.version,
                expected: SNAPSHOT_VERSION,
            }
            .into());
        }
        // Re-validates the nested selector header.
        let selector = selectors::FittedSelector::from_json(&snap.selector.to_json()?)?;
        Ok(Some(Snapshot { selector, ..snap }))
    }

    pub fn require(dir: &Path) -> CliResult<Self> {
        Snapshot::load(dir)?.ok_or_else(|| CliError::NoSnapshot(dir.display().to_string()))
    }

    /// Shares `embedder` with the selector's embedding space, if it has one
    /// and the dimensions agree.
    pub fn attach(&self, embedder: &Arc<Embedder>) {
        if let Some(space) = self.selector.embedding_space() {
            if space.provider == *embedder.spec() {
                let _ = space.attach(embedder.clone());
            }
        }
    }

    /// Hardware profile for a GPU class and count at the given price.
    ///
    /// Memory comes from `memory_gb` if given, else from the training
    /// profile with the same id, else from the built-in GPU table.
    pub fn hardware_profile(&self, gpu_class: &str, gpu_count: u32, price_per_hour: f64, memory_gb: Option<f64>) -> CliResult<HardwareProfile> {
        let id = HardwareProfile::canonical_id(gpu_class, gpu_count);
        let known = self.hardware.iter().find(|h| h.id == id);
        let memory = memory_gb
            .or(known.map(|h| h.memory_gb))
            .or_else(|| HardwareProfile::known_memory_gb(gpu_class))
            .ok_or_else(|| Error::InvalidInput(format!("unknown GPU class `{gpu_class}`; pass memory_gb")))?;
        let description = match known {
            Some(h) if h.memory_gb == memory => h.description.clone(),
            _ => format!("{gpu_count} NVIDIA {gpu_class} GPUs with {memory} GB each"),
        };
        let hw = HardwareProfile {
            id,
            gpu_class: known.map_or_else(|| gpu_class.to_string(), |h| h.gpu_class.clone()),
            gpu_count,
            memory_gb: memory,
            price_per_hour,
            description,
        };
        hw.validate()?;
        Ok(hw)
    }

    pub fn select(&self, task: &TaskProfile, hw: &HardwareProfile, budget: Budget) -> CliResult<SelectionResult> {
        Ok(select(&self.selector, task, hw, budget)?)
    }
}

/// Task profile for an ad-hoc request.
pub fn request_task(description: &str, batch_size: u32, model: &str, prompt_count: Option<u32>, source_tag: Option<&str>) -> CliResult<TaskProfile> {
    let task = TaskProfile {
        id: "request".into(),
        description: description.to_string(),
        batch_size,
        prompt_count: prompt_count.unwrap_or(1000),
        source_tag: source_tag.unwrap_or("unknown").to_string(),
        model: model.to_string(),
    };
    task.validate()?;
    Ok(task)
}

#[cfg(test)]
mod tests {
    use super::*;
    use metainf_core::MethodConfig;

    fn opts(selector: SelectorKind) -> TrainOptions {
        TrainOptions {
            selector,
            style: PromptStyle::Rich,
            rank: 8,
        }
    }

    #[test]
    fn oracle_snapshot_picks_all_at_small_batch() {
        let embedder = Arc::new(Embedder::new(Default::default()).unwrap());
        let snap = Snapshot::train(&RecordStore::new(), opts(SelectorKind::Oracle), embedder).unwrap();
        let synth = SynthSpec::default();
        let corpus = &synth.corpora[0];
        let task = request_task(&corpus.description, 16, "Meta-Llama-3.1-8B-Instruct", None, None).unwrap();
        let hw = snap.hardware_profile("L4", 4, 2.8, None).unwrap();
        let r = snap.select(&task, &hw, Budget::unlimited()).unwrap();
        assert_eq!(r.method, MethodConfig::ALL);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        assert!(Snapshot::load(dir.path()).unwrap().is_none());
        assert!(matches!(Snapshot::require(dir.path()), Err(CliError::NoSnapshot(_))));
        let embedder = Arc::new(Embedder::new(Default::default()).unwrap());
        let snap = Snapshot::train(&RecordStore::new(), opts(SelectorKind::Oracle), embedder).unwrap();
        snap.save(dir.path()).unwrap();
        let back = Snapshot::require(dir.path()).unwrap();
        assert_eq!(back.model_version, snap.model_version);
        assert_eq!(back.selector, snap.selector);
    }

    #[test]
    fn hardware_resolution() {
        let embedder = Arc::new(Embedder::new(Default::default()).unwrap());
        let snap = Snapshot::train(&RecordStore::new(), opts(SelectorKind::Oracle), embedder).unwrap();
        let l4 = snap.hardware_profile("l4", 4, 9.0, None).unwrap();
        assert_eq!((l4.id.as_str(), l4.gpu_class.as_str(), l4.memory_gb, l4.price_per_hour), ("l4x4", "L4", 24.0, 9.0));
        assert_eq!(snap.hardware_profile("H100", 2, 1.0, None).unwrap().memory_gb, 80.0);
        assert!(snap.hardware_profile("Z9", 2, 1.0, None).is_err());
        assert_eq!(snap.hardware_profile("Z9", 2, 1.0, Some(12.0)).unwrap().memory_gb, 12.0);
        assert!(snap.hardware_profile("L4", 0, 1.0, None).is_err());
    }
}
