//! A fitted embedding space: one encoder per entity kind (task data,
//! acceleration method, hardware), each either an SVD over raw text
//! embeddings or a one-hot indicator over a fixed universe.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::prompt::{render_prompt, PromptEntity, PromptStyle};
use super::provider::{Embedder, EmbeddingProviderSpec};
use super::svd::{fit_svd_clamped, RankClamp, SvdModel, NUMERICAL_RANK_RTOL};
use crate::domain::{EmbeddingVector, EntityKind, HardwareProfile, MethodConfig, TaskProfile};
use crate::error::{Error, Result};

/// Indicator vector for `id` within `universe`.
pub fn one_hot(id: &str, universe: &[String], kind: &'static str) -> Result<Vec<f64>> {
    let pos = universe.iter().position(|u| u == id).ok_or_else(|| Error::UnknownId {
        kind,
        id: id.to_string(),
    })?;
    let mut v = vec![0.0; universe.len()];
    v[pos] = 1.0;
    Ok(v)
}

/// Identifier used for a method in one-hot universes.
pub fn method_key(m: MethodConfig) -> String {
    format!("m{}", m.index())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoder {
    Svd(SvdModel),
    OneHot { universe: Vec<String> },
}

impl Encoder {
    pub fn dim(&self) -> usize {
        match self {
            Encoder::Svd(m) => m.rank,
            Encoder::OneHot { universe } => universe.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingSpace {
    pub style: PromptStyle,
    pub rank: usize,
    pub provider: EmbeddingProviderSpec,
    pub data: Encoder,
    pub model: Encoder,
    pub hardware: Encoder,
    #[serde(default)]
    pub clamps: Vec<RankClamp>,
    #[serde(skip)]
    embedder: OnceLock<Arc<Embedder>>,
}

impl PartialEq for EmbeddingSpace {
    fn eq(&self, other: &Self) -> bool {
        self.style == other.style
            && self.rank == other.rank
            && self.provider == other.provider
            && self.data == other.data
            && self.model == other.model
            && self.hardware == other.hardware
            && self.clamps == other.clamps
    }
}

fn raw_vectors(embedder: &Embedder, texts: &[String], kind: EntityKind) -> Result<Vec<EmbeddingVector>> {
    texts.iter().map(|t| embedder.embed(t, kind)).collect()
}

impl EmbeddingSpace {
    /// Fits all three encoders. For text styles each kind gets its own SVD
    /// of rank `rank` (clamped when the kind has fewer entities).
    pub fn fit(
        tasks: &[TaskProfile],
        methods: &[MethodConfig],
        hardware: &[HardwareProfile],
        style: PromptStyle,
        rank: usize,
        embedder: Arc<Embedder>,
    ) -> Result<Self> {
        if rank == 0 {
            return Err(Error::invalid("embedding rank must be >= 1"));
        }
        if tasks.is_empty() || methods.is_empty() || hardware.is_empty() {
            return Err(Error::invalid("embedding space needs tasks, methods and hardware"));
        }
        let mut clamps = Vec::new();
        let (data, model, hw) = if style == PromptStyle::OneHot {
            (
                Encoder::OneHot {
                    universe: tasks.iter().map(|t| t.id.clone()).collect(),
                },
                Encoder::OneHot {
                    universe: methods.iter().map(|m| method_key(*m)).collect(),
                },
                Encoder::OneHot {
                    universe: hardware.iter().map(|h| h.id.clone()).collect(),
                },
            )
        } else {
            let mut fit_kind = |texts: Vec<String>, kind: EntityKind| -> Result<Encoder> {
                let raw = raw_vectors(&embedder, &texts, kind)?;
                if raw.len() < 2 {
                    // A single entity carries no variation; keep the constant
                    // coordinate rather than failing the fit.
                    let dim = raw[0].dim();
                    let mut factors = crate::linalg::Matrix::zeros(dim, 1);
                    factors[(0, 0)] = 1.0;
                    return Ok(Encoder::Svd(SvdModel {
                        rank: 1,
                        right_factors: factors,
                        singular_values: vec![0.0],
                        mean_vector: raw[0].values.clone(),
                    }));
                }
                let (mut model, mut clamp) = fit_svd_clamped(&raw, rank, kind)?;
                // Directions without variance in the fitted vectors only carry
                // rounding noise; drop them.
                let numerical = model.numerical_rank(NUMERICAL_RANK_RTOL).max(1);
                if numerical < model.rank {
                    log::warn!("{kind} embeddings have numerical rank {numerical}; using {numerical} of {rank} requested components");
                    model.truncate(numerical);
                    clamp = Some(RankClamp {
                        kind,
                        requested: rank,
                        used: numerical,
                    });
                }
                clamps.extend(clamp);
                Ok(Encoder::Svd(model))
            };
            let task_texts = tasks
                .iter()
                .map(|t| render_prompt(PromptEntity::Task(t), style))
                .collect::<Result<Vec<_>>>()?;
            let method_texts = methods
                .iter()
                .map(|m| render_prompt(PromptEntity::Method(*m), style))
                .collect::<Result<Vec<_>>>()?;
            let hw_texts = hardware
                .iter()
                .map(|h| render_prompt(PromptEntity::Hardware(h), style))
                .collect::<Result<Vec<_>>>()?;
            (
                fit_kind(task_texts, EntityKind::Data)?,
                fit_kind(method_texts, EntityKind::Model)?,
                fit_kind(hw_texts, EntityKind::Hardware)?,
            )
        };
        let lock = OnceLock::new();
        let provider = embedder.spec().clone();
        let _ = lock.set(embedder);
        Ok(EmbeddingSpace {
            style,
            rank,
            provider,
            data,
            model,
            hardware: hw,
            clamps,
            embedder: lock,
        })
    }

    /// Attaches a shared embedder (e.g. after deserialization).
    pub fn attach(&self, embedder: Arc<Embedder>) -> Result<()> {
        if embedder.spec().raw_dim != self.provider.raw_dim {
            return Err(Error::Dimension {
                expected: self.provider.raw_dim,
                found: embedder.spec().raw_dim,
            });
        }
        let _ = self.embedder.set(embedder);
        Ok(())
    }

    fn embedder(&self) -> Result<&Arc<Embedder>> {
        if let Some(e) = self.embedder.get() {
            return Ok(e);
        }
        let e = Arc::new(Embedder::new(self.provider.clone())?);
        Ok(self.embedder.get_or_init(|| e))
    }

    fn encode(&self, encoder: &Encoder, id: &str, kind: EntityKind, entity: PromptEntity<'_>) -> Result<Vec<f64>> {
        match encoder {
            Encoder::OneHot { universe } => one_hot(
                id,
                universe,
                match kind {
                    EntityKind::Data => "task",
                    EntityKind::Model => "method",
                    EntityKind::Hardware => "hardware",
                },
            ),
            Encoder::Svd(model) => {
                let text = render_prompt(entity, self.style)?;
                let raw = self.embedder()?.embed(&text, kind)?;
                model.reduce_values(&raw.values)
            }
        }
    }

    pub fn task_vector(&self, task: &TaskProfile) -> Result<Vec<f64>> {
        self.encode(&self.data, &task.id, EntityKind::Data, PromptEntity::Task(task))
    }

    pub fn method_vector(&self, method: MethodConfig) -> Result<Vec<f64>> {
        self.encode(&self.model, &method_key(method), EntityKind::Model, PromptEntity::Method(method))
    }

    pub fn hardware_vector(&self, hw: &HardwareProfile) -> Result<Vec<f64>> {
        self.encode(&self.hardware, &hw.id, EntityKind::Hardware, PromptEntity::Hardware(hw))
    }

    /// Segment widths: (data, model, hardware).
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.data.dim(), self.model.dim(), self.hardware.dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::provider::EmbeddingProviderSpec;

    fn universe() -> Vec<String> {
        vec!["a".into(), "b".into(), "c".into()]
    }

    #[test]
    fn one_hot_positions() {
        assert_eq!(one_hot("a", &universe(), "task").unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(one_hot("c", &universe(), "task").unwrap(), vec![0.0, 0.0, 1.0]);
        assert!(matches!(one_hot("z", &universe(), "task"), Err(Error::UnknownId { .. })));
    }

    fn task(id: &str, bs: u32) -> TaskProfile {
        TaskProfile {
            id: id.into(),
            description: format!("chat workload {id}"),
            batch_size: bs,
            prompt_count: 1000,
            source_tag: "sharegpt".into(),
            model: "llama".into(),
        }
    }

    fn hw(id: &str, class: &str) -> HardwareProfile {
        HardwareProfile {
            id: id.into(),
            gpu_class: class.into(),
            gpu_count: 4,
            memory_gb: 24.0,
            price_per_hour: 1.0,
            description: class.into(),
        }
    }

    #[test]
    fn fit_clamps_small_kinds_and_roundtrips() {
        let embedder = Arc::new(Embedder::new(EmbeddingProviderSpec::fallback(32)).unwrap());
        let tasks: Vec<_> = (0..6).map(|i| task(&format!("t{i}"), 16 << i)).collect();
        let space = EmbeddingSpace::fit(
            &tasks,
            &MethodConfig::NAMED,
            &[hw("l4x4", "L4"), hw("t4x4", "T4")],
            PromptStyle::Rich,
            4,
            embedder,
        )
        .unwrap();
        // Two hardware vectors span a single centered direction.
        assert_eq!(space.dims(), (4, 4, 1));
        assert_eq!(space.clamps.len(), 1);
        let json = serde_json::to_string(&space).unwrap();
        let back: EmbeddingSpace = serde_json::from_str(&json).unwrap();
        assert_eq!(back, space);
        assert_eq!(back.task_vector(&tasks[2]).unwrap(), space.task_vector(&tasks[2]).unwrap());
    }

    #[test]
    fn one_hot_space_rejects_unseen() {
        let embedder = Arc::new(Embedder::new(EmbeddingProviderSpec::fallback(8)).unwrap());
        let space = EmbeddingSpace::fit(
            &[task("t0", 16), task("t1", 64)],
            &MethodConfig::NAMED,
            &[hw("l4x4", "L4")],
            PromptStyle::OneHot,
            64,
            embedder,
        )
        .unwrap();
        assert_eq!(space.task_vector(&task("t1", 64)).unwrap(), vec![0.0, 1.0]);
        assert!(matches!(space.task_vector(&task("new", 16)), Err(Error::UnknownId { .. })));
    }
}
