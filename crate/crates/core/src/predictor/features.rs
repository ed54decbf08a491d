//! Feature vectors for the meta-learner: the three reduced embeddings
//! followed by five numeric side features.

use serde::{Deserialize, Serialize};

use crate::domain::{HardwareProfile, MethodConfig, TaskProfile};
use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};

/// Number of trailing numeric features: batch size, GPU count and the three
/// method flags (prefix caching, chunked prefill, continuous batching).
pub const SIDE_FEATURES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub width: usize,
}

/// Named, contiguous segments of a feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub segments: Vec<Segment>,
}

impl FeatureLayout {
    /// A single anonymous segment of `width` features.
    pub fn plain(width: usize) -> Self {
        FeatureLayout {
            segments: vec![Segment {
                name: "x".into(),
                width,
            }],
        }
    }

    pub fn for_embeddings(data: usize, model: usize, hardware: usize) -> Self {
        let seg = |name: &str, width| Segment {
            name: name.into(),
            width,
        };
        FeatureLayout {
            segments: vec![
                seg("data", data),
                seg("model", model),
                seg("hardware", hardware),
                seg("side", SIDE_FEATURES),
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.segments.iter().map(|s| s.width).sum()
    }

    /// Start offset of the named segment.
    pub fn offset(&self, name: &str) -> Option<usize> {
        let mut at = 0;
        for s in &self.segments {
            if s.name == name {
                return Some(at);
            }
            at += s.width;
        }
        None
    }

    /// Offsets of the (prefix caching, chunked prefill, continuous batching)
    /// flag slots, when the layout has a side segment.
    pub fn flag_offsets(&self) -> Option<[usize; 3]> {
        self.offset("side").map(|s| [s + 2, s + 3, s + 4])
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

pub fn layout_for(space: &EmbeddingSpace) -> FeatureLayout {
    let (d, m, h) = space.dims();
    FeatureLayout::for_embeddings(d, m, h)
}

pub fn side_features(task: &TaskProfile, method: MethodConfig, hw: &HardwareProfile) -> [f64; SIDE_FEATURES] {
    let b = |f: bool| if f { 1.0 } else { 0.0 };
    [
        task.batch_size as f64,
        hw.gpu_count as f64,
        b(method.prefix_caching),
        b(method.chunked_prefill),
        b(method.continuous_batching),
    ]
}

/// Concatenates precomputed segment vectors with the side features.
pub fn assemble(
    task_vec: &[f64],
    method_vec: &[f64],
    hw_vec: &[f64],
    task: &TaskProfile,
    method: MethodConfig,
    hw: &HardwareProfile,
) -> Vec<f64> {
    let mut x = Vec::with_capacity(task_vec.len() + method_vec.len() + hw_vec.len() + SIDE_FEATURES);
    x.extend_from_slice(task_vec);
    x.extend_from_slice(method_vec);
    x.extend_from_slice(hw_vec);
    x.extend_from_slice(&side_features(task, method, hw));
    x
}

pub fn build_features(space: &EmbeddingSpace, task: &TaskProfile, method: MethodConfig, hw: &HardwareProfile) -> Result<Vec<f64>> {
    let t = space.task_vector(task)?;
    let m = space.method_vector(method)?;
    let h = space.hardware_vector(hw)?;
    Ok(assemble(&t, &m, &h, task, method, hw))
}
