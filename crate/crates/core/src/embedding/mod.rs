//! Prompt rendering, raw text embedding and per-kind SVD reduction.

pub mod prompt;
pub mod provider;
pub mod space;
pub mod svd;

pub use prompt::{render_prompt, PromptEntity, PromptStyle};
pub use provider::{fallback_embedding, Embedder, EmbeddingProviderSpec, ProviderKind};
pub use space::{one_hot, EmbeddingSpace, Encoder};
pub use svd::{fit_svd, fit_svd_clamped, RankClamp, SvdModel};
