//! Text prompts describing workloads, methods and hardware in three levels
//! of detail. Rendering is deterministic; the reasoning scaffolds are fixed,
//! versioned constants.
//!
//! Prices never appear in prompts so that re-pricing hardware cannot move
//! runtime predictions. Opaque ids are omitted as well.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{HardwareProfile, MethodConfig, TaskProfile};
use crate::error::{Error, Result};

pub const SCAFFOLD_VERSION: u32 = 1;

const TASK_SCAFFOLD: &str = "Reasoning: Larger batches amortize per-step scheduling overhead, so methods that \
raise throughput gain more as the batch grows. Small batches are latency bound and reward combining \
methods. Conversational corpora repeat long prefixes across turns, which favors reusing the key-value \
cache, while long generated outputs shift time from prefill to decode. Therefore the expected runtime \
depends jointly on batch size, corpus and served model.";

const MODEL_SCAFFOLD: &str = "Reasoning: Model size sets the cost of every prefill and decode step. \
Architectures with small key-value caches gain less from prefix reuse and may pay its bookkeeping \
overhead instead. Therefore the best acceleration method depends on the model family.";

const METHOD_SCAFFOLD: &str = "Reasoning: Prefix caching removes repeated prefill work when prompts share \
prefixes but costs memory. Chunked prefill bounds peak memory and smooths latency at some scheduling cost. \
Continuous batching keeps the GPU busy by admitting requests as others finish. Therefore enabled flags \
interact with batch size and memory headroom to determine runtime.";

const HARDWARE_SCAFFOLD: &str = "Reasoning: Per-GPU memory bounds how much key-value cache can stay resident, \
so memory-constrained devices penalize prefix caching. More GPUs add compute but also communication, so \
scaling returns diminish. Therefore runtime depends on GPU class, count and memory.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    OneHot,
    Basic,
    Rich,
    Cot,
}

impl PromptStyle {
    pub const ALL: [PromptStyle; 4] = [PromptStyle::OneHot, PromptStyle::Basic, PromptStyle::Rich, PromptStyle::Cot];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptStyle::OneHot => "one_hot",
            PromptStyle::Basic => "basic",
            PromptStyle::Rich => "rich",
            PromptStyle::Cot => "cot",
        }
    }
}

impl fmt::Display for PromptStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptStyle {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "one_hot" | "onehot" => Ok(PromptStyle::OneHot),
            "basic" => Ok(PromptStyle::Basic),
            "rich" => Ok(PromptStyle::Rich),
            "cot" => Ok(PromptStyle::Cot),
            other => Err(Error::invalid(format!("unknown prompt style `{other}`"))),
        }
    }
}

/// Anything that can be rendered into a prompt.
#[derive(Debug, Clone, Copy)]
pub enum PromptEntity<'a> {
    Task(&'a TaskProfile),
    /// A served LLM, by name.
    Model(&'a str),
    Method(MethodConfig),
    Hardware(&'a HardwareProfile),
}

/// Escapes line structure so field values cannot forge template lines.
fn field(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n").replace('\r', "\\r")
}

/// `10000` → `10,000`.
pub fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn flag(on: bool) -> &'static str {
    if on {
        "enabled"
    } else {
        "disabled"
    }
}

pub fn render_prompt(entity: PromptEntity<'_>, style: PromptStyle) -> Result<String> {
    let rich = match style {
        PromptStyle::OneHot => {
            return Err(Error::invalid("one_hot style has no text prompt"));
        }
        PromptStyle::Basic => return Ok(render_basic(entity)),
        PromptStyle::Rich | PromptStyle::Cot => render_rich(entity),
    };
    if style == PromptStyle::Rich {
        return Ok(rich);
    }
    let scaffold = match entity {
        PromptEntity::Task(_) => TASK_SCAFFOLD,
        PromptEntity::Model(_) => MODEL_SCAFFOLD,
        PromptEntity::Method(_) => METHOD_SCAFFOLD,
        PromptEntity::Hardware(_) => HARDWARE_SCAFFOLD,
    };
    Ok(format!("{rich}\n{scaffold}"))
}

fn render_basic(entity: PromptEntity<'_>) -> String {
    match entity {
        PromptEntity::Task(t) => format!(
            "Dataset: {} | Model: {} | Batch size: {}",
            field(&t.source_tag),
            field(&t.model),
            t.batch_size
        ),
        PromptEntity::Model(name) => format!("Model: {}", field(name)),
        PromptEntity::Method(m) => format!("Method: {m}"),
        PromptEntity::Hardware(h) => format!("GPU: {} x{}", field(&h.gpu_class), h.gpu_count),
    }
}

fn render_rich(entity: PromptEntity<'_>) -> String {
    match entity {
        PromptEntity::Task(t) => format!(
            "Workload: This dataset has {} samples processed at batch size {}.\n\
             Corpus: {}\n\
             Served model: {}\n\
             Details: {}",
            thousands(t.prompt_count as u64),
            t.batch_size,
            field(&t.source_tag),
            field(&t.model),
            field(&t.description)
        ),
        PromptEntity::Model(name) => format!(
            "Model: {}\n\
             Architecture: transformer decoder language model served for text generation.\n\
             Runtime drivers: parameter count, key-value cache size per token, attention layout.",
            field(name)
        ),
        PromptEntity::Method(m) => format!(
            "Acceleration method: {m}\n\
             Prefix caching: {} (reuses key-value cache entries for shared prompt prefixes)\n\
             Chunked prefill: {} (splits prompt processing into bounded chunks)\n\
             Continuous batching: {} (admits new requests into running batches)",
            flag(m.prefix_caching),
            flag(m.chunked_prefill),
            flag(m.continuous_batching)
        ),
        PromptEntity::Hardware(h) => format!(
            "Hardware: {} x NVIDIA {}\n\
             Memory: {} GB per GPU, {} GB in total\n\
             Details: {}",
            h.gpu_count,
            field(&h.gpu_class),
            h.memory_gb,
            h.memory_gb * h.gpu_count as f64,
            field(&h.description)
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regression_task() -> TaskProfile {
        TaskProfile {
            id: "d1".into(),
            description: "20 features for regression. High variability adds fitting difficulty.".into(),
            batch_size: 16,
            prompt_count: 10_000,
            source_tag: "tabular".into(),
            model: "Meta-Llama-3.1-8B-Instruct".into(),
        }
    }

    #[test]
    fn basic_model_prompt() {
        assert_eq!(
            render_prompt(PromptEntity::Model("LLaMA-7B"), PromptStyle::Basic).unwrap(),
            "Model: LLaMA-7B"
        );
    }

    #[test]
    fn rich_task_prompt_mentions_counts() {
        let text = render_prompt(PromptEntity::Task(&regression_task()), PromptStyle::Rich).unwrap();
        assert!(text.contains("10,000 samples"), "{text}");
        assert!(text.contains("20 features"), "{text}");
    }

    #[test]
    fn rendering_is_deterministic() {
        let t = regression_task();
        for style in [PromptStyle::Basic, PromptStyle::Rich, PromptStyle::Cot] {
            assert_eq!(
                render_prompt(PromptEntity::Task(&t), style).unwrap(),
                render_prompt(PromptEntity::Task(&t), style).unwrap()
            );
        }
    }

    #[test]
    fn cot_extends_rich() {
        let m = MethodConfig::ALL;
        let rich = render_prompt(PromptEntity::Method(m), PromptStyle::Rich).unwrap();
        let cot = render_prompt(PromptEntity::Method(m), PromptStyle::Cot).unwrap();
        assert!(cot.starts_with(&rich) && cot.len() > rich.len());
    }

    #[test]
    fn one_hot_has_no_text() {
        assert!(render_prompt(PromptEntity::Method(MethodConfig::NONE), PromptStyle::OneHot).is_err());
    }

    #[test]
    fn price_does_not_enter_prompts() {
        let mut h = HardwareProfile {
            id: "l4x4".into(),
            gpu_class: "L4".into(),
            gpu_count: 4,
            memory_gb: 24.0,
            price_per_hour: 2.8,
            description: "NVIDIA L4".into(),
        };
        let before = render_prompt(PromptEntity::Hardware(&h), PromptStyle::Cot).unwrap();
        h.price_per_hour = 100.0;
        assert_eq!(before, render_prompt(PromptEntity::Hardware(&h), PromptStyle::Cot).unwrap());
    }

    #[test]
    fn thousands_separator() {
        assert_eq!(thousands(0), "0");
        assert_eq!(thousands(999), "999");
        assert_eq!(thousands(1000), "1,000");
        assert_eq!(thousands(1234567), "1,234,567");
    }

    #[test]
    fn style_parsing() {
        for s in PromptStyle::ALL {
            assert_eq!(s.as_str().parse::<PromptStyle>().unwrap(), s);
        }
        assert!("fancy".parse::<PromptStyle>().is_err());
    }
}
