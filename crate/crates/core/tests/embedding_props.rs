//! Prompt rendering and embedding space properties.

use std::collections::HashSet;
use std::sync::Arc;

use metainf_core::embedding::{render_prompt, Embedder, EmbeddingProviderSpec, EmbeddingSpace, PromptEntity, PromptStyle};
use metainf_core::{HardwareProfile, MethodConfig, TaskProfile};
use proptest::prelude::*;

const TEXT_STYLES: [PromptStyle; 3] = [PromptStyle::Basic, PromptStyle::Rich, PromptStyle::Cot];

fn task_strategy() -> impl Strategy<Value = TaskProfile> {
    ("[a-z \\n]{1,24}", 1u32..2048, 1u32..100_000, "[a-z]{1,6}", "[A-Za-z0-9-]{1,10}").prop_map(
        |(description, batch_size, prompt_count, source_tag, model)| TaskProfile {
            id: "t".into(),
            description,
            batch_size,
            prompt_count,
            source_tag,
            model,
        },
    )
}

fn hw(class: &str, count: u32, memory_gb: f64) -> HardwareProfile {
    HardwareProfile {
        id: HardwareProfile::canonical_id(class, count),
        gpu_class: class.into(),
        gpu_count: count,
        memory_gb,
        price_per_hour: 1.0,
        description: format!("{count} x {class}"),
    }
}

#[test]
fn every_method_renders_distinctly() {
    for style in TEXT_STYLES {
        let texts: HashSet<String> = MethodConfig::universe()
            .map(|m| render_prompt(PromptEntity::Method(m), style).unwrap())
            .collect();
        assert_eq!(texts.len(), 8, "{style}");
    }
}

#[test]
fn hardware_prompts_separate_class_and_count() {
    let grid: Vec<HardwareProfile> = ["T4", "L4", "A100"]
        .iter()
        .flat_map(|c| [1, 2, 4, 8].map(|n| hw(c, n, 24.0)))
        .collect();
    for style in TEXT_STYLES {
        let texts: HashSet<String> = grid.iter().map(|h| render_prompt(PromptEntity::Hardware(h), style).unwrap()).collect();
        assert_eq!(texts.len(), grid.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rich_task_prompts_are_injective(a in task_strategy(), b in task_strategy()) {
        let key = |t: &TaskProfile| (t.description.clone(), t.batch_size, t.prompt_count, t.source_tag.clone(), t.model.clone());
        for style in [PromptStyle::Rich, PromptStyle::Cot] {
            let same = render_prompt(PromptEntity::Task(&a), style).unwrap() == render_prompt(PromptEntity::Task(&b), style).unwrap();
            prop_assert_eq!(same, key(&a) == key(&b));
        }
        let basic_key = |t: &TaskProfile| (t.batch_size, t.source_tag.clone(), t.model.clone());
        let same = render_prompt(PromptEntity::Task(&a), PromptStyle::Basic).unwrap()
            == render_prompt(PromptEntity::Task(&b), PromptStyle::Basic).unwrap();
        prop_assert_eq!(same, basic_key(&a) == basic_key(&b));
    }

    #[test]
    fn field_values_cannot_add_lines(t in task_strategy()) {
        for style in TEXT_STYLES {
            let plain = TaskProfile { description: "x".into(), ..t.clone() };
            let lines = |t: &TaskProfile| render_prompt(PromptEntity::Task(t), style).unwrap().lines().count();
            prop_assert_eq!(lines(&t), lines(&plain));
        }
    }

    #[test]
    fn price_never_reaches_the_hardware_vector(price in 0.0f64..1000.0) {
        let embedder = Arc::new(Embedder::new(EmbeddingProviderSpec::fallback(32)).unwrap());
        let hardware = [hw("T4", 4, 16.0), hw("L4", 4, 24.0), hw("A100", 8, 40.0)];
        let tasks: Vec<TaskProfile> = (0..3)
            .map(|i| TaskProfile {
                id: format!("t{i}"),
                description: format!("workload {i}"),
                batch_size: 16 << i,
                prompt_count: 100,
                source_tag: "s".into(),
                model: "m".into(),
            })
            .collect();
        let space = EmbeddingSpace::fit(&tasks, &MethodConfig::NAMED, &hardware, PromptStyle::Rich, 8, embedder).unwrap();
        let repriced = HardwareProfile { price_per_hour: price, ..hardware[1].clone() };
        prop_assert_eq!(space.hardware_vector(&repriced).unwrap(), space.hardware_vector(&hardware[1]).unwrap());
    }
}

#[test]
fn space_survives_serialization() {
    let embedder = Arc::new(Embedder::new(EmbeddingProviderSpec::fallback(64)).unwrap());
    let tasks: Vec<TaskProfile> = (0..10)
        .map(|i| TaskProfile {
            id: format!("t{i}"),
            description: format!("workload number {i}"),
            batch_size: 1 << (i % 6 + 2),
            prompt_count: 1000 + i,
            source_tag: "chat".into(),
            model: if i % 2 == 0 { "a" } else { "b" }.into(),
        })
        .collect();
    let hardware = [hw("T4", 4, 16.0), hw("L4", 4, 24.0), hw("A100", 8, 40.0)];
    let space = EmbeddingSpace::fit(&tasks, &MethodConfig::NAMED, &hardware, PromptStyle::Cot, 6, embedder).unwrap();
    let back: EmbeddingSpace = serde_json::from_str(&serde_json::to_string(&space).unwrap()).unwrap();
    let unseen = TaskProfile {
        id: "new".into(),
        description: "something never seen".into(),
        ..tasks[0].clone()
    };
    for t in tasks.iter().chain([&unseen]) {
        assert_eq!(back.task_vector(t).unwrap(), space.task_vector(t).unwrap());
    }
    for m in MethodConfig::universe() {
        assert_eq!(back.method_vector(m).unwrap(), space.method_vector(m).unwrap());
    }
}
