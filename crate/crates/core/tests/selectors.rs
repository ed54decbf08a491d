//! Fitted selectors on calibrated synthetic data.

use std::sync::{Arc, OnceLock};

use metainf_core::embedding::{Embedder, EmbeddingProviderSpec, PromptStyle};
use metainf_core::eval::protocol::{fit_selectors, FittedSet};
use metainf_core::eval::{generate_synthetic, SynthData, SynthSpec};
use metainf_core::selectors::{FittedSelector, MethodRanker, SelectorKind, SelectorSpec};
use metainf_core::HardwareProfile;

struct Fixture {
    data: SynthData,
    fitted: FittedSet,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let spec = SynthSpec::default();
        let data = generate_synthetic(&spec).unwrap();
        let specs: Vec<SelectorSpec> = SelectorKind::COMPARED.iter().map(|k| SelectorSpec::default_for(*k).unwrap()).collect();
        let embedder = Arc::new(Embedder::new(EmbeddingProviderSpec::default()).unwrap());
        let fitted = fit_selectors(&data, &specs, Some(&spec), PromptStyle::Rich, 64, embedder).unwrap();
        Fixture { data, fitted }
    })
}

fn selector(kind: SelectorKind) -> &'static FittedSelector {
    let name = kind.to_string();
    &fixture().fitted.selectors.iter().find(|(n, _, _)| *n == name).unwrap().1
}

#[test]
fn global_best_ignores_the_task() {
    let fx = fixture();
    let gb = selector(SelectorKind::GlobalBest);
    for hw in &fx.data.hardware {
        let first = gb.rank_methods(&fx.data.eval_tasks[0], hw).unwrap();
        for t in &fx.data.eval_tasks {
            assert_eq!(gb.rank_methods(t, hw).unwrap(), first);
        }
    }
}

#[test]
fn rankings_do_not_depend_on_price() {
    let fx = fixture();
    for (name, sel, _) in &fx.fitted.selectors {
        for hw in &fx.data.hardware {
            for price in [0.0, 0.37, 1000.0] {
                let repriced = HardwareProfile {
                    price_per_hour: price,
                    ..hw.clone()
                };
                for t in fx.data.eval_tasks.iter().take(10) {
                    assert_eq!(sel.rank_methods(t, &repriced).unwrap(), sel.rank_methods(t, hw).unwrap(), "{name}");
                }
            }
        }
    }
}

#[test]
fn selectors_survive_serialization() {
    let fx = fixture();
    for (name, sel, _) in &fx.fitted.selectors {
        let back = FittedSelector::from_json(&sel.to_json().unwrap()).unwrap();
        for hw in &fx.data.hardware {
            for t in fx.data.eval_tasks.iter().take(20) {
                assert_eq!(back.rank_methods(t, hw).unwrap(), sel.rank_methods(t, hw).unwrap(), "{name}");
            }
        }
    }
}

#[test]
fn rankings_are_complete_and_sorted() {
    let fx = fixture();
    for (name, sel, _) in &fx.fitted.selectors {
        for t in fx.data.eval_tasks.iter().take(25) {
            let r = sel.rank_methods(t, &fx.data.hardware[0]).unwrap();
            assert_eq!(r.len(), 5, "{name}");
            assert!(r.windows(2).all(|w| w[0].predicted_runtime_s <= w[1].predicted_runtime_s));
            assert!(r.iter().all(|m| m.predicted_runtime_s > 0.0));
        }
    }
}

#[test]
fn unseen_hardware_still_ranks() {
    let fx = fixture();
    let h100 = HardwareProfile {
        id: "h100x2".into(),
        gpu_class: "H100".into(),
        gpu_count: 2,
        memory_gb: 80.0,
        price_per_hour: 9.0,
        description: "2 NVIDIA H100 GPUs with 80 GB each".into(),
    };
    for (name, sel, _) in &fx.fitted.selectors {
        if name == "oracle" {
            // The synthetic truth only knows its own GPU classes.
            assert!(sel.rank_methods(&fx.data.eval_tasks[0], &h100).is_err());
            continue;
        }
        let r = sel.rank_methods(&fx.data.eval_tasks[0], &h100).unwrap();
        assert_eq!(r.len(), 5, "{name}");
        assert!(r.iter().all(|m| m.predicted_runtime_s.is_finite()), "{name}");
    }
}

#[test]
fn metainf_tracks_truth_on_held_out_tasks() {
    let fx = fixture();
    let sel = selector(SelectorKind::Metainf);
    let truth = &fx.data.eval_truth;
    let mut rel = Vec::new();
    for (i, t) in fx.data.eval_tasks.iter().enumerate() {
        for (k, hw) in fx.data.hardware.iter().enumerate() {
            for r in sel.rank_methods(t, hw).unwrap() {
                let j = truth.method_position(r.method).unwrap();
                rel.push((r.predicted_runtime_s / truth.get(i, j, k).unwrap()).ln().abs());
            }
        }
    }
    let mean = rel.iter().sum::<f64>() / rel.len() as f64;
    assert!(mean < 0.1, "mean |log error| {mean}");
}
