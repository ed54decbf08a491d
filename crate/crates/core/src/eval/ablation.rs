//! Embedding ablation: every (prompt style, SVD rank) pair evaluated on one
//! shared trial sample.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::protocol::{eval_set_for, evaluate_fitted, fit_selectors, sample_trials, EvalConfig, SelectorMetrics};
use super::synth::generate_synthetic;
use crate::embedding::{Embedder, PromptStyle, RankClamp};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub style: PromptStyle,
    pub rank: usize,
    /// `seen` for the one-hot arm, `unseen` otherwise.
    pub evaluated_on: String,
    pub clamps: Vec<RankClamp>,
    pub selectors: std::collections::BTreeMap<String, SelectorMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub trials: usize,
    pub seed: u64,
    pub cells: Vec<AblationCell>,
}

impl AblationReport {
    pub fn cell(&self, style: PromptStyle, rank: usize) -> Option<&AblationCell> {
        self.cells.iter().find(|c| c.style == style && c.rank == rank)
    }
}

/// Runs the style × rank grid. `cfg.style` and `cfg.rank` are ignored.
pub fn run_ablation(cfg: &EvalConfig, styles: &[PromptStyle], ranks: &[usize]) -> Result<AblationReport> {
    let data = generate_synthetic(&cfg.synth)?;
    let embedder = Arc::new(Embedder::new(cfg.provider.clone())?);
    let mut cells = Vec::new();
    for &style in styles {
        let set = eval_set_for(&data, style)?;
        // Same seed for every arm; arms on the same evaluation set therefore
        // share identical contexts.
        let trials = sample_trials(set.tasks.len(), set.hardware.len(), cfg.trials, cfg.trial_seed);
        for &rank in ranks {
            let fitted = fit_selectors(
                &data,
                &cfg.selectors,
                cfg.include_oracle.then_some(&cfg.synth),
                style,
                rank,
                embedder.clone(),
            )?;
            let report = evaluate_fitted(&fitted, &set, &trials, cfg.budget)?;
            cells.push(AblationCell {
                style,
                rank,
                evaluated_on: set.label.clone(),
                clamps: fitted.space.clamps.clone(),
                selectors: report.metrics(),
            });
        }
    }
    Ok(AblationReport {
        trials: cfg.trials,
        seed: cfg.trial_seed,
        cells,
    })
}
