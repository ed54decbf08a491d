//! Per-trial outcomes and the aggregate selection metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{MethodConfig, RankedMethod};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub task: String,
    pub hardware: String,
    pub selected: MethodConfig,
    pub true_best: MethodConfig,
    pub predicted_ranking: Vec<MethodConfig>,
    pub true_runtimes: Vec<(MethodConfig, f64)>,
    pub selected_runtime_s: f64,
    pub mean_runtime_s: f64,
}

impl TrialOutcome {
    pub fn new(
        task: impl Into<String>,
        hardware: impl Into<String>,
        selected: MethodConfig,
        ranking: &[RankedMethod],
        true_runtimes: Vec<(MethodConfig, f64)>,
    ) -> Result<Self> {
        if true_runtimes.is_empty() {
            return Err(Error::invalid("trial has no true runtimes"));
        }
        let true_best = true_runtimes
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.index().cmp(&b.0.index())))
            .expect("non-empty")
            .0;
        let selected_runtime_s = true_runtimes
            .iter()
            .find(|(m, _)| *m == selected)
            .map(|p| p.1)
            .ok_or_else(|| Error::Integrity(format!("no true runtime for selected method {selected}")))?;
        let mean_runtime_s = true_runtimes.iter().map(|p| p.1).sum::<f64>() / true_runtimes.len() as f64;
        Ok(TrialOutcome {
            task: task.into(),
            hardware: hardware.into(),
            selected,
            true_best,
            predicted_ranking: ranking.iter().map(|r| r.method).collect(),
            true_runtimes,
            selected_runtime_s,
            mean_runtime_s,
        })
    }

    /// 1-based position of the true best method in the predicted ranking.
    pub fn rank_of_true_best(&self) -> Result<usize> {
        self.predicted_ranking
            .iter()
            .position(|m| *m == self.true_best)
            .map(|p| p + 1)
            .ok_or_else(|| Error::Integrity(format!("true best {} missing from ranking", self.true_best)))
    }
}

fn non_empty(outcomes: &[TrialOutcome]) -> Result<()> {
    if outcomes.is_empty() {
        return Err(Error::invalid("no trial outcomes"));
    }
    Ok(())
}

pub fn selection_accuracy(outcomes: &[TrialOutcome]) -> Result<f64> {
    non_empty(outcomes)?;
    Ok(outcomes.iter().filter(|o| o.selected == o.true_best).count() as f64 / outcomes.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Average {
    Macro,
    Weighted,
}

/// F1 over the classes that occur among the true labels, averaged
/// uniformly (macro) or by true-label support (weighted).
pub fn f1_score(outcomes: &[TrialOutcome], average: F1Average) -> Result<f64> {
    non_empty(outcomes)?;
    // (tp, fp, fn, support) per class.
    let mut counts: BTreeMap<MethodConfig, (usize, usize, usize, usize)> = BTreeMap::new();
    for o in outcomes {
        counts.entry(o.true_best).or_default().3 += 1;
        if o.selected == o.true_best {
            counts.entry(o.selected).or_default().0 += 1;
        } else {
            counts.entry(o.selected).or_default().1 += 1;
            counts.entry(o.true_best).or_default().2 += 1;
        }
    }
    let (mut total, mut weight) = (0.0, 0.0);
    for (tp, fp, fneg, support) in counts.values().copied() {
        if support == 0 {
            continue;
        }
        let f1 = 2.0 * tp as f64 / (2 * tp + fp + fneg) as f64;
        let w = match average {
            F1Average::Macro => 1.0,
            F1Average::Weighted => support as f64,
        };
        total += w * f1;
        weight += w;
    }
    Ok(total / weight)
}

pub fn macro_f1(outcomes: &[TrialOutcome]) -> Result<f64> {
    f1_score(outcomes, F1Average::Macro)
}

/// Mean over trials of (mean runtime across methods) / (selected runtime);
/// larger is better.
pub fn acceleration_ratio(outcomes: &[TrialOutcome]) -> Result<f64> {
    non_empty(outcomes)?;
    let mut sum = 0.0;
    for o in outcomes {
        if !(o.selected_runtime_s > 0.0 && o.mean_runtime_s > 0.0) {
            return Err(Error::invalid(format!("trial {} has non-positive runtimes", o.task)));
        }
        sum += o.mean_runtime_s / o.selected_runtime_s;
    }
    Ok(sum / outcomes.len() as f64)
}

pub fn mean_rank(outcomes: &[TrialOutcome]) -> Result<f64> {
    non_empty(outcomes)?;
    let mut sum = 0usize;
    for o in outcomes {
        sum += o.rank_of_true_best()?;
    }
    Ok(sum as f64 / outcomes.len() as f64)
}
