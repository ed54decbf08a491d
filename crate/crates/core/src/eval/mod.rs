//! Evaluation: metrics, the synthetic generator, the trial protocol and the
//! embedding ablation grid.

pub mod ablation;
pub mod metrics;
pub mod protocol;
pub mod synth;

pub use ablation::{run_ablation, AblationReport};
pub use metrics::{acceleration_ratio, f1_score, macro_f1, mean_rank, selection_accuracy, F1Average, TrialOutcome};
pub use protocol::{evaluate_synthetic, run_protocol, sample_trials, EvalConfig, ProtocolReport, SelectorMetrics};
pub use synth::{generate_synthetic, SynthData, SynthSpec};
