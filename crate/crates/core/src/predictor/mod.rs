//! The runtime meta-learner and its linear baseline.

pub mod features;
pub mod gbm;
pub mod ridge;

pub use features::{build_features, FeatureLayout};
pub use gbm::{train_gbm, GbmHyperparams, GbmModel, TargetTransform};
pub use ridge::{train_ridge, RidgeModel};
