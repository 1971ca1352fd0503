//! Learned solver: a small two-head network trained offline on oracle labels
//! and queried with a single forward pass per instance.

mod features;
mod format;
mod infer;
mod network;
mod train;

pub use features::{feature_len, featurize, raw_features, FeatureStats};
pub use format::{decode_model, encode_model, load_model, save_model, MODEL_HEADER};
pub use infer::{
    evaluate, infer_solution, infer_solution_with, score_predictions, DecisionRule, EvalMetrics,
    MIN_TIMED_CALLS,
};
pub use network::{Dense, MtlModel, Prediction};
pub use train::{
    log_csv, loss, loss_and_gradients, loss_terms, split_indices, train, EpochLog, LossTerms,
    Sample, TrainConfig, TrainOutcome,
};
