//! Auditing the arbitrariness of binary-classification learning processes.
//!
//! The crate bootstraps `B` training replicates of a learner, records every
//! replicate's predictions on a shared test set, and measures per-instance
//! variance and self-consistency (SC). Group-level differences in SC are
//! summarized as the Wasserstein-1 distance between the groups' SC CDFs.
//! [`ensemble`] implements κ-gated abstention ensembles (simple and super)
//! that predict only where the replicates agree, and [`harness`] runs the
//! whole protocol over several train/test splits.
//!
//! ```
//! use scaudit_core::metrics::{self_consistency, variance_estimate, VoteCount};
//! use scaudit_core::CostModel;
//!
//! let votes = VoteCount::new(25, 76, 0).unwrap();
//! let sc = self_consistency(&votes).unwrap();
//! let var = variance_estimate(&votes, &CostModel::default()).unwrap();
//! assert!((sc - 0.62376).abs() < 1e-5);
//! assert!((sc + var - 1.0).abs() < 1e-12);
//! ```

pub mod bootstrap;
pub mod classifiers;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod seed;
pub mod synthetic;

pub use bootstrap::{
    build_prediction_matrix, expected_error, ExpectedError, PredictionMatrix, ReplicatePlan,
};
pub use classifiers::{CostModel, ModelSpec, TrainedModel};
pub use data::{PrepRecipe, Schema, SplitPlan, TabularDataset};
pub use ensemble::{AbstentionPolicy, Aggregation, EnsembleOutcome, SuperSpec};
pub use error::{Error, Result};
pub use harness::{emit_report, run_experiment, ExperimentConfig, RunSummary};
pub use metrics::{GroupReport, ScDistribution, Vote, VoteCount};
