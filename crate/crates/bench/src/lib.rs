//! Fixtures shared by the criterion benchmarks in `benches/`.

use scaudit_core::bootstrap::{build_prediction_matrix, PredictionMatrix, ReplicatePlan};
use scaudit_core::classifiers::{CostModel, ModelSpec, TreeParams};
use scaudit_core::data::{train_test_split, SplitPlan, TabularDataset};
use scaudit_core::synthetic::half_noisy;

pub fn noisy_split(n: usize, seed: u64) -> (TabularDataset, TabularDataset) {
    let data = half_noisy(n, 0.3, seed);
    train_test_split(&data, &SplitPlan::new(seed, 0.2, 1).expect("valid plan"), 0)
        .expect("valid split")
}

pub fn tree_spec(depth: usize) -> ModelSpec {
    ModelSpec::Tree(TreeParams {
        max_depth: Some(depth),
        ..TreeParams::default()
    })
}

/// A `replicates × 0.2n` matrix of depth-8 trees on the noisy task.
pub fn noisy_matrix(n: usize, replicates: usize, seed: u64) -> PredictionMatrix {
    let (train, test) = noisy_split(n, seed);
    let plan = ReplicatePlan::new(replicates, seed).expect("valid plan");
    build_prediction_matrix(
        &train,
        &test,
        &tree_spec(8),
        &CostModel::default(),
        &plan,
        1,
    )
    .expect("matrix builds")
}
