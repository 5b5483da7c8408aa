use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, SplitCriterion, TreeParams};
use crate::bootstrap::resample_indices;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, stream};

/// Number of features considered at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    #[default]
    All,
    Sqrt,
    Log2,
    Count(usize),
}

impl MaxFeatures {
    pub fn validate(&self) -> Result<()> {
        match self {
            MaxFeatures::Count(0) => {
                Err(Error::Input("max_features count must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn resolve(&self, m: usize) -> usize {
        let k = match *self {
            MaxFeatures::All => m,
            MaxFeatures::Sqrt => (m as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (m as f64).log2().floor() as usize,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, m.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub criterion: SplitCriterion,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 50,
            max_features: MaxFeatures::Sqrt,
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
            criterion: SplitCriterion::Gini,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Input("a forest needs at least one tree".into()));
        }
        self.tree_params().validate()
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            min_samples_split: self.min_samples_split,
            criterion: self.criterion,
            max_features: self.max_features,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
}

impl RandomForest {
    /// Seed for tree `t` of a forest trained with `seed`.
    pub fn tree_seed(seed: u64, t: usize) -> u64 {
        derive_seed(derive_seed(seed, stream::TREE), t as u64)
    }

    /// The bootstrap of `n` training rows used by the tree with `tree_seed`.
    pub fn tree_bootstrap(n: usize, tree_seed: u64) -> Vec<usize> {
        resample_indices(n, n, derive_seed(tree_seed, stream::REPLICATE))
    }

    pub fn fit_rows(
        x: ArrayView2<'_, f64>,
        y: &[u8],
        rows: &[usize],
        params: &ForestParams,
        seed: u64,
    ) -> Self {
        let tree_params = params.tree_params();
        let trees = (0..params.n_trees)
            .map(|t| {
                let tree_seed = Self::tree_seed(seed, t);
                if params.bootstrap {
                    let picks = Self::tree_bootstrap(rows.len(), tree_seed);
                    let sample: Vec<usize> = picks.iter().map(|&i| rows[i]).collect();
                    DecisionTree::fit_rows(x, y, &sample, &tree_params, tree_seed)
                } else {
                    DecisionTree::fit_rows(x, y, rows, &tree_params, tree_seed)
                }
            })
            .collect();
        RandomForest {
            trees,
            n_features: x.ncols(),
        }
    }

    /// Mean of the trees' leaf probabilities.
    pub fn proba(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.trees.iter().map(|t| t.proba(x)).sum::<f64>() / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    use crate::classifiers::{fit, ModelSpec, TrainedModel};
    use crate::data::TabularDataset;

    fn wavy(n: usize) -> TabularDataset {
        let x = Array2::from_shape_fn((n, 3), |(i, j)| ((i * (j + 3)) % 17) as f64 / 4.0);
        let y = (0..n).map(|i| u8::from((i * 7) % 5 < 2)).collect();
        TabularDataset::new(x, vec![0; n], y, vec!["a".into(), "b".into(), "c".into()]).unwrap()
    }

    #[test]
    fn resolve_feature_counts() {
        assert_eq!(MaxFeatures::All.resolve(9), 9);
        assert_eq!(MaxFeatures::Sqrt.resolve(9), 3);
        assert_eq!(MaxFeatures::Sqrt.resolve(2), 1);
        assert_eq!(MaxFeatures::Log2.resolve(8), 3);
        assert_eq!(MaxFeatures::Count(20).resolve(4), 4);
    }

    #[test]
    fn one_tree_forest_equals_tree_on_same_bootstrap() {
        let data = wavy(60);
        let seed = 1234;
        let forest_spec = ModelSpec::Forest(ForestParams {
            n_trees: 1,
            max_features: MaxFeatures::All,
            ..ForestParams::default()
        });
        let TrainedModel::Forest(forest) = fit(&forest_spec, &data, seed).unwrap() else {
            panic!("expected forest");
        };

        let tree_seed = RandomForest::tree_seed(seed, 0);
        let rows = RandomForest::tree_bootstrap(data.n(), tree_seed);
        let resampled = data.select(&rows);
        let tree = DecisionTree::fit_rows(
            resampled.features().view(),
            resampled.labels(),
            &(0..resampled.n()).collect::<Vec<_>>(),
            &TreeParams::default(),
            tree_seed,
        );
        assert_eq!(forest.trees[0], tree);
        for i in 0..data.n() {
            assert_eq!(forest.proba(data.row(i)), tree.proba(data.row(i)));
        }
    }

    #[test]
    fn trees_differ_and_seed_controls_them() {
        let data = wavy(80);
        let spec = ModelSpec::Forest(ForestParams {
            n_trees: 5,
            ..ForestParams::default()
        });
        let a = fit(&spec, &data, 1).unwrap();
        let b = fit(&spec, &data, 2).unwrap();
        assert_eq!(a, fit(&spec, &data, 1).unwrap());
        assert_ne!(a, b);
        let TrainedModel::Forest(f) = a else { panic!() };
        assert!(f.trees.windows(2).any(|w| w[0] != w[1]));
    }
}
