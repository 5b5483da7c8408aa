//! Deterministic binary classifiers.
//!
//! Every model produces a probability `r(x) ∈ [0, 1]`; the label is
//! `1[r(x) ≥ τ]` where `τ` comes from the misclassification costs.

mod forest;
mod logistic;
mod tree;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};

pub use forest::{ForestParams, MaxFeatures, RandomForest};
pub use logistic::{LogisticModel, LogisticParams, LogisticTrace};
pub use tree::{DecisionTree, Node, SplitCriterion, TreeParams};

/// Misclassification costs: `c01` for a false positive, `c10` for a false negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c01: f64,
    pub c10: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { c01: 1.0, c10: 1.0 }
    }
}

impl CostModel {
    pub fn new(c01: f64, c10: f64) -> Result<Self> {
        let costs = CostModel { c01, c10 };
        costs.validate()?;
        Ok(costs)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |c: f64| c.is_finite() && c > 0.0;
        if ok(self.c01) && ok(self.c10) {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "costs must be positive and finite, got ({}, {})",
                self.c01, self.c10
            )))
        }
    }

    /// Decision threshold `c01 / (c01 + c10)`.
    pub fn threshold(&self) -> f64 {
        self.c01 / (self.c01 + self.c10)
    }

    /// Loss of predicting `predicted` when the observed label is `observed`.
    pub fn loss(&self, observed: u8, predicted: u8) -> f64 {
        match (observed, predicted) {
            (0, 1) => self.c01,
            (1, 0) => self.c10,
            _ => 0.0,
        }
    }

    pub fn max_cost(&self) -> f64 {
        self.c01.max(self.c10)
    }
}

pub fn cost_threshold(costs: &CostModel) -> f64 {
    costs.threshold()
}

/// Model family and its fixed hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Logistic(#[serde(default)] LogisticParams),
    Tree(#[serde(default)] TreeParams),
    Forest(#[serde(default)] ForestParams),
    /// Predicts the training positive rate everywhere.
    Constant,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Logistic(LogisticParams::default())
    }
}

impl ModelSpec {
    /// Default hyperparameters for a family name (`logistic`, `tree`, `forest`, `constant`).
    pub fn from_kind(kind: &str) -> Result<Self> {
        match kind {
            "logistic" | "lr" => Ok(ModelSpec::Logistic(LogisticParams::default())),
            "tree" | "dt" => Ok(ModelSpec::Tree(TreeParams::default())),
            "forest" | "rf" => Ok(ModelSpec::Forest(ForestParams::default())),
            "constant" => Ok(ModelSpec::Constant),
            other => Err(Error::Input(format!("unknown model kind `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Logistic(p) => p.validate(),
            ModelSpec::Tree(p) => p.validate(),
            ModelSpec::Forest(p) => p.validate(),
            ModelSpec::Constant => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Tree,
    Forest,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantModel {
    pub probability: f64,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Logistic(LogisticModel),
    Tree(DecisionTree),
    Forest(RandomForest),
    Constant(ConstantModel),
}

/// Summary of how training went, for logging and debugging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrainMeta {
    Iterations { iterations: usize, converged: bool },
    Depth { depth: usize },
    Forest { trees: usize, max_depth: usize },
    Constant,
}

/// Trains `spec` on `train`. Deterministic in `(spec, train, seed)`.
///
/// A training set with a single class yields a constant model for every
/// family.
pub fn fit(spec: &ModelSpec, train: &TabularDataset, seed: u64) -> Result<TrainedModel> {
    spec.validate()?;
    let x = train.features();
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite feature value {v}")));
    }
    fit_rows(spec, x.view(), train.labels(), None, seed)
}

/// Fits on `rows` of `x` (all rows when `None`); rows may repeat.
pub(crate) fn fit_rows(
    spec: &ModelSpec,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    rows: Option<&[usize]>,
    seed: u64,
) -> Result<TrainedModel> {
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..x.nrows()).collect();
            &all
        }
    };
    if rows.is_empty() {
        return Err(Error::Input("cannot train on an empty set".into()));
    }
    let positives = rows.iter().filter(|&&r| y[r] == 1).count();
    let rate = positives as f64 / rows.len() as f64;
    if positives == 0 || positives == rows.len() || matches!(spec, ModelSpec::Constant) {
        return Ok(TrainedModel::Constant(ConstantModel {
            probability: rate,
            n_features: x.ncols(),
        }));
    }
    Ok(match spec {
        ModelSpec::Logistic(p) => {
            let xs = x.select(ndarray::Axis(0), rows);
            let ys: Vec<u8> = rows.iter().map(|&r| y[r]).collect();
            TrainedModel::Logistic(LogisticModel::fit(xs.view(), &ys, p)?.0)
        }
        ModelSpec::Tree(p) => TrainedModel::Tree(DecisionTree::fit_rows(x, y, rows, p, seed)),
        ModelSpec::Forest(p) => TrainedModel::Forest(RandomForest::fit_rows(x, y, rows, p, seed)),
        ModelSpec::Constant => unreachable!(),
    })
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Logistic(_) => ModelKind::Logistic,
            TrainedModel::Tree(_) => ModelKind::Tree,
            TrainedModel::Forest(_) => ModelKind::Forest,
            TrainedModel::Constant(_) => ModelKind::Constant,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::Logistic(m) => m.weights.len(),
            TrainedModel::Tree(m) => m.n_features,
            TrainedModel::Forest(m) => m.n_features,
            TrainedModel::Constant(m) => m.n_features,
        }
    }

    pub fn train_meta(&self) -> TrainMeta {
        match self {
            TrainedModel::Logistic(m) => TrainMeta::Iterations {
                iterations: m.iterations,
                converged: m.converged,
            },
            TrainedModel::Tree(m) => TrainMeta::Depth { depth: m.depth() },
            TrainedModel::Forest(m) => TrainMeta::Forest {
                trees: m.trees.len(),
                max_depth: m.trees.iter().map(DecisionTree::depth).max().unwrap_or(0),
            },
            TrainedModel::Constant(_) => TrainMeta::Constant,
        }
    }

    pub fn predict_proba(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::Input(format!(
                "expected {} features, got {}",
                self.n_features(),
                x.len()
            )));
        }
        let p = match self {
            TrainedModel::Logistic(m) => m.proba(x),
            TrainedModel::Tree(m) => m.proba(x),
            TrainedModel::Forest(m) => m.proba(x),
            TrainedModel::Constant(m) => m.probability,
        };
        Ok(p.clamp(0.0, 1.0))
    }

    pub fn predict_label(&self, x: ArrayView1<'_, f64>, costs: &CostModel) -> Result<u8> {
        Ok(label_from_proba(self.predict_proba(x)?, costs))
    }

    pub fn predict_proba_rows(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        x.rows()
            .into_iter()
            .map(|row| self.predict_proba(row))
            .collect()
    }
}

pub fn predict_proba(model: &TrainedModel, x: ArrayView1<'_, f64>) -> Result<f64> {
    model.predict_proba(x)
}

pub fn predict_label(
    model: &TrainedModel,
    x: ArrayView1<'_, f64>,
    costs: &CostModel,
) -> Result<u8> {
    model.predict_label(x, costs)
}

/// `1[p ≥ τ]`; equality predicts the positive class.
pub fn label_from_proba(p: f64, costs: &CostModel) -> u8 {
    u8::from(p >= costs.threshold())
}
