use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forest::MaxFeatures;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    #[default]
    Gini,
    Entropy,
}

impl SplitCriterion {
    fn impurity(self, positives: f64, total: f64) -> f64 {
        if total <= 0.0 {
            return 0.0;
        }
        let p = positives / total;
        match self {
            SplitCriterion::Gini => 2.0 * p * (1.0 - p),
            SplitCriterion::Entropy => {
                let h = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
                h(p) + h(1.0 - p)
            }
        }
    }
}

/// CART hyperparameters. `max_depth = Some(0)` gives a single leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub criterion: SplitCriterion,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
            criterion: SplitCriterion::Gini,
            max_features: MaxFeatures::All,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 || self.min_samples_split < 2 {
            return Err(Error::Input(format!(
                "invalid tree hyperparameters {self:?}"
            )));
        }
        self.max_features.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes are stored in an arena; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [u8],
    params: &'a TreeParams,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf_value(&self, rows: &[usize]) -> f64 {
        let pos = rows.iter().filter(|&&r| self.y[r] == 1).count();
        pos as f64 / rows.len() as f64
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let m = self.x.ncols();
        let k = self.params.max_features.resolve(m);
        if k >= m {
            return (0..m).collect();
        }
        let mut picked = index::sample(&mut self.rng, m, k).into_vec();
        picked.sort_unstable();
        picked
    }

    /// Best split over `features`; ties keep the lowest feature, then the lowest threshold.
    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<Candidate> {
        let total = rows.len() as f64;
        let total_pos = rows.iter().filter(|&&r| self.y[r] == 1).count() as f64;
        let parent = self.params.criterion.impurity(total_pos, total);
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<Candidate> = None;
        let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(rows.len());

        for &f in features {
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (self.x[[r, f]], self.y[r])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0.0;
            for i in 0..pairs.len() - 1 {
                left_pos += f64::from(pairs[i].1);
                let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
                if lo == hi {
                    continue;
                }
                let n_left = i + 1;
                let n_right = pairs.len() - n_left;
                if n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let (nl, nr) = (n_left as f64, n_right as f64);
                let child = (nl / total) * self.params.criterion.impurity(left_pos, nl)
                    + (nr / total) * self.params.criterion.impurity(total_pos - left_pos, nr);
                let gain = parent - child;
                if best.as_ref().is_none_or(|b| gain > b.gain + 1e-12) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Candidate {
                        gain,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let value = self.leaf_value(&rows);
        self.nodes.push(Node::Leaf { value });

        let pure = value == 0.0 || value == 1.0;
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if pure || !depth_ok || rows.len() < self.params.min_samples_split {
            return id;
        }
        let features = self.candidate_features();
        let Some(split) = self.best_split(&rows, &features) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.x[[r, split.feature]] <= split.threshold);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

impl DecisionTree {
    /// Grows a tree greedily on `rows` of `x` (rows may repeat).
    pub fn fit_rows(
        x: ArrayView2<'_, f64>,
        y: &[u8],
        rows: &[usize],
        params: &TreeParams,
        seed: u64,
    ) -> DecisionTree {
        let mut builder = Builder {
            x,
            y,
            params,
            rng: rng_from_seed(derive_seed(seed, stream::FEATURES)),
            nodes: Vec::new(),
        };
        builder.grow(rows.to_vec(), 0);
        DecisionTree {
            nodes: builder.nodes,
            n_features: x.ncols(),
        }
    }

    pub fn proba(&self, x: ArrayView1<'_, f64>) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}
