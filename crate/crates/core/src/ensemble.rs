//! Ensembling with abstention: predict the majority class only where the
//! ensemble members are self-consistent enough, otherwise abstain.
//!
//! *Simple* ensembling aggregates the base models of a [`PredictionMatrix`].
//! *Super* ensembling first replaces every base model by a plain
//! majority-vote bag trained on bootstraps of its replicate, then aggregates
//! the bags.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    check_compatible, expected_error, mean, par_map, resample_indices, LabelSource,
    PredictionMatrix, ReplicatePlan,
};
use crate::classifiers::{fit_rows, label_from_proba, CostModel, ModelSpec};
use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::metrics::{group_report, self_consistency, vote_count, GroupReport, Vote, VoteCount};
use crate::seed::{derive_seed, stream};

pub const DEFAULT_KAPPA: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Majority class of the votes.
    #[default]
    Vote,
    /// `1[mean probability ≥ τ]`; abstention is still decided by vote SC.
    ProbabilityAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbstentionPolicy {
    pub kappa: f64,
    #[serde(default)]
    pub aggregation: Aggregation,
}

impl Default for AbstentionPolicy {
    fn default() -> Self {
        AbstentionPolicy {
            kappa: DEFAULT_KAPPA,
            aggregation: Aggregation::Vote,
        }
    }
}

impl AbstentionPolicy {
    pub fn new(kappa: f64, aggregation: Aggregation) -> Result<Self> {
        let p = AbstentionPolicy { kappa, aggregation };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.kappa) {
            return Err(Error::Input(format!(
                "kappa must lie in [0.5, 1], got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

fn gate(v: &VoteCount, kappa: f64) -> Result<(f64, Option<u8>)> {
    let sc = self_consistency(v)?;
    let majority = match v.b1.cmp(&v.b0) {
        std::cmp::Ordering::Greater => Some(1),
        std::cmp::Ordering::Less => Some(0),
        std::cmp::Ordering::Equal => None,
    };
    Ok((sc, if sc >= kappa { majority } else { None }))
}

/// κ-majority of one column of votes: the majority class if the column's
/// self-consistency reaches κ, otherwise (or on a tie) `Abstain`.
pub fn aggregate_votes(votes: &[Vote], policy: &AbstentionPolicy) -> Result<Vote> {
    policy.validate()?;
    let (_, decision) = gate(&vote_count(votes)?, policy.kappa)?;
    Ok(decision.map_or(Vote::Abstain, Vote::from_label))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOutcome {
    pub decisions: Vec<Vote>,
    /// Self-consistency of the member votes on each instance.
    pub sc: Vec<f64>,
    pub prediction_set: Vec<usize>,
    pub abstention_set: Vec<usize>,
    pub kappa: f64,
}

impl EnsembleOutcome {
    pub fn abstention_rate(&self) -> f64 {
        self.abstention_set.len() as f64 / self.decisions.len().max(1) as f64
    }

    /// Writes `instance,group,label,decision,sc`, one row per test instance.
    /// Abstentions are written as an empty decision.
    pub fn write_csv(&self, path: &Path, groups: &[u8], labels: &[u8]) -> Result<()> {
        if groups.len() != self.decisions.len() || labels.len() != self.decisions.len() {
            return Err(Error::Input(format!(
                "{} decisions but {} groups and {} labels",
                self.decisions.len(),
                groups.len(),
                labels.len()
            )));
        }
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["instance", "group", "label", "decision", "sc"])
            .map_err(|e| Error::csv(path, e))?;
        for (t, decision) in self.decisions.iter().enumerate() {
            let decision = decision.label().map_or(String::new(), |l| l.to_string());
            w.write_record([
                t.to_string(),
                groups[t].to_string(),
                labels[t].to_string(),
                decision,
                self.sc[t].to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Aggregates every column of `matrix` under `policy`.
pub fn simple_ensemble(
    matrix: &PredictionMatrix,
    policy: &AbstentionPolicy,
) -> Result<EnsembleOutcome> {
    policy.validate()?;
    let b = matrix.replicates();
    let mut decisions = Vec::with_capacity(matrix.instances());
    let mut sc = Vec::with_capacity(matrix.instances());
    for t in 0..matrix.instances() {
        let b1 = matrix.positive_votes(t);
        let (level, majority) = gate(&VoteCount::new(b - b1, b1, 0)?, policy.kappa)?;
        let decision = match (majority, policy.aggregation) {
            (None, _) => Vote::Abstain,
            (Some(label), Aggregation::Vote) => Vote::from_label(label),
            (Some(_), Aggregation::ProbabilityAverage) => {
                Vote::from_label(label_from_proba(matrix.mean_probability(t), matrix.costs()))
            }
        };
        decisions.push(decision);
        sc.push(level);
    }
    let (abstention_set, prediction_set): (Vec<usize>, Vec<usize>) =
        (0..decisions.len()).partition(|&t| decisions[t] == Vote::Abstain);
    Ok(EnsembleOutcome {
        decisions,
        sc,
        prediction_set,
        abstention_set,
        kappa: policy.kappa,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperSpec {
    pub outer_count: usize,
    /// Models per inner bag; odd so the inner majority never ties.
    pub inner_count: usize,
}

impl Default for SuperSpec {
    fn default() -> Self {
        SuperSpec {
            outer_count: crate::bootstrap::DEFAULT_REPLICATES,
            inner_count: 51,
        }
    }
}

impl SuperSpec {
    pub fn validate(&self) -> Result<()> {
        if self.outer_count < 2 {
            return Err(Error::Plan(format!(
                "need at least 2 outer bags, got {}",
                self.outer_count
            )));
        }
        if self.inner_count == 0 || self.inner_count.is_multiple_of(2) {
            return Err(Error::Plan(format!(
                "inner_count must be odd, got {}",
                self.inner_count
            )));
        }
        Ok(())
    }
}

/// Seed of inner model `j` within outer bag `b`.
fn inner_seed(plan: &ReplicatePlan, b: usize, j: usize) -> u64 {
    derive_seed(
        derive_seed(plan.replicate_seed(b), stream::INNER_BAG),
        j as u64,
    )
}

/// Outer-bag prediction matrix for super ensembling.
///
/// Outer bag `b` starts from the same bootstrap replicate the simple ensemble
/// uses for base model `b`. It then trains `inner_count` models, each on a
/// bootstrap of that replicate, and predicts their majority vote. With
/// `inner_count = 1` the bag is the base model itself, trained on the
/// replicate with the base model's seed, so the matrix equals the simple
/// ensemble's.
pub fn build_super_matrix(
    train: &TabularDataset,
    test: &TabularDataset,
    spec: &ModelSpec,
    costs: &CostModel,
    super_spec: &SuperSpec,
    base_seed: u64,
    workers: usize,
) -> Result<PredictionMatrix> {
    super_spec.validate()?;
    spec.validate()?;
    costs.validate()?;
    check_compatible(train, test)?;
    let plan = ReplicatePlan::new(super_spec.outer_count, base_seed)?;
    let m = super_spec.inner_count;
    let n = train.n();
    let t_count = test.n();
    let x = train.features().view();

    let bags = par_map(
        workers,
        plan.replicate_count,
        |b| -> Result<(Vec<f64>, Vec<u8>)> {
            let outer = resample_indices(n, n, plan.replicate_seed(b));
            let mut prob_sum = vec![0.0; t_count];
            let mut ones = vec![0usize; t_count];
            for j in 0..m {
                let (rows, fit_seed) = if m == 1 {
                    (outer.clone(), plan.fit_seed(b))
                } else {
                    let seed = inner_seed(&plan, b, j);
                    let picks = resample_indices(n, n, seed);
                    (
                        picks.iter().map(|&i| outer[i]).collect(),
                        derive_seed(seed, stream::FIT),
                    )
                };
                let model =
                    fit_rows(spec, x, train.labels(), Some(&rows), fit_seed).map_err(|e| {
                        Error::Bag {
                            outer: b,
                            inner: j,
                            source: Box::new(e),
                        }
                    })?;
                let probs = model
                    .predict_proba_rows(test.features())
                    .map_err(|e| Error::Bag {
                        outer: b,
                        inner: j,
                        source: Box::new(e),
                    })?;
                for (t, p) in probs.into_iter().enumerate() {
                    prob_sum[t] += p;
                    ones[t] += usize::from(label_from_proba(p, costs));
                }
            }
            let probs = prob_sum.into_iter().map(|s| s / m as f64).collect();
            let labels = ones.into_iter().map(|k| u8::from(2 * k > m)).collect();
            Ok((probs, labels))
        },
    )?;

    let mut probabilities = Array2::zeros((plan.replicate_count, t_count));
    let mut labels = Array2::zeros((plan.replicate_count, t_count));
    for (b, bag) in bags.into_iter().enumerate() {
        let (p, l) = bag?;
        probabilities
            .row_mut(b)
            .assign(&ndarray::ArrayView1::from(&p));
        labels.row_mut(b).assign(&ndarray::ArrayView1::from(&l));
    }
    if m == 1 {
        return PredictionMatrix::from_probabilities(
            probabilities,
            test.group().to_vec(),
            test.labels().to_vec(),
            *costs,
            plan.seeds(),
        );
    }
    PredictionMatrix::new(
        probabilities,
        labels,
        test.group().to_vec(),
        test.labels().to_vec(),
        *costs,
        plan.seeds(),
        LabelSource::BagMajority { inner_count: m },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperOutcome {
    pub outcome: EnsembleOutcome,
    /// Outer-bag predictions the outcome was aggregated from.
    pub matrix: PredictionMatrix,
}

#[allow(clippy::too_many_arguments)]
pub fn super_ensemble(
    train: &TabularDataset,
    test: &TabularDataset,
    spec: &ModelSpec,
    costs: &CostModel,
    super_spec: &SuperSpec,
    policy: &AbstentionPolicy,
    base_seed: u64,
    workers: usize,
) -> Result<SuperOutcome> {
    policy.validate()?;
    let matrix = build_super_matrix(train, test, spec, costs, super_spec, base_seed, workers)?;
    let outcome = simple_ensemble(&matrix, policy)?;
    Ok(SuperOutcome { outcome, matrix })
}

/// Expected error of the base models on the abstained instances.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AbstentionReport {
    pub count: usize,
    pub expected_error: Option<f64>,
    pub by_group: [Option<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEvaluation {
    /// Ensemble metrics on the prediction set; `ar` covers the whole test set.
    pub prediction: GroupReport,
    pub abstention: AbstentionReport,
    /// Expected error of the base models on the prediction set.
    pub prediction_expected_error: Option<f64>,
}

/// Scores `outcome` against the test labels and splits the base models'
/// expected error into its prediction-set and abstention-set parts.
pub fn split_evaluate(
    outcome: &EnsembleOutcome,
    base: &PredictionMatrix,
    costs: &CostModel,
) -> Result<SplitEvaluation> {
    if outcome.decisions.len() != base.instances() {
        return Err(Error::Input(format!(
            "outcome covers {} instances but the matrix has {}",
            outcome.decisions.len(),
            base.instances()
        )));
    }
    let groups = base.test_groups();
    let prediction = group_report(
        &outcome.decisions,
        Some(&outcome.sc),
        groups,
        base.test_labels(),
    )?;
    let expected = expected_error(base, costs);
    let by_group = [0u8, 1].map(|g| {
        mean(
            outcome
                .abstention_set
                .iter()
                .filter(|&&t| groups[t] == g)
                .map(|&t| expected.per_instance[t]),
        )
    });
    Ok(SplitEvaluation {
        prediction,
        abstention: AbstentionReport {
            count: outcome.abstention_set.len(),
            expected_error: expected.restricted(&outcome.abstention_set),
            by_group,
        },
        prediction_expected_error: expected.restricted(&outcome.prediction_set),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    use crate::classifiers::TreeParams;
    use crate::metrics::sc_grid;
    use crate::seed::rng_from_seed;

    fn column(ones: usize, zeros: usize) -> Vec<Vote> {
        let mut v = vec![Vote::One; ones];
        v.extend(vec![Vote::Zero; zeros]);
        v
    }

    fn policy(kappa: f64) -> AbstentionPolicy {
        AbstentionPolicy::new(kappa, Aggregation::Vote).unwrap()
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(
            aggregate_votes(&column(76, 25), &policy(0.75)).unwrap(),
            Vote::Abstain
        );
        assert_eq!(
            aggregate_votes(&column(101, 0), &policy(0.75)).unwrap(),
            Vote::One
        );
        assert_eq!(
            aggregate_votes(&column(90, 11), &policy(0.75)).unwrap(),
            Vote::One
        );
        assert_eq!(
            aggregate_votes(&column(11, 90), &policy(0.75)).unwrap(),
            Vote::Zero
        );
        assert!(matches!(
            aggregate_votes(&column(1, 0), &policy(0.75)),
            Err(Error::UndefinedSc(1))
        ));
    }

    #[test]
    fn ties_abstain_even_at_minimum_kappa() {
        assert_eq!(
            aggregate_votes(&column(5, 5), &policy(0.5)).unwrap(),
            Vote::Abstain
        );
    }

    #[test]
    fn kappa_outside_range_is_rejected() {
        assert!(AbstentionPolicy::new(1.2, Aggregation::Vote).is_err());
        assert!(AbstentionPolicy::new(0.49, Aggregation::Vote).is_err());
        assert!(AbstentionPolicy::new(1.0, Aggregation::Vote).is_ok());
    }

    fn matrix_from_ones(b: usize, ones: &[usize]) -> PredictionMatrix {
        let mut probs = Array2::zeros((b, ones.len()));
        for (t, &k) in ones.iter().enumerate() {
            for r in 0..k {
                probs[[r, t]] = 0.9;
            }
            for r in k..b {
                probs[[r, t]] = 0.2;
            }
        }
        let n = ones.len();
        PredictionMatrix::from_probabilities(
            probs,
            vec![0; n],
            vec![1; n],
            CostModel::default(),
            (0..b as u64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_rows_never_abstain() {
        let m = matrix_from_ones(7, &[7, 0, 7, 0]);
        let out = simple_ensemble(&m, &policy(1.0)).unwrap();
        assert!(out.abstention_set.is_empty());
        assert_eq!(
            out.decisions,
            vec![Vote::One, Vote::Zero, Vote::One, Vote::Zero]
        );
    }

    #[test]
    fn half_kappa_abstains_only_below_half_self_consistency() {
        // Enumerate every split of 101 votes.
        let ones: Vec<usize> = (0..=101).collect();
        let m = matrix_from_ones(101, &ones);
        let out = simple_ensemble(&m, &policy(0.5)).unwrap();
        let expected: Vec<usize> = ones
            .iter()
            .copied()
            .filter(|&b1| 2.0 * (b1 * (101 - b1)) as f64 / 10100.0 > 0.5)
            .collect();
        assert_eq!(expected, (46..=55).collect::<Vec<_>>());
        assert_eq!(out.abstention_set, expected);
        assert_eq!(
            sc_grid(101).unwrap().iter().filter(|&&g| g < 0.5).count(),
            5
        );
    }

    #[test]
    fn abstention_set_grows_with_kappa() {
        let mut rng = rng_from_seed(4);
        let ones: Vec<usize> = (0..300).map(|_| rng.random_range(0..=31)).collect();
        let m = matrix_from_ones(31, &ones);
        let mut previous: Vec<usize> = Vec::new();
        for k in 0..=50 {
            let kappa = 0.5 + 0.01 * k as f64;
            let out = simple_ensemble(&m, &policy(kappa)).unwrap();
            assert!(previous.iter().all(|t| out.abstention_set.contains(t)));
            assert_eq!(out.prediction_set.len() + out.abstention_set.len(), 300);
            previous = out.abstention_set;
        }
    }

    #[test]
    fn kappa_one_predicts_only_unanimous_columns() {
        let m = matrix_from_ones(9, &[9, 8, 0, 1, 5]);
        let out = simple_ensemble(&m, &policy(1.0)).unwrap();
        assert_eq!(out.prediction_set, vec![0, 2]);
    }

    #[test]
    fn probability_average_uses_mean_probability_but_vote_gate() {
        // 8 of 9 rows say 0.9, one says 0.2 -> mean 0.822 ≥ 0.5.
        let m = matrix_from_ones(9, &[8, 5]);
        let p = AbstentionPolicy::new(0.75, Aggregation::ProbabilityAverage).unwrap();
        let out = simple_ensemble(&m, &p).unwrap();
        assert_eq!(out.decisions, vec![Vote::One, Vote::Abstain]);

        // Large τ: mean probability 0.822 falls below it even though the vote is unanimous-ish.
        let probs = m.probabilities().clone();
        let costs = CostModel::new(9.0, 1.0).unwrap();
        let m = PredictionMatrix::from_probabilities(
            probs,
            vec![0, 0],
            vec![1, 1],
            costs,
            (0..9).collect(),
        )
        .unwrap();
        let out = simple_ensemble(&m, &p).unwrap();
        assert_eq!(out.decisions, vec![Vote::Zero, Vote::Abstain]);
    }

    fn noisy(n: usize, seed: u64) -> TabularDataset {
        let mut rng = rng_from_seed(seed);
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
        let y = (0..n)
            .map(|i| {
                let clean = x[[i, 0]] > 0.0;
                u8::from(if rng.random::<f64>() < 0.25 {
                    !clean
                } else {
                    clean
                })
            })
            .collect();
        let g = (0..n).map(|i| u8::from(x[[i, 1]] > 0.0)).collect();
        TabularDataset::new(x, g, y, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn single_model_bags_reduce_to_simple_ensemble() {
        let train = noisy(60, 1);
        let test = noisy(25, 2);
        let spec = ModelSpec::Tree(TreeParams::default());
        let costs = CostModel::default();
        let super_spec = SuperSpec {
            outer_count: 7,
            inner_count: 1,
        };
        let sup = super_ensemble(
            &train,
            &test,
            &spec,
            &costs,
            &super_spec,
            &policy(0.75),
            5,
            1,
        )
        .unwrap();
        let base = crate::bootstrap::build_prediction_matrix(
            &train,
            &test,
            &spec,
            &costs,
            &ReplicatePlan::new(7, 5).unwrap(),
            1,
        )
        .unwrap();
        assert_eq!(sup.matrix, base);
        assert_eq!(sup.outcome, simple_ensemble(&base, &policy(0.75)).unwrap());
    }

    #[test]
    fn super_ensemble_is_worker_independent() {
        let train = noisy(50, 3);
        let test = noisy(20, 4);
        let spec = ModelSpec::Tree(TreeParams::default());
        let s = SuperSpec {
            outer_count: 5,
            inner_count: 3,
        };
        let a = super_ensemble(
            &train,
            &test,
            &spec,
            &CostModel::default(),
            &s,
            &policy(0.75),
            8,
            1,
        )
        .unwrap();
        let b = super_ensemble(
            &train,
            &test,
            &spec,
            &CostModel::default(),
            &s,
            &policy(0.75),
            8,
            3,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.matrix.source(),
            LabelSource::BagMajority { inner_count: 3 }
        );
    }

    #[test]
    fn even_inner_count_is_rejected() {
        assert!(SuperSpec {
            outer_count: 3,
            inner_count: 4
        }
        .validate()
        .is_err());
        assert!(SuperSpec {
            outer_count: 1,
            inner_count: 3
        }
        .validate()
        .is_err());
    }

    #[test]
    fn split_evaluate_edge_cases() {
        let m = matrix_from_ones(5, &[5, 0, 5]);
        let out = simple_ensemble(&m, &policy(0.75)).unwrap();
        let eval = split_evaluate(&out, &m, &CostModel::default()).unwrap();
        assert_eq!(eval.abstention.count, 0);
        assert_eq!(eval.abstention.expected_error, None);
        assert_eq!(eval.prediction.overall.ar, Some(0.0));

        let m = matrix_from_ones(4, &[2, 2]);
        let out = simple_ensemble(&m, &policy(0.75)).unwrap();
        let eval = split_evaluate(&out, &m, &CostModel::default()).unwrap();
        assert_eq!(eval.prediction.overall.ar, Some(1.0));
        assert_eq!(eval.prediction.overall.err, None);
        assert_eq!(eval.prediction.overall.fnr, None);
        assert_eq!(eval.abstention.expected_error, Some(0.5));
        assert_eq!(eval.prediction_expected_error, None);
    }

    #[test]
    fn outcome_csv_marks_abstentions_with_empty_decision() {
        let m = matrix_from_ones(4, &[4, 2, 0]);
        let out = simple_ensemble(&m, &policy(0.75)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("outcomes.csv");
        out.write_csv(&path, &[0, 1, 0], &[1, 1, 0]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "instance,group,label,decision,sc");
        assert_eq!(lines[1], "0,0,1,1,1");
        assert!(lines[2].starts_with("1,1,1,,0.33"));
        assert_eq!(lines[3], "2,0,0,0,1");
        assert!(out.write_csv(&path, &[0], &[1]).is_err());
    }
}
