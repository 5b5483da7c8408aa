//! Bootstrap replicates and the replicate × test-instance prediction matrix.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{fit_rows, label_from_proba, CostModel, ModelSpec};
use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, stream};

pub const DEFAULT_REPLICATES: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicatePlan {
    pub replicate_count: usize,
    pub base_seed: u64,
    /// Rows drawn per replicate; the training-set size when `None`.
    #[serde(default)]
    pub resample_size: Option<usize>,
}

impl ReplicatePlan {
    pub fn new(replicate_count: usize, base_seed: u64) -> Result<Self> {
        let plan = ReplicatePlan {
            replicate_count,
            base_seed,
            resample_size: None,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicate_count < 2 {
            return Err(Error::Plan(format!(
                "need at least 2 replicates, got {}",
                self.replicate_count
            )));
        }
        if self.resample_size == Some(0) {
            return Err(Error::Plan("resample_size must be positive".into()));
        }
        Ok(())
    }

    pub fn replicate_seed(&self, b: usize) -> u64 {
        derive_seed(derive_seed(self.base_seed, stream::REPLICATE), b as u64)
    }

    /// Seed handed to the learner for replicate `b`.
    pub fn fit_seed(&self, b: usize) -> u64 {
        derive_seed(self.replicate_seed(b), stream::FIT)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.replicate_count)
            .map(|b| self.replicate_seed(b))
            .collect()
    }
}

/// `size` indices drawn uniformly with replacement from `0..n`.
pub fn resample_indices(n: usize, size: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    (0..size).map(|_| rng.random_range(0..n)).collect()
}

pub fn make_replicates(train: &TabularDataset, plan: &ReplicatePlan) -> Result<Vec<Vec<usize>>> {
    plan.validate()?;
    let n = train.n();
    let size = plan.resample_size.unwrap_or(n);
    Ok((0..plan.replicate_count)
        .map(|b| resample_indices(n, size, plan.replicate_seed(b)))
        .collect())
}

/// Runs `f(0..count)` on `workers` threads and returns results in index order.
pub(crate) fn par_map<T, F>(workers: usize, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers <= 1 {
        return Ok((0..count).map(f).collect());
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Input(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
}

/// How the label matrix relates to the probability matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LabelSource {
    /// `label = 1[probability ≥ τ]`.
    Thresholded,
    /// Each row is a bag of `inner_count` models: the label is their majority
    /// vote and the probability their mean probability.
    BagMajority { inner_count: usize },
}

/// Replicate × test-instance outputs: row `b` holds model `b`'s predictions
/// on the whole test set.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    probabilities: Array2<f64>,
    labels: Array2<u8>,
    test_groups: Vec<u8>,
    test_labels: Vec<u8>,
    costs: CostModel,
    seeds: Vec<u64>,
    source: LabelSource,
}

impl PredictionMatrix {
    pub fn new(
        probabilities: Array2<f64>,
        labels: Array2<u8>,
        test_groups: Vec<u8>,
        test_labels: Vec<u8>,
        costs: CostModel,
        seeds: Vec<u64>,
        source: LabelSource,
    ) -> Result<Self> {
        let (b, t) = probabilities.dim();
        if labels.dim() != (b, t)
            || test_groups.len() != t
            || test_labels.len() != t
            || seeds.len() != b
        {
            return Err(Error::Input(format!(
                "inconsistent prediction matrix: probabilities {b}×{t}, labels {:?}, {} groups, {} test labels, {} seeds",
                labels.dim(),
                test_groups.len(),
                test_labels.len(),
                seeds.len()
            )));
        }
        if b < 2 {
            return Err(Error::UndefinedSc(b));
        }
        costs.validate()?;
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Input("probabilities must lie in [0, 1]".into()));
        }
        if labels
            .iter()
            .chain(&test_groups)
            .chain(&test_labels)
            .any(|&v| v > 1)
        {
            return Err(Error::Input("labels and groups must be 0 or 1".into()));
        }
        if source == LabelSource::Thresholded
            && probabilities
                .iter()
                .zip(labels.iter())
                .any(|(&p, &l)| label_from_proba(p, &costs) != l)
        {
            return Err(Error::Input(
                "labels disagree with thresholded probabilities".into(),
            ));
        }
        Ok(PredictionMatrix {
            probabilities,
            labels,
            test_groups,
            test_labels,
            costs,
            seeds,
            source,
        })
    }

    /// Labels are derived as `1[p ≥ τ]`.
    pub fn from_probabilities(
        probabilities: Array2<f64>,
        test_groups: Vec<u8>,
        test_labels: Vec<u8>,
        costs: CostModel,
        seeds: Vec<u64>,
    ) -> Result<Self> {
        let labels = probabilities.mapv(|p| label_from_proba(p, &costs));
        Self::new(
            probabilities,
            labels,
            test_groups,
            test_labels,
            costs,
            seeds,
            LabelSource::Thresholded,
        )
    }

    pub fn replicates(&self) -> usize {
        self.probabilities.nrows()
    }

    pub fn instances(&self) -> usize {
        self.probabilities.ncols()
    }

    pub fn probabilities(&self) -> &Array2<f64> {
        &self.probabilities
    }

    pub fn labels(&self) -> &Array2<u8> {
        &self.labels
    }

    pub fn test_groups(&self) -> &[u8] {
        &self.test_groups
    }

    pub fn test_labels(&self) -> &[u8] {
        &self.test_labels
    }

    pub fn costs(&self) -> &CostModel {
        &self.costs
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn source(&self) -> LabelSource {
        self.source
    }

    /// Number of replicates that predicted 1 on instance `t`.
    pub fn positive_votes(&self, t: usize) -> usize {
        self.labels.column(t).iter().filter(|&&l| l == 1).count()
    }

    pub fn mean_probability(&self, t: usize) -> f64 {
        self.probabilities.column(t).mean().unwrap_or(0.0)
    }

    /// Writes the long-format CSV (`replicate,instance,probability,label`)
    /// and the JSON header next to it.
    pub fn write(&self, csv_path: &Path, header_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path).map_err(|e| Error::csv(csv_path, e))?;
        w.write_record(["replicate", "instance", "probability", "label"])
            .map_err(|e| Error::csv(csv_path, e))?;
        for ((b, t), p) in self.probabilities.indexed_iter() {
            w.write_record([
                b.to_string(),
                t.to_string(),
                p.to_string(),
                self.labels[[b, t]].to_string(),
            ])
            .map_err(|e| Error::csv(csv_path, e))?;
        }
        w.flush().map_err(|e| Error::io(csv_path, e))?;

        let header = MatrixHeader {
            replicates: self.replicates(),
            instances: self.instances(),
            tau: self.costs.threshold(),
            costs: self.costs,
            seeds: self.seeds.clone(),
            label_source: self.source,
            test_groups: self.test_groups.clone(),
            test_labels: self.test_labels.clone(),
        };
        let file = File::create(header_path).map_err(|e| Error::io(header_path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &header)
            .map_err(|e| Error::json(header_path, e))
    }

    pub fn read(csv_path: &Path, header_path: &Path) -> Result<Self> {
        let file = File::open(header_path).map_err(|e| Error::io(header_path, e))?;
        let header: MatrixHeader = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::json(header_path, e))?;
        let (b, t) = (header.replicates, header.instances);
        let mut probabilities = Array2::from_elem((b, t), f64::NAN);
        let mut labels = Array2::zeros((b, t));
        let mut rdr = csv::Reader::from_path(csv_path).map_err(|e| Error::csv(csv_path, e))?;
        let mut seen = 0usize;
        for row in rdr.deserialize::<(usize, usize, f64, u8)>() {
            let (rb, rt, p, l) = row.map_err(|e| Error::csv(csv_path, e))?;
            if rb >= b || rt >= t {
                return Err(Error::Input(format!(
                    "cell ({rb}, {rt}) outside a {b}×{t} matrix"
                )));
            }
            probabilities[[rb, rt]] = p;
            labels[[rb, rt]] = l;
            seen += 1;
        }
        if seen != b * t || probabilities.iter().any(|p| p.is_nan()) {
            return Err(Error::Input(format!(
                "expected {} cells, read {seen}",
                b * t
            )));
        }
        Self::new(
            probabilities,
            labels,
            header.test_groups,
            header.test_labels,
            header.costs,
            header.seeds,
            header.label_source,
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixHeader {
    replicates: usize,
    instances: usize,
    tau: f64,
    costs: CostModel,
    seeds: Vec<u64>,
    label_source: LabelSource,
    test_groups: Vec<u8>,
    test_labels: Vec<u8>,
}

pub(crate) fn check_compatible(train: &TabularDataset, test: &TabularDataset) -> Result<()> {
    if train.m() != test.m() {
        return Err(Error::Input(format!(
            "train has {} features but test has {}",
            train.m(),
            test.m()
        )));
    }
    if let Some(v) = train
        .features()
        .iter()
        .chain(test.features().iter())
        .find(|v| !v.is_finite())
    {
        return Err(Error::Input(format!("non-finite feature value {v}")));
    }
    Ok(())
}

/// Trains one model per bootstrap replicate of `train` and records its
/// probabilities and thresholded labels on every row of `test`.
///
/// Replicate `b` depends only on `(plan.base_seed, b)`, so the matrix is the
/// same for any `workers`.
pub fn build_prediction_matrix(
    train: &TabularDataset,
    test: &TabularDataset,
    spec: &ModelSpec,
    costs: &CostModel,
    plan: &ReplicatePlan,
    workers: usize,
) -> Result<PredictionMatrix> {
    plan.validate()?;
    spec.validate()?;
    costs.validate()?;
    check_compatible(train, test)?;
    let replicates = make_replicates(train, plan)?;
    let x = train.features().view();

    let rows = par_map(workers, plan.replicate_count, |b| -> Result<Vec<f64>> {
        let model = fit_rows(
            spec,
            x,
            train.labels(),
            Some(&replicates[b]),
            plan.fit_seed(b),
        )?;
        model.predict_proba_rows(test.features())
    })?;

    let (b, t) = (plan.replicate_count, test.n());
    let mut probabilities = Array2::zeros((b, t));
    for (i, row) in rows.into_iter().enumerate() {
        let row = row.map_err(|e| Error::Replicate {
            index: i,
            source: Box::new(e),
        })?;
        probabilities
            .row_mut(i)
            .assign(&ndarray::ArrayView1::from(&row));
    }
    PredictionMatrix::from_probabilities(
        probabilities,
        test.group().to_vec(),
        test.labels().to_vec(),
        *costs,
        plan.seeds(),
    )
}

/// Expected loss of a single replicate model, estimated by averaging over rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedError {
    pub per_instance: Vec<f64>,
    pub overall: f64,
    /// Mean over instances of group 0 and group 1; `None` when a group is absent.
    pub by_group: [Option<f64>; 2],
}

impl ExpectedError {
    /// Mean per-instance expected loss over `indices`; `None` when empty.
    pub fn restricted(&self, indices: &[usize]) -> Option<f64> {
        mean(indices.iter().map(|&i| self.per_instance[i]))
    }
}

pub(crate) fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

pub fn expected_error(matrix: &PredictionMatrix, costs: &CostModel) -> ExpectedError {
    let b = matrix.replicates() as f64;
    let per_instance: Vec<f64> = (0..matrix.instances())
        .map(|t| {
            let o = matrix.test_labels[t];
            matrix
                .labels
                .column(t)
                .iter()
                .map(|&y| costs.loss(o, y))
                .sum::<f64>()
                / b
        })
        .collect();
    let by_group = [0u8, 1].map(|g| {
        mean(
            per_instance
                .iter()
                .zip(&matrix.test_groups)
                .filter(|(_, &gg)| gg == g)
                .map(|(e, _)| *e),
        )
    });
    ExpectedError {
        overall: mean(per_instance.iter().copied()).unwrap_or(0.0),
        per_instance,
        by_group,
    }
}
