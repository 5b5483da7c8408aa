//! The experiment protocol: for each of `S` train/test splits, build the
//! replicate prediction matrix, score the baseline and the abstention
//! ensembles, and aggregate mean ± STD over splits.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    build_prediction_matrix, PredictionMatrix, ReplicatePlan, DEFAULT_REPLICATES,
};
use crate::classifiers::{CostModel, ModelSpec};
use crate::data::{
    apply_recipe, load_csv, train_test_split, PrepRecipe, RawTable, Schema, SplitPlan,
    TabularDataset,
};
use crate::ensemble::{
    simple_ensemble, split_evaluate, super_ensemble, AbstentionPolicy, AbstentionReport, SuperSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{
    baseline_report, sc_cdf, sc_grid, sc_profile, Deltas, GroupMetrics, GroupReport, ScCdfs,
    DELTA_NAMES, METRIC_NAMES,
};
use crate::seed::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Expected behaviour of one replicate model.
    Baseline,
    Simple,
    Super,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Simple => "simple",
            Method::Super => "super",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "baseline" => Ok(Method::Baseline),
            "simple" => Ok(Method::Simple),
            "super" => Ok(Method::Super),
            other => Err(Error::Input(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    #[serde(flatten)]
    pub schema: Schema,
    /// Preprocessing recipe; when set, target and group columns come from it.
    #[serde(default)]
    pub recipe: Option<PathBuf>,
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

fn default_methods() -> Vec<Method> {
    vec![Method::Baseline, Method::Simple]
}

fn default_inner() -> usize {
    51
}

fn default_workers() -> usize {
    1
}

/// Everything that determines a run. `workers` and `output_dir` affect where
/// and how fast the run happens, not its results, and are not echoed into
/// the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitPlan,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub costs: CostModel,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub resample_size: Option<usize>,
    #[serde(default)]
    pub policy: AbstentionPolicy,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Models per inner bag for super ensembling; the outer count is `replicates`.
    #[serde(default = "default_inner")]
    pub inner_count: usize,
    #[serde(default = "default_workers", skip_serializing)]
    pub workers: usize,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetConfig) -> Self {
        ExperimentConfig {
            dataset,
            split: SplitPlan::default(),
            model: ModelSpec::default(),
            costs: CostModel::default(),
            replicates: DEFAULT_REPLICATES,
            resample_size: None,
            policy: AbstentionPolicy::default(),
            methods: default_methods(),
            inner_count: default_inner(),
            workers: 1,
            output_dir: None,
        }
    }

    /// Reads a JSON config; relative dataset and recipe paths are resolved
    /// against the config file's directory.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::json(path, e))?;
        if let Some(base) = path.parent() {
            config.dataset.path = base.join(&config.dataset.path);
            config.dataset.recipe = config.dataset.recipe.map(|p| base.join(p));
            config.output_dir = config.output_dir.map(|p| base.join(p));
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.model.validate()?;
        self.costs.validate()?;
        self.policy.validate()?;
        ReplicatePlan {
            replicate_count: self.replicates,
            base_seed: 0,
            resample_size: self.resample_size,
        }
        .validate()?;
        if self.methods.is_empty() {
            return Err(Error::Input("no methods selected".into()));
        }
        if self.methods.contains(&Method::Super) {
            self.super_spec().validate()?;
        }
        if self.workers == 0 {
            return Err(Error::Input("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn super_spec(&self) -> SuperSpec {
        SuperSpec {
            outer_count: self.replicates,
            inner_count: self.inner_count,
        }
    }

    /// Replicate plan of split `s`; each split draws its own replicates.
    pub fn replicate_plan(&self, s: usize) -> ReplicatePlan {
        ReplicatePlan {
            replicate_count: self.replicates,
            base_seed: derive_seed(derive_seed(self.split.seed, stream::REPLICATE), s as u64),
            resample_size: self.resample_size,
        }
    }

    fn methods_sorted(&self) -> Vec<Method> {
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        m
    }
}

pub fn load_dataset(config: &DatasetConfig) -> Result<TabularDataset> {
    match &config.recipe {
        Some(recipe_path) => {
            let recipe = PrepRecipe::from_json_file(recipe_path)?;
            apply_recipe(&RawTable::read_csv(&config.path)?, &recipe)
        }
        None => load_csv(&config.path, &config.schema),
    }
}

/// SC CDFs of one split, unmasked, as plain columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfRecord {
    pub grid: Vec<f64>,
    pub overall: Vec<f64>,
    pub group0: Option<Vec<f64>>,
    pub group1: Option<Vec<f64>>,
}

impl CdfRecord {
    fn from_cdfs(cdfs: &ScCdfs) -> Self {
        CdfRecord {
            grid: cdfs.overall.grid.clone(),
            overall: cdfs.overall.cdf.clone(),
            group0: cdfs.groups[0].as_ref().map(|d| d.cdf.clone()),
            group1: cdfs.groups[1].as_ref().map(|d| d.cdf.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: Method,
    pub report: GroupReport,
    /// Base-model expected error on the abstention set (ensembles only).
    pub abstention: Option<AbstentionReport>,
    /// Base-model expected error on the prediction set (ensembles only).
    pub prediction_expected_error: Option<f64>,
    pub w1: Option<f64>,
    /// Wasserstein-1 with CDF mass below κ set to zero.
    pub w1_masked: Option<f64>,
    pub cdf: CdfRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub split: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub methods: Vec<MethodRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Stat {
    /// Mean and population STD; undefined unless every value is defined.
    pub fn of(values: &[Option<f64>]) -> Stat {
        let Some(vals) = values.iter().copied().collect::<Option<Vec<f64>>>() else {
            return Stat::default();
        };
        if vals.is_empty() {
            return Stat::default();
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Stat {
            mean: Some(mean),
            std: Some(var.sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean: GroupReport,
    pub std: GroupReport,
    pub w1: Stat,
    pub w1_masked: Stat,
    pub abstention_error: Stat,
    pub prediction_expected_error: Stat,
    /// Split-averaged CDFs; a group column averages the splits where the group is present.
    pub cdf: CdfRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub methods: Vec<MethodSummary>,
    pub splits: Vec<SplitRecord>,
}

fn mean_count(counts: &[usize]) -> usize {
    (counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64).round() as usize
}

fn summarize_reports(reports: &[GroupReport]) -> (GroupReport, GroupReport) {
    let pick = |f: fn(&GroupReport) -> GroupMetrics| {
        let rows: Vec<GroupMetrics> = reports.iter().map(f).collect();
        let count = mean_count(&rows.iter().map(|m| m.count).collect::<Vec<_>>());
        let stats: Vec<Stat> = (0..METRIC_NAMES.len())
            .map(|k| Stat::of(&rows.iter().map(|m| m.values()[k]).collect::<Vec<_>>()))
            .collect();
        let mean = GroupMetrics::from_values(count, std::array::from_fn(|k| stats[k].mean));
        let std = GroupMetrics::from_values(count, std::array::from_fn(|k| stats[k].std));
        (mean, std)
    };
    let (o_mean, o_std) = pick(|r| r.overall);
    let (g0_mean, g0_std) = pick(|r| r.group0);
    let (g1_mean, g1_std) = pick(|r| r.group1);
    let deltas: Vec<Stat> = (0..DELTA_NAMES.len())
        .map(|k| {
            Stat::of(
                &reports
                    .iter()
                    .map(|r| r.deltas.values()[k])
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let mean = GroupReport {
        overall: o_mean,
        group0: g0_mean,
        group1: g1_mean,
        deltas: Deltas::from_values(std::array::from_fn(|k| deltas[k].mean)),
    };
    let std = GroupReport {
        overall: o_std,
        group0: g0_std,
        group1: g1_std,
        deltas: Deltas::from_values(std::array::from_fn(|k| deltas[k].std)),
    };
    (mean, std)
}

fn mean_curve(curves: &[&Vec<f64>], len: usize) -> Option<Vec<f64>> {
    if curves.is_empty() {
        return None;
    }
    let mut out = vec![0.0; len];
    for c in curves {
        for (o, v) in out.iter_mut().zip(c.iter()) {
            *o += v;
        }
    }
    let n = curves.len() as f64;
    Some(out.into_iter().map(|v| v / n).collect())
}

impl RunSummary {
    /// Aggregates per-split records; `report` uses this to re-render stored runs.
    pub fn from_records(config: ExperimentConfig, splits: Vec<SplitRecord>) -> Result<Self> {
        let methods = config.methods_sorted();
        let mut summaries = Vec::new();
        for &method in &methods {
            let records: Vec<&MethodRecord> = splits
                .iter()
                .map(|s| {
                    s.methods
                        .iter()
                        .find(|m| m.method == method)
                        .ok_or_else(|| {
                            Error::Input(format!(
                                "split {} has no `{}` record",
                                s.split,
                                method.name()
                            ))
                        })
                })
                .collect::<Result<_>>()?;
            let reports: Vec<GroupReport> = records.iter().map(|r| r.report).collect();
            let (mean, std) = summarize_reports(&reports);
            let grid = records
                .first()
                .map(|r| r.cdf.grid.clone())
                .ok_or_else(|| Error::Input("no split records".into()))?;
            let len = grid.len();
            let cdf = CdfRecord {
                overall: mean_curve(
                    &records.iter().map(|r| &r.cdf.overall).collect::<Vec<_>>(),
                    len,
                )
                .unwrap_or_default(),
                group0: mean_curve(
                    &records
                        .iter()
                        .filter_map(|r| r.cdf.group0.as_ref())
                        .collect::<Vec<_>>(),
                    len,
                ),
                group1: mean_curve(
                    &records
                        .iter()
                        .filter_map(|r| r.cdf.group1.as_ref())
                        .collect::<Vec<_>>(),
                    len,
                ),
                grid,
            };
            summaries.push(MethodSummary {
                method,
                mean,
                std,
                w1: Stat::of(&records.iter().map(|r| r.w1).collect::<Vec<_>>()),
                w1_masked: Stat::of(&records.iter().map(|r| r.w1_masked).collect::<Vec<_>>()),
                abstention_error: Stat::of(
                    &records
                        .iter()
                        .map(|r| r.abstention.and_then(|a| a.expected_error))
                        .collect::<Vec<_>>(),
                ),
                prediction_expected_error: Stat::of(
                    &records
                        .iter()
                        .map(|r| r.prediction_expected_error)
                        .collect::<Vec<_>>(),
                ),
                cdf,
            });
        }
        Ok(RunSummary {
            config,
            methods: summaries,
            splits,
        })
    }

    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::json(path, e))
    }
}

fn cdf_record(
    matrix: &PredictionMatrix,
    profile: &[f64],
    kappa: f64,
) -> Result<(CdfRecord, Option<f64>, Option<f64>)> {
    let b = matrix.replicates();
    let plain = sc_cdf(profile, matrix.test_groups(), b, None)?;
    let masked = sc_cdf(profile, matrix.test_groups(), b, Some(kappa))?;
    Ok((
        CdfRecord::from_cdfs(&plain),
        plain.group_distance()?,
        masked.group_distance()?,
    ))
}

fn ensemble_record(
    method: Method,
    members: &PredictionMatrix,
    base: &PredictionMatrix,
    config: &ExperimentConfig,
) -> Result<MethodRecord> {
    let outcome = simple_ensemble(members, &config.policy)?;
    let eval = split_evaluate(&outcome, base, &config.costs)?;
    let (cdf, w1, w1_masked) = cdf_record(members, &outcome.sc, config.policy.kappa)?;
    Ok(MethodRecord {
        method,
        report: eval.prediction,
        abstention: Some(eval.abstention),
        prediction_expected_error: eval.prediction_expected_error,
        w1,
        w1_masked,
        cdf,
    })
}

fn run_split(data: &TabularDataset, config: &ExperimentConfig, s: usize) -> Result<SplitRecord> {
    let (train, test) =
        train_test_split(data, &config.split, s).map_err(|e| e.at_stage(s, "split"))?;
    let plan = config.replicate_plan(s);
    let base = build_prediction_matrix(
        &train,
        &test,
        &config.model,
        &config.costs,
        &plan,
        config.workers,
    )
    .map_err(|e| e.at_stage(s, "prediction matrix"))?;
    let profile = sc_profile(&base);

    let mut methods = Vec::new();
    for method in config.methods_sorted() {
        let record = match method {
            Method::Baseline => (|| {
                let (cdf, w1, w1_masked) = cdf_record(&base, &profile, config.policy.kappa)?;
                Ok(MethodRecord {
                    method,
                    report: baseline_report(&base)?,
                    abstention: None,
                    prediction_expected_error: None,
                    w1,
                    w1_masked,
                    cdf,
                })
            })()
            .map_err(|e: Error| e.at_stage(s, "baseline"))?,
            Method::Simple => ensemble_record(method, &base, &base, config)
                .map_err(|e| e.at_stage(s, "simple ensemble"))?,
            Method::Super => {
                let outer = super_ensemble(
                    &train,
                    &test,
                    &config.model,
                    &config.costs,
                    &config.super_spec(),
                    &config.policy,
                    plan.base_seed,
                    config.workers,
                )
                .map_err(|e| e.at_stage(s, "super ensemble"))?;
                ensemble_record(method, &outer.matrix, &base, config)
                    .map_err(|e| e.at_stage(s, "super ensemble"))?
            }
        };
        methods.push(record);
    }
    Ok(SplitRecord {
        split: s,
        train_size: train.n(),
        test_size: test.n(),
        methods,
    })
}

/// Runs the protocol on an already-loaded dataset.
pub fn run_on_dataset(data: &TabularDataset, config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let splits = (0..config.split.split_count)
        .map(|s| run_split(data, config, s))
        .collect::<Result<Vec<_>>>()?;
    RunSummary::from_records(config.clone(), splits)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let data = load_dataset(&config.dataset)?;
    run_on_dataset(&data, config)
}

pub const SUMMARY_FILE: &str = "summary.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const W1_FILE: &str = "w1.csv";

pub fn cdf_file(method: Method) -> String {
    format!("cdf_{}.csv", method.name())
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const POPULATIONS: [&str; 3] = ["overall", "group0", "group1"];

fn metrics_rows(s: &MethodSummary) -> Vec<[String; 5]> {
    let mut rows = Vec::new();
    let pops = [
        (s.mean.overall, s.std.overall),
        (s.mean.group0, s.std.group0),
        (s.mean.group1, s.std.group1),
    ];
    for (name, (mean, std)) in POPULATIONS.iter().zip(pops) {
        rows.push([
            s.method.name().into(),
            (*name).into(),
            "count".into(),
            mean.count.to_string(),
            String::new(),
        ]);
        for (k, metric) in METRIC_NAMES.iter().enumerate() {
            rows.push([
                s.method.name().into(),
                (*name).into(),
                (*metric).into(),
                fmt(mean.values()[k]),
                fmt(std.values()[k]),
            ]);
        }
    }
    for (k, metric) in DELTA_NAMES.iter().enumerate() {
        rows.push([
            s.method.name().into(),
            "delta".into(),
            (*metric).into(),
            fmt(s.mean.deltas.values()[k]),
            fmt(s.std.deltas.values()[k]),
        ]);
    }
    rows
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_all(summary: &RunSummary, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(SUMMARY_FILE);
    written.push(path.clone());
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), summary)
        .map_err(|e| Error::json(&path, e))?;

    let path = dir.join(METRICS_FILE);
    written.push(path.clone());
    write_csv(
        &path,
        &["method", "population", "metric", "mean", "std"],
        summary.methods.iter().flat_map(metrics_rows).map(Vec::from),
    )?;

    let path = dir.join(W1_FILE);
    written.push(path.clone());
    write_csv(
        &path,
        &[
            "method",
            "w1_mean",
            "w1_std",
            "w1_masked_mean",
            "w1_masked_std",
        ],
        summary.methods.iter().map(|m| {
            vec![
                m.method.name().to_string(),
                fmt(m.w1.mean),
                fmt(m.w1.std),
                fmt(m.w1_masked.mean),
                fmt(m.w1_masked.std),
            ]
        }),
    )?;

    let kappa = summary.config.policy.kappa;
    for m in &summary.methods {
        let path = dir.join(cdf_file(m.method));
        written.push(path.clone());
        let c = &m.cdf;
        let masked = |v: Option<f64>, level: f64| if level < kappa { v.map(|_| 0.0) } else { v };
        write_csv(
            &path,
            &[
                "level",
                "f0",
                "f1",
                "overall",
                "f0_masked",
                "f1_masked",
                "overall_masked",
            ],
            (0..c.grid.len()).map(|k| {
                let level = c.grid[k];
                let f0 = c.group0.as_ref().map(|v| v[k]);
                let f1 = c.group1.as_ref().map(|v| v[k]);
                let all = c.overall.get(k).copied();
                vec![
                    level.to_string(),
                    fmt(f0),
                    fmt(f1),
                    fmt(all),
                    fmt(masked(f0, level)),
                    fmt(masked(f1, level)),
                    fmt(masked(all, level)),
                ]
            }),
        )?;
    }
    Ok(())
}

/// Writes `summary.json`, `metrics.csv`, `w1.csv` and one `cdf_<method>.csv`
/// per method into `dir`. On failure, files already written are removed.
pub fn emit_report(summary: &RunSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    match write_all(summary, dir, &mut written) {
        Ok(()) => Ok(written),
        Err(e) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            Err(e)
        }
    }
}

/// Parses `metrics.csv` back into the mean report of each method.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<(Method, GroupReport)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out: Vec<(Method, GroupReport)> = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let method = Method::parse(&row[0])?;
        if out.last().is_none_or(|(m, _)| *m != method) {
            out.push((method, GroupReport::default()));
        }
        let report = &mut out.last_mut().expect("pushed above").1;
        let value = if row[3].is_empty() {
            None
        } else {
            Some(row[3].parse::<f64>().map_err(|_| Error::Parse {
                row: 0,
                column: "mean".into(),
                value: row[3].to_string(),
                expected: "a number",
            })?)
        };
        let population = &row[1];
        let metric = &row[2];
        if population == "delta" {
            let k = DELTA_NAMES
                .iter()
                .position(|n| *n == metric)
                .ok_or_else(|| Error::Input(format!("unknown delta metric `{metric}`")))?;
            let mut v = report.deltas.values();
            v[k] = value;
            report.deltas = Deltas::from_values(v);
            continue;
        }
        let target = match population {
            "overall" => &mut report.overall,
            "group0" => &mut report.group0,
            "group1" => &mut report.group1,
            other => return Err(Error::Input(format!("unknown population `{other}`"))),
        };
        if metric == "count" {
            target.count = value.unwrap_or(0.0) as usize;
            continue;
        }
        let k = METRIC_NAMES
            .iter()
            .position(|n| *n == metric)
            .ok_or_else(|| Error::Input(format!("unknown metric `{metric}`")))?;
        let mut v = target.values();
        v[k] = value;
        *target = GroupMetrics::from_values(target.count, v);
    }
    Ok(out)
}

/// Grid size a run with `replicates` models per instance produces.
pub fn grid_len(replicates: usize) -> Result<usize> {
    Ok(sc_grid(replicates)?.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn config(methods: Vec<Method>, splits: usize, replicates: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(DatasetConfig {
            path: PathBuf::from("unused.csv"),
            schema: Schema::new("o", "g"),
            recipe: None,
        });
        c.split = SplitPlan::new(3, 0.25, splits).unwrap();
        c.replicates = replicates;
        c.methods = methods;
        c.inner_count = 3;
        c
    }

    #[test]
    fn two_splits_give_two_records_per_method() {
        let data = synthetic::half_noisy(40, 0.3, 1);
        let c = config(vec![Method::Baseline, Method::Simple, Method::Super], 2, 5);
        let summary = run_on_dataset(&data, &c).unwrap();
        assert_eq!(summary.splits.len(), 2);
        for s in &summary.splits {
            assert_eq!(s.methods.len(), 3);
            assert_eq!(s.test_size, 10);
        }
        assert_eq!(summary.methods.len(), 3);
    }

    #[test]
    fn single_split_has_zero_std() {
        let data = synthetic::half_noisy(40, 0.3, 2);
        let summary = run_on_dataset(&data, &config(vec![Method::Baseline], 1, 5)).unwrap();
        let m = summary.method(Method::Baseline).unwrap();
        assert_eq!(m.std.overall.err, Some(0.0));
        assert_eq!(
            m.mean.overall.err,
            summary.splits[0].methods[0].report.overall.err
        );
    }

    #[test]
    fn population_std() {
        let s = Stat::of(&[Some(1.0), Some(3.0)]);
        assert_eq!((s.mean, s.std), (Some(2.0), Some(1.0)));
        assert_eq!(Stat::of(&[Some(1.0), None]), Stat::default());
    }

    #[test]
    fn one_method_emits_four_files() {
        let data = synthetic::half_noisy(40, 0.3, 3);
        let summary = run_on_dataset(&data, &config(vec![Method::Baseline], 1, 7)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&summary, dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 4);
        let cdf = fs::read_to_string(dir.path().join("cdf_baseline.csv")).unwrap();
        assert_eq!(cdf.lines().count() - 1, 7 / 2 + 1);
    }

    #[test]
    fn metrics_csv_round_trips() {
        let data = synthetic::half_noisy(60, 0.3, 4);
        let summary =
            run_on_dataset(&data, &config(vec![Method::Baseline, Method::Simple], 3, 5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&summary, dir.path()).unwrap();
        let parsed = read_metrics_csv(&dir.path().join(METRICS_FILE)).unwrap();
        assert_eq!(parsed.len(), 2);
        for (method, report) in parsed {
            assert_eq!(report, summary.method(method).unwrap().mean);
        }
    }

    #[test]
    fn stage_errors_carry_split_context() {
        let data = synthetic::half_noisy(4, 0.3, 5);
        let mut c = config(vec![Method::Baseline], 1, 5);
        c.split.test_fraction = 0.01;
        let err = run_on_dataset(&data, &c).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Stage {
                    split: 0,
                    stage: "split",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn config_json_defaults_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(
            &path,
            r#"{"dataset": {"path": "data.csv", "target": "o", "group": "g"},
                "model": {"kind": "tree", "max_depth": 4},
                "policy": {"kappa": 0.8},
                "workers": 3}"#,
        )
        .unwrap();
        let c = ExperimentConfig::from_json_file(&path).unwrap();
        assert_eq!(c.dataset.path, dir.path().join("data.csv"));
        assert_eq!(c.replicates, 101);
        assert_eq!(c.split.split_count, 10);
        assert_eq!(c.split.test_fraction, 0.2);
        assert_eq!(c.policy.kappa, 0.8);
        assert_eq!(c.workers, 3);
        let echoed = serde_json::to_value(&c).unwrap();
        assert!(echoed.get("workers").is_none());
    }
}
