//! Tabular ingestion: CSV parsing, recipe-driven preprocessing and seeded
//! train/test splitting.
//!
//! A [`TabularDataset`] holds the feature matrix together with one binary
//! protected-group column and one binary observed-label column. Group and
//! label are never part of the feature matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, stream};

/// Tokens treated as missing when a recipe sets `drop_missing`.
pub const MISSING_TOKENS: &[&str] = &["", "NA", "N/A", "NaN", "nan", "?", "null"];

#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    features: Array2<f64>,
    group: Vec<u8>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    group_name: String,
    label_name: String,
}

impl TabularDataset {
    pub fn new(
        features: Array2<f64>,
        group: Vec<u8>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.nrows();
        if group.len() != n || labels.len() != n {
            return Err(Error::Input(format!(
                "row count mismatch: features {n}, group {}, labels {}",
                group.len(),
                labels.len()
            )));
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::Input(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.ncols()
            )));
        }
        if n < 2 {
            return Err(Error::Input(format!(
                "dataset needs at least 2 rows, got {n}"
            )));
        }
        if let Some(bad) = group.iter().chain(&labels).find(|&&v| v > 1) {
            return Err(Error::Input(format!(
                "group/label value {bad} is not binary"
            )));
        }
        Ok(TabularDataset {
            features,
            group,
            labels,
            feature_names,
            group_name: "group".into(),
            label_name: "label".into(),
        })
    }

    /// Column names used for the group and label columns when written back to CSV.
    pub fn with_column_names(mut self, group: impl Into<String>, label: impl Into<String>) -> Self {
        self.group_name = group.into();
        self.label_name = label.into();
        self
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn m(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn group(&self) -> &[u8] {
        &self.group
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn group_name(&self) -> &str {
        &self.group_name
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    /// Rows at `indices`, in order. Repeated indices produce repeated rows,
    /// which is how bootstrap replicates are materialized.
    pub fn select(&self, indices: &[usize]) -> TabularDataset {
        TabularDataset {
            features: self.features.select(Axis(0), indices),
            group: indices.iter().map(|&i| self.group[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            group_name: self.group_name.clone(),
            label_name: self.label_name.clone(),
        }
    }

    /// Writes `features…, group, label` with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(&self.group_name);
        header.push(&self.label_name);
        w.write_record(&header).map_err(|e| Error::csv(path, e))?;
        for i in 0..self.n() {
            let mut record: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            record.push(self.group[i].to_string());
            record.push(self.labels[i].to_string());
            w.write_record(&record).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Column roles for strict CSV ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub target: String,
    pub group: String,
    /// Feature columns in order; `None` means every other column.
    #[serde(default)]
    pub features: Option<Vec<String>>,
}

impl Schema {
    pub fn new(target: impl Into<String>, group: impl Into<String>) -> Self {
        Schema {
            target: target.into(),
            group: group.into(),
            features: None,
        }
    }
}

/// A CSV file as header plus string cells, before any typing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read_csv(path: &Path) -> Result<RawTable> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file).map_err(|e| match e {
            Error::Csv { source, .. } => Error::csv(path, source),
            other => other,
        })
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<RawTable> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::csv("<input>", e))?
            .iter()
            .map(str::to_owned)
            .collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(Error::Schema("missing header row".into()));
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::csv("<input>", e))?;
            rows.push(record.iter().map(str::to_owned).collect());
        }
        Ok(RawTable { headers, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in header")))
    }
}

/// Strict load: every feature must be numeric and the target and group
/// columns must already be 0/1.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<TabularDataset> {
    let raw = RawTable::read_csv(path)?;
    dataset_from_raw(&raw, schema)
}

pub fn dataset_from_raw(raw: &RawTable, schema: &Schema) -> Result<TabularDataset> {
    let target = raw.column_index(&schema.target)?;
    let group = raw.column_index(&schema.group)?;
    let feature_cols: Vec<usize> = match &schema.features {
        Some(names) => names
            .iter()
            .map(|n| raw.column_index(n))
            .collect::<Result<_>>()?,
        None => (0..raw.headers.len())
            .filter(|&c| c != target && c != group)
            .collect(),
    };
    if feature_cols.iter().any(|&c| c == target || c == group) {
        return Err(Error::Schema(
            "target and group columns cannot also be features".into(),
        ));
    }

    let n = raw.rows.len();
    let mut features = Array2::zeros((n, feature_cols.len()));
    let mut groups = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (r, row) in raw.rows.iter().enumerate() {
        for (j, &c) in feature_cols.iter().enumerate() {
            features[[r, j]] = parse_real(&row[c], r + 1, &raw.headers[c])?;
        }
        groups.push(parse_binary(&row[group], r + 1, &raw.headers[group])?);
        labels.push(parse_binary(&row[target], r + 1, &raw.headers[target])?);
    }
    let names = feature_cols
        .iter()
        .map(|&c| raw.headers[c].clone())
        .collect();
    Ok(TabularDataset::new(features, groups, labels, names)?
        .with_column_names(&schema.group, &schema.target))
}

fn parse_real(cell: &str, row: usize, column: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            row,
            column: column.to_owned(),
            value: cell.to_owned(),
            expected: "a finite number",
        }),
    }
}

fn parse_binary(cell: &str, row: usize, column: &str) -> Result<u8> {
    match cell.parse::<f64>() {
        Ok(0.0) => Ok(0),
        Ok(1.0) => Ok(1),
        _ => Err(Error::Parse {
            row,
            column: column.to_owned(),
            value: cell.to_owned(),
            expected: "0 or 1",
        }),
    }
}

/// Maps raw values of one column onto `1`, `0`, or row removal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueRule {
    pub column: String,
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    #[serde(default)]
    pub drop: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mapped {
    Label(u8),
    Drop,
}

impl ValueRule {
    /// The rule for a column that is already coded `0`/`1`.
    pub fn binary(column: impl Into<String>) -> Self {
        ValueRule {
            column: column.into(),
            positive: vec!["1".into()],
            negative: vec!["0".into()],
            drop: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.positive.is_empty() || self.negative.is_empty() {
            return Err(Error::Recipe(format!(
                "column `{}` needs at least one value mapped to 1 and one to 0",
                self.column
            )));
        }
        let mut seen = BTreeSet::new();
        for v in self.positive.iter().chain(&self.negative).chain(&self.drop) {
            if !seen.insert(v.trim()) {
                return Err(Error::Recipe(format!(
                    "value {v:?} of column `{}` is mapped more than once",
                    self.column
                )));
            }
        }
        Ok(())
    }

    fn map(&self, value: &str) -> Option<Mapped> {
        let matches = |set: &[String]| set.iter().any(|s| s.trim() == value);
        if matches(&self.positive) {
            Some(Mapped::Label(1))
        } else if matches(&self.negative) {
            Some(Mapped::Label(0))
        } else if matches(&self.drop) {
            Some(Mapped::Drop)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureRule {
    #[default]
    Numeric,
    OneHot,
    Drop,
}

/// Preprocessing recipe, stored as JSON.
///
/// ```json
/// {
///   "target": {"column": "action_taken", "positive": ["1","2","8"],
///              "negative": ["3","5","7"], "drop": ["4","6"]},
///   "group":  {"column": "applicant_race-1", "positive": ["5"],
///              "negative": ["1","2","3","4"], "drop": ["6","7","8"]},
///   "features": {"loan_type": "one_hot", "respondent_id": "drop"},
///   "drop_missing": true
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepRecipe {
    pub target: ValueRule,
    pub group: ValueRule,
    #[serde(default)]
    pub features: BTreeMap<String, FeatureRule>,
    /// Directive for columns not listed in `features`.
    #[serde(default)]
    pub default_feature: FeatureRule,
    #[serde(default)]
    pub drop_missing: bool,
}

impl PrepRecipe {
    /// Binary target and group, all other columns numeric.
    pub fn identity(target: impl Into<String>, group: impl Into<String>) -> Self {
        PrepRecipe {
            target: ValueRule::binary(target),
            group: ValueRule::binary(group),
            features: BTreeMap::new(),
            default_feature: FeatureRule::Numeric,
            drop_missing: false,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let recipe: PrepRecipe = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::json(path, e))?;
        recipe.validate()?;
        Ok(recipe)
    }

    pub fn validate(&self) -> Result<()> {
        self.target.validate()?;
        self.group.validate()?;
        if self.target.column == self.group.column {
            return Err(Error::Recipe(
                "target and group must be different columns".into(),
            ));
        }
        for col in [&self.target.column, &self.group.column] {
            if self.features.contains_key(col) {
                return Err(Error::Recipe(format!(
                    "column `{col}` is a target/group column and cannot carry a feature rule"
                )));
            }
        }
        Ok(())
    }
}

fn is_missing(cell: &str) -> bool {
    MISSING_TOKENS.contains(&cell)
}

/// Applies `recipe` to a raw table. Rows whose target or group value maps to
/// `drop` are removed; any value the recipe does not mention is an error.
pub fn apply_recipe(raw: &RawTable, recipe: &PrepRecipe) -> Result<TabularDataset> {
    recipe.validate()?;
    let target = raw.column_index(&recipe.target.column)?;
    let group = raw.column_index(&recipe.group.column)?;
    for name in recipe.features.keys() {
        raw.column_index(name)?;
    }

    let directives: Vec<(usize, FeatureRule)> = (0..raw.headers.len())
        .filter(|&c| c != target && c != group)
        .map(|c| {
            let rule = recipe
                .features
                .get(&raw.headers[c])
                .copied()
                .unwrap_or(recipe.default_feature);
            (c, rule)
        })
        .filter(|&(_, rule)| rule != FeatureRule::Drop)
        .collect();

    let mut kept: Vec<(usize, u8, u8)> = Vec::new();
    'rows: for (r, row) in raw.rows.iter().enumerate() {
        if recipe.drop_missing {
            let used = [target, group]
                .into_iter()
                .chain(directives.iter().map(|d| d.0));
            for c in used {
                if is_missing(&row[c]) {
                    continue 'rows;
                }
            }
        }
        let map = |rule: &ValueRule, c: usize| {
            rule.map(&row[c]).ok_or_else(|| Error::RecipeCoverage {
                row: r + 1,
                column: raw.headers[c].clone(),
                value: row[c].clone(),
            })
        };
        let o = map(&recipe.target, target)?;
        let g = map(&recipe.group, group)?;
        if let (Mapped::Label(o), Mapped::Label(g)) = (o, g) {
            kept.push((r, g, o));
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyDataset);
    }

    // Expand columns: numeric stays one column, one-hot becomes one indicator per level.
    enum Plan {
        Numeric(usize),
        OneHot(usize, Vec<String>),
    }
    let mut plans = Vec::new();
    let mut names = Vec::new();
    for &(c, rule) in &directives {
        match rule {
            FeatureRule::Numeric => {
                plans.push(Plan::Numeric(c));
                names.push(raw.headers[c].clone());
            }
            FeatureRule::OneHot => {
                let levels = sorted_levels(kept.iter().map(|&(r, _, _)| raw.rows[r][c].as_str()));
                names.extend(levels.iter().map(|l| format!("{}={l}", raw.headers[c])));
                plans.push(Plan::OneHot(c, levels));
            }
            FeatureRule::Drop => unreachable!(),
        }
    }

    let mut features = Array2::zeros((kept.len(), names.len()));
    for (i, &(r, _, _)) in kept.iter().enumerate() {
        let mut j = 0;
        for plan in &plans {
            match plan {
                Plan::Numeric(c) => {
                    features[[i, j]] = parse_real(&raw.rows[r][*c], r + 1, &raw.headers[*c])?;
                    j += 1;
                }
                Plan::OneHot(c, levels) => {
                    let value = raw.rows[r][*c].as_str();
                    for level in levels {
                        features[[i, j]] = if level == value { 1.0 } else { 0.0 };
                        j += 1;
                    }
                }
            }
        }
    }
    let groups = kept.iter().map(|k| k.1).collect();
    let labels = kept.iter().map(|k| k.2).collect();
    Ok(TabularDataset::new(features, groups, labels, names)?
        .with_column_names(&recipe.group.column, &recipe.target.column))
}

/// Distinct levels, numerically ordered when every level is a number.
fn sorted_levels<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let set: BTreeSet<&str> = values.collect();
    let mut levels: Vec<String> = set.into_iter().map(str::to_owned).collect();
    let numeric: Option<Vec<f64>> = levels.iter().map(|l| l.parse::<f64>().ok()).collect();
    if let Some(keys) = numeric {
        let mut paired: Vec<(f64, String)> = keys.into_iter().zip(levels).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        levels = paired.into_iter().map(|p| p.1).collect();
    }
    levels
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitPlan {
    pub seed: u64,
    pub test_fraction: f64,
    pub split_count: usize,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            seed: 0,
            test_fraction: 0.2,
            split_count: 10,
        }
    }
}

impl SplitPlan {
    pub fn new(seed: u64, test_fraction: f64, split_count: usize) -> Result<Self> {
        let plan = SplitPlan {
            seed,
            test_fraction,
            split_count,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Plan(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.split_count == 0 {
            return Err(Error::Plan("split_count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Row indices of one split, each list sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices(n: usize, plan: &SplitPlan, split_index: usize) -> Result<SplitIndices> {
    plan.validate()?;
    if split_index >= plan.split_count {
        return Err(Error::Split(format!(
            "split index {split_index} out of range for {} splits",
            plan.split_count
        )));
    }
    let test_len = (plan.test_fraction * n as f64).round() as usize;
    if test_len == 0 || test_len >= n {
        return Err(Error::Split(format!(
            "test fraction {} of {n} rows leaves an empty train or test set",
            plan.test_fraction
        )));
    }
    let seed = derive_seed(derive_seed(plan.seed, stream::SPLIT), split_index as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut test = order[..test_len].to_vec();
    let mut train = order[test_len..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(SplitIndices { train, test })
}

pub fn train_test_split(
    data: &TabularDataset,
    plan: &SplitPlan,
    split_index: usize,
) -> Result<(TabularDataset, TabularDataset)> {
    let idx = split_indices(data.n(), plan, split_index)?;
    Ok((data.select(&idx.train), data.select(&idx.test)))
}
