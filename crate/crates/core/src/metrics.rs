//! Per-instance variance and self-consistency, group error rates, and the
//! Wasserstein-1 distance between group self-consistency CDFs.
//!
//! With `B` predictions on one instance, `B0` zeros and `B1` ones, the
//! empirical variance is `(c01 + c10)·B0·B1 / (B(B−1))` and the empirical
//! self-consistency is `1 − 2·B0·B1 / (B(B−1))`. Abstentions count towards
//! `B` but agree with every other prediction.

use serde::{Deserialize, Serialize};

use crate::bootstrap::{mean, PredictionMatrix};
use crate::classifiers::CostModel;
use crate::error::{Error, Result};

/// Tolerance for snapping a self-consistency value onto the grid.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// One model's output on one instance, or an ensemble decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vote {
    Zero,
    One,
    Abstain,
}

impl Vote {
    pub fn from_label(label: u8) -> Vote {
        if label == 0 {
            Vote::Zero
        } else {
            Vote::One
        }
    }

    pub fn label(self) -> Option<u8> {
        match self {
            Vote::Zero => Some(0),
            Vote::One => Some(1),
            Vote::Abstain => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteCount {
    pub b0: usize,
    pub b1: usize,
    pub abstain: usize,
}

impl VoteCount {
    pub fn new(b0: usize, b1: usize, abstain: usize) -> Result<Self> {
        let v = VoteCount { b0, b1, abstain };
        if v.total() < 2 {
            return Err(Error::UndefinedSc(v.total()));
        }
        Ok(v)
    }

    pub fn total(&self) -> usize {
        self.b0 + self.b1 + self.abstain
    }

    /// Ordered pairs of disagreeing committed votes, over all ordered pairs.
    fn disagreement(&self) -> f64 {
        let b = self.total() as u128;
        let pairs = 2 * self.b0 as u128 * self.b1 as u128;
        pairs as f64 / (b * (b - 1)) as f64
    }
}

pub fn vote_count(votes: &[Vote]) -> Result<VoteCount> {
    let mut v = VoteCount {
        b0: 0,
        b1: 0,
        abstain: 0,
    };
    for vote in votes {
        match vote {
            Vote::Zero => v.b0 += 1,
            Vote::One => v.b1 += 1,
            Vote::Abstain => v.abstain += 1,
        }
    }
    VoteCount::new(v.b0, v.b1, v.abstain)
}

/// Empirical variance `(c01 + c10)·B0·B1 / (B(B−1))` over committed predictions.
pub fn variance_estimate(v: &VoteCount, costs: &CostModel) -> Result<f64> {
    if v.total() < 2 {
        return Err(Error::UndefinedSc(v.total()));
    }
    if v.abstain > 0 {
        return Err(Error::Domain(
            "variance is defined over committed predictions only; use self_consistency for votes with abstentions".into(),
        ));
    }
    Ok(0.5 * (costs.c01 + costs.c10) * v.disagreement())
}

/// Empirical self-consistency `1 − 2·B0·B1 / (B(B−1))`, `B = B0 + B1 + B_abstain`.
pub fn self_consistency(v: &VoteCount) -> Result<f64> {
    if v.total() < 2 {
        return Err(Error::UndefinedSc(v.total()));
    }
    Ok(1.0 - v.disagreement())
}

/// Self-consistency of every test instance (column) of the matrix.
pub fn sc_profile(matrix: &PredictionMatrix) -> Vec<f64> {
    let b = matrix.replicates();
    (0..matrix.instances())
        .map(|t| {
            let b1 = matrix.positive_votes(t);
            1.0 - VoteCount {
                b0: b - b1,
                b1,
                abstain: 0,
            }
            .disagreement()
        })
        .collect()
}

/// Attainable self-consistency levels for `B` committed predictions, ascending.
/// Has exactly `⌊B/2⌋ + 1` entries.
pub fn sc_grid(replicates: usize) -> Result<Vec<f64>> {
    if replicates < 2 {
        return Err(Error::UndefinedSc(replicates));
    }
    Ok((0..=replicates / 2)
        .rev()
        .map(|b0| {
            1.0 - VoteCount {
                b0,
                b1: replicates - b0,
                abstain: 0,
            }
            .disagreement()
        })
        .collect())
}

/// Which instances a CDF describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    Overall,
    Group0,
    Group1,
}

/// Empirical CDF of self-consistency evaluated on the grid: `cdf[k]` is the
/// fraction of instances with SC ≤ `grid[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScDistribution {
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
    pub population: Population,
    pub count: usize,
    /// When set, entries at grid levels below this value are zeroed.
    pub mask_below: Option<f64>,
}

impl ScDistribution {
    pub fn masked(&self, kappa: f64) -> ScDistribution {
        let cdf = self
            .grid
            .iter()
            .zip(&self.cdf)
            .map(|(&k, &f)| if k < kappa { 0.0 } else { f })
            .collect();
        ScDistribution {
            cdf,
            mask_below: Some(kappa),
            ..self.clone()
        }
    }
}

/// CDFs for all instances and for each group. A group with no instances has
/// no CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScCdfs {
    pub overall: ScDistribution,
    pub groups: [Option<ScDistribution>; 2],
}

impl ScCdfs {
    /// Wasserstein-1 between the two group CDFs, `None` if a group is empty.
    pub fn group_distance(&self) -> Result<Option<f64>> {
        match &self.groups {
            [Some(a), Some(b)] => wasserstein1(a, b).map(Some),
            _ => Ok(None),
        }
    }
}

fn grid_index(grid: &[f64], value: f64, replicates: usize) -> Result<usize> {
    let pos = grid.partition_point(|&g| g < value);
    [pos.checked_sub(1), Some(pos)]
        .into_iter()
        .flatten()
        .filter(|&i| i < grid.len())
        .find(|&i| (grid[i] - value).abs() <= GRID_TOLERANCE)
        .ok_or(Error::OffGrid { value, replicates })
}

pub fn sc_cdf(
    profile: &[f64],
    groups: &[u8],
    replicates: usize,
    mask_below: Option<f64>,
) -> Result<ScCdfs> {
    if profile.len() != groups.len() {
        return Err(Error::Input(format!(
            "{} SC values but {} group labels",
            profile.len(),
            groups.len()
        )));
    }
    let grid = sc_grid(replicates)?;
    let mut counts = [vec![0usize; grid.len()], vec![0usize; grid.len()]];
    for (&sc, &g) in profile.iter().zip(groups) {
        let k = grid_index(&grid, sc, replicates)?;
        counts[usize::from(g != 0)][k] += 1;
    }

    let build = |hist: Vec<usize>, population| -> Option<ScDistribution> {
        let total: usize = hist.iter().sum();
        if total == 0 {
            return None;
        }
        let mut running = 0;
        let cdf = hist
            .iter()
            .map(|c| {
                running += c;
                running as f64 / total as f64
            })
            .collect();
        let dist = ScDistribution {
            grid: grid.clone(),
            cdf,
            population,
            count: total,
            mask_below: None,
        };
        Some(match mask_below {
            Some(kappa) => dist.masked(kappa),
            None => dist,
        })
    };

    let all: Vec<usize> = counts[0]
        .iter()
        .zip(&counts[1])
        .map(|(a, b)| a + b)
        .collect();
    let [c0, c1] = counts;
    let overall = build(all, Population::Overall)
        .ok_or(Error::Input("no instances to build a CDF from".into()))?;
    Ok(ScCdfs {
        overall,
        groups: [build(c0, Population::Group0), build(c1, Population::Group1)],
    })
}

/// Mean absolute gap between two CDFs over their shared grid.
pub fn wasserstein1(d0: &ScDistribution, d1: &ScDistribution) -> Result<f64> {
    let same_grid = d0.grid.len() == d1.grid.len()
        && d0
            .grid
            .iter()
            .zip(&d1.grid)
            .all(|(a, b)| (a - b).abs() <= GRID_TOLERANCE);
    if !same_grid || d0.cdf.len() != d0.grid.len() || d1.cdf.len() != d1.grid.len() {
        return Err(Error::Input("CDFs are evaluated on different grids".into()));
    }
    if d0.mask_below != d1.mask_below {
        return Err(Error::Input("CDFs use different abstention masks".into()));
    }
    let total: f64 = d0.cdf.iter().zip(&d1.cdf).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / d0.grid.len() as f64)
}

/// Error and rate metrics for one population.
///
/// Rates are computed over predicted (non-abstained) instances; `ar` is the
/// abstained fraction of the whole population. A rate whose conditioning set
/// is empty is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub count: usize,
    pub err: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub pr: Option<f64>,
    pub ar: Option<f64>,
    pub mean_sc: Option<f64>,
}

pub const METRIC_NAMES: [&str; 6] = ["err", "fpr", "fnr", "pr", "ar", "mean_sc"];

impl GroupMetrics {
    pub fn values(&self) -> [Option<f64>; 6] {
        [self.err, self.fpr, self.fnr, self.pr, self.ar, self.mean_sc]
    }

    pub fn from_values(count: usize, v: [Option<f64>; 6]) -> Self {
        GroupMetrics {
            count,
            err: v[0],
            fpr: v[1],
            fnr: v[2],
            pr: v[3],
            ar: v[4],
            mean_sc: v[5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Deltas {
    pub err: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub pr: Option<f64>,
    pub ar: Option<f64>,
}

pub const DELTA_NAMES: [&str; 5] = ["err", "fpr", "fnr", "pr", "ar"];

impl Deltas {
    pub fn between(a: &GroupMetrics, b: &GroupMetrics) -> Deltas {
        let d = |x: Option<f64>, y: Option<f64>| Some((x? - y?).abs());
        Deltas {
            err: d(a.err, b.err),
            fpr: d(a.fpr, b.fpr),
            fnr: d(a.fnr, b.fnr),
            pr: d(a.pr, b.pr),
            ar: d(a.ar, b.ar),
        }
    }

    pub fn values(&self) -> [Option<f64>; 5] {
        [self.err, self.fpr, self.fnr, self.pr, self.ar]
    }

    pub fn from_values(v: [Option<f64>; 5]) -> Self {
        Deltas {
            err: v[0],
            fpr: v[1],
            fnr: v[2],
            pr: v[3],
            ar: v[4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupReport {
    pub overall: GroupMetrics,
    pub group0: GroupMetrics,
    pub group1: GroupMetrics,
    pub deltas: Deltas,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn population_metrics(
    members: impl Iterator<Item = usize> + Clone,
    decisions: &[Vote],
    labels: &[u8],
    sc: Option<&[f64]>,
) -> GroupMetrics {
    let mut count = 0;
    let (mut predicted, mut wrong, mut neg, mut fp, mut pos, mut fneg, mut ones) =
        (0, 0, 0, 0, 0, 0, 0);
    for i in members.clone() {
        count += 1;
        let Some(y) = decisions[i].label() else {
            continue;
        };
        predicted += 1;
        let o = labels[i];
        wrong += usize::from(y != o);
        ones += usize::from(y == 1);
        if o == 0 {
            neg += 1;
            fp += usize::from(y == 1);
        } else {
            pos += 1;
            fneg += usize::from(y == 0);
        }
    }
    let mean_sc = sc.and_then(|sc| {
        mean(
            members
                .filter(|&i| decisions[i] != Vote::Abstain)
                .map(|i| sc[i]),
        )
    });
    GroupMetrics {
        count,
        err: ratio(wrong, predicted),
        fpr: ratio(fp, neg),
        fnr: ratio(fneg, pos),
        pr: ratio(ones, predicted),
        ar: ratio(count - predicted, count),
        mean_sc,
    }
}

/// Group-conditional metrics of one vector of decisions.
///
/// `sc`, when given, supplies per-instance self-consistency; `mean_sc` is its
/// mean over the predicted instances of each population.
pub fn group_report(
    decisions: &[Vote],
    sc: Option<&[f64]>,
    groups: &[u8],
    labels: &[u8],
) -> Result<GroupReport> {
    let t = decisions.len();
    if groups.len() != t || labels.len() != t || sc.is_some_and(|s| s.len() != t) {
        return Err(Error::Input(
            "decisions, groups, labels and SC must be aligned".into(),
        ));
    }
    let overall = population_metrics(0..t, decisions, labels, sc);
    let in_group = |g: u8| (0..t).filter(move |&i| groups[i] == g);
    let group0 = population_metrics(in_group(0), decisions, labels, sc);
    let group1 = population_metrics(in_group(1), decisions, labels, sc);
    Ok(GroupReport {
        overall,
        group0,
        group1,
        deltas: Deltas::between(&group0, &group1),
    })
}

impl GroupReport {
    /// Field-wise mean of the group metrics; deltas are recomputed from the
    /// averaged groups. A field is `None` unless defined in every report.
    pub fn average(reports: &[GroupReport]) -> Option<GroupReport> {
        let first = reports.first()?;
        let avg = |pick: fn(&GroupReport) -> GroupMetrics| {
            let rows: Vec<[Option<f64>; 6]> = reports.iter().map(|r| pick(r).values()).collect();
            let mut out = [None; 6];
            for (k, slot) in out.iter_mut().enumerate() {
                let vals: Option<Vec<f64>> = rows.iter().map(|r| r[k]).collect();
                *slot = vals.map(|v| v.iter().sum::<f64>() / v.len() as f64);
            }
            GroupMetrics::from_values(pick(first).count, out)
        };
        let overall = avg(|r| r.overall);
        let group0 = avg(|r| r.group0);
        let group1 = avg(|r| r.group1);
        Some(GroupReport {
            overall,
            group0,
            group1,
            deltas: Deltas::between(&group0, &group1),
        })
    }
}

/// Expected metrics of a single replicate model: each row of the matrix is
/// scored on its own and the reports are averaged. `mean_sc` is taken over
/// all instances from the matrix's self-consistency profile.
pub fn baseline_report(matrix: &PredictionMatrix) -> Result<GroupReport> {
    let sc = sc_profile(matrix);
    let reports = matrix
        .labels()
        .rows()
        .into_iter()
        .map(|row| {
            let decisions: Vec<Vote> = row.iter().map(|&l| Vote::from_label(l)).collect();
            group_report(
                &decisions,
                Some(&sc),
                matrix.test_groups(),
                matrix.test_labels(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    GroupReport::average(&reports).ok_or(Error::UndefinedSc(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    /// Pairwise oracle: sum `f` over every ordered pair of distinct votes,
    /// with abstentions agreeing with everything.
    fn pairwise(votes: &[Vote], costs: &CostModel) -> (f64, f64) {
        let b = votes.len();
        let (mut loss, mut agree) = (0.0, 0.0);
        for i in 0..b {
            for j in 0..b {
                if i == j {
                    continue;
                }
                match (votes[i].label(), votes[j].label()) {
                    (Some(a), Some(c)) => {
                        loss += costs.loss(a, c);
                        agree += f64::from(u8::from(a == c));
                    }
                    _ => agree += 1.0,
                }
            }
        }
        let pairs = (b * (b - 1)) as f64;
        (loss / pairs, agree / pairs)
    }

    fn votes(b0: usize, b1: usize, a: usize) -> Vec<Vote> {
        let mut v = vec![Vote::Zero; b0];
        v.extend(vec![Vote::One; b1]);
        v.extend(vec![Vote::Abstain; a]);
        v
    }

    #[test]
    fn vote_count_examples() {
        use Vote::*;
        assert_eq!(
            vote_count(&[One, One, Zero]).unwrap(),
            VoteCount {
                b0: 1,
                b1: 2,
                abstain: 0
            }
        );
        assert_eq!(
            vote_count(&[Abstain, Abstain]).unwrap(),
            VoteCount {
                b0: 0,
                b1: 0,
                abstain: 2
            }
        );
        assert_eq!(
            vote_count(&[Zero, One, Abstain, One]).unwrap(),
            VoteCount {
                b0: 1,
                b1: 2,
                abstain: 1
            }
        );
        assert!(matches!(vote_count(&[One]), Err(Error::UndefinedSc(1))));
    }

    #[test]
    fn variance_examples() {
        let even = CostModel::default();
        let v = VoteCount::new(50, 50, 0).unwrap();
        assert!((variance_estimate(&v, &even).unwrap() - 50.0 / 99.0).abs() < 1e-15);
        assert!((variance_estimate(&v, &even).unwrap() - 0.505).abs() < 5e-4);
        let v = VoteCount::new(7, 0, 0).unwrap();
        assert_eq!(
            variance_estimate(&v, &CostModel::new(3.0, 5.0).unwrap()).unwrap(),
            0.0
        );

        let costs = CostModel::new(1.0, 3.0).unwrap();
        let v = VoteCount::new(1, 3, 0).unwrap();
        let (oracle, _) = pairwise(&votes(1, 3, 0), &costs);
        assert_eq!(oracle, 1.0);
        assert!((variance_estimate(&v, &costs).unwrap() - oracle).abs() < 1e-15);

        let v = VoteCount::new(1, 1, 1).unwrap();
        assert!(matches!(
            variance_estimate(&v, &even),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn self_consistency_examples() {
        let sc = |b0, b1, a| self_consistency(&VoteCount::new(b0, b1, a).unwrap()).unwrap();
        assert!((sc(50, 51, 0) - 0.49505).abs() < 5e-6);
        assert_eq!(sc(0, 101, 0), 1.0);
        let (_, o1) = pairwise(&votes(5, 5, 0), &CostModel::default());
        let (_, o2) = pairwise(&votes(5, 4, 1), &CostModel::default());
        assert!((o1 - 4.0 / 9.0).abs() < 1e-15);
        assert!((o2 - 5.0 / 9.0).abs() < 1e-15);
        assert!((sc(5, 5, 0) - o1).abs() < 1e-15);
        assert!((sc(5, 4, 1) - o2).abs() < 1e-15);
    }

    fn matrix(cols: &[(usize, usize)], groups: Vec<u8>) -> PredictionMatrix {
        let b = cols[0].0 + cols[0].1;
        let mut probs = Array2::zeros((b, cols.len()));
        for (t, &(_, b1)) in cols.iter().enumerate() {
            for r in 0..b1 {
                probs[[r, t]] = 1.0;
            }
        }
        let labels = vec![1; cols.len()];
        PredictionMatrix::from_probabilities(
            probs,
            groups,
            labels,
            CostModel::default(),
            (0..b as u64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn sc_profile_examples() {
        assert_eq!(
            sc_profile(&matrix(&[(0, 4), (4, 0)], vec![0, 1])),
            vec![1.0, 1.0]
        );
        assert_eq!(sc_profile(&matrix(&[(1, 1)], vec![0])), vec![0.0]);
        let p = sc_profile(&matrix(&[(25, 76)], vec![0]));
        assert!((p[0] - 0.62376).abs() < 5e-6);
    }

    #[test]
    fn grid_examples() {
        assert_eq!(sc_grid(2).unwrap(), vec![0.0, 1.0]);
        let g3 = sc_grid(3).unwrap();
        assert_eq!(g3.len(), 2);
        assert!((g3[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(g3[1], 1.0);
        let g = sc_grid(101).unwrap();
        assert_eq!(g.len(), 51);
        assert!((g[0] - 0.49505).abs() < 5e-6 && (g[1] - 0.49545).abs() < 5e-6);
        assert!((g[49] - 0.9802).abs() < 5e-6);
        assert_eq!(g[50], 1.0);
        assert!(sc_grid(1).is_err());
    }

    #[test]
    fn cdf_all_consistent() {
        let profile = vec![1.0; 4];
        let cdfs = sc_cdf(&profile, &[0, 0, 1, 1], 101, None).unwrap();
        let f = &cdfs.overall.cdf;
        assert!(f[..50].iter().all(|&v| v == 0.0));
        assert_eq!(f[50], 1.0);
    }

    #[test]
    fn symmetric_groups_have_equal_cdfs() {
        let lo = sc_grid(101).unwrap()[0];
        let cdfs = sc_cdf(&[lo, 1.0, lo, 1.0], &[0, 0, 1, 1], 101, None).unwrap();
        let [Some(a), Some(b)] = &cdfs.groups else {
            panic!()
        };
        assert_eq!(a.cdf, b.cdf);
        assert_eq!(cdfs.group_distance().unwrap(), Some(0.0));
    }

    #[test]
    fn overall_cdf_is_group_mixture() {
        let grid = sc_grid(21).unwrap();
        let profile: Vec<f64> = (0..37).map(|i| grid[(i * 7) % grid.len()]).collect();
        let groups: Vec<u8> = (0..37).map(|i| u8::from(i % 3 == 0)).collect();
        let cdfs = sc_cdf(&profile, &groups, 21, None).unwrap();
        let [Some(f0), Some(f1)] = &cdfs.groups else {
            panic!()
        };
        let (n0, n1) = (f0.count as f64, f1.count as f64);
        for k in 0..grid.len() {
            let mix = (n0 * f0.cdf[k] + n1 * f1.cdf[k]) / (n0 + n1);
            assert!((mix - cdfs.overall.cdf[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn off_grid_and_missing_group() {
        assert!(matches!(
            sc_cdf(&[0.7], &[0], 101, None),
            Err(Error::OffGrid { .. })
        ));
        let cdfs = sc_cdf(&[1.0, 1.0], &[1, 1], 5, None).unwrap();
        assert!(cdfs.groups[0].is_none());
        assert_eq!(cdfs.group_distance().unwrap(), None);
    }

    #[test]
    fn mask_zeroes_low_levels() {
        let grid = sc_grid(101).unwrap();
        let cdfs = sc_cdf(&[grid[0], grid[30], 1.0], &[0, 1, 0], 101, Some(0.75)).unwrap();
        for (k, &level) in grid.iter().enumerate() {
            if level < 0.75 {
                assert_eq!(cdfs.overall.cdf[k], 0.0);
            } else {
                assert!(cdfs.overall.cdf[k] > 0.0);
            }
        }
        assert_eq!(cdfs.overall.mask_below, Some(0.75));
    }

    fn point_mass(grid: &[f64], at: usize) -> ScDistribution {
        ScDistribution {
            grid: grid.to_vec(),
            cdf: (0..grid.len())
                .map(|k| if k >= at { 1.0 } else { 0.0 })
                .collect(),
            population: Population::Group0,
            count: 1,
            mask_below: None,
        }
    }

    #[test]
    fn wasserstein_examples() {
        let grid = sc_grid(101).unwrap();
        let top = point_mass(&grid, 50);
        let bottom = point_mass(&grid, 0);
        assert_eq!(wasserstein1(&top, &top).unwrap(), 0.0);
        // Direct sum: the CDFs differ by 1 at the 50 levels below the top.
        let w = wasserstein1(&top, &bottom).unwrap();
        assert!((w - 50.0 / 51.0).abs() < 1e-15);
        assert!((w - 0.98039).abs() < 5e-6);

        let mut bumped = top.clone();
        bumped.cdf[10] = 0.5;
        assert!((wasserstein1(&top, &bumped).unwrap() - 0.5 / 51.0).abs() < 1e-15);

        let other = point_mass(&sc_grid(11).unwrap(), 5);
        assert!(wasserstein1(&top, &other).is_err());
        assert!(wasserstein1(&top, &top.masked(0.75)).is_err());
    }

    #[test]
    fn group_report_counts() {
        use Vote::*;
        let r = group_report(&[One, Zero, One], None, &[0, 0, 0], &[0, 0, 1]).unwrap();
        let g = r.group0;
        assert_eq!(g.fpr, Some(0.5));
        assert_eq!(g.fnr, Some(0.0));
        assert_eq!(g.err, Some(1.0 / 3.0));
        assert_eq!(g.pr, Some(2.0 / 3.0));
        assert_eq!(g.ar, Some(0.0));
        assert_eq!(r.group1.count, 0);
        assert_eq!(r.group1.err, None);
        assert_eq!(r.deltas.err, None);
    }

    #[test]
    fn perfect_predictions_have_zero_rates_and_deltas() {
        let labels = [0, 1, 1, 1, 1, 0];
        let groups = [0, 0, 0, 1, 1, 1];
        let d: Vec<Vote> = labels.iter().map(|&l| Vote::from_label(l)).collect();
        let r = group_report(&d, None, &groups, &labels).unwrap();
        for m in [r.overall, r.group0, r.group1] {
            assert_eq!((m.err, m.fpr, m.fnr), (Some(0.0), Some(0.0), Some(0.0)));
        }
        assert_eq!(r.deltas.values(), [Some(0.0); 5]);
    }

    #[test]
    fn undefined_rate_when_no_negatives() {
        let r = group_report(&[Vote::One, Vote::Zero], None, &[0, 0], &[1, 1]).unwrap();
        assert_eq!(r.group0.fpr, None);
        assert_eq!(r.group0.fnr, Some(0.5));
    }

    #[test]
    fn abstentions_count_only_in_ar() {
        use Vote::*;
        let r = group_report(
            &[Abstain, One, Abstain, Zero],
            Some(&[0.5, 1.0, 0.6, 0.9]),
            &[0, 0, 1, 1],
            &[1, 1, 0, 1],
        )
        .unwrap();
        assert_eq!(r.overall.ar, Some(0.5));
        assert_eq!(r.overall.err, Some(0.5));
        assert_eq!(r.group0.err, Some(0.0));
        assert_eq!(r.group1.fnr, Some(1.0));
        assert_eq!(r.group1.fpr, None);
        assert_eq!(r.overall.mean_sc, Some(0.95));
        let all = group_report(&[Abstain, Abstain], None, &[0, 1], &[0, 1]).unwrap();
        assert_eq!(all.overall.ar, Some(1.0));
        assert_eq!(all.overall.err, None);
    }

    proptest! {
        #[test]
        fn err_decomposes_into_fpr_and_fnr(cells in proptest::collection::vec((0u8..2, 0u8..2, 0u8..2), 1..60)) {
            let decisions: Vec<Vote> = cells.iter().map(|c| Vote::from_label(c.0)).collect();
            let labels: Vec<u8> = cells.iter().map(|c| c.1).collect();
            let groups: Vec<u8> = cells.iter().map(|c| c.2).collect();
            let r = group_report(&decisions, None, &groups, &labels).unwrap();
            for (g, m) in [(0u8, r.group0), (1, r.group1)] {
                let members: Vec<usize> = (0..cells.len()).filter(|&i| groups[i] == g).collect();
                if members.is_empty() { continue; }
                let n = members.len() as f64;
                let neg = members.iter().filter(|&&i| labels[i] == 0).count() as f64;
                let pos = n - neg;
                let recon = m.fpr.unwrap_or(0.0) * neg / n + m.fnr.unwrap_or(0.0) * pos / n;
                prop_assert!((m.err.unwrap() - recon).abs() < 1e-12);
            }
        }

        #[test]
        fn sc_is_symmetric_and_cost_free(b0 in 0usize..80, b1 in 0usize..80, a in 0usize..10) {
            prop_assume!(b0 + b1 + a >= 2);
            let x = self_consistency(&VoteCount::new(b0, b1, a).unwrap()).unwrap();
            let y = self_consistency(&VoteCount::new(b1, b0, a).unwrap()).unwrap();
            prop_assert_eq!(x, y);
            prop_assert!((0.0..=1.0).contains(&x));
        }

        #[test]
        fn variance_scales_with_cost_sum(b0 in 0usize..60, b1 in 0usize..60, c01 in 0.1f64..5.0, c10 in 0.1f64..5.0, lambda in 0.1f64..10.0) {
            prop_assume!(b0 + b1 >= 2);
            let v = VoteCount::new(b0, b1, 0).unwrap();
            let base = variance_estimate(&v, &CostModel::new(c01, c10).unwrap()).unwrap();
            let scaled = variance_estimate(&v, &CostModel::new(lambda * c01, lambda * c10).unwrap()).unwrap();
            prop_assert!((scaled - lambda * base).abs() <= 1e-12 * (1.0 + scaled.abs()));
        }

        #[test]
        fn grid_size_and_minimum(b in 2usize..400) {
            let g = sc_grid(b).unwrap();
            prop_assert_eq!(g.len(), b / 2 + 1);
            prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
            let (lo, hi) = ((b / 2) as f64, b.div_ceil(2) as f64);
            let min = 1.0 - 2.0 * lo * hi / (b as f64 * (b as f64 - 1.0));
            prop_assert!((g[0] - min).abs() < 1e-12);
            prop_assert_eq!(*g.last().unwrap(), 1.0);
        }
    }
}
