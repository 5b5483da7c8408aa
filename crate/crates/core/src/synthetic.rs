//! Seeded synthetic tasks with known variance behaviour, used by the tests,
//! benchmarks and the CLI's `--synthetic` demo datasets.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::TabularDataset;
use crate::seed::rng_from_seed;

fn binary_groups<R: Rng>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| u8::from(rng.random::<bool>())).collect()
}

/// No features and labels of a fair coin: exactly `n / 2` ones in random
/// order. An intercept-only model can only follow the majority class of its
/// training sample.
pub fn coin_flip(n: usize, seed: u64) -> TabularDataset {
    let mut rng = rng_from_seed(seed);
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n / 2)).collect();
    labels.shuffle(&mut rng);
    let groups = binary_groups(&mut rng, n);
    TabularDataset::new(Array2::zeros((n, 0)), groups, labels, Vec::new())
        .expect("n ≥ 2")
        .with_column_names("g", "o")
}

/// Two unit-variance Gaussian clusters in the plane whose means are
/// `separation` apart along each axis; the label is the cluster.
pub fn separated_clusters(n: usize, separation: f64, seed: u64) -> TabularDataset {
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut x = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = u8::from(i % 2 == 1);
        let centre = if label == 1 {
            separation / 2.0
        } else {
            -separation / 2.0
        };
        x[[i, 0]] = centre + normal.sample(&mut rng);
        x[[i, 1]] = centre + normal.sample(&mut rng);
        labels.push(label);
    }
    let groups = binary_groups(&mut rng, n);
    TabularDataset::new(x, groups, labels, vec!["x0".into(), "x1".into()])
        .expect("n ≥ 2")
        .with_column_names("g", "o")
}

/// Uniform points in `[-1, 1]²` labelled by `x0 + x1 / 2 > 0`. On the half of
/// the plane with `x1 > 0` each label is flipped with probability `flip`;
/// the other half is clean. The group is `1[x1 > 0]` with 10% of rows swapped.
pub fn half_noisy(n: usize, flip: f64, seed: u64) -> TabularDataset {
    let mut rng = rng_from_seed(seed);
    let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for i in 0..n {
        let clean = x[[i, 0]] + 0.5 * x[[i, 1]] > 0.0;
        let noisy = x[[i, 1]] > 0.0 && rng.random::<f64>() < flip;
        labels.push(u8::from(clean != noisy));
        let g = x[[i, 1]] > 0.0;
        groups.push(u8::from(if rng.random::<f64>() < 0.1 { !g } else { g }));
    }
    TabularDataset::new(x, groups, labels, vec!["x0".into(), "x1".into()])
        .expect("n ≥ 2")
        .with_column_names("g", "o")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_seeded() {
        assert_eq!(coin_flip(50, 1), coin_flip(50, 1));
        assert_ne!(coin_flip(50, 1), coin_flip(50, 2));
        assert_eq!(
            separated_clusters(40, 6.0, 3),
            separated_clusters(40, 6.0, 3)
        );
        let d = half_noisy(100, 0.3, 4);
        assert_eq!((d.n(), d.m()), (100, 2));
    }

    #[test]
    fn coin_flip_is_balanced() {
        let d = coin_flip(2000, 9);
        let ones = d.labels().iter().filter(|&&l| l == 1).count();
        assert_eq!(ones, 1000);
        assert_ne!(&d.labels()[..1000], &[1u8; 1000][..]);
        assert_eq!(d.m(), 0);
    }
}
