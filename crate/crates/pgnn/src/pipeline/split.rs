//! Stratified train/test splitting on integer label values.

use crate::error::{Error, Result};
use crate::rng::seeded;
use rand::seq::SliceRandom;
use std::collections::BTreeMap;

/// A train/test index partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Set when `train_size` was below the number of non-empty strata, so
    /// some strata received no training samples.
    pub degenerate: bool,
}

/// Splits indices so each stratum (`floor(label)`) contributes to the
/// training set proportionally to its size, rounded by largest remainder;
/// shuffling within strata is seeded. The per-stratum training count never
/// deviates from `train_size * stratum/total` by a full sample.
pub fn stratified_split(labels: &[f64], train_size: usize, seed: u64) -> Result<Split> {
    let n = labels.len();
    if train_size >= n {
        return Err(Error::param(format!(
            "train_size {train_size} must be < sample count {n}"
        )));
    }
    let mut strata: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        if !y.is_finite() {
            return Err(Error::Range(format!("label {i} is not finite: {y}")));
        }
        strata.entry(y.floor() as i64).or_default().push(i);
    }

    // Largest-remainder apportionment of train_size across strata.
    let mut base: Vec<(i64, usize, f64)> = strata
        .iter()
        .map(|(&key, members)| {
            let quota = train_size as f64 * members.len() as f64 / n as f64;
            (key, quota.floor() as usize, quota - quota.floor())
        })
        .collect();
    let assigned: usize = base.iter().map(|(_, b, _)| *b).sum();
    let mut leftover = train_size - assigned;
    // Descending fractional part; stratum key breaks ties deterministically.
    base.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    let mut alloc: BTreeMap<i64, usize> = BTreeMap::new();
    for (key, b, _) in &base {
        let extra = if leftover > 0 && *b < strata[key].len() {
            leftover -= 1;
            1
        } else {
            0
        };
        alloc.insert(*key, b + extra);
    }

    let degenerate = train_size < strata.len();
    let mut rng = seeded(seed, 0x5114);
    let mut train = Vec::with_capacity(train_size);
    let mut test = Vec::with_capacity(n - train_size);
    for (key, members) in &strata {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        let k = alloc[key];
        train.extend_from_slice(&shuffled[..k]);
        test.extend_from_slice(&shuffled[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train,
        test,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn proportional_two_strata() {
        // Strata {0: 5, 1: 5}, train 4 -> 2 per stratum.
        let labels: Vec<f64> = vec![0.1, 0.2, 0.3, 0.4, 0.5, 1.1, 1.2, 1.3, 1.4, 1.5];
        let split = stratified_split(&labels, 4, 7).unwrap();
        let count0 = split.train.iter().filter(|&&i| labels[i] < 1.0).count();
        assert_eq!(count0, 2);
        assert_eq!(split.train.len(), 4);
        assert_eq!(split.test.len(), 6);
        assert!(!split.degenerate);
    }

    #[test]
    fn single_stratum_is_a_plain_seeded_split() {
        let labels = vec![0.2; 20];
        let a = stratified_split(&labels, 8, 3).unwrap();
        let b = stratified_split(&labels, 8, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train.len(), 8);
        let c = stratified_split(&labels, 8, 4).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn partition_is_exact_and_disjoint() {
        let labels: Vec<f64> = (0..37).map(|i| (i % 5) as f64 + 0.3).collect();
        let split = stratified_split(&labels, 13, 11).unwrap();
        let mut all: Vec<usize> = split.train.iter().chain(&split.test).cloned().collect();
        all.sort_unstable();
        assert_eq!(all, (0..37).collect::<Vec<_>>());
    }

    #[test]
    fn degenerate_when_fewer_train_slots_than_strata() {
        let labels = vec![0.5, 1.5, 2.5, 3.5, 4.5, 5.5];
        let split = stratified_split(&labels, 2, 0).unwrap();
        assert!(split.degenerate);
        assert_eq!(split.train.len(), 2);
    }

    #[test]
    fn train_size_must_be_less_than_n() {
        assert!(stratified_split(&[0.0, 1.0], 2, 0).is_err());
    }

    #[test]
    fn per_stratum_counts_match_brute_force_allocator() {
        // Independent greedy apportionment: hand floors everything, then
        // tops up the largest remainders; checked over 100 random label
        // vectors. Also asserts the <1-sample deviation property.
        let mut rng = crate::rng::seeded(99, 0);
        for trial in 0..100 {
            let n = rng.random_range(8..60);
            let labels: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..4.0)).collect();
            let train_size = rng.random_range(1..n);
            let split = stratified_split(&labels, train_size, trial).unwrap();

            let mut per_stratum: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
            for (i, &y) in labels.iter().enumerate() {
                let e = per_stratum.entry(y.floor() as i64).or_default();
                e.1 += 1;
                if split.train.binary_search(&i).is_ok() {
                    e.0 += 1;
                }
            }

            // Brute-force allocator.
            let mut oracle: BTreeMap<i64, usize> = BTreeMap::new();
            let mut fracs: Vec<(f64, i64)> = Vec::new();
            let mut used = 0;
            for (&key, &(_, size)) in &per_stratum {
                let quota = train_size as f64 * size as f64 / n as f64;
                oracle.insert(key, quota.floor() as usize);
                used += quota.floor() as usize;
                fracs.push((quota - quota.floor(), key));
            }
            fracs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            for (_, key) in fracs.iter().take(train_size - used) {
                *oracle.get_mut(key).unwrap() += 1;
            }

            for (&key, &(got, size)) in &per_stratum {
                let quota = train_size as f64 * size as f64 / n as f64;
                assert!(
                    (got as f64 - quota).abs() < 1.0,
                    "trial {trial}: stratum {key} got {got}, quota {quota}"
                );
                assert_eq!(
                    got, oracle[&key],
                    "trial {trial}: stratum {key} disagrees with brute-force allocator"
                );
            }
        }
    }
}
