//! Seeded holdout and k-fold partitions.

use crate::preprocess::Dataset;
use crate::rng::SeededRng;

use super::EvalError;

/// Row indices on each side of a holdout split, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits `0..labels.len()` into train and test rows.
///
/// The train side gets `round(train_fraction * n)` rows, clamped so both
/// sides are nonempty. In stratified mode each class contributes its
/// proportional share, with leftover rows going to the classes with the
/// largest fractional parts (smallest class index on ties), so per-class
/// counts are within one row of exact proportions.
pub fn holdout_indices(
    labels: &[usize],
    n_classes: usize,
    train_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<SplitIndices, EvalError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(EvalError::BadFraction(train_fraction));
    }
    let n = labels.len();
    if n < 2 {
        return Err(EvalError::TooFewRows { need: 2, have: n });
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);

    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    if stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for (i, &y) in labels.iter().enumerate() {
            by_class[y].push(i);
        }
        let quotas = largest_remainder(
            &by_class.iter().map(Vec::len).collect::<Vec<_>>(),
            n_train,
        );
        for (class, mut rows) in by_class.into_iter().enumerate() {
            SeededRng::derive(seed, class as u64).shuffle(&mut rows);
            let (a, b) = rows.split_at(quotas[class]);
            train.extend_from_slice(a);
            test.extend_from_slice(b);
        }
    } else {
        let mut rows: Vec<usize> = (0..n).collect();
        SeededRng::new(seed).shuffle(&mut rows);
        train.extend_from_slice(&rows[..n_train]);
        test.extend_from_slice(&rows[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Apportions `total` among groups of the given sizes in proportion to
/// their size.
fn largest_remainder(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    // Integer arithmetic: exact share is sizes[c] * total / n.
    let mut quotas: Vec<usize> = sizes.iter().map(|&s| s * total / n).collect();
    let mut rest: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .map(|(c, &s)| (s * total % n, c))
        .collect();
    rest.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let missing = total - quotas.iter().sum::<usize>();
    for &(_, c) in rest.iter().take(missing) {
        quotas[c] += 1;
    }
    quotas
}

pub fn holdout_split(
    data: &Dataset,
    train_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Dataset, Dataset), EvalError> {
    let idx = holdout_indices(data.labels(), data.n_classes(), train_fraction, seed, stratified)?;
    Ok((data.subset(&idx.train), data.subset(&idx.test)))
}

/// Partitions rows into `k` folds of near-equal size, class by class, so
/// each fold's class mix follows the whole. Folds are ascending.
pub fn stratified_folds(
    labels: &[usize],
    n_classes: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidGrid(format!("need at least 2 folds, got {k}")));
    }
    if labels.len() < k {
        return Err(EvalError::TooFewRows { need: k, have: labels.len() });
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (class, mut rows) in by_class.into_iter().enumerate() {
        SeededRng::derive(seed, class as u64).shuffle(&mut rows);
        for r in rows {
            folds[next].push(r);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_27000_rows() {
        let labels: Vec<usize> = (0..27_000).map(|i| i % 3).collect();
        let s = holdout_indices(&labels, 3, 0.8, 42, true).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (21_600, 5_400));
        let mut per_class = [0; 3];
        for &i in &s.test {
            per_class[labels[i]] += 1;
        }
        assert_eq!(per_class, [1800; 3]);
    }

    #[test]
    fn two_rows_half_split() {
        for stratified in [false, true] {
            let s = holdout_indices(&[0, 1], 2, 0.5, 7, stratified).unwrap();
            assert_eq!((s.train.len(), s.test.len()), (1, 1));
        }
    }

    #[test]
    fn same_seed_same_partition() {
        let labels: Vec<usize> = (0..500).map(|i| (i * 7) % 3).collect();
        for stratified in [false, true] {
            let a = holdout_indices(&labels, 3, 0.7, 9, stratified).unwrap();
            let b = holdout_indices(&labels, 3, 0.7, 9, stratified).unwrap();
            assert_eq!(a, b);
            let c = holdout_indices(&labels, 3, 0.7, 10, stratified).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn partition_is_complete_and_disjoint() {
        let labels: Vec<usize> = (0..101).map(|i| (i * i) % 3).collect();
        let s = holdout_indices(&labels, 3, 0.8, 1, true).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
    }

    #[test]
    fn stratified_counts_within_one_row() {
        let labels: Vec<usize> = (0..997).map(|i| if i % 10 < 5 { 0 } else if i % 10 < 8 { 1 } else { 2 }).collect();
        let s = holdout_indices(&labels, 3, 0.8, 3, true).unwrap();
        for c in 0..3 {
            let total = labels.iter().filter(|&&y| y == c).count() as f64;
            let got = s.train.iter().filter(|&&i| labels[i] == c).count() as f64;
            assert!((got - 0.8 * total).abs() <= 1.0, "class {c}: {got} vs {}", 0.8 * total);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            holdout_indices(&[0], 1, 0.8, 0, true),
            Err(EvalError::TooFewRows { need: 2, have: 1 })
        );
        assert_eq!(holdout_indices(&[0, 1], 2, 1.0, 0, true), Err(EvalError::BadFraction(1.0)));
    }

    #[test]
    fn folds_cover_rows_once() {
        let labels: Vec<usize> = (0..50).map(|i| i % 3).collect();
        let folds = stratified_folds(&labels, 3, 3, 5).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }
}
