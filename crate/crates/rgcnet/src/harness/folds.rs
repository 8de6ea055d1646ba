//! Deterministic cross-validation splits: stratified by label for
//! classification, grouped by subject for longitudinal data.

use crate::error::{Error, Result};
use crate::linalg::Rng;

/// Outer folds stratified by class label: each fold receives a round-robin
/// share of every class. Errors when any class has fewer samples than
/// folds (some fold would otherwise see a single class during training).
pub fn stratified_folds(labels: &[usize], n_folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n_folds < 2 {
        return Err(Error::Parameter("need at least 2 folds".to_string()));
    }
    if labels.len() < n_folds {
        return Err(Error::Stratification(format!(
            "{} samples cannot fill {n_folds} folds",
            labels.len()
        )));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = Rng::new(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); n_folds];
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < n_folds {
            return Err(Error::Stratification(format!(
                "class {class} has only {} samples for {n_folds} folds",
                members.len()
            )));
        }
        rng.shuffle(&mut members);
        for (pos, idx) in members.into_iter().enumerate() {
            folds[pos % n_folds].push(idx);
        }
    }
    for fold in folds.iter_mut() {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Outer folds over subjects (every graph of a subject lands in the same
/// fold). `subjects[i]` is the subject id of graph i.
pub fn subject_folds(subjects: &[usize], n_folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n_folds < 2 {
        return Err(Error::Parameter("need at least 2 folds".to_string()));
    }
    let mut unique: Vec<usize> = subjects.to_vec();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() < n_folds {
        return Err(Error::Stratification(format!(
            "{} subjects cannot fill {n_folds} folds",
            unique.len()
        )));
    }
    let mut rng = Rng::new(seed);
    rng.shuffle(&mut unique);
    let mut subject_fold = std::collections::BTreeMap::new();
    for (pos, s) in unique.into_iter().enumerate() {
        subject_fold.insert(s, pos % n_folds);
    }
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); n_folds];
    for (i, s) in subjects.iter().enumerate() {
        folds[subject_fold[s]].push(i);
    }
    Ok(folds)
}

/// Inner train/validation split of `indices`, stratified by
/// `label_of(index)`. Validation takes `val_fraction` of each class
/// (at least one sample when the class has two or more).
pub fn stratified_train_val(
    indices: &[usize],
    label_of: impl Fn(usize) -> usize,
    val_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut by_class = std::collections::BTreeMap::<usize, Vec<usize>>::new();
    for &i in indices {
        by_class.entry(label_of(i)).or_default().push(i);
    }
    let mut rng = Rng::new(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (_, mut members) in by_class {
        rng.shuffle(&mut members);
        let n_val = if members.len() < 2 {
            0
        } else {
            ((members.len() as f64 * val_fraction).round() as usize).clamp(1, members.len() - 1)
        };
        val.extend_from_slice(&members[..n_val]);
        train.extend_from_slice(&members[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Inner split over subjects for longitudinal data; returns (train
/// subjects, validation subjects).
pub fn subject_train_val(subjects: &[usize], val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut unique: Vec<usize> = subjects.to_vec();
    unique.sort_unstable();
    unique.dedup();
    let mut rng = Rng::new(seed);
    rng.shuffle(&mut unique);
    let n_val = if unique.len() < 2 {
        0
    } else {
        ((unique.len() as f64 * val_fraction).round() as usize).clamp(1, unique.len() - 1)
    };
    let (val, train) = unique.split_at(n_val);
    let mut train = train.to_vec();
    let mut val = val.to_vec();
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_samples_partition_exactly() {
        let labels = vec![0, 1, 0, 1, 0, 1, 0, 1, 0];
        let folds = stratified_folds(&labels, 3, 7).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..9).collect::<Vec<_>>());
        for fold in &folds {
            assert!(!fold.is_empty());
        }
    }

    #[test]
    fn fold_assignment_is_deterministic() {
        let labels: Vec<usize> = (0..30).map(|i| i % 2).collect();
        let a = stratified_folds(&labels, 3, 42).unwrap();
        let b = stratified_folds(&labels, 3, 42).unwrap();
        assert_eq!(a, b);
        let c = stratified_folds(&labels, 3, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn every_fold_sees_every_class() {
        let labels: Vec<usize> = (0..24).map(|i| i % 3).collect();
        let folds = stratified_folds(&labels, 3, 1).unwrap();
        for fold in folds {
            let mut classes: Vec<usize> = fold.iter().map(|&i| labels[i]).collect();
            classes.sort_unstable();
            classes.dedup();
            assert_eq!(classes, vec![0, 1, 2]);
        }
    }

    #[test]
    fn scarce_class_is_a_stratification_error() {
        let labels = vec![0, 0, 0, 0, 1, 1]; // class 1 has 2 < 3 folds
        assert!(matches!(
            stratified_folds(&labels, 3, 0),
            Err(Error::Stratification(_))
        ));
    }

    #[test]
    fn subject_folds_keep_subjects_whole() {
        // 6 subjects x 3 timepoints.
        let subjects: Vec<usize> = (0..18).map(|i| i / 3).collect();
        let folds = subject_folds(&subjects, 3, 5).unwrap();
        for fold in &folds {
            let mut subs: Vec<usize> = fold.iter().map(|&i| subjects[i]).collect();
            subs.sort_unstable();
            subs.dedup();
            // Every subject contributes all 3 graphs to its fold.
            assert_eq!(fold.len(), subs.len() * 3);
        }
    }

    #[test]
    fn inner_split_is_roughly_ninety_ten() {
        let indices: Vec<usize> = (0..100).collect();
        let (train, val) = stratified_train_val(&indices, |i| i % 2, 0.1, 3);
        assert_eq!(train.len() + val.len(), 100);
        assert_eq!(val.len(), 10);
        // Stratified: both classes appear in validation.
        assert!(val.iter().any(|&i| i % 2 == 0));
        assert!(val.iter().any(|&i| i % 2 == 1));
    }
}
