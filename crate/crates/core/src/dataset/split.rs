use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng};

/// Anything that can be split as a labeled clip.
pub trait Labeled {
    fn clip_id(&self) -> &str;
    fn label(&self) -> Option<u8>;
}

/// Fold assignment produced by [`kfold_plan`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: BTreeMap<String, usize>,
}

impl SplitPlan {
    /// `(train, test)` for `fold`, each in input order.
    pub fn split<T: Labeled + Clone>(&self, items: &[T], fold: usize) -> (Vec<T>, Vec<T>) {
        items
            .iter()
            .cloned()
            .partition(|it| self.assignments.get(it.clip_id()) != Some(&fold))
    }

    pub fn fold_members(&self, fold: usize) -> BTreeSet<&str> {
        self.assignments
            .iter()
            .filter(|(_, f)| **f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

/// Indices of each class, in input order. Fails on the first unlabeled item.
fn indices_by_class<T: Labeled>(items: &[T]) -> Result<[Vec<usize>; 2]> {
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, it) in items.iter().enumerate() {
        match it.label() {
            Some(0) => by_class[0].push(i),
            Some(1) => by_class[1].push(i),
            Some(other) => return Err(Error::Label(i64::from(other))),
            None => return Err(Error::LabelMissing(it.clip_id().to_string())),
        }
    }
    Ok(by_class)
}

pub fn class_counts<T: Labeled>(items: &[T]) -> Result<(usize, usize)> {
    let [neg, pos] = indices_by_class(items)?;
    Ok((neg.len(), pos.len()))
}

fn round_half_away(x: f64) -> usize {
    // nudge so that products like 0.7 * 5 land on the intended half
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

pub fn stratified_split_items<T: Labeled + Clone>(
    items: &[T],
    train_ratio: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::Config(format!(
            "train_ratio {train_ratio} must lie in (0, 1)"
        )));
    }
    let mut by_class = indices_by_class(items)?;
    let mut take = [
        round_half_away(train_ratio * by_class[0].len() as f64),
        round_half_away(train_ratio * by_class[1].len() as f64),
    ];
    let target = round_half_away(train_ratio * items.len() as f64);
    let larger = if by_class[1].len() > by_class[0].len() { 1 } else { 0 };
    let current = take[0] + take[1];
    if current != target {
        let adjusted = take[larger] as i64 + target as i64 - current as i64;
        take[larger] = adjusted.clamp(0, by_class[larger].len() as i64) as usize;
    }

    let mut rng = seeded_rng(seed);
    let mut in_train = vec![false; items.len()];
    for (class, idx) in by_class.iter_mut().enumerate() {
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(take[class]) {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) = items
        .iter()
        .zip(&in_train)
        .partition(|(_, &t)| t);
    Ok((
        train.into_iter().map(|(it, _)| it.clone()).collect(),
        test.into_iter().map(|(it, _)| it.clone()).collect(),
    ))
}

/// Stratified train/test split; per-class train counts are rounded half away
/// from zero and the larger class absorbs any difference from the overall
/// rounded total.
pub fn stratified_split(d: &Dataset, train_ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = stratified_split_items(&d.clips, train_ratio, seed)?;
    Ok((d.with_clips(train), d.with_clips(test)))
}

pub fn kfold_plan_items<T: Labeled>(items: &[T], k: usize, seed: u64) -> Result<SplitPlan> {
    if k < 2 || k > items.len() {
        return Err(Error::InvalidFoldCount {
            k,
            clips: items.len(),
        });
    }
    let mut by_class = indices_by_class(items)?;
    let mut rng = seeded_rng(derive_seed(seed, 0x6b66));
    let mut assignments = BTreeMap::new();
    // the round-robin cursor carries over between classes to even out fold sizes
    let mut cursor = 0usize;
    for idx in by_class.iter_mut() {
        idx.shuffle(&mut rng);
        for &i in idx.iter() {
            assignments.insert(items[i].clip_id().to_string(), cursor % k);
            cursor += 1;
        }
    }
    Ok(SplitPlan {
        k,
        seed,
        assignments,
    })
}

pub fn kfold_plan(d: &Dataset, k: usize, seed: u64) -> Result<SplitPlan> {
    kfold_plan_items(&d.clips, k, seed)
}

/// Randomly reduces the majority class to the minority count. Inputs that
/// are balanced, or hold a single class, come back unchanged.
pub fn downsample_items<T: Labeled + Clone>(items: &[T], seed: u64) -> Result<Vec<T>> {
    let by_class = indices_by_class(items)?;
    let (n0, n1) = (by_class[0].len(), by_class[1].len());
    if n0 == n1 || n0 == 0 || n1 == 0 {
        return Ok(items.to_vec());
    }
    let (major, minor_count) = if n0 > n1 { (0, n1) } else { (1, n0) };
    let mut rng = seeded_rng(derive_seed(seed, 0xd5));
    let chosen = index::sample(&mut rng, by_class[major].len(), minor_count);
    let mut keep = vec![true; items.len()];
    for &i in &by_class[major] {
        keep[i] = false;
    }
    for c in chosen.iter() {
        keep[by_class[major][c]] = true;
    }
    Ok(items
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(it, _)| it.clone())
        .collect())
}

pub fn downsample(d: &Dataset, seed: u64) -> Result<Dataset> {
    Ok(d.with_clips(downsample_items(&d.clips, seed)?))
}

/// `w_c = N / (2 N_c)`.
pub fn class_weights<T: Labeled>(items: &[T]) -> Result<(f64, f64)> {
    let (n0, n1) = class_counts(items)?;
    if n0 == 0 || n1 == 0 {
        return Err(Error::DegenerateClasses {
            negatives: n0,
            positives: n1,
        });
    }
    let n = (n0 + n1) as f64;
    Ok((n / (2.0 * n0 as f64), n / (2.0 * n1 as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[derive(Debug, Clone, PartialEq)]
    struct Item(String, Option<u8>);

    impl Labeled for Item {
        fn clip_id(&self) -> &str {
            &self.0
        }
        fn label(&self) -> Option<u8> {
            self.1
        }
    }

    fn items(neg: usize, pos: usize) -> Vec<Item> {
        (0..neg)
            .map(|i| Item(format!("s{i:03}"), Some(0)))
            .chain((0..pos).map(|i| Item(format!("r{i:03}"), Some(1))))
            .collect()
    }

    fn count(v: &[Item], class: u8) -> usize {
        v.iter().filter(|i| i.1 == Some(class)).count()
    }

    #[test]
    fn split_ten_clips_seventy_thirty() {
        let (train, test) = stratified_split_items(&items(6, 4), 0.7, 3).unwrap();
        assert_eq!((count(&train, 1), count(&train, 0)), (3, 4));
        assert_eq!((count(&test, 1), count(&test, 0)), (1, 2));
    }

    #[test]
    fn split_is_deterministic() {
        let data = items(13, 8);
        assert_eq!(
            stratified_split_items(&data, 0.7, 9).unwrap(),
            stratified_split_items(&data, 0.7, 9).unwrap()
        );
    }

    #[test]
    fn single_class_split_succeeds() {
        let (train, test) = stratified_split_items(&items(10, 0), 0.7, 1).unwrap();
        assert_eq!((train.len(), test.len()), (7, 3));
    }

    #[test]
    fn unlabeled_clip_is_rejected() {
        let mut data = items(3, 3);
        data[2].1 = None;
        assert!(matches!(
            stratified_split_items(&data, 0.7, 1),
            Err(Error::LabelMissing(id)) if id == "s002"
        ));
    }

    #[test]
    fn kfold_balances_classes() {
        let data = items(5, 5);
        let plan = kfold_plan_items(&data, 5, 42).unwrap();
        for f in 0..5 {
            let (_, test) = plan.split(&data, f);
            assert_eq!((count(&test, 0), count(&test, 1)), (1, 1));
        }
    }

    #[test]
    fn kfold_two_of_four() {
        let data = items(2, 2);
        let plan = kfold_plan_items(&data, 2, 0).unwrap();
        assert_eq!(plan.fold_members(0).len(), 2);
        assert_eq!(plan.fold_members(1).len(), 2);
    }

    #[test]
    fn kfold_rejects_too_many_folds() {
        assert!(matches!(
            kfold_plan_items(&items(5, 5), 11, 0),
            Err(Error::InvalidFoldCount { k: 11, clips: 10 })
        ));
    }

    #[test]
    fn downsample_clamps_majority() {
        let out = downsample_items(&items(8, 2), 5).unwrap();
        assert_eq!((count(&out, 0), count(&out, 1)), (2, 2));
        assert_eq!(out, downsample_items(&items(8, 2), 5).unwrap());
        assert_eq!(downsample_items(&items(3, 3), 5).unwrap(), items(3, 3));
    }

    #[test]
    fn class_weight_values() {
        assert_eq!(class_weights(&items(8, 2)).unwrap(), (0.625, 2.5));
        assert_eq!(class_weights(&items(5, 5)).unwrap(), (1.0, 1.0));
        assert!(matches!(
            class_weights(&items(10, 0)),
            Err(Error::DegenerateClasses { .. })
        ));
    }

    proptest! {
        #[test]
        fn split_is_an_exact_partition(neg in 0usize..30, pos in 0usize..30, ratio in 0.05f64..0.95, seed: u64) {
            prop_assume!(neg + pos > 0);
            let data = items(neg, pos);
            let (train, test) = stratified_split_items(&data, ratio, seed).unwrap();
            let mut all: Vec<_> = train.iter().chain(&test).cloned().collect();
            all.sort_by(|a, b| a.0.cmp(&b.0));
            let mut expect = data.clone();
            expect.sort_by(|a, b| a.0.cmp(&b.0));
            prop_assert_eq!(all, expect);
        }

        #[test]
        fn kfold_folds_are_stratified(neg in 1usize..25, pos in 1usize..25, k in 2usize..6, seed: u64) {
            let data = items(neg, pos);
            prop_assume!(k <= data.len());
            let plan = kfold_plan_items(&data, k, seed).unwrap();
            prop_assert_eq!(plan.assignments.len(), data.len());
            let global = pos as f64 / data.len() as f64;
            for f in 0..k {
                let (_, test) = plan.split(&data, f);
                let expected = global * test.len() as f64;
                prop_assert!((count(&test, 1) as f64 - expected).abs() <= 1.0 + 1e-9);
            }
        }

        #[test]
        fn weights_balance_class_mass(neg in 1usize..100, pos in 1usize..100) {
            let (w0, w1) = class_weights(&items(neg, pos)).unwrap();
            prop_assert!((w0 * neg as f64 - w1 * pos as f64).abs() < 1e-9);
        }
    }
}
