use rand::seq::SliceRandom;

use crate::{rng, Error, Result};

/// Disjoint train / validation / test partitions of a pair list.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
    pub seed: u64,
}

/// `(test, validation, train)` sizes: 10% of everything for test, 10% of
/// the remainder for validation, the rest for training.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let tenth = |m: usize| (m + 5) / 10;
    let test = tenth(n);
    let validation = tenth(n - test);
    (test, validation, n - test - validation)
}

pub fn split_dataset<T>(items: Vec<T>, seed: u64) -> Result<DatasetSplit<T>> {
    if items.len() < 10 {
        return Err(Error::Validation(format!(
            "splitting needs at least 10 pairs, got {}",
            items.len()
        )));
    }
    let (n_test, n_val, _) = split_sizes(items.len());
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let mut order: Vec<usize> = (0..slots.len()).collect();
    order.shuffle(&mut rng::derived(seed, "split"));
    let mut take = |idx: &[usize]| -> Vec<T> { idx.iter().map(|&i| slots[i].take().unwrap()).collect() };
    let test = take(&order[..n_test]);
    let validation = take(&order[n_test..n_test + n_val]);
    let train = take(&order[n_test + n_val..]);
    Ok(DatasetSplit {
        train,
        validation,
        test,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_stage_ten_percent_rule() {
        assert_eq!(split_sizes(1000), (100, 90, 810));
        let s = split_dataset((0..1000).collect::<Vec<u32>>(), 4).unwrap();
        assert_eq!((s.test.len(), s.validation.len(), s.train.len()), (100, 90, 810));
    }

    #[test]
    fn partition_is_exact() {
        let s = split_dataset((0..137).collect::<Vec<u32>>(), 8).unwrap();
        let mut all: Vec<u32> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..137).collect::<Vec<_>>());
    }

    #[test]
    fn seeded_membership() {
        let a = split_dataset((0..200).collect::<Vec<u32>>(), 1).unwrap();
        let b = split_dataset((0..200).collect::<Vec<u32>>(), 1).unwrap();
        assert_eq!(a, b);
        let c = split_dataset((0..200).collect::<Vec<u32>>(), 2).unwrap();
        assert_ne!(a.test, c.test);
    }

    #[test]
    fn too_small() {
        assert!(matches!(split_dataset(vec![1; 9], 0), Err(Error::Validation(_))));
        let s = split_dataset(vec![1; 10], 0).unwrap();
        assert_eq!((s.test.len(), s.validation.len(), s.train.len()), (1, 1, 8));
    }
}
