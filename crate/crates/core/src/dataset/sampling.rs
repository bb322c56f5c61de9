use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError, Provenance, TrajectoryRecord, NON_RISKY, RISKY};

/// Stratified split: each class is shuffled independently and its first
/// `floor(count * train_fraction)` members go to the training side. Both sides
/// keep the input's record order.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::InvalidArgument(format!(
            "train_fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; ds.len()];
    for label in [NON_RISKY, RISKY] {
        let mut idx: Vec<usize> = ds
            .records()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.risk_label == label)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < 2 {
            return Err(DatasetError::Stratification {
                label,
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        let take = (idx.len() as f64 * train_fraction).floor() as usize;
        for &i in &idx[..take] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) = ds.records().iter().zip(&in_train).partition(|(_, &t)| t);
    let collect = |v: Vec<(&TrajectoryRecord, &bool)>| {
        Dataset::new(v.into_iter().map(|(r, _)| r.clone()).collect(), Provenance::Derived)
    };
    Ok((collect(train)?, collect(test)?))
}

/// Risky-to-non-risky sampling ratio, written `a:b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EvalRatio {
    pub risky: usize,
    pub non_risky: usize,
}

impl EvalRatio {
    pub const INDUSTRY: EvalRatio = EvalRatio { risky: 1, non_risky: 4 };

    pub fn new(risky: usize, non_risky: usize) -> Result<Self, DatasetError> {
        if risky == 0 {
            return Err(DatasetError::InvalidArgument("ratio needs a nonzero risky part".into()));
        }
        Ok(Self { risky, non_risky })
    }

    pub fn non_risky_for(&self, risky_count: usize) -> usize {
        risky_count * self.non_risky / self.risky
    }
}

impl Default for EvalRatio {
    fn default() -> Self {
        Self::INDUSTRY
    }
}

impl fmt::Display for EvalRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.risky, self.non_risky)
    }
}

impl FromStr for EvalRatio {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DatasetError::InvalidArgument(format!("ratio `{s}` is not of the form a:b"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let a = a.trim().parse().map_err(|_| bad())?;
        let b = b.trim().parse().map_err(|_| bad())?;
        EvalRatio::new(a, b)
    }
}

impl TryFrom<String> for EvalRatio {
    type Error = DatasetError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<EvalRatio> for String {
    fn from(r: EvalRatio) -> String {
        r.to_string()
    }
}

/// Builds an evaluation set: the first `risky_limit` risky records (all when
/// `None`) plus a seeded uniform sample of non-risky records at `ratio`.
/// Output keeps the input order.
pub fn sample_eval(
    test: &Dataset,
    ratio: EvalRatio,
    risky_limit: Option<usize>,
    seed: u64,
) -> Result<Dataset, DatasetError> {
    let risky: Vec<usize> = indices_of(test, RISKY);
    let want_risky = risky_limit.unwrap_or(risky.len());
    if want_risky == 0 || want_risky > risky.len() {
        return Err(DatasetError::Sampling {
            class: "risky",
            needed: want_risky.max(1),
            available: risky.len(),
        });
    }
    let non_risky = indices_of(test, NON_RISKY);
    let want_non_risky = ratio.non_risky_for(want_risky);
    if want_non_risky > non_risky.len() {
        return Err(DatasetError::Sampling {
            class: "non-risky",
            needed: want_non_risky,
            available: non_risky.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = non_risky.choose_multiple(&mut rng, want_non_risky).copied().collect();
    chosen.extend_from_slice(&risky[..want_risky]);
    chosen.sort_unstable();
    Dataset::new(
        chosen.iter().map(|&i| test.records()[i].clone()).collect(),
        Provenance::Derived,
    )
}

fn indices_of(ds: &Dataset, label: u8) -> Vec<usize> {
    ds.records()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.risk_label == label)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::test_support::dataset;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn ids(ds: &Dataset) -> HashSet<String> {
        ds.records().iter().map(|r| r.trajectory_id.clone()).collect()
    }

    fn labels_with(pos: usize, neg: usize) -> Vec<u8> {
        let mut l = vec![1u8; pos];
        l.extend(std::iter::repeat_n(0u8, neg));
        l
    }

    #[test]
    fn four_records_split_evenly() {
        let ds = dataset(&[1, 0, 1, 0]);
        let (train, test) = split(&ds, 0.5, 1).unwrap();
        assert_eq!((train.positive_count(), train.negative_count()), (1, 1));
        assert_eq!((test.positive_count(), test.negative_count()), (1, 1));
    }

    #[test]
    fn fleet_sized_split() {
        let ds = dataset(&labels_with(74, 1717));
        let (train, test) = split(&ds, 0.5, 2024).unwrap();
        assert_eq!(train.positive_count(), 37);
        assert_eq!(test.positive_count(), 37);
        assert_eq!(train.negative_count(), 858);
        assert!(ids(&train).is_disjoint(&ids(&test)));
    }

    #[test]
    fn tiny_class_cannot_be_stratified() {
        let ds = dataset(&[1, 0, 0, 0]);
        assert!(matches!(
            split(&ds, 0.5, 0).unwrap_err(),
            DatasetError::Stratification { label: 1, count: 1 }
        ));
        assert!(split(&dataset(&[1, 1, 0, 0]), 1.0, 0).is_err());
    }

    #[test]
    fn eval_sampling_at_one_to_four() {
        let ds = dataset(&labels_with(44, 300));
        let eval = sample_eval(&ds, EvalRatio::INDUSTRY, None, 5).unwrap();
        assert_eq!(eval.len(), 220);
        assert_eq!(eval.positive_count(), 44);
        assert_eq!(eval.negative_count(), 176);
    }

    #[test]
    fn risky_only_ratio() {
        let ds = dataset(&labels_with(10, 10));
        let eval = sample_eval(&ds, "1:0".parse().unwrap(), None, 5).unwrap();
        assert_eq!(eval.len(), 10);
        assert_eq!(eval.negative_count(), 0);
    }

    #[test]
    fn seeds_only_change_the_non_risky_side() {
        let ds = dataset(&labels_with(20, 400));
        let a = sample_eval(&ds, EvalRatio::INDUSTRY, Some(15), 1).unwrap();
        let b = sample_eval(&ds, EvalRatio::INDUSTRY, Some(15), 2).unwrap();
        let risky = |d: &Dataset| ids(&d.risky_subset());
        assert_eq!(risky(&a), risky(&b));
        assert_ne!(ids(&a), ids(&b));
        assert_eq!(a, sample_eval(&ds, EvalRatio::INDUSTRY, Some(15), 1).unwrap());
    }

    #[test]
    fn shortfall_is_reported() {
        let ds = dataset(&labels_with(10, 30));
        match sample_eval(&ds, EvalRatio::INDUSTRY, None, 0).unwrap_err() {
            DatasetError::Sampling { needed, available, .. } => assert_eq!((needed, available), (40, 30)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!("1:4".parse::<EvalRatio>().unwrap(), EvalRatio::INDUSTRY);
        assert!("0:4".parse::<EvalRatio>().is_err());
        assert!("14".parse::<EvalRatio>().is_err());
        let json = serde_json::to_string(&EvalRatio::INDUSTRY).unwrap();
        assert_eq!(json, "\"1:4\"");
    }

    proptest! {
        #[test]
        fn split_partitions_each_class(pos in 2usize..40, neg in 2usize..120, f in 0.05f64..0.95, seed: u64) {
            let ds = dataset(&labels_with(pos, neg));
            let (train, test) = split(&ds, f, seed).unwrap();
            prop_assert_eq!(train.positive_count() + test.positive_count(), pos);
            prop_assert_eq!(train.negative_count() + test.negative_count(), neg);
            prop_assert_eq!(train.positive_count(), (pos as f64 * f).floor() as usize);
            prop_assert!(ids(&train).is_disjoint(&ids(&test)));
            let (again, _) = split(&ds, f, seed).unwrap();
            prop_assert_eq!(again, train);
        }
    }
}
