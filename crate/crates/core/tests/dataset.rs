use lift_core::catalog::VARIABLE_COUNT;
use lift_core::dataset::{
    read_csv, sample_eval, smote_balance, split, synthesize, write_csv, Dataset, EvalRatio, Features, Provenance,
    SynthesisSpec, TrajectoryRecord,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dataset(pos: usize, neg: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..pos + neg)
        .map(|i| {
            let mut f = Features::default();
            for x in f.0.iter_mut() {
                *x = rng.random_range(0.0..50.0);
            }
            TrajectoryRecord {
                trajectory_id: format!("r{i}"),
                vehicle_id: format!("v{}", i % 7),
                features: f,
                risk_label: u8::from(i < pos),
            }
        })
        .collect();
    Dataset::new(records, Provenance::Ingested).unwrap()
}

/// Some pair of minority originals has `row` on the segment between them.
fn on_some_segment(row: &Features, minority: &[&Features]) -> bool {
    for a in minority {
        for b in minority {
            let (mut j, mut span) = (0, 0.0);
            for k in 0..VARIABLE_COUNT {
                let d = (b.0[k] - a.0[k]).abs();
                if d > span {
                    (j, span) = (k, d);
                }
            }
            let lambda = if span == 0.0 {
                0.0
            } else {
                (row.0[j] - a.0[j]) / (b.0[j] - a.0[j])
            };
            if !(-1e-12..=1.0 + 1e-12).contains(&lambda) {
                continue;
            }
            let fits = (0..VARIABLE_COUNT)
                .all(|k| (a.0[k] + lambda * (b.0[k] - a.0[k]) - row.0[k]).abs() <= 1e-9 * (1.0 + row.0[k].abs()));
            if fits {
                return true;
            }
        }
    }
    false
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn smote_balances_with_convex_rows(pos in 2usize..12, neg in 12usize..60, k in 1usize..8, seed in any::<u64>()) {
        let ds = random_dataset(pos, neg, seed);
        let out = smote_balance(&ds, k, seed).unwrap();
        prop_assert_eq!(out.positive_count(), out.negative_count());
        prop_assert_eq!(&out.records()[..ds.len()], ds.records());
        let minority: Vec<&Features> = ds.risky().map(|r| &r.features).collect();
        for r in &out.records()[ds.len()..] {
            prop_assert!(r.is_risky());
            prop_assert!(on_some_segment(&r.features, &minority), "{} off every segment", r.trajectory_id);
        }
        prop_assert_eq!(smote_balance(&out, k, seed ^ 1).unwrap(), out);
    }

    #[test]
    fn split_is_stratified_and_disjoint(pos in 2usize..30, neg in 2usize..90, frac in 0.1f64..0.9, seed in any::<u64>()) {
        let ds = random_dataset(pos, neg, seed);
        let (train, test) = split(&ds, frac, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), ds.len());
        prop_assert_eq!(train.positive_count(), (pos as f64 * frac).floor() as usize);
        prop_assert_eq!(train.negative_count(), (neg as f64 * frac).floor() as usize);
        for r in train.records() {
            prop_assert!(test.find(&r.trajectory_id).is_none());
        }
    }
}

#[test]
fn minority_of_negatives_is_also_oversampled() {
    let ds = random_dataset(30, 5, 3);
    let out = smote_balance(&ds, 3, 3).unwrap();
    assert_eq!((out.positive_count(), out.negative_count()), (30, 30));
    let minority: Vec<&Features> = ds.non_risky().map(|r| &r.features).collect();
    assert!(out.records()[35..]
        .iter()
        .all(|r| !r.is_risky() && on_some_segment(&r.features, &minority)));
}

#[test]
fn eval_sample_follows_ratio() {
    let ds = random_dataset(40, 400, 9);
    let s = sample_eval(&ds, EvalRatio::new(1, 4).unwrap(), Some(25), 9).unwrap();
    assert_eq!((s.positive_count(), s.negative_count()), (25, 100));
    let again = sample_eval(&ds, EvalRatio::new(1, 4).unwrap(), Some(25), 9).unwrap();
    assert_eq!(s, again);
}

#[test]
fn synthetic_csv_round_trips() {
    let ds = synthesize(&SynthesisSpec::default(), 300, 5).unwrap();
    let mut buf = Vec::new();
    write_csv(&ds, &mut buf).unwrap();
    let back = read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.records(), ds.records());
    assert!(ds.records().iter().all(|r| r.features.check().is_ok()));
}
