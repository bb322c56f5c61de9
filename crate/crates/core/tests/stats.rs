use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, StudentsT};

use lift_core::catalog::Variable;
use lift_core::dataset::{split, synthesize, Dataset, Provenance, SynthesisSpec};
use lift_core::stats::{
    permanova, permanova_rows, rf_importance, rf_predict, rf_train, train_matrix, ForestParams, StatsError,
};

fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, d: usize, shift: &[f64]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..d)
                .map(|j| rng.sample::<f64, _>(StandardNormal) + shift[j])
                .collect()
        })
        .collect()
}

/// Pseudo-F from an explicit squared-distance matrix, standardizing with
/// sample-independent pooled statistics; written separately from the library.
fn oracle_f(z: &[Vec<f64>], in_a: &[bool]) -> f64 {
    let n = z.len();
    let d2 = |i: usize, j: usize| -> f64 { z[i].iter().zip(&z[j]).map(|(a, b)| (a - b) * (a - b)).sum() };
    let (mut total, mut wa, mut wb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let v = d2(i, j);
            total += v;
            if in_a[i] && in_a[j] {
                wa += v;
            } else if !in_a[i] && !in_a[j] {
                wb += v;
            }
        }
    }
    let na = in_a.iter().filter(|&&b| b).count() as f64;
    let nb = n as f64 - na;
    let ss_t = total / n as f64;
    let ss_w = wa / na + wb / nb;
    (ss_t - ss_w) / (ss_w / (n as f64 - 2.0))
}

fn zscore(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let stats: Vec<(f64, f64)> = (0..d)
        .map(|j| {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let s = (rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n).sqrt();
            (m, s)
        })
        .collect();
    rows.iter()
        .map(|r| r.iter().zip(&stats).map(|(x, (m, s))| (x - m) / s).collect())
        .collect()
}

#[test]
fn permanova_matches_brute_force_on_eight_points() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = [0.8 * (seed % 3) as f64, 0.0, 0.3];
        let a = gaussian_rows(&mut rng, 4, 3, &shift);
        let b = gaussian_rows(&mut rng, 4, 3, &[0.0; 3]);
        let got = permanova_rows(&a, &b, 70, seed).unwrap();

        let pooled: Vec<Vec<f64>> = a.iter().chain(&b).cloned().collect();
        let z = zscore(&pooled);
        let observed = oracle_f(&z, &[true, true, true, true, false, false, false, false]);
        let mut at_least = 0;
        let mut total = 0;
        for mask in 0u32..256 {
            if mask.count_ones() != 4 {
                continue;
            }
            let in_a: Vec<bool> = (0..8).map(|i| mask & (1 << i) != 0).collect();
            total += 1;
            if oracle_f(&z, &in_a) >= observed * (1.0 - 1e-9) {
                at_least += 1;
            }
        }
        assert_eq!(total, 70);
        assert!(got.exhaustive);
        assert_eq!(got.n_permutations, 69);
        assert!((got.pseudo_f - observed).abs() <= 1e-9 * observed.max(1.0));
        assert_eq!(got.p_value, at_least as f64 / 70.0, "seed {seed}");
    }
}

#[test]
fn permanova_invariances() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = gaussian_rows(&mut rng, 20, 3, &[0.7, 0.0, 0.0]);
    let b = gaussian_rows(&mut rng, 25, 3, &[0.0; 3]);
    let base = permanova_rows(&a, &b, 199, 1).unwrap();

    let shifted =
        |rows: &[Vec<f64>]| -> Vec<Vec<f64>> { rows.iter().map(|r| vec![r[0] + 100.0, r[1], r[2] * 3.0]).collect() };
    let moved = permanova_rows(&shifted(&a), &shifted(&b), 199, 1).unwrap();
    assert!((moved.pseudo_f - base.pseudo_f).abs() < 1e-9 * base.pseudo_f);

    let mut a_rev = a.clone();
    a_rev.reverse();
    let reordered = permanova_rows(&a_rev, &b, 199, 1).unwrap();
    assert!((reordered.pseudo_f - base.pseudo_f).abs() < 1e-9 * base.pseudo_f);

    let swapped = permanova_rows(&b, &a, 199, 1).unwrap();
    assert!((swapped.pseudo_f - base.pseudo_f).abs() < 1e-9 * base.pseudo_f);
    assert_eq!(swapped.observed_groups, (25, 20));

    assert_eq!(permanova_rows(&a, &b, 199, 1).unwrap(), base);
}

fn welch_p(x: &[f64], y: &[f64]) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64], m: f64| v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    let (mx, my) = (mean(x), mean(y));
    let (vx, vy) = (var(x, mx) / x.len() as f64, var(y, my) / y.len() as f64);
    let t = (mx - my) / (vx + vy).sqrt();
    let df = (vx + vy).powi(2) / (vx * vx / (x.len() - 1) as f64 + vy * vy / (y.len() - 1) as f64);
    2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()))
}

#[test]
fn permanova_detects_two_std_separation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // Separation of 2 pooled standard deviations in the first column only.
    let a = gaussian_rows(&mut rng, 50, 2, &[2.0, 0.0]);
    let b = gaussian_rows(&mut rng, 50, 2, &[0.0, 0.0]);
    let xa: Vec<f64> = a.iter().map(|r| r[0]).collect();
    let xb: Vec<f64> = b.iter().map(|r| r[0]).collect();
    assert!(welch_p(&xa, &xb) < 0.001, "oracle t-test should reject");
    let r = permanova_rows(&a, &b, 999, 3).unwrap();
    assert!(r.p_value <= 0.01, "p = {}", r.p_value);
    assert_eq!(r.n_permutations, 999);
    assert!(!r.exhaustive);
}

#[test]
fn permanova_null_is_calibrated() {
    let mut accepted = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let cloud = gaussian_rows(&mut rng, 60, 2, &[0.0, 0.0]);
        let (a, b) = cloud.split_at(30);
        let r = permanova_rows(a, b, 999, seed).unwrap();
        if r.p_value > 0.05 {
            accepted += 1;
        }
    }
    assert!(accepted >= 45, "{accepted}/50 null runs had p > 0.05");
}

#[test]
fn permanova_on_catalog_columns() {
    let ds = synthesize(&SynthesisSpec::default(), 300, 4).unwrap();
    let risky: Vec<_> = ds.risky().map(|r| r.features).collect();
    let rest: Vec<_> = ds.non_risky().map(|r| r.features).collect();
    let r = permanova(
        &risky,
        &rest,
        &[Variable::TripSpeedStd, Variable::TrafficSpeedStd],
        199,
        0,
    )
    .unwrap();
    assert_eq!(r.observed_groups, (risky.len(), rest.len()));
    assert!(matches!(
        permanova(&risky, &rest, &[], 199, 0),
        Err(StatsError::Precondition(_))
    ));
}

fn planted_spec() -> SynthesisSpec {
    SynthesisSpec {
        risk_rate: 0.3,
        risk_shift: [(Variable::TripSpeedStd, 2.0)].into(),
        ..SynthesisSpec::default()
    }
}

#[test]
fn planted_signal_ranks_first() {
    let params = ForestParams::default();
    let mut first = 0;
    for seed in 0..10u64 {
        let ds = synthesize(&planted_spec(), 600, seed).unwrap();
        let model = rf_train(&ds, &params, seed).unwrap();
        let imp = rf_importance(&model);
        assert!((imp.0.values().sum::<f64>() - 1.0).abs() <= 1e-9);
        if imp.to_ranked().top(1) == ["s_std_s"] {
            first += 1;
        }
    }
    assert!(first >= 9, "s_std_s ranked first in {first}/10 seeds");
}

#[test]
fn separable_fixture_generalizes() {
    let ds = synthesize(&SynthesisSpec::default(), 1000, 21).unwrap();
    let mut speeds: Vec<f64> = ds
        .records()
        .iter()
        .map(|r| r.features[Variable::TripSpeedStd])
        .collect();
    speeds.sort_by(f64::total_cmp);
    let cut = speeds[700];
    let records = ds
        .into_records()
        .into_iter()
        .map(|mut r| {
            r.risk_label = u8::from(r.features[Variable::TripSpeedStd] > cut);
            r
        })
        .collect();
    let ds = Dataset::new(records, Provenance::Derived).unwrap();
    let (train, test) = split(&ds, 0.5, 2).unwrap();
    let model = rf_train(&train, &ForestParams::default(), 2).unwrap();
    let preds = rf_predict(&model, test.records()).unwrap();
    let correct = preds.iter().zip(test.labels()).filter(|(p, t)| **p == *t).count();
    let acc = correct as f64 / test.len() as f64;
    assert!(acc >= 0.95, "accuracy {acc}");
    assert!(rf_predict(&model, &[]).unwrap().is_empty());
}

#[test]
fn same_seed_same_importance() {
    let ds = synthesize(&planted_spec(), 300, 8).unwrap();
    let p = ForestParams {
        n_trees: 40,
        ..Default::default()
    };
    let a = rf_train(&ds, &p, 77).unwrap();
    let b = rf_train(&ds, &p, 77).unwrap();
    assert_eq!(rf_importance(&a), rf_importance(&b));
    assert_eq!(
        rf_predict(&a, ds.records()).unwrap(),
        rf_predict(&b, ds.records()).unwrap()
    );
}

#[test]
fn noise_feature_ranks_below_signal() {
    let mut wins = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(2000);
        let mut y = Vec::with_capacity(2000);
        for _ in 0..2000 {
            let label = u8::from(rng.random_bool(0.5));
            let signal = rng.sample::<f64, _>(StandardNormal) + f64::from(label);
            let noise: f64 = rng.sample(StandardNormal);
            x.push(vec![signal, noise]);
            y.push(label);
        }
        let p = ForestParams {
            n_trees: 30,
            ..Default::default()
        };
        let m = train_matrix(&x, &y, vec!["signal".into(), "noise".into()], &p, seed).unwrap();
        let imp = rf_importance(&m);
        if imp.0["signal"] > imp.0["noise"] {
            wins += 1;
        }
    }
    assert!(wins > 5, "signal beat noise in {wins}/10 seeds");
}

#[test]
fn unknown_feature_is_rejected() {
    let x = vec![vec![0.0], vec![1.0], vec![0.1], vec![0.9]];
    let m = train_matrix(&x, &[0, 1, 0, 1], vec!["weather".into()], &ForestParams::default(), 0).unwrap();
    let ds = synthesize(&SynthesisSpec::default(), 3, 0).unwrap();
    assert_eq!(
        rf_predict(&m, ds.records()),
        Err(StatsError::UnknownFeature("weather".into()))
    );
}
