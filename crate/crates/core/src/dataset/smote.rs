use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::VARIABLE_COUNT;

use super::{Dataset, DatasetError, Features, Provenance, TrajectoryRecord};

/// Column means and standard deviations over every record (std 0 → 1).
fn standardizer(records: &[TrajectoryRecord]) -> ([f64; VARIABLE_COUNT], [f64; VARIABLE_COUNT]) {
    let n = records.len() as f64;
    let mut mean = [0.0; VARIABLE_COUNT];
    let mut scale = [0.0; VARIABLE_COUNT];
    for r in records {
        for (m, x) in mean.iter_mut().zip(r.features.0) {
            *m += x / n;
        }
    }
    for r in records {
        for ((s, m), x) in scale.iter_mut().zip(&mean).zip(r.features.0) {
            *s += (x - m).powi(2) / n;
        }
    }
    for s in &mut scale {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    (mean, scale)
}

/// Oversamples the minority class up to the majority count. Each synthetic
/// trip interpolates between a random minority trip and one of its
/// `k_neighbors` nearest minority neighbours (Euclidean on z-scored features).
/// Original records are kept unchanged and in order; synthetic ones follow.
pub fn smote_balance(train: &Dataset, k_neighbors: usize, seed: u64) -> Result<Dataset, DatasetError> {
    if k_neighbors == 0 {
        return Err(DatasetError::InvalidArgument("k_neighbors must be at least 1".into()));
    }
    let (pos, neg) = (train.positive_count(), train.negative_count());
    if pos == neg {
        return Ok(train.clone());
    }
    let (minority_label, deficit) = if pos < neg {
        (super::RISKY, neg - pos)
    } else {
        (super::NON_RISKY, pos - neg)
    };
    let minority: Vec<&TrajectoryRecord> = train
        .records()
        .iter()
        .filter(|r| r.risk_label == minority_label)
        .collect();
    if minority.len() < 2 {
        return Err(DatasetError::InsufficientMinority { count: minority.len() });
    }

    let (mean, scale) = standardizer(train.records());
    let z: Vec<[f64; VARIABLE_COUNT]> = minority
        .iter()
        .map(|r| {
            let mut out = [0.0; VARIABLE_COUNT];
            for (j, o) in out.iter_mut().enumerate() {
                *o = (r.features.0[j] - mean[j]) / scale[j];
            }
            out
        })
        .collect();
    let k = k_neighbors.min(minority.len() - 1);
    let neighbours: Vec<Vec<usize>> = (0..z.len())
        .map(|i| {
            let mut by_dist: Vec<(f64, usize)> = (0..z.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let d2: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| (a - b).powi(2)).sum();
                    (d2, j)
                })
                .collect();
            by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            by_dist.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();

    let mut taken: HashSet<String> = train.records().iter().map(|r| r.trajectory_id.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = train.records().to_vec();
    let mut counter = 0usize;
    for _ in 0..deficit {
        let i = rng.random_range(0..minority.len());
        let nn = neighbours[i][rng.random_range(0..k)];
        let u: f64 = rng.random();
        let (base, other) = (&minority[i].features, &minority[nn].features);
        let mut features = Features::default();
        for j in 0..VARIABLE_COUNT {
            features.0[j] = base.0[j] + u * (other.0[j] - base.0[j]);
        }
        let id = loop {
            let candidate = format!("smote-{counter:06}");
            counter += 1;
            if taken.insert(candidate.clone()) {
                break candidate;
            }
        };
        records.push(TrajectoryRecord {
            trajectory_id: id,
            vehicle_id: minority[i].vehicle_id.clone(),
            features,
            risk_label: minority_label,
        });
    }
    Dataset::new(records, Provenance::Derived)
}
