use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::Variable;
use crate::dataset::Features;

use super::StatsError;

pub const MIN_PERMUTATIONS: usize = 99;

/// Relative slack when comparing permuted and observed pseudo-F, so that
/// assignments equal in exact arithmetic are counted as ties.
const F_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermanovaResult {
    pub pseudo_f: f64,
    pub p_value: f64,
    pub n_permutations: usize,
    pub observed_groups: (usize, usize),
    /// Every distinct assignment was evaluated instead of random draws.
    pub exhaustive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Significance {
    Ns,
    One,
    Two,
    Three,
}

impl Significance {
    pub fn as_str(self) -> &'static str {
        match self {
            Significance::Ns => "ns",
            Significance::One => "*",
            Significance::Two => "**",
            Significance::Three => "***",
        }
    }
}

impl std::fmt::Display for Significance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Significance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

pub const DEFAULT_ALPHA_LEVELS: [f64; 3] = [0.05, 0.01, 0.001];

pub fn significance_stars(p: f64) -> Significance {
    significance_at(p, &DEFAULT_ALPHA_LEVELS)
}

/// One star per level that `p` falls strictly below; `levels` runs from the
/// loosest to the strictest.
pub fn significance_at(p: f64, levels: &[f64; 3]) -> Significance {
    match levels.iter().filter(|&&a| p < a).count() {
        0 => Significance::Ns,
        1 => Significance::One,
        2 => Significance::Two,
        _ => Significance::Three,
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Pooled z-scores; columns constant over the pooled data are dropped.
fn standardize(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, StatsError> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mut keep = Vec::new();
    for j in 0..d {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        if var > 0.0 {
            keep.push((j, mean, var.sqrt()));
        }
    }
    if keep.is_empty() {
        return Err(StatsError::Degenerate(
            "all selected columns are constant over the pooled data".into(),
        ));
    }
    Ok(rows
        .iter()
        .map(|r| keep.iter().map(|&(j, m, s)| (r[j] - m) / s).collect())
        .collect())
}

/// Squared-distance sums needed by the pseudo-F decomposition.
struct Pooled {
    z: Vec<Vec<f64>>,
    sq_norms: Vec<f64>,
    /// Sum over all pairs i<j of squared Euclidean distance.
    total_pairs: f64,
    total_norms: f64,
    total_sum: Vec<f64>,
}

impl Pooled {
    fn new(z: Vec<Vec<f64>>) -> Self {
        let d = z[0].len();
        let sq_norms: Vec<f64> = z.iter().map(|r| r.iter().map(|x| x * x).sum()).collect();
        let mut total_sum = vec![0.0; d];
        for r in &z {
            for (s, x) in total_sum.iter_mut().zip(r) {
                *s += x;
            }
        }
        let total_norms: f64 = sq_norms.iter().sum();
        let total_pairs = pair_sum(z.len(), total_norms, &total_sum);
        Self {
            z,
            sq_norms,
            total_pairs,
            total_norms,
            total_sum,
        }
    }

    /// Pseudo-F with `group` as one group and everything else as the other.
    fn pseudo_f(&self, group: &[usize]) -> f64 {
        let n = self.z.len();
        let na = group.len();
        let nb = n - na;
        let mut sum_a = vec![0.0; self.total_sum.len()];
        let mut norms_a = 0.0;
        for &i in group {
            norms_a += self.sq_norms[i];
            for (s, x) in sum_a.iter_mut().zip(&self.z[i]) {
                *s += x;
            }
        }
        let sum_b: Vec<f64> = self.total_sum.iter().zip(&sum_a).map(|(t, a)| t - a).collect();
        let pairs_a = pair_sum(na, norms_a, &sum_a);
        let pairs_b = pair_sum(nb, self.total_norms - norms_a, &sum_b);
        let ss_total = self.total_pairs / n as f64;
        let ss_within = pairs_a / na as f64 + pairs_b / nb as f64;
        let ss_between = (ss_total - ss_within).max(0.0);
        if ss_within <= 0.0 {
            return if ss_between > 0.0 { f64::INFINITY } else { 0.0 };
        }
        ss_between / (ss_within / (n - 2) as f64)
    }
}

/// Sum of squared Euclidean distances over all pairs of a point set, from its
/// size, summed squared norms and coordinate sum: n·Σ‖x‖² − ‖Σx‖².
fn pair_sum(n: usize, norms: f64, sum: &[f64]) -> f64 {
    (n as f64 * norms - sum.iter().map(|s| s * s).sum::<f64>()).max(0.0)
}

fn at_least(f: f64, observed: f64) -> bool {
    if observed.is_infinite() {
        f.is_infinite()
    } else {
        f >= observed - F_TOLERANCE * observed.abs().max(1.0)
    }
}

/// Two-group PERMANOVA on rows that already hold only the selected columns.
///
/// When the number of distinct assignments `C(N, n_a)` is at most
/// `n_perm + 1`, every assignment is evaluated and `p` is exact; otherwise
/// `n_perm` random relabelings are drawn (seeded per permutation index) and
/// `p = (1 + #{F* >= F}) / (1 + n_perm)`.
pub fn permanova_rows(
    risky: &[Vec<f64>],
    nonrisky: &[Vec<f64>],
    n_perm: usize,
    seed: u64,
) -> Result<PermanovaResult, StatsError> {
    let (na, nb) = (risky.len(), nonrisky.len());
    if na < 2 || nb < 2 {
        return Err(StatsError::Precondition(format!(
            "each group needs at least 2 rows, got {na} and {nb}"
        )));
    }
    let d = risky[0].len();
    if d == 0 || risky.iter().chain(nonrisky).any(|r| r.len() != d) {
        return Err(StatsError::Precondition(
            "rows must share a nonzero column count".into(),
        ));
    }
    let n = na + nb;
    let assignments = binomial(n, na);
    let exhaustive = assignments <= (n_perm + 1) as f64;
    if !exhaustive && n_perm < MIN_PERMUTATIONS {
        return Err(StatsError::Precondition(format!(
            "n_perm must be at least {MIN_PERMUTATIONS}, got {n_perm}"
        )));
    }

    let pooled: Vec<Vec<f64>> = risky.iter().chain(nonrisky).cloned().collect();
    let pooled = Pooled::new(standardize(&pooled)?);
    let observed: Vec<usize> = (0..na).collect();
    let f_obs = pooled.pseudo_f(&observed);

    let (hits, n_permutations) = if exhaustive {
        let hits = (0..n)
            .combinations(na)
            .filter(|g| at_least(pooled.pseudo_f(g), f_obs))
            .count();
        // The observed assignment is one of the enumerated ones.
        (hits - 1, assignments as usize - 1)
    } else {
        let hits = (0..n_perm)
            .into_par_iter()
            .filter(|&k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let group = rand::seq::index::sample(&mut rng, n, na).into_vec();
                at_least(pooled.pseudo_f(&group), f_obs)
            })
            .count();
        (hits, n_perm)
    };
    Ok(PermanovaResult {
        pseudo_f: f_obs,
        p_value: (1 + hits) as f64 / (1 + n_permutations) as f64,
        n_permutations,
        observed_groups: (na, nb),
        exhaustive,
    })
}

/// PERMANOVA of risky against non-risky trips on the columns in `vars`.
pub fn permanova(
    risky: &[Features],
    nonrisky: &[Features],
    vars: &[Variable],
    n_perm: usize,
    seed: u64,
) -> Result<PermanovaResult, StatsError> {
    if vars.is_empty() {
        return Err(StatsError::Precondition("no variables selected".into()));
    }
    let select =
        |rows: &[Features]| -> Vec<Vec<f64>> { rows.iter().map(|f| vars.iter().map(|&v| f[v]).collect()).collect() };
    permanova_rows(&select(risky), &select(nonrisky), n_perm, seed)
}
