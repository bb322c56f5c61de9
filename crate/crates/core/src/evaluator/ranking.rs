use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{EvalError, ImportanceDistribution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub item: String,
    pub mean_frequency: f64,
    pub std_frequency: f64,
}

/// Sorted by mean descending, ties by item name ascending.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn from_entries(mut entries: Vec<RankedEntry>) -> Self {
        entries.sort_by(|a, b| {
            b.mean_frequency
                .total_cmp(&a.mean_frequency)
                .then_with(|| a.item.cmp(&b.item))
        });
        Self { entries }
    }

    pub fn items(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.item.as_str())
    }

    pub fn top(&self, k: usize) -> Vec<&str> {
        self.items().take(k).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Mean and population standard deviation over trials; absent counts are 0.
fn summarize(per_trial: &[BTreeMap<String, usize>]) -> Vec<RankedEntry> {
    let items: BTreeSet<&String> = per_trial.iter().flat_map(|m| m.keys()).collect();
    let n = per_trial.len().max(1) as f64;
    items
        .into_iter()
        .map(|item| {
            let xs: Vec<f64> = per_trial
                .iter()
                .map(|m| m.get(item).copied().unwrap_or(0) as f64)
                .collect();
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            RankedEntry {
                item: item.clone(),
                mean_frequency: mean,
                std_frequency: var.sqrt(),
            }
        })
        .collect()
}

/// Variables never identified in any trial are left out.
pub fn rank_importance(dist: &ImportanceDistribution) -> RankedList {
    let entries = summarize(&dist.variable_counts_by_name())
        .into_iter()
        .filter(|e| e.mean_frequency > 0.0)
        .collect();
    RankedList::from_entries(entries)
}

/// Keeps combinations whose mean count is strictly above `min_mean`.
pub fn rank_combinations(dist: &ImportanceDistribution, min_mean: f64) -> RankedList {
    let entries = summarize(&dist.combination_counts_by_key())
        .into_iter()
        .filter(|e| e.mean_frequency > min_mean)
        .collect();
    RankedList::from_entries(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankComparison {
    pub k: usize,
    pub top_k_overlap: usize,
    pub spearman: f64,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    sab / (saa * sbb).sqrt()
}

/// Top-k overlap and Spearman correlation of list positions over the union of
/// items; an item missing from a list takes rank `len + 1` there.
pub fn compare_rankings(a: &RankedList, b: &RankedList, k: usize) -> Result<RankComparison, EvalError> {
    if k == 0 {
        return Err(EvalError::Precondition("k must be >= 1".into()));
    }
    let (ta, tb): (BTreeSet<&str>, BTreeSet<&str>) = (a.top(k).into_iter().collect(), b.top(k).into_iter().collect());
    let union: BTreeSet<&str> = a.items().chain(b.items()).collect();
    let rank =
        |list: &RankedList, item: &str| list.items().position(|x| x == item).map_or(list.len() + 1, |p| p + 1) as f64;
    let ra: Vec<f64> = union.iter().map(|i| rank(a, i)).collect();
    let rb: Vec<f64> = union.iter().map(|i| rank(b, i)).collect();
    Ok(RankComparison {
        k,
        top_k_overlap: ta.intersection(&tb).count(),
        spearman: if union.is_empty() { 1.0 } else { pearson(&ra, &rb) },
    })
}
