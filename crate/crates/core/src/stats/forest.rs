use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::Variable;
use crate::dataset::{Dataset, TrajectoryRecord, NON_RISKY, RISKY};
use crate::evaluator::{RankedEntry, RankedList};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means floor(sqrt(d)).
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 12,
            min_leaf: 2,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Gini decrease weighted by the node's share of the bootstrap sample.
        weighted_decrease: f64,
    },
    Leaf {
        counts: [usize; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> u8 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return if counts[1] > counts[0] { RISKY } else { NON_RISKY },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub feature_names: Vec<String>,
    pub seed: u64,
    pub params: ForestParams,
}

fn gini(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (c[0] as f64 / n, c[1] as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

fn class_counts(y: &[u8], idx: &[usize]) -> [usize; 2] {
    let pos = idx.iter().filter(|&&i| y[i] == RISKY).count();
    [idx.len() - pos, pos]
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    params: ForestParams,
    mtry: usize,
    n_boot: f64,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

impl Builder<'_> {
    fn best_split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<BestSplit> {
        let d = self.x[0].len();
        let parent = class_counts(self.y, idx);
        let n = idx.len() as f64;
        let parent_impurity = gini(parent);
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();
        for feature in index::sample(rng, d, self.mtry) {
            order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
            let mut left = [0usize; 2];
            for k in 0..order.len() - 1 {
                left[self.y[order[k]] as usize] += 1;
                let (lo, hi) = (self.x[order[k]][feature], self.x[order[k + 1]][feature]);
                let n_left = k + 1;
                if lo == hi || n_left < self.params.min_leaf || order.len() - n_left < self.params.min_leaf {
                    continue;
                }
                let right = [parent[0] - left[0], parent[1] - left[1]];
                let child = (n_left as f64 * gini(left) + (order.len() - n_left) as f64 * gini(right)) / n;
                let decrease = parent_impurity - child;
                if decrease > 1e-12 && best.as_ref().is_none_or(|b| decrease > b.decrease) {
                    let mid = lo + (hi - lo) / 2.0;
                    best = Some(BestSplit {
                        feature,
                        threshold: if mid < hi { mid } else { lo },
                        decrease,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = class_counts(self.y, &idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || depth >= self.params.max_depth || idx.len() < 2 * self.params.min_leaf {
            return id;
        }
        let Some(split) = self.best_split(&idx, rng) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][split.feature] <= split.threshold);
        let weighted_decrease = split.decrease * idx.len() as f64 / self.n_boot;
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            weighted_decrease,
        };
        id
    }
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

/// Trains on a row-major matrix. Each tree draws its own bootstrap sample from
/// an RNG stream derived from `(seed, tree index)`, so the result does not
/// depend on thread scheduling.
pub fn train_matrix(
    x: &[Vec<f64>],
    y: &[u8],
    feature_names: Vec<String>,
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel, StatsError> {
    if x.len() != y.len() || x.is_empty() {
        return Err(StatsError::Precondition(
            "feature rows and labels must be nonempty and equal in length".into(),
        ));
    }
    let d = feature_names.len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(StatsError::Precondition(
            "every row must have one value per feature name".into(),
        ));
    }
    if !(y.contains(&RISKY) && y.contains(&NON_RISKY)) {
        return Err(StatsError::Precondition(
            "training data must contain both classes".into(),
        ));
    }
    if params.n_trees == 0 || params.min_leaf == 0 {
        return Err(StatsError::Precondition("n_trees and min_leaf must be >= 1".into()));
    }
    let mtry = params
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
        .clamp(1, d);
    let n = x.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(seed, t);
            let boot: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut b = Builder {
                x,
                y,
                params: *params,
                mtry,
                n_boot: n as f64,
                nodes: Vec::new(),
            };
            b.grow(boot, 0, &mut rng);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(ForestModel {
        trees,
        feature_names,
        seed,
        params: *params,
    })
}

pub fn rf_train(train: &Dataset, params: &ForestParams, seed: u64) -> Result<ForestModel, StatsError> {
    let names = Variable::ALL.iter().map(|v| v.name().to_string()).collect();
    train_matrix(&train.feature_rows(), &train.labels(), names, params, seed)
}

impl ForestModel {
    /// Majority vote; an even split goes to the low-risk class.
    pub fn predict_row(&self, x: &[f64]) -> u8 {
        let votes = self.trees.iter().filter(|t| t.predict(x) == RISKY).count();
        if 2 * votes > self.trees.len() {
            RISKY
        } else {
            NON_RISKY
        }
    }

    pub fn predict_matrix(&self, x: &[Vec<f64>]) -> Vec<u8> {
        x.iter().map(|r| self.predict_row(r)).collect()
    }
}

/// Looks features up by name, so a model trained on other columns is rejected.
pub fn rf_predict(model: &ForestModel, records: &[TrajectoryRecord]) -> Result<Vec<u8>, StatsError> {
    let vars = model
        .feature_names
        .iter()
        .map(|n| n.parse::<Variable>().map_err(|_| StatsError::UnknownFeature(n.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(records
        .iter()
        .map(|r| {
            let row: Vec<f64> = vars.iter().map(|&v| r.features[v]).collect();
            model.predict_row(&row)
        })
        .collect())
}

/// Normalized mean decrease in impurity, keyed by feature name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector(pub BTreeMap<String, f64>);

impl ImportanceVector {
    pub fn to_ranked(&self) -> RankedList {
        average_importance(std::slice::from_ref(self))
    }
}

pub fn rf_importance(model: &ForestModel) -> ImportanceVector {
    let d = model.feature_names.len();
    let mut total = vec![0.0; d];
    for tree in &model.trees {
        for node in &tree.nodes {
            if let Node::Split {
                feature,
                weighted_decrease,
                ..
            } = node
            {
                total[*feature] += weighted_decrease;
            }
        }
    }
    let n_trees = model.trees.len().max(1) as f64;
    total.iter_mut().for_each(|v| *v /= n_trees);
    let sum: f64 = total.iter().sum();
    if sum > 0.0 {
        total.iter_mut().for_each(|v| *v /= sum);
    }
    ImportanceVector(model.feature_names.iter().cloned().zip(total).collect())
}

/// Mean and population standard deviation of importances over repeated runs.
pub fn average_importance(runs: &[ImportanceVector]) -> RankedList {
    let mut names: Vec<&String> = runs.iter().flat_map(|r| r.0.keys()).collect();
    names.sort();
    names.dedup();
    let n = runs.len().max(1) as f64;
    RankedList::from_entries(
        names
            .into_iter()
            .map(|name| {
                let xs: Vec<f64> = runs.iter().map(|r| r.0.get(name).copied().unwrap_or(0.0)).collect();
                let mean = xs.iter().sum::<f64>() / n;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                RankedEntry {
                    item: name.clone(),
                    mean_frequency: mean,
                    std_frequency: var.sqrt(),
                }
            })
            .collect(),
    )
}
