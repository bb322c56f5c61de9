//! Trajectory risk records: CSV ingest, synthesis from marginal moments,
//! stratified splitting, SMOTE balancing and evaluation sampling.

mod csv_io;
mod sampling;
mod smote;
mod synth;

use std::collections::HashSet;
use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{Variable, VARIABLE_COUNT};

pub use csv_io::{load_csv, read_csv, write_csv, CSV_HEADER};
pub use sampling::{sample_eval, split, EvalRatio};
pub use smote::smote_balance;
pub use synth::{synthesize, Moments, SynthesisSpec};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("schema error: column `{column}` {problem}")]
    Schema { column: String, problem: &'static str },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("duplicate trajectory_id `{0}`")]
    DuplicateId(String),
    #[error("invalid synthesis spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),
    #[error("cannot stratify: class {label} has {count} record(s), need at least 2")]
    Stratification { label: u8, count: usize },
    #[error("insufficient minority data: {count} record(s), need at least 2")]
    InsufficientMinority { count: usize },
    #[error("cannot sample {needed} {class} records, only {available} available (short by {})", .needed - .available)]
    Sampling {
        class: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Feature vector in catalog order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Features(pub [f64; VARIABLE_COUNT]);

impl Features {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (Variable, f64)> + '_ {
        Variable::ALL.iter().map(move |&v| (v, self.0[v.index()]))
    }

    /// Checks the per-record invariants; returns a description of the first violation.
    pub fn check(&self) -> Result<(), String> {
        for (v, x) in self.iter() {
            if !x.is_finite() {
                return Err(format!("{v} is not finite"));
            }
            if x < 0.0 {
                return Err(format!("{v} = {x} is negative"));
            }
        }
        let fam = self[Variable::Familiarity];
        if fam > 1.0 {
            return Err(format!("l_fam = {fam} exceeds 1"));
        }
        if self[Variable::TrafficSpeedMax] < self[Variable::TrafficSpeedMean] {
            return Err("lk_max_s is below lk_avg_s".to_string());
        }
        Ok(())
    }
}

impl Index<Variable> for Features {
    type Output = f64;

    fn index(&self, v: Variable) -> &f64 {
        &self.0[v.index()]
    }
}

impl IndexMut<Variable> for Features {
    fn index_mut(&mut self, v: Variable) -> &mut f64 {
        &mut self.0[v.index()]
    }
}

/// Binary risk label: 1 when a forward collision warning fired on the target segment.
pub const RISKY: u8 = 1;
pub const NON_RISKY: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub trajectory_id: String,
    pub vehicle_id: String,
    pub features: Features,
    pub risk_label: u8,
}

impl TrajectoryRecord {
    pub fn is_risky(&self) -> bool {
        self.risk_label == RISKY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Ingested,
    Synthetic,
    Derived,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Ingested => "ingested",
            Provenance::Synthetic => "synthetic",
            Provenance::Derived => "derived",
        })
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ingested" => Ok(Provenance::Ingested),
            "synthetic" => Ok(Provenance::Synthetic),
            "derived" => Ok(Provenance::Derived),
            other => Err(format!("unknown provenance `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<TrajectoryRecord>,
    provenance: Provenance,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate trajectory ids.
    pub fn new(records: Vec<TrajectoryRecord>, provenance: Provenance) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.trajectory_id.as_str()) {
                return Err(DatasetError::DuplicateId(r.trajectory_id.clone()));
            }
        }
        Ok(Self { records, provenance })
    }

    pub fn records(&self) -> &[TrajectoryRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TrajectoryRecord> {
        self.records
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_risky()).count()
    }

    pub fn negative_count(&self) -> usize {
        self.len() - self.positive_count()
    }

    pub fn risky(&self) -> impl Iterator<Item = &TrajectoryRecord> {
        self.records.iter().filter(|r| r.is_risky())
    }

    pub fn non_risky(&self) -> impl Iterator<Item = &TrajectoryRecord> {
        self.records.iter().filter(|r| !r.is_risky())
    }

    /// Risky records only, as a derived dataset.
    pub fn risky_subset(&self) -> Dataset {
        Dataset {
            records: self.risky().cloned().collect(),
            provenance: Provenance::Derived,
        }
    }

    pub fn find(&self, trajectory_id: &str) -> Option<&TrajectoryRecord> {
        self.records.iter().find(|r| r.trajectory_id == trajectory_id)
    }

    /// Row-major feature matrix (catalog column order).
    pub fn feature_rows(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.features.0.to_vec()).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.risk_label).collect()
    }
}
