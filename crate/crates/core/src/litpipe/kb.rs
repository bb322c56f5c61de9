use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{Variable, VariableSpec};

/// Literature-derived knowledge about one variable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbEntry {
    #[serde(default)]
    pub definition: String,
    #[serde(default)]
    pub impact: String,
    #[serde(default)]
    pub combination_impact: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KbField {
    Definition,
    Impact,
    CombinationImpact,
}

impl KbField {
    pub const ALL: [KbField; 3] = [KbField::Definition, KbField::Impact, KbField::CombinationImpact];

    pub fn of(self, e: &KbEntry) -> &str {
        match self {
            KbField::Definition => &e.definition,
            KbField::Impact => &e.impact,
            KbField::CombinationImpact => &e.combination_impact,
        }
    }
}

impl fmt::Display for KbField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KbField::Definition => "definition",
            KbField::Impact => "impact",
            KbField::CombinationImpact => "combination_impact",
        })
    }
}

/// On-disk form: `{"variables": {"<name>": {"definition", "impact", "combination_impact"}}}`.
/// Keys are free-form strings so that malformed files can be loaded and reported on.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub variables: BTreeMap<String, KbEntry>,
}

impl KnowledgeBase {
    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text).map_err(std::io::Error::other)
    }

    /// Pretty JSON with keys sorted, so equal knowledge bases serialize to equal bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("knowledge base serializes");
        s.push('\n');
        s
    }

    pub fn get(&self, v: Variable) -> Option<&KbEntry> {
        self.variables.get(v.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KbReport {
    pub total_cells: usize,
    pub filled_cells: usize,
    pub missing_variables: Vec<String>,
    pub empty_cells: Vec<(String, KbField)>,
    pub surplus_variables: Vec<String>,
}

impl KbReport {
    pub fn passed(&self) -> bool {
        self.filled_cells == self.total_cells && self.surplus_variables.is_empty()
    }

    /// Human-readable list of every problem.
    pub fn gaps(&self) -> Vec<String> {
        let mut out: Vec<String> = self.missing_variables.iter().map(|v| format!("{v}: missing")).collect();
        out.extend(self.empty_cells.iter().map(|(v, f)| format!("{v}.{f}: empty")));
        out.extend(
            self.surplus_variables
                .iter()
                .map(|v| format!("{v}: not a catalog variable")),
        );
        out
    }
}

impl fmt::Display for KbReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} cells filled", self.filled_cells, self.total_cells)?;
        for gap in self.gaps() {
            write!(f, "; {gap}")?;
        }
        Ok(())
    }
}

/// Checks presence and non-emptiness of all three fields for every catalog
/// variable, and flags keys outside the catalog.
pub fn validate_kb(kb: &KnowledgeBase, catalog: &[VariableSpec]) -> KbReport {
    let mut report = KbReport {
        total_cells: catalog.len() * KbField::ALL.len(),
        filled_cells: 0,
        missing_variables: Vec::new(),
        empty_cells: Vec::new(),
        surplus_variables: Vec::new(),
    };
    for spec in catalog {
        let Some(entry) = kb.variables.get(spec.name()) else {
            report.missing_variables.push(spec.name().to_string());
            continue;
        };
        for field in KbField::ALL {
            if field.of(entry).trim().is_empty() {
                report.empty_cells.push((spec.name().to_string(), field));
            } else {
                report.filled_cells += 1;
            }
        }
    }
    report.surplus_variables = kb
        .variables
        .keys()
        .filter(|k| !catalog.iter().any(|s| s.name() == k.as_str()))
        .cloned()
        .collect();
    report
}

#[cfg(test)]
pub(crate) fn filled_kb() -> KnowledgeBase {
    KnowledgeBase {
        variables: Variable::ALL
            .iter()
            .map(|v| {
                (
                    v.name().to_string(),
                    KbEntry {
                        definition: v.spec().description.to_lowercase(),
                        impact: format!("Higher {v} raises risk."),
                        combination_impact: format!("{v} interacts with speed variability."),
                    },
                )
            })
            .collect(),
    }
}
