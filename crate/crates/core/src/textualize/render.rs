use serde::ser::{Serialize, SerializeMap, Serializer};

use crate::catalog::{VariableGroup, VariableSpec};
use crate::dataset::TrajectoryRecord;
use crate::litpipe::{validate_kb, KbEntry, KnowledgeBase};

use super::{PromptBundle, Task, TextError};

const PREDICT_SYSTEM: &str = include_str!("../../templates/predict_system.txt");
const INTERPRET_SYSTEM: &str = include_str!("../../templates/interpret_system.txt");
const SAMPLE_USER: &str = include_str!("../../templates/sample_user.txt");
const PREDICT_FORMAT: &str = include_str!("../../templates/predict_format.txt");
const INTERPRET_FORMAT: &str = include_str!("../../templates/interpret_format.txt");

/// How much of the knowledge base goes into the system prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeMode {
    /// Definition, impact and combination impact for every variable.
    #[default]
    Full,
    /// Definitions only; literature impacts are withheld.
    DefinitionsOnly,
}

struct KnowledgeJson<'a> {
    entries: Vec<(&'static str, &'a KbEntry)>,
    mode: KnowledgeMode,
}

struct EntryJson<'a>(&'a KbEntry, KnowledgeMode);

impl Serialize for EntryJson<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let full = self.1 == KnowledgeMode::Full;
        let mut m = s.serialize_map(Some(if full { 3 } else { 1 }))?;
        m.serialize_entry("definition", &self.0.definition)?;
        if full {
            m.serialize_entry("impact", &self.0.impact)?;
            m.serialize_entry("combination_impact", &self.0.combination_impact)?;
        }
        m.end()
    }
}

impl Serialize for KnowledgeJson<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.entries.len()))?;
        for (name, entry) in &self.entries {
            m.serialize_entry(name, &EntryJson(entry, self.mode))?;
        }
        m.end()
    }
}

/// Up to four decimals with trailing zeros removed: `0.0412`, `6.5`, `27`.
fn format_value(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn group_heading(g: VariableGroup) -> &'static str {
    match g {
        VariableGroup::LongTerm => "Long-term behaviour patterns of the truck:",
        VariableGroup::ShortTerm => "Short-term driving behaviour during the trip:",
        VariableGroup::Traffic => "Real-time traffic conditions on the road segments passed:",
    }
}

/// Renders prompts for one knowledge base and catalog. System texts are built
/// once, so every record of a task shares a byte-identical prefix.
#[derive(Debug, Clone)]
pub struct PromptRenderer {
    catalog: Vec<VariableSpec>,
    predict_system: String,
    interpret_system: String,
}

impl PromptRenderer {
    pub fn new(kb: &KnowledgeBase, catalog: &[VariableSpec], mode: KnowledgeMode) -> Result<Self, TextError> {
        let report = validate_kb(kb, catalog);
        if let Some(name) = report.missing_variables.first() {
            return Err(TextError::MissingKnowledge(name.clone()));
        }
        if let Some((name, field)) = report.empty_cells.first() {
            return Err(TextError::MissingKnowledge(format!("{name}.{field}")));
        }
        let knowledge = KnowledgeJson {
            entries: catalog.iter().map(|s| (s.name(), &kb.variables[s.name()])).collect(),
            mode,
        };
        let knowledge = serde_json::to_string_pretty(&knowledge).expect("knowledge JSON serializes");
        let system = |template: &str| template.replace("{{knowledge}}", &knowledge);
        Ok(Self {
            catalog: catalog.to_vec(),
            predict_system: system(PREDICT_SYSTEM),
            interpret_system: system(INTERPRET_SYSTEM),
        })
    }

    pub fn system_text(&self, task: Task) -> &str {
        match task {
            Task::Predict => &self.predict_system,
            Task::Interpret => &self.interpret_system,
        }
    }

    fn variables_block(&self, record: &TrajectoryRecord) -> String {
        let mut lines = Vec::new();
        let mut groups: Vec<VariableGroup> = Vec::new();
        for spec in &self.catalog {
            if !groups.contains(&spec.group) {
                groups.push(spec.group);
            }
        }
        for g in groups {
            if !lines.is_empty() {
                lines.push(String::new());
            }
            lines.push(group_heading(g).to_string());
            for spec in self.catalog.iter().filter(|s| s.group == g) {
                lines.push(format!(
                    "- {} = {} {}: {}",
                    spec.name(),
                    format_value(record.features[spec.variable]),
                    spec.units,
                    spec.description
                ));
            }
        }
        lines.join("\n")
    }

    fn user_text(&self, record: &TrajectoryRecord, format: &str) -> String {
        SAMPLE_USER
            .replace("{{variables}}", &self.variables_block(record))
            .replace("{{format}}", format.trim_end())
    }

    pub fn task1(&self, record: &TrajectoryRecord) -> PromptBundle {
        PromptBundle {
            system_text: self.predict_system.clone(),
            user_text: self.user_text(record, PREDICT_FORMAT),
            task: Task::Predict,
        }
    }

    /// Task 2 is only defined for high-risk trips.
    pub fn task2(&self, record: &TrajectoryRecord) -> Result<PromptBundle, TextError> {
        if !record.is_risky() {
            return Err(TextError::Precondition(format!(
                "trajectory {} is not labelled high risk",
                record.trajectory_id
            )));
        }
        Ok(PromptBundle {
            system_text: self.interpret_system.clone(),
            user_text: self.user_text(record, INTERPRET_FORMAT),
            task: Task::Interpret,
        })
    }
}

pub fn render_task1(
    record: &TrajectoryRecord,
    kb: &KnowledgeBase,
    catalog: &[VariableSpec],
) -> Result<PromptBundle, TextError> {
    Ok(PromptRenderer::new(kb, catalog, KnowledgeMode::Full)?.task1(record))
}

pub fn render_task2(
    record: &TrajectoryRecord,
    kb: &KnowledgeBase,
    catalog: &[VariableSpec],
) -> Result<PromptBundle, TextError> {
    PromptRenderer::new(kb, catalog, KnowledgeMode::Full)?.task2(record)
}
