use std::collections::BTreeSet;
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::Variable;
use crate::dataset::{NON_RISKY, RISKY};

static RISK_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bRISK\s*:\s*\**\s*(HIGH|LOW)\b").unwrap());

/// First `RISK: HIGH|LOW` marker in the reply, case-insensitive.
pub fn parse_task1(text: &str) -> Option<u8> {
    let caps = RISK_LINE.captures(text)?;
    Some(if caps[1].eq_ignore_ascii_case("high") {
        RISKY
    } else {
        NON_RISKY
    })
}

/// Two or more distinct variables, stored sorted in catalog order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Combination(Vec<Variable>);

impl Combination {
    pub fn new(vars: impl IntoIterator<Item = Variable>) -> Option<Self> {
        let set: BTreeSet<Variable> = vars.into_iter().collect();
        (set.len() >= 2).then(|| Combination(set.into_iter().collect()))
    }

    pub fn variables(&self) -> &[Variable] {
        &self.0
    }

    /// Stable key: names sorted alphabetically and joined with `+`.
    pub fn key(&self) -> String {
        let mut names: Vec<&str> = self.0.iter().map(|v| v.name()).collect();
        names.sort_unstable();
        names.join("+")
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl Serialize for Combination {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.key())
    }
}

impl<'de> Deserialize<'de> for Combination {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let vars = s
            .split('+')
            .map(|n| n.parse::<Variable>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(serde::de::Error::custom)?;
        Combination::new(vars).ok_or_else(|| serde::de::Error::custom("need two or more variables"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task2Answer {
    pub key_variables: Vec<Variable>,
    pub key_combinations: Vec<Combination>,
    /// Names or combinations that could not be mapped onto the catalog.
    pub dropped: usize,
}

fn variable_name(v: &Value) -> Option<Variable> {
    let s = v.as_str()?;
    s.trim().trim_matches('`').to_ascii_lowercase().parse().ok()
}

fn from_object(obj: &serde_json::Map<String, Value>) -> Option<Task2Answer> {
    let vars = obj.get("key_variables")?.as_array()?;
    let mut answer = Task2Answer::default();
    for v in vars {
        match variable_name(v) {
            Some(var) if !answer.key_variables.contains(&var) => answer.key_variables.push(var),
            Some(_) => {}
            None => answer.dropped += 1,
        }
    }
    let combos = obj
        .get("key_combinations")
        .and_then(Value::as_array)
        .map(Vec::as_slice)
        .unwrap_or_default();
    for c in combos {
        let parsed = c.as_array().and_then(|members| {
            let vars: Option<Vec<Variable>> = members.iter().map(variable_name).collect();
            Combination::new(vars?)
        });
        match parsed {
            Some(c) if !answer.key_combinations.contains(&c) => answer.key_combinations.push(c),
            Some(_) => {}
            None => answer.dropped += 1,
        }
    }
    Some(answer)
}

/// Finds the first JSON object in the reply that carries `key_variables`.
/// Surrounding prose and code fences are tolerated; unknown names are
/// dropped and counted rather than failing the whole answer.
pub fn parse_task2(text: &str) -> Option<Task2Answer> {
    crate::json_scan::find_object(text, |obj| from_object(&obj))
}
