//! The ten trajectory risk variables and their descriptive metadata.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the ten input features, in catalog order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variable {
    #[serde(rename = "l_f_col")]
    LongFcwRate,
    #[serde(rename = "l_std_s")]
    LongSpeedStd,
    #[serde(rename = "l_fam")]
    Familiarity,
    #[serde(rename = "s_f_col")]
    TripFcwRate,
    #[serde(rename = "s_lane_d")]
    TripLaneDeparture,
    #[serde(rename = "s_avg_s")]
    TripSpeedMean,
    #[serde(rename = "s_std_s")]
    TripSpeedStd,
    #[serde(rename = "lk_avg_s")]
    TrafficSpeedMean,
    #[serde(rename = "lk_std_s")]
    TrafficSpeedStd,
    #[serde(rename = "lk_max_s")]
    TrafficSpeedMax,
}

pub const VARIABLE_COUNT: usize = 10;

impl Variable {
    pub const ALL: [Variable; VARIABLE_COUNT] = [
        Variable::LongFcwRate,
        Variable::LongSpeedStd,
        Variable::Familiarity,
        Variable::TripFcwRate,
        Variable::TripLaneDeparture,
        Variable::TripSpeedMean,
        Variable::TripSpeedStd,
        Variable::TrafficSpeedMean,
        Variable::TrafficSpeedStd,
        Variable::TrafficSpeedMax,
    ];

    /// Position in catalog order; also the column index in feature vectors.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::LongFcwRate => "l_f_col",
            Variable::LongSpeedStd => "l_std_s",
            Variable::Familiarity => "l_fam",
            Variable::TripFcwRate => "s_f_col",
            Variable::TripLaneDeparture => "s_lane_d",
            Variable::TripSpeedMean => "s_avg_s",
            Variable::TripSpeedStd => "s_std_s",
            Variable::TrafficSpeedMean => "lk_avg_s",
            Variable::TrafficSpeedStd => "lk_std_s",
            Variable::TrafficSpeedMax => "lk_max_s",
        }
    }

    pub fn group(self) -> VariableGroup {
        match self {
            Variable::LongFcwRate | Variable::LongSpeedStd | Variable::Familiarity => VariableGroup::LongTerm,
            Variable::TripFcwRate | Variable::TripLaneDeparture | Variable::TripSpeedMean | Variable::TripSpeedStd => {
                VariableGroup::ShortTerm
            }
            Variable::TrafficSpeedMean | Variable::TrafficSpeedStd | Variable::TrafficSpeedMax => {
                VariableGroup::Traffic
            }
        }
    }

    pub fn spec(self) -> &'static VariableSpec {
        &CATALOG[self.index()]
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown variable name `{0}`")]
pub struct UnknownVariable(pub String);

impl FromStr for Variable {
    type Err = UnknownVariable;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variable::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| UnknownVariable(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableGroup {
    /// Behaviour patterns aggregated over the vehicle's trip history.
    LongTerm,
    /// Driving behaviour observed during the current trip.
    ShortTerm,
    /// Real-time traffic conditions on the road segments passed.
    Traffic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableSpec {
    pub variable: Variable,
    pub group: VariableGroup,
    pub description: &'static str,
    pub units: &'static str,
}

impl VariableSpec {
    pub fn name(&self) -> &'static str {
        self.variable.name()
    }
}

const fn spec(
    variable: Variable,
    group: VariableGroup,
    description: &'static str,
    units: &'static str,
) -> VariableSpec {
    VariableSpec {
        variable,
        group,
        description,
        units,
    }
}

/// The fixed variable catalog, indexed by [`Variable::index`].
pub static CATALOG: [VariableSpec; VARIABLE_COUNT] = [
    spec(
        Variable::LongFcwRate,
        VariableGroup::LongTerm,
        "Frequency of forward collision warning in historical trips",
        "times/km",
    ),
    spec(
        Variable::LongSpeedStd,
        VariableGroup::LongTerm,
        "Standard deviation of longterm driving speed",
        "m/s",
    ),
    spec(
        Variable::Familiarity,
        VariableGroup::LongTerm,
        "Ratio of historical trips that passed the target road segment",
        "ratio",
    ),
    spec(
        Variable::TripFcwRate,
        VariableGroup::ShortTerm,
        "Frequency of forward collision warning during the trip",
        "times/km",
    ),
    spec(
        Variable::TripLaneDeparture,
        VariableGroup::ShortTerm,
        "Frequency of lane departure warning during the trip",
        "times/km",
    ),
    spec(
        Variable::TripSpeedMean,
        VariableGroup::ShortTerm,
        "Average driving speed of the trip",
        "m/s",
    ),
    spec(
        Variable::TripSpeedStd,
        VariableGroup::ShortTerm,
        "Standard deviation of driving speed during the trip",
        "m/s",
    ),
    spec(
        Variable::TrafficSpeedMean,
        VariableGroup::Traffic,
        "Average traffic speed of road segments passed during the trip",
        "km/h",
    ),
    spec(
        Variable::TrafficSpeedStd,
        VariableGroup::Traffic,
        "Standard deviation of traffic speed of road segments passed during the trip",
        "km/h",
    ),
    spec(
        Variable::TrafficSpeedMax,
        VariableGroup::Traffic,
        "Maximum traffic speed of road segments passed during the trip",
        "km/h",
    ),
];

pub fn catalog() -> &'static [VariableSpec] {
    &CATALOG
}
