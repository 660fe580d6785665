//! Scenario-space schema: features, skill groups, scenarios and profiles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintExpr;
use crate::error::{Error, Result};
use crate::rational::Rational;

/// Upper bound on values per feature; Allow sets are compiled to 64-bit masks.
pub const MAX_VALUES_PER_FEATURE: usize = 64;

pub const MIN_WEIGHT: u8 = 1;
pub const MAX_WEIGHT: u8 = 5;

/// One configurable scenario dimension with its ordered difficulty values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    #[serde(rename = "id")]
    pub feature_id: u32,
    pub name: String,
    #[serde(rename = "group")]
    pub group_id: u32,
    pub values: Vec<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl FeatureSchema {
    pub fn new(feature_id: u32, name: impl Into<String>, group_id: u32, values: Vec<Rational>) -> Self {
        FeatureSchema {
            feature_id,
            name: name.into(),
            group_id,
            values,
            labels: None,
        }
    }

    pub fn with_labels<S: Into<String>>(mut self, labels: impl IntoIterator<Item = S>) -> Self {
        self.labels = Some(labels.into_iter().map(Into::into).collect());
        self
    }

    pub fn max_value(&self) -> Rational {
        self.values.last().copied().unwrap_or(Rational::ZERO)
    }

    /// Human-readable name for the value at `index`, falling back to the rational.
    pub fn label(&self, index: usize) -> String {
        match &self.labels {
            Some(labels) if index < labels.len() => labels[index].clone(),
            _ => self
                .values
                .get(index)
                .map(|v| v.to_string())
                .unwrap_or_else(|| format!("#{index}")),
        }
    }

    pub fn value_index(&self, value: Rational) -> Option<usize> {
        self.values.binary_search(&value).ok()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillGroup {
    #[serde(rename = "id")]
    pub group_id: u32,
    pub name: String,
}

impl SkillGroup {
    pub fn new(group_id: u32, name: impl Into<String>) -> Self {
        SkillGroup {
            group_id,
            name: name.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpace {
    pub features: Vec<FeatureSchema>,
    pub groups: Vec<SkillGroup>,
}

impl ScenarioSpace {
    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    /// Position of `feature_id` in the feature list.
    pub fn position(&self, feature_id: u32) -> Option<usize> {
        self.features.iter().position(|f| f.feature_id == feature_id)
    }

    pub fn feature(&self, feature_id: u32) -> Option<&FeatureSchema> {
        self.features.iter().find(|f| f.feature_id == feature_id)
    }

    pub fn group(&self, group_id: u32) -> Option<&SkillGroup> {
        self.groups.iter().find(|g| g.group_id == group_id)
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.features.iter().map(|f| f.values.len()).collect()
    }

    /// Product of per-feature value counts; `SpaceTooLarge` past `u64`.
    pub fn total_combinations(&self) -> Result<u64> {
        self.features.iter().try_fold(1u64, |acc, f| {
            acc.checked_mul(f.values.len() as u64).ok_or(Error::SpaceTooLarge)
        })
    }

    /// Returns every invariant violation; an empty report means the space is valid.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.features.is_empty() {
            violations.push(Violation::NoFeatures);
        }

        let mut group_ids = BTreeSet::new();
        for g in &self.groups {
            if !group_ids.insert(g.group_id) {
                violations.push(Violation::DuplicateGroupId { group_id: g.group_id });
            }
        }

        let mut feature_ids = BTreeSet::new();
        for f in &self.features {
            let feature_id = f.feature_id;
            if !feature_ids.insert(feature_id) {
                violations.push(Violation::DuplicateFeatureId { feature_id });
            }
            if !group_ids.contains(&f.group_id) {
                violations.push(Violation::DanglingGroup {
                    feature_id,
                    group_id: f.group_id,
                });
            }
            if f.values.is_empty() {
                violations.push(Violation::EmptyValues { feature_id });
            }
            if f.values.len() > MAX_VALUES_PER_FEATURE {
                violations.push(Violation::TooManyValues {
                    feature_id,
                    count: f.values.len(),
                });
            }
            for v in &f.values {
                if *v < 0 || *v > 1 {
                    violations.push(Violation::ValueOutOfRange { feature_id, value: *v });
                }
            }
            for (i, pair) in f.values.windows(2).enumerate() {
                if pair[0] == pair[1] {
                    violations.push(Violation::DuplicateValue {
                        feature_id,
                        value: pair[0],
                    });
                } else if pair[0] > pair[1] {
                    violations.push(Violation::NotAscending {
                        feature_id,
                        position: i + 1,
                    });
                }
            }
            if let Some(labels) = &f.labels {
                if labels.len() != f.values.len() {
                    violations.push(Violation::LabelCountMismatch {
                        feature_id,
                        values: f.values.len(),
                        labels: labels.len(),
                    });
                }
            }
        }
        ValidationReport { violations }
    }

    /// Checks that `scenario` assigns an in-range value index to every feature.
    pub fn check_scenario(&self, scenario: &Scenario) -> Result<()> {
        if scenario.assignment.len() != self.features.len() {
            return Err(Error::DimensionMismatch {
                expected: self.features.len(),
                got: scenario.assignment.len(),
            });
        }
        for (f, &idx) in self.features.iter().zip(&scenario.assignment) {
            if idx >= f.values.len() {
                return Err(Error::IndexOutOfRange {
                    feature_id: f.feature_id,
                    index: idx,
                    len: f.values.len(),
                });
            }
        }
        Ok(())
    }

    /// Feature name → value label, in feature order.
    pub fn labels_for(&self, scenario: &Scenario) -> IndexMap<String, String> {
        self.features
            .iter()
            .zip(&scenario.assignment)
            .map(|(f, &idx)| (f.name.clone(), f.label(idx)))
            .collect()
    }

    /// Hex SHA-256 of the canonical JSON document.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let doc = serde_json::to_vec(self).expect("space serializes");
        hex::encode(Sha256::digest(&doc))
    }
}

/// One complete assignment: a value index per feature, in feature order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scenario {
    pub assignment: Vec<usize>,
}

impl Scenario {
    pub fn new(assignment: Vec<usize>) -> Self {
        Scenario { assignment }
    }

    /// Number of features whose value index differs.
    pub fn hamming(&self, other: &Scenario) -> usize {
        self.assignment
            .iter()
            .zip(&other.assignment)
            .filter(|(a, b)| a != b)
            .count()
    }

    pub fn values(&self, space: &ScenarioSpace) -> Vec<Rational> {
        space
            .features
            .iter()
            .zip(&self.assignment)
            .map(|(f, &i)| f.values[i])
            .collect()
    }
}

impl From<Vec<usize>> for Scenario {
    fn from(assignment: Vec<usize>) -> Self {
        Scenario { assignment }
    }
}

/// Per-user personalization: group weights plus the admissibility constraint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    #[serde(rename = "id")]
    pub profile_id: String,
    pub name: String,
    pub weights: BTreeMap<u32, u8>,
    pub constraint: ConstraintExpr,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub version: u64,
}

impl Profile {
    pub fn weight(&self, group_id: u32) -> Option<u8> {
        self.weights.get(&group_id).copied()
    }

    /// Weight-range checks that need no space.
    pub fn check_weights(&self) -> ValidationReport {
        let violations = self
            .weights
            .iter()
            .filter(|(_, &w)| !(MIN_WEIGHT..=MAX_WEIGHT).contains(&w))
            .map(|(&group_id, &weight)| Violation::WeightOutOfRange { group_id, weight })
            .collect();
        ValidationReport { violations }
    }

    /// Full validation of weights and constraint against `space`.
    pub fn validate(&self, space: &ScenarioSpace) -> ValidationReport {
        let mut report = self.check_weights();
        for g in &space.groups {
            if !self.weights.contains_key(&g.group_id) {
                report.violations.push(Violation::MissingWeight { group_id: g.group_id });
            }
        }
        for &group_id in self.weights.keys() {
            if space.group(group_id).is_none() {
                report.violations.push(Violation::UnknownWeightGroup { group_id });
            }
        }
        if let Err(e) = self.constraint.validate(space) {
            report.violations.push(Violation::Constraint { message: e.to_string() });
        }
        report
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NoFeatures,
    EmptyValues { feature_id: u32 },
    TooManyValues { feature_id: u32, count: usize },
    ValueOutOfRange { feature_id: u32, value: Rational },
    NotAscending { feature_id: u32, position: usize },
    DuplicateValue { feature_id: u32, value: Rational },
    LabelCountMismatch { feature_id: u32, values: usize, labels: usize },
    DuplicateFeatureId { feature_id: u32 },
    DuplicateGroupId { group_id: u32 },
    DanglingGroup { feature_id: u32, group_id: u32 },
    MissingWeight { group_id: u32 },
    UnknownWeightGroup { group_id: u32 },
    WeightOutOfRange { group_id: u32, weight: u8 },
    Constraint { message: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoFeatures => write!(f, "space has no features"),
            Violation::EmptyValues { feature_id } => {
                write!(f, "feature {feature_id}: empty value list")
            }
            Violation::TooManyValues { feature_id, count } => write!(
                f,
                "feature {feature_id}: {count} values exceeds the limit of {MAX_VALUES_PER_FEATURE}"
            ),
            Violation::ValueOutOfRange { feature_id, value } => {
                write!(f, "feature {feature_id}: value {value} outside [0,1]")
            }
            Violation::NotAscending { feature_id, position } => {
                write!(f, "feature {feature_id}: values not ascending at position {position}")
            }
            Violation::DuplicateValue { feature_id, value } => {
                write!(f, "feature {feature_id}: duplicate value {value}")
            }
            Violation::LabelCountMismatch {
                feature_id,
                values,
                labels,
            } => write!(f, "feature {feature_id}: {labels} labels for {values} values"),
            Violation::DuplicateFeatureId { feature_id } => {
                write!(f, "duplicate feature id {feature_id}")
            }
            Violation::DuplicateGroupId { group_id } => write!(f, "duplicate group id {group_id}"),
            Violation::DanglingGroup {
                feature_id,
                group_id,
            } => write!(f, "feature {feature_id}: dangling group reference {group_id}"),
            Violation::MissingWeight { group_id } => write!(f, "no weight for group {group_id}"),
            Violation::UnknownWeightGroup { group_id } => {
                write!(f, "weight given for unknown group {group_id}")
            }
            Violation::WeightOutOfRange { group_id, weight } => write!(
                f,
                "group {group_id}: weight out of range ({weight} not in {MIN_WEIGHT}..={MAX_WEIGHT})"
            ),
            Violation::Constraint { message } => write!(f, "constraint: {message}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Every invariant violation of `space`; empty when valid.
pub fn validate_space(space: &ScenarioSpace) -> ValidationReport {
    space.validate()
}
