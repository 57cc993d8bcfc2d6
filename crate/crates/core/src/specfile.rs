//! JSON column specification files.
//!
//! Components may be listed in any order; they are sorted by ascending
//! volatility on load and every flow vector is permuted to match. Sidedraw
//! rates are entered as positive withdrawals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::column::{Column, ColumnError, ColumnSpec, ComponentSystem, Stream, StreamKind, ThermalState};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot parse spec: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema_version {0}, expected {SCHEMA_VERSION}")]
    Version(u32),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Column(#[from] ColumnError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentEntry {
    pub name: String,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEntry {
    pub name: String,
    /// One-based order of the stream counted from the top of the column.
    pub position: usize,
    /// Positive component rates in mol/s, in the order of `components`.
    pub flows: Vec<f64>,
    pub thermal_state: ThermalState,
    /// Vapor part of `flows` for partially vaporized streams.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vapor_flows: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofEntry {
    pub component: String,
    /// Product giving up the component: `distillate`, `bottoms` or a sidedraw name.
    pub donor: String,
    pub receiver: String,
    /// Bounds on the receiver's flow of the component, mol/s.
    pub bounds: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryEntry {
    pub component: String,
    pub product: String,
    /// Required fraction of the total fed amount recovered in `product`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FreeSplitsEntry {
    pub dofs: Vec<DofEntry>,
    #[serde(default)]
    pub fixed_recoveries: Vec<RecoveryEntry>,
}

/// Literature reference values carried with an example, used for comparison
/// in reports only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Reference {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_reb_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_r_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_v_reb_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controlling_stream: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecFile {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub components: Vec<ComponentEntry>,
    #[serde(default)]
    pub feeds: Vec<StreamEntry>,
    #[serde(default)]
    pub sidedraws: Vec<StreamEntry>,
    pub distillate: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bottoms: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_splits: Option<FreeSplitsEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
}

impl SpecFile {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let spec: SpecFile = serde_json::from_str(text)?;
        if spec.schema_version != SCHEMA_VERSION {
            return Err(SpecError::Version(spec.schema_version));
        }
        Ok(spec)
    }

    /// Permutation taking ascending-volatility positions to file positions.
    fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.components.len()).collect();
        idx.sort_by(|&a, &b| self.components[a].alpha.total_cmp(&self.components[b].alpha));
        idx
    }

    /// Reorders a file-ordered vector into ascending volatility order.
    pub fn sorted(&self, v: &[f64], what: &str) -> Result<Vec<f64>, SpecError> {
        if v.len() != self.components.len() {
            return Err(SpecError::Invalid(format!(
                "{what} has {} entries, expected {}",
                v.len(),
                self.components.len()
            )));
        }
        Ok(self.order().into_iter().map(|i| v[i]).collect())
    }

    /// Index of a component in ascending volatility order.
    pub fn component_index(&self, name: &str) -> Result<usize, SpecError> {
        let file_idx = self
            .components
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| SpecError::Invalid(format!("unknown component {name}")))?;
        Ok(self.order().iter().position(|&i| i == file_idx).expect("permutation"))
    }

    pub fn component_system(&self) -> Result<ComponentSystem, SpecError> {
        let order = self.order();
        let names = order.iter().map(|&i| self.components[i].name.clone()).collect();
        let alphas = order.iter().map(|&i| self.components[i].alpha).collect();
        Ok(ComponentSystem::new(names, alphas)?)
    }

    /// Builds the unvalidated column specification.
    pub fn column_spec(&self) -> Result<ColumnSpec, SpecError> {
        let components = self.component_system()?;
        let mut entries: Vec<(&StreamEntry, StreamKind)> = self
            .feeds
            .iter()
            .map(|s| (s, StreamKind::Feed))
            .chain(self.sidedraws.iter().map(|s| (s, StreamKind::Sidedraw)))
            .collect();
        let n = entries.len();
        let mut positions: Vec<usize> = entries.iter().map(|(s, _)| s.position).collect();
        positions.sort_unstable();
        if positions != (1..=n).collect::<Vec<_>>() {
            return Err(SpecError::Invalid(format!(
                "stream positions must be 1..={n} without gaps or repeats"
            )));
        }
        entries.sort_by_key(|(s, _)| s.position);
        let mut names: Vec<&str> = entries.iter().map(|(s, _)| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) || names.iter().any(|n| matches!(*n, "distillate" | "bottoms")) {
            return Err(SpecError::Invalid(
                "stream names must be unique and not distillate/bottoms".into(),
            ));
        }
        let mut streams = Vec::with_capacity(n);
        for (e, kind) in entries {
            let flows = self.sorted(&e.flows, &format!("stream {} flows", e.name))?;
            if flows.iter().any(|f| *f < 0.0) {
                return Err(SpecError::Invalid(format!(
                    "stream {} has negative rates; sidedraws are entered as positive withdrawals",
                    e.name
                )));
            }
            let stream = match e.thermal_state {
                ThermalState::PartiallyVaporized => {
                    let vapor = e.vapor_flows.as_ref().ok_or_else(|| {
                        SpecError::Invalid(format!(
                            "stream {} is partially vaporized but has no vapor_flows",
                            e.name
                        ))
                    })?;
                    let vapor = self.sorted(vapor, &format!("stream {} vapor_flows", e.name))?;
                    let liquid: Vec<f64> = flows.iter().zip(&vapor).map(|(f, v)| f - v).collect();
                    Stream::two_phase(&e.name, kind, &liquid, &vapor)
                }
                state => {
                    if e.vapor_flows.is_some() {
                        return Err(SpecError::Invalid(format!(
                            "stream {} gives vapor_flows but is not partially vaporized",
                            e.name
                        )));
                    }
                    Stream::single_phase(&e.name, kind, state, &flows)
                }
            };
            streams.push(stream);
        }
        let distillate = self.sorted(&self.distillate, "distillate")?;
        let bottoms = self.bottoms.as_ref().map(|b| self.sorted(b, "bottoms")).transpose()?;
        Ok(ColumnSpec {
            components,
            streams,
            distillate,
            bottoms,
        })
    }

    pub fn column(&self) -> Result<Column, SpecError> {
        Ok(Column::new(self.column_spec()?)?)
    }
}

/// Bundled case-study specifications as `(name, json)`.
pub fn bundled_examples() -> Vec<(&'static str, &'static str)> {
    vec![
        ("ex1_scenario1", include_str!("../specs/ex1_scenario1.json")),
        ("ex1_scenario2", include_str!("../specs/ex1_scenario2.json")),
        ("ex2", include_str!("../specs/ex2.json")),
        ("ex3_fixed", include_str!("../specs/ex3_fixed.json")),
        ("ex3_free", include_str!("../specs/ex3_free.json")),
        ("ex3_fullB_probe", include_str!("../specs/ex3_fullB_probe.json")),
    ]
}

/// Parses one bundled example by name.
pub fn bundled(name: &str) -> Option<SpecFile> {
    bundled_examples()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| SpecFile::from_json(text).expect("bundled examples parse"))
}
