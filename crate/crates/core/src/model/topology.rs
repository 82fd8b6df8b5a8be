//! Building → AHU → zone hierarchy.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub buildings: Vec<BuildingNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingNode {
    pub id: String,
    pub ahus: Vec<AhuNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhuNode {
    pub id: String,
    /// Rated supply fan flow, m³/s.
    pub fan_rated_flow: f64,
    /// Rated supply fan power, kW.
    pub fan_rated_power: f64,
    pub zones: Vec<ZoneNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneNode {
    pub id: String,
    #[serde(default)]
    pub excluded: bool,
}

/// Fully qualified AHU reference, `building/ahu`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AhuRef {
    pub building: String,
    pub ahu: String,
}

impl AhuRef {
    pub fn new(building: impl Into<String>, ahu: impl Into<String>) -> Self {
        Self {
            building: building.into(),
            ahu: ahu.into(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let (b, a) = s.split_once('/')?;
        if b.is_empty() || a.is_empty() {
            return None;
        }
        Some(Self::new(b, a))
    }
}

impl std::fmt::Display for AhuRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.building, self.ahu)
    }
}

impl Topology {
    /// Checks id uniqueness and fan ratings. AHU ids and zone ids must be
    /// unique within their building.
    pub fn validate(&self) -> Result<()> {
        let mut buildings = BTreeSet::new();
        for b in &self.buildings {
            if b.id.is_empty() || !buildings.insert(b.id.as_str()) {
                return Err(Error::Topology(format!("duplicate or empty building id `{}`", b.id)));
            }
            let mut ahus = BTreeSet::new();
            let mut zones = BTreeSet::new();
            for a in &b.ahus {
                if a.id.is_empty() || !ahus.insert(a.id.as_str()) {
                    return Err(Error::Topology(format!(
                        "duplicate or empty AHU id `{}` in building `{}`",
                        a.id, b.id
                    )));
                }
                if !(a.fan_rated_flow > 0.0) || !(a.fan_rated_power > 0.0) {
                    return Err(Error::Topology(format!(
                        "AHU {}/{} needs positive fan ratings",
                        b.id, a.id
                    )));
                }
                for z in &a.zones {
                    if z.id.is_empty() || !zones.insert(z.id.as_str()) {
                        return Err(Error::Topology(format!(
                            "duplicate or empty zone id `{}` in building `{}`",
                            z.id, b.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn building(&self, id: &str) -> Option<&BuildingNode> {
        self.buildings.iter().find(|b| b.id == id)
    }

    pub fn ahu(&self, r: &AhuRef) -> Option<&AhuNode> {
        self.building(&r.building)?.ahus.iter().find(|a| a.id == r.ahu)
    }

    /// All AHUs in topology order.
    pub fn ahu_refs(&self) -> impl Iterator<Item = (AhuRef, &AhuNode)> {
        self.buildings.iter().flat_map(|b| {
            b.ahus
                .iter()
                .map(move |a| (AhuRef::new(b.id.clone(), a.id.clone()), a))
        })
    }

    pub fn zone_count(&self) -> usize {
        self.buildings
            .iter()
            .flat_map(|b| &b.ahus)
            .map(|a| a.zones.len())
            .sum()
    }
}
