//! Unit conversions applied at ingestion and at the fan-model boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const M3S_PER_CFM: f64 = 4.719474e-4;
pub const KW_PER_HP: f64 = 0.7457;

pub fn fahrenheit_to_celsius(f: f64) -> f64 {
    (f - 32.0) * 5.0 / 9.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowUnit {
    M3s,
    Cfm,
}

impl FlowUnit {
    pub fn from_m3s(self, v: f64) -> f64 {
        match self {
            FlowUnit::M3s => v,
            FlowUnit::Cfm => v / M3S_PER_CFM,
        }
    }

    pub fn to_m3s(self, v: f64) -> f64 {
        match self {
            FlowUnit::M3s => v,
            FlowUnit::Cfm => v * M3S_PER_CFM,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m3/s" | "m³/s" | "m3s" => Ok(FlowUnit::M3s),
            "cfm" => Ok(FlowUnit::Cfm),
            other => Err(Error::Schema(format!("unknown flow unit `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerUnit {
    Kw,
    Hp,
}

impl PowerUnit {
    pub fn to_kw(self, p: f64) -> f64 {
        match self {
            PowerUnit::Kw => p,
            PowerUnit::Hp => p * KW_PER_HP,
        }
    }

    pub fn from_kw(self, p: f64) -> f64 {
        match self {
            PowerUnit::Kw => p,
            PowerUnit::Hp => p / KW_PER_HP,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kw" => Ok(PowerUnit::Kw),
            "hp" => Ok(PowerUnit::Hp),
            other => Err(Error::Schema(format!("unknown power unit `{other}`"))),
        }
    }
}
