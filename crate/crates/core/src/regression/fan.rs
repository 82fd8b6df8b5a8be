//! Cubic supply-fan power curves and rated-power scaling between fans.

use serde::{Deserialize, Serialize};

use super::ols::ols_columns;
use crate::error::{Error, Result};
use crate::model::{AhuRef, FlowUnit, PowerUnit};

/// Minimum number of commissioning points for a cubic fit.
pub const MIN_FAN_POINTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanModel {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub flow_unit: FlowUnit,
    pub power_unit: PowerUnit,
    /// `[min, max]` flow seen during fitting, in `flow_unit`.
    pub flow_range: [f64; 2],
    pub r2: f64,
    /// Coefficient standard errors, when fitted from points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_err: Option<[f64; 4]>,
    /// Set when the curve dips below zero inside `flow_range`.
    #[serde(default)]
    pub negative_in_range: bool,
}

impl FanModel {
    pub fn new(coefs: [f64; 4], flow_unit: FlowUnit, power_unit: PowerUnit, flow_range: [f64; 2]) -> Self {
        let mut m = Self {
            a0: coefs[0],
            a1: coefs[1],
            a2: coefs[2],
            a3: coefs[3],
            flow_unit,
            power_unit,
            flow_range,
            r2: 1.0,
            std_err: None,
            negative_in_range: false,
        };
        m.negative_in_range = m.min_over_range() < 0.0;
        m
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a0, self.a1, self.a2, self.a3]
    }

    /// Polynomial value in the model's own units.
    pub fn predict(&self, flow: f64) -> f64 {
        self.a0 + flow * (self.a1 + flow * (self.a2 + flow * self.a3))
    }

    pub fn in_range(&self, flow: f64) -> bool {
        flow >= self.flow_range[0] && flow <= self.flow_range[1]
    }

    /// Fan power in kW at total flow `v_m3s`, clamped below at zero.
    /// The flag is true when the flow lies outside the fitted range.
    pub fn power_kw(&self, v_m3s: f64) -> (f64, bool) {
        let flow = self.flow_unit.from_m3s(v_m3s);
        let p = self.power_unit.to_kw(self.predict(flow)).max(0.0);
        (p, !self.in_range(flow))
    }

    fn min_over_range(&self) -> f64 {
        let [lo, hi] = self.flow_range;
        (0..=200)
            .map(|i| self.predict(lo + (hi - lo) * i as f64 / 200.0))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Fits a cubic to `(flow, power)` commissioning points.
pub fn fit_fan(points: &[(f64, f64)], flow_unit: FlowUnit, power_unit: PowerUnit) -> Result<FanModel> {
    if points.len() < MIN_FAN_POINTS {
        return Err(Error::InsufficientData {
            have: points.len(),
            need: MIN_FAN_POINTS,
        });
    }
    let v: Vec<f64> = points.iter().map(|p| p.0).collect();
    let v2: Vec<f64> = v.iter().map(|x| x * x).collect();
    let v3: Vec<f64> = v.iter().map(|x| x * x * x).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = ols_columns(&[&v, &v2, &v3], &y)?;
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let c = &fit.coefficients;
    let mut model = FanModel::new([c[0], c[1], c[2], c[3]], flow_unit, power_unit, [lo, hi]);
    model.r2 = fit.r2;
    let se = &fit.std_errors;
    model.std_err = Some([se[0], se[1], se[2], se[3]]);
    Ok(model)
}

/// Multiplies every coefficient by `target_rated_power / known_rated_power`.
pub fn scale_fan_model(known: &FanModel, target_rated_power: f64, known_rated_power: f64) -> Result<FanModel> {
    if !(known_rated_power > 0.0) || !(target_rated_power > 0.0) {
        return Err(Error::Config(format!(
            "rated powers must be positive (target {target_rated_power}, known {known_rated_power})"
        )));
    }
    let ratio = target_rated_power / known_rated_power;
    let mut m = known.clone();
    m.a0 *= ratio;
    m.a1 *= ratio;
    m.a2 *= ratio;
    m.a3 *= ratio;
    m.std_err = m.std_err.map(|se| se.map(|x| x * ratio));
    Ok(m)
}

/// How an AHU's fan curve was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanEntry {
    pub building: String,
    pub ahu: String,
    #[serde(flatten)]
    pub model: FanModel,
    /// Donor AHU (`building/ahu`) when the curve was scaled rather than fitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub donor: Option<String>,
    /// Rated-power ratio applied to the donor curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl FanEntry {
    pub fn ahu_ref(&self) -> AhuRef {
        AhuRef::new(self.building.clone(), self.ahu.clone())
    }
}

/// Picks the donor with the nearest rated power; ties go to the first
/// candidate in the given order.
pub fn nearest_donor<'a>(target_rated_power: f64, candidates: &'a [(AhuRef, f64)]) -> Option<&'a AhuRef> {
    candidates
        .iter()
        .min_by(|a, b| {
            (a.1 - target_rated_power)
                .abs()
                .total_cmp(&(b.1 - target_rated_power).abs())
        })
        .map(|c| &c.0)
}
