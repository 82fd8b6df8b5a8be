//! Least-squares estimation of the fresh-air, building-coils and fan models.

pub mod building;
pub mod fan;
pub mod fresh_air;
pub mod ols;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use building::{fit_building, BuildingCoefs, BuildingModel};
pub use fan::{fit_fan, nearest_donor, scale_fan_model, FanEntry, FanModel};
pub use fresh_air::{fit_fresh_air, fresh_air_samples, FreshAirCoefs, FreshAirModel};
pub use ols::{ols, ols_columns, OlsFit};

use crate::error::{Error, Result};
use crate::model::{
    operating_mask, AhuRef, AirProperties, ChannelFrame, FlowUnit, PowerUnit, TimeWindow, Topology,
};
use crate::thermo::ahu_load_series;

/// Which timestamps enter the building-coils regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildingFitHours {
    /// Every timestamp with defined inputs.
    #[default]
    All,
    /// Only timestamps where at least one AHU of the building is operating.
    Operating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub flow_threshold: f64,
    pub daytime: TimeWindow,
    pub building_hours: BuildingFitHours,
    /// Explicit donor per AHU lacking commissioning data.
    pub fan_donors: BTreeMap<AhuRef, AhuRef>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            flow_threshold: 0.1,
            daytime: TimeWindow::daytime(),
            building_hours: BuildingFitHours::All,
            fan_donors: BTreeMap::new(),
        }
    }
}

/// Commissioning measurements for one AHU fan.
#[derive(Debug, Clone, PartialEq)]
pub struct FanPoints {
    pub ahu: AhuRef,
    pub flow_unit: FlowUnit,
    pub power_unit: PowerUnit,
    pub points: Vec<(f64, f64)>,
}

/// Every estimated model needed by the disaggregation cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModels {
    pub air: AirProperties,
    pub fresh_air: Vec<FreshAirModel>,
    pub buildings: Vec<BuildingModel>,
    pub fans: Vec<FanEntry>,
}

impl FittedModels {
    pub fn fresh_air_for(&self, r: &AhuRef) -> Option<&FreshAirModel> {
        self.fresh_air
            .iter()
            .find(|m| m.building == r.building && m.ahu == r.ahu)
    }

    pub fn building_for(&self, id: &str) -> Option<&BuildingModel> {
        self.buildings.iter().find(|m| m.building == id)
    }

    pub fn fan_for(&self, r: &AhuRef) -> Option<&FanEntry> {
        self.fans.iter().find(|m| m.building == r.building && m.ahu == r.ahu)
    }

    /// Fails with the first topology entity lacking a model.
    pub fn check_covers(&self, topology: &Topology) -> Result<()> {
        for b in &topology.buildings {
            if self.building_for(&b.id).is_none() {
                return Err(Error::MissingModel(format!("building {}", b.id)));
            }
        }
        for (r, _) in topology.ahu_refs() {
            if self.fresh_air_for(&r).is_none() {
                return Err(Error::MissingModel(format!("fresh-air model for AHU {r}")));
            }
            if self.fan_for(&r).is_none() {
                return Err(Error::MissingModel(format!("fan model for AHU {r}")));
            }
        }
        Ok(())
    }
}

/// Fits every model in the topology. Fit failures name the entity.
pub fn fit_models(
    frame: &ChannelFrame,
    topology: &Topology,
    air: &AirProperties,
    fan_points: &[FanPoints],
    opts: &FitOptions,
) -> Result<FittedModels> {
    topology.validate()?;
    air.validate()?;
    let mut fresh_air = Vec::new();
    let mut buildings = Vec::new();

    for b in &topology.buildings {
        let mut coils = Vec::with_capacity(b.ahus.len());
        let mut any_operating = vec![false; frame.len()];
        for a in &b.ahus {
            let name = format!("AHU {}/{}", b.id, a.id);
            let mask = operating_mask(frame, &b.id, a, opts.flow_threshold, opts.daytime)
                .map_err(|e| Error::fit(&name, e))?;
            let model = fit_fresh_air(frame, &b.id, a, &mask, air).map_err(|e| Error::fit(&name, e))?;
            fresh_air.push(model);
            any_operating.iter_mut().zip(&mask).for_each(|(o, m)| *o |= *m);
            let loads = ahu_load_series(frame, &b.id, a, air).map_err(|e| Error::fit(&name, e))?;
            coils.push(loads.coil_load);
        }
        let include = match opts.building_hours {
            BuildingFitHours::All => None,
            BuildingFitHours::Operating => Some(any_operating.as_slice()),
        };
        let model = fit_building(frame, b, &coils, include)
            .map_err(|e| Error::fit(format!("building {}", b.id), e))?;
        buildings.push(model);
    }

    let fans = assign_fans(topology, fan_points, &opts.fan_donors)?;
    Ok(FittedModels {
        air: *air,
        fresh_air,
        buildings,
        fans,
    })
}

/// Fits fans with commissioning data and scales donor curves onto the rest.
pub fn assign_fans(
    topology: &Topology,
    fan_points: &[FanPoints],
    donors: &BTreeMap<AhuRef, AhuRef>,
) -> Result<Vec<FanEntry>> {
    let mut fitted: BTreeMap<AhuRef, FanModel> = BTreeMap::new();
    for fp in fan_points {
        if topology.ahu(&fp.ahu).is_none() {
            return Err(Error::Schema(format!("fan points for unknown AHU {}", fp.ahu)));
        }
        let m = fit_fan(&fp.points, fp.flow_unit, fp.power_unit)
            .map_err(|e| Error::fit(format!("fan {}", fp.ahu), e))?;
        fitted.insert(fp.ahu.clone(), m);
    }
    let candidates: Vec<(AhuRef, f64)> = topology
        .ahu_refs()
        .filter(|(r, _)| fitted.contains_key(r))
        .map(|(r, a)| (r, a.fan_rated_power))
        .collect();

    let mut out = Vec::new();
    for (r, a) in topology.ahu_refs() {
        if let Some(m) = fitted.get(&r) {
            out.push(FanEntry {
                building: r.building.clone(),
                ahu: r.ahu.clone(),
                model: m.clone(),
                donor: None,
                scale: None,
            });
            continue;
        }
        let donor = match donors.get(&r) {
            Some(d) => d,
            None => nearest_donor(a.fan_rated_power, &candidates)
                .ok_or_else(|| Error::MissingModel(format!("fan model for AHU {r}: no donor fan available")))?,
        };
        let known = fitted.get(donor).ok_or_else(|| {
            Error::MissingModel(format!("donor {donor} for AHU {r} has no commissioning data"))
        })?;
        let donor_node = topology.ahu(donor).expect("fitted donors are in topology");
        let model = scale_fan_model(known, a.fan_rated_power, donor_node.fan_rated_power)?;
        out.push(FanEntry {
            building: r.building.clone(),
            ahu: r.ahu.clone(),
            model,
            donor: Some(donor.to_string()),
            scale: Some(a.fan_rated_power / donor_node.fan_rated_power),
        });
    }
    Ok(out)
}
