use serde::{Deserialize, Serialize};

use super::ols::ols_columns;
use crate::error::{Error, Result};
use crate::model::{BuildingNode, ChannelFrame, ChannelKey, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildingCoefs {
    pub l: f64,
    pub beta: f64,
}

/// Metered building load against the summed AHU coil loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingModel {
    pub building: String,
    /// Gain on aggregate coil load.
    pub l: f64,
    /// Offset, kW.
    pub beta: f64,
    pub r2: f64,
    pub std_err: BuildingCoefs,
    pub p_values: BuildingCoefs,
    pub n_obs: usize,
    pub f_statistic_p: f64,
}

impl BuildingModel {
    pub fn fixed(building: &str, l: f64, beta: f64) -> Self {
        Self {
            building: building.into(),
            l,
            beta,
            r2: 1.0,
            std_err: BuildingCoefs { l: 0.0, beta: 0.0 },
            p_values: BuildingCoefs { l: 0.0, beta: 0.0 },
            n_obs: 0,
            f_statistic_p: 0.0,
        }
    }
}

/// Regresses `q_b` on `Σ_i q_c` over every timestamp where both are
/// defined and `include` (if given) is true.
///
/// `coil_series` holds one coil-load series per AHU of the building.
pub fn fit_building(
    frame: &ChannelFrame,
    building: &BuildingNode,
    coil_series: &[Vec<Option<f64>>],
    include: Option<&[bool]>,
) -> Result<BuildingModel> {
    let q_b = frame.require(&ChannelKey::building(&building.id, Variable::Qb))?;
    if coil_series.len() != building.ahus.len() {
        return Err(Error::Schema(format!(
            "building {} has {} AHUs but {} coil series",
            building.id,
            building.ahus.len(),
            coil_series.len()
        )));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..frame.len() {
        if include.is_some_and(|m| !m[i]) {
            continue;
        }
        let Some(qb) = q_b[i] else { continue };
        let Some(sum) = coil_series.iter().try_fold(0.0, |acc, s| s[i].map(|q| acc + q)) else {
            continue;
        };
        x.push(sum);
        y.push(qb);
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData { have: x.len(), need: 3 });
    }
    let fit = ols_columns(&[&x], &y)?;
    Ok(BuildingModel {
        building: building.id.clone(),
        l: fit.coefficients[1],
        beta: fit.coefficients[0],
        r2: fit.r2,
        std_err: BuildingCoefs {
            l: fit.std_errors[1],
            beta: fit.std_errors[0],
        },
        p_values: BuildingCoefs {
            l: fit.p_values[1],
            beta: fit.p_values[0],
        },
        n_obs: fit.n_obs,
        f_statistic_p: fit.f_statistic_p,
    })
}
