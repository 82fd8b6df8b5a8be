use serde::{Deserialize, Serialize};

use super::ols::ols_columns;
use crate::error::{Error, Result};
use crate::model::{AhuNode, AirProperties, ChannelFrame, ChannelKey, Variable};
use crate::thermo::ahu_load_series;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreshAirCoefs {
    pub k: f64,
    pub alpha: f64,
}

/// Per-AHU fresh-air model: the coil/space gap per unit flow, regressed
/// on the outdoor/return temperature difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreshAirModel {
    pub building: String,
    pub ahu: String,
    /// Fresh-air ratio (slope).
    pub k: f64,
    /// Distribution loss, °C (intercept).
    pub alpha: f64,
    pub r2: f64,
    pub std_err: FreshAirCoefs,
    pub p_values: FreshAirCoefs,
    pub n_obs: usize,
    pub f_statistic_p: f64,
    /// Set when `k` falls outside [0, 1].
    #[serde(default)]
    pub k_out_of_range: bool,
}

impl FreshAirModel {
    /// Model with the given coefficients and no fit statistics.
    pub fn fixed(building: &str, ahu: &str, k: f64, alpha: f64) -> Self {
        Self {
            building: building.into(),
            ahu: ahu.into(),
            k,
            alpha,
            r2: 1.0,
            std_err: FreshAirCoefs { k: 0.0, alpha: 0.0 },
            p_values: FreshAirCoefs { k: 0.0, alpha: 0.0 },
            n_obs: 0,
            f_statistic_p: 0.0,
            k_out_of_range: !(0.0..=1.0).contains(&k),
        }
    }
}

/// Fresh-air regression samples `(OAT − RAT, (q_c − Σq_z)/(c·ρ·v_c))`
/// over masked timestamps where every input is defined and `v_c > 0`.
pub fn fresh_air_samples(
    frame: &ChannelFrame,
    building: &str,
    ahu: &AhuNode,
    mask: &[bool],
    air: &AirProperties,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if mask.len() != frame.len() {
        return Err(Error::Schema(format!(
            "mask has {} entries for {} timestamps",
            mask.len(),
            frame.len()
        )));
    }
    let loads = ahu_load_series(frame, building, ahu, air)?;
    let oat = frame.require(&ChannelKey::global(Variable::Oat))?;
    let c_rho = air.c_rho();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..frame.len() {
        if !mask[i] {
            continue;
        }
        let (Some(v_c), Some(rat), Some(q_c), Some(space), Some(oat)) = (
            loads.v_c[i],
            loads.rat[i],
            loads.coil_load[i],
            loads.space_load_sum[i],
            oat[i],
        ) else {
            continue;
        };
        if v_c <= 0.0 {
            continue;
        }
        x.push(oat - rat);
        y.push((q_c - space) / (c_rho * v_c));
    }
    Ok((x, y))
}

pub fn fit_fresh_air(
    frame: &ChannelFrame,
    building: &str,
    ahu: &AhuNode,
    mask: &[bool],
    air: &AirProperties,
) -> Result<FreshAirModel> {
    let (x, y) = fresh_air_samples(frame, building, ahu, mask, air)?;
    if x.len() < 3 {
        return Err(Error::InsufficientData { have: x.len(), need: 3 });
    }
    let fit = ols_columns(&[&x], &y)?;
    let k = fit.coefficients[1];
    Ok(FreshAirModel {
        building: building.into(),
        ahu: ahu.id.clone(),
        k,
        alpha: fit.coefficients[0],
        r2: fit.r2,
        std_err: FreshAirCoefs {
            k: fit.std_errors[1],
            alpha: fit.std_errors[0],
        },
        p_values: FreshAirCoefs {
            k: fit.p_values[1],
            alpha: fit.p_values[0],
        },
        n_obs: fit.n_obs,
        f_statistic_p: fit.f_statistic_p,
        k_out_of_range: !(0.0..=1.0).contains(&k),
    })
}
