//! Sensible-load identities linking zone, return-air, mixed-air and coil
//! quantities. Everything here is pure and linear in the flows.

use crate::error::{Error, Result};
use crate::model::{ahu_total_flow, AhuNode, AirProperties, ChannelFrame, ChannelKey, Variable};

/// Space cooling load delivered to one zone, kW. Negative when `dat > iat`.
#[inline]
pub fn zone_space_load(v_z: f64, iat: f64, dat: f64, air: &AirProperties) -> f64 {
    air.c_rho() * v_z * (iat - dat)
}

/// Flow-weighted mean of zone temperatures.
pub fn return_air_temperature(zone_flows: &[f64], zone_iats: &[f64]) -> Result<f64> {
    if zone_flows.len() != zone_iats.len() {
        return Err(Error::Schema(format!(
            "{} flows for {} temperatures",
            zone_flows.len(),
            zone_iats.len()
        )));
    }
    let total: f64 = zone_flows.iter().sum();
    if total == 0.0 {
        return Err(Error::UndefinedRat);
    }
    let weighted: f64 = zone_flows.iter().zip(zone_iats).map(|(v, t)| v * t).sum();
    Ok(weighted / total)
}

#[inline]
pub fn mixed_air_temperature(k: f64, oat: f64, rat: f64) -> f64 {
    k * oat + (1.0 - k) * rat
}

/// Coil cooling load, kW.
#[inline]
pub fn coil_load(v_c: f64, mat: f64, dat: f64, air: &AirProperties) -> f64 {
    air.c_rho() * v_c * (mat - dat)
}

/// Per-timestamp AHU load decomposition. Entries are `None` where inputs
/// are missing or RAT is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct AhuLoadSeries {
    pub v_c: Vec<Option<f64>>,
    pub rat: Vec<Option<f64>>,
    /// From measured MAT.
    pub coil_load: Vec<Option<f64>>,
    pub space_load_sum: Vec<Option<f64>>,
    /// `coil_load − space_load_sum`.
    pub fresh_air_load: Vec<Option<f64>>,
}

impl AhuLoadSeries {
    pub fn len(&self) -> usize {
        self.v_c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_c.is_empty()
    }
}

pub fn ahu_load_series(
    frame: &ChannelFrame,
    building: &str,
    ahu: &AhuNode,
    air: &AirProperties,
) -> Result<AhuLoadSeries> {
    let dat = frame.require(&ChannelKey::ahu(building, &ahu.id, Variable::Dat))?;
    let mat = frame.require(&ChannelKey::ahu(building, &ahu.id, Variable::Mat))?;
    let iats = ahu
        .zones
        .iter()
        .map(|z| frame.require(&ChannelKey::zone(building, &ahu.id, &z.id, Variable::Iat)))
        .collect::<Result<Vec<_>>>()?;
    let flows = ahu
        .zones
        .iter()
        .map(|z| frame.require(&ChannelKey::zone(building, &ahu.id, &z.id, Variable::Vz)))
        .collect::<Result<Vec<_>>>()?;
    let v_c = ahu_total_flow(frame, building, ahu)?;

    let n = frame.len();
    let mut out = AhuLoadSeries {
        v_c: v_c.clone(),
        rat: vec![None; n],
        coil_load: vec![None; n],
        space_load_sum: vec![None; n],
        fresh_air_load: vec![None; n],
    };
    let c_rho = air.c_rho();
    let mut zf = Vec::with_capacity(ahu.zones.len());
    let mut zt = Vec::with_capacity(ahu.zones.len());
    for i in 0..n {
        let Some(v_c) = v_c[i] else { continue };
        if let (Some(m), Some(d)) = (mat[i], dat[i]) {
            out.coil_load[i] = Some(coil_load(v_c, m, d, air));
        }
        zf.clear();
        zt.clear();
        let complete = flows.iter().zip(&iats).all(|(f, t)| match (f[i], t[i]) {
            (Some(f), Some(t)) => {
                zf.push(f);
                zt.push(t);
                true
            }
            _ => false,
        });
        if !complete {
            continue;
        }
        let Ok(rat) = return_air_temperature(&zf, &zt) else {
            continue;
        };
        out.rat[i] = Some(rat);
        if let Some(d) = dat[i] {
            let space = c_rho * v_c * (rat - d);
            out.space_load_sum[i] = Some(space);
            out.fresh_air_load[i] = out.coil_load[i].map(|q| q - space);
        }
    }
    Ok(out)
}
