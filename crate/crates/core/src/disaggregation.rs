//! Zone-level equivalent loads: the five-step cascade from zone space load
//! through equivalent coil and building loads to total electrical load.
//!
//! Gaps between measurement levels are allocated to zones in proportion to
//! their share of AHU flow. Regression residuals are never allocated; the
//! building residual is reported per timestamp as a diagnostic.

use chrono::NaiveDateTime;

use crate::error::{Error, Result};
use crate::model::{AhuRef, ChannelFrame, ChannelKey, Topology, Variable};
use crate::regression::{BuildingModel, FittedModels, FreshAirModel};
use crate::thermo::{ahu_load_series, zone_space_load};

/// Zone equivalent coil load, kW.
pub fn zone_equiv_coil(
    q_z: f64,
    v_z: f64,
    oat: f64,
    rat: f64,
    model: &FreshAirModel,
    air: &crate::model::AirProperties,
) -> f64 {
    q_z + air.c_rho() * v_z * (model.k * (oat - rat) + model.alpha)
}

/// Zone equivalent building load, kW: the coil-equivalent load scaled by
/// `l` plus the zone's flow- and coil-weighted share of `β`.
pub fn zone_equiv_building(
    q_ec: f64,
    v_z: f64,
    v_c: f64,
    q_c_i: f64,
    sum_q_c: f64,
    model: &BuildingModel,
) -> Result<f64> {
    if v_c == 0.0 {
        return Err(Error::UndefinedAllocation("AHU flow is zero"));
    }
    if sum_q_c == 0.0 {
        return Err(Error::UndefinedAllocation("aggregate coil load is zero"));
    }
    Ok(model.l * q_ec + (v_z / v_c) * (q_c_i / sum_q_c) * model.beta)
}

/// Zone share of AHU fan power, kW.
pub fn zone_fan_power(v_z: f64, v_c: f64, p_fan_ahu: f64) -> Result<f64> {
    if v_c == 0.0 {
        return Err(Error::UndefinedAllocation("AHU flow is zero"));
    }
    Ok(v_z / v_c * p_fan_ahu)
}

/// Plant COP sanity band used for flagging.
pub const DEFAULT_COP_BAND: (f64, f64) = (1.0, 15.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopValue {
    pub value: Option<f64>,
    pub out_of_band: bool,
}

/// `q_d / p_d` when `p_d ≥ floor`; missing otherwise.
pub fn district_cop(q_d: f64, p_d: f64, floor: f64, band: (f64, f64)) -> CopValue {
    if !(p_d >= floor) || p_d <= 0.0 {
        return CopValue {
            value: None,
            out_of_band: false,
        };
    }
    let cop = q_d / p_d;
    CopValue {
        value: Some(cop),
        out_of_band: cop < band.0 || cop > band.1,
    }
}

/// Total equivalent electrical load, kW; missing when COP is.
pub fn zone_total_electrical(q_eb: f64, cop: Option<f64>, p_fan_z: f64) -> Option<f64> {
    cop.filter(|c| *c > 0.0).map(|c| q_eb / c + p_fan_z)
}

/// Per-timestamp outcome for one zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoneStatus {
    /// Every output defined.
    Ok,
    /// AHU flow is zero: the zone receives no air and every output is zero.
    Off,
    /// At least the total electrical load is undefined.
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneLoadSeries {
    pub building: String,
    pub ahu: String,
    pub zone: String,
    pub q_z: Vec<Option<f64>>,
    pub q_ec: Vec<Option<f64>>,
    pub q_eb: Vec<Option<f64>>,
    pub p_fan: Vec<Option<f64>>,
    pub p_total: Vec<Option<f64>>,
    pub status: Vec<ZoneStatus>,
}

impl ZoneLoadSeries {
    fn new(building: &str, ahu: &str, zone: &str, n: usize) -> Self {
        Self {
            building: building.into(),
            ahu: ahu.into(),
            zone: zone.into(),
            q_z: vec![None; n],
            q_ec: vec![None; n],
            q_eb: vec![None; n],
            p_fan: vec![None; n],
            p_total: vec![None; n],
            status: vec![ZoneStatus::Missing; n],
        }
    }

    fn set_off(&mut self, i: usize) {
        self.q_z[i] = Some(0.0);
        self.q_ec[i] = Some(0.0);
        self.q_eb[i] = Some(0.0);
        self.p_fan[i] = Some(0.0);
        self.p_total[i] = Some(0.0);
        self.status[i] = ZoneStatus::Off;
    }

    /// Fraction of timestamps with a defined total electrical load.
    pub fn coverage(&self) -> f64 {
        if self.status.is_empty() {
            return 0.0;
        }
        let ok = self.status.iter().filter(|s| **s != ZoneStatus::Missing).count();
        ok as f64 / self.status.len() as f64
    }
}

/// Diagnostic flag bits per (building, timestamp).
pub mod flags {
    pub const MISSING_INPUT: u32 = 1;
    pub const UNDEFINED_ALLOCATION: u32 = 1 << 1;
    pub const NEGATIVE_COIL_SUM: u32 = 1 << 2;
    pub const COP_MISSING: u32 = 1 << 3;
    pub const COP_OUT_OF_BAND: u32 = 1 << 4;
    pub const FAN_EXTRAPOLATED: u32 = 1 << 5;

    const NAMES: [(u32, &str); 6] = [
        (MISSING_INPUT, "missing_input"),
        (UNDEFINED_ALLOCATION, "undefined_allocation"),
        (NEGATIVE_COIL_SUM, "negative_coil_sum"),
        (COP_MISSING, "cop_missing"),
        (COP_OUT_OF_BAND, "cop_out_of_band"),
        (FAN_EXTRAPOLATED, "fan_extrapolated"),
    ];

    /// `|`-joined flag names; empty when no flag is set.
    pub fn format(bits: u32) -> String {
        NAMES
            .iter()
            .filter(|(b, _)| bits & b != 0)
            .map(|(_, n)| *n)
            .collect::<Vec<_>>()
            .join("|")
    }

    pub fn parse(s: &str) -> Option<u32> {
        s.split('|').filter(|p| !p.is_empty()).try_fold(0, |acc, p| {
            NAMES.iter().find(|(_, n)| *n == p).map(|(b, _)| acc | b)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingDiagnostics {
    pub building: String,
    /// `q_b − (l·Σq_c + β)`, the unallocated regression residual.
    pub residual: Vec<Option<f64>>,
    /// Aggregate measured coil load `Σ_i q_c`.
    pub coil_sum: Vec<Option<f64>>,
    pub flags: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeOutput {
    pub timestamps: Vec<NaiveDateTime>,
    /// Zones in topology order.
    pub zones: Vec<ZoneLoadSeries>,
    pub diagnostics: Vec<BuildingDiagnostics>,
    pub cop: Vec<Option<f64>>,
    /// Per AHU in topology order: fan power, kW (zero when off).
    pub ahu_fan_power: Vec<(AhuRef, Vec<Option<f64>>)>,
    pub cop_floor: f64,
}

impl CascadeOutput {
    pub fn zones_of<'a>(&'a self, building: &'a str) -> impl Iterator<Item = &'a ZoneLoadSeries> + 'a {
        self.zones.iter().filter(move |z| z.building == building)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeOptions {
    /// Absolute COP floor on `p_d`, kW. `None` uses 1% of the median `p_d`.
    pub cop_floor: Option<f64>,
    pub cop_band: (f64, f64),
}

impl Default for CascadeOptions {
    fn default() -> Self {
        Self {
            cop_floor: None,
            cop_band: DEFAULT_COP_BAND,
        }
    }
}

/// Default COP floor: 1% of the median observed district power.
pub fn default_cop_floor(p_d: &[Option<f64>]) -> f64 {
    let mut v: Vec<f64> = p_d.iter().flatten().copied().collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    0.01 * median
}

struct AhuStep<'a> {
    r: AhuRef,
    fresh: &'a FreshAirModel,
    fan: &'a crate::regression::FanModel,
    loads: crate::thermo::AhuLoadSeries,
    zones: Vec<(String, &'a [Option<f64>], &'a [Option<f64>])>,
    dat: &'a [Option<f64>],
}

/// Runs the cascade over every zone of the topology.
pub fn run_cascade(
    frame: &ChannelFrame,
    topology: &Topology,
    models: &FittedModels,
    opts: &CascadeOptions,
) -> Result<CascadeOutput> {
    topology.validate()?;
    models.check_covers(topology)?;
    let air = &models.air;
    let n = frame.len();
    let oat = frame.require(&ChannelKey::global(Variable::Oat))?;
    let q_d = frame.require(&ChannelKey::global(Variable::Qd))?;
    let p_d = frame.require(&ChannelKey::global(Variable::Pd))?;

    let cop_floor = opts.cop_floor.unwrap_or_else(|| default_cop_floor(p_d));
    let mut cop = vec![None; n];
    let mut cop_flags = vec![0u32; n];
    for i in 0..n {
        match (q_d[i], p_d[i]) {
            (Some(q), Some(p)) => {
                let c = district_cop(q, p, cop_floor, opts.cop_band);
                cop[i] = c.value;
                if c.value.is_none() {
                    cop_flags[i] |= flags::COP_MISSING;
                }
                if c.out_of_band {
                    cop_flags[i] |= flags::COP_OUT_OF_BAND;
                }
            }
            _ => cop_flags[i] |= flags::COP_MISSING,
        }
    }

    let mut zones_out = Vec::with_capacity(topology.zone_count());
    let mut diagnostics = Vec::with_capacity(topology.buildings.len());
    let mut ahu_fan_power = Vec::new();

    for b in &topology.buildings {
        let bmodel = models.building_for(&b.id).expect("checked");
        let q_b = frame.column(&ChannelKey::building(&b.id, Variable::Qb));

        let mut steps = Vec::with_capacity(b.ahus.len());
        for a in &b.ahus {
            let r = AhuRef::new(b.id.clone(), a.id.clone());
            let zones = a
                .zones
                .iter()
                .map(|z| {
                    Ok((
                        z.id.clone(),
                        frame.require(&ChannelKey::zone(&b.id, &a.id, &z.id, Variable::Vz))?,
                        frame.require(&ChannelKey::zone(&b.id, &a.id, &z.id, Variable::Iat))?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            steps.push(AhuStep {
                fresh: models.fresh_air_for(&r).expect("checked"),
                fan: &models.fan_for(&r).expect("checked").model,
                loads: ahu_load_series(frame, &b.id, a, air)?,
                dat: frame.require(&ChannelKey::ahu(&b.id, &a.id, Variable::Dat))?,
                zones,
                r,
            });
        }

        let mut series: Vec<Vec<ZoneLoadSeries>> = steps
            .iter()
            .map(|s| {
                s.zones
                    .iter()
                    .map(|(z, _, _)| ZoneLoadSeries::new(&b.id, &s.r.ahu, z, n))
                    .collect()
            })
            .collect();
        let mut fan_series: Vec<Vec<Option<f64>>> = vec![vec![None; n]; steps.len()];
        let mut diag = BuildingDiagnostics {
            building: b.id.clone(),
            residual: vec![None; n],
            coil_sum: vec![None; n],
            flags: cop_flags.clone(),
        };

        for i in 0..n {
            // Coil load of an AHU with zero flow is zero regardless of MAT.
            let coil = |s: &AhuStep| match s.loads.v_c[i] {
                Some(v) if v == 0.0 => Some(0.0),
                _ => s.loads.coil_load[i],
            };
            let sum_q_c = steps.iter().try_fold(0.0, |acc, s| coil(s).map(|q| acc + q));
            diag.coil_sum[i] = sum_q_c;
            match sum_q_c {
                None => diag.flags[i] |= flags::MISSING_INPUT,
                Some(s) if s < 0.0 => diag.flags[i] |= flags::NEGATIVE_COIL_SUM,
                _ => {}
            }
            if let (Some(qb), Some(s)) = (q_b.and_then(|c| c[i]), sum_q_c) {
                diag.residual[i] = Some(qb - (bmodel.l * s + bmodel.beta));
            }

            for (si, step) in steps.iter().enumerate() {
                let Some(v_c) = step.loads.v_c[i] else {
                    diag.flags[i] |= flags::MISSING_INPUT;
                    continue;
                };
                if v_c == 0.0 {
                    fan_series[si][i] = Some(0.0);
                    series[si].iter_mut().for_each(|z| z.set_off(i));
                    continue;
                }
                let (p_fan_ahu, extrapolated) = step.fan.power_kw(v_c);
                if extrapolated {
                    diag.flags[i] |= flags::FAN_EXTRAPOLATED;
                }
                fan_series[si][i] = Some(p_fan_ahu);
                let q_c_i = coil(step);

                for (zi, (_, vz_col, iat_col)) in step.zones.iter().enumerate() {
                    let out = &mut series[si][zi];
                    let v_z = vz_col[i].expect("v_c defined implies every zone flow is");
                    let p_fan_z = zone_fan_power(v_z, v_c, p_fan_ahu)?;
                    out.p_fan[i] = Some(p_fan_z);
                    let (Some(iat), Some(dat), Some(rat), Some(oat)) =
                        (iat_col[i], step.dat[i], step.loads.rat[i], oat[i])
                    else {
                        diag.flags[i] |= flags::MISSING_INPUT;
                        continue;
                    };
                    let q_z = zone_space_load(v_z, iat, dat, air);
                    let q_ec = zone_equiv_coil(q_z, v_z, oat, rat, step.fresh, air);
                    out.q_z[i] = Some(q_z);
                    out.q_ec[i] = Some(q_ec);
                    let (Some(q_c_i), Some(sum)) = (q_c_i, sum_q_c) else {
                        diag.flags[i] |= flags::MISSING_INPUT;
                        continue;
                    };
                    let Ok(q_eb) = zone_equiv_building(q_ec, v_z, v_c, q_c_i, sum, bmodel) else {
                        diag.flags[i] |= flags::UNDEFINED_ALLOCATION;
                        continue;
                    };
                    out.q_eb[i] = Some(q_eb);
                    if let Some(p) = zone_total_electrical(q_eb, cop[i], p_fan_z) {
                        out.p_total[i] = Some(p);
                        out.status[i] = ZoneStatus::Ok;
                    }
                }
            }
        }

        for (step, fan) in steps.iter().zip(fan_series) {
            ahu_fan_power.push((step.r.clone(), fan));
        }
        zones_out.extend(series.into_iter().flatten());
        diagnostics.push(diag);
    }

    Ok(CascadeOutput {
        timestamps: frame.timestamps().to_vec(),
        zones: zones_out,
        diagnostics,
        cop,
        ahu_fan_power,
        cop_floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AirProperties;

    const AIR: AirProperties = AirProperties { c: 1.006, rho: 1.204 };

    #[test]
    fn equiv_coil_examples() {
        let zero = FreshAirModel::fixed("B", "1", 0.0, 0.0);
        assert_eq!(zone_equiv_coil(5.0, 0.4, 30.0, 23.0, &zero, &AIR), 5.0);
        let m = FreshAirModel::fixed("B", "1", 0.3, -0.5);
        assert_eq!(zone_equiv_coil(0.0, 0.0, 30.0, 23.0, &m, &AIR), 0.0);
        // 6.056 + 1.211224·0.5·(2.1 − 0.5)
        let q = zone_equiv_coil(6.056, 0.5, 30.0, 23.0, &m, &AIR);
        assert!((q - 7.024979).abs() < 1e-6);
        assert!((q - 7.025).abs() < 1e-3);
    }

    #[test]
    fn equiv_building_examples() {
        let identity = BuildingModel::fixed("B", 1.0, 0.0);
        assert_eq!(zone_equiv_building(7.0, 0.3, 1.0, 10.0, 40.0, &identity).unwrap(), 7.0);
        let m = BuildingModel::fixed("B", 1.2, 30.0);
        // One zone, one AHU: whole β.
        let q = zone_equiv_building(7.0, 0.8, 0.8, 12.0, 12.0, &m).unwrap();
        assert!((q - (1.2 * 7.0 + 30.0)).abs() < 1e-12);
        assert!(zone_equiv_building(7.0, 0.0, 0.0, 12.0, 12.0, &m).is_err());
        assert!(zone_equiv_building(7.0, 0.1, 0.8, 0.0, 0.0, &m).is_err());
    }

    #[test]
    fn equiv_building_sums_to_regression_prediction() {
        let m = BuildingModel::fixed("B", 1.13, 21.5);
        // Two AHUs: flows and equivalent coil loads per zone.
        let ahus = [
            (vec![0.3, 0.5, 0.2], vec![3.1, 4.4, 1.9], 11.2),
            (vec![0.9, 0.1], vec![8.0, 0.7], 7.3),
        ];
        let sum_q_c: f64 = ahus.iter().map(|a| a.2).sum();
        let mut total = 0.0;
        let mut predicted_coil = 0.0;
        for (flows, qec, q_c) in &ahus {
            let v_c: f64 = flows.iter().sum();
            for (v, q) in flows.iter().zip(qec) {
                total += zone_equiv_building(*q, *v, v_c, *q_c, sum_q_c, &m).unwrap();
                predicted_coil += q;
            }
        }
        let want = m.l * predicted_coil + m.beta;
        assert!((total - want).abs() <= 1e-9 * want);
    }

    #[test]
    fn fan_allocation() {
        assert_eq!(zone_fan_power(0.7, 0.7, 12.0).unwrap(), 12.0);
        for _ in 0..4 {
            assert_eq!(zone_fan_power(0.5, 2.0, 12.0).unwrap(), 3.0);
        }
        let flows = [0.13, 0.71, 0.29, 0.05];
        let v_c: f64 = flows.iter().sum();
        let s: f64 = flows.iter().map(|v| zone_fan_power(*v, v_c, 17.3).unwrap()).sum();
        assert!((s - 17.3).abs() < 1e-12);
        assert!(zone_fan_power(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn cop_examples() {
        let c = district_cop(3000.0, 600.0, 1.0, DEFAULT_COP_BAND);
        assert_eq!(c.value, Some(5.0));
        assert!(!c.out_of_band);
        assert_eq!(district_cop(3000.0, 0.0, 0.0, DEFAULT_COP_BAND).value, None);
        let z = district_cop(0.0, 500.0, 1.0, DEFAULT_COP_BAND);
        assert_eq!(z.value, Some(0.0));
        assert!(z.out_of_band);
        assert_eq!(district_cop(3000.0, 2.0, 5.0, DEFAULT_COP_BAND).value, None);
    }

    #[test]
    fn total_electrical_examples() {
        assert_eq!(zone_total_electrical(10.0, Some(5.0), 2.0), Some(4.0));
        assert!((zone_total_electrical(10.0, Some(1e9), 2.0).unwrap() - 2.0).abs() < 1e-6);
        assert_eq!(zone_total_electrical(10.0, None, 2.0), None);
    }

    #[test]
    fn flag_names_round_trip() {
        let bits = flags::COP_MISSING | flags::FAN_EXTRAPOLATED;
        let s = flags::format(bits);
        assert_eq!(s, "cop_missing|fan_extrapolated");
        assert_eq!(flags::parse(&s), Some(bits));
        assert_eq!(flags::parse(""), Some(0));
        assert_eq!(flags::parse("bogus"), None);
    }

    #[test]
    fn default_floor_is_one_percent_of_median() {
        let p = [Some(100.0), None, Some(300.0), Some(200.0)];
        assert!((default_cop_floor(&p) - 2.0).abs() < 1e-12);
    }
}
