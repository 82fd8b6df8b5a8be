//! Flexibility and heterogeneity report over disaggregated zone loads.

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::energy::{DailyEnergyTable, EnergyWindow};
use super::flexibility::{energy_flexibility, flexibility_shares};
use super::heterogeneity::{concentration, gini, lorenz, Concentration, ConcentrationOrder, EntityEnergy};
use super::thermal::{thermal_impact, ThermalStats};
use crate::disaggregation::ZoneLoadSeries;
use crate::error::{Error, Result};
use crate::model::{ChannelFrame, ExperimentCalendar, Regime, TimeWindow, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub zone_window: EnergyWindow,
    pub building_window: EnergyWindow,
    pub min_coverage: f64,
    pub top_fraction: f64,
    pub thermal_window: TimeWindow,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            zone_window: EnergyWindow::operating(),
            building_window: EnergyWindow::full_day(),
            min_coverage: 0.8,
            top_fraction: 0.3,
            thermal_window: TimeWindow::daytime(),
        }
    }
}

/// Zone loads on a shared timestamp index.
#[derive(Debug, Clone, Copy)]
pub struct ZoneLoads<'a> {
    pub timestamps: &'a [NaiveDateTime],
    pub interval_hours: f64,
    pub zones: &'a [ZoneLoadSeries],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityFlex {
    pub id: String,
    pub ef: Option<f64>,
    /// Share of the building's positive zone savings; zones only.
    pub efs: Option<f64>,
    pub e_lsp_kwh: Option<f64>,
    pub e_hsp_kwh: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadComponent {
    pub component: String,
    pub e_lsp_kwh: Option<f64>,
    pub e_hsp_kwh: Option<f64>,
    pub ef: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingFlex {
    #[serde(flatten)]
    pub entity: EntityFlex,
    pub gini_eu: Option<f64>,
    pub gini_ef: Option<f64>,
    pub lorenz_eu: Vec<[f64; 2]>,
    pub lorenz_ef: Vec<[f64; 2]>,
    /// Top zones ranked by energy use.
    pub concentration: Option<Concentration>,
    /// Top zones ranked by positive savings.
    pub concentration_by_flex: Option<Concentration>,
    pub breakdown: Vec<LoadComponent>,
    pub mean_delta_t_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalRow {
    pub zone_id: String,
    pub stats: Option<ThermalStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexReport {
    pub lsp_days: usize,
    pub hsp_days: usize,
    pub lsp_setpoint: f64,
    pub hsp_setpoint: f64,
    pub options: ReportOptions,
    pub buildings: Vec<BuildingFlex>,
    pub ahus: Vec<EntityFlex>,
    pub zones: Vec<EntityFlex>,
    pub thermal: Vec<ThermalRow>,
}

pub fn zone_id(building: &str, ahu: &str, zone: &str) -> String {
    format!("{building}/{ahu}/{zone}")
}

fn entity_flex(table: &DailyEnergyTable, id: &str) -> EntityFlex {
    let e_lsp = table.regime_mean(id, Regime::Lsp);
    let e_hsp = table.regime_mean(id, Regime::Hsp);
    let ef = match (e_lsp, e_hsp) {
        (Some(l), Some(h)) => energy_flexibility(l, h).ok(),
        _ => None,
    };
    EntityFlex {
        id: id.to_string(),
        ef,
        efs: None,
        e_lsp_kwh: e_lsp,
        e_hsp_kwh: e_hsp,
    }
}

/// Element-wise sum; `None` wherever any member is undefined.
fn sum_series<'a>(n: usize, members: impl Iterator<Item = &'a [Option<f64>]>) -> Vec<Option<f64>> {
    let mut acc = vec![Some(0.0); n];
    for m in members {
        for (a, v) in acc.iter_mut().zip(m) {
            *a = match (*a, v) {
                (Some(x), Some(y)) => Some(x + y),
                _ => None,
            };
        }
    }
    acc
}

fn diff_series(a: &[Option<f64>], b: &[Option<f64>]) -> Vec<Option<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => Some(x - y),
            _ => None,
        })
        .collect()
}

fn points(l: Vec<(f64, f64)>) -> Vec<[f64; 2]> {
    l.into_iter().map(|(x, y)| [x, y]).collect()
}

/// Builds the report. Excluded zones count toward AHU and building totals
/// but not toward zone-level shares, Gini or concentration.
pub fn build_report(
    loads: ZoneLoads,
    frame: Option<&ChannelFrame>,
    topology: &Topology,
    calendar: &ExperimentCalendar,
    opts: &ReportOptions,
) -> Result<FlexReport> {
    let lsp_days = calendar.count(Regime::Lsp);
    let hsp_days = calendar.count(Regime::Hsp);
    if lsp_days == 0 || hsp_days == 0 {
        return Err(Error::MetricPrecondition(format!(
            "calendar has {lsp_days} LSP and {hsp_days} HSP days"
        )));
    }
    let n = loads.timestamps.len();
    let dt = loads.interval_hours;
    let find = |b: &str, a: &str, z: &str| {
        loads
            .zones
            .iter()
            .find(|s| s.building == b && s.ahu == a && s.zone == z)
            .ok_or_else(|| Error::MissingModel(format!("zone loads for {}", zone_id(b, a, z))))
    };

    let mut zone_table = DailyEnergyTable::new(calendar, opts.min_coverage);
    let mut ahu_table = DailyEnergyTable::new(calendar, opts.min_coverage);
    let mut bldg_table = DailyEnergyTable::new(calendar, opts.min_coverage);

    let mut buildings = Vec::new();
    let mut ahus = Vec::new();
    let mut zones = Vec::new();
    let mut thermal = Vec::new();

    for b in &topology.buildings {
        let mut b_members = Vec::new();
        let mut b_zone_entities = Vec::new();
        let mut b_zone_idx = Vec::new();
        let mut delta_ts = Vec::new();
        for a in &b.ahus {
            let mut a_members = Vec::new();
            for z in &a.zones {
                let s = find(&b.id, &a.id, &z.id)?;
                if s.p_total.len() != n {
                    return Err(Error::Schema(format!(
                        "zone {} has {} samples, expected {n}",
                        zone_id(&b.id, &a.id, &z.id),
                        s.p_total.len()
                    )));
                }
                a_members.push(s);
                b_members.push(s);
                if z.excluded {
                    continue;
                }
                let id = zone_id(&b.id, &a.id, &z.id);
                zone_table.add_series(id.clone(), loads.timestamps, &s.p_total, opts.zone_window, dt);
                let flex = entity_flex(&zone_table, &id);
                if let (Some(l), Some(h)) = (flex.e_lsp_kwh, flex.e_hsp_kwh) {
                    b_zone_entities.push(EntityEnergy {
                        id: id.clone(),
                        use_kwh: l,
                        savings_kwh: l - h,
                    });
                    b_zone_idx.push(zones.len());
                }
                zones.push(flex);

                if let Some(frame) = frame {
                    let stats = match thermal_impact(frame, calendar, &b.id, &a.id, &z.id, opts.thermal_window) {
                        Ok(s) => Some(s),
                        Err(Error::MetricPrecondition(_)) | Err(Error::MissingChannel(_)) => None,
                        Err(e) => return Err(e),
                    };
                    if let Some(s) = stats {
                        delta_ts.push(s.delta_t);
                    }
                    thermal.push(ThermalRow { zone_id: id, stats });
                }
            }
            let id = format!("{}/{}", b.id, a.id);
            let total = sum_series(n, a_members.iter().map(|s| s.p_total.as_slice()));
            ahu_table.add_series(id.clone(), loads.timestamps, &total, opts.zone_window, dt);
            ahus.push(entity_flex(&ahu_table, &id));
        }

        let p_total = sum_series(n, b_members.iter().map(|s| s.p_total.as_slice()));
        let p_fan = sum_series(n, b_members.iter().map(|s| s.p_fan.as_slice()));
        let q_eb = sum_series(n, b_members.iter().map(|s| s.q_eb.as_slice()));
        let cooling = diff_series(&p_total, &p_fan);
        let mut breakdown = Vec::new();
        for (name, series) in [
            ("thermal", &q_eb),
            ("cooling_electric", &cooling),
            ("fan", &p_fan),
            ("total", &p_total),
        ] {
            let key = format!("{}#{name}", b.id);
            bldg_table.add_series(key.clone(), loads.timestamps, series, opts.building_window, dt);
            let f = entity_flex(&bldg_table, &key);
            breakdown.push(LoadComponent {
                component: name.into(),
                e_lsp_kwh: f.e_lsp_kwh,
                e_hsp_kwh: f.e_hsp_kwh,
                ef: f.ef,
            });
        }
        let mut entity = entity_flex(&bldg_table, &format!("{}#total", b.id));
        entity.id = b.id.clone();

        let uses: Vec<f64> = b_zone_entities.iter().map(|e| e.use_kwh).collect();
        let savings: Vec<f64> = b_zone_entities.iter().map(|e| e.savings_kwh).collect();
        if let Ok(shares) = flexibility_shares(&savings) {
            for (idx, s) in b_zone_idx.iter().zip(shares) {
                zones[*idx].efs = Some(s);
            }
        }
        let pos: Vec<f64> = savings.iter().map(|s| s.max(0.0)).collect();
        let nonneg_use = uses.iter().all(|u| *u >= 0.0);
        let (gini_eu, lorenz_eu) = if nonneg_use && !uses.is_empty() {
            (gini(&uses).ok(), lorenz(&uses).map(points).unwrap_or_default())
        } else {
            (None, Vec::new())
        };
        let has_entities = !b_zone_entities.is_empty();
        buildings.push(BuildingFlex {
            entity,
            gini_eu,
            gini_ef: gini(&pos).ok(),
            lorenz_eu,
            lorenz_ef: lorenz(&pos).map(points).unwrap_or_default(),
            concentration: has_entities
                .then(|| concentration(&b_zone_entities, ConcentrationOrder::EnergyUse, opts.top_fraction)),
            concentration_by_flex: has_entities
                .then(|| concentration(&b_zone_entities, ConcentrationOrder::Flexibility, opts.top_fraction)),
            breakdown,
            mean_delta_t_c: (!delta_ts.is_empty()).then(|| delta_ts.iter().sum::<f64>() / delta_ts.len() as f64),
        });
    }

    Ok(FlexReport {
        lsp_days,
        hsp_days,
        lsp_setpoint: calendar.lsp_setpoint,
        hsp_setpoint: calendar.hsp_setpoint,
        options: *opts,
        buildings,
        ahus,
        zones,
        thermal,
    })
}
