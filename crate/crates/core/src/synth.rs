//! Synthetic multi-zone VAV building with known model parameters.
//!
//! Zones are first-order thermal nodes under proportional VAV control. AHU,
//! building and district channels are generated from the same relations the
//! estimators assume, so noiseless output admits exact recovery.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, NaiveDateTime, NaiveTime, TimeDelta, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::disaggregation::{run_cascade, CascadeOptions, CascadeOutput};
use crate::error::{Error, Result};
use crate::model::frame::TEMPERATURE_BOUNDS;
use crate::model::units::{KW_PER_HP, M3S_PER_CFM};
use crate::model::{
    AhuNode, AhuRef, AirProperties, BuildingNode, ChannelFrame, ChannelKey, FlowUnit, PowerUnit, TimeWindow,
    Topology, Variable, ZoneNode,
};
use crate::regression::{
    BuildingModel, FanEntry, FanModel, FanPoints, FittedModels, FreshAirModel,
};

/// Reference fan curve in CFM/HP, rated 30000 CFM at 40.83 HP.
pub const REFERENCE_FAN: [f64; 4] = [13.45, 0.00077, 4.30e-8, -1.33e-12];
pub const REFERENCE_FAN_RATED: (f64, f64) = (30000.0, 40.83);

pub const MIN_DAYS: usize = 4;
pub const COMMISSIONING_POINTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneTruth {
    pub building: String,
    pub ahu: String,
    pub zone: String,
    /// Thermal capacitance, kJ/K.
    pub capacitance: f64,
    /// Envelope conductance, kW/K.
    pub ua: f64,
    /// Internal gain outside occupied hours, kW.
    pub gain_base: f64,
    /// Additional internal gain during occupied hours, kW.
    pub gain_peak: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Controller gain, m³/s per K above set-point.
    pub kp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhuTruth {
    pub building: String,
    pub ahu: String,
    pub k: f64,
    pub alpha: f64,
    /// Supply fan curve, CFM → HP.
    pub fan: [f64; 4],
    /// Supply-air temperature at full demand, °C.
    pub dat_min: f64,
    /// Supply-air temperature at zero demand, °C.
    pub dat_max: f64,
    /// Whether commissioning points are emitted for this fan.
    pub commissioned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingTruth {
    pub building: String,
    pub l: f64,
    pub beta: f64,
}

/// District plant COP as a clamped linear function of OAT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopProfile {
    pub base: f64,
    /// COP drop per K above `reference_oat`.
    pub slope: f64,
    pub reference_oat: f64,
    pub min: f64,
    pub max: f64,
}

impl CopProfile {
    pub fn at(&self, oat: f64) -> f64 {
        (self.base - self.slope * (oat - self.reference_oat)).clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weather {
    pub mean: f64,
    pub amplitude: f64,
    /// Hour of the daily maximum.
    pub peak_hour: f64,
    /// Standard deviation of the per-day mean offset, K.
    pub daily_sigma: f64,
    /// Standard deviation of per-interval noise, K.
    pub step_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// AHU run window on weekdays.
    pub ahu_window: TimeWindow,
    /// Occupied window on weekdays (peak gains).
    pub occupied: TimeWindow,
    /// Time of day the set-point regime switches.
    pub switch_time: NaiveTime,
    /// Days per regime block.
    pub block_days: u32,
}

/// Relative channel noise: `σ = relative × RMS(signal)` for each listed
/// variable, except MAT which uses `RMS(MAT − RAT)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub relative: f64,
    pub variables: Vec<Variable>,
    /// Also perturb fan commissioning powers at the same relative level.
    #[serde(default)]
    pub fan_points: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            relative: 0.0,
            variables: vec![Variable::Mat, Variable::Qb, Variable::Qd, Variable::Pd],
            fan_points: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub air: AirProperties,
    pub lsp_setpoint: f64,
    pub hsp_setpoint: f64,
    pub start: NaiveDate,
    pub weather: Weather,
    pub schedule: Schedule,
    pub cop: CopProfile,
    /// District cooling load outside the modeled buildings, kW.
    pub district_base_load: f64,
    pub noise: NoiseSpec,
    pub buildings: Vec<BuildingTruth>,
    pub ahus: Vec<AhuTruth>,
    pub zones: Vec<ZoneTruth>,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Reference fan curve resized to a fan rated `(flow_cfm, power_hp)`:
/// `P(v) = r·P_ref(v·s)` with `s = ref_flow/flow_cfm`, `r = power_hp/ref_power`.
pub fn resized_fan(flow_cfm: f64, power_hp: f64) -> [f64; 4] {
    let s = REFERENCE_FAN_RATED.0 / flow_cfm;
    let r = power_hp / REFERENCE_FAN_RATED.1;
    let mut c = REFERENCE_FAN;
    for (n, a) in c.iter_mut().enumerate() {
        *a *= r * s.powi(n as i32);
    }
    c
}

impl GroundTruth {
    /// Draws heterogeneous zone, AHU and building parameters for `topology`.
    pub fn generate(topology: &Topology, seed: u64) -> Result<Self> {
        topology.validate()?;
        let air = AirProperties::default();
        let c_rho = air.c_rho();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut buildings = Vec::new();
        let mut ahus = Vec::new();
        let mut zones = Vec::new();
        for b in &topology.buildings {
            buildings.push(BuildingTruth {
                building: b.id.clone(),
                l: uniform(&mut rng, 1.1, 1.4),
                beta: uniform(&mut rng, 15.0, 40.0),
            });
            for a in &b.ahus {
                let dat_min = uniform(&mut rng, 12.0, 13.5);
                ahus.push(AhuTruth {
                    building: b.id.clone(),
                    ahu: a.id.clone(),
                    k: uniform(&mut rng, 0.1, 0.35),
                    alpha: uniform(&mut rng, -0.8, -0.2),
                    fan: resized_fan(a.fan_rated_flow / M3S_PER_CFM, a.fan_rated_power / KW_PER_HP),
                    dat_min,
                    dat_max: dat_min + uniform(&mut rng, 2.0, 4.0),
                    commissioned: true,
                });
                let n = a.zones.len().max(1) as f64;
                for z in &a.zones {
                    let v_max = 0.9 * a.fan_rated_flow / n * uniform(&mut rng, 0.7, 1.3);
                    let v_min = uniform(&mut rng, 0.25, 0.4) * v_max;
                    let design = c_rho * v_max * 9.0;
                    let ua = uniform(&mut rng, 0.015, 0.04) * design;
                    let tau_h = uniform(&mut rng, 1.0, 4.0);
                    zones.push(ZoneTruth {
                        building: b.id.clone(),
                        ahu: a.id.clone(),
                        zone: z.id.clone(),
                        capacitance: tau_h * 3600.0 * ua,
                        ua,
                        gain_base: uniform(&mut rng, 0.0, 0.05) * design,
                        gain_peak: uniform(&mut rng, 0.3, 0.75) * design,
                        v_min,
                        v_max,
                        kp: (v_max - v_min) / uniform(&mut rng, 0.8, 2.0),
                    });
                }
            }
        }
        Ok(Self {
            air,
            lsp_setpoint: 23.3,
            hsp_setpoint: 24.4,
            start: NaiveDate::from_ymd_opt(2021, 6, 22).expect("valid date"),
            weather: Weather {
                mean: 28.0,
                amplitude: 4.0,
                peak_hour: 15.0,
                daily_sigma: 1.0,
                step_sigma: 0.3,
            },
            schedule: Schedule {
                ahu_window: TimeWindow::daytime(),
                occupied: TimeWindow::hours(8, 18),
                switch_time: NaiveTime::from_hms_opt(6, 0, 0).expect("valid time"),
                block_days: 2,
            },
            cop: CopProfile {
                base: 5.5,
                slope: 0.12,
                reference_oat: 28.0,
                min: 2.5,
                max: 8.0,
            },
            district_base_load: 100.0,
            noise: NoiseSpec::default(),
            buildings,
            ahus,
            zones,
        })
    }

    fn ahu_truth(&self, b: &str, a: &str) -> Result<&AhuTruth> {
        self.ahus
            .iter()
            .find(|t| t.building == b && t.ahu == a)
            .ok_or_else(|| Error::Config(format!("no ground truth for AHU {b}/{a}")))
    }

    fn zone_truth(&self, b: &str, a: &str, z: &str) -> Result<&ZoneTruth> {
        self.zones
            .iter()
            .find(|t| t.building == b && t.ahu == a && t.zone == z)
            .ok_or_else(|| Error::Config(format!("no ground truth for zone {b}/{a}/{z}")))
    }

    fn building_truth(&self, b: &str) -> Result<&BuildingTruth> {
        self.buildings
            .iter()
            .find(|t| t.building == b)
            .ok_or_else(|| Error::Config(format!("no ground truth for building {b}")))
    }

    /// Checks parameter ranges and coverage of `topology`.
    pub fn validate(&self, topology: &Topology) -> Result<()> {
        self.air.validate()?;
        let bad = |what: String| Err(Error::Config(what));
        for b in &topology.buildings {
            self.building_truth(&b.id)?;
            for a in &b.ahus {
                let t = self.ahu_truth(&b.id, &a.id)?;
                if !(0.0..=1.0).contains(&t.k) {
                    return bad(format!("AHU {}/{}: k = {} outside [0, 1]", b.id, a.id, t.k));
                }
                if t.dat_min > t.dat_max {
                    return bad(format!("AHU {}/{}: dat_min above dat_max", b.id, a.id));
                }
                for z in &a.zones {
                    let t = self.zone_truth(&b.id, &a.id, &z.id)?;
                    if !(t.capacitance > 0.0) || !(t.ua > 0.0) {
                        return bad(format!("zone {}/{}/{}: C and UA must be positive", b.id, a.id, z.id));
                    }
                    if !(t.v_min >= 0.0 && t.v_min <= t.v_max) || t.kp < 0.0 {
                        return bad(format!("zone {}/{}/{}: invalid flow bounds", b.id, a.id, z.id));
                    }
                }
            }
        }
        if self.noise.relative < 0.0 {
            return bad("noise must be nonnegative".into());
        }
        if self.schedule.block_days == 0 {
            return bad("block_days must be positive".into());
        }
        Ok(())
    }

    /// Active cooling set-point at `t`; the first block is LSP.
    pub fn setpoint(&self, t: NaiveDateTime) -> f64 {
        let first_switch = self.start.and_time(self.schedule.switch_time);
        let block = if t < first_switch {
            0
        } else {
            (t - first_switch).num_days() / self.schedule.block_days as i64
        };
        if block % 2 == 0 {
            self.lsp_setpoint
        } else {
            self.hsp_setpoint
        }
    }

    fn ahu_on(&self, t: NaiveDateTime) -> bool {
        weekday(t) && self.schedule.ahu_window.contains(t.time())
    }

    fn occupied(&self, t: NaiveDateTime) -> bool {
        weekday(t) && self.schedule.occupied.contains(t.time())
    }

    /// The truth parameters in fitted-model form.
    pub fn models(&self, topology: &Topology) -> Result<FittedModels> {
        let mut fresh_air = Vec::new();
        let mut fans = Vec::new();
        let mut buildings = Vec::new();
        for b in &topology.buildings {
            let bt = self.building_truth(&b.id)?;
            buildings.push(BuildingModel::fixed(&b.id, bt.l, bt.beta));
            for a in &b.ahus {
                let t = self.ahu_truth(&b.id, &a.id)?;
                fresh_air.push(FreshAirModel::fixed(&b.id, &a.id, t.k, t.alpha));
                let rated = a.fan_rated_flow / M3S_PER_CFM;
                fans.push(FanEntry {
                    building: b.id.clone(),
                    ahu: a.id.clone(),
                    model: FanModel::new(t.fan, FlowUnit::Cfm, PowerUnit::Hp, commissioning_range(rated)),
                    donor: None,
                    scale: None,
                });
            }
        }
        Ok(FittedModels {
            air: self.air,
            fresh_air,
            buildings,
            fans,
        })
    }

    /// Commissioning points for every commissioned fan, CFM/HP.
    pub fn fan_points(&self, topology: &Topology) -> Result<Vec<FanPoints>> {
        let mut out = Vec::new();
        for (r, a) in topology.ahu_refs() {
            let t = self.ahu_truth(&r.building, &r.ahu)?;
            if !t.commissioned {
                continue;
            }
            let [lo, hi] = commissioning_range(a.fan_rated_flow / M3S_PER_CFM);
            let m = FanModel::new(t.fan, FlowUnit::Cfm, PowerUnit::Hp, [lo, hi]);
            let points = (0..COMMISSIONING_POINTS)
                .map(|i| {
                    let v = lo + (hi - lo) * i as f64 / (COMMISSIONING_POINTS - 1) as f64;
                    (v, m.predict(v))
                })
                .collect();
            out.push(FanPoints {
                ahu: r,
                flow_unit: FlowUnit::Cfm,
                power_unit: PowerUnit::Hp,
                points,
            });
        }
        Ok(out)
    }
}

fn commissioning_range(rated_cfm: f64) -> [f64; 2] {
    [0.2 * rated_cfm, rated_cfm]
}

fn weekday(t: NaiveDateTime) -> bool {
    !matches!(t.weekday(), Weekday::Sat | Weekday::Sun)
}

/// Three buildings sized after a small campus: A with two AHUs, B with
/// three, C with one. Two fans lack commissioning data and borrow curves.
pub fn default_topology() -> Topology {
    let ahu = |id: &str, cfm: f64, hp: f64, zones: usize| AhuNode {
        id: id.into(),
        fan_rated_flow: cfm * M3S_PER_CFM,
        fan_rated_power: hp * KW_PER_HP,
        zones: (1..=zones)
            .map(|i| ZoneNode {
                id: format!("{id}-{i:02}"),
                excluded: false,
            })
            .collect(),
    };
    Topology {
        buildings: vec![
            BuildingNode {
                id: "A".into(),
                ahus: vec![ahu("AHU1", 30000.0, 40.83, 12), ahu("AHU2", 22000.0, 30.7, 10)],
            },
            BuildingNode {
                id: "B".into(),
                ahus: vec![
                    ahu("AHU1", 22000.0, 30.7, 8),
                    ahu("AHU2", 37000.0, 48.1, 12),
                    ahu("AHU3", 44000.0, 63.3, 14),
                ],
            },
            BuildingNode {
                id: "C".into(),
                ahus: vec![ahu("AHU1", 30000.0, 40.83, 16)],
            },
        ],
    }
}

/// Fans of the default topology without commissioning data.
pub fn default_uncommissioned() -> Vec<AhuRef> {
    vec![AhuRef::new("A", "AHU2"), AhuRef::new("B", "AHU1")]
}

/// Simulator output.
#[derive(Debug, Clone)]
pub struct Simulation {
    /// Channels with measurement noise applied.
    pub frame: ChannelFrame,
    /// Channels before noise.
    pub clean: ChannelFrame,
    /// Cascade evaluated on `clean` with the truth parameters.
    pub truth_loads: CascadeOutput,
    pub truth_models: FittedModels,
    pub fan_points: Vec<FanPoints>,
}

struct ZoneState<'a> {
    truth: &'a ZoneTruth,
    key_iat: ChannelKey,
    key_vz: ChannelKey,
    iat: f64,
}

struct AhuState<'a> {
    truth: &'a AhuTruth,
    zones: Vec<ZoneState<'a>>,
}

/// Controls for one AHU given its zones' temperatures.
fn ahu_controls(ahu: &AhuState, sp: f64, on: bool, flows: &mut Vec<f64>) -> f64 {
    flows.clear();
    if !on {
        flows.extend(ahu.zones.iter().map(|_| 0.0));
        return f64::NAN;
    }
    let mut demand = 0.0;
    for z in &ahu.zones {
        let t = z.truth;
        let v = (t.v_min + t.kp * (z.iat - sp).max(0.0)).clamp(t.v_min, t.v_max);
        if t.v_max > t.v_min {
            demand += (v - t.v_min) / (t.v_max - t.v_min);
        }
        flows.push(v);
    }
    demand /= ahu.zones.len().max(1) as f64;
    ahu.truth.dat_max - (ahu.truth.dat_max - ahu.truth.dat_min) * demand
}

/// Runs the simulator for `days` days at `interval`.
pub fn simulate(
    topology: &Topology,
    truth: &GroundTruth,
    days: usize,
    interval: TimeDelta,
    seed: u64,
) -> Result<Simulation> {
    topology.validate()?;
    truth.validate(topology)?;
    if days < MIN_DAYS {
        return Err(Error::Config(format!(
            "simulation needs at least {MIN_DAYS} days for one LSP/HSP cycle (got {days})"
        )));
    }
    let secs = interval.num_seconds();
    if secs <= 0 || 86_400 % secs != 0 || interval.subsec_nanos() != 0 {
        return Err(Error::Config(format!("interval of {secs} s does not divide a day")));
    }
    let substeps = (secs / 60).max(1);
    let h = secs as f64 / substeps as f64;
    let steps_per_day = (86_400 / secs) as usize;
    let n = days * steps_per_day;
    let c_rho = truth.air.c_rho();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let day_offset: Vec<f64> = (0..days)
        .map(|_| truth.weather.daily_sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut plants: Vec<(&BuildingNode, Vec<AhuState>)> = Vec::new();
    for b in &topology.buildings {
        let mut ahus = Vec::new();
        for a in &b.ahus {
            let zones = a
                .zones
                .iter()
                .map(|z| {
                    Ok(ZoneState {
                        truth: truth.zone_truth(&b.id, &a.id, &z.id)?,
                        key_iat: ChannelKey::zone(&b.id, &a.id, &z.id, Variable::Iat),
                        key_vz: ChannelKey::zone(&b.id, &a.id, &z.id, Variable::Vz),
                        iat: truth.lsp_setpoint,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            ahus.push(AhuState {
                truth: truth.ahu_truth(&b.id, &a.id)?,
                zones,
            });
        }
        plants.push((b, ahus));
    }

    let start = truth.start.and_time(NaiveTime::MIN);
    let mut cols: BTreeMap<ChannelKey, Vec<f64>> = BTreeMap::new();
    let mut push = |k: ChannelKey, v: f64| cols.entry(k).or_insert_with(|| Vec::with_capacity(n)).push(v);
    let mut flows = Vec::new();

    for i in 0..n {
        let t = start + interval * i as i32;
        let hour = (t - t.date().and_time(NaiveTime::MIN)).num_seconds() as f64 / 3600.0;
        let oat = truth.weather.mean
            + day_offset[i / steps_per_day]
            + truth.weather.amplitude * (2.0 * std::f64::consts::PI * (hour - truth.weather.peak_hour) / 24.0).cos()
            + truth.weather.step_sigma * rng.sample::<f64, _>(StandardNormal);
        let sp = truth.setpoint(t);
        let on = truth.ahu_on(t);
        push(ChannelKey::global(Variable::Oat), oat);

        let mut q_d = truth.district_base_load;
        for (b, ahus) in &plants {
            let bt = truth.building_truth(&b.id)?;
            let mut coil_sum = 0.0;
            for (a, st) in b.ahus.iter().zip(ahus.iter()) {
                let dat_on = ahu_controls(st, sp, on, &mut flows);
                let v_c: f64 = flows.iter().sum();
                let (rat, dat) = if v_c > 0.0 {
                    let rat = st.zones.iter().zip(&flows).map(|(z, v)| v * z.iat).sum::<f64>() / v_c;
                    (rat, dat_on)
                } else {
                    let rat = st.zones.iter().map(|z| z.iat).sum::<f64>() / st.zones.len().max(1) as f64;
                    (rat, rat)
                };
                let mat = st.truth.k * oat + (1.0 - st.truth.k) * rat + st.truth.alpha;
                coil_sum += c_rho * v_c * (mat - dat);
                push(ChannelKey::ahu(&b.id, &a.id, Variable::Rat), rat);
                push(ChannelKey::ahu(&b.id, &a.id, Variable::Mat), mat);
                push(ChannelKey::ahu(&b.id, &a.id, Variable::Dat), dat);
                for (z, v) in st.zones.iter().zip(&flows) {
                    push(z.key_iat.clone(), z.iat);
                    push(z.key_vz.clone(), *v);
                }
            }
            let q_b = bt.l * coil_sum + bt.beta;
            q_d += q_b;
            push(ChannelKey::building(&b.id, Variable::Qb), q_b);
            push(ChannelKey::building(&b.id, Variable::Sp), sp);
        }
        push(ChannelKey::global(Variable::Qd), q_d);
        push(ChannelKey::global(Variable::Pd), q_d / truth.cop.at(oat));

        // Advance zone states over the interval with OAT held.
        for s in 0..substeps {
            let ts = t + TimeDelta::seconds((s as f64 * h) as i64);
            let on = truth.ahu_on(ts);
            let occupied = truth.occupied(ts);
            for (_, ahus) in plants.iter_mut() {
                for st in ahus.iter_mut() {
                    let dat = ahu_controls(st, sp, on, &mut flows);
                    for (z, v) in st.zones.iter_mut().zip(&flows) {
                        let zt = z.truth;
                        let gain = zt.gain_base + if occupied { zt.gain_peak } else { 0.0 };
                        let supply = if *v > 0.0 { c_rho * v * (z.iat - dat) } else { 0.0 };
                        z.iat += h * (zt.ua * (oat - z.iat) + gain - supply) / zt.capacitance;
                    }
                }
            }
        }
        for (b, ahus) in &plants {
            for (a, st) in b.ahus.iter().zip(ahus) {
                for (zn, z) in a.zones.iter().zip(&st.zones) {
                    if !(z.iat >= TEMPERATURE_BOUNDS.0 && z.iat <= TEMPERATURE_BOUNDS.1) {
                        return Err(Error::SimulationDiverged {
                            zone: format!("{}/{}/{}", b.id, a.id, zn.id),
                            step: i,
                        });
                    }
                }
            }
        }
    }

    let mut clean = ChannelFrame::new(start, interval, n);
    for (k, v) in cols {
        clean.insert_values(k, v)?;
    }
    let truth_models = truth.models(topology)?;
    let truth_loads = run_cascade(&clean, topology, &truth_models, &CascadeOptions::default())?;
    let frame = if truth.noise.relative > 0.0 {
        let sigmas = relative_sigmas(&clean, &truth.noise);
        perturb(&clean, &sigmas, seed.wrapping_add(0x9e37_79b9_7f4a_7c15))
    } else {
        clean.clone()
    };
    let mut fan_points = truth.fan_points(topology)?;
    if truth.noise.relative > 0.0 && truth.noise.fan_points {
        fan_points = perturb_fan_points(&fan_points, truth.noise.relative, seed.wrapping_add(0x3c6e_f372_fe94_f82b));
    }
    Ok(Simulation {
        frame,
        clean,
        truth_loads,
        truth_models,
        fan_points,
    })
}

/// Adds Gaussian noise with `σ = relative × RMS(power)` to each fan's
/// commissioning powers.
pub fn perturb_fan_points(fans: &[FanPoints], relative: f64, seed: u64) -> Vec<FanPoints> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fans.iter()
        .map(|f| {
            let sigma = relative * rms(f.points.iter().map(|p| p.1));
            let mut f = f.clone();
            for p in &mut f.points {
                p.1 += sigma * rng.sample::<f64, _>(StandardNormal);
            }
            f
        })
        .collect()
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

/// Per-channel σ for `noise` on `frame`.
pub fn relative_sigmas(frame: &ChannelFrame, noise: &NoiseSpec) -> BTreeMap<ChannelKey, f64> {
    let mut out = BTreeMap::new();
    for (key, col) in frame.columns() {
        if !noise.variables.contains(&key.variable) {
            continue;
        }
        let scale = if key.variable == Variable::Mat {
            let rat_key = ChannelKey {
                variable: Variable::Rat,
                ..key.clone()
            };
            match frame.column(&rat_key) {
                Some(rat) => rms(col.iter().zip(rat).filter_map(|(m, r)| Some((*m)? - (*r)?))),
                None => rms(col.iter().flatten().copied()),
            }
        } else {
            rms(col.iter().flatten().copied())
        };
        out.insert(key.clone(), noise.relative * scale);
    }
    out
}

/// Adds independent Gaussian noise to each channel with a positive σ.
/// Channels are visited in key order so the result depends only on `seed`.
pub fn perturb(frame: &ChannelFrame, sigmas: &BTreeMap<ChannelKey, f64>, seed: u64) -> ChannelFrame {
    let mut out = frame.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (key, col) in out.columns_mut() {
        let sigma = sigmas.get(key).copied().unwrap_or(0.0);
        if !(sigma > 0.0) {
            continue;
        }
        for v in col.iter_mut().flatten() {
            *v += sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Topology {
        let mut t = default_topology();
        t.buildings.truncate(1);
        t.buildings[0].ahus.truncate(1);
        t.buildings[0].ahus[0].zones.truncate(4);
        t
    }

    #[test]
    fn resized_reference_is_identity() {
        let c = resized_fan(30000.0, 40.83);
        for (a, b) in c.iter().zip(REFERENCE_FAN) {
            assert!((a - b).abs() <= 1e-15 * b.abs());
        }
    }

    #[test]
    fn resized_fan_hits_scaled_rating() {
        let c = resized_fan(22000.0, 30.7);
        let m = FanModel::new(c, FlowUnit::Cfm, PowerUnit::Hp, [0.0, 22000.0]);
        let ref_m = FanModel::new(REFERENCE_FAN, FlowUnit::Cfm, PowerUnit::Hp, [0.0, 30000.0]);
        let want = ref_m.predict(30000.0) * 30.7 / 40.83;
        assert!((m.predict(22000.0) - want).abs() < 1e-9);
    }

    #[test]
    fn setpoint_alternates_at_six() {
        let truth = GroundTruth::generate(&small(), 1).unwrap();
        let at = |d: u32, h: u32| {
            NaiveDate::from_ymd_opt(2021, 6, d).unwrap().and_hms_opt(h, 0, 0).unwrap()
        };
        assert_eq!(truth.setpoint(at(22, 3)), 23.3);
        assert_eq!(truth.setpoint(at(23, 23)), 23.3);
        assert_eq!(truth.setpoint(at(24, 5)), 23.3);
        assert_eq!(truth.setpoint(at(24, 6)), 24.4);
        assert_eq!(truth.setpoint(at(26, 6)), 23.3);
    }

    #[test]
    fn rejects_short_runs() {
        let topo = small();
        let truth = GroundTruth::generate(&topo, 1).unwrap();
        assert!(matches!(
            simulate(&topo, &truth, 3, TimeDelta::minutes(15), 1),
            Err(Error::Config(_))
        ));
        assert!(simulate(&topo, &truth, 4, TimeDelta::minutes(15), 1).is_ok());
    }

    #[test]
    fn same_seed_same_output() {
        let topo = small();
        let mut truth = GroundTruth::generate(&topo, 3).unwrap();
        truth.noise.relative = 0.02;
        let a = simulate(&topo, &truth, 4, TimeDelta::minutes(15), 9).unwrap();
        let b = simulate(&topo, &truth, 4, TimeDelta::minutes(15), 9).unwrap();
        assert_eq!(a.frame, b.frame);
        let c = simulate(&topo, &truth, 4, TimeDelta::minutes(15), 10).unwrap();
        assert_ne!(a.frame, c.frame);
    }

    #[test]
    fn perturb_identity_and_variance() {
        let start = NaiveDate::from_ymd_opt(2021, 6, 22).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let mut f = ChannelFrame::new(start, TimeDelta::minutes(1), 20_000);
        let key = ChannelKey::global(Variable::Oat);
        f.insert_values(key.clone(), vec![25.0; 20_000]).unwrap();
        f.insert_values(ChannelKey::global(Variable::Qd), vec![5.0; 20_000]).unwrap();

        let zero: BTreeMap<ChannelKey, f64> = [(key.clone(), 0.0)].into();
        assert_eq!(perturb(&f, &zero, 1), f);

        let sigma = 0.7;
        let s: BTreeMap<ChannelKey, f64> = [(key.clone(), sigma)].into();
        let g = perturb(&f, &s, 5);
        let d: Vec<f64> = g.column(&key).unwrap().iter().map(|v| v.unwrap() - 25.0).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.1, "{var}");
        assert_eq!(g.column(&ChannelKey::global(Variable::Qd)), f.column(&ChannelKey::global(Variable::Qd)));
        assert_ne!(perturb(&f, &s, 6), g);
    }
}
