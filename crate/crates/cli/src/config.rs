//! Run configuration: one JSON file plus `--set key=value` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{FixedOffset, TimeDelta};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use zoneflex::metrics::{EnergyWindow, ReportOptions};
use zoneflex::model::{AhuRef, AirProperties, TimeWindow, Topology};
use zoneflex::regression::{BuildingFitHours, FitOptions};
use zoneflex::disaggregation::{CascadeOptions, DEFAULT_COP_BAND};
use zoneflex::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub days: usize,
    pub seed: u64,
    /// Relative channel noise (e.g. 0.02 for 2%); overrides the truth file.
    pub noise: Option<f64>,
    /// Ground-truth parameter file; generated from `seed` when absent.
    pub truth: Option<PathBuf>,
    /// AHUs (`building/ahu`) whose fans get no commissioning points. `None`
    /// uses the built-in list for the default topology.
    pub uncommissioned: Option<Vec<String>>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            days: 54,
            seed: 42,
            noise: None,
            truth: None,
            uncommissioned: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Inputs; each defaults to a fixed file name inside `output_dir`.
    pub data: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub topology: Option<PathBuf>,
    pub fan_points: Option<PathBuf>,
    pub models: Option<PathBuf>,

    pub air: AirProperties,
    pub interval_minutes: u32,
    /// Offset of local time in written timestamps, e.g. `+08:00`.
    pub utc_offset: String,
    pub daytime: TimeWindow,
    pub flow_threshold: f64,
    pub lsp_setpoint: f64,
    pub hsp_setpoint: f64,
    pub cop_floor: Option<f64>,
    pub cop_band: (f64, f64),
    pub min_coverage: f64,
    pub building_fit_hours: BuildingFitHours,
    /// `building/ahu` → donor `building/ahu`.
    pub fan_donors: BTreeMap<String, String>,
    pub zone_energy_window: EnergyWindow,
    pub building_energy_window: EnergyWindow,
    pub top_fraction: f64,
    /// Zones (`building/ahu/zone`) left out of zone-level shares.
    pub excluded_zones: Vec<String>,
    pub simulate: SimulateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            data: None,
            catalog: None,
            topology: None,
            fan_points: None,
            models: None,
            air: AirProperties::default(),
            interval_minutes: 15,
            utc_offset: "+00:00".into(),
            daytime: TimeWindow::daytime(),
            flow_threshold: 0.1,
            lsp_setpoint: 23.3,
            hsp_setpoint: 24.4,
            cop_floor: None,
            cop_band: DEFAULT_COP_BAND,
            min_coverage: 0.8,
            building_fit_hours: BuildingFitHours::All,
            fan_donors: BTreeMap::new(),
            zone_energy_window: EnergyWindow::operating(),
            building_energy_window: EnergyWindow::full_day(),
            top_fraction: 0.3,
            excluded_zones: Vec::new(),
            simulate: SimulateConfig::default(),
        }
    }
}

/// Deep-merges `overlay` into `base`; objects merge key-wise, anything else
/// replaces.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Applies one `a.b.c=value` override. The value is read as JSON when it
/// parses, otherwise as a string.
fn apply_set(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects key=value, got `{assignment}`")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = path.trim().split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Config(format!("--set: empty key segment in `{path}`")));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("--set: `{path}` descends into a non-object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

impl RunConfig {
    /// Defaults, overlaid by the config file (if any), overlaid by `sets`.
    /// Relative paths resolve against the config file's directory.
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Self> {
        let mut root = serde_json::to_value(RunConfig::default())?;
        let base_dir = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
                let file: Value = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("config {}: {e}", p.display())))?;
                merge(&mut root, file);
                p.parent().map(Path::to_path_buf).unwrap_or_default()
            }
            None => PathBuf::new(),
        };
        for s in sets {
            apply_set(&mut root, s)?;
        }
        let mut cfg: RunConfig =
            serde_json::from_value(root).map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
        cfg.resolve_paths(&base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !base.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for p in [
            &mut self.data,
            &mut self.catalog,
            &mut self.topology,
            &mut self.fan_points,
            &mut self.models,
            &mut self.simulate.truth,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.air.validate()?;
        if self.lsp_setpoint == self.hsp_setpoint {
            return Err(Error::Config("lsp_setpoint and hsp_setpoint must differ".into()));
        }
        if self.interval_minutes == 0 || 1440 % self.interval_minutes != 0 {
            return Err(Error::Config(format!(
                "interval_minutes = {} must divide a day",
                self.interval_minutes
            )));
        }
        if !(0.0..=1.0).contains(&self.min_coverage) || !(0.0..=1.0).contains(&self.top_fraction) {
            return Err(Error::Config("min_coverage and top_fraction must lie in [0, 1]".into()));
        }
        self.offset()?;
        Ok(())
    }

    pub fn interval(&self) -> TimeDelta {
        TimeDelta::minutes(self.interval_minutes as i64)
    }

    pub fn offset(&self) -> Result<FixedOffset> {
        self.utc_offset
            .parse::<FixedOffset>()
            .map_err(|_| Error::Config(format!("utc_offset `{}` is not like +08:00", self.utc_offset)))
    }

    fn in_output(&self, p: &Option<PathBuf>, name: &str) -> PathBuf {
        p.clone().unwrap_or_else(|| self.output_dir.join(name))
    }

    pub fn data_path(&self) -> PathBuf {
        self.in_output(&self.data, "data.csv")
    }

    pub fn catalog_path(&self) -> PathBuf {
        self.in_output(&self.catalog, "catalog.csv")
    }

    pub fn topology_path(&self) -> PathBuf {
        self.in_output(&self.topology, "topology.json")
    }

    pub fn fan_points_path(&self) -> PathBuf {
        self.in_output(&self.fan_points, "fan_points.csv")
    }

    pub fn models_path(&self) -> PathBuf {
        self.in_output(&self.models, "models.json")
    }

    pub fn fit_options(&self) -> Result<FitOptions> {
        let mut donors = BTreeMap::new();
        for (k, v) in &self.fan_donors {
            let parse = |s: &str| {
                AhuRef::parse(s).ok_or_else(|| Error::Config(format!("fan_donors: `{s}` is not building/ahu")))
            };
            donors.insert(parse(k)?, parse(v)?);
        }
        Ok(FitOptions {
            flow_threshold: self.flow_threshold,
            daytime: self.daytime,
            building_hours: self.building_fit_hours,
            fan_donors: donors,
        })
    }

    pub fn cascade_options(&self) -> CascadeOptions {
        CascadeOptions {
            cop_floor: self.cop_floor,
            cop_band: self.cop_band,
        }
    }

    pub fn report_options(&self) -> ReportOptions {
        ReportOptions {
            zone_window: self.zone_energy_window,
            building_window: self.building_energy_window,
            min_coverage: self.min_coverage,
            top_fraction: self.top_fraction,
            thermal_window: self.daytime,
        }
    }

    /// Marks configured zones as excluded.
    pub fn apply_exclusions(&self, topology: &mut Topology) -> Result<()> {
        for id in &self.excluded_zones {
            let mut parts = id.splitn(3, '/');
            let (b, a, z) = match (parts.next(), parts.next(), parts.next()) {
                (Some(b), Some(a), Some(z)) => (b, a, z),
                _ => return Err(Error::Config(format!("excluded zone `{id}` is not building/ahu/zone"))),
            };
            let zone = topology
                .buildings
                .iter_mut()
                .filter(|x| x.id == b)
                .flat_map(|x| x.ahus.iter_mut())
                .filter(|x| x.id == a)
                .flat_map(|x| x.zones.iter_mut())
                .find(|x| x.id == z)
                .ok_or_else(|| Error::Config(format!("excluded zone `{id}` is not in the topology")))?;
            zone.excluded = true;
        }
        Ok(())
    }
}
