//! Time-aligned channel storage and ingestion of long-format readings.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use chrono::{FixedOffset, NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};

use super::units::{fahrenheit_to_celsius, FlowUnit};
use crate::error::{Error, Result};

/// Physical sanity bounds for temperatures, °C.
pub const TEMPERATURE_BOUNDS: (f64, f64) = (-40.0, 60.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variable {
    #[serde(rename = "q_b")]
    Qb,
    #[serde(rename = "SP")]
    Sp,
    #[serde(rename = "RAT")]
    Rat,
    #[serde(rename = "MAT")]
    Mat,
    #[serde(rename = "DAT")]
    Dat,
    #[serde(rename = "IAT")]
    Iat,
    #[serde(rename = "v_z")]
    Vz,
    #[serde(rename = "OAT")]
    Oat,
    #[serde(rename = "q_d")]
    Qd,
    #[serde(rename = "p_d")]
    Pd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Global,
    Building,
    Ahu,
    Zone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quantity {
    Temperature,
    Flow,
    Load,
}

impl Variable {
    pub const ALL: [Variable; 10] = [
        Variable::Qb,
        Variable::Sp,
        Variable::Rat,
        Variable::Mat,
        Variable::Dat,
        Variable::Iat,
        Variable::Vz,
        Variable::Oat,
        Variable::Qd,
        Variable::Pd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Qb => "q_b",
            Variable::Sp => "SP",
            Variable::Rat => "RAT",
            Variable::Mat => "MAT",
            Variable::Dat => "DAT",
            Variable::Iat => "IAT",
            Variable::Vz => "v_z",
            Variable::Oat => "OAT",
            Variable::Qd => "q_d",
            Variable::Pd => "p_d",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Schema(format!("unknown variable `{s}`")))
    }

    pub fn level(self) -> Level {
        match self {
            Variable::Oat | Variable::Qd | Variable::Pd => Level::Global,
            Variable::Qb | Variable::Sp => Level::Building,
            Variable::Rat | Variable::Mat | Variable::Dat => Level::Ahu,
            Variable::Iat | Variable::Vz => Level::Zone,
        }
    }

    fn quantity(self) -> Quantity {
        match self {
            Variable::Sp
            | Variable::Rat
            | Variable::Mat
            | Variable::Dat
            | Variable::Iat
            | Variable::Oat => Quantity::Temperature,
            Variable::Vz => Quantity::Flow,
            Variable::Qb | Variable::Qd | Variable::Pd => Quantity::Load,
        }
    }

    /// Canonical unit string written by exporters.
    pub fn canonical_unit(self) -> &'static str {
        match self.quantity() {
            Quantity::Temperature => "degC",
            Quantity::Flow => "m3/s",
            Quantity::Load => "kW",
        }
    }

    pub fn is_temperature(self) -> bool {
        self.quantity() == Quantity::Temperature
    }
}

/// Identifies one measured series: the entity path plus the variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelKey {
    pub building: Option<String>,
    pub ahu: Option<String>,
    pub zone: Option<String>,
    pub variable: Variable,
}

impl ChannelKey {
    pub fn global(variable: Variable) -> Self {
        Self {
            building: None,
            ahu: None,
            zone: None,
            variable,
        }
    }

    pub fn building(building: &str, variable: Variable) -> Self {
        Self {
            building: Some(building.to_owned()),
            ahu: None,
            zone: None,
            variable,
        }
    }

    pub fn ahu(building: &str, ahu: &str, variable: Variable) -> Self {
        Self {
            building: Some(building.to_owned()),
            ahu: Some(ahu.to_owned()),
            zone: None,
            variable,
        }
    }

    pub fn zone(building: &str, ahu: &str, zone: &str, variable: Variable) -> Self {
        Self {
            building: Some(building.to_owned()),
            ahu: Some(ahu.to_owned()),
            zone: Some(zone.to_owned()),
            variable,
        }
    }

    /// Builds a key from catalog fields, checking they match the variable's level.
    pub fn from_parts(
        building: Option<&str>,
        ahu: Option<&str>,
        zone: Option<&str>,
        variable: Variable,
    ) -> Result<Self> {
        fn present(s: Option<&str>) -> Option<&str> {
            s.map(str::trim).filter(|s| !s.is_empty())
        }
        let (b, a, z) = (present(building), present(ahu), present(zone));
        let key = match (variable.level(), b, a, z) {
            (Level::Global, _, None, None) => Self::global(variable),
            (Level::Building, Some(b), None, None) => Self::building(b, variable),
            (Level::Ahu, Some(b), Some(a), None) => Self::ahu(b, a, variable),
            (Level::Zone, Some(b), Some(a), Some(z)) => Self::zone(b, a, z, variable),
            _ => {
                return Err(Error::Schema(format!(
                    "variable {} given at the wrong level (building={:?}, ahu={:?}, zone={:?})",
                    variable.name(),
                    b,
                    a,
                    z
                )))
            }
        };
        Ok(key)
    }
}

impl fmt::Display for ChannelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = [&self.building, &self.ahu, &self.zone]
            .into_iter()
            .filter_map(|p| p.as_deref())
            .collect();
        if parts.is_empty() {
            write!(f, "{}", self.variable.name())
        } else {
            write!(f, "{}.{}", parts.join("."), self.variable.name())
        }
    }
}

/// Unit of a catalogued point as recorded by the source system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointUnit {
    Celsius,
    Fahrenheit,
    Flow(FlowUnit),
    Kw,
}

impl PointUnit {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "°C" | "degC" | "C" | "celsius" => Ok(PointUnit::Celsius),
            "°F" | "degF" | "F" | "fahrenheit" => Ok(PointUnit::Fahrenheit),
            "kW" | "kw" => Ok(PointUnit::Kw),
            other => FlowUnit::parse(other)
                .map(PointUnit::Flow)
                .map_err(|_| Error::Schema(format!("unknown unit `{other}`"))),
        }
    }

    /// Unit label written to catalogs.
    pub fn label(self) -> &'static str {
        match self {
            PointUnit::Celsius => "degC",
            PointUnit::Fahrenheit => "degF",
            PointUnit::Flow(FlowUnit::M3s) => "m3/s",
            PointUnit::Flow(FlowUnit::Cfm) => "cfm",
            PointUnit::Kw => "kW",
        }
    }

    fn accepts(self, variable: Variable) -> bool {
        matches!(
            (self, variable.quantity()),
            (PointUnit::Celsius | PointUnit::Fahrenheit, Quantity::Temperature)
                | (PointUnit::Flow(_), Quantity::Flow)
                | (PointUnit::Kw, Quantity::Load)
        )
    }

    fn to_canonical(self, v: f64) -> f64 {
        match self {
            PointUnit::Celsius | PointUnit::Kw => v,
            PointUnit::Fahrenheit => fahrenheit_to_celsius(v),
            PointUnit::Flow(u) => u.to_m3s(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointEntry {
    pub key: ChannelKey,
    pub unit: PointUnit,
}

/// Maps historian point ids onto channel keys.
#[derive(Debug, Clone, Default)]
pub struct PointCatalog {
    points: HashMap<String, PointEntry>,
}

impl PointCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, point_id: impl Into<String>, key: ChannelKey, unit: PointUnit) -> Result<()> {
        let point_id = point_id.into();
        if !unit.accepts(key.variable) {
            return Err(Error::Schema(format!(
                "point `{point_id}`: unit {unit:?} not valid for {}",
                key.variable.name()
            )));
        }
        if self.points.insert(point_id.clone(), PointEntry { key, unit }).is_some() {
            return Err(Error::Schema(format!("duplicate point id `{point_id}`")));
        }
        Ok(())
    }

    pub fn get(&self, point_id: &str) -> Option<&PointEntry> {
        self.points.get(point_id)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reverse lookup, sorted by point id.
    pub fn point_ids_by_key(&self) -> BTreeMap<ChannelKey, String> {
        let mut ids: Vec<(&String, &PointEntry)> = self.points.iter().collect();
        ids.sort_by(|a, b| a.0.cmp(b.0));
        let mut out = BTreeMap::new();
        for (id, e) in ids {
            out.entry(e.key.clone()).or_insert_with(|| id.clone());
        }
        out
    }

    /// Catalog rows `(point_id, entry)` sorted by point id.
    pub fn entries(&self) -> Vec<(&str, &PointEntry)> {
        let mut v: Vec<_> = self.points.iter().map(|(k, e)| (k.as_str(), e)).collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawReading {
    /// Local wall-clock time.
    pub timestamp: NaiveDateTime,
    pub point_id: String,
    pub value: f64,
}

/// Counts of values touched by ingestion sanity checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct QualityCounts {
    /// Temperatures outside [`TEMPERATURE_BOUNDS`], dropped to missing.
    pub dropped_temperatures: usize,
    /// Negative flows or loads, kept but counted.
    pub negative_values: usize,
}

/// Aligned measurement table: every column shares one fixed-interval index.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFrame {
    interval: TimeDelta,
    offset: FixedOffset,
    timestamps: Vec<NaiveDateTime>,
    columns: BTreeMap<ChannelKey, Vec<Option<f64>>>,
    quality: QualityCounts,
}

impl ChannelFrame {
    /// Empty-column frame with `len` timestamps starting at `start`.
    pub fn new(start: NaiveDateTime, interval: TimeDelta, len: usize) -> Self {
        let timestamps = (0..len).map(|i| start + interval * i as i32).collect();
        Self {
            interval,
            offset: utc(),
            timestamps,
            columns: BTreeMap::new(),
            quality: QualityCounts::default(),
        }
    }

    pub fn empty(interval: TimeDelta) -> Self {
        Self::new(NaiveDateTime::default(), interval, 0)
    }

    pub fn with_offset(mut self, offset: FixedOffset) -> Self {
        self.offset = offset;
        self
    }

    pub fn insert_column(&mut self, key: ChannelKey, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.timestamps.len() {
            return Err(Error::Schema(format!(
                "column {key} has {} values for {} timestamps",
                values.len(),
                self.timestamps.len()
            )));
        }
        self.columns.insert(key, values);
        Ok(())
    }

    /// Inserts a fully-observed column.
    pub fn insert_values(&mut self, key: ChannelKey, values: Vec<f64>) -> Result<()> {
        self.insert_column(key, values.into_iter().map(Some).collect())
    }

    pub fn interval(&self) -> TimeDelta {
        self.interval
    }

    pub fn interval_hours(&self) -> f64 {
        self.interval.num_seconds() as f64 / 3600.0
    }

    pub fn offset(&self) -> FixedOffset {
        self.offset
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn quality(&self) -> QualityCounts {
        self.quality
    }

    pub fn column(&self, key: &ChannelKey) -> Option<&[Option<f64>]> {
        self.columns.get(key).map(Vec::as_slice)
    }

    pub fn require(&self, key: &ChannelKey) -> Result<&[Option<f64>]> {
        self.column(key).ok_or_else(|| Error::MissingChannel(key.to_string()))
    }

    pub fn columns(&self) -> impl Iterator<Item = (&ChannelKey, &[Option<f64>])> {
        self.columns.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn columns_mut(&mut self) -> impl Iterator<Item = (&ChannelKey, &mut Vec<Option<f64>>)> {
        self.columns.iter_mut()
    }

    /// Flattens back to long-format readings (missing values skipped),
    /// using `point_ids` to name each channel.
    pub fn to_readings(&self, point_ids: &BTreeMap<ChannelKey, String>) -> Result<Vec<RawReading>> {
        let mut out = Vec::new();
        for (t_idx, ts) in self.timestamps.iter().enumerate() {
            for (key, col) in &self.columns {
                if let Some(v) = col[t_idx] {
                    let id = point_ids
                        .get(key)
                        .ok_or_else(|| Error::Schema(format!("no point id for channel {key}")))?;
                    out.push(RawReading {
                        timestamp: *ts,
                        point_id: id.clone(),
                        value: v,
                    });
                }
            }
        }
        Ok(out)
    }
}

fn utc() -> FixedOffset {
    FixedOffset::east_opt(0).expect("zero offset")
}

/// Start of the left-labeled bucket containing `t`.
fn bucket_start(t: NaiveDateTime, interval_secs: i64) -> NaiveDateTime {
    let secs = t.and_utc().timestamp();
    let start = secs - secs.rem_euclid(interval_secs);
    chrono::DateTime::from_timestamp(start, 0)
        .expect("bucket within chrono range")
        .naive_utc()
}

/// Buckets raw readings into a fixed-interval frame by arithmetic mean.
///
/// Buckets are left-labeled and aligned to multiples of `interval` since
/// midnight. Units are converted to °C, m³/s and kW through the catalog.
/// Buckets with no observation stay missing.
pub fn align_channels(
    raw: &[RawReading],
    catalog: &PointCatalog,
    interval: TimeDelta,
) -> Result<ChannelFrame> {
    let interval_secs = interval.num_seconds();
    if interval_secs <= 0 || interval.subsec_nanos() != 0 {
        return Err(Error::Config(format!("interval must be a positive whole number of seconds, got {interval}")));
    }
    if raw.is_empty() {
        return Ok(ChannelFrame::empty(interval));
    }

    let mut quality = QualityCounts::default();
    // (key, bucket) -> (sum, count)
    let mut acc: BTreeMap<ChannelKey, BTreeMap<NaiveDateTime, (f64, usize)>> = BTreeMap::new();
    let mut first: Option<NaiveDateTime> = None;
    let mut last: Option<NaiveDateTime> = None;

    for r in raw {
        let entry = catalog
            .get(&r.point_id)
            .ok_or_else(|| Error::UnknownPoint(r.point_id.clone()))?;
        let b = bucket_start(r.timestamp, interval_secs);
        first = Some(first.map_or(b, |f| f.min(b)));
        last = Some(last.map_or(b, |l| l.max(b)));

        let value = entry.unit.to_canonical(r.value);
        if !value.is_finite() {
            continue;
        }
        if entry.key.variable.is_temperature() {
            if value < TEMPERATURE_BOUNDS.0 || value > TEMPERATURE_BOUNDS.1 {
                quality.dropped_temperatures += 1;
                continue;
            }
        } else if value < 0.0 {
            quality.negative_values += 1;
        }
        let slot = acc.entry(entry.key.clone()).or_default().entry(b).or_insert((0.0, 0));
        slot.0 += value;
        slot.1 += 1;
    }

    let (first, last) = (first.expect("non-empty"), last.expect("non-empty"));
    let len = ((last - first).num_seconds() / interval_secs) as usize + 1;
    let mut frame = ChannelFrame::new(first, interval, len);
    frame.quality = quality;
    for (key, buckets) in acc {
        let mut col = vec![None; len];
        for (b, (sum, n)) in buckets {
            let idx = ((b - first).num_seconds() / interval_secs) as usize;
            col[idx] = Some(sum / n as f64);
        }
        frame.columns.insert(key, col);
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn at(h: u32, m: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2021, 6, 22)
            .unwrap()
            .and_hms_opt(h, m, 0)
            .unwrap()
    }

    fn catalog() -> PointCatalog {
        let mut c = PointCatalog::new();
        c.insert("qb", ChannelKey::building("A", Variable::Qb), PointUnit::Kw)
            .unwrap();
        c.insert(
            "iat",
            ChannelKey::zone("A", "1", "z1", Variable::Iat),
            PointUnit::Celsius,
        )
        .unwrap();
        c.insert(
            "iat_f",
            ChannelKey::zone("A", "1", "z2", Variable::Iat),
            PointUnit::Fahrenheit,
        )
        .unwrap();
        c.insert(
            "flow",
            ChannelKey::zone("A", "1", "z1", Variable::Vz),
            PointUnit::Flow(FlowUnit::Cfm),
        )
        .unwrap();
        c
    }

    fn reading(t: NaiveDateTime, id: &str, v: f64) -> RawReading {
        RawReading {
            timestamp: t,
            point_id: id.into(),
            value: v,
        }
    }

    const FIFTEEN: TimeDelta = TimeDelta::minutes(15);

    #[test]
    fn bucket_mean_of_three_readings() {
        let raw = vec![
            reading(at(12, 1), "qb", 100.0),
            reading(at(12, 6), "qb", 110.0),
            reading(at(12, 11), "qb", 120.0),
        ];
        let f = align_channels(&raw, &catalog(), FIFTEEN).unwrap();
        assert_eq!(f.timestamps(), &[at(12, 0)]);
        assert_eq!(
            f.column(&ChannelKey::building("A", Variable::Qb)).unwrap(),
            &[Some(110.0)]
        );
    }

    #[test]
    fn single_reading_is_identity() {
        let raw = vec![reading(at(9, 7), "qb", 42.5)];
        let f = align_channels(&raw, &catalog(), FIFTEEN).unwrap();
        assert_eq!(f.timestamps(), &[at(9, 0)]);
        assert_eq!(
            f.column(&ChannelKey::building("A", Variable::Qb)).unwrap(),
            &[Some(42.5)]
        );
    }

    #[test]
    fn iat_bucket_mean() {
        let raw = vec![reading(at(12, 0), "iat", 22.0), reading(at(12, 14), "iat", 24.0)];
        let f = align_channels(&raw, &catalog(), FIFTEEN).unwrap();
        let col = f
            .column(&ChannelKey::zone("A", "1", "z1", Variable::Iat))
            .unwrap();
        assert_eq!(col, &[Some(23.0)]);
    }

    #[test]
    fn gaps_are_missing_and_index_is_contiguous() {
        let raw = vec![reading(at(12, 0), "qb", 1.0), reading(at(12, 50), "qb", 2.0)];
        let f = align_channels(&raw, &catalog(), FIFTEEN).unwrap();
        assert_eq!(f.len(), 4);
        assert!(f.timestamps().windows(2).all(|w| w[1] - w[0] == FIFTEEN));
        assert_eq!(
            f.column(&ChannelKey::building("A", Variable::Qb)).unwrap(),
            &[Some(1.0), None, None, Some(2.0)]
        );
    }

    #[test]
    fn unknown_point_is_rejected() {
        let raw = vec![reading(at(12, 0), "nope", 1.0)];
        match align_channels(&raw, &catalog(), FIFTEEN) {
            Err(Error::UnknownPoint(id)) => assert_eq!(id, "nope"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_input_gives_empty_frame() {
        let f = align_channels(&[], &catalog(), FIFTEEN).unwrap();
        assert!(f.is_empty());
    }

    #[test]
    fn units_are_converted() {
        let raw = vec![
            reading(at(12, 0), "iat_f", 74.0),
            reading(at(12, 0), "flow", 1000.0),
        ];
        let f = align_channels(&raw, &catalog(), FIFTEEN).unwrap();
        let t = f
            .column(&ChannelKey::zone("A", "1", "z2", Variable::Iat))
            .unwrap()[0]
            .unwrap();
        assert!((t - 23.333_333_333_333_33).abs() < 1e-12);
        let v = f
            .column(&ChannelKey::zone("A", "1", "z1", Variable::Vz))
            .unwrap()[0]
            .unwrap();
        assert!((v - 0.4719474).abs() < 1e-12);
    }

    #[test]
    fn out_of_bounds_temperature_dropped() {
        let raw = vec![reading(at(12, 0), "iat", 85.0), reading(at(12, 0), "qb", -3.0)];
        let f = align_channels(&raw, &catalog(), FIFTEEN).unwrap();
        assert_eq!(
            f.column(&ChannelKey::zone("A", "1", "z1", Variable::Iat)),
            None
        );
        assert_eq!(f.quality().dropped_temperatures, 1);
        assert_eq!(f.quality().negative_values, 1);
    }

    #[test]
    fn wrong_level_rejected() {
        assert!(ChannelKey::from_parts(Some("A"), None, None, Variable::Iat).is_err());
        assert!(ChannelKey::from_parts(None, None, None, Variable::Oat).is_ok());
        assert!(ChannelKey::from_parts(Some("A"), Some(""), None, Variable::Qb).is_ok());
    }

    #[test]
    fn unit_must_match_variable() {
        let mut c = PointCatalog::new();
        assert!(c
            .insert("x", ChannelKey::building("A", Variable::Qb), PointUnit::Celsius)
            .is_err());
    }

    #[test]
    fn realigning_is_idempotent() {
        let cat = catalog();
        let raw = vec![
            reading(at(12, 1), "qb", 100.0),
            reading(at(12, 6), "qb", 110.3),
            reading(at(13, 2), "qb", 97.0),
            reading(at(12, 3), "iat", 22.1),
            reading(at(13, 9), "iat", 23.7),
        ];
        let once = align_channels(&raw, &cat, FIFTEEN).unwrap();
        let back = once.to_readings(&cat.point_ids_by_key()).unwrap();
        let twice = align_channels(&back, &cat, FIFTEEN).unwrap();
        assert_eq!(once, twice);
    }
}
