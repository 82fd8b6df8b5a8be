//! CSV and JSON formats for measurements, catalogs, fan points and outputs.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, FixedOffset, NaiveDateTime};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::disaggregation::{flags, CascadeOutput, ZoneLoadSeries, ZoneStatus};
use crate::error::{Error, Result};
use crate::metrics::FlexReport;
use crate::model::{
    AhuRef, ChannelFrame, ChannelKey, FlowUnit, PointCatalog, PointUnit, PowerUnit, RawReading, Topology, Variable,
};
use crate::regression::FanPoints;

pub fn format_timestamp(t: NaiveDateTime, offset: FixedOffset) -> String {
    // Local wall-clock plus its offset.
    format!("{}{}", t.format("%Y-%m-%dT%H:%M:%S"), offset)
}

pub fn parse_timestamp(s: &str) -> Result<(NaiveDateTime, FixedOffset)> {
    let t = DateTime::parse_from_rfc3339(s.trim())
        .map_err(|e| Error::Schema(format!("bad timestamp `{s}`: {e}")))?;
    Ok((t.naive_local(), *t.offset()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str, what: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Schema(format!("{what}: `{s}` is not a number")))
}

fn require_headers<R: Read>(rdr: &mut csv::Reader<R>, want: &[&str], file: &str) -> Result<()> {
    let headers = rdr.headers()?.clone();
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got.is_empty() || got == [""] {
        return Err(Error::Schema(format!("{file}: empty file or missing header")));
    }
    for w in want {
        if !got.contains(w) {
            return Err(Error::Schema(format!("{file}: missing column `{w}` (have {})", got.join(","))));
        }
    }
    Ok(())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(false).from_reader(r)
}

#[derive(Debug, Deserialize)]
struct ReadingRow {
    timestamp: String,
    point_id: String,
    value: String,
}

/// Long-format readings. Every timestamp is expressed in the offset of the
/// first row; the offset is returned alongside.
pub fn read_readings<R: Read>(r: R) -> Result<(Vec<RawReading>, FixedOffset)> {
    let mut rdr = reader(r);
    require_headers(&mut rdr, &["timestamp", "point_id", "value"], "data CSV")?;
    let mut out = Vec::new();
    let mut offset: Option<FixedOffset> = None;
    for (i, row) in rdr.deserialize::<ReadingRow>().enumerate() {
        let row = row.map_err(|e| Error::Schema(format!("data CSV row {}: {e}", i + 2)))?;
        let Some(value) = parse_opt(&row.value, &format!("data CSV row {}", i + 2))? else {
            continue;
        };
        let t = DateTime::parse_from_rfc3339(row.timestamp.trim())
            .map_err(|e| Error::Schema(format!("data CSV row {}: bad timestamp `{}`: {e}", i + 2, row.timestamp)))?;
        let off = *offset.get_or_insert(*t.offset());
        out.push(RawReading {
            timestamp: t.with_timezone(&off).naive_local(),
            point_id: row.point_id,
            value,
        });
    }
    Ok((out, offset.unwrap_or_else(|| FixedOffset::east_opt(0).expect("zero offset"))))
}

pub fn write_readings<W: Write>(w: W, readings: &[RawReading], offset: FixedOffset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["timestamp", "point_id", "value"])?;
    for r in readings {
        wtr.write_record([format_timestamp(r.timestamp, offset), r.point_id.clone(), r.value.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct CatalogRow {
    point_id: String,
    building: Option<String>,
    ahu: Option<String>,
    zone: Option<String>,
    variable: String,
    unit: String,
}

pub fn read_catalog<R: Read>(r: R) -> Result<PointCatalog> {
    let mut rdr = reader(r);
    require_headers(&mut rdr, &["point_id", "building", "ahu", "zone", "variable", "unit"], "point catalog")?;
    let mut cat = PointCatalog::new();
    for (i, row) in rdr.deserialize::<CatalogRow>().enumerate() {
        let row = row.map_err(|e| Error::Schema(format!("point catalog row {}: {e}", i + 2)))?;
        let variable = Variable::parse(&row.variable)?;
        let key = ChannelKey::from_parts(row.building.as_deref(), row.ahu.as_deref(), row.zone.as_deref(), variable)?;
        cat.insert(row.point_id, key, PointUnit::parse(&row.unit)?)?;
    }
    Ok(cat)
}

pub fn write_catalog<W: Write>(w: W, catalog: &PointCatalog) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["point_id", "building", "ahu", "zone", "variable", "unit"])?;
    for (id, e) in catalog.entries() {
        let k = &e.key;
        wtr.write_record([
            id,
            k.building.as_deref().unwrap_or(""),
            k.ahu.as_deref().unwrap_or(""),
            k.zone.as_deref().unwrap_or(""),
            k.variable.name(),
            e.unit.label(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Catalog naming each frame channel by its dotted key, in canonical units.
pub fn frame_catalog(frame: &ChannelFrame) -> Result<(PointCatalog, BTreeMap<ChannelKey, String>)> {
    let mut cat = PointCatalog::new();
    let mut ids = BTreeMap::new();
    for (key, _) in frame.columns() {
        let unit = PointUnit::parse(key.variable.canonical_unit())?;
        let id = key.to_string();
        cat.insert(id.clone(), key.clone(), unit)?;
        ids.insert(key.clone(), id);
    }
    Ok((cat, ids))
}

fn flow_unit_label(u: FlowUnit) -> &'static str {
    match u {
        FlowUnit::M3s => "m3/s",
        FlowUnit::Cfm => "cfm",
    }
}

fn power_unit_label(u: PowerUnit) -> &'static str {
    match u {
        PowerUnit::Kw => "kW",
        PowerUnit::Hp => "hp",
    }
}

#[derive(Debug, Deserialize)]
struct FanRow {
    building: String,
    ahu: String,
    flow: f64,
    flow_unit: String,
    power: f64,
    power_unit: String,
}

/// Commissioning points grouped per AHU in first-seen order. Units must be
/// consistent within an AHU.
pub fn read_fan_points<R: Read>(r: R) -> Result<Vec<FanPoints>> {
    let mut rdr = reader(r);
    require_headers(&mut rdr, &["building", "ahu", "flow", "flow_unit", "power", "power_unit"], "fan points")?;
    let mut out: Vec<FanPoints> = Vec::new();
    for (i, row) in rdr.deserialize::<FanRow>().enumerate() {
        let row = row.map_err(|e| Error::Schema(format!("fan points row {}: {e}", i + 2)))?;
        let ahu = AhuRef::new(row.building, row.ahu);
        let fu = FlowUnit::parse(&row.flow_unit)?;
        let pu = PowerUnit::parse(&row.power_unit)?;
        match out.iter_mut().find(|f| f.ahu == ahu) {
            Some(f) => {
                if f.flow_unit != fu || f.power_unit != pu {
                    return Err(Error::Schema(format!("fan points for {ahu} mix units")));
                }
                f.points.push((row.flow, row.power));
            }
            None => out.push(FanPoints {
                ahu,
                flow_unit: fu,
                power_unit: pu,
                points: vec![(row.flow, row.power)],
            }),
        }
    }
    Ok(out)
}

pub fn write_fan_points<W: Write>(w: W, fans: &[FanPoints]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["building", "ahu", "flow", "flow_unit", "power", "power_unit"])?;
    for f in fans {
        for (v, p) in &f.points {
            wtr.write_record([
                f.ahu.building.as_str(),
                f.ahu.ahu.as_str(),
                &v.to_string(),
                flow_unit_label(f.flow_unit),
                &p.to_string(),
                power_unit_label(f.power_unit),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

const ZONE_LOAD_HEADER: [&str; 7] = ["timestamp", "zone_id", "q_z_kw", "q_ec_kw", "q_eb_kw", "p_fan_kw", "p_total_kw"];

/// One building's zone loads, timestamp-major. `zone_id` is the zone id,
/// unique within its building.
pub fn write_zone_loads<W: Write>(
    w: W,
    timestamps: &[NaiveDateTime],
    offset: FixedOffset,
    zones: &[&ZoneLoadSeries],
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(ZONE_LOAD_HEADER)?;
    for (i, t) in timestamps.iter().enumerate() {
        let ts = format_timestamp(*t, offset);
        for z in zones {
            wtr.write_record([
                ts.clone(),
                z.zone.clone(),
                opt(z.q_z[i]),
                opt(z.q_ec[i]),
                opt(z.q_eb[i]),
                opt(z.p_fan[i]),
                opt(z.p_total[i]),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Zone loads as written by [`write_zone_loads`], keyed against the
/// building's zones in `topology`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneLoadTable {
    pub timestamps: Vec<NaiveDateTime>,
    pub offset: FixedOffset,
    pub zones: Vec<ZoneLoadSeries>,
}

pub fn read_zone_loads<R: Read>(r: R, building: &str, topology: &Topology) -> Result<ZoneLoadTable> {
    let b = topology
        .building(building)
        .ok_or_else(|| Error::Schema(format!("zone loads for unknown building {building}")))?;
    let mut rdr = reader(r);
    require_headers(&mut rdr, &ZONE_LOAD_HEADER, "zone loads")?;
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut zones: Vec<ZoneLoadSeries> = Vec::new();
    for a in &b.ahus {
        for z in &a.zones {
            index.insert(z.id.clone(), zones.len());
            zones.push(ZoneLoadSeries {
                building: b.id.clone(),
                ahu: a.id.clone(),
                zone: z.id.clone(),
                q_z: Vec::new(),
                q_ec: Vec::new(),
                q_eb: Vec::new(),
                p_fan: Vec::new(),
                p_total: Vec::new(),
                status: Vec::new(),
            });
        }
    }
    let mut timestamps: Vec<NaiveDateTime> = Vec::new();
    let mut offset = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Schema(format!("zone loads row {}: {e}", i + 2)))?;
        let what = format!("zone loads row {}", i + 2);
        let (t, off) = parse_timestamp(&rec[0])?;
        offset.get_or_insert(off);
        if timestamps.last() != Some(&t) {
            if timestamps.last().is_some_and(|l| *l > t) {
                return Err(Error::Schema(format!("{what}: timestamps not increasing")));
            }
            timestamps.push(t);
        }
        let zi = *index
            .get(rec[1].trim())
            .ok_or_else(|| Error::Schema(format!("{what}: unknown zone `{}` in building {building}", &rec[1])))?;
        let z = &mut zones[zi];
        if z.q_z.len() + 1 != timestamps.len() {
            return Err(Error::Schema(format!("{what}: zone {} repeated or skipped", z.zone)));
        }
        z.q_z.push(parse_opt(&rec[2], &what)?);
        z.q_ec.push(parse_opt(&rec[3], &what)?);
        z.q_eb.push(parse_opt(&rec[4], &what)?);
        z.p_fan.push(parse_opt(&rec[5], &what)?);
        let p = parse_opt(&rec[6], &what)?;
        z.p_total.push(p);
        z.status.push(if p.is_some() { ZoneStatus::Ok } else { ZoneStatus::Missing });
    }
    if let Some(z) = zones.iter().find(|z| z.q_z.len() != timestamps.len()) {
        return Err(Error::Schema(format!(
            "zone loads: zone {} has {} rows for {} timestamps",
            z.zone,
            z.q_z.len(),
            timestamps.len()
        )));
    }
    Ok(ZoneLoadTable {
        timestamps,
        offset: offset.unwrap_or_else(|| FixedOffset::east_opt(0).expect("zero offset")),
        zones,
    })
}

pub fn write_diagnostics<W: Write>(w: W, out: &CascadeOutput, offset: FixedOffset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["timestamp", "building_id", "residual_kw", "cop", "coverage_flags"])?;
    for (i, t) in out.timestamps.iter().enumerate() {
        let ts = format_timestamp(*t, offset);
        for d in &out.diagnostics {
            wtr.write_record([
                ts.clone(),
                d.building.clone(),
                opt(d.residual[i]),
                opt(out.cop[i]),
                flags::format(d.flags[i]),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_thermal<W: Write>(w: W, report: &FlexReport) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["zone_id", "mean_iat_lsp_c", "mean_iat_hsp_c", "delta_t_c", "overcooling_c"])?;
    for row in &report.thermal {
        let s = row.stats;
        wtr.write_record([
            row.zone_id.clone(),
            opt(s.map(|s| s.mean_iat_lsp)),
            opt(s.map(|s| s.mean_iat_hsp)),
            opt(s.map(|s| s.delta_t)),
            opt(s.map(|s| s.overcooling_degree)),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned, R: Read>(r: R) -> Result<T> {
    Ok(serde_json::from_reader(r)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::align_channels;
    use chrono::{NaiveDate, TimeDelta};

    fn offset() -> FixedOffset {
        FixedOffset::east_opt(8 * 3600).unwrap()
    }

    #[test]
    fn readings_round_trip_through_alignment() {
        let start = NaiveDate::from_ymd_opt(2021, 6, 22).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let mut f = ChannelFrame::new(start, TimeDelta::minutes(15), 8).with_offset(offset());
        f.insert_values(ChannelKey::global(Variable::Oat), (0..8).map(|i| 25.0 + 0.1 * i as f64).collect())
            .unwrap();
        f.insert_column(
            ChannelKey::zone("A", "1", "z", Variable::Vz),
            (0..8).map(|i| (i != 3).then_some(1.0 / 3.0 + i as f64)).collect(),
        )
        .unwrap();
        let (cat, ids) = frame_catalog(&f).unwrap();
        let mut data = Vec::new();
        write_readings(&mut data, &f.to_readings(&ids).unwrap(), f.offset()).unwrap();
        let mut cat_csv = Vec::new();
        write_catalog(&mut cat_csv, &cat).unwrap();

        let (raw, off) = read_readings(data.as_slice()).unwrap();
        assert_eq!(off, offset());
        let cat2 = read_catalog(cat_csv.as_slice()).unwrap();
        let g = align_channels(&raw, &cat2, TimeDelta::minutes(15)).unwrap().with_offset(off);
        assert_eq!(g, f);
    }

    #[test]
    fn empty_data_is_schema_error() {
        assert!(matches!(read_readings("".as_bytes()), Err(Error::Schema(_))));
        let (r, _) = read_readings("timestamp,point_id,value\n".as_bytes()).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn catalog_units_and_levels() {
        let csv = "point_id,building,ahu,zone,variable,unit\n\
                   p1,A,,,q_b,kW\n\
                   p2,A,1,z,v_z,cfm\n\
                   p3,,,,OAT,degF\n";
        let c = read_catalog(csv.as_bytes()).unwrap();
        assert_eq!(c.len(), 3);
        let bad = "point_id,building,ahu,zone,variable,unit\np1,A,1,,q_b,kW\n";
        assert!(read_catalog(bad.as_bytes()).is_err());
    }

    #[test]
    fn fan_points_round_trip() {
        let fp = vec![FanPoints {
            ahu: AhuRef::new("A", "1"),
            flow_unit: FlowUnit::Cfm,
            power_unit: PowerUnit::Hp,
            points: vec![(6000.0, 18.2), (30000.0, 39.34)],
        }];
        let mut buf = Vec::new();
        write_fan_points(&mut buf, &fp).unwrap();
        assert_eq!(read_fan_points(buf.as_slice()).unwrap(), fp);
    }

    #[test]
    fn timestamps_keep_offset() {
        let t = NaiveDate::from_ymd_opt(2021, 6, 22).unwrap().and_hms_opt(6, 15, 0).unwrap();
        let s = format_timestamp(t, offset());
        assert_eq!(s, "2021-06-22T06:15:00+08:00");
        assert_eq!(parse_timestamp(&s).unwrap(), (t, offset()));
    }
}
