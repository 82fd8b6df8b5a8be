//! Experiment day labels, time-of-day windows and the AHU operating mask.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, NaiveDateTime, NaiveTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use super::frame::{ChannelFrame, ChannelKey, Variable};
use super::topology::AhuNode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Regime {
    Lsp,
    Hsp,
    Unlabeled,
}

/// Half-open time-of-day range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: NaiveTime,
    pub end: NaiveTime,
}

impl TimeWindow {
    pub fn new(start: NaiveTime, end: NaiveTime) -> Self {
        Self { start, end }
    }

    pub fn hours(start: u32, end: u32) -> Self {
        let t = |h: u32| {
            if h >= 24 {
                NaiveTime::from_hms_opt(23, 59, 59).unwrap()
            } else {
                NaiveTime::from_hms_opt(h, 0, 0).unwrap()
            }
        };
        Self::new(t(start), t(end))
    }

    /// 06:00–20:00.
    pub fn daytime() -> Self {
        Self::hours(6, 20)
    }

    /// The whole day.
    pub fn full_day() -> Self {
        Self::new(NaiveTime::MIN, NaiveTime::MIN)
    }

    /// `start == end` is read as the full day.
    pub fn contains(&self, t: NaiveTime) -> bool {
        if self.start == self.end {
            return true;
        }
        if self.start < self.end {
            t >= self.start && t < self.end
        } else {
            t >= self.start || t < self.end
        }
    }

    /// Window length in seconds.
    pub fn duration_secs(&self) -> i64 {
        let s = self.start.num_seconds_from_midnight() as i64;
        let e = self.end.num_seconds_from_midnight() as i64;
        match s.cmp(&e) {
            std::cmp::Ordering::Equal => 86_400,
            std::cmp::Ordering::Less => e - s,
            std::cmp::Ordering::Greater => 86_400 - s + e,
        }
    }
}

pub fn is_weekday(t: NaiveDateTime) -> bool {
    !matches!(t.weekday(), Weekday::Sat | Weekday::Sun)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCalendar {
    pub lsp_setpoint: f64,
    pub hsp_setpoint: f64,
    pub days: BTreeMap<NaiveDate, Regime>,
}

impl ExperimentCalendar {
    pub fn regime(&self, day: NaiveDate) -> Regime {
        self.days.get(&day).copied().unwrap_or(Regime::Unlabeled)
    }

    pub fn count(&self, regime: Regime) -> usize {
        self.days.values().filter(|r| **r == regime).count()
    }

    pub fn setpoint(&self, regime: Regime) -> Option<f64> {
        match regime {
            Regime::Lsp => Some(self.lsp_setpoint),
            Regime::Hsp => Some(self.hsp_setpoint),
            Regime::Unlabeled => None,
        }
    }
}

/// Afternoon window used for day labeling.
pub const LABEL_WINDOW: (u32, u32) = (12, 16);

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Labels every calendar day in the frame by its afternoon median set-point.
///
/// All building SP channels are pooled. Days with no afternoon SP sample are
/// `Unlabeled`; a median equidistant from both set-points counts as LSP.
pub fn label_days(frame: &ChannelFrame, lsp: f64, hsp: f64) -> Result<ExperimentCalendar> {
    if lsp == hsp || !lsp.is_finite() || !hsp.is_finite() {
        return Err(Error::Config(format!(
            "LSP and HSP set-points must be distinct finite values (got {lsp}, {hsp})"
        )));
    }
    let sp_cols: Vec<&[Option<f64>]> = frame
        .columns()
        .filter(|(k, _)| k.variable == Variable::Sp)
        .map(|(_, c)| c)
        .collect();
    if sp_cols.is_empty() && !frame.is_empty() {
        return Err(Error::MissingChannel("SP".into()));
    }

    let window = TimeWindow::hours(LABEL_WINDOW.0, LABEL_WINDOW.1);
    let mut per_day: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for (i, ts) in frame.timestamps().iter().enumerate() {
        let day = per_day.entry(ts.date()).or_default();
        if !window.contains(ts.time()) {
            continue;
        }
        day.extend(sp_cols.iter().filter_map(|c| c[i]));
    }

    let days = per_day
        .into_iter()
        .map(|(day, mut values)| {
            let regime = match median(&mut values) {
                None => Regime::Unlabeled,
                Some(m) if (m - lsp).abs() <= (m - hsp).abs() => Regime::Lsp,
                Some(_) => Regime::Hsp,
            };
            (day, regime)
        })
        .collect();
    Ok(ExperimentCalendar {
        lsp_setpoint: lsp,
        hsp_setpoint: hsp,
        days,
    })
}

/// Total AHU flow `v_c` per timestamp; missing when any zone flow is missing.
pub fn ahu_total_flow(frame: &ChannelFrame, building: &str, ahu: &AhuNode) -> Result<Vec<Option<f64>>> {
    let cols = ahu
        .zones
        .iter()
        .map(|z| frame.require(&ChannelKey::zone(building, &ahu.id, &z.id, Variable::Vz)))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..frame.len())
        .map(|i| cols.iter().try_fold(0.0, |acc, c| c[i].map(|v| acc + v)))
        .collect())
}

/// True where the sample is a weekday, inside `window`, and the AHU's total
/// flow is at least `flow_threshold`.
pub fn operating_mask(
    frame: &ChannelFrame,
    building: &str,
    ahu: &AhuNode,
    flow_threshold: f64,
    window: TimeWindow,
) -> Result<Vec<bool>> {
    let v_c = ahu_total_flow(frame, building, ahu)?;
    Ok(frame
        .timestamps()
        .iter()
        .zip(v_c)
        .map(|(ts, v)| {
            is_weekday(*ts) && window.contains(ts.time()) && v.is_some_and(|v| v >= flow_threshold)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::topology::ZoneNode;
    use chrono::TimeDelta;

    fn day_frame(start: NaiveDate, days: i64, sp: impl Fn(NaiveDateTime) -> Option<f64>) -> ChannelFrame {
        let start = start.and_hms_opt(0, 0, 0).unwrap();
        let len = (days * 96) as usize;
        let mut f = ChannelFrame::new(start, TimeDelta::minutes(15), len);
        let col = f.timestamps().iter().map(|t| sp(*t)).collect();
        f.insert_column(ChannelKey::building("A", Variable::Sp), col).unwrap();
        f
    }

    fn june(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 6, d).unwrap()
    }

    #[test]
    fn constant_low_setpoint_is_lsp() {
        let f = day_frame(june(22), 1, |_| Some(23.3));
        let cal = label_days(&f, 23.3, 24.4).unwrap();
        assert_eq!(cal.regime(june(22)), Regime::Lsp);
    }

    #[test]
    fn constant_high_setpoint_is_hsp() {
        let f = day_frame(june(22), 1, |_| Some(24.4));
        let cal = label_days(&f, 23.3, 24.4).unwrap();
        assert_eq!(cal.regime(june(22)), Regime::Hsp);
    }

    #[test]
    fn missing_setpoint_is_unlabeled() {
        let f = day_frame(june(22), 2, |t| (t.date() == june(22)).then_some(23.3));
        let cal = label_days(&f, 23.3, 24.4).unwrap();
        assert_eq!(cal.regime(june(22)), Regime::Lsp);
        assert_eq!(cal.regime(june(23)), Regime::Unlabeled);
        assert_eq!(cal.days.len(), 2);
    }

    #[test]
    fn morning_transition_does_not_flip_label() {
        // HSP until 06:00 then LSP for the rest of the day.
        let f = day_frame(june(22), 1, |t| Some(if t.hour() < 6 { 24.4 } else { 23.3 }));
        let cal = label_days(&f, 23.3, 24.4).unwrap();
        assert_eq!(cal.regime(june(22)), Regime::Lsp);
    }

    #[test]
    fn equal_setpoints_rejected() {
        let f = day_frame(june(22), 1, |_| Some(23.3));
        assert!(matches!(label_days(&f, 23.3, 23.3), Err(Error::Config(_))));
    }

    #[test]
    fn window_semantics() {
        let w = TimeWindow::daytime();
        assert!(w.contains(NaiveTime::from_hms_opt(6, 0, 0).unwrap()));
        assert!(!w.contains(NaiveTime::from_hms_opt(20, 0, 0).unwrap()));
        assert_eq!(w.duration_secs(), 14 * 3600);
        assert!(TimeWindow::full_day().contains(NaiveTime::from_hms_opt(3, 0, 0).unwrap()));
        assert_eq!(TimeWindow::full_day().duration_secs(), 86_400);
        let wrap = TimeWindow::hours(22, 2);
        assert!(wrap.contains(NaiveTime::from_hms_opt(23, 0, 0).unwrap()));
        assert!(wrap.contains(NaiveTime::from_hms_opt(1, 0, 0).unwrap()));
        assert!(!wrap.contains(NaiveTime::from_hms_opt(12, 0, 0).unwrap()));
    }

    fn mask_frame(start: NaiveDateTime, flows: &[f64]) -> (ChannelFrame, AhuNode) {
        let mut f = ChannelFrame::new(start, TimeDelta::minutes(15), flows.len());
        let ahu = AhuNode {
            id: "1".into(),
            fan_rated_flow: 10.0,
            fan_rated_power: 10.0,
            zones: vec![
                ZoneNode { id: "a".into(), excluded: false },
                ZoneNode { id: "b".into(), excluded: false },
            ],
        };
        f.insert_values(ChannelKey::zone("A", "1", "a", Variable::Vz), flows.iter().map(|v| v / 2.0).collect())
            .unwrap();
        f.insert_values(ChannelKey::zone("A", "1", "b", Variable::Vz), flows.iter().map(|v| v / 2.0).collect())
            .unwrap();
        (f, ahu)
    }

    #[test]
    fn operating_mask_cases() {
        // 2021-06-22 is a Tuesday, 2021-06-26 a Saturday.
        let tue = june(22).and_hms_opt(10, 0, 0).unwrap();
        let sat = june(26).and_hms_opt(10, 0, 0).unwrap();
        let (f, ahu) = mask_frame(tue, &[5.0, 0.0]);
        let m = operating_mask(&f, "A", &ahu, 0.1, TimeWindow::daytime()).unwrap();
        assert_eq!(m, vec![true, false]);
        let (f, ahu) = mask_frame(sat, &[50.0]);
        let m = operating_mask(&f, "A", &ahu, 0.1, TimeWindow::daytime()).unwrap();
        assert_eq!(m, vec![false]);
        let night = june(22).and_hms_opt(21, 0, 0).unwrap();
        let (f, ahu) = mask_frame(night, &[5.0]);
        assert_eq!(operating_mask(&f, "A", &ahu, 0.1, TimeWindow::daytime()).unwrap(), vec![false]);
    }

    #[test]
    fn operating_mask_requires_flow_channels() {
        let f = ChannelFrame::new(june(22).and_hms_opt(0, 0, 0).unwrap(), TimeDelta::minutes(15), 1);
        let (_, ahu) = mask_frame(june(22).and_hms_opt(0, 0, 0).unwrap(), &[1.0]);
        assert!(matches!(
            operating_mask(&f, "A", &ahu, 0.1, TimeWindow::daytime()),
            Err(Error::MissingChannel(_))
        ));
    }
}
