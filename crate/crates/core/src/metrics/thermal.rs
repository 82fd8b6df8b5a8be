use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelFrame, ChannelKey, ExperimentCalendar, Regime, TimeWindow, Variable};

/// Zone temperature response to the set-point change, °C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalStats {
    pub mean_iat_lsp: f64,
    pub mean_iat_hsp: f64,
    /// `mean_iat_hsp − mean_iat_lsp`; negative when the zone cooled.
    pub delta_t: f64,
    /// Mean of `max(lsp_setpoint − IAT, 0)` over LSP-day window samples.
    pub overcooling_degree: f64,
}

pub fn thermal_impact(
    frame: &ChannelFrame,
    calendar: &ExperimentCalendar,
    building: &str,
    ahu: &str,
    zone: &str,
    window: TimeWindow,
) -> Result<ThermalStats> {
    let iat = frame.require(&ChannelKey::zone(building, ahu, zone, Variable::Iat))?;
    let (mut lsp_sum, mut lsp_n, mut hsp_sum, mut hsp_n, mut oc_sum) = (0.0, 0usize, 0.0, 0usize, 0.0);
    for (t, v) in frame.timestamps().iter().zip(iat) {
        let Some(v) = v else { continue };
        if !window.contains(t.time()) {
            continue;
        }
        match calendar.regime(t.date()) {
            Regime::Lsp => {
                lsp_sum += v;
                lsp_n += 1;
                oc_sum += (calendar.lsp_setpoint - v).max(0.0);
            }
            Regime::Hsp => {
                hsp_sum += v;
                hsp_n += 1;
            }
            Regime::Unlabeled => {}
        }
    }
    if lsp_n == 0 || hsp_n == 0 {
        return Err(Error::MetricPrecondition(format!(
            "zone {building}/{zone} lacks window samples on {} days",
            if lsp_n == 0 { "LSP" } else { "HSP" }
        )));
    }
    let mean_iat_lsp = lsp_sum / lsp_n as f64;
    let mean_iat_hsp = hsp_sum / hsp_n as f64;
    Ok(ThermalStats {
        mean_iat_lsp,
        mean_iat_hsp,
        delta_t: mean_iat_hsp - mean_iat_lsp,
        overcooling_degree: oc_sum / lsp_n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{NaiveDate, TimeDelta};

    fn fixture(lsp_iat: f64, hsp_iat: f64) -> (ChannelFrame, ExperimentCalendar) {
        let d = |x| NaiveDate::from_ymd_opt(2021, 6, x).unwrap();
        let start = d(22).and_hms_opt(0, 0, 0).unwrap();
        let mut f = ChannelFrame::new(start, TimeDelta::minutes(15), 96 * 4);
        let cal = ExperimentCalendar {
            lsp_setpoint: 23.3,
            hsp_setpoint: 24.4,
            days: [
                (d(22), Regime::Lsp),
                (d(23), Regime::Lsp),
                (d(24), Regime::Hsp),
                (d(25), Regime::Hsp),
            ]
            .into(),
        };
        let col = f
            .timestamps()
            .iter()
            .map(|t| Some(if t.date() < d(24) { lsp_iat } else { hsp_iat }))
            .collect();
        f.insert_column(ChannelKey::zone("A", "1", "z", Variable::Iat), col).unwrap();
        (f, cal)
    }

    #[test]
    fn no_response() {
        let (f, cal) = fixture(23.0, 23.0);
        let s = thermal_impact(&f, &cal, "A", "1", "z", TimeWindow::daytime()).unwrap();
        assert_eq!(s.delta_t, 0.0);
    }

    #[test]
    fn constant_overcooling() {
        let (f, cal) = fixture(22.3, 23.9);
        let s = thermal_impact(&f, &cal, "A", "1", "z", TimeWindow::daytime()).unwrap();
        assert!((s.overcooling_degree - 1.0).abs() < 1e-12);
        assert!((s.delta_t - 1.6).abs() < 1e-12);
    }

    #[test]
    fn signed_decrease() {
        let (f, cal) = fixture(23.5, 23.2);
        let s = thermal_impact(&f, &cal, "A", "1", "z", TimeWindow::daytime()).unwrap();
        assert!((s.delta_t + 0.3).abs() < 1e-12);
        assert_eq!(s.overcooling_degree, 0.0);
    }

    #[test]
    fn missing_regime_is_error() {
        let (f, mut cal) = fixture(23.0, 24.0);
        cal.days.retain(|_, r| *r == Regime::Lsp);
        assert!(matches!(
            thermal_impact(&f, &cal, "A", "1", "z", TimeWindow::daytime()),
            Err(Error::MetricPrecondition(_))
        ));
    }
}
