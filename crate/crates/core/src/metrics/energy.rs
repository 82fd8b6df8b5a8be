//! Daily energy integration over a time-of-day window, per entity.

use std::collections::BTreeMap;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::model::{is_weekday, ExperimentCalendar, Regime, TimeWindow};

/// Window definition for daily integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyWindow {
    pub window: TimeWindow,
    pub weekdays_only: bool,
}

impl EnergyWindow {
    /// Weekday 06:00–20:00.
    pub fn operating() -> Self {
        Self {
            window: TimeWindow::daytime(),
            weekdays_only: true,
        }
    }

    /// Weekday, midnight to midnight.
    pub fn full_day() -> Self {
        Self {
            window: TimeWindow::full_day(),
            weekdays_only: true,
        }
    }

    pub fn contains(&self, t: NaiveDateTime) -> bool {
        (!self.weekdays_only || is_weekday(t)) && self.window.contains(t.time())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayEnergy {
    pub kwh: f64,
    /// Covered window samples over expected window samples.
    pub coverage: f64,
}

/// `(entity, day) → daily energy`, with the regime label of each day.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DailyEnergyTable {
    pub entries: BTreeMap<String, BTreeMap<NaiveDate, DayEnergy>>,
    pub regimes: BTreeMap<NaiveDate, Regime>,
    pub min_coverage: f64,
}

impl DailyEnergyTable {
    pub fn new(calendar: &ExperimentCalendar, min_coverage: f64) -> Self {
        Self {
            entries: BTreeMap::new(),
            regimes: calendar.days.clone(),
            min_coverage,
        }
    }

    /// Integrates `power` (kW) over `window` samples; `None` entries leave
    /// the sample uncovered.
    pub fn add_series(
        &mut self,
        entity: impl Into<String>,
        timestamps: &[NaiveDateTime],
        power: &[Option<f64>],
        window: EnergyWindow,
        interval_hours: f64,
    ) {
        let expected = window.window.duration_secs() as f64 / (interval_hours * 3600.0);
        let mut days: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
        for (t, p) in timestamps.iter().zip(power) {
            if !window.contains(*t) {
                continue;
            }
            let slot = days.entry(t.date()).or_insert((0.0, 0));
            if let Some(p) = p {
                slot.0 += p * interval_hours;
                slot.1 += 1;
            }
        }
        let days = days
            .into_iter()
            .map(|(d, (kwh, covered))| {
                (
                    d,
                    DayEnergy {
                        kwh,
                        coverage: (covered as f64 / expected).min(1.0),
                    },
                )
            })
            .collect();
        self.entries.insert(entity.into(), days);
    }

    pub fn regime(&self, day: NaiveDate) -> Regime {
        self.regimes.get(&day).copied().unwrap_or(Regime::Unlabeled)
    }

    /// Mean daily energy over sufficiently covered days of `regime`.
    pub fn regime_mean(&self, entity: &str, regime: Regime) -> Option<f64> {
        let days = self.entries.get(entity)?;
        let vals: Vec<f64> = days
            .iter()
            .filter(|(d, e)| self.regime(**d) == regime && e.coverage >= self.min_coverage)
            .map(|(_, e)| e.kwh)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    /// Number of days entering the mean for `regime`.
    pub fn regime_days(&self, entity: &str, regime: Regime) -> usize {
        self.entries.get(entity).map_or(0, |days| {
            days.iter()
                .filter(|(d, e)| self.regime(**d) == regime && e.coverage >= self.min_coverage)
                .count()
        })
    }
}
