//! Topology, aligned channels, experiment calendar and air properties.

pub mod air;
pub mod calendar;
pub mod frame;
pub mod topology;
pub mod units;

pub use air::AirProperties;
pub use calendar::{
    ahu_total_flow, is_weekday, label_days, operating_mask, ExperimentCalendar, Regime, TimeWindow,
};
pub use frame::{
    align_channels, ChannelFrame, ChannelKey, Level, PointCatalog, PointEntry, PointUnit,
    QualityCounts, RawReading, Variable,
};
pub use topology::{AhuNode, AhuRef, BuildingNode, Topology, ZoneNode};
pub use units::{FlowUnit, PowerUnit};
