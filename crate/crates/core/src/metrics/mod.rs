//! Energy flexibility, flexibility shares, heterogeneity and thermal impact.

pub mod energy;
pub mod flexibility;
pub mod heterogeneity;
pub mod report;
pub mod thermal;

pub use energy::{DailyEnergyTable, DayEnergy, EnergyWindow};
pub use flexibility::{energy_flexibility, flexibility_shares};
pub use heterogeneity::{
    concentration, gini, lorenz, lorenz_area, Concentration, ConcentrationOrder, EntityEnergy,
};
pub use report::{build_report, zone_id, BuildingFlex, EntityFlex, FlexReport, LoadComponent, ReportOptions, ThermalRow, ZoneLoads};
pub use thermal::{thermal_impact, ThermalStats};
