use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constant air properties used by every load identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirProperties {
    /// Specific heat capacity, kJ/(kg·K).
    pub c: f64,
    /// Density, kg/m³.
    pub rho: f64,
}

impl Default for AirProperties {
    /// Dry air at sea level, 20 °C.
    fn default() -> Self {
        Self { c: 1.006, rho: 1.204 }
    }
}

impl AirProperties {
    pub fn new(c: f64, rho: f64) -> Result<Self> {
        let air = Self { c, rho };
        air.validate()?;
        Ok(air)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !(self.rho > 0.0) {
            return Err(Error::Config(format!(
                "air properties must be positive (c={}, rho={})",
                self.c, self.rho
            )));
        }
        Ok(())
    }

    /// Volumetric heat capacity c·ρ, kJ/(m³·K).
    #[inline]
    pub fn c_rho(&self) -> f64 {
        self.c * self.rho
    }
}
