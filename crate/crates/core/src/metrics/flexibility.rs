use crate::error::{Error, Result};

/// Fractional reduction in mean daily energy from LSP to HSP days.
/// Negative when the entity used more energy under the higher set-point.
pub fn energy_flexibility(e_lsp: f64, e_hsp: f64) -> Result<f64> {
    if !(e_lsp > 0.0) {
        return Err(Error::UndefinedFlexibility(e_lsp));
    }
    Ok((e_lsp - e_hsp) / e_lsp)
}

/// Each entity's share of the total positive savings. Non-positive savings
/// get exactly zero.
pub fn flexibility_shares(savings: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = savings.iter().map(|s| s.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(Error::NoPositiveSavings);
    }
    Ok(savings.iter().map(|s| s.max(0.0) / total).collect())
}
