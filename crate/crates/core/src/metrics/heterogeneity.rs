//! Lorenz curves, Gini coefficients and top-k concentration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn sorted_ascending(shares: &[f64]) -> Result<Vec<f64>> {
    if shares.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Schema("shares must be finite and nonnegative".into()));
    }
    let mut y = shares.to_vec();
    y.sort_by(f64::total_cmp);
    if !(y.iter().sum::<f64>() > 0.0) {
        return Err(Error::UndefinedGini);
    }
    Ok(y)
}

/// Gini coefficient from the rank-weighted sum over ascending shares:
/// `1 − Σ_i (2n − 2i + 1)·y_i / (n²·ȳ)`.
pub fn gini(shares: &[f64]) -> Result<f64> {
    let y = sorted_ascending(shares)?;
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let weighted: f64 = y
        .iter()
        .enumerate()
        .map(|(i, v)| (2.0 * n - 2.0 * (i as f64 + 1.0) + 1.0) * v)
        .sum();
    Ok(1.0 - weighted / (n * n * mean))
}

/// Lorenz curve: `n + 1` points from (0, 0) to (1, 1) over ascending shares.
pub fn lorenz(shares: &[f64]) -> Result<Vec<(f64, f64)>> {
    let y = sorted_ascending(shares)?;
    let n = y.len();
    let total: f64 = y.iter().sum();
    let mut pts = Vec::with_capacity(n + 1);
    pts.push((0.0, 0.0));
    let mut cum = 0.0;
    for (i, v) in y.iter().enumerate() {
        cum += v;
        let x = if i + 1 == n { 1.0 } else { (i + 1) as f64 / n as f64 };
        let yv = if i + 1 == n { 1.0 } else { cum / total };
        pts.push((x, yv));
    }
    Ok(pts)
}

/// Trapezoidal area under a Lorenz curve.
pub fn lorenz_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcentrationOrder {
    EnergyUse,
    Flexibility,
}

/// One entity's mean daily use and LSP→HSP saving, kWh.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityEnergy {
    pub id: String,
    pub use_kwh: f64,
    pub savings_kwh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub fraction: f64,
    pub share_of_use: f64,
    pub share_of_flex: f64,
}

/// Share of total use and of total positive savings held by the top
/// `ceil(top_fraction·n)` entities, ranked descending by `order` with ties
/// broken by id.
pub fn concentration(entities: &[EntityEnergy], order: ConcentrationOrder, top_fraction: f64) -> Concentration {
    let top_fraction = top_fraction.clamp(0.0, 1.0);
    let key = |e: &EntityEnergy| match order {
        ConcentrationOrder::EnergyUse => e.use_kwh,
        ConcentrationOrder::Flexibility => e.savings_kwh.max(0.0),
    };
    let mut ranked: Vec<&EntityEnergy> = entities.iter().collect();
    ranked.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| a.id.cmp(&b.id)));

    let n = ranked.len();
    // Guard against 0.3·10 = 3.0000000000000004 rounding up to 4.
    let take = ((top_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let take = take.min(n);

    let total_use: f64 = entities.iter().map(|e| e.use_kwh).sum();
    let total_flex: f64 = entities.iter().map(|e| e.savings_kwh.max(0.0)).sum();
    let top_use: f64 = ranked[..take].iter().map(|e| e.use_kwh).sum();
    let top_flex: f64 = ranked[..take].iter().map(|e| e.savings_kwh.max(0.0)).sum();
    Concentration {
        fraction: top_fraction,
        share_of_use: if total_use != 0.0 { top_use / total_use } else { 0.0 },
        share_of_flex: if total_flex > 0.0 { top_flex / total_flex } else { 0.0 },
    }
}
