//! Per-event anchoring cost.

use super::CostError;

/// Gas charged for anchoring one txid.
pub const GAS_PER_ANCHOR: u64 = 47_000;

/// `gas_units * gas_price_gwei * 1e-9 * eth_usd / batch_size`, in USD.
pub fn estimate_anchor_cost(
    gas_units: f64,
    gas_price_gwei: f64,
    eth_usd: f64,
    batch_size: u64,
) -> Result<f64, CostError> {
    for (name, v) in [
        ("gas_units", gas_units),
        ("gas_price_gwei", gas_price_gwei),
        ("eth_usd", eth_usd),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(CostError::InvalidInput { name, value: v });
        }
    }
    if batch_size == 0 {
        return Err(CostError::EmptyBatch);
    }
    Ok(gas_units * gas_price_gwei * 1e-9 * eth_usd / batch_size as f64)
}
