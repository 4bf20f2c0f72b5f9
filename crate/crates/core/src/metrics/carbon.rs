use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-byte emission factors and the block size used to price one message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarbonModel<T> {
    /// Switching-equipment factor, gCO2eq per byte.
    pub per_byte_gco2: T,
    /// Degraded-QoS network factor, gCO2eq per byte.
    pub qos_per_byte_gco2: T,
    pub avg_block_bytes: T,
}

impl<T: Scalar> Default for CarbonModel<T> {
    fn default() -> Self {
        Self {
            per_byte_gco2: T::lit(4.42e-9),
            qos_per_byte_gco2: T::lit(0.156),
            avg_block_bytes: T::lit(154_363.0),
        }
    }
}

impl<T: Scalar> CarbonModel<T> {
    /// gCO2eq for transmitting one block-sized message.
    pub fn per_message_gco2(&self) -> T {
        self.avg_block_bytes * self.per_byte_gco2
    }

    pub fn qos_per_message_gco2(&self) -> T {
        self.avg_block_bytes * self.qos_per_byte_gco2
    }
}

/// Emissions avoided by not sending `messages_saved` block-sized messages.
pub fn carbon_estimate<T: Scalar>(model: &CarbonModel<T>, messages_saved: T) -> Result<T> {
    if messages_saved.is_nan() || messages_saved < T::zero() {
        return Err(Error::InvalidInput(format!(
            "messages_saved must be non-negative, got {messages_saved}"
        )));
    }
    Ok(model.per_message_gco2() * messages_saved)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_message_factor() {
        let m = CarbonModel::<f64>::default();
        assert!((m.per_message_gco2() - 6.822_844_6e-4).abs() < 1e-12);
    }

    #[test]
    fn broadcasting_phase_saving() {
        let m = CarbonModel::<f64>::default();
        let g = carbon_estimate(&m, 485.125).unwrap();
        assert!((g - 0.331).abs() <= 0.001, "{g}");
    }

    #[test]
    fn single_precision() {
        let m = CarbonModel::<f32>::default();
        let g = carbon_estimate(&m, 485.125f32).unwrap();
        assert!((g - 0.331).abs() <= 0.001);
    }

    #[test]
    fn zero_and_negative() {
        let m = CarbonModel::<f64>::default();
        assert_eq!(carbon_estimate(&m, 0.0).unwrap(), 0.0);
        assert!(carbon_estimate(&m, -1.0).is_err());
    }
}
