//! Physical constants and unit conventions.
//!
//! Every stored damping or decay rate is angular (rad/s). Every reported
//! spectrum is single-sided per cyclic Hz. Conversions between the two live
//! here and nowhere else.

use serde::Serialize;
use std::f64::consts::TAU;

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Standard atmosphere (Pa).
pub const STANDARD_ATMOSPHERE: f64 = 101_325.0;

/// Angular rate (rad/s) to cyclic rate (Hz).
#[inline]
pub fn angular_to_cyclic(rate: f64) -> f64 {
    rate / TAU
}

/// Cyclic rate (Hz) to angular rate (rad/s).
#[inline]
pub fn cyclic_to_angular(rate: f64) -> f64 {
    rate * TAU
}

/// Power ratio in dB.
#[inline]
pub fn db_to_power_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn power_ratio_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Wavenumber or linewidth in cm⁻¹ to m⁻¹.
#[inline]
pub fn per_cm_to_per_m(x: f64) -> f64 {
    x * 100.0
}

/// Length in cm to m. Also takes HITRAN line intensities, cm⁻¹/(molec·cm⁻²) = cm/molec.
#[inline]
pub fn cm_to_m(x: f64) -> f64 {
    x * 1e-2
}

/// Number density in m⁻³ to cm⁻³.
#[inline]
pub fn per_m3_to_per_cm3(x: f64) -> f64 {
    x * 1e-6
}

/// A scalar tagged with its unit, used for every value written to reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    pub fn new(value: f64, unit: impl Into<String>) -> Self {
        let unit = unit.into();
        debug_assert!(!unit.is_empty(), "unit tag must not be empty");
        Self { value, unit }
    }
}

impl std::fmt::Display for Quantity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.6e} {}", self.value, self.unit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rate_conversion_examples() {
        assert!((angular_to_cyclic(TAU * 1430.0) - 1430.0).abs() < 1e-12);
        assert_eq!(angular_to_cyclic(0.0), 0.0);
        // 1/(2π) to 17 significant digits
        assert!((angular_to_cyclic(1.0) - 0.159_154_943_091_895_34).abs() < 1e-17);
    }

    #[test]
    fn spectroscopic_conversions() {
        // CO2 line: 0.06 cm⁻¹ and 4.7e-19 cm/molec
        assert!((per_cm_to_per_m(0.06) - 6.0).abs() < 1e-14);
        assert!((cm_to_m(4.7e-19) - 4.7e-21).abs() < 1e-34);
        assert!((per_m3_to_per_cm3(2.446e25) - 2.446e19).abs() < 1e5);
    }

    proptest! {
        #[test]
        fn rate_round_trip(x in -1e12f64..1e12) {
            let back = angular_to_cyclic(cyclic_to_angular(x));
            prop_assert!((back - x).abs() <= 4.0 * f64::EPSILON * x.abs());
        }
    }
}
