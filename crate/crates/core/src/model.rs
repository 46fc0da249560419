//! Domain types shared by every model: device geometry, mechanical mode,
//! optical cavity and the surrounding gas.
//!
//! All values are strict SI. Rates are angular (rad/s); use the `_hz`
//! constructors or [`crate::units`] when starting from cyclic values.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::units::{angular_to_cyclic, SPEED_OF_LIGHT, STANDARD_ATMOSPHERE};

/// Annular (spoked) disk resonator suspended above a substrate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorGeometry {
    /// Outer radius R (m).
    pub major_radius: f64,
    /// Inner radius of the annulus (m). Zero for a full disk.
    pub minor_radius: f64,
    /// Thickness t (m).
    pub thickness: f64,
    /// Material density ρ (kg/m³).
    pub density: f64,
    /// Height h of the resonator above the substrate (m).
    pub substrate_gap: f64,
    /// Fraction of the annulus that is active sensing area, in (0, 1].
    pub active_fraction: f64,
}

/// Quantities derived from a [`SensorGeometry`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedGeometry {
    /// Annulus area π(R² − r²) (m²).
    pub area: f64,
    /// Total mass ρ·t·A (kg).
    pub total_mass: f64,
    /// r/R.
    pub beta_ratio: f64,
}

impl SensorGeometry {
    /// The spoked silica microdisk: R = 148 µm, r = 82 µm, t = 1.8 µm.
    pub fn paper_microdisk() -> Self {
        Self {
            major_radius: 148e-6,
            minor_radius: 82e-6,
            thickness: 1.8e-6,
            density: 2650.0,
            substrate_gap: 5e-6,
            active_fraction: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGeometry(msg));
        for (name, v) in [
            ("major_radius", self.major_radius),
            ("thickness", self.thickness),
            ("density", self.density),
            ("substrate_gap", self.substrate_gap),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.minor_radius.is_finite()
            && self.minor_radius >= 0.0
            && self.minor_radius < self.major_radius)
        {
            return bad(format!(
                "minor_radius must satisfy 0 <= r < R, got r = {}, R = {}",
                self.minor_radius, self.major_radius
            ));
        }
        if !(self.active_fraction > 0.0 && self.active_fraction <= 1.0) {
            return bad(format!(
                "active_fraction must be in (0, 1], got {}",
                self.active_fraction
            ));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        PI * (self.major_radius.powi(2) - self.minor_radius.powi(2))
    }

    /// Area scaled by `active_fraction`. Only used when a caller explicitly
    /// asks for the active sensing area.
    pub fn active_area(&self) -> f64 {
        self.area() * self.active_fraction
    }

    pub fn total_mass(&self) -> f64 {
        self.density * self.thickness * self.area()
    }

    pub fn beta_ratio(&self) -> f64 {
        self.minor_radius / self.major_radius
    }

    /// Returns a copy with every length multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            major_radius: self.major_radius * s,
            minor_radius: self.minor_radius * s,
            thickness: self.thickness * s,
            substrate_gap: self.substrate_gap * s,
            ..*self
        }
    }
}

/// Area, total mass and radius ratio of the resonator.
pub fn derive_geometry(geometry: &SensorGeometry) -> Result<DerivedGeometry> {
    geometry.validate()?;
    let area = geometry.area();
    let total_mass = geometry.density * geometry.thickness * area;
    if !(area > 0.0 && total_mass > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "derived area {area} m² and mass {total_mass} kg must be positive"
        )));
    }
    Ok(DerivedGeometry {
        area,
        total_mass,
        beta_ratio: geometry.beta_ratio(),
    })
}

/// A single mechanical eigenmode in the one-oscillator approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicalMode {
    /// ω_m (rad/s).
    pub resonance_freq: f64,
    /// Intrinsic damping γ (rad/s).
    pub intrinsic_damping: f64,
    /// Gas damping γ_gas (rad/s).
    pub gas_damping: f64,
    /// Effective mass m (kg).
    pub effective_mass: f64,
    /// Overlap ζ of the modeshape with the incident pressure profile.
    pub overlap: f64,
    /// Pressure participation ratio r. May exceed 1.
    pub participation_ratio: f64,
}

impl MechanicalMode {
    /// Builds a mode from cyclic frequency and cyclic damping rates (Hz).
    pub fn from_hz(
        resonance_hz: f64,
        intrinsic_damping_hz: f64,
        gas_damping_hz: f64,
        effective_mass: f64,
    ) -> Self {
        use crate::units::cyclic_to_angular as w;
        Self {
            resonance_freq: w(resonance_hz),
            intrinsic_damping: w(intrinsic_damping_hz),
            gas_damping: w(gas_damping_hz),
            effective_mass,
            overlap: 1.0,
            participation_ratio: 1.0,
        }
    }

    /// The 315 kHz second-order flapping mode of the microdisk, with the
    /// damping split 150 Hz intrinsic / 1280 Hz gas measured in the
    /// pressure sweep.
    pub fn paper_flapping() -> Self {
        Self {
            overlap: 0.14,
            participation_ratio: 0.055,
            ..Self::from_hz(315e3, 150.0, 1280.0, 110e-12)
        }
    }

    pub fn with_coupling(mut self, participation_ratio: f64, overlap: f64) -> Self {
        self.participation_ratio = participation_ratio;
        self.overlap = overlap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidMode(msg));
        if !(self.effective_mass.is_finite() && self.effective_mass > 0.0) {
            return bad(format!("effective mass must be > 0, got {}", self.effective_mass));
        }
        if !(self.resonance_freq.is_finite() && self.resonance_freq > 0.0) {
            return bad(format!("resonance frequency must be > 0, got {}", self.resonance_freq));
        }
        if !(self.intrinsic_damping >= 0.0 && self.gas_damping >= 0.0)
            || !(self.intrinsic_damping.is_finite() && self.gas_damping.is_finite())
        {
            return bad("damping rates must be finite and >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return bad(format!("overlap must lie in [0, 1], got {}", self.overlap));
        }
        if !(self.participation_ratio.is_finite() && self.participation_ratio >= 0.0) {
            return bad(format!(
                "participation ratio must be >= 0, got {}",
                self.participation_ratio
            ));
        }
        Ok(())
    }

    /// γ_m = γ + γ_gas (rad/s).
    pub fn total_damping(&self) -> f64 {
        self.intrinsic_damping + self.gas_damping
    }

    /// k = m ω_m² (N/m).
    pub fn spring_constant(&self) -> f64 {
        self.effective_mass * self.resonance_freq.powi(2)
    }

    pub fn resonance_hz(&self) -> f64 {
        angular_to_cyclic(self.resonance_freq)
    }

    pub fn quality_factor(&self) -> f64 {
        self.resonance_freq / self.total_damping()
    }
}

/// Optical whispering-gallery (or Fabry-Pérot) cavity probed in transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalCavity {
    /// Intrinsic loss κ_l (rad/s).
    pub intrinsic_loss: f64,
    /// Input coupling κ_in,0 (rad/s).
    pub input_coupling: f64,
    /// Laser-cavity detuning Δ (rad/s).
    pub detuning: f64,
    /// g_disp = dΔ/dx (rad/s per m).
    pub dispersive_coupling: f64,
    /// g_diss = (1/κ_in,0) dκ_in/dx (1/m).
    pub dissipative_coupling: f64,
    /// Vacuum optomechanical coupling g₀ (rad/s).
    pub vacuum_coupling: f64,
    /// Photon number N. Treated as an opaque calibration parameter.
    pub photon_number: f64,
    /// Optical wavelength λ (m).
    pub wavelength: f64,
    /// Detection efficiency η; the shot term uses ηN.
    pub detection_efficiency: f64,
}

impl OpticalCavity {
    /// Critically coupled cavity with total decay 2π × 112 MHz at 1555.7 nm.
    pub fn paper_critical() -> Self {
        let half = crate::units::cyclic_to_angular(56e6);
        Self {
            intrinsic_loss: half,
            input_coupling: half,
            detuning: 0.0,
            dispersive_coupling: 1e16,
            dissipative_coupling: 1e5,
            vacuum_coupling: crate::units::cyclic_to_angular(1e3),
            photon_number: 0.0,
            wavelength: 1555.7e-9,
            detection_efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("intrinsic_loss", self.intrinsic_loss)?;
        ensure_positive("input_coupling", self.input_coupling)?;
        ensure_positive("wavelength", self.wavelength)?;
        ensure_non_negative("photon_number", self.photon_number)?;
        if !(self.detuning.is_finite()
            && self.dispersive_coupling.is_finite()
            && self.dissipative_coupling.is_finite()
            && self.vacuum_coupling.is_finite())
        {
            return Err(crate::error::invalid("cavity", "couplings and detuning must be finite"));
        }
        if !(self.detection_efficiency > 0.0 && self.detection_efficiency <= 1.0) {
            return Err(crate::error::invalid(
                "detection_efficiency",
                format!("must lie in (0, 1], got {}", self.detection_efficiency),
            ));
        }
        Ok(())
    }

    /// κ₀ = κ_in,0 + κ_l (rad/s).
    pub fn total_decay(&self) -> f64 {
        self.input_coupling + self.intrinsic_loss
    }

    /// Optical carrier angular frequency 2πc/λ.
    pub fn optical_angular_frequency(&self) -> f64 {
        std::f64::consts::TAU * SPEED_OF_LIGHT / self.wavelength
    }

    /// Loaded quality factor ω_opt/κ₀.
    pub fn loaded_q(&self) -> f64 {
        self.optical_angular_frequency() / self.total_decay()
    }

    /// Intrinsic quality factor ω_opt/κ_l.
    pub fn intrinsic_q(&self) -> f64 {
        self.optical_angular_frequency() / self.intrinsic_loss
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    /// Effective detected photon number ηN.
    pub fn detected_photon_number(&self) -> f64 {
        self.detection_efficiency * self.photon_number
    }
}

/// Gas surrounding the resonator and carrying the acoustic wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasEnvironment {
    /// Dynamic viscosity µ (kg/(m·s)).
    pub viscosity: f64,
    /// Temperature T (K).
    pub temperature: f64,
    /// Mass density (kg/m³).
    pub density: f64,
    /// Speed of sound v (m/s).
    pub sound_speed: f64,
    /// Specific acoustic impedance Z (Pa·s/m).
    pub acoustic_impedance: f64,
    /// Isobaric specific heat C_p (J/(kg·K)).
    pub heat_capacity: f64,
    /// Volumetric expansion coefficient (1/K).
    pub expansion_coeff: f64,
    /// Static pressure (Pa).
    pub static_pressure: f64,
}

impl Default for GasEnvironment {
    fn default() -> Self {
        Self::air()
    }
}

impl GasEnvironment {
    /// Room-temperature air at one standard atmosphere.
    pub fn air() -> Self {
        Self {
            viscosity: 1.8e-5,
            temperature: 300.0,
            density: 1.1766,
            sound_speed: 343.0,
            acoustic_impedance: 413.0,
            heat_capacity: 1005.0,
            expansion_coeff: 0.0034,
            static_pressure: STANDARD_ATMOSPHERE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("viscosity", self.viscosity)?;
        ensure_positive("temperature", self.temperature)?;
        ensure_positive("density", self.density)?;
        ensure_positive("sound_speed", self.sound_speed)?;
        ensure_positive("acoustic_impedance", self.acoustic_impedance)?;
        ensure_positive("heat_capacity", self.heat_capacity)?;
        ensure_positive("expansion_coeff", self.expansion_coeff)?;
        ensure_positive("static_pressure", self.static_pressure)?;
        Ok(())
    }

    /// Ideal-gas number density p/(k_B T) (1/m³).
    pub fn number_density(&self) -> f64 {
        self.static_pressure / (crate::units::BOLTZMANN * self.temperature)
    }

    /// Acoustic wavelength v/ν (m).
    pub fn acoustic_wavelength(&self, frequency_hz: f64) -> f64 {
        self.sound_speed / frequency_hz
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn paper_microdisk_area_and_mass() {
        let d = derive_geometry(&SensorGeometry::paper_microdisk()).unwrap();
        assert!((d.area - 4.77e-8).abs() / 4.77e-8 < 0.005, "area {}", d.area);
        // "approximately 230 ng"
        assert!((d.total_mass - 2.3e-10).abs() / 2.3e-10 < 0.02, "mass {}", d.total_mass);
        assert!((d.beta_ratio - 82.0 / 148.0).abs() < 1e-15);
    }

    #[test]
    fn full_disk() {
        let g = SensorGeometry {
            minor_radius: 0.0,
            ..SensorGeometry::paper_microdisk()
        };
        let d = derive_geometry(&g).unwrap();
        assert_eq!(d.area, PI * g.major_radius.powi(2));
        assert_eq!(d.beta_ratio, 0.0);
    }

    #[test]
    fn direct_arithmetic_oracle() {
        // R = 100 µm, r = 50 µm, t = 1 µm, ρ = 1000:
        // A = π·7.5e-9 = 2.356194490192345e-8, M = 1e-3·A
        let g = SensorGeometry {
            major_radius: 100e-6,
            minor_radius: 50e-6,
            thickness: 1e-6,
            density: 1000.0,
            substrate_gap: 1e-6,
            active_fraction: 1.0,
        };
        let d = derive_geometry(&g).unwrap();
        assert!((d.area - 2.356_194_490_192_345e-8).abs() < 1e-22);
        assert!((d.total_mass - 2.356_194_490_192_345e-11).abs() < 1e-25);
        assert_eq!(d.beta_ratio, 0.5);
    }

    #[test]
    fn rejects_bad_dimensions() {
        let base = SensorGeometry::paper_microdisk();
        for g in [
            SensorGeometry { thickness: 0.0, ..base },
            SensorGeometry { major_radius: -1.0, ..base },
            SensorGeometry { minor_radius: 200e-6, ..base },
            SensorGeometry { substrate_gap: 0.0, ..base },
            SensorGeometry { active_fraction: 1.5, ..base },
        ] {
            assert!(matches!(derive_geometry(&g), Err(Error::InvalidGeometry(_))));
        }
    }

    #[test]
    fn active_area_is_opt_in() {
        let g = SensorGeometry {
            active_fraction: 0.7,
            ..SensorGeometry::paper_microdisk()
        };
        assert_eq!(derive_geometry(&g).unwrap().area, g.area());
        assert!((g.active_area() - 0.7 * g.area()).abs() < 1e-20);
    }

    #[test]
    fn cavity_q_matches_linewidth() {
        // κ/2π = 112 MHz at 1555.7 nm gives Q ≈ 1.7e6
        let c = OpticalCavity::paper_critical();
        let q = c.loaded_q();
        assert!(q > 1.6e6 && q < 1.9e6, "Q = {q}");
        assert!((c.intrinsic_q() - 2.0 * q).abs() / q < 1e-12);
    }

    #[test]
    fn mode_derived_quantities() {
        let m = MechanicalMode::paper_flapping();
        m.validate().unwrap();
        assert!((angular_to_cyclic(m.total_damping()) - 1430.0).abs() < 1e-9);
        assert!((m.spring_constant() - 110e-12 * m.resonance_freq.powi(2)).abs() < 1e-12);
        let bad = MechanicalMode { effective_mass: 0.0, ..m };
        assert!(matches!(bad.validate(), Err(Error::InvalidMode(_))));
    }

    proptest! {
        #[test]
        fn geometry_scale_covariance(s in 0.01f64..100.0) {
            let g = SensorGeometry::paper_microdisk();
            let d0 = derive_geometry(&g).unwrap();
            let d1 = derive_geometry(&g.scaled(s)).unwrap();
            prop_assert!((d1.area / d0.area - s * s).abs() < 1e-12 * s * s);
            prop_assert!((d1.total_mass / d0.total_mass - s.powi(3)).abs() < 1e-12 * s.powi(3));
            prop_assert!((d1.beta_ratio - d0.beta_ratio).abs() < 1e-15);
        }
    }
}
