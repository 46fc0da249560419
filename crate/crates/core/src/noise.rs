//! Thermal and measurement noise, noise-equivalent pressure, synthetic
//! noise spectra and derived figures of merit.
//!
//! Force noise in the pressure budget follows the sensor literature
//! convention S_F = 2(mγ/2π + µl)k_BT per Hz, with γ angular and l the
//! cyclic-convention viscous length. This reproduces the quoted NEP
//! endpoints. The time-domain simulator instead uses the
//! fluctuation-dissipation value 4mγk_BT (see [`fdt_force_psd`]), which is
//! 4π larger; the two are never mixed inside one quantity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{ensure_non_negative, ensure_positive, invalid, Error, Result};
use crate::model::{GasEnvironment, MechanicalMode, OpticalCavity};
use crate::response::{mech_susceptibility, om_susceptibility, CouplingKind};
use crate::spectrum::{Convention, SpectrumSeries};
use crate::units::BOLTZMANN;

/// S_T = 2(m·γ/2π + µ·l)k_BT (N²/Hz). `mode.intrinsic_damping` supplies γ;
/// the gas contribution enters only through `gas_l`.
pub fn thermal_force_psd(mode: &MechanicalMode, gas_l: f64, gas: &GasEnvironment) -> Result<f64> {
    ensure_positive("temperature", gas.temperature)?;
    ensure_non_negative("gas_l", gas_l)?;
    ensure_non_negative("viscosity", gas.viscosity)?;
    ensure_non_negative("intrinsic_damping", mode.intrinsic_damping)?;
    let m_gamma = mode.effective_mass * mode.intrinsic_damping / TAU;
    Ok(2.0 * (m_gamma + gas.viscosity * gas_l) * BOLTZMANN * gas.temperature)
}

/// Paper-convention force PSD 2mγ_cyc k_BT for an angular damping rate.
pub fn mode_force_psd(mass: f64, gamma: f64, temperature: f64) -> f64 {
    2.0 * mass * gamma / TAU * BOLTZMANN * temperature
}

/// Fluctuation-dissipation single-sided force PSD 4mγk_BT (N²/Hz) for an
/// angular damping rate. Integrating S_F|χ_m|² over cyclic frequency gives
/// k_BT/k exactly.
pub fn fdt_force_psd(mass: f64, gamma: f64, temperature: f64) -> f64 {
    4.0 * mass * gamma * BOLTZMANN * temperature
}

/// The three pressure-referred contributions under the square root of
/// the NEP (Pa²/Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NepTerms {
    pub intrinsic: f64,
    pub gas: f64,
    /// Measurement (shot) noise; infinite when |χ| vanishes.
    pub shot: f64,
}

impl NepTerms {
    pub fn total(&self) -> f64 {
        self.intrinsic + self.gas + self.shot
    }

    pub fn nep(&self) -> f64 {
        self.total().sqrt()
    }
}

fn pressure_scale(mode: &MechanicalMode, area: f64) -> Result<f64> {
    ensure_positive("area", area)?;
    ensure_positive("participation_ratio", mode.participation_ratio)?;
    let zeta = mode.overlap.abs();
    ensure_positive("overlap", zeta)?;
    Ok(mode.participation_ratio * zeta * area)
}

/// Components of P_min² for the mode's own damping split and the cavity's
/// detected photon number ηN. ηN = 0 omits the shot term.
pub fn nep_terms(
    mode: &MechanicalMode,
    gas: &GasEnvironment,
    cavity: &OpticalCavity,
    area: f64,
    kind: CouplingKind,
    omega: f64,
    detuning: f64,
) -> Result<NepTerms> {
    mode.validate()?;
    cavity.validate()?;
    ensure_non_negative("temperature", gas.temperature)?;
    let s2 = pressure_scale(mode, area)?.powi(2);
    let m = mode.effective_mass;
    let t = gas.temperature;
    let intrinsic = mode_force_psd(m, mode.intrinsic_damping, t) / s2;
    let gas_term = mode_force_psd(m, mode.gas_damping, t) / s2;
    let n = cavity.detected_photon_number();
    let shot = if n > 0.0 {
        let chi = om_susceptibility(cavity, mode, kind, omega, detuning)?.norm_sqr();
        if chi > 0.0 {
            1.0 / (n * chi) / s2
        } else {
            f64::INFINITY
        }
    } else {
        0.0
    };
    if intrinsic + gas_term + shot == 0.0 {
        return Err(Error::DegenerateMode(
            "no thermal damping and no photons: the noise floor is identically zero".into(),
        ));
    }
    Ok(NepTerms {
        intrinsic,
        gas: gas_term,
        shot,
    })
}

/// Noise-equivalent pressure
/// P_min = √(2(µl + mγ/2π)k_BT + 1/(ηN|χ(ω,Δ)|²)) / (rζA) in Pa/√Hz.
/// The mode's `gas_damping` carries µl (see
/// [`crate::damping::gas_damping_rate`]).
pub fn nep(
    mode: &MechanicalMode,
    gas: &GasEnvironment,
    cavity: &OpticalCavity,
    area: f64,
    kind: CouplingKind,
    omega: f64,
    detuning: f64,
) -> Result<f64> {
    Ok(nep_terms(mode, gas, cavity, area, kind, omega, detuning)?.nep())
}

/// P_min = √(τ/SNR)·P_applied for a power SNR measured over time τ.
pub fn nep_from_snr(applied_pressure: f64, snr_power: f64, integration_time: f64) -> Result<f64> {
    ensure_non_negative("applied_pressure", applied_pressure)?;
    ensure_positive("snr_power", snr_power)?;
    ensure_positive("integration_time", integration_time)?;
    Ok((integration_time / snr_power).sqrt() * applied_pressure)
}

/// 1/f excess noise A₁/f^α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneOverF {
    /// Level at 1 Hz, in the units of the spectrum it is added to.
    pub amplitude: f64,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
}

fn default_exponent() -> f64 {
    1.0
}

impl OneOverF {
    pub fn at(&self, f_hz: f64) -> f64 {
        if self.amplitude == 0.0 {
            0.0
        } else {
            self.amplitude / f_hz.powf(self.exponent)
        }
    }
}

/// Which contribution dominates the budget at a frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DominantTerm {
    Gas,
    Intrinsic,
    Shot,
    OneOverF,
}

/// Pressure-referred noise components at one frequency (Pa²/Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseComponents {
    pub intrinsic: f64,
    pub gas: f64,
    pub shot: f64,
    pub oneoverf: f64,
}

impl NoiseComponents {
    pub fn total(&self) -> f64 {
        self.intrinsic + self.gas + self.shot + self.oneoverf
    }

    pub fn dominant(&self) -> DominantTerm {
        [
            (DominantTerm::Gas, self.gas),
            (DominantTerm::Intrinsic, self.intrinsic),
            (DominantTerm::Shot, self.shot),
            (DominantTerm::OneOverF, self.oneoverf),
        ]
        .into_iter()
        .fold((DominantTerm::Gas, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
        .0
    }
}

/// Pressure-referred noise budget of one mode read out through a cavity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseBudget {
    /// Intrinsic thermal force PSD (N²/Hz).
    pub s_t_intrinsic: f64,
    /// Gas-collision force PSD (N²/Hz).
    pub s_t_gas: f64,
    /// 1/f term, amplitude in Pa²/Hz at 1 Hz.
    pub oneoverf: OneOverF,
    mode: MechanicalMode,
    cavity: OpticalCavity,
    kind: CouplingKind,
    detuning: f64,
    area: f64,
}

/// Outcome of a budget evaluation over a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    /// Best NEP on the grid (Pa/√Hz).
    pub nep: f64,
    /// Frequency of the best NEP (Hz).
    pub best_frequency: f64,
    /// Contiguous band around the best point where thermal force noise
    /// exceeds measurement and 1/f noise (Hz). Falls back to the grid
    /// cell around the optimum when no such band exists.
    pub band: (f64, f64),
    pub dominant_term: DominantTerm,
}

impl NoiseBudget {
    pub fn new(
        mode: &MechanicalMode,
        gas: &GasEnvironment,
        cavity: &OpticalCavity,
        kind: CouplingKind,
        detuning: f64,
        area: f64,
        oneoverf: OneOverF,
    ) -> Result<Self> {
        mode.validate()?;
        cavity.validate()?;
        pressure_scale(mode, area)?;
        ensure_non_negative("oneoverf.amplitude", oneoverf.amplitude)?;
        let t = gas.temperature;
        Ok(Self {
            s_t_intrinsic: mode_force_psd(mode.effective_mass, mode.intrinsic_damping, t),
            s_t_gas: mode_force_psd(mode.effective_mass, mode.gas_damping, t),
            oneoverf,
            mode: *mode,
            cavity: *cavity,
            kind,
            detuning,
            area,
        })
    }

    fn scale2(&self) -> f64 {
        (self.mode.participation_ratio * self.mode.overlap.abs() * self.area).powi(2)
    }

    /// Shot noise referred to pressure: 1/(ηN|χ|²(rζA)²).
    pub fn shot_equiv(&self, f_hz: f64) -> Result<f64> {
        let n = self.cavity.detected_photon_number();
        if n == 0.0 {
            return Ok(0.0);
        }
        let chi = om_susceptibility(&self.cavity, &self.mode, self.kind, TAU * f_hz, self.detuning)?;
        let c2 = chi.norm_sqr();
        Ok(if c2 > 0.0 {
            1.0 / (n * c2 * self.scale2())
        } else {
            f64::INFINITY
        })
    }

    pub fn components(&self, f_hz: f64) -> Result<NoiseComponents> {
        let s2 = self.scale2();
        Ok(NoiseComponents {
            intrinsic: self.s_t_intrinsic / s2,
            gas: self.s_t_gas / s2,
            shot: self.shot_equiv(f_hz)?,
            oneoverf: self.oneoverf.at(f_hz),
        })
    }

    /// Total S_PP (Pa²/Hz).
    pub fn total_s_pp(&self, f_hz: f64) -> Result<f64> {
        Ok(self.components(f_hz)?.total())
    }

    /// Components evaluated in parallel over `f_grid` (Hz), in grid order.
    pub fn evaluate(&self, f_grid: &[f64]) -> Result<Vec<NoiseComponents>> {
        check_grid(f_grid)?;
        f_grid.par_iter().map(|&f| self.components(f)).collect()
    }

    /// NEP spectrum √S_PP over `f_grid`.
    pub fn nep_spectrum(&self, f_grid: &[f64]) -> Result<SpectrumSeries> {
        let values = self.evaluate(f_grid)?.iter().map(|c| c.total().sqrt()).collect();
        SpectrumSeries::real_hz(f_grid.to_vec(), values, "Pa/sqrt(Hz)", Convention::SingleSidedHz)
    }

    pub fn report(&self, f_grid: &[f64]) -> Result<SensitivityReport> {
        let comps = self.evaluate(f_grid)?;
        let (best, total) = comps
            .iter()
            .map(NoiseComponents::total)
            .enumerate()
            .fold((0, f64::INFINITY), |b, (i, v)| if v < b.1 { (i, v) } else { b });
        if !total.is_finite() {
            return Err(Error::Singular("noise budget is infinite over the whole grid".into()));
        }
        let thermal_wins = |c: &NoiseComponents| c.intrinsic + c.gas > c.shot + c.oneoverf;
        let band = if thermal_wins(&comps[best]) {
            let mut lo = best;
            while lo > 0 && thermal_wins(&comps[lo - 1]) {
                lo -= 1;
            }
            let mut hi = best;
            while hi + 1 < comps.len() && thermal_wins(&comps[hi + 1]) {
                hi += 1;
            }
            (lo, hi)
        } else {
            (best, best)
        };
        let band = if band.0 == band.1 {
            (best.saturating_sub(1), (best + 1).min(f_grid.len() - 1))
        } else {
            band
        };
        let band = if band.0 == band.1 {
            // single-point grid
            let f = f_grid[best];
            (f * (1.0 - 1e-9), f * (1.0 + 1e-9))
        } else {
            (f_grid[band.0], f_grid[band.1])
        };
        Ok(SensitivityReport {
            nep: total.sqrt(),
            best_frequency: f_grid[best],
            band,
            dominant_term: comps[best].dominant(),
        })
    }
}

fn check_grid(f_grid: &[f64]) -> Result<()> {
    if f_grid.is_empty() {
        return Err(Error::InsufficientData("frequency grid is empty".into()));
    }
    if f_grid.iter().any(|f| !(f.is_finite() && *f > 0.0)) || f_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("f_grid", "must be positive and strictly increasing"));
    }
    Ok(())
}

/// A mode contributing a thermomechanical peak to a detector-referred
/// spectrum: PSD = gain·S_F·|χ_m|².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralMode {
    pub mode: MechanicalMode,
    pub kind: CouplingKind,
    /// Transduction gain from displacement PSD (m²/Hz) to detector units.
    pub gain: f64,
}

impl SpectralMode {
    /// Gain such that a shot floor of 1 corresponds to the cavity's
    /// measurement noise: ηN|χ/χ_m|² in the low-frequency limit.
    pub fn from_cavity(mode: MechanicalMode, cavity: &OpticalCavity, kind: CouplingKind, detuning: f64) -> Self {
        let g = crate::response::optical_gain_lowfreq(cavity, kind, detuning);
        Self {
            mode,
            kind,
            gain: cavity.detected_photon_number() * g * g,
        }
    }

    /// Gas and intrinsic thermomechanical contributions at `f_hz`.
    pub fn thermomechanical(&self, f_hz: f64, temperature: f64) -> Result<(f64, f64)> {
        let chi2 = mech_susceptibility(&self.mode, TAU * f_hz)?.norm_sqr();
        let m = self.mode.effective_mass;
        Ok((
            self.gain * mode_force_psd(m, self.mode.gas_damping, temperature) * chi2,
            self.gain * mode_force_psd(m, self.mode.intrinsic_damping, temperature) * chi2,
        ))
    }

    /// Peak-to-floor gain: the gain that puts the on-resonance
    /// thermomechanical PSD `ratio_db` above `shot_floor`.
    pub fn gain_for_peak_ratio(
        mode: &MechanicalMode,
        temperature: f64,
        shot_floor: f64,
        ratio_db: f64,
    ) -> Result<f64> {
        ensure_positive("shot_floor", shot_floor)?;
        let unit = SpectralMode {
            mode: *mode,
            kind: CouplingKind::Dispersive,
            gain: 1.0,
        };
        let (g, i) = unit.thermomechanical(mode.resonance_hz(), temperature)?;
        ensure_positive("peak thermomechanical level", g + i)?;
        Ok(shot_floor * crate::units::db_to_power_ratio(ratio_db) / (g + i))
    }
}

/// Synthesised spectrum and its additive components, all on one grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesizedSpectrum {
    pub total: SpectrumSeries,
    pub shot: Vec<f64>,
    pub oneoverf: Vec<f64>,
    /// Per-mode (gas, intrinsic) contributions.
    pub modes: Vec<(Vec<f64>, Vec<f64>)>,
}

/// shot + A₁/f^α + Σ_k gain_k·S_F,k·|χ_m,k|², with each mode split into gas
/// and intrinsic Lorentzians whose areas are in the ratio γ_gas/γ.
pub fn synthesize_noise_spectrum(
    modes: &[SpectralMode],
    shot_floor: f64,
    oneoverf: Option<OneOverF>,
    temperature: f64,
    f_grid: &[f64],
    unit: &str,
) -> Result<SynthesizedSpectrum> {
    check_grid(f_grid)?;
    ensure_non_negative("shot_floor", shot_floor)?;
    ensure_non_negative("temperature", temperature)?;
    for m in modes {
        m.mode.validate()?;
        ensure_non_negative("gain", m.gain)?;
    }
    let of = oneoverf.unwrap_or(OneOverF {
        amplitude: 0.0,
        exponent: 1.0,
    });
    let per_mode: Vec<(Vec<f64>, Vec<f64>)> = modes
        .iter()
        .map(|m| {
            let pairs: Result<Vec<(f64, f64)>> =
                f_grid.par_iter().map(|&f| m.thermomechanical(f, temperature)).collect();
            pairs.map(|p| p.into_iter().unzip())
        })
        .collect::<Result<_>>()?;
    let shot = vec![shot_floor; f_grid.len()];
    let oneoverf: Vec<f64> = f_grid.iter().map(|&f| of.at(f)).collect();
    let total = (0..f_grid.len())
        .map(|i| {
            shot[i] + oneoverf[i] + per_mode.iter().map(|(g, n)| g[i] + n[i]).sum::<f64>()
        })
        .collect();
    Ok(SynthesizedSpectrum {
        total: SpectrumSeries::real_hz(f_grid.to_vec(), total, unit, Convention::SingleSidedHz)?,
        shot,
        oneoverf,
        modes: per_mode,
    })
}

/// Band (Hz) around a mode's resonance where its thermomechanical PSD
/// exceeds a flat shot floor, solved in closed form from
/// (ω_m² − ω²)² + γ²ω² = gain·S_F/(m²·floor). `None` if they never cross.
pub fn resonant_bandwidth(mode: &SpectralMode, shot_floor: f64, temperature: f64) -> Result<Option<(f64, f64)>> {
    mode.mode.validate()?;
    ensure_positive("shot_floor", shot_floor)?;
    let m = mode.mode.effective_mass;
    let g = mode.mode.total_damping();
    let w0 = mode.mode.resonance_freq;
    let s_f = mode_force_psd(m, g, temperature);
    let q = mode.gain * s_f / (m * m * shot_floor);
    let b = 2.0 * w0 * w0 - g * g;
    let disc = g.powi(4) - 4.0 * w0 * w0 * g * g + 4.0 * q;
    if !(disc > 0.0) {
        return Ok(None);
    }
    let root = disc.sqrt();
    let y_hi = 0.5 * (b + root);
    let y_lo = 0.5 * (b - root);
    if y_hi <= 0.0 {
        return Ok(None);
    }
    let f_lo = if y_lo > 0.0 { y_lo.sqrt() / TAU } else { 0.0 };
    Ok(Some((f_lo, y_hi.sqrt() / TAU)))
}

/// LDR = 20·log₁₀(P_max·√τ/P_min) in dB.
pub fn ldr(p_min: f64, p_max: f64, integration_time: f64) -> Result<f64> {
    ensure_positive("p_min", p_min)?;
    ensure_positive("p_max", p_max)?;
    ensure_positive("integration_time", integration_time)?;
    Ok(20.0 * (p_max * integration_time.sqrt() / p_min).log10())
}

/// Force sensitivity NEP·A (N/√Hz).
pub fn force_sensitivity(nep: f64, area: f64) -> Result<f64> {
    ensure_non_negative("nep", nep)?;
    ensure_non_negative("area", area)?;
    Ok(nep * area)
}
