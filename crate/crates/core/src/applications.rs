//! Application-level estimators: photoacoustic trace-gas detection,
//! cell-vibration sensing, optomechanical cooling, modeshape integrals and
//! the Rayleigh-length beam analysis.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, invalid, Error, Result};
use crate::model::{GasEnvironment, MechanicalMode, OpticalCavity, SensorGeometry};
use crate::units::{cm_to_m, per_cm_to_per_m, per_m3_to_per_cm3};

/// Excitation pulse for photoacoustic generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserPulse {
    /// Pulse energy E (J).
    pub energy: f64,
    /// Pulse duration τ_L (s).
    pub duration: f64,
    /// Beam radius R_s (m).
    pub beam_radius: f64,
    /// Irradiation length l (m). Only used for the thin-medium check.
    #[serde(default)]
    pub irradiation_length: Option<f64>,
}

impl LaserPulse {
    /// 1 µJ, 1 µs, 50 µm beam.
    pub fn paper() -> Self {
        Self {
            energy: 1e-6,
            duration: 1e-6,
            beam_radius: 50e-6,
            irradiation_length: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("pulse.energy", self.energy)?;
        ensure_positive("pulse.duration", self.duration)?;
        ensure_positive("pulse.beam_radius", self.beam_radius)?;
        if let Some(l) = self.irradiation_length {
            ensure_positive("pulse.irradiation_length", l)?;
        }
        Ok(())
    }

    /// Effective source radius R = vτ_L (m).
    pub fn source_radius(&self, gas: &GasEnvironment) -> f64 {
        gas.sound_speed * self.duration
    }

    /// True when sound leaves the irradiated zone within the pulse, R_s < vτ_L.
    pub fn is_valid(&self, gas: &GasEnvironment) -> bool {
        self.beam_radius < self.source_radius(gas)
    }

    fn check_valid(&self, gas: &GasEnvironment) -> Result<()> {
        self.validate()?;
        if !self.is_valid(gas) {
            return Err(Error::OutOfRange(format!(
                "beam radius {:.3e} m is not below the source radius v·τ_L = {:.3e} m",
                self.beam_radius,
                self.source_radius(gas)
            )));
        }
        Ok(())
    }
}

/// Absorption line of the target gas, stored in SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasLine {
    /// Line intensity S (m/molec).
    pub line_intensity: f64,
    /// Linewidth γ_G (1/m).
    pub linewidth: f64,
    /// Line wavelength (m).
    pub wavelength: f64,
}

impl GasLine {
    /// From HITRAN-style units: S in cm⁻¹/(molec·cm⁻²), γ_G in cm⁻¹.
    pub fn from_hitran(intensity_cm: f64, linewidth_per_cm: f64, wavelength: f64) -> Result<Self> {
        let line = Self {
            line_intensity: cm_to_m(intensity_cm),
            linewidth: per_cm_to_per_m(linewidth_per_cm),
            wavelength,
        };
        line.validate()?;
        Ok(line)
    }

    /// CO₂ line at 4329.93 nm.
    pub fn co2_4330nm() -> Self {
        Self {
            line_intensity: cm_to_m(4.7e-19),
            linewidth: per_cm_to_per_m(0.06),
            wavelength: 4329.93e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("line.line_intensity", self.line_intensity)?;
        ensure_positive("line.linewidth", self.linewidth)?;
        ensure_positive("line.wavelength", self.wavelength)
    }

    /// Absorption coefficient α = cS/(2γ_G) (1/m) for number density c (1/m³).
    pub fn absorption_coefficient(&self, number_density: f64) -> f64 {
        number_density * self.line_intensity / (2.0 * self.linewidth)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhotoacousticSignal {
    /// Peak displacement U_s at the sensor (m).
    pub displacement: f64,
    /// Peak acoustic pressure (Pa).
    pub peak_pressure: f64,
    pub warnings: Vec<String>,
}

/// Peak displacement and pressure at distance `r` from a pulsed
/// photoacoustic source in a thin absorbing medium.
pub fn photoacoustic_pressure(
    gas: &GasEnvironment,
    pulse: &LaserPulse,
    absorption: f64,
    r: f64,
) -> Result<PhotoacousticSignal> {
    gas.validate()?;
    pulse.check_valid(gas)?;
    ensure_non_negative("absorption", absorption)?;
    if !(r.is_finite() && r > 0.0) {
        return Err(invalid("r_dist", format!("distance must be > 0, got {r}")));
    }
    let mut warnings = Vec::new();
    if let Some(l) = pulse.irradiation_length {
        let al = absorption * l;
        if al > 0.1 {
            warnings.push(format!("thin-medium approximation violated: αl = {al:.3}"));
        }
    }
    let displacement = gas.expansion_coeff * pulse.energy * absorption
        / (2.0 * PI * gas.density * gas.heat_capacity * r);
    let peak_pressure = gas.sound_speed * gas.density * displacement / pulse.duration;
    Ok(PhotoacousticSignal {
        displacement,
        peak_pressure,
        warnings,
    })
}

/// Pressure effective over one mechanical period, P_peak·τ_L·ω_m/2π.
pub fn effective_pressure(peak: f64, pulse_duration: f64, omega_m: f64) -> f64 {
    peak * pulse_duration * omega_m / (2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionLimit {
    /// Minimum number density (1/m³).
    pub number_density_si: f64,
    /// Minimum number density (molec/cm³).
    pub number_density: f64,
    /// Mixing ratio relative to the ideal-gas density of the host gas (ppb).
    pub ppb: f64,
}

/// Minimum detectable number density for a sensor resolving `p_eff_min`
/// at mechanical frequency `omega_m`.
pub fn min_concentration(
    gas: &GasEnvironment,
    line: &GasLine,
    pulse: &LaserPulse,
    p_eff_min: f64,
    r: f64,
    omega_m: f64,
) -> Result<DetectionLimit> {
    gas.validate()?;
    line.validate()?;
    pulse.check_valid(gas)?;
    ensure_non_negative("p_eff_min", p_eff_min)?;
    ensure_positive("r_dist", r)?;
    ensure_positive("omega_m", omega_m)?;
    let c = 8.0 * PI * PI * line.linewidth * gas.heat_capacity * r
        / (gas.sound_speed * gas.expansion_coeff * pulse.energy * line.line_intensity * omega_m)
        * p_eff_min;
    Ok(DetectionLimit {
        number_density_si: c,
        number_density: per_m3_to_per_cm3(c),
        ppb: c / gas.number_density() * 1e9,
    })
}

/// Pressure radiated by a surface vibrating with amplitude `d` at `nu` Hz,
/// P = πνZd.
pub fn cell_vibration_pressure(nu: f64, d: f64, gas: &GasEnvironment) -> f64 {
    PI * nu * gas.acoustic_impedance * d
}

/// Smallest vibration amplitude resolvable with noise-equivalent pressure
/// `nep` (Pa/√Hz) in `bandwidth` Hz.
pub fn detectable_displacement(nep: f64, nu: f64, gas: &GasEnvironment, bandwidth: f64) -> f64 {
    nep * bandwidth.sqrt() / (PI * nu * gas.acoustic_impedance)
}

/// Optomechanical cooperativity 4g₀²N/(κγ).
pub fn cooperativity(cavity: &OpticalCavity, mode: &MechanicalMode) -> Result<f64> {
    cavity.validate()?;
    let kappa = cavity.total_decay();
    let gamma = mode.total_damping();
    ensure_positive("kappa", kappa)?;
    ensure_positive("gamma", gamma)?;
    Ok(4.0 * cavity.vacuum_coupling.powi(2) * cavity.photon_number / (kappa * gamma))
}

/// Broadened linewidth γ(1 + C). This is the maximal broadening available
/// at cooperativity C, so it is an upper bound.
pub fn cooled_linewidth(gamma: f64, c: f64) -> Result<f64> {
    ensure_non_negative("cooperativity", c)?;
    Ok(gamma * (1.0 + c))
}

/// Peak of a thermomechanical Lorentzian after broadening from `gamma` to
/// `gamma_eff`, with no noise added by the cooling.
pub fn flattened_peak(peak: f64, gamma: f64, gamma_eff: f64) -> f64 {
    peak * gamma / gamma_eff
}

/// Sampled mechanical modeshape over the resonator surface.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeshapeGrid {
    points: Vec<[f64; 2]>,
    u: Vec<f64>,
    areas: Vec<f64>,
}

const NORM_TOL: f64 = 1e-9;

impl ModeshapeGrid {
    /// Builds a grid whose displacement is already normalized to max |u| = 1.
    pub fn new(points: Vec<[f64; 2]>, u: Vec<f64>, areas: Vec<f64>) -> Result<Self> {
        let g = Self::unchecked(points, u, areas)?;
        let m = g.max_abs();
        if (m - 1.0).abs() > NORM_TOL {
            return Err(invalid("u", format!("max |u| must be 1, got {m}")));
        }
        Ok(g)
    }

    /// Builds a grid and rescales u so that max |u| = 1.
    pub fn normalized(points: Vec<[f64; 2]>, u: Vec<f64>, areas: Vec<f64>) -> Result<Self> {
        let mut g = Self::unchecked(points, u, areas)?;
        let m = g.max_abs();
        if m == 0.0 {
            return Err(Error::DegenerateMode("modeshape is identically zero".into()));
        }
        g.u.iter_mut().for_each(|v| *v /= m);
        Ok(g)
    }

    fn unchecked(points: Vec<[f64; 2]>, u: Vec<f64>, areas: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InsufficientData("modeshape grid is empty".into()));
        }
        if u.len() != points.len() || areas.len() != points.len() {
            return Err(Error::GridMismatch(format!(
                "{} points, {} displacements, {} areas",
                points.len(),
                u.len(),
                areas.len()
            )));
        }
        if points.iter().flatten().chain(&u).any(|v| !v.is_finite()) {
            return Err(invalid("modeshape", "non-finite sample"));
        }
        if let Some(a) = areas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(invalid("cell_area_m2", format!("cell areas must be > 0, got {a}")));
        }
        Ok(Self { points, u, areas })
    }

    /// Rigid piston u ≡ 1 on an annulus.
    pub fn piston(geometry: &SensorGeometry, n_r: usize, n_theta: usize) -> Result<Self> {
        Self::polar_annulus(geometry, n_r, n_theta, |_, _| 1.0)
    }

    /// Radially flapping shape with a nodal circle at `node_radius`:
    /// u ∝ sign(ρ − ρ_n)·|ρ − ρ_n|^p. The two rims move in antiphase.
    pub fn radial_flapping(
        geometry: &SensorGeometry,
        node_radius: f64,
        exponent: f64,
        n_r: usize,
        n_theta: usize,
    ) -> Result<Self> {
        let (r_in, r_out) = (geometry.minor_radius, geometry.major_radius);
        if !(node_radius > r_in && node_radius < r_out) {
            return Err(invalid("node_radius", "node must lie inside the annulus"));
        }
        ensure_positive("exponent", exponent)?;
        let arm = (r_out - node_radius).max(node_radius - r_in);
        Self::polar_annulus(geometry, n_r, n_theta, |rho, _| {
            let s = (rho - node_radius) / arm;
            s.signum() * s.abs().powf(exponent)
        })
    }

    /// Paper resonator flapping shape: node at 124 µm, exponent 0.7.
    pub fn paper_flapping(geometry: &SensorGeometry) -> Result<Self> {
        Self::radial_flapping(geometry, 124e-6, 0.7, 400, 64)
    }

    /// Samples `f(ρ, θ)` at the centres of an n_r × n_θ polar grid over the
    /// annulus. Cell areas are exact, so they sum to the annulus area.
    pub fn polar_annulus(
        geometry: &SensorGeometry,
        n_r: usize,
        n_theta: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        geometry.validate()?;
        if n_r == 0 || n_theta == 0 {
            return Err(invalid("grid", "need at least one cell in each direction"));
        }
        let (r_in, r_out) = (geometry.minor_radius, geometry.major_radius);
        let dr = (r_out - r_in) / n_r as f64;
        let dth = 2.0 * PI / n_theta as f64;
        let n = n_r * n_theta;
        let (mut points, mut u, mut areas) =
            (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n_r {
            let r0 = r_in + i as f64 * dr;
            let r1 = r0 + dr;
            let rho = 0.5 * (r0 + r1);
            let area = 0.5 * (r1 * r1 - r0 * r0) * dth;
            for j in 0..n_theta {
                let th = (j as f64 + 0.5) * dth;
                points.push([rho * th.cos(), rho * th.sin()]);
                u.push(f(rho, th));
                areas.push(area);
            }
        }
        Self::normalized(points, u, areas)
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn displacement(&self) -> &[f64] {
        &self.u
    }

    pub fn cell_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Checks that the cells tile a resonator of area `expected` (m²).
    pub fn check_area(&self, expected: f64) -> Result<()> {
        let total = self.total_area();
        if ((total - expected) / expected).abs() > 1e-6 {
            return Err(Error::GridMismatch(format!(
                "cell areas sum to {total:.6e} m², resonator area is {expected:.6e} m²"
            )));
        }
        Ok(())
    }

    /// Reads `x_m,y_m,u,cell_area_m2` rows and normalizes u.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Data(format!("modeshape CSV: missing column `{name}`")))
        };
        let (ix, iy, iu, ia) = (col("x_m")?, col("y_m")?, col("u")?, col("cell_area_m2")?);
        let (mut points, mut u, mut areas) = (Vec::new(), Vec::new(), Vec::new());
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = k + 2;
            let get = |i: usize| -> Result<f64> {
                let s = rec.get(i).unwrap_or("");
                s.parse::<f64>().map_err(|_| {
                    Error::Data(format!("modeshape CSV line {line}: cannot parse `{s}`"))
                })
            };
            points.push([get(ix)?, get(iy)?]);
            u.push(get(iu)?);
            areas.push(get(ia)?);
        }
        Self::normalized(points, u, areas)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x_m", "y_m", "u", "cell_area_m2"])?;
        for ((p, u), a) in self.points.iter().zip(&self.u).zip(&self.areas) {
            w.write_record([
                format!("{:e}", p[0]),
                format!("{:e}", p[1]),
                format!("{u:e}"),
                format!("{a:e}"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Acoustic pressure amplitude δp sampled on the points of a modeshape grid,
/// normalized to its antinode.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureField {
    pub points: Vec<[f64; 2]>,
    pub values: Vec<f64>,
}

impl PressureField {
    /// Plane wave at normal incidence, δp ≡ 1.
    pub fn uniform(shape: &ModeshapeGrid) -> Self {
        Self::from_fn(shape, |_, _| 1.0)
    }

    pub fn from_fn(shape: &ModeshapeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            points: shape.points.clone(),
            values: shape.points.iter().map(|p| f(p[0], p[1])).collect(),
        }
    }
}

/// Spatial overlap ζ = (1/A)·Σ u·δp·dA. The sign is kept: a negative value
/// means the mode is driven in antiphase with the pressure.
pub fn mode_overlap(shape: &ModeshapeGrid, field: &PressureField) -> Result<f64> {
    if field.values.len() != shape.len() || field.points.len() != shape.len() {
        return Err(Error::GridMismatch(format!(
            "modeshape has {} cells, pressure field has {}",
            shape.len(),
            field.values.len()
        )));
    }
    let scale = shape
        .points
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for (i, (a, b)) in shape.points.iter().zip(&field.points).enumerate() {
        if (a[0] - b[0]).abs() > 1e-9 * scale || (a[1] - b[1]).abs() > 1e-9 * scale {
            return Err(Error::GridMismatch(format!("point {i} is not co-registered")));
        }
    }
    let weighted: f64 = shape
        .u
        .iter()
        .zip(&field.values)
        .zip(&shape.areas)
        .map(|((u, p), a)| u * p * a)
        .sum();
    Ok(weighted / shape.total_area())
}

/// Effective mass tρ·Σ|u|dA (kg).
pub fn effective_mass(shape: &ModeshapeGrid, thickness: f64, density: f64) -> Result<f64> {
    ensure_positive("thickness", thickness)?;
    ensure_positive("density", density)?;
    let integral: f64 = shape.u.iter().zip(&shape.areas).map(|(u, a)| u.abs() * a).sum();
    Ok(thickness * density * integral)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayleighInput {
    BeamRadius(f64),
    RayleighLength(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayleighResult {
    pub beam_radius: f64,
    pub rayleigh_length: f64,
    pub wavelength: f64,
}

/// Relates beam waist and Rayleigh length, z_R = πw²/λ, solving for
/// whichever one is not given.
pub fn rayleigh_analysis(input: RayleighInput, wavelength: f64) -> Result<RayleighResult> {
    ensure_positive("wavelength", wavelength)?;
    let (w, z) = match input {
        RayleighInput::BeamRadius(w) => {
            ensure_positive("beam_radius", w)?;
            (w, PI * w * w / wavelength)
        }
        RayleighInput::RayleighLength(z) => {
            ensure_positive("rayleigh_length", z)?;
            ((z * wavelength / PI).sqrt(), z)
        }
    };
    Ok(RayleighResult {
        beam_radius: w,
        rayleigh_length: z,
        wavelength,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::cyclic_to_angular;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn photoacoustic_reference_case() {
        let gas = GasEnvironment::air();
        let s = photoacoustic_pressure(&gas, &LaserPulse::paper(), 1e-3, 100e-6).unwrap();
        // direct arithmetic in double precision
        assert!(rel(s.displacement, 4.576191002428315e-12) < 1e-12);
        assert!(rel(s.peak_pressure, 1.8468307923758043e-3) < 1e-12);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn photoacoustic_trivial_cases() {
        let gas = GasEnvironment::air();
        let p = LaserPulse::paper();
        assert_eq!(photoacoustic_pressure(&gas, &p, 0.0, 1e-4).unwrap().peak_pressure, 0.0);
        let near = photoacoustic_pressure(&gas, &p, 0.5, 1e-4).unwrap().peak_pressure;
        let far = photoacoustic_pressure(&gas, &p, 0.5, 2e-4).unwrap().peak_pressure;
        assert!(rel(far, near / 2.0) < 1e-14);
        assert!(photoacoustic_pressure(&gas, &p, 0.5, 0.0).is_err());
    }

    #[test]
    fn photoacoustic_guards() {
        let gas = GasEnvironment::air();
        let wide = LaserPulse {
            beam_radius: 1e-3,
            ..LaserPulse::paper()
        };
        assert!(!wide.is_valid(&gas));
        assert!(matches!(
            photoacoustic_pressure(&gas, &wide, 1.0, 1e-4),
            Err(Error::OutOfRange(_))
        ));
        let thick = LaserPulse {
            irradiation_length: Some(1.0),
            ..LaserPulse::paper()
        };
        let s = photoacoustic_pressure(&gas, &thick, 0.5, 1e-4).unwrap();
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn effective_pressure_examples() {
        assert!(rel(effective_pressure(3.0, 1.0, 2.0 * PI), 3.0) < 1e-15);
        let factor = effective_pressure(1.0, 1e-6, cyclic_to_angular(318e3));
        assert!(rel(factor, 0.318) < 1e-12);
        assert_eq!(effective_pressure(0.0, 1e-6, 1e6), 0.0);
    }

    fn paper_limit(p: f64, energy: f64) -> DetectionLimit {
        let pulse = LaserPulse {
            energy,
            ..LaserPulse::paper()
        };
        min_concentration(
            &GasEnvironment::air(),
            &GasLine::co2_4330nm(),
            &pulse,
            p,
            100e-6,
            cyclic_to_angular(318e3),
        )
        .unwrap()
    }

    #[test]
    fn trace_gas_paper_case() {
        let lim = paper_limit(84e-6, 1e-6);
        // independent evaluation of the closed form
        assert!(rel(lim.number_density, 3.651812301215266e11) < 1e-10);
        assert!(rel(lim.ppb, 14.927819398550866) < 1e-9);
        // quoted 3.5e11 molec/cm³ and 12.5 ppb
        assert!(rel(lim.number_density, 3.5e11) < 0.2);
        assert!(rel(lim.ppb, 12.5) < 0.2);
    }

    #[test]
    fn trace_gas_round_trip() {
        // P_eff from the forward chain at c_min returns P_eff_min
        let gas = GasEnvironment::air();
        let line = GasLine::co2_4330nm();
        let pulse = LaserPulse::paper();
        let w = cyclic_to_angular(318e3);
        let lim = paper_limit(84e-6, 1e-6);
        let alpha = line.absorption_coefficient(lim.number_density_si);
        let s = photoacoustic_pressure(&gas, &pulse, alpha, 100e-6).unwrap();
        let p_eff = effective_pressure(s.peak_pressure, pulse.duration, w);
        assert!(rel(p_eff, 84e-6) < 1e-12);
    }

    #[test]
    fn hitran_converter() {
        let line = GasLine::from_hitran(4.7e-19, 0.06, 4329.93e-9).unwrap();
        assert_eq!(line, GasLine::co2_4330nm());
        assert!(GasLine::from_hitran(0.0, 0.06, 1e-6).is_err());
    }

    #[test]
    fn cell_vibration_examples() {
        let gas = GasEnvironment::air();
        let p = cell_vibration_pressure(10e3, 1e-9, &gas);
        assert!(rel(p, 1.3e-2) < 0.01, "{p}");
        assert_eq!(cell_vibration_pressure(10e3, 0.0, &gas), 0.0);
        let d = detectable_displacement(84e-6, 318e3, &gas, 1.0);
        assert!(d < 1e-12 && rel(d, 2.0e-13) < 0.05, "{d}");
        let d = detectable_displacement(10e-3, 2e3, &gas, 1.0);
        assert!(rel(d, 3.853e-9) < 1e-3, "{d}");
        let d4 = detectable_displacement(10e-3, 2e3, &gas, 4.0);
        assert!(rel(d4, 2.0 * d) < 1e-14);
    }

    #[test]
    fn cooperativity_examples() {
        let mode = MechanicalMode::paper_flapping();
        let mut cav = OpticalCavity::paper_critical();
        cav.photon_number = 0.0;
        assert_eq!(cooperativity(&cav, &mode).unwrap(), 0.0);
        cav.photon_number = 1e6;
        let c = cooperativity(&cav, &mode).unwrap();
        let expected = 4.0 * cav.vacuum_coupling.powi(2) * 1e6
            / (cav.total_decay() * mode.total_damping());
        assert!(rel(c, expected) < 1e-14);
    }

    #[test]
    fn cooling_examples() {
        let g = cyclic_to_angular(500.0);
        assert_eq!(cooled_linewidth(g, 0.0).unwrap(), g);
        assert!(rel(cooled_linewidth(g, 1.0).unwrap(), 2.0 * g) < 1e-15);
        // 500 kHz, Q = 1000, C = 1000: linewidth comparable to the resonance
        let eff = cooled_linewidth(g, 1000.0).unwrap() / (2.0 * PI);
        assert!(rel(eff, 500e3) < 0.01);
        assert!(cooled_linewidth(g, -1.0).is_err());
    }

    fn geometry() -> SensorGeometry {
        SensorGeometry::paper_microdisk()
    }

    #[test]
    fn piston_overlap_and_mass() {
        let g = geometry();
        let shape = ModeshapeGrid::piston(&g, 50, 32).unwrap();
        shape.check_area(g.area()).unwrap();
        let z = mode_overlap(&shape, &PressureField::uniform(&shape)).unwrap();
        assert!((z - 1.0).abs() < 1e-12);
        let m = effective_mass(&shape, g.thickness, g.density).unwrap();
        assert!(rel(m, g.total_mass()) < 1e-9);
    }

    #[test]
    fn half_amplitude_mass() {
        let g = geometry();
        let piston = ModeshapeGrid::piston(&g, 20, 16).unwrap();
        let mut u = piston.displacement().to_vec();
        u[0] = 1.0;
        u.iter_mut().skip(1).for_each(|v| *v = 0.5);
        let half = ModeshapeGrid::new(piston.points().to_vec(), u, piston.cell_areas().to_vec())
            .unwrap();
        let m = effective_mass(&half, g.thickness, g.density).unwrap();
        let a0 = piston.cell_areas()[0] / piston.total_area();
        let expected = g.total_mass() * (0.5 + 0.5 * a0);
        assert!(rel(m, expected) < 1e-9);
    }

    #[test]
    fn antisymmetric_mode_cancels() {
        let g = geometry();
        let shape = ModeshapeGrid::polar_annulus(&g, 40, 64, |_, th| th.cos()).unwrap();
        let z = mode_overlap(&shape, &PressureField::uniform(&shape)).unwrap();
        assert!(z.abs() < 1e-12, "{z}");
    }

    #[test]
    fn paper_flapping_shape() {
        let g = geometry();
        let shape = ModeshapeGrid::paper_flapping(&g).unwrap();
        shape.check_area(g.area()).unwrap();
        let z = mode_overlap(&shape, &PressureField::uniform(&shape)).unwrap();
        // continuum value of the synthetic shape is -0.14266
        assert!((z + 0.14266).abs() < 2e-3, "{z}");
        assert!(rel(z.abs(), 0.14) < 0.3);
        let m = effective_mass(&shape, g.thickness, g.density).unwrap();
        assert!(rel(m / g.total_mass(), 0.49244) < 5e-3);
        assert!(rel(m, 110e-12) < 0.2, "{m}");
    }

    #[test]
    fn grid_validation() {
        let g = geometry();
        let shape = ModeshapeGrid::piston(&g, 4, 4).unwrap();
        let mut field = PressureField::uniform(&shape);
        field.values.pop();
        assert!(matches!(mode_overlap(&shape, &field), Err(Error::GridMismatch(_))));
        let mut field = PressureField::uniform(&shape);
        field.points[3][0] += 1e-6;
        assert!(matches!(mode_overlap(&shape, &field), Err(Error::GridMismatch(_))));
        assert!(ModeshapeGrid::new(vec![[0.0, 0.0]], vec![0.5], vec![1.0]).is_err());
        assert!(ModeshapeGrid::normalized(vec![[0.0, 0.0]], vec![0.0], vec![1.0]).is_err());
        assert!(ModeshapeGrid::new(vec![[0.0, 0.0]], vec![1.0], vec![-1.0]).is_err());
        assert!(shape.check_area(g.area() * 1.01).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = geometry();
        let shape = ModeshapeGrid::radial_flapping(&g, 124e-6, 0.7, 10, 8).unwrap();
        let mut buf = Vec::new();
        shape.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x_m,y_m,u,cell_area_m2"));
        let back = ModeshapeGrid::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), shape.len());
        for (a, b) in back.displacement().iter().zip(shape.displacement()) {
            assert!((a - b).abs() < 1e-15);
        }
        let bad = "x_m,y_m,u,cell_area_m2\n0,0,1,1\n0,0,oops,1\n";
        let err = ModeshapeGrid::read_csv(bad.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn rayleigh_examples() {
        let r = rayleigh_analysis(RayleighInput::RayleighLength(2e-3), 1.5e-3).unwrap();
        assert!(rel(r.beam_radius, 0.977e-3) < 1e-3, "{}", r.beam_radius);
        let z = rayleigh_analysis(RayleighInput::BeamRadius(1e-3), 1.5e-3).unwrap();
        assert!(rel(z.rayleigh_length, PI * 1e-6 / 1.5e-3) < 1e-15);
        assert!(rayleigh_analysis(RayleighInput::BeamRadius(0.0), 1.0).is_err());
    }

    proptest! {
        #[test]
        fn trace_gas_scalings(p in 1e-6f64..1e-2, e in 1e-7f64..1e-5) {
            let base = paper_limit(p, e);
            let double_p = paper_limit(2.0 * p, e);
            let double_e = paper_limit(p, 2.0 * e);
            prop_assert!(rel(double_p.number_density, 2.0 * base.number_density) < 1e-12);
            prop_assert!(rel(double_e.number_density, 0.5 * base.number_density) < 1e-12);
        }

        #[test]
        fn displacement_inverts_pressure(nu in 1e2f64..1e6, d in 1e-14f64..1e-6) {
            let gas = GasEnvironment::air();
            let p = cell_vibration_pressure(nu, d, &gas);
            prop_assert!(rel(detectable_displacement(p, nu, &gas, 1.0), d) < 1e-12);
        }

        #[test]
        fn rayleigh_round_trip(w in 1e-6f64..1e-1, lam in 1e-6f64..1.0) {
            let z = rayleigh_analysis(RayleighInput::BeamRadius(w), lam).unwrap();
            let back = rayleigh_analysis(RayleighInput::RayleighLength(z.rayleigh_length), lam)
                .unwrap();
            prop_assert!(rel(back.beam_radius, w) < 1e-12);
        }

        #[test]
        fn flattening_preserves_area(peak in 1e-30f64..1e-20, g in 1.0f64..1e4, c in 0.0f64..1e6) {
            let eff = cooled_linewidth(g, c).unwrap();
            prop_assert!(rel(eff * flattened_peak(peak, g, eff), g * peak) < 1e-12);
        }

        #[test]
        fn overlap_and_mass_bounds(node in 90e-6f64..140e-6, p in 0.2f64..3.0, amp in 0.1f64..5.0) {
            let g = SensorGeometry::paper_microdisk();
            let shape = ModeshapeGrid::radial_flapping(&g, node, p, 24, 8).unwrap();
            let field = PressureField::from_fn(&shape, |x, _| amp * (1.0 + 0.5 * (x * 1e4).sin()));
            let max_dp = field.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let z = mode_overlap(&shape, &field).unwrap();
            prop_assert!(z.abs() <= max_dp * (1.0 + 1e-12));
            let m = effective_mass(&shape, g.thickness, g.density).unwrap();
            prop_assert!(m <= g.total_mass() * (1.0 + 1e-9));
        }
    }
}
