//! Calibration of the acoustic source: interferometric PZT displacement,
//! radiated pressure, diffraction and air absorption between source and
//! sensor, and the resulting sensor responsivity.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{ensure_non_negative, ensure_positive, invalid, Error, Result};
use crate::model::GasEnvironment;
use crate::spectrum::{interp_linear, Convention, SpectrumSeries};

/// Network-analyser sweep of the calibration interferometer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S21Sweep {
    /// Hz, strictly increasing.
    pub frequencies: Vec<f64>,
    /// Linear power transfer |S21|².
    pub s21_power: Vec<f64>,
    pub reference_freq: f64,
    /// Photodetector voltage at the reference frequency (V).
    pub v_ref: f64,
    /// Fringe-maximum voltage, corresponding to λ/4 (V).
    pub v_max: f64,
    /// Drive voltage the result is normalised to (V).
    pub drive_voltage: f64,
    /// Per-point stitching factors (nominal/actual drive voltage) for
    /// points taken at reduced drive. Empty means all 1.
    #[serde(default)]
    pub segment_scale: Vec<f64>,
}

impl S21Sweep {
    fn validate(&self) -> Result<usize> {
        let n = self.frequencies.len();
        if n == 0 {
            return Err(Error::InsufficientData("empty S21 sweep".into()));
        }
        if self.s21_power.len() != n || !(self.segment_scale.is_empty() || self.segment_scale.len() == n) {
            return Err(Error::GridMismatch("S21 sweep columns differ in length".into()));
        }
        if self.frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Data("sweep frequencies must be strictly increasing".into()));
        }
        if self.s21_power.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Data("S21 power must be finite and non-negative".into()));
        }
        ensure_non_negative("v_ref", self.v_ref)?;
        ensure_positive("v_max", self.v_max)?;
        if self.v_ref > self.v_max {
            return Err(invalid("v_ref", "must not exceed v_max"));
        }
        if self.segment_scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(invalid("segment_scale", "factors must be > 0"));
        }
        let tol = 1e-9 * self.reference_freq.abs();
        self.frequencies
            .iter()
            .position(|f| (f - self.reference_freq).abs() <= tol)
            .ok_or_else(|| {
                Error::Data(format!(
                    "reference frequency {} Hz is not a sweep point",
                    self.reference_freq
                ))
            })
    }
}

/// PZT displacement amplitude and per-point saturation flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisplacementSpectrum {
    /// Displacement (m), stitched to the nominal drive voltage.
    pub series: SpectrumSeries,
    /// True where the raw (unstitched) displacement reaches λ/4.
    pub saturated: Vec<bool>,
}

/// d(ω) = (λ/4)(V_ref/V_max)√(S21(ω)/S21(ω_ref)) times the point's
/// stitching factor.
pub fn pzt_displacement(sweep: &S21Sweep, wavelength: f64) -> Result<DisplacementSpectrum> {
    ensure_positive("wavelength", wavelength)?;
    let iref = sweep.validate()?;
    let s_ref = sweep.s21_power[iref];
    if s_ref == 0.0 {
        return Err(Error::Singular("S21 at the reference frequency is zero".into()));
    }
    let quarter = wavelength / 4.0;
    let base = quarter * sweep.v_ref / sweep.v_max;
    let mut d = Vec::with_capacity(sweep.frequencies.len());
    let mut saturated = Vec::with_capacity(sweep.frequencies.len());
    for (i, s) in sweep.s21_power.iter().enumerate() {
        let raw = base * (s / s_ref).sqrt();
        saturated.push(raw >= quarter * (1.0 - 1e-12));
        d.push(raw * sweep.segment_scale.get(i).copied().unwrap_or(1.0));
    }
    Ok(DisplacementSpectrum {
        series: SpectrumSeries::real_hz(sweep.frequencies.clone(), d, "m", Convention::Pointwise)?,
        saturated,
    })
}

/// Pressure radiated by a surface vibrating with amplitude d at ν:
/// P = π·ν·d·Z.
pub fn pzt_pressure(displacement: f64, frequency_hz: f64, gas: &GasEnvironment) -> Result<f64> {
    ensure_non_negative("displacement", displacement)?;
    ensure_non_negative("frequency", frequency_hz)?;
    ensure_positive("acoustic_impedance", gas.acoustic_impedance)?;
    Ok(PI * frequency_hz * displacement * gas.acoustic_impedance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ApertureShape {
    #[default]
    Square,
    /// Circular aperture whose diameter is `aperture_side`.
    Circular,
}

/// Humid-air conditions for the absorption model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AirConditions {
    /// K.
    pub temperature: f64,
    /// Percent, 0–100.
    pub relative_humidity: f64,
    /// Pa.
    pub pressure: f64,
}

impl Default for AirConditions {
    fn default() -> Self {
        Self {
            temperature: 293.15,
            relative_humidity: 50.0,
            pressure: crate::units::STANDARD_ATMOSPHERE,
        }
    }
}

/// Source-to-sensor geometry and medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationPath {
    /// L (m).
    pub distance: f64,
    /// Aperture side a (m).
    pub aperture_side: f64,
    #[serde(default)]
    pub aperture: ApertureShape,
    #[serde(default)]
    pub air: AirConditions,
    /// Optional (frequency Hz, α Np/m) table replacing the analytic model.
    #[serde(default)]
    pub absorption_table: Option<Vec<(f64, f64)>>,
}

impl PropagationPath {
    /// 7 mm × 7 mm source aperture 10 cm from the sensor.
    pub fn paper() -> Self {
        Self {
            distance: 0.1,
            aperture_side: 7e-3,
            aperture: ApertureShape::Square,
            air: AirConditions::default(),
            absorption_table: None,
        }
    }

    fn validate(&self) -> Result<()> {
        ensure_non_negative("distance", self.distance)?;
        ensure_positive("aperture_side", self.aperture_side)?;
        if let Some(t) = &self.absorption_table {
            if t.is_empty() || t.windows(2).any(|w| w[1].0 <= w[0].0) || t.iter().any(|p| p.1 < 0.0) {
                return Err(invalid(
                    "absorption_table",
                    "needs strictly increasing frequencies and non-negative α",
                ));
            }
        }
        Ok(())
    }
}

/// Fresnel integrals (C(x), S(x)) with the π t²/2 kernel.
pub fn fresnel(x: f64) -> (f64, f64) {
    let t = x.abs();
    let (c, s) = if t < 1e-154 {
        (t, 0.0)
    } else if t <= 1.5 {
        fresnel_series(t)
    } else {
        fresnel_cf(t)
    };
    if x < 0.0 {
        (-c, -s)
    } else {
        (c, s)
    }
}

fn fresnel_series(t: f64) -> (f64, f64) {
    // C = Σ (−1)^n z^{2n} t /((2n)!(4n+1)), S = Σ (−1)^n z^{2n+1} t /((2n+1)!(4n+3)),
    // z = πt²/2
    let z = 0.5 * PI * t * t;
    let mut term = t; // z^k t / k!
    let (mut c, mut s) = (0.0, 0.0);
    for k in 0..60 {
        let contrib = term / (2 * k + 1) as f64;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            c += sign * contrib;
        } else {
            s += sign * contrib;
        }
        if contrib.abs() < 1e-17 * (c.abs() + s.abs()) {
            break;
        }
        term *= z / (k + 1) as f64;
    }
    (c, s)
}

fn fresnel_cf(t: f64) -> (f64, f64) {
    use num_complex::Complex64 as C;
    // modified Lentz evaluation of the continued fraction for erfc
    let pix2 = PI * t * t;
    let mut b = C::new(1.0, -pix2);
    let mut cc = C::new(1e300, 0.0);
    let mut d = b.inv();
    let mut h = d;
    let mut n = -1.0;
    for _ in 2..200 {
        n += 2.0;
        let a = -n * (n + 1.0);
        b += 4.0;
        d = (a * d + b).inv();
        cc = b + a / cc;
        let del = cc * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h *= C::new(t, -t);
    let cs = C::new(0.5, 0.5) * (C::new(1.0, 0.0) - C::from_polar(1.0, 0.5 * pix2) * h);
    (cs.re, cs.im)
}

/// On-axis amplitude ratio c = |U_axis/U_plane| for a plane wave through
/// the path's aperture observed at distance L (Fresnel approximation).
///
/// Square: c = 2(C(w)² + S(w)²), w = (a/2)√(2/(λL)).
/// Circular (diameter a): c = 2|sin(πa²/(8λL))|.
pub fn diffraction_factor(path: &PropagationPath, frequency_hz: f64, gas: &GasEnvironment) -> Result<f64> {
    path.validate()?;
    ensure_positive("frequency", frequency_hz)?;
    ensure_positive("distance", path.distance)?;
    let lambda = gas.acoustic_wavelength(frequency_hz);
    ensure_positive("acoustic wavelength", lambda)?;
    let a = path.aperture_side;
    Ok(match path.aperture {
        ApertureShape::Square => {
            let w = 0.5 * a * (2.0 / (lambda * path.distance)).sqrt();
            let (c, s) = fresnel(w);
            2.0 * (c * c + s * s)
        }
        ApertureShape::Circular => 2.0 * (PI * a * a / (8.0 * lambda * path.distance)).sin().abs(),
    })
}

/// Humid-air absorption coefficient (Np/m, pressure amplitude) from the
/// ISO 9613-1 model: classical and rotational loss plus O₂ and N₂
/// vibrational relaxation.
pub fn air_absorption(frequency_hz: f64, air: &AirConditions) -> Result<f64> {
    let f = frequency_hz;
    if !(f > 0.0 && f <= 10e6) {
        return Err(Error::OutOfRange(format!("frequency {f} Hz outside (0, 10 MHz]")));
    }
    let t = air.temperature;
    if !(253.0..=323.0).contains(&t) {
        return Err(Error::OutOfRange(format!("temperature {t} K outside 253–323 K")));
    }
    let hr = air.relative_humidity;
    if !(0.0..=100.0).contains(&hr) {
        return Err(Error::OutOfRange(format!("relative humidity {hr}% outside 0–100%")));
    }
    let p = air.pressure;
    if !(p > 0.0 && p <= 200e3) {
        return Err(Error::OutOfRange(format!("pressure {p} Pa outside (0, 200 kPa]")));
    }
    const T0: f64 = 293.15;
    const T01: f64 = 273.16;
    let pr = p / crate::units::STANDARD_ATMOSPHERE;
    let tr = t / T0;
    let psat = 10f64.powf(-6.8346 * (T01 / t).powf(1.261) + 4.6151);
    let h = hr * psat / pr;
    let fr_o = pr * (24.0 + 4.04e4 * h * (0.02 + h) / (0.391 + h));
    let fr_n = pr * tr.powf(-0.5) * (9.0 + 280.0 * h * (-4.170 * (tr.powf(-1.0 / 3.0) - 1.0)).exp());
    let f2 = f * f;
    Ok(f2
        * (1.84e-11 / pr * tr.sqrt()
            + tr.powf(-2.5)
                * (0.01275 * (-2239.1 / t).exp() / (fr_o + f2 / fr_o)
                    + 0.1068 * (-3352.0 / t).exp() / (fr_n + f2 / fr_n))))
}

/// Pressure attenuation factor γ = exp(α·L) ≥ 1 along the path.
pub fn atmospheric_attenuation(path: &PropagationPath, frequency_hz: f64) -> Result<f64> {
    path.validate()?;
    let alpha = match &path.absorption_table {
        Some(table) => {
            let (fs, al): (Vec<f64>, Vec<f64>) = table.iter().copied().unzip();
            interp_linear(&fs, &al, frequency_hz).ok_or_else(|| {
                Error::OutOfRange(format!("{frequency_hz} Hz outside the absorption table"))
            })?
        }
        None => air_absorption(frequency_hz, &path.air)?,
    };
    Ok((alpha * path.distance).exp())
}

/// P_sensor = c·P_PZT/γ.
pub fn pressure_at_sensor(p_pzt: f64, diffraction: f64, attenuation: f64) -> Result<f64> {
    ensure_non_negative("diffraction", diffraction)?;
    if !(attenuation >= 1.0 && attenuation.is_finite()) {
        return Err(invalid("attenuation", format!("must be >= 1, got {attenuation}")));
    }
    Ok(diffraction * p_pzt / attenuation)
}

/// Per-frequency products of the calibration chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppliedPressure {
    pub displacement: DisplacementSpectrum,
    /// Pressure at the source (Pa).
    pub p_pzt: Vec<f64>,
    pub diffraction: Vec<f64>,
    pub attenuation: Vec<f64>,
    /// Pressure at the sensor (Pa).
    pub p_sensor: SpectrumSeries,
}

/// Sweep → displacement → source pressure → pressure at the sensor.
pub fn calibration_chain(
    sweep: &S21Sweep,
    optical_wavelength: f64,
    path: &PropagationPath,
    gas: &GasEnvironment,
) -> Result<AppliedPressure> {
    let displacement = pzt_displacement(sweep, optical_wavelength)?;
    let freqs = displacement.series.axis().to_vec();
    let d = displacement.series.magnitudes();
    let mut p_pzt = Vec::with_capacity(freqs.len());
    let mut diffraction = Vec::with_capacity(freqs.len());
    let mut attenuation = Vec::with_capacity(freqs.len());
    let mut p_sensor = Vec::with_capacity(freqs.len());
    for (f, d) in freqs.iter().zip(&d) {
        let p = pzt_pressure(*d, *f, gas)?;
        let c = diffraction_factor(path, *f, gas)?;
        let g = atmospheric_attenuation(path, *f)?;
        p_sensor.push(pressure_at_sensor(p, c, g)?);
        p_pzt.push(p);
        diffraction.push(c);
        attenuation.push(g);
    }
    Ok(AppliedPressure {
        displacement,
        p_pzt,
        diffraction,
        attenuation,
        p_sensor: SpectrumSeries::real_hz(freqs, p_sensor, "Pa", Convention::Pointwise)?,
    })
}

/// Responsivity and the frequencies dropped from it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Responsivity {
    /// V/Pa at the retained frequencies.
    pub series: SpectrumSeries,
    /// Frequencies (Hz) with zero applied pressure or outside the applied
    /// grid.
    pub excluded: Vec<f64>,
}

/// Pointwise measured/applied on the measured grid. The applied spectrum
/// is linearly resampled when the grids differ.
pub fn responsivity(measured: &SpectrumSeries, applied: &SpectrumSeries) -> Result<Responsivity> {
    let v = measured.magnitudes();
    let same_grid = measured.axis() == applied.axis();
    let p_applied = applied.magnitudes();
    if p_applied.iter().all(|p| *p == 0.0) {
        return Err(Error::Data("applied pressure is zero everywhere".into()));
    }
    let mut freqs = Vec::new();
    let mut ratio = Vec::new();
    let mut excluded = Vec::new();
    for (i, (&f, &volts)) in measured.axis().iter().zip(&v).enumerate() {
        let p = if same_grid {
            Some(p_applied[i])
        } else {
            interp_linear(applied.axis(), &p_applied, f)
        };
        match p {
            Some(p) if p != 0.0 => {
                freqs.push(f);
                ratio.push(volts / p);
            }
            _ => excluded.push(f),
        }
    }
    if freqs.is_empty() {
        return Err(Error::Data("no frequency has both a measurement and a non-zero applied pressure".into()));
    }
    Ok(Responsivity {
        series: SpectrumSeries::new(
            freqs,
            crate::spectrum::SpectrumValues::Real(ratio),
            "V/Pa",
            measured.axis_kind(),
            Convention::Pointwise,
        )?,
        excluded,
    })
}

fn read_two_columns<R: std::io::Read>(reader: R, x_name: &str, y_name: &str) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Data(format!("missing column `{name}` (found: {})", headers.iter().collect::<Vec<_>>().join(", "))))
    };
    let (ix, iy) = (col(x_name)?, col(y_name)?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let parse = |i: usize, name: &str| -> Result<f64> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Data(format!("line {line}: `{name}` value `{s}` is not a finite number")))
        };
        out.push((parse(ix, x_name)?, parse(iy, y_name)?));
    }
    if out.is_empty() {
        return Err(Error::InsufficientData(format!("no `{x_name}` rows")));
    }
    Ok(out)
}

/// Network-analyser export with columns `freq_hz,s21_db`. Returns
/// (Hz, linear power ratio 10^(dB/10)).
pub fn read_s21_csv<R: std::io::Read>(reader: R) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(read_two_columns(reader, "freq_hz", "s21_db")?
        .into_iter()
        .map(|(f, db)| (f, crate::units::db_to_power_ratio(db)))
        .unzip())
}

/// Spectrum-analyser export with columns `freq_hz,psd_dbm_hz`. Returns a
/// PSD in W/Hz.
pub fn read_psd_dbm_csv<R: std::io::Read>(reader: R) -> Result<SpectrumSeries> {
    let (f, p): (Vec<f64>, Vec<f64>) = read_two_columns(reader, "freq_hz", "psd_dbm_hz")?
        .into_iter()
        .map(|(f, dbm)| (f, 1e-3 * crate::units::db_to_power_ratio(dbm)))
        .unzip();
    SpectrumSeries::real_hz(f, p, "W/Hz", Convention::SingleSidedHz)
}

/// Sensor output amplitude with columns `freq_hz,response_v`.
pub fn read_response_csv<R: std::io::Read>(reader: R) -> Result<SpectrumSeries> {
    let (f, v): (Vec<f64>, Vec<f64>) = read_two_columns(reader, "freq_hz", "response_v")?.into_iter().unzip();
    SpectrumSeries::real_hz(f, v, "V", Convention::Pointwise)
}
