//! TOML run configuration.
//!
//! Sections: `[geometry]`, `[gas]`, `[cavity]`, `[[modes]]`, `[sensor]`,
//! `[noise]`, `[detuning_sweep]`, `[calibration]`, `[simulation]` and
//! `[applications.*]`. Omitted keys take the bundled paper values. Rate keys
//! are angular (rad/s); each also accepts a cyclic `<key>_hz` form, and
//! giving both is an error.

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::applications::{GasLine, LaserPulse};
use crate::calibration::{AirConditions, ApertureShape, PropagationPath};
use crate::damping::gas_damping_rate;
use crate::error::{Error, Result};
use crate::model::{GasEnvironment, MechanicalMode, OpticalCavity, SensorGeometry};
use crate::noise::OneOverF;
use crate::response::CouplingKind;
use crate::units::cyclic_to_angular;

/// The bundled paper parameter file.
pub const PAPER_TOML: &str = include_str!("../configs/paper.toml");

/// Keys that hold angular rates and accept a `_hz` alias.
pub const RATE_KEYS: &[&str] = &[
    "resonance_freq",
    "intrinsic_damping",
    "gas_damping",
    "intrinsic_loss",
    "input_coupling",
    "detuning",
    "dispersive_coupling",
    "vacuum_coupling",
    "drive_frequency",
    "mechanical_frequency",
    "frequency",
    "nep_frequency",
    "reference_frequency",
    "f_min",
    "f_max",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub name: String,
    pub resonance_freq: f64,
    pub intrinsic_damping: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_damping: Option<f64>,
    /// Viscous length l (m); the gas damping is then 2πµl/m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_length: Option<f64>,
    pub effective_mass: f64,
    #[serde(default = "one")]
    pub overlap: f64,
    #[serde(default = "one")]
    pub participation_ratio: f64,
}

fn one() -> f64 {
    1.0
}

impl ModeConfig {
    pub fn to_mode(&self, gas: &GasEnvironment) -> Result<MechanicalMode> {
        let mut mode = MechanicalMode {
            resonance_freq: self.resonance_freq,
            intrinsic_damping: self.intrinsic_damping,
            gas_damping: 0.0,
            effective_mass: self.effective_mass,
            overlap: self.overlap,
            participation_ratio: self.participation_ratio,
        };
        mode.gas_damping = match (self.gas_damping, self.gas_length) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(format!(
                    "mode `{}`: give either gas_damping or gas_length, not both",
                    self.name
                )))
            }
            (Some(g), None) => g,
            (None, Some(l)) => gas_damping_rate(l, gas, &mode)?,
            (None, None) => 0.0,
        };
        mode.validate()?;
        Ok(mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingConfig {
    /// Sensing area A (m²).
    pub area: f64,
    pub kind: CouplingKind,
    /// Name of the mode read out by default.
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub f_min: f64,
    pub f_max: f64,
    pub points: usize,
    /// Flat measurement-noise level of synthesised spectra (detector units).
    pub shot_floor: f64,
    /// Thermomechanical peak height above the floor (dB).
    pub peak_ratio_db: f64,
    pub oneoverf_amplitude: f64,
    pub oneoverf_exponent: f64,
}

impl NoiseConfig {
    /// Linear grid in Hz.
    pub fn grid_hz(&self) -> Result<Vec<f64>> {
        let (a, b) = (self.f_min / std::f64::consts::TAU, self.f_max / std::f64::consts::TAU);
        if !(a > 0.0 && b > a && self.points >= 2) {
            return Err(Error::Config(
                "noise grid needs 0 < f_min < f_max and points >= 2".into(),
            ));
        }
        let n = self.points;
        Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
    }

    pub fn oneoverf(&self) -> OneOverF {
        OneOverF {
            amplitude: self.oneoverf_amplitude,
            exponent: self.oneoverf_exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetuningSweepConfig {
    /// Half-width of the detuning grid in units of κ₀.
    pub span: f64,
    pub points: usize,
    pub drive_frequency: f64,
}

impl DetuningSweepConfig {
    pub fn grid(&self, kappa: f64) -> Result<Vec<f64>> {
        if !(self.span > 0.0 && self.points >= 2) {
            return Err(Error::Config("detuning_sweep needs span > 0 and points >= 2".into()));
        }
        let half = self.span * kappa;
        let n = self.points;
        Ok((0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub optical_wavelength: f64,
    pub distance: f64,
    pub aperture_side: f64,
    pub aperture: ApertureShape,
    pub reference_frequency: f64,
    pub v_ref: f64,
    pub v_max: f64,
    pub drive_voltage: f64,
    pub air: AirConditions,
}

impl CalibrationConfig {
    pub fn path(&self) -> PropagationPath {
        PropagationPath {
            distance: self.distance,
            aperture_side: self.aperture_side,
            aperture: self.aperture,
            air: self.air,
            absorption_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSettings {
    pub mode: String,
    pub samples_per_period: f64,
    pub duration: f64,
    pub seed: u64,
    pub segment_len: usize,
    /// Number of independent seeds averaged in the PSD.
    pub ensemble: usize,
    pub thermal: bool,
    /// Acoustic drive amplitude (Pa); 0 disables the drive.
    pub drive_amplitude: f64,
    pub drive_frequency: f64,
    pub drive_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceGasConfig {
    pub pulse_energy: f64,
    pub pulse_duration: f64,
    pub beam_radius: f64,
    pub distance: f64,
    pub p_eff_min: f64,
    pub mechanical_frequency: f64,
    /// cm⁻¹/(molec·cm⁻²).
    pub line_intensity_cm: f64,
    /// cm⁻¹.
    pub linewidth_per_cm: f64,
    pub line_wavelength: f64,
}

impl TraceGasConfig {
    pub fn pulse(&self) -> LaserPulse {
        LaserPulse {
            energy: self.pulse_energy,
            duration: self.pulse_duration,
            beam_radius: self.beam_radius,
            irradiation_length: None,
        }
    }

    pub fn line(&self) -> Result<GasLine> {
        GasLine::from_hitran(self.line_intensity_cm, self.linewidth_per_cm, self.line_wavelength)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellVibConfig {
    pub frequency: f64,
    pub displacement: f64,
    /// Sensor NEP (Pa/√Hz) used for the detectable displacement.
    pub nep: f64,
    pub nep_frequency: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolingConfig {
    pub mode: String,
    /// Replaces the cavity photon number when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photon_number: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdrConfig {
    pub nep: f64,
    pub max_pressure: f64,
    pub integration_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSensConfig {
    pub nep: f64,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayleighConfig {
    pub rayleigh_length: f64,
    pub acoustic_wavelength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplicationsConfig {
    pub trace_gas: TraceGasConfig,
    pub cell_vib: CellVibConfig,
    pub cooling: CoolingConfig,
    pub ldr: LdrConfig,
    pub force_sens: ForceSensConfig,
    pub rayleigh: RayleighConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub geometry: SensorGeometry,
    pub gas: GasEnvironment,
    pub cavity: OpticalCavity,
    pub modes: Vec<ModeConfig>,
    pub sensor: SensingConfig,
    pub noise: NoiseConfig,
    pub detuning_sweep: DetuningSweepConfig,
    pub calibration: CalibrationConfig,
    pub simulation: SimulationSettings,
    pub applications: ApplicationsConfig,
}

impl SensorConfig {
    /// The bundled paper configuration.
    pub fn paper() -> Self {
        Self::from_toml_str(PAPER_TOML, &[]).expect("bundled paper.toml is valid")
    }

    /// Parses `text`, applies `key=value` overrides and fills omitted keys
    /// from the paper configuration.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut user: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(one_line(&e.to_string())))?;
        resolve_aliases(&mut user, "", text)?;
        let mut merged = paper_table();
        merge(&mut merged, user);
        for o in overrides {
            apply_override(&mut merged, o)?;
        }
        resolve_aliases(&mut merged, "", "")?;
        let cfg: SensorConfig = Value::Table(merged).try_into().map_err(|e: toml::de::Error| {
            let msg = one_line(&e.to_string());
            match backticked(&msg).and_then(|k| locate_key(text, k)) {
                Some(line) => Error::Config(format!("line {line}: {msg}")),
                None => Error::Config(msg),
            }
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    fn validate(&self, text: &str) -> Result<()> {
        let wrap = |section: &str, e: Error| -> Error {
            let msg = e.to_string();
            let line = backticked(&msg).and_then(|k| locate_in_section(text, section, k));
            match line {
                Some(l) => Error::Config(format!("[{section}] line {l}: {msg}")),
                None => Error::Config(format!("[{section}]: {msg}")),
            }
        };
        self.geometry.validate().map_err(|e| wrap("geometry", e))?;
        self.gas.validate().map_err(|e| wrap("gas", e))?;
        self.cavity.validate().map_err(|e| wrap("cavity", e))?;
        if self.modes.is_empty() {
            return Err(Error::Config("at least one [[modes]] entry is required".into()));
        }
        for (i, m) in self.modes.iter().enumerate() {
            if self.modes[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::Config(format!("duplicate mode name `{}`", m.name)));
            }
            m.to_mode(&self.gas)
                .map_err(|e| Error::Config(format!("[[modes]] `{}`: {e}", m.name)))?;
        }
        self.mode(&self.sensor.mode)?;
        self.mode(&self.simulation.mode)?;
        self.mode(&self.applications.cooling.mode)?;
        crate::error::ensure_positive("area", self.sensor.area).map_err(|e| wrap("sensor", e))?;
        self.noise.grid_hz()?;
        Ok(())
    }

    /// The named mode, with gas damping resolved.
    pub fn mode(&self, name: &str) -> Result<MechanicalMode> {
        self.modes
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| {
                let known: Vec<&str> = self.modes.iter().map(|m| m.name.as_str()).collect();
                Error::Config(format!("unknown mode `{name}`; defined: {}", known.join(", ")))
            })?
            .to_mode(&self.gas)
    }

    /// The mode selected by `[sensor] mode`.
    pub fn sensing_mode(&self) -> Result<MechanicalMode> {
        self.mode(&self.sensor.mode)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn paper_table() -> Table {
    let mut t: Table = PAPER_TOML.parse().expect("bundled paper.toml parses");
    resolve_aliases(&mut t, "", PAPER_TOML).expect("bundled paper.toml has no alias conflicts");
    t
}

/// Deep merge: tables merge key by key, everything else (arrays included)
/// is replaced.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn resolve_aliases(table: &mut Table, path: &str, text: &str) -> Result<()> {
    let keys: Vec<String> = table.keys().cloned().collect();
    for key in keys {
        let child_path = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
        match table.get_mut(&key) {
            Some(Value::Table(t)) => resolve_aliases(t, &child_path, text)?,
            Some(Value::Array(items)) => {
                for (i, item) in items.iter_mut().enumerate() {
                    if let Value::Table(t) = item {
                        resolve_aliases(t, &format!("{child_path}.{i}"), text)?;
                    }
                }
            }
            _ => {}
        }
        let Some(base) = key.strip_suffix("_hz") else { continue };
        if !RATE_KEYS.contains(&base) {
            continue;
        }
        let field = if path.is_empty() { base.to_string() } else { format!("{path}.{base}") };
        let at = locate_key(text, &key).map(|l| format!(" (line {l})")).unwrap_or_default();
        if table.contains_key(base) {
            return Err(Error::Config(format!(
                "`{field}` given both in rad/s and as `{key}`{at}"
            )));
        }
        let hz = match table.remove(&key) {
            Some(Value::Float(f)) => f,
            Some(Value::Integer(i)) => i as f64,
            _ => return Err(Error::Config(format!("`{field}_hz` must be a number{at}"))),
        };
        table.insert(base.to_string(), Value::Float(cyclic_to_angular(hz)));
    }
    Ok(())
}

/// Applies one `dotted.key=value` override. Array elements are addressed by
/// index (`modes.0.overlap=1`). Setting `x_hz` removes `x` and vice versa.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let parts: Vec<&str> = path.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override `{spec}` has an empty key segment")));
    }
    let value = parse_value(raw.trim());
    let (last, parents) = parts.split_last().expect("non-empty path");
    let mut cur = table;
    for (i, p) in parents.iter().enumerate() {
        let next_is_index = parents.get(i + 1).or(Some(last)).map_or(false, |n| n.parse::<usize>().is_ok());
        let entry = cur.entry(p.to_string()).or_insert_with(|| {
            if next_is_index {
                Value::Array(Vec::new())
            } else {
                Value::Table(Table::new())
            }
        });
        cur = match entry {
            Value::Table(t) => t,
            Value::Array(items) => {
                return descend_array(items, &parts[i + 1..], value, spec);
            }
            _ => return Err(Error::Config(format!("override `{spec}`: `{p}` is not a table"))),
        };
    }
    set_leaf(cur, last, value);
    Ok(())
}

fn descend_array(items: &mut [Value], rest: &[&str], value: Value, spec: &str) -> Result<()> {
    let idx: usize = rest[0]
        .parse()
        .map_err(|_| Error::Config(format!("override `{spec}`: expected an index, got `{}`", rest[0])))?;
    let len = items.len();
    let item = items
        .get_mut(idx)
        .ok_or_else(|| Error::Config(format!("override `{spec}`: index {idx} out of range ({len} entries)")))?;
    let Value::Table(t) = item else {
        return Err(Error::Config(format!("override `{spec}`: element {idx} is not a table")));
    };
    let rest = &rest[1..];
    if rest.is_empty() {
        return Err(Error::Config(format!("override `{spec}`: cannot replace a whole array element")));
    }
    let joined = format!("{}={}", rest.join("."), value_literal(&value));
    apply_override(t, &joined)
}

fn set_leaf(t: &mut Table, key: &str, value: Value) {
    if let Some(base) = key.strip_suffix("_hz") {
        t.remove(base);
    } else {
        t.remove(&format!("{key}_hz"));
    }
    t.insert(key.to_string(), value);
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn value_literal(v: &Value) -> String {
    v.to_string()
}

fn one_line(msg: &str) -> String {
    msg.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" | ")
}

fn backticked(msg: &str) -> Option<&str> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(&msg[start..start + len])
}

fn key_on_line(line: &str, key: &str) -> bool {
    let l = line.trim_start();
    l.strip_prefix(key)
        .map_or(false, |rest| rest.trim_start().starts_with('='))
}

/// First line (1-based) assigning `key` or `key_hz`.
fn locate_key(text: &str, key: &str) -> Option<usize> {
    let hz = format!("{key}_hz");
    text.lines()
        .position(|l| key_on_line(l, key) || key_on_line(l, &hz))
        .map(|i| i + 1)
}

/// Line of `key` inside `[section]`.
fn locate_in_section(text: &str, section: &str, key: &str) -> Option<usize> {
    let header = format!("[{section}]");
    let hz = format!("{key}_hz");
    let mut inside = false;
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.starts_with('[') {
            inside = l == header;
            continue;
        }
        if inside && (key_on_line(l, key) || key_on_line(l, &hz)) {
            return Some(i + 1);
        }
    }
    None
}
