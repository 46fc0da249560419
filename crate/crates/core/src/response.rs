//! Mechanical and optomechanical susceptibilities, detuning response and
//! cavity transmission for dispersive and dissipative coupling.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MechanicalMode, OpticalCavity};
use crate::spectrum::{AxisKind, Convention, SpectrumSeries, SpectrumValues};

/// How displacement reaches the optical field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    /// Displacement shifts the cavity resonance (g_disp).
    Dispersive,
    /// Displacement modulates the input coupling rate (g_diss).
    Dissipative,
}

impl std::str::FromStr for CouplingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dispersive" | "disp" => Ok(Self::Dispersive),
            "dissipative" | "diss" => Ok(Self::Dissipative),
            other => Err(Error::Config(format!(
                "unknown coupling kind `{other}` (expected dispersive or dissipative)"
            ))),
        }
    }
}

impl std::fmt::Display for CouplingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Dispersive => "dispersive",
            Self::Dissipative => "dissipative",
        })
    }
}

/// χ_m(ω) = 1/(m(ω_m² − ω² − iγ_m ω)) in m/N.
pub fn mech_susceptibility(mode: &MechanicalMode, omega: f64) -> Result<Complex64> {
    let m = mode.effective_mass;
    let inverse = Complex64::new(
        m * (mode.resonance_freq.powi(2) - omega * omega),
        -m * mode.total_damping() * omega,
    );
    if inverse.norm() == 0.0 {
        return Err(Error::Singular(format!(
            "undamped mode driven exactly at resonance (ω = {omega})"
        )));
    }
    Ok(inverse.inv())
}

/// Cavity-only factors shared by the full and low-frequency forms.
fn lorentz_denominator(cavity: &OpticalCavity, detuning: f64) -> f64 {
    4.0 * detuning * detuning + cavity.total_decay().powi(2)
}

/// Optomechanical susceptibility χ(ω, Δ) for either coupling, without the
/// ω ≪ κ approximation.
pub fn om_susceptibility(
    cavity: &OpticalCavity,
    mode: &MechanicalMode,
    kind: CouplingKind,
    omega: f64,
    detuning: f64,
) -> Result<Complex64> {
    cavity.validate()?;
    let chi_m = mech_susceptibility(mode, omega)?;
    Ok(optical_gain_full(cavity, kind, omega, detuning) * chi_m)
}

/// χ(ω, Δ)/χ_m(ω) for the full expression.
pub fn optical_gain_full(cavity: &OpticalCavity, kind: CouplingKind, omega: f64, detuning: f64) -> Complex64 {
    let k0 = cavity.total_decay();
    let kin = cavity.input_coupling;
    let kl = cavity.intrinsic_loss;
    let d = detuning;
    let i = Complex64::i();
    let k0_minus_2iw = Complex64::new(k0, -2.0 * omega);
    let denom = lorentz_denominator(cavity, d) * (4.0 * d * d + k0_minus_2iw * k0_minus_2iw);
    let numer = match kind {
        CouplingKind::Dispersive => {
            32.0 * cavity.dispersive_coupling * d * kin * (k0 - i * omega)
        }
        CouplingKind::Dissipative => {
            2.0 * cavity.dissipative_coupling
                * kin
                * (-k0 * (kin - kl) * k0_minus_2iw + 4.0 * d * d * (k0 + 2.0 * kin - 2.0 * i * omega))
        }
    };
    numer / denom
}

/// χ(ω, Δ)/χ_m(ω) in the ω ≪ κ limit. Real valued.
pub fn optical_gain_lowfreq(cavity: &OpticalCavity, kind: CouplingKind, detuning: f64) -> f64 {
    let k0 = cavity.total_decay();
    let kin = cavity.input_coupling;
    let kl = cavity.intrinsic_loss;
    let d = detuning;
    let (g, c) = match kind {
        CouplingKind::Dispersive => (cavity.dispersive_coupling, 16.0 * k0 * d),
        CouplingKind::Dissipative => (
            cavity.dissipative_coupling,
            -k0 * k0 * (kin - kl) + 4.0 * d * d * (k0 + 2.0 * kin),
        ),
    };
    2.0 * g * kin * c / lorentz_denominator(cavity, d).powi(2)
}

/// Optomechanical susceptibility in the ω ≪ κ limit.
pub fn om_susceptibility_lowfreq(
    cavity: &OpticalCavity,
    mode: &MechanicalMode,
    kind: CouplingKind,
    omega: f64,
    detuning: f64,
) -> Result<Complex64> {
    cavity.validate()?;
    let chi_m = mech_susceptibility(mode, omega)?;
    Ok(optical_gain_lowfreq(cavity, kind, detuning) * chi_m)
}

/// Coefficients of the linearised output field
/// a_out = (B − C)·x + D·a_in + E·a_l.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputCoefficients {
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
    pub e: Complex64,
}

impl OutputCoefficients {
    /// Evaluates B, C, D, E at Fourier frequency ω and detuning Δ for input
    /// amplitude α_in.
    pub fn evaluate(cavity: &OpticalCavity, omega: f64, detuning: f64, alpha_in: Complex64) -> Self {
        let k0 = cavity.total_decay();
        let kin = cavity.input_coupling;
        let kl = cavity.intrinsic_loss;
        let i = Complex64::i();
        let shifted = Complex64::new(k0, 2.0 * (detuning - omega));
        let static_ = Complex64::new(k0, 2.0 * detuning);
        let b = -2.0 * i * alpha_in * cavity.dispersive_coupling * kin / (static_ * shifted);
        let c = 2.0 * alpha_in * cavity.dissipative_coupling * kin / shifted * (1.0 - 2.0 * kin / static_);
        let d = Complex64::new(kin - kl, -2.0 * (detuning - omega)) / shifted;
        let e = Complex64::new((kin * kl).sqrt(), 0.0) / shifted;
        Self { b, c, d, e }
    }

    /// Coefficient of x in the amplitude quadrature at phase φ for the
    /// given coupling: e^{−iφ}K + e^{iφ}K*, with K = B or C.
    pub fn quadrature_gain(&self, kind: CouplingKind, phase: f64) -> f64 {
        let k = match kind {
            CouplingKind::Dispersive => self.b,
            CouplingKind::Dissipative => self.c,
        };
        2.0 * (Complex64::from_polar(1.0, -phase) * k).re
    }
}

/// Complex detuning response at fixed drive frequency over `detuning_grid`
/// (rad/s). Magnitudes are what a network analyser's |S21| shows.
pub fn detuning_response_curve(
    cavity: &OpticalCavity,
    mode: &MechanicalMode,
    kind: CouplingKind,
    omega_drive: f64,
    detuning_grid: &[f64],
) -> Result<SpectrumSeries> {
    if detuning_grid.is_empty() {
        return Err(Error::InsufficientData("detuning grid is empty".into()));
    }
    cavity.validate()?;
    let chi_m = mech_susceptibility(mode, omega_drive)?;
    let values: Vec<Complex64> = detuning_grid
        .par_iter()
        .map(|&d| optical_gain_full(cavity, kind, omega_drive, d) * chi_m)
        .collect();
    SpectrumSeries::new(
        detuning_grid.to_vec(),
        SpectrumValues::Complex(values),
        "chi (arb.)",
        AxisKind::DetuningRadPerSec,
        Convention::Pointwise,
    )
}

/// Quasi-static (ω → 0) detuning that maximises |χ|, in closed form.
///
/// Dispersive: κ₀/(2√3). Dissipative: the larger-|χ| of Δ = 0 and the
/// interior stationary point 4Δ² = κ₀² − 2a/b with a = κ₀²(κ_l − κ_in),
/// b = κ₀ + 2κ_in. For κ_l ≥ 5κ_in the maximum is at Δ = 0.
pub fn optimal_detuning(cavity: &OpticalCavity, kind: CouplingKind) -> f64 {
    let k0 = cavity.total_decay();
    match kind {
        CouplingKind::Dispersive => k0 / (2.0 * 3f64.sqrt()),
        CouplingKind::Dissipative => {
            let kin = cavity.input_coupling;
            let kl = cavity.intrinsic_loss;
            let a = k0 * k0 * (kl - kin);
            let b = k0 + 2.0 * kin;
            let x_star = k0 * k0 - 2.0 * a / b;
            if x_star <= 0.0 {
                return 0.0;
            }
            let interior = 0.5 * x_star.sqrt();
            let at = |d: f64| optical_gain_lowfreq(cavity, kind, d).abs();
            if at(interior) > at(0.0) {
                interior
            } else {
                0.0
            }
        }
    }
}

/// Quasi-static optimum found numerically: coarse scan then golden-section
/// refinement of |χ_lowfreq| over Δ ∈ [0, 2κ₀].
pub fn optimal_detuning_numeric(cavity: &OpticalCavity, kind: CouplingKind) -> f64 {
    let k0 = cavity.total_decay();
    maximize_on(|d| optical_gain_lowfreq(cavity, kind, d).abs(), 0.0, 2.0 * k0)
}

/// Detuning maximising the full |χ(ω, Δ)| at drive frequency ω.
pub fn optimal_detuning_at(
    cavity: &OpticalCavity,
    mode: &MechanicalMode,
    kind: CouplingKind,
    omega: f64,
) -> Result<f64> {
    cavity.validate()?;
    mech_susceptibility(mode, omega)?;
    let k0 = cavity.total_decay();
    let span = 2.0 * k0 + 2.0 * omega.abs();
    Ok(maximize_on(
        |d| optical_gain_full(cavity, kind, omega, d).norm(),
        0.0,
        span,
    ))
}

/// Global maximiser on [lo, hi]: 4001-point scan, then golden section on
/// the bracketing cell pair.
pub(crate) fn maximize_on(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const SCAN: usize = 4000;
    let step = (hi - lo) / SCAN as f64;
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..=SCAN {
        let v = f(lo + step * i as f64);
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    let a = lo + step * best.saturating_sub(1) as f64;
    let b = (lo + step * (best + 1) as f64).min(hi);
    golden_section_max(f, a, b, 1e-15)
}

/// Golden-section search for the maximum of a unimodal `f` on [a, b].
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if (b - a).abs() <= rel_tol * (a.abs() + b.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Static transmission T(Δ) = |D(ω = 0)|² = |(κ_in − κ_l − 2iΔ)/(κ₀ + 2iΔ)|².
pub fn cavity_transmission(cavity: &OpticalCavity, detuning: f64) -> f64 {
    let num = Complex64::new(cavity.input_coupling - cavity.intrinsic_loss, -2.0 * detuning);
    let den = Complex64::new(cavity.total_decay(), 2.0 * detuning);
    (num / den).norm_sqr()
}
