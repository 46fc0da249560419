//! Stochastic time-domain simulation of a driven, thermally excited
//! mechanical mode, Welch spectral estimation and quasi-static optical
//! transduction.
//!
//! The integrator propagates the deviation from the drive's steady-state
//! solution with the exact transition matrix of the damped oscillator and
//! adds Gaussian increments with the exact one-step covariance
//! Σ∞ − ΦΣ∞Φᵀ, Σ∞ = diag(k_BT/k, k_BT/m). This is the discrete-time image of
//! a white force with single-sided PSD 4mγk_BT, so the result carries no
//! step-size bias. Random numbers come from ChaCha8 seeded via
//! `seed_from_u64`; traces are bit-identical for a given seed and build.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::Write;

use crate::error::{ensure_non_negative, ensure_positive, invalid, Error, Result};
use crate::model::{GasEnvironment, MechanicalMode, OpticalCavity, SensorGeometry};
use crate::response::{mech_susceptibility, optical_gain_lowfreq, CouplingKind};
use crate::spectrum::{fmt_num, Convention, SpectrumSeries};
use crate::units::BOLTZMANN;

/// Continuous-wave acoustic drive P_D cos(ωt + φ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    /// Pressure amplitude (Pa).
    pub amplitude: f64,
    /// Angular frequency (rad/s).
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    #[serde(default)]
    pub drive: Option<Drive>,
    #[serde(default = "yes")]
    pub thermal: bool,
    #[serde(default)]
    pub initial_displacement: f64,
    #[serde(default)]
    pub initial_velocity: f64,
}

fn yes() -> bool {
    true
}

impl SimulationConfig {
    /// Thermal-only run sampled `per_period` times per mechanical period.
    pub fn thermal(mode: &MechanicalMode, per_period: f64, duration: f64, seed: u64) -> Self {
        Self {
            dt: TAU / mode.resonance_freq / per_period,
            duration,
            seed,
            drive: None,
            thermal: true,
            initial_displacement: 0.0,
            initial_velocity: 0.0,
        }
    }

    /// Largest admissible step: 0.05·min(2π/ω_m, 1/γ_m).
    pub fn max_dt(mode: &MechanicalMode) -> f64 {
        let period = TAU / mode.resonance_freq;
        let g = mode.total_damping();
        let limit = if g > 0.0 { period.min(1.0 / g) } else { period };
        0.05 * limit
    }

    pub fn validate(&self, mode: &MechanicalMode) -> Result<()> {
        ensure_positive("dt", self.dt)?;
        ensure_positive("duration", self.duration)?;
        if self.duration < self.dt {
            return Err(invalid("duration", "shorter than one time step"));
        }
        let max = Self::max_dt(mode);
        if self.dt > max * (1.0 + 1e-12) {
            return Err(invalid(
                "dt",
                format!("{:e} s exceeds 0.05·min(2π/ω_m, 1/γ_m) = {:e} s", self.dt, max),
            ));
        }
        if !(self.initial_displacement.is_finite() && self.initial_velocity.is_finite()) {
            return Err(invalid("initial state", "must be finite"));
        }
        if let Some(d) = self.drive {
            ensure_non_negative("drive.amplitude", d.amplitude)?;
            ensure_non_negative("drive.frequency", d.frequency)?;
            if !d.phase.is_finite() {
                return Err(invalid("drive.phase", "must be finite"));
            }
        }
        Ok(())
    }
}

/// Uniformly sampled displacement record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeTrace {
    pub t0: f64,
    pub dt: f64,
    /// x(t) in m.
    pub displacement: Vec<f64>,
    /// Detector signal in arbitrary units, once transduced.
    pub detector_signal: Option<Vec<f64>>,
    pub seed: u64,
    /// ω_m of the simulated mode (rad/s).
    pub mode_frequency: f64,
    pub warnings: Vec<String>,
}

impl TimeTrace {
    pub fn len(&self) -> usize {
        self.displacement.len()
    }

    pub fn is_empty(&self) -> bool {
        self.displacement.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    /// Mean of x² (m²).
    pub fn mean_square(&self) -> f64 {
        self.displacement.iter().map(|x| x * x).sum::<f64>() / self.len() as f64
    }

    /// Population variance of x (m²).
    pub fn variance(&self) -> f64 {
        variance(&self.displacement)
    }

    /// Writes `t_s,x_m,detector` rows; the detector column is empty when
    /// the trace has not been transduced.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_s", "x_m", "detector"])?;
        for (i, x) in self.displacement.iter().enumerate() {
            let det = self
                .detector_signal
                .as_ref()
                .map(|d| fmt_num(d[i]))
                .unwrap_or_default();
            w.write_record([fmt_num(self.time(i)), fmt_num(*x), det])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Transition matrix exp(A·dt) for ẍ + γẋ + ω₀²x = 0, all damping regimes.
pub fn transition_matrix(omega0: f64, gamma: f64, dt: f64) -> [[f64; 2]; 2] {
    let disc = omega0 * omega0 - 0.25 * gamma * gamma;
    let (c, sn) = if disc > 0.0 {
        let w = disc.sqrt();
        ((w * dt).cos(), (w * dt).sin() / w)
    } else if disc < 0.0 {
        let w = (-disc).sqrt();
        ((w * dt).cosh(), (w * dt).sinh() / w)
    } else {
        (1.0, dt)
    };
    let e = (-0.5 * gamma * dt).exp();
    [
        [e * (c + 0.5 * gamma * sn), e * sn],
        [-e * omega0 * omega0 * sn, e * (c - 0.5 * gamma * sn)],
    ]
}

/// Lower Cholesky factor of the exact one-step noise covariance.
fn step_noise_factor(phi: &[[f64; 2]; 2], var_x: f64, var_v: f64) -> [[f64; 2]; 2] {
    // Σ = Σ∞ − Φ Σ∞ Φᵀ with Σ∞ diagonal
    let s11 = var_x - (phi[0][0].powi(2) * var_x + phi[0][1].powi(2) * var_v);
    let s12 = -(phi[0][0] * phi[1][0] * var_x + phi[0][1] * phi[1][1] * var_v);
    let s22 = var_v - (phi[1][0].powi(2) * var_x + phi[1][1].powi(2) * var_v);
    let l11 = s11.max(0.0).sqrt();
    let l21 = if l11 > 0.0 { s12 / l11 } else { 0.0 };
    let l22 = (s22 - l21 * l21).max(0.0).sqrt();
    [[l11, 0.0], [l21, l22]]
}

/// Integrates m ẍ + mγ_m ẋ + kx = F_T + rζ·P_D(t)·A with A the active area
/// of `geometry` and γ_m the mode's total damping.
pub fn simulate_langevin(
    mode: &MechanicalMode,
    gas: &GasEnvironment,
    geometry: &SensorGeometry,
    cfg: &SimulationConfig,
) -> Result<TimeTrace> {
    mode.validate()?;
    cfg.validate(mode)?;
    if cfg.thermal {
        ensure_non_negative("temperature", gas.temperature)?;
    }
    let w0 = mode.resonance_freq;
    let gamma = mode.total_damping();
    let m = mode.effective_mass;
    let n = (cfg.duration / cfg.dt).floor() as usize + 1;

    // steady-state response to the drive, x_p = Re[χ_m F₀ e^{−i(ωt+φ)}]
    let (xp_amp, drive_w, drive_phase) = match cfg.drive {
        Some(d) if d.amplitude > 0.0 => {
            geometry.validate()?;
            let force = mode.participation_ratio * mode.overlap.abs() * d.amplitude * geometry.active_area();
            let chi = mech_susceptibility(mode, d.frequency)?;
            (chi * force, d.frequency, d.phase)
        }
        _ => (Complex64::new(0.0, 0.0), 0.0, 0.0),
    };
    let particular = |t: f64| -> (f64, f64) {
        let rot = Complex64::from_polar(1.0, -(drive_w * t + drive_phase));
        let z = xp_amp * rot;
        (z.re, (Complex64::new(0.0, -drive_w) * z).re)
    };

    let phi = transition_matrix(w0, gamma, cfg.dt);
    let kt = BOLTZMANN * gas.temperature;
    let noise = if cfg.thermal && gamma > 0.0 && kt > 0.0 {
        step_noise_factor(&phi, kt / mode.spring_constant(), kt / m)
    } else {
        [[0.0; 2]; 2]
    };

    let (xp0, vp0) = particular(0.0);
    let mut y = cfg.initial_displacement - xp0;
    let mut v = cfg.initial_velocity - vp0;
    let scale = [
        (kt / mode.spring_constant()).sqrt(),
        xp_amp.norm(),
        cfg.initial_displacement.abs(),
        cfg.initial_velocity.abs() / w0,
    ]
    .into_iter()
    .fold(f64::MIN_POSITIVE, f64::max);
    let blowup = 1e6 * scale;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = cfg.dt * i as f64;
        let x = y + particular(t).0;
        if !x.is_finite() || x.abs() > blowup {
            return Err(Error::Diverged {
                time: t,
                suggested_dt: 0.5 * SimulationConfig::max_dt(mode).min(cfg.dt),
            });
        }
        out.push(x);
        let ny = phi[0][0] * y + phi[0][1] * v;
        let nv = phi[1][0] * y + phi[1][1] * v;
        y = ny;
        v = nv;
        if noise[0][0] > 0.0 || noise[1][1] > 0.0 {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            y += noise[0][0] * a;
            v += noise[1][0] * a + noise[1][1] * b;
        }
    }
    Ok(TimeTrace {
        t0: 0.0,
        dt: cfg.dt,
        displacement: out,
        detector_signal: None,
        seed: cfg.seed,
        mode_frequency: w0,
        warnings: Vec::new(),
    })
}

/// Independent runs for each seed, in parallel, returned in seed order.
pub fn simulate_ensemble(
    mode: &MechanicalMode,
    gas: &GasEnvironment,
    geometry: &SensorGeometry,
    cfg: &SimulationConfig,
    seeds: &[u64],
) -> Result<Vec<TimeTrace>> {
    seeds
        .par_iter()
        .map(|&seed| simulate_langevin(mode, gas, geometry, &SimulationConfig { seed, ..*cfg }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            // periodic Hann, the usual choice for spectral averaging
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    pub segment_len: usize,
    /// Fractional overlap in [0, 1).
    pub overlap: f64,
    pub window: Window,
    /// Subtract each segment's mean before windowing.
    pub remove_mean: bool,
}

impl WelchConfig {
    pub fn hann(segment_len: usize) -> Self {
        Self {
            segment_len,
            overlap: 0.5,
            window: Window::Hann,
            remove_mean: true,
        }
    }
}

/// Welch single-sided PSD of `samples` at rate `fs`. Returns bin
/// frequencies (Hz, from 0 to Nyquist) and densities (units²/Hz), scaled as
/// 2|X|²/(fs·Σw²) with the DC and Nyquist bins not doubled.
pub fn welch(samples: &[f64], fs: f64, cfg: &WelchConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_positive("sample rate", fs)?;
    let len = cfg.segment_len;
    if len < 2 {
        return Err(invalid("segment_len", "must be at least 2"));
    }
    if len > samples.len() {
        return Err(Error::InsufficientData(format!(
            "segment of {len} samples is longer than the {}-sample trace",
            samples.len()
        )));
    }
    if !(0.0..1.0).contains(&cfg.overlap) {
        return Err(invalid("overlap", "must lie in [0, 1)"));
    }
    let hop = (((1.0 - cfg.overlap) * len as f64).round() as usize).max(1);
    let count = (samples.len() - len) / hop + 1;
    let window = cfg.window.coefficients(len);
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let bins = len / 2 + 1;

    // fixed blocks keep the summation order independent of thread count
    const BLOCK: usize = 16;
    let blocks: Vec<Vec<f64>> = (0..count.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; bins];
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for s in (b * BLOCK)..((b + 1) * BLOCK).min(count) {
                let seg = &samples[s * hop..s * hop + len];
                let mean = if cfg.remove_mean {
                    seg.iter().sum::<f64>() / len as f64
                } else {
                    0.0
                };
                for ((z, x), w) in buf.iter_mut().zip(seg).zip(&window) {
                    *z = Complex64::new((x - mean) * w, 0.0);
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for (a, z) in acc.iter_mut().zip(&buf) {
                    *a += z.norm_sqr();
                }
            }
            acc
        })
        .collect();
    let mut psd = vec![0.0; bins];
    for block in &blocks {
        for (p, a) in psd.iter_mut().zip(block) {
            *p += a;
        }
    }
    let norm = 1.0 / (fs * w2 * count as f64);
    for (k, p) in psd.iter_mut().enumerate() {
        let edge = k == 0 || (len % 2 == 0 && k == len / 2);
        *p *= if edge { norm } else { 2.0 * norm };
    }
    let freqs = (0..bins).map(|k| k as f64 * fs / len as f64).collect();
    Ok((freqs, psd))
}

/// Welch estimate with `segments` Hann-windowed, half-overlapping
/// segments spanning the whole trace (segment length 2n/(K+1)).
pub fn psd_estimate(trace: &TimeTrace, segments: usize) -> Result<SpectrumSeries> {
    if segments == 0 {
        return Err(invalid("segments", "must be at least 1"));
    }
    let len = 2 * trace.len() / (segments + 1);
    if len < 2 {
        return Err(Error::InsufficientData(format!(
            "{segments} segments need at least {} samples",
            segments + 1
        )));
    }
    psd_with(trace, &WelchConfig::hann(len))
}

/// Welch estimate of the displacement PSD (m²/Hz) with explicit settings.
pub fn psd_with(trace: &TimeTrace, cfg: &WelchConfig) -> Result<SpectrumSeries> {
    let (f, p) = welch(&trace.displacement, trace.sample_rate(), cfg)?;
    SpectrumSeries::real_hz(f, p, "m^2/Hz", Convention::SingleSidedHz)
}

/// Pointwise mean of spectra sharing one axis (ensemble averaging).
pub fn average_spectra(spectra: &[SpectrumSeries]) -> Result<SpectrumSeries> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::InsufficientData("no spectra to average".into()))?;
    let mut acc = first.magnitudes();
    for s in &spectra[1..] {
        if s.axis() != first.axis() {
            return Err(Error::GridMismatch("spectra have different frequency axes".into()));
        }
        for (a, v) in acc.iter_mut().zip(s.magnitudes()) {
            *a += v;
        }
    }
    let k = spectra.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    SpectrumSeries::real_hz(first.axis().to_vec(), acc, first.unit(), first.convention())
}

/// Fluctuation-dissipation displacement PSD 4mγ_m k_BT·|χ_m|² (m²/Hz) at
/// `f_hz`, the spectrum [`simulate_langevin`] should reproduce.
pub fn thermal_displacement_psd(mode: &MechanicalMode, temperature: f64, f_hz: f64) -> Result<f64> {
    let s_f = 4.0 * mode.effective_mass * mode.total_damping() * BOLTZMANN * temperature;
    Ok(s_f * mech_susceptibility(mode, TAU * f_hz)?.norm_sqr())
}

/// RMS of 10·log10(estimate/model) over the bins inside `band` (Hz).
pub fn rms_db_deviation(
    psd: &SpectrumSeries,
    model: impl Fn(f64) -> Result<f64>,
    band: (f64, f64),
) -> Result<f64> {
    let mut sq = 0.0;
    let mut n = 0usize;
    for (f, p) in psd.axis().iter().zip(psd.magnitudes()) {
        if *f >= band.0 && *f <= band.1 {
            let m = model(*f)?;
            if !(m > 0.0 && p > 0.0) {
                return Err(Error::Data(format!("non-positive PSD at {f} Hz")));
            }
            sq += (10.0 * (p / m).log10()).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData(format!(
            "no PSD bins inside {:.6e}..{:.6e} Hz",
            band.0, band.1
        )));
    }
    Ok((sq / n as f64).sqrt())
}

/// Fits 1/PSD ≈ c·((f − f₀)² + (Γ/2)²) over `band` (Hz) and returns
/// (f₀, Γ) in Hz, Γ the full linewidth. Valid for Q ≫ 1.
pub fn fit_lorentzian(psd: &SpectrumSeries, band: (f64, f64)) -> Result<(f64, f64)> {
    let centre = 0.5 * (band.0 + band.1);
    let half = 0.5 * (band.1 - band.0);
    let pts: Vec<(f64, f64)> = psd
        .axis()
        .iter()
        .zip(psd.magnitudes())
        .filter(|(f, p)| **f >= band.0 && **f <= band.1 && *p > 0.0)
        .map(|(f, p)| ((f - centre) / half, 1.0 / p))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData("fewer than 3 bins in the fit band".into()));
    }
    // normal equations for y = b0 + b1 x + b2 x², weighted by 1/y²
    // (relative errors of a Welch estimate are uniform)
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (x, y) in &pts {
        let basis = [1.0, *x, x * x];
        let w = 1.0 / (y * y);
        for r in 0..3 {
            aty[r] += w * basis[r] * y;
            for c in 0..3 {
                ata[r][c] += w * basis[r] * basis[c];
            }
        }
    }
    let b = solve3(ata, aty).ok_or_else(|| Error::Singular("Lorentzian fit is ill-conditioned".into()))?;
    if b[2] <= 0.0 {
        return Err(Error::Data("fit band does not contain a resonance peak".into()));
    }
    let x0 = -b[1] / (2.0 * b[2]);
    let width2 = b[0] / b[2] - x0 * x0;
    if width2 <= 0.0 {
        return Err(Error::Data("fitted linewidth is not positive".into()));
    }
    Ok((centre + x0 * half, 2.0 * width2.sqrt() * half))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Quasi-static optical readout: detector(t) = (χ/χ_m)|_{ω→0}(Δ)·x(t).
/// Adds a warning when ω_m is not small compared with κ₀.
pub fn transduce(trace: &TimeTrace, cavity: &OpticalCavity, kind: CouplingKind, detuning: f64) -> Result<TimeTrace> {
    cavity.validate()?;
    let gain = optical_gain_lowfreq(cavity, kind, detuning);
    let mut out = trace.clone();
    if trace.mode_frequency > 0.1 * cavity.total_decay() {
        out.warnings.push(format!(
            "quasi-static readout assumes ω_m ≪ κ₀; ω_m/κ₀ = {:.3}",
            trace.mode_frequency / cavity.total_decay()
        ));
    }
    out.detector_signal = Some(trace.displacement.iter().map(|x| gain * x).collect());
    Ok(out)
}
