use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use optomech_sense::applications::{
    cell_vibration_pressure, cooled_linewidth, cooperativity, detectable_displacement,
    effective_pressure, min_concentration, rayleigh_analysis, RayleighInput,
};
use optomech_sense::calibration::{calibration_chain, read_response_csv, read_s21_csv, responsivity, S21Sweep};
use optomech_sense::config::{SensorConfig, PAPER_TOML};
use optomech_sense::noise::{
    force_sensitivity, ldr, nep, resonant_bandwidth, synthesize_noise_spectrum, DominantTerm, NoiseBudget,
    SpectralMode,
};
use optomech_sense::plot::{Curve, Plot};
use optomech_sense::response::{detuning_response_curve, optimal_detuning, optimal_detuning_at};
use optomech_sense::spectrum::{fmt_num, logspace};
use optomech_sense::timedomain::{
    average_spectra, fit_lorentzian, psd_with, rms_db_deviation, simulate_ensemble, thermal_displacement_psd,
    transduce, Drive, SimulationConfig, TimeTrace, WelchConfig,
};
use optomech_sense::units::{angular_to_cyclic, BOLTZMANN};
use optomech_sense::{CouplingKind, Error};

use crate::output::{csv_table, OutputDir, RunManifest, BUNDLED_CONFIG, MANIFEST_NAME};
use crate::{AppCommand, Cli, Command, Format, GlobalArgs};

pub fn run(cli: Cli, args: Vec<String>) -> Result<()> {
    if let Command::Rerun { manifest } = &cli.command {
        return rerun(manifest, &cli.global);
    }
    let cfg = load_config(&cli.global)?;
    let out_dir = cli.global.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut out = OutputDir::create(&out_dir)?;
    let svg = cli.global.format == Format::CsvSvg;
    let name = command_name(&cli.command);
    match cli.command {
        Command::DetuningSweep { kind, drive_hz, points } => detuning_sweep(&cfg, &mut out, svg, kind, drive_hz, points)?,
        Command::NoiseBudget { mode } => noise_budget(&cfg, &mut out, svg, mode)?,
        Command::Calibrate { s21, response } => calibrate(&cfg, &mut out, svg, &s21, response.as_deref())?,
        Command::Applications { which } => applications(&cfg, &mut out, which)?,
        Command::Simulate {
            duration,
            ensemble,
            trace_samples,
        } => simulate(&cfg, &mut out, svg, duration, ensemble, trace_samples)?,
        Command::Rerun { .. } => unreachable!("handled above"),
    }
    out.write("config.resolved.toml", cfg.to_toml_string()?.as_bytes())?;
    let manifest = RunManifest {
        command: name,
        args,
        config: cli
            .global
            .config
            .as_ref()
            .map_or_else(|| BUNDLED_CONFIG.to_string(), |p| p.display().to_string()),
        output_dir: out_dir.display().to_string(),
        overrides: cli.global.overrides.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: Some(cfg.simulation.seed),
    };
    out.write_toml(MANIFEST_NAME, &manifest)?;
    Ok(())
}

fn command_name(c: &Command) -> String {
    match c {
        Command::DetuningSweep { .. } => "detuning-sweep".into(),
        Command::NoiseBudget { .. } => "noise-budget".into(),
        Command::Calibrate { .. } => "calibrate".into(),
        Command::Applications { which } => format!("applications {}", app_name(*which)),
        Command::Simulate { .. } => "simulate".into(),
        Command::Rerun { .. } => "rerun".into(),
    }
}

fn app_name(a: AppCommand) -> &'static str {
    match a {
        AppCommand::TraceGas => "trace-gas",
        AppCommand::CellVib => "cell-vib",
        AppCommand::Cooling => "cooling",
        AppCommand::Ldr => "ldr",
        AppCommand::ForceSens => "force-sens",
        AppCommand::Rayleigh => "rayleigh",
    }
}

fn load_config(g: &GlobalArgs) -> Result<SensorConfig> {
    let mut cfg = match &g.config {
        Some(p) => SensorConfig::from_file(p, &g.overrides)?,
        None => SensorConfig::from_toml_str(PAPER_TOML, &g.overrides)?,
    };
    if let Some(seed) = g.seed {
        cfg.simulation.seed = seed;
    }
    Ok(cfg)
}

fn rerun(manifest_path: &Path, g: &GlobalArgs) -> Result<()> {
    let m = RunManifest::read(manifest_path)?;
    let mut argv = vec!["optomech-sense".to_string()];
    argv.extend(m.args.iter().cloned());
    if let Some(out) = &g.out {
        argv.push("--out".into());
        argv.push(out.display().to_string());
    }
    let cli = <Cli as clap::Parser>::try_parse_from(&argv)
        .map_err(|e| Error::Config(format!("manifest arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Rerun { .. }) {
        return Err(Error::Config("a manifest cannot describe a rerun".into()).into());
    }
    let mut args = m.args.clone();
    if let Some(out) = &g.out {
        args.push("--out".into());
        args.push(out.display().to_string());
    }
    run(cli, args)
}

#[derive(Serialize)]
struct DetuningReport {
    kind: CouplingKind,
    mode_resonance_hz: f64,
    drive_frequency_hz: f64,
    kappa_rad_s: f64,
    input_coupling_rad_s: f64,
    intrinsic_loss_rad_s: f64,
    /// Quasi-static optimum.
    optimal_detuning_rad_s: f64,
    optimal_detuning_over_kappa: f64,
    /// Optimum of the full response at the drive frequency.
    optimal_detuning_at_drive_rad_s: f64,
    peak_magnitude: f64,
    peak_detuning_rad_s: f64,
    magnitude_at_zero: f64,
    local_maxima: usize,
}

fn detuning_sweep(
    cfg: &SensorConfig,
    out: &mut OutputDir,
    svg: bool,
    kind: Option<CouplingKind>,
    drive_hz: Option<f64>,
    points: Option<usize>,
) -> Result<()> {
    let kind = kind.unwrap_or(cfg.sensor.kind);
    let mode = cfg.sensing_mode()?;
    let cav = &cfg.cavity;
    let w = drive_hz.map_or(cfg.detuning_sweep.drive_frequency, |f| TAU * f);
    let mut sweep = cfg.detuning_sweep.clone();
    if let Some(n) = points {
        sweep.points = n;
    }
    let k0 = cav.total_decay();
    let grid = sweep.grid(k0)?;
    let curve = detuning_response_curve(cav, &mode, kind, w, &grid)?;
    let mags = curve.magnitudes();
    let d_star = optimal_detuning(cav, kind);
    let d_at = optimal_detuning_at(cav, &mode, kind, w)?;
    let (ipk, peak) = mags
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b });
    let scale = peak.max(f64::MIN_POSITIVE);
    let maxima = (1..mags.len().saturating_sub(1))
        .filter(|&i| mags[i] > mags[i - 1] && mags[i] >= mags[i + 1] && mags[i] > 1e-6 * scale)
        .count();
    let at_zero = magnitude_at_zero(cav, &mode, kind, w)?;
    out.write_with("detuning_response.csv", |b| curve.write_csv(b, "magnitude"))?;
    let report = DetuningReport {
        kind,
        mode_resonance_hz: mode.resonance_hz(),
        drive_frequency_hz: angular_to_cyclic(w),
        kappa_rad_s: k0,
        input_coupling_rad_s: cav.input_coupling,
        intrinsic_loss_rad_s: cav.intrinsic_loss,
        optimal_detuning_rad_s: d_star,
        optimal_detuning_over_kappa: d_star / k0,
        optimal_detuning_at_drive_rad_s: d_at,
        peak_magnitude: peak,
        peak_detuning_rad_s: grid[ipk],
        magnitude_at_zero: at_zero,
        local_maxima: maxima,
    };
    out.write_toml("report.toml", &report)?;
    if svg {
        let x: Vec<f64> = grid.iter().map(|d| d / k0).collect();
        let mut plot = Plot::new(&format!("{kind} response"), "detuning / kappa", "|chi| (arb.)")
            .curve(Curve::new("|chi|", x, mags));
        if d_star > 0.0 {
            plot = plot.marker(-d_star / k0, "-D*").marker(d_star / k0, "+D*");
        } else {
            plot = plot.marker(0.0, "D*");
        }
        out.write("detuning_response.svg", plot.to_svg().as_bytes())?;
    }
    println!(
        "{kind}: optimal detuning {:.6e} rad/s ({:.4} kappa), {} peak(s)",
        d_star,
        d_star / k0,
        maxima
    );
    Ok(())
}

fn magnitude_at_zero(
    cav: &optomech_sense::OpticalCavity,
    mode: &optomech_sense::MechanicalMode,
    kind: CouplingKind,
    w: f64,
) -> Result<f64> {
    Ok(detuning_response_curve(cav, mode, kind, w, &[0.0])?.magnitudes()[0])
}

#[derive(Serialize)]
struct NoiseReport {
    mode: String,
    kind: CouplingKind,
    temperature_k: f64,
    area_m2: f64,
    photon_number: f64,
    nep_pa_per_rthz: f64,
    best_frequency_hz: f64,
    band_hz: [f64; 2],
    dominant_term: DominantTerm,
    nep_at_resonance_pa_per_rthz: f64,
    peak_ratio_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    resonant_bandwidth_hz: Option<[f64; 2]>,
}

fn noise_budget(cfg: &SensorConfig, out: &mut OutputDir, svg: bool, mode_name: Option<String>) -> Result<()> {
    let name = mode_name.unwrap_or_else(|| cfg.sensor.mode.clone());
    let mode = cfg.mode(&name)?;
    let cav = &cfg.cavity;
    let kind = cfg.sensor.kind;
    let t = cfg.gas.temperature;
    let grid = cfg.noise.grid_hz()?;
    let budget = NoiseBudget::new(&mode, &cfg.gas, cav, kind, cav.detuning, cfg.sensor.area, cfg.noise.oneoverf())?;
    let comps = budget.evaluate(&grid)?;
    let report = budget.report(&grid)?;
    let rows = grid.iter().zip(&comps).map(|(f, c)| {
        vec![
            fmt_num(*f),
            fmt_num(c.intrinsic),
            fmt_num(c.gas),
            fmt_num(c.shot),
            fmt_num(c.oneoverf),
            fmt_num(c.total()),
            fmt_num(c.total().sqrt()),
            format!("{:?}", c.dominant()).to_lowercase(),
        ]
    });
    out.write(
        "noise_budget.csv",
        &csv_table(
            &[
                "freq_hz",
                "intrinsic_pa2_hz",
                "gas_pa2_hz",
                "shot_pa2_hz",
                "oneoverf_pa2_hz",
                "total_pa2_hz",
                "nep_pa_rthz",
                "dominant",
            ],
            rows,
        )?,
    )?;

    let floor = cfg.noise.shot_floor;
    let gain = SpectralMode::gain_for_peak_ratio(&mode, t, floor, cfg.noise.peak_ratio_db)?;
    let sm = SpectralMode { mode, kind, gain };
    let oneoverf = (cfg.noise.oneoverf_amplitude > 0.0).then(|| cfg.noise.oneoverf());
    let synth = synthesize_noise_spectrum(&[sm], floor, oneoverf, t, &grid, "arb./Hz")?;
    let total = synth.total.magnitudes();
    let (gas_part, int_part) = &synth.modes[0];
    let rows = (0..grid.len()).map(|i| {
        vec![
            fmt_num(grid[i]),
            fmt_num(total[i]),
            fmt_num(synth.shot[i]),
            fmt_num(synth.oneoverf[i]),
            fmt_num(gas_part[i]),
            fmt_num(int_part[i]),
            "arb./Hz".to_string(),
        ]
    });
    out.write(
        "noise_spectrum.csv",
        &csv_table(&["freq_hz", "psd", "shot", "oneoverf", "gas", "intrinsic", "unit"], rows)?,
    )?;
    let bw = resonant_bandwidth(&sm, floor, t)?;
    let at_res = nep(&mode, &cfg.gas, cav, cfg.sensor.area, kind, mode.resonance_freq, cav.detuning)?;
    let r = NoiseReport {
        mode: name.clone(),
        kind,
        temperature_k: t,
        area_m2: cfg.sensor.area,
        photon_number: cav.photon_number,
        nep_pa_per_rthz: report.nep,
        best_frequency_hz: report.best_frequency,
        band_hz: [report.band.0, report.band.1],
        dominant_term: report.dominant_term,
        nep_at_resonance_pa_per_rthz: at_res,
        peak_ratio_db: cfg.noise.peak_ratio_db,
        resonant_bandwidth_hz: bw.map(|(a, b)| [a, b]),
    };
    out.write_toml("report.toml", &r)?;
    if svg {
        let nep_curve: Vec<f64> = comps.iter().map(|c| c.total().sqrt()).collect();
        let plot = Plot::new(&format!("NEP, mode {name}"), "frequency (Hz)", "NEP (Pa/sqrt(Hz))")
            .log_y()
            .curve(Curve::new("NEP", grid.clone(), nep_curve))
            .marker(report.best_frequency, format!("{:?}", report.dominant_term).to_lowercase());
        out.write("nep.svg", plot.to_svg().as_bytes())?;
        let plot = Plot::new("synthesised noise spectrum", "frequency (Hz)", "PSD (arb./Hz)")
            .log_y()
            .curve(Curve::new("total", grid.clone(), total))
            .curve(Curve::new("shot", grid.clone(), synth.shot.clone()).dashed());
        out.write("noise_spectrum.svg", plot.to_svg().as_bytes())?;
    }
    println!(
        "best NEP {:.4e} Pa/sqrt(Hz) at {:.6e} Hz ({:?}); on resonance {:.4e}",
        report.nep, report.best_frequency, report.dominant_term, at_res
    );
    Ok(())
}

#[derive(Serialize)]
struct CalibrationReport {
    points: usize,
    saturated_points: usize,
    reference_frequency_hz: f64,
    optical_wavelength_m: f64,
    distance_m: f64,
    aperture_side_m: f64,
    max_sensor_pressure_pa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    responsivity_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    excluded_frequencies_hz: Option<Vec<f64>>,
}

fn calibrate(cfg: &SensorConfig, out: &mut OutputDir, svg: bool, s21: &Path, response: Option<&Path>) -> Result<()> {
    let cal = &cfg.calibration;
    let file = std::fs::File::open(s21).map_err(Error::Io).with_context(|| format!("opening {}", s21.display()))?;
    let (frequencies, s21_power) = read_s21_csv(file)?;
    let sweep = S21Sweep {
        frequencies,
        s21_power,
        reference_freq: angular_to_cyclic(cal.reference_frequency),
        v_ref: cal.v_ref,
        v_max: cal.v_max,
        drive_voltage: cal.drive_voltage,
        segment_scale: Vec::new(),
    };
    let chain = calibration_chain(&sweep, cal.optical_wavelength, &cal.path(), &cfg.gas)?;
    let f = chain.p_sensor.axis().to_vec();
    let d = chain.displacement.series.magnitudes();
    let ps = chain.p_sensor.magnitudes();
    let rows = (0..f.len()).map(|i| {
        vec![
            fmt_num(f[i]),
            fmt_num(d[i]),
            chain.displacement.saturated[i].to_string(),
            fmt_num(chain.p_pzt[i]),
            fmt_num(chain.diffraction[i]),
            fmt_num(chain.attenuation[i]),
            fmt_num(ps[i]),
        ]
    });
    out.write(
        "applied_pressure.csv",
        &csv_table(
            &[
                "freq_hz",
                "displacement_m",
                "saturated",
                "p_pzt_pa",
                "diffraction",
                "attenuation",
                "p_sensor_pa",
            ],
            rows,
        )?,
    )?;
    let saturated = chain.displacement.saturated.iter().filter(|s| **s).count();
    if saturated > 0 {
        eprintln!("warning: {saturated} point(s) reach the lambda/4 fringe limit");
    }
    let mut report = CalibrationReport {
        points: f.len(),
        saturated_points: saturated,
        reference_frequency_hz: sweep.reference_freq,
        optical_wavelength_m: cal.optical_wavelength,
        distance_m: cal.distance,
        aperture_side_m: cal.aperture_side,
        max_sensor_pressure_pa: ps.iter().cloned().fold(0.0, f64::max),
        responsivity_points: None,
        excluded_frequencies_hz: None,
    };
    let mut resp_curve = None;
    if let Some(path) = response {
        let file = std::fs::File::open(path).map_err(Error::Io).with_context(|| format!("opening {}", path.display()))?;
        let measured = read_response_csv(file)?;
        let r = responsivity(&measured, &chain.p_sensor)?;
        out.write_with("responsivity.csv", |b| r.series.write_csv(b, "responsivity"))?;
        report.responsivity_points = Some(r.series.len());
        report.excluded_frequencies_hz = Some(r.excluded.clone());
        resp_curve = Some(r.series);
    }
    out.write_toml("report.toml", &report)?;
    if svg {
        let plot = Plot::new("applied pressure at the sensor", "frequency (Hz)", "pressure (Pa)")
            .log_y()
            .curve(Curve::new("p_sensor", f.clone(), ps))
            .curve(Curve::new("p_pzt", f, chain.p_pzt.clone()).dashed());
        out.write("applied_pressure.svg", plot.to_svg().as_bytes())?;
        if let Some(r) = resp_curve {
            let plot = Plot::new("responsivity", "frequency (Hz)", "V/Pa")
                .log_y()
                .curve(Curve::new("responsivity", r.axis().to_vec(), r.magnitudes()));
            out.write("responsivity.svg", plot.to_svg().as_bytes())?;
        }
    }
    println!("{} points, {} saturated", report.points, saturated);
    Ok(())
}

#[derive(Serialize)]
struct TraceGasReport {
    pulse_energy_j: f64,
    pulse_duration_s: f64,
    beam_radius_m: f64,
    source_radius_m: f64,
    pulse_valid: bool,
    distance_m: f64,
    p_eff_min_pa: f64,
    mechanical_frequency_hz: f64,
    line_intensity_m_per_molec: f64,
    linewidth_per_m: f64,
    peak_pressure_pa: f64,
    number_density_per_cm3: f64,
    ppb: f64,
}

#[derive(Serialize)]
struct CellVibReport {
    frequency_hz: f64,
    displacement_m: f64,
    impedance_pa_s_per_m: f64,
    pressure_pa: f64,
    nep_pa_per_rthz: f64,
    nep_frequency_hz: f64,
    bandwidth_hz: f64,
    detectable_displacement_m: f64,
}

#[derive(Serialize)]
struct CoolingReport {
    mode: String,
    photon_number: f64,
    vacuum_coupling_rad_s: f64,
    kappa_rad_s: f64,
    linewidth_hz: f64,
    cooperativity: f64,
    /// Upper bound: maximal broadening at this cooperativity.
    cooled_linewidth_hz: f64,
    quality_factor: f64,
    cooled_quality_factor: f64,
}

#[derive(Serialize)]
struct LdrReport {
    nep_pa_per_rthz: f64,
    max_pressure_pa: f64,
    integration_time_s: f64,
    ldr_db: f64,
}

#[derive(Serialize)]
struct ForceReport {
    nep_pa_per_rthz: f64,
    area_m2: f64,
    force_sensitivity_n_per_rthz: f64,
}

#[derive(Serialize)]
struct RayleighReport {
    rayleigh_length_m: f64,
    acoustic_wavelength_m: f64,
    beam_radius_m: f64,
}

fn applications(cfg: &SensorConfig, out: &mut OutputDir, which: AppCommand) -> Result<()> {
    let a = &cfg.applications;
    let gas = &cfg.gas;
    match which {
        AppCommand::TraceGas => {
            let tg = &a.trace_gas;
            let pulse = tg.pulse();
            let line = tg.line()?;
            let lim = min_concentration(gas, &line, &pulse, tg.p_eff_min, tg.distance, tg.mechanical_frequency)?;
            let factor = effective_pressure(1.0, pulse.duration, tg.mechanical_frequency);
            let r = TraceGasReport {
                pulse_energy_j: pulse.energy,
                pulse_duration_s: pulse.duration,
                beam_radius_m: pulse.beam_radius,
                source_radius_m: pulse.source_radius(gas),
                pulse_valid: pulse.is_valid(gas),
                distance_m: tg.distance,
                p_eff_min_pa: tg.p_eff_min,
                mechanical_frequency_hz: angular_to_cyclic(tg.mechanical_frequency),
                line_intensity_m_per_molec: line.line_intensity,
                linewidth_per_m: line.linewidth,
                peak_pressure_pa: tg.p_eff_min / factor,
                number_density_per_cm3: lim.number_density,
                ppb: lim.ppb,
            };
            println!("c_min = {:.4e} molec/cm^3 = {:.3} ppb", r.number_density_per_cm3, r.ppb);
            out.write_toml("report.toml", &r)?;
        }
        AppCommand::CellVib => {
            let c = &a.cell_vib;
            let nu = angular_to_cyclic(c.frequency);
            let nu_nep = angular_to_cyclic(c.nep_frequency);
            let r = CellVibReport {
                frequency_hz: nu,
                displacement_m: c.displacement,
                impedance_pa_s_per_m: gas.acoustic_impedance,
                pressure_pa: cell_vibration_pressure(nu, c.displacement, gas),
                nep_pa_per_rthz: c.nep,
                nep_frequency_hz: nu_nep,
                bandwidth_hz: c.bandwidth,
                detectable_displacement_m: detectable_displacement(c.nep, nu_nep, gas, c.bandwidth),
            };
            let freqs = logspace(1e2, 1e6, 41);
            let amplitudes = [1e-12, 1e-11, 1e-10, 1e-9, 1e-8];
            let rows = freqs.iter().map(|&f| {
                std::iter::once(fmt_num(f))
                    .chain(amplitudes.iter().map(|&d| fmt_num(cell_vibration_pressure(f, d, gas))))
                    .collect()
            });
            out.write(
                "cell_pressure.csv",
                &csv_table(&["freq_hz", "p_1pm_pa", "p_10pm_pa", "p_100pm_pa", "p_1nm_pa", "p_10nm_pa"], rows)?,
            )?;
            println!("P = {:.4e} Pa; detectable displacement {:.4e} m", r.pressure_pa, r.detectable_displacement_m);
            out.write_toml("report.toml", &r)?;
        }
        AppCommand::Cooling => {
            let c = &a.cooling;
            let mode = cfg.mode(&c.mode)?;
            let mut cav = cfg.cavity;
            if let Some(n) = c.photon_number {
                cav.photon_number = n;
            }
            let coop = cooperativity(&cav, &mode)?;
            let g_eff = cooled_linewidth(mode.total_damping(), coop)?;
            let r = CoolingReport {
                mode: c.mode.clone(),
                photon_number: cav.photon_number,
                vacuum_coupling_rad_s: cav.vacuum_coupling,
                kappa_rad_s: cav.total_decay(),
                linewidth_hz: angular_to_cyclic(mode.total_damping()),
                cooperativity: coop,
                cooled_linewidth_hz: angular_to_cyclic(g_eff),
                quality_factor: mode.quality_factor(),
                cooled_quality_factor: mode.resonance_freq / g_eff,
            };
            println!("C = {:.4e}; linewidth {:.4e} Hz -> {:.4e} Hz", coop, r.linewidth_hz, r.cooled_linewidth_hz);
            out.write_toml("report.toml", &r)?;
        }
        AppCommand::Ldr => {
            let c = &a.ldr;
            let r = LdrReport {
                nep_pa_per_rthz: c.nep,
                max_pressure_pa: c.max_pressure,
                integration_time_s: c.integration_time,
                ldr_db: ldr(c.nep, c.max_pressure, c.integration_time)?,
            };
            println!("LDR = {:.2} dB", r.ldr_db);
            out.write_toml("report.toml", &r)?;
        }
        AppCommand::ForceSens => {
            let c = &a.force_sens;
            let r = ForceReport {
                nep_pa_per_rthz: c.nep,
                area_m2: c.area,
                force_sensitivity_n_per_rthz: force_sensitivity(c.nep, c.area)?,
            };
            println!("force sensitivity {:.4e} N/sqrt(Hz)", r.force_sensitivity_n_per_rthz);
            out.write_toml("report.toml", &r)?;
        }
        AppCommand::Rayleigh => {
            let c = &a.rayleigh;
            let res = rayleigh_analysis(RayleighInput::RayleighLength(c.rayleigh_length), c.acoustic_wavelength)?;
            let r = RayleighReport {
                rayleigh_length_m: res.rayleigh_length,
                acoustic_wavelength_m: res.wavelength,
                beam_radius_m: res.beam_radius,
            };
            println!("beam radius {:.4e} m", r.beam_radius_m);
            out.write_toml("report.toml", &r)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationReport {
    mode: String,
    seeds: Vec<u64>,
    rng: &'static str,
    dt_s: f64,
    samples: usize,
    duration_s: f64,
    temperature_k: f64,
    mean_square_m2: f64,
    equipartition_m2: f64,
    equipartition_ratio: f64,
    segment_len: usize,
    rms_deviation_db: f64,
    band_hz: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    fitted_resonance_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fitted_linewidth_hz: Option<f64>,
    warnings: Vec<String>,
}

fn simulate(
    cfg: &SensorConfig,
    out: &mut OutputDir,
    svg: bool,
    duration: Option<f64>,
    ensemble: Option<usize>,
    trace_samples: usize,
) -> Result<()> {
    let s = &cfg.simulation;
    let mode = cfg.mode(&s.mode)?;
    let duration = duration.unwrap_or(s.duration);
    let ensemble = ensemble.unwrap_or(s.ensemble).max(1);
    let mut sim = SimulationConfig::thermal(&mode, s.samples_per_period, duration, s.seed);
    sim.thermal = s.thermal;
    if s.drive_amplitude > 0.0 {
        sim.drive = Some(Drive {
            amplitude: s.drive_amplitude,
            frequency: s.drive_frequency,
            phase: s.drive_phase,
        });
    }
    let seeds: Vec<u64> = (0..ensemble as u64).map(|k| s.seed.wrapping_add(k)).collect();
    let traces = simulate_ensemble(&mode, &cfg.gas, &cfg.geometry, &sim, &seeds)?;
    let t = cfg.gas.temperature;
    let expect = BOLTZMANN * t / mode.spring_constant();
    let ms = traces.iter().map(TimeTrace::mean_square).sum::<f64>() / traces.len() as f64;

    let n = traces[0].len();
    let seg = s.segment_len.min(n).max(2);
    let psds = traces
        .iter()
        .map(|tr| psd_with(tr, &WelchConfig::hann(seg)))
        .collect::<optomech_sense::Result<Vec<_>>>()?;
    let psd = average_spectra(&psds)?;
    let f0 = mode.resonance_hz();
    let g_hz = angular_to_cyclic(mode.total_damping());
    let band = (f0 - g_hz, f0 + g_hz);
    let model = |f: f64| thermal_displacement_psd(&mode, t, f);
    let rms = rms_db_deviation(&psd, model, band)?;
    let fit = fit_lorentzian(&psd, (f0 - 3.0 * g_hz, f0 + 3.0 * g_hz)).ok();

    let first = transduce(&traces[0], &cfg.cavity, cfg.sensor.kind, cfg.cavity.detuning)?;
    let keep = trace_samples.min(first.len());
    let head = TimeTrace {
        displacement: first.displacement[..keep].to_vec(),
        detector_signal: first.detector_signal.as_ref().map(|d| d[..keep].to_vec()),
        warnings: first.warnings.clone(),
        ..first.clone()
    };
    out.write_with("trace.csv", |b| head.write_csv(b))?;
    let freqs = psd.axis().to_vec();
    let vals = psd.magnitudes();
    let analytic: Vec<f64> = freqs.iter().map(|&f| model(f)).collect::<optomech_sense::Result<_>>()?;
    let rows = (0..freqs.len()).map(|i| vec![fmt_num(freqs[i]), fmt_num(vals[i]), fmt_num(analytic[i])]);
    out.write("psd.csv", &csv_table(&["freq_hz", "psd_m2_hz", "analytic_m2_hz"], rows)?)?;
    let r = SimulationReport {
        mode: s.mode.clone(),
        seeds,
        rng: "ChaCha8",
        dt_s: sim.dt,
        samples: n,
        duration_s: duration,
        temperature_k: t,
        mean_square_m2: ms,
        equipartition_m2: expect,
        equipartition_ratio: ms / expect,
        segment_len: seg,
        rms_deviation_db: rms,
        band_hz: [band.0, band.1],
        fitted_resonance_hz: fit.map(|f| f.0),
        fitted_linewidth_hz: fit.map(|f| f.1),
        warnings: first.warnings.clone(),
    };
    out.write_toml("report.toml", &r)?;
    if svg {
        let (lo, hi) = (f0 - 10.0 * g_hz, f0 + 10.0 * g_hz);
        let idx: Vec<usize> = (0..freqs.len()).filter(|&i| freqs[i] >= lo && freqs[i] <= hi).collect();
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let plot = Plot::new("simulated displacement PSD", "frequency (Hz)", "PSD (m^2/Hz)")
            .log_y()
            .curve(Curve::new("Welch estimate", pick(&freqs), pick(&vals)))
            .curve(Curve::new("4 m gamma kT |chi|^2", pick(&freqs), pick(&analytic)).dashed());
        out.write("psd.svg", plot.to_svg().as_bytes())?;
    }
    println!(
        "equipartition <x^2>/(kT/k) = {:.4} ({:+.2}%), PSD RMS deviation {:.3} dB over {:.0}..{:.0} Hz",
        ms / expect,
        100.0 * (ms / expect - 1.0),
        rms,
        band.0,
        band.1
    );
    Ok(())
}
