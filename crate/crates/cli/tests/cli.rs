use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_optomech-sense");

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn report(dir: &Path) -> toml::Table {
    fs::read_to_string(dir.join("report.toml")).unwrap().parse().unwrap()
}

fn num(t: &toml::Table, key: &str) -> f64 {
    match &t[key] {
        toml::Value::Float(v) => *v,
        toml::Value::Integer(v) => *v as f64,
        other => panic!("{key} = {other:?}"),
    }
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = read_csv(path);
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn tmp() -> TempDir {
    tempfile::tempdir().unwrap()
}

#[test]
fn dispersive_sweep_is_double_peaked_with_zero_at_resonance() {
    let t = tmp();
    ok(t.path(), &["--out", "o", "detuning-sweep", "--kind", "dispersive"]);
    let o = t.path().join("o");
    for f in ["detuning_response.csv", "detuning_response.svg", "report.toml", "manifest.toml", "config.resolved.toml"] {
        assert!(o.join(f).is_file(), "{f}");
    }
    let r = report(&o);
    assert_eq!(num(&r, "magnitude_at_zero"), 0.0);
    assert_eq!(num(&r, "local_maxima"), 2.0);
    assert!(rel(num(&r, "optimal_detuning_over_kappa"), 1.0 / (2.0 * 3f64.sqrt())) < 1e-12);
}

#[test]
fn undercoupled_dissipative_sweep_peaks_at_zero() {
    let t = tmp();
    ok(
        t.path(),
        &[
            "--out",
            "o",
            "--format",
            "csv",
            "--override",
            "cavity.input_coupling=0.5e6",
            "--override",
            "cavity.intrinsic_loss=4e7",
            "detuning-sweep",
            "--kind",
            "dissipative",
        ],
    );
    let o = t.path().join("o");
    assert!(!o.join("detuning_response.svg").exists());
    let r = report(&o);
    assert_eq!(num(&r, "optimal_detuning_rad_s"), 0.0);
    assert_eq!(num(&r, "local_maxima"), 1.0);
    assert_eq!(num(&r, "peak_detuning_rad_s"), 0.0);
    assert!(num(&r, "magnitude_at_zero") > 0.0);
}

#[test]
fn detuning_sweep_matches_golden_fixture() {
    let t = tmp();
    ok(t.path(), &["--out", "o", "--format", "csv", "detuning-sweep", "--kind", "dispersive", "--points", "21"]);
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/detuning_dispersive_21.csv");
    let (h_want, want) = read_csv(&fixture);
    let (h_got, got) = read_csv(&t.path().join("o/detuning_response.csv"));
    assert_eq!(h_want, h_got);
    assert_eq!(want.len(), got.len());
    for (a, b) in want.iter().zip(&got) {
        for (x, y) in a.iter().zip(b) {
            let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-300), "{x} vs {y}");
        }
    }
}

#[test]
fn noise_budget_paper_and_thermal_limit() {
    let t = tmp();
    ok(t.path(), &["--out", "paper", "noise-budget"]);
    let p = t.path().join("paper");
    for f in ["noise_budget.csv", "noise_spectrum.csv", "nep.svg", "noise_spectrum.svg", "report.toml"] {
        assert!(p.join(f).is_file(), "{f}");
    }
    let r = report(&p);
    assert!(rel(num(&r, "nep_pa_per_rthz"), 100e-6) < 0.15, "{r:?}");
    assert!(r.contains_key("dominant_term"));
    let bw = r["resonant_bandwidth_hz"].as_array().unwrap();
    assert!(bw[0].as_float().unwrap() < bw[1].as_float().unwrap());

    ok(t.path(), &["--out", "limit", "--format", "csv", "noise-budget", "--mode", "thermal-limit"]);
    let nep = num(&report(&t.path().join("limit")), "nep_pa_per_rthz");
    assert!((0.5e-6..=2.0e-6).contains(&nep), "{nep}");
}

#[test]
fn more_photons_lower_off_resonance_nep() {
    let t = tmp();
    let mut last = f64::INFINITY;
    for (i, n) in ["1e17", "1e18", "1e19", "1e20", "1e22"].iter().enumerate() {
        let dir = format!("n{i}");
        let ov = format!("cavity.photon_number={n}");
        ok(t.path(), &["--out", &dir, "--format", "csv", "--override", &ov, "noise-budget"]);
        let csv = t.path().join(&dir).join("noise_budget.csv");
        let f = column(&csv, "freq_hz");
        let nep = column(&csv, "nep_pa_rthz");
        let i250 = f.iter().position(|x| (*x - 250e3).abs() < 1.0).unwrap();
        assert!(nep[i250] < last, "N = {n}: {} !< {last}", nep[i250]);
        last = nep[i250];
    }
}

fn write_s21(dir: &Path) -> PathBuf {
    let path = dir.join("s21.csv");
    let mut text = String::from("freq_hz,s21_db\n");
    for (f, db) in [(50e3, -3.0), (75e3, -1.5), (100e3, 0.0), (150e3, -2.0), (200e3, -6.0), (300e3, -12.0)] {
        text.push_str(&format!("{f},{db}\n"));
    }
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn calibrate_round_trips_injected_responsivity() {
    let t = tmp();
    write_s21(t.path());
    ok(t.path(), &["--out", "a", "calibrate", "--s21", "s21.csv"]);
    let applied = t.path().join("a/applied_pressure.csv");
    let f = column(&applied, "freq_hz");
    let p = column(&applied, "p_sensor_pa");
    assert!(p.iter().all(|v| *v > 0.0));
    assert!(column(&applied, "displacement_m").iter().all(|d| *d > 0.0));

    let injected = 0.37;
    let mut text = String::from("freq_hz,response_v\n");
    for (f, p) in f.iter().zip(&p) {
        text.push_str(&format!("{f:e},{:e}\n", injected * p));
    }
    fs::write(t.path().join("resp.csv"), text).unwrap();
    ok(t.path(), &["--out", "b", "calibrate", "--s21", "s21.csv", "--response", "resp.csv"]);
    let r = column(&t.path().join("b/responsivity.csv"), "responsivity");
    assert_eq!(r.len(), f.len());
    assert!(r.iter().all(|v| rel(*v, injected) < 1e-12), "{r:?}");
    assert_eq!(num(&report(&t.path().join("b")), "responsivity_points"), f.len() as f64);
}

#[test]
fn calibrate_zero_drive_gives_zero_pressure() {
    let t = tmp();
    write_s21(t.path());
    ok(t.path(), &["--out", "z", "--override", "calibration.v_ref=0", "calibrate", "--s21", "s21.csv"]);
    let applied = t.path().join("z/applied_pressure.csv");
    for c in ["displacement_m", "p_pzt_pa", "p_sensor_pa"] {
        assert!(column(&applied, c).iter().all(|v| *v == 0.0), "{c}");
    }
}

#[test]
fn applications_report_paper_values() {
    let t = tmp();
    let app = |name: &str| {
        ok(t.path(), &["--out", name, "applications", name]);
        report(&t.path().join(name))
    };
    let tg = app("trace-gas");
    assert!(rel(num(&tg, "ppb"), 12.5) < 0.2);
    assert!(rel(num(&tg, "ppb"), 14.93) < 5e-3);
    assert_eq!(tg["pulse_valid"].as_bool(), Some(true));
    assert_eq!(num(&tg, "pulse_energy_j"), 1e-6);

    let cv = app("cell-vib");
    assert!(rel(num(&cv, "pressure_pa"), 1.3e-2) < 0.01);
    assert!(t.path().join("cell-vib/cell_pressure.csv").is_file());

    let co = app("cooling");
    assert!(num(&co, "cooperativity") > 1.0);
    assert!(num(&co, "cooled_linewidth_hz") > num(&co, "linewidth_hz"));

    assert!(num(&app("ldr"), "ldr_db") >= 120.0);
    assert!(rel(num(&app("force-sens"), "force_sensitivity_n_per_rthz"), 1.8e-9) < 0.01);
    let w = num(&app("rayleigh"), "beam_radius_m");
    assert!((0.9e-3..=1.1e-3).contains(&w));
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let t = tmp();
    let args = |out: &'static str, seed: &'static str| {
        vec!["--out", out, "--seed", seed, "--format", "csv", "simulate", "--duration", "0.02", "--trace-samples", "1000"]
    };
    ok(t.path(), &args("a", "11"));
    ok(t.path(), &args("b", "11"));
    ok(t.path(), &args("c", "12"));
    let read = |d: &str, f: &str| fs::read(t.path().join(d).join(f)).unwrap();
    for f in ["trace.csv", "psd.csv", "report.toml"] {
        assert_eq!(read("a", f), read("b", f), "{f}");
    }
    assert_ne!(read("a", "trace.csv"), read("c", "trace.csv"));
    let r = report(&t.path().join("a"));
    assert_eq!(r["rng"].as_str(), Some("ChaCha8"));
    assert!(num(&r, "equipartition_ratio") > 0.0);
    let (header, rows) = read_csv(&t.path().join("a/trace.csv"));
    assert!(!header.is_empty());
    assert_eq!(rows.len(), 1000);
}

#[test]
fn rerun_reproduces_outputs() {
    let t = tmp();
    ok(t.path(), &["--out", "a", "--format", "csv", "detuning-sweep", "--points", "101"]);
    ok(t.path(), &["--out", "s", "--format", "csv", "--seed", "3", "simulate", "--duration", "0.01"]);
    ok(t.path(), &["--out", "a2", "rerun", "a/manifest.toml"]);
    ok(t.path(), &["--out", "s2", "rerun", "s/manifest.toml"]);
    let read = |p: &str| fs::read(t.path().join(p)).unwrap();
    assert_eq!(read("a/detuning_response.csv"), read("a2/detuning_response.csv"));
    assert_eq!(read("a/report.toml"), read("a2/report.toml"));
    assert_eq!(read("s/trace.csv"), read("s2/trace.csv"));
    assert_eq!(read("s/psd.csv"), read("s2/psd.csv"));
    let m: toml::Table = fs::read_to_string(t.path().join("s/manifest.toml")).unwrap().parse().unwrap();
    assert_eq!(m["command"].as_str(), Some("simulate"));
    assert_eq!(m["seed"].as_integer(), Some(3));
}

#[test]
fn resolved_config_reproduces_run() {
    let t = tmp();
    ok(t.path(), &["--out", "a", "--format", "csv", "--override", "cavity.detuning_hz=30e6", "noise-budget"]);
    ok(t.path(), &["--out", "b", "--format", "csv", "--config", "a/config.resolved.toml", "noise-budget"]);
    let read = |p: &str| fs::read(t.path().join(p)).unwrap();
    assert_eq!(read("a/noise_budget.csv"), read("b/noise_budget.csv"));
}

#[test]
fn thread_cap_does_not_change_results() {
    let t = tmp();
    ok(t.path(), &["--out", "a", "--format", "csv", "detuning-sweep"]);
    let out = Command::new(BIN)
        .current_dir(t.path())
        .env("OPTOMECH_SENSE_THREADS", "1")
        .args(["--out", "b", "--format", "csv", "detuning-sweep"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let read = |p: &str| fs::read(t.path().join(p)).unwrap();
    assert_eq!(read("a/detuning_response.csv"), read("b/detuning_response.csv"));
}

#[test]
fn exit_codes_distinguish_config_and_data_errors() {
    let t = tmp();
    fs::write(t.path().join("bad.toml"), "[cavity]\nnot_a_key = 1\n").unwrap();
    let out = run_in(t.path(), &["--config", "bad.toml", "noise-budget"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = run_in(t.path(), &["--override", "modes.0.effective_mass=-1", "noise-budget"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run_in(t.path(), &["--override", "simulation.samples_per_period=2", "simulate"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run_in(t.path(), &["calibrate", "--s21", "missing.csv"]);
    assert_eq!(out.status.code(), Some(3));

    fs::write(t.path().join("garbled.csv"), "freq_hz,s21_db\n1e5,abc\n").unwrap();
    let out = run_in(t.path(), &["calibrate", "--s21", "garbled.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}
