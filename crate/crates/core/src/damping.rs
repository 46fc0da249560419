//! Fluidic damping of the resonator: viscous drag, squeeze-film damping
//! against the substrate, and separation of a measured damping rate into
//! intrinsic and gas parts.
//!
//! Characteristic lengths `l` are stored in the cyclic convention (already
//! divided by 2π), so that the cyclic gas damping rate is simply µ·l/m and
//! the angular rate is 2π·µ·l/m.

use serde::Serialize;
use std::f64::consts::{PI, TAU};

use crate::error::{ensure_positive, Error, Result};
use crate::model::{derive_geometry, GasEnvironment, MechanicalMode, SensorGeometry};

/// Drag coefficient of a disk moving along its axis.
pub const XI_VERTICAL_DISK: f64 = 0.85;
/// Drag coefficient of a free sphere.
pub const XI_SPHERE: f64 = 1.0;
/// Drag coefficient of a disk moving in its own plane.
pub const XI_HORIZONTAL_DISK: f64 = 0.567;

/// Fluidic damping budget of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DampingBudget {
    /// Drag length, cyclic convention (m).
    pub l_drag: f64,
    /// Squeeze-film length, cyclic convention (m).
    pub l_squeeze: f64,
    /// rad/s
    pub gamma_drag: f64,
    /// rad/s
    pub gamma_squeeze: f64,
    /// rad/s
    pub gamma_gas_total: f64,
    /// rad/s
    pub gamma_intrinsic: f64,
    pub drag_coefficient: f64,
}

impl DampingBudget {
    /// Models drag and squeeze-film damping for `mode` on `geometry`.
    /// The intrinsic rate is taken from the mode.
    pub fn model(
        geometry: &SensorGeometry,
        mode: &MechanicalMode,
        gas: &GasEnvironment,
        xi: f64,
    ) -> Result<Self> {
        let l_drag = drag_length(geometry, mode, xi)?;
        let l_squeeze = squeeze_length(geometry, mode)?;
        let gamma_drag = gas_damping_rate(l_drag, gas, mode)?;
        let gamma_squeeze = gas_damping_rate(l_squeeze, gas, mode)?;
        Ok(Self {
            l_drag,
            l_squeeze,
            gamma_drag,
            gamma_squeeze,
            gamma_gas_total: gamma_drag + gamma_squeeze,
            gamma_intrinsic: mode.intrinsic_damping,
            drag_coefficient: xi,
        })
    }
}

/// Squeeze-film shape factor of an annular plate with radius ratio β:
/// G(β) = 1 − β⁴ + (1 − β²)²/ln β, with G(0) = 1.
///
/// Near β = 1 the closed form cancels to O((1 − β²)³); there the equivalent
/// series G = u²·N(u)/L(u) with u = 1 − β², L = −ln(1 − u) and
/// N = Σ_{j≥2} (j−1)/(j(j+1)) uʲ is used instead.
pub fn squeeze_shape_factor(beta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return Err(crate::error::invalid(
            "beta",
            format!("radius ratio must lie in [0, 1), got {beta}"),
        ));
    }
    if beta == 0.0 {
        return Ok(1.0);
    }
    let u = 1.0 - beta * beta;
    if u > 0.5 {
        return Ok(1.0 - beta.powi(4) + u * u / beta.ln());
    }
    let mut n = 0.0;
    let mut term = u;
    for j in 2..400 {
        term *= u;
        let jf = j as f64;
        let add = term * (jf - 1.0) / (jf * (jf + 1.0));
        n += add;
        if add < n * 1e-17 {
            break;
        }
    }
    let l = -(-u).ln_1p();
    Ok(u * u * n / l)
}

/// β′ = √(1 − (1 − β²)·m/M): the radius ratio of an annulus with the same
/// outer radius whose area fraction equals the effective-mass fraction.
pub fn modified_beta(beta: f64, mass_ratio: f64) -> f64 {
    (1.0 - (1.0 - beta * beta) * mass_ratio).max(0.0).sqrt()
}

fn mass_ratio(geometry: &SensorGeometry, mode: &MechanicalMode) -> Result<f64> {
    mode.validate()?;
    let total = derive_geometry(geometry)?.total_mass;
    let ratio = mode.effective_mass / total;
    // tolerate rounding when m is set to exactly M from another route
    if ratio > 1.0 + 1e-12 {
        return Err(Error::InvalidMode(format!(
            "effective mass {:.4e} kg exceeds total mass {:.4e} kg",
            mode.effective_mass, total
        )));
    }
    Ok(ratio.min(1.0))
}

/// Drag length l_drag = 6πξ√(A·m/M)/2π (cyclic convention).
pub fn drag_length(geometry: &SensorGeometry, mode: &MechanicalMode, xi: f64) -> Result<f64> {
    ensure_positive("xi", xi)?;
    let ratio = mass_ratio(geometry, mode)?;
    Ok(drag_length_for(geometry.area(), ratio, xi))
}

/// Drag length from area, m/M and ξ directly.
pub fn drag_length_for(area: f64, mass_ratio: f64, xi: f64) -> f64 {
    6.0 * PI * xi * (area * mass_ratio).sqrt() / TAU
}

/// Squeeze-film length l_squeeze = 3πR⁴G(β′)/(2h³)/2π (cyclic convention).
pub fn squeeze_length(geometry: &SensorGeometry, mode: &MechanicalMode) -> Result<f64> {
    let ratio = mass_ratio(geometry, mode)?;
    let beta_prime = modified_beta(geometry.beta_ratio(), ratio);
    if beta_prime >= 1.0 {
        return Err(Error::DegenerateMode(
            "modified radius ratio is 1: the mode has no moving area".into(),
        ));
    }
    squeeze_length_for(geometry.major_radius, beta_prime, geometry.substrate_gap)
}

/// Squeeze-film length for outer radius R, (modified) radius ratio β and gap h.
pub fn squeeze_length_for(outer_radius: f64, beta: f64, gap: f64) -> Result<f64> {
    ensure_positive("outer_radius", outer_radius)?;
    ensure_positive("substrate_gap", gap)?;
    if beta >= 1.0 {
        return Err(Error::DegenerateMode("radius ratio is 1: no moving area".into()));
    }
    let g = squeeze_shape_factor(beta)?;
    Ok(3.0 * PI * outer_radius.powi(4) * g / (2.0 * gap.powi(3)) / TAU)
}

/// Angular gas damping rate for a cyclic-convention length: γ/2π = µ·l/m.
pub fn gas_damping_rate(length: f64, gas: &GasEnvironment, mode: &MechanicalMode) -> Result<f64> {
    if !(length.is_finite() && length >= 0.0) {
        return Err(crate::error::invalid("length", format!("must be >= 0, got {length}")));
    }
    ensure_positive("effective_mass", mode.effective_mass)?;
    if !(gas.viscosity.is_finite() && gas.viscosity >= 0.0) {
        return Err(crate::error::invalid("viscosity", "must be >= 0"));
    }
    Ok(TAU * gas.viscosity * length / mode.effective_mass)
}

/// Inverse of [`gas_damping_rate`]: the cyclic-convention length that
/// produces the angular rate `gamma_gas`.
pub fn viscous_length(gamma_gas: f64, gas: &GasEnvironment, mode: &MechanicalMode) -> Result<f64> {
    ensure_positive("viscosity", gas.viscosity)?;
    Ok(mode.effective_mass * gamma_gas / (TAU * gas.viscosity))
}

/// Substrate gap h* at which the squeeze-film and drag lengths are equal:
/// h* = (R⁴G(β′)/(4ξ√(A·m/M)))^{1/3}.
pub fn crossover_height(geometry: &SensorGeometry, mode: &MechanicalMode, xi: f64) -> Result<f64> {
    ensure_positive("xi", xi)?;
    let ratio = mass_ratio(geometry, mode)?;
    let beta_prime = modified_beta(geometry.beta_ratio(), ratio);
    if beta_prime >= 1.0 {
        return Err(Error::DegenerateMode(
            "modified radius ratio is 1: the mode has no moving area".into(),
        ));
    }
    let g = squeeze_shape_factor(beta_prime)?;
    let drag_root = (geometry.area() * ratio).sqrt();
    Ok((geometry.major_radius.powi(4) * g / (4.0 * xi * drag_root)).cbrt())
}

/// Substrate gap that produces a given squeeze-film length (cyclic convention).
pub fn gap_for_squeeze_length(
    geometry: &SensorGeometry,
    mode: &MechanicalMode,
    l_squeeze: f64,
) -> Result<f64> {
    ensure_positive("l_squeeze", l_squeeze)?;
    let at_unit_gap = squeeze_length(
        &SensorGeometry {
            substrate_gap: 1.0,
            ..*geometry
        },
        mode,
    )?;
    Ok((at_unit_gap / l_squeeze).cbrt())
}

/// One point of a damping-versus-static-pressure sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PressurePoint {
    /// Pa
    pub pressure: f64,
    /// Total damping γ_m (rad/s).
    pub gamma_total: f64,
}

impl PressurePoint {
    /// Builds a point from instrument units: mbar and cyclic Hz.
    pub fn from_mbar_hz(pressure_mbar: f64, gamma_total_hz: f64) -> Self {
        Self {
            pressure: pressure_mbar * 100.0,
            gamma_total: crate::units::cyclic_to_angular(gamma_total_hz),
        }
    }
}

/// Least-squares line γ(p) = intercept + slope·p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineFit {
    /// rad/s
    pub intercept: f64,
    /// rad/s per Pa
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DampingDecomposition {
    /// Plateau (minimum) rate, rad/s.
    pub gamma_intrinsic: f64,
    /// γ_total(reference) − γ_intrinsic, rad/s.
    pub gamma_gas_at_reference: f64,
    /// Pressure at which the gas part is reported (highest swept), Pa.
    pub reference_pressure: f64,
    /// Pressure of the plateau point, Pa.
    pub plateau_pressure: f64,
    /// Set when the minimum is not at the lowest pressure or the rates are
    /// not monotone in pressure.
    pub ambiguous_plateau: bool,
    /// Affine least-squares fit over all points.
    pub affine_fit: Option<AffineFit>,
}

/// Splits a pressure sweep into intrinsic (plateau minimum) and gas
/// (remainder at the highest pressure) damping.
pub fn decompose_damping(sweep: &[PressurePoint]) -> Result<DampingDecomposition> {
    if sweep.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 pressure points, got {}",
            sweep.len()
        )));
    }
    for p in sweep {
        if !(p.pressure.is_finite() && p.pressure > 0.0) {
            return Err(Error::Data(format!("pressure must be > 0, got {}", p.pressure)));
        }
        if !(p.gamma_total.is_finite() && p.gamma_total >= 0.0) {
            return Err(Error::Data(format!("damping must be >= 0, got {}", p.gamma_total)));
        }
    }
    let mut points = sweep.to_vec();
    points.sort_by(|a, b| a.pressure.total_cmp(&b.pressure));
    let lowest = points[0];
    let highest = points[points.len() - 1];
    let decades = (highest.pressure / lowest.pressure).log10();
    if decades < 3.0 {
        return Err(Error::InsufficientData(format!(
            "sweep spans {decades:.2} decades of pressure; at least 3 are needed"
        )));
    }
    let plateau = points
        .iter()
        .copied()
        .min_by(|a, b| a.gamma_total.total_cmp(&b.gamma_total))
        .expect("non-empty");
    let monotone = points.windows(2).all(|w| w[1].gamma_total >= w[0].gamma_total);
    let ambiguous_plateau = plateau.pressure != lowest.pressure || !monotone;

    Ok(DampingDecomposition {
        gamma_intrinsic: plateau.gamma_total,
        gamma_gas_at_reference: highest.gamma_total - plateau.gamma_total,
        reference_pressure: highest.pressure,
        plateau_pressure: plateau.pressure,
        ambiguous_plateau,
        affine_fit: affine_fit(&points),
    })
}

fn affine_fit(points: &[PressurePoint]) -> Option<AffineFit> {
    let n = points.len() as f64;
    let mean_p = points.iter().map(|p| p.pressure).sum::<f64>() / n;
    let mean_g = points.iter().map(|p| p.gamma_total).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for p in points {
        let dx = p.pressure - mean_p;
        sxx += dx * dx;
        sxy += dx * (p.gamma_total - mean_g);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(AffineFit {
        intercept: mean_g - slope * mean_p,
        slope,
    })
}

/// Reads a pressure sweep CSV with columns `pressure_mbar, gamma_total_hz`.
pub fn read_pressure_sweep<R: std::io::Read>(reader: R) -> Result<Vec<PressurePoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("missing column `{name}`")))
    };
    let (ip, ig) = (col("pressure_mbar")?, col("gamma_total_hz")?);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |j: usize| -> Result<f64> {
            rec.get(j)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Data(format!("row {}: bad number in column {}", i + 2, j + 1)))
        };
        out.push(PressurePoint::from_mbar_hz(parse(ip)?, parse(ig)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{angular_to_cyclic, cyclic_to_angular};
    use proptest::prelude::*;

    fn paper_mode_half_mass() -> (SensorGeometry, MechanicalMode) {
        let g = SensorGeometry::paper_microdisk();
        let m = MechanicalMode {
            effective_mass: 0.5 * g.total_mass(),
            ..MechanicalMode::paper_flapping()
        };
        (g, m)
    }

    #[test]
    fn drag_length_paper_device() {
        let (g, m) = paper_mode_half_mass();
        let l = drag_length(&g, &m, XI_VERTICAL_DISK).unwrap();
        assert!(l > 0.39e-3 && l < 0.40e-3, "l_drag = {l}");
        // independent value 3·0.85·√(A/2)
        assert!((l - 3.937_639_969_390_984e-4).abs() < 1e-12);
    }

    #[test]
    fn drag_length_arithmetic_oracle() {
        assert!((drag_length_for(1e-8, 1.0, 1.0) - 3e-4).abs() < 1e-18);
        assert_eq!(drag_length_for(1e-8, 0.0, 1.0), 0.0);
    }

    #[test]
    fn drag_length_rejects_heavy_mode() {
        let (g, m) = paper_mode_half_mass();
        let heavy = MechanicalMode {
            effective_mass: 2.0 * g.total_mass(),
            ..m
        };
        assert!(matches!(drag_length(&g, &heavy, 0.85), Err(Error::InvalidMode(_))));
    }

    #[test]
    fn gas_damping_examples() {
        let gas = GasEnvironment::air();
        let m = MechanicalMode::paper_flapping();
        let drag = angular_to_cyclic(gas_damping_rate(0.39e-3, &gas, &m).unwrap());
        assert!(drag > 62.0 && drag < 64.0, "{drag}");
        let total = angular_to_cyclic(gas_damping_rate(8.1e-3, &gas, &m).unwrap());
        assert!((total - 1325.45).abs() < 0.01, "{total}");
        let vacuum = GasEnvironment { viscosity: 0.0, ..gas };
        assert_eq!(gas_damping_rate(8.1e-3, &vacuum, &m).unwrap(), 0.0);
    }

    #[test]
    fn shape_factor_values() {
        // mpmath, 40 digits
        let cases = [
            (0.5, 0.125_984_039_499_958_08),
            (0.707, 0.028_682_084_134_670_523),
            (0.9, 0.001_266_900_924_820_500_8),
            (0.999, 1.332_666_688_900_008_5e-9),
            (1e-6, 0.927_617_586_349_602_8),
        ];
        for (b, want) in cases {
            let got = squeeze_shape_factor(b).unwrap();
            assert!((got - want).abs() <= 1e-13 * want, "G({b}) = {got}, want {want}");
        }
        assert_eq!(squeeze_shape_factor(0.0).unwrap(), 1.0);
        assert!(squeeze_shape_factor(1.0).is_err());
    }

    #[test]
    fn shape_factor_limits() {
        // G → 1 only logarithmically: G(β) = 1 + 1/ln β + O(β²)
        for b in [1e-6, 1e-30, 1e-300] {
            let g = squeeze_shape_factor(b).unwrap();
            assert!((g - (1.0 + 1.0 / f64::ln(b))).abs() < 1e-11, "G({b}) = {g}");
        }
        assert!((1.0 - squeeze_shape_factor(1e-300).unwrap()) < 1.5e-3);
        assert!(squeeze_shape_factor(1.0 - 1e-6).unwrap().abs() < 1e-3);
        // branch boundary u = 0.5 is continuous
        let b = 0.5f64.sqrt();
        let lo = squeeze_shape_factor(b - 1e-12).unwrap();
        let hi = squeeze_shape_factor(b + 1e-12).unwrap();
        assert!((lo - hi).abs() < 1e-12);
    }

    #[test]
    fn squeeze_length_high_precision() {
        let l = squeeze_length_for(148e-6, 0.707, 5e-6).unwrap();
        assert!((l - 0.082_567_439_591_298_42).abs() < 1e-15, "{l}");
    }

    #[test]
    fn squeeze_inferred_from_measured_total() {
        // l = 8.1 mm measured, l_drag = 0.4 mm modeled
        let inferred: f64 = 8.1e-3 - 0.4e-3;
        assert!((inferred - 7.7e-3).abs() < 1e-12);
        let (g, m) = paper_mode_half_mass();
        let h = gap_for_squeeze_length(&g, &m, inferred).unwrap();
        let back = squeeze_length(&SensorGeometry { substrate_gap: h, ..g }, &m).unwrap();
        assert!((back - inferred).abs() < 1e-15);
    }

    #[test]
    fn squeeze_degenerate_mode() {
        let g = SensorGeometry::paper_microdisk();
        let m = MechanicalMode {
            effective_mass: 1e-30,
            ..MechanicalMode::paper_flapping()
        };
        assert!(matches!(squeeze_length(&g, &m), Err(Error::DegenerateMode(_))));
    }

    #[test]
    fn decomposition_paper_sweep() {
        let sweep = [
            PressurePoint::from_mbar_hz(1000.0, 1430.0),
            PressurePoint::from_mbar_hz(44.0, 535.0),
            PressurePoint::from_mbar_hz(0.056, 150.0),
        ];
        let d = decompose_damping(&sweep).unwrap();
        assert!((angular_to_cyclic(d.gamma_intrinsic) - 150.0).abs() < 1e-10);
        assert!((angular_to_cyclic(d.gamma_gas_at_reference) - 1280.0).abs() < 1e-10);
        assert_eq!(d.reference_pressure, 1e5);
        assert!(!d.ambiguous_plateau);
    }

    #[test]
    fn decomposition_errors_and_warnings() {
        assert!(matches!(
            decompose_damping(&[PressurePoint::from_mbar_hz(1000.0, 1430.0)]),
            Err(Error::InsufficientData(_))
        ));
        // two decades only
        assert!(decompose_damping(&[
            PressurePoint::from_mbar_hz(1000.0, 1430.0),
            PressurePoint::from_mbar_hz(10.0, 300.0),
        ])
        .is_err());
        let d = decompose_damping(&[
            PressurePoint::from_mbar_hz(1000.0, 1430.0),
            PressurePoint::from_mbar_hz(1.0, 140.0),
            PressurePoint::from_mbar_hz(0.01, 150.0),
        ])
        .unwrap();
        assert!(d.ambiguous_plateau);
    }

    #[test]
    fn crossover_order_of_magnitude() {
        // A ≈ R², m = M, β ≈ 0  →  h* ~ R
        let r = 100e-6;
        let g = SensorGeometry {
            major_radius: r,
            minor_radius: 1e-12,
            thickness: 1e-6,
            density: 2650.0,
            substrate_gap: 1e-6,
            active_fraction: 1.0,
        };
        let m = MechanicalMode {
            effective_mass: g.total_mass(),
            ..MechanicalMode::paper_flapping()
        };
        let h = crossover_height(&g, &m, 0.85).unwrap();
        assert!(h > 0.3 * r && h < 3.0 * r, "h* = {h}");
        let h_big = crossover_height(&g, &m, 1e12).unwrap();
        assert!(h_big < 1e-3 * h);
    }

    #[test]
    fn crossover_matches_bisection() {
        let (g, m) = paper_mode_half_mass();
        let h = crossover_height(&g, &m, 0.85).unwrap();
        let l_drag = drag_length(&g, &m, 0.85).unwrap();
        // independent root find on l_squeeze(h) − l_drag
        let f = |gap: f64| squeeze_length(&SensorGeometry { substrate_gap: gap, ..g }, &m).unwrap() - l_drag;
        let (mut lo, mut hi) = (1e-7f64, 1e-2f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((h - lo).abs() / h < 1e-9, "closed form {h}, bisection {lo}");
        let at = squeeze_length(&SensorGeometry { substrate_gap: h, ..g }, &m).unwrap();
        assert!((at - l_drag).abs() / l_drag < 1e-9);
        assert!((h - 1.979_521_214_548_068e-5).abs() < 1e-18);
    }

    #[test]
    fn budget_adds_up() {
        let (g, m) = paper_mode_half_mass();
        let b = DampingBudget::model(&g, &m, &GasEnvironment::air(), 0.85).unwrap();
        assert_eq!(b.gamma_gas_total, b.gamma_drag + b.gamma_squeeze);
        assert!(b.l_squeeze > b.l_drag);
    }

    #[test]
    fn sweep_csv() {
        let text = "pressure_mbar, gamma_total_hz\n1000,1430\n44,535\n0.056,150\n";
        let pts = read_pressure_sweep(text.as_bytes()).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0].pressure, 1e5);
        assert_eq!(pts[2].gamma_total, cyclic_to_angular(150.0));
    }

    proptest! {
        #[test]
        fn squeeze_inverse_cube(h in 1e-7f64..1e-3, beta in 0.0f64..0.99) {
            let a = squeeze_length_for(148e-6, beta, h).unwrap();
            let b = squeeze_length_for(148e-6, beta, 2.0 * h).unwrap();
            prop_assert!((b - a / 8.0).abs() <= 1e-14 * a);
        }

        #[test]
        fn gas_rate_scaling(mu in 0.1f64..10.0, l in 0.1f64..10.0, mass in 0.1f64..10.0) {
            let gas = GasEnvironment::air();
            let mode = MechanicalMode::paper_flapping();
            let base = gas_damping_rate(1e-3, &gas, &mode).unwrap();
            let scaled_gas = GasEnvironment { viscosity: gas.viscosity * mu, ..gas };
            let scaled_mode = MechanicalMode { effective_mass: mode.effective_mass * mass, ..mode };
            let v = gas_damping_rate(1e-3 * l, &scaled_gas, &scaled_mode).unwrap();
            prop_assert!((v - base * mu * l / mass).abs() <= 1e-12 * v);
        }

        #[test]
        fn affine_sweep_recovered(g0 in 1.0f64..1e4, c in 1e-4f64..1.0) {
            let ps = [5.0, 100.0, 4400.0, 1e5];
            let sweep: Vec<_> = ps.iter()
                .map(|&p| PressurePoint { pressure: p, gamma_total: g0 + c * p })
                .collect();
            let d = decompose_damping(&sweep).unwrap();
            prop_assert_eq!(d.gamma_intrinsic, g0 + c * 5.0);
            prop_assert!((d.gamma_intrinsic + d.gamma_gas_at_reference - (g0 + c * 1e5)).abs() <= 1e-12 * (g0 + c * 1e5));
            prop_assert!(!d.ambiguous_plateau);
            let fit = d.affine_fit.unwrap();
            prop_assert!((fit.intercept - g0).abs() <= 1e-8 * (g0 + c * 1e5));
            prop_assert!((fit.slope - c).abs() <= 1e-9 * c.max(1e-3));
        }

        #[test]
        fn shape_factor_monotone(b in 0.001f64..0.998) {
            let g0 = squeeze_shape_factor(b).unwrap();
            let g1 = squeeze_shape_factor(b + 0.001).unwrap();
            prop_assert!(g1 < g0 && g1 >= 0.0 && g0 <= 1.0);
        }
    }
}
