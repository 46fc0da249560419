//! Frequency- (or detuning-) indexed sample series with explicit unit tags.

use num_complex::Complex64;
use serde::Serialize;
use std::io::Write;

use crate::error::{Error, Result};

/// What the abscissa of a series measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AxisKind {
    /// Cyclic frequency (Hz).
    FrequencyHz,
    /// Laser-cavity detuning (rad/s).
    DetuningRadPerSec,
}

impl AxisKind {
    pub fn column_name(self) -> &'static str {
        match self {
            AxisKind::FrequencyHz => "freq_hz",
            AxisKind::DetuningRadPerSec => "detuning_rad_s",
        }
    }
}

/// Spectral density convention. Reported spectra are always single-sided
/// per cyclic Hz; the tag exists so that a mismatch is detectable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Convention {
    SingleSidedHz,
    /// Not a density (amplitudes, ratios, responsivities).
    Pointwise,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SpectrumValues {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl SpectrumValues {
    pub fn len(&self) -> usize {
        match self {
            SpectrumValues::Real(v) => v.len(),
            SpectrumValues::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSeries {
    axis: Vec<f64>,
    values: SpectrumValues,
    unit: String,
    axis_kind: AxisKind,
    convention: Convention,
}

impl SpectrumSeries {
    pub fn new(
        axis: Vec<f64>,
        values: SpectrumValues,
        unit: impl Into<String>,
        axis_kind: AxisKind,
        convention: Convention,
    ) -> Result<Self> {
        let unit = unit.into();
        if unit.trim().is_empty() {
            return Err(Error::Data("spectrum unit tag must not be empty".into()));
        }
        if axis.len() != values.len() {
            return Err(Error::GridMismatch(format!(
                "axis has {} points but values have {}",
                axis.len(),
                values.len()
            )));
        }
        if axis.iter().any(|x| !x.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Data("axis must be finite and strictly increasing".into()));
        }
        Ok(Self {
            axis,
            values,
            unit,
            axis_kind,
            convention,
        })
    }

    /// Real-valued series on a frequency axis (Hz).
    pub fn real_hz(
        frequencies: Vec<f64>,
        values: Vec<f64>,
        unit: impl Into<String>,
        convention: Convention,
    ) -> Result<Self> {
        Self::new(
            frequencies,
            SpectrumValues::Real(values),
            unit,
            AxisKind::FrequencyHz,
            convention,
        )
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn axis_kind(&self) -> AxisKind {
        self.axis_kind
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn values(&self) -> &SpectrumValues {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    /// Real samples, or magnitudes of complex samples.
    pub fn magnitudes(&self) -> Vec<f64> {
        match &self.values {
            SpectrumValues::Real(v) => v.clone(),
            SpectrumValues::Complex(v) => v.iter().map(|z| z.norm()).collect(),
        }
    }

    /// Phases (rad); zero for real series.
    pub fn phases(&self) -> Vec<f64> {
        match &self.values {
            SpectrumValues::Real(v) => vec![0.0; v.len()],
            SpectrumValues::Complex(v) => v.iter().map(|z| z.arg()).collect(),
        }
    }

    pub fn real_values(&self) -> Option<&[f64]> {
        match &self.values {
            SpectrumValues::Real(v) => Some(v),
            SpectrumValues::Complex(_) => None,
        }
    }

    /// Linear interpolation of the (real or magnitude) values at `x`.
    /// Returns `None` outside the axis range.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let mags = self.magnitudes();
        interp_linear(&self.axis, &mags, x)
    }

    /// Trapezoidal integral of the real values over the axis.
    pub fn integrate(&self) -> f64 {
        let v = self.magnitudes();
        self.axis
            .windows(2)
            .zip(v.windows(2))
            .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
            .sum()
    }

    /// Writes `<axis>,<value>,unit` rows (real) or
    /// `<axis>,magnitude,phase_rad` rows (complex).
    pub fn write_csv<W: Write>(&self, out: W, value_column: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match &self.values {
            SpectrumValues::Real(v) => {
                w.write_record([self.axis_kind.column_name(), value_column, "unit"])?;
                for (x, y) in self.axis.iter().zip(v) {
                    w.write_record([fmt_num(*x), fmt_num(*y), self.unit.clone()])?;
                }
            }
            SpectrumValues::Complex(v) => {
                w.write_record([self.axis_kind.column_name(), "magnitude", "phase_rad"])?;
                for (x, z) in self.axis.iter().zip(v) {
                    w.write_record([fmt_num(*x), fmt_num(z.norm()), fmt_num(z.arg())])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Linear interpolation on a strictly increasing grid.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return None;
    }
    let i = xs.partition_point(|&v| v <= x);
    if i == 0 {
        return Some(ys[0]);
    }
    if i >= xs.len() {
        return Some(ys[xs.len() - 1]);
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    let t = (x - x0) / (x1 - x0);
    Some(ys[i - 1] + t * (ys[i] - ys[i - 1]))
}

/// Shortest round-trip representation, so CSV output is lossless.
pub fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `n` linearly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_series() {
        assert!(SpectrumSeries::real_hz(vec![1.0, 2.0], vec![1.0], "Pa", Convention::Pointwise).is_err());
        assert!(SpectrumSeries::real_hz(vec![2.0, 1.0], vec![1.0, 1.0], "Pa", Convention::Pointwise).is_err());
        assert!(SpectrumSeries::real_hz(vec![1.0, 2.0], vec![1.0, 1.0], " ", Convention::Pointwise).is_err());
    }

    #[test]
    fn csv_carries_unit() {
        let s = SpectrumSeries::real_hz(vec![1.0, 2.0], vec![3.0, 4.0], "Pa^2/Hz", Convention::SingleSidedHz)
            .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf, "psd").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("freq_hz,psd,unit\n"));
        assert!(text.contains("Pa^2/Hz"));
    }

    #[test]
    fn interpolation() {
        let xs = [0.0, 1.0, 3.0];
        let ys = [0.0, 2.0, 6.0];
        assert_eq!(interp_linear(&xs, &ys, 2.0), Some(4.0));
        assert_eq!(interp_linear(&xs, &ys, 3.0), Some(6.0));
        assert_eq!(interp_linear(&xs, &ys, 3.5), None);
    }
}
