//! Mechano-thermal noise of a single-axis resonator with frequency-dependent
//! gas damping.
//!
//! The gas film contributes a force noise of PSD `4 k_B T b(f)` at every
//! frequency. Referred to the input it becomes an acceleration noise
//! `√(4 k_B T b) / m`; at the output it is shaped by the mechanical
//! response `D(jω) = k_s + k_d(ω) + jω b(ω) − ω² m`.
//!
//! Every spectrum has a "white" twin computed from a baseline table whose
//! damping is frozen at one anchor frequency and whose gas spring is zero.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::damping::{fmt_sci, DampingInterpolant, DampingSpectrum};
use crate::error::{Error, Result};
use crate::grid;

/// Boltzmann constant, J/K (exact SI value).
pub const BOLTZMANN: f64 = 1.380649e-23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ResonatorFields", into = "ResonatorFields")]
pub struct ResonatorParams {
    mass_kg: f64,
    k_spring_n_per_m: f64,
    temperature_k: f64,
}

#[derive(Serialize, Deserialize)]
struct ResonatorFields {
    mass_kg: f64,
    k_spring_n_per_m: f64,
    temperature_k: f64,
}

impl TryFrom<ResonatorFields> for ResonatorParams {
    type Error = Error;

    fn try_from(f: ResonatorFields) -> Result<Self> {
        ResonatorParams::new(f.mass_kg, f.k_spring_n_per_m, f.temperature_k)
    }
}

impl From<ResonatorParams> for ResonatorFields {
    fn from(p: ResonatorParams) -> Self {
        ResonatorFields {
            mass_kg: p.mass_kg,
            k_spring_n_per_m: p.k_spring_n_per_m,
            temperature_k: p.temperature_k,
        }
    }
}

impl ResonatorParams {
    pub fn new(mass_kg: f64, k_spring_n_per_m: f64, temperature_k: f64) -> Result<Self> {
        for (field, v) in [
            ("mass_kg", mass_kg),
            ("k_spring_n_per_m", k_spring_n_per_m),
            ("temperature_k", temperature_k),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(
                    field,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        Ok(Self {
            mass_kg,
            k_spring_n_per_m,
            temperature_k,
        })
    }

    pub fn mass_kg(&self) -> f64 {
        self.mass_kg
    }

    pub fn k_spring_n_per_m(&self) -> f64 {
        self.k_spring_n_per_m
    }

    pub fn temperature_k(&self) -> f64 {
        self.temperature_k
    }

    pub fn with_spring(&self, k_spring_n_per_m: f64) -> Result<Self> {
        Self::new(self.mass_kg, k_spring_n_per_m, self.temperature_k)
    }
}

/// Nyquist force-noise density `√(4 k_B T b)` in N/√Hz.
pub fn force_noise_density(b: f64, temperature_k: f64) -> f64 {
    debug_assert!(b >= 0.0 && temperature_k >= 0.0);
    (4.0 * BOLTZMANN * temperature_k * b).sqrt()
}

fn omega(freq_hz: f64) -> f64 {
    2.0 * PI * freq_hz
}

/// `D(jω)` from explicit coefficients.
pub fn response_denominator(b: f64, kd: f64, params: &ResonatorParams, omega: f64) -> Complex64 {
    Complex64::new(
        params.k_spring_n_per_m + kd - omega * omega * params.mass_kg,
        omega * b,
    )
}

/// Equivalent input acceleration noise, (m/s²)/√Hz.
pub fn input_accel_noise(
    interp: &DampingInterpolant,
    params: &ResonatorParams,
    freq_hz: f64,
) -> Result<f64> {
    let b = interp.damping(freq_hz)?;
    Ok(force_noise_density(b, params.temperature_k) / params.mass_kg)
}

/// Input-referred SNR density `|A_ext| / A_noise`.
pub fn snr_input(
    a_ext: impl Fn(f64) -> f64,
    interp: &DampingInterpolant,
    params: &ResonatorParams,
    freq_hz: f64,
) -> Result<f64> {
    let noise = input_accel_noise(interp, params, freq_hz)?;
    if noise == 0.0 {
        return Err(Error::UnphysicalInput(format!(
            "zero noise density at {freq_hz} Hz makes the SNR unbounded"
        )));
    }
    Ok(a_ext(freq_hz).abs() / noise)
}

/// Mechanical response denominator `D(jω)` at `freq_hz`.
pub fn mechanical_tf(
    interp: &DampingInterpolant,
    params: &ResonatorParams,
    freq_hz: f64,
) -> Result<Complex64> {
    let (b, kd) = interp.evaluate(freq_hz)?;
    Ok(response_denominator(b, kd, params, omega(freq_hz)))
}

fn nonsingular(d: Complex64, freq_hz: f64) -> Result<f64> {
    let mag = d.norm();
    if mag == 0.0 {
        Err(Error::SingularResponse { freq_hz })
    } else {
        Ok(mag)
    }
}

/// Output displacement noise `√(4 k_B T b) / |D|`, m/√Hz.
pub fn displacement_noise(
    interp: &DampingInterpolant,
    params: &ResonatorParams,
    freq_hz: f64,
) -> Result<f64> {
    let (b, kd) = interp.evaluate(freq_hz)?;
    let d = nonsingular(response_denominator(b, kd, params, omega(freq_hz)), freq_hz)?;
    Ok(force_noise_density(b, params.temperature_k) / d)
}

/// Displacement produced by the input acceleration, `m |A_ext| / |D|`.
pub fn displacement_signal(
    a_ext: impl Fn(f64) -> f64,
    interp: &DampingInterpolant,
    params: &ResonatorParams,
    freq_hz: f64,
) -> Result<f64> {
    let d = nonsingular(mechanical_tf(interp, params, freq_hz)?, freq_hz)?;
    Ok(params.mass_kg * a_ext(freq_hz).abs() / d)
}

/// Gas forces relative to the mechanical spring: `(ω b / k_s, k_d / k_s)`.
pub fn force_ratios(
    interp: &DampingInterpolant,
    params: &ResonatorParams,
    freq_hz: f64,
) -> Result<(f64, f64)> {
    let (b, kd) = interp.evaluate(freq_hz)?;
    let ks = params.k_spring_n_per_m;
    Ok((omega(freq_hz) * b / ks, kd / ks))
}

/// Which damping value the white baseline freezes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnchorRule {
    LowestRow,
    AtFrequency(f64),
}

impl std::str::FromStr for AnchorRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "lowest" | "fmin" => Ok(AnchorRule::LowestRow),
            other => other
                .parse::<f64>()
                .map(AnchorRule::AtFrequency)
                .map_err(|_| {
                    Error::param(
                        "white_anchor",
                        format!("expected `lowest` or a frequency in Hz, got `{other}`"),
                    )
                }),
        }
    }
}

/// Constant-damping, zero-spring twin of `spec` on the same grid.
pub fn white_baseline(spec: &DampingSpectrum, anchor: AnchorRule) -> Result<DampingSpectrum> {
    let b0 = match anchor {
        AnchorRule::LowestRow => spec.rows()[0].b_ns_per_m,
        AnchorRule::AtFrequency(f) => {
            let (lo, hi) = spec.domain();
            if !(f >= lo && f <= hi) {
                return Err(Error::Domain { freq_hz: f, lo, hi });
            }
            match spec.rows().iter().find(|r| r.freq_hz == f) {
                Some(r) => r.b_ns_per_m,
                None => DampingInterpolant::new(spec.clone())?.damping(f)?,
            }
        }
    };
    let rows = spec.rows().iter().map(|r| (r.freq_hz, b0, 0.0)).collect();
    DampingSpectrum::new(rows, "white-baseline")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRecord {
    pub freq_hz: f64,
    /// N/√Hz
    pub force_noise: f64,
    /// (m/s²)/√Hz
    pub accel_noise: f64,
    /// m/√Hz
    pub displacement_noise: f64,
    pub snr: Option<f64>,
    pub force_noise_white: f64,
    pub accel_noise_white: f64,
    pub displacement_noise_white: f64,
    pub snr_white: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpectra {
    pub records: Vec<NoiseRecord>,
}

fn record_at(
    interp: &DampingInterpolant,
    white: &DampingInterpolant,
    params: &ResonatorParams,
    signal: Option<&(dyn Fn(f64) -> f64 + Sync)>,
    f: f64,
) -> Result<NoiseRecord> {
    let t = params.temperature_k;
    let (b, _) = interp.evaluate(f)?;
    let (bw, _) = white.evaluate(f)?;
    let (snr, snr_white) = match signal {
        Some(a) => (
            Some(snr_input(a, interp, params, f)?),
            Some(snr_input(a, white, params, f)?),
        ),
        None => (None, None),
    };
    Ok(NoiseRecord {
        freq_hz: f,
        force_noise: force_noise_density(b, t),
        accel_noise: input_accel_noise(interp, params, f)?,
        displacement_noise: displacement_noise(interp, params, f)?,
        snr,
        force_noise_white: force_noise_density(bw, t),
        accel_noise_white: input_accel_noise(white, params, f)?,
        displacement_noise_white: displacement_noise(white, params, f)?,
        snr_white,
    })
}

/// All noise spectra and their white twins on `grid_hz`.
///
/// `signal` is the input acceleration magnitude `|A_ext(f)|`; SNR columns
/// are filled only when it is given.
pub fn noise_spectra(
    interp: &DampingInterpolant,
    params: &ResonatorParams,
    grid_hz: &[f64],
    anchor: AnchorRule,
    signal: Option<&(dyn Fn(f64) -> f64 + Sync)>,
) -> Result<NoiseSpectra> {
    grid::validate_grid(grid_hz)?;
    for &f in [grid_hz[0], grid_hz[grid_hz.len() - 1]].iter() {
        interp.check_domain(f)?;
    }
    let white = DampingInterpolant::new(white_baseline(interp.spectrum(), anchor)?)?;
    let records = grid_hz
        .par_iter()
        .map(|&f| record_at(interp, &white, params, signal, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(NoiseSpectra { records })
}

pub const NOISE_CSV_HEADER: &str =
    "freq_hz,f_noise_n_rthz,a_noise_ms2_rthz,z_noise_m_rthz,z_noise_white_m_rthz,a_noise_white_ms2_rthz";

impl NoiseSpectra {
    pub fn has_snr(&self) -> bool {
        self.records.first().is_some_and(|r| r.snr.is_some())
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let with_snr = self.has_snr();
        let mut out = Vec::new();
        if with_snr {
            writeln!(out, "{NOISE_CSV_HEADER},snr").unwrap();
        } else {
            writeln!(out, "{NOISE_CSV_HEADER}").unwrap();
        }
        for r in &self.records {
            write!(
                out,
                "{},{},{},{},{},{}",
                fmt_sci(r.freq_hz),
                fmt_sci(r.force_noise),
                fmt_sci(r.accel_noise),
                fmt_sci(r.displacement_noise),
                fmt_sci(r.displacement_noise_white),
                fmt_sci(r.accel_noise_white)
            )
            .unwrap();
            if with_snr {
                write!(out, ",{}", fmt_sci(r.snr.unwrap_or(f64::NAN))).unwrap();
            }
            writeln!(out).unwrap();
        }
        out
    }
}

/// One parsed line of a noise CSV; `snr` present iff the column exists.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCsvRow {
    pub values: [f64; 6],
    pub snr: Option<f64>,
}

/// Schema check for noise CSV files: exact header, numeric non-negative
/// fields and strictly increasing frequency.
pub fn parse_noise_csv(reader: impl BufRead) -> Result<Vec<NoiseCsvRow>> {
    let mut with_snr = None;
    let mut rows: Vec<NoiseCsvRow> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let Some(snr_col) = with_snr else {
            with_snr = Some(if line == NOISE_CSV_HEADER {
                false
            } else if line.strip_suffix(",snr") == Some(NOISE_CSV_HEADER) {
                true
            } else {
                return Err(Error::Schema(format!(
                    "line {line_no}: unexpected header `{line}`"
                )));
            });
            continue;
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = if snr_col { 7 } else { 6 };
        if fields.len() != expected {
            return Err(Error::Schema(format!(
                "line {line_no}: expected {expected} fields, found {}",
                fields.len()
            )));
        }
        let mut vals = Vec::with_capacity(expected);
        for f in &fields {
            let v: f64 = f.parse().map_err(|_| Error::Value {
                row: line_no,
                reason: format!("`{f}` is not a number"),
            })?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Value {
                    row: line_no,
                    reason: format!("value {v} must be finite and >= 0"),
                });
            }
            vals.push(v);
        }
        if let Some(prev) = rows.last() {
            if vals[0] <= prev.values[0] {
                return Err(Error::Order {
                    row: line_no,
                    freq_hz: vals[0],
                });
            }
        }
        rows.push(NoiseCsvRow {
            values: [vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]],
            snr: vals.get(6).copied(),
        });
    }
    if with_snr.is_none() {
        return Err(Error::Schema("missing header".into()));
    }
    Ok(rows)
}

/// `∫ y df` over a log-spaced grid, by trapezoids in `ln f`.
fn integrate_log_grid(grid_hz: &[f64], density: &[f64]) -> f64 {
    let x: Vec<f64> = grid_hz.iter().map(|f| f.ln()).collect();
    let y: Vec<f64> = grid_hz.iter().zip(density).map(|(f, d)| f * d).collect();
    grid::trapezoid(&x, &y)
}

/// Input-referred band SNR `√(∫|A_ext|² df / ∫ A_noise² df)` over `[f1, f2]`.
pub fn band_snr_input(
    a_ext: impl Fn(f64) -> f64 + Sync,
    interp: &DampingInterpolant,
    params: &ResonatorParams,
    f1: f64,
    f2: f64,
    points: usize,
) -> Result<f64> {
    let g = grid::log_space(f1, f2, points)?;
    let mut sig = Vec::with_capacity(points);
    let mut noise = Vec::with_capacity(points);
    for &f in &g {
        let a = a_ext(f);
        sig.push(a * a);
        let n = input_accel_noise(interp, params, f)?;
        noise.push(n * n);
    }
    ratio_of_integrals(&g, &sig, &noise)
}

/// Output (displacement) band SNR `√(∫ S_sig df / ∫ S_noise df)` over
/// `[f1, f2]`. Unlike the density ratio, this depends on where the
/// resonance sits inside the band.
pub fn band_snr_output(
    a_ext: impl Fn(f64) -> f64 + Sync,
    interp: &DampingInterpolant,
    params: &ResonatorParams,
    f1: f64,
    f2: f64,
    points: usize,
) -> Result<f64> {
    let g = grid::log_space(f1, f2, points)?;
    let mut sig = Vec::with_capacity(points);
    let mut noise = Vec::with_capacity(points);
    for &f in &g {
        let s = displacement_signal(&a_ext, interp, params, f)?;
        let n = displacement_noise(interp, params, f)?;
        sig.push(s * s);
        noise.push(n * n);
    }
    ratio_of_integrals(&g, &sig, &noise)
}

fn ratio_of_integrals(g: &[f64], sig: &[f64], noise: &[f64]) -> Result<f64> {
    let ns = integrate_log_grid(g, noise);
    if ns <= 0.0 {
        return Err(Error::UnphysicalInput(
            "band-integrated noise power is zero".into(),
        ));
    }
    Ok((integrate_log_grid(g, sig) / ns).sqrt())
}
