//! Lumped RL macromodel of the gas film in the mobility analogy
//! (force ↔ current, velocity ↔ voltage).
//!
//! The film's force/velocity admittance is `Y_d = b − j k_d/ω`; its
//! inverse `Z_air = R(ω) + jω L(ω)` is approximated by frequency-independent
//! parallel R‖L stages connected in series:
//!
//! ```text
//! Z(jω) = Σ_k jω l_k r_k / (r_k + jω l_k)
//! ```
//!
//! Only the resistors dissipate, so only they carry thermal noise.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::damping::DampingInterpolant;
use crate::error::{Error, Result};
use crate::noise::BOLTZMANN;

/// Film admittance at one frequency; both parts in N·s/m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirAdmittancePoint {
    pub omega: f64,
    /// `b(ω)`
    pub y_real: f64,
    /// `−k_d(ω)/ω`
    pub y_imag: f64,
}

impl AirAdmittancePoint {
    pub fn from_coefficients(b: f64, kd: f64, omega: f64) -> Self {
        Self {
            omega,
            y_real: b,
            y_imag: -kd / omega,
        }
    }

    pub fn admittance(&self) -> Complex64 {
        Complex64::new(self.y_real, self.y_imag)
    }

    /// `(b, k_d)`
    pub fn coefficients(&self) -> (f64, f64) {
        (self.y_real, -self.y_imag * self.omega)
    }
}

/// Equivalent series R–L of the film at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRlPoint {
    pub omega: f64,
    /// (m/s)/N
    pub r_air: f64,
    /// (m/s)·s/N
    pub l_air: f64,
}

impl SeriesRlPoint {
    pub fn impedance(&self) -> Complex64 {
        Complex64::new(self.r_air, self.omega * self.l_air)
    }
}

#[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
pub fn air_admittance(interp: &DampingInterpolant, freq_hz: f64) -> Result<AirAdmittancePoint> {
    if !(freq_hz > 0.0) {
        return Err(Error::param(
            "freq_hz",
            "admittance needs a positive frequency",
        ));
    }
    let (b, kd) = interp.evaluate(freq_hz)?;
    Ok(AirAdmittancePoint::from_coefficients(
        b,
        kd,
        2.0 * std::f64::consts::PI * freq_hz,
    ))
}

/// `R = ω² b / (b² ω² + k_d²)`, `L = k_d / (b² ω² + k_d²)`.
pub fn series_rl(point: &AirAdmittancePoint) -> Result<SeriesRlPoint> {
    let (b, kd) = point.coefficients();
    let w = point.omega;
    let den = b * b * w * w + kd * kd;
    if den == 0.0 {
        return Err(Error::DegenerateAdmittance);
    }
    Ok(SeriesRlPoint {
        omega: w,
        r_air: w * w * b / den,
        l_air: kd / den,
    })
}

/// Inverse of [`series_rl`].
pub fn admittance_from_series(point: &SeriesRlPoint) -> Result<AirAdmittancePoint> {
    let (r, l, w) = (point.r_air, point.l_air, point.omega);
    let den = r * r + w * w * l * l;
    if den == 0.0 {
        return Err(Error::DegenerateAdmittance);
    }
    Ok(AirAdmittancePoint::from_coefficients(
        r / den,
        w * w * l / den,
        w,
    ))
}

/// Series R–L samples of an interpolated damping table.
pub fn series_rl_samples(
    interp: &DampingInterpolant,
    freqs_hz: &[f64],
) -> Result<Vec<SeriesRlPoint>> {
    freqs_hz
        .iter()
        .map(|&f| series_rl(&air_admittance(interp, f)?))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlBranch {
    pub r: f64,
    pub l: f64,
}

impl RlBranch {
    /// Corner angular frequency `r / l`, rad/s.
    pub fn corner(&self) -> f64 {
        self.r / self.l
    }

    pub fn impedance(&self, omega: f64) -> Complex64 {
        let jwl = Complex64::new(0.0, omega * self.l);
        jwl * self.r / (jwl + self.r)
    }
}

/// Series connection of parallel R‖L branches, ordered by corner frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct LumpedRlModel {
    branches: Vec<RlBranch>,
    fit_band_hz: (f64, f64),
    fit_residual: f64,
}

impl LumpedRlModel {
    /// Sorts the branches into canonical (increasing corner) order.
    pub fn new(
        mut branches: Vec<RlBranch>,
        fit_band_hz: (f64, f64),
        fit_residual: f64,
    ) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::param("branches", "model needs at least one branch"));
        }
        for br in &branches {
            if !(br.r.is_finite() && br.r > 0.0 && br.l.is_finite() && br.l > 0.0) {
                return Err(Error::param(
                    "branches",
                    format!("r and l must be finite and > 0, got r={} l={}", br.r, br.l),
                ));
            }
        }
        branches.sort_by(|a, b| a.corner().total_cmp(&b.corner()));
        if branches.windows(2).any(|w| w[1].corner() <= w[0].corner()) {
            return Err(Error::param(
                "branches",
                "branch corner frequencies must be distinct",
            ));
        }
        let (lo, hi) = fit_band_hz;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(Error::param(
                "fit_band_hz",
                format!("invalid band [{lo}, {hi}]"),
            ));
        }
        if !(fit_residual.is_finite() && fit_residual >= 0.0) {
            return Err(Error::param(
                "residual",
                format!("must be finite and >= 0, got {fit_residual}"),
            ));
        }
        Ok(Self {
            branches,
            fit_band_hz,
            fit_residual,
        })
    }

    pub fn branches(&self) -> &[RlBranch] {
        &self.branches
    }

    pub fn fit_band_hz(&self) -> (f64, f64) {
        self.fit_band_hz
    }

    pub fn fit_residual(&self) -> f64 {
        self.fit_residual
    }

    pub fn impedance(&self, omega: f64) -> Complex64 {
        self.branches.iter().map(|b| b.impedance(omega)).sum()
    }

    pub fn admittance(&self, omega: f64) -> Complex64 {
        self.impedance(omega).inv()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RlModelFile::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: RlModelFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

pub fn model_impedance(model: &LumpedRlModel, omega: f64) -> Complex64 {
    model.impedance(omega)
}

/// Port force-noise PSD `4 k_B T Re{Y_model}` in N²/Hz.
pub fn model_noise_psd(model: &LumpedRlModel, temperature_k: f64, omega: f64) -> f64 {
    4.0 * BOLTZMANN * temperature_k * model.admittance(omega).re
}

/// Contribution of each resistor's thermal noise to the port force PSD,
/// with the port held at zero velocity.
///
/// A noise current of PSD `4 k_B T / r_k` across stage `k` reaches the
/// shorted port through the divider `Z_k / Z_total`.
pub fn resistor_noise_contributions(
    model: &LumpedRlModel,
    temperature_k: f64,
    omega: f64,
) -> Vec<f64> {
    let z_total = model.impedance(omega);
    let total_sq = z_total.norm_sqr();
    model
        .branches
        .iter()
        .map(|b| 4.0 * BOLTZMANN * temperature_k / b.r * b.impedance(omega).norm_sqr() / total_sq)
        .collect()
}

pub const MODEL_FORMAT: &str = "rlmodel/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelUnits {
    pub r: String,
    pub l: String,
    pub fit_band_hz: String,
    pub analogy: String,
}

impl Default for ModelUnits {
    fn default() -> Self {
        Self {
            r: "(m/s)/N".into(),
            l: "(m/s)*s/N".into(),
            fit_band_hz: "Hz".into(),
            analogy: "mobility: force=current, velocity=voltage".into(),
        }
    }
}

/// On-disk JSON layout of a [`LumpedRlModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlModelFile {
    pub format: String,
    pub branches: Vec<RlBranch>,
    pub fit_band_hz: [f64; 2],
    pub residual: f64,
    pub units: ModelUnits,
}

impl From<&LumpedRlModel> for RlModelFile {
    fn from(m: &LumpedRlModel) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            branches: m.branches.clone(),
            fit_band_hz: [m.fit_band_hz.0, m.fit_band_hz.1],
            residual: m.fit_residual,
            units: ModelUnits::default(),
        }
    }
}

impl TryFrom<RlModelFile> for LumpedRlModel {
    type Error = Error;

    fn try_from(f: RlModelFile) -> Result<Self> {
        if f.format != MODEL_FORMAT {
            return Err(Error::Schema(format!(
                "unsupported model format `{}` (expected `{MODEL_FORMAT}`)",
                f.format
            )));
        }
        let sorted = f.branches.windows(2).all(|w| w[0].corner() < w[1].corner());
        if !sorted {
            return Err(Error::Schema(
                "branches are not in increasing corner order".into(),
            ));
        }
        LumpedRlModel::new(f.branches, (f.fit_band_hz[0], f.fit_band_hz[1]), f.residual)
    }
}
