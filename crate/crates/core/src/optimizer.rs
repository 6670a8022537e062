//! Choice of the mechanical spring constant `k_s` for a resonator whose
//! mass is fixed.
//!
//! Three design criteria are combined into one scalar objective, maximized
//! over `k_s`:
//!
//! ```text
//! J(k_s) = w_snr  · ln(band-integrated output SNR over [f1, f2])
//!        + w_sens · ln(max over [f1, f2] of |m / D(jω)|)
//!        − w_bw   · |BW_3dB − BW_target| / BW_target
//!        + penalty
//! ```
//!
//! Weights are normalized to sum to one. `penalty` is [`RESONANCE_PENALTY`]
//! when the self-consistent resonance `ω² m = k_s + k_d(ω)` has no solution
//! inside the damping table, otherwise zero. The log form makes the criteria
//! combine multiplicatively in linear terms.
//!
//! The search is a coarse log-spaced scan of `k_s` followed by golden-section
//! refinement on the best bracket.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::damping::DampingInterpolant;
use crate::error::{Error, Result};
use crate::grid;
use crate::noise::{self, ResonatorParams};

/// Added to the objective when the resonance lies outside the table.
pub const RESONANCE_PENALTY: f64 = -1.0e3;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn default_input_accel() -> f64 {
    1.0
}

fn default_band_points() -> usize {
    256
}

fn default_scan_points() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub weight_snr: f64,
    pub weight_sensitivity: f64,
    pub weight_bandwidth: f64,
    pub operating_band_hz: [f64; 2],
    pub target_bandwidth_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub electrical_noise_floor_m_rthz: Option<f64>,
    pub k_range_n_per_m: [f64; 2],
    /// Flat input acceleration magnitude used for the SNR term.
    #[serde(default = "default_input_accel")]
    pub input_accel_ms2_rthz: f64,
    #[serde(default = "default_band_points")]
    pub band_points: usize,
    #[serde(default = "default_scan_points")]
    pub scan_points: usize,
}

impl ObjectiveConfig {
    pub fn new(
        weights: [f64; 3],
        band_hz: [f64; 2],
        target_bandwidth_hz: f64,
        k_range: [f64; 2],
    ) -> Result<Self> {
        let cfg = Self {
            weight_snr: weights[0],
            weight_sensitivity: weights[1],
            weight_bandwidth: weights[2],
            operating_band_hz: band_hz,
            target_bandwidth_hz,
            electrical_noise_floor_m_rthz: None,
            k_range_n_per_m: k_range,
            input_accel_ms2_rthz: default_input_accel(),
            band_points: default_band_points(),
            scan_points: default_scan_points(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let w = [
            self.weight_snr,
            self.weight_sensitivity,
            self.weight_bandwidth,
        ];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param("weights", "weights must be finite and >= 0"));
        }
        if w.iter().all(|v| *v == 0.0) {
            return Err(Error::param("weights", "at least one weight must be > 0"));
        }
        let [f1, f2] = self.operating_band_hz;
        if !(f1.is_finite() && f2.is_finite() && f1 > 0.0 && f1 < f2) {
            return Err(Error::param(
                "operating_band_hz",
                format!("need 0 < f1 < f2, got [{f1}, {f2}]"),
            ));
        }
        let [k1, k2] = self.k_range_n_per_m;
        if !(k1.is_finite() && k2.is_finite() && k1 > 0.0 && k1 < k2) {
            return Err(Error::param(
                "k_range_n_per_m",
                format!("need 0 < k_min < k_max, got [{k1}, {k2}]"),
            ));
        }
        if !(self.target_bandwidth_hz.is_finite() && self.target_bandwidth_hz > 0.0) {
            return Err(Error::param(
                "target_bandwidth_hz",
                "must be finite and > 0",
            ));
        }
        if !(self.input_accel_ms2_rthz.is_finite() && self.input_accel_ms2_rthz > 0.0) {
            return Err(Error::param(
                "input_accel_ms2_rthz",
                "must be finite and > 0",
            ));
        }
        if let Some(e) = self.electrical_noise_floor_m_rthz {
            if !(e.is_finite() && e > 0.0) {
                return Err(Error::param(
                    "electrical_noise_floor_m_rthz",
                    "must be finite and > 0",
                ));
            }
        }
        if self.band_points < 8 {
            return Err(Error::param("band_points", "need at least 8 band points"));
        }
        if self.scan_points < 3 {
            return Err(Error::param("scan_points", "need at least 3 scan points"));
        }
        Ok(())
    }

    /// Weights divided by their sum.
    pub fn normalized_weights(&self) -> [f64; 3] {
        let s = self.weight_snr + self.weight_sensitivity + self.weight_bandwidth;
        [
            self.weight_snr / s,
            self.weight_sensitivity / s,
            self.weight_bandwidth / s,
        ]
    }

    fn check_against(&self, interp: &DampingInterpolant) -> Result<()> {
        for f in self.operating_band_hz {
            interp.check_domain(f)?;
        }
        Ok(())
    }
}

/// Per-criterion contributions and the raw quantities behind them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub snr_term: f64,
    pub sensitivity_term: f64,
    pub bandwidth_term: f64,
    pub penalty_term: f64,
    pub band_snr: f64,
    /// Peak of `|m / D(jω)|` over the band, s².
    pub peak_sensitivity_s2: f64,
    pub peak_hz: f64,
    pub bandwidth_hz: f64,
    /// Displacement noise at the in-band peak, m/√Hz.
    pub noise_at_peak_m_rthz: f64,
    pub resonance_in_domain: bool,
    /// A −3 dB edge was not reached inside the table and the table edge was
    /// used instead.
    pub bandwidth_truncated: bool,
}

impl ObjectiveBreakdown {
    pub fn total(&self) -> f64 {
        self.snr_term + self.sensitivity_term + self.bandwidth_term + self.penalty_term
    }
}

/// Frequency (Hz) solving `ω² m = k_s + k_d(ω)` inside the table.
///
/// Damped fixed-point iteration on `ω ← √((k_s + k_d(ω)) / m)`, falling back
/// to bisection on the lowest sign change over the table knots.
pub fn resonance_frequency(interp: &DampingInterpolant, mass_kg: f64, k_s: f64) -> Result<f64> {
    if !(mass_kg > 0.0 && k_s > 0.0) {
        return Err(Error::param(
            "mass/k_s",
            "mass and spring constant must be > 0",
        ));
    }
    let (lo, hi) = interp.domain();
    let residual = |f: f64| -> Result<f64> {
        let w = 2.0 * PI * f;
        let kd = interp.spring(f)?;
        Ok((w * w * mass_kg - k_s - kd) / (k_s + kd))
    };

    const ALPHA: f64 = 0.7;
    let mut f = ((k_s / mass_kg).sqrt() / (2.0 * PI)).clamp(lo, hi);
    for _ in 0..200 {
        let next = ((k_s + interp.spring(f)?) / mass_kg).sqrt() / (2.0 * PI);
        if !(next >= lo && next <= hi) {
            break;
        }
        f = (1.0 - ALPHA) * f + ALPHA * next;
        if residual(f)?.abs() <= 1e-12 {
            return Ok(f);
        }
    }

    let knots = interp.spectrum().frequencies();
    let mut bracket = None;
    let mut prev = residual(knots[0])?;
    if prev == 0.0 {
        return Ok(knots[0]);
    }
    for w in knots.windows(2) {
        let cur = residual(w[1])?;
        if cur == 0.0 {
            return Ok(w[1]);
        }
        if prev < 0.0 && cur > 0.0 {
            bracket = Some((w[0], w[1]));
            break;
        }
        prev = cur;
    }
    let Some((mut a, mut b)) = bracket else {
        return Err(Error::NoResonanceInBand { lo, hi });
    };
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if residual(mid)? < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let f = if residual(a)?.abs() < residual(b)?.abs() {
        a
    } else {
        b
    };
    Ok(f)
}

/// `|m / D(jω)|` at `f`.
fn sensitivity(interp: &DampingInterpolant, params: &ResonatorParams, f: f64) -> Result<f64> {
    Ok(params.mass_kg() / noise::mechanical_tf(interp, params, f)?.norm())
}

/// Golden-section maximization of `g` over `[a, b]`; returns the best
/// `(x, g(x))` seen, including the endpoints.
fn golden_max(
    mut g: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let mut best = (a, g(a)?);
    let gb = g(b)?;
    if gb > best.1 {
        best = (b, gb);
    }
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut g1 = g(x1)?;
    let mut g2 = g(x2)?;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if g1 >= g2 {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - INV_PHI * (b - a);
            g1 = g(x1)?;
        } else {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + INV_PHI * (b - a);
            g2 = g(x2)?;
        }
    }
    for (x, v) in [(x1, g1), (x2, g2)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

/// Frequency on one side of `f_pk` where the sensitivity falls to `level`,
/// or the table edge (and `true`) if it never does.
fn half_power_edge(
    interp: &DampingInterpolant,
    params: &ResonatorParams,
    f_pk: f64,
    level: f64,
    upward: bool,
) -> Result<(f64, bool)> {
    let (lo, hi) = interp.domain();
    let edge = if upward { hi } else { lo };
    let step: f64 = if upward { 1.05 } else { 1.0 / 1.05 };
    let mut inside = f_pk;
    loop {
        let mut next = inside * step;
        if (upward && next >= hi) || (!upward && next <= lo) {
            next = edge;
        }
        if sensitivity(interp, params, next)? <= level {
            let (mut a, mut b) = (inside, next);
            while (b - a).abs() > 1e-12 * a {
                let mid = (a * b).sqrt();
                if sensitivity(interp, params, mid)? > level {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Ok((0.5 * (a + b), false));
        }
        if next == edge {
            return Ok((edge, true));
        }
        inside = next;
    }
}

/// Band samples of `(b, k_d)`, which do not depend on `k_s` and so are
/// shared by every evaluation of one optimization run.
struct BandCache {
    ln_f: Vec<f64>,
    f: Vec<f64>,
    b: Vec<f64>,
    kd: Vec<f64>,
}

impl BandCache {
    fn new(cfg: &ObjectiveConfig, interp: &DampingInterpolant) -> Result<Self> {
        cfg.check_against(interp)?;
        let [f1, f2] = cfg.operating_band_hz;
        let f = grid::log_space(f1, f2, cfg.band_points)?;
        let (b, kd) = f
            .iter()
            .map(|&x| interp.evaluate(x))
            .collect::<Result<(Vec<_>, Vec<_>)>>()?;
        Ok(Self {
            ln_f: f.iter().map(|x| x.ln()).collect(),
            f,
            b,
            kd,
        })
    }
}

/// Objective for one resonator and table, reusable across spring constants.
pub struct Objective<'a> {
    cfg: &'a ObjectiveConfig,
    interp: &'a DampingInterpolant,
    band: BandCache,
    mass_kg: f64,
    temperature_k: f64,
}

impl<'a> Objective<'a> {
    pub fn new(
        cfg: &'a ObjectiveConfig,
        interp: &'a DampingInterpolant,
        mass_kg: f64,
        temperature_k: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        ResonatorParams::new(mass_kg, 1.0, temperature_k)?;
        Ok(Self {
            cfg,
            interp,
            band: BandCache::new(cfg, interp)?,
            mass_kg,
            temperature_k,
        })
    }

    pub fn eval(&self, k_s: f64) -> Result<ObjectiveBreakdown> {
        evaluate_cached(
            self.cfg,
            &self.band,
            self.interp,
            self.mass_kg,
            self.temperature_k,
            k_s,
        )
    }
}

/// Objective value and breakdown at one spring constant.
pub fn objective_eval(
    cfg: &ObjectiveConfig,
    interp: &DampingInterpolant,
    mass_kg: f64,
    temperature_k: f64,
    k_s: f64,
) -> Result<ObjectiveBreakdown> {
    Objective::new(cfg, interp, mass_kg, temperature_k)?.eval(k_s)
}

fn evaluate_cached(
    cfg: &ObjectiveConfig,
    band: &BandCache,
    interp: &DampingInterpolant,
    mass_kg: f64,
    temperature_k: f64,
    k_s: f64,
) -> Result<ObjectiveBreakdown> {
    let params = ResonatorParams::new(mass_kg, k_s, temperature_k)?;
    let [w_snr, w_sens, w_bw] = cfg.normalized_weights();
    let [f1, f2] = cfg.operating_band_hz;
    let a_ext = cfg.input_accel_ms2_rthz;

    // Signal and noise displacement PSDs share |D|², so one pass gives the
    // band SNR (trapezoids in ln f) and the sensitivity samples.
    let n = band.f.len();
    let mut sens = Vec::with_capacity(n);
    let mut sig = Vec::with_capacity(n);
    let mut noise_psd = Vec::with_capacity(n);
    for i in 0..n {
        let f = band.f[i];
        let d2 =
            noise::response_denominator(band.b[i], band.kd[i], &params, 2.0 * PI * f).norm_sqr();
        if d2 == 0.0 {
            return Err(Error::SingularResponse { freq_hz: f });
        }
        sens.push(mass_kg / d2.sqrt());
        sig.push(f * (mass_kg * a_ext).powi(2) / d2);
        let fn_ = noise::force_noise_density(band.b[i], temperature_k);
        noise_psd.push(f * fn_ * fn_ / d2);
    }
    let noise_power = grid::trapezoid(&band.ln_f, &noise_psd);
    if noise_power <= 0.0 {
        return Err(Error::UnphysicalInput(
            "band-integrated noise power is zero".into(),
        ));
    }
    let band_snr = (grid::trapezoid(&band.ln_f, &sig) / noise_power).sqrt();

    let i_pk = sens
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > sens[best] { i } else { best });
    let lo = band.ln_f[i_pk.saturating_sub(1)];
    let hi = band.ln_f[(i_pk + 1).min(n - 1)];
    let (x_pk, peak) = golden_max(
        |x| sensitivity(interp, &params, x.exp().clamp(f1, f2)),
        lo,
        hi,
        1e-12,
    )?;
    let peak_hz = x_pk.exp().clamp(f1, f2);

    let level = peak / std::f64::consts::SQRT_2;
    let (f_lo, trunc_lo) = half_power_edge(interp, &params, peak_hz, level, false)?;
    let (f_hi, trunc_hi) = half_power_edge(interp, &params, peak_hz, level, true)?;
    let bandwidth_hz = f_hi - f_lo;

    let resonance_in_domain = match resonance_frequency(interp, mass_kg, k_s) {
        Ok(_) => true,
        Err(Error::NoResonanceInBand { .. }) => false,
        Err(e) => return Err(e),
    };

    Ok(ObjectiveBreakdown {
        snr_term: w_snr * band_snr.ln(),
        sensitivity_term: w_sens * peak.ln(),
        bandwidth_term: -w_bw * (bandwidth_hz - cfg.target_bandwidth_hz).abs()
            / cfg.target_bandwidth_hz,
        penalty_term: if resonance_in_domain {
            0.0
        } else {
            RESONANCE_PENALTY
        },
        band_snr,
        peak_sensitivity_s2: peak,
        peak_hz,
        bandwidth_hz,
        noise_at_peak_m_rthz: noise::displacement_noise(interp, &params, peak_hz)?,
        resonance_in_domain,
        bandwidth_truncated: trunc_lo || trunc_hi,
    })
}

/// Maximum of a scalar function of `k` over `[k_min, k_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanMaximum {
    pub k: f64,
    pub value: f64,
    pub on_boundary: bool,
}

/// Coarse log-spaced scan (evaluated in parallel) followed by golden-section
/// refinement in `ln k` on the bracket around the best scan point.
pub fn maximize_log_scan<F>(
    objective: F,
    k_min: f64,
    k_max: f64,
    scan_points: usize,
) -> Result<ScanMaximum>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if !(k_min > 0.0 && k_max >= k_min) {
        return Err(Error::param(
            "k_range",
            format!("need 0 < k_min <= k_max, got [{k_min}, {k_max}]"),
        ));
    }
    if k_max / k_min - 1.0 < 1e-9 {
        return Ok(ScanMaximum {
            k: k_min,
            value: objective(k_min)?,
            on_boundary: true,
        });
    }
    let ks = grid::log_space(k_min, k_max, scan_points.max(3))?;
    let values: Vec<f64> = ks
        .par_iter()
        .map(|&k| objective(k))
        .collect::<Result<_>>()?;
    let i = values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > values[best] { i } else { best });
    let a = ks[i.saturating_sub(1)].ln();
    let b = ks[(i + 1).min(ks.len() - 1)].ln();
    let (x, v) = golden_max(|x| objective(x.exp().clamp(k_min, k_max)), a, b, 1e-11)?;
    let (k, value) = if v > values[i] {
        (x.exp().clamp(k_min, k_max), v)
    } else {
        (ks[i], values[i])
    };
    let on_boundary = (k / k_min - 1.0).abs() < 1e-9 || (1.0 - k / k_max).abs() < 1e-9;
    Ok(ScanMaximum {
        k,
        value,
        on_boundary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub k_s_opt_n_per_m: f64,
    /// Self-consistent resonance including the gas spring; absent when it
    /// lies outside the damping table.
    pub resonance_hz: Option<f64>,
    pub objective_value: f64,
    pub breakdown: ObjectiveBreakdown,
    pub on_boundary: bool,
    pub normalized_weights: [f64; 3],
    pub k_range_n_per_m: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub electrical_noise_floor_m_rthz: Option<f64>,
}

impl DesignResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    /// Parse and check the result's internal invariants.
    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        let [k1, k2] = r.k_range_n_per_m;
        if !(r.k_s_opt_n_per_m >= k1 && r.k_s_opt_n_per_m <= k2) {
            return Err(Error::Schema(format!(
                "k_s_opt {} outside [{k1}, {k2}]",
                r.k_s_opt_n_per_m
            )));
        }
        if (r.breakdown.total() - r.objective_value).abs()
            > 1e-12 * r.objective_value.abs().max(1.0)
        {
            return Err(Error::Schema(
                "breakdown does not sum to objective_value".into(),
            ));
        }
        Ok(r)
    }

    pub fn summary_table(&self) -> String {
        let b = &self.breakdown;
        let res = self
            .resonance_hz
            .map(|f| format!("{f:.6e} Hz"))
            .unwrap_or_else(|| "outside table".into());
        let mut s = String::new();
        s += &format!("{:<28} {:>16}\n", "quantity", "value");
        s += &format!(
            "{:<28} {:>16.6e}\n",
            "k_s optimum [N/m]", self.k_s_opt_n_per_m
        );
        s += &format!("{:<28} {:>16}\n", "resonance", res);
        s += &format!("{:<28} {:>16.6e}\n", "objective", self.objective_value);
        s += &format!("{:<28} {:>16.6e}\n", "  snr term", b.snr_term);
        s += &format!(
            "{:<28} {:>16.6e}\n",
            "  sensitivity term", b.sensitivity_term
        );
        s += &format!("{:<28} {:>16.6e}\n", "  bandwidth term", b.bandwidth_term);
        s += &format!("{:<28} {:>16.6e}\n", "  penalty term", b.penalty_term);
        s += &format!("{:<28} {:>16.6e}\n", "band SNR", b.band_snr);
        s += &format!(
            "{:<28} {:>16.6e}\n",
            "peak |m/D| [s^2]", b.peak_sensitivity_s2
        );
        s += &format!("{:<28} {:>16.6e}\n", "peak frequency [Hz]", b.peak_hz);
        s += &format!("{:<28} {:>16.6e}\n", "-3 dB bandwidth [Hz]", b.bandwidth_hz);
        s += &format!(
            "{:<28} {:>16.6e}\n",
            "noise at peak [m/rtHz]", b.noise_at_peak_m_rthz
        );
        if let Some(e) = self.electrical_noise_floor_m_rthz {
            s += &format!("{:<28} {:>16.6e}\n", "electrical floor [m/rtHz]", e);
        }
        s += &format!("{:<28} {:>16}\n", "on search boundary", self.on_boundary);
        s
    }
}

/// Spring constant maximizing the objective over `cfg.k_range_n_per_m`.
pub fn optimize_spring(
    cfg: &ObjectiveConfig,
    interp: &DampingInterpolant,
    mass_kg: f64,
    temperature_k: f64,
) -> Result<DesignResult> {
    let objective = Objective::new(cfg, interp, mass_kg, temperature_k)?;
    let [k_min, k_max] = cfg.k_range_n_per_m;
    let best = maximize_log_scan(
        |k| Ok(objective.eval(k)?.total()),
        k_min,
        k_max,
        cfg.scan_points,
    )?;
    let breakdown = objective.eval(best.k)?;
    let resonance_hz = match resonance_frequency(interp, mass_kg, best.k) {
        Ok(f) => Some(f),
        Err(Error::NoResonanceInBand { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(DesignResult {
        k_s_opt_n_per_m: best.k,
        resonance_hz,
        objective_value: breakdown.total(),
        breakdown,
        on_boundary: best.on_boundary,
        normalized_weights: cfg.normalized_weights(),
        k_range_n_per_m: cfg.k_range_n_per_m,
        electrical_noise_floor_m_rthz: cfg.electrical_noise_floor_m_rthz,
    })
}
