//! Closed-form squeeze-film forces on a rigid rectangular plate.
//!
//! The gas film between the plate and the substrate is described by the
//! linearized Reynolds equation. Its double Fourier-series solution yields a
//! dissipative force (reported as a damping coefficient `b(ω)`, N·s/m) and an
//! elastic force (reported as a gas spring `k_d(ω)`, N/m), both per unit of
//! small plate displacement:
//!
//! ```text
//! σ      = 12 μ ω W² / (P g0²)
//! b(ω)   = 64 σ P A / (π⁶ ω g0) · Σ (m² + (n/β)²) / ((mn)² [(m² + (n/β)²)² + σ²/π⁴])
//! k_d(ω) = 64 σ² P A / (π⁸ g0)  · Σ 1               / ((mn)² [(m² + (n/β)²)² + σ²/π⁴])
//! ```
//!
//! with the sums over odd `m`, `n`. At low squeeze number the film is a pure
//! viscous damper; at high squeeze number the trapped gas acts as a spring
//! of stiffness `P A / g0`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::damping::DampingSpectrum;
use crate::error::{Error, Result};

/// Rigid rectangular plate over a parallel substrate.
///
/// `width_m` is the shorter side; the aspect ratio `beta = length / width` is
/// therefore at least one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlateGeometryFields", into = "PlateGeometryFields")]
pub struct PlateGeometry {
    length_m: f64,
    width_m: f64,
    gap_m: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct PlateGeometryFields {
    length_m: f64,
    width_m: f64,
    gap_m: f64,
}

impl TryFrom<PlateGeometryFields> for PlateGeometry {
    type Error = Error;

    fn try_from(f: PlateGeometryFields) -> Result<Self> {
        PlateGeometry::new(f.length_m, f.width_m, f.gap_m)
    }
}

impl From<PlateGeometry> for PlateGeometryFields {
    fn from(g: PlateGeometry) -> Self {
        PlateGeometryFields {
            length_m: g.length_m,
            width_m: g.width_m,
            gap_m: g.gap_m,
        }
    }
}

fn require_positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            field,
            format!("must be finite and > 0, got {value}"),
        ))
    }
}

impl PlateGeometry {
    pub fn new(length_m: f64, width_m: f64, gap_m: f64) -> Result<Self> {
        require_positive("length_m", length_m)?;
        require_positive("width_m", width_m)?;
        require_positive("gap_m", gap_m)?;
        if width_m > length_m {
            return Err(Error::param(
                "width_m",
                format!("width ({width_m}) must not exceed length ({length_m})"),
            ));
        }
        Ok(Self {
            length_m,
            width_m,
            gap_m,
            beta: length_m / width_m,
        })
    }

    pub fn length_m(&self) -> f64 {
        self.length_m
    }

    pub fn width_m(&self) -> f64 {
        self.width_m
    }

    pub fn gap_m(&self) -> f64 {
        self.gap_m
    }

    /// Aspect ratio `L / W`, always `>= 1`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn area_m2(&self) -> f64 {
        self.length_m * self.width_m
    }
}

/// Gas filling the gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GasPropertiesFields", into = "GasPropertiesFields")]
pub struct GasProperties {
    pressure_pa: f64,
    viscosity_pa_s: f64,
    temperature_k: f64,
}

#[derive(Serialize, Deserialize)]
struct GasPropertiesFields {
    pressure_pa: f64,
    viscosity_pa_s: f64,
    temperature_k: f64,
}

impl TryFrom<GasPropertiesFields> for GasProperties {
    type Error = Error;

    fn try_from(f: GasPropertiesFields) -> Result<Self> {
        GasProperties::new(f.pressure_pa, f.viscosity_pa_s, f.temperature_k)
    }
}

impl From<GasProperties> for GasPropertiesFields {
    fn from(g: GasProperties) -> Self {
        GasPropertiesFields {
            pressure_pa: g.pressure_pa,
            viscosity_pa_s: g.viscosity_pa_s,
            temperature_k: g.temperature_k,
        }
    }
}

impl GasProperties {
    pub fn new(pressure_pa: f64, viscosity_pa_s: f64, temperature_k: f64) -> Result<Self> {
        require_positive("pressure_pa", pressure_pa)?;
        require_positive("viscosity_pa_s", viscosity_pa_s)?;
        require_positive("temperature_k", temperature_k)?;
        Ok(Self {
            pressure_pa,
            viscosity_pa_s,
            temperature_k,
        })
    }

    /// Dry air at 1 atm and 300 K.
    pub fn air() -> Self {
        Self {
            pressure_pa: 101_325.0,
            viscosity_pa_s: 1.85e-5,
            temperature_k: 300.0,
        }
    }

    pub fn pressure_pa(&self) -> f64 {
        self.pressure_pa
    }

    pub fn viscosity_pa_s(&self) -> f64 {
        self.viscosity_pa_s
    }

    pub fn temperature_k(&self) -> f64 {
        self.temperature_k
    }
}

/// Truncation of the double series.
///
/// `m` runs over odd integers up to `max_index`; `n` runs over odd integers
/// up to `ceil(beta * max_index)`, so the normalized wavenumber `n / beta`
/// is cut at the same value as `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct SeriesTruncation {
    max_index: u32,
}

impl SeriesTruncation {
    pub const DEFAULT_MAX_INDEX: u32 = 49;

    pub fn new(max_index: u32) -> Result<Self> {
        if max_index == 0 || max_index.is_multiple_of(2) {
            return Err(Error::param(
                "max_index",
                format!("must be an odd integer >= 1, got {max_index}"),
            ));
        }
        Ok(Self { max_index })
    }

    pub fn max_index(&self) -> u32 {
        self.max_index
    }

    fn n_limit(&self, beta: f64) -> u32 {
        (beta * f64::from(self.max_index)).ceil() as u32
    }
}

impl Default for SeriesTruncation {
    fn default() -> Self {
        Self {
            max_index: Self::DEFAULT_MAX_INDEX,
        }
    }
}

impl TryFrom<u32> for SeriesTruncation {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SeriesTruncation> for u32 {
    fn from(t: SeriesTruncation) -> u32 {
        t.max_index
    }
}

/// `12 μ W² / (P g0²)`: the squeeze number per unit angular frequency.
fn squeeze_per_omega(geom: &PlateGeometry, gas: &GasProperties) -> f64 {
    12.0 * gas.viscosity_pa_s * geom.width_m * geom.width_m
        / (gas.pressure_pa * geom.gap_m * geom.gap_m)
}

/// Dimensionless squeeze number at angular frequency `omega` (rad/s).
pub fn squeeze_number(geom: &PlateGeometry, gas: &GasProperties, omega: f64) -> f64 {
    debug_assert!(omega >= 0.0);
    squeeze_per_omega(geom, gas) * omega
}

/// Both sums in one pass: `(S_d, S_s)`.
fn series_sums(sigma: f64, beta: f64, trunc: SeriesTruncation) -> (f64, f64) {
    let s2 = sigma * sigma / PI.powi(4);
    let inv_beta2 = 1.0 / (beta * beta);
    let n_max = trunc.n_limit(beta);
    let mut sd = 0.0;
    let mut ss = 0.0;
    // Largest indices first so the small tail terms are not swallowed.
    for m in (1..=trunc.max_index).rev().step_by(2) {
        let m2 = f64::from(m) * f64::from(m);
        let n_top = if n_max.is_multiple_of(2) {
            n_max - 1
        } else {
            n_max
        };
        for n in (1..=n_top).rev().step_by(2) {
            let n2 = f64::from(n) * f64::from(n);
            let a = m2 + n2 * inv_beta2;
            let inv = 1.0 / (m2 * n2 * (a * a + s2));
            sd += a * inv;
            ss += inv;
        }
    }
    (sd, ss)
}

/// Damping series `S_d(σ, β)`.
pub fn damping_series_sum(sigma: f64, beta: f64, trunc: SeriesTruncation) -> f64 {
    series_sums(sigma, beta, trunc).0
}

/// Elastic series `S_s(σ, β)`.
pub fn elastic_series_sum(sigma: f64, beta: f64, trunc: SeriesTruncation) -> f64 {
    series_sums(sigma, beta, trunc).1
}

/// Squeeze-film damping coefficient `b(ω)` in N·s/m.
///
/// The `σ/ω` ratio in the prefactor is taken from [`squeeze_per_omega`], so
/// `omega = 0` yields the viscous DC limit without a 0/0.
pub fn damping_coefficient(
    geom: &PlateGeometry,
    gas: &GasProperties,
    omega: f64,
    trunc: SeriesTruncation,
) -> f64 {
    let sigma = squeeze_number(geom, gas, omega);
    let prefactor = 64.0 * squeeze_per_omega(geom, gas) * gas.pressure_pa * geom.area_m2()
        / (PI.powi(6) * geom.gap_m);
    prefactor * damping_series_sum(sigma, geom.beta, trunc)
}

/// Gas spring `k_d(ω)` in N/m.
pub fn spring_coefficient(
    geom: &PlateGeometry,
    gas: &GasProperties,
    omega: f64,
    trunc: SeriesTruncation,
) -> f64 {
    let sigma = squeeze_number(geom, gas, omega);
    if sigma == 0.0 {
        return 0.0;
    }
    let prefactor =
        64.0 * sigma * sigma * gas.pressure_pa * geom.area_m2() / (PI.powi(8) * geom.gap_m);
    prefactor * elastic_series_sum(sigma, geom.beta, trunc)
}

/// `(b, k_d)` at one angular frequency, sharing the series evaluation.
pub fn coefficients(
    geom: &PlateGeometry,
    gas: &GasProperties,
    omega: f64,
    trunc: SeriesTruncation,
) -> (f64, f64) {
    let per_omega = squeeze_per_omega(geom, gas);
    let sigma = per_omega * omega;
    let (sd, ss) = series_sums(sigma, geom.beta, trunc);
    let pa_g = gas.pressure_pa * geom.area_m2() / geom.gap_m;
    let b = 64.0 * per_omega * pa_g / PI.powi(6) * sd;
    let kd = 64.0 * sigma * sigma * pa_g / PI.powi(8) * ss;
    (b, kd)
}

/// Trapped-gas stiffness `P A / g0`, the high-frequency limit of `k_d`.
pub fn trapped_gas_stiffness(geom: &PlateGeometry, gas: &GasProperties) -> f64 {
    gas.pressure_pa * geom.area_m2() / geom.gap_m
}

/// Tabulate `(f, b, k_d)` on a frequency grid in Hz.
pub fn synth_spectrum(
    geom: &PlateGeometry,
    gas: &GasProperties,
    grid_hz: &[f64],
    trunc: SeriesTruncation,
) -> Result<DampingSpectrum> {
    crate::grid::validate_grid(grid_hz)?;
    let rows = grid_hz
        .iter()
        .map(|&f| {
            let (b, kd) = coefficients(geom, gas, 2.0 * PI * f, trunc);
            (f, b, kd)
        })
        .collect();
    DampingSpectrum::new(rows, "synthetic")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(v: u32) -> SeriesTruncation {
        SeriesTruncation::new(v).unwrap()
    }

    #[test]
    fn geometry_validation() {
        assert!(PlateGeometry::new(100e-6, 200e-6, 2e-6).is_err());
        assert!(PlateGeometry::new(100e-6, 100e-6, 0.0).is_err());
        assert!(PlateGeometry::new(f64::NAN, 100e-6, 1e-6).is_err());
        let g = PlateGeometry::new(300e-6, 100e-6, 2e-6).unwrap();
        assert_relative_eq!(g.beta(), 3.0, max_relative = 1e-12);
        assert_relative_eq!(g.area_m2(), 3e-8, max_relative = 1e-12);
    }

    #[test]
    fn truncation_must_be_odd() {
        assert!(SeriesTruncation::new(0).is_err());
        assert!(SeriesTruncation::new(10).is_err());
        assert_eq!(SeriesTruncation::default().max_index(), 49);
    }

    #[test]
    fn squeeze_number_examples() {
        let gas = GasProperties::new(101_325.0, 1.85e-5, 300.0).unwrap();
        let geom = PlateGeometry::new(100e-6, 100e-6, 2e-6).unwrap();
        assert_eq!(squeeze_number(&geom, &gas, 0.0), 0.0);
        // 12 * 1.85e-5 * 2π·1e4 * (1e-4)² / (101325 * (2e-6)²), evaluated separately.
        let sigma = squeeze_number(&geom, &gas, 2.0 * PI * 1e4);
        assert_relative_eq!(sigma, 0.344_156_708_165_277, max_relative = 1e-12);
        let thick = GasProperties::new(101_325.0, 3.7e-5, 300.0).unwrap();
        assert_relative_eq!(
            squeeze_number(&geom, &thick, 1e5),
            2.0 * squeeze_number(&geom, &gas, 1e5),
            max_relative = 1e-14
        );
    }

    #[test]
    fn single_term_sums() {
        let s = PI * PI;
        assert_relative_eq!(damping_series_sum(s, 1.0, m(1)), 0.4, max_relative = 1e-14);
        assert_relative_eq!(elastic_series_sum(s, 1.0, m(1)), 0.2, max_relative = 1e-14);
    }

    #[test]
    fn dc_sums_match_high_truncation() {
        // Brute-force sums with M = 1999 (numpy, independent of this code).
        assert_relative_eq!(
            damping_series_sum(0.0, 1.0, m(999)),
            0.527_926_652_100_548,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            elastic_series_sum(0.0, 1.0, m(999)),
            0.252_411_311_234_026,
            max_relative = 1e-9
        );
    }

    #[test]
    fn elastic_bounded_by_damping_for_square() {
        for &s in &[0.0, 0.5, 3.0, 20.0, 100.0, 1e4] {
            assert!(elastic_series_sum(s, 1.0, m(49)) <= damping_series_sum(s, 1.0, m(49)));
        }
    }

    #[test]
    fn low_frequency_damping_constant() {
        let gas = GasProperties::air();
        let geom = PlateGeometry::new(200e-6, 200e-6, 2e-6).unwrap();
        let b0 = damping_coefficient(&geom, &gas, 0.0, m(199));
        let c = b0 * geom.gap_m().powi(3)
            / (gas.viscosity_pa_s() * geom.length_m() * geom.width_m().powi(3));
        assert!((0.417..=0.426).contains(&c), "c = {c}");
        // 768/π⁶ · S_d(0,1)
        assert_relative_eq!(
            c,
            768.0 / PI.powi(6) * 0.527_926_601_249_411_3,
            max_relative = 1e-9
        );

        let half = PlateGeometry::new(200e-6, 200e-6, 1e-6).unwrap();
        let ratio = damping_coefficient(&half, &gas, 0.0, m(49))
            / damping_coefficient(&geom, &gas, 0.0, m(49));
        assert_relative_eq!(ratio, 8.0, max_relative = 1e-12);
    }

    #[test]
    fn damping_at_unit_single_term_sigma() {
        let gas = GasProperties::air();
        let geom = PlateGeometry::new(100e-6, 100e-6, 2e-6).unwrap();
        let omega = PI * PI / squeeze_number(&geom, &gas, 1.0);
        let b = damping_coefficient(&geom, &gas, omega, m(49));
        let direct = 64.0 * PI * PI * gas.pressure_pa() * geom.area_m2()
            / (PI.powi(6) * omega * geom.gap_m())
            * damping_series_sum(PI * PI, 1.0, m(49));
        assert_relative_eq!(b, direct, max_relative = 1e-12);
    }

    #[test]
    fn spring_zero_at_dc_and_monotone() {
        let gas = GasProperties::air();
        let geom = PlateGeometry::new(150e-6, 100e-6, 2e-6).unwrap();
        assert_eq!(spring_coefficient(&geom, &gas, 0.0, m(49)), 0.0);
        let grid = crate::grid::log_space(10.0, 1e7, 50).unwrap();
        let kd: Vec<f64> = grid
            .iter()
            .map(|f| spring_coefficient(&geom, &gas, 2.0 * PI * f, m(49)))
            .collect();
        assert!(kd.windows(2).all(|w| w[1] >= w[0]));
        let b: Vec<f64> = grid
            .iter()
            .map(|f| damping_coefficient(&geom, &gas, 2.0 * PI * f, m(49)))
            .collect();
        assert!(b.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn gas_spring_approaches_trapped_gas_slowly() {
        let gas = GasProperties::air();
        let geom = PlateGeometry::new(100e-6, 100e-6, 2e-6).unwrap();
        let per_omega = squeeze_number(&geom, &gas, 1.0);
        let ratio = |sigma: f64| {
            spring_coefficient(&geom, &gas, sigma / per_omega, m(999))
                / trapped_gas_stiffness(&geom, &gas)
        };
        // Brute-force sums, M = 999.
        assert_relative_eq!(ratio(1e3), 0.91056, max_relative = 1e-4);
        assert_relative_eq!(ratio(1e6), 0.9972, max_relative = 1e-3);
        assert!(ratio(1e6) < 1.0);
    }

    #[test]
    fn combined_matches_separate() {
        let gas = GasProperties::air();
        let geom = PlateGeometry::new(300e-6, 120e-6, 3e-6).unwrap();
        for &w in &[0.0, 1.0, 1e4, 1e6, 1e8] {
            let (b, kd) = coefficients(&geom, &gas, w, m(49));
            assert_relative_eq!(
                b,
                damping_coefficient(&geom, &gas, w, m(49)),
                max_relative = 1e-14
            );
            assert_relative_eq!(
                kd,
                spring_coefficient(&geom, &gas, w, m(49)),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn synth_rejects_bad_grid() {
        let gas = GasProperties::air();
        let geom = PlateGeometry::new(100e-6, 100e-6, 2e-6).unwrap();
        assert!(synth_spectrum(&geom, &gas, &[], m(49)).is_err());
        assert!(synth_spectrum(&geom, &gas, &[10.0, 5.0], m(49)).is_err());
        assert!(synth_spectrum(&geom, &gas, &[0.0, 5.0], m(49)).is_err());
        let one = synth_spectrum(&geom, &gas, &[1e3], m(49)).unwrap();
        assert_eq!(one.rows().len(), 1);
        let (b, kd) = coefficients(&geom, &gas, 2.0 * PI * 1e3, m(49));
        assert_eq!(one.rows()[0].b_ns_per_m, b);
        assert_eq!(one.rows()[0].kd_n_per_m, kd);
    }
}
