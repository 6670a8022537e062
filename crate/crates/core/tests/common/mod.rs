#![allow(dead_code)]

use mems_noise::{
    grid, synth_spectrum, DampingInterpolant, DampingSpectrum, GasProperties, PlateGeometry,
    SeriesTruncation,
};

/// 200 µm square plate over a 5 µm air gap, 10 Hz to 10 MHz.
pub fn square_plate_table(points: usize) -> DampingSpectrum {
    let geom = PlateGeometry::new(200e-6, 200e-6, 5e-6).unwrap();
    let g = grid::log_space(10.0, 1e7, points).unwrap();
    synth_spectrum(
        &geom,
        &GasProperties::air(),
        &g,
        SeriesTruncation::default(),
    )
    .unwrap()
}

pub fn square_plate(points: usize) -> DampingInterpolant {
    DampingInterpolant::new(square_plate_table(points)).unwrap()
}

pub fn constant_table(b: f64, kd: f64) -> DampingInterpolant {
    let g = grid::log_space(10.0, 1e7, 60).unwrap();
    DampingInterpolant::new(
        DampingSpectrum::new(g.into_iter().map(|f| (f, b, kd)).collect(), "constant").unwrap(),
    )
    .unwrap()
}

pub const MASS_KG: f64 = 1e-8;
pub const TEMP_K: f64 = 300.0;

/// Index of the first maximum.
pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (i, x)| if *x > v[best] { i } else { best })
}
