mod common;

use std::f64::consts::PI;

use mems_noise::damping::{export_csv, parse_csv};
use mems_noise::squeeze_film::coefficients;
use mems_noise::{
    grid, synth_spectrum, DampingInterpolant, GasProperties, PlateGeometry, SeriesTruncation,
};

fn check_midpoints(geom: PlateGeometry, lo: f64, hi: f64, points: usize) -> f64 {
    let gas = GasProperties::air();
    let trunc = SeriesTruncation::default();
    let g = grid::log_space(lo, hi, points).unwrap();
    let it = DampingInterpolant::new(synth_spectrum(&geom, &gas, &g, trunc).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    for w in g.windows(2) {
        let f = (w[0] * w[1]).sqrt();
        let (b, kd) = it.evaluate(f).unwrap();
        let (b0, kd0) = coefficients(&geom, &gas, 2.0 * PI * f, trunc);
        worst = worst.max((b / b0 - 1.0).abs()).max((kd / kd0 - 1.0).abs());
    }
    worst
}

#[test]
fn off_knot_values_track_the_analytic_model() {
    let square = PlateGeometry::new(200e-6, 200e-6, 5e-6).unwrap();
    let strip = PlateGeometry::new(500e-6, 100e-6, 2e-6).unwrap();
    for (geom, lo, hi, n) in [
        (square, 10.0, 1e7, 61),
        (square, 10.0, 1e6, 50),
        (strip, 100.0, 1e7, 51),
    ] {
        let worst = check_midpoints(geom, lo, hi, n);
        assert!(worst < 0.01, "worst relative error {worst:e}");
    }
}

#[test]
fn synthetic_table_survives_csv_round_trip() {
    let spec = common::square_plate_table(40);
    let back = parse_csv(&export_csv(&spec)[..]).unwrap();
    assert_eq!(back, spec);
    assert_eq!(back.source_tag(), "synthetic");
}

#[test]
fn crossover_sits_inside_the_synthetic_table() {
    // k_d overtakes ωb once, well inside 10 Hz .. 10 MHz.
    let it = common::square_plate(121);
    let f = it.spectrum().frequencies();
    let sign: Vec<bool> = f
        .iter()
        .map(|&x| {
            let (b, kd) = it.evaluate(x).unwrap();
            kd > 2.0 * PI * x * b
        })
        .collect();
    let flips = sign.windows(2).filter(|w| w[0] != w[1]).count();
    assert_eq!(flips, 1);
    assert!(!sign[0] && *sign.last().unwrap());
}
