//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test -p mems-noise-cli --test acceptance`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mems_noise::damping::parse_csv;
use mems_noise::macromodel::{
    admittance_from_series, resistor_noise_contributions, series_rl, series_rl_samples,
    AirAdmittancePoint, SeriesRlPoint,
};
use mems_noise::noise::{force_noise_density, noise_spectra, parse_noise_csv, BOLTZMANN};
use mems_noise::optimizer::{optimize_spring, Objective};
use mems_noise::spice::{netlist, validate_netlist, ElementCensus};
use mems_noise::squeeze_film::{
    damping_coefficient, damping_series_sum, elastic_series_sum, spring_coefficient,
    squeeze_number, trapped_gas_stiffness,
};
use mems_noise::{
    fit_branches, grid, synth_spectrum, AnchorRule, DampingInterpolant, DampingSpectrum,
    DesignResult, GasProperties, LumpedRlModel, ObjectiveConfig, PlateGeometry, ResonatorParams,
    RlBranch, SeriesTruncation,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn square() -> PlateGeometry {
    PlateGeometry::new(200e-6, 200e-6, 5e-6).unwrap()
}

fn square_plate_table(points: usize) -> DampingSpectrum {
    let g = grid::log_space(10.0, 1e7, points).unwrap();
    synth_spectrum(
        &square(),
        &GasProperties::air(),
        &g,
        SeriesTruncation::default(),
    )
    .unwrap()
}

/// Angular frequency at which the squeeze number equals `sigma`.
fn omega_at(geom: &PlateGeometry, gas: &GasProperties, sigma: f64) -> f64 {
    sigma / squeeze_number(geom, gas, 1.0)
}

fn c1_squeeze_film_limits() -> Outcome {
    let t = Instant::now();
    let geom = square();
    let gas = GasProperties::air();
    let high = SeriesTruncation::new(999).unwrap();
    let b0 = damping_coefficient(&geom, &gas, 0.0, high);
    let w = geom.width_m();
    let b0_norm = b0 * geom.gap_m().powi(3) / (gas.viscosity_pa_s() * geom.length_m() * w.powi(3));
    let kd_norm = |sigma: f64, trunc| {
        spring_coefficient(&geom, &gas, omega_at(&geom, &gas, sigma), trunc)
            / trapped_gas_stiffness(&geom, &gas)
    };
    let kd_1e3 = kd_norm(1e3, high);
    let kd_1e3_default = kd_norm(1e3, SeriesTruncation::default());
    let kd_1e6 = kd_norm(1e6, high);
    let elapsed = t.elapsed();
    let b_ok = (0.417..=0.426).contains(&b0_norm);
    let kd_ok = (0.99..=1.01).contains(&kd_1e3);
    let time_ok = elapsed < Duration::from_secs(1);
    outcome(
        b_ok && kd_ok && time_ok,
        format!(
            "b0 g0^3/(mu L W^3) = {b0_norm:.5} in [0.417, 0.426]: {b_ok}; \
             kd(sigma=1e3) g0/(PA) = {kd_1e3:.5} (M=999), {kd_1e3_default:.5} (M=49) in [0.99, 1.01]: {kd_ok}; \
             kd(sigma=1e6) g0/(PA) = {kd_1e6:.5} (limit approached, informational); runtime {elapsed:.2?}"
        ),
    )
}

fn c2_series_convergence() -> Outcome {
    let m25 = SeriesTruncation::new(25).unwrap();
    let m99 = SeriesTruncation::new(99).unwrap();
    let mut sigmas = vec![0.0];
    sigmas.extend(grid::log_space(1e-3, 100.0, 200).unwrap());
    let mut worst: f64 = 0.0;
    for beta in [1.0, 2.0, 5.0] {
        for &s in &sigmas {
            worst = worst.max(rel(
                damping_series_sum(s, beta, m25),
                damping_series_sum(s, beta, m99),
            ));
            worst = worst.max(rel(
                elastic_series_sum(s, beta, m25),
                elastic_series_sum(s, beta, m99),
            ));
        }
    }
    outcome(
        worst <= 1e-3,
        format!("max relative difference M=25 vs M=99 over sigma in [0, 100], beta in {{1,2,5}}: {worst:.3e}"),
    )
}

fn c3_crossover() -> Outcome {
    let geom = square();
    let gas = GasProperties::air();
    let trunc = SeriesTruncation::default();
    let gap = |w: f64| {
        spring_coefficient(&geom, &gas, w, trunc) - w * damping_coefficient(&geom, &gas, w, trunc)
    };
    let ws = grid::log_space(omega_at(&geom, &gas, 0.1), omega_at(&geom, &gas, 1e4), 400).unwrap();
    let Some(i) = ws
        .windows(2)
        .position(|p| gap(p[0]) < 0.0 && gap(p[1]) >= 0.0)
    else {
        return outcome(false, "no crossover bracket found");
    };
    let (mut a, mut b) = (ws[i], ws[i + 1]);
    while (b - a) > 1e-13 * a {
        let mid = 0.5 * (a + b);
        if gap(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let sigma_c = squeeze_number(&geom, &gas, 0.5 * (a + b));
    outcome(
        (15.0..=25.0).contains(&sigma_c),
        format!("sigma_c = {sigma_c:.4} in [15, 25]"),
    )
}

fn c4_nyquist() -> Outcome {
    let v = force_noise_density(1.0, 300.0);
    let e = rel(v, 1.28716e-10);
    outcome(
        e <= 1e-5,
        format!("force_noise_density(1, 300) = {v:.6e}, relative error {e:.2e}"),
    )
}

fn c5_white_reduction() -> Outcome {
    let params = ResonatorParams::new(1e-8, 40.0, 300.0).unwrap();
    let g = grid::log_space(10.0, 1e7, 50).unwrap();
    let flat = DampingSpectrum::new(g.iter().map(|&f| (f, 2.5e-5, 0.0)).collect(), "flat").unwrap();
    let it = DampingInterpolant::new(flat).unwrap();
    let signal = |_: f64| 1.0;
    let s = noise_spectra(&it, &params, &g, AnchorRule::LowestRow, Some(&signal)).unwrap();
    let mut worst: f64 = 0.0;
    for r in &s.records {
        worst = worst
            .max(rel(r.force_noise, r.force_noise_white))
            .max(rel(r.accel_noise, r.accel_noise_white))
            .max(rel(r.displacement_noise, r.displacement_noise_white))
            .max(rel(r.snr.unwrap(), r.snr_white.unwrap()));
    }
    let reduction_ok = worst <= 1e-12 && s.records.len() == 50;

    // Heavy mass keeps the resonance (~10 kHz) well below the crossover.
    let it = DampingInterpolant::new(square_plate_table(61)).unwrap();
    let g = it.spectrum().frequencies();
    let s = noise_spectra(&it, &params, &g, AnchorRule::LowestRow, None).unwrap();
    let crossover = g.iter().copied().find(|&f| {
        let (b, kd) = it.evaluate(f).unwrap();
        kd >= 2.0 * PI * f * b
    });
    let Some(fc) = crossover else {
        return outcome(false, "no crossover inside the synthetic table");
    };
    let above: Vec<_> = s.records.iter().filter(|r| r.freq_hz > fc).collect();
    let over = above
        .iter()
        .all(|r| r.displacement_noise_white > r.displacement_noise);
    let min_ratio = above
        .iter()
        .map(|r| r.displacement_noise_white / r.displacement_noise)
        .fold(f64::INFINITY, f64::min);
    outcome(
        reduction_ok && over && !above.is_empty(),
        format!(
            "constant-b twins max relative difference {worst:.1e} (<= 1e-12); \
             white/frequency-dependent displacement noise above crossover {fc:.3e} Hz: \
             min ratio {min_ratio:.3} over {} points",
            above.len()
        ),
    )
}

fn c6_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let b = 10f64.powf(rng.random_range(-9.0..-1.0));
        let kd = 10f64.powf(rng.random_range(-6.0..4.0));
        let w = 10f64.powf(rng.random_range(0.0..8.0));
        let p = series_rl(&AirAdmittancePoint::from_coefficients(b, kd, w)).unwrap();
        let (b2, kd2) = admittance_from_series(&p).unwrap().coefficients();
        worst = worst.max(rel(b2, b)).max(rel(kd2, kd));
    }
    outcome(
        worst <= 1e-10,
        format!("10^4 random (b, kd, omega) triples, max relative error {worst:.2e}"),
    )
}

fn planted_samples(model: &LumpedRlModel, w_lo: f64, w_hi: f64, n: usize) -> Vec<SeriesRlPoint> {
    grid::log_space(w_lo, w_hi, n)
        .unwrap()
        .into_iter()
        .map(|w| {
            let z = model.impedance(w);
            SeriesRlPoint {
                omega: w,
                r_air: z.re,
                l_air: z.im / w,
            }
        })
        .collect()
}

fn max_branch_error(fit: &LumpedRlModel, truth: &LumpedRlModel) -> f64 {
    if fit.branches().len() != truth.branches().len() {
        return f64::INFINITY;
    }
    fit.branches()
        .iter()
        .zip(truth.branches())
        .map(|(a, b)| rel(a.r, b.r).max(rel(a.l, b.l)))
        .fold(0.0, f64::max)
}

fn c7_macromodel_fit() -> Outcome {
    let t = Instant::now();
    let one = LumpedRlModel::new(
        vec![RlBranch {
            r: 3.2e2,
            l: 4.0e-2,
        }],
        (1.0, 2.0),
        0.0,
    )
    .unwrap();
    let c = one.branches()[0].corner();
    let e1 = match fit_branches(&planted_samples(&one, c / 100.0, c * 100.0, 40), 1) {
        Ok(m) => max_branch_error(&m, &one),
        Err(_) => f64::INFINITY,
    };
    let three = LumpedRlModel::new(
        vec![
            RlBranch { r: 50.0, l: 5.0e-2 },
            RlBranch {
                r: 200.0,
                l: 2.0e-2,
            },
            RlBranch {
                r: 1.0e3,
                l: 1.0e-2,
            },
        ],
        (1.0, 2.0),
        0.0,
    )
    .unwrap();
    let e3 = match fit_branches(&planted_samples(&three, 10.0, 1e7, 80), 3) {
        Ok(m) => max_branch_error(&m, &three),
        Err(_) => f64::INFINITY,
    };
    let it = DampingInterpolant::new(square_plate_table(91)).unwrap();
    let pts = series_rl_samples(&it, &grid::log_space(1e4, 1e7, 60).unwrap()).unwrap();
    let air = fit_branches(&pts, 3);
    let residual = air
        .as_ref()
        .map(|m| m.fit_residual())
        .unwrap_or(f64::INFINITY);

    let mut worst_noise: f64 = 0.0;
    if let Ok(m) = &air {
        let t_k = 300.0;
        for w in grid::log_space(2.0 * PI * 1e3, 2.0 * PI * 1e8, 100).unwrap() {
            let sum: f64 = resistor_noise_contributions(m, t_k, w).iter().sum();
            let direct = 4.0 * BOLTZMANN * t_k * m.admittance(w).re;
            worst_noise = worst_noise.max(rel(sum, direct));
        }
    } else {
        worst_noise = f64::INFINITY;
    }
    let elapsed = t.elapsed();
    let pass = e1 <= 1e-6
        && e3 <= 1e-4
        && residual <= 0.05
        && worst_noise <= 1e-9
        && elapsed < Duration::from_secs(30);
    outcome(
        pass,
        format!(
            "1-branch recovery {e1:.1e} (<= 1e-6); 3-branch recovery {e3:.1e} (<= 1e-4); \
             air fit residual over 1e4..1e7 Hz {residual:.3e} (<= 0.05); \
             noise consistency {worst_noise:.1e} (<= 1e-9); runtime {elapsed:.2?}"
        ),
    )
}

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/default_3branch.cir")
}

fn c8_netlist_golden() -> Outcome {
    let model = LumpedRlModel::new(
        vec![
            RlBranch {
                r: 6.4087475804e2,
                l: 2.8065184997e3,
            },
            RlBranch {
                r: 4.4111652106e2,
                l: 1.0496799634e-4,
            },
            RlBranch {
                r: 1.7576208735e5,
                l: 5.7480483385e-4,
            },
        ],
        (1.0e3, 1.0e6),
        3.1524100057e-4,
    )
    .unwrap();
    let params = ResonatorParams::new(1.0e-9, 5.0, 300.0).unwrap();
    let a = netlist(&model, &params);
    let b = netlist(&model, &params);
    let golden = std::fs::read_to_string(golden_path()).unwrap_or_default();
    let identical = a == b && a == golden;
    let census = validate_netlist(&a).ok();
    let want = ElementCensus {
        resistors: 3,
        inductors: 4,
        capacitors: 1,
    };
    outcome(
        identical && census == Some(want),
        format!("byte-identical to golden file: {identical}; census {census:?}"),
    )
}

fn optimizer_configs() -> Vec<ObjectiveConfig> {
    let band = [2e3, 5e4];
    let range = [0.5, 5000.0];
    vec![
        ObjectiveConfig::new([1.0, 0.0, 0.0], band, 1700.0, range).unwrap(),
        ObjectiveConfig::new([0.0, 0.0, 1.0], band, 1700.0, range).unwrap(),
        ObjectiveConfig::new([0.2, 0.3, 1.0], band, 1650.0, range).unwrap(),
    ]
}

fn c9_optimizer_oracle() -> Outcome {
    const MASS: f64 = 1e-8;
    const TEMP: f64 = 300.0;
    let it = DampingInterpolant::new(square_plate_table(80)).unwrap();
    let mut details = Vec::new();
    let mut pass = true;
    for (i, cfg) in optimizer_configs().iter().enumerate() {
        let r = optimize_spring(cfg, &it, MASS, TEMP).unwrap();
        let obj = Objective::new(cfg, &it, MASS, TEMP).unwrap();
        let [k1, k2] = cfg.k_range_n_per_m;
        let ks = grid::log_space(k1, k2, 100_000).unwrap();
        let v: Vec<f64> = ks.iter().map(|&k| obj.eval(k).unwrap().total()).collect();
        let best = v
            .iter()
            .enumerate()
            .fold(0, |b, (j, x)| if *x > v[b] { j } else { b });
        let e = rel(r.k_s_opt_n_per_m, ks[best]);

        let mut scaled = cfg.clone();
        scaled.weight_snr *= 7.0;
        scaled.weight_sensitivity *= 7.0;
        scaled.weight_bandwidth *= 7.0;
        let rs = optimize_spring(&scaled, &it, MASS, TEMP).unwrap();
        let inv = rel(rs.k_s_opt_n_per_m, r.k_s_opt_n_per_m);
        pass &= e <= 1e-3 && inv <= 1e-9;
        details.push(format!(
            "cfg{} k_opt {:.5e} vs scan {:.5e} ({e:.1e}), rescaled {inv:.1e}",
            i + 1,
            r.k_s_opt_n_per_m,
            ks[best]
        ));
    }
    outcome(pass, details.join("; "))
}

fn run(bin: &str, args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "`{}` exited {:?}: {}",
            args[0],
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn c10_pipeline() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_mems-noise");
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (geometry, objective) = (p("geometry.toml"), p("objective.toml"));
    std::fs::write(
        &geometry,
        "[plate]\nlength_m = 200e-6\nwidth_m = 200e-6\ngap_m = 5e-6\n\n\
         [gas]\npressure_pa = 101325.0\nviscosity_pa_s = 1.85e-5\ntemperature_k = 300.0\n",
    )
    .unwrap();
    std::fs::write(
        &objective,
        "weight_snr = 0.2\nweight_sensitivity = 0.3\nweight_bandwidth = 1.0\n\
         operating_band_hz = [2e3, 5e4]\ntarget_bandwidth_hz = 1650.0\n\
         electrical_noise_floor_m_rthz = 1e-14\nk_range_n_per_m = [0.5, 5000.0]\n",
    )
    .unwrap();

    let t = Instant::now();
    let (damping, noise, model, cir, design, plot) = (
        p("damping.csv"),
        p("noise.csv"),
        p("model.json"),
        p("resonator.cir"),
        p("design.json"),
        p("noise.gp"),
    );
    let steps: [Vec<&str>; 5] = [
        vec![
            "synth",
            "--geometry",
            &geometry,
            "--out",
            &damping,
            "--fmin",
            "10",
            "--fmax",
            "1e7",
            "--points",
            "61",
        ],
        vec![
            "noise",
            "--in",
            &damping,
            "--out",
            &noise,
            "--mass",
            "1e-8",
            "--kspring",
            "40",
            "--temp",
            "300",
            "--plot-script",
            &plot,
        ],
        vec![
            "fit",
            "--in",
            &damping,
            "--out",
            &model,
            "--fmin",
            "1e4",
            "--fmax",
            "1e7",
            "--branches",
            "3",
        ],
        vec![
            "export-spice",
            "--in",
            &model,
            "--out",
            &cir,
            "--mass",
            "1e-8",
            "--kspring",
            "40",
            "--temp",
            "300",
        ],
        vec![
            "optimize",
            "--in",
            &damping,
            "--objective",
            &objective,
            "--out",
            &design,
            "--mass",
            "1e-8",
        ],
    ];
    for s in &steps {
        if let Err(e) = run(bin, s) {
            return outcome(false, e);
        }
    }
    let elapsed = t.elapsed();

    let read = |f: &str| std::fs::read_to_string(f).unwrap_or_default();
    let checks = [
        (
            "damping csv",
            parse_csv(read(&damping).as_bytes())
                .map(|_| ())
                .map_err(|e| e.to_string()),
        ),
        (
            "noise csv",
            parse_noise_csv(read(&noise).as_bytes())
                .map(|_| ())
                .map_err(|e| e.to_string()),
        ),
        (
            "model json",
            LumpedRlModel::from_json(&read(&model))
                .map(|_| ())
                .map_err(|e| e.to_string()),
        ),
        (
            "netlist",
            validate_netlist(&read(&cir))
                .map(|_| ())
                .map_err(|e| e.to_string()),
        ),
        (
            "design json",
            DesignResult::from_json(&read(&design))
                .map(|_| ())
                .map_err(|e| e.to_string()),
        ),
        (
            "plot script",
            if read(&plot).contains(&noise) {
                Ok(())
            } else {
                Err("does not reference the CSV".into())
            },
        ),
    ];
    let failed: Vec<String> = checks
        .iter()
        .filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}")))
        .collect();
    outcome(
        failed.is_empty() && elapsed < Duration::from_secs(60),
        if failed.is_empty() {
            format!("5 stages exit 0 in {elapsed:.2?}; all 6 artifacts validate")
        } else {
            failed.join("; ")
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("squeeze-film limits", c1_squeeze_film_limits),
        ("series convergence", c2_series_convergence),
        ("crossover squeeze number", c3_crossover),
        ("Nyquist force noise", c4_nyquist),
        ("white-model reduction", c5_white_reduction),
        ("admittance round-trip", c6_round_trip),
        ("macromodel fit", c7_macromodel_fit),
        ("netlist golden file", c8_netlist_golden),
        ("optimizer oracle", c9_optimizer_oracle),
        ("end-to-end pipeline", c10_pipeline),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failures += 1;
        }
        println!(
            "{} {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
