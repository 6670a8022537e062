use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Deserialize;

use mems_noise::fit::FitOptions;
use mems_noise::macromodel::series_rl_samples;
use mems_noise::noise::noise_spectra;
use mems_noise::optimizer::optimize_spring;
use mems_noise::{
    grid, AnchorRule, DampingInterpolant, DampingSpectrum, Error, GasProperties, LumpedRlModel,
    ObjectiveConfig, PlateGeometry, ResonatorParams, SeriesTruncation,
};

#[derive(Parser)]
#[command(
    name = "mems-noise",
    version,
    about = "Squeeze-film damping, thermal noise and macromodel pipeline"
)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate analytic squeeze-film damping for a rectangular plate.
    Synth(SynthArgs),
    /// Thermal noise spectra, frequency-dependent and white baseline.
    Noise(NoiseArgs),
    /// Fit a lumped series-of-parallel RL model to the film admittance.
    Fit(FitArgs),
    /// Write the resonator and fitted film model as a SPICE subcircuit.
    ExportSpice(ExportArgs),
    /// Choose the spring constant maximizing the design objective.
    Optimize(OptimizeArgs),
}

#[derive(Args)]
struct GridArgs {
    /// Lowest frequency, Hz.
    #[arg(long)]
    fmin: Option<f64>,
    /// Highest frequency, Hz.
    #[arg(long)]
    fmax: Option<f64>,
    /// Number of log-spaced points.
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args)]
struct ResonatorArgs {
    /// Proof mass, kg.
    #[arg(long)]
    mass: f64,
    /// Mechanical spring constant, N/m.
    #[arg(long)]
    kspring: f64,
    /// Temperature, K.
    #[arg(long, default_value_t = 300.0)]
    temp: f64,
}

#[derive(Args)]
struct SynthArgs {
    /// Geometry and gas TOML file.
    #[arg(long)]
    geometry: PathBuf,
    /// Output damping CSV.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct NoiseArgs {
    /// Damping CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output noise CSV.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    resonator: ResonatorArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// White baseline damping: `lowest` (first table row) or a frequency in Hz.
    #[arg(long, default_value = "lowest")]
    white_anchor: String,
    /// Flat input acceleration, (m/s²)/√Hz; adds an SNR column.
    #[arg(long)]
    signal_accel: Option<f64>,
    /// Also write a gnuplot script plotting the CSV.
    #[arg(long)]
    plot_script: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Damping CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output model JSON.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 3)]
    branches: usize,
    #[arg(long, default_value_t = FitOptions::default().n_starts)]
    starts: usize,
}

#[derive(Args)]
struct ExportArgs {
    /// Model JSON.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output netlist.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    resonator: ResonatorArgs,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Damping CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Objective TOML file.
    #[arg(long)]
    objective: PathBuf,
    /// Output design JSON.
    #[arg(long)]
    out: PathBuf,
    /// Proof mass, kg.
    #[arg(long)]
    mass: f64,
    /// Temperature, K.
    #[arg(long, default_value_t = 300.0)]
    temp: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryFile {
    plate: PlateGeometry,
    #[serde(default = "GasProperties::air")]
    gas: GasProperties,
    #[serde(default)]
    series: SeriesSection,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SeriesSection {
    max_index: Option<SeriesTruncation>,
}

const SYNTH_FMIN: f64 = 10.0;
const SYNTH_FMAX: f64 = 1.0e6;
const SYNTH_POINTS: usize = 50;
const FIT_POINTS: usize = 60;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain { .. } | Error::NoResonanceInBand { .. } => 3,
        Error::SingularResponse { .. } | Error::DegenerateAdmittance | Error::Fit { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Noise(a) => noise(a),
        Command::Fit(a) => fit(a),
        Command::ExportSpice(a) => export(a),
        Command::Optimize(a) => optimize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Grid from flags, falling back to `default` (lo, hi, points).
#[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
fn grid_from(args: &GridArgs, default: (f64, f64, usize)) -> mems_noise::Result<Vec<f64>> {
    let lo = args.fmin.unwrap_or(default.0);
    let hi = args.fmax.unwrap_or(default.1);
    let n = args.points.unwrap_or(default.2);
    if !(lo < hi) {
        return Err(Error::InvalidGrid(format!(
            "fmin {lo} must be below fmax {hi}"
        )));
    }
    grid::log_space(lo, hi, n)
}

/// Prefix I/O errors with the offending path.
fn at_path<T>(path: &Path, r: mems_noise::Result<T>) -> mems_noise::Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    })
}

fn load_interp(path: &Path) -> mems_noise::Result<DampingInterpolant> {
    let spec = at_path(path, DampingSpectrum::from_csv_path(path))?;
    info!(
        "{}: {} rows, source `{}`",
        path.display(),
        spec.rows().len(),
        spec.source_tag()
    );
    DampingInterpolant::new(spec)
}

fn synth(a: SynthArgs) -> mems_noise::Result<()> {
    let text = at_path(
        &a.geometry,
        std::fs::read_to_string(&a.geometry).map_err(Error::from),
    )?;
    let geo: GeometryFile = toml::from_str(&text)?;
    let grid = grid_from(&a.grid, (SYNTH_FMIN, SYNTH_FMAX, SYNTH_POINTS))?;
    let trunc = geo.series.max_index.unwrap_or_default();
    let spec = mems_noise::synth_spectrum(&geo.plate, &geo.gas, &grid, trunc)?;
    spec.write_csv_path(&a.out)?;
    eprintln!(
        "synth: {} rows, {:.6e} to {:.6e} Hz, beta {:.4}, wrote {}",
        spec.rows().len(),
        grid[0],
        grid[grid.len() - 1],
        geo.plate.beta(),
        a.out.display()
    );
    Ok(())
}

fn noise(a: NoiseArgs) -> mems_noise::Result<()> {
    let interp = load_interp(&a.input)?;
    let r = &a.resonator;
    let params = ResonatorParams::new(r.mass, r.kspring, r.temp)?;
    let (lo, hi) = interp.domain();
    let grid = grid_from(&a.grid, (lo, hi, interp.spectrum().rows().len()))?;
    let anchor: AnchorRule = a.white_anchor.parse()?;
    let signal = a.signal_accel.map(|s| move |_: f64| s);
    let spectra = match &signal {
        Some(s) => noise_spectra(&interp, &params, &grid, anchor, Some(s))?,
        None => noise_spectra(&interp, &params, &grid, anchor, None)?,
    };
    std::fs::write(&a.out, spectra.to_csv())?;

    let (i_min, z_min) = spectra
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.accel_noise))
        .fold(
            (0, f64::INFINITY),
            |acc, x| if x.1 < acc.1 { x } else { acc },
        );
    eprintln!(
        "noise: {} points, minimum input noise {:.6e} (m/s^2)/rtHz at {:.6e} Hz, wrote {}",
        spectra.records.len(),
        z_min,
        spectra.records[i_min].freq_hz,
        a.out.display()
    );
    if let Some(p) = &a.plot_script {
        std::fs::write(p, plot_script(&a.out, spectra.has_snr()))?;
        eprintln!("noise: gnuplot script {}", p.display());
    }
    Ok(())
}

fn plot_script(csv: &Path, with_snr: bool) -> String {
    let csv = std::fs::canonicalize(csv).unwrap_or_else(|_| csv.to_path_buf());
    let csv = csv.display().to_string().replace('\'', "''");
    let mut s = String::new();
    s += "# gnuplot -p <this file>\n";
    s += "set datafile separator ','\n";
    s += "set key autotitle columnhead\n";
    s += "set logscale xy\n";
    s += "set grid\n";
    s += "set xlabel 'frequency [Hz]'\n";
    s += if with_snr {
        "set multiplot layout 3,1\n"
    } else {
        "set multiplot layout 2,1\n"
    };
    s += "set ylabel 'displacement noise [m/sqrt(Hz)]'\n";
    s += &format!("plot '{csv}' using 1:4 with lines title 'frequency-dependent', '' using 1:5 with lines dt 2 title 'white baseline'\n");
    s += "set ylabel 'input acceleration noise [(m/s^2)/sqrt(Hz)]'\n";
    s += &format!("plot '{csv}' using 1:3 with lines title 'frequency-dependent', '' using 1:6 with lines dt 2 title 'white baseline'\n");
    if with_snr {
        s += "set ylabel 'SNR per sqrt(Hz)'\n";
        s += &format!("plot '{csv}' using 1:7 with lines title 'snr'\n");
    }
    s += "unset multiplot\n";
    s
}

fn fit(a: FitArgs) -> mems_noise::Result<()> {
    let interp = load_interp(&a.input)?;
    let (lo, hi) = interp.domain();
    let grid = grid_from(&a.grid, (lo, hi, FIT_POINTS))?;
    let points = series_rl_samples(&interp, &grid)?;
    let opts = FitOptions {
        n_starts: a.starts,
        ..FitOptions::default()
    };
    let model = match mems_noise::fit_branches_with(&points, a.branches, &opts) {
        Ok(m) => m,
        Err(Error::Fit {
            best,
            residual,
            starts,
        }) => {
            eprintln!("fit: no start converged; best residual {residual:.6e} over {starts} starts");
            print_branches(&best);
            return Err(Error::Fit {
                best,
                residual,
                starts,
            });
        }
        Err(e) => return Err(e),
    };
    model.write(&a.out)?;
    eprintln!(
        "fit: {} branches over {:.6e} to {:.6e} Hz, residual {:.6e}, wrote {}",
        model.branches().len(),
        grid[0],
        grid[grid.len() - 1],
        model.fit_residual(),
        a.out.display()
    );
    print_branches(&model);
    Ok(())
}

fn print_branches(model: &LumpedRlModel) {
    eprintln!(
        "  {:>3} {:>16} {:>16} {:>16}",
        "k", "r [N s/m]", "l [N s^2/m]", "corner [Hz]"
    );
    for (k, b) in model.branches().iter().enumerate() {
        eprintln!(
            "  {:>3} {:>16.6e} {:>16.6e} {:>16.6e}",
            k + 1,
            b.r,
            b.l,
            b.corner() / (2.0 * std::f64::consts::PI)
        );
    }
}

fn export(a: ExportArgs) -> mems_noise::Result<()> {
    let model = at_path(&a.input, LumpedRlModel::read(&a.input))?;
    let r = &a.resonator;
    let params = ResonatorParams::new(r.mass, r.kspring, r.temp)?;
    let text = mems_noise::netlist(&model, &params);
    std::fs::write(&a.out, &text)?;
    let c = mems_noise::validate_netlist(&text)?;
    eprintln!(
        "export-spice: {} R, {} L, {} C, wrote {}",
        c.resistors,
        c.inductors,
        c.capacitors,
        a.out.display()
    );
    Ok(())
}

fn optimize(a: OptimizeArgs) -> mems_noise::Result<()> {
    let interp = load_interp(&a.input)?;
    let cfg = at_path(&a.objective, ObjectiveConfig::read(&a.objective))?;
    let result = optimize_spring(&cfg, &interp, a.mass, a.temp)?;
    std::fs::write(&a.out, result.to_json() + "\n")?;
    eprint!("{}", result.summary_table());
    if result.on_boundary {
        eprintln!(
            "warning: optimum lies on the search boundary; consider widening k_range_n_per_m"
        );
    }
    if !result.breakdown.resonance_in_domain {
        eprintln!("warning: resonance at the optimum lies outside the damping table");
    }
    eprintln!("optimize: wrote {}", a.out.display());
    Ok(())
}
