//! Squeeze-film damping and mechano-thermal noise for MEMS resonators.
//!
//! Pipeline: damping table (synthesized or measured) → interpolant →
//! noise spectra, lumped RL macromodel with SPICE export, and a
//! spring-constant optimizer.

pub mod damping;
pub mod error;
pub mod fit;
pub mod grid;
pub mod macromodel;
pub mod noise;
pub mod optimizer;
pub mod pchip;
pub mod spice;
pub mod squeeze_film;

pub use damping::{build_interpolant, DampingInterpolant, DampingRow, DampingSpectrum};
pub use error::{Error, Result};
pub use fit::{fit_branches, fit_branches_with, FitOptions};
pub use macromodel::{LumpedRlModel, RlBranch, SeriesRlPoint};
pub use noise::{AnchorRule, NoiseSpectra, ResonatorParams};
pub use optimizer::{optimize_spring, DesignResult, ObjectiveBreakdown, ObjectiveConfig};
pub use spice::{export_spice, netlist, validate_netlist};
pub use squeeze_film::{synth_spectrum, GasProperties, PlateGeometry, SeriesTruncation};
