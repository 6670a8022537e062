//! SPICE subcircuit export of the resonator with its gas-film macromodel.
//!
//! Mobility analogy: force is current, velocity is voltage. Everything that
//! shares the plate velocity hangs between the port `n1` and ground:
//!
//! - proof mass `m` → `C1 = m`
//! - mechanical spring `k_s` → `L<n+1> = 1 / k_s`
//! - gas film → `R<k> ‖ L<k>` stages in series from `n1` down to ground
//!
//! The film resistors are the only dissipative elements, so a SPICE noise
//! analysis attaches thermal noise to exactly those cards.

use std::collections::HashSet;
use std::io::Write;

use crate::error::{Error, Result};
use crate::macromodel::LumpedRlModel;
use crate::noise::ResonatorParams;

pub const SUBCKT_NAME: &str = "MEMS_RESONATOR";

/// 12 significant digits.
fn val(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn netlist(model: &LumpedRlModel, params: &ResonatorParams) -> String {
    let mut out = Vec::new();
    export_spice(model, params, &mut out).expect("writing to a Vec cannot fail");
    String::from_utf8(out).expect("netlist is ASCII")
}

pub fn export_spice(
    model: &LumpedRlModel,
    params: &ResonatorParams,
    mut out: impl Write,
) -> Result<()> {
    let n = model.branches().len();
    let (lo, hi) = model.fit_band_hz();
    let t = params.temperature_k();
    writeln!(out, "* Squeeze-film resonator macromodel")?;
    writeln!(
        out,
        "* analogy: mobility (force = current [A], velocity = voltage [V])"
    )?;
    writeln!(
        out,
        "* port n1 = plate velocity; drive with a current source to apply force"
    )?;
    writeln!(out, "* air branches: {n} parallel R-L stages in series")?;
    writeln!(out, "* fit band: {} Hz to {} Hz", val(lo), val(hi))?;
    writeln!(
        out,
        "* fit residual (relative RMS): {}",
        val(model.fit_residual())
    )?;
    writeln!(out, "* mass: {} kg", val(params.mass_kg()))?;
    writeln!(
        out,
        "* spring constant: {} N/m",
        val(params.k_spring_n_per_m())
    )?;
    writeln!(out, "* temperature: {} K ({} C)", val(t), val(t - 273.15))?;
    writeln!(out, "* thermal noise sources: R1..R{n} only")?;
    writeln!(out, ".SUBCKT {SUBCKT_NAME} n1")?;
    writeln!(out, "C1 n1 0 {}", val(params.mass_kg()))?;
    writeln!(
        out,
        "L{} n1 0 {}",
        n + 1,
        val(1.0 / params.k_spring_n_per_m())
    )?;
    for (k, br) in model.branches().iter().enumerate() {
        let a = format!("n{}", k + 1);
        let b = if k + 1 == n {
            "0".to_string()
        } else {
            format!("n{}", k + 2)
        };
        writeln!(out, "R{} {a} {b} {}", k + 1, val(br.r))?;
        writeln!(out, "L{} {a} {b} {}", k + 1, val(br.l))?;
    }
    writeln!(out, ".ENDS {SUBCKT_NAME}")?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ElementCensus {
    pub resistors: usize,
    pub inductors: usize,
    pub capacitors: usize,
}

/// Structural check of an emitted netlist: one `.SUBCKT`/`.ENDS` pair,
/// R/L/C cards with two nodes and a positive value, unique element names.
pub fn validate_netlist(text: &str) -> Result<ElementCensus> {
    let mut census = ElementCensus::default();
    let mut names = HashSet::new();
    let mut in_subckt = false;
    let mut closed = false;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let head = tokens[0].to_ascii_uppercase();
        match head.as_str() {
            ".SUBCKT" => {
                if in_subckt || closed || tokens.len() < 3 {
                    return Err(Error::Schema(format!("line {line_no}: malformed .SUBCKT")));
                }
                in_subckt = true;
            }
            ".ENDS" => {
                if !in_subckt {
                    return Err(Error::Schema(format!(
                        "line {line_no}: .ENDS without .SUBCKT"
                    )));
                }
                in_subckt = false;
                closed = true;
            }
            _ => {
                if !in_subckt {
                    return Err(Error::Schema(format!(
                        "line {line_no}: element outside subcircuit"
                    )));
                }
                if tokens.len() != 4 {
                    return Err(Error::Schema(format!(
                        "line {line_no}: expected `<name> <n+> <n-> <value>`"
                    )));
                }
                let value: f64 = tokens[3].parse().map_err(|_| {
                    Error::Schema(format!("line {line_no}: bad value `{}`", tokens[3]))
                })?;
                if !(value.is_finite() && value > 0.0) {
                    return Err(Error::Schema(format!(
                        "line {line_no}: value must be positive"
                    )));
                }
                if tokens[1] == tokens[2] {
                    return Err(Error::Schema(format!(
                        "line {line_no}: element shorted to itself"
                    )));
                }
                if !names.insert(head.clone()) {
                    return Err(Error::Schema(format!(
                        "line {line_no}: duplicate element {head}"
                    )));
                }
                match head.as_bytes()[0] {
                    b'R' => census.resistors += 1,
                    b'L' => census.inductors += 1,
                    b'C' => census.capacitors += 1,
                    _ => {
                        return Err(Error::Schema(format!(
                            "line {line_no}: unsupported element {head}"
                        )))
                    }
                }
            }
        }
    }
    if !closed {
        return Err(Error::Schema("missing .SUBCKT/.ENDS block".into()));
    }
    Ok(census)
}
